//! Outer iterations: Riemannian gradient descent with gradient pruning, its
//! low-rank-only variant, a projected-gradient baseline and BIC selection.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::init::{default_mu1, initialize, trim_level, InitConfig};
use crate::losses::{LossModel, ModelKind};
use crate::manifold::{entrywise_truncate, tangent_project};
use crate::pruning::gradient_prune;
use crate::tensor::io::fmt_f64;
use crate::tensor::{check_ranks, hosvd, hosvd_factored, DenseTensor, Matrix, SparseTensor, TuckerTensor};

/// Step-size window under which the Gaussian contraction guarantee holds.
pub const GAUSSIAN_BETA_WINDOW: (f64, f64) = (0.005, 0.36);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: Vec<usize>,
    /// Target slice sparsity.
    pub alpha: f64,
    /// Pruning uses level `γα`.
    pub gamma: f64,
    pub mu1: f64,
    pub beta: f64,
    /// Box for the pruned entries; `∞` only for the Gaussian model.
    /// Defaults: `∞` Gaussian, `1` Bernoulli, `ζ` Poisson.
    pub k_pr: f64,
    pub l_max: usize,
    pub rel_tol: f64,
    /// Reject step sizes outside the model's admissible window instead of
    /// only warning.
    pub theory_mode: bool,
    /// Run BIC cells one after another rather than on the thread pool.
    pub deterministic: bool,
}

impl SolverConfig {
    /// Defaults for `model`; `zeta` is the `ℓ∞` scale at which the
    /// curvature bounds of non-Gaussian losses are evaluated.
    pub fn new(model: &LossModel, rank: Vec<usize>, zeta: f64) -> Self {
        Self {
            rank,
            alpha: 0.0,
            gamma: 1.1,
            mu1: default_mu1(model.shape()),
            beta: default_beta(model, zeta),
            k_pr: match model.kind() {
                ModelKind::Gaussian => f64::INFINITY,
                ModelKind::Bernoulli => 1.0,
                ModelKind::Poisson => zeta,
            },
            l_max: 100,
            rel_tol: 1e-3,
            theory_mode: false,
            deterministic: true,
        }
    }

    /// Checks the configuration against `model` and returns warnings for
    /// accepted but unsupported choices.
    pub fn validate(&self, model: &LossModel) -> Result<Vec<String>> {
        check_ranks(model.shape(), &self.rank)?;
        let mut warnings = Vec::new();
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be at least 1, got {}", self.gamma)));
        }
        if !(self.mu1 > 0.0 && self.mu1.is_finite()) {
            return Err(invalid("mu1", format!("must be positive, got {}", self.mu1)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {}", self.beta)));
        }
        if !(self.k_pr > 0.0) {
            return Err(invalid("k_pr", format!("must be positive or infinite, got {}", self.k_pr)));
        }
        if self.k_pr.is_infinite() && model.kind() != ModelKind::Gaussian {
            return Err(invalid("k_pr", "an infinite box is only meaningful for the Gaussian model"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(invalid("rel_tol", format!("must be non-negative, got {}", self.rel_tol)));
        }
        if model.kind() == ModelKind::Gaussian {
            let (lo, hi) = GAUSSIAN_BETA_WINDOW;
            if !(lo..=hi).contains(&self.beta) {
                let msg = format!("beta = {} lies outside [{lo}, {hi}]", self.beta);
                if self.theory_mode {
                    return Err(invalid("beta", msg));
                }
                warnings.push(msg);
            }
        }
        Ok(warnings)
    }

    /// Pruning level `min(γα, 1)`.
    pub fn alpha_eff(&self) -> f64 {
        (self.gamma * self.alpha).min(1.0)
    }
}

/// `0.3` for the Gaussian loss, `0.3 b_l / b_u²` otherwise.
pub fn default_beta(model: &LossModel, zeta: f64) -> f64 {
    match model.kind() {
        ModelKind::Gaussian => 0.3,
        _ => {
            let (lo, hi) = model.curvature_bounds(zeta);
            0.3 * lo / (hi * hi)
        }
    }
}

/// Ground truth used only to annotate the trace.
#[derive(Clone, Debug)]
pub struct Truth {
    pub t: DenseTensor,
    pub s: SparseTensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss: f64,
    /// `‖T̂_l − T̂_{l−1}‖_F / ‖T̂_l‖_F`; absent for the starting point.
    pub rel_change: Option<f64>,
    /// Trimming level that produced this iterate (`∞` when none applies).
    pub zeta: f64,
    pub supp_size: usize,
    pub rel_err_t: Option<f64>,
    pub err_s: Option<f64>,
    /// Whether the retraction clipped entries at `ζ/2`. Not serialized.
    pub trimmed: bool,
    /// Wall time of the step that produced this iterate. Not serialized.
    pub step_secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub const HEADER: &'static str = "iter,loss,rel_change,zeta,supp_size";
    pub const TRUTH_COLUMNS: &'static str = ",rel_err_T,err_S";

    pub fn has_truth(&self) -> bool {
        self.records.iter().any(|r| r.rel_err_t.is_some())
    }

    /// CSV with header `iter,loss,rel_change,zeta,supp_size[,rel_err_T,err_S]`.
    pub fn to_csv(&self) -> String {
        let truth = self.has_truth();
        let mut out = String::from(Self::HEADER);
        if truth {
            out.push_str(Self::TRUTH_COLUMNS);
        }
        out.push('\n');
        for r in &self.records {
            let change = r.rel_change.map(fmt_f64).unwrap_or_default();
            let _ = write!(out, "{},{},{},{},{}", r.iter, fmt_f64(r.loss), change, fmt_f64(r.zeta), r.supp_size);
            if truth {
                let fmt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
                let _ = write!(out, ",{},{}", fmt(r.rel_err_t), fmt(r.err_s));
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Mean wall time of the steps after the starting point.
    pub fn mean_step_secs(&self) -> f64 {
        let steps = &self.records[1.min(self.records.len())..];
        if steps.is_empty() {
            0.0
        } else {
            steps.iter().map(|r| r.step_secs).sum::<f64>() / steps.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIter,
    NumericalFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIter => "max_iter",
            Termination::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub t_hat: TuckerTensor,
    pub s_hat: SparseTensor,
    pub trace: SolverTrace,
    pub terminated_by: Termination,
    /// Set when the run stopped on a numerical failure.
    pub diagnostic: Option<String>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.terminated_by == Termination::Tolerance
    }

    /// Relative change stalled and the loss rose over the last ten steps.
    pub fn diverging(&self) -> bool {
        if self.terminated_by == Termination::Tolerance {
            return false;
        }
        let recs = &self.trace.records;
        recs.len() > 10 && recs[recs.len() - 1].loss > recs[recs.len() - 11].loss
    }

    /// The last retraction still clipped entries, so the iterate sits at a
    /// fixed point of the trimming rather than of the loss.
    pub fn trim_bound(&self) -> bool {
        self.trace.last().is_some_and(|r| r.trimmed)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Variant {
    Sparse,
    LowRank,
    Projected,
}

/// Riemannian gradient descent with gradient pruning of the sparse part.
pub fn rgrad_sparse(model: &LossModel, init: &TuckerTensor, cfg: &SolverConfig, truth: Option<&Truth>) -> Result<FitResult> {
    run(model, init, cfg, truth, Variant::Sparse)
}

/// Riemannian gradient descent on the low-rank part alone, retracting by
/// plain HOSVD.
pub fn rgrad_lowrank(model: &LossModel, init: &TuckerTensor, cfg: &SolverConfig, truth: Option<&Truth>) -> Result<FitResult> {
    run(model, init, cfg, truth, Variant::LowRank)
}

/// Full-gradient step followed by HOSVD projection.
pub fn pgd_lowrank(model: &LossModel, init: &TuckerTensor, cfg: &SolverConfig, truth: Option<&Truth>) -> Result<FitResult> {
    run(model, init, cfg, truth, Variant::Projected)
}

fn run(model: &LossModel, init: &TuckerTensor, cfg: &SolverConfig, truth: Option<&Truth>, variant: Variant) -> Result<FitResult> {
    cfg.validate(model)?;
    if init.shape() != model.shape() {
        return Err(Error::DimensionMismatch {
            expected: model.shape().to_string(),
            got: init.shape().to_string(),
        });
    }
    if init.ranks() != cfg.rank {
        return Err(invalid("rank", format!("initial point has rank {:?}, config asks {:?}", init.ranks(), cfg.rank)));
    }
    if let Some(tr) = truth {
        if tr.t.shape() != model.shape() || tr.s.shape() != model.shape() {
            return Err(Error::DimensionMismatch {
                expected: model.shape().to_string(),
                got: format!("truth of shape {}", tr.t.shape()),
            });
        }
    }
    let shape = model.shape().clone();
    let numel = shape.numel() as f64;
    let alpha_eff = cfg.alpha_eff();
    let prune = |t: &DenseTensor| -> Result<SparseTensor> {
        match variant {
            Variant::Sparse => gradient_prune(t, model, alpha_eff, cfg.k_pr),
            _ => Ok(SparseTensor::empty(shape.clone())),
        }
    };
    let truth_norm = truth.map(|tr| tr.t.frobenius_norm());
    let annotate = |rec: &mut TraceRecord, t: &DenseTensor, s: &SparseTensor| {
        if let (Some(tr), Some(norm)) = (truth, truth_norm) {
            let diff = t.distance(&tr.t).expect("shapes checked");
            rec.rel_err_t = Some(if norm > 0.0 { diff / norm } else { diff });
            rec.err_s = Some(s.distance(&tr.s).expect("shapes checked"));
        }
    };

    let start = Instant::now();
    let mut t_hat = init.clone();
    let mut t_dense = t_hat.to_dense();
    let mut s_hat = prune(&t_dense)?;
    let mut trace = SolverTrace::default();
    let loss0 = model.value(&s_hat.add_to_dense(&t_dense)?)?;
    let mut rec = TraceRecord {
        iter: 0,
        loss: loss0,
        rel_change: None,
        zeta: f64::INFINITY,
        supp_size: s_hat.nnz(),
        rel_err_t: None,
        err_s: None,
        trimmed: false,
        step_secs: start.elapsed().as_secs_f64(),
    };
    annotate(&mut rec, &t_dense, &s_hat);
    trace.records.push(rec);
    if !loss0.is_finite() {
        return Ok(failure(t_hat, s_hat, trace, "non-finite loss at the initial point".into()));
    }

    for l in 1..=cfg.l_max {
        let clock = Instant::now();
        let g = model.gradient(&s_hat.add_to_dense(&t_dense)?)?;
        let step = match variant {
            Variant::Projected => {
                let w = t_dense.zip_map(&g, |t, g| t - cfg.beta * g)?;
                hosvd(&w, &cfg.rank).map(|t| (t, f64::INFINITY, false))
            }
            _ => riemannian_step(&t_hat, &g, cfg, variant, numel),
        };
        let (t_next, zeta, trimmed) = match step {
            Ok(v) => v,
            Err(e @ (Error::RankDeficientCore { .. } | Error::RankDeficient { .. } | Error::NonFinite(_))) => {
                return Ok(failure(t_hat, s_hat, trace, format!("iteration {l}: {e}")));
            }
            Err(e) => return Err(e),
        };
        let next_dense = t_next.to_dense();
        let s_next = prune(&next_dense)?;
        let loss = model.value(&s_next.add_to_dense(&next_dense)?)?;
        let norm = next_dense.frobenius_norm();
        let change = next_dense.distance(&t_dense)?;
        let rel_change = if norm > 0.0 { change / norm } else { change };
        let step_secs = clock.elapsed().as_secs_f64();
        t_hat = t_next;
        t_dense = next_dense;
        s_hat = s_next;
        let mut rec = TraceRecord {
            iter: l,
            loss,
            rel_change: Some(rel_change),
            zeta,
            supp_size: s_hat.nnz(),
            rel_err_t: None,
            err_s: None,
            trimmed,
            step_secs,
        };
        annotate(&mut rec, &t_dense, &s_hat);
        trace.records.push(rec);
        if !loss.is_finite() || !rel_change.is_finite() {
            return Ok(failure(t_hat, s_hat, trace, format!("iteration {l}: non-finite loss")));
        }
        if rel_change < cfg.rel_tol {
            return Ok(FitResult {
                t_hat,
                s_hat,
                trace,
                terminated_by: Termination::Tolerance,
                diagnostic: None,
            });
        }
    }
    Ok(FitResult {
        t_hat,
        s_hat,
        trace,
        terminated_by: Termination::MaxIter,
        diagnostic: None,
    })
}

fn failure(t_hat: TuckerTensor, s_hat: SparseTensor, trace: SolverTrace, msg: String) -> FitResult {
    FitResult {
        t_hat,
        s_hat,
        trace,
        terminated_by: Termination::NumericalFailure,
        diagnostic: Some(msg),
    }
}

/// `T̂ − β P_T(G)` retracted to rank `r`, trimmed for the sparse variant.
/// Returns the new point, the trimming level and whether it clipped.
fn riemannian_step(t_hat: &TuckerTensor, g: &DenseTensor, cfg: &SolverConfig, variant: Variant, numel: f64) -> Result<(TuckerTensor, f64, bool)> {
    let v = tangent_project(t_hat, g)?;
    let (core, factors) = v.factored(1.0, -cfg.beta);
    let refs: Vec<Option<&Matrix>> = factors.iter().map(Some).collect();
    let w = core.multi_mode_product_unchecked(&refs);
    if !w.is_finite() {
        return Err(Error::NonFinite(w.data().iter().position(|x| !x.is_finite()).unwrap_or(0)));
    }
    let zeta = match variant {
        Variant::Sparse => trim_level(cfg.mu1, w.frobenius_norm(), numel as usize),
        _ => f64::INFINITY,
    };
    if zeta.is_infinite() || w.max_abs() <= zeta / 2.0 {
        Ok((hosvd_factored(&core, &factors, &cfg.rank)?, zeta, false))
    } else {
        Ok((hosvd(&entrywise_truncate(&w, zeta / 2.0), &cfg.rank)?, zeta, true))
    }
}

/// `(‖Ŝ‖_ℓ0 + Σ r_i d_i) ln d* − 2 ln L̂`. A zero Gaussian residual yields `−∞`.
pub fn bic_score(model: &LossModel, fit: &FitResult) -> Result<f64> {
    let shape = model.shape();
    let params = fit.s_hat.l0_norm() + fit.t_hat.ranks().iter().zip(shape.dims()).map(|(r, d)| r * d).sum::<usize>();
    let penalty = params as f64 * (shape.numel() as f64).ln();
    let fitted = fit.s_hat.add_to_dense(&fit.t_hat.to_dense())?;
    Ok(penalty + model.neg2_log_likelihood(&fitted)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicCell {
    pub rank: Vec<usize>,
    pub alpha: f64,
    /// `NaN` when the cell failed.
    pub bic: f64,
    pub converged: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicScan {
    /// Ranks outermost, alphas innermost.
    pub cells: Vec<BicCell>,
    /// Index of the smallest score; ties go to the earlier cell.
    pub best: Option<usize>,
}

impl BicScan {
    pub fn best_cell(&self) -> Option<&BicCell> {
        self.best.map(|i| &self.cells[i])
    }

    pub fn to_csv(&self, order: usize) -> String {
        let mut out = String::new();
        for k in 1..=order {
            let _ = write!(out, "r{k},");
        }
        out.push_str("alpha,bic,converged\n");
        for c in &self.cells {
            for r in &c.rank {
                let _ = write!(out, "{r},");
            }
            let _ = writeln!(out, "{},{},{}", fmt_f64(c.alpha), fmt_f64(c.bic), c.converged);
        }
        out
    }
}

/// Fits every `(rank, α)` cell with the model's warm start followed by
/// [`rgrad_sparse`] at `γ = 1`. The warm start depends only on the rank and
/// is shared across the α row. Failing cells are recorded, not fatal.
pub fn bic_scan(
    model: &LossModel,
    rank_grid: &[Vec<usize>],
    alpha_grid: &[f64],
    cfg: &SolverConfig,
    init_cfg: &InitConfig,
) -> Result<BicScan> {
    if rank_grid.is_empty() || alpha_grid.is_empty() {
        return Err(invalid("grid", "rank and alpha grids must be non-empty"));
    }
    let row = |rank: &Vec<usize>| -> Vec<BicCell> {
        let failed = |alpha: f64, note: String| BicCell {
            rank: rank.clone(),
            alpha,
            bic: f64::NAN,
            converged: false,
            note: Some(note),
        };
        let icfg = InitConfig {
            rank: rank.clone(),
            ..init_cfg.clone()
        };
        let start = match initialize(model, &icfg) {
            Ok(t) => t,
            Err(e) => return alpha_grid.iter().map(|&a| failed(a, format!("init: {e}"))).collect(),
        };
        alpha_grid
            .iter()
            .map(|&alpha| {
                let cell_cfg = SolverConfig {
                    rank: rank.clone(),
                    alpha,
                    gamma: 1.0,
                    ..cfg.clone()
                };
                let fit = match rgrad_sparse(model, &start, &cell_cfg, None) {
                    Ok(f) => f,
                    Err(e) => return failed(alpha, e.to_string()),
                };
                match bic_score(model, &fit) {
                    Ok(bic) => BicCell {
                        rank: rank.clone(),
                        alpha,
                        bic,
                        converged: fit.converged(),
                        note: match (&fit.diagnostic, bic == f64::NEG_INFINITY) {
                            (Some(d), _) => Some(d.clone()),
                            (None, true) => Some("zero residual".into()),
                            _ => None,
                        },
                    },
                    Err(e) => failed(alpha, e.to_string()),
                }
            })
            .collect()
    };
    let rows: Vec<Vec<BicCell>> = if cfg.deterministic {
        rank_grid.iter().map(row).collect()
    } else {
        rank_grid.par_iter().map(row).collect()
    };
    let cells: Vec<BicCell> = rows.into_iter().flatten().collect();
    let best = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.bic.is_nan())
        .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((_, b)) if b <= c.bic => best,
            _ => Some((i, c.bic)),
        })
        .map(|(i, _)| i);
    Ok(BicScan { cells, best })
}

/// Outcome of [`fit_with_escalation`].
#[derive(Clone, Debug)]
pub struct EscalatedFit {
    pub fit: FitResult,
    /// Configuration of the returned run.
    pub config: SolverConfig,
    /// Number of runs performed, at least one.
    pub attempts: usize,
}

/// Warm start plus [`rgrad_sparse`], retried at most four times. A diverging
/// run doubles `μ1` and grows `γ` by half; a run ending on a clipped
/// iterate only doubles `μ1`.
pub fn fit_with_escalation(model: &LossModel, cfg: &SolverConfig, init_cfg: &InitConfig, truth: Option<&Truth>) -> Result<EscalatedFit> {
    const RETRIES: usize = 4;
    let mut cfg = cfg.clone();
    let mut icfg = InitConfig {
        rank: cfg.rank.clone(),
        mu1: cfg.mu1,
        ..init_cfg.clone()
    };
    let mut attempts = 0;
    loop {
        attempts += 1;
        let start = initialize(model, &icfg)?;
        let fit = rgrad_sparse(model, &start, &cfg, truth)?;
        let diverging = fit.diverging();
        if !(diverging || fit.trim_bound()) || attempts > RETRIES {
            return Ok(EscalatedFit {
                fit,
                config: cfg,
                attempts,
            });
        }
        cfg.mu1 *= 2.0;
        if diverging {
            cfg.gamma *= 1.5;
        }
        icfg.mu1 = cfg.mu1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{normal_tensor, random_tucker, rng};

    fn gaussian_setup(seed: u64, dims: &[usize], r: &[usize]) -> (TuckerTensor, LossModel) {
        let truth = random_tucker(&mut rng(seed), dims, r);
        let model = LossModel::gaussian(truth.to_dense());
        (truth, model)
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let (truth, model) = gaussian_setup(40, &[8, 7, 6], &[2, 2, 2]);
        let cfg = SolverConfig::new(&model, vec![2, 2, 2], 1.0);
        for fit in [
            rgrad_sparse(&model, &truth, &cfg, None).unwrap(),
            rgrad_lowrank(&model, &truth, &cfg, None).unwrap(),
            pgd_lowrank(&model, &truth, &cfg, None).unwrap(),
        ] {
            assert_eq!(fit.terminated_by, Termination::Tolerance);
            assert_eq!(fit.trace.records.len(), 2);
            assert!(fit.t_hat.to_dense().distance(&truth.to_dense()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lowrank_recovers_from_perturbed_start() {
        let (truth, model) = gaussian_setup(41, &[12, 12, 12], &[2, 2, 2]);
        let dense = truth.to_dense();
        let noisy = dense.add(&normal_tensor(&mut rng(42), &[12, 12, 12]).scaled(0.02 * dense.max_abs())).unwrap();
        let start = hosvd(&noisy, &[2, 2, 2]).unwrap();
        let cfg = SolverConfig {
            rel_tol: 1e-13,
            l_max: 200,
            ..SolverConfig::new(&model, vec![2, 2, 2], 1.0)
        };
        let truth = Truth {
            t: dense.clone(),
            s: SparseTensor::empty(dense.shape().clone()),
        };
        for fit in [
            rgrad_lowrank(&model, &start, &cfg, Some(&truth)).unwrap(),
            pgd_lowrank(&model, &start, &cfg, Some(&truth)).unwrap(),
        ] {
            assert!(fit.trace.last().unwrap().rel_err_t.unwrap() < 1e-10);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let (truth, model) = gaussian_setup(43, &[5, 5, 5], &[1, 1, 1]);
        let cfg = SolverConfig {
            l_max: 1,
            rel_tol: 0.0,
            ..SolverConfig::new(&model, vec![1, 1, 1], 1.0)
        };
        let fit = rgrad_sparse(&model, &truth, &cfg, None).unwrap();
        assert_eq!(fit.terminated_by, Termination::MaxIter);
        let csv = fit.trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], SolverTrace::HEADER);
        assert!(lines[1].starts_with("0,0,,inf,0"));
    }

    #[test]
    fn config_validation() {
        let (_, model) = gaussian_setup(44, &[5, 5, 5], &[1, 1, 1]);
        let mut cfg = SolverConfig::new(&model, vec![1, 1, 1], 1.0);
        assert!(cfg.validate(&model).unwrap().is_empty());
        cfg.beta = 0.5;
        assert_eq!(cfg.validate(&model).unwrap().len(), 1);
        cfg.theory_mode = true;
        assert!(cfg.validate(&model).is_err());
        cfg.beta = 0.3;
        cfg.gamma = 0.5;
        assert!(cfg.validate(&model).is_err());
    }

    #[test]
    fn bic_penalty_without_sparse_part() {
        let (truth, model) = gaussian_setup(45, &[6, 5, 4], &[2, 2, 2]);
        let noise = normal_tensor(&mut rng(46), &[6, 5, 4]).scaled(0.1);
        let a = truth.to_dense().add(&noise).unwrap();
        let model_noisy = LossModel::gaussian(a.clone());
        let fit = FitResult {
            t_hat: truth.clone(),
            s_hat: SparseTensor::empty(a.shape().clone()),
            trace: SolverTrace::default(),
            terminated_by: Termination::Tolerance,
            diagnostic: None,
        };
        let numel = 120f64;
        let rss = noise.frobenius_norm().powi(2);
        let expected = (2.0 * 6.0 + 2.0 * 5.0 + 2.0 * 4.0) * numel.ln() + numel * rss.ln();
        assert!((bic_score(&model_noisy, &fit).unwrap() - expected).abs() < 1e-9 * expected.abs());
        assert_eq!(bic_score(&model, &fit).unwrap(), f64::NEG_INFINITY);
    }
}
