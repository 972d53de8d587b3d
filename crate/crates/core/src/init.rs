//! Warm starts for the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::losses::{Link, LossModel};
use crate::manifold::{trim, trunc};
use crate::pruning::RankKey;
use crate::tensor::{check_ranks, hosvd, leading_left_vectors, DenseTensor, Matrix, Shape, TuckerTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub rank: Vec<usize>,
    pub mu1: f64,
    /// HOOI sweeps.
    pub t_max: usize,
    /// Frank–Wolfe iterations for the binary program.
    pub fw_iters: usize,
    /// `ℓ∞` bound for the binary program.
    pub zeta: f64,
}

impl InitConfig {
    pub fn new(shape: &Shape, rank: Vec<usize>) -> Self {
        Self {
            rank,
            mu1: default_mu1(shape),
            t_max: 10,
            fw_iters: 100,
            zeta: 1.0,
        }
    }

    pub fn validate(&self, shape: &Shape) -> Result<()> {
        check_ranks(shape, &self.rank)?;
        if !(self.mu1 >= 1.0 && self.mu1.is_finite()) {
            return Err(invalid("mu1", format!("must be at least 1, got {}", self.mu1)));
        }
        if self.t_max == 0 {
            return Err(invalid("t_max", "at least one HOOI sweep is required"));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(invalid("zeta", format!("must be positive and finite, got {}", self.zeta)));
        }
        Ok(())
    }
}

/// `2^m + ln d̄`
pub fn default_mu1(shape: &Shape) -> f64 {
    2f64.powi(shape.order() as i32) + (shape.max_dim() as f64).ln()
}

/// `η = 16 μ1 ‖T‖_F / (7 √d*)`
pub fn trim_level(mu1: f64, norm: f64, numel: usize) -> f64 {
    16.0 * mu1 * norm / (7.0 * (numel as f64).sqrt())
}

/// Higher-order orthogonal iteration started from the HOSVD. Each sweep
/// updates the modes in order, using the already updated factors of earlier
/// modes.
pub fn hooi(y: &DenseTensor, r: &[usize], t_max: usize) -> Result<TuckerTensor> {
    if t_max == 0 {
        return Err(invalid("t_max", "at least one HOOI sweep is required"));
    }
    let start = hosvd(y, r)?;
    if y.max_abs() == 0.0 {
        return Ok(start);
    }
    let mut factors = start.factors().to_vec();
    for _ in 0..t_max {
        for mode in 0..r.len() {
            let refs: Vec<&Matrix> = factors.iter().collect();
            let partial = y.contract_all(&refs, Some(mode));
            factors[mode] = leading_left_vectors(&partial, mode, r[mode]);
        }
    }
    let refs: Vec<&Matrix> = factors.iter().collect();
    let core = y.contract_all(&refs, None);
    TuckerTensor::new(core, factors)
}

/// Outcome of [`init_rpca`] with the thresholds it used.
#[derive(Clone, Debug)]
pub struct RpcaInit {
    pub t_hat: TuckerTensor,
    /// Order statistic separating the zeroed outlier candidates.
    pub tau0: f64,
    /// Truncation level applied before HOOI.
    pub tau: f64,
    /// Number of entries zeroed when estimating the scale.
    pub zeroed: usize,
    pub notes: Vec<String>,
}

/// Initialization for the Gaussian model with sparse corruptions.
pub fn init_rpca(a: &DenseTensor, r: &[usize], mu1: f64, t_max: usize) -> Result<RpcaInit> {
    check_ranks(a.shape(), r)?;
    let shape = a.shape();
    let m = shape.order() as f64;
    let ln_dbar = (shape.max_dim() as f64).ln();
    let numel = shape.numel();
    let p = (1.0 / (8.0 * mu1 * mu1)).min(1.0 / (64.0 * m * ln_dbar));
    let k = (p * numel as f64).floor() as usize;
    let mut notes = Vec::new();
    let tau0 = if k == 0 {
        notes.push(format!("outlier budget floor(p d*) is zero for p = {p:.3e}; nothing is zeroed"));
        a.max_abs()
    } else {
        kth_largest_magnitude(a.data(), k.min(numel))
    };
    let a0 = a.map(|v| if v.abs() > tau0 { 0.0 } else { v });
    let zeroed = a.data().iter().filter(|v| v.abs() > tau0).count();
    let tau = 10.0 * (m * ln_dbar).sqrt() * mu1 * a0.frobenius_norm() / (numel as f64).sqrt();
    let t = hooi(&trunc(a, tau), r, t_max)?;
    let eta = trim_level(mu1, t.frobenius_norm(), numel);
    let t_hat = trim(&t.to_dense(), eta, r)?;
    Ok(RpcaInit {
        t_hat,
        tau0,
        tau,
        zeroed,
        notes,
    })
}

/// `k`-th largest magnitude (1-based) under the deterministic rank order.
pub(crate) fn kth_largest_magnitude(data: &[f64], k: usize) -> f64 {
    let mut keys: Vec<RankKey> = data
        .iter()
        .enumerate()
        .map(|(flat, v)| RankKey {
            magnitude: v.abs(),
            flat,
        })
        .collect();
    let (_, kth, _) = keys.select_nth_unstable_by(k - 1, |x, y| {
        y.magnitude.total_cmp(&x.magnitude).then(x.flat.cmp(&y.flat))
    });
    kth.magnitude
}

/// Outcome of [`init_binary`].
#[derive(Clone, Debug)]
pub struct BinaryInit {
    pub t_hat: TuckerTensor,
    /// Objective after every accepted Frank–Wolfe step, starting at the origin.
    pub objective: Vec<f64>,
    /// The matrix iterate reshaped back to a tensor.
    pub estimate: DenseTensor,
}

/// Initialization for binary observations: approximately minimizes the
/// negative log-likelihood over a nuclear-norm ball intersected with an
/// `ℓ∞` box on the square-ish reshaping, then trims at rank `r`.
pub fn init_binary(
    a: &DenseTensor,
    link: Link,
    r: &[usize],
    zeta: f64,
    mu1: f64,
    fw_iters: usize,
) -> Result<BinaryInit> {
    check_ranks(a.shape(), r)?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(invalid("zeta", format!("must be positive and finite, got {zeta}")));
    }
    if a.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidObservation("binary initialization needs 0/1 entries".into()));
    }
    let shape = a.shape();
    let dims = shape.dims();
    let m0 = dims.len() / 2;
    let rows: usize = dims[..m0].iter().product();
    let cols: usize = dims[m0..].iter().product();
    let r_rows: usize = r[..m0].iter().product();
    let r_cols: usize = r[m0..].iter().product();
    let radius = zeta * ((shape.numel() * r_rows.min(r_cols)) as f64).sqrt();

    let obs = a.data();
    let objective_of = |x: &[f64]| -> f64 { x.iter().zip(obs).map(|(&xv, &av)| link.neg_log_lik(av, xv)).sum() };

    // Row-major `rows × cols` matrix stored flat, matching the tensor layout.
    let mut x = vec![0.0; shape.numel()];
    let mut objective = vec![objective_of(&x)];
    for k in 0..fw_iters {
        let grad: Vec<f64> = x
            .iter()
            .zip(obs)
            .map(|(&xv, &av)| link.neg_log_lik_derivative(av, xv))
            .collect();
        let gmat = Matrix::from_row_slice(rows, cols, &grad);
        let Some((u, v)) = top_singular_pair(&gmat) else {
            break;
        };
        // Vertex −R u vᵀ minimizes ⟨G, S⟩ over the ball.
        let current = *objective.last().expect("seeded with the origin");
        let mut step = 2.0 / (k as f64 + 2.0);
        let mut accepted = None;
        for _ in 0..30 {
            let candidate: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(flat, &xv)| {
                    let s = -radius * u[flat / cols] * v[flat % cols];
                    ((1.0 - step) * xv + step * s).clamp(-zeta, zeta)
                })
                .collect();
            let value = objective_of(&candidate);
            if value <= current {
                accepted = Some((candidate, value));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, value)) => {
                x = candidate;
                objective.push(value);
            }
            None => break,
        }
    }

    let estimate = DenseTensor::new(shape.clone(), x)?;
    let t0 = hosvd(&estimate, r)?;
    let eta = trim_level(mu1, t0.frobenius_norm(), shape.numel());
    let t_hat = trim(&t0.to_dense(), eta, r)?;
    Ok(BinaryInit {
        t_hat,
        objective,
        estimate,
    })
}

/// Leading singular pair by power iteration on the smaller Gram side.
fn top_singular_pair(g: &Matrix) -> Option<(Vec<f64>, Vec<f64>)> {
    let norm = g.norm();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let ones = nalgebra::DVector::from_element(g.nrows(), 1.0);
    let mut v = g.tr_mul(&ones);
    if v.norm() < 1e-12 * norm {
        v = nalgebra::DVector::from_fn(g.ncols(), |i, _| if i == 0 { 1.0 } else { 0.0 });
    }
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..200 {
        let u = g * &v;
        let next = g.tr_mul(&u);
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        let next = next / n;
        let delta = (&next - &v).norm();
        v = next;
        let s = n.sqrt();
        if (s - sigma).abs() <= 1e-12 * s && delta < 1e-9 {
            break;
        }
        sigma = s;
    }
    let u = g * &v;
    let un = u.norm();
    if un == 0.0 {
        return None;
    }
    Some(((u / un).as_slice().to_vec(), v.as_slice().to_vec()))
}

/// Initialization for Poisson counts: HOSVD of `ln((y + ½)/I)`, then trim.
pub fn init_poisson(y: &DenseTensor, intensity: f64, r: &[usize], mu1: f64) -> Result<TuckerTensor> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(invalid("intensity", format!("must be positive, got {intensity}")));
    }
    if y.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidObservation("counts must be non-negative".into()));
    }
    let log_rates = y.map(|c| ((c + 0.5) / intensity).ln());
    let t0 = hosvd(&log_rates, r)?;
    let eta = trim_level(mu1, t0.frobenius_norm(), y.shape().numel());
    trim(&t0.to_dense(), eta, r)
}

/// The model's own warm start.
pub fn initialize(model: &LossModel, cfg: &InitConfig) -> Result<TuckerTensor> {
    cfg.validate(model.shape())?;
    match model {
        LossModel::Gaussian { a } => Ok(init_rpca(a, &cfg.rank, cfg.mu1, cfg.t_max)?.t_hat),
        LossModel::Bernoulli { a, link } => {
            Ok(init_binary(a, *link, &cfg.rank, cfg.zeta, cfg.mu1, cfg.fw_iters)?.t_hat)
        }
        LossModel::Poisson { y, intensity } => init_poisson(y, *intensity, &cfg.rank, cfg.mu1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{normal_tensor, random_tucker, rng};

    #[test]
    fn hooi_fixed_point_and_validation() {
        let t = random_tucker(&mut rng(30), &[7, 6, 5], &[2, 3, 2]).to_dense();
        let h = hooi(&t, &[2, 3, 2], 1).unwrap();
        assert!(h.to_dense().distance(&t).unwrap() < 1e-10 * t.frobenius_norm());
        assert!(hooi(&t, &[2, 3, 2], 0).is_err());
    }

    #[test]
    fn hooi_objective_ascends() {
        let y = normal_tensor(&mut rng(31), &[8, 7, 6]);
        let r = [2, 2, 2];
        let mut last = hosvd(&y, &r).unwrap().frobenius_norm();
        for t_max in 1..6 {
            let now = hooi(&y, &r, t_max).unwrap().frobenius_norm();
            assert!(now >= last - 1e-10, "{now} < {last}");
            last = now;
        }
    }

    #[test]
    fn rpca_init_exact_on_clean_input() {
        let t = random_tucker(&mut rng(32), &[12, 12, 12], &[2, 2, 2]).to_dense();
        let shape = t.shape().clone();
        let out = init_rpca(&t, &[2, 2, 2], default_mu1(&shape), 5).unwrap();
        assert!(out.t_hat.to_dense().distance(&t).unwrap() <= 1e-8 * t.frobenius_norm());
    }

    #[test]
    fn kth_largest_breaks_ties_deterministically() {
        let data = [1.0, -3.0, 3.0, 2.0];
        assert_eq!(kth_largest_magnitude(&data, 1), 3.0);
        assert_eq!(kth_largest_magnitude(&data, 3), 2.0);
        assert_eq!(kth_largest_magnitude(&data, 4), 1.0);
    }

    #[test]
    fn poisson_constant_cases() {
        let shape = Shape::new(vec![4, 5, 3]).unwrap();
        let zeros = DenseTensor::zeros(shape.clone());
        let mu1 = default_mu1(&shape);
        let t = init_poisson(&zeros, 10.0, &[1, 1, 1], mu1).unwrap().to_dense();
        let expected = (0.5f64 / 10.0).ln();
        assert!(t.data().iter().all(|v| (v - expected).abs() < 1e-12));

        let big = DenseTensor::filled(shape, 1e6);
        let t = init_poisson(&big, 1e6, &[1, 1, 1], mu1).unwrap().to_dense();
        assert!(t.max_abs() < 1e-6);
    }

    #[test]
    fn binary_zero_iterations_give_zero() {
        let a = DenseTensor::filled(Shape::new(vec![4, 4, 4]).unwrap(), 1.0);
        let out = init_binary(&a, Link::logistic(1.0).unwrap(), &[1, 1, 1], 1.0, 10.0, 0).unwrap();
        assert_eq!(out.t_hat.frobenius_norm(), 0.0);
        assert_eq!(out.objective.len(), 1);
    }
}
