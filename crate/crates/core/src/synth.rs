//! Reproducible synthetic instances with ground truth.
//!
//! Every generator draws from `ChaCha20Rng::seed_from_u64(seed)` on its own
//! stream, so the low-rank part, the outliers, the noise and the observation
//! draws of one instance are independent and individually reproducible.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::losses::{Link, LossModel, ModelKind};
use crate::manifold::entrywise_truncate;
use crate::tensor::io::{load_lrst, load_sparse_csv, save_lrst, save_sparse_csv, write_atomic};
use crate::tensor::{check_ranks, hosvd, spectral_summary, DenseTensor, Matrix, Shape, SparseTensor, TuckerTensor};

/// Level at which the raw normals are clipped before the HOSVD.
pub const NORMAL_CLIP: f64 = 2.0;

/// Largest Poisson mean accepted by [`sample_poisson`].
pub const MAX_POISSON_MEAN: f64 = 1e12;

const STREAM_LOWRANK: u64 = 1;
const STREAM_SPARSE: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_OBSERVE: u64 = 4;

/// Generator for `seed` on `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Scale requested for the low-rank truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumTarget {
    /// HOSVD of the clipped normal tensor, unscaled.
    Natural,
    /// `max_j σ_1 = hi` and `min_j σ_{r_j} = lo`, reached by reshaping the core.
    Spectrum { lo: f64, hi: f64 },
    /// Whole tensor scaled so that `max_j σ_1 = hi`.
    TopSingular { hi: f64 },
    /// Whole tensor scaled so that `‖T‖_ℓ∞ = value`.
    MaxAbs { value: f64 },
}

/// Exact rank-`r` tensor from the HOSVD of a clipped standard normal
/// tensor, rescaled to `target`.
pub fn gen_lowrank(dims: &[usize], r: &[usize], seed: u64, target: SpectrumTarget) -> Result<TuckerTensor> {
    let shape = Shape::new(dims.to_vec())?;
    check_ranks(&shape, r)?;
    let mut rng = stream_rng(seed, STREAM_LOWRANK);
    let raw = DenseTensor::from_raw(shape.clone(), (0..shape.numel()).map(|_| rng.sample(StandardNormal)).collect());
    let base = hosvd(&entrywise_truncate(&raw, NORMAL_CLIP), r)?;
    match target {
        SpectrumTarget::Natural => Ok(base),
        SpectrumTarget::TopSingular { hi } => {
            check_level("hi", hi)?;
            let top = core_spectra(base.core())?.iter().map(|s| s[0]).fold(0.0, f64::max);
            Ok(rescale(base, hi / top))
        }
        SpectrumTarget::MaxAbs { value } => {
            check_level("value", value)?;
            let m = base.to_dense().max_abs();
            Ok(rescale(base, value / m))
        }
        SpectrumTarget::Spectrum { lo, hi } => {
            check_level("lo", lo)?;
            check_level("hi", hi)?;
            if lo > hi {
                return Err(Error::InfeasibleSpectrum(format!("lower target {lo} exceeds upper target {hi}")));
            }
            let core = shape_core_spectrum(base.core(), lo, hi)?;
            TuckerTensor::new(core, base.factors().to_vec())
        }
    }
}

fn check_level(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn rescale(tk: TuckerTensor, factor: f64) -> TuckerTensor {
    let core = tk.core().scaled(factor);
    TuckerTensor::new(core, tk.factors().to_vec()).expect("scaling keeps factors valid")
}

fn core_spectra(core: &DenseTensor) -> Result<Vec<Vec<f64>>> {
    (0..core.shape().order())
        .map(|mode| Ok(crate::tensor::singular_values(&core.matricize(mode)?)))
        .collect()
}

/// Alternately replaces the singular values of each core unfolding by an
/// evenly spaced ladder from `hi` down to `lo`. Orthonormal factors leave
/// these spectra unchanged in the full tensor.
fn shape_core_spectrum(core: &DenseTensor, lo: f64, hi: f64) -> Result<DenseTensor> {
    const SWEEPS: usize = 200;
    let r = core.dims().to_vec();
    let ladders: Vec<Vec<f64>> = r
        .iter()
        .map(|&rj| {
            if rj == 1 {
                vec![hi]
            } else {
                (0..rj).map(|k| hi - (hi - lo) * k as f64 / (rj - 1) as f64).collect()
            }
        })
        .collect();
    let energies: Vec<f64> = ladders.iter().map(|l| l.iter().map(|s| s * s).sum()).collect();
    if energies.iter().any(|e| (e - energies[0]).abs() > 1e-12 * energies[0]) {
        return Err(Error::InfeasibleSpectrum(format!(
            "ranks {r:?} give unequal energies to the ({lo}, {hi}) ladders in different modes"
        )));
    }
    let mut c = core.clone();
    for _ in 0..SWEEPS {
        for (mode, ladder) in ladders.iter().enumerate() {
            let svd = crate::tensor::truncated_svd(&c.matricize(mode)?, r[mode])?;
            let mut left = svd.left.clone();
            for (mut col, s) in left.column_iter_mut().zip(ladder) {
                col *= *s;
            }
            let m: Matrix = left * svd.right.transpose();
            c = DenseTensor::tensorize(&m, c.shape(), mode)?;
        }
    }
    let spectra = core_spectra(&c)?;
    let got_hi = spectra.iter().map(|s| s[0]).fold(0.0, f64::max);
    let got_lo = spectra.iter().zip(&r).map(|(s, &rj)| s[rj - 1]).fold(f64::INFINITY, f64::min);
    if (got_hi - hi).abs() > 0.05 * hi || (got_lo - lo).abs() > 0.05 * lo {
        return Err(Error::InfeasibleSpectrum(format!(
            "reached ({got_lo:.4}, {got_hi:.4}) for requested ({lo}, {hi})"
        )));
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueLaw {
    /// `amp · N(0, 1)`
    Gaussian,
    /// `amp`
    Constant,
}

/// Outliers at independent `Be(α)` positions, with the realized largest
/// slice fraction `α′`.
pub fn gen_sparse(dims: &[usize], alpha: f64, amp: f64, seed: u64, law: ValueLaw) -> Result<(SparseTensor, f64)> {
    let shape = Shape::new(dims.to_vec())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    if !amp.is_finite() {
        return Err(invalid("amp", "must be finite"));
    }
    let mut rng = stream_rng(seed, STREAM_SPARSE);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for flat in 0..shape.numel() {
        // Both draws are consumed for every entry so positions do not depend on the law.
        let hit = rng.random::<f64>() < alpha;
        let z: f64 = rng.sample(StandardNormal);
        if hit {
            let v = match law {
                ValueLaw::Gaussian => amp * z,
                ValueLaw::Constant => amp,
            };
            if v != 0.0 {
                indices.push(flat);
                values.push(v);
            }
        }
    }
    let s = SparseTensor::from_sorted_unchecked(shape, indices, values);
    let realized = s.max_slice_fraction();
    Ok((s, realized))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLaw {
    Gaussian { sigma: f64 },
    /// `scale · t_df`
    StudentT { df: f64, scale: f64 },
}

impl NoiseLaw {
    /// Standard deviation of one draw.
    pub fn effective_sigma(&self) -> Result<f64> {
        match *self {
            NoiseLaw::Gaussian { sigma } => {
                if sigma >= 0.0 && sigma.is_finite() {
                    Ok(sigma)
                } else {
                    Err(invalid("sigma", format!("must be non-negative, got {sigma}")))
                }
            }
            NoiseLaw::StudentT { df, scale } => {
                if !(df > 2.0 && df.is_finite()) {
                    return Err(invalid("df", format!("must exceed 2 for a finite variance, got {df}")));
                }
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(invalid("scale", format!("must be non-negative, got {scale}")));
                }
                Ok(scale * (df / (df - 2.0)).sqrt())
            }
        }
    }
}

/// `t` plus i.i.d. noise; also returns the noise standard deviation.
pub fn add_noise(t: &DenseTensor, law: NoiseLaw, seed: u64) -> Result<(DenseTensor, f64)> {
    let sigma = law.effective_sigma()?;
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let out = match law {
        NoiseLaw::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok((t.clone(), 0.0));
            }
            map_with_rng(t, |v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        }
        NoiseLaw::StudentT { df, scale } => {
            let dist = StudentT::new(df).map_err(|e| invalid("df", e.to_string()))?;
            map_with_rng(t, |v| v + scale * dist.sample(&mut rng))
        }
    };
    Ok((out, sigma))
}

/// Entrywise map in storage order, for closures that advance a generator.
fn map_with_rng(t: &DenseTensor, f: impl FnMut(f64) -> f64) -> DenseTensor {
    DenseTensor::from_raw(t.shape().clone(), t.data().iter().copied().map(f).collect())
}

/// Independent `Bernoulli(p(x_ω))` draws.
pub fn sample_bernoulli(logits: &DenseTensor, link: Link, seed: u64) -> Result<DenseTensor> {
    if let Some(pos) = logits.data().iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite(pos));
    }
    let mut rng = stream_rng(seed, STREAM_OBSERVE);
    Ok(map_with_rng(logits, |x| if rng.random::<f64>() < link.prob(x) { 1.0 } else { 0.0 }))
}

/// Independent `Poisson(I e^{t_ω})` counts.
pub fn sample_poisson(t: &DenseTensor, intensity: f64, seed: u64) -> Result<DenseTensor> {
    if !(intensity > 0.0 && intensity.is_finite()) {
        return Err(invalid("intensity", format!("must be positive, got {intensity}")));
    }
    let means: Vec<f64> = t.data().iter().map(|x| intensity * x.exp()).collect();
    if let Some(pos) = means.iter().position(|m| !(*m <= MAX_POISSON_MEAN)) {
        return Err(invalid("intensity", format!("mean {:e} at flat position {pos} exceeds {MAX_POISSON_MEAN:e}", means[pos])));
    }
    let mut rng = stream_rng(seed, STREAM_OBSERVE);
    let counts = means
        .iter()
        .map(|&m| {
            if m > 0.0 {
                Poisson::new(m).expect("mean is positive and bounded").sample(&mut rng).floor()
            } else {
                0.0
            }
        })
        .collect();
    DenseTensor::new(t.shape().clone(), counts)
}

/// Full parameter set of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub model: ModelKind,
    pub dims: Vec<usize>,
    pub rank: Vec<usize>,
    pub seed: u64,
    pub target: SpectrumTarget,
    pub alpha: f64,
    pub amp: f64,
    pub value_law: ValueLaw,
    /// Additive noise for the Gaussian model.
    pub noise: NoiseLaw,
    /// Link for the Bernoulli model.
    pub link: Option<Link>,
    /// Intensity for the Poisson model.
    pub intensity: Option<f64>,
}

impl InstanceParams {
    /// Gaussian model with natural-scale truth, Gaussian outliers and no noise.
    pub fn gaussian(dims: Vec<usize>, rank: Vec<usize>, seed: u64) -> Self {
        Self {
            model: ModelKind::Gaussian,
            dims,
            rank,
            seed,
            target: SpectrumTarget::Natural,
            alpha: 0.0,
            amp: 1.0,
            value_law: ValueLaw::Gaussian,
            noise: NoiseLaw::Gaussian { sigma: 0.0 },
            link: None,
            intensity: None,
        }
    }
}

/// Metadata stored next to an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub params: InstanceParams,
    /// Largest slice fraction of `truth_S`.
    pub alpha_realized: f64,
    /// Standard deviation of the additive noise.
    pub sigma_effective: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub truth_linf: f64,
    /// Digest of the experiment spec that produced the instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec_digest: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub observation: DenseTensor,
    pub truth_t: DenseTensor,
    pub truth_s: SparseTensor,
    pub meta: InstanceMeta,
}

pub const OBSERVATION_FILE: &str = "observation.lrst";
pub const TRUTH_T_FILE: &str = "truth_T.lrst";
pub const TRUTH_S_FILE: &str = "truth_S.csv";
pub const META_FILE: &str = "meta.json";

/// Draws a full instance: `T* + S* + Z` for the Gaussian model, binary
/// draws through the link or Poisson counts otherwise.
pub fn generate(params: &InstanceParams) -> Result<Instance> {
    let truth = gen_lowrank(&params.dims, &params.rank, params.seed, params.target)?;
    let truth_t = truth.to_dense();
    let summary = spectral_summary(&truth_t, &params.rank)?;
    let (truth_s, alpha_realized) = gen_sparse(&params.dims, params.alpha, params.amp, params.seed, params.value_law)?;
    let latent = truth_s.add_to_dense(&truth_t)?;
    let (observation, sigma_effective) = match params.model {
        ModelKind::Gaussian => add_noise(&latent, params.noise, params.seed)?,
        ModelKind::Bernoulli => {
            let link = params.link.ok_or_else(|| invalid("link", "required for the Bernoulli model"))?;
            (sample_bernoulli(&latent, link, params.seed)?, 0.0)
        }
        ModelKind::Poisson => {
            let i = params.intensity.ok_or_else(|| invalid("intensity", "required for the Poisson model"))?;
            (sample_poisson(&latent, i, params.seed)?, 0.0)
        }
    };
    Ok(Instance {
        meta: InstanceMeta {
            params: params.clone(),
            alpha_realized,
            sigma_effective,
            lambda_min: summary.lambda_min,
            lambda_max: summary.lambda_max,
            truth_linf: truth_t.max_abs(),
            spec_digest: None,
        },
        observation,
        truth_t,
        truth_s,
    })
}

impl Instance {
    /// Loss model matching the generating distribution.
    pub fn model(&self) -> Result<LossModel> {
        let p = &self.meta.params;
        match p.model {
            ModelKind::Gaussian => Ok(LossModel::gaussian(self.observation.clone())),
            ModelKind::Bernoulli => LossModel::bernoulli(
                self.observation.clone(),
                p.link.ok_or_else(|| invalid("link", "required for the Bernoulli model"))?,
            ),
            ModelKind::Poisson => LossModel::poisson(
                self.observation.clone(),
                p.intensity.ok_or_else(|| invalid("intensity", "required for the Poisson model"))?,
            ),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        save_lrst(&self.observation, &dir.join(OBSERVATION_FILE))?;
        save_lrst(&self.truth_t, &dir.join(TRUTH_T_FILE))?;
        save_sparse_csv(&self.truth_s, &dir.join(TRUTH_S_FILE))?;
        let json = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::Format(e.to_string()))?;
        write_atomic(&dir.join(META_FILE), |f| {
            use std::io::Write;
            f.write_all(json.as_bytes())?;
            f.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: InstanceMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)
            .map_err(|e| Error::Format(format!("{META_FILE}: {e}")))?;
        let observation = load_lrst(&dir.join(OBSERVATION_FILE))?;
        let truth_t = load_lrst(&dir.join(TRUTH_T_FILE))?;
        let truth_s = load_sparse_csv(&dir.join(TRUTH_S_FILE), observation.shape())?;
        if observation.dims() != meta.params.dims.as_slice() || truth_t.shape() != observation.shape() {
            return Err(Error::Format("instance files disagree on the shape".into()));
        }
        Ok(Self {
            observation,
            truth_t,
            truth_s,
            meta,
        })
    }
}
