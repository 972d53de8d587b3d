//! Entrywise observation models.
//!
//! Every loss is a sum `Σ_ω l_ω(x_ω)` with `l_ω` convex and `l′_ω`
//! non-decreasing, which makes the one-dimensional prune solve a clipped root.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::tensor::{DenseTensor, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Logistic,
    Probit,
}

/// Success probability `p(x)` of a Bernoulli observation with logit `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
    pub sigma: f64,
}

impl Link {
    pub fn new(kind: LinkKind, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("link scale must be positive, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn logistic(sigma: f64) -> Result<Self> {
        Self::new(LinkKind::Logistic, sigma)
    }

    pub fn probit(sigma: f64) -> Result<Self> {
        Self::new(LinkKind::Probit, sigma)
    }

    pub fn prob(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        match self.kind {
            LinkKind::Logistic => 1.0 / (1.0 + (-z).exp()),
            LinkKind::Probit => std_normal_cdf(z),
        }
    }

    /// `p′(x)`
    pub fn density(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        match self.kind {
            LinkKind::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e)) / self.sigma
            }
            LinkKind::Probit => std_normal_pdf(z) / self.sigma,
        }
    }

    /// `ln p(x)`, accurate far into both tails.
    pub fn ln_prob(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        match self.kind {
            LinkKind::Logistic => -softplus(-z),
            LinkKind::Probit => ln_std_normal_cdf(z),
        }
    }

    /// `ln(1 − p(x))`
    pub fn ln_one_minus_prob(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        match self.kind {
            LinkKind::Logistic => -softplus(z),
            LinkKind::Probit => ln_std_normal_cdf(-z),
        }
    }

    /// `−[a ln p(x) + (1 − a) ln(1 − p(x))]`
    pub fn neg_log_lik(&self, a: f64, x: f64) -> f64 {
        let mut v = 0.0;
        if a != 0.0 {
            v -= a * self.ln_prob(x);
        }
        if a != 1.0 {
            v -= (1.0 - a) * self.ln_one_minus_prob(x);
        }
        v
    }

    /// Derivative of [`Link::neg_log_lik`] in `x`, in simplified form.
    pub fn neg_log_lik_derivative(&self, a: f64, x: f64) -> f64 {
        let z = x / self.sigma;
        match self.kind {
            LinkKind::Logistic => (self.prob(x) - a) / self.sigma,
            LinkKind::Probit => {
                let mut v = 0.0;
                if a != 0.0 {
                    v -= a * mills_ratio(z);
                }
                if a != 1.0 {
                    v += (1.0 - a) * mills_ratio(-z);
                }
                v / self.sigma
            }
        }
    }

    /// Second derivative of the per-entry loss for `a ∈ {0, 1}`; it is the
    /// same function of `x` for both labels up to reflection.
    pub fn curvature(&self, x: f64) -> f64 {
        let z = x / self.sigma;
        let s2 = self.sigma * self.sigma;
        match self.kind {
            LinkKind::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e)) / s2
            }
            LinkKind::Probit => {
                // d/dz of −φ/Φ at z is m(z)(z + m(z)), m the Mills ratio.
                let m = mills_ratio(z);
                m * (z + m) / s2
            }
        }
    }

    /// `(b_l, b_u)`: bounds of the per-entry curvature over `|x| ≤ ζ`.
    pub fn curvature_bounds(&self, zeta: f64) -> (f64, f64) {
        match self.kind {
            LinkKind::Logistic => (self.curvature(zeta), 1.0 / (4.0 * self.sigma * self.sigma)),
            LinkKind::Probit => {
                const STEPS: usize = 2000;
                let mut lo = f64::INFINITY;
                let mut hi: f64 = 0.0;
                for k in 0..=STEPS {
                    let x = -zeta + 2.0 * zeta * k as f64 / STEPS as f64;
                    let c = self.curvature(x);
                    lo = lo.min(c);
                    hi = hi.max(c);
                }
                (lo, hi)
            }
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Lower-tail threshold below which `Φ` goes through a continued fraction.
const PROBIT_TAIL: f64 = -8.0;

/// `φ(z)/Φ(z)` for `z < PROBIT_TAIL` from the Laplace continued fraction
/// `x + 1/(x + 2/(x + 3/(x + ...)))`, `x = −z`.
fn tail_mills(z: f64) -> f64 {
    let x = -z;
    let mut t = x;
    for k in (1..=80).rev() {
        t = x + k as f64 / t;
    }
    t
}

/// `φ(z)/Φ(z)`
fn mills_ratio(z: f64) -> f64 {
    if z < PROBIT_TAIL {
        tail_mills(z)
    } else {
        std_normal_pdf(z) / std_normal_cdf(z)
    }
}

fn ln_std_normal_cdf(z: f64) -> f64 {
    if z < PROBIT_TAIL {
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() - tail_mills(z).ln()
    } else {
        std_normal_cdf(z).ln()
    }
}

/// Observation model with its data.
#[derive(Clone, Debug)]
pub enum LossModel {
    /// `½‖x − A‖²_F`
    Gaussian { a: DenseTensor },
    /// Negative log-likelihood of binary `A` under `link`.
    Bernoulli { a: DenseTensor, link: Link },
    /// `(1/I) Σ (−Y x + I eˣ)` for counts `Y ~ Poisson(I eˣ)`.
    Poisson { y: DenseTensor, intensity: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gaussian,
    Bernoulli,
    Poisson,
}

impl LossModel {
    pub fn gaussian(a: DenseTensor) -> Self {
        LossModel::Gaussian { a }
    }

    pub fn bernoulli(a: DenseTensor, link: Link) -> Result<Self> {
        if let Some(pos) = a.data().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidObservation(format!(
                "binary observations required, found {} at flat position {pos}",
                a.data()[pos]
            )));
        }
        Ok(LossModel::Bernoulli { a, link })
    }

    pub fn poisson(y: DenseTensor, intensity: f64) -> Result<Self> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(invalid("intensity", format!("must be positive, got {intensity}")));
        }
        if let Some(pos) = y.data().iter().position(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::InvalidObservation(format!(
                "non-negative integer counts required, found {} at flat position {pos}",
                y.data()[pos]
            )));
        }
        Ok(LossModel::Poisson { y, intensity })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LossModel::Gaussian { .. } => ModelKind::Gaussian,
            LossModel::Bernoulli { .. } => ModelKind::Bernoulli,
            LossModel::Poisson { .. } => ModelKind::Poisson,
        }
    }

    /// The observed tensor (`A` or `Y`).
    pub fn observations(&self) -> &DenseTensor {
        match self {
            LossModel::Gaussian { a } | LossModel::Bernoulli { a, .. } => a,
            LossModel::Poisson { y, .. } => y,
        }
    }

    pub fn shape(&self) -> &Shape {
        self.observations().shape()
    }

    fn check_shape(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() == self.shape() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.shape().to_string(),
                got: x.shape().to_string(),
            })
        }
    }

    #[inline]
    pub(crate) fn entry_loss_flat(&self, flat: usize, v: f64) -> f64 {
        match self {
            LossModel::Gaussian { a } => {
                let r = v - a.data()[flat];
                0.5 * r * r
            }
            LossModel::Bernoulli { a, link } => link.neg_log_lik(a.data()[flat], v),
            LossModel::Poisson { y, intensity } => v.exp() - y.data()[flat] * v / intensity,
        }
    }

    #[inline]
    pub(crate) fn entry_gradient_flat(&self, flat: usize, v: f64) -> f64 {
        match self {
            LossModel::Gaussian { a } => v - a.data()[flat],
            LossModel::Bernoulli { a, link } => link.neg_log_lik_derivative(a.data()[flat], v),
            LossModel::Poisson { y, intensity } => v.exp() - y.data()[flat] / intensity,
        }
    }

    /// Root of `l′_ω`, possibly infinite.
    #[inline]
    pub(crate) fn entry_root_flat(&self, flat: usize) -> f64 {
        match self {
            LossModel::Gaussian { a } => a.data()[flat],
            LossModel::Bernoulli { a, .. } => {
                if a.data()[flat] >= 0.5 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            LossModel::Poisson { y, intensity } => {
                let count = y.data()[flat];
                if count == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (count / intensity).ln()
                }
            }
        }
    }

    #[inline]
    pub(crate) fn entry_prune_flat(&self, flat: usize, t: f64, k_pr: f64) -> f64 {
        self.entry_root_flat(flat).clamp(-k_pr, k_pr) - t
    }

    pub fn value(&self, x: &DenseTensor) -> Result<f64> {
        self.check_shape(x)?;
        let v: f64 = x
            .data()
            .iter()
            .enumerate()
            .map(|(flat, &xv)| self.entry_loss_flat(flat, xv))
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid("x", "loss is not finite"))
        }
    }

    pub fn gradient(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check_shape(x)?;
        let data: Vec<f64> = x
            .data()
            .iter()
            .enumerate()
            .map(|(flat, &xv)| self.entry_gradient_flat(flat, xv))
            .collect();
        DenseTensor::new(x.shape().clone(), data).map_err(|e| match e {
            Error::NonFinite(pos) => invalid("x", format!("gradient is not finite at flat position {pos}")),
            other => other,
        })
    }

    pub fn entry_gradient(&self, omega: &[usize], v: f64) -> Result<f64> {
        Ok(self.entry_gradient_flat(self.shape().ravel(omega)?, v))
    }

    /// `argmin_{|s + t| ≤ k_pr} |l′_ω(t + s)|`, i.e. the clipped root minus `t`.
    pub fn entry_prune(&self, omega: &[usize], t: f64, k_pr: f64) -> Result<f64> {
        check_k_pr(k_pr)?;
        let s = self.entry_prune_flat(self.shape().ravel(omega)?, t, k_pr);
        if s.is_finite() {
            Ok(s)
        } else {
            Err(invalid("k_pr", "an infinite bound leaves this entry without a finite minimizer"))
        }
    }

    /// Curvature bounds `(b_l, b_u)` of the per-entry loss on `|x| ≤ ζ`.
    pub fn curvature_bounds(&self, zeta: f64) -> (f64, f64) {
        match self {
            LossModel::Gaussian { .. } => (1.0, 1.0),
            LossModel::Bernoulli { link, .. } => link.curvature_bounds(zeta),
            LossModel::Poisson { .. } => ((-zeta).exp(), zeta.exp()),
        }
    }

    /// `−2 ln L̂` at `x` up to model constants, as used by the BIC.
    pub fn neg2_log_likelihood(&self, x: &DenseTensor) -> Result<f64> {
        match self {
            LossModel::Gaussian { .. } => {
                let rss = 2.0 * self.value(x)?;
                Ok(x.shape().numel() as f64 * rss.ln())
            }
            LossModel::Bernoulli { .. } => Ok(2.0 * self.value(x)?),
            LossModel::Poisson { intensity, .. } => Ok(2.0 * intensity * self.value(x)?),
        }
    }
}

pub(crate) fn check_k_pr(k_pr: f64) -> Result<()> {
    if k_pr > 0.0 {
        Ok(())
    } else {
        Err(invalid("k_pr", format!("must be positive or infinite, got {k_pr}")))
    }
}

pub fn loss_value(model: &LossModel, x: &DenseTensor) -> Result<f64> {
    model.value(x)
}

pub fn gradient(model: &LossModel, x: &DenseTensor) -> Result<DenseTensor> {
    model.gradient(x)
}

pub fn entry_gradient(model: &LossModel, omega: &[usize], v: f64) -> Result<f64> {
    model.entry_gradient(omega, v)
}

pub fn entry_prune(model: &LossModel, omega: &[usize], t: f64, k_pr: f64) -> Result<f64> {
    model.entry_prune(omega, t, k_pr)
}

/// `ln 2`, the per-entry Bernoulli loss at a zero logit.
pub const BERNOULLI_LOSS_AT_ZERO: f64 = LN_2;
