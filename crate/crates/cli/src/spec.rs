//! Experiment specifications.
//!
//! A spec is flat `key = value` text. Blank lines and everything after `#`
//! are ignored, keys are case-sensitive, and list values are
//! comma-separated. Rank grids separate rank vectors with `;`.

use std::collections::BTreeMap;
use std::fmt;

use lrsparse_core::losses::{Link, LinkKind, ModelKind};
use lrsparse_core::synth::{InstanceParams, NoiseLaw, SpectrumTarget, ValueLaw};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    Value { key: String, reason: String },
}

fn bad(key: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Value {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    RgradSparse,
    RgradLowrank,
    Pgd,
}

impl Solver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Solver::RgradSparse => "rgrad_sparse",
            Solver::RgradLowrank => "rgrad_lowrank",
            Solver::Pgd => "pgd",
        }
    }
}

/// Sparsity handed to the solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitAlpha {
    Value(f64),
    /// The largest slice fraction of the generated outliers.
    Realized,
}

const KEYS: &[&str] = &[
    "model", "dims", "rank", "seeds", "target", "alpha", "amp", "value_law", "noise", "link", "intensity", "solver",
    "fit_alpha", "gamma", "mu1", "beta", "k_pr", "zeta", "l_max", "rel_tol", "t_max", "fw_iters", "escalate",
    "theory_mode", "rank_grid", "alpha_grid", "out",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub dims: Vec<usize>,
    pub rank: Vec<usize>,
    pub seeds: Vec<u64>,
    pub target: SpectrumTarget,
    /// Outlier rate of the generator.
    pub alpha: f64,
    pub amp: f64,
    pub value_law: ValueLaw,
    pub noise: NoiseLaw,
    pub link: Option<Link>,
    pub intensity: Option<f64>,
    pub solver: Solver,
    pub fit_alpha: FitAlpha,
    pub gamma: Option<f64>,
    pub mu1: Option<f64>,
    pub beta: Option<f64>,
    pub k_pr: Option<f64>,
    /// `ℓ∞` scale for the warm start and the default step size.
    pub zeta: f64,
    pub l_max: usize,
    pub rel_tol: f64,
    pub t_max: usize,
    pub fw_iters: usize,
    pub escalate: bool,
    pub theory_mode: bool,
    pub rank_grid: Option<Vec<Vec<usize>>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub out: Option<String>,
    /// Hex SHA-256 of the canonical `key = value` listing.
    pub digest: String,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(SpecError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(SpecError::Syntax { line: i + 1 });
            }
            if !KEYS.contains(&k) {
                return Err(SpecError::UnknownKey(k.to_string()));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(SpecError::Duplicate {
                    line: i + 1,
                    key: k.to_string(),
                });
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<Self, SpecError> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let model = match get("model").unwrap_or("gaussian") {
            "gaussian" => ModelKind::Gaussian,
            "bernoulli" => ModelKind::Bernoulli,
            "poisson" => ModelKind::Poisson,
            other => return Err(bad("model", format!("unknown model `{other}`"))),
        };
        let dims = parse_list::<usize>("dims", get("dims").ok_or(SpecError::Missing("dims"))?)?;
        let rank = parse_list::<usize>("rank", get("rank").ok_or(SpecError::Missing("rank"))?)?;
        let seeds = match get("seeds") {
            Some(v) => parse_list::<u64>("seeds", v)?,
            None => vec![0],
        };
        let target = match get("target") {
            None | Some("natural") => SpectrumTarget::Natural,
            Some(v) => parse_target(v)?,
        };
        let alpha = opt_num("alpha", get("alpha"))?.unwrap_or(0.0);
        let amp = opt_num("amp", get("amp"))?.unwrap_or(1.0);
        let value_law = match get("value_law").unwrap_or("gaussian") {
            "gaussian" => ValueLaw::Gaussian,
            "constant" => ValueLaw::Constant,
            other => return Err(bad("value_law", format!("unknown law `{other}`"))),
        };
        let noise = match get("noise") {
            None => NoiseLaw::Gaussian { sigma: 0.0 },
            Some(v) => parse_noise(v)?,
        };
        let link = get("link").map(parse_link).transpose()?;
        let intensity = opt_num("intensity", get("intensity"))?;
        match model {
            ModelKind::Bernoulli if link.is_none() => return Err(SpecError::Missing("link")),
            ModelKind::Poisson if intensity.is_none() => return Err(SpecError::Missing("intensity")),
            _ => {}
        }
        let solver = match get("solver").unwrap_or("rgrad_sparse") {
            "rgrad_sparse" => Solver::RgradSparse,
            "rgrad_lowrank" => Solver::RgradLowrank,
            "pgd" => Solver::Pgd,
            other => return Err(bad("solver", format!("unknown solver `{other}`"))),
        };
        let fit_alpha = match get("fit_alpha") {
            None => FitAlpha::Value(alpha),
            Some("realized") => FitAlpha::Realized,
            Some(v) => FitAlpha::Value(parse_num("fit_alpha", v)?),
        };
        let k_pr = match get("k_pr") {
            Some("inf") => Some(f64::INFINITY),
            v => opt_num("k_pr", v)?,
        };
        let rank_grid = get("rank_grid").map(parse_rank_grid).transpose()?;
        let alpha_grid = get("alpha_grid").map(|v| parse_list::<f64>("alpha_grid", v)).transpose()?;
        let digest = {
            let canonical: String = map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            let bytes = Sha256::digest(canonical.as_bytes());
            bytes.iter().map(|b| format!("{b:02x}")).collect()
        };
        Ok(Self {
            model,
            dims,
            rank,
            seeds,
            target,
            alpha,
            amp,
            value_law,
            noise,
            link,
            intensity,
            solver,
            fit_alpha,
            gamma: opt_num("gamma", get("gamma"))?,
            mu1: opt_num("mu1", get("mu1"))?,
            beta: opt_num("beta", get("beta"))?,
            k_pr,
            zeta: opt_num("zeta", get("zeta"))?.unwrap_or(1.0),
            l_max: opt_num("l_max", get("l_max"))?.unwrap_or(100),
            rel_tol: opt_num("rel_tol", get("rel_tol"))?.unwrap_or(1e-3),
            t_max: opt_num("t_max", get("t_max"))?.unwrap_or(10),
            fw_iters: opt_num("fw_iters", get("fw_iters"))?.unwrap_or(100),
            escalate: opt_bool("escalate", get("escalate"))?.unwrap_or(true),
            theory_mode: opt_bool("theory_mode", get("theory_mode"))?.unwrap_or(false),
            rank_grid,
            alpha_grid,
            out: get("out").map(str::to_string),
            digest,
        })
    }

    /// Generator parameters for one seed.
    pub fn instance_params(&self, seed: u64) -> InstanceParams {
        InstanceParams {
            model: self.model,
            dims: self.dims.clone(),
            rank: self.rank.clone(),
            seed,
            target: self.target,
            alpha: self.alpha,
            amp: self.amp,
            value_law: self.value_law,
            noise: self.noise,
            link: self.link,
            intensity: self.intensity,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, SpecError> {
    v.trim().parse().map_err(|_| bad(key, format!("cannot parse `{v}`")))
}

fn opt_num<T: std::str::FromStr>(key: &str, v: Option<&str>) -> Result<Option<T>, SpecError> {
    v.map(|s| parse_num(key, s)).transpose()
}

fn opt_bool(key: &str, v: Option<&str>) -> Result<Option<bool>, SpecError> {
    v.map(|s| match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{s}`"))),
    })
    .transpose()
}

pub fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, SpecError> {
    let items: Vec<T> = v
        .split(',')
        .map(|s| parse_num(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(items)
}

/// `1,1,1;2,2,2` or, for a single rank vector per line, `2,2,2`.
pub fn parse_rank_grid(v: &str) -> Result<Vec<Vec<usize>>, SpecError> {
    v.split(';').map(|r| parse_list::<usize>("rank_grid", r)).collect()
}

/// `natural`, `linf:V`, `top:HI` or `spectrum:LO,HI`.
fn parse_target(v: &str) -> Result<SpectrumTarget, SpecError> {
    let (kind, arg) = v.split_once(':').ok_or_else(|| bad("target", format!("cannot parse `{v}`")))?;
    match kind {
        "linf" => Ok(SpectrumTarget::MaxAbs {
            value: parse_num("target", arg)?,
        }),
        "top" => Ok(SpectrumTarget::TopSingular {
            hi: parse_num("target", arg)?,
        }),
        "spectrum" => {
            let xs = parse_list::<f64>("target", arg)?;
            match xs[..] {
                [lo, hi] => Ok(SpectrumTarget::Spectrum { lo, hi }),
                _ => Err(bad("target", "spectrum takes LO,HI")),
            }
        }
        other => Err(bad("target", format!("unknown target `{other}`"))),
    }
}

/// `gaussian:SIGMA` or `student_t:DF,SCALE`.
fn parse_noise(v: &str) -> Result<NoiseLaw, SpecError> {
    let (kind, arg) = v.split_once(':').ok_or_else(|| bad("noise", format!("cannot parse `{v}`")))?;
    match kind {
        "gaussian" => Ok(NoiseLaw::Gaussian {
            sigma: parse_num("noise", arg)?,
        }),
        "student_t" => {
            let xs = parse_list::<f64>("noise", arg)?;
            match xs[..] {
                [df, scale] => Ok(NoiseLaw::StudentT { df, scale }),
                _ => Err(bad("noise", "student_t takes DF,SCALE")),
            }
        }
        other => Err(bad("noise", format!("unknown noise law `{other}`"))),
    }
}

/// `logistic:SIGMA` or `probit:SIGMA`.
fn parse_link(v: &str) -> Result<Link, SpecError> {
    let (kind, arg) = v.split_once(':').unwrap_or((v, "1"));
    let kind = match kind {
        "logistic" => LinkKind::Logistic,
        "probit" => LinkKind::Probit,
        other => return Err(bad("link", format!("unknown link `{other}`"))),
    };
    Link::new(kind, parse_num("link", arg)?).map_err(|e| bad("link", e.to_string()))
}
