//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use lrsparse_core::init::{initialize, InitConfig};
use lrsparse_core::losses::{LossModel, ModelKind};
use lrsparse_core::solver::{
    bic_scan, fit_with_escalation, pgd_lowrank, rgrad_lowrank, rgrad_sparse, FitResult, SolverConfig, Termination, Truth,
};
use lrsparse_core::synth::{generate, InstanceMeta, META_FILE, OBSERVATION_FILE, TRUTH_S_FILE, TRUTH_T_FILE};
use lrsparse_core::tensor::io::{fmt_f64, load_lrst, load_sparse_csv, save_lrst, save_sparse_csv, write_atomic};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::spec::{parse_list, parse_rank_grid, ExperimentSpec, FitAlpha, Solver};
use crate::{exit, BicArgs, Cli, CliError, Command, FitArgs, InputArgs};

pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const T_HAT_FILE: &str = "t_hat.lrst";
pub const S_HAT_FILE: &str = "s_hat.csv";
pub const BIC_FILE: &str = "bic.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_HEADER: &str = "solver,iter,rel_err,step_ms";

pub(crate) fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Synth(a) => synth(cli, &load_spec(&a.spec)?),
        Command::Fit(a) => fit(cli, a),
        Command::Bic(a) => bic(cli, a),
        Command::Compare(a) => compare(cli, a),
    }
}

fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = fs::read_to_string(path).with_context(|| format!("reading spec {}", path.display()))?;
    Ok(ExperimentSpec::parse(&text)?)
}

fn seed(cli: &Cli, spec: &ExperimentSpec) -> u64 {
    cli.seed.unwrap_or(spec.seeds[0])
}

/// Resolves the output directory and refuses to reuse a non-empty one
/// without `--force`.
fn prepare_out(cli: &Cli, spec: &ExperimentSpec) -> Result<PathBuf, CliError> {
    let dir = cli
        .out
        .clone()
        .or_else(|| spec.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out` in the spec".into()))?;
    ensure_empty(&dir, cli.force)?;
    Ok(dir)
}

fn ensure_empty(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() && !force {
        let mut entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
        if entries.next().is_some() {
            return Err(anyhow!("output directory {} is not empty; pass --force to overwrite", dir.display()).into());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |f| {
        f.write_all(text.as_bytes())?;
        Ok(())
    })
    .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_summary(dir: &Path, summary: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| anyhow!("summary: {e}"))?;
    text.push('\n');
    write_text(&dir.join(SUMMARY_FILE), &text)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of `meta.json` exactly as [`lrsparse_core::synth::Instance::save`]
/// writes it.
fn meta_digest(meta: &InstanceMeta) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(meta).map_err(|e| anyhow!("meta: {e}"))?;
    text.push('\n');
    Ok(sha256_hex(text.as_bytes()))
}

fn synth(cli: &Cli, spec: &ExperimentSpec) -> Result<i32, CliError> {
    let out = prepare_out(cli, spec)?;
    let seeds = match cli.seed {
        Some(s) => vec![s],
        None => spec.seeds.clone(),
    };
    let nested = seeds.len() > 1;
    seeds.par_iter().try_for_each(|&s| -> Result<(), CliError> {
        let mut inst = generate(&spec.instance_params(s))?;
        inst.meta.spec_digest = Some(spec.digest.clone());
        let dir = if nested { out.join(format!("seed_{s}")) } else { out.clone() };
        if nested {
            ensure_empty(&dir, cli.force)?;
        }
        inst.save(&dir).with_context(|| format!("writing instance to {}", dir.display()))?;
        Ok(())
    })?;
    println!("wrote {} instance(s) to {}", seeds.len(), out.display());
    Ok(exit::OK)
}

/// Observations plus whatever provenance is available.
struct Input {
    model: LossModel,
    truth: Option<Truth>,
    meta: Option<InstanceMeta>,
    meta_sha256: Option<String>,
}

fn model_for(kind: ModelKind, spec: &ExperimentSpec, obs: lrsparse_core::DenseTensor) -> Result<LossModel, CliError> {
    Ok(match kind {
        ModelKind::Gaussian => LossModel::gaussian(obs),
        ModelKind::Bernoulli => LossModel::bernoulli(obs, spec.link.ok_or_else(|| CliError::Usage("spec needs `link`".into()))?)?,
        ModelKind::Poisson => {
            LossModel::poisson(obs, spec.intensity.ok_or_else(|| CliError::Usage("spec needs `intensity`".into()))?)?
        }
    })
}

fn load_input(cli: &Cli, spec: &ExperimentSpec, args: &InputArgs, observation: Option<&Path>) -> Result<Input, CliError> {
    if let Some(path) = observation {
        let obs = load_lrst(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Input {
            model: model_for(spec.model, spec, obs)?,
            truth: None,
            meta: None,
            meta_sha256: None,
        });
    }
    let Some(dir) = &args.instance else {
        let mut inst = generate(&spec.instance_params(seed(cli, spec)))?;
        inst.meta.spec_digest = Some(spec.digest.clone());
        return Ok(Input {
            model: inst.model()?,
            truth: Some(Truth {
                t: inst.truth_t,
                s: inst.truth_s,
            }),
            meta_sha256: Some(meta_digest(&inst.meta)?),
            meta: Some(inst.meta),
        });
    };
    let meta_bytes = fs::read(dir.join(META_FILE)).with_context(|| format!("reading {}", dir.join(META_FILE).display()))?;
    let meta: InstanceMeta = serde_json::from_slice(&meta_bytes).map_err(|e| anyhow!("{META_FILE}: {e}"))?;
    let obs = load_lrst(&dir.join(OBSERVATION_FILE)).with_context(|| format!("reading {}", dir.display()))?;
    if obs.dims() != meta.params.dims.as_slice() {
        return Err(anyhow!("{OBSERVATION_FILE} has shape {:?}, meta says {:?}", obs.dims(), meta.params.dims).into());
    }
    let (t_path, s_path) = (dir.join(TRUTH_T_FILE), dir.join(TRUTH_S_FILE));
    let truth = if t_path.exists() && s_path.exists() {
        let t = load_lrst(&t_path).with_context(|| format!("reading {}", t_path.display()))?;
        let s = load_sparse_csv(&s_path, obs.shape()).with_context(|| format!("reading {}", s_path.display()))?;
        Some(Truth { t, s })
    } else {
        None
    };
    let p = &meta.params;
    let model = match p.model {
        ModelKind::Gaussian => LossModel::gaussian(obs),
        ModelKind::Bernoulli => LossModel::bernoulli(obs, p.link.ok_or_else(|| anyhow!("meta lacks the link"))?)?,
        ModelKind::Poisson => LossModel::poisson(obs, p.intensity.ok_or_else(|| anyhow!("meta lacks the intensity"))?)?,
    };
    Ok(Input {
        model,
        truth,
        meta: Some(meta),
        meta_sha256: Some(sha256_hex(&meta_bytes)),
    })
}

/// Solver and warm-start settings from the spec, validated against the
/// model. Returns the warnings of accepted but unsupported choices.
fn configs(cli: &Cli, spec: &ExperimentSpec, input: &Input) -> Result<(SolverConfig, InitConfig, Vec<String>), CliError> {
    let model = &input.model;
    let mut cfg = SolverConfig::new(model, spec.rank.clone(), spec.zeta);
    cfg.alpha = match spec.fit_alpha {
        FitAlpha::Value(a) => a,
        FitAlpha::Realized => input
            .meta
            .as_ref()
            .map(|m| m.alpha_realized)
            .ok_or_else(|| CliError::Usage("fit_alpha = realized needs an instance with metadata".into()))?,
    };
    if let Some(g) = spec.gamma {
        cfg.gamma = g;
    }
    if let Some(m) = spec.mu1 {
        cfg.mu1 = m;
    }
    if let Some(b) = spec.beta {
        cfg.beta = b;
    }
    if let Some(k) = spec.k_pr {
        cfg.k_pr = k;
    }
    cfg.l_max = spec.l_max;
    cfg.rel_tol = spec.rel_tol;
    cfg.theory_mode = spec.theory_mode;
    cfg.deterministic = cli.threads == Some(1);
    let warnings = cfg.validate(model).map_err(|e| CliError::Usage(e.to_string()))?;
    let icfg = InitConfig {
        rank: cfg.rank.clone(),
        mu1: cfg.mu1,
        t_max: spec.t_max,
        fw_iters: spec.fw_iters,
        zeta: spec.zeta,
    };
    icfg.validate(model.shape()).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, icfg, warnings))
}

fn exit_code(t: Termination) -> i32 {
    match t {
        Termination::Tolerance => exit::OK,
        Termination::MaxIter => exit::MAX_ITER,
        Termination::NumericalFailure => exit::NUMERICAL_FAILURE,
    }
}

fn run_solver(
    solver: Solver,
    input: &Input,
    cfg: &SolverConfig,
    icfg: &InitConfig,
    escalate: bool,
) -> Result<(FitResult, SolverConfig, usize), CliError> {
    let truth = input.truth.as_ref();
    if solver == Solver::RgradSparse && escalate {
        let esc = fit_with_escalation(&input.model, cfg, icfg, truth)?;
        return Ok((esc.fit, esc.config, esc.attempts));
    }
    let start = initialize(&input.model, icfg)?;
    let fit = match solver {
        Solver::RgradSparse => rgrad_sparse(&input.model, &start, cfg, truth)?,
        Solver::RgradLowrank => rgrad_lowrank(&input.model, &start, cfg, truth)?,
        Solver::Pgd => pgd_lowrank(&input.model, &start, cfg, truth)?,
    };
    Ok((fit, cfg.clone(), 1))
}

fn fit_summary(fit: &FitResult) -> Value {
    let last = fit.trace.last();
    json!({
        "terminated_by": fit.terminated_by.as_str(),
        "iterations": fit.trace.records.len().saturating_sub(1),
        "final_loss": last.map(|r| r.loss),
        "final_rel_err_T": last.and_then(|r| r.rel_err_t),
        "final_err_S": last.and_then(|r| r.err_s),
        "support_size": fit.s_hat.nnz(),
        "diagnostic": fit.diagnostic,
    })
}

fn fit(cli: &Cli, args: &FitArgs) -> Result<i32, CliError> {
    let spec = load_spec(&args.input.spec.spec)?;
    let input = load_input(cli, &spec, &args.input, args.observation.as_deref())?;
    let (cfg, icfg, warnings) = configs(cli, &spec, &input)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let out = prepare_out(cli, &spec)?;
    let (fit, used, attempts) = run_solver(spec.solver, &input, &cfg, &icfg, spec.escalate)?;
    save_lrst(&fit.t_hat.to_dense(), &out.join(T_HAT_FILE)).context("writing the low-rank estimate")?;
    save_sparse_csv(&fit.s_hat, &out.join(S_HAT_FILE)).context("writing the sparse estimate")?;
    write_text(&out.join(TRACE_FILE), &fit.trace.to_csv())?;
    let mut summary = fit_summary(&fit);
    let extra = json!({
        "command": "fit",
        "spec_digest": spec.digest,
        "seed": input.meta.as_ref().map(|m| m.params.seed),
        "instance_meta_sha256": input.meta_sha256,
        "solver": spec.solver.as_str(),
        "attempts": attempts,
        "config": used,
        "warnings": warnings,
    });
    merge(&mut summary, extra);
    write_summary(&out, &summary)?;
    let code = exit_code(fit.terminated_by);
    println!("{}: {} after {} iterations", out.display(), fit.terminated_by.as_str(), fit.trace.records.len() - 1);
    Ok(code)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn bic(cli: &Cli, args: &BicArgs) -> Result<i32, CliError> {
    let spec = load_spec(&args.input.spec.spec)?;
    let ranks = match &args.ranks {
        Some(s) => parse_rank_grid(s)?,
        None => spec.rank_grid.clone().unwrap_or_else(|| vec![spec.rank.clone()]),
    };
    let order = spec.dims.len();
    if let Some(bad) = ranks.iter().find(|r| r.len() != order) {
        return Err(CliError::Usage(format!("rank {bad:?} does not have {order} entries")));
    }
    let input = load_input(cli, &spec, &args.input, None)?;
    let (cfg, icfg, warnings) = configs(cli, &spec, &input)?;
    let alphas = match &args.alphas {
        Some(s) => parse_list::<f64>("alphas", s)?,
        None => spec.alpha_grid.clone().unwrap_or_else(|| vec![cfg.alpha]),
    };
    let out = prepare_out(cli, &spec)?;
    let scan = bic_scan(&input.model, &ranks, &alphas, &cfg, &icfg)?;
    write_text(&out.join(BIC_FILE), &scan.to_csv(order))?;
    let best = scan.best_cell();
    let failed: Vec<Value> = scan
        .cells
        .iter()
        .filter(|c| c.bic.is_nan())
        .map(|c| json!({ "rank": c.rank, "alpha": c.alpha, "note": c.note }))
        .collect();
    write_summary(
        &out,
        &json!({
            "command": "bic",
            "spec_digest": spec.digest,
            "seed": input.meta.as_ref().map(|m| m.params.seed),
            "instance_meta_sha256": input.meta_sha256,
            "cells": scan.cells.len(),
            "best_rank": best.map(|c| c.rank.clone()),
            "best_alpha": best.map(|c| c.alpha),
            "best_bic": best.map(|c| c.bic),
            "failed_cells": failed,
            "warnings": warnings,
        }),
    )?;
    match best {
        Some(c) => println!("best rank {:?} alpha {} bic {}", c.rank, c.alpha, c.bic),
        None => println!("every cell failed"),
    }
    Ok(exit::OK)
}

fn compare(cli: &Cli, args: &InputArgs) -> Result<i32, CliError> {
    let spec = load_spec(&args.spec.spec)?;
    let input = load_input(cli, &spec, args, None)?;
    let Some(truth) = &input.truth else {
        return Err(anyhow!("compare needs an instance with truth files").into());
    };
    let (cfg, icfg, warnings) = configs(cli, &spec, &input)?;
    let out = prepare_out(cli, &spec)?;
    let start = initialize(&input.model, &icfg)?;
    let rgrad_kind = if spec.solver == Solver::RgradLowrank {
        Solver::RgradLowrank
    } else {
        Solver::RgradSparse
    };
    let rgrad = match rgrad_kind {
        Solver::RgradLowrank => rgrad_lowrank(&input.model, &start, &cfg, Some(truth))?,
        _ => rgrad_sparse(&input.model, &start, &cfg, Some(truth))?,
    };
    let pgd = pgd_lowrank(&input.model, &start, &cfg, Some(truth))?;
    let mut csv = format!("{COMPARE_HEADER}\n");
    for (name, fit) in [(rgrad_kind.as_str(), &rgrad), ("pgd", &pgd)] {
        for r in &fit.trace.records {
            let err = r.rel_err_t.map(fmt_f64).unwrap_or_default();
            csv.push_str(&format!("{name},{},{err},{}\n", r.iter, fmt_f64(r.step_secs * 1e3)));
        }
        write_text(&out.join(format!("trace_{name}.csv")), &fit.trace.to_csv())?;
    }
    write_text(&out.join(COMPARE_FILE), &csv)?;
    let mut runs = serde_json::Map::new();
    for (name, fit) in [(rgrad_kind.as_str(), &rgrad), ("pgd", &pgd)] {
        let mut s = fit_summary(fit);
        merge(&mut s, json!({ "instance_meta_sha256": input.meta_sha256 }));
        runs.insert(name.to_string(), s);
    }
    write_summary(
        &out,
        &json!({
            "command": "compare",
            "spec_digest": spec.digest,
            "seed": input.meta.as_ref().map(|m| m.params.seed),
            "runs": runs,
            "config": cfg,
            "warnings": warnings,
        }),
    )?;
    println!(
        "{}: final rel_err {} vs pgd {}; mean step {:.3} ms vs {:.3} ms",
        rgrad_kind,
        rgrad.trace.last().and_then(|r| r.rel_err_t).unwrap_or(f64::NAN),
        pgd.trace.last().and_then(|r| r.rel_err_t).unwrap_or(f64::NAN),
        rgrad.trace.mean_step_secs() * 1e3,
        pgd.trace.mean_step_secs() * 1e3,
    );
    Ok(exit::OK)
}
