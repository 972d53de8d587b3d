use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lrsparse_core::synth::Instance;

const EXACT: &str = "\
# noiseless Gaussian instance
dims = 20,20,20
rank = 2,2,2
alpha = 0.02
fit_alpha = realized
target = linf:1
seeds = 3
rel_tol = 1e-10
l_max = 200
";

fn lrsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrsparse")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_spec(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.spec");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn last_row(csv: &str) -> Vec<String> {
    csv.lines().last().unwrap().split(',').map(str::to_string).collect()
}

#[test]
fn synth_writes_a_loadable_instance_and_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "dims = 10,10,10\nrank = 1,1,1\n");
    let inst = path(tmp.path(), "inst");
    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 0);
    let mut names: Vec<String> = fs::read_dir(&inst)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["meta.json", "observation.lrst", "truth_S.csv", "truth_T.lrst"]);
    let loaded = Instance::load(Path::new(&inst)).unwrap();
    assert_eq!(loaded.observation.dims(), &[10, 10, 10]);
    assert_eq!(loaded.truth_s.nnz(), 0);
    assert_eq!(loaded.meta.spec_digest.as_deref().map(str::len), Some(64));

    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 1);
    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst, "--force"])), 0);
}

#[test]
fn synth_meta_echoes_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        "dims = 12,12,12\nrank = 2,2,2\nalpha = 0.05\namp = 2\nnoise = gaussian:0.01\nseeds = 7\n",
    );
    let inst = path(tmp.path(), "inst");
    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 0);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&inst).join("meta.json")).unwrap()).unwrap();
    let p = &meta["params"];
    assert_eq!(p["seed"], 7);
    assert_eq!(p["alpha"], 0.05);
    assert_eq!(p["amp"], 2.0);
    assert_eq!(p["noise"]["sigma"], 0.01);
    assert_eq!(p["dims"], serde_json::json!([12, 12, 12]));
}

#[test]
fn fit_recovers_a_noiseless_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), EXACT);
    let inst = path(tmp.path(), "inst");
    let out = path(tmp.path(), "fit");
    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 0);
    let res = lrsparse(&["fit", "--spec", &spec, "--instance", &inst, "--out", &out]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let trace = fs::read_to_string(Path::new(&out).join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,loss,rel_change,zeta,supp_size,rel_err_T,err_S");
    let err: f64 = last_row(&trace)[5].parse().unwrap();
    assert!(err <= 1e-8, "final error {err}");
    for f in ["t_hat.lrst", "s_hat.csv", "summary.json"] {
        assert!(Path::new(&out).join(f).exists());
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["terminated_by"], "tolerance");
    assert_eq!(summary["spec_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_exit_codes_and_trace_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &EXACT.replace("l_max = 200", "l_max = 1"));
    let inst = path(tmp.path(), "inst");
    assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 0);
    let out = path(tmp.path(), "one");
    assert_eq!(code(&lrsparse(&["fit", "--spec", &spec, "--instance", &inst, "--out", &out])), 2);
    let trace = fs::read_to_string(Path::new(&out).join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3, "header plus two rows");

    fs::remove_file(Path::new(&inst).join("truth_T.lrst")).unwrap();
    let out = path(tmp.path(), "notruth");
    assert_eq!(code(&lrsparse(&["fit", "--spec", &spec, "--instance", &inst, "--out", &out])), 2);
    let trace = fs::read_to_string(Path::new(&out).join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,loss,rel_change,zeta,supp_size");

    let obs = path(tmp.path(), "inst/observation.lrst");
    let out = path(tmp.path(), "bare");
    let bare = write_spec(tmp.path(), &EXACT.replace("fit_alpha = realized", "fit_alpha = 0.04"));
    assert_eq!(code(&lrsparse(&["fit", "--spec", &bare, "--observation", &obs, "--out", &out])), 0);
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), EXACT);
    let out = path(tmp.path(), "bic");
    assert_eq!(code(&lrsparse(&["bic", "--spec", &spec, "--ranks", "1,1,1;2,x", "--out", &out])), 64);
    assert_eq!(code(&lrsparse(&["bic", "--spec", &spec, "--ranks", "1,1", "--out", &out])), 64);
    assert_eq!(code(&lrsparse(&["frobnicate"])), 64);
    assert_eq!(code(&lrsparse(&["fit", "--spec", &spec])), 64, "no output directory");
    let bad = write_spec(tmp.path(), "dims = 10,10,10\nrank = 1,1,1\ncolour = red\n");
    assert_eq!(code(&lrsparse(&["synth", "--spec", &bad, "--out", &out])), 64);
    let bad = write_spec(tmp.path(), "dims = 10,10,10\nrank = 1,1,1\ngamma = 0.5\n");
    assert_eq!(code(&lrsparse(&["fit", "--spec", &bad, "--out", &out])), 64);
    assert_eq!(code(&lrsparse(&["--help"])), 0);
}

#[test]
fn bic_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), EXACT);
    let out = path(tmp.path(), "bic");
    assert_eq!(code(&lrsparse(&["bic", "--spec", &spec, "--ranks", "2,2,2", "--alphas", "0.05", "--out", &out])), 0);
    let csv = fs::read_to_string(Path::new(&out).join("bic.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r1,r2,r3,alpha,bic,converged");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("2,2,2,0.05,"));
}

#[test]
fn compare_consumes_one_instance_for_both_solvers() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &EXACT.replace("l_max = 200", "l_max = 5"));
    let out = path(tmp.path(), "cmp");
    assert_eq!(code(&lrsparse(&["compare", "--spec", &spec, "--out", &out])), 0);
    let csv = fs::read_to_string(Path::new(&out).join("compare.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "solver,iter,rel_err,step_ms");
    assert!(csv.lines().any(|l| l.starts_with("rgrad_sparse,5,")));
    assert!(csv.lines().any(|l| l.starts_with("pgd,5,")));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(Path::new(&out).join("summary.json")).unwrap()).unwrap();
    let h1 = &summary["runs"]["rgrad_sparse"]["instance_meta_sha256"];
    assert!(h1.is_string());
    assert_eq!(h1, &summary["runs"]["pgd"]["instance_meta_sha256"]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &EXACT.replace("l_max = 200", "l_max = 20"));
    let run = |tag: &str| {
        let inst = path(tmp.path(), &format!("inst{tag}"));
        let fit = path(tmp.path(), &format!("fit{tag}"));
        assert_eq!(code(&lrsparse(&["synth", "--spec", &spec, "--out", &inst])), 0);
        lrsparse(&["fit", "--spec", &spec, "--instance", &inst, "--out", &fit]);
        let mut files = Vec::new();
        for (dir, name) in [(&inst, "observation.lrst"), (&inst, "meta.json"), (&fit, "trace.csv"), (&fit, "summary.json")] {
            files.push(fs::read(Path::new(dir).join(name)).unwrap());
        }
        files
    };
    assert_eq!(run("a"), run("b"));
}
