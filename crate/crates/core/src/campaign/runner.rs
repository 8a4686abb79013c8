use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterate::critical_p;
use crate::mesh::encode_grid_function;

use super::calibrate::{calibrate, CalibrationSpec, Constants};
use super::checks::{checks_csv, CheckRecord, CriterionOutcome};
use super::config::{ExperimentConfig, Scenario};
use super::corpus::{convergence_study, oracle, solve_case};
use super::criteria::{self, refinement_plan, CONVERGENCE_LEVELS, CONVERGENCE_RADIUS};

pub const REPORT_FILE: &str = "report.json";
pub const CHECKS_FILE: &str = "checks.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONSTANTS_FILE: &str = "constants.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub config_digest: String,
    pub seed: u64,
    pub criteria: Vec<CriterionOutcome>,
    pub pass: bool,
    /// The only field allowed to differ between identical runs.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: Scenario,
    pub config_digest: String,
    pub seed: u64,
    /// `criterion:name` for every check in the report, in order.
    pub checks: Vec<String>,
    /// Files written next to the manifest.
    pub artifacts: Vec<String>,
    /// Where the frozen constants came from.
    pub constants: String,
}

/// Exit status: 0 pass, 1 fail, 2 unreadable config, 3 scenario precondition or runtime error.
pub fn exit_code(result: &Result<RunReport>) -> i32 {
    match result {
        Ok(r) if r.pass => 0,
        Ok(_) => 1,
        Err(Error::Parse(_)) => 2,
        Err(_) => 3,
    }
}

/// Default output directory for a scenario.
pub fn default_out(scenario: Scenario) -> PathBuf {
    PathBuf::from("runs").join(scenario.name())
}

fn check_range(ps: &[f64], dims: &[usize]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::Precondition("empty corpus: flux.p lists no exponents".into()));
    }
    for &dim in dims {
        for &p in ps {
            if !(p > critical_p(dim)) {
                return Err(Error::Precondition(format!("p = {p} must exceed 2N/(N+2) = {:.4} for N = {dim}", critical_p(dim))));
            }
        }
    }
    Ok(())
}

fn constants_for(cfg: &ExperimentConfig, ps: Vec<f64>) -> Result<(Constants, String)> {
    match &cfg.constants {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Precondition(format!("{}: {e}", path.display())))?;
            Ok((Constants::from_toml(&text)?, path.display().to_string()))
        }
        None => {
            let spec = CalibrationSpec { ps, dims: cfg.grid.dims.clone(), seed: cfg.seed };
            Ok((calibrate(&spec)?, "calibrated in run".to_string()))
        }
    }
}

type Files = Vec<(String, Vec<u8>)>;

fn solve(cfg: &ExperimentConfig) -> Result<(Vec<CriterionOutcome>, Files)> {
    const REF: &str = "explicit scheme against closed-form solutions";
    let ps = cfg.ps_or(&[2.0, 3.0]);
    check_range(&ps, &cfg.grid.dims)?;
    let mut out = CriterionOutcome::new(4, "solver convergence");
    let mut files = Vec::new();
    let mut csv = String::from("case,h,error,order\n");
    for &dim in &cfg.grid.dims {
        let (spacings, order) = refinement_plan(dim);
        for &p in &ps {
            let case = oracle(p, dim)?;
            let conv = convergence_study(&case, &spacings, CONVERGENCE_LEVELS, CONVERGENCE_RADIUS)?;
            for (i, (h, e)) in conv.spacings.iter().zip(&conv.errors).enumerate() {
                let o = if i == 0 { String::new() } else { format!("{:e}", conv.orders[i - 1]) };
                let _ = writeln!(csv, "{},{h:e},{e:e},{o}", conv.case);
            }
            out.push(CheckRecord::at_least(format!("{} max-norm order", conv.case), REF, conv.min_order(), order));
            // Field at the middle spacing, in the mesh file format.
            let u = solve_case(&case, spacings[1], CONVERGENCE_LEVELS)?;
            files.push((format!("fields/{}.field", conv.case), encode_grid_function(&u)));
        }
    }
    files.push(("convergence.csv".into(), csv.into_bytes()));
    Ok((vec![out], files))
}

fn calibrate_scenario(cfg: &ExperimentConfig) -> Result<(Vec<CriterionOutcome>, Files)> {
    let ps = cfg.ps_or(&CalibrationSpec::default().ps);
    check_range(&ps, &cfg.grid.dims)?;
    let constants = calibrate(&CalibrationSpec { ps, dims: cfg.grid.dims.clone(), seed: cfg.seed })?;
    let mut out = CriterionOutcome::new(0, "calibration");
    for e in &constants.c1 {
        let name = format!("C1 {:?} p={} N={}", e.mode, e.p, e.dim).to_lowercase();
        out.push(CheckRecord::holds(name, "structural constant of the first iteration", e.c1.is_finite() && e.c1 > 0.0).with_constant(e.c1));
    }
    for e in &constants.derivative_nu {
        out.push(CheckRecord::holds(format!("nu N={}", e.dim), "measure fraction of the derivative iteration", e.nu > 0.0).with_constant(e.nu));
    }
    Ok((vec![out], vec![(CONSTANTS_FILE.to_string(), constants.to_toml()?.into_bytes())]))
}

/// Runs a scenario in memory: outcomes, extra files, and the constants' origin.
pub fn execute(cfg: &ExperimentConfig, scenario: Scenario) -> Result<(Vec<CriterionOutcome>, Files, String)> {
    let seed = cfg.seed;
    let dims = &cfg.grid.dims;
    let none = "not used".to_string();
    Ok(match scenario {
        Scenario::Solve => {
            let (o, f) = solve(cfg)?;
            (o, f, none)
        }
        Scenario::Calibrate => {
            let (o, f) = calibrate_scenario(cfg)?;
            (o, f, "written by this run".into())
        }
        Scenario::VerifyLemmas => (vec![criteria::criterion_1()?, criteria::criterion_2(seed)?, criteria::criterion_3(seed)?], vec![], none),
        Scenario::VerifyEnergy => (vec![criteria::criterion_5(seed)?, criteria::criterion_6()?], vec![], none),
        Scenario::VerifyLipschitz => {
            let ps = cfg.ps_or(&[1.6, 2.0, 2.5, 3.0]);
            check_range(&ps, dims)?;
            let (constants, source) = constants_for(cfg, ps.clone())?;
            let it = &cfg.iteration;
            (vec![criteria::lipschitz_checks(&constants, &ps, dims, it.eps, it.sigma)?], vec![], source)
        }
        Scenario::VerifyCorollaries => {
            let (constants, source) = constants_for(cfg, vec![1.6, 2.0, 3.0])?;
            (vec![criteria::corollary_checks(&constants, dims, cfg.iteration.sigma)?], vec![], source)
        }
        Scenario::VerifyCovering => {
            let (constants, source) = constants_for(cfg, vec![2.0])?;
            let outcomes = vec![
                criteria::criterion_8(seed)?,
                criteria::criterion_9()?,
                criteria::criterion_11(&constants, seed)?,
                criteria::criterion_12(seed)?,
            ];
            (outcomes, vec![], source)
        }
        Scenario::VerifyHolder => {
            let runs = criteria::holder_runs()?;
            let mut files = Vec::new();
            for (t, cert) in &runs {
                let name = format!("holder_{}.json", t.replace([' ', '='], "_"));
                files.push((name, serde_json::to_vec_pretty(cert).map_err(|e| Error::Io(e.to_string()))?));
            }
            (vec![criteria::holder_outcome(&runs)], files, none)
        }
    })
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Executes `scenario` and writes `report.json`, `checks.csv`, `manifest.json` and any
/// scenario files under `out`. Nothing is written when the scenario fails to run.
pub fn run(cfg: &ExperimentConfig, scenario: Scenario, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let (criteria, files, constants) = execute(cfg, scenario)?;
    let pass = !criteria.is_empty() && criteria.iter().all(CriterionOutcome::pass);
    let report = RunReport {
        scenario,
        config_digest: cfg.digest(),
        seed: cfg.seed,
        criteria,
        pass,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    fs::create_dir_all(out)?;
    let mut artifacts = vec![REPORT_FILE.to_string(), CHECKS_FILE.to_string()];
    for (name, bytes) in &files {
        let path = out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes)?;
        artifacts.push(name.clone());
    }
    fs::write(out.join(REPORT_FILE), json(&report)?)?;
    fs::write(out.join(CHECKS_FILE), checks_csv(&report.criteria))?;
    let manifest = Manifest {
        scenario,
        config_digest: report.config_digest.clone(),
        seed: cfg.seed,
        checks: report.criteria.iter().flat_map(|o| o.checks.iter().map(move |c| format!("{}:{}", o.id, c.name))).collect(),
        artifacts,
        constants,
    };
    fs::write(out.join(MANIFEST_FILE), json(&manifest)?)?;
    Ok(report)
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(MANIFEST_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Precondition(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    if dirs.is_empty() {
        return Err(Error::Precondition(format!("no {MANIFEST_FILE} in {} or its subdirectories", dir.display())));
    }
    dirs.sort();
    Ok(dirs)
}

fn number(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "non-finite".to_string(), |x| format!("{x:.4e}"))
}

/// Per-check table for one run directory, or for every run directory directly below it.
pub fn summarize(dir: &Path) -> Result<String> {
    let mut text = String::new();
    let (mut runs, mut passed) = (0usize, 0usize);
    for run in run_dirs(dir)? {
        let read = |name: &str| -> Result<serde_json::Value> {
            let bytes = fs::read(run.join(name)).map_err(|e| Error::Precondition(format!("{}: {e}", run.join(name).display())))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{name}: {e}")))
        };
        let manifest = read(MANIFEST_FILE)?;
        let report = read(REPORT_FILE)?;
        let pass = report["pass"].as_bool().unwrap_or(false);
        runs += 1;
        passed += usize::from(pass);
        let _ = writeln!(
            text,
            "== {} [{}] seed {} digest {:.12} -> {}",
            run.display(),
            manifest["scenario"].as_str().unwrap_or("?"),
            manifest["seed"],
            manifest["config_digest"].as_str().unwrap_or(""),
            if pass { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(text, "{:>3}  {:<4}  {:<52}  {:>11}  {:>11}  reference", "id", "ok", "check", "lhs", "rhs");
        for crit in report["criteria"].as_array().into_iter().flatten() {
            for c in crit["checks"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    text,
                    "{:>3}  {:<4}  {:<52}  {:>11}  {:>11}  {}",
                    crit["id"].as_u64().unwrap_or(0),
                    if c["pass"].as_bool() == Some(true) { "ok" } else { "FAIL" },
                    c["name"].as_str().unwrap_or(""),
                    number(&c["lhs"]),
                    number(&c["rhs"]),
                    c["reference"].as_str().unwrap_or("")
                );
            }
        }
    }
    if runs > 1 {
        let _ = writeln!(text, "{passed}/{runs} runs pass");
    }
    Ok(text)
}
