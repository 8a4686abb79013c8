use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterate::{calibrate_c1, degiorgi_first, sup_over, Exponents, Mode, Window};
use crate::mesh::{discrete_gradient, Point};

use super::corpus::{oracle, OracleCase};
use super::manufactured::{calibrate_nu, unit_grid, NuCalibration};

/// Spatial step used for the Lipschitz runs in each dimension.
pub fn lipschitz_spacing(dim: usize) -> f64 {
    if dim == 1 {
        1.0 / 64.0
    } else {
        1.0 / 32.0
    }
}

/// Recorded time levels per Lipschitz run.
pub const LIPSCHITZ_LEVELS: usize = 33;

/// `Q_{rho, theta}` centered mid-window: `rho = 0.8`, `theta` just inside the half window.
pub fn lipschitz_window(case: &OracleCase) -> Result<Window> {
    let mid = 0.5 * (case.t0 + case.t1);
    Window::new(Point::new(&[0.0, 0.0], mid), 0.8, 0.95 * (case.t1 - case.t0) / 2.0)
}

/// Grid for the derivative De Giorgi trials.
pub const DERIVATIVE_SPACING: (f64, f64) = (1.0 / 16.0, 1.0 / 32.0);

/// Candidate measure fractions, loosest first.
pub const NU_CANDIDATES: [f64; 9] = [0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Entry {
    pub mode: Mode,
    pub p: f64,
    pub dim: usize,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuEntry {
    pub dim: usize,
    pub nu: f64,
    pub sweep: Vec<(f64, usize, usize)>,
}

/// Frozen constants written to `constants.lock`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub seed: u64,
    pub c1: Vec<C1Entry>,
    pub derivative_nu: Vec<NuEntry>,
}

impl Constants {
    pub fn c1(&self, mode: Mode, p: f64, dim: usize) -> Result<f64> {
        self.c1
            .iter()
            .find(|e| e.mode == mode && e.p == p && e.dim == dim)
            .map(|e| e.c1)
            .ok_or_else(|| Error::Precondition(format!("no calibrated C1 for {mode:?} p = {p} N = {dim}")))
    }

    pub fn derivative_nu(&self, dim: usize) -> Result<f64> {
        self.derivative_nu
            .iter()
            .find(|e| e.dim == dim)
            .map(|e| e.nu)
            .ok_or_else(|| Error::Precondition(format!("no calibrated nu for N = {dim}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// What to calibrate over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub ps: Vec<f64>,
    pub dims: Vec<usize>,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self { ps: vec![1.6, 2.0, 2.5, 3.0], dims: vec![1, 2], seed: 1 }
    }
}

/// Modes whose exponents are defined at `p`.
fn modes_for(p: f64) -> Vec<Mode> {
    let mut modes = vec![Mode::Unified];
    if p >= 2.0 {
        modes.push(Mode::Degenerate);
    }
    if p <= 2.0 {
        modes.push(Mode::Singular);
    }
    modes
}

/// Smallest structural constant over traces of the sampled exact gradient at two
/// resolutions and three levels above its supremum.
pub fn calibrate_case_c1(case: &OracleCase, mode: Mode, h: f64) -> Result<f64> {
    let exps = Exponents::choose(mode, case.p(), case.dim())?;
    let window = lipschitz_window(case)?;
    let mut traces = Vec::new();
    for spacing in [2.0 * h, h] {
        let v = discrete_gradient(&case.sample(spacing, LIPSCHITZ_LEVELS)?).magnitude();
        let sup = sup_over(&v, &window.full())?;
        for factor in [1.0, 1.5, 3.0] {
            traces.push(degiorgi_first(&v, &window, 0.5, &exps, (factor * sup).max(1.0))?);
        }
    }
    let c1 = calibrate_c1(&traces);
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::Hypothesis(format!("C1 sweep for {} found no admissible value", case.name())));
    }
    Ok(c1)
}

/// Runs every sweep. The same spec always produces the same constants.
pub fn calibrate(spec: &CalibrationSpec) -> Result<Constants> {
    if spec.ps.is_empty() || spec.dims.is_empty() {
        return Err(Error::Precondition("empty corpus".into()));
    }
    let mut c1 = Vec::new();
    let mut derivative_nu = Vec::new();
    for &dim in &spec.dims {
        for &p in &spec.ps {
            let case = oracle(p, dim)?;
            for mode in modes_for(p) {
                c1.push(C1Entry { mode, p, dim, c1: calibrate_case_c1(&case, mode, lipschitz_spacing(dim))? });
            }
        }
        let grid = unit_grid(dim, DERIVATIVE_SPACING.0, DERIVATIVE_SPACING.1)?;
        let NuCalibration { nu, sweep } = calibrate_nu(&grid, &NU_CANDIDATES, 200, spec.seed, 0)?;
        derivative_nu.push(NuEntry { dim, nu, sweep });
    }
    Ok(Constants { seed: spec.seed, c1, derivative_nu })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_round_trips() {
        let spec = CalibrationSpec { ps: vec![2.0], dims: vec![1], seed: 4 };
        let a = calibrate(&spec).unwrap();
        assert!(a.c1(Mode::Unified, 2.0, 1).unwrap().is_finite());
        assert!(a.c1(Mode::Degenerate, 2.0, 1).is_ok() && a.c1(Mode::Singular, 2.0, 1).is_ok());
        assert!(a.c1(Mode::Unified, 3.0, 1).is_err());
        let text = a.to_toml().unwrap();
        assert_eq!(Constants::from_toml(&text).unwrap(), a);
        assert_eq!(calibrate(&spec).unwrap().to_toml().unwrap(), text);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let spec = CalibrationSpec { ps: vec![], ..CalibrationSpec::default() };
        assert!(matches!(calibrate(&spec), Err(Error::Precondition(_))));
    }
}
