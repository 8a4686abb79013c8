use serde::{Deserialize, Serialize};

use crate::covering::derivative_degiorgi;
use crate::error::{Error, Result};
use crate::mesh::{GridFunction, SpaceTimeGrid, SpatialGrid, VectorField};
use crate::rng::CounterRng;

/// Uniform grid on `[-1, 1]^N x [-1, 1]`, the home of every rescaled field.
pub fn unit_grid(dim: usize, h: f64, dt: f64) -> Result<SpaceTimeGrid> {
    SpaceTimeGrid::covering(SpatialGrid::new(h, &vec![(-1.0, 1.0); dim])?, dt, -1.0, 1.0)
}

/// Gaussian dip in space-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub center: [f64; 3],
    pub radius: f64,
    pub depth: f64,
}

impl Dip {
    fn at(&self, x: &[f64; 2], t: f64) -> f64 {
        let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2) + (t - self.center[2]).powi(2);
        self.depth * (-d2 / (self.radius * self.radius)).exp()
    }
}

/// Smooth derivative field `Dw / mu`: a level near 1 with a travelling wave, minus a few
/// Gaussian dips, in the first component; a small wave in the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeRecipe {
    pub level: f64,
    pub wave: f64,
    pub wave_vector: [f64; 3],
    pub phase: f64,
    pub dips: Vec<Dip>,
    pub cross: f64,
}

impl DerivativeRecipe {
    pub fn draw(rng: &mut CounterRng, dim: usize) -> Self {
        let dips = (0..rng.below(4))
            .map(|_| Dip {
                center: [rng.range(-1.0, 1.0), if dim == 2 { rng.range(-1.0, 1.0) } else { 0.0 }, rng.range(-1.0, 1.0)],
                radius: rng.range(0.15, 0.5),
                depth: rng.range(0.0, 1.2),
            })
            .collect();
        Self {
            level: rng.range(0.8, 1.3),
            wave: rng.range(0.0, 0.15),
            wave_vector: [rng.range(-3.0, 3.0), rng.range(-3.0, 3.0), rng.range(-3.0, 3.0)],
            phase: rng.range(0.0, std::f64::consts::TAU),
            dips,
            cross: rng.range(0.0, 0.3),
        }
    }

    pub fn field(&self, grid: &SpaceTimeGrid, mu: f64) -> Result<VectorField> {
        let k = self.wave_vector;
        let first = GridFunction::from_fn(grid, |x, t| {
            let wave = self.wave * (k[0] * x[0] + k[1] * x[1] + k[2] * t + self.phase).sin();
            mu * (self.level + wave - self.dips.iter().map(|d| d.at(x, t)).sum::<f64>())
        });
        let mut comps = vec![first];
        if grid.dim() == 2 {
            comps.push(GridFunction::from_fn(grid, |x, t| mu * self.cross * (k[1] * x[0] - k[0] * x[1] + t).cos()));
        }
        VectorField::new(comps)
    }
}

/// Outcome of the measure-fraction calibration for the derivative iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuCalibration {
    /// Largest candidate with no counterexample among the admissible draws.
    pub nu: f64,
    /// `(candidate, admissible draws, counterexamples)`.
    pub sweep: Vec<(f64, usize, usize)>,
}

/// Sweeps `candidates` (any order) and keeps the largest `nu` for which every draw meeting
/// `|{w_x1 < mu/2}| <= nu |Q1|` also has `w_x1 >= mu/4` on `Q_{1/2}`.
pub fn calibrate_nu(grid: &SpaceTimeGrid, candidates: &[f64], draws: usize, seed: u64, stream: u64) -> Result<NuCalibration> {
    let (mu, big_a) = (1.0, 2.0);
    let mut rng = CounterRng::new(seed, stream);
    let mut samples = Vec::with_capacity(draws);
    for _ in 0..draws {
        let f = DerivativeRecipe::draw(&mut rng, grid.dim()).field(grid, mu)?;
        // nu only gates the conclusion, so one run at the loosest value gives the fraction.
        let r = derivative_degiorgi(&f, 0, mu, big_a, 0.499, 0.0)?;
        samples.push((r.measure_fraction, r.min_on_half >= mu / 4.0));
    }
    let mut sweep: Vec<(f64, usize, usize)> = candidates
        .iter()
        .map(|&nu| {
            let admissible: Vec<_> = samples.iter().filter(|(f, _)| *f <= nu).collect();
            (nu, admissible.len(), admissible.iter().filter(|(_, ok)| !ok).count())
        })
        .collect();
    sweep.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nu = sweep
        .iter()
        .filter(|(_, n, bad)| *n > 0 && *bad == 0)
        .map(|s| s.0)
        .fold(f64::NAN, f64::max);
    if nu.is_nan() {
        return Err(Error::Hypothesis("no candidate nu separates the draws".into()));
    }
    Ok(NuCalibration { nu, sweep })
}

/// Bounded field for the second alternative: a Gaussian cap of height below one that
/// breathes in time, plus a small cross component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapRecipe {
    pub height: f64,
    pub center: [f64; 2],
    pub radius: f64,
    pub frequency: f64,
    pub phase: f64,
    pub cross: f64,
}

impl CapRecipe {
    pub fn draw(rng: &mut CounterRng, dim: usize) -> Self {
        Self {
            height: rng.range(0.5, 0.95),
            center: [rng.range(-0.5, 0.5), if dim == 2 { rng.range(-0.5, 0.5) } else { 0.0 }],
            radius: rng.range(0.2, 0.6),
            frequency: rng.range(0.5, 3.0),
            phase: rng.range(0.0, std::f64::consts::TAU),
            cross: rng.range(0.0, 0.2),
        }
    }

    pub fn field(&self, grid: &SpaceTimeGrid) -> Result<VectorField> {
        let first = GridFunction::from_fn(grid, |x, t| {
            let d2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
            let breathe = 0.7 + 0.3 * (self.frequency * t + self.phase).sin();
            self.height * breathe * (-d2 / (self.radius * self.radius)).exp()
        });
        let mut comps = vec![first];
        if grid.dim() == 2 {
            comps.push(GridFunction::from_fn(grid, |x, t| self.cross * (2.0 * x[0] - t).sin() * (1.0 - x[1] * x[1])));
        }
        VectorField::new(comps)
    }
}
