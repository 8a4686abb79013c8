use crate::error::{invalid, Error, Result};
use crate::mesh::{Cylinder, Point, VectorField};
use crate::solver::Exact;

/// Anything that can report `Du` at a point and on the sample nodes of a cylinder.
pub trait GradientSource: Sync {
    fn dim(&self) -> usize;

    fn gradient(&self, z: &Point) -> Result<[f64; 2]>;

    /// Gradient values at the sample nodes of `cyl`. Nodes carry equal weight.
    fn sample(&self, cyl: &Cylinder) -> Result<Vec<[f64; 2]>>;

    /// False when part of `cyl` lies outside the data and its sample set is clipped.
    fn covers(&self, _cyl: &Cylinder) -> bool {
        true
    }
}

impl GradientSource for VectorField {
    fn dim(&self) -> usize {
        VectorField::dim(self)
    }

    /// Value at the nearest grid node.
    fn gradient(&self, z: &Point) -> Result<[f64; 2]> {
        Ok(self.at(self.grid().nearest(z)?))
    }

    fn sample(&self, cyl: &Cylinder) -> Result<Vec<[f64; 2]>> {
        Ok(cyl.nodes(self.grid())?.iter().map(|n| self.at(n)).collect())
    }

    fn covers(&self, cyl: &Cylinder) -> bool {
        cyl.fits(self.grid())
    }
}

/// A gradient given in closed form, sampled on a lattice attached to each cylinder.
///
/// The lattice has `per_radius` steps per spatial radius and `per_half_time` steps per
/// temporal half-width, so every cylinder gets the same node pattern whatever its size.
pub struct Lattice<F> {
    field: F,
    dim: usize,
    per_radius: usize,
    per_half_time: usize,
    domain: Option<Cylinder>,
}

impl<F: Fn(&Point) -> [f64; 2] + Sync> Lattice<F> {
    pub fn new(field: F, dim: usize, per_radius: usize, per_half_time: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) || per_radius < 2 || per_half_time < 1 {
            return Err(invalid(format!(
                "lattice needs N in {{1, 2}}, per_radius >= 2, per_half_time >= 1 (got {dim}, {per_radius}, {per_half_time})"
            )));
        }
        Ok(Self { field, dim, per_radius, per_half_time, domain: None })
    }

    /// Restricts the data to `domain`: cylinders reaching outside it count as clipped.
    pub fn within(self, domain: Cylinder) -> Self {
        Self { domain: Some(domain), ..self }
    }

    /// Spatial offsets in units of the radius, strictly inside the unit ball.
    fn offsets(&self) -> Vec<[f64; 2]> {
        let m = self.per_radius as i64;
        let step = 1.0 / m as f64;
        let mut out = Vec::new();
        let js: Vec<i64> = (-m..=m).collect();
        let ys: &[i64] = if self.dim == 2 { &js } else { &[0] };
        for &j in &js {
            for &k in ys {
                let (a, b) = (j as f64 * step, k as f64 * step);
                if a * a + b * b < 1.0 - 1e-12 {
                    out.push([a, b]);
                }
            }
        }
        out
    }
}

impl<F: Fn(&Point) -> [f64; 2] + Sync> GradientSource for Lattice<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient(&self, z: &Point) -> Result<[f64; 2]> {
        Ok((self.field)(z))
    }

    fn sample(&self, cyl: &Cylinder) -> Result<Vec<[f64; 2]>> {
        let m = self.per_half_time as i64;
        let hi = if cyl.backward { 0 } else { m - 1 };
        let offsets = self.offsets();
        let mut out = Vec::with_capacity(offsets.len() * (m as usize) * 2);
        for k in (1 - m)..=hi {
            let t = cyl.center.t + k as f64 / m as f64 * cyl.half_time;
            for o in &offsets {
                let x = [cyl.center.x[0] + o[0] * cyl.radius, cyl.center.x[1] + o[1] * cyl.radius];
                out.push((self.field)(&Point { x, t }));
            }
        }
        Ok(out)
    }

    fn covers(&self, cyl: &Cylinder) -> bool {
        let Some(d) = &self.domain else { return true };
        let offset = dist(&cyl.center.x, &d.center.x);
        let eps = 1e-12 * d.radius.max(d.half_time);
        offset + cyl.radius <= d.radius + eps && cyl.t_lo() >= d.t_lo() - eps && cyl.t_hi() <= d.t_hi() + eps
    }
}

/// Lattice sampling of an exact solution's gradient.
pub fn exact_lattice(exact: Exact, per_radius: usize, per_half_time: usize) -> Result<Lattice<impl Fn(&Point) -> [f64; 2] + Sync>> {
    Lattice::new(move |z: &Point| exact.gradient(&z.x, z.t), exact.dim(), per_radius, per_half_time)
}

pub(crate) fn norm(v: &[f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

pub(crate) fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1]])
}

/// Mean vector and mean squared deviation of a sample set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: [f64; 2],
    /// `mean |Du - (Du)|^2`.
    pub oscillation: f64,
    pub sup: f64,
}

pub fn moments(samples: &[[f64; 2]]) -> Result<Moments> {
    if samples.is_empty() {
        return Err(Error::Precondition("cylinder holds no sample nodes".into()));
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 2];
    for v in samples {
        mean[0] += v[0];
        mean[1] += v[1];
    }
    mean = [mean[0] / n, mean[1] / n];
    let oscillation = samples.iter().map(|v| dist(v, &mean).powi(2)).sum::<f64>() / n;
    let sup = samples.iter().map(norm).fold(0.0, f64::max);
    Ok(Moments { count: samples.len(), mean, oscillation, sup })
}

pub fn cylinder_moments(source: &dyn GradientSource, cyl: &Cylinder) -> Result<Moments> {
    moments(&source.sample(cyl)?)
}
