use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{Cylinder, GridFunction};

/// Levels `k_n = k - k / 2^n` approaching `k` from below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub k: f64,
}

impl Levels {
    pub fn at(&self, n: usize) -> f64 {
        self.k - self.k / 2f64.powi(n as i32)
    }
}

/// `(v - k)_+` pointwise.
pub fn truncate(v: &GridFunction, k: f64) -> GridFunction {
    v.map(|x| (x - k).max(0.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChebyshevReport {
    /// `|{v >= k_next} cap Q|`.
    pub lhs: f64,
    /// `(k_next - k)^(-q) iint_Q (v - k)_+^q`.
    pub rhs: f64,
    /// The same integral weighted by `k^(-q)` instead of the level gap.
    pub rhs_level_weight: f64,
    pub holds: bool,
    pub holds_level_weight: bool,
}

/// Measure of the upper level set against the truncated moment. The weight is the level gap
/// `k_next - k`, which makes the bound exact for any field.
pub fn chebyshev_check(v: &GridFunction, cyl: &Cylinder, k: f64, k_next: f64, q: f64) -> Result<ChebyshevReport> {
    if !(k_next > k && k >= 0.0 && q > 0.0) {
        return Err(invalid(format!("need 0 <= k < k_next and q > 0 (k = {k}, k_next = {k_next}, q = {q})")));
    }
    let nodes = cyl.nodes(v.grid())?;
    let vals = v.values();
    let gap = k_next - k;
    // Nodewise ratios keep the comparison exact in floating point: every counted node
    // contributes a ratio of at least one.
    let mut count = 0usize;
    let mut ratio_sum = 0.0;
    let mut moment = 0.0;
    for node in nodes.iter() {
        let x = vals[node];
        if x >= k_next {
            count += 1;
        }
        let t = (x - k).max(0.0);
        ratio_sum += (t / gap).powf(q);
        moment += t.powf(q);
    }
    let w = v.grid().node_volume();
    let lhs = count as f64 * w;
    let rhs_level_weight = if k > 0.0 { moment * w / k.powf(q) } else { f64::INFINITY };
    Ok(ChebyshevReport {
        lhs,
        rhs: ratio_sum * w,
        rhs_level_weight,
        holds: count as f64 <= ratio_sum,
        holds_level_weight: lhs <= rhs_level_weight,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelMomentReport {
    /// `iint_Q (v - k_n)_+^delta`.
    pub lhs: f64,
    /// `(1 - (2^{n+1}-2)/(2^{n+1}-1))^delta iint_Q v^delta 1{v >= k_{n+1}}`.
    pub rhs: f64,
    /// `2^(-n delta) iint_Q v^delta 1{v >= k_{n+1}}`.
    pub rhs_dyadic: f64,
    pub holds: bool,
    /// Whether `lhs >= 2^(-delta) rhs_dyadic`, the dyadic form with its implicit constant.
    pub holds_dyadic: bool,
}

/// Lower bound for the truncated moment on the next level set.
pub fn remark_cheb(v: &GridFunction, cyl: &Cylinder, levels: Levels, n: usize, delta: f64) -> Result<LevelMomentReport> {
    if !(levels.k > 0.0 && delta > 0.0) {
        return Err(invalid("need k > 0 and delta > 0"));
    }
    let nodes = cyl.nodes(v.grid())?;
    let vals = v.values();
    let (kn, kn1) = (levels.at(n), levels.at(n + 1));
    let two = 2f64.powi(n as i32 + 1);
    let factor = 1.0 - (two - 2.0) / (two - 1.0);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut upper = 0.0;
    for node in nodes.iter() {
        let x = vals[node];
        lhs += (x - kn).max(0.0).powf(delta);
        if x >= kn1 {
            rhs += (factor * x).powf(delta);
            upper += x.powf(delta);
        }
    }
    let w = v.grid().node_volume();
    let dyadic = 2f64.powf(-(n as f64) * delta) * upper * w;
    Ok(LevelMomentReport {
        lhs: lhs * w,
        rhs: rhs * w,
        rhs_dyadic: dyadic,
        holds: lhs >= rhs,
        holds_dyadic: lhs * w >= 2f64.powf(-delta) * dyadic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Point, SpaceTimeGrid, SpatialGrid};
    use proptest::prelude::*;

    fn setup() -> (SpaceTimeGrid, Cylinder) {
        let s = SpatialGrid::new(0.1, &[(-1.0, 1.0)]).unwrap();
        let g = SpaceTimeGrid::covering(s, 0.1, 0.0, 1.0).unwrap();
        let c = Cylinder::standard(Point::new(&[0.0], 0.5), 0.75, 0.35, false).unwrap();
        (g, c)
    }

    #[test]
    fn levels_example() {
        let l = Levels { k: 8.0 };
        assert_eq!((l.at(0), l.at(1), l.at(3)), (0.0, 4.0, 7.0));
    }

    #[test]
    fn constant_at_next_level_is_tight() {
        let (g, c) = setup();
        let l = Levels { k: 1.0 };
        let v = GridFunction::from_fn(&g, |_, _| l.at(2));
        let r = chebyshev_check(&v, &c, l.at(1), l.at(2), 2.0).unwrap();
        assert!(r.holds);
        assert!((r.lhs - r.rhs).abs() <= 1e-14 * r.lhs);
        // weighting by k_n rather than the gap under-counts this field
        assert!(!r.holds_level_weight);
    }

    #[test]
    fn zero_field_vanishes() {
        let (g, c) = setup();
        let v = GridFunction::zeros(&g);
        let r = chebyshev_check(&v, &c, 0.5, 0.75, 3.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn remark_factor_example() {
        // n = 1: factor 1 - 2/3 = 1/3
        let (g, c) = setup();
        let v = GridFunction::from_fn(&g, |_, _| 2.0);
        let r = remark_cheb(&v, &c, Levels { k: 2.0 }, 1, 1.0).unwrap();
        let nodes = c.nodes(&g).unwrap().len() as f64 * g.node_volume();
        assert!((r.lhs - 1.0 * nodes).abs() < 1e-12);
        assert!((r.rhs - 2.0 / 3.0 * nodes).abs() < 1e-12);
        assert!(r.holds && r.holds_dyadic);
    }

    proptest! {
        #[test]
        fn chebyshev_holds_for_random_fields(seed in 0u64..10_000, n in 0usize..6, q in 0.5f64..6.0) {
            let (g, c) = setup();
            let mut rng = crate::rng::CounterRng::new(seed, 1);
            let v = GridFunction::new(g.clone(), (0..g.len()).map(|_| rng.range(0.0, 2.0)).collect()).unwrap();
            let l = Levels { k: rng.range(0.1, 2.0) };
            let r = chebyshev_check(&v, &c, l.at(n), l.at(n + 1), q).unwrap();
            prop_assert!(r.holds);
            let m = remark_cheb(&v, &c, l, n, q).unwrap();
            prop_assert!(m.holds && m.holds_dyadic);
        }

        #[test]
        fn scaling_invariance(seed in 0u64..1000, lam in 0.1f64..10.0) {
            let (g, c) = setup();
            let mut rng = crate::rng::CounterRng::new(seed, 2);
            let v = GridFunction::new(g.clone(), (0..g.len()).map(|_| rng.range(0.0, 2.0)).collect()).unwrap();
            let a = chebyshev_check(&v, &c, 0.5, 0.75, 2.5).unwrap();
            let b = chebyshev_check(&v.map(|x| lam * x), &c, 0.5 * lam, 0.75 * lam, 2.5).unwrap();
            prop_assert_eq!(a.lhs, b.lhs);
            prop_assert!((a.rhs - b.rhs).abs() <= 1e-10 * a.rhs.max(1e-300));
        }
    }
}
