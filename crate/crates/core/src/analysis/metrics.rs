//! Distances between tip-population measures.
//!
//! Two notions are exposed: the truncated dictionary series (metrizing weak
//! convergence; usable between empirical clouds and grid densities) and the
//! velocity-weighted total variation (exact on atomic-vs-atomic pairs, by
//! quadrature on density-vs-density pairs; degenerate across kinds, which is
//! why mixed inputs are rejected).

use crate::analysis::dict::{DictFn, TestFunctionDictionary};
use crate::error::{AngioError, Result};
use crate::geom::{self, Vect};
use crate::meanfield::PhaseSpaceDensity;
use crate::sim::EmpiricalMeasure;
use std::collections::BTreeMap;

#[derive(Clone, Copy)]
pub enum MeasureRef<'a> {
    Empirical(&'a EmpiricalMeasure),
    Density(&'a PhaseSpaceDensity),
}

/// Pairing `<mu, phi>`: atom sums for empirical measures, cell-center
/// quadrature for densities.
pub fn pair(mu: MeasureRef<'_>, phi: &DictFn) -> f64 {
    match mu {
        MeasureRef::Empirical(m) => {
            m.weight * m.atoms.iter().map(|(x, v)| phi.eval(x, v)).sum::<f64>()
        }
        MeasureRef::Density(rho) => {
            let g = &rho.geom;
            let nv = g.v_len();
            let vol = g.cell_volume();
            let mut acc = 0.0;
            for (xi, xidx) in g.x.indices().enumerate() {
                let xc = g.x.center(xidx);
                let base = xi * nv;
                for vi in 0..nv {
                    let r = rho.values[base + vi];
                    if r != 0.0 {
                        acc += phi.eval(&xc, &g.v_center(g.v_unflat(vi))) * r;
                    }
                }
            }
            acc * vol
        }
    }
}

/// Truncated dictionary metric
/// `sum_k 2^-k (|mu1(phi_k) - mu2(phi_k)| /\ 1)`; a pseudometric bounded by
/// one, zero exactly when all dictionary pairings coincide.
pub fn weak_metric(mu1: MeasureRef<'_>, mu2: MeasureRef<'_>, dict: &TestFunctionDictionary) -> f64 {
    let mut acc = 0.0;
    let mut w = 0.5;
    for phi in &dict.fns {
        let d = (pair(mu1, phi) - pair(mu2, phi)).abs().min(1.0);
        acc += w * d;
        w *= 0.5;
    }
    acc
}

/// Same series evaluated from precomputed pairings.
pub fn weak_metric_from_pairings(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut w = 0.5;
    for (pa, pb) in a.iter().zip(b) {
        acc += w * (pa - pb).abs().min(1.0);
        w *= 0.5;
    }
    acc
}

fn atom_key(x: &Vect, v: &Vect) -> [u64; 6] {
    [
        x[0].to_bits(),
        x[1].to_bits(),
        x[2].to_bits(),
        v[0].to_bits(),
        v[1].to_bits(),
        v[2].to_bits(),
    ]
}

/// Velocity-weighted total variation
/// `sup_{||phi||_inf <= 1} |<mu1 - mu2, (1 + |v|) phi>|`.
///
/// For atomic measures the supremum is attained by choosing the sign of phi
/// per atom, giving `sum |w1 - w2| (1 + |v|)` over distinct atoms.
pub fn weighted_tv(mu1: MeasureRef<'_>, mu2: MeasureRef<'_>) -> Result<f64> {
    match (mu1, mu2) {
        (MeasureRef::Empirical(a), MeasureRef::Empirical(b)) => {
            let mut net: BTreeMap<[u64; 6], (f64, f64)> = BTreeMap::new();
            for (x, v) in &a.atoms {
                let e = net.entry(atom_key(x, v)).or_insert((0.0, geom::norm(v)));
                e.0 += a.weight;
            }
            for (x, v) in &b.atoms {
                let e = net.entry(atom_key(x, v)).or_insert((0.0, geom::norm(v)));
                e.0 -= b.weight;
            }
            Ok(net.values().map(|(w, s)| w.abs() * (1.0 + s)).sum())
        }
        (MeasureRef::Density(a), MeasureRef::Density(b)) => {
            if a.geom != b.geom {
                return Err(AngioError::Geometry(
                    "weighted TV between densities needs a common grid".into(),
                ));
            }
            let g = &a.geom;
            let nv = g.v_len();
            let vol = g.cell_volume();
            let mut acc = 0.0;
            for xi in 0..g.x.len() {
                let base = xi * nv;
                for vi in 0..nv {
                    let speed = geom::norm(&g.v_center(g.v_unflat(vi)));
                    acc += (a.values[base + vi] - b.values[base + vi]).abs() * (1.0 + speed);
                }
            }
            Ok(acc * vol)
        }
        _ => Err(AngioError::Domain(
            "weighted TV between an atomic and a density measure is degenerate; use the dictionary metric".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dict() -> TestFunctionDictionary {
        TestFunctionDictionary::default_for(2, [0.0; 3], 4.0, 2.0, 16)
    }

    fn cloud(seed: u64, n: usize, weight: f64) -> EmpiricalMeasure {
        let mut rng = crate::rng::substream(77, seed);
        EmpiricalMeasure {
            atoms: (0..n)
                .map(|_| {
                    (
                        [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0],
                        [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), 0.0],
                    )
                })
                .collect(),
            weight,
        }
    }

    #[test]
    fn metric_is_zero_on_equal_and_symmetric() {
        let d = dict();
        let a = cloud(1, 40, 1.0 / 40.0);
        let b = cloud(2, 25, 1.0 / 25.0);
        assert_eq!(weak_metric(MeasureRef::Empirical(&a), MeasureRef::Empirical(&a), &d), 0.0);
        let ab = weak_metric(MeasureRef::Empirical(&a), MeasureRef::Empirical(&b), &d);
        let ba = weak_metric(MeasureRef::Empirical(&b), MeasureRef::Empirical(&a), &d);
        assert!((ab - ba).abs() < 1e-15);
        assert!(ab > 0.0 && ab <= 1.0);
    }

    #[test]
    fn metric_satisfies_triangle_inequality_on_random_triples() {
        let d = dict();
        for s in 0..20 {
            let a = cloud(3 * s, 15, 1.0 / 15.0);
            let b = cloud(3 * s + 1, 15, 1.0 / 15.0);
            let c = cloud(3 * s + 2, 15, 1.0 / 15.0);
            let ab = weak_metric(MeasureRef::Empirical(&a), MeasureRef::Empirical(&b), &d);
            let bc = weak_metric(MeasureRef::Empirical(&b), MeasureRef::Empirical(&c), &d);
            let ac = weak_metric(MeasureRef::Empirical(&a), MeasureRef::Empirical(&c), &d);
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn far_apart_point_masses_are_separated_by_the_leading_function() {
        let d = dict();
        let a = EmpiricalMeasure { atoms: vec![([0.0, 0.0, 0.0], [0.0; 3])], weight: 1.0 };
        let b = EmpiricalMeasure { atoms: vec![([4.0, 0.0, 0.0], [0.0; 3])], weight: 1.0 };
        // direct evaluation of the first dictionary function on both atoms
        let phi = &d.fns[0];
        let c = (phi.eval(&a.atoms[0].0, &a.atoms[0].1) - phi.eval(&b.atoms[0].0, &b.atoms[0].1))
            .abs();
        assert!(c > 0.0);
        let m = weak_metric(MeasureRef::Empirical(&a), MeasureRef::Empirical(&b), &d);
        assert!(m >= 0.5 * c.min(1.0) - 1e-12);
    }

    #[test]
    fn weighted_tv_atomic_anchor_cases() {
        let x = [0.4, -0.2, 0.0];
        let v = [0.6, 0.8, 0.0]; // |v| = 1
        let a = EmpiricalMeasure { atoms: vec![(x, v)], weight: 0.7 };
        let b = EmpiricalMeasure { atoms: vec![(x, v)], weight: 0.3 };
        let tv = weighted_tv(MeasureRef::Empirical(&a), MeasureRef::Empirical(&b)).unwrap();
        assert!((tv - 0.4 * 2.0).abs() < 1e-12);
        // identical measures
        let zero = weighted_tv(MeasureRef::Empirical(&a), MeasureRef::Empirical(&a)).unwrap();
        assert_eq!(zero, 0.0);
        // disjoint unit atoms: (1 + |v1|) + (1 + |v2|)
        let c = EmpiricalMeasure { atoms: vec![([1.0, 0.0, 0.0], [0.0, 0.0, 0.0])], weight: 1.0 };
        let e = EmpiricalMeasure { atoms: vec![([-1.0, 0.0, 0.0], [3.0, 4.0, 0.0])], weight: 1.0 };
        let tv = weighted_tv(MeasureRef::Empirical(&c), MeasureRef::Empirical(&e)).unwrap();
        assert!((tv - (1.0 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn weighted_tv_matches_brute_force_sign_enumeration() {
        // exhaustive supremum over sign patterns for small atom sets
        let mut rng = crate::rng::substream(78, 0);
        for _ in 0..10 {
            let na = rng.random_range(1..6);
            let nb = rng.random_range(1..6);
            let mut a = cloud(rng.random_range(0..1000), na, 0.0);
            let mut b = cloud(rng.random_range(0..1000), nb, 0.0);
            a.weight = rng.random_range(0.1..1.0);
            b.weight = rng.random_range(0.1..1.0);
            // share one atom location sometimes
            if na > 1 && nb > 1 {
                b.atoms[0] = a.atoms[0];
            }
            let tv = weighted_tv(MeasureRef::Empirical(&a), MeasureRef::Empirical(&b)).unwrap();
            // brute force: collect distinct atoms with net weights, try all
            // sign assignments
            let mut net: Vec<(f64, f64)> = Vec::new();
            let mut keys: Vec<[u64; 6]> = Vec::new();
            for (x, v) in &a.atoms {
                let key = super::atom_key(x, v);
                match keys.iter().position(|k| *k == key) {
                    Some(i) => net[i].0 += a.weight,
                    None => {
                        keys.push(key);
                        net.push((a.weight, geom::norm(v)));
                    }
                }
            }
            for (x, v) in &b.atoms {
                let key = super::atom_key(x, v);
                match keys.iter().position(|k| *k == key) {
                    Some(i) => net[i].0 -= b.weight,
                    None => {
                        keys.push(key);
                        net.push((-b.weight, geom::norm(v)));
                    }
                }
            }
            let m = net.len();
            assert!(m <= 12);
            let mut best: f64 = 0.0;
            for mask in 0..(1u32 << m) {
                let mut s = 0.0;
                for (i, (w, speed)) in net.iter().enumerate() {
                    let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    s += sign * w * (1.0 + speed);
                }
                best = best.max(s.abs());
            }
            assert!((tv - best).abs() < 1e-12, "tv {tv} vs brute force {best}");
        }
    }

    #[test]
    fn mixed_inputs_are_rejected() {
        use crate::meanfield::{PhaseGeometry, PhaseSpaceDensity};
        let g = PhaseGeometry {
            dim: 2,
            x: crate::grid::GridGeometry::cover(&[-1.0, -1.0, 0.0], &[1.0, 1.0, 0.0], 0.5, 2)
                .unwrap(),
            v_max: 1.0,
            v_cells: 4,
        };
        let rho = PhaseSpaceDensity::zeros(g);
        let a = cloud(5, 10, 0.1);
        let err = weighted_tv(MeasureRef::Empirical(&a), MeasureRef::Density(&rho));
        assert!(matches!(err, Err(AngioError::Domain(_))));
    }
}
