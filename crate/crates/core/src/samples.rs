//! Randomized fixtures for property tests and demo inputs for the CLI:
//! measures with density-plus-atom structure, smooth compactly supported
//! bumps, and random piecewise-linear potentials.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::convex::{GrowthClass, Piece, Potential, PotentialKind, PotentialSpec};
use crate::grid::{Field, Grid};
use crate::measures::RadonMeasure;

/// A random measure: a low-frequency random density plus up to three atoms
/// kept away from the boundary.
pub fn random_measure(grid: &Grid, rng: &mut ChaCha8Rng) -> RadonMeasure {
    let n_modes = 6;
    let coeffs: Vec<f64> = (0..n_modes)
        .map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let offset: f64 = rng.gen_range(-1.0..1.0);
    let (a, len) = (grid.a(), grid.length());
    let density_fn = |x: f64| {
        let u = (x - a) / len;
        offset
            + coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * u).sin())
                .sum::<f64>()
    };
    let density = (0..grid.cells())
        .map(|i| density_fn(grid.midpoint(i)))
        .collect();
    let n_atoms = rng.gen_range(0..=3);
    let loc_dist = Uniform::new(a + 0.05 * len, a + 0.95 * len);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for _ in 0..n_atoms {
        let loc = loc_dist.sample(rng);
        if atoms.iter().any(|&(l, _)| l == loc) {
            continue;
        }
        let mass: f64 = rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        atoms.push((loc, mass));
    }
    RadonMeasure::new(grid, density, atoms).expect("random measure valid")
}

/// Smooth bump supported on `(center - width, center + width)`, unit peak.
pub fn bump_field(grid: &Grid, center: f64, width: f64) -> Field {
    Field::from_fn(grid, |x| {
        let u = (x - center) / width;
        let s = 1.0 - u * u;
        if s <= 0.0 {
            0.0
        } else {
            (1.0 - 1.0 / s).exp()
        }
    })
}

/// A random sublinear potential: convex piecewise linear with a flat piece
/// at the origin and nondecreasing slopes, capped so the subgradient growth
/// constant 4 always holds.
pub fn random_sublinear_potential(rng: &mut ChaCha8Rng) -> Potential {
    let b1: f64 = rng.gen_range(0.2..1.5);
    let b2: f64 = b1 + rng.gen_range(0.3..1.5);
    let s1: f64 = rng.gen_range(0.1..1.0);
    let s2: f64 = s1 + rng.gen_range(0.0..1.0);
    // pieces: 0 on [0,b1), s1 (x - b1) on [b1,b2), continued with slope s2
    let v_b2 = s1 * (b2 - b1);
    let spec = PotentialSpec {
        kind: PotentialKind::Custom,
        growth_class: GrowthClass::Sublinear,
        breakpoints: vec![0.0, b1, b2],
        pieces: vec![
            Piece { coeffs: vec![0.0] },
            Piece {
                coeffs: vec![-s1 * b1, s1],
            },
            Piece {
                coeffs: vec![v_b2 - s2 * b2, s2],
            },
        ],
        witness_y: Some(b2 + 1.0),
        growth_constant: 4.0,
        exponent_m: None,
    };
    Potential::from_spec(spec).expect("random sublinear potential valid")
}
