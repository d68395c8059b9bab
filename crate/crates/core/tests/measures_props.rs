//! Property battery for the measure layer: energy lower bounds, contraction
//! of the smoothing maps, neutrality of zero extension, the operator norms
//! of the shift machinery, and the constructive approximation of measures by
//! bounded densities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spme::convex::Potential;
use spme::grid::{Field, Grid};
use spme::measures::{
    approx_sequence, mollify, mollify_samples, psi_of_measure, shift_mollify, BoundaryCover,
    EnergyFunctional, RadonMeasure, ShiftMollifyParams,
};
use spme::samples::random_measure;

fn unit_grid(cells: usize) -> Grid {
    Grid::unit(cells).unwrap()
}

#[test]
fn tv_energy_controls_tv_norm() {
    // psi(mu) dominates (psi(y)/y) |mu| - psi(y)|O| with the witness y = 2
    let grid = unit_grid(512);
    let psi = Potential::psi1();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for _ in 0..1000 {
        let mu = random_measure(&grid, &mut rng);
        let lhs = psi_of_measure(&psi, &mu).unwrap().tv_norm();
        let rhs = 0.5 * mu.tv_norm() - 1.0;
        assert!(lhs >= rhs - 1e-8, "energy {} below bound {}", lhs, rhs);
    }
}

#[test]
fn mollification_contracts_energy() {
    let grid = unit_grid(512);
    let f = EnergyFunctional::new(Potential::psi1());
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..300 {
        let mu = random_measure(&grid, &mut rng);
        let base = f.energy_measure(&mu);
        for delta in [0.2, 0.1, 0.05] {
            let smooth = mollify(&mu, delta).unwrap();
            let e = f.energy_field(&smooth);
            assert!(e <= base + 1e-8, "mollified {} above {}", e, base);
        }
    }
}

#[test]
fn zero_extension_is_energy_neutral() {
    let grid = unit_grid(512);
    let f = EnergyFunctional::new(Potential::psi1());
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    for _ in 0..200 {
        let mu = random_measure(&grid, &mut rng);
        let extended = mu.zero_extend(137);
        assert!((f.energy_measure(&mu) - f.energy_measure(&extended)).abs() < 1e-10);
    }
}

#[test]
fn shift_mollify_never_increases_energy() {
    let grid = unit_grid(512);
    let cover = BoundaryCover::unit_default();
    let f = EnergyFunctional::new(Potential::psi1());
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    for _ in 0..250 {
        let mu = random_measure(&grid, &mut rng);
        let base = f.energy_measure(&mu);
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let margin = cover.margin(eps).unwrap();
            for delta in [0.5 * margin, 0.25 * margin] {
                let params = ShiftMollifyParams::new(&cover, eps, delta).unwrap();
                let u = shift_mollify(&cover, &mu, &params).unwrap();
                let e = f.energy_field(&u);
                assert!(
                    e <= base + 1e-8,
                    "shift-mollify energy {} above {} at eps {} delta {}",
                    e,
                    base,
                    eps,
                    delta
                );
            }
        }
    }
}

#[test]
fn shift_preserves_pairings_against_shifted_functions() {
    // <mu_eps_delta, eta> = <mu, rho_delta * eta_eps> on sampled functions
    let grid = unit_grid(1024);
    let cover = BoundaryCover::unit_default();
    let mut rng = ChaCha8Rng::seed_from_u64(205);
    let h = grid.spacing();
    let node0 = grid.node(0);
    for _ in 0..20 {
        let mu = random_measure(&grid, &mut rng);
        for eps in [0.1, 0.05] {
            let params = ShiftMollifyParams::canonical(&cover, eps).unwrap();
            let u = shift_mollify(&cover, &mu, &params).unwrap();
            // test function on the node lattice
            let eta: Vec<f64> = (0..grid.interior_len())
                .map(|i| (2.4 * grid.node(i)).cos())
                .collect();
            let lhs: f64 = h * u.values().iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>();
            // build rho_delta * eta_eps on the node lattice and pair with mu
            let eta_eps = cover.shift_samples(&eta, node0, h, params.eps);
            let smoothed = mollify_samples(&eta_eps, h, params.delta);
            // mu pairs density (midpoints) and atoms against the interpolant
            let mut rhs = 0.0;
            for (i, &d) in mu.density().iter().enumerate() {
                rhs += h * d * spme::grid::interp_lattice(&smoothed, node0, h, grid.midpoint(i));
            }
            for &(a, m) in mu.atoms() {
                rhs += m * spme::grid::interp_lattice(&smoothed, node0, h, a);
            }
            // mollification transposes to interpolation error, not exactly;
            // the gap must vanish at quadrature order
            assert!(
                (lhs - rhs).abs() < 5e-4 * (1.0 + rhs.abs()),
                "pairing gap {}",
                (lhs - rhs).abs()
            );
        }
    }
}

#[test]
fn shift_operator_norms_are_bounded() {
    let grid = unit_grid(1024);
    let cover = BoundaryCover::unit_default();
    let h = grid.spacing();
    let node0 = grid.node(0);
    // regression constant measured over this family once; the sup bound is
    // structural (partition of unity plus zero extension)
    const H10_OPERATOR_BOUND: f64 = 3.0;
    let test_functions: Vec<Field> = vec![
        Field::from_fn(&grid, |x| (std::f64::consts::PI * x).sin()),
        Field::from_fn(&grid, |x| (3.0 * std::f64::consts::PI * x).sin()),
        spme::samples::bump_field(&grid, 0.3, 0.2),
        spme::samples::bump_field(&grid, 0.62, 0.3),
        Field::from_fn(&grid, |x| x * (1.0 - x)),
    ];
    for eta in &test_functions {
        let sup: f64 = eta.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        for eps in [0.2, 0.05, 0.01] {
            let margin = cover.margin(eps).unwrap();
            let shifted = cover.shift_samples(eta.values(), node0, h, eps);
            let sup_shifted = shifted.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(sup_shifted <= sup * (1.0 + 1e-12));
            let smoothed = mollify_samples(&shifted, h, 0.5 * margin);
            let sup_smoothed = smoothed.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(sup_smoothed <= sup_shifted * (1.0 + 1e-12));
            let shifted_field = Field::from_values(&grid, shifted).unwrap();
            let smoothed_field = Field::from_values(&grid, smoothed).unwrap();
            assert!(shifted_field.h10_norm() <= H10_OPERATOR_BOUND * eta.h10_norm());
            assert!(smoothed_field.h10_norm() <= H10_OPERATOR_BOUND * eta.h10_norm());
        }
    }
}

#[test]
fn shifted_mollified_test_functions_converge() {
    let grid = unit_grid(4096);
    let cover = BoundaryCover::unit_default();
    let h = grid.spacing();
    let node0 = grid.node(0);
    let eta = spme::samples::bump_field(&grid, 0.5, 0.15);
    let mut prev_sup = f64::INFINITY;
    for k in [4u32, 6, 8] {
        let eps = 0.5f64.powi(k as i32);
        let params = ShiftMollifyParams::canonical(&cover, eps).unwrap();
        let shifted = cover.shift_samples(eta.values(), node0, h, params.eps);
        let smoothed = mollify_samples(&shifted, h, params.delta);
        let diff = Field::from_values(&grid, smoothed).unwrap().sub(&eta);
        let sup = diff.values().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let h10 = diff.h10_norm();
        assert!(sup <= prev_sup + 1e-15);
        prev_sup = sup;
        if k == 8 {
            assert!(sup < 1e-2, "sup distance {} at eps 2^-8", sup);
            assert!(h10 < 1e-2, "H10 distance {} at eps 2^-8", h10);
        }
    }
}

#[test]
fn atom_approximation_converges_constructively() {
    let grid = unit_grid(1 << 14);
    let cover = BoundaryCover::unit_default();
    let f = EnergyFunctional::new(Potential::psi1());
    let mu = RadonMeasure::dirac(&grid, 0.5, 1.0).unwrap();
    let target = f.energy_measure(&mu);
    assert!((target - 1.0).abs() < 1e-9);

    let u64 = approx_sequence(&cover, &mu, 64).unwrap();
    let e64 = f.energy_field(&u64);
    assert!((e64 - 1.0).abs() <= 0.05, "energy at n=64: {}", e64);

    // monotone from above: never exceeds the limiting energy
    for n in [16, 64, 256] {
        let u = approx_sequence(&cover, &mu, n).unwrap();
        assert!(f.energy_field(&u) <= target + 1e-8);
    }

    // weak pairing gap against a smooth test function at n = 256
    let u256 = approx_sequence(&cover, &mu, 256).unwrap();
    let eta = |x: f64| (std::f64::consts::PI * x).sin();
    let pair_u: f64 = grid.spacing()
        * u256
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * eta(grid.node(i)))
            .sum::<f64>();
    let pair_mu = mu.pair_fn(eta);
    assert!(
        (pair_u - pair_mu).abs() <= 1e-2,
        "pairing gap {}",
        (pair_u - pair_mu).abs()
    );
}

#[test]
fn density_approximation_pairing_gap_vanishes() {
    let grid = unit_grid(1 << 13);
    let cover = BoundaryCover::unit_default();
    let mu = RadonMeasure::from_density_fn(&grid, |_| 2.0);
    let eta = |x: f64| (std::f64::consts::PI * x).sin();
    let pair_mu = mu.pair_fn(eta);
    let mut prev_gap = f64::INFINITY;
    for n in [16, 64, 256] {
        let u = approx_sequence(&cover, &mu, n).unwrap();
        let pair_u: f64 = grid.spacing()
            * u.values()
                .iter()
                .enumerate()
                .map(|(i, v)| v * eta(grid.node(i)))
                .sum::<f64>();
        let gap = (pair_u - pair_mu).abs();
        assert!(gap <= prev_gap * 1.01 + 1e-12);
        prev_gap = gap;
    }
    assert!(prev_gap <= 1e-2, "gap at n=256: {}", prev_gap);
}

/// Two-stage Richardson limit estimate for a dyadic sequence whose error is
/// dominated by `a/n + b/n^2`.
fn dyadic_limit_estimate(e: &[f64]) -> f64 {
    assert!(e.len() >= 3);
    let k = e.len();
    let r1_last = 2.0 * e[k - 1] - e[k - 2];
    let r1_prev = 2.0 * e[k - 2] - e[k - 3];
    r1_last + (r1_last - r1_prev) / 3.0
}

#[test]
fn lower_semicontinuity_witness_along_the_sequence() {
    let grid = unit_grid(1 << 15);
    let cover = BoundaryCover::unit_default();
    let f = EnergyFunctional::new(Potential::psi1());
    let ns = [256usize, 512, 1024];
    let energies = |mu: &RadonMeasure| -> Vec<f64> {
        ns.iter()
            .map(|&n| f.energy_field(&approx_sequence(&cover, mu, n).unwrap()))
            .collect()
    };

    // fixtures with clean dyadic asymptotics carry the sharp tolerance
    let clean: Vec<RadonMeasure> = vec![
        RadonMeasure::dirac(&grid, 0.5, 1.0).unwrap(),
        RadonMeasure::from_density_fn(&grid, |x| 2.5 * (3.0 * x).sin()),
    ];
    for mu in &clean {
        let e = energies(mu);
        let target = f.energy_measure(mu);
        let liminf_hat = dyadic_limit_estimate(&e);
        assert!(
            target <= liminf_hat + 1e-6,
            "energy {} above extrapolated liminf {} (raw {:?})",
            target,
            liminf_hat,
            e
        );
        for v in &e {
            assert!(*v <= target + 1e-8);
        }
    }

    // randomized measures: kernel/lattice alignment wobbles the deficit at
    // the 1e-4 level, which bounds what any limit estimate can certify;
    // convergence itself shows as deficit halving along the dyadic ladder
    let mut rng = ChaCha8Rng::seed_from_u64(207);
    for _ in 0..5 {
        let mu = random_measure(&grid, &mut rng);
        let e = energies(&mu);
        let target = f.energy_measure(&mu);
        let liminf_hat = dyadic_limit_estimate(&e);
        assert!(
            target <= liminf_hat + 1e-4 * (1.0 + target),
            "energy {} above extrapolated liminf {} (raw {:?})",
            target,
            liminf_hat,
            e
        );
        let d_mid = target - e[1];
        let d_last = target - e[2];
        assert!(d_last >= -1e-8);
        assert!(
            d_last <= 0.65 * d_mid + 1e-9,
            "deficit not decaying: {} -> {}",
            d_mid,
            d_last
        );
    }
}

#[test]
fn psi_of_measure_prices_atoms_by_recession() {
    let grid = unit_grid(512);
    let psi = Potential::psi1();
    let mu = RadonMeasure::new(&grid, vec![2.0; grid.cells()], vec![(0.5, 3.0)]).unwrap();
    let pm = psi_of_measure(&psi, &mu).unwrap();
    assert_eq!(pm.atoms().len(), 1);
    assert!((pm.atoms()[0].1 - 3.0).abs() < 1e-9);
    assert!((pm.tv_norm() - 4.0).abs() < 1e-9);
    // splitting: density and atoms contribute independently
    let density_only = RadonMeasure::new(&grid, vec![2.0; grid.cells()], vec![]).unwrap();
    let atom_only = RadonMeasure::dirac(&grid, 0.5, 3.0).unwrap();
    let sum = psi_of_measure(&psi, &density_only).unwrap().tv_norm()
        + psi_of_measure(&psi, &atom_only).unwrap().tv_norm();
    assert!((pm.tv_norm() - sum).abs() < 1e-12);
}
