//! Signed Radon measures on a bounded interval, convex functions of measures,
//! the total-variation energy functional and the mollify-and-shift
//! approximation that reduces measure data to bounded densities.
//!
//! A measure is stored as its Lebesgue decomposition: an absolutely
//! continuous part sampled on cell midpoints plus a finite list of interior
//! atoms. The singular-continuous part is unrepresentable by design; atoms
//! are the extreme singular case and exercise every estimate the crate
//! needs.
//!
//! The boundary machinery covers the interval by an interior patch and two
//! boundary patches with a smooth partition of unity. Test functions are
//! shifted inward patch by patch; measures transform under the exact adjoint
//! of that map, so the pairing identity `<mu_eps, eta> = <mu, eta_eps>` holds
//! to machine precision on sampled test functions. Mollification uses the
//! standard symmetric bump kernel, discretely renormalized per source so that
//! interior mass is preserved exactly and the convexity (Jensen) bookkeeping
//! behind the energy estimates carries over to the lattice without slack.

use std::fmt;

use crate::convex::{ConvexError, GrowthClass, Potential};
use crate::grid::{interp_lattice, Field, Grid};

#[derive(Clone, Debug)]
pub enum MeasureError {
    /// The covering construction cannot fit on the interval.
    DomainTooSmall { length: f64, needed: f64 },
    /// Shift/mollify parameters violate `0 < delta <= w(eps)/2`.
    ParamError(String),
    /// An atom sits outside the open interval or collides with another.
    BadAtom(String),
    GridMismatch,
    Convex(ConvexError),
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::DomainTooSmall { length, needed } => write!(
                f,
                "interval of length {} too small for the boundary covering (needs > {})",
                length, needed
            ),
            MeasureError::ParamError(msg) => write!(f, "{}", msg),
            MeasureError::BadAtom(msg) => write!(f, "{}", msg),
            MeasureError::GridMismatch => write!(f, "measure and field grids differ"),
            MeasureError::Convex(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for MeasureError {}

impl From<ConvexError> for MeasureError {
    fn from(e: ConvexError) -> Self {
        MeasureError::Convex(e)
    }
}

/// A signed Radon measure on the grid's interval: midpoint-sampled density
/// plus interior atoms `(location, signed mass)`.
#[derive(Clone, Debug)]
pub struct RadonMeasure {
    grid: Grid,
    density: Vec<f64>,
    atoms: Vec<(f64, f64)>,
}

impl RadonMeasure {
    pub fn zero(grid: &Grid) -> Self {
        RadonMeasure {
            grid: grid.clone(),
            density: vec![0.0; grid.cells()],
            atoms: Vec::new(),
        }
    }

    pub fn new(grid: &Grid, density: Vec<f64>, atoms: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        if density.len() != grid.cells() {
            return Err(MeasureError::GridMismatch);
        }
        for (i, &(loc, _)) in atoms.iter().enumerate() {
            if !(loc > grid.a() && loc < grid.b()) {
                return Err(MeasureError::BadAtom(format!(
                    "atom location {} not strictly inside ({}, {})",
                    loc,
                    grid.a(),
                    grid.b()
                )));
            }
            if atoms[..i].iter().any(|&(l, _)| l == loc) {
                return Err(MeasureError::BadAtom(format!(
                    "duplicate atom location {}",
                    loc
                )));
            }
        }
        Ok(RadonMeasure {
            grid: grid.clone(),
            density,
            atoms,
        })
    }

    /// Density sampled from a function at cell midpoints, no atoms.
    pub fn from_density_fn(grid: &Grid, h: impl Fn(f64) -> f64) -> Self {
        let density = (0..grid.cells()).map(|i| h(grid.midpoint(i))).collect();
        RadonMeasure {
            grid: grid.clone(),
            density,
            atoms: Vec::new(),
        }
    }

    pub fn dirac(grid: &Grid, location: f64, mass: f64) -> Result<Self, MeasureError> {
        RadonMeasure::new(grid, vec![0.0; grid.cells()], vec![(location, mass)])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Total variation `int |h| dx + sum |m_i|`.
    pub fn tv_norm(&self) -> f64 {
        let h = self.grid.spacing();
        let ac: f64 = h * self.density.iter().map(|d| d.abs()).sum::<f64>();
        let sing: f64 = self.atoms.iter().map(|(_, m)| m.abs()).sum();
        ac + sing
    }

    /// Total mass `mu(O)`.
    pub fn mass(&self) -> f64 {
        let h = self.grid.spacing();
        h * self.density.iter().sum::<f64>() + self.atoms.iter().map(|(_, m)| m).sum::<f64>()
    }

    /// Pair against a function given in closed form.
    pub fn pair_fn(&self, eta: impl Fn(f64) -> f64) -> f64 {
        let h = self.grid.spacing();
        let ac: f64 = h * self
            .density
            .iter()
            .enumerate()
            .map(|(i, d)| d * eta(self.grid.midpoint(i)))
            .sum::<f64>();
        let sing: f64 = self.atoms.iter().map(|&(a, m)| m * eta(a)).sum();
        ac + sing
    }

    /// Pair against midpoint samples of a test function (atoms interpolate
    /// the zero-extended samples linearly).
    pub fn pair_samples(&self, samples: &[f64]) -> f64 {
        assert_eq!(samples.len(), self.grid.cells());
        let h = self.grid.spacing();
        let x0 = self.grid.midpoint(0);
        let ac: f64 = h * self
            .density
            .iter()
            .zip(samples)
            .map(|(d, s)| d * s)
            .sum::<f64>();
        let sing: f64 = self
            .atoms
            .iter()
            .map(|&(a, m)| m * interp_lattice(samples, x0, h, a))
            .sum();
        ac + sing
    }

    /// The same measure on a strictly larger interval, extended by zero.
    /// The new grid keeps the cell size and aligns with the original lattice.
    pub fn zero_extend(&self, pad_cells: usize) -> RadonMeasure {
        let h = self.grid.spacing();
        let a = self.grid.a() - pad_cells as f64 * h;
        let b = self.grid.b() + pad_cells as f64 * h;
        let grid = Grid::new(a, b, self.grid.cells() + 2 * pad_cells).expect("padded grid valid");
        let mut density = vec![0.0; grid.cells()];
        density[pad_cells..pad_cells + self.grid.cells()].copy_from_slice(&self.density);
        RadonMeasure {
            grid,
            density,
            atoms: self.atoms.clone(),
        }
    }

    /// Hat-deposit the measure onto the interior nodes of a grid; realizes
    /// the embedding of measures into the discrete H^-1 machinery.
    pub fn deposit(&self, grid: &Grid) -> Field {
        let mut out = Field::zeros(grid);
        let h = grid.spacing();
        let x0 = grid.node(0);
        {
            let values = out.values_mut();
            let mut deposit_mass = |location: f64, mass: f64| {
                let t = (location - x0) / h;
                let i = t.floor();
                let frac = t - i;
                let i = i as isize;
                if i >= 0 && (i as usize) < values.len() {
                    values[i as usize] += mass * (1.0 - frac) / h;
                }
                if i + 1 >= 0 && ((i + 1) as usize) < values.len() {
                    values[(i + 1) as usize] += mass * frac / h;
                }
            };
            let hm = self.grid.spacing();
            for (i, &d) in self.density.iter().enumerate() {
                if d != 0.0 {
                    deposit_mass(self.grid.midpoint(i), d * hm);
                }
            }
            for &(a, m) in &self.atoms {
                deposit_mass(a, m);
            }
        }
        out
    }
}

/// Boundary covering of the interval: interior patch `U0`, boundary patches
/// `U1`, `U2` of height `2 h*`, with a smooth monotone partition of unity and
/// unit inward shift directions.
#[derive(Clone, Debug)]
pub struct BoundaryCover {
    a: f64,
    b: f64,
    h_star: f64,
}

/// Default chart height for the unit interval.
pub const DEFAULT_CHART_HEIGHT: f64 = 0.2;

impl BoundaryCover {
    pub fn new(a: f64, b: f64, h_star: f64) -> Result<Self, MeasureError> {
        let length = b - a;
        if !(h_star > 0.0) || length <= 4.0 * h_star {
            return Err(MeasureError::DomainTooSmall {
                length,
                needed: 4.0 * h_star,
            });
        }
        Ok(BoundaryCover { a, b, h_star })
    }

    pub fn unit_default() -> Self {
        BoundaryCover::new(0.0, 1.0, DEFAULT_CHART_HEIGHT).expect("unit cover valid")
    }

    pub fn for_grid(grid: &Grid, h_star: f64) -> Result<Self, MeasureError> {
        BoundaryCover::new(grid.a(), grid.b(), h_star)
    }

    pub fn chart_height(&self) -> f64 {
        self.h_star
    }

    /// Distance of the interior patch to the complement of the interval.
    pub fn interior_patch_distance(&self) -> f64 {
        self.h_star / 2.0
    }

    /// Shift direction of patch `j` (0 interior, 1 left, 2 right).
    pub fn shift_dir(&self, j: usize) -> f64 {
        match j {
            1 => 1.0,
            2 => -1.0,
            _ => 0.0,
        }
    }

    /// Partition of unity member `j` at `x`. The boundary members are
    /// monotone towards the interior, which is what makes the shift
    /// construction energy-contracting; their transition band is kept short
    /// so inward shifts perturb pairings as little as possible.
    pub fn zeta(&self, j: usize, x: f64) -> f64 {
        match j {
            1 => 1.0 - smoothstep((x - (self.a + 0.5 * self.h_star)) / (0.75 * self.h_star)),
            2 => 1.0 - smoothstep(((self.b - 0.5 * self.h_star) - x) / (0.75 * self.h_star)),
            _ => (1.0 - self.zeta(1, x) - self.zeta(2, x)).max(0.0),
        }
    }

    /// Width of the boundary strip on which inward-shifted test functions
    /// vanish: `w(eps) = min{dist(U0, O^c), eps/2, h*/4}`.
    pub fn margin(&self, eps: f64) -> Result<f64, MeasureError> {
        if !(eps > 0.0) {
            return Err(MeasureError::ParamError(format!(
                "shift scale must be positive, got {}",
                eps
            )));
        }
        Ok(self
            .interior_patch_distance()
            .min(0.5 * eps)
            .min(0.25 * self.h_star))
    }

    /// Inward shift of a sampled test function: the value at `x` is the
    /// partition-weighted zero-extended interpolant at `x - eps * dir_j`.
    pub fn shifted_eval(&self, samples: &[f64], x0: f64, h: f64, eps: f64, x: f64) -> f64 {
        let mut acc = 0.0;
        for j in 0..3 {
            let w = self.zeta(j, x);
            if w != 0.0 {
                acc += w * interp_lattice(samples, x0, h, x - eps * self.shift_dir(j));
            }
        }
        acc
    }

    /// Inward shift of a lattice of samples, returned on the same lattice.
    pub fn shift_samples(&self, samples: &[f64], x0: f64, h: f64, eps: f64) -> Vec<f64> {
        (0..samples.len())
            .map(|i| self.shifted_eval(samples, x0, h, eps, x0 + i as f64 * h))
            .collect()
    }

    /// Exact adjoint of [`BoundaryCover::shift_samples`] acting on lattice
    /// masses: each source splits by the partition weights at the source and
    /// scatters to `source - eps * dir_j` with hat weights; mass leaving the
    /// lattice is dropped (zero extension of the test functions).
    pub fn scatter_adjoint(&self, values: &[f64], x0: f64, h: f64, eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (i, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let xi = x0 + i as f64 * h;
            for j in 0..3 {
                let w = self.zeta(j, xi) * v;
                if w == 0.0 {
                    continue;
                }
                let target = xi - eps * self.shift_dir(j);
                let t = (target - x0) / h;
                let k = t.floor();
                let frac = t - k;
                let k = k as isize;
                if k >= 0 && (k as usize) < out.len() {
                    out[k as usize] += w * (1.0 - frac);
                }
                if k + 1 >= 0 && ((k + 1) as usize) < out.len() {
                    out[(k + 1) as usize] += w * frac;
                }
            }
        }
        out
    }
}

/// Smooth monotone transition: 0 for `t <= 0`, 1 for `t >= 1`.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Shift and mollification scales with their admissibility constraint
/// `0 < delta <= w(eps)/2`.
#[derive(Clone, Debug)]
pub struct ShiftMollifyParams {
    pub eps: f64,
    pub delta: f64,
    pub boundary_margin: f64,
}

impl ShiftMollifyParams {
    pub fn new(cover: &BoundaryCover, eps: f64, delta: f64) -> Result<Self, MeasureError> {
        let margin = cover.margin(eps)?;
        if !(delta > 0.0 && delta <= 0.5 * margin) {
            return Err(MeasureError::ParamError(format!(
                "mollifier width {} must lie in (0, {}] (half the boundary margin)",
                delta,
                0.5 * margin
            )));
        }
        Ok(ShiftMollifyParams {
            eps,
            delta,
            boundary_margin: margin,
        })
    }

    /// The canonical choice `delta = w(eps)/2`.
    pub fn canonical(cover: &BoundaryCover, eps: f64) -> Result<Self, MeasureError> {
        let margin = cover.margin(eps)?;
        ShiftMollifyParams::new(cover, eps, 0.5 * margin)
    }
}

/// The symmetric bump `exp(-1/(1-(d/delta)^2))` truncated at `|d| = delta`,
/// unnormalized; discrete sums renormalize per source.
fn bump(delta: f64, d: f64) -> f64 {
    let u = d / delta;
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Peak value of the normalized continuum kernel `rho_delta(0)`; the bump
/// integral constant is `int_{-1}^{1} exp(-1/(1-u^2)) du = 0.443993816...`.
pub fn mollifier_sup(delta: f64) -> f64 {
    const BUMP_INTEGRAL: f64 = 0.443_993_816_168_005_3;
    (-1.0f64).exp() / (BUMP_INTEGRAL * delta)
}

/// Mollify a measure: sample `rho_delta * mu` on the interior nodes of the
/// measure's grid. The discrete kernel is renormalized per source, so the
/// field integrates to the measure's mass whenever no mass sits within
/// `delta` of the boundary.
pub fn mollify(mu: &RadonMeasure, delta: f64) -> Result<Field, MeasureError> {
    if !(delta > 0.0) {
        return Err(MeasureError::ParamError(format!(
            "mollifier width must be positive, got {}",
            delta
        )));
    }
    let grid = mu.grid().clone();
    let h = grid.spacing();
    let x0 = grid.node(0);
    let n = grid.interior_len();
    let mut out = vec![0.0; n];
    let mut deposit_from = |source: f64, mass: f64| {
        if mass == 0.0 {
            return;
        }
        // raw kernel weights over the full (virtual) node lattice
        let k_lo = ((source - delta - x0) / h).floor() as isize - 1;
        let k_hi = ((source + delta - x0) / h).ceil() as isize + 1;
        let mut z = 0.0;
        for k in k_lo..=k_hi {
            z += bump(delta, x0 + k as f64 * h - source);
        }
        if z == 0.0 {
            // kernel narrower than the lattice: hat-deposit instead so no
            // interior mass silently vanishes
            let t = (source - x0) / h;
            let k = t.floor();
            let frac = t - k;
            let k = k as isize;
            if k >= 0 && (k as usize) < n {
                out[k as usize] += mass * (1.0 - frac) / h;
            }
            if k + 1 >= 0 && ((k + 1) as usize) < n {
                out[(k + 1) as usize] += mass * frac / h;
            }
            return;
        }
        for k in k_lo..=k_hi {
            if k >= 0 && (k as usize) < n {
                let w = bump(delta, x0 + k as f64 * h - source) / z;
                out[k as usize] += mass * w / h;
            }
        }
    };
    let hm = grid.spacing();
    for (i, &d) in mu.density().iter().enumerate() {
        deposit_from(grid.midpoint(i), d * hm);
    }
    for &(a, m) in mu.atoms() {
        deposit_from(a, m);
    }
    Field::from_values(&grid, out).map_err(|_| MeasureError::GridMismatch)
}

/// Discrete convolution of zero-extended lattice samples with the
/// normalized bump kernel, returned on the same lattice. This is the
/// test-function side of the mollification machinery.
pub fn mollify_samples(values: &[f64], h: f64, delta: f64) -> Vec<f64> {
    let reach = (delta / h).ceil() as isize + 1;
    let weights: Vec<f64> = (-reach..=reach)
        .map(|j| bump(delta, j as f64 * h))
        .collect();
    let z: f64 = weights.iter().sum();
    if z == 0.0 {
        return values.to_vec();
    }
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (w_idx, j) in (-reach..=reach).enumerate() {
                let k = i + j;
                if k >= 0 && k < n {
                    acc += weights[w_idx] * values[k as usize];
                }
            }
            acc / z
        })
        .collect()
}

/// The inward measure shift `mu_eps` defined through the dual pairing
/// `<mu_eps, eta> = <mu, eta_eps>`: the density scatters by the exact adjoint
/// of the sampled test-function shift, atoms split by the partition weights
/// at their location and transport to `a - eps * dir_j`.
pub fn shift_measure(
    cover: &BoundaryCover,
    mu: &RadonMeasure,
    eps: f64,
) -> Result<RadonMeasure, MeasureError> {
    cover.margin(eps)?; // validates eps > 0
    let grid = mu.grid().clone();
    let h = grid.spacing();
    let x0 = grid.midpoint(0);
    let density = cover.scatter_adjoint(mu.density(), x0, h, eps);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for &(a, m) in mu.atoms() {
        for j in 0..3 {
            let w = cover.zeta(j, a) * m;
            if w == 0.0 {
                continue;
            }
            let target = a - eps * cover.shift_dir(j);
            if target <= grid.a() || target >= grid.b() {
                continue; // transported outside: zero extension drops it
            }
            match atoms.iter_mut().find(|(loc, _)| *loc == target) {
                Some(entry) => entry.1 += w,
                None => atoms.push((target, w)),
            }
        }
    }
    Ok(RadonMeasure {
        grid,
        density,
        atoms,
    })
}

/// Mollify, restrict, then shift: the bounded-density approximation
/// `mu_{eps,delta}` of a measure. Returns its density as a field.
pub fn shift_mollify(
    cover: &BoundaryCover,
    mu: &RadonMeasure,
    params: &ShiftMollifyParams,
) -> Result<Field, MeasureError> {
    let smooth = mollify(mu, params.delta)?;
    let grid = smooth.grid().clone();
    let shifted = cover.scatter_adjoint(
        smooth.values(),
        grid.node(0),
        grid.spacing(),
        params.eps,
    );
    Field::from_values(&grid, shifted).map_err(|_| MeasureError::GridMismatch)
}

/// The approximating sequence at step `n`: shift-mollify with `eps = 1/n` and
/// the canonical mollifier width `w(1/n)/2`.
pub fn approx_sequence(
    cover: &BoundaryCover,
    mu: &RadonMeasure,
    n: usize,
) -> Result<Field, MeasureError> {
    assert!(n >= 1, "approximation index must be positive");
    let eps = 1.0 / n as f64;
    let params = ShiftMollifyParams::canonical(cover, eps)?;
    shift_mollify(cover, mu, &params)
}

/// The positive measure `psi(mu)`: density `psi(h(x))` plus atoms priced by
/// the recession slope, `(a_i, |m_i| psi_inf(1))`.
pub fn psi_of_measure(psi: &Potential, mu: &RadonMeasure) -> Result<RadonMeasure, MeasureError> {
    if psi.growth_class() != GrowthClass::Sublinear {
        return Err(MeasureError::Convex(ConvexError::GrowthClass {
            expected: GrowthClass::Sublinear,
            got: psi.growth_class(),
        }));
    }
    let rec = psi.recession_at_one();
    let density = mu.density().iter().map(|&d| psi.eval(d)).collect();
    let atoms = mu
        .atoms()
        .iter()
        .filter(|&&(_, m)| m != 0.0)
        .map(|&(a, m)| (a, m.abs() * rec))
        .collect();
    Ok(RadonMeasure {
        grid: mu.grid().clone(),
        density,
        atoms,
    })
}

/// Which formula the energy functional uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyRegime {
    /// `int psi(u) dx` on densities, infinite on singular parts.
    SuperlinearIntegral,
    /// `|| psi(mu) ||_TV` on measures.
    SublinearTv,
}

/// The convex energy functional induced by a potential.
#[derive(Clone, Debug)]
pub struct EnergyFunctional {
    potential: Potential,
    regime: EnergyRegime,
}

impl EnergyFunctional {
    pub fn new(potential: Potential) -> Self {
        let regime = match potential.growth_class() {
            GrowthClass::Sublinear => EnergyRegime::SublinearTv,
            GrowthClass::Superlinear => EnergyRegime::SuperlinearIntegral,
        };
        EnergyFunctional { potential, regime }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn regime(&self) -> EnergyRegime {
        self.regime
    }

    /// Energy of a measure; `+inf` is a legal value (superlinear regime with
    /// a nontrivial singular part).
    pub fn energy_measure(&self, mu: &RadonMeasure) -> f64 {
        match self.regime {
            EnergyRegime::SublinearTv => {
                let psi_mu = psi_of_measure(&self.potential, mu)
                    .expect("sublinear regime matches the potential");
                psi_mu.tv_norm()
            }
            EnergyRegime::SuperlinearIntegral => {
                if mu.atoms().iter().any(|&(_, m)| m != 0.0) {
                    return f64::INFINITY;
                }
                let h = mu.grid().spacing();
                h * mu.density().iter().map(|&d| self.potential.eval(d)).sum::<f64>()
            }
        }
    }

    /// Energy of a grid field (an absolutely continuous measure).
    pub fn energy_field(&self, u: &Field) -> f64 {
        u.integral_of(|v| self.potential.eval(v))
    }
}
