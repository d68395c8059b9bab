//! Time stepping for the viscosity/Yosida-regularized equation
//! `dX = eps Delta X dt + Delta phi^eps(X) dt + B(t, X) dW` with zero
//! Dirichlet boundary, and Monte-Carlo path ensembles with the energy
//! statistics the well-posedness estimates call for.
//!
//! The default scheme is fully implicit in the drift (noise at the left
//! endpoint): each step solves the strongly monotone system
//! `y - dt Delta(eps y + phi^eps(y)) = x + B dW` by a damped semismooth
//! Newton iteration preconditioned by the tridiagonal structure. The
//! semi-implicit variant treats only the viscosity implicitly and is subject
//! to the usual `dt <= eps h^2 / 4` restriction.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{ConvexError, Potential, RegularizedPotential};
use crate::grid::{DirichletLaplacian, Field, Grid, GridError};
use crate::noise::{NoiseError, NoiseModel, WienerIncrement};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 200;
const BATCHES: usize = 10;

#[derive(Clone, Debug)]
pub enum SolverError {
    Grid(GridError),
    Noise(NoiseError),
    Convex(ConvexError),
    BadConfig(String),
    StabilityViolation { dt: f64, bound: f64 },
    NewtonDivergence { at_t: f64, residuals: Vec<f64> },
    ConfigMismatch(String),
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Grid(e) => write!(f, "{}", e),
            SolverError::Noise(e) => write!(f, "{}", e),
            SolverError::Convex(e) => write!(f, "{}", e),
            SolverError::BadConfig(m) => write!(f, "{}", m),
            SolverError::StabilityViolation { dt, bound } => write!(
                f,
                "StabilityViolation: dt = {} exceeds the semi-implicit bound {}",
                dt, bound
            ),
            SolverError::NewtonDivergence { at_t, residuals } => write!(
                f,
                "NewtonDivergence at t = {} after {} iterations (last residual {:e})",
                at_t,
                residuals.len(),
                residuals.last().copied().unwrap_or(f64::NAN)
            ),
            SolverError::ConfigMismatch(m) => write!(f, "ConfigMismatch: {}", m),
        }
    }
}

impl std::error::Error for SolverError {}

impl From<GridError> for SolverError {
    fn from(e: GridError) -> Self {
        SolverError::Grid(e)
    }
}

impl From<NoiseError> for SolverError {
    fn from(e: NoiseError) -> Self {
        SolverError::Noise(e)
    }
}

impl From<ConvexError> for SolverError {
    fn from(e: ConvexError) -> Self {
        SolverError::Convex(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitMonotone,
    SemiImplicit,
}

/// Full description of a regularized-equation run.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub grid: Grid,
    pub potential: Potential,
    /// Shared viscosity and Yosida parameter.
    pub eps: f64,
    pub dt: f64,
    pub t_end: f64,
    pub noise: NoiseModel,
    pub scheme: Scheme,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub paths: usize,
    /// Exponential weight rate for coupled difference statistics; defaults to
    /// twice the squared Lipschitz constant of the noise gain.
    pub decay_k: Option<f64>,
    /// Record full states every this many steps (0 = automatic: about 256
    /// snapshots per run).
    pub snapshot_cadence: usize,
    /// Keep raw snapshots for at most this many paths.
    pub snapshot_paths: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid, potential: Potential, eps: f64, dt: f64, t_end: f64, noise: NoiseModel) -> Self {
        SolverConfig {
            grid,
            potential,
            eps,
            dt,
            t_end,
            noise,
            scheme: Scheme::ImplicitMonotone,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            paths: 1,
            decay_k: None,
            snapshot_cadence: 0,
            snapshot_paths: 8,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_k
            .unwrap_or_else(|| 2.0 * self.noise.multiplier.lipschitz_constant().powi(2))
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.eps > 0.0) {
            return Err(SolverError::BadConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0 && self.dt <= self.t_end) {
            return Err(SolverError::BadConfig(format!(
                "need 0 < dt <= t_end, got dt = {}, t_end = {}",
                self.dt, self.t_end
            )));
        }
        let steps = self.steps();
        if steps == 0 || (steps as f64 * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(SolverError::BadConfig(format!(
                "t_end = {} must be an integer multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.paths == 0 {
            return Err(SolverError::BadConfig("need at least one path".into()));
        }
        if self.newton_max_iter == 0 || !(self.newton_tol > 0.0) {
            return Err(SolverError::BadConfig("invalid newton controls".into()));
        }
        self.noise.validate()?;
        if self.noise.modes > self.grid.interior_len() {
            return Err(SolverError::BadConfig(format!(
                "noise truncation {} exceeds the {} grid modes",
                self.noise.modes,
                self.grid.interior_len()
            )));
        }
        if self.scheme == Scheme::SemiImplicit {
            let h = self.grid.spacing();
            let bound = self.eps * h * h / 4.0;
            if self.dt > bound {
                return Err(SolverError::StabilityViolation { dt: self.dt, bound });
            }
        }
        Ok(())
    }

    fn snapshot_stride(&self) -> usize {
        if self.snapshot_cadence > 0 {
            self.snapshot_cadence
        } else {
            (self.steps() / 256).max(1)
        }
    }

    /// Step indices (including 0 and the final step) at which states are
    /// recorded.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let steps = self.steps();
        let stride = self.snapshot_stride();
        let mut idx: Vec<usize> = (0..=steps).step_by(stride).collect();
        if *idx.last().unwrap() != steps {
            idx.push(steps);
        }
        idx
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshot_steps().iter().map(|&k| k as f64 * self.dt).collect()
    }
}

/// Precomputed operators for stepping one configuration.
pub struct Stepper {
    cfg: SolverConfig,
    lap: DirichletLaplacian,
    rp: RegularizedPotential,
    /// Cached noise basis: weighted H^-1-normalized sine modes.
    noise_basis: Vec<Field>,
    /// Sorted flux-variable abscissae (negative mirrors included) where the
    /// slope of the inverse flux map jumps; empty when unknown.
    flux_boundaries: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let lap = DirichletLaplacian::new(&cfg.grid);
        let rp = RegularizedPotential::new(cfg.potential.clone(), cfg.eps)?;
        let mut flux_boundaries: Vec<f64> = rp
            .theta_breakpoints()
            .into_iter()
            .filter(|&b| b > 0.0 && b.is_finite())
            .flat_map(|b| [b, -b])
            .collect();
        flux_boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
        flux_boundaries.dedup();
        let mut noise_basis = Vec::with_capacity(cfg.noise.modes);
        for i in 1..=cfg.noise.modes {
            let mode = lap.sine_mode(i)?;
            noise_basis.push(mode.scaled(cfg.noise.weight(i)));
        }
        Ok(Stepper {
            cfg: cfg.clone(),
            lap,
            rp,
            noise_basis,
            flux_boundaries,
        })
    }

    /// `B(t, x) dw` via the cached mode basis.
    fn apply_noise(&self, x: &Field, dw: &WienerIncrement) -> Field {
        let mut out = Field::zeros(&self.cfg.grid);
        for (mode, &g) in self.noise_basis.iter().zip(&dw.gaussians) {
            if g != 0.0 {
                out.add_assign_scaled(mode, g);
            }
        }
        if let crate::noise::Multiplier::LipschitzDiagonal { .. } = self.cfg.noise.multiplier {
            for (v, &xi) in out.values_mut().iter_mut().zip(x.values()) {
                *v *= self.cfg.noise.multiplier.sigma(xi);
            }
        }
        out
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn laplacian(&self) -> &DirichletLaplacian {
        &self.lap
    }

    pub fn regularized_potential(&self) -> &RegularizedPotential {
        &self.rp
    }

    /// The Moreau-envelope energy `int psi^eps(x) dx`.
    pub fn phi_eps_energy(&self, x: &Field) -> Result<f64, SolverError> {
        let h = x.grid().spacing();
        let mut acc = 0.0;
        for &v in x.values() {
            acc += self.rp.moreau(v)?;
        }
        Ok(h * acc)
    }

    /// The drift `Delta(eps x + phi^eps(x))` (used to record test-process
    /// drifts and for diagnostics).
    pub fn drift(&self, x: &Field) -> Result<Field, SolverError> {
        let mut inner = x.clone();
        for v in inner.values_mut() {
            *v = self.cfg.eps * *v + self.rp.yosida(*v)?;
        }
        Ok(self.lap.apply(&inner)?)
    }

    /// Advance one step from `x` at time `t` with the given increment.
    pub fn step(&self, x: &Field, t: f64, dw: &WienerIncrement) -> Result<Field, SolverError> {
        if x.grid() != &self.cfg.grid {
            return Err(SolverError::Grid(GridError::GridMismatch));
        }
        if dw.gaussians.len() != self.cfg.noise.modes {
            return Err(SolverError::BadConfig(
                "increment length does not match the noise truncation".into(),
            ));
        }
        let mut r = x.clone();
        let noise = self.apply_noise(x, dw);
        r.add_assign_scaled(&noise, 1.0);
        match self.cfg.scheme {
            Scheme::ImplicitMonotone => self.implicit_solve(&r, t),
            Scheme::SemiImplicit => self.semi_implicit_solve(x, &r),
        }
    }

    /// Implicit step solve in the flux variable. The state equation
    /// `y + dt A theta(y) = r` (`A = -Delta`, `theta(y) = eps y +
    /// phi^eps(y)`) becomes, with `w = theta(y)`,
    ///
    /// ```text
    /// G(w) = theta^-1(w) + dt A w - r = 0,
    /// ```
    ///
    /// where the stiff operator enters linearly and the nonlinearity is a
    /// monotone diagonal map. A semismooth Newton step therefore mislabels
    /// at most the diagonal slopes of nodes crossing a kink of `theta^-1`,
    /// without amplification through `dt A`, and the damped iteration (full
    /// update clamped to the current slope segment first, then
    /// `1, 1/2, ...`, finally the exact pre-crossing fraction inside which
    /// `G` is affine) decreases the H^-1 residual strictly at every
    /// accepted iteration.
    fn implicit_solve(&self, r: &Field, t: f64) -> Result<Field, SolverError> {
        let n = r.len();
        let h2 = self.cfg.grid.spacing().powi(2);
        let dt = self.cfg.dt;
        let boundaries = &self.flux_boundaries;

        // residual and the state it belongs to
        let residual = |w: &Field| -> Result<(Field, Field), SolverError> {
            let mut y = w.clone();
            for v in y.values_mut() {
                *v = self.rp.theta_inv(*v)?;
            }
            let lap_w = self.lap.apply(w)?;
            let mut res = y.sub(r);
            res.add_assign_scaled(&lap_w, -dt);
            Ok((res, y))
        };

        let mut w = r.clone();
        for v in w.values_mut() {
            *v = self.rp.theta(*v)?;
        }
        let (mut res, mut y) = residual(&w)?;
        let mut res_norm = self.lap.hminus1_norm(&res)?;
        let mut history = vec![res_norm];

        for _ in 0..self.cfg.newton_max_iter {
            if res_norm <= self.cfg.newton_tol {
                return Ok(y);
            }
            // J = diag((theta^-1)'(w)) + dt A. A node sitting exactly on a
            // slope boundary is ambiguous: start from the side the residual
            // pushes towards, then make the side assignment consistent with
            // the computed direction.
            let on_boundary: Vec<bool> = w
                .values()
                .iter()
                .map(|&v| {
                    let tol = 1e-12 * (1.0 + v.abs());
                    boundaries.iter().any(|&b| (v - b).abs() <= tol)
                })
                .collect();
            let mut sides: Vec<f64> = res
                .values()
                .iter()
                .map(|&rv| if rv > 0.0 { -1.0 } else { 1.0 })
                .collect();
            let mut delta = Field::zeros(r.grid());
            let mut intervals = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
            for _correction in 0..4 {
                let mut lower = vec![-dt / h2; n];
                let mut diag = vec![0.0; n];
                let upper = vec![-dt / h2; n];
                for (i, &v) in w.values().iter().enumerate() {
                    intervals[i] = enclosing_segment(boundaries, v, sides[i]);
                    diag[i] = self.rp.theta_inv_slope(v, sides[i]) + 2.0 * dt / h2;
                }
                lower[0] = 0.0;
                let mut d: Vec<f64> = res.values().iter().map(|v| -v).collect();
                thomas_solve(&lower, &mut diag, &upper, &mut d);
                delta = Field::from_values(r.grid(), d)?;
                let mut consistent = true;
                for i in 0..n {
                    if on_boundary[i] && delta.values()[i] != 0.0 {
                        let want = delta.values()[i].signum();
                        if want != sides[i] {
                            sides[i] = want;
                            consistent = false;
                        }
                    }
                }
                if consistent {
                    break;
                }
            }

            let mut accepted = false;
            // active-set trial: full update clamped to the slope segments,
            // so plateaus of nodes land exactly on a kink in one move
            {
                let mut trial = w.clone();
                for (i, v) in trial.values_mut().iter_mut().enumerate() {
                    let (lo, hi) = intervals[i];
                    *v = (*v + delta.values()[i]).clamp(lo, hi);
                }
                let (trial_res, trial_y) = residual(&trial)?;
                let trial_norm = self.lap.hminus1_norm(&trial_res)?;
                if trial_norm < res_norm {
                    w = trial;
                    res = trial_res;
                    y = trial_y;
                    res_norm = trial_norm;
                    history.push(res_norm);
                    accepted = true;
                }
            }
            if !accepted {
                // exact fraction to the first kink crossing: G is affine
                // below it, so that step shrinks the residual by 1 - t
                let t_first = kink_limited_fraction(w.values(), delta.values(), boundaries)
                    * (1.0 - 1e-12);
                let mut damping = 1.0f64;
                loop {
                    let step = damping.max(t_first);
                    let mut trial = w.clone();
                    trial.add_assign_scaled(&delta, step);
                    let (trial_res, trial_y) = residual(&trial)?;
                    let trial_norm = self.lap.hminus1_norm(&trial_res)?;
                    if trial_norm < res_norm {
                        w = trial;
                        res = trial_res;
                        y = trial_y;
                        res_norm = trial_norm;
                        history.push(res_norm);
                        accepted = true;
                        break;
                    }
                    if step <= t_first {
                        break;
                    }
                    damping *= 0.5;
                }
            }
            if !accepted {
                return Err(SolverError::NewtonDivergence {
                    at_t: t,
                    residuals: history,
                });
            }
        }
        if res_norm <= self.cfg.newton_tol {
            Ok(y)
        } else {
            Err(SolverError::NewtonDivergence {
                at_t: t,
                residuals: history,
            })
        }
    }

    /// Implicit in the viscosity, explicit in the monotone drift.
    fn semi_implicit_solve(&self, x: &Field, r: &Field) -> Result<Field, SolverError> {
        let h = self.cfg.grid.spacing();
        let bound = self.cfg.eps * h * h / 4.0;
        if self.cfg.dt > bound {
            return Err(SolverError::StabilityViolation {
                dt: self.cfg.dt,
                bound,
            });
        }
        let mut yos = x.clone();
        for v in yos.values_mut() {
            *v = self.rp.yosida(*v)?;
        }
        let lap_yos = self.lap.apply(&yos)?;
        let mut rhs = r.clone();
        rhs.add_assign_scaled(&lap_yos, self.cfg.dt);
        // (I + eps dt A) y = rhs
        let n = rhs.len();
        let c = self.cfg.eps * self.cfg.dt / (h * h);
        let lower = vec![-c; n];
        let mut diag = vec![1.0 + 2.0 * c; n];
        let upper = vec![-c; n];
        let mut vals = rhs.values().to_vec();
        thomas_solve(&lower, &mut diag, &upper, &mut vals);
        Ok(Field::from_values(r.grid(), vals)?)
    }
}

/// Exact fraction of the step `y + t * delta` at which the first component
/// crosses a slope boundary (capped at 1; 1 when no boundary is crossed or
/// none are known). Crossings within fp-noise of the start are ignored.
fn kink_limited_fraction(y: &[f64], delta: &[f64], boundaries: &[f64]) -> f64 {
    if boundaries.is_empty() {
        return 1.0;
    }
    let mut t_min = 1.0f64;
    for (&yi, &di) in y.iter().zip(delta) {
        if di == 0.0 {
            continue;
        }
        let target = yi + di;
        for &b in boundaries {
            let between = (yi < b && b < target) || (target < b && b < yi);
            if between {
                let t = (b - yi) / di;
                if t > 1e-12 && t < t_min {
                    t_min = t;
                }
            }
        }
    }
    t_min
}

/// The slope segment `[lo, hi]` containing `v`; when `v` sits on a boundary
/// (to machine tolerance) the segment on the `side` the caller points to.
fn enclosing_segment(boundaries: &[f64], v: f64, side: f64) -> (f64, f64) {
    if boundaries.is_empty() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let tol = 1e-12 * (1.0 + v.abs());
    // nudge off a boundary towards the requested side before locating
    let probe = if boundaries.iter().any(|&b| (v - b).abs() <= tol) {
        v + side * 2.0 * tol
    } else {
        v
    };
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &b in boundaries {
        if b <= probe && b > lo {
            lo = b;
        }
        if b > probe && b < hi {
            hi = b;
        }
    }
    (lo, hi)
}

/// In-place tridiagonal solve (Thomas algorithm); `diag` and `rhs` are
/// overwritten. `lower[i]` multiplies `x[i-1]`, `upper[i]` multiplies
/// `x[i+1]`.
pub fn thomas_solve(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if n > 0 {
        rhs[n - 1] /= diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
        }
    }
}

/// Convenience single step from a bare config.
pub fn step(cfg: &SolverConfig, x: &Field, t: f64, dw: &WienerIncrement) -> Result<Field, SolverError> {
    Stepper::new(cfg)?.step(x, t, dw)
}

/// Running per-path statistics (accumulated every step, so suprema are not
/// snapshot-biased).
#[derive(Clone, Copy, Debug, Default)]
pub struct PathStats {
    pub sup_l2_sq: f64,
    pub int_h10_sq: f64,
    pub int_phi_eps: f64,
}

#[derive(Clone, Debug)]
pub struct PathEnsemble {
    cfg: SolverConfig,
    x0: Field,
    times: Vec<f64>,
    path_stats: Vec<PathStats>,
    /// `||X_t||^2_{L^2}` per snapshot time, per (unflagged) path.
    l2_sq_series: Vec<Vec<f64>>,
    snapshots: Vec<Vec<Field>>,
    flagged: Vec<(usize, String)>,
}

/// A Monte-Carlo mean with its batch-means standard error.
#[derive(Clone, Copy, Debug)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se(per_path: &[f64]) -> MeanSe {
    let n = per_path.len();
    if n == 0 {
        return MeanSe { mean: 0.0, se: 0.0 };
    }
    let mean = per_path.iter().sum::<f64>() / n as f64;
    let batches = BATCHES.min(n);
    let batch_size = n.div_ceil(batches);
    let mut batch_means = Vec::new();
    for chunk in per_path.chunks(batch_size) {
        batch_means.push(chunk.iter().sum::<f64>() / chunk.len() as f64);
    }
    let bn = batch_means.len();
    if bn < 2 {
        return MeanSe { mean, se: 0.0 };
    }
    let bmean = batch_means.iter().sum::<f64>() / bn as f64;
    let var = batch_means
        .iter()
        .map(|b| (b - bmean).powi(2))
        .sum::<f64>()
        / (bn - 1) as f64;
    MeanSe {
        mean,
        se: (var / bn as f64).sqrt(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyStats {
    pub sup_l2_sq: MeanSe,
    pub eps_int_h10_sq: MeanSe,
    pub int_phi_eps: MeanSe,
}

impl EnergyStats {
    /// The combined uniformity statistic `E sup ||X||^2 + eps E int ||X||^2_{H^1_0}`.
    pub fn combined(&self) -> f64 {
        self.sup_l2_sq.mean + self.eps_int_h10_sq.mean
    }
}

impl PathEnsemble {
    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn initial(&self) -> &Field {
        &self.x0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn path_stats(&self) -> &[PathStats] {
        &self.path_stats
    }

    /// Raw snapshots for the first `snapshot_paths` paths.
    pub fn snapshots(&self) -> &[Vec<Field>] {
        &self.snapshots
    }

    /// `E ||X_t||^2_{L^2}` with standard errors on the snapshot grid.
    pub fn l2_sq_time_series(&self) -> Vec<MeanSe> {
        (0..self.times.len())
            .map(|s| {
                let col: Vec<f64> = self.l2_sq_series.iter().map(|p| p[s]).collect();
                mean_se(&col)
            })
            .collect()
    }

    pub fn flagged(&self) -> &[(usize, String)] {
        &self.flagged
    }

    pub fn energy_stats(&self) -> EnergyStats {
        let sup: Vec<f64> = self.path_stats.iter().map(|s| s.sup_l2_sq).collect();
        let h10: Vec<f64> = self
            .path_stats
            .iter()
            .map(|s| self.cfg.eps * s.int_h10_sq)
            .collect();
        let phi: Vec<f64> = self.path_stats.iter().map(|s| s.int_phi_eps).collect();
        EnergyStats {
            sup_l2_sq: mean_se(&sup),
            eps_int_h10_sq: mean_se(&h10),
            int_phi_eps: mean_se(&phi),
        }
    }
}

struct PathOutcome {
    stats: PathStats,
    l2_sq_series: Vec<f64>,
    snapshots: Option<Vec<Field>>,
    error: Option<String>,
}

fn run_one_path(
    stepper: &Stepper,
    x0: &Field,
    path: usize,
    keep_snapshots: bool,
    snapshot_steps: &[usize],
) -> PathOutcome {
    let cfg = stepper.config();
    let steps = cfg.steps();
    let mut rng = cfg.noise.path_rng(path);
    let mut x = x0.clone();
    let mut stats = PathStats {
        sup_l2_sq: x.l2_norm().powi(2),
        ..PathStats::default()
    };
    let mut l2_sq_series = vec![x.l2_norm().powi(2)];
    let mut snaps = if keep_snapshots {
        Some(vec![x.clone()])
    } else {
        None
    };
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        // left-endpoint accumulation of the time integrals
        stats.int_h10_sq += cfg.dt * x.h10_norm().powi(2);
        match stepper.phi_eps_energy(&x) {
            Ok(e) => stats.int_phi_eps += cfg.dt * e,
            Err(e) => {
                return PathOutcome {
                    stats,
                    l2_sq_series,
                    snapshots: snaps,
                    error: Some(e.to_string()),
                }
            }
        }
        let dw = cfg.noise.sample_increment(cfg.dt, &mut rng);
        match stepper.step(&x, t, &dw) {
            Ok(next) => x = next,
            Err(e) => {
                return PathOutcome {
                    stats,
                    l2_sq_series,
                    snapshots: snaps,
                    error: Some(e.to_string()),
                }
            }
        }
        stats.sup_l2_sq = stats.sup_l2_sq.max(x.l2_norm().powi(2));
        if snapshot_steps.contains(&(k + 1)) {
            l2_sq_series.push(x.l2_norm().powi(2));
            if let Some(s) = snaps.as_mut() {
                s.push(x.clone());
            }
        }
    }
    PathOutcome {
        stats,
        l2_sq_series,
        snapshots: snaps,
        error: None,
    }
}

/// Run the configured number of independent paths from `x0`. Deterministic
/// given the noise seed; failed paths are flagged and excluded from the
/// snapshots but keep their partial statistics.
pub fn simulate(cfg: &SolverConfig, x0: &Field) -> Result<PathEnsemble, SolverError> {
    let stepper = Stepper::new(cfg)?;
    if x0.grid() != &cfg.grid {
        return Err(SolverError::Grid(GridError::GridMismatch));
    }
    let snapshot_steps = cfg.snapshot_steps();
    let outcomes: Vec<PathOutcome> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            run_one_path(
                &stepper,
                x0,
                p,
                p < cfg.snapshot_paths,
                &snapshot_steps,
            )
        })
        .collect();
    let mut path_stats = Vec::with_capacity(cfg.paths);
    let mut l2_sq_series = Vec::new();
    let mut snapshots = Vec::new();
    let mut flagged = Vec::new();
    for (p, o) in outcomes.into_iter().enumerate() {
        path_stats.push(o.stats);
        if let Some(e) = o.error {
            flagged.push((p, e));
            continue;
        }
        l2_sq_series.push(o.l2_sq_series);
        if let Some(s) = o.snapshots {
            snapshots.push(s);
        }
    }
    Ok(PathEnsemble {
        cfg: cfg.clone(),
        x0: x0.clone(),
        times: cfg.snapshot_times(),
        path_stats,
        l2_sq_series,
        snapshots,
        flagged,
    })
}

/// Two systems driven by identical Wiener increments path by path.
#[derive(Clone, Debug)]
pub struct PairedEnsemble {
    pub times: Vec<f64>,
    /// `E ||X_t - Y_t||^2_{H^-1}` on the snapshot grid.
    pub mean_diff_sq: Vec<f64>,
    pub se_diff_sq: Vec<f64>,
    /// `E sup_t e^{-Kt} ||X_t - Y_t||^2_{H^-1}`, supremum over every step.
    pub weighted_sup: MeanSe,
    pub init_diff_sq: f64,
    pub eps_a: f64,
    pub eps_b: f64,
    pub decay_k: f64,
    pub flagged: Vec<(usize, String)>,
}

/// Drive two configurations with shared noise. Grids, time grids, noise
/// models and seeds must agree; the regularization parameters may differ.
pub fn coupled_simulate(
    cfg_a: &SolverConfig,
    cfg_b: &SolverConfig,
    x0_a: &Field,
    x0_b: &Field,
) -> Result<PairedEnsemble, SolverError> {
    if cfg_a.grid != cfg_b.grid {
        return Err(SolverError::ConfigMismatch("grids differ".into()));
    }
    if cfg_a.dt != cfg_b.dt || cfg_a.t_end != cfg_b.t_end {
        return Err(SolverError::ConfigMismatch("time grids differ".into()));
    }
    if cfg_a.noise != cfg_b.noise {
        return Err(SolverError::ConfigMismatch(
            "noise models or seeds differ".into(),
        ));
    }
    if cfg_a.paths != cfg_b.paths {
        return Err(SolverError::ConfigMismatch("path counts differ".into()));
    }
    let stepper_a = Stepper::new(cfg_a)?;
    let stepper_b = Stepper::new(cfg_b)?;
    let lap = DirichletLaplacian::new(&cfg_a.grid);
    let k_rate = cfg_a.decay_rate();
    let steps = cfg_a.steps();
    let snapshot_steps = cfg_a.snapshot_steps();

    struct PairOutcome {
        diff_sq_at_snapshots: Vec<f64>,
        weighted_sup: f64,
        error: Option<String>,
    }

    let outcomes: Vec<PairOutcome> = (0..cfg_a.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = cfg_a.noise.path_rng(p);
            let mut xa = x0_a.clone();
            let mut xb = x0_b.clone();
            let mut diff_snapshots = Vec::with_capacity(snapshot_steps.len());
            let init_diff = lap.hminus1_norm_sq(&xa.sub(&xb)).unwrap_or(f64::NAN);
            let mut weighted_sup = init_diff;
            diff_snapshots.push(init_diff);
            for k in 0..steps {
                let t = k as f64 * cfg_a.dt;
                let dw = cfg_a.noise.sample_increment(cfg_a.dt, &mut rng);
                let next_a = match stepper_a.step(&xa, t, &dw) {
                    Ok(v) => v,
                    Err(e) => {
                        return PairOutcome {
                            diff_sq_at_snapshots: diff_snapshots,
                            weighted_sup,
                            error: Some(e.to_string()),
                        }
                    }
                };
                let next_b = match stepper_b.step(&xb, t, &dw) {
                    Ok(v) => v,
                    Err(e) => {
                        return PairOutcome {
                            diff_sq_at_snapshots: diff_snapshots,
                            weighted_sup,
                            error: Some(e.to_string()),
                        }
                    }
                };
                xa = next_a;
                xb = next_b;
                let d = lap.hminus1_norm_sq(&xa.sub(&xb)).unwrap_or(f64::NAN);
                let t_next = (k + 1) as f64 * cfg_a.dt;
                weighted_sup = weighted_sup.max((-k_rate * t_next).exp() * d);
                if snapshot_steps.contains(&(k + 1)) {
                    diff_snapshots.push(d);
                }
            }
            PairOutcome {
                diff_sq_at_snapshots: diff_snapshots,
                weighted_sup,
                error: None,
            }
        })
        .collect();

    let n_times = snapshot_steps.len();
    let mut per_time: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg_a.paths); n_times];
    let mut sups = Vec::with_capacity(cfg_a.paths);
    let mut flagged = Vec::new();
    for (p, o) in outcomes.into_iter().enumerate() {
        if let Some(e) = o.error {
            flagged.push((p, e));
            continue;
        }
        for (s, &v) in o.diff_sq_at_snapshots.iter().enumerate() {
            per_time[s].push(v);
        }
        sups.push(o.weighted_sup);
    }
    let stats: Vec<MeanSe> = per_time.iter().map(|v| mean_se(v)).collect();
    Ok(PairedEnsemble {
        times: cfg_a.snapshot_times(),
        mean_diff_sq: stats.iter().map(|m| m.mean).collect(),
        se_diff_sq: stats.iter().map(|m| m.se).collect(),
        weighted_sup: mean_se(&sups),
        init_diff_sq: lap.hminus1_norm_sq(&x0_a.sub(x0_b))?,
        eps_a: cfg_a.eps,
        eps_b: cfg_b.eps,
        decay_k: k_rate,
        flagged,
    })
}
