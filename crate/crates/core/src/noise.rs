//! Truncated cylindrical Wiener increments and the diffusion operator `B`.
//!
//! The noise is expanded over the first `modes` H^-1-normalized sine modes
//! with declared square-summable weights. `B` is either additive or a
//! diagonal multiplicative operator with a bounded Lipschitz gain applied
//! pointwise. Streams are counter-based per path so concurrent paths never
//! share generator state and identical seeds reproduce identical paths.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::grid::{DirichletLaplacian, Field, GridError};

#[derive(Clone, Debug)]
pub enum NoiseError {
    Grid(GridError),
    BadConfig(String),
}

impl fmt::Display for NoiseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseError::Grid(e) => write!(f, "{}", e),
            NoiseError::BadConfig(msg) => write!(f, "{}", msg),
        }
    }
}

impl std::error::Error for NoiseError {}

impl From<GridError> for NoiseError {
    fn from(e: GridError) -> Self {
        NoiseError::Grid(e)
    }
}

/// Law for the mode weights `b_i`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightLaw {
    /// `b_i = scale / i` (square-summable).
    Inverse { scale: f64 },
    /// `b_i = scale * ratio^(i-1)`, `0 < ratio < 1`.
    Geometric { scale: f64, ratio: f64 },
}

impl WeightLaw {
    pub fn weight(&self, i: usize) -> f64 {
        match *self {
            WeightLaw::Inverse { scale } => scale / i as f64,
            WeightLaw::Geometric { scale, ratio } => scale * ratio.powi(i as i32 - 1),
        }
    }
}

/// How `B` couples the state to the noise.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Additive,
    /// Pointwise gain `sigma(x) = gain * min(|x|, clip)`: bounded, globally
    /// Lipschitz with constant `gain`, and `sigma(0) = 0` so the zero field
    /// is a fixed point.
    LipschitzDiagonal { gain: f64, clip: f64 },
}

impl Multiplier {
    pub fn sigma(&self, v: f64) -> f64 {
        match *self {
            Multiplier::Additive => 1.0,
            Multiplier::LipschitzDiagonal { gain, clip } => gain * v.abs().min(clip),
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match *self {
            Multiplier::Additive => 0.0,
            Multiplier::LipschitzDiagonal { gain, .. } => gain,
        }
    }
}

/// Declared constants the measured operator norms are checked against.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct DeclaredConstants {
    /// Squared Lipschitz bound of `v -> B(v)` in the H^-1-to-Hilbert-Schmidt
    /// metric.
    pub lipschitz_sq: f64,
    /// Squared linear-growth bound of `||B(v)||` into L2.
    pub growth_sq: f64,
    /// Squared Hilbert-Schmidt norm bound of `B(0)` into H^-1.
    pub at_zero_sq: f64,
}

impl Default for DeclaredConstants {
    fn default() -> Self {
        // Calibrated on the default 16-mode inverse-weight model over random
        // low-mode field pairs; regression bounds, not sharp constants.
        DeclaredConstants {
            lipschitz_sq: 40.0,
            growth_sq: 180.0,
            at_zero_sq: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NoiseModel {
    pub modes: usize,
    pub weight_law: WeightLaw,
    pub multiplier: Multiplier,
    pub seed: u64,
    #[serde(default)]
    pub declared: DeclaredConstants,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            modes: 16,
            weight_law: WeightLaw::Inverse { scale: 1.0 },
            multiplier: Multiplier::Additive,
            seed: 0,
            declared: DeclaredConstants::default(),
        }
    }
}

/// A single vector of independent `N(0, dt)` increments.
#[derive(Clone, Debug)]
pub struct WienerIncrement {
    pub dt: f64,
    pub gaussians: Vec<f64>,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if self.modes == 0 {
            return Err(NoiseError::BadConfig("noise needs at least one mode".into()));
        }
        match self.weight_law {
            WeightLaw::Inverse { scale } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(NoiseError::BadConfig("weight scale must be >= 0".into()));
                }
            }
            WeightLaw::Geometric { scale, ratio } => {
                if !(scale >= 0.0 && ratio > 0.0 && ratio < 1.0) {
                    return Err(NoiseError::BadConfig(
                        "geometric weights need scale >= 0 and ratio in (0,1)".into(),
                    ));
                }
            }
        }
        if let Multiplier::LipschitzDiagonal { gain, clip } = self.multiplier {
            if !(gain >= 0.0 && clip > 0.0) {
                return Err(NoiseError::BadConfig(
                    "diagonal multiplier needs gain >= 0 and clip > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weight_law.weight(i)
    }

    /// Per-path generator; streams keyed by `(seed, path)` so paths can run
    /// concurrently without shared state.
    pub fn path_rng(&self, path: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64 + 1);
        rng
    }

    /// Draw `modes` independent `N(0, dt)` coordinates from a path stream.
    pub fn sample_increment(&self, dt: f64, stream: &mut ChaCha8Rng) -> WienerIncrement {
        assert!(dt > 0.0, "time step must be positive");
        let sqrt_dt = dt.sqrt();
        let gaussians = (0..self.modes)
            .map(|_| sqrt_dt * stream.sample::<f64, _>(StandardNormal))
            .collect();
        WienerIncrement { dt, gaussians }
    }

    /// Apply `B(t, x) dw = sum_i b_i sigma(x) e_i dw_i` on the grid carried
    /// by the Laplacian (the modes are its H^-1-normalized eigenvectors).
    pub fn apply_b(
        &self,
        lap: &DirichletLaplacian,
        x: &Field,
        dw: &WienerIncrement,
    ) -> Result<Field, NoiseError> {
        if x.grid() != lap.grid() {
            return Err(NoiseError::Grid(GridError::GridMismatch));
        }
        let mut out = Field::zeros(lap.grid());
        for (i, &g) in dw.gaussians.iter().enumerate() {
            let b = self.weight(i + 1) * g;
            if b == 0.0 {
                continue;
            }
            let mode = lap.sine_mode(i + 1)?;
            out.add_assign_scaled(&mode, b);
        }
        if let Multiplier::LipschitzDiagonal { .. } = self.multiplier {
            let vals = out.values_mut();
            for (v, &xi) in vals.iter_mut().zip(x.values()) {
                *v *= self.multiplier.sigma(xi);
            }
        }
        Ok(out)
    }

    /// Squared Hilbert-Schmidt norm of `B(x)` measured in the given target
    /// norm (per-mode image norms squared, weighted).
    fn hs_norm_sq(
        &self,
        lap: &DirichletLaplacian,
        x: &Field,
        target: impl Fn(&Field) -> f64,
    ) -> Result<f64, NoiseError> {
        let mut acc = 0.0;
        for i in 1..=self.modes {
            let b = self.weight(i);
            let mode = lap.sine_mode(i)?;
            let image = match self.multiplier {
                Multiplier::Additive => mode,
                Multiplier::LipschitzDiagonal { .. } => {
                    let mut m = mode;
                    for (v, &xi) in m.values_mut().iter_mut().zip(x.values()) {
                        *v *= self.multiplier.sigma(xi);
                    }
                    m
                }
            };
            let n = target(&image);
            acc += b * b * n * n;
        }
        Ok(acc)
    }

    /// Measure the Lipschitz, growth and at-zero operator norms over sample
    /// fields and flag violations of the declared constants.
    pub fn check_conditions(
        &self,
        lap: &DirichletLaplacian,
        sample_fields: &[Field],
    ) -> Result<NoiseConditionsReport, NoiseError> {
        let hminus1 = |f: &Field| lap.hminus1_norm(f).unwrap_or(f64::NAN);
        let l2 = |f: &Field| f.l2_norm();

        let zero = Field::zeros(lap.grid());
        let at_zero_sq = self.hs_norm_sq(lap, &zero, hminus1)?;

        let mut lipschitz_sq_max = 0.0f64;
        let mut growth_sq_max = 0.0f64;
        for (k, v) in sample_fields.iter().enumerate() {
            let b_v = self.hs_norm_sq(lap, v, l2)?;
            let denom = 1.0 + v.l2_norm().powi(2);
            growth_sq_max = growth_sq_max.max(b_v / denom);
            if let Some(w) = sample_fields.get(k + 1) {
                // HS distance of B(v) and B(w) into H^-1
                let mut diff_sq = 0.0;
                for i in 1..=self.modes {
                    let b = self.weight(i);
                    let mode = lap.sine_mode(i)?;
                    let mut img = mode;
                    for (val, (&vi, &wi)) in img
                        .values_mut()
                        .iter_mut()
                        .zip(v.values().iter().zip(w.values()))
                    {
                        *val *= self.multiplier.sigma(vi) - self.multiplier.sigma(wi);
                    }
                    let n = hminus1(&img);
                    diff_sq += b * b * n * n;
                }
                let dist_sq = lap.hminus1_norm_sq(&v.sub(w)).unwrap_or(f64::NAN);
                if dist_sq > 1e-24 {
                    lipschitz_sq_max = lipschitz_sq_max.max(diff_sq / dist_sq);
                }
            }
        }

        let mut violations = Vec::new();
        if lipschitz_sq_max > self.declared.lipschitz_sq {
            violations.push(format!(
                "lipschitz quotient {} exceeds declared {}",
                lipschitz_sq_max, self.declared.lipschitz_sq
            ));
        }
        if growth_sq_max > self.declared.growth_sq {
            violations.push(format!(
                "growth quotient {} exceeds declared {}",
                growth_sq_max, self.declared.growth_sq
            ));
        }
        if at_zero_sq > self.declared.at_zero_sq {
            violations.push(format!(
                "at-zero norm {} exceeds declared {}",
                at_zero_sq, self.declared.at_zero_sq
            ));
        }
        Ok(NoiseConditionsReport {
            lipschitz_sq_max,
            growth_sq_max,
            at_zero_sq,
            declared: self.declared,
            violations,
        })
    }
}

/// Measured operator-norm quotients of the diffusion coefficient.
#[derive(Clone, Debug)]
pub struct NoiseConditionsReport {
    pub lipschitz_sq_max: f64,
    pub growth_sq_max: f64,
    pub at_zero_sq: f64,
    pub declared: DeclaredConstants,
    pub violations: Vec<String>,
}

impl NoiseConditionsReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}
