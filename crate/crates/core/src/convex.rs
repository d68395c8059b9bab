//! Convex potentials and their calculus: multivalued subdifferentials,
//! resolvents, Yosida approximations, Moreau envelopes, convex conjugates and
//! recession functions.
//!
//! A [`Potential`] is a convex, symmetric, lower-semicontinuous function
//! `psi: R -> [0, inf)` with `psi(0) = 0`, represented piecewise by
//! polynomials over finitely many breakpoints on the nonnegative half-axis
//! (the negative half follows by symmetry). The piecewise representation
//! keeps the subdifferential exact at kinks: one-sided derivatives of the
//! adjacent polynomial pieces bound the subgradient interval, so no numeric
//! differentiation is involved.
//!
//! Two canonical potentials drive most of the crate:
//!
//! * `psi1(x) = max(|x| - 1, 0)`, whose subdifferential is the multivalued
//!   sign-type graph vanishing on `(-1, 1)` — the sublinear, self-organized
//!   criticality case;
//! * `psi2(x) = (x^2 - 1)/2` beyond the unit interval and `0` inside — the
//!   superlinear counterpart.

use std::fmt;

use serde::{Deserialize, Serialize};

const RECESSION_PROBE_T1: f64 = 1e6;
const RECESSION_PROBE_T2: f64 = 1e7;
const CONJUGATE_GRID_MAX: f64 = 1e6;
const CONJUGATE_INF_THRESHOLD: f64 = 1e12;
const RESOLVENT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum ConvexError {
    /// A root bracket failed to shrink; signals a malformed custom potential.
    ConvergenceFailure { what: &'static str, at: f64 },
    /// Operation requires the other growth class.
    GrowthClass { expected: GrowthClass, got: GrowthClass },
    /// A custom potential violates the structural requirements.
    InvalidPotential(String),
}

impl fmt::Display for ConvexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexError::ConvergenceFailure { what, at } => {
                write!(f, "{} failed to converge at x = {}", what, at)
            }
            ConvexError::GrowthClass { expected, got } => {
                write!(f, "operation needs a {:?} potential, got {:?}", expected, got)
            }
            ConvexError::InvalidPotential(msg) => write!(f, "invalid potential: {}", msg),
        }
    }
}

impl std::error::Error for ConvexError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Sublinear,
    Superlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Psi1,
    Psi2,
    Quadratic,
    Custom,
}

/// Closed subgradient interval `[lower, upper]`; degenerates to a point
/// wherever the potential is differentiable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubdiffInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SubdiffInterval {
    pub fn point(v: f64) -> Self {
        SubdiffInterval { lower: v, upper: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lower - tol && v <= self.upper + tol
    }

    /// Smallest absolute value in the interval (the minimal section).
    pub fn min_abs(&self) -> f64 {
        if self.lower <= 0.0 && self.upper >= 0.0 {
            0.0
        } else {
            self.lower.abs().min(self.upper.abs())
        }
    }
}

/// One polynomial piece, coefficients in increasing degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Piece {
    pub coeffs: Vec<f64>,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * c;
        }
        acc
    }

    fn second_deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * x + (k * (k - 1)) as f64 * c;
        }
        acc
    }

    fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }
}

/// Serializable description of a potential; the on-disk format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub growth_class: GrowthClass,
    /// Ordered nonnegative abscissae, starting at 0; piece `i` is valid on
    /// `[breakpoints[i], breakpoints[i+1])`, the last piece up to infinity.
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
    /// Witness `y > 0` with `psi(y) > 0`, required in the sublinear case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_y: Option<f64>,
    /// Declared constant for the subgradient growth bound
    /// `inf{|eta|^2 : eta in phi(r)} <= C (1 + r^2)`.
    pub growth_constant: f64,
    /// Declared integrability exponent for superlinear potentials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_m: Option<f64>,
}

/// A convex, symmetric potential with `psi(0) = 0`.
#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    growth_class: GrowthClass,
    witness_y: Option<f64>,
    growth_constant: f64,
    exponent_m: Option<f64>,
    recession_at_one: f64,
}

impl Potential {
    /// `psi1(x) = max(|x| - 1, 0)`; subdifferential vanishes on `(-1, 1)`.
    pub fn psi1() -> Potential {
        Potential::from_spec(PotentialSpec {
            kind: PotentialKind::Psi1,
            growth_class: GrowthClass::Sublinear,
            breakpoints: vec![0.0, 1.0],
            pieces: vec![
                Piece { coeffs: vec![0.0] },
                Piece {
                    coeffs: vec![-1.0, 1.0],
                },
            ],
            witness_y: Some(2.0),
            growth_constant: 1.0,
            exponent_m: None,
        })
        .expect("builtin psi1 is valid")
    }

    /// `psi2(x) = (x^2 - 1)/2` for `|x| >= 1`, zero inside.
    pub fn psi2() -> Potential {
        Potential::from_spec(PotentialSpec {
            kind: PotentialKind::Psi2,
            growth_class: GrowthClass::Superlinear,
            breakpoints: vec![0.0, 1.0],
            pieces: vec![
                Piece { coeffs: vec![0.0] },
                Piece {
                    coeffs: vec![-0.5, 0.0, 0.5],
                },
            ],
            witness_y: None,
            growth_constant: 1.0,
            exponent_m: Some(1.0),
        })
        .expect("builtin psi2 is valid")
    }

    /// `psi(x) = x^2 / 2`.
    pub fn quadratic() -> Potential {
        Potential::from_spec(PotentialSpec {
            kind: PotentialKind::Quadratic,
            growth_class: GrowthClass::Superlinear,
            breakpoints: vec![0.0],
            pieces: vec![Piece {
                coeffs: vec![0.0, 0.0, 0.5],
            }],
            witness_y: None,
            growth_constant: 1.0,
            exponent_m: Some(1.0),
        })
        .expect("builtin quadratic is valid")
    }

    /// Validate and build a potential from its piecewise description.
    pub fn from_spec(spec: PotentialSpec) -> Result<Potential, ConvexError> {
        let err = |m: &str| Err(ConvexError::InvalidPotential(m.to_string()));
        if spec.breakpoints.is_empty() || spec.breakpoints[0] != 0.0 {
            return err("breakpoints must start at 0");
        }
        if spec.pieces.len() != spec.breakpoints.len() {
            return err("need exactly one piece per breakpoint");
        }
        if spec
            .breakpoints
            .windows(2)
            .any(|w| !(w[0] < w[1]) || !w[1].is_finite())
        {
            return err("breakpoints must be strictly increasing and finite");
        }
        let mut p = Potential {
            kind: spec.kind,
            breakpoints: spec.breakpoints,
            pieces: spec.pieces,
            growth_class: spec.growth_class,
            witness_y: spec.witness_y,
            growth_constant: spec.growth_constant,
            exponent_m: spec.exponent_m,
            recession_at_one: f64::INFINITY,
        };
        // psi(0) = 0
        if p.pieces[0].eval(0.0).abs() > 1e-14 {
            return err("psi(0) must be 0");
        }
        // continuity across breakpoints
        for i in 1..p.breakpoints.len() {
            let b = p.breakpoints[i];
            let left = p.pieces[i - 1].eval(b);
            let right = p.pieces[i].eval(b);
            if (left - right).abs() > 1e-10 * (1.0 + left.abs()) {
                return err("pieces must be continuous at breakpoints");
            }
        }
        // symmetry forces slope >= 0 at 0 from the right; convexity needs
        // nondecreasing derivative within pieces and across kinks
        let probes_per_piece = 64;
        let mut prev_slope = 0.0f64;
        for i in 0..p.pieces.len() {
            let lo = p.breakpoints[i];
            let hi = if i + 1 < p.breakpoints.len() {
                p.breakpoints[i + 1]
            } else {
                lo + (lo.abs() + 1.0) * 10.0
            };
            let piece = &p.pieces[i];
            if piece.deriv(lo) < prev_slope - 1e-10 {
                return err("derivative must be nondecreasing across kinks");
            }
            for k in 0..=probes_per_piece {
                let x = lo + (hi - lo) * k as f64 / probes_per_piece as f64;
                if piece.second_deriv(x) < -1e-10 {
                    return err("pieces must be convex");
                }
                if piece.eval(x) < -1e-12 {
                    return err("psi must be nonnegative");
                }
            }
            prev_slope = piece.deriv(hi);
        }
        if p.pieces[0].deriv(0.0) < -1e-12 {
            return err("psi must be minimized at 0 (slope at 0 nonnegative)");
        }
        // growth class consistency on a large-t probe grid
        let q1 = p.eval_raw(RECESSION_PROBE_T1) / RECESSION_PROBE_T1;
        let q2 = p.eval_raw(RECESSION_PROBE_T2) / RECESSION_PROBE_T2;
        let superlinear_probe = q2 > q1 * (1.0 + 1e-3) || !q2.is_finite();
        match p.growth_class {
            GrowthClass::Superlinear => {
                if !superlinear_probe {
                    return err("declared superlinear but psi(t)/t does not grow");
                }
                if p.exponent_m.is_none_or(|m| !(m > 0.0 && m <= 1.0)) {
                    return err("superlinear potentials must declare an exponent m in (0, 1]");
                }
            }
            GrowthClass::Sublinear => {
                if superlinear_probe {
                    return err("declared sublinear but psi(t)/t keeps growing");
                }
                match p.witness_y {
                    Some(y) if y > 0.0 && p.eval_raw(y) > 0.0 => {}
                    _ => return err("sublinear potentials need a witness y > 0 with psi(y) > 0"),
                }
            }
        }
        // declared subgradient growth bound, sampled
        for k in 0..200 {
            let r = -10.0 + 20.0 * k as f64 / 199.0;
            let min_abs = p.subdifferential_raw(r).min_abs();
            if min_abs * min_abs > p.growth_constant * (1.0 + r * r) * (1.0 + 1e-9) {
                return err("declared growth constant violated by the subdifferential");
            }
        }
        // Asymptotic slope through both probes; exact once the last piece is
        // affine, which every sublinear piecewise polynomial eventually is.
        p.recession_at_one = if superlinear_probe {
            f64::INFINITY
        } else {
            p.recession(1.0)
        };
        Ok(p)
    }

    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            kind: self.kind,
            growth_class: self.growth_class,
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.clone(),
            witness_y: self.witness_y,
            growth_constant: self.growth_constant,
            exponent_m: self.exponent_m,
        }
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn growth_class(&self) -> GrowthClass {
        self.growth_class
    }

    pub fn witness_y(&self) -> Option<f64> {
        self.witness_y
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn exponent_m(&self) -> Option<f64> {
        self.exponent_m
    }

    fn piece_index(&self, x: f64) -> usize {
        // breakpoints sorted ascending, first is 0
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    fn eval_raw(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.pieces[self.piece_index(ax)].eval(ax)
    }

    /// Evaluate `psi(x)`. Total, symmetric, nonnegative.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_raw(x)
    }

    fn subdifferential_raw(&self, x: f64) -> SubdiffInterval {
        let ax = x.abs();
        let i = self.piece_index(ax);
        let on_kink = self
            .breakpoints
            .iter()
            .position(|&b| (b - ax).abs() < 1e-14);
        let iv = if let Some(k) = on_kink {
            let right = self.pieces[k].deriv(ax);
            let left = if k > 0 {
                self.pieces[k - 1].deriv(ax)
            } else {
                // kink at the origin: symmetry mirrors the right slope
                -right
            };
            SubdiffInterval {
                lower: left,
                upper: right,
            }
        } else {
            SubdiffInterval::point(self.pieces[i].deriv(ax))
        };
        if x < 0.0 {
            SubdiffInterval {
                lower: -iv.upper,
                upper: -iv.lower,
            }
        } else {
            iv
        }
    }

    /// The maximal monotone graph `phi(x) = [phi^-(x), phi^+(x)]`, exact at
    /// kinks via one-sided derivatives of the polynomial pieces.
    pub fn subdifferential(&self, x: f64) -> SubdiffInterval {
        self.subdifferential_raw(x)
    }

    /// Convex conjugate `psi*(x) = sup_y (x y - psi(y))`, possibly infinite.
    ///
    /// The supremum of the concave map `y -> x y - psi(y)` is taken on a
    /// geometric grid up to `|y| = 1e6` and sharpened by golden-section
    /// search; divergence is reported as infinity when the grid maximum sits
    /// at the boundary with positive slope or exceeds `1e12`.
    pub fn conjugate(&self, x: f64) -> f64 {
        let ax = x.abs(); // psi even => psi* even, sup attained at y >= 0
        let obj = |y: f64| ax * y - self.eval_raw(y);
        let mut grid = vec![0.0f64];
        let mut y = 1e-8;
        while y <= CONJUGATE_GRID_MAX {
            grid.push(y);
            y *= 1.3;
        }
        grid.push(CONJUGATE_GRID_MAX);
        let (mut best_i, mut best_v) = (0usize, 0.0f64);
        for (i, &g) in grid.iter().enumerate() {
            let v = obj(g);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        if best_v > CONJUGATE_INF_THRESHOLD {
            return f64::INFINITY;
        }
        if best_i + 1 == grid.len() {
            // maximum at the far end of the grid: diverging supremum unless
            // the objective has flattened out
            let end = grid[best_i];
            let slope = (obj(end) - obj(end * 0.999)) / (end * 0.001);
            if slope > 1e-9 * (1.0 + ax) {
                return f64::INFINITY;
            }
        }
        // golden-section refinement; the objective is concave in y
        let lo = if best_i > 0 { grid[best_i - 1] } else { 0.0 };
        let hi = if best_i + 1 < grid.len() {
            grid[best_i + 1]
        } else {
            grid[best_i]
        };
        let refined = golden_max(obj, lo, hi, 1e-13 * (1.0 + hi));
        refined.max(best_v).max(0.0)
    }

    /// Recession function `psi_inf(x) = lim_{t -> inf} psi(t x)/t`, evaluated
    /// through the monotone difference quotient at two large probe points.
    /// Divergence of the quotients is reported as infinity; otherwise the
    /// asymptotic slope through the probes is returned (exact whenever the
    /// potential is eventually affine).
    pub fn recession(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let ax = x.abs();
        let v1 = self.eval_raw(RECESSION_PROBE_T1 * ax);
        let v2 = self.eval_raw(RECESSION_PROBE_T2 * ax);
        let q1 = v1 / RECESSION_PROBE_T1;
        let q2 = v2 / RECESSION_PROBE_T2;
        if !q2.is_finite() || q2 > q1 * (1.0 + 1e-3) {
            f64::INFINITY
        } else {
            (v2 - v1) / (RECESSION_PROBE_T2 - RECESSION_PROBE_T1)
        }
    }

    /// Cached `psi_inf(1)`; prices the singular part of a measure.
    pub fn recession_at_one(&self) -> f64 {
        self.recession_at_one
    }

    /// Conjugate of the recession function: the indicator of
    /// `[-psi_inf(1), psi_inf(1)]`. Only defined for sublinear potentials.
    pub fn recession_conjugate(&self, x: f64) -> Result<f64, ConvexError> {
        if self.growth_class != GrowthClass::Sublinear {
            return Err(ConvexError::GrowthClass {
                expected: GrowthClass::Sublinear,
                got: self.growth_class,
            });
        }
        let r = self.recession_at_one;
        Ok(if x.abs() <= r * (1.0 + 1e-12) + 1e-300 {
            0.0
        } else {
            f64::INFINITY
        })
    }

    /// True when every piece's subdifferential is affine (degree <= 2), which
    /// admits an exact piecewise resolvent.
    fn is_piecewise_quadratic(&self) -> bool {
        self.pieces.iter().all(|p| p.degree() <= 2)
    }
}

/// Golden-section maximization of a concave function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INVPHI * (hi - lo);
    let mut d = lo + INVPHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INVPHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INVPHI * (hi - lo);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// A potential together with a Yosida/Moreau regularization parameter.
///
/// For potentials with affine subdifferential pieces the resolvent
/// `(I + eps phi)^-1` is precomputed exactly as a piecewise-affine map;
/// otherwise each evaluation falls back to monotone bisection.
#[derive(Clone, Debug)]
pub struct RegularizedPotential {
    base: Potential,
    epsilon: f64,
    // segments (x_start, x_end, slope, intercept) of the resolvent on x >= 0
    resolvent_segments: Option<Vec<ResolventSegment>>,
}

#[derive(Clone, Copy, Debug)]
struct ResolventSegment {
    x_lo: f64,
    x_hi: f64,
    // y = a + b * x on this segment
    a: f64,
    b: f64,
}

impl RegularizedPotential {
    pub fn new(base: Potential, epsilon: f64) -> Result<Self, ConvexError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ConvexError::InvalidPotential(format!(
                "epsilon must be positive, got {}",
                epsilon
            )));
        }
        let segments = if base.is_piecewise_quadratic() {
            Some(build_resolvent_segments(&base, epsilon))
        } else {
            None
        };
        Ok(RegularizedPotential {
            base,
            epsilon,
            resolvent_segments: segments,
        })
    }

    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Resolvent `(I + eps phi)^-1 x`: the unique `y` with
    /// `y + eps phi(y)` containing `x`. Nondecreasing and 1-Lipschitz.
    pub fn resolvent(&self, x: f64) -> Result<f64, ConvexError> {
        let ax = x.abs();
        let y = if let Some(segments) = &self.resolvent_segments {
            let mut out = None;
            for s in segments {
                if ax <= s.x_hi {
                    out = Some(s.a + s.b * ax);
                    break;
                }
            }
            match out {
                Some(v) => v,
                // beyond the last breakpoint image: extend the final segment
                None => {
                    let s = segments.last().expect("segments nonempty");
                    s.a + s.b * ax
                }
            }
        } else {
            self.resolvent_bisect(ax)?
        };
        Ok(if x < 0.0 { -y } else { y })
    }

    fn resolvent_bisect(&self, x: f64) -> Result<f64, ConvexError> {
        debug_assert!(x >= 0.0);
        // resolvent of x >= 0 lies in [0, x]
        let (mut lo, mut hi) = (0.0f64, x);
        for _ in 0..300 {
            if hi - lo <= RESOLVENT_TOL {
                return Ok(0.5 * (lo + hi));
            }
            let mid = 0.5 * (lo + hi);
            let phi = self.base.subdifferential_raw(mid);
            let lower_image = mid + self.epsilon * phi.lower;
            let upper_image = mid + self.epsilon * phi.upper;
            if x < lower_image {
                hi = mid;
            } else if x > upper_image {
                lo = mid;
            } else {
                return Ok(mid);
            }
        }
        Err(ConvexError::ConvergenceFailure {
            what: "resolvent bisection",
            at: x,
        })
    }

    /// Yosida approximation `phi^eps(x) = (x - resolvent(x)) / eps`;
    /// monotone, Lipschitz with constant at most `1/eps`, and a selection of
    /// `phi` at the resolvent point.
    pub fn yosida(&self, x: f64) -> Result<f64, ConvexError> {
        Ok((x - self.resolvent(x)?) / self.epsilon)
    }

    /// Moreau envelope `psi^eps(x) = min_y psi(y) + (x - y)^2 / (2 eps)`,
    /// evaluated through the resolvent as the minimizer.
    pub fn moreau(&self, x: f64) -> Result<f64, ConvexError> {
        let y = self.resolvent(x)?;
        let d = x - y;
        Ok(self.base.eval(y) + d * d / (2.0 * self.epsilon))
    }

    /// Positive abscissae where the Yosida map changes slope (the negative
    /// ones follow by symmetry). Empty for non-quadratic custom pieces.
    pub fn slope_breakpoints(&self) -> Vec<f64> {
        match &self.resolvent_segments {
            Some(segments) => segments
                .iter()
                .map(|s| s.x_lo)
                .filter(|&x| x > 0.0 && x.is_finite())
                .collect(),
            None => Vec::new(),
        }
    }

    /// The flux map `theta(y) = eps y + phi^eps(y)`: strictly increasing,
    /// odd, with slopes in `[eps, eps + 1/eps]`.
    pub fn theta(&self, y: f64) -> Result<f64, ConvexError> {
        Ok(self.epsilon * y + self.yosida(y)?)
    }

    /// Inverse of the flux map; piecewise exact when the subdifferential is
    /// piecewise affine, scalar bisection otherwise.
    pub fn theta_inv(&self, w: f64) -> Result<f64, ConvexError> {
        if let Some(segments) = &self.resolvent_segments {
            // on each segment theta(x) = -a/eps + (eps + (1-b)/eps) x with
            // the resolvent coefficients (a, b); images tile [0, inf)
            let aw = w.abs();
            let mut y = f64::NAN;
            for s in segments {
                let w_hi = if s.x_hi.is_finite() {
                    self.theta_on_segment(s, s.x_hi)
                } else {
                    f64::INFINITY
                };
                if aw <= w_hi {
                    let slope = self.epsilon + (1.0 - s.b) / self.epsilon;
                    y = ((aw + s.a / self.epsilon) / slope).clamp(s.x_lo, s.x_hi);
                    break;
                }
            }
            if y.is_nan() {
                let s = segments.last().expect("segments nonempty");
                let slope = self.epsilon + (1.0 - s.b) / self.epsilon;
                y = ((aw + s.a / self.epsilon) / slope).max(s.x_lo);
            }
            Ok(if w < 0.0 { -y } else { y })
        } else {
            // monotone bisection on 0 <= y <= |w|/eps
            let aw = w.abs();
            let (mut lo, mut hi) = (0.0f64, aw / self.epsilon + 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if self.theta(mid)? > aw {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-14 * (1.0 + aw) {
                    break;
                }
            }
            let y = 0.5 * (lo + hi);
            Ok(if w < 0.0 { -y } else { y })
        }
    }

    fn theta_on_segment(&self, s: &ResolventSegment, x: f64) -> f64 {
        // yosida(x) = (x - (a + b x))/eps on the segment
        self.epsilon * x + (x - (s.a + s.b * x)) / self.epsilon
    }

    /// Slope of `theta^-1` just off `w` on the side of `side`'s sign.
    pub fn theta_inv_slope(&self, w: f64, side: f64) -> f64 {
        let probe = w + side.signum() * 1e-12 * (1.0 + w.abs());
        let y = match self.theta_inv(probe) {
            Ok(y) => y,
            Err(_) => return 1.0 / self.epsilon,
        };
        let theta_slope = self.epsilon + self.yosida_slope(y);
        1.0 / theta_slope
    }

    /// Positive abscissae (in the flux variable) where `theta^-1` changes
    /// slope: the images of the state-space slope breakpoints.
    pub fn theta_breakpoints(&self) -> Vec<f64> {
        self.slope_breakpoints()
            .into_iter()
            .filter_map(|x| self.theta(x).ok())
            .collect()
    }

    /// Pointwise derivative of the Yosida map where it is differentiable
    /// (the generalized derivative at kinks); used by the implicit solver.
    pub fn yosida_slope(&self, x: f64) -> f64 {
        if let Some(segments) = &self.resolvent_segments {
            let ax = x.abs();
            for s in segments {
                if ax <= s.x_hi {
                    return (1.0 - s.b) / self.epsilon;
                }
            }
            let s = segments.last().expect("segments nonempty");
            (1.0 - s.b) / self.epsilon
        } else {
            // central difference fallback for non-quadratic custom pieces
            let h = 1e-6 * (1.0 + x.abs());
            let a = self.yosida(x + h).unwrap_or(0.0);
            let b = self.yosida(x - h).unwrap_or(0.0);
            ((a - b) / (2.0 * h)).max(0.0)
        }
    }
}

/// Exact resolvent for potentials whose subdifferential is piecewise affine:
/// each smooth piece maps to an affine segment of `x = y + eps phi(y)`, each
/// kink to a flat segment spanning the subgradient jump.
fn build_resolvent_segments(p: &Potential, eps: f64) -> Vec<ResolventSegment> {
    let mut segments = Vec::new();
    let n = p.breakpoints.len();
    for i in 0..n {
        let y_lo = p.breakpoints[i];
        // kink segment at y_lo (including the origin where symmetry can jump)
        let iv = p.subdifferential_raw(y_lo);
        let x_lo = y_lo + eps * iv.lower.max(0.0);
        let x_hi = y_lo + eps * iv.upper;
        if x_hi > x_lo + 1e-300 {
            segments.push(ResolventSegment {
                x_lo,
                x_hi,
                a: y_lo,
                b: 0.0,
            });
        }
        // smooth segment on [y_lo, y_hi): phi(y) = c + d*y with d >= 0
        let piece = &p.pieces[i];
        let c = piece.deriv(0.0);
        let d = if piece.coeffs.len() > 2 {
            2.0 * piece.coeffs[2]
        } else {
            0.0
        };
        let y_hi = if i + 1 < n {
            p.breakpoints[i + 1]
        } else {
            f64::INFINITY
        };
        // x(y) = y + eps (c + d y) = eps c + (1 + eps d) y
        let slope = 1.0 + eps * d;
        let seg_x_lo = y_lo + eps * piece.deriv(y_lo);
        let seg_x_hi = if y_hi.is_finite() {
            y_hi + eps * piece.deriv(y_hi)
        } else {
            f64::INFINITY
        };
        segments.push(ResolventSegment {
            x_lo: seg_x_lo,
            x_hi: seg_x_hi,
            a: -eps * c / slope,
            b: 1.0 / slope,
        });
    }
    segments.sort_by(|s, t| s.x_lo.partial_cmp(&t.x_lo).unwrap());
    segments
}
