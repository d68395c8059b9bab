//! Uniform grids with homogeneous Dirichlet boundary, the discrete Laplacian
//! and its inverse, and the L2 / H1_0 / H^-1 norms and pairings used by the
//! rest of the crate.
//!
//! Fields live on the `n - 1` interior nodes of an `n`-cell grid; the boundary
//! values are implicitly zero. `-Delta` is the standard second-difference
//! stencil scaled by `spacing^-2`; its inverse (a cached tridiagonal
//! factorization) realizes the Riesz isomorphism behind the H^-1 inner
//! product.

use std::fmt;

#[derive(Clone, Debug)]
pub enum GridError {
    TooFewCells { cells: usize },
    BadInterval { a: f64, b: f64 },
    GridMismatch,
    ModeOutOfRange { k: usize, max: usize },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::TooFewCells { cells } => {
                write!(f, "grid needs at least 4 cells, got {}", cells)
            }
            GridError::BadInterval { a, b } => write!(f, "invalid interval ({}, {})", a, b),
            GridError::GridMismatch => write!(f, "fields live on different grids"),
            GridError::ModeOutOfRange { k, max } => {
                write!(f, "sine mode {} out of range 1..={}", k, max)
            }
        }
    }
}

impl std::error::Error for GridError {}

/// Uniform grid on an open interval `(a, b)` with homogeneous Dirichlet
/// boundary. Interior nodes are `x_i = a + i*spacing`, `i = 1..cells-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    cells: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self, GridError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(GridError::BadInterval { a, b });
        }
        if cells < 4 {
            return Err(GridError::TooFewCells { cells });
        }
        Ok(Grid { a, b, cells })
    }

    /// Unit interval (0, 1).
    pub fn unit(cells: usize) -> Result<Self, GridError> {
        Grid::new(0.0, 1.0, cells)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }

    /// Number of interior nodes (= length of a `Field` value vector).
    pub fn interior_len(&self) -> usize {
        self.cells - 1
    }

    /// Interior node `x_i`, `i = 0..interior_len()` maps to `a + (i+1)*h`.
    pub fn node(&self, i: usize) -> f64 {
        self.a + (i + 1) as f64 * self.spacing()
    }

    /// Cell midpoint `m_i = a + (i + 1/2) h`, `i = 0..cells`.
    pub fn midpoint(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.spacing()
    }

    /// Discrete eigenvalue of `-Delta` for the k-th sine mode.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let h = self.spacing();
        let theta = k as f64 * std::f64::consts::PI / self.cells as f64;
        2.0 / (h * h) * (1.0 - theta.cos())
    }
}

/// A grid function with zero Dirichlet boundary, stored on interior nodes.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Field {
            grid: grid.clone(),
            values: vec![0.0; grid.interior_len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.interior_len() {
            return Err(GridError::GridMismatch);
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Sample a function at the interior nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.interior_len()).map(|i| f(grid.node(i))).collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation of the zero-extended field at an arbitrary point.
    pub fn interp(&self, x: f64) -> f64 {
        interp_lattice(&self.values, self.grid.node(0), self.grid.spacing(), x)
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Field, c: f64) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += c * w;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Quadrature of the field itself: `h * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// Quadrature of `f(u(x))` over the interval.
    pub fn integral_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid.spacing() * self.values.iter().map(|&v| f(v)).sum::<f64>()
    }

    pub fn l2_inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.grid.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).sqrt()
    }

    /// Forward-difference gradient norm with zero boundary values.
    pub fn h10_norm(&self) -> f64 {
        let h = self.grid.spacing();
        let mut sum = 0.0;
        let mut prev = 0.0;
        for &v in &self.values {
            let d = v - prev;
            sum += d * d;
            prev = v;
        }
        sum += prev * prev; // last node to the right boundary
        (sum / h).sqrt()
    }
}

/// Linear interpolation of zero-extended lattice samples with first sample at
/// `x0` and uniform spacing `h`.
pub fn interp_lattice(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let t = (x - x0) / h;
    if t <= -1.0 || t >= values.len() as f64 {
        return 0.0;
    }
    let i = t.floor();
    let frac = t - i;
    let i = i as isize;
    let left = if i >= 0 && (i as usize) < values.len() {
        values[i as usize]
    } else {
        0.0
    };
    let right = if i + 1 >= 0 && ((i + 1) as usize) < values.len() {
        values[(i + 1) as usize]
    } else {
        0.0
    };
    left * (1.0 - frac) + right * frac
}

/// Dirichlet Laplacian on a grid, with a cached tridiagonal factorization of
/// `-Delta` for the inverse.
#[derive(Clone, Debug)]
pub struct DirichletLaplacian {
    grid: Grid,
    // LDL^T-style forward-elimination pivots of the constant tridiagonal
    // matrix with diagonal 2/h^2 and off-diagonal -1/h^2.
    pivots: Vec<f64>,
}

impl DirichletLaplacian {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.interior_len();
        let h2 = grid.spacing() * grid.spacing();
        let diag = 2.0 / h2;
        let off = -1.0 / h2;
        let mut pivots = Vec::with_capacity(n);
        let mut prev = diag;
        pivots.push(prev);
        for _ in 1..n {
            prev = diag - off * off / prev;
            pivots.push(prev);
        }
        DirichletLaplacian {
            grid: grid.clone(),
            pivots,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Apply the second-difference stencil (the discrete `Delta`, negative
    /// semidefinite) with zero boundary.
    pub fn apply(&self, u: &Field) -> Result<Field, GridError> {
        if u.grid != self.grid {
            return Err(GridError::GridMismatch);
        }
        let h2 = self.grid.spacing() * self.grid.spacing();
        let v = &u.values;
        let n = v.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            out[i] = (left - 2.0 * v[i] + right) / h2;
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: out,
        })
    }

    /// Solve `-Delta u = f`; `apply(inv_apply(f)) == -f` to solver precision.
    pub fn inv_apply(&self, f: &Field) -> Result<Field, GridError> {
        if f.grid != self.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: self.solve_neg(&f.values),
        })
    }

    /// Solve the SPD system `(-Delta) x = rhs` via the cached factorization.
    pub fn solve_neg(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        debug_assert_eq!(n, self.pivots.len());
        let h2 = self.grid.spacing() * self.grid.spacing();
        let off = -1.0 / h2;
        let mut x = rhs.to_vec();
        // forward elimination
        for i in 1..n {
            let m = off / self.pivots[i - 1];
            x[i] -= m * x[i - 1];
        }
        // back substitution
        if n > 0 {
            x[n - 1] /= self.pivots[n - 1];
            for i in (0..n - 1).rev() {
                x[i] = (x[i] - off * x[i + 1]) / self.pivots[i];
            }
        }
        x
    }

    /// H^-1 inner product `spacing * sum_i u_i ((-Delta)^-1 v)_i`.
    pub fn hminus1_inner(&self, u: &Field, v: &Field) -> Result<f64, GridError> {
        if u.grid != self.grid || v.grid != self.grid {
            return Err(GridError::GridMismatch);
        }
        let sol = self.solve_neg(&v.values);
        Ok(self.grid.spacing()
            * u.values
                .iter()
                .zip(&sol)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    pub fn hminus1_norm_sq(&self, u: &Field) -> Result<f64, GridError> {
        self.hminus1_inner(u, u)
    }

    pub fn hminus1_norm(&self, u: &Field) -> Result<f64, GridError> {
        Ok(self.hminus1_norm_sq(u)?.max(0.0).sqrt())
    }

    /// k-th discrete sine mode normalized to unit H^-1 norm.
    pub fn sine_mode(&self, k: usize) -> Result<Field, GridError> {
        let n = self.grid.interior_len();
        if k == 0 || k > n {
            return Err(GridError::ModeOutOfRange { k, max: n });
        }
        let lambda = self.grid.laplacian_eigenvalue(k);
        // discrete L2 norm^2 of sin(k pi (x-a)/L) over interior nodes is L/2
        let scale = (2.0 * lambda / self.grid.length()).sqrt();
        let cells = self.grid.cells() as f64;
        let values = (1..self.grid.cells())
            .map(|i| scale * (k as f64 * std::f64::consts::PI * i as f64 / cells).sin())
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(0.0, 1.0, 3).is_err());
        assert!(Grid::new(1.0, 0.0, 16).is_err());
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let grid = Grid::unit(16).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let z = Field::zeros(&grid);
        assert!(lap.apply(&z).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_sine_matches_discrete_eigenvalue() {
        let grid = Grid::unit(1024).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let u = Field::from_fn(&grid, |x| (PI * x).sin());
        let lu = lap.apply(&u).unwrap();
        let lambda = grid.laplacian_eigenvalue(1);
        // discrete eigenvector relation is exact; continuum value -pi^2 sin
        // is matched to O(h^2)
        let mut max_err_discrete: f64 = 0.0;
        let mut max_err_cont: f64 = 0.0;
        for i in 0..u.len() {
            max_err_discrete = max_err_discrete.max((lu.values()[i] + lambda * u.values()[i]).abs());
            max_err_cont = max_err_cont.max((lu.values()[i] + PI * PI * u.values()[i]).abs());
        }
        assert!(max_err_discrete < 1e-9, "discrete: {}", max_err_discrete);
        assert!(max_err_cont < 1e-4, "continuum: {}", max_err_cont);
    }

    #[test]
    fn laplacian_of_hat_is_stencil_row() {
        let grid = Grid::unit(8).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let mut u = Field::zeros(&grid);
        u.values_mut()[3] = 1.0;
        let lu = lap.apply(&u).unwrap();
        let h2 = grid.spacing() * grid.spacing();
        assert_eq!(lu.values()[2], 1.0 / h2);
        assert_eq!(lu.values()[3], -2.0 / h2);
        assert_eq!(lu.values()[4], 1.0 / h2);
        assert_eq!(lu.values()[5], 0.0);
    }

    #[test]
    fn inverse_roundtrip() {
        let grid = Grid::unit(256).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let f = Field::from_fn(&grid, |x| (3.0 * PI * x).sin() + 0.3 * x * (1.0 - x));
        let u = lap.inv_apply(&f).unwrap();
        let back = lap.apply(&u).unwrap();
        for i in 0..f.len() {
            assert!((back.values()[i] + f.values()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn inv_laplacian_of_sine_scales_by_eigenvalue() {
        let grid = Grid::unit(512).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let f = Field::from_fn(&grid, |x| (PI * x).sin());
        let u = lap.inv_apply(&f).unwrap();
        for i in 0..f.len() {
            let expect = f.values()[i] / PI.powi(2);
            assert!((u.values()[i] - expect).abs() < 1e-4);
        }
    }

    #[test]
    fn hminus1_norm_of_first_sine_mode() {
        let grid = Grid::unit(1024).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let u = Field::from_fn(&grid, |x| (PI * x).sin());
        let nsq = lap.hminus1_norm_sq(&u).unwrap();
        assert!((nsq - 1.0 / (2.0 * PI * PI)).abs() < 1e-4);
        let u2 = Field::from_fn(&grid, |x| (2.0 * PI * x).sin());
        let nsq2 = lap.hminus1_norm_sq(&u2).unwrap();
        assert!((nsq2 - 1.0 / (8.0 * PI * PI)).abs() < 1e-4);
    }

    #[test]
    fn norms_of_first_sine_mode() {
        let grid = Grid::unit(1024).unwrap();
        let u = Field::from_fn(&grid, |x| (PI * x).sin());
        assert!((u.l2_norm().powi(2) - 0.5).abs() < 1e-6);
        assert!((u.h10_norm().powi(2) - PI * PI / 2.0).abs() < 1e-3);
        assert_eq!(Field::zeros(&grid).l2_norm(), 0.0);
        assert_eq!(Field::zeros(&grid).h10_norm(), 0.0);
    }

    #[test]
    fn sine_modes_are_hminus1_orthonormal() {
        let grid = Grid::unit(64).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let e1 = lap.sine_mode(1).unwrap();
        let e2 = lap.sine_mode(2).unwrap();
        assert!((lap.hminus1_inner(&e1, &e1).unwrap() - 1.0).abs() < 1e-10);
        assert!(lap.hminus1_inner(&e1, &e2).unwrap().abs() < 1e-10);
        assert!(lap.sine_mode(64).is_err());
        assert!(lap.sine_mode(0).is_err());
    }

    #[test]
    fn riesz_duality_and_poincare_chain() {
        let grid = Grid::unit(128).unwrap();
        let lap = DirichletLaplacian::new(&grid);
        let cp = 1.0 / grid.laplacian_eigenvalue(1).sqrt();
        let mut state = 88172645463325252u64;
        let mut rnd = move || {
            // xorshift, good enough for test data
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for _ in 0..1000 {
            let u = Field::from_values(&grid, (0..grid.interior_len()).map(|_| rnd()).collect())
                .unwrap();
            let v = Field::from_values(&grid, (0..grid.interior_len()).map(|_| rnd()).collect())
                .unwrap();
            // Riesz: <-Delta u, v>_{H^-1} = <u, v>_{L^2}
            let lu = lap.apply(&u).unwrap();
            let lhs = -lap.hminus1_inner(&lu, &v).unwrap();
            let rhs = u.l2_inner(&v);
            assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()));
            // norm chain
            assert!(u.l2_norm() <= cp * u.h10_norm() * (1.0 + 1e-12));
            assert!(lap.hminus1_norm(&u).unwrap() <= cp * u.l2_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn interp_zero_extension() {
        let grid = Grid::unit(8).unwrap();
        let u = Field::from_fn(&grid, |x| x);
        assert_eq!(u.interp(-0.5), 0.0);
        assert_eq!(u.interp(1.5), 0.0);
        let mid = 0.5 * (u.interp(grid.node(2)) + u.interp(grid.node(3)));
        assert!((u.interp(0.5 * (grid.node(2) + grid.node(3))) - mid).abs() < 1e-14);
    }
}
