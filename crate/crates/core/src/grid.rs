//! Uniform vertex-centered grid on the unit square, grid-sampled scalar
//! fields, the homogeneous-Neumann five-point Laplacian and trapezoidal
//! quadrature.
//!
//! Boundary vertices use ghost-point reflection: the missing neighbour of a
//! boundary vertex takes the value of its interior mirror image. The resulting
//! operator is not symmetric as a plain matrix, but it is self-adjoint in the
//! inner product weighted by the trapezoidal quadrature weights, which is what
//! the conjugate-gradient solver and the eigenvalue iteration rely on.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 points per side, got {0}")]
    TooFewPoints(usize),
    #[error("field has {got} values but the grid holds {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field value at vertex {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

/// Uniform grid with `n` vertices per side on `[0,1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 3 {
            return Err(GridError::TooFewPoints(n));
        }
        Ok(Self { n })
    }

    /// Points per side.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of vertices.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Always false; a valid grid holds at least 9 vertices.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    /// Flat index of vertex `(i, j)`, x-index fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    /// Physical coordinates of vertex `(i, j)`.
    #[inline]
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    /// Vertex closest to the point `(x, y)`.
    pub fn nearest_vertex(&self, x: f64, y: f64) -> (usize, usize) {
        let last = (self.n - 1) as f64;
        let snap = |s: f64| (s.clamp(0.0, 1.0) * last).round() as usize;
        (snap(x), snap(y))
    }

    /// Trapezoidal quadrature weights for this grid.
    pub fn quadrature(&self) -> QuadratureWeights {
        QuadratureWeights::new(*self)
    }

    /// Relative quadrature weight of vertex `(i, j)`: 1 in the interior,
    /// 1/2 on edges, 1/4 at corners. Multiply by `h²` for the area weight.
    #[inline]
    pub fn relative_weight(&self, i: usize, j: usize) -> f64 {
        let last = self.n - 1;
        let wx = if i == 0 || i == last { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == last { 0.5 } else { 1.0 };
        wx * wy
    }
}

/// Per-vertex trapezoidal weights; they sum to the area of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    weights: Vec<f64>,
}

impl QuadratureWeights {
    pub fn new(grid: Grid) -> Self {
        let h2 = grid.spacing() * grid.spacing();
        let n = grid.n();
        let mut weights = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                weights.push(grid.relative_weight(i, j) * h2);
            }
        }
        Self { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted inner product `Σ w_k a_k b_k`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.weights.len());
        debug_assert_eq!(b.len(), self.weights.len());
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Weighted sum `Σ w_k a_k`.
    pub fn sum(&self, a: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.weights.len());
        self.weights.iter().zip(a).map(|(w, x)| w * x).sum()
    }
}

/// Grid-sampled scalar function, row-major with the x-index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Wraps raw values, rejecting a wrong length or non-finite entries.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every vertex.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..n {
            for i in 0..n {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Vertex `(i, j)` holding the largest value (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        let n = self.grid.n();
        (best % n, best / n)
    }

    /// Sup norm.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm of the difference of two fields.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }

    pub fn energy(&self) -> f64 {
        energy(self)
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }
}

impl fmt::Display for ScalarField {
    /// Rows of comma-separated values, row `j` holding `y = j·h`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.grid.n();
        for row in self.values.chunks(n) {
            let mut first = true;
            for v in row {
                if !first {
                    f.write_str(",")?;
                }
                first = false;
                write!(f, "{v}")?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Applies the Neumann Laplacian to raw values laid out on `grid`.
pub(crate) fn apply_laplacian(grid: Grid, input: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let last = n - 1;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mirror = |k: usize, dir: isize| -> usize {
        // neighbour index along one axis with ghost reflection
        match (k, dir) {
            (0, -1) => 1,
            (k, 1) if k == last => last - 1,
            (k, d) => (k as isize + d) as usize,
        }
    };
    for j in 0..n {
        let jm = mirror(j, -1);
        let jp = mirror(j, 1);
        for i in 0..n {
            let im = mirror(i, -1);
            let ip = mirror(i, 1);
            let c = input[i + j * n];
            let sum = input[im + j * n] + input[ip + j * n] + input[i + jm * n] + input[i + jp * n];
            out[i + j * n] = (sum - 4.0 * c) * inv_h2;
        }
    }
}

/// Five-point Laplacian with homogeneous Neumann conditions imposed by
/// ghost-point reflection.
pub fn laplacian_neumann(f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid);
    apply_laplacian(f.grid, &f.values, &mut out.values);
    out
}

/// Trapezoidal quadrature over the unit square.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid;
    let n = g.n();
    let h2 = g.spacing() * g.spacing();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += g.relative_weight(i, j) * f.values[i + j * n];
        }
    }
    acc * h2
}

/// `½∫ f²`.
pub fn energy(f: &ScalarField) -> f64 {
    0.5 * integrate(&f.map(|v| v * v))
}

/// `∫ f`.
pub fn total_mass(f: &ScalarField) -> f64 {
    integrate(f)
}

/// Gradient by centered differences in the interior and second-order
/// one-sided differences on the boundary. Returns `(∂x f, ∂y f)`.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let g = f.grid;
    let n = g.n();
    let h = g.spacing();
    let last = n - 1;
    let deriv = |a: &dyn Fn(usize) -> f64, k: usize| -> f64 {
        if k == 0 {
            (-3.0 * a(0) + 4.0 * a(1) - a(2)) / (2.0 * h)
        } else if k == last {
            (3.0 * a(last) - 4.0 * a(last - 1) + a(last - 2)) / (2.0 * h)
        } else {
            (a(k + 1) - a(k - 1)) / (2.0 * h)
        }
    };
    let mut gx = ScalarField::zeros(g);
    let mut gy = ScalarField::zeros(g);
    for j in 0..n {
        for i in 0..n {
            gx.values[i + j * n] = deriv(&|k| f.values[k + j * n], i);
            gy.values[i + j * n] = deriv(&|k| f.values[i + k * n], j);
        }
    }
    (gx, gy)
}

/// `∫|∇f|²` with the gradient from [`gradient`].
pub fn dirichlet_energy(f: &ScalarField) -> f64 {
    let (gx, gy) = gradient(f);
    integrate(&gx.zip_map(&gy, |a, b| a * a + b * b))
}
