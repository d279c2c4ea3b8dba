//! Reference implementations for cross-checking the implicit solver: a
//! forward-Euler integrator built on its own dense Neumann Laplacian, a
//! pivoted Gaussian elimination and a cyclic Jacobi eigenvalue routine.
//!
//! Everything here favours transparency over speed and is meant for grids of
//! at most 33×33 vertices.

use harvestdiff_core::coeff::{CoefficientError, CoefficientSet};
use harvestdiff_core::grid::{Grid, ScalarField};
use harvestdiff_core::stepper::{ModelParams, State};
use thiserror::Error;

pub type DenseMatrix = Vec<Vec<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dt = {dt} exceeds the explicit stability bound {limit}")]
    StabilityBound { dt: f64, limit: f64 },
    #[error("matrix is singular at column {column}")]
    Singular { column: usize },
    #[error("matrix must be square with a matching right-hand side")]
    Shape,
    #[error("Jacobi sweeps did not reach the off-diagonal target after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
}

/// Dense `n²×n²` Neumann Laplacian with mirrored ghost points, written
/// directly from the stencil. Vertex `(i, j)` is row `i + j·n`.
pub fn neumann_laplacian_dense(n: usize) -> DenseMatrix {
    let h = 1.0 / (n as f64 - 1.0);
    let inv_h2 = 1.0 / (h * h);
    let dim = n * n;
    let mut a = vec![vec![0.0; dim]; dim];
    let mirror = |k: isize| -> usize {
        if k < 0 {
            1
        } else if k as usize >= n {
            n - 2
        } else {
            k as usize
        }
    };
    for j in 0..n {
        for i in 0..n {
            let row = i + j * n;
            a[row][row] -= 4.0 * inv_h2;
            for (di, dj) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let ii = mirror(i as isize + di);
                let jj = mirror(j as isize + dj);
                a[row][ii + jj * n] += inv_h2;
            }
        }
    }
    a
}

/// `y = A x`.
pub fn mat_vec(a: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Trapezoid weights relative to `h²` (1 inside, ½ on edges, ¼ at corners).
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let edge = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
    (0..n * n).map(|p| edge(p % n) * edge(p / n)).collect()
}

/// `W^{1/2} (d·L + diag(q)) W^{-1/2}`: symmetric, and with the same spectrum
/// as the operator whose principal eigenvalue the analysis module computes.
pub fn symmetrized_operator(n: usize, d: f64, q: &[f64]) -> DenseMatrix {
    let mut a = neumann_laplacian_dense(n);
    let w = trapezoid_weights(n);
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= d * (w[i] / w[j]).sqrt();
        }
        row[i] += q[i];
    }
    a
}

/// Largest admissible explicit step `h²/(4·max(d₁, d₂))`.
pub fn explicit_dt_limit(grid: Grid, params: &ModelParams) -> f64 {
    let h = grid.spacing();
    h * h / (4.0 * params.d1.max(params.d2))
}

/// Forward-Euler integrator for the harvested system with coefficients
/// frozen at the start of each step.
#[derive(Debug, Clone)]
pub struct ExplicitEuler {
    laplacian: DenseMatrix,
    coeffs: CoefficientSet,
    params: ModelParams,
    grid: Grid,
}

impl ExplicitEuler {
    pub fn new(grid: Grid, coeffs: CoefficientSet, params: ModelParams) -> Self {
        Self {
            laplacian: neumann_laplacian_dense(grid.n()),
            coeffs,
            params,
            grid,
        }
    }

    pub fn step(&self, state: &State, dt: f64) -> Result<State, OracleError> {
        let limit = explicit_dt_limit(self.grid, &self.params);
        if !(dt > 0.0 && dt <= limit) {
            return Err(OracleError::StabilityBound { dt, limit });
        }
        let k = self.coeffs.sample_capacity(self.grid, state.t)?;
        let r = self.coeffs.sample_growth(self.grid, state.t)?;
        let (u, v) = (state.u.values(), state.v.values());
        let lu = mat_vec(&self.laplacian, u);
        let lv = mat_vec(&self.laplacian, v);
        let p = &self.params;
        let mut un = vec![0.0; u.len()];
        let mut vn = vec![0.0; v.len()];
        for i in 0..u.len() {
            let (ri, ki) = (r.values()[i], k.values()[i]);
            let crowd = 1.0 - (u[i] + v[i]) / ki;
            un[i] = u[i] + dt * (p.d1 * lu[i] + ri * u[i] * crowd - p.mu * ri * u[i]);
            vn[i] = v[i] + dt * (p.d2 * lv[i] + ri * v[i] * crowd - p.nu * ri * v[i]);
        }
        let field = |vals| ScalarField::from_values(self.grid, vals).expect("explicit update stays finite");
        Ok(State::new(field(un), field(vn), state.t + dt))
    }

    /// Takes `round(t_end/dt)` steps from `state`.
    pub fn run(&self, state: State, dt: f64, t_end: f64) -> Result<State, OracleError> {
        let steps = (t_end / dt).round() as usize;
        let t0 = state.t;
        let mut s = state;
        for k in 1..=steps {
            s = self.step(&s, dt)?;
            s.t = t0 + k as f64 * dt;
        }
        Ok(s)
    }
}

/// One forward-Euler step of the harvested system.
pub fn explicit_step(
    state: &State,
    coeffs: &CoefficientSet,
    params: &ModelParams,
    dt: f64,
) -> Result<State, OracleError> {
    ExplicitEuler::new(state.grid(), coeffs.clone(), *params).step(state, dt)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(OracleError::Shape);
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut m: DenseMatrix = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(OracleError::Singular { column: col });
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Ok(x)
}

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

fn off_norm(a: &DenseMatrix) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                s += v * v;
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Sweeps stop once the off-diagonal Frobenius norm is at most
/// `1e-12` times the Frobenius norm of the input (absolute `1e-12` for
/// matrices of norm below one).
pub fn dense_eigs(a: &DenseMatrix) -> Result<Vec<f64>, OracleError> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(OracleError::Shape);
    }
    let frobenius = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let target = JACOBI_OFF_TOL * frobenius.max(1.0);
    let mut m = a.clone();
    for sweep in 0..=JACOBI_MAX_SWEEPS {
        if off_norm(&m) <= target {
            let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
            eig.sort_by(f64::total_cmp);
            return Ok(eig);
        }
        if sweep == JACOBI_MAX_SWEEPS {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(OracleError::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> DenseMatrix {
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    }

    #[test]
    fn identity_solve_and_spectrum() {
        let b = vec![3.0, -1.0, 0.5, 2.0];
        assert_eq!(dense_solve(&identity(4), &b).unwrap(), b);
        assert_eq!(dense_eigs(&identity(4)).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn diagonal_spectrum() {
        let mut a = identity(6);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = (6 - i) as f64;
        }
        assert_eq!(dense_eigs(&a).unwrap(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn two_by_two_rotation() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let e = dense_eigs(&a).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(dense_solve(&a, &[1.0, 1.0]), Err(OracleError::Singular { column: 1 })));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(dense_solve(&a, &[2.0, 5.0]).unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let l = neumann_laplacian_dense(5);
        for row in &l {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
        // corner vertex: two mirrored neighbours, each counted twice
        assert_eq!(l[0][1], 2.0 * 16.0);
        assert_eq!(l[0][5], 2.0 * 16.0);
    }
}
