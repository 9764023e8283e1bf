//! The non-standard finite-difference system on a quasi-uniform grid.
//!
//! Unknowns are stored node-major, `w = (U_0, V_0, R_0, U_1, V_1, R_1, …,
//! U_N, V_N, R_N)`, with one copy of the free boundary per node. Rows are
//!
//! ```text
//! 0          U_0 - β(R_0)
//! 1          V_0 - γ(R_0)
//! 3n+2       U_{n+1} - U_n - a f(x_{n+1/2}, ū, v̄)      n = 0 … N-1
//! 3n+3       V_{n+1} - V_n - a g(x_{n+1/2}, ū, v̄)
//! 3n+4       R_{n+1} - R_n
//! 3N+2       U_N - u_∞
//! ```
//!
//! with `ū = b U_{n+1} + c_w U_n` (likewise `v̄`). Only quarter nodes enter,
//! so nothing is ever evaluated at `x_N = ∞`. With this ordering the Jacobian
//! is a band matrix with three sub- and two super-diagonals.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::QuasiUniformGrid;
use crate::par::{for_each_chunk, Execution};
use crate::problem::{FreeBoundaryProblem, Partials};

/// Sub-diagonals of the Jacobian.
pub const JAC_KL: usize = 3;
/// Super-diagonals of the Jacobian.
pub const JAC_KU: usize = 2;

/// Nodal values `(U_n, V_n, R_n)`, `n = 0 … N`, packed node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    w: Vec<f64>,
}

impl DiscreteSolution {
    /// Every component of every node set to `value`.
    pub fn constant(intervals: usize, value: f64) -> Self {
        DiscreteSolution {
            w: vec![value; 3 * (intervals + 1)],
        }
    }

    pub fn from_packed(w: Vec<f64>) -> Result<Self> {
        if w.len() < 9 || !w.len().is_multiple_of(3) {
            return Err(Error::Parameter(format!(
                "packed solution length {} is not 3(N+1) with N >= 2",
                w.len()
            )));
        }
        Ok(DiscreteSolution { w })
    }

    /// Samples `(u, v)` from `sample` at every node and sets `R` everywhere.
    pub fn from_fn(
        grid: &QuasiUniformGrid,
        r: f64,
        mut sample: impl FnMut(f64) -> Result<(f64, f64)>,
    ) -> Result<Self> {
        let mut s = Self::constant(grid.intervals(), r);
        for (n, &x) in grid.nodes().iter().enumerate() {
            let (u, v) = sample(x)?;
            s.set_node(n, u, v, r);
        }
        Ok(s)
    }

    pub fn packed(&self) -> &[f64] {
        &self.w
    }

    pub(crate) fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn into_packed(self) -> Vec<f64> {
        self.w
    }

    /// Number of nodes `N + 1`.
    pub fn len(&self) -> usize {
        self.w.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.len() - 1
    }

    #[inline]
    pub fn node(&self, n: usize) -> (f64, f64, f64) {
        (self.w[3 * n], self.w[3 * n + 1], self.w[3 * n + 2])
    }

    pub fn set_node(&mut self, n: usize, u: f64, v: f64, r: f64) {
        self.w[3 * n] = u;
        self.w[3 * n + 1] = v;
        self.w[3 * n + 2] = r;
    }

    pub fn u(&self) -> Vec<f64> {
        self.w.iter().step_by(3).copied().collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.w.iter().skip(1).step_by(3).copied().collect()
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.w.iter().skip(2).step_by(3).copied().collect()
    }

    /// The free boundary as carried by the first node.
    pub fn free_boundary(&self) -> f64 {
        self.w[2]
    }

    /// `max R_n - min R_n`.
    pub fn r_spread(&self) -> f64 {
        let r = self.r_values();
        let (lo, hi) = r
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }
}

/// Residual of the full system, length `3(N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual(Vec<f64>);

impl Residual {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The three boundary rows `[U_0 - β, V_0 - γ, U_N - u_∞]`.
    pub fn boundary_rows(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[self.0.len() - 1]]
    }

    /// The `3N` interval rows.
    pub fn scheme_rows(&self) -> &[f64] {
        &self.0[2..self.0.len() - 1]
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn scheme_norm_inf(&self) -> f64 {
        norm_inf(self.scheme_rows())
    }
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Stencil value at `x_{n+1/2}`: `c_w w_n + b w_{n+1}`.
pub fn midpoint_value(grid: &QuasiUniformGrid, n: usize, w_n: f64, w_n1: f64) -> Result<f64> {
    let c = grid.coefficients(n)?;
    Ok(c.c_w * w_n + c.b * w_n1)
}

/// Stencil derivative at `x_{n+1/2}`: `(w_{n+1} - w_n) / (2 (x_{n+3/4} - x_{n+1/4}))`.
pub fn midpoint_derivative(grid: &QuasiUniformGrid, n: usize, w_n: f64, w_n1: f64) -> Result<f64> {
    let c = grid.coefficients(n)?;
    Ok((w_n1 - w_n) / c.a)
}

fn check_len(grid: &QuasiUniformGrid, w: &[f64]) -> Result<()> {
    if w.len() != 3 * grid.len() {
        return Err(Error::Parameter(format!(
            "trial has {} unknowns, grid with N = {} needs {}",
            w.len(),
            grid.intervals(),
            3 * grid.len()
        )));
    }
    Ok(())
}

/// Residual of `trial` on `grid`.
pub fn residual<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    grid: &QuasiUniformGrid,
    trial: &DiscreteSolution,
) -> Result<Residual> {
    residual_with(Execution::default(), problem, grid, trial)
}

pub fn residual_with<P: FreeBoundaryProblem + ?Sized>(
    exec: Execution,
    problem: &P,
    grid: &QuasiUniformGrid,
    trial: &DiscreteSolution,
) -> Result<Residual> {
    check_len(grid, trial.packed())?;
    let mut out = vec![0.0; trial.packed().len()];
    assemble_residual(exec, problem, grid, trial.packed(), &mut out);
    if let Some(row) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row });
    }
    Ok(Residual(out))
}

/// Writes the residual of the packed iterate `w` into `out`. Non-finite
/// entries are left in place for the caller to inspect.
pub(crate) fn assemble_residual<P: FreeBoundaryProblem + ?Sized>(
    exec: Execution,
    problem: &P,
    grid: &QuasiUniformGrid,
    w: &[f64],
    out: &mut [f64],
) {
    let len = w.len();
    debug_assert_eq!(len, out.len());
    let r0 = w[2];
    out[0] = w[0] - problem.left_u(r0);
    out[1] = w[1] - problem.left_v(r0);
    out[len - 1] = w[len - 3] - problem.right_u();

    let body = &mut out[2..len - 1];
    for_each_chunk(exec, body, 3, |n, rows| {
        let c = grid.coeff(n);
        let x = grid.midpoint(n);
        debug_assert!(x.is_finite());
        let (u0, v0, r0) = (w[3 * n], w[3 * n + 1], w[3 * n + 2]);
        let (u1, v1, r1) = (w[3 * n + 3], w[3 * n + 4], w[3 * n + 5]);
        let um = c.b * u1 + c.c_w * u0;
        let vm = c.b * v1 + c.c_w * v0;
        rows[0] = u1 - u0 - c.a * problem.f(x, um, vm);
        rows[1] = v1 - v0 - c.a * problem.g(x, um, vm);
        rows[2] = r1 - r0;
    });
}

fn fd_step(w: f64) -> f64 {
    f64::EPSILON.sqrt() * w.abs().max(1.0)
}

fn rhs_partials<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    x: f64,
    u: f64,
    v: f64,
) -> (Partials, Partials) {
    let fp = problem.f_partials(x, u, v);
    let gp = problem.g_partials(x, u, v);
    if let (Some(fp), Some(gp)) = (fp, gp) {
        return (fp, gp);
    }
    let f0 = problem.f(x, u, v);
    let g0 = problem.g(x, u, v);
    let hu = fd_step(u);
    let hv = fd_step(v);
    let fp = fp.unwrap_or_else(|| Partials {
        du: (problem.f(x, u + hu, v) - f0) / hu,
        dv: (problem.f(x, u, v + hv) - f0) / hv,
    });
    let gp = gp.unwrap_or_else(|| Partials {
        du: (problem.g(x, u + hu, v) - g0) / hu,
        dv: (problem.g(x, u, v + hv) - g0) / hv,
    });
    (fp, gp)
}

/// Jacobian of the residual, from the problem's analytic partials where
/// available and forward differences otherwise.
pub fn jacobian<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    grid: &QuasiUniformGrid,
    trial: &DiscreteSolution,
) -> Result<BandMatrix> {
    jacobian_with(Execution::default(), problem, grid, trial)
}

pub fn jacobian_with<P: FreeBoundaryProblem + ?Sized>(
    exec: Execution,
    problem: &P,
    grid: &QuasiUniformGrid,
    trial: &DiscreteSolution,
) -> Result<BandMatrix> {
    check_len(grid, trial.packed())?;
    let jac = assemble_jacobian(exec, problem, grid, trial.packed());
    if let Some(row) = (0..jac.dim()).find(|&i| {
        (i.saturating_sub(JAC_KL)..(i + JAC_KU + 1).min(jac.dim()))
            .any(|j| !jac.get(i, j).is_finite())
    }) {
        return Err(Error::NonFinite { row });
    }
    Ok(jac)
}

pub(crate) fn assemble_jacobian<P: FreeBoundaryProblem + ?Sized>(
    exec: Execution,
    problem: &P,
    grid: &QuasiUniformGrid,
    w: &[f64],
) -> BandMatrix {
    let dim = w.len();
    let mut jac = BandMatrix::zeros(dim, JAC_KL, JAC_KU);
    let r0 = w[2];
    let (dbeta, dgamma) = problem.left_partials(r0).unwrap_or_else(|| {
        let h = fd_step(r0);
        (
            (problem.left_u(r0 + h) - problem.left_u(r0)) / h,
            (problem.left_v(r0 + h) - problem.left_v(r0)) / h,
        )
    });
    jac.set(0, 0, 1.0);
    jac.set(0, 2, -dbeta);
    jac.set(1, 1, 1.0);
    jac.set(1, 2, -dgamma);
    jac.set(dim - 1, dim - 3, 1.0);

    let (data, width) = jac.rows_mut();
    let body = &mut data[2 * width..(dim - 1) * width];
    // Band slot of column j in row i is j + KL - i. Interval n owns rows
    // 3n+2 ..= 3n+4 and touches columns 3n ..= 3n+5.
    for_each_chunk(exec, body, 3 * width, |n, rows| {
        let c = grid.coeff(n);
        let x = grid.midpoint(n);
        let (u0, v0) = (w[3 * n], w[3 * n + 1]);
        let (u1, v1) = (w[3 * n + 3], w[3 * n + 4]);
        let um = c.b * u1 + c.c_w * u0;
        let vm = c.b * v1 + c.c_w * v0;
        let (fp, gp) = rhs_partials(problem, x, um, vm);
        let col0 = 3 * n;
        for (k, row) in rows.chunks_mut(width).enumerate() {
            let i = 3 * n + 2 + k;
            let mut put = |j: usize, v: f64| row[j + JAC_KL - i] = v;
            match k {
                0 => {
                    put(col0, -1.0 - c.a * c.c_w * fp.du);
                    put(col0 + 1, -c.a * c.c_w * fp.dv);
                    put(col0 + 3, 1.0 - c.a * c.b * fp.du);
                    put(col0 + 4, -c.a * c.b * fp.dv);
                }
                1 => {
                    put(col0, -c.a * c.c_w * gp.du);
                    put(col0 + 1, -1.0 - c.a * c.c_w * gp.dv);
                    put(col0 + 3, -c.a * c.b * gp.du);
                    put(col0 + 4, 1.0 - c.a * c.b * gp.dv);
                }
                _ => {
                    put(col0 + 2, -1.0);
                    put(col0 + 5, 1.0);
                }
            }
        }
    });
    jac
}

/// Column-by-column forward-difference Jacobian of the full residual, with
/// step `√ε · max(1, |w_j|)`. Independent of the problem's analytic partials.
pub fn jacobian_fd<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    grid: &QuasiUniformGrid,
    trial: &DiscreteSolution,
) -> Result<BandMatrix> {
    let base = residual_with(Execution::Sequential, problem, grid, trial)?;
    let dim = base.len();
    let mut jac = BandMatrix::zeros(dim, JAC_KL, JAC_KU);
    let mut w = trial.packed().to_vec();
    let mut out = vec![0.0; dim];
    for j in 0..dim {
        let saved = w[j];
        let h = fd_step(saved);
        w[j] = saved + h;
        let h = w[j] - saved;
        assemble_residual(Execution::Sequential, problem, grid, &w, &mut out);
        w[j] = saved;
        for i in j.saturating_sub(JAC_KU)..(j + JAC_KL + 1).min(dim) {
            jac.set(i, j, (out[i] - base.as_slice()[i]) / h);
        }
    }
    Ok(jac)
}
