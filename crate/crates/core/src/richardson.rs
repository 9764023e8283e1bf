//! Richardson extrapolation over nested grids and the a posteriori error
//! estimators built from it.
//!
//! On grids `N_g = q N_{g-1}` the level-`k` values are combined as
//!
//! ```text
//! U_{g+1,k+1} = U_{g+1,k} + (U_{g+1,k} - U_{g,k}) / (q^{p_k} - 1),   p_k = p0 + k dp
//! ```
//!
//! For the free boundary of the benchmark problem the published ladder is
//! reproduced by `p0 = 2`, `dp = 1`, `q = 2`.

use crate::error::{param_err, Error, Result};
use crate::grid::QuasiUniformGrid;
use crate::par::{map_range, Execution};
use crate::problem::ExactSolution;
use crate::scheme::DiscreteSolution;

pub const DEFAULT_P0: f64 = 2.0;
pub const DEFAULT_DP: f64 = 1.0;

/// One extrapolation step from a coarse/fine pair at the same level.
pub fn extrapolate(coarse: f64, fine: f64, q: f64, order: f64) -> Result<f64> {
    if !(q > 1.0) || !(order > 0.0) {
        return param_err(format!(
            "extrapolation needs q > 1 and order > 0 (q = {q}, order = {order})"
        ));
    }
    let denom = q.powf(order) - 1.0;
    if denom == 0.0 {
        return param_err("q^order - 1 vanishes");
    }
    Ok(fine + (fine - coarse) / denom)
}

/// `p_k = p0 + k dp`
pub fn order_sequence(p0: f64, dp: f64, k: usize) -> f64 {
    p0 + k as f64 * dp
}

/// Triangular table `U_{g,k}`, `0 ≤ k ≤ g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationTable {
    rows: Vec<Vec<f64>>,
    pub p0: f64,
    pub dp: f64,
    pub q: f64,
}

impl ExtrapolationTable {
    /// Number of grid levels `G + 1`.
    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, g: usize, k: usize) -> Option<f64> {
        self.rows.get(g).and_then(|r| r.get(k)).copied()
    }

    /// Entries of grid level `g`, `U_{g,0} … U_{g,g}`.
    pub fn row(&self, g: usize) -> &[f64] {
        &self.rows[g]
    }

    /// Column `k` as `(g, value)` pairs, `g ≥ k`.
    pub fn column(&self, k: usize) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(g, r)| r.get(k).map(|&v| (g, v)))
            .collect()
    }
}

/// Fills the ladder column by column from per-grid values `U_{g,0}`.
pub fn build_ladder(values: &[f64], p0: f64, dp: f64, q: f64) -> Result<ExtrapolationTable> {
    if values.len() < 2 {
        return param_err(format!(
            "extrapolation needs at least 2 grid levels, got {}",
            values.len()
        ));
    }
    let mut rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    for k in 0..values.len() - 1 {
        let order = order_sequence(p0, dp, k);
        for g in k + 1..values.len() {
            let next = extrapolate(rows[g - 1][k], rows[g][k], q, order)?;
            rows[g].push(next);
        }
    }
    Ok(ExtrapolationTable { rows, p0, dp, q })
}

/// First-extrapolation error estimate of `u_2n`: `(u_2n - u_n) / (2^p0 - 1)`.
pub fn error_estimate(u_n: f64, u_2n: f64, p0: f64) -> f64 {
    (u_2n - u_n) / (2f64.powf(p0) - 1.0)
}

/// The safe estimate `u_2n - u_n`.
pub fn safe_error_estimate(u_n: f64, u_2n: f64) -> f64 {
    u_2n - u_n
}

/// Observed order from errors against `u_ref` on grids `N` and `2N`.
/// `None` if either error is exactly zero.
pub fn observed_order(u_n: f64, u_2n: f64, u_ref: f64) -> Option<f64> {
    let e1 = (u_n - u_ref).abs();
    let e2 = (u_2n - u_ref).abs();
    if e1 == 0.0 || e2 == 0.0 || !e1.is_finite() || !e2.is_finite() {
        return None;
    }
    Some((e1.ln() - e2.ln()) / std::f64::consts::LN_2)
}

/// Per-node error quantities of one solution component.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentErrors {
    /// `exact - fine`, when an exact solution is available.
    pub true_error: Option<Vec<f64>>,
    pub eest: Vec<f64>,
    pub esafe: Vec<f64>,
    /// Observed order against the exact solution, when available.
    pub observed_order: Option<Vec<Option<f64>>>,
}

/// Error estimates at the finite nodes of the coarser of two nested grids.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub coarse_intervals: usize,
    /// Coarse-grid abscissae `x_0 … x_{N-1}`.
    pub nodes: Vec<f64>,
    pub u: ComponentErrors,
    pub v: ComponentErrors,
    /// Free boundary on the fine grid.
    pub free_boundary: f64,
    pub free_boundary_eest: f64,
    pub free_boundary_esafe: f64,
    pub free_boundary_true_error: Option<f64>,
    pub p0: f64,
}

/// Compares solutions on `N` and `2N` at the common (coarse) nodes.
pub fn error_report(
    coarse_grid: &QuasiUniformGrid,
    coarse: &DiscreteSolution,
    fine_grid: &QuasiUniformGrid,
    fine: &DiscreteSolution,
    oracle: Option<&dyn ExactSolution>,
    p0: f64,
) -> Result<ErrorReport> {
    error_report_with(
        Execution::default(),
        coarse_grid,
        coarse,
        fine_grid,
        fine,
        oracle,
        p0,
    )
}

pub fn error_report_with(
    exec: Execution,
    coarse_grid: &QuasiUniformGrid,
    coarse: &DiscreteSolution,
    fine_grid: &QuasiUniformGrid,
    fine: &DiscreteSolution,
    oracle: Option<&dyn ExactSolution>,
    p0: f64,
) -> Result<ErrorReport> {
    if !coarse_grid.is_refined_by(fine_grid) {
        return param_err(format!(
            "grids N = {} and N = {} are not nested by a factor of 2",
            coarse_grid.intervals(),
            fine_grid.intervals()
        ));
    }
    if coarse.len() != coarse_grid.len() || fine.len() != fine_grid.len() {
        return param_err("solution sizes do not match their grids");
    }
    let n = coarse_grid.intervals();
    let nodes = coarse_grid.finite_nodes().to_vec();

    let exact: Option<Vec<(f64, f64)>> = match oracle {
        Some(o) => Some(
            nodes
                .iter()
                .map(|&x| o.transformed(x))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    struct NodeErr {
        eest: [f64; 2],
        esafe: [f64; 2],
        truth: Option<[f64; 2]>,
        order: Option<[Option<f64>; 2]>,
    }
    let per_node = map_range(exec, n, |i| {
        let (uc, vc, _) = coarse.node(i);
        let (uf, vf, _) = fine.node(2 * i);
        let ex = exact.as_ref().map(|e| e[i]);
        NodeErr {
            eest: [error_estimate(uc, uf, p0), error_estimate(vc, vf, p0)],
            esafe: [safe_error_estimate(uc, uf), safe_error_estimate(vc, vf)],
            truth: ex.map(|(ue, ve)| [ue - uf, ve - vf]),
            order: ex.map(|(ue, ve)| [observed_order(uc, uf, ue), observed_order(vc, vf, ve)]),
        }
    });

    let component = |c: usize| ComponentErrors {
        true_error: exact
            .as_ref()
            .map(|_| per_node.iter().map(|e| e.truth.unwrap()[c]).collect()),
        eest: per_node.iter().map(|e| e.eest[c]).collect(),
        esafe: per_node.iter().map(|e| e.esafe[c]).collect(),
        observed_order: exact
            .as_ref()
            .map(|_| per_node.iter().map(|e| e.order.unwrap()[c]).collect()),
    };

    let rc = coarse.free_boundary();
    let rf = fine.free_boundary();
    if !rf.is_finite() {
        return Err(Error::InvalidSolution(
            "fine free boundary is not finite".into(),
        ));
    }
    Ok(ErrorReport {
        coarse_intervals: n,
        nodes,
        u: component(0),
        v: component(1),
        free_boundary: rf,
        free_boundary_eest: error_estimate(rc, rf, p0),
        free_boundary_esafe: safe_error_estimate(rc, rf),
        free_boundary_true_error: oracle.map(|o| o.free_boundary() - rf),
        p0,
    })
}
