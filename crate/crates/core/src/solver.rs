//! Nonlinear solves of the discrete system and grid continuation.
//!
//! The default method is Levenberg-Marquardt on the normal equations with
//! Marquardt's diagonal scaling; a damped Newton iteration with step halving
//! is available as a faster alternative. Both factor band matrices only, so
//! an iteration costs `O(N)`.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{param_err, Error, Result};
use crate::grid::{GridMap, QuasiUniformGrid};
use crate::par::Execution;
use crate::problem::FreeBoundaryProblem;
use crate::scheme::{assemble_jacobian, assemble_residual, norm_inf, DiscreteSolution};

/// Damping above which the iteration is declared divergent.
pub const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-20;
const MAX_HALVINGS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    LevenbergMarquardt,
    DampedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Stop when `‖F‖∞ ≤ tol_f`.
    pub tol_f: f64,
    /// Stop when `‖Δw‖∞ ≤ tol_x (1 + ‖w‖∞)`.
    pub tol_x: f64,
    pub max_iterations: usize,
    pub method: Method,
    pub initial_lm_damping: f64,
    pub execution: Execution,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_f: 1e-15,
            tol_x: 1e-15,
            max_iterations: 200,
            method: Method::LevenbergMarquardt,
            initial_lm_damping: 1e-2,
            execution: Execution::default(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_f > 0.0) || !(self.tol_x > 0.0) {
            return param_err("tolerances must be positive");
        }
        if self.max_iterations == 0 {
            return param_err("max_iterations must be at least 1");
        }
        if !(self.initial_lm_damping > 0.0 && self.initial_lm_damping.is_finite()) {
            return param_err("initial_lm_damping must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ResidualTol,
    StepTol,
    MaxIterations,
    Diverged,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Termination::ResidualTol | Termination::StepTol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Jacobian evaluations (outer iterations).
    pub iterations: usize,
    /// `‖F‖∞` at the returned iterate.
    pub final_residual_norm: f64,
    pub converged: bool,
    pub termination: Termination,
    /// `‖F‖₂` of every accepted iterate, starting with the initial one.
    pub accepted_norms: Vec<f64>,
    pub diagnostics: Vec<String>,
}

struct Iteration<'a, P: ?Sized> {
    problem: &'a P,
    grid: &'a QuasiUniformGrid,
    settings: &'a SolverSettings,
    w: Vec<f64>,
    f: Vec<f64>,
    phi: f64,
    scratch: Vec<f64>,
    report: SolveReport,
}

impl<'a, P: FreeBoundaryProblem + ?Sized> Iteration<'a, P> {
    fn residual_into(&mut self, w: &[f64]) -> f64 {
        assemble_residual(
            self.settings.execution,
            self.problem,
            self.grid,
            w,
            &mut self.scratch,
        );
        sum_sq(&self.scratch)
    }

    fn jacobian(&self) -> BandMatrix {
        assemble_jacobian(self.settings.execution, self.problem, self.grid, &self.w)
    }

    fn step_is_small(&self, step: &[f64]) -> bool {
        norm_inf(step) <= self.settings.tol_x * (1.0 + norm_inf(&self.w))
    }

    /// Tries `w + step`; on decrease of `‖F‖₂` accepts it and returns true.
    fn try_step(&mut self, step: &[f64]) -> bool {
        let trial: Vec<f64> = self.w.iter().zip(step).map(|(a, b)| a + b).collect();
        let phi = self.residual_into(&trial);
        if phi.is_finite() && phi < self.phi {
            self.w = trial;
            std::mem::swap(&mut self.f, &mut self.scratch);
            self.phi = phi;
            self.report.accepted_norms.push(phi.sqrt());
            self.diagnose();
            true
        } else {
            false
        }
    }

    fn diagnose(&mut self) {
        if let Some(msg) = self.problem.diagnose_free_boundary(self.w[2]) {
            if !self.report.diagnostics.contains(&msg) {
                log::warn!("{msg}");
                self.report.diagnostics.push(msg);
            }
        }
    }

    fn residual_converged(&self) -> bool {
        norm_inf(&self.f) <= self.settings.tol_f
    }

    fn levenberg_marquardt(&mut self) -> Termination {
        let mut lambda = self.settings.initial_lm_damping;
        while self.report.iterations < self.settings.max_iterations {
            self.report.iterations += 1;
            let jac = self.jacobian();
            let normal = jac.gram();
            let grad = jac.tr_mul_vec(&self.f);
            let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
            let dmax = normal.diagonal().into_iter().fold(0.0f64, f64::max);
            let scale: Vec<f64> = normal
                .diagonal()
                .into_iter()
                .map(|d| d.max(dmax * 1e-12).max(f64::MIN_POSITIVE))
                .collect();
            loop {
                let mut damped = normal.clone();
                let shift: Vec<f64> = scale.iter().map(|d| lambda * d).collect();
                damped.add_to_diagonal(&shift);
                let step = damped.lu().map(|lu| lu.solve(&rhs));
                match step {
                    Ok(step) if step.iter().all(|s| s.is_finite()) => {
                        let small = self.step_is_small(&step);
                        if self.try_step(&step) {
                            lambda = (lambda * 0.1).max(MIN_DAMPING);
                            if self.residual_converged() {
                                return Termination::ResidualTol;
                            }
                            if small {
                                return Termination::StepTol;
                            }
                            break;
                        }
                        if small {
                            return Termination::StepTol;
                        }
                    }
                    _ => {}
                }
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    return Termination::Diverged;
                }
            }
        }
        Termination::MaxIterations
    }

    fn damped_newton(&mut self) -> Termination {
        while self.report.iterations < self.settings.max_iterations {
            self.report.iterations += 1;
            let jac = self.jacobian();
            let Ok(lu) = jac.lu() else {
                return Termination::Diverged;
            };
            let rhs: Vec<f64> = self.f.iter().map(|v| -v).collect();
            let mut step = lu.solve(&rhs);
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let small = self.step_is_small(&step);
                if self.try_step(&step) {
                    accepted = true;
                    if self.residual_converged() {
                        return Termination::ResidualTol;
                    }
                    if small {
                        return Termination::StepTol;
                    }
                    break;
                }
                if small {
                    return Termination::StepTol;
                }
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
            if !accepted {
                return Termination::Diverged;
            }
        }
        Termination::MaxIterations
    }
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Solves the discrete system on `grid` starting from `initial`.
///
/// Fails only on malformed input (wrong size, non-finite residual at the
/// initial iterate, invalid settings). Non-convergence is reported through
/// [`SolveReport::termination`], with the last accepted iterate returned.
pub fn solve<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    grid: &QuasiUniformGrid,
    initial: &DiscreteSolution,
    settings: &SolverSettings,
) -> Result<(DiscreteSolution, SolveReport)> {
    settings.validate()?;
    if initial.len() != grid.len() {
        return param_err(format!(
            "initial iterate has {} nodes, grid has {}",
            initial.len(),
            grid.len()
        ));
    }
    let w = initial.packed().to_vec();
    let dim = w.len();
    let mut it = Iteration {
        problem,
        grid,
        settings,
        w,
        f: vec![0.0; dim],
        phi: 0.0,
        scratch: vec![0.0; dim],
        report: SolveReport {
            iterations: 0,
            final_residual_norm: f64::NAN,
            converged: false,
            termination: Termination::MaxIterations,
            accepted_norms: Vec::new(),
            diagnostics: Vec::new(),
        },
    };
    let w0 = it.w.clone();
    it.phi = it.residual_into(&w0);
    std::mem::swap(&mut it.f, &mut it.scratch);
    if let Some(row) = it.f.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row });
    }
    it.report.accepted_norms.push(it.phi.sqrt());
    it.diagnose();

    let termination = if it.residual_converged() {
        Termination::ResidualTol
    } else {
        match settings.method {
            Method::LevenbergMarquardt => it.levenberg_marquardt(),
            Method::DampedNewton => it.damped_newton(),
        }
    };
    let mut report = it.report;
    report.termination = termination;
    report.converged = termination.is_converged();
    report.final_residual_norm = norm_inf(&it.f);
    log::debug!(
        "N = {}: {:?} after {} iterations, |F| = {:.3e}, R = {}",
        grid.intervals(),
        termination,
        report.iterations,
        report.final_residual_norm,
        it.w[2]
    );
    let mut out = initial.clone();
    out.packed_mut().copy_from_slice(&it.w);
    Ok((out, report))
}

/// Interpolates a solution on `coarse_grid` onto its refinement: even fine
/// nodes copy the coarse nodes, odd ones average their two neighbours.
pub fn prolong(
    coarse_grid: &QuasiUniformGrid,
    coarse: &DiscreteSolution,
    fine_grid: &QuasiUniformGrid,
) -> Result<DiscreteSolution> {
    if !coarse_grid.is_refined_by(fine_grid) {
        return param_err(format!(
            "cannot prolong from N = {} to N = {} (refinement must double N with the same map)",
            coarse_grid.intervals(),
            fine_grid.intervals()
        ));
    }
    if coarse.len() != coarse_grid.len() {
        return param_err("coarse solution does not match its grid");
    }
    let n = coarse_grid.intervals();
    let mut fine = DiscreteSolution::constant(2 * n, 0.0);
    for i in 0..=n {
        let (u, v, r) = coarse.node(i);
        fine.set_node(2 * i, u, v, r);
        if i < n {
            let (u1, v1, r1) = coarse.node(i + 1);
            fine.set_node(2 * i + 1, 0.5 * (u + u1), 0.5 * (v + v1), 0.5 * (r + r1));
        }
    }
    Ok(fine)
}

/// One solved level of a continuation run.
#[derive(Debug, Clone)]
pub struct Level {
    pub grid: QuasiUniformGrid,
    pub solution: DiscreteSolution,
    pub report: SolveReport,
}

impl Level {
    pub fn intervals(&self) -> usize {
        self.grid.intervals()
    }

    pub fn free_boundary(&self) -> f64 {
        self.solution.free_boundary()
    }
}

/// Result of [`continuation_solve`]. If some level fails to converge the
/// chain stops there; that level is kept as the last entry.
#[derive(Debug, Clone)]
pub struct Continuation {
    pub levels: Vec<Level>,
    pub requested: Vec<usize>,
}

impl Continuation {
    pub fn is_complete(&self) -> bool {
        self.levels.len() == self.requested.len() && self.levels.iter().all(|l| l.report.converged)
    }

    /// The first level that failed to converge, if any.
    pub fn failed_level(&self) -> Option<&Level> {
        self.levels.iter().find(|l| !l.report.converged)
    }

    pub fn free_boundaries(&self) -> Vec<f64> {
        self.levels
            .iter()
            .filter(|l| l.report.converged)
            .map(Level::free_boundary)
            .collect()
    }

    pub fn level(&self, intervals: usize) -> Option<&Level> {
        self.levels.iter().find(|l| l.intervals() == intervals)
    }
}

/// Checks that `n_list` is non-empty, starts at `N ≥ 2` and doubles.
pub fn validate_doubling(n_list: &[usize]) -> Result<()> {
    let Some(&first) = n_list.first() else {
        return param_err("N list is empty");
    };
    if first < 2 {
        return param_err(format!("coarsest grid needs N >= 2, got {first}"));
    }
    for w in n_list.windows(2) {
        if w[1] != 2 * w[0] {
            return param_err(format!(
                "N list must double at each level, found {} followed by {}",
                w[0], w[1]
            ));
        }
    }
    Ok(())
}

/// Solves on the coarsest grid from the all-ones iterate and on each finer
/// grid from the prolonged previous solution.
pub fn continuation_solve<P: FreeBoundaryProblem + ?Sized>(
    problem: &P,
    map: GridMap,
    n_list: &[usize],
    settings: &SolverSettings,
) -> Result<Continuation> {
    validate_doubling(n_list)?;
    let mut levels: Vec<Level> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let grid = QuasiUniformGrid::new(n, map)?;
        let initial = match levels.last() {
            None => DiscreteSolution::constant(n, 1.0),
            Some(prev) => prolong(&prev.grid, &prev.solution, &grid)?,
        };
        let (solution, report) = solve(problem, &grid, &initial, settings)?;
        let ok = report.converged;
        if !ok {
            log::error!(
                "continuation stopped at N = {n}: {:?} after {} iterations",
                report.termination,
                report.iterations
            );
        }
        levels.push(Level {
            grid,
            solution,
            report,
        });
        if !ok {
            break;
        }
    }
    Ok(Continuation {
        levels,
        requested: n_list.to_vec(),
    })
}
