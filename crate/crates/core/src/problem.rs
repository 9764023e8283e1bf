//! Free-boundary problems of the form
//!
//! ```text
//! u' = f(x, u, v),   v' = g(x, u, v),   R' = 0        on 1 <= x < ∞
//! u(1) = β(R),       v(1) = γ(R),       u(x) → u_∞     as x → ∞
//! ```
//!
//! where the free boundary `R` is carried as an extra unknown. The perpetual
//! American put, after the Landau change of variables `x = S/R`,
//! `u(x) = P(xR)`, is the built-in instance and comes with a closed-form
//! solution used as the test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::grid::QuasiUniformGrid;
use crate::scheme::DiscreteSolution;

/// Partial derivatives `(∂/∂u, ∂/∂v)` of a right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub du: f64,
    pub dv: f64,
}

/// A problem in the generic first-order free-boundary class.
///
/// Implementations must be pure: the scheme may evaluate `f` and `g` from
/// several threads and in any order. `f` and `g` are only ever called with a
/// finite abscissa.
pub trait FreeBoundaryProblem: Sync {
    fn f(&self, x: f64, u: f64, v: f64) -> f64;
    fn g(&self, x: f64, u: f64, v: f64) -> f64;

    /// Left boundary value `u(1) = β(R)`.
    fn left_u(&self, r: f64) -> f64;
    /// Left boundary value `v(1) = γ(R)`.
    fn left_v(&self, r: f64) -> f64;
    /// Far-field limit of `u`.
    fn right_u(&self) -> f64 {
        0.0
    }

    /// Analytic partials of `f`, if known. `None` selects finite differences.
    fn f_partials(&self, _x: f64, _u: f64, _v: f64) -> Option<Partials> {
        None
    }

    fn g_partials(&self, _x: f64, _u: f64, _v: f64) -> Option<Partials> {
        None
    }

    /// Analytic `(dβ/dR, dγ/dR)`, if known.
    fn left_partials(&self, _r: f64) -> Option<(f64, f64)> {
        None
    }

    /// Problem-specific sanity check on an iterate's free boundary. Returning
    /// `Some(message)` makes the solver attach a diagnostic to its report.
    fn diagnose_free_boundary(&self, _r: f64) -> Option<String> {
        None
    }
}

/// Closed-form solution of a problem, in the transformed variables.
pub trait ExactSolution {
    fn free_boundary(&self) -> f64;
    /// `(u(x), v(x))` for `x ≥ 1`; `x = ∞` gives the far-field values.
    fn transformed(&self, x: f64) -> Result<(f64, f64)>;
}

/// Volatility (as variance), interest rate and exercise price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParameters {
    /// `σ²`
    pub sigma2: f64,
    /// `r`
    pub rate: f64,
    /// `E`
    pub strike: f64,
}

impl Default for MarketParameters {
    fn default() -> Self {
        MarketParameters {
            sigma2: 0.1,
            rate: 0.05,
            strike: 10.0,
        }
    }
}

impl MarketParameters {
    pub fn new(sigma2: f64, rate: f64, strike: f64) -> Result<Self> {
        let p = MarketParameters {
            sigma2,
            rate,
            strike,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma2", self.sigma2),
            ("rate", self.rate),
            ("strike", self.strike),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return param_err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// The decay exponent `2r/σ²` of the put price.
    pub fn exponent(&self) -> f64 {
        2.0 * self.rate / self.sigma2
    }
}

/// The perpetual American put in fixed-domain form:
/// `f = v`, `g = 2r (u - x v) / (σ² x²)`, `β(R) = max(E - R, 0)`,
/// `γ(R) = -R`, `u_∞ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpetualPut {
    params: MarketParameters,
}

impl PerpetualPut {
    pub fn new(params: MarketParameters) -> Result<Self> {
        params.validate()?;
        Ok(PerpetualPut { params })
    }

    pub fn params(&self) -> MarketParameters {
        self.params
    }

    /// `R = 2rE / (2r + σ²)`
    pub fn exact_free_boundary(&self) -> f64 {
        let p = &self.params;
        2.0 * p.rate * p.strike / (2.0 * p.rate + p.sigma2)
    }

    /// Option price and delta in financial variables, `S ≥ R`.
    pub fn exact_price(&self, s: f64) -> Result<(f64, f64)> {
        let r = self.exact_free_boundary();
        if s.is_nan() || s < r {
            return Err(Error::Domain {
                what: "S",
                value: s,
                domain: "[R, ∞)",
            });
        }
        let k = self.params.exponent();
        let scale = self.params.strike - r;
        if s.is_infinite() {
            return Ok((0.0, 0.0));
        }
        // (E - R) (S/R)^{-k}, kept in ratio form so S = R gives E - R exactly
        let p = scale * (s / r).powf(-k);
        Ok((p, -k * p / s))
    }
}

impl FreeBoundaryProblem for PerpetualPut {
    #[inline]
    fn f(&self, _x: f64, _u: f64, v: f64) -> f64 {
        v
    }

    #[inline]
    fn g(&self, x: f64, u: f64, v: f64) -> f64 {
        let p = &self.params;
        2.0 * p.rate * (u - x * v) / (p.sigma2 * x * x)
    }

    fn left_u(&self, r: f64) -> f64 {
        (self.params.strike - r).max(0.0)
    }

    fn left_v(&self, r: f64) -> f64 {
        -r
    }

    fn f_partials(&self, _x: f64, _u: f64, _v: f64) -> Option<Partials> {
        Some(Partials { du: 0.0, dv: 1.0 })
    }

    fn g_partials(&self, x: f64, _u: f64, _v: f64) -> Option<Partials> {
        let p = &self.params;
        let s = 2.0 * p.rate / (p.sigma2 * x * x);
        Some(Partials { du: s, dv: -s * x })
    }

    fn left_partials(&self, r: f64) -> Option<(f64, f64)> {
        // max(E - R, 0) is flat for R >= E
        let dbeta = if r < self.params.strike { -1.0 } else { 0.0 };
        Some((dbeta, -1.0))
    }

    fn diagnose_free_boundary(&self, r: f64) -> Option<String> {
        (r >= self.params.strike).then(|| {
            format!(
                "iterate has R = {r} >= E = {}; the u(1) boundary row has no R-sensitivity there",
                self.params.strike
            )
        })
    }
}

impl ExactSolution for PerpetualPut {
    fn free_boundary(&self) -> f64 {
        self.exact_free_boundary()
    }

    fn transformed(&self, x: f64) -> Result<(f64, f64)> {
        if x.is_nan() || x < 1.0 {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "[1, ∞]",
            });
        }
        if x.is_infinite() {
            return Ok((0.0, 0.0));
        }
        let k = self.params.exponent();
        let u = (self.params.strike - self.exact_free_boundary()) * x.powf(-k);
        Ok((u, -k * u / x))
    }
}

/// A problem assembled from plain functions, for models outside the
/// built-in benchmark.
pub struct FnProblem<F, G, B, C>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
    G: Fn(f64, f64, f64) -> f64 + Sync,
    B: Fn(f64) -> f64 + Sync,
    C: Fn(f64) -> f64 + Sync,
{
    pub f: F,
    pub g: G,
    pub left_u: B,
    pub left_v: C,
    pub right_u: f64,
}

impl<F, G, B, C> FreeBoundaryProblem for FnProblem<F, G, B, C>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
    G: Fn(f64, f64, f64) -> f64 + Sync,
    B: Fn(f64) -> f64 + Sync,
    C: Fn(f64) -> f64 + Sync,
{
    fn f(&self, x: f64, u: f64, v: f64) -> f64 {
        (self.f)(x, u, v)
    }
    fn g(&self, x: f64, u: f64, v: f64) -> f64 {
        (self.g)(x, u, v)
    }
    fn left_u(&self, r: f64) -> f64 {
        (self.left_u)(r)
    }
    fn left_v(&self, r: f64) -> f64 {
        (self.left_v)(r)
    }
    fn right_u(&self) -> f64 {
        self.right_u
    }
}

/// A discrete solution mapped back to asset price `S`, option price `P`
/// and delta `dP/dS`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialSolution {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub delta: Vec<f64>,
    pub free_boundary: f64,
}

/// Inverse Landau transform: `S_n = x_n R`, `P_n = U_n`, `dP/dS_n = V_n / R`.
/// The node at infinity carries the far-field values.
pub fn to_financial(
    grid: &QuasiUniformGrid,
    solution: &DiscreteSolution,
) -> Result<FinancialSolution> {
    let r = solution.free_boundary();
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidSolution(format!(
            "free boundary must be positive, got {r}"
        )));
    }
    if solution.len() != grid.len() {
        return Err(Error::InvalidSolution(format!(
            "solution has {} nodes, grid has {}",
            solution.len(),
            grid.len()
        )));
    }
    let last = grid.intervals();
    let s = grid.nodes().iter().map(|&x| x * r).collect();
    let mut p = solution.u().to_vec();
    let mut delta: Vec<f64> = solution.v().iter().map(|&v| v / r).collect();
    p[last] = 0.0;
    delta[last] = 0.0;
    Ok(FinancialSolution {
        s,
        p,
        delta,
        free_boundary: r,
    })
}
