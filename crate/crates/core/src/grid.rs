//! Quasi-uniform grids on `[1, ∞]`.
//!
//! A uniform grid `ξ_n = n/N` on `[0, 1]` is pushed through a grid
//! generating function `x(ξ)` whose image is `[1, ∞]`. The last node lands
//! exactly on infinity; every interval, including the infinite last one, has
//! finite quarter nodes `x_{n+1/4}, x_{n+1/2}, x_{n+3/4}` from which the
//! scheme coefficients are built.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};

/// Default control parameter of the logarithmic map.
pub const DEFAULT_LOG_C: f64 = 20.0;
/// Default control parameter of the algebraic map.
pub const DEFAULT_ALG_C: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    /// `x = -c ln(1 - ξ) + 1`
    #[serde(rename = "log")]
    Logarithmic,
    /// `x = c ξ / (1 - ξ) + 1`
    #[serde(rename = "alg")]
    Algebraic,
}

impl MapKind {
    pub fn default_c(self) -> f64 {
        match self {
            MapKind::Logarithmic => DEFAULT_LOG_C,
            MapKind::Algebraic => DEFAULT_ALG_C,
        }
    }
}

/// Grid generating function `ξ ∈ [0,1] → x ∈ [1,∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMap {
    kind: MapKind,
    c: f64,
}

impl GridMap {
    pub fn new(kind: MapKind, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return param_err(format!("map control parameter c must be positive, got {c}"));
        }
        Ok(GridMap { kind, c })
    }

    pub fn logarithmic(c: f64) -> Result<Self> {
        Self::new(MapKind::Logarithmic, c)
    }

    pub fn algebraic(c: f64) -> Result<Self> {
        Self::new(MapKind::Algebraic, c)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Evaluates the map. `ξ = 1` returns `f64::INFINITY`.
    pub fn eval(&self, xi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain {
                what: "xi",
                value: xi,
                domain: "[0, 1]",
            });
        }
        Ok(self.eval_unchecked(xi))
    }

    fn eval_unchecked(&self, xi: f64) -> f64 {
        if xi == 1.0 {
            return f64::INFINITY;
        }
        match self.kind {
            MapKind::Logarithmic => -self.c * (-xi).ln_1p() + 1.0,
            MapKind::Algebraic => self.c * xi / (1.0 - xi) + 1.0,
        }
    }
}

/// Coefficients `a`, `b`, `c_w` of the two-point midpoint stencil on one
/// interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeCoefficients {
    /// `2 (x_{n+3/4} - x_{n+1/4})`
    pub a: f64,
    /// Weight of the right node `w_{n+1}`.
    pub b: f64,
    /// Weight of the left node `w_n`.
    pub c_w: f64,
}

impl SchemeCoefficients {
    fn from_quarters(q: [f64; 3]) -> Self {
        let [q1, q2, q3] = q;
        let span = q3 - q1;
        let b = (q2 - q1) / span;
        SchemeCoefficients {
            a: 2.0 * span,
            b,
            // b + c_w == 1 bit-exactly
            c_w: 1.0 - b,
        }
    }
}

/// Nodes `x_0 = 1 < x_1 < … < x_N = ∞` plus the quarter nodes of every
/// interval. Immutable after construction.
#[derive(Debug, Clone)]
pub struct QuasiUniformGrid {
    map: GridMap,
    nodes: Vec<f64>,
    quarters: Vec<[f64; 3]>,
    coeffs: Vec<SchemeCoefficients>,
}

impl QuasiUniformGrid {
    /// Builds the grid with `n_intervals` intervals (`N ≥ 2`).
    pub fn new(n_intervals: usize, map: GridMap) -> Result<Self> {
        if n_intervals < 2 {
            return param_err(format!("grid needs N >= 2 intervals, got {n_intervals}"));
        }
        let n = n_intervals;
        let nf = n as f64;
        // Integer numerators keep (2k)/(2N) == k/N bit-for-bit under refinement.
        let nodes: Vec<f64> = (0..=n).map(|i| map.eval_unchecked(i as f64 / nf)).collect();
        let quarter_den = 4.0 * nf;
        let quarters: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let base = 4 * i;
                [1, 2, 3].map(|k| map.eval_unchecked((base + k) as f64 / quarter_den))
            })
            .collect();
        let coeffs = quarters
            .iter()
            .map(|&q| SchemeCoefficients::from_quarters(q))
            .collect();
        Ok(QuasiUniformGrid {
            map,
            nodes,
            quarters,
            coeffs,
        })
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.quarters.len()
    }

    /// Number of nodes `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn map(&self) -> GridMap {
        self.map
    }

    /// All nodes; the last entry is `f64::INFINITY`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// The finite nodes `x_0 … x_{N-1}`.
    pub fn finite_nodes(&self) -> &[f64] {
        &self.nodes[..self.intervals()]
    }

    pub fn xi(&self, n: usize) -> f64 {
        n as f64 / self.intervals() as f64
    }

    pub fn quarter_nodes(&self, n: usize) -> Result<[f64; 3]> {
        self.quarters.get(n).copied().ok_or(Error::Index {
            index: n,
            len: self.intervals(),
        })
    }

    /// Midpoint abscissa `x_{n+1/2}` of interval `n` (finite for every `n`).
    #[inline]
    pub fn midpoint(&self, n: usize) -> f64 {
        self.quarters[n][1]
    }

    pub fn coefficients(&self, n: usize) -> Result<SchemeCoefficients> {
        self.coeffs.get(n).copied().ok_or(Error::Index {
            index: n,
            len: self.intervals(),
        })
    }

    /// Unchecked coefficient access for inner loops.
    #[inline]
    pub(crate) fn coeff(&self, n: usize) -> SchemeCoefficients {
        self.coeffs[n]
    }

    pub fn all_coefficients(&self) -> &[SchemeCoefficients] {
        &self.coeffs
    }

    /// Whether `fine` is the once-refined (`2N`) version of `self`.
    pub fn is_refined_by(&self, fine: &QuasiUniformGrid) -> bool {
        fine.intervals() == 2 * self.intervals() && fine.map == self.map
    }
}
