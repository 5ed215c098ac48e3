//! Space-time grids, per-point finite-difference derivatives and residual
//! statistics shared by every equation check.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{try_fd_derivative, try_jet, FdValue, Jet, StencilSpec};

/// A report with more than this fraction of masked points is unusable.
pub const MAX_MASKED_FRACTION: f64 = 0.5;

/// Regularizer in `|equation| / (Σ|terms| + ε)`.
pub const RELATIVE_EPSILON: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid spec {0:?} must look like \"x0:x1:nx,t0:t1:nt\"")]
    Syntax(String),
    #[error("grid axis {axis}: {reason}")]
    Axis { axis: char, reason: String },
}

/// Uniform rectangular grid over x ∈ [x_min, x_max], t ∈ [t_min, t_max].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_min: -5.0, x_max: 5.0, nx: 41, t_min: -2.0, t_max: 2.0, nt: 41 }
    }
}

fn axis_values(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

impl GridSpec {
    pub fn new(x: (f64, f64, usize), t: (f64, f64, usize)) -> Result<Self, GridError> {
        let g = GridSpec { x_min: x.0, x_max: x.1, nx: x.2, t_min: t.0, t_max: t.1, nt: t.2 };
        g.validate()?;
        Ok(g)
    }

    /// The x-line `x ∈ [x_min, x_max]` at a single time.
    pub fn x_line(x_min: f64, x_max: f64, nx: usize, t: f64) -> Self {
        GridSpec { x_min, x_max, nx, t_min: t, t_max: t, nt: 1 }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (axis, lo, hi, n) in [('x', self.x_min, self.x_max, self.nx), ('t', self.t_min, self.t_max, self.nt)] {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(GridError::Axis { axis, reason: "bounds must be finite".into() });
            }
            if n == 0 {
                return Err(GridError::Axis { axis, reason: "needs at least one point".into() });
            }
            if n > 1 && !(hi > lo) {
                return Err(GridError::Axis { axis, reason: format!("degenerate range [{lo}, {hi}]") });
            }
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        axis_values(self.x_min, self.x_max, self.nx)
    }

    pub fn ts(&self) -> Vec<f64> {
        axis_values(self.t_min, self.t_max, self.nt)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, t-major (every x for the first t, then the next t, …).
    pub fn points(&self) -> Vec<(f64, f64)> {
        let xs = self.xs();
        self.ts().into_iter().flat_map(|t| xs.iter().map(move |&x| (x, t))).collect()
    }
}

impl FromStr for GridSpec {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let syntax = || GridError::Syntax(s.to_string());
        let axis = |part: &str| -> Result<(f64, f64, usize), GridError> {
            let f: Vec<&str> = part.split(':').map(str::trim).collect();
            if f.len() != 3 {
                return Err(syntax());
            }
            Ok((
                f[0].parse().map_err(|_| syntax())?,
                f[1].parse().map_err(|_| syntax())?,
                f[2].parse().map_err(|_| syntax())?,
            ))
        };
        let (xp, tp) = s.split_once(',').ok_or_else(syntax)?;
        GridSpec::new(axis(xp)?, axis(tp)?)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{},{}:{}:{}", self.x_min, self.x_max, self.nx, self.t_min, self.t_max, self.nt)
    }
}

/// Evaluates `f` on every grid point in parallel; output is in
/// [`GridSpec::points`] order regardless of scheduling.
pub fn evaluate_grid<T: Send>(grid: &GridSpec, f: impl Fn(f64, f64) -> T + Sync) -> Vec<T> {
    grid.points().into_par_iter().map(|(x, t)| f(x, t)).collect()
}

/// Statistics of a pointwise residual or defect over a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub equation: String,
    pub grid: GridSpec,
    /// Largest value over unmasked points (`null` in JSON when everything is masked).
    pub max: f64,
    pub mean: f64,
    pub masked_fraction: f64,
    /// Point where the maximum is attained.
    pub worst_point: Option<(f64, f64)>,
    pub stencil: Option<StencilSpec>,
    pub usable: bool,
}

impl ResidualReport {
    /// Builds a report from per-point values in grid order; `None` marks a
    /// masked point.
    pub fn from_samples(
        equation: impl Into<String>,
        grid: &GridSpec,
        stencil: Option<StencilSpec>,
        samples: &[Option<f64>],
    ) -> Self {
        let points = grid.points();
        let mut max = f64::NEG_INFINITY;
        let mut worst = None;
        let mut sum = 0.0;
        let mut count = 0usize;
        for (value, point) in samples.iter().zip(points) {
            if let Some(v) = value {
                // NaN must never hide as "small"
                let v = if v.is_nan() { f64::INFINITY } else { *v };
                if v > max || worst.is_none() {
                    max = v;
                    worst = Some(point);
                }
                sum += v;
                count += 1;
            }
        }
        let total = samples.len().max(1);
        let masked_fraction = (samples.len() - count) as f64 / total as f64;
        ResidualReport {
            equation: equation.into(),
            grid: *grid,
            max: if count == 0 { f64::NAN } else { max },
            mean: if count == 0 { f64::NAN } else { sum / count as f64 },
            masked_fraction,
            worst_point: worst,
            stencil,
            usable: count > 0 && masked_fraction <= MAX_MASKED_FRACTION,
        }
    }

    /// Evaluates a pointwise quantity on the grid and summarizes it.
    pub fn evaluate(
        equation: impl Into<String>,
        grid: &GridSpec,
        stencil: Option<StencilSpec>,
        f: impl Fn(f64, f64) -> Option<f64> + Sync,
    ) -> Self {
        let samples = evaluate_grid(grid, f);
        Self::from_samples(equation, grid, stencil, &samples)
    }

    /// Usable and strictly below `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.usable && self.max < tolerance
    }
}

/// `|equation| / (Σ|terms| + ε)`.
pub fn relative(equation: f64, terms: impl IntoIterator<Item = f64>) -> f64 {
    equation / (terms.into_iter().sum::<f64>() + RELATIVE_EPSILON)
}

/// Value and x-derivatives up to third order plus the first t-derivative of
/// a sampled field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointDerivatives<T> {
    pub x: Jet<T>,
    pub dt: T,
}

/// Finite-difference derivatives of `f` at (x,t); `None` if any stencil node
/// is masked or non-finite. The t-derivative uses the same accuracy and step
/// as the x-derivatives.
pub fn point_derivatives<T: FdValue>(
    f: &(impl Fn(f64, f64) -> Option<T> + ?Sized),
    x: f64,
    t: f64,
    stencil: &StencilSpec,
) -> Option<PointDerivatives<T>> {
    let jet = try_jet(|y| f(y, t).ok_or(()), x, stencil).ok()?;
    let dt = try_fd_derivative(|s| f(x, s).ok_or(()), t, &stencil.with_order(1)).ok()?;
    Some(PointDerivatives { x: jet, dt })
}
