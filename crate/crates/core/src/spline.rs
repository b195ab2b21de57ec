//! Natural cubic splines with linear extrapolation.
//!
//! A spline through `(x_i, y_i)` is stored as the knot values together with
//! the second derivatives `M_i` (zero at both ends). Inside `[x_0, x_K]` the
//! usual cubic form applies; outside, the spline continues along the tangent
//! at the nearest end.
//!
//! Every evaluation is linear in `(y, M)`, so a query point can be reduced to
//! four weights once and then applied to many data rows sharing the same knots.

use crate::error::{ensure_finite, AsrError, Result};

/// Fixed knots with the factorised tridiagonal system of the natural spline.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    knots: Vec<f64>,
    steps: Vec<f64>,
    uniform: Option<(f64, f64)>,
    // Thomas-algorithm factors for the interior equations.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

/// Reduced form of a query: `w[0] y_i + w[1] y_{i+1} + w[2] M_i + w[3] M_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineWeights {
    pub index: usize,
    pub w: [f64; 4],
    pub extrapolated: bool,
}

impl SplineWeights {
    #[inline]
    pub fn apply(&self, y: &[f64], m: &[f64]) -> f64 {
        let i = self.index;
        self.w[0] * y[i] + self.w[1] * y[i + 1] + self.w[2] * m[i] + self.w[3] * m[i + 1]
    }
}

impl SplineBasis {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(AsrError::Configuration("a spline needs at least two knots".into()));
        }
        for &x in &knots {
            ensure_finite("knot", x)?;
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AsrError::Configuration("spline knots must be strictly increasing".into()));
        }
        let steps: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let n = knots.len();
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for i in 1..n.saturating_sub(1) {
            let sub = steps[i - 1];
            let diag = 2.0 * (steps[i - 1] + steps[i]);
            let pivot = diag - sub * upper[i - 1];
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = steps[i] * inv_pivot[i];
        }
        let first = steps[0];
        let uniform = steps
            .iter()
            .all(|&h| (h - first).abs() <= 1e-12 * first.abs())
            .then_some((knots[0], first));
        Ok(Self { knots, steps, uniform, upper, inv_pivot })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Second derivatives of the natural spline through `y`, written to `m`.
    pub fn second_derivatives(&self, y: &[f64], m: &mut [f64]) {
        let n = self.knots.len();
        debug_assert_eq!(y.len(), n);
        debug_assert_eq!(m.len(), n);
        m[0] = 0.0;
        m[n - 1] = 0.0;
        if n < 3 {
            return;
        }
        let h = &self.steps;
        for i in 1..n - 1 {
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
            m[i] = (rhs - h[i - 1] * m[i - 1]) * self.inv_pivot[i];
        }
        for i in (1..n - 1).rev() {
            m[i] -= self.upper[i] * m[i + 1];
        }
    }

    /// Reduce a query point to spline weights.
    pub fn weights(&self, x: f64) -> SplineWeights {
        let knots = &self.knots;
        let last = knots.len() - 1;
        if x < knots[0] {
            let h = self.steps[0];
            let dx = x - knots[0];
            return SplineWeights {
                index: 0,
                w: [1.0 - dx / h, dx / h, -dx * h / 3.0, -dx * h / 6.0],
                extrapolated: true,
            };
        }
        if x > knots[last] {
            let h = self.steps[last - 1];
            let dx = x - knots[last];
            return SplineWeights {
                index: last - 1,
                w: [-dx / h, 1.0 + dx / h, dx * h / 6.0, dx * h / 3.0],
                extrapolated: true,
            };
        }
        if x == knots[last] {
            return SplineWeights { index: last - 1, w: [0.0, 1.0, 0.0, 0.0], extrapolated: false };
        }
        let mut i = match self.uniform {
            Some((x0, step)) => (((x - x0) / step) as usize).min(last - 1),
            None => knots.partition_point(|&k| k <= x).saturating_sub(1).min(last - 1),
        };
        while i > 0 && x < knots[i] {
            i -= 1;
        }
        while i + 1 < last && x >= knots[i + 1] {
            i += 1;
        }
        let h = self.steps[i];
        let t = (x - knots[i]) / h;
        let a = 1.0 - t;
        let h2 = h * h / 6.0;
        SplineWeights {
            index: i,
            w: [a, t, (a * a * a - a) * h2, (t * t * t - t) * h2],
            extrapolated: false,
        }
    }
}

/// A natural cubic spline through fixed data.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline {
    basis: SplineBasis,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let basis = SplineBasis::new(knots)?;
        Self::with_basis(basis, values)
    }

    pub fn with_basis(basis: SplineBasis, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(AsrError::Configuration(format!(
                "{} values for {} knots",
                values.len(),
                basis.len()
            )));
        }
        for &v in &values {
            ensure_finite("spline value", v)?;
        }
        let mut second = vec![0.0; values.len()];
        basis.second_derivatives(&values, &mut second);
        Ok(Self { basis, values, second })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.basis.weights(x).apply(&self.values, &self.second)
    }

    /// First derivative inside the knot range; the end slope outside it.
    pub fn slope(&self, x: f64) -> f64 {
        let k = &self.basis.knots;
        let (y, m) = (&self.values, &self.second);
        let last = k.len() - 1;
        let i = if x <= k[0] {
            0
        } else if x >= k[last] {
            last - 1
        } else {
            k.partition_point(|&t| t <= x).saturating_sub(1).min(last - 1)
        };
        let h = self.basis.steps[i];
        let xc = x.clamp(k[0], k[last]);
        let a = (k[i + 1] - xc) / h;
        let b = (xc - k[i]) / h;
        (y[i + 1] - y[i]) / h - (3.0 * a * a - 1.0) * h * m[i] / 6.0
            + (3.0 * b * b - 1.0) * h * m[i + 1] / 6.0
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.second
    }
}

/// Interpolate values sampled on `grid` at `x` (natural cubic spline, linear
/// continuation outside the grid).
pub fn interpolate_a(grid: &[f64], values: &[f64], x: f64) -> Result<f64> {
    if grid.len() < 4 {
        return Err(AsrError::Configuration(format!(
            "spline interpolation needs at least 4 knots, got {}",
            grid.len()
        )));
    }
    ensure_finite("query", x)?;
    Ok(NaturalCubicSpline::new(grid.to_vec(), values.to_vec())?.eval(x))
}
