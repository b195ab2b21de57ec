//! Tensor-product natural cubic interpolation of a day's values in
//! `(S, A)`: a spline in `A` first, then a spline in `S`. Both directions
//! extrapolate linearly.
//!
//! Since spline interpolation is linear in the data, the second derivatives in
//! `S` of the `A`-interpolated values are the `A`-interpolation of the `S`
//! second derivatives. Precomputing those once per day makes every query
//! local: four `A`-spline evaluations and one `S` combination.

use rayon::prelude::*;

use crate::solver::DaySurface;
use crate::spline::{SplineBasis, SplineWeights};

/// Spline data of one day, same layout as [`DaySurface::theta`].
#[derive(Debug, Clone)]
pub struct BicubicData {
    /// Second derivatives along `A` of the values.
    pub m_a: Vec<f64>,
    /// Second derivatives along `S` of the values.
    pub y_ss: Vec<f64>,
    /// Second derivatives along `A` of `y_ss`.
    pub m_a_ss: Vec<f64>,
    pub s_basis: SplineBasis,
}

/// A stored day together with its spline data.
#[derive(Clone, Copy)]
pub struct BicubicDay<'a> {
    pub day: &'a DaySurface,
    pub data: &'a BicubicData,
}

impl BicubicData {
    pub fn new(day: &DaySurface, s_knots: Vec<f64>, a_basis: &SplineBasis) -> crate::Result<Self> {
        let (n_q, n_a) = (day.n_q, day.n_a);
        let n_s = day.n_nodes;
        let s_basis = SplineBasis::new(s_knots)?;
        let along_a = |y: &[f64]| {
            let mut m = vec![0.0; y.len()];
            m.par_chunks_mut(n_a)
                .zip(y.par_chunks(n_a))
                .for_each(|(m, y)| a_basis.second_derivatives(y, m));
            m
        };
        let m_a = along_a(&day.theta);
        let mut y_ss = vec![0.0; day.theta.len()];
        if n_s >= 2 {
            // Gather each (q, a) fibre across price nodes.
            let block = n_q * n_a;
            let fibres: Vec<(usize, Vec<f64>)> = (0..block)
                .into_par_iter()
                .map(|k| {
                    let y: Vec<f64> = (0..n_s).map(|j| day.theta[j * block + k]).collect();
                    let mut m = vec![0.0; n_s];
                    s_basis.second_derivatives(&y, &mut m);
                    (k, m)
                })
                .collect();
            for (k, m) in fibres {
                for (j, v) in m.into_iter().enumerate() {
                    y_ss[j * block + k] = v;
                }
            }
        }
        let m_a_ss = along_a(&y_ss);
        Ok(Self { m_a, y_ss, m_a_ss, s_basis })
    }
}

impl BicubicDay<'_> {
    /// Price weights for a query; the index is relative to the stored nodes.
    pub fn s_weights(&self, s: f64) -> SplineWeights {
        self.data.s_basis.weights(s)
    }

    /// Fill `out[j]` with the interpolated value at inventory row `j`.
    pub fn column(&self, ws: &SplineWeights, wa: &SplineWeights, out: &mut [f64]) {
        let (n_q, n_a) = (self.day.n_q, self.day.n_a);
        let block = n_q * n_a;
        let i = ws.index;
        let lo = i * block;
        let hi = (i + 1) * block;
        let theta = &self.day.theta;
        let d = self.data;
        for (j, o) in out.iter_mut().enumerate() {
            let r = j * n_a;
            let a = |base: usize, y: &[f64], m: &[f64]| {
                wa.apply(&y[base + r..base + r + n_a], &m[base + r..base + r + n_a])
            };
            let mut v = ws.w[0] * a(lo, theta, &d.m_a) + ws.w[1] * a(hi, theta, &d.m_a);
            if ws.w[2] != 0.0 || ws.w[3] != 0.0 {
                v += ws.w[2] * a(lo, &d.y_ss, &d.m_a_ss) + ws.w[3] * a(hi, &d.y_ss, &d.m_a_ss);
            }
            *o = v;
        }
    }

    /// Single-point evaluation.
    pub fn eval(&self, s: f64, a_basis: &SplineBasis, q: usize, a: f64) -> f64 {
        let ws = self.s_weights(s);
        let wa = a_basis.weights(a);
        let mut out = vec![0.0; self.day.n_q];
        self.column(&ws, &wa, &mut out);
        out[q]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::NaturalCubicSpline;

    fn surface(f: impl Fn(f64, f64, f64) -> f64, s: &[f64], q: &[f64], a: &[f64]) -> DaySurface {
        let mut day = DaySurface::new(1, 0, s.len(), q.len(), a.len());
        for (j, &sv) in s.iter().enumerate() {
            for (qi, &qv) in q.iter().enumerate() {
                for (ai, &av) in a.iter().enumerate() {
                    day.theta[(j * q.len() + qi) * a.len() + ai] = f(sv, qv, av);
                }
            }
        }
        day
    }

    #[test]
    fn reproduces_bilinear_functions() {
        let s: Vec<f64> = (0..7).map(|i| 40.0 + 0.6 * i as f64).collect();
        let a: Vec<f64> = (0..5).map(|i| 41.0 + 0.9 * i as f64).collect();
        let q = vec![0.0, 1.0, 2.0];
        let f = |s: f64, q: f64, a: f64| 3.0 * s - 2.0 * a + 0.5 * s * a + q;
        let day = surface(f, &s, &q, &a);
        let basis = SplineBasis::new(a.clone()).unwrap();
        let data = BicubicData::new(&day, s.clone(), &basis).unwrap();
        let bi = BicubicDay { day: &day, data: &data };
        for (sq, aq) in [(41.3, 42.2), (40.0, 41.0), (39.0, 46.5), (45.1, 40.0)] {
            for qi in 0..3 {
                let v = bi.eval(sq, &basis, qi, aq);
                assert!((v - f(sq, q[qi], aq)).abs() < 1e-9, "{sq} {aq}: {v}");
            }
        }
    }

    #[test]
    fn matches_nested_one_dimensional_splines() {
        let s: Vec<f64> = (0..6).map(|i| 40.0 + 0.6 * i as f64).collect();
        let a: Vec<f64> = (0..5).map(|i| 41.0 + 0.9 * i as f64).collect();
        let q = vec![0.0];
        let f = |s: f64, _q: f64, a: f64| (s * 0.3).sin() * (a * a * 0.01).exp();
        let day = surface(f, &s, &q, &a);
        let basis = SplineBasis::new(a.clone()).unwrap();
        let data = BicubicData::new(&day, s.clone(), &basis).unwrap();
        let bi = BicubicDay { day: &day, data: &data };
        let (sq, aq) = (41.7, 43.35);
        // A first, then S.
        let g: Vec<f64> = s
            .iter()
            .map(|&sv| {
                let row: Vec<f64> = a.iter().map(|&av| f(sv, 0.0, av)).collect();
                NaturalCubicSpline::new(a.clone(), row).unwrap().eval(aq)
            })
            .collect();
        let expected = NaturalCubicSpline::new(s.clone(), g).unwrap().eval(sq);
        assert!((bi.eval(sq, &basis, 0, aq) - expected).abs() < 1e-12);
    }
}
