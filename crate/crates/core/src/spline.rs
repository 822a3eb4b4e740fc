//! Not-a-knot cubic spline interpolation on strictly increasing knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise cubic interpolant stored as knots, values and second derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// Interpolant with not-a-knot end conditions. Two knots give a line and
    /// three knots the interpolating parabola.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "spline knots and values differ in length ({} vs {})",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::InvalidInput(
                "spline needs at least two knots".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "spline knots must be finite and strictly increasing".into(),
            ));
        }
        let m = second_derivatives(&x, &y);
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        let k = self.x.partition_point(|&xi| xi <= t);
        k.clamp(1, n - 1) - 1
    }

    fn pieces(&self, t: f64) -> (usize, f64, f64, f64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        (i, h, self.x[i + 1] - t, t - self.x[i])
    }

    /// Value at `t`; outside the knots the end cubics are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let (i, h, a, b) = self.pieces(t);
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        mi * a * a * a / (6.0 * h)
            + mj * b * b * b / (6.0 * h)
            + (self.y[i] / h - mi * h / 6.0) * a
            + (self.y[i + 1] / h - mj * h / 6.0) * b
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (i, h, a, b) = self.pieces(t);
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        -mi * a * a / (2.0 * h) + mj * b * b / (2.0 * h) - (self.y[i] / h - mi * h / 6.0)
            + (self.y[i + 1] / h - mj * h / 6.0)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let (i, h, a, b) = self.pieces(t);
        (self.m[i] * a + self.m[i + 1] * b) / h
    }

    /// Exact integral of the interpolant over the knot range.
    pub fn integral(&self) -> f64 {
        (0..self.x.len() - 1)
            .map(|i| {
                let h = self.x[i + 1] - self.x[i];
                0.5 * h * (self.y[i] + self.y[i + 1])
                    - h * h * h * (self.m[i] + self.m[i + 1]) / 24.0
            })
            .sum()
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson
/// slopes). Monotone data give a monotone interpolant and linear data are
/// reproduced exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        // same validation as the cubic spline
        CubicSpline::new(x.clone(), y.clone())?;
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..h.len()).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let n = x.len();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    fn pieces(&self, t: f64) -> (usize, f64, f64) {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        (i, h, (t - self.x[i]) / h)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, h, s) = self.pieces(t);
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[i]
            + (s3 - 2.0 * s2 + s) * h * self.d[i]
            + (-2.0 * s3 + 3.0 * s2) * self.y[i + 1]
            + (s3 - s2) * h * self.d[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (i, h, s) = self.pieces(t);
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) * (self.y[i] - self.y[i + 1]) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * self.d[i]
            + (3.0 * s2 - 2.0 * s) * self.d[i + 1]
    }
}

/// One-sided three-point end slope, limited to keep the end cubic monotone.
/// A sign change falls back to the end secant, so strictly monotone data
/// never get a zero end slope.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d0 == 0.0 {
        0.0
    } else if d.signum() != d0.signum() {
        d0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

fn second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        return vec![0.0; 2];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 3 {
        let c = 2.0 * (slope[1] - slope[0]) / (h[0] + h[1]);
        return vec![c; 3];
    }
    // interior unknowns m_1..m_{n-2}, with m_0 and m_{n-1} eliminated through
    // continuity of the third derivative at x_1 and x_{n-2}
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        sub[j] = h[i - 1];
        diag[j] = 2.0 * (h[i - 1] + h[i]);
        sup[j] = h[i];
        rhs[j] = 6.0 * (slope[i] - slope[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 * (h0 + h1) / h1;
    sup[0] -= h0 * h0 / h1;
    let (ha, hb) = (h[n - 3], h[n - 2]);
    diag[k - 1] += hb * (ha + hb) / ha;
    sub[k - 1] -= hb * hb / ha;

    // Thomas algorithm
    for j in 1..k {
        let w = sub[j] / diag[j - 1];
        diag[j] -= w * sup[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    let mut inner = vec![0.0; k];
    inner[k - 1] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        inner[j] = (rhs[j] - sup[j] * inner[j + 1]) / diag[j];
    }

    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&inner);
    m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
    m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
    m
}
