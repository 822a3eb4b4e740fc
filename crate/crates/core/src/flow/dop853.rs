//! Adaptive explicit Runge-Kutta integrator of order 8 with the 5(3) error
//! estimator of Dormand and Prince.
//!
//! After every accepted step a callback may modify the state in place (used
//! for constraint projection) or stop the integration.

use super::dop853_tableau::{A, B, C, E3, E5, STAGES};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub first_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            first_step: None,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// Returned by the post-step callback.
#[derive(Clone, Debug, PartialEq)]
pub enum Control {
    Continue,
    Stop(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    /// Step size fell below the resolution of the independent variable.
    StepTooSmall {
        t: f64,
        step: f64,
    },
    /// The right-hand side could not be evaluated even for tiny steps.
    Evaluation {
        t: f64,
        message: String,
    },
    TooManySteps {
        t: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub t: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub stopped: Option<String>,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    opts: &StepperOptions,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let scale: Vec<f64> = y0.iter().map(|y| opts.atol + y.abs() * opts.rtol).collect();
    let d0 = rms(y0.iter().zip(&scale).map(|(y, s)| y / s), n);
    let d1 = rms(f0.iter().zip(&scale).map(|(y, s)| y / s), n);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(opts.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * dir * d).collect();
    let mut f1 = vec![0.0; n];
    if f(t0 + h0 * dir, &y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let d2 = rms(
        f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| (a - b) / s),
        n,
    ) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction), updating `y`
/// in place. `after_step(t, y)` runs after each accepted step.
pub fn solve<F, P>(
    mut f: F,
    t0: f64,
    y: &mut [f64],
    t1: f64,
    opts: &StepperOptions,
    mut after_step: P,
) -> Result<Outcome, Failure>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
    P: FnMut(f64, &mut [f64]) -> Control,
{
    let n = y.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut out = Outcome {
        t,
        accepted: 0,
        rejected: 0,
        stopped: None,
    };
    if t1 == t0 {
        return Ok(out);
    }
    let mut k = vec![vec![0.0; n]; STAGES + 1];
    let mut fy = vec![0.0; n];
    f(t, y, &mut fy).map_err(|message| Failure::Evaluation { t, message })?;
    let mut h_abs = opts
        .first_step
        .unwrap_or_else(|| initial_step(&mut f, t0, y, &fy, dir, opts))
        .min((t1 - t0).abs());
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];

    while dir * (t1 - t) > 0.0 {
        if out.accepted + out.rejected >= opts.max_steps {
            return Err(Failure::TooManySteps { t });
        }
        let min_step = 10.0 * (next_after(t, dir) - t).abs();
        h_abs = h_abs.min(opts.max_step).max(min_step);
        let mut rejected_once = false;
        loop {
            if h_abs < min_step {
                return Err(Failure::StepTooSmall { t, step: h_abs });
            }
            let mut t_new = t + dir * h_abs;
            if dir * (t_new - t1) > 0.0 {
                t_new = t1;
            }
            let h = t_new - t;
            let ha = h.abs();

            // stages
            k[0].copy_from_slice(&fy);
            let mut eval_ok = true;
            for s in 1..STAGES {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = y[i] + h * acc;
                }
                if f(t + C[s] * h, &stage, &mut k[s]).is_err() {
                    eval_ok = false;
                    break;
                }
            }
            if eval_ok {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(STAGES) {
                        acc += B[j] * kj[i];
                    }
                    y_new[i] = y[i] + h * acc;
                }
                eval_ok = f(t_new, &y_new, &mut k[STAGES]).is_ok();
            }
            if !eval_ok {
                h_abs *= MIN_FACTOR;
                rejected_once = true;
                out.rejected += 1;
                continue;
            }

            let mut e5 = 0.0;
            let mut e3 = 0.0;
            for i in 0..n {
                let sc = opts.atol + y[i].abs().max(y_new[i].abs()) * opts.rtol;
                let mut a5 = 0.0;
                let mut a3 = 0.0;
                for j in 0..=STAGES {
                    a5 += E5[j] * k[j][i];
                    a3 += E3[j] * k[j][i];
                }
                e5 += (a5 / sc).powi(2);
                e3 += (a3 / sc).powi(2);
            }
            let err = if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                ha * e5 / (((e5 + 0.01 * e3) * n as f64).sqrt())
            };

            if err < 1.0 {
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                };
                if rejected_once {
                    factor = factor.min(1.0);
                }
                h_abs = ha * factor;
                t = t_new;
                y.copy_from_slice(&y_new);
                out.accepted += 1;
                out.t = t;
                match after_step(t, y) {
                    Control::Continue => {}
                    Control::Stop(reason) => {
                        out.stopped = Some(reason);
                        return Ok(out);
                    }
                }
                // the callback may have moved the state
                f(t, y, &mut fy).map_err(|message| Failure::Evaluation { t, message })?;
                break;
            } else {
                h_abs = ha * MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
                rejected_once = true;
                out.rejected += 1;
            }
        }
    }
    Ok(out)
}

fn next_after(t: f64, dir: f64) -> f64 {
    if t == 0.0 {
        return dir * f64::from_bits(1);
    }
    let bits = t.to_bits();
    let up = (t > 0.0) == (dir > 0.0);
    f64::from_bits(if up { bits + 1 } else { bits - 1 })
}
