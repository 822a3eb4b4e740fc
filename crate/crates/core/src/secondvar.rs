//! Second variation of the action along homothetic parabolic orbits.
//!
//! For the variation `ρ(t) φ(t) z` of the homothetic orbit `ρ(t) c`, with `z` a
//! unit eigenvector of `D∇̃U(c)` with eigenvalue `α`, the second variation is
//!
//! ```text
//! Q(φ; a, b) = ∫_a^b ρ² φ'² + α ρ^{-1} φ² dt,    ρ(t) = (9 U(c) / 2)^{1/3} t^{2/3}.
//! ```
//!
//! Its Euler-Lagrange equation reduces to `t² y'' + (4/3) t y' + (2ν/9) y = 0`
//! with `ν = -α / U(c)`.
//!
//! Profiles are sampled on a grid uniform in `log t`, which resolves the
//! logarithmic oscillations of the Euler-Lagrange solutions over long windows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::central::{CentralConfiguration, HomotheticOrbit};
use crate::error::{Error, Result};
use crate::flow::manifold::NewtonianSample;
use crate::geometry::{euclidean_hessian, Vec6};
use crate::linalg::{linear_fit, simpson};
use crate::spectra::{classify_nu, nontrivial_alphas, nu_parameter, tangent_modes};
use crate::spline::CubicSpline;

/// Smallest number of grid intervals of a profile.
pub const MIN_PROFILE_INTERVALS: usize = 64;
pub const DEFAULT_PROFILE_INTERVALS: usize = 4096;
/// Largest accepted ratio of the Richardson estimate to `|Q|`.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// `ρ(t) = (9 U(c) / 2)^{1/3} t^{2/3}`
pub fn rho(cc: &CentralConfiguration, t: f64) -> Result<f64> {
    HomotheticOrbit::new(cc.clone()).size(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicialData {
    pub nu: f64,
    /// `Δ = (1 - 8ν) / 9`
    pub discriminant: f64,
    #[serde(with = "root_pair")]
    pub roots: [Complex64; 2],
    /// `sqrt(8ν - 1) / 6` when `Δ < 0`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oscillation_rate: Option<f64>,
}

mod root_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64; 2], ser: S) -> Result<S::Ok, S::Error> {
        [[v[0].re, v[0].im], [v[1].re, v[1].im]].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[Complex64; 2], D::Error> {
        let [a, b] = <[[f64; 2]; 2]>::deserialize(de)?;
        Ok([Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1])])
    }
}

/// Roots of `r² + r/3 + 2ν/9 = 0`, larger real part (or positive imaginary
/// part) first.
pub fn indicial(nu: f64) -> IndicialData {
    let discriminant = (1.0 - 8.0 * nu) / 9.0;
    if discriminant < 0.0 {
        let w = (-discriminant).sqrt() / 2.0;
        IndicialData {
            nu,
            discriminant,
            roots: [
                Complex64::new(-1.0 / 6.0, w),
                Complex64::new(-1.0 / 6.0, -w),
            ],
            oscillation_rate: Some(w),
        }
    } else {
        let d = discriminant.sqrt() / 2.0;
        IndicialData {
            nu,
            discriminant,
            roots: [
                Complex64::new(-1.0 / 6.0 + d, 0.0),
                Complex64::new(-1.0 / 6.0 - d, 0.0),
            ],
            oscillation_rate: None,
        }
    }
}

/// Solution of `t² y'' + (4/3) t y' + (2ν/9) y = 0` with `y(a) = 0`,
/// `y'(a) = 1`, in closed form.
pub fn disconjugacy_solution(nu: f64, a: f64, t: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveTime(a));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let x = (t / a).ln();
    let ind = indicial(nu);
    Ok(match ind.oscillation_rate {
        Some(w) => a / w * (-x / 6.0).exp() * (w * x).sin(),
        None if ind.discriminant == 0.0 => a * (-x / 6.0).exp() * x,
        None => {
            let (r1, r2) = (ind.roots[0].re, ind.roots[1].re);
            a / (r1 - r2) * ((r1 * x).exp() - (r2 * x).exp())
        }
    })
}

/// Zeros of [`disconjugacy_solution`] in `(a, horizon]`, located on a
/// logarithmic scan and refined by bisection to `1e-12` relative.
pub fn conjugate_points(nu: f64, a: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveTime(a));
    }
    if !(horizon > a) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} must exceed a = {a}"
        )));
    }
    let Some(w) = indicial(nu).oscillation_rate else {
        return Ok(Vec::new());
    };
    // envelope-free part: sign of sin(w x)
    let f = |x: f64| (w * x).sin();
    let span = (horizon / a).ln();
    let dx = (std::f64::consts::PI / (8.0 * w)).min(span / 16.0);
    let mut out = Vec::new();
    let mut x0 = dx * 0.5;
    let mut f0 = f(x0);
    while x0 < span {
        let x1 = (x0 + dx).min(span);
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push(a * x0.exp());
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (x0, x1, f0);
            // bisect in t so the tolerance is relative in t
            while a * (hi.exp() - lo.exp()) > 1e-12 * a * lo.exp() {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(a * (0.5 * (lo + hi)).exp());
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(out)
}

/// A scalar variation profile `φ` on `[a, b]`, sampled at `t_k = a (b/a)^{k/N}`
/// with `φ(a) = φ(b) = 0`, together with the direction `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationProfile {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub phi: Vec<f64>,
    pub z_direction: Vec6,
}

impl VariationProfile {
    pub fn new(a: f64, b: f64, phi: Vec<f64>, z_direction: Vec6) -> Result<Self> {
        if !(a > 0.0) || !(b > a) || !b.is_finite() {
            return Err(Error::InvalidInput(format!(
                "profile window must satisfy 0 < a < b, got [{a}, {b}]"
            )));
        }
        let n = phi.len().saturating_sub(1);
        if n < MIN_PROFILE_INTERVALS || n % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "profile needs an even number >= {MIN_PROFILE_INTERVALS} of intervals, got {n}"
            )));
        }
        if phi[0] != 0.0 || phi[n] != 0.0 {
            return Err(Error::InvalidInput(
                "profile must vanish at both ends".into(),
            ));
        }
        if phi.iter().chain(&z_direction).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("profile has non-finite values".into()));
        }
        Ok(Self {
            a,
            b,
            n,
            phi,
            z_direction,
        })
    }

    /// Sample `f` on the grid; end values within `1e-12 max|φ|` of zero are
    /// set to zero exactly.
    pub fn from_fn(
        a: f64,
        b: f64,
        n: usize,
        z_direction: Vec6,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(a > 0.0) || !(b > a) {
            return Err(Error::InvalidInput(format!(
                "profile window must satisfy 0 < a < b, got [{a}, {b}]"
            )));
        }
        let span = (b / a).ln();
        let mut phi: Vec<f64> = (0..=n)
            .map(|k| f(a * (span * k as f64 / n as f64).exp()))
            .collect();
        let scale = phi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for end in [0, n] {
            if phi[end].abs() <= 1e-12 * scale {
                phi[end] = 0.0;
            }
        }
        Self::new(a, b, phi, z_direction)
    }

    /// Sine series `Σ c_j sin(j π log(t/a) / log(b/a))`.
    pub fn sine_series(
        a: f64,
        b: f64,
        n: usize,
        z_direction: Vec6,
        coeffs: &[f64],
    ) -> Result<Self> {
        let span = (b / a).ln();
        Self::from_fn(a, b, n, z_direction, |t| {
            let x = (t / a).ln() / span;
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum()
        })
    }

    /// `φ_λ(t) = φ(t / λ)` on `[λa, λb]`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            a: lambda * self.a,
            b: lambda * self.b,
            ..self.clone()
        })
    }

    pub fn times(&self) -> Vec<f64> {
        let span = (self.b / self.a).ln();
        (0..=self.n)
            .map(|k| self.a * (span * k as f64 / self.n as f64).exp())
            .collect()
    }

    fn spline(&self) -> CubicSpline {
        let span = (self.b / self.a).ln();
        let x: Vec<f64> = (0..=self.n)
            .map(|k| span * k as f64 / self.n as f64)
            .collect();
        CubicSpline::new(x, self.phi.clone()).expect("profile grid is increasing")
    }

    /// Integrate `g(t, φ, φ')` over `[a, b]` with Simpson on `N` and `2N`
    /// intervals of `log t`; returns the fine value and the Richardson
    /// estimate `|Q_2N - Q_N| / 15`.
    fn integrate(&self, g: impl Fn(f64, f64, f64) -> Result<f64>) -> Result<(f64, f64)> {
        let sp = self.spline();
        let span = (self.b / self.a).ln();
        let vals = |m: usize| -> Result<(f64, f64)> {
            let h = span / m as f64;
            let v: Vec<f64> = (0..=m)
                .map(|k| {
                    let x = h * k as f64;
                    let t = self.a * x.exp();
                    // dt = t dx and dφ/dt = φ_x / t
                    Ok(g(t, sp.eval(x), sp.derivative(x) / t)? * t)
                })
                .collect::<Result<_>>()?;
            Ok((simpson(&v, h), h))
        };
        let (coarse, _) = vals(self.n)?;
        let (fine, _) = vals(2 * self.n)?;
        Ok((fine, (fine - coarse).abs() / 15.0))
    }
}

/// A quadrature value with its Richardson error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    #[serde(rename = "Q")]
    pub value: f64,
    pub quadrature_error: f64,
}

fn checked(value: f64, estimate: f64) -> Result<QValue> {
    if estimate > QUADRATURE_TOLERANCE * value.abs() {
        return Err(Error::Quadrature { estimate, value });
    }
    Ok(QValue {
        value,
        quadrature_error: estimate,
    })
}

/// `Q(φ; a, b) = ∫ ρ² φ'² + α ρ^{-1} φ² dt`.
pub fn q_form(profile: &VariationProfile, cc: &CentralConfiguration, alpha: f64) -> Result<QValue> {
    let orbit = HomotheticOrbit::new(cc.clone());
    let (value, err) = profile.integrate(|t, phi, dphi| {
        let r = orbit.size(t)?;
        Ok(r * r * dphi * dphi + alpha * phi * phi / r)
    })?;
    checked(value, err)
}

/// Profile and its value, as written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    #[serde(flatten)]
    pub profile: VariationProfile,
    pub alpha: f64,
    #[serde(flatten)]
    pub q: QValue,
}

/// `φ(t) = (t/a)^{-1/6} sin(ω log(t/a) / 2)` on `[a, a e^{2π/ω}]`, whose window
/// contains the conjugate point `a e^{π/ω}` in its interior.
pub fn negative_profile(nu: f64, a: f64, n: usize, z_direction: Vec6) -> Result<VariationProfile> {
    let w = indicial(nu)
        .oscillation_rate
        .ok_or(Error::NotSpiraling { nu })?;
    let b = a * (2.0 * std::f64::consts::PI / w).exp();
    VariationProfile::from_fn(a, b, n, z_direction, |t| {
        let x = (t / a).ln();
        (-x / 6.0).exp() * (0.5 * w * x).sin()
    })
}

/// Closed-form value of `Q` on [`negative_profile`] with `α = -ν U(c)`:
/// `-(3π/4) ω C² a^{1/3}`, `C = (9U/2)^{1/3}`.
pub fn negative_profile_value(cc: &CentralConfiguration, nu: f64, a: f64) -> Result<f64> {
    let w = indicial(nu)
        .oscillation_rate
        .ok_or(Error::NotSpiraling { nu })?;
    let c = (4.5 * cc.potential).cbrt();
    Ok(-0.75 * std::f64::consts::PI * w * c * c * a.cbrt())
}

/// Negative direction of the second variation at a spiraling Euler
/// configuration, on the window starting at `a` with `n` grid intervals.
pub fn negative_direction(
    cc: &CentralConfiguration,
    a: f64,
    n: usize,
) -> Result<(VariationProfile, QValue)> {
    let middle = cc.kind.euler_middle().ok_or_else(|| {
        Error::InvalidInput("negative directions exist only at Euler configurations".into())
    })?;
    let nu = nu_parameter(&cc.masses, middle)?;
    if !classify_nu(nu)? {
        return Err(Error::NotSpiraling { nu });
    }
    let [_, z1, _] = tangent_modes(cc)?;
    let (alpha1, _) = nontrivial_alphas(cc)?;
    let profile = negative_profile(nu, a, n, z1.direction)?;
    let q = q_form(&profile, cc, alpha1)?;
    Ok((profile, q))
}

/// `|Q(φ_λ; λa, λb) - λ^{1/3} Q(φ; a, b)| / |λ^{1/3} Q(φ; a, b)|`
pub fn scaling_identity_check(
    profile: &VariationProfile,
    lambda: f64,
    cc: &CentralConfiguration,
    alpha: f64,
) -> Result<f64> {
    if !(lambda >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "scale must be at least 1, got {lambda}"
        )));
    }
    let base = q_form(profile, cc, alpha)?.value * lambda.cbrt();
    let scaled = q_form(&profile.scaled(lambda)?, cc, alpha)?.value;
    Ok(if base == 0.0 {
        scaled.abs()
    } else {
        (scaled - base).abs() / base.abs()
    })
}

/// `β(t) = q(t) / ρ(t) - c` interpolated from Newtonian samples.
struct Deviation {
    splines: Vec<CubicSpline>,
    t_min: f64,
    t_max: f64,
}

impl Deviation {
    fn new(samples: &[NewtonianSample], cc: &CentralConfiguration) -> Result<Self> {
        let orbit = HomotheticOrbit::new(cc.clone());
        let mut x = Vec::new();
        let mut beta: Vec<Vec<f64>> = vec![Vec::new(); 6];
        let mut sorted: Vec<&NewtonianSample> = samples.iter().filter(|s| s.t > 0.0).collect();
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        for s in sorted {
            let lt = s.t.ln();
            if x.last().is_some_and(|&l| lt <= l) {
                continue;
            }
            let r = orbit.size(s.t)?;
            x.push(lt);
            for k in 0..6 {
                beta[k].push(s.q[k] / r - cc.s.s[k]);
            }
        }
        if x.len() < 4 {
            return Err(Error::InvalidInput(
                "trajectory has fewer than four samples with t > 0".into(),
            ));
        }
        let (t_min, t_max) = (x[0].exp(), x[x.len() - 1].exp());
        let splines = beta
            .into_iter()
            .map(|b| CubicSpline::new(x.clone(), b))
            .collect::<Result<_>>()?;
        Ok(Self {
            splines,
            t_min,
            t_max,
        })
    }

    fn at(&self, t: f64) -> Vec6 {
        let x = t.ln();
        std::array::from_fn(|k| self.splines[k].eval(x))
    }

    fn covers(&self, a: f64, b: f64) -> Result<()> {
        // allow rounding at the ends of the sample range
        let slack = 1e-12;
        if a < self.t_min * (1.0 - slack) || b > self.t_max * (1.0 + slack) {
            return Err(Error::Window {
                a,
                b,
                t_min: self.t_min,
                t_max: self.t_max,
            });
        }
        Ok(())
    }
}

/// `Q`, the correction `∫ (D²U(c+β) - D²U(c))(z, z) φ² ρ^{-1} dt` and their
/// sum along an orbit `ρ(t)(c + β(t))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSecondVariation {
    pub q: QValue,
    pub correction: f64,
    pub correction_error: f64,
    pub value: f64,
    pub quadrature_error: f64,
}

fn along(
    dev: &Deviation,
    profile: &VariationProfile,
    cc: &CentralConfiguration,
    alpha: f64,
) -> Result<OrbitSecondVariation> {
    dev.covers(profile.a, profile.b)?;
    let q = q_form(profile, cc, alpha)?;
    let orbit = HomotheticOrbit::new(cc.clone());
    let m = &cc.masses;
    let z = nalgebra::Vector6::from_column_slice(&profile.z_direction);
    let h0 = euclidean_hessian(cc.shape(), m)?;
    let base = (z.transpose() * h0 * z)[(0, 0)];
    let (correction, correction_error) = profile.integrate(|t, phi, _| {
        let beta = dev.at(t);
        let x: Vec6 = std::array::from_fn(|k| cc.s.s[k] + beta[k]);
        let h = euclidean_hessian(&x, m)?;
        let d = (z.transpose() * h * z)[(0, 0)] - base;
        Ok(d * phi * phi / orbit.size(t)?)
    })?;
    Ok(OrbitSecondVariation {
        q,
        correction,
        correction_error,
        value: q.value + correction,
        quadrature_error: q.quadrature_error + correction_error,
    })
}

/// Second variation along the orbit through the given Newtonian samples,
/// which must cover the profile window.
pub fn second_variation_along_orbit(
    samples: &[NewtonianSample],
    cc: &CentralConfiguration,
    profile: &VariationProfile,
    alpha: f64,
) -> Result<OrbitSecondVariation> {
    let dev = Deviation::new(samples, cc)?;
    along(&dev, profile, cc, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledEntry {
    pub lambda: f64,
    pub window: (f64, f64),
    #[serde(flatten)]
    pub result: OrbitSecondVariation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingScan {
    pub entries: Vec<ScaledEntry>,
    /// First `λ` at which the value is negative with `|value|` above ten
    /// times its quadrature error.
    pub threshold: Option<f64>,
    /// Slope of `log(|correction| / λ^{1/3})` against `log(λa)`; the division
    /// removes the scaling of `Q` so the slope measures the decay of `β`.
    pub correction_decay_power: Option<f64>,
}

/// Evaluate the second variation on `φ_λ` for `λ = 1, 2, 4, …` up to
/// `max_lambda` while the window stays inside the samples.
pub fn scale_until_negative(
    samples: &[NewtonianSample],
    cc: &CentralConfiguration,
    profile: &VariationProfile,
    alpha: f64,
    max_lambda: f64,
) -> Result<ScalingScan> {
    let dev = Deviation::new(samples, cc)?;
    dev.covers(profile.a, profile.b)?;
    let mut entries = Vec::new();
    let mut threshold = None;
    let mut lambda = 1.0;
    while lambda <= max_lambda {
        let p = profile.scaled(lambda)?;
        if dev.covers(p.a, p.b).is_err() {
            break;
        }
        let result = along(&dev, &p, cc, alpha)?;
        if threshold.is_none()
            && result.value < 0.0
            && result.value.abs() > 10.0 * result.quadrature_error
        {
            threshold = Some(lambda);
        }
        entries.push(ScaledEntry {
            lambda,
            window: (p.a, p.b),
            result,
        });
        lambda *= 2.0;
    }
    let pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.result.correction != 0.0)
        .map(|e| {
            (
                e.window.0.ln(),
                (e.result.correction.abs() / e.lambda.cbrt()).ln(),
            )
        })
        .collect();
    let correction_decay_power = (pts.len() >= 3).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&x, &y).0
    });
    Ok(ScalingScan {
        entries,
        threshold,
        correction_decay_power,
    })
}
