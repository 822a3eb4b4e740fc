//! The five central configurations of three bodies and their homothetic
//! parabolic orbits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, mass_norm, potential, reflect, remove_center_of_mass, scale, sphere_gradient, MassTriple,
    NormalizedConfiguration, Vec6,
};

const QUINTIC_BRACKET: (f64, f64) = (1e-6, 1e3);
const BISECTION_WIDTH: f64 = 1e-12;
const NEWTON_POLISH_STEPS: usize = 3;

/// Which of the five central configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CcKind {
    LagrangePositive,
    LagrangeNegative,
    /// Collinear configuration with the given body (1, 2 or 3) in the middle.
    Euler(usize),
}

impl CcKind {
    pub const ALL: [CcKind; 5] = [
        CcKind::LagrangePositive,
        CcKind::LagrangeNegative,
        CcKind::Euler(1),
        CcKind::Euler(2),
        CcKind::Euler(3),
    ];

    pub fn is_lagrange(&self) -> bool {
        matches!(self, CcKind::LagrangePositive | CcKind::LagrangeNegative)
    }

    pub fn euler_middle(&self) -> Option<usize> {
        match self {
            CcKind::Euler(k) => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for CcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CcKind::LagrangePositive => write!(f, "lagrange+"),
            CcKind::LagrangeNegative => write!(f, "lagrange-"),
            CcKind::Euler(k) => write!(f, "euler{k}"),
        }
    }
}

impl FromStr for CcKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lagrange+" | "lagrange" | "lagrange_positive" => Ok(CcKind::LagrangePositive),
            "lagrange-" | "lagrange_negative" => Ok(CcKind::LagrangeNegative),
            "euler1" => Ok(CcKind::Euler(1)),
            "euler2" => Ok(CcKind::Euler(2)),
            "euler3" => Ok(CcKind::Euler(3)),
            other => Err(Error::InvalidInput(format!(
                "unknown central configuration '{other}'"
            ))),
        }
    }
}

impl Serialize for CcKind {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CcKind {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Orientation of a labelled equilateral triangle, by the sign of
/// `(s2 - s1) x (s3 - s1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Positive,
    Negative,
}

/// A normalized central configuration: `grad_m U(s) + U(s) s = 0`, `I(s) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralConfiguration {
    pub kind: CcKind,
    pub masses: MassTriple,
    pub s: NormalizedConfiguration,
    /// `U(s)`
    #[serde(rename = "U")]
    pub potential: f64,
    /// Multiplier in `grad_m U(s) + lambda s = 0`; equals `U(s)`.
    pub lambda: f64,
    /// Positive root of the Euler quintic, for collinear kinds.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub euler_root: Option<f64>,
    /// Mass-metric norm of the sphere gradient at `s`.
    pub residual: f64,
}

impl CentralConfiguration {
    fn from_shape(
        kind: CcKind,
        raw: &Vec6,
        m: &MassTriple,
        euler_root: Option<f64>,
    ) -> Result<Self> {
        let s = NormalizedConfiguration::project(raw, m)?;
        let potential = potential(&s.s, m)?;
        let residual = mass_norm(&sphere_gradient(&s.s, m)?, m);
        Ok(Self {
            kind,
            masses: *m,
            s,
            potential,
            lambda: potential,
            euler_root,
            residual,
        })
    }

    pub fn shape(&self) -> &Vec6 {
        &self.s.s
    }

    /// `v0 = sqrt(2 U(s))`, the positive restpoint value of `v`.
    pub fn v0(&self) -> f64 {
        (2.0 * self.potential).sqrt()
    }
}

/// Equilateral central configuration with the requested orientation.
pub fn lagrange(m: &MassTriple, orientation: Orientation) -> CentralConfiguration {
    let h = 3f64.sqrt() / 2.0;
    let mut raw = [0.0, 0.0, 1.0, 0.0, 0.5, h];
    let kind = match orientation {
        Orientation::Positive => CcKind::LagrangePositive,
        Orientation::Negative => {
            raw = reflect(&raw);
            CcKind::LagrangeNegative
        }
    };
    CentralConfiguration::from_shape(kind, &raw, m, None)
        .expect("an equilateral triangle is never singular")
}

/// Body indices (zero based) occupying the slots `(left, middle, right)` of the
/// collinear configuration with body `middle` (one based) between the others.
/// The outer bodies are ordered by index.
pub fn euler_slots(middle: usize) -> Result<[usize; 3]> {
    match middle {
        1 => Ok([1, 0, 2]),
        2 => Ok([0, 1, 2]),
        3 => Ok([0, 2, 1]),
        _ => Err(Error::InvalidInput(format!(
            "middle body must be 1, 2 or 3, got {middle}"
        ))),
    }
}

/// Coefficients `g_0..g_5` (ascending powers) of the Euler quintic for masses
/// `(a, b, c)` in the slots `(left, middle, right)`.
pub fn euler_quintic_coefficients(a: f64, b: f64, c: f64) -> [f64; 6] {
    [
        -(a + b),
        -(3.0 * a + 2.0 * b),
        -(3.0 * a + b),
        b + 3.0 * c,
        2.0 * b + 3.0 * c,
        b + c,
    ]
}

fn horner(coef: &[f64; 6], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coef.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Unique positive root of the Euler quintic for the given middle body.
///
/// The root is the ratio `|s_middle - s_left| / |s_right - s_middle|`.
pub fn euler_quintic_root(m: &MassTriple, middle: usize) -> Result<f64> {
    let slots = euler_slots(middle)?;
    let coef = euler_quintic_coefficients(m.get(slots[0]), m.get(slots[1]), m.get(slots[2]));
    let (mut lo, mut hi) = QUINTIC_BRACKET;
    let (glo, ghi) = (horner(&coef, lo).0, horner(&coef, hi).0);
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Convergence(format!(
            "Euler quintic not bracketed: g({lo}) = {glo}, g({hi}) = {ghi}"
        )));
    }
    let mut iterations = 0;
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if horner(&coef, mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Convergence("Euler quintic bisection stalled".into()));
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..NEWTON_POLISH_STEPS {
        let (g, dg) = horner(&coef, r);
        if dg == 0.0 {
            break;
        }
        let next = r - g / dg;
        // stay inside the last bracket
        if next > lo - BISECTION_WIDTH && next < hi + BISECTION_WIDTH {
            r = next;
        }
    }
    let scale_g: f64 = coef
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * r.powi(k as i32))
        .sum();
    let g = horner(&coef, r).0;
    if g.abs() > 1e-13 * scale_g {
        return Err(Error::Convergence(format!(
            "Euler quintic residual {g:e} at r = {r}"
        )));
    }
    Ok(r)
}

/// Collinear central configuration with body `middle` (1, 2 or 3) between the
/// other two, placed on the x-axis.
pub fn euler(m: &MassTriple, middle: usize) -> Result<CentralConfiguration> {
    let slots = euler_slots(middle)?;
    let r = euler_quintic_root(m, middle)?;
    let x = [0.0, r, 1.0 + r];
    let mut raw = [0.0; 6];
    for (slot, &body) in slots.iter().enumerate() {
        raw[2 * body] = x[slot];
    }
    let raw = remove_center_of_mass(&raw, m);
    CentralConfiguration::from_shape(CcKind::Euler(middle), &raw, m, Some(r))
}

pub fn central_configuration(m: &MassTriple, kind: CcKind) -> Result<CentralConfiguration> {
    match kind {
        CcKind::LagrangePositive => Ok(lagrange(m, Orientation::Positive)),
        CcKind::LagrangeNegative => Ok(lagrange(m, Orientation::Negative)),
        CcKind::Euler(k) => euler(m, k),
    }
}

/// `[Lagrange+, Lagrange-, Euler(1), Euler(2), Euler(3)]`.
pub fn all_central_configurations(m: &MassTriple) -> Result<Vec<CentralConfiguration>> {
    CcKind::ALL
        .iter()
        .map(|&k| central_configuration(m, k))
        .collect()
}

/// The zero-energy homothetic solution `gamma(t) = (9/2 U(c))^{1/3} t^{2/3} c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotheticOrbit {
    pub cc: CentralConfiguration,
    pub scale_coefficient: f64,
}

impl HomotheticOrbit {
    pub fn new(cc: CentralConfiguration) -> Self {
        let scale_coefficient = (4.5 * cc.potential).cbrt();
        Self {
            cc,
            scale_coefficient,
        }
    }

    /// Size `rho(t) = r(gamma(t))`.
    pub fn size(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        Ok(self.scale_coefficient * t.powf(2.0 / 3.0))
    }

    /// Inverse of [`HomotheticOrbit::size`].
    pub fn time_at_size(&self, r: f64) -> f64 {
        (r / self.scale_coefficient).powf(1.5)
    }

    pub fn position(&self, t: f64) -> Result<geometry::Configuration> {
        Ok(geometry::Configuration(scale(
            self.cc.shape(),
            self.size(t)?,
        )))
    }

    pub fn velocity(&self, t: f64) -> Result<geometry::Velocity> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveTime(t));
        }
        let f = 2.0 / 3.0 * self.scale_coefficient * t.powf(-1.0 / 3.0);
        Ok(geometry::Velocity(scale(self.cc.shape(), f)))
    }
}

/// Position on the homothetic orbit of `orbit` at time `t`.
pub fn homothetic_position(orbit: &HomotheticOrbit, t: f64) -> Result<geometry::Configuration> {
    orbit.position(t)
}
