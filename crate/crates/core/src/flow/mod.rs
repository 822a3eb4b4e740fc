//! The McGehee blown-up three-body flow.
//!
//! In the collision chart the state is `(r, s, z)` with `r = sqrt(I(q))`,
//! `s = q / r` and `z = r^{1/2} q'`; the rescaled time satisfies
//! `dt = r^{3/2} dτ` and
//!
//! ```text
//! r' = v r,   s' = z - v s,   z' = ∇_m U(s) + v z / 2,   v = <s, z>_m.
//! ```
//!
//! The chart at infinity uses `u = 1/r` with `u' = -v u` and the same `(s, z)`
//! equations; there `dt = u^{-3/2} dτ`. Energy satisfies
//! `|z|²/2 - U(s) = r h`, so the infinity chart is restricted to `h = 0`.

mod dop853_tableau;

pub mod dop853;
pub mod manifold;
pub mod symplectic;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::central::CentralConfiguration;
use crate::error::{Error, Result};
use crate::geometry::{
    center_of_mass_moment, grad_potential, hessian_potential, mass_dot, min_distance, potential,
    remove_center_of_mass, MassTriple, NormalizedConfiguration, Vec6,
};
use crate::spectra::{format_f64, Sign};

use dop853::{Control, Failure, StepperOptions};

/// Dimension of the blown-up state `(radial, s, z)`.
pub const STATE_DIM: usize = 13;

/// A tangent vector `(δradial, δs, δz)`.
pub type Tangent = [f64; STATE_DIM];

pub type Jacobian = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Largest decrease of `v` between consecutive samples not counted as a
/// monotonicity violation.
pub const V_MONOTONICITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Chart {
    /// Collision chart, radial coordinate `r`.
    R,
    /// Chart at infinity, radial coordinate `u = 1/r`.
    U,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chart::R => "r",
            Chart::U => "u",
        })
    }
}

impl FromStr for Chart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "collision" => Ok(Chart::R),
            "u" | "infinity" => Ok(Chart::U),
            other => Err(Error::InvalidInput(format!("unknown chart '{other}'"))),
        }
    }
}

impl Serialize for Chart {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chart {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(de)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// `|I(s) - 1|`
    pub sphere: f64,
    /// Largest component of `Σ m_i s_i`.
    pub com_s: f64,
    /// Largest component of `Σ m_i z_i`.
    pub com_z: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.sphere.max(self.com_s).max(self.com_z)
    }
}

/// A point of the blown-up phase space in one of the two charts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlownUpState {
    pub chart: Chart,
    pub radial: f64,
    pub s: NormalizedConfiguration,
    pub z: Vec6,
    pub h: f64,
    pub masses: MassTriple,
}

impl BlownUpState {
    pub fn new(
        chart: Chart,
        radial: f64,
        s: Vec6,
        z: Vec6,
        h: f64,
        masses: MassTriple,
    ) -> Result<Self> {
        if !(radial >= 0.0) || !radial.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radial coordinate must be finite and >= 0, got {radial}"
            )));
        }
        if s.iter().chain(&z).any(|x| !x.is_finite()) || !h.is_finite() {
            return Err(Error::InvalidInput(
                "state has non-finite components".into(),
            ));
        }
        if chart == Chart::U && h != 0.0 {
            return Err(Error::InvalidInput(
                "the chart at infinity requires zero energy".into(),
            ));
        }
        Ok(Self {
            chart,
            radial,
            s: NormalizedConfiguration::from_raw(s, &masses),
            z,
            h,
            masses,
        })
    }

    /// Blow up a Newtonian state `(q, q')`; `q` must be centered.
    pub fn from_newtonian(
        q: &Vec6,
        qdot: &Vec6,
        masses: &MassTriple,
        chart: Chart,
    ) -> Result<Self> {
        let (r, s) = crate::geometry::normalize(q, masses)?;
        let z: Vec6 = std::array::from_fn(|k| r.sqrt() * qdot[k]);
        let h = (0.5 * mass_dot(qdot, qdot, masses) - potential(q, masses)?).max(f64::MIN);
        let radial = match chart {
            Chart::R => r,
            Chart::U => 1.0 / r,
        };
        let h = if chart == Chart::U { 0.0 } else { h };
        Self::new(chart, radial, s.s, z, h, *masses)
    }

    /// `v = <s, z>_m`
    pub fn v(&self) -> f64 {
        mass_dot(&self.s.s, &self.z, &self.masses)
    }

    /// Size `r` of the configuration (infinite at `u = 0`).
    pub fn r(&self) -> f64 {
        match self.chart {
            Chart::R => self.radial,
            Chart::U => 1.0 / self.radial,
        }
    }

    /// `|z|²/2 - U(s) - r h`, or `|z|²/2 - U(s)` in the chart at infinity.
    pub fn energy_residual(&self) -> Result<f64> {
        let base =
            0.5 * mass_dot(&self.z, &self.z, &self.masses) - potential(&self.s.s, &self.masses)?;
        Ok(match self.chart {
            Chart::R => base - self.radial * self.h,
            Chart::U => base,
        })
    }

    pub fn constraint_residuals(&self) -> ConstraintResiduals {
        let cs = center_of_mass_moment(&self.s.s, &self.masses);
        let cz = center_of_mass_moment(&self.z, &self.masses);
        ConstraintResiduals {
            sphere: (mass_dot(&self.s.s, &self.s.s, &self.masses) - 1.0).abs(),
            com_s: cs[0].abs().max(cs[1].abs()),
            com_z: cz[0].abs().max(cz[1].abs()),
        }
    }

    pub fn to_array(&self) -> Tangent {
        let mut y = [0.0; STATE_DIM];
        y[0] = self.radial;
        y[1..7].copy_from_slice(&self.s.s);
        y[7..13].copy_from_slice(&self.z);
        y
    }

    pub fn from_slice(chart: Chart, h: f64, masses: MassTriple, y: &[f64]) -> Self {
        let s: Vec6 = std::array::from_fn(|k| y[1 + k]);
        let z: Vec6 = std::array::from_fn(|k| y[7 + k]);
        Self {
            chart,
            radial: y[0],
            s: NormalizedConfiguration::from_raw(s, &masses),
            z,
            h,
            masses,
        }
    }

    /// Newtonian position `q = r s` and velocity `q' = r^{-1/2} z`.
    pub fn newtonian(&self) -> (Vec6, Vec6) {
        let r = self.r();
        (
            std::array::from_fn(|k| r * self.s.s[k]),
            std::array::from_fn(|k| self.z[k] / r.sqrt()),
        )
    }

    /// Project onto `I(s) = 1`, `Σ m_i s_i = 0`, `Σ m_i z_i = 0`.
    pub fn projected(&self) -> Result<Self> {
        let s = NormalizedConfiguration::project(&self.s.s, &self.masses)?;
        let z = remove_center_of_mass(&self.z, &self.masses);
        Ok(Self { s, z, ..*self })
    }
}

fn rhs_into(chart: Chart, m: &MassTriple, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let s: Vec6 = std::array::from_fn(|k| y[1 + k]);
    let z: Vec6 = std::array::from_fn(|k| y[7 + k]);
    let v = mass_dot(&s, &z, m);
    let g = grad_potential(&s, m)?;
    dy[0] = match chart {
        Chart::R => v * y[0],
        Chart::U => -v * y[0],
    };
    for k in 0..6 {
        dy[1 + k] = z[k] - v * s[k];
        dy[7 + k] = g[k] + 0.5 * v * z[k];
    }
    Ok(())
}

/// `(radial', s', z')` at the given state.
pub fn vector_field(state: &BlownUpState) -> Result<Tangent> {
    let mut dy = [0.0; STATE_DIM];
    rhs_into(state.chart, &state.masses, &state.to_array(), &mut dy)?;
    Ok(dy)
}

/// `dv/dτ = |z|²/2 - v²/2 + r h` (zero energy in the chart at infinity).
pub fn v_derivative(state: &BlownUpState) -> f64 {
    let z2 = mass_dot(&state.z, &state.z, &state.masses);
    let v = state.v();
    let rh = match state.chart {
        Chart::R => state.radial * state.h,
        Chart::U => 0.0,
    };
    0.5 * (z2 - v * v) + rh
}

fn jacobian_of(chart: Chart, m: &MassTriple, y: &[f64]) -> Result<Jacobian> {
    let s: Vec6 = std::array::from_fn(|k| y[1 + k]);
    let z: Vec6 = std::array::from_fn(|k| y[7 + k]);
    let radial = y[0];
    let v = mass_dot(&s, &z, m);
    let d = hessian_potential(&s, m)?;
    let mz: Vec6 = std::array::from_fn(|k| m.coord_mass(k) * z[k]);
    let ms: Vec6 = std::array::from_fn(|k| m.coord_mass(k) * s[k]);
    let sign = match chart {
        Chart::R => 1.0,
        Chart::U => -1.0,
    };
    let mut j = Jacobian::zeros();
    j[(0, 0)] = sign * v;
    for k in 0..6 {
        j[(0, 1 + k)] = sign * radial * mz[k];
        j[(0, 7 + k)] = sign * radial * ms[k];
    }
    for i in 0..6 {
        for k in 0..6 {
            let id = if i == k { 1.0 } else { 0.0 };
            j[(1 + i, 1 + k)] = -v * id - s[i] * mz[k];
            j[(1 + i, 7 + k)] = id - s[i] * ms[k];
            j[(7 + i, 1 + k)] = d[(i, k)] + 0.5 * z[i] * mz[k];
            j[(7 + i, 7 + k)] = 0.5 * v * id + 0.5 * z[i] * ms[k];
        }
    }
    Ok(j)
}

/// Analytic Jacobian of [`vector_field`].
pub fn jacobian(state: &BlownUpState) -> Result<Jacobian> {
    jacobian_of(state.chart, &state.masses, &state.to_array())
}

/// Linearized energy `δ(|z|²/2 - U(s)) - h δr`; zero for tangents of an energy
/// level.
pub fn energy_differential(state: &BlownUpState, a: &Tangent) -> Result<f64> {
    let m = &state.masses;
    let g = grad_potential(&state.s.s, m)?;
    let ds: Vec6 = std::array::from_fn(|k| a[1 + k]);
    let dz: Vec6 = std::array::from_fn(|k| a[7 + k]);
    let dr = match state.chart {
        Chart::R => state.h * a[0],
        Chart::U => 0.0,
    };
    Ok(mass_dot(&state.z, &dz, m) - mass_dot(&g, &ds, m) - dr)
}

/// Largest violation of the linearized constraints
/// `Σ m_i δs_i = 0`, `<s, δs>_m = 0`, `Σ m_i δz_i = 0`.
pub fn tangent_constraint_residual(state: &BlownUpState, a: &Tangent) -> f64 {
    let m = &state.masses;
    let ds: Vec6 = std::array::from_fn(|k| a[1 + k]);
    let dz: Vec6 = std::array::from_fn(|k| a[7 + k]);
    let cs = center_of_mass_moment(&ds, m);
    let cz = center_of_mass_moment(&dz, m);
    [cs[0], cs[1], cz[0], cz[1], mass_dot(&state.s.s, &ds, m)]
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Project a tangent onto the linearized constraints and, when `energy` is
/// set, onto the tangent space of the energy level by adjusting `δz` along
/// `z`.
pub fn project_tangent(state: &BlownUpState, a: &Tangent, energy: bool) -> Result<Tangent> {
    let m = &state.masses;
    let s = &state.s.s;
    let ds: Vec6 = remove_center_of_mass(&std::array::from_fn(|k| a[1 + k]), m);
    let c = mass_dot(s, &ds, m) / mass_dot(s, s, m);
    let ds: Vec6 = std::array::from_fn(|k| ds[k] - c * s[k]);
    let mut dz: Vec6 = remove_center_of_mass(&std::array::from_fn(|k| a[7 + k]), m);
    let mut out = [0.0; STATE_DIM];
    out[0] = a[0];
    out[1..7].copy_from_slice(&ds);
    out[7..13].copy_from_slice(&dz);
    if energy {
        let z2 = mass_dot(&state.z, &state.z, m);
        if z2 == 0.0 {
            return Err(Error::InvalidInput(
                "cannot adjust a tangent along z = 0".into(),
            ));
        }
        let defect = energy_differential(state, &out)?;
        for k in 0..6 {
            dz[k] -= defect / z2 * state.z[k];
        }
        out[7..13].copy_from_slice(&dz);
    }
    Ok(out)
}

/// Restpoint `(0, c, v0 c)` with `v0 = ±sqrt(2 U(c))` at collision or at
/// infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestpointState {
    pub cc: CentralConfiguration,
    pub sign: Sign,
    pub at_infinity: bool,
    pub state: BlownUpState,
}

impl RestpointState {
    pub fn new(cc: &CentralConfiguration, sign: Sign, at_infinity: bool) -> Self {
        let v0 = sign.value() * cc.v0();
        let s = cc.s.s;
        let z: Vec6 = std::array::from_fn(|k| v0 * s[k]);
        let chart = if at_infinity { Chart::U } else { Chart::R };
        let state = BlownUpState {
            chart,
            radial: 0.0,
            s: cc.s,
            z,
            h: 0.0,
            masses: cc.masses,
        };
        Self {
            cc: cc.clone(),
            sign,
            at_infinity,
            state,
        }
    }

    pub fn v0(&self) -> f64 {
        self.sign.value() * self.cc.v0()
    }

    /// Same restpoint data placed at radial coordinate `radial`.
    pub fn at_radial(&self, radial: f64) -> BlownUpState {
        BlownUpState {
            radial,
            ..self.state
        }
    }
}

/// Options of [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Stop when the radial coordinate exceeds this.
    pub radial_max: f64,
    /// Stop when the smallest mutual distance of `s` falls below this.
    pub collision_distance: f64,
    /// Largest constraint drift accepted within a single step.
    pub constraint_tolerance: f64,
    /// Newtonian time assigned to the initial state.
    pub t0: f64,
    /// Renormalize `s` and recenter `z` after every step.
    pub project: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            radial_max: 1e12,
            collision_distance: 1e-4,
            constraint_tolerance: 1e-6,
            t0: 0.0,
            project: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub energy_residual: f64,
    pub v: f64,
    pub constraints: ConstraintResiduals,
    /// Largest linearized-constraint residual among the tangents.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tangent_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    /// Newtonian time; only advances where the radial coordinate is positive.
    pub t: f64,
    pub state: BlownUpState,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tangents: Option<Vec<Tangent>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    RadialBound { radial: f64 },
    NearCollision { distance: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub max_energy_residual: f64,
    pub max_constraint_residual: f64,
    pub max_v_decrease: f64,
    pub v_monotonicity_violations: usize,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        &self.samples[self.samples.len() - 1]
    }

    /// Samples ordered by increasing `τ`; integration backward in `τ`
    /// produces them in reverse.
    pub fn into_increasing(mut self) -> Self {
        if self.samples.len() > 1 && self.samples[0].tau > self.samples[1].tau {
            self.samples.reverse();
        }
        self
    }

    /// Energy, constraint and `v`-monotonicity statistics, with `v` read in
    /// the direction of increasing `τ`.
    pub fn summary(&self) -> TrajectorySummary {
        let mut out = TrajectorySummary {
            samples: self.samples.len(),
            max_energy_residual: 0.0,
            max_constraint_residual: 0.0,
            max_v_decrease: 0.0,
            v_monotonicity_violations: 0,
        };
        for s in &self.samples {
            out.max_energy_residual = out
                .max_energy_residual
                .max(s.diagnostics.energy_residual.abs());
            out.max_constraint_residual = out
                .max_constraint_residual
                .max(s.diagnostics.constraints.max());
        }
        for w in self.samples.windows(2) {
            let (a, b) = if w[1].tau > w[0].tau {
                (&w[0], &w[1])
            } else {
                (&w[1], &w[0])
            };
            let drop = a.diagnostics.v - b.diagnostics.v;
            out.max_v_decrease = out.max_v_decrease.max(drop);
            if drop > V_MONOTONICITY_SLACK {
                out.v_monotonicity_violations += 1;
            }
        }
        out
    }

    /// CSV with columns `tau,t,radial,chart,s1x,...,s3y,z1x,...,z3y,v,energy_residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "tau".to_string(),
            "t".into(),
            "radial".into(),
            "chart".into(),
        ];
        for p in ["s", "z"] {
            for b in 1..=3 {
                for c in ["x", "y"] {
                    header.push(format!("{p}{b}{c}"));
                }
            }
        }
        header.push("v".into());
        header.push("energy_residual".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut rec = vec![
                format_f64(s.tau),
                format_f64(s.t),
                format_f64(s.state.radial),
                s.state.chart.to_string(),
            ];
            rec.extend(s.state.s.s.iter().chain(&s.state.z).map(|&x| format_f64(x)));
            rec.push(format_f64(s.diagnostics.v));
            rec.push(format_f64(s.diagnostics.energy_residual));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

fn diagnostics(state: &BlownUpState, tangents: Option<&[Tangent]>) -> Result<Diagnostics> {
    Ok(Diagnostics {
        energy_residual: state.energy_residual()?,
        v: state.v(),
        constraints: state.constraint_residuals(),
        tangent_residual: tangents.map(|ts| {
            ts.iter()
                .map(|a| tangent_constraint_residual(state, a))
                .fold(0.0, f64::max)
        }),
    })
}

fn time_rate(chart: Chart, radial: f64) -> f64 {
    if radial <= 0.0 {
        return 0.0;
    }
    match chart {
        Chart::R => radial * radial.sqrt(),
        Chart::U => 1.0 / (radial * radial.sqrt()),
    }
}

fn check_initial(initial: &BlownUpState) -> Result<()> {
    let res = initial.constraint_residuals();
    if res.max() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "initial state violates the constraints by {:e}",
            res.max()
        )));
    }
    Ok(())
}

/// Integrate the blown-up field over `tau_span` (backward if `τ1 < τ0`).
pub fn integrate(
    initial: &BlownUpState,
    tau_span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    run(initial, &[], tau_span, opts)
}

/// Integrate the state together with the variational equations for each
/// tangent in `tangents`.
pub fn integrate_with_variation(
    initial: &BlownUpState,
    tangents: &[Tangent],
    tau_span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    for a in tangents {
        let res = tangent_constraint_residual(initial, a);
        if res > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "tangent violates the linearized constraints by {res:e}"
            )));
        }
    }
    run(initial, tangents, tau_span, opts)
}

fn run(
    initial: &BlownUpState,
    tangents: &[Tangent],
    tau_span: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    check_initial(initial)?;
    if tau_span.0 == tau_span.1 || !tau_span.0.is_finite() || !tau_span.1.is_finite() {
        return Err(Error::InvalidInput(
            "tau span must be finite and nonempty".into(),
        ));
    }
    let chart = initial.chart;
    let h = initial.h;
    let m = initial.masses;
    let nt = tangents.len();
    let dim = STATE_DIM + 1 + STATE_DIM * nt;
    let mut y = vec![0.0; dim];
    y[..STATE_DIM].copy_from_slice(&initial.to_array());
    y[STATE_DIM] = opts.t0;
    for (i, a) in tangents.iter().enumerate() {
        let o = STATE_DIM + 1 + STATE_DIM * i;
        y[o..o + STATE_DIM].copy_from_slice(a);
    }

    let sample_at = |tau: f64, y: &[f64]| -> Result<Sample> {
        let state = BlownUpState::from_slice(chart, h, m, y);
        let tg: Option<Vec<Tangent>> = (nt > 0).then(|| {
            (0..nt)
                .map(|i| {
                    let o = STATE_DIM + 1 + STATE_DIM * i;
                    std::array::from_fn(|k| y[o + k])
                })
                .collect()
        });
        Ok(Sample {
            tau,
            t: y[STATE_DIM],
            diagnostics: diagnostics(&state, tg.as_deref())?,
            state,
            tangents: tg,
        })
    };

    let mut samples = vec![sample_at(tau_span.0, &y)?];
    let mut termination = Termination::Completed;
    let mut failure: Option<Error> = None;

    let rhs = |_tau: f64, y: &[f64], dy: &mut [f64]| -> std::result::Result<(), String> {
        rhs_into(chart, &m, y, dy).map_err(|e| e.to_string())?;
        dy[STATE_DIM] = time_rate(chart, y[0]);
        if nt > 0 {
            let j = jacobian_of(chart, &m, y).map_err(|e| e.to_string())?;
            for i in 0..nt {
                let o = STATE_DIM + 1 + STATE_DIM * i;
                for r in 0..STATE_DIM {
                    let mut acc = 0.0;
                    for c in 0..STATE_DIM {
                        acc += j[(r, c)] * y[o + c];
                    }
                    dy[o + r] = acc;
                }
            }
        }
        Ok(())
    };

    let stepper = StepperOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        first_step: None,
        max_step: opts.max_step,
        max_steps: opts.max_steps,
    };

    let after = |tau: f64, y: &mut [f64]| -> Control {
        if opts.project {
            let state = BlownUpState::from_slice(chart, h, m, y);
            let drift = state.constraint_residuals().max();
            if drift > opts.constraint_tolerance {
                failure = Some(Error::ConstraintBlowup {
                    tau,
                    residual: drift,
                });
                return Control::Stop("constraint blowup".into());
            }
            match state.projected() {
                Ok(p) => y[..STATE_DIM].copy_from_slice(&p.to_array()),
                Err(e) => {
                    failure = Some(e);
                    return Control::Stop("projection failed".into());
                }
            }
        }
        match sample_at(tau, y) {
            Ok(s) => samples.push(s),
            Err(e) => {
                failure = Some(e);
                return Control::Stop("diagnostics failed".into());
            }
        }
        if y[0] > opts.radial_max {
            termination = Termination::RadialBound { radial: y[0] };
            return Control::Stop("radial bound".into());
        }
        let s: Vec6 = std::array::from_fn(|k| y[1 + k]);
        let d = min_distance(&s);
        if d < opts.collision_distance {
            termination = Termination::NearCollision { distance: d };
            return Control::Stop("near collision".into());
        }
        Control::Continue
    };

    let outcome = dop853::solve(rhs, tau_span.0, &mut y, tau_span.1, &stepper, after);
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome.map_err(|f| match f {
        Failure::StepTooSmall { t, step } => Error::StepFailure { tau: t, step },
        Failure::Evaluation { t, .. } => Error::StepFailure { tau: t, step: 0.0 },
        Failure::TooManySteps { t } => Error::StepFailure {
            tau: t,
            step: f64::NAN,
        },
    })?;
    Ok(Trajectory {
        samples,
        termination,
        accepted_steps: outcome.accepted,
        rejected_steps: outcome.rejected,
    })
}
