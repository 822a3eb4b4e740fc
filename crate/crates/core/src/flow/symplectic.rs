//! The pulled-back symplectic forms
//!
//! ```text
//! Ω_r = Σ m_i (r^{1/2} ds_i∧dz_i + r^{-1/2} dr∧s_i·dz_i + ½ r^{-1/2} dr∧z_i·ds_i)
//! Ω_u = Σ m_i (u^{-1/2} ds_i∧dz_i + u^{-3/2} s_i·dz_i∧du + ½ u^{-3/2} z_i·ds_i∧du)
//! ```
//!
//! with `(α∧β)(a, b) = α(a) β(b) - α(b) β(a)`, and the diagnostics of the
//! stable manifolds at infinity built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::manifold::{displaced_state, restpoint_modes, stable_subspace, ModeKind};
use super::{
    integrate_with_variation, project_tangent, BlownUpState, Chart, IntegratorOptions,
    RestpointState, Tangent,
};
use crate::error::{Error, Result};
use crate::geometry::{sphere_tangent_basis, MassTriple, Vec6};
use crate::linalg::{condition_number, linear_fit};
use crate::spectra::lagrange_k;

/// Per-body contributions `[ds∧dz, radial∧s·dz, radial∧z·ds]` including the
/// mass and chart weights; their total is the form.
pub fn symplectic_terms(state: &BlownUpState, a: &Tangent, b: &Tangent) -> Result<[[f64; 3]; 3]> {
    let x = state.radial;
    if !(x > 0.0) {
        return Err(Error::SingularChart { radial: x });
    }
    let s = &state.s.s;
    let z = &state.z;
    let (w_sz, w_r) = match state.chart {
        Chart::R => (x.sqrt(), 1.0 / x.sqrt()),
        // s·dz∧du = -du∧s·dz
        Chart::U => (1.0 / x.sqrt(), -1.0 / (x * x.sqrt())),
    };
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        let mut sz = 0.0;
        let mut s_dz = [0.0; 2];
        let mut z_ds = [0.0; 2];
        for c in 0..2 {
            let k = 2 * i + c;
            sz += a[1 + k] * b[7 + k] - b[1 + k] * a[7 + k];
            s_dz[0] += s[k] * a[7 + k];
            s_dz[1] += s[k] * b[7 + k];
            z_ds[0] += z[k] * a[1 + k];
            z_ds[1] += z[k] * b[1 + k];
        }
        let mi = state.masses.get(i);
        row[0] = mi * w_sz * sz;
        row[1] = mi * w_r * (a[0] * s_dz[1] - b[0] * s_dz[0]);
        row[2] = mi * w_r * 0.5 * (a[0] * z_ds[1] - b[0] * z_ds[0]);
    }
    Ok(out)
}

/// `Ω_r` or `Ω_u` (by chart) evaluated on two tangent vectors.
pub fn symplectic_form(state: &BlownUpState, a: &Tangent, b: &Tangent) -> Result<f64> {
    Ok(symplectic_terms(state, a, b)?.iter().flatten().sum())
}

fn newtonian_map(chart: Chart, y: &[f64]) -> [f64; 12] {
    let r = match chart {
        Chart::R => y[0],
        Chart::U => 1.0 / y[0],
    };
    let mut out = [0.0; 12];
    for k in 0..6 {
        out[k] = r * y[1 + k];
        out[6 + k] = y[7 + k] / r.sqrt();
    }
    out
}

/// `Σ m_k dq_k∧dq'_k` on the images of `a` and `b` under the map to Newtonian
/// variables, differentiated by central differences with step `step`.
pub fn pullback_form_fd(state: &BlownUpState, a: &Tangent, b: &Tangent, step: f64) -> Result<f64> {
    if !(state.radial > 0.0) {
        return Err(Error::SingularChart {
            radial: state.radial,
        });
    }
    let y = state.to_array();
    let push = |d: &Tangent| -> [f64; 12] {
        let p: Tangent = std::array::from_fn(|k| y[k] + step * d[k]);
        let m: Tangent = std::array::from_fn(|k| y[k] - step * d[k]);
        let (fp, fm) = (
            newtonian_map(state.chart, &p),
            newtonian_map(state.chart, &m),
        );
        std::array::from_fn(|k| (fp[k] - fm[k]) / (2.0 * step))
    };
    let (pa, pb) = (push(a), push(b));
    Ok((0..6)
        .map(|k| state.masses.coord_mass(k) * (pa[k] * pb[6 + k] - pb[k] * pa[6 + k]))
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianOptions {
    /// Displacement from the restpoint along each probe direction.
    pub eps: f64,
    /// Size of the stable components at the far end of a probe; sets how far
    /// back in `τ` it is integrated.
    pub reach: f64,
    pub integrator: IntegratorOptions,
}

impl Default for LagrangianOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            reach: 1e-2,
            integrator: IntegratorOptions::default(),
        }
    }
}

/// Decay of `Ω_u` on one pair of propagated stable tangents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDecay {
    pub pair: (ModeKind, ModeKind),
    /// Slope of `log Σ|terms|` against `τ`.
    pub fitted_rate: f64,
    /// `Σ|terms|` at the far end of the probe.
    pub initial_envelope: f64,
    /// `Σ|terms|` next to the restpoint.
    pub final_envelope: f64,
    /// Largest `|Ω_u| / Σ|terms|` along the probe.
    pub max_relative_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub direction: Tangent,
    pub tau_back: f64,
    pub pairs: Vec<PairDecay>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianReport {
    pub masses: MassTriple,
    pub v: f64,
    pub k: f64,
    /// Weakest attracting exponent `-(v/4)(1 + sqrt(13 - 12 sqrt(k)))`.
    pub lambda_w: f64,
    /// `v/2 + λ_w + 0.05 v`
    pub rate_bound: f64,
    #[serde(with = "crate::spectra::complex_pairs")]
    pub stable_eigenvalues: Vec<Complex64>,
    pub stable_dimension: usize,
    /// Counts of positive, negative and zero exponents on the constrained
    /// tangent space.
    pub sign_pattern: (usize, usize, usize),
    /// Condition number of the stable subspace projected to `(δu, δs)`.
    pub graph_condition: f64,
    pub probes: Vec<ProbeReport>,
    pub max_fitted_rate: f64,
}

impl LagrangianReport {
    pub fn rates_within_bound(&self) -> bool {
        self.max_fitted_rate <= self.rate_bound
    }
}

/// `-(v/4)(1 + sqrt(13 - 12 sqrt(k)))`
pub fn weakest_attracting_exponent(v: f64, k: f64) -> f64 {
    -v / 4.0 * (1.0 + (13.0 - 12.0 * k.sqrt()).sqrt())
}

fn tangent_coordinates(s: &Vec6, masses: &MassTriple, a: &Tangent) -> [f64; 4] {
    let basis = sphere_tangent_basis(s, masses);
    let ds: Vec6 = std::array::from_fn(|k| a[1 + k]);
    let mut out = [a[0], 0.0, 0.0, 0.0];
    for j in 0..3 {
        out[1 + j] = crate::geometry::mass_dot(&basis[j], &ds, masses);
    }
    out
}

/// Graph and Lagrangian tests for the stable manifold of a Lagrange restpoint
/// at infinity with `v > 0`, using `probes` shot trajectories.
pub fn lagrangian_graph_diagnostics(
    rp: &RestpointState,
    probes: usize,
    opts: &LagrangianOptions,
) -> Result<LagrangianReport> {
    if !rp.cc.kind.is_lagrange() || !rp.at_infinity || !(rp.v0() > 0.0) {
        return Err(Error::InvalidInput(
            "needs a Lagrange restpoint at infinity with v > 0".into(),
        ));
    }
    if probes == 0 {
        return Err(Error::InvalidInput("at least one probe is required".into()));
    }
    let masses = rp.cc.masses;
    let v = rp.v0();
    let k = lagrange_k(&masses);
    let lambda_w = weakest_attracting_exponent(v, k);
    let rate_bound = 0.5 * v + lambda_w + 0.05 * v;

    let all = restpoint_modes(rp)?;
    let tol = 1e-10;
    let mut sign_pattern = (0, 0, 0);
    for m in &all {
        if m.eigenvalue.re > tol {
            sign_pattern.0 += 1;
        } else if m.eigenvalue.re < -tol {
            sign_pattern.1 += 1;
        } else {
            sign_pattern.2 += 1;
        }
    }

    let sub = stable_subspace(rp)?;
    let vecs = sub.real_vectors();
    let rows: Vec<[f64; 4]> = vecs
        .iter()
        .map(|(_, a)| tangent_coordinates(rp.cc.shape(), &masses, a))
        .collect();
    let graph = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let graph_condition = condition_number(&graph);

    let find = |kind: ModeKind| vecs.iter().find(|(k, _)| *k == kind).map(|(_, a)| *a);
    let (radial, a1, a2, rot) = match (
        find(ModeKind::Radial),
        find(ModeKind::Alpha1),
        find(ModeKind::Alpha2),
        find(ModeKind::Rotation),
    ) {
        (Some(r), Some(a), Some(b), Some(c)) => (r, a, b, c),
        _ => {
            return Err(Error::InvalidInput(
                "stable subspace lacks an expected mode".into(),
            ))
        }
    };
    let fastest = sub
        .eigenvalues
        .iter()
        .map(|l| l.re.abs())
        .fold(0.0, f64::max);
    let tau_back = (opts.reach / opts.eps).ln() / fastest;

    let mut probe_reports = Vec::with_capacity(probes);
    let mut max_fitted_rate = f64::NEG_INFINITY;
    for p in 0..probes {
        let theta = 2.0 * std::f64::consts::PI * (p as f64 + 0.5) / probes as f64;
        let sgn = if p % 2 == 0 { 1.0 } else { -1.0 };
        let direction: Tangent = std::array::from_fn(|j| {
            radial[j] + 0.5 * (theta.cos() * a1[j] + theta.sin() * a2[j]) + 0.25 * sgn * rot[j]
        });
        let start = displaced_state(rp, opts.eps, &direction)?;
        let labels = [ModeKind::Radial, ModeKind::Alpha1, ModeKind::Alpha2];
        let tangents: Vec<Tangent> = [radial, a1, a2]
            .iter()
            .map(|a| project_tangent(&start, a, true))
            .collect::<Result<_>>()?;
        let traj = integrate_with_variation(&start, &tangents, (0.0, -tau_back), &opts.integrator)?
            .into_increasing();

        let mut pairs = Vec::new();
        for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let mut taus = Vec::new();
            let mut logs = Vec::new();
            let mut defect = 0.0f64;
            let mut envelopes = Vec::new();
            for s in &traj.samples {
                let tg = s.tangents.as_ref().expect("tangents were propagated");
                let terms = symplectic_terms(&s.state, &tg[i], &tg[j])?;
                let env: f64 = terms.iter().flatten().map(|x| x.abs()).sum();
                let total: f64 = terms.iter().flatten().sum();
                if env > 0.0 {
                    taus.push(s.tau);
                    logs.push(env.ln());
                    defect = defect.max(total.abs() / env);
                }
                envelopes.push(env);
            }
            if taus.len() < 3 {
                return Err(Error::InvalidInput(
                    "probe produced too few samples to fit".into(),
                ));
            }
            let rate = linear_fit(&taus, &logs).0;
            max_fitted_rate = max_fitted_rate.max(rate);
            pairs.push(PairDecay {
                pair: (labels[i], labels[j]),
                fitted_rate: rate,
                initial_envelope: envelopes[0],
                final_envelope: envelopes[envelopes.len() - 1],
                max_relative_defect: defect,
            });
        }
        probe_reports.push(ProbeReport {
            direction,
            tau_back,
            pairs,
        });
    }

    Ok(LagrangianReport {
        masses,
        v,
        k,
        lambda_w,
        rate_bound,
        stable_eigenvalues: sub.eigenvalues.clone(),
        stable_dimension: sub.dimension(),
        sign_pattern,
        graph_condition,
        probes: probe_reports,
        max_fitted_rate,
    })
}
