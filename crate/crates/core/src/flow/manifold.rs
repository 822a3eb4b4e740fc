//! Stable subspaces of restpoints, stable-manifold shooting and conversion back
//! to Newtonian variables.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    integrate, BlownUpState, Chart, IntegratorOptions, RestpointState, Tangent, Trajectory,
    STATE_DIM,
};
use crate::error::{Error, Result};
use crate::geometry::{mass_dot, potential, remove_center_of_mass, Vec6};
use crate::linalg::{linear_fit, orthonormalize};
use crate::spectra::{lambda_pair, tangent_modes};

/// Threshold below which a nominally hyperbolic eigenvalue counts as
/// degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// `(δradial, δs, δz) = (1, 0, 0)`
    Radial,
    /// `(0, 0, s)`, transverse to the energy level.
    Energy,
    /// `(0, s⊥, k s⊥)` generated by rotation.
    Rotation,
    /// `(0, e, k e)` for the smaller tangent eigenvalue `α1`.
    Alpha1,
    /// `(0, e, k e)` for `α2`.
    Alpha2,
}

/// One eigenpair of the restpoint linearization. Complex pairs appear once,
/// with the real and imaginary parts of the eigenvector stored separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestpointMode {
    pub kind: ModeKind,
    #[serde(with = "complex_scalar")]
    pub eigenvalue: Complex64,
    pub real_part: Tangent,
    /// Present for complex eigenvalues; spans the real invariant plane
    /// together with `real_part`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub imag_part: Option<Tangent>,
}

mod complex_scalar {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Complex64, ser: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(de)?;
        Ok(Complex64::new(re, im))
    }
}

fn mode_vector(e: &Vec6, k: f64) -> Tangent {
    let mut out = [0.0; STATE_DIM];
    for j in 0..6 {
        out[1 + j] = e[j];
        out[7 + j] = k * e[j];
    }
    out
}

/// All eight eigen-directions of the restpoint linearization on the
/// constrained tangent space, built from the numerically computed tangent
/// eigenvectors of `D∇_m U(c) + U(c)`.
pub fn restpoint_modes(rp: &RestpointState) -> Result<Vec<RestpointMode>> {
    let v = rp.v0();
    let s = rp.cc.shape();
    let mut modes = Vec::with_capacity(8);
    let mut radial = [0.0; STATE_DIM];
    radial[0] = 1.0;
    let radial_rate = if rp.at_infinity { -v } else { v };
    modes.push(RestpointMode {
        kind: ModeKind::Radial,
        eigenvalue: Complex64::new(radial_rate, 0.0),
        real_part: radial,
        imag_part: None,
    });
    let mut energy = [0.0; STATE_DIM];
    energy[7..13].copy_from_slice(s);
    modes.push(RestpointMode {
        kind: ModeKind::Energy,
        eigenvalue: Complex64::new(v, 0.0),
        real_part: energy,
        imag_part: None,
    });

    let [rot, a1, a2] = tangent_modes(&rp.cc)?;
    for (lambda, kind) in [(0.0, ModeKind::Rotation), (-0.5 * v, ModeKind::Rotation)] {
        modes.push(RestpointMode {
            kind,
            eigenvalue: Complex64::new(lambda, 0.0),
            real_part: mode_vector(&rot.direction, v + lambda),
            imag_part: None,
        });
    }
    for (tm, kind) in [(a1, ModeKind::Alpha1), (a2, ModeKind::Alpha2)] {
        let (lp, lm) = lambda_pair(v, tm.alpha);
        if lp.im.abs() > 0.0 {
            // conjugate pair: keep the one with positive imaginary part
            let l = if lp.im > 0.0 { lp } else { lm };
            for l in [l, l.conj()] {
                let mut im = [0.0; STATE_DIM];
                for j in 0..6 {
                    im[7 + j] = l.im * tm.direction[j];
                }
                modes.push(RestpointMode {
                    kind,
                    eigenvalue: l,
                    real_part: mode_vector(&tm.direction, v + l.re),
                    imag_part: Some(im),
                });
            }
        } else {
            for l in [lp, lm] {
                modes.push(RestpointMode {
                    kind,
                    eigenvalue: l,
                    real_part: mode_vector(&tm.direction, v + l.re),
                    imag_part: None,
                });
            }
        }
    }
    Ok(modes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSubspace {
    #[serde(with = "crate::spectra::complex_pairs")]
    pub eigenvalues: Vec<Complex64>,
    /// The stable modes with their raw eigenvectors.
    pub modes: Vec<RestpointMode>,
    /// Euclidean-orthonormal basis of the stable subspace.
    pub basis: Vec<Tangent>,
}

impl StableSubspace {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// Real representatives of the stable modes, one per real dimension,
    /// labelled by kind.
    pub fn real_vectors(&self) -> Vec<(ModeKind, Tangent)> {
        let mut out = Vec::new();
        for m in &self.modes {
            match m.imag_part {
                None => out.push((m.kind, m.real_part)),
                Some(im) if m.eigenvalue.im > 0.0 => {
                    out.push((m.kind, m.real_part));
                    out.push((m.kind, im));
                }
                Some(_) => {}
            }
        }
        out
    }
}

/// Eigen-directions of the restpoint linearization with negative real part.
pub fn stable_subspace(rp: &RestpointState) -> Result<StableSubspace> {
    let modes = restpoint_modes(rp)?;
    let mut stable = Vec::new();
    for m in modes {
        // the zero eigenvalue of the rotation is structural, not hyperbolic
        let structural = m.kind == ModeKind::Rotation && m.eigenvalue.re == 0.0;
        if !structural && m.eigenvalue.re.abs() < DEGENERACY_TOLERANCE {
            return Err(Error::DegenerateSpectrum {
                eigenvalue: m.eigenvalue.re,
            });
        }
        if !structural && m.eigenvalue.re < 0.0 {
            stable.push(m);
        }
    }
    let eigenvalues = stable.iter().map(|m| m.eigenvalue).collect();
    let mut sub = StableSubspace {
        eigenvalues,
        modes: stable,
        basis: Vec::new(),
    };
    let raw: Vec<DVector<f64>> = sub
        .real_vectors()
        .iter()
        .map(|(_, v)| DVector::from_column_slice(v))
        .collect();
    sub.basis = orthonormalize(&raw, &DMatrix::identity(STATE_DIM, STATE_DIM), 1e-10)
        .into_iter()
        .map(|b| std::array::from_fn(|k| b[k]))
        .collect();
    Ok(sub)
}

/// Restpoint displaced by `eps * direction`, then pulled back onto the
/// constraints. In the chart at infinity `z` is rescaled along `s` to restore
/// zero energy; in the collision chart `h` is set from the displaced state.
pub fn displaced_state(rp: &RestpointState, eps: f64, direction: &Tangent) -> Result<BlownUpState> {
    let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::InvalidInput("zero direction".into()));
    }
    let y: Tangent = std::array::from_fn(|k| rp.state.to_array()[k] + eps * direction[k] / n);
    let m = rp.cc.masses;
    let st = BlownUpState::from_slice(rp.state.chart, 0.0, m, &y).projected()?;
    let s = st.s.s;
    let z = st.z;
    let v = mass_dot(&s, &z, &m);
    let w: Vec6 = remove_center_of_mass(&std::array::from_fn(|k| z[k] - v * s[k]), &m);
    let u = potential(&s, &m)?;
    let w2 = mass_dot(&w, &w, &m);
    match st.chart {
        Chart::U => {
            if 2.0 * u <= w2 {
                return Err(Error::InvalidInput(
                    "displacement too large to restore zero energy".into(),
                ));
            }
            let vn = v.signum() * (2.0 * u - w2).sqrt();
            let z: Vec6 = std::array::from_fn(|k| w[k] + vn * s[k]);
            BlownUpState::new(Chart::U, st.radial, s, z, 0.0, m)
        }
        Chart::R => {
            let e = 0.5 * mass_dot(&z, &z, &m) - u;
            let h = if st.radial > 0.0 { e / st.radial } else { 0.0 };
            BlownUpState::new(Chart::R, st.radial, s, z, h, m)
        }
    }
}

/// Integrate backward in `τ` for `tau_back` from the restpoint displaced by
/// `eps` along a stable direction with positive radial component. Samples are
/// returned in increasing `τ`, ending at `τ = 0` near the restpoint. The
/// Newtonian clock is anchored so that the end point carries the time of the
/// homothetic solution of the same size.
pub fn shoot_stable_manifold(
    rp: &RestpointState,
    eps: f64,
    direction: &Tangent,
    tau_back: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "offset {eps:e} outside [1e-8, 1e-4]"
        )));
    }
    if !(direction[0] > 0.0) {
        return Err(Error::InvalidInput(
            "direction needs a positive radial component".into(),
        ));
    }
    if !(tau_back > 0.0) {
        return Err(Error::InvalidInput("tau_back must be positive".into()));
    }
    let start = displaced_state(rp, eps, direction)?;
    let v = rp.v0();
    let t0 = if rp.at_infinity && v > 0.0 {
        2.0 / (3.0 * v) * start.r().powf(1.5)
    } else {
        opts.t0
    };
    let opts = IntegratorOptions { t0, ..*opts };
    Ok(integrate(&start, (0.0, -tau_back), &opts)?.into_increasing())
}

/// Distance in `(s, z)` from the restpoint after integrating forward from the
/// first sample of a shot trajectory to its final `τ`.
pub fn return_distance(
    rp: &RestpointState,
    shot: &Trajectory,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let first = shot.first();
    let fwd = integrate(&first.state, (first.tau, shot.last().tau), opts)?;
    let end = fwd.last().state;
    let d2: f64 = (0..6)
        .map(|k| (end.s.s[k] - rp.state.s.s[k]).powi(2) + (end.z[k] - rp.state.z[k]).powi(2))
        .sum();
    Ok(d2.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonianSample {
    pub t: f64,
    pub q: Vec6,
    pub qdot: Vec6,
    /// `r = sqrt(I(q))`
    pub r: f64,
    /// Kinetic energy `K = |q'|²_m / 2`.
    pub kinetic: f64,
}

/// Newtonian positions and velocities along a trajectory, skipping samples on
/// the collision manifold or at infinity.
pub fn newtonian_samples(traj: &Trajectory) -> Vec<NewtonianSample> {
    traj.samples
        .iter()
        .filter(|s| s.state.radial > 0.0)
        .map(|s| {
            let (q, qdot) = s.state.newtonian();
            let kinetic = 0.5 * mass_dot(&qdot, &qdot, &s.state.masses);
            NewtonianSample {
                t: s.t,
                q,
                qdot,
                r: s.state.r(),
                kinetic,
            }
        })
        .collect()
}

/// Least-squares slope of `log r` against `log t` over `t ∈ [t_end / 10, t_end]`.
pub fn fit_radial_exponent(samples: &[NewtonianSample]) -> Result<f64> {
    let t_end = samples
        .iter()
        .map(|s| s.t)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput(
            "no positive Newtonian times to fit".into(),
        ));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.t >= 0.1 * t_end && s.r > 0.0)
        .map(|s| (s.t.ln(), s.r.ln()))
        .unzip();
    if x.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "only {} samples in the final decade",
            x.len()
        )));
    }
    Ok(linear_fit(&x, &y).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::{euler, lagrange, Orientation};
    use crate::geometry::MassTriple;
    use crate::spectra::{build_variational_matrices, Sign};

    fn check_modes(rp: &RestpointState) {
        let (a, _) = build_variational_matrices(&rp.cc, rp.sign, rp.at_infinity).unwrap();
        for m in restpoint_modes(rp).unwrap() {
            let re = DVector::from_column_slice(&m.real_part);
            let im = m.imag_part.map_or(DVector::zeros(STATE_DIM), |v| {
                DVector::from_column_slice(&v)
            });
            // A (re + i im) = λ (re + i im)
            let l = m.eigenvalue;
            let res_re = &a * &re - (&re * l.re - &im * l.im);
            let res_im = &a * &im - (&im * l.re + &re * l.im);
            assert!(
                res_re.norm() + res_im.norm() < 1e-10,
                "{:?} {}",
                m.kind,
                res_re.norm() + res_im.norm()
            );
        }
    }

    #[test]
    fn analytic_modes_are_eigenvectors_of_a() {
        let m = MassTriple::new(1.0, 2.0, 0.5).unwrap();
        for cc in [
            lagrange(&m, Orientation::Positive),
            euler(&m, 1).unwrap(),
            euler(&MassTriple::equal(), 2).unwrap(),
        ] {
            for sign in [Sign::Plus, Sign::Minus] {
                for inf in [false, true] {
                    check_modes(&RestpointState::new(&cc, sign, inf));
                }
            }
        }
    }

    #[test]
    fn equal_mass_lagrange_stable_set() {
        let cc = lagrange(&MassTriple::equal(), Orientation::Positive);
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let sub = stable_subspace(&rp).unwrap();
        assert_eq!(sub.dimension(), 4);
        let v = rp.v0();
        let w = -v / 4.0 * (1.0 + 13f64.sqrt());
        let mut got: Vec<f64> = sub.eigenvalues.iter().map(|l| l.re).collect();
        got.sort_by(f64::total_cmp);
        let want = [w, w, -v, -0.5 * v];
        let mut want = want.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&want) {
            assert!((g - e).abs() < 1e-10, "{got:?} {want:?}");
        }
        assert!(sub
            .real_vectors()
            .iter()
            .any(|(k, v)| *k == ModeKind::Radial && v[0] == 1.0));
    }

    #[test]
    fn equal_mass_euler_stable_set_has_spiral_pair() {
        let cc = euler(&MassTriple::equal(), 2).unwrap();
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let sub = stable_subspace(&rp).unwrap();
        let v = rp.v0();
        let pair = Complex64::new(-v / 4.0, v / 4.0 * 10.2f64.sqrt());
        assert!(sub.eigenvalues.iter().any(|l| (l - pair).norm() < 1e-10));
        assert!(sub
            .eigenvalues
            .iter()
            .any(|l| (l - pair.conj()).norm() < 1e-10));
        assert_eq!(sub.dimension(), 5);
    }

    #[test]
    fn radial_shot_is_homothetic() {
        let cc = lagrange(
            &MassTriple::new(1.0, 2.0, 3.0).unwrap(),
            Orientation::Positive,
        );
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let mut dir = [0.0; STATE_DIM];
        dir[0] = 1.0;
        let shot =
            shoot_stable_manifold(&rp, 1e-6, &dir, 4.0, &IntegratorOptions::default()).unwrap();
        for s in &shot.samples {
            for k in 0..6 {
                assert!((s.state.s.s[k] - cc.s.s[k]).abs() < 1e-10);
                assert!((s.state.z[k] - rp.state.z[k]).abs() < 1e-10);
            }
        }
        let ns = newtonian_samples(&shot);
        let p = fit_radial_exponent(&ns).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-6, "{p}");
    }

    #[test]
    fn shot_returns_to_restpoint() {
        let cc = lagrange(
            &MassTriple::new(1.0, 1.3, 0.7).unwrap(),
            Orientation::Positive,
        );
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let sub = stable_subspace(&rp).unwrap();
        let vecs = sub.real_vectors();
        let dir: Tangent = std::array::from_fn(|k| vecs.iter().map(|(_, v)| v[k]).sum::<f64>());
        let eps = 1e-5;
        let opts = IntegratorOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let shot = shoot_stable_manifold(&rp, eps, &dir, 3.0, &opts).unwrap();
        assert!(shot.first().tau < shot.last().tau);
        let d = return_distance(&rp, &shot, &opts).unwrap();
        assert!(d < 10.0 * eps, "{d}");
    }

    #[test]
    fn shooting_preconditions() {
        let cc = lagrange(&MassTriple::equal(), Orientation::Positive);
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let mut dir = [0.0; STATE_DIM];
        dir[0] = 1.0;
        let o = IntegratorOptions::default();
        assert!(shoot_stable_manifold(&rp, 1e-3, &dir, 1.0, &o).is_err());
        assert!(shoot_stable_manifold(&rp, 1e-6, &dir, -1.0, &o).is_err());
        dir[0] = 0.0;
        dir[7] = 1.0;
        assert!(shoot_stable_manifold(&rp, 1e-6, &dir, 1.0, &o).is_err());
    }
}
