//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftm_core::central::{
    all_central_configurations, central_configuration, euler, euler_quintic_root, lagrange, CcKind,
    CentralConfiguration, HomotheticOrbit, Orientation,
};
use ftm_core::flow::manifold::{
    fit_radial_exponent, newtonian_samples, shoot_stable_manifold, stable_subspace, ModeKind,
};
use ftm_core::flow::symplectic::{
    lagrangian_graph_diagnostics, symplectic_form, LagrangianOptions,
};
use ftm_core::flow::{
    integrate, integrate_with_variation, project_tangent, BlownUpState, Chart, IntegratorOptions,
    RestpointState, Tangent, Termination,
};
use ftm_core::geometry::{
    hessian_potential, mass_dot, min_distance, potential, remove_center_of_mass, scale, Vec6,
};
use ftm_core::jm::{action, jm_length, local_minimizer_probe, zero_energy_timing, DiscretePath};
use ftm_core::secondvar::{
    conjugate_points, negative_direction, negative_profile, q_form, scale_until_negative,
    scaling_identity_check, VariationProfile,
};
use ftm_core::spectra::{
    checked_restpoint_eigenvalues, classify_nu, is_spiraling, lagrange_gamma_product, lagrange_k,
    nontrivial_alphas, nu_parameter, spiraling_region_scan, tangent_modes, Sign,
};
use ftm_core::{MassTriple, Result};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn random_masses(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> MassTriple {
    MassTriple::new(
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
    )
    .unwrap()
}

fn within(elapsed: Duration, seconds: f64) -> bool {
    elapsed.as_secs_f64() < seconds
}

/// Mass-metric norm of the sphere gradient from pairwise forces.
fn pairwise_residual(cc: &CentralConfiguration) -> f64 {
    let m = cc.masses.masses();
    let s = cc.shape();
    let mut u = 0.0;
    let mut acc = [0.0; 6];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let dx = s[2 * j] - s[2 * i];
            let dy = s[2 * j + 1] - s[2 * i + 1];
            let d = (dx * dx + dy * dy).sqrt();
            if i < j {
                u += m[i] * m[j] / d;
            }
            acc[2 * i] += m[j] * dx / (d * d * d);
            acc[2 * i + 1] += m[j] * dy / (d * d * d);
        }
    }
    // grad_m U + U s = 0 at a normalized central configuration
    (0..6)
        .map(|k| m[k / 2] * (acc[k] + u * s[k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn criterion_1() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = random_masses(&mut rng, 0.01, 10.0);
        for cc in all_central_configurations(&m)? {
            worst = worst.max(pairwise_residual(&cc)).max(cc.residual);
        }
    }
    let el = start.elapsed();
    verdict(
        worst < 1e-10 && within(el, 5.0),
        format!("max residual {worst:.2e}, {:.2} s", el.as_secs_f64()),
    )
}

/// Greedy multiset match: largest distance from each expected value to a
/// distinct numeric eigenvalue.
fn multiset_distance(expected: &[Complex64], numeric: &[Complex64]) -> f64 {
    let mut used = vec![false; numeric.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (k, d) = numeric
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, x)| (k, (x - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}

fn criterion_2() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let (mut lib, mut own): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let m = random_masses(&mut rng, 0.1, 10.0);
        for cc in all_central_configurations(&m)? {
            for sign in [Sign::Plus, Sign::Minus] {
                let report = checked_restpoint_eigenvalues(&cc, sign, true)?;
                lib = lib.max(report.crosscheck.as_ref().unwrap().discrepancy_b);
                // full 12x12 B built here; its spectrum contains the
                // constrained list
                let v = report.v0;
                let d = hessian_potential(cc.shape(), &m)?;
                let b = DMatrix::from_fn(12, 12, |i, j| match (i < 6, j < 6) {
                    (true, true) => {
                        if i == j {
                            -v
                        } else {
                            0.0
                        }
                    }
                    (true, false) => {
                        if j - 6 == i {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    (false, true) => d[(i - 6, j)],
                    (false, false) => {
                        if i == j {
                            0.5 * v
                        } else {
                            0.0
                        }
                    }
                });
                let numeric: Vec<Complex64> = b.complex_eigenvalues().iter().copied().collect();
                own = own.max(multiset_distance(
                    report.constrained_eigenvalues(),
                    &numeric,
                ));
            }
        }
    }
    let el = start.elapsed();
    verdict(
        lib < 1e-8 && own < 1e-8 && within(el, 30.0),
        format!(
            "constrained B {lib:.2e}, full B {own:.2e}, {:.2} s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_3() -> Result<Verdict> {
    let m = MassTriple::equal();
    let roots: Vec<f64> = (1..=3)
        .map(|k| euler_quintic_root(&m, k))
        .collect::<Result<_>>()?;
    let nus: Vec<f64> = (1..=3)
        .map(|k| nu_parameter(&m, k))
        .collect::<Result<_>>()?;
    let root_err = roots.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let nu_err = nus.iter().map(|n| (n - 1.4).abs()).fold(0.0, f64::max);
    let k = lagrange_k(&m);
    let gamma = (lagrange_gamma_product(&m) - 2.25).abs();
    verdict(
        root_err < 1e-12 && nu_err < 1e-12 && k == 0.0 && gamma < 1e-12,
        format!("root {root_err:.1e}, nu {nu_err:.1e}, k = {k}, γ1γ2 {gamma:.1e}"),
    )
}

fn criterion_4() -> Result<Verdict> {
    let start = Instant::now();
    let equal = (1..=3)
        .map(|k| is_spiraling(&MassTriple::equal(), k))
        .collect::<Result<Vec<bool>>>()?;
    let skewed = is_spiraling(&MassTriple::new(0.05, 0.9, 0.05)?, 2)?;
    let cells = spiraling_region_scan(200, 1e-3)?;
    let map: std::collections::HashMap<[usize; 3], usize> = cells
        .iter()
        .enumerate()
        .map(|(k, c)| (c.index, k))
        .collect();
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut mismatches = 0;
    let mut nu_dev: f64 = 0.0;
    for c in &cells {
        for p in perms {
            let idx = [c.index[p[0]], c.index[p[1]], c.index[p[2]]];
            let other = &cells[*map.get(&idx).expect("permuted cell in scan")];
            for j in 0..3 {
                if other.spiral_flags[j] != c.spiral_flags[p[j]] {
                    mismatches += 1;
                }
                nu_dev = nu_dev.max(
                    (other.nu_values[j] - c.nu_values[p[j]]).abs()
                        / c.nu_values[p[j]].abs().max(1.0),
                );
            }
            if other.in_spiraling_range != c.in_spiraling_range {
                mismatches += 1;
            }
        }
    }
    let el = start.elapsed();
    verdict(
        equal.iter().all(|&s| s) && !skewed && mismatches == 0 && nu_dev < 1e-9 && within(el, 60.0),
        format!(
            "equal {equal:?}, (0.05,0.9,0.05) mid 2 {skewed}, {} cells, {mismatches} flag mismatches, ν deviation {nu_dev:.1e}, {:.2} s",
            cells.len(),
            el.as_secs_f64()
        ),
    )
}

/// Zero-energy collision-chart state near a random central configuration.
fn random_zero_energy_state(rng: &mut ChaCha8Rng, spread: f64) -> Result<BlownUpState> {
    let m = random_masses(rng, 0.5, 2.0).barycentric();
    let kind = CcKind::ALL[rng.gen_range(0..5)];
    let cc = central_configuration(&m, kind)?;
    loop {
        let q: Vec6 = std::array::from_fn(|k| cc.shape()[k] + spread * rng.gen_range(-1.0..1.0));
        let q = remove_center_of_mass(&q, &m);
        if min_distance(&q) < 0.2 {
            continue;
        }
        let dir: Vec6 = std::array::from_fn(|k| q[k] + spread * rng.gen_range(-1.0..1.0));
        let dir = remove_center_of_mass(&dir, &m);
        let speed = (2.0 * potential(&q, &m)? / mass_dot(&dir, &dir, &m)).sqrt();
        let qdot = scale(&dir, speed);
        let q = scale(&q, 1e-3);
        let qdot = scale(&qdot, 1e-3f64.powf(-0.5));
        let st = BlownUpState::from_newtonian(&q, &qdot, &m, Chart::R)?;
        return BlownUpState::new(Chart::R, st.radial, st.s.s, st.z, 0.0, m);
    }
}

fn criterion_5() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Instant::now();
    let opts = IntegratorOptions {
        rtol: 1e-12,
        atol: 1e-14,
        radial_max: 1e100,
        ..IntegratorOptions::default()
    };
    let (mut energy, mut vdrop, mut cons): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut completed, mut attempts) = (0, 0);
    // trajectories ending at a binary near-collision still count toward the
    // invariants; sampling continues until 20 cover the whole span
    while completed < 20 && attempts < 200 {
        attempts += 1;
        let init = random_zero_energy_state(&mut rng, 0.05)?;
        let traj = integrate(&init, (0.0, 10.0), &opts)?;
        if traj.termination == Termination::Completed {
            completed += 1;
        }
        let umax = traj
            .samples
            .iter()
            .map(|s| potential(&s.state.s.s, &s.state.masses).unwrap())
            .fold(1.0, f64::max);
        let sm = traj.summary();
        energy = energy.max(sm.max_energy_residual / umax);
        vdrop = vdrop.max(sm.max_v_decrease);
        cons = cons.max(sm.max_constraint_residual);
    }
    let el = start.elapsed();
    verdict(
        completed == 20 && energy < 1e-9 && vdrop <= 1e-9 && cons < 1e-9 && within(el, 60.0),
        format!(
            "energy {energy:.2e}·max(1,U), v decrease {vdrop:.2e}, constraints {cons:.2e}, {completed}/{attempts} reached τ = 10, {:.2} s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Result<Verdict> {
    let (mut drift, mut growth): (f64, f64) = (0.0, 0.0);
    let mut count = 0;
    // total mass at most 3: τ-rates grow like the total mass to the 5/4, and
    // rounding along the unstable directions grows like e^{λ+ τ}
    let masses = [
        MassTriple::equal(),
        MassTriple::new(1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0)?,
        MassTriple::new(0.2, 0.7, 0.1)?,
        MassTriple::new(1.5, 0.5, 1.0)?,
    ];
    for m in masses {
        for cc in all_central_configurations(&m)? {
            for sign in [Sign::Plus, Sign::Minus] {
                for at_infinity in [false, true] {
                    let rp = RestpointState::new(&cc, sign, at_infinity);
                    let r0 = 1.0;
                    let init = rp.at_radial(r0);
                    let opts = IntegratorOptions {
                        rtol: 1e-12,
                        atol: 1e-14,
                        radial_max: 1e100,
                        ..IntegratorOptions::default()
                    };
                    let traj = integrate(&init, (0.0, 5.0), &opts)?;
                    let v = rp.v0();
                    let rate = if at_infinity { -v } else { v };
                    for s in &traj.samples {
                        let exact = r0 * (rate * s.tau).exp();
                        growth = growth.max((s.state.radial / exact - 1.0).abs());
                        for k in 0..6 {
                            drift = drift
                                .max((s.state.s.s[k] - cc.shape()[k]).abs())
                                .max((s.state.z[k] - v * cc.shape()[k]).abs());
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    verdict(
        drift < 1e-8 && growth < 1e-8,
        format!("{count} restpoints, (s,z) drift {drift:.2e}, r(τ) relative {growth:.2e}"),
    )
}

/// Stable direction mixing the radial mode with the listed other modes.
fn stable_direction(rp: &RestpointState, mix: &[(ModeKind, f64)]) -> Result<Tangent> {
    let vectors = stable_subspace(rp)?.real_vectors();
    let mut dir = [0.0; 13];
    let mut used = vec![false; vectors.len()];
    for &(kind, w) in [(ModeKind::Radial, 1.0)].iter().chain(mix) {
        if let Some(k) = (0..vectors.len()).find(|&k| !used[k] && vectors[k].0 == kind) {
            used[k] = true;
            for i in 0..13 {
                dir[i] += w * vectors[k].1[i];
            }
        }
    }
    Ok(dir)
}

fn criterion_7() -> Result<Verdict> {
    let m = MassTriple::new(1.0, 2.0, 3.0)?;
    let cases = [
        (
            lagrange(&MassTriple::equal(), Orientation::Positive),
            vec![(ModeKind::Alpha1, 0.3), (ModeKind::Rotation, 0.2)],
        ),
        (
            lagrange(&m, Orientation::Negative),
            vec![(ModeKind::Alpha2, 0.3)],
        ),
        (
            euler(&MassTriple::equal(), 2)?,
            vec![(ModeKind::Alpha1, 0.2), (ModeKind::Alpha1, 0.2)],
        ),
        (
            euler(&m, 1)?,
            vec![(ModeKind::Alpha1, 0.3), (ModeKind::Rotation, 0.1)],
        ),
    ];
    let opts = IntegratorOptions {
        rtol: 1e-12,
        atol: 1e-14,
        ..IntegratorOptions::default()
    };
    let mut lines = Vec::new();
    let mut pass = true;
    for (cc, mix) in cases {
        let rp = RestpointState::new(&cc, Sign::Plus, true);
        let dir = stable_direction(&rp, &mix)?;
        let eps: f64 = 1e-8;
        let tau_back = (1e-2 / eps).ln() / rp.v0();
        let traj = shoot_stable_manifold(&rp, eps, &dir, tau_back, &opts)?;
        let samples = newtonian_samples(&traj);
        let exponent = fit_radial_exponent(&samples)?;
        let kinetic = samples.last().unwrap().kinetic / samples[0].kinetic;
        pass &= (exponent - 2.0 / 3.0).abs() <= 0.01 && kinetic < 1e-4;
        lines.push(format!(
            "{} exponent {exponent:.5} K ratio {kinetic:.1e}",
            cc.kind
        ));
    }
    verdict(pass, lines.join("; "))
}

fn criterion_8() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let start = Instant::now();
    let opts = IntegratorOptions {
        rtol: 1e-12,
        atol: 1e-14,
        radial_max: 1e100,
        ..IntegratorOptions::default()
    };
    let mut worst: f64 = 0.0;
    // change relative to |a||b|/|ω0|, the rounding floor of the pairing
    let (mut floor, mut max_cond): (f64, f64) = (0.0, 0.0);
    let (mut completed, mut attempts) = (0, 0);
    while completed < 20 && attempts < 200 {
        attempts += 1;
        let init = random_zero_energy_state(&mut rng, 0.05)?;
        let raw =
            |rng: &mut ChaCha8Rng| -> Tangent { std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
        let a = project_tangent(&init, &raw(&mut rng), true)?;
        let b = project_tangent(&init, &raw(&mut rng), true)?;
        let traj = integrate_with_variation(&init, &[a, b], (0.0, 10.0), &opts)?;
        if traj.termination == Termination::Completed {
            completed += 1;
        }
        let w0 = symplectic_form(&init, &a, &b)?;
        let mut this: f64 = 0.0;
        let mut cond: f64 = 0.0;
        for s in &traj.samples {
            let t = s.tangents.as_ref().unwrap();
            let n = |v: &Tangent| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            cond = cond.max(n(&t[0]) * n(&t[1]) / w0.abs());
            this = this.max((symplectic_form(&s.state, &t[0], &t[1])? - w0).abs() / w0.abs());
        }
        worst = worst.max(this);
        floor = floor.max(this / cond);
        max_cond = max_cond.max(cond);
    }
    let el = start.elapsed();
    verdict(
        completed == 20 && worst < 1e-6,
        format!(
            "max relative change {worst:.2e}, max |a||b|/|ω0| {max_cond:.1e}, change per unit of it {floor:.1e}, {completed}/{attempts} reached τ = 10, {:.2} s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let start = Instant::now();
    let mut pass = true;
    let (mut cond, mut slack): (f64, f64) = (0.0, f64::INFINITY);
    let opts = LagrangianOptions::default();
    for k in 0..20 {
        let m = random_masses(&mut rng, 0.2, 5.0);
        let orientation = if k % 2 == 0 {
            Orientation::Positive
        } else {
            Orientation::Negative
        };
        let rp = RestpointState::new(&lagrange(&m, orientation), Sign::Plus, true);
        let report = lagrangian_graph_diagnostics(&rp, 3, &opts)?;
        pass &= report.stable_dimension == 4
            && report.sign_pattern == (3, 4, 1)
            && report.graph_condition.is_finite()
            && report.graph_condition < 1e6
            && report.rates_within_bound();
        cond = cond.max(report.graph_condition);
        slack = slack.min(report.rate_bound - report.max_fitted_rate);
    }
    verdict(
        pass,
        format!(
            "dim 4 and pattern (3,4,1) checked, max condition {cond:.2e}, min bound slack {slack:.3e}, {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_10() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let start = Instant::now();
    let mut spiral = 0;
    let mut ratio = f64::INFINITY;
    let mut ok_spiral = true;
    while spiral < 20 {
        let m = random_masses(&mut rng, 0.2, 5.0);
        let middle = rng.gen_range(1..=3);
        if classify_nu(nu_parameter(&m, middle)?).ok() != Some(true) {
            continue;
        }
        let (_, q) = negative_direction(&euler(&m, middle)?, 1.0, 4096)?;
        ok_spiral &= q.value < 0.0 && q.value.abs() > 10.0 * q.quadrature_error;
        ratio = ratio.min(q.value.abs() / q.quadrature_error.max(f64::MIN_POSITIVE));
        spiral += 1;
    }
    let mut plain = 0;
    let mut ok_plain = true;
    let mut min_q = f64::INFINITY;
    while plain < 10 {
        let mid = rng.gen_range(1..=3);
        let mut w = [
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.5..1.5),
            rng.gen_range(0.5..1.5),
        ];
        w[mid - 1] *= rng.gen_range(15.0..40.0);
        let m = MassTriple::new(w[0], w[1], w[2])?;
        let nu = nu_parameter(&m, mid)?;
        if classify_nu(nu).ok() != Some(false) {
            continue;
        }
        let cc = euler(&m, mid)?;
        ok_plain &= conjugate_points(nu, 1.0, 1e6)?.is_empty();
        let (alpha1, _) = nontrivial_alphas(&cc)?;
        let z = tangent_modes(&cc)?[1].direction;
        for _ in 0..5 {
            let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let prof = VariationProfile::sine_series(1.0, 1e4, 4096, z, &coeffs)?;
            let q = q_form(&prof, &cc, alpha1)?.value;
            min_q = min_q.min(q);
        }
        plain += 1;
    }
    ok_plain &= min_q >= -1e-10;
    verdict(
        ok_spiral && ok_plain,
        format!(
            "20 spiraling: min |Q|/error {ratio:.1e}; 10 non-spiraling: no conjugate points, min random Q {min_q:.3e}; {:.2} s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion_11() -> Result<Verdict> {
    let cc = euler(&MassTriple::equal(), 2)?;
    let rp = RestpointState::new(&cc, Sign::Plus, true);
    let dir = stable_direction(&rp, &[(ModeKind::Alpha1, 0.3), (ModeKind::Alpha1, 0.3)])?;
    let eps: f64 = 1e-8;
    let tau_back = (0.05 / eps).ln() / rp.v0();
    let opts = IntegratorOptions {
        rtol: 1e-12,
        atol: 1e-14,
        ..IntegratorOptions::default()
    };
    let traj = shoot_stable_manifold(&rp, eps, &dir, tau_back, &opts)?;
    let samples = newtonian_samples(&traj);
    let nu = nu_parameter(&cc.masses, 2)?;
    let (alpha1, _) = nontrivial_alphas(&cc)?;
    let z = tangent_modes(&cc)?[1].direction;
    let a = samples[0].t * 1.001;
    let profile = negative_profile(nu, a, 4096, z)?;
    let scan = scale_until_negative(&samples, &cc, &profile, alpha1, 2f64.powi(20))?;
    let power = scan.correction_decay_power;
    let first = &scan.entries[0].result;
    verdict(
        scan.threshold.is_some_and(|l| l <= 2f64.powi(20)) && power.is_some_and(|p| p < 0.0),
        format!(
            "t range [{:.3e}, {:.3e}], λ=1: Q {:.3e} correction {:.3e}; threshold λ = {:?}, decay power {:?}, {} scales",
            samples[0].t,
            samples.last().unwrap().t,
            first.q.value,
            first.correction,
            scan.threshold,
            power,
            scan.entries.len()
        ),
    )
}

fn criterion_12() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let m = random_masses(&mut rng, 0.3, 3.0);
        let cc = if k % 2 == 0 {
            lagrange(&m, Orientation::Positive)
        } else {
            euler(&m, 1 + k % 3)?
        };
        let (alpha1, alpha2) = nontrivial_alphas(&cc)?;
        let alpha = if k % 4 < 2 { alpha1 } else { alpha2 };
        let a = rng.gen_range(0.1..2.0);
        let b = a * rng.gen_range(3.0..1e3);
        let coeffs: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prof =
            VariationProfile::sine_series(a, b, 4096, tangent_modes(&cc)?[1].direction, &coeffs)?;
        for lambda in [2.0, 8.0, 100.0] {
            worst = worst.max(scaling_identity_check(&prof, lambda, &cc, alpha)?);
        }
    }
    verdict(worst < 1e-7, format!("max relative error {worst:.2e}"))
}

fn random_timed_path(rng: &mut ChaCha8Rng) -> Result<DiscretePath> {
    let m = random_masses(rng, 0.3, 3.0);
    let cc = central_configuration(&m, CcKind::ALL[rng.gen_range(0..5)])?;
    let n = rng.gen_range(8..30);
    let wobble: Vec6 = std::array::from_fn(|_| rng.gen_range(-0.15..0.15));
    let freq = rng.gen_range(1.0..4.0);
    let growth = rng.gen_range(0.5..3.0);
    let nodes: Vec<Vec6> = (0..n)
        .map(|k| {
            let u = k as f64 / (n - 1) as f64;
            let q: Vec6 = std::array::from_fn(|j| {
                (1.0 + growth * u) * cc.shape()[j] + (freq * u).sin() * wobble[j]
            });
            remove_center_of_mass(&q, &m)
        })
        .collect();
    let mut t = rng.gen_range(0.0..2.0);
    let times = (0..n)
        .map(|_| {
            t += rng.gen_range(0.3..1.7) / n as f64;
            t
        })
        .collect();
    DiscretePath::timed(m, nodes, times)
}

fn criterion_13() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut min_gap, mut worst_eq): (f64, f64) = (f64::INFINITY, 0.0);
    for _ in 0..50 {
        let p = random_timed_path(&mut rng)?;
        let (a, l) = (action(&p)?, jm_length(&p)?);
        min_gap = min_gap.min((a - l) / l);
        let z = zero_energy_timing(&p, 0.0)?;
        worst_eq = worst_eq.max((action(&z)? - l).abs() / l);
    }
    verdict(
        min_gap >= 0.0 && worst_eq < 1e-8,
        format!("min (action − length)/length {min_gap:.3e}, zero-energy equality {worst_eq:.2e}"),
    )
}

fn homothetic_path(cc: &CentralConfiguration, t0: f64, t1: f64, n: usize) -> Result<DiscretePath> {
    let orbit = HomotheticOrbit::new(cc.clone());
    let times: Vec<f64> = (0..n)
        .map(|k| t0 * (t1 / t0).powf(k as f64 / (n - 1) as f64))
        .collect();
    let nodes = times
        .iter()
        .map(|&t| orbit.position(t).map(|q| q.0))
        .collect::<Result<_>>()?;
    DiscretePath::timed(cc.masses, nodes, times)
}

fn criterion_14() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut euler_min = Vec::new();
    let spiraling = [
        MassTriple::equal(),
        MassTriple::new(1.0, 1.3, 0.8)?,
        MassTriple::new(2.0, 1.0, 1.5)?,
    ];
    for m in spiraling {
        for middle in 1..=3 {
            let nu = nu_parameter(&m, middle)?;
            if classify_nu(nu).ok() != Some(true) {
                continue;
            }
            let cc = euler(&m, middle)?;
            let prof = negative_profile(nu, 1.0, 64, [0.0; 6])?;
            let p = homothetic_path(&cc, prof.a, prof.b, 121)?;
            euler_min.push(local_minimizer_probe(&p, 3)?.min_eigenvalue);
        }
    }
    let mut lagrange_min = f64::INFINITY;
    for k in 0..10 {
        let m = random_masses(&mut rng, 0.2, 5.0);
        let o = if k % 2 == 0 {
            Orientation::Positive
        } else {
            Orientation::Negative
        };
        let p = homothetic_path(&lagrange(&m, o), 1.0, 4.0, 41)?;
        lagrange_min = lagrange_min.min(local_minimizer_probe(&p, 4)?.min_eigenvalue);
    }
    let euler_max = euler_min.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        euler_max < 0.0 && lagrange_min >= -1e-8,
        format!(
            "{} Euler windows, largest min eigenvalue {euler_max:.3e}; Lagrange [1,4] min eigenvalue {lagrange_min:.3e}",
            euler_min.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>); 14] = [
        ("central configuration residuals", criterion_1),
        ("restpoint eigenvalue oracle", criterion_2),
        ("equal-mass anchors", criterion_3),
        ("spiraling classifier", criterion_4),
        ("flow invariants", criterion_5),
        ("homothetic exactness", criterion_6),
        ("parabolic asymptotics", criterion_7),
        ("symplectic form conservation", criterion_8),
        ("Lagrange stable set and graph", criterion_9),
        ("negative direction certificate", criterion_10),
        ("second variation along an asymptotic orbit", criterion_11),
        ("scaling identity", criterion_12),
        ("JM length and action", criterion_13),
        ("local minimizer probe", criterion_14),
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (status, detail) = match f() {
            Ok(v) => (if v.pass { "PASS" } else { "FAIL" }, v.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "acceptance {n:2} {status} {name}: {detail} [{:.2} s]",
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
