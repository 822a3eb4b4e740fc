//! Restpoint spectra of the blown-up flow.
//!
//! At a restpoint `(s, z) = (c, v c)` with `v = ±sqrt(2 U(c))` the eight
//! exponents on the constrained tangent space are
//! `[±v, v, -v/2, 0, λ+(α1), λ-(α1), λ+(α2), λ-(α2)]`, where the first entry is
//! the radial direction (`+v` at collision, `-v` at infinity), `v` belongs to
//! `δz ∝ s`, the pair `{-v/2, 0}` comes from the rotation direction (α = 0) and
//! `λ±(α) = (-v ± sqrt(v² + 16α)) / 4` for the two nontrivial eigenvalues α of
//! the sphere Hessian `D∇̃U(c)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::central::{euler_quintic_root, euler_slots, CcKind, CentralConfiguration};
use crate::error::{Error, Result};
use crate::geometry::{
    hessian_potential, mass_dot, rotate_quarter, sphere_tangent_basis, MassTriple, Vec6,
};
use crate::linalg::{eigenvalues, euclidean_basis, multiset_distance, restrict};

/// Width of the band around `ν = 1/8` reported as indeterminate.
pub const SPIRAL_BOUNDARY_BAND: f64 = 1e-10;

/// Default smallest mass in the simplex scan.
pub const DEFAULT_SCAN_MARGIN: f64 = 1e-3;

/// Sign of the restpoint value `v0 = ±sqrt(2U)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" | "pos" | "positive" => Ok(Sign::Plus),
            "-" | "minus" | "neg" | "negative" => Ok(Sign::Minus),
            other => Err(Error::InvalidInput(format!("unknown sign '{other}'"))),
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(de)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Serialize complex lists as `[[re, im], ...]`.
pub mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], ser: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| [c.re, c.im])
            .collect::<Vec<_>>()
            .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<Complex64>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(de)?;
        Ok(raw
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

/// `k = Σ_{i<j} (m_i - m_j)² / (2 m²)`, the Lagrange mass parameter.
pub fn lagrange_k(m: &MassTriple) -> f64 {
    let [a, b, c] = m.masses();
    ((a - b).powi(2) + (a - c).powi(2) + (b - c).powi(2)) / (2.0 * m.total().powi(2))
}

/// Product `γ1 γ2 = 27 (m1m2 + m1m3 + m2m3) / (4 m²)` of the scaled Lagrange
/// eigenvalues.
pub fn lagrange_gamma_product(m: &MassTriple) -> f64 {
    let [a, b, c] = m.masses();
    27.0 * (a * b + a * c + b * c) / (4.0 * m.total().powi(2))
}

/// `ν` for slot masses `(a, b, c)` (middle `b`) at quintic root `r`.
pub fn nu_from_root(a: f64, b: f64, c: f64, r: f64) -> f64 {
    let r2 = r * r;
    let num = a * (1.0 + 3.0 * r + 3.0 * r2) + c * r2 * (3.0 + 3.0 * r + r2);
    let den = (a + c) * r2 + b * (1.0 + r).powi(2) * (1.0 + r2);
    num / den
}

/// The Euler shape parameter `ν` for the configuration with body `middle`
/// between the other two.
pub fn nu_parameter(m: &MassTriple, middle: usize) -> Result<f64> {
    let slots = euler_slots(middle)?;
    let r = euler_quintic_root(m, middle)?;
    Ok(nu_from_root(
        m.get(slots[0]),
        m.get(slots[1]),
        m.get(slots[2]),
        r,
    ))
}

/// Spiraling test `ν > 1/8`.
pub fn is_spiraling(m: &MassTriple, middle: usize) -> Result<bool> {
    classify_nu(nu_parameter(m, middle)?)
}

pub fn classify_nu(nu: f64) -> Result<bool> {
    if (nu - 0.125).abs() < SPIRAL_BOUNDARY_BAND {
        Err(Error::Boundary { nu })
    } else {
        Ok(nu > 0.125)
    }
}

/// The two nontrivial eigenvalues `(α1, α2)` of `D∇̃U(c)` with `α1 ≤ α2`:
/// `(3U/2)(1 ∓ sqrt(k))` for Lagrange and `(-Uν, U(3 + 2ν))` for Euler.
pub fn nontrivial_alphas(cc: &CentralConfiguration) -> Result<(f64, f64)> {
    let u = cc.potential;
    match cc.kind {
        CcKind::LagrangePositive | CcKind::LagrangeNegative => {
            let sk = lagrange_k(&cc.masses).sqrt();
            Ok((1.5 * u * (1.0 - sk), 1.5 * u * (1.0 + sk)))
        }
        CcKind::Euler(middle) => {
            let nu = nu_parameter(&cc.masses, middle)?;
            Ok((-u * nu, u * (3.0 + 2.0 * nu)))
        }
    }
}

/// Roots `(λ+, λ-)` of `λ² + v λ / 2 - α = 0`.
pub fn lambda_pair(v: f64, alpha: f64) -> (Complex64, Complex64) {
    let d = Complex64::new(v * v + 16.0 * alpha, 0.0).sqrt();
    ((-v + d) / 4.0, (-v - d) / 4.0)
}

/// An eigenpair of `D∇̃U(c)` on the tangent space of the shape sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentMode {
    pub alpha: f64,
    /// Mass-metric unit eigenvector.
    pub direction: Vec6,
}

/// Tangent eigenpairs of `D∇_m U(c) + U(c) Id` computed numerically:
/// `[rotation, α1, α2]` with the last two in increasing order.
pub fn tangent_modes(cc: &CentralConfiguration) -> Result<[TangentMode; 3]> {
    let m = &cc.masses;
    let s = cc.shape();
    let basis = sphere_tangent_basis(s, m);
    let d = hessian_potential(s, m)?;
    // symmetric in the mass metric, so E^T M D E is symmetric in an
    // orthonormal basis E
    let red = Matrix3::from_fn(|i, j| {
        let col = d * nalgebra::Vector6::from_column_slice(&basis[j]);
        let col: Vec6 = std::array::from_fn(|k| col[k]);
        mass_dot(&basis[i], &col, m)
    });
    let red = (red + red.transpose()) * 0.5;
    let eig = SymmetricEigen::new(red);
    let mut modes: Vec<TangentMode> = (0..3)
        .map(|k| {
            let c = eig.eigenvectors.column(k);
            let dir: Vec6 = std::array::from_fn(|j| (0..3).map(|i| c[i] * basis[i][j]).sum());
            TangentMode {
                alpha: eig.eigenvalues[k] + cc.potential,
                direction: dir,
            }
        })
        .collect();
    let sp = rotate_quarter(s);
    let rot = (0..3)
        .max_by(|&a, &b| {
            mass_dot(&modes[a].direction, &sp, m)
                .abs()
                .total_cmp(&mass_dot(&modes[b].direction, &sp, m).abs())
        })
        .unwrap();
    let rotation = modes.remove(rot);
    modes.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok([rotation, modes[0], modes[1]])
}

/// Numerical agreement between the closed-form list and dense eigensolves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    /// Eigenvalues of `B` restricted to the six-dimensional constrained
    /// subspace.
    #[serde(with = "complex_pairs")]
    pub numeric_b: Vec<Complex64>,
    /// Eigenvalues of `A` restricted to the eight-dimensional constrained
    /// tangent space.
    #[serde(with = "complex_pairs")]
    pub numeric_a: Vec<Complex64>,
    pub discrepancy_b: f64,
    pub discrepancy_a: f64,
    /// Largest amount by which either subspace fails to be invariant.
    pub invariance_defect: f64,
}

impl CrossCheck {
    pub fn discrepancy(&self) -> f64 {
        self.discrepancy_a.max(self.discrepancy_b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub cc_kind: CcKind,
    pub masses: MassTriple,
    pub sign: Sign,
    pub v0: f64,
    pub at_infinity: bool,
    pub alphas: (f64, f64),
    /// `[±v, v, -v/2, 0, λ+(α1), λ-(α1), λ+(α2), λ-(α2)]`
    #[serde(with = "complex_pairs")]
    pub eigenvalues: Vec<Complex64>,
    pub k: Option<f64>,
    pub nu: Option<f64>,
    pub spiraling: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crosscheck: Option<CrossCheck>,
}

impl SpectralReport {
    /// The six exponents of the `(δs, δz)` block on the constrained subspace.
    pub fn constrained_eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues[2..]
    }

    /// Counts of (positive, negative, zero) real parts with tolerance `tol`.
    pub fn sign_pattern(&self, tol: f64) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for e in &self.eigenvalues {
            if e.re > tol {
                out.0 += 1;
            } else if e.re < -tol {
                out.1 += 1;
            } else {
                out.2 += 1;
            }
        }
        out
    }
}

/// Closed-form restpoint exponents.
pub fn restpoint_eigenvalues(
    cc: &CentralConfiguration,
    sign: Sign,
    at_infinity: bool,
) -> Result<SpectralReport> {
    let v = sign.value() * cc.v0();
    let (a1, a2) = nontrivial_alphas(cc)?;
    let (p1, n1) = lambda_pair(v, a1);
    let (p2, n2) = lambda_pair(v, a2);
    let radial = if at_infinity { -v } else { v };
    let c = |x: f64| Complex64::new(x, 0.0);
    let eigenvalues = vec![c(radial), c(v), c(-0.5 * v), c(0.0), p1, n1, p2, n2];
    let (k, nu, spiraling) = match cc.kind {
        CcKind::Euler(middle) => {
            let nu = nu_parameter(&cc.masses, middle)?;
            (None, Some(nu), Some(nu > 0.125))
        }
        _ => (Some(lagrange_k(&cc.masses)), None, None),
    };
    Ok(SpectralReport {
        cc_kind: cc.kind,
        masses: cc.masses,
        sign,
        v0: v,
        at_infinity,
        alphas: (a1, a2),
        eigenvalues,
        k,
        nu,
        spiraling,
        crosscheck: None,
    })
}

/// The 13x13 linearization `A` of the blown-up field at the restpoint and the
/// 12x12 block `B = [[-v I, I], [D∇_m U(c), v/2 I]]`.
pub fn build_variational_matrices(
    cc: &CentralConfiguration,
    sign: Sign,
    at_infinity: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = &cc.masses;
    let s = cc.shape();
    let v = sign.value() * cc.v0();
    let z: Vec6 = std::array::from_fn(|k| v * s[k]);
    let d = hessian_potential(s, m)?;
    let mz: Vec6 = std::array::from_fn(|k| m.coord_mass(k) * z[k]);
    let ms: Vec6 = std::array::from_fn(|k| m.coord_mass(k) * s[k]);

    let mut a = DMatrix::zeros(13, 13);
    a[(0, 0)] = if at_infinity { -v } else { v };
    for i in 0..6 {
        for j in 0..6 {
            let id = if i == j { 1.0 } else { 0.0 };
            a[(1 + i, 1 + j)] = -v * id - s[i] * mz[j];
            a[(1 + i, 7 + j)] = id - s[i] * ms[j];
            a[(7 + i, 1 + j)] = d[(i, j)] + 0.5 * z[i] * mz[j];
            a[(7 + i, 7 + j)] = 0.5 * v * id + 0.5 * z[i] * ms[j];
        }
    }

    let mut b = DMatrix::zeros(12, 12);
    for i in 0..6 {
        b[(i, i)] = -v;
        b[(i, 6 + i)] = 1.0;
        b[(6 + i, 6 + i)] = 0.5 * v;
        for j in 0..6 {
            b[(6 + i, j)] = d[(i, j)];
        }
    }
    Ok((a, b))
}

fn embed(len: usize, offset: usize, v: &Vec6) -> DVector<f64> {
    let mut out = DVector::zeros(len);
    for k in 0..6 {
        out[offset + k] = v[k];
    }
    out
}

/// Dense eigensolves of `B` on `{δs, δz centered and mass-orthogonal to c}` and
/// of `A` on the eight-dimensional constrained tangent space, compared to the
/// closed-form list.
pub fn numeric_crosscheck(
    cc: &CentralConfiguration,
    report: &SpectralReport,
) -> Result<CrossCheck> {
    let (a, b) = build_variational_matrices(cc, report.sign, report.at_infinity)?;
    let tangent = sphere_tangent_basis(cc.shape(), &cc.masses);

    let mut span_b = Vec::with_capacity(6);
    for e in &tangent {
        span_b.push(embed(12, 0, e));
        span_b.push(embed(12, 6, e));
    }
    let basis_b = euclidean_basis(&span_b, 1e-10);
    let (rb, leak_b) = restrict(&b, &basis_b);
    let numeric_b = eigenvalues(&rb);

    let mut span_a = vec![embed(13, 7, cc.shape())];
    let mut radial = DVector::zeros(13);
    radial[0] = 1.0;
    span_a.push(radial);
    for e in &tangent {
        span_a.push(embed(13, 1, e));
        span_a.push(embed(13, 7, e));
    }
    let basis_a = euclidean_basis(&span_a, 1e-10);
    let (ra, leak_a) = restrict(&a, &basis_a);
    let numeric_a = eigenvalues(&ra);

    Ok(CrossCheck {
        discrepancy_b: multiset_distance(&numeric_b, report.constrained_eigenvalues()),
        discrepancy_a: multiset_distance(&numeric_a, &report.eigenvalues),
        numeric_b,
        numeric_a,
        invariance_defect: leak_a.max(leak_b),
    })
}

/// [`restpoint_eigenvalues`] with the numeric cross-check attached.
pub fn checked_restpoint_eigenvalues(
    cc: &CentralConfiguration,
    sign: Sign,
    at_infinity: bool,
) -> Result<SpectralReport> {
    let mut report = restpoint_eigenvalues(cc, sign, at_infinity)?;
    report.crosscheck = Some(numeric_crosscheck(cc, &report)?);
    Ok(report)
}

/// Matrices used by the closed-form derivations.
#[derive(Clone, Debug, PartialEq)]
pub enum AppendixMatrix {
    /// `P = (I/U) M⁻¹ D²U` at an equilateral configuration.
    P(Matrix6<f64>),
    /// The collinear block `C` with `M⁻¹ D²U = diag(2C, -C)` in the
    /// `(x1, x2, x3, y1, y2, y3)` layout.
    C(Matrix3<f64>),
}

pub fn appendix_matrices(cc: &CentralConfiguration) -> Result<AppendixMatrix> {
    let m = &cc.masses;
    let s = cc.shape();
    match cc.kind {
        CcKind::Euler(_) => {
            let x = [s[0], s[2], s[4]];
            let mut c = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let w = m.get(j) / (x[i] - x[j]).abs().powi(3);
                        c[(i, j)] = -w;
                        c[(i, i)] += w;
                    }
                }
            }
            Ok(AppendixMatrix::C(c))
        }
        _ => {
            let inertia = mass_dot(s, s, m);
            Ok(AppendixMatrix::P(
                hessian_potential(s, m)? * (inertia / cc.potential),
            ))
        }
    }
}

/// One point of the mass-simplex scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassMapCell {
    /// Barycentric masses summing to one.
    pub masses: [f64; 3],
    /// Lattice indices `(i, j, k)` with `i + j + k = N - 1`.
    pub index: [usize; 3],
    pub nu_values: [f64; 3],
    /// `None` marks the indeterminate band around `ν = 1/8`.
    pub spiral_flags: [Option<bool>; 3],
    pub in_spiraling_range: Option<bool>,
}

fn combine_flags(flags: &[Option<bool>; 3]) -> Option<bool> {
    if flags.iter().any(|f| *f == Some(false)) {
        Some(false)
    } else if flags.iter().all(|f| *f == Some(true)) {
        Some(true)
    } else {
        None
    }
}

/// Evaluate the three Euler classifications at barycentric masses.
pub fn mass_map_cell(index: [usize; 3], resolution: usize) -> Result<MassMapCell> {
    let d = (resolution - 1) as f64;
    let masses = index.map(|i| i as f64 / d);
    let m = MassTriple::new(masses[0], masses[1], masses[2])?;
    let mut nu_values = [0.0; 3];
    let mut spiral_flags = [None; 3];
    for k in 0..3 {
        nu_values[k] = nu_parameter(&m, k + 1)?;
        spiral_flags[k] = classify_nu(nu_values[k]).ok();
    }
    Ok(MassMapCell {
        masses,
        index,
        nu_values,
        spiral_flags,
        in_spiraling_range: combine_flags(&spiral_flags),
    })
}

/// Triangular lattice with `resolution` points per edge over the simplex
/// `m1 + m2 + m3 = 1`, excluding cells with any mass below `margin` and
/// the edge cells with a zero mass. Cells are ordered by `i` then `j`.
pub fn spiraling_region_scan(resolution: usize, margin: f64) -> Result<Vec<MassMapCell>> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    let n = resolution - 1;
    let d = n as f64;
    let indices: Vec<[usize; 3]> = (0..=n)
        .flat_map(|i| (0..=n - i).map(move |j| [i, j, n - i - j]))
        .filter(|idx| idx.iter().all(|&c| c > 0 && c as f64 / d >= margin))
        .collect();
    indices
        .par_iter()
        .map(|&idx| mass_map_cell(idx, resolution))
        .collect()
}

fn flag_code(f: Option<bool>) -> &'static str {
    match f {
        Some(true) => "1",
        Some(false) => "0",
        None => "-1",
    }
}

/// Floats with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `m1,m2,m3,nu1,nu2,nu3,spiral1,spiral2,spiral3,all`.
pub fn write_mass_map_csv<W: Write>(cells: &[MassMapCell], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "m1", "m2", "m3", "nu1", "nu2", "nu3", "spiral1", "spiral2", "spiral3", "all",
    ])?;
    for c in cells {
        let mut rec: Vec<String> = c
            .masses
            .iter()
            .chain(&c.nu_values)
            .map(|&x| format_f64(x))
            .collect();
        rec.extend(c.spiral_flags.iter().map(|&f| flag_code(f).to_string()));
        rec.push(flag_code(c.in_spiraling_range).to_string());
        w.write_record(&rec)?;
    }
    w.flush()
}
