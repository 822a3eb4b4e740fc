//! Mass-metric geometry and the Newtonian potential.
//!
//! All vectors are flat `[f64; 6]` arrays ordered `(q1x, q1y, q2x, q2y, q3x, q3y)`.
//! The mass metric is `<v, w>_m = sum_i m_i v_i . w_i`.

use std::ops::Deref;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec6 = [f64; 6];

/// Pairwise distances below this are treated as a collision.
pub const COLLISION_CUTOFF: f64 = 1e-13;

/// Tolerance on the center of mass accepted by [`normalize`].
pub const CENTERING_TOLERANCE: f64 = 1e-10;

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Three positive point masses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct MassTriple {
    m: [f64; 3],
    total: f64,
}

impl MassTriple {
    pub fn new(m1: f64, m2: f64, m3: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(m1) && ok(m2) && ok(m3)) {
            return Err(Error::InvalidMass(m1, m2, m3));
        }
        Ok(Self {
            m: [m1, m2, m3],
            total: m1 + m2 + m3,
        })
    }

    pub fn equal() -> Self {
        Self::new(1.0, 1.0, 1.0).unwrap()
    }

    /// Masses as an array, indexed from zero.
    pub fn masses(&self) -> [f64; 3] {
        self.m
    }

    /// Mass of body `i` (zero based).
    pub fn get(&self, i: usize) -> f64 {
        self.m[i]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// New triple whose body `k` carries the mass of body `perm[k]` here.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        Self::new(self.m[perm[0]], self.m[perm[1]], self.m[perm[2]]).unwrap()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.m[0] * factor, self.m[1] * factor, self.m[2] * factor)
    }

    /// Same mass ratios, rescaled to sum to one.
    pub fn barycentric(&self) -> Self {
        self.scaled(1.0 / self.total).unwrap()
    }

    /// Mass attached to flat coordinate index `k` in `0..6`.
    #[inline]
    pub fn coord_mass(&self, k: usize) -> f64 {
        self.m[k / 2]
    }

    /// Diagonal mass matrix `diag(m1, m1, m2, m2, m3, m3)`.
    pub fn mass_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&nalgebra::Vector6::from_fn(|k, _| self.coord_mass(k)))
    }
}

impl TryFrom<[f64; 3]> for MassTriple {
    type Error = Error;

    fn try_from(m: [f64; 3]) -> Result<Self> {
        Self::new(m[0], m[1], m[2])
    }
}

impl From<MassTriple> for [f64; 3] {
    fn from(m: MassTriple) -> Self {
        m.m
    }
}

/// Positions of the three bodies. Serializes as a JSON array of six numbers.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec6);

/// Velocities of the three bodies, same layout as [`Configuration`].
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Velocity(pub Vec6);

impl Deref for Configuration {
    type Target = Vec6;
    fn deref(&self) -> &Vec6 {
        &self.0
    }
}

impl Deref for Velocity {
    type Target = Vec6;
    fn deref(&self) -> &Vec6 {
        &self.0
    }
}

impl From<Vec6> for Configuration {
    fn from(q: Vec6) -> Self {
        Self(q)
    }
}

impl Configuration {
    pub fn body(&self, i: usize) -> [f64; 2] {
        body(&self.0, i)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.0, i, j)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(scale(&self.0, factor))
    }

    /// Translate so that the center of mass sits at the origin.
    pub fn centered(&self, m: &MassTriple) -> Self {
        Self(remove_center_of_mass(&self.0, m))
    }
}

/// A centered configuration on the unit sphere `I(s) = 1`, together with the
/// residuals of both constraints as measured at construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedConfiguration {
    pub s: Vec6,
    pub com_residual: f64,
    pub sphere_residual: f64,
}

impl NormalizedConfiguration {
    /// Wrap `s` without modifying it, recording how far it is from the
    /// constraint set.
    pub fn from_raw(s: Vec6, m: &MassTriple) -> Self {
        let c = center_of_mass_moment(&s, m);
        Self {
            s,
            com_residual: c[0].abs().max(c[1].abs()),
            sphere_residual: (mass_dot(&s, &s, m) - 1.0).abs(),
        }
    }

    /// Project an arbitrary nonzero vector onto the constraint set.
    pub fn project(q: &Vec6, m: &MassTriple) -> Result<Self> {
        let c = remove_center_of_mass(q, m);
        let r = mass_norm(&c, m);
        if r == 0.0 || !r.is_finite() {
            return Err(Error::ZeroConfiguration);
        }
        Ok(Self::from_raw(scale(&c, 1.0 / r), m))
    }

    pub fn configuration(&self) -> Configuration {
        Configuration(self.s)
    }
}

impl Deref for NormalizedConfiguration {
    type Target = Vec6;
    fn deref(&self) -> &Vec6 {
        &self.s
    }
}

// Small vector helpers shared by the whole crate.

#[inline]
pub fn body(q: &Vec6, i: usize) -> [f64; 2] {
    [q[2 * i], q[2 * i + 1]]
}

#[inline]
pub fn distance(q: &Vec6, i: usize, j: usize) -> f64 {
    (q[2 * i] - q[2 * j]).hypot(q[2 * i + 1] - q[2 * j + 1])
}

#[inline]
pub fn scale(q: &Vec6, factor: f64) -> Vec6 {
    q.map(|x| x * factor)
}

#[inline]
pub fn add(a: &Vec6, b: &Vec6) -> Vec6 {
    std::array::from_fn(|k| a[k] + b[k])
}

#[inline]
pub fn sub(a: &Vec6, b: &Vec6) -> Vec6 {
    std::array::from_fn(|k| a[k] - b[k])
}

/// `a + factor * b`
#[inline]
pub fn axpy(a: &Vec6, factor: f64, b: &Vec6) -> Vec6 {
    std::array::from_fn(|k| a[k] + factor * b[k])
}

#[inline]
pub fn mass_dot(a: &Vec6, b: &Vec6, m: &MassTriple) -> f64 {
    (0..6).map(|k| m.coord_mass(k) * a[k] * b[k]).sum()
}

#[inline]
pub fn mass_norm(a: &Vec6, m: &MassTriple) -> f64 {
    mass_dot(a, a, m).sqrt()
}

/// Euclidean norm of the flat vector.
#[inline]
pub fn norm(a: &Vec6) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `sum_i m_i q_i`
pub fn center_of_mass_moment(q: &Vec6, m: &MassTriple) -> [f64; 2] {
    let mut c = [0.0; 2];
    for i in 0..3 {
        c[0] += m.get(i) * q[2 * i];
        c[1] += m.get(i) * q[2 * i + 1];
    }
    c
}

pub fn remove_center_of_mass(q: &Vec6, m: &MassTriple) -> Vec6 {
    let c = center_of_mass_moment(q, m);
    let (cx, cy) = (c[0] / m.total(), c[1] / m.total());
    std::array::from_fn(|k| q[k] - if k % 2 == 0 { cx } else { cy })
}

/// Each planar vector rotated by +90 degrees.
pub fn rotate_quarter(q: &Vec6) -> Vec6 {
    [-q[1], q[0], -q[3], q[2], -q[5], q[4]]
}

/// Reflection `y -> -y` of every body.
pub fn reflect(q: &Vec6) -> Vec6 {
    [q[0], -q[1], q[2], -q[3], q[4], -q[5]]
}

/// Reorder `(x1, y1, x2, y2, x3, y3)` into `(x1, x2, x3, y1, y2, y3)`.
pub fn to_xy_layout(q: &Vec6) -> Vec6 {
    [q[0], q[2], q[4], q[1], q[3], q[5]]
}

/// Inverse of [`to_xy_layout`].
pub fn from_xy_layout(q: &Vec6) -> Vec6 {
    [q[0], q[3], q[1], q[4], q[2], q[5]]
}

/// Permutation matrix `P` with `P * q == to_xy_layout(q)`.
pub fn xy_layout_permutation() -> Matrix6<f64> {
    let order = [0, 2, 4, 1, 3, 5];
    Matrix6::from_fn(|r, c| if order[r] == c { 1.0 } else { 0.0 })
}

fn check_collisions(q: &Vec6) -> Result<[f64; 3]> {
    let mut d = [0.0; 3];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        let r = distance(q, i, j);
        if !(r >= COLLISION_CUTOFF) {
            return Err(Error::Collision { i, j, distance: r });
        }
        d[k] = r;
    }
    Ok(d)
}

/// Smallest mutual distance of the configuration.
pub fn min_distance(q: &Vec6) -> f64 {
    PAIRS
        .iter()
        .map(|&(i, j)| distance(q, i, j))
        .fold(f64::INFINITY, f64::min)
}

/// `U(q) = sum_{i<j} m_i m_j / r_ij`, the negative of the potential energy.
pub fn potential(q: &Vec6, m: &MassTriple) -> Result<f64> {
    let d = check_collisions(q)?;
    Ok(PAIRS
        .iter()
        .zip(d)
        .map(|(&(i, j), r)| m.get(i) * m.get(j) / r)
        .sum())
}

/// `I(q) = <q, q>_m`. Only meaningful as the moment of inertia for centered `q`.
pub fn moment_of_inertia(q: &Vec6, m: &MassTriple) -> f64 {
    mass_dot(q, q, m)
}

/// Translation invariant moment of inertia `sum_{i<j} m_i m_j r_ij^2 / m`.
pub fn moment_of_inertia_pairwise(q: &Vec6, m: &MassTriple) -> f64 {
    PAIRS
        .iter()
        .map(|&(i, j)| m.get(i) * m.get(j) * distance(q, i, j).powi(2))
        .sum::<f64>()
        / m.total()
}

/// Kinetic energy `K(v) = <v, v>_m / 2`.
pub fn kinetic_energy(v: &Vec6, m: &MassTriple) -> f64 {
    0.5 * mass_dot(v, v, m)
}

/// Mass-metric gradient of `U`, i.e. the Newtonian acceleration `M^{-1} dU`.
pub fn grad_potential(q: &Vec6, m: &MassTriple) -> Result<Vec6> {
    let d = check_collisions(q)?;
    let mut g = [0.0; 6];
    for (&(i, j), r) in PAIRS.iter().zip(d) {
        let inv3 = 1.0 / (r * r * r);
        for c in 0..2 {
            let dq = q[2 * j + c] - q[2 * i + c];
            g[2 * i + c] += m.get(j) * dq * inv3;
            g[2 * j + c] -= m.get(i) * dq * inv3;
        }
    }
    Ok(g)
}

/// Euclidean Hessian `D^2 U(q)` built from the 2x2 blocks
/// `D_ij = m_i m_j / r_ij^3 (I - 3 u_ij u_ij^T)`, `D_ii = -sum_{j != i} D_ij`.
pub fn euclidean_hessian(q: &Vec6, m: &MassTriple) -> Result<Matrix6<f64>> {
    let d = check_collisions(q)?;
    let mut h = Matrix6::zeros();
    for (&(i, j), r) in PAIRS.iter().zip(d) {
        let u = [(q[2 * i] - q[2 * j]) / r, (q[2 * i + 1] - q[2 * j + 1]) / r];
        let k = m.get(i) * m.get(j) / (r * r * r);
        for a in 0..2 {
            for b in 0..2 {
                let id = if a == b { 1.0 } else { 0.0 };
                let block = k * (id - 3.0 * u[a] * u[b]);
                h[(2 * i + a, 2 * j + b)] += block;
                h[(2 * j + a, 2 * i + b)] += block;
                h[(2 * i + a, 2 * i + b)] -= block;
                h[(2 * j + a, 2 * j + b)] -= block;
            }
        }
    }
    Ok(h)
}

/// Jacobian of the mass gradient, `D grad_m U(q) = M^{-1} D^2 U(q)`.
///
/// `M * hessian_potential(q)` is symmetric.
pub fn hessian_potential(q: &Vec6, m: &MassTriple) -> Result<Matrix6<f64>> {
    let mut h = euclidean_hessian(q, m)?;
    for r in 0..6 {
        let inv = 1.0 / m.coord_mass(r);
        for c in 0..6 {
            h[(r, c)] *= inv;
        }
    }
    Ok(h)
}

/// Gradient of `U` restricted to the sphere `I = 1`: `grad_m U(s) + U(s) s`.
pub fn sphere_gradient(s: &Vec6, m: &MassTriple) -> Result<Vec6> {
    let g = grad_potential(s, m)?;
    let u = potential(s, m)?;
    Ok(axpy(&g, u, s))
}

/// Mass-orthonormal basis of the tangent space of the shape sphere at `s`:
/// centered vectors with `<s, e>_m = 0`. The first element is the rotation
/// direction `s_perp`.
pub fn sphere_tangent_basis(s: &Vec6, m: &MassTriple) -> [Vec6; 3] {
    let sqrt_m = m.total().sqrt();
    let mut fixed: Vec<Vec6> = vec![
        [1.0 / sqrt_m, 0.0, 1.0 / sqrt_m, 0.0, 1.0 / sqrt_m, 0.0],
        [0.0, 1.0 / sqrt_m, 0.0, 1.0 / sqrt_m, 0.0, 1.0 / sqrt_m],
        scale(s, 1.0 / mass_norm(s, m)),
    ];
    let mut basis = Vec::with_capacity(3);
    let mut candidates = vec![rotate_quarter(s)];
    candidates.extend((0..6).map(|k| {
        std::array::from_fn(|j| {
            if j == k {
                1.0 / m.coord_mass(k).sqrt()
            } else {
                0.0
            }
        })
    }));
    for c in candidates {
        let mut w = c;
        for _ in 0..2 {
            for b in fixed.iter() {
                w = axpy(&w, -mass_dot(b, &w, m), b);
            }
        }
        let n = mass_norm(&w, m);
        if n > 1e-6 {
            let e = scale(&w, 1.0 / n);
            fixed.push(e);
            basis.push(e);
            if basis.len() == 3 {
                break;
            }
        }
    }
    [basis[0], basis[1], basis[2]]
}

/// Split a centered nonzero configuration into size `r = sqrt(I(q))` and shape
/// `s = q / r`.
pub fn normalize(q: &Vec6, m: &MassTriple) -> Result<(f64, NormalizedConfiguration)> {
    let r = mass_norm(q, m);
    if r == 0.0 {
        return Err(Error::ZeroConfiguration);
    }
    let c = center_of_mass_moment(q, m);
    let residual = c[0].hypot(c[1]) / (m.total() * r);
    if residual > CENTERING_TOLERANCE {
        return Err(Error::NotCentered { residual });
    }
    Ok((r, NormalizedConfiguration::from_raw(scale(q, 1.0 / r), m)))
}
