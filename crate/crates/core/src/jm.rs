//! Action and Jacobi-Maupertuis length of discrete paths, zero-energy
//! retiming and a second-order local-minimality probe.
//!
//! A path is the cubic spline through its nodes in the chord-length parameter
//! `σ` (mass metric). A timed path carries node times, interpolated as a
//! spline `t(σ)`, so the geometry never depends on the timing. Then
//!
//! ```text
//! action = ∫ |q'(σ)|²/(2 t'(σ)) + U(q) t'(σ) dσ  ≥  ∫ sqrt(2U(q)) |q'(σ)| dσ = JM length
//! ```
//!
//! pointwise, with equality exactly where `K = U`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    euclidean_hessian, grad_potential, mass_dot, mass_norm, min_distance, potential,
    sphere_tangent_basis, sub, MassTriple, Vec6, COLLISION_CUTOFF,
};
use crate::linalg::simpson;
use crate::spline::{CubicSpline, MonotoneCubic};

/// Simpson intervals per path segment for action and length.
pub const QUADRATURE_POINTS: usize = 512;
/// Simpson intervals per path segment for the probe Hessian.
pub const PROBE_QUADRATURE_POINTS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub masses: MassTriple,
    pub nodes: Vec<Vec6>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub times: Option<Vec<f64>>,
}

impl DiscretePath {
    pub fn new(masses: MassTriple, nodes: Vec<Vec6>, times: Option<Vec<f64>>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidInput(
                "a path needs at least two nodes".into(),
            ));
        }
        for (k, q) in nodes.iter().enumerate() {
            if q.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("node {k} is not finite")));
            }
            let d = min_distance(q);
            if d <= COLLISION_CUTOFF {
                return Err(Error::InvalidInput(format!(
                    "node {k} is at collision (distance {d:e})"
                )));
            }
        }
        for (k, w) in nodes.windows(2).enumerate() {
            if mass_norm(&sub(&w[1], &w[0]), &masses) == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "nodes {k} and {} coincide",
                    k + 1
                )));
            }
        }
        if let Some(t) = &times {
            if t.len() != nodes.len() {
                return Err(Error::InvalidInput(format!(
                    "{} times for {} nodes",
                    t.len(),
                    nodes.len()
                )));
            }
            if t.windows(2).any(|w| !(w[1] > w[0])) || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(
                    "node times must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(Self {
            masses,
            nodes,
            times,
        })
    }

    pub fn geometric(masses: MassTriple, nodes: Vec<Vec6>) -> Result<Self> {
        Self::new(masses, nodes, None)
    }

    pub fn timed(masses: MassTriple, nodes: Vec<Vec6>, times: Vec<f64>) -> Result<Self> {
        Self::new(masses, nodes, Some(times))
    }

    pub fn is_timed(&self) -> bool {
        self.times.is_some()
    }

    /// Same nodes with new times.
    pub fn with_times(&self, times: Vec<f64>) -> Result<Self> {
        Self::new(self.masses, self.nodes.clone(), Some(times))
    }

    fn require_times(&self) -> Result<&[f64]> {
        self.times
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("operation needs a timed path".into()))
    }
}

/// Chord-length spline of the path geometry. A timed path also carries the
/// JM clock `τ(σ) = ∫ |q'|_m / sqrt(2U) dσ` at the nodes and the spline
/// `t = S(τ)` through the node times, so a zero-energy timing is exactly
/// linear in the clock. `S` is monotone, so any increasing node times give an
/// increasing time function.
struct Curve {
    masses: MassTriple,
    sigma: Vec<f64>,
    coords: Vec<CubicSpline>,
    clock: Option<(Vec<f64>, MonotoneCubic)>,
}

/// Curve sample: position, `dq/dσ`, time and `dt/dσ` (NaN when untimed).
struct Point {
    q: Vec6,
    dq: Vec6,
    t: f64,
    dt: f64,
}

impl Curve {
    fn new(path: &DiscretePath) -> Result<Self> {
        let mut sigma = vec![0.0];
        for w in path.nodes.windows(2) {
            let d = mass_norm(&sub(&w[1], &w[0]), &path.masses);
            sigma.push(sigma[sigma.len() - 1] + d);
        }
        let coords = (0..6)
            .map(|k| CubicSpline::new(sigma.clone(), path.nodes.iter().map(|q| q[k]).collect()))
            .collect::<Result<_>>()?;
        let mut curve = Self {
            masses: path.masses,
            sigma,
            coords,
            clock: None,
        };
        if let Some(times) = &path.times {
            let clock = curve.node_clock()?;
            let spline = MonotoneCubic::new(clock.clone(), times.clone())?;
            curve.clock = Some((clock, spline));
        }
        Ok(curve)
    }

    fn q(&self, s: f64) -> Vec6 {
        std::array::from_fn(|k| self.coords[k].eval(s))
    }

    fn dq(&self, s: f64) -> Vec6 {
        std::array::from_fn(|k| self.coords[k].derivative(s))
    }

    fn segments(&self) -> usize {
        self.sigma.len() - 1
    }

    /// Clock values at the nodes, starting at zero.
    fn node_clock(&self) -> Result<Vec<f64>> {
        let mut clock = vec![0.0];
        for seg in 0..self.segments() {
            let (h, g) = self.clock_rates(seg, QUADRATURE_POINTS)?;
            clock.push(clock[clock.len() - 1] + simpson(&g, h));
        }
        Ok(clock)
    }

    fn clock_rates(&self, seg: usize, points: usize) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (self.sigma[seg], self.sigma[seg + 1]);
        let h = (b - a) / points as f64;
        let g = (0..=points)
            .map(|j| {
                let s = a + h * j as f64;
                Ok(mass_norm(&self.dq(s), &self.masses)
                    / (2.0 * potential(&self.q(s), &self.masses)?).sqrt())
            })
            .collect::<Result<_>>()?;
        Ok((h, g))
    }

    /// Samples on a uniform grid of `points` intervals over segment `seg`,
    /// with the grid step.
    fn segment_points(&self, seg: usize, points: usize) -> Result<(f64, Vec<Point>)> {
        let a = self.sigma[seg];
        let (h, g) = self.clock_rates(seg, points)?;
        let mut out = Vec::with_capacity(points + 1);
        let mut tau = None;
        if let Some((clock, _)) = &self.clock {
            let mut cum = vec![0.0];
            for w in g.windows(2) {
                cum.push(cum[cum.len() - 1] + 0.5 * h * (w[0] + w[1]));
            }
            let total = cum[points];
            let (c0, c1) = (clock[seg], clock[seg + 1]);
            tau = Some(
                cum.iter()
                    .map(|x| c0 + (c1 - c0) * x / total)
                    .collect::<Vec<f64>>(),
            );
        }
        for j in 0..=points {
            let s = a + h * j as f64;
            let (t, dt) = match (&self.clock, &tau) {
                (Some((_, spline)), Some(tau)) => {
                    let dt = spline.derivative(tau[j]) * g[j];
                    if !(dt > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "interpolated time is not increasing near σ = {s}"
                        )));
                    }
                    (spline.eval(tau[j]), dt)
                }
                _ => (f64::NAN, f64::NAN),
            };
            out.push(Point {
                q: self.q(s),
                dq: self.dq(s),
                t,
                dt,
            });
        }
        Ok((h, out))
    }

    /// Simpson over each segment of `f(point)`.
    fn integrate_segments(
        &self,
        points: usize,
        mut f: impl FnMut(&Point) -> Result<f64>,
    ) -> Result<Vec<f64>> {
        (0..self.segments())
            .map(|seg| {
                let (h, pts) = self.segment_points(seg, points)?;
                let v: Vec<f64> = pts.iter().map(&mut f).collect::<Result<_>>()?;
                Ok(simpson(&v, h))
            })
            .collect()
    }
}

/// Composite Simpson weight of grid index `j` out of `points` intervals.
fn simpson_weight(j: usize, points: usize, h: f64) -> f64 {
    h / 3.0
        * if j == 0 || j == points {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        }
}

/// `∫ K + U dt` along a timed path.
pub fn action(path: &DiscretePath) -> Result<f64> {
    path.require_times()?;
    let c = Curve::new(path)?;
    let m = &path.masses;
    Ok(c.integrate_segments(QUADRATURE_POINTS, |p| {
        Ok(0.5 * mass_dot(&p.dq, &p.dq, m) / p.dt + potential(&p.q, m)? * p.dt)
    })?
    .iter()
    .sum())
}

/// `∫ sqrt(2 U(q)) |dq|_m`, independent of the node times.
pub fn jm_length(path: &DiscretePath) -> Result<f64> {
    let c = Curve::new(path)?;
    let m = &path.masses;
    Ok(c.integrate_segments(QUADRATURE_POINTS, |p| {
        Ok((2.0 * potential(&p.q, m)?).sqrt() * mass_norm(&p.dq, m))
    })?
    .iter()
    .sum())
}

/// Times with `|dq/dt|_m = sqrt(2U)`, starting at `t_start`.
pub fn zero_energy_timing(path: &DiscretePath, t_start: f64) -> Result<DiscretePath> {
    if !t_start.is_finite() {
        return Err(Error::InvalidInput("start time must be finite".into()));
    }
    let geometric = DiscretePath::geometric(path.masses, path.nodes.clone())?;
    let clock = Curve::new(&geometric)?.node_clock()?;
    path.with_times(clock.iter().map(|c| t_start + c).collect())
}

/// Kinetic and potential energy at each node of a timed path.
pub fn node_energies(path: &DiscretePath) -> Result<Vec<(f64, f64)>> {
    path.require_times()?;
    let c = Curve::new(path)?;
    let m = &path.masses;
    let mut out = Vec::with_capacity(path.nodes.len());
    for seg in 0..c.segments() {
        let (_, pts) = c.segment_points(seg, 2)?;
        let mut ends = vec![&pts[0]];
        if seg + 1 == c.segments() {
            ends.push(&pts[2]);
        }
        for p in ends {
            out.push((
                0.5 * mass_dot(&p.dq, &p.dq, m) / (p.dt * p.dt),
                potential(&p.q, m)?,
            ));
        }
    }
    Ok(out)
}

/// Result of [`local_minimizer_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub n_modes: usize,
    /// Eigenvalues of the action Hessian in a frame of the probe directions
    /// orthonormal in the probe metric, ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Largest `|H_ij - H_ji|` before symmetrization.
    pub asymmetry: f64,
    /// Coefficients of the worst direction on the raw probe directions; the
    /// last entry is the time dilation.
    pub coefficients: Vec<f64>,
    /// Worst displacement at each node.
    pub direction_at_nodes: Vec<Vec6>,
}

/// Probe directions `R(t) (t/t0)^{-1/6} sin(jπ log(t/t0)/log(t1/t0)) e_l` for
/// `j = 1..n_modes` and a mass-orthonormal basis `e_l` of centered
/// configurations; `R` is the size of the path.
struct Modes {
    t0: f64,
    span: f64,
    n_modes: usize,
    basis: [Vec6; 4],
}

impl Modes {
    fn new(path: &DiscretePath, times: &[f64], n_modes: usize) -> Result<Self> {
        let t0 = times[0];
        let t1 = times[times.len() - 1];
        if !(t0 > 0.0) {
            return Err(Error::InvalidInput(
                "probe needs positive node times".into(),
            ));
        }
        let mid = &path.nodes[path.nodes.len() / 2];
        let s = crate::geometry::normalize(mid, &path.masses)?.1.s;
        let [e1, e2, e3] = sphere_tangent_basis(&s, &path.masses);
        Ok(Self {
            t0,
            span: (t1 / t0).ln(),
            n_modes,
            basis: [s, e1, e2, e3],
        })
    }

    fn count(&self) -> usize {
        4 * self.n_modes
    }

    /// Scalar profile `j` and its time derivative, times the path size `r`
    /// and its derivative `dr`.
    fn profile(&self, j: usize, t: f64, r: f64, dr: f64) -> (f64, f64) {
        let x = (t / self.t0).ln();
        let k = (j + 1) as f64 * std::f64::consts::PI / self.span;
        let env = (-x / 6.0).exp();
        let f = env * (k * x).sin();
        let df = env * (k * (k * x).cos() - (k * x).sin() / 6.0) / t;
        (r * f, dr * f + r * df)
    }

    /// Weight of the probe metric `∫ |η|²_m (t/t0)^{1/3} / R² dt/t`, in which
    /// the sine modes are orthonormal up to a constant on a homothetic path.
    fn metric_weight(&self, t: f64, r: f64) -> f64 {
        (t / self.t0).cbrt() / (r * r * t)
    }

    /// Displacement fields `η_i` and their time derivatives.
    fn fields(&self, t: f64, r: f64, dr: f64) -> Vec<(Vec6, Vec6)> {
        let mut out = Vec::with_capacity(self.count());
        for j in 0..self.n_modes {
            let (f, df) = self.profile(j, t, r, dr);
            for e in &self.basis {
                out.push((
                    std::array::from_fn(|k| f * e[k]),
                    std::array::from_fn(|k| df * e[k]),
                ));
            }
        }
        out
    }
}

/// Hessian of the action over the probe directions plus a uniform dilation of
/// the times about the first node (the free-time direction).
pub fn local_minimizer_probe(path: &DiscretePath, n_modes: usize) -> Result<ProbeResult> {
    let times = path.require_times()?.to_vec();
    if n_modes == 0 {
        return Err(Error::InvalidInput("at least one mode is required".into()));
    }
    let c = Curve::new(path)?;
    let m = &path.masses;
    let modes = Modes::new(path, &times, n_modes)?;
    let n = modes.count() + 1;
    let d = n - 1;
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for seg in 0..c.segments() {
        let (h, pts) = c.segment_points(seg, PROBE_QUADRATURE_POINTS)?;
        for (j, p) in pts.iter().enumerate() {
            // dt = t'(σ) dσ
            let wt = simpson_weight(j, PROBE_QUADRATURE_POINTS, h) * p.dt;
            let qdot: Vec6 = std::array::from_fn(|k| p.dq[k] / p.dt);
            let r = mass_norm(&p.q, m);
            let dr = mass_dot(&p.q, &qdot, m) / r;
            let hq = euclidean_hessian(&p.q, m)?;
            let g = grad_potential(&p.q, m)?;
            let f = modes.fields(p.t, r, dr);
            let wn = wt * modes.metric_weight(p.t, r);
            let hf: Vec<Vec6> = f
                .iter()
                .map(|(e, _)| {
                    let v = hq * nalgebra::Vector6::from_column_slice(e);
                    std::array::from_fn(|k| v[k])
                })
                .collect();
            for a in 0..d {
                for b in 0..d {
                    let kin = mass_dot(&f[a].1, &f[b].1, m);
                    let pot: f64 = (0..6).map(|k| f[a].0[k] * hf[b][k]).sum();
                    hess[(a, b)] += wt * (kin + pot);
                    gram[(a, b)] += wn * mass_dot(&f[a].0, &f[b].0, m);
                }
                // d²/dδ dc: -<q', η'>_m + ∇U·η (∇_m U = M⁻¹∇U, so use Euclidean dot)
                let eu: f64 = (0..6).map(|k| g[k] * m.coord_mass(k) * f[a].0[k]).sum();
                let mix = -mass_dot(&qdot, &f[a].1, m) + eu;
                hess[(a, d)] += wt * mix;
                hess[(d, a)] += wt * mix;
            }
            hess[(d, d)] += wt * mass_dot(&qdot, &qdot, m);
        }
    }
    let asymmetry = (&hess - hess.transpose()).abs().max();
    let hess = (&hess + hess.transpose()) * 0.5;

    // orthonormal frame of the probe metric; the dilation is normalized by its own Hessian
    // scale, which keeps signs and makes the block dimensionless
    let chol = nalgebra::Cholesky::new((&gram + gram.transpose()) * 0.5)
        .ok_or_else(|| Error::Convergence("probe directions are linearly dependent".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Convergence("probe Gram matrix is singular".into()))?;
    let delta_scale = hess[(d, d)].abs().sqrt().max(f64::MIN_POSITIVE);
    let mut t = DMatrix::<f64>::zeros(n, n);
    t.view_mut((0, 0), (d, d)).copy_from(&l_inv.transpose());
    t[(d, d)] = 1.0 / delta_scale;
    let reduced = t.transpose() * &hess * &t;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let worst = eig.eigenvectors.column(order[0]);
    let coeffs = &t * worst;
    let coefficients: Vec<f64> = coeffs.iter().copied().collect();

    let mut direction_at_nodes = Vec::with_capacity(path.nodes.len());
    for seg in 0..c.segments() {
        let (_, pts) = c.segment_points(seg, 2)?;
        let ends: &[usize] = if seg + 1 == c.segments() {
            &[0, 2]
        } else {
            &[0]
        };
        for &i in ends {
            let p = &pts[i];
            let qdot: Vec6 = std::array::from_fn(|k| p.dq[k] / p.dt);
            let r = mass_norm(&p.q, m);
            let dr = mass_dot(&p.q, &qdot, m) / r;
            let f = modes.fields(p.t, r, dr);
            direction_at_nodes.push(std::array::from_fn(|k| {
                (0..d).map(|a| coefficients[a] * f[a].0[k]).sum()
            }));
        }
    }

    Ok(ProbeResult {
        n_modes,
        min_eigenvalue: eigenvalues[0],
        eigenvalues,
        asymmetry,
        coefficients,
        direction_at_nodes,
    })
}

/// Cosine in the probe metric between the worst probe displacement and
/// `field` along a timed path.
pub fn direction_cosine(
    path: &DiscretePath,
    probe: &ProbeResult,
    field: impl Fn(f64) -> Result<Vec6>,
) -> Result<f64> {
    let times = path.require_times()?.to_vec();
    let c = Curve::new(path)?;
    let m = &path.masses;
    let modes = Modes::new(path, &times, probe.n_modes)?;
    let d = modes.count();
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for seg in 0..c.segments() {
        let (h, pts) = c.segment_points(seg, PROBE_QUADRATURE_POINTS)?;
        for (j, p) in pts.iter().enumerate() {
            let qdot: Vec6 = std::array::from_fn(|k| p.dq[k] / p.dt);
            let r = mass_norm(&p.q, m);
            let dr = mass_dot(&p.q, &qdot, m) / r;
            let f = modes.fields(p.t, r, dr);
            let eta: Vec6 =
                std::array::from_fn(|k| (0..d).map(|a| probe.coefficients[a] * f[a].0[k]).sum());
            let g = field(p.t)?;
            let wt =
                simpson_weight(j, PROBE_QUADRATURE_POINTS, h) * p.dt * modes.metric_weight(p.t, r);
            ab += wt * mass_dot(&eta, &g, m);
            aa += wt * mass_dot(&eta, &eta, m);
            bb += wt * mass_dot(&g, &g, m);
        }
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::InvalidInput("cosine with a zero field".into()));
    }
    Ok(ab / (aa * bb).sqrt())
}
