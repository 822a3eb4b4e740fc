//! Small dense linear-algebra helpers shared by the spectral and flow code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Orthonormalizes `vectors` with respect to the inner product `gram`
/// (modified Gram-Schmidt, two passes). Vectors that become numerically
/// dependent (relative norm below `drop_tol`) are dropped.
pub fn orthonormalize(
    vectors: &[DVector<f64>],
    gram: &DMatrix<f64>,
    drop_tol: f64,
) -> Vec<DVector<f64>> {
    let dot = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * gram * b)[(0, 0)];
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let original = dot(v, v).sqrt();
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w -= b * c;
            }
        }
        let n = dot(&w, &w).sqrt();
        if n > drop_tol * original {
            basis.push(w / n);
        }
    }
    basis
}

/// Orthonormal basis (Euclidean) for the span of the given vectors.
pub fn euclidean_basis(vectors: &[DVector<f64>], drop_tol: f64) -> DMatrix<f64> {
    let n = vectors.first().map_or(0, |v| v.len());
    let basis = orthonormalize(vectors, &DMatrix::identity(n, n), drop_tol);
    DMatrix::from_columns(&basis)
}

/// Matrix of `op` restricted to the column space of the Euclidean-orthonormal
/// `basis`, together with the norm of the part of `op * basis` that leaves the
/// subspace (zero for an invariant subspace).
pub fn restrict(op: &DMatrix<f64>, basis: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let image = op * basis;
    let reduced = basis.transpose() * &image;
    let leak = (&image - basis * &reduced).norm();
    (reduced, leak)
}

/// Eigenvalues of a real square matrix, sorted by real then imaginary part.
pub fn eigenvalues(mat: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = mat
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    sort_complex(&mut ev);
    ev
}

pub fn sort_complex(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Smallest achievable maximum distance when pairing the two multisets
/// one-to-one. Returns infinity when their sizes differ.
///
/// Exhaustive over permutations, so intended for short lists (at most 9).
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    assert!(
        n <= 9,
        "multiset_distance is exhaustive; {n} entries is too many"
    );
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let mut used = vec![false; n];
    let mut best = f64::INFINITY;
    fn search(row: usize, cur: f64, cost: &[Vec<f64>], used: &mut [bool], best: &mut f64) {
        if cur >= *best {
            return;
        }
        if row == cost.len() {
            *best = cur;
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                search(row + 1, cur.max(cost[row][j]), cost, used, best);
                used[j] = false;
            }
        }
    }
    search(0, 0.0, &cost, &mut used, &mut best);
    if n == 0 {
        0.0
    } else {
        best
    }
}

/// 2-norm condition number from the singular values.
pub fn condition_number(mat: &DMatrix<f64>) -> f64 {
    let sv = mat.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Ordinary least-squares line `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Composite Simpson rule on uniformly spaced samples (even interval count).
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(
        n >= 2 && n % 2 == 0,
        "Simpson needs an even number of intervals"
    );
    let mut s = values[0] + values[n];
    for (k, v) in values.iter().enumerate().take(n).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}
