//! Shared numeric machinery: Hermitian eigendecompositions, exact matrix
//! exponentials of (anti-)Hermitian generators, Gaussian quadrature nodes,
//! scalar root finding, and seeded random-matrix helpers.
//!
//! Matrix exponentials go through eigendecomposition, never series summation:
//! every generator in this crate is Hermitian or anti-Hermitian, so the
//! eigenroute is exact up to the eigensolver.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
pub use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as exact zeros inside entropy sums.
pub const EIG_CLAMP: f64 = 1e-14;

/// Hermiticity tolerance for density-operator validation.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Unit-trace tolerance for density-operator validation.
pub const TRACE_TOL: f64 = 1e-9;

/// How negative an eigenvalue may be before a state is rejected.
pub const NEG_EIG_TOL: f64 = 1e-9;

/// Tail mass at which operations refuse to proceed.
pub const TAIL_FAIL: f64 = 1e-6;

/// Eigendecomposition of a Hermitian matrix, ascending eigenvalues,
/// eigenvectors as columns: H = V diag(w) V^dag.
///
/// The backend hands a row-major complex array to column-major LAPACK
/// without transposing, so it diagonalizes conj(H); conjugating the
/// returned vectors restores the columns-as-eigenvectors contract
/// (checked by `eigh_reconstructs_input`).
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let std = h.as_standard_layout();
    let (w, v) = std
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigh failed: {e}")))?;
    Ok((w, v.mapv(|z| z.conj())))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(h: &Array2<C64>) -> Result<Array1<f64>> {
    use ndarray_linalg::EigValsh;
    let std = h.as_standard_layout();
    std.eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigvalsh failed: {e}")))
}

/// Conjugate transpose.
pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let (r, c) = m.dim();
    debug_assert_eq!(r, c);
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in i..c {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// e^G for anti-Hermitian G, via the Hermitian eigensystem of iG.
pub fn expm_antihermitian(g: &Array2<C64>) -> Result<Array2<C64>> {
    let h = g.mapv(|z| C64::new(0.0, 1.0) * z);
    let defect = hermiticity_defect(&h);
    if defect > 1e-9 {
        return Err(Error::NotHermitian(defect));
    }
    let (w, v) = eigh(&h)?;
    // e^G = V diag(e^{-i w}) V^dag
    let mut scaled = v.clone();
    for (j, &wj) in w.iter().enumerate() {
        let phase = C64::from_polar(1.0, -wj);
        scaled.column_mut(j).mapv_inplace(|z| z * phase);
    }
    Ok(scaled.dot(&adjoint(&v)))
}

/// 0.5 * sum |eig(a - b)|; both inputs must be Hermitian.
pub fn trace_distance(a: &Array2<C64>, b: &Array2<C64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "trace distance needs equal shapes, got {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let w = eigvalsh(&(a - b))?;
    Ok(0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
}

/// -sum p ln p over entries above the clamp. Entries must be a distribution.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > EIG_CLAMP)
        .map(|&x| -x * x.ln())
        .sum()
}

/// Bisection for a continuous f with f(lo) and f(hi) of opposite sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Domain(format!(
            "bisection bracket has no sign change: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gauss-Legendre nodes and weights on [-1, 1] via the Jacobi matrix.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    golub_welsch(n, 2.0, |k| {
        let kf = k as f64;
        kf / (4.0 * kf * kf - 1.0).sqrt()
    })
}

/// Gauss-Hermite nodes and weights for the weight e^{-x^2} on the real line.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    golub_welsch(n, std::f64::consts::PI.sqrt(), |k| (k as f64 / 2.0).sqrt())
}

fn golub_welsch<F: Fn(usize) -> f64>(n: usize, mass: f64, offdiag: F) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("quadrature needs at least one node".into()));
    }
    let mut j = Array2::<C64>::zeros((n, n));
    for k in 1..n {
        let b = C64::new(offdiag(k), 0.0);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let (w, v) = eigh(&j)?;
    let nodes = w.to_vec();
    let weights = (0..n).map(|i| mass * v[(0, i)].norm_sqr()).collect();
    Ok((nodes, weights))
}

/// Seeded generator used everywhere sampling must be reproducible.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    use rand::SeedableRng;
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Matrix with iid complex standard normal entries (scaled to unit variance).
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with phase fixing.
pub fn haar_unitary<R: Rng>(rng: &mut R, d: usize) -> Result<Array2<C64>> {
    use ndarray_linalg::QR;
    let z = ginibre(rng, d, d);
    let (q, r) = z
        .qr()
        .map_err(|e| Error::Linalg(format!("qr failed: {e}")))?;
    let mut q = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        q.column_mut(j).mapv_inplace(|z| z * phase);
    }
    Ok(q)
}

/// Random full-rank density matrix from the Ginibre ensemble.
pub fn random_density<R: Rng>(rng: &mut R, d: usize) -> Array2<C64> {
    let z = ginibre(rng, d, d);
    let m = z.dot(&adjoint(&z));
    let t = trace(&m).re;
    m.mapv(|v| v / t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
        // integral of x^4 over [-1,1] = 2/5
        let m4: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(4)).sum();
        assert!((m4 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(12).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-11);
        // second moment of e^{-x^2} is sqrt(pi)/2
        let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
    }

    #[test]
    fn eigh_reconstructs_input() {
        // complex Hermitian with no special symmetry
        let mut h = Array2::<C64>::zeros((3, 3));
        h[(0, 0)] = C64::new(0.4, 0.0);
        h[(1, 1)] = C64::new(-0.2, 0.0);
        h[(2, 2)] = C64::new(1.1, 0.0);
        h[(0, 1)] = C64::new(0.3, 0.7);
        h[(1, 0)] = h[(0, 1)].conj();
        h[(0, 2)] = C64::new(-0.5, 0.2);
        h[(2, 0)] = h[(0, 2)].conj();
        h[(1, 2)] = C64::new(0.1, -0.9);
        h[(2, 1)] = h[(1, 2)].conj();
        let (w, v) = eigh(&h).unwrap();
        let mut rec = Array2::<C64>::zeros((3, 3));
        for j in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    rec[(a, b)] += v[(a, j)] * C64::new(w[j], 0.0) * v[(b, j)].conj();
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!((rec[(a, b)] - h[(a, b)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn expm_of_pauli_like_rotation() {
        // G = theta * (|0><1| - |1><0|) rotates like a 2x2 rotation matrix
        let theta = 0.3f64;
        let mut g = Array2::<C64>::zeros((2, 2));
        g[(0, 1)] = C64::new(theta, 0.0);
        g[(1, 0)] = C64::new(-theta, 0.0);
        let u = expm_antihermitian(&g).unwrap();
        assert!((u[(0, 0)].re - theta.cos()).abs() < 1e-14);
        assert!((u[(0, 1)].re - theta.sin()).abs() < 1e-14);
    }

    #[test]
    fn haar_unitary_is_unitary_and_seeded() {
        let mut rng = seeded_rng(42);
        let u = haar_unitary(&mut rng, 12).unwrap();
        let id = u.dot(&adjoint(&u));
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - C64::new(want, 0.0)).norm() < 1e-12);
            }
        }
        let mut rng2 = seeded_rng(42);
        let u2 = haar_unitary(&mut rng2, 12).unwrap();
        assert_eq!(u[(3, 7)], u2[(3, 7)]);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
