//! Truncated single-mode Fock space: ladder operators, displacement and
//! phase operators, thermal states, entropies, and characteristic functions.
//!
//! Conventions: hbar = 1, q = (a + a^dag)/sqrt(2), p = i(a^dag - a)/sqrt(2),
//! vacuum quadrature variance 1/2, all entropies in nats.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::numeric::{
    self, adjoint, eigh, eigvalsh, expm_antihermitian, hermiticity_defect, trace,
    HERMITICITY_TOL, NEG_EIG_TOL, TAIL_FAIL, TRACE_TOL,
};

/// Eigenvalues of the reference state below this are treated as null space.
pub(crate) const SUPPORT_EIG_FLOOR: f64 = 1e-12;
/// Weight the compared state may leave in that null space before the
/// divergence is reported as infinite.
const SUPPORT_WEIGHT_TOL: f64 = 1e-10;

/// Annihilation operator on a d-dimensional truncation.
pub fn annihilation(d: usize) -> Array2<C64> {
    let mut a = Array2::zeros((d, d));
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(d: usize) -> Array2<C64> {
    adjoint(&annihilation(d))
}

pub fn number_operator(d: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter(
        (0..d).map(|n| C64::new(n as f64, 0.0)),
    ))
}

/// q = (a + a^dag)/sqrt(2)
pub fn position_operator(d: usize) -> Array2<C64> {
    let a = annihilation(d);
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    (&a + &adjoint(&a)).mapv(|z| z * s)
}

/// p = i(a^dag - a)/sqrt(2)
pub fn momentum_operator(d: usize) -> Array2<C64> {
    let a = annihilation(d);
    let s = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    (&adjoint(&a) - &a).mapv(|z| z * s)
}

/// D(mu) = exp(mu a^dag - conj(mu) a), exact on the truncation.
pub fn displacement(d: usize, mu: C64) -> Result<Array2<C64>> {
    let a = annihilation(d);
    let g = adjoint(&a).mapv(|z| z * mu) - a.mapv(|z| z * mu.conj());
    expm_antihermitian(&g)
}

/// R(theta) = exp(i theta n), so that R(theta) D(r) R(theta)^dag = D(r e^{i theta}).
pub fn phase_rotation(d: usize, theta: f64) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter(
        (0..d).map(|n| C64::from_polar(1.0, theta * n as f64)),
    ))
}

/// g(N) = (N+1) ln(N+1) - N ln N, the entropy of a thermal state with mean
/// photon number N. Continuous at 0 with g(0) = 0.
pub fn g_function(n: f64) -> f64 {
    assert!(n >= 0.0, "g is defined for nonnegative mean photon numbers");
    if n == 0.0 {
        return 0.0;
    }
    (n + 1.0) * (n + 1.0).ln() - n * n.ln()
}

/// Inverse of `g_function` on [0, inf); g is strictly increasing.
pub fn g_inverse(s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::Domain(format!("entropy must be nonnegative, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    // bracket: g(N) >= ln(N+1), so N = e^s - 1 overshoots
    let hi = s.exp() - 1.0 + 1e-12;
    numeric::bisect(|n| g_function(n) - s, 0.0, hi, 200)
}

/// Validated density operator on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    mat: Array2<C64>,
}

impl DensityOperator {
    /// Validates shape, Hermiticity, unit trace, and positivity.
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        let (r, c) = mat.dim();
        if r != c || r == 0 {
            return Err(Error::Shape(format!(
                "density operator must be square and nonempty, got {r}x{c}"
            )));
        }
        let defect = hermiticity_defect(&mat);
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let t = trace(&mat);
        if (t.re - 1.0).abs() > TRACE_TOL || t.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(t.re));
        }
        let w = eigvalsh(&mat)?;
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -NEG_EIG_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { mat })
    }

    /// Skips validation; for internal construction from already-checked data.
    pub(crate) fn from_trusted(mat: Array2<C64>) -> Self {
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    /// Pure state from an amplitude vector (renormalized).
    pub fn pure(amps: &[C64]) -> Result<Self> {
        let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let d = amps.len();
        let scale = 1.0 / norm2;
        let mat = Array2::from_shape_fn((d, d), |(i, j)| amps[i] * amps[j].conj() * scale);
        Ok(Self { mat })
    }

    pub fn fock_basis_state(d: usize, n: usize) -> Result<Self> {
        if n >= d {
            return Err(Error::InvalidDimension(d));
        }
        let mut mat = Array2::zeros((d, d));
        mat[(n, n)] = C64::new(1.0, 0.0);
        Ok(Self { mat })
    }

    pub fn vacuum(d: usize) -> Result<Self> {
        Self::fock_basis_state(d, 0)
    }

    /// Diagonal mixture from a probability vector (renormalized).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| x < 0.0) {
            return Err(Error::NotPositive(
                p.iter().cloned().fold(f64::INFINITY, f64::min),
            ));
        }
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("populations sum to zero".into()));
        }
        let mat = Array2::from_diag(&Array1::from_iter(
            p.iter().map(|&x| C64::new(x / total, 0.0)),
        ));
        Ok(Self { mat })
    }

    pub fn populations(&self) -> Vec<f64> {
        self.mat.diag().iter().map(|z| z.re).collect()
    }

    pub fn mean_photon(&self) -> f64 {
        self.mat
            .diag()
            .iter()
            .enumerate()
            .map(|(n, z)| n as f64 * z.re)
            .sum()
    }

    /// Population held by the top ceil(d/8) Fock levels. The cheap truncation
    /// health check: operations refuse inputs whose tail mass is large.
    pub fn tail_mass(&self) -> f64 {
        let d = self.dim();
        let k = d.div_ceil(8);
        self.mat
            .diag()
            .iter()
            .skip(d - k)
            .map(|z| z.re.max(0.0))
            .sum()
    }

    /// Eigenvalues ascending with negatives clamped to zero.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        let w = eigvalsh(&self.mat)?;
        Ok(w.iter().map(|&x| x.max(0.0)).collect())
    }

    pub fn eigensystem(&self) -> Result<(Array1<f64>, Array2<C64>)> {
        eigh(&self.mat)
    }

    /// -Tr rho ln rho in nats.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let w = self.spectrum()?;
        Ok(numeric::shannon_entropy(&w))
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Zero-pad to a larger cutoff.
    pub fn embed(&self, new_d: usize) -> Result<Self> {
        let d = self.dim();
        if new_d < d {
            return Err(Error::InvalidDimension(new_d));
        }
        let mut mat = Array2::zeros((new_d, new_d));
        mat.slice_mut(ndarray::s![..d, ..d]).assign(&self.mat);
        Ok(Self { mat })
    }

    /// Tr[rho D(mu)].
    pub fn characteristic_function(&self, mu: C64) -> Result<C64> {
        let d = displacement(self.dim(), mu)?;
        Ok(trace(&self.mat.dot(&d)))
    }

    /// Pointwise position distribution <x| rho |x> on the given grid.
    pub fn position_distribution(&self, xs: &[f64]) -> Vec<f64> {
        let psi = hermite_functions(self.dim(), xs);
        let d = self.dim();
        xs.iter()
            .enumerate()
            .map(|(k, _)| {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..d {
                    let pm = psi[(m, k)];
                    // diagonal plus twice the real part of the upper triangle
                    acc += self.mat[(m, m)] * pm * pm;
                    for n in (m + 1)..d {
                        let v = self.mat[(m, n)] * pm * psi[(n, k)];
                        acc += C64::new(2.0 * v.re, 0.0);
                    }
                }
                acc.re.max(0.0)
            })
            .collect()
    }
}

/// Thermal (Gibbs) state with mean photon number n0: populations proportional
/// to (n0/(n0+1))^n, truncated and renormalized.
pub fn gibbs_state(d: usize, n0: f64) -> Result<DensityOperator> {
    if n0 < 0.0 {
        return Err(Error::Domain(format!(
            "mean photon number must be nonnegative, got {n0}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if n0 == 0.0 {
        return DensityOperator::vacuum(d);
    }
    let x = n0 / (n0 + 1.0);
    let p: Vec<f64> = (0..d).map(|n| x.powi(n as i32)).collect();
    let state = DensityOperator::from_populations(&p)?;
    let tail = state.tail_mass();
    if tail >= TAIL_FAIL {
        return Err(Error::CutoffTooSmall {
            tail_mass: tail,
            limit: TAIL_FAIL,
            context: format!("thermal ladder with mean {n0} at cutoff {d}"),
        });
    }
    Ok(state)
}

/// Unnormalized truncation deficit of the Gibbs ladder: 1 - sum_{n<d} p_n.
pub fn gibbs_truncation_deficit(d: usize, n0: f64) -> f64 {
    if n0 == 0.0 {
        return 0.0;
    }
    (n0 / (n0 + 1.0)).powi(d as i32)
}

/// S(rho || sigma) = Tr rho (ln rho - ln sigma); +inf when rho has support
/// outside the support of sigma.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Shape(format!(
            "relative entropy needs equal cutoffs, got {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let (lam, v) = rho.eigensystem()?;
    let (mu, w) = sigma.eigensystem()?;
    // overlap[i][j] = |<v_i|w_j>|^2
    let cross = adjoint(&v).dot(&w);
    let d = rho.dim();
    let mut acc = 0.0f64;
    for i in 0..d {
        let li = lam[i].max(0.0);
        // the same floor on both sides keeps S(rho||rho) at zero
        if li < SUPPORT_EIG_FLOOR {
            continue;
        }
        acc += li * li.ln();
        for j in 0..d {
            let p = cross[(i, j)].norm_sqr();
            if p <= 0.0 {
                continue;
            }
            let mj = mu[j].max(0.0);
            if mj < SUPPORT_EIG_FLOOR {
                if li * p > SUPPORT_WEIGHT_TOL {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            acc -= li * p * mj.ln();
        }
    }
    Ok(acc)
}

/// Hermite functions psi_n(x) for n < d as a (d, len(xs)) array,
/// psi_0(x) = pi^{-1/4} e^{-x^2/2}, stable two-term recurrence upward.
pub fn hermite_functions(d: usize, xs: &[f64]) -> Array2<f64> {
    let mut psi = Array2::zeros((d, xs.len()));
    let c0 = std::f64::consts::PI.powf(-0.25);
    for (k, &x) in xs.iter().enumerate() {
        psi[(0, k)] = c0 * (-0.5 * x * x).exp();
        if d > 1 {
            psi[(1, k)] = std::f64::consts::SQRT_2 * x * psi[(0, k)];
        }
        for n in 1..d.saturating_sub(1) {
            let nf = n as f64;
            psi[(n + 1, k)] = (2.0 / (nf + 1.0)).sqrt() * x * psi[(n, k)]
                - (nf / (nf + 1.0)).sqrt() * psi[(n - 1, k)];
        }
    }
    psi
}
