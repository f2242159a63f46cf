//! Covariance-matrix backend for one-mode Gaussian states: entropies, the
//! affine channel action on (mean, cov), squeezed-limit experiments, and the
//! bridge into the Fock backend.

use crate::channels::{ChannelClass, ChannelSpec};
use crate::error::{Error, Result};
use crate::fock::{g_function, g_inverse, gibbs_state, DensityOperator};
use crate::numeric::expm_antihermitian;
use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Covariance asymmetry allowed before a state is rejected.
pub const COV_SYMMETRY_TOL: f64 = 1e-12;
/// Slack below the uncertainty bound det >= 1/4 before rejection.
pub const UNCERTAINTY_SLACK: f64 = 1e-10;
/// Off-diagonal covariance allowed by the Fock embedding.
const EMBED_DIAGONAL_TOL: f64 = 1e-12;
/// Fock-embedding tail gate.
const EMBED_TAIL_LIMIT: f64 = 1e-6;

/// One-mode Gaussian state: quadrature means and the q,p covariance matrix,
/// vacuum variance 1/2 on each quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianState {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let s = Self { mean, cov };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum() -> Self {
        Self {
            mean: [0.0, 0.0],
            cov: [[0.5, 0.0], [0.0, 0.5]],
        }
    }

    pub fn thermal(n0: f64) -> Result<Self> {
        if n0 < 0.0 {
            return Err(Error::Domain(format!(
                "thermal occupation must be nonnegative, got {n0}"
            )));
        }
        Self::new([0.0, 0.0], [[n0 + 0.5, 0.0], [0.0, n0 + 0.5]])
    }

    /// Zero-mean state with uncorrelated quadrature variances.
    pub fn from_variances(var_q: f64, var_p: f64) -> Result<Self> {
        Self::new([0.0, 0.0], [[var_q, 0.0], [0.0, var_p]])
    }

    pub fn validate(&self) -> Result<()> {
        for v in self.mean.iter().chain(self.cov.iter().flatten()) {
            if !v.is_finite() {
                return Err(Error::Domain("non-finite Gaussian parameter".into()));
            }
        }
        if (self.cov[0][1] - self.cov[1][0]).abs() > COV_SYMMETRY_TOL {
            return Err(Error::Domain(format!(
                "covariance asymmetry {:.3e} beyond {COV_SYMMETRY_TOL:.0e}",
                (self.cov[0][1] - self.cov[1][0]).abs()
            )));
        }
        let det = self.det_cov();
        if det < 0.25 - UNCERTAINTY_SLACK {
            return Err(Error::Domain(format!(
                "unphysical state: det(cov) = {det} below the uncertainty bound 1/4"
            )));
        }
        Ok(())
    }

    pub fn det_cov(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    /// Symplectic eigenvalue sqrt(det cov); 1/2 for pure states.
    pub fn symplectic_eigenvalue(&self) -> f64 {
        self.det_cov().max(0.0).sqrt()
    }

    pub fn mean_photon(&self) -> f64 {
        let sq = self.mean[0] * self.mean[0] + self.mean[1] * self.mean[1];
        0.5 * (self.cov[0][0] + self.cov[1][1]) - 0.5 + 0.5 * sq
    }
}

/// Entropy of a Gaussian state: g(sqrt(det cov) - 1/2).
pub fn gaussian_entropy(s: &GaussianState) -> Result<f64> {
    s.validate()?;
    let arg = s.symplectic_eigenvalue() - 0.5;
    // pure states can land a hair below zero in floating point
    Ok(g_function(arg.max(0.0)))
}

/// Affine class-wise update of (mean, cov).
pub fn apply_gaussian_channel(s: &GaussianState, ch: &ChannelSpec) -> Result<GaussianState> {
    s.validate()?;
    ch.validate()?;
    let [mq, mp] = s.mean;
    let c = s.cov;
    let (mean, cov) = match ch.class {
        ChannelClass::CAtt => {
            let eta = ch.eta.unwrap();
            let n = ch.n.unwrap();
            let k = eta.sqrt();
            let add = (1.0 - eta) * (n + 0.5);
            (
                [k * mq, k * mp],
                [
                    [eta * c[0][0] + add, eta * c[0][1]],
                    [eta * c[1][0], eta * c[1][1] + add],
                ],
            )
        }
        ChannelClass::CAmp => {
            let k2 = ch.kappa2.unwrap();
            let n = ch.n.unwrap();
            let k = k2.sqrt();
            let add = (k2 - 1.0) * (n + 0.5);
            (
                [k * mq, k * mp],
                [
                    [k2 * c[0][0] + add, k2 * c[0][1]],
                    [k2 * c[1][0], k2 * c[1][1] + add],
                ],
            )
        }
        ChannelClass::D => {
            let k2 = ch.kappa2.unwrap();
            let n = ch.n.unwrap();
            let k = k2.sqrt();
            // phase conjugation flips p; isotropic noise pinned by the
            // photon law c = kappa2 (N+1) + N
            let add = (k2 + 1.0) * (n + 0.5);
            (
                [k * mq, -k * mp],
                [
                    [k2 * c[0][0] + add, -k2 * c[0][1]],
                    [-k2 * c[1][0], k2 * c[1][1] + add],
                ],
            )
        }
        ChannelClass::B2 => {
            let t = ch.t.unwrap();
            (
                [mq, mp],
                [
                    [c[0][0] + t, c[0][1]],
                    [c[1][0], c[1][1] + t],
                ],
            )
        }
        ChannelClass::B1 => (
            [mq, mp],
            [[c[0][0] + 0.5, c[0][1]], [c[1][0], c[1][1]]],
        ),
        ChannelClass::A1 => {
            let n = ch.n.unwrap();
            ([0.0, 0.0], [[n + 0.5, 0.0], [0.0, n + 0.5]])
        }
        ChannelClass::A2 => {
            let n = ch.n.unwrap();
            // position kept as a classical signal (sign-flipped by the
            // shift convention), fresh thermal preparation in p
            (
                [-mq, 0.0],
                [[c[0][0] + n + 0.5, 0.0], [0.0, n + 0.5]],
            )
        }
    };
    GaussianState::new(mean, cov)
}

/// Output-entropy table of the squeezed-input limit for A2 (sigma = sigma_q)
/// or B1 (sigma = sigma_p). The conjugate variance is solved from the
/// fixed-entropy condition g(sigma_q sigma_p - 1/2) = S0.
pub fn infimum_limit_experiment(
    ch: &ChannelSpec,
    s0: f64,
    sigma_sequence: &[f64],
) -> Result<Vec<(f64, f64)>> {
    ch.validate()?;
    if !matches!(ch.class, ChannelClass::A2 | ChannelClass::B1) {
        return Err(Error::Unsupported(format!(
            "squeezed-limit experiment applies to A2 and B1, got {}",
            ch.class
        )));
    }
    if s0 < 0.0 {
        return Err(Error::Domain(format!(
            "input entropy must be nonnegative, got {s0}"
        )));
    }
    let nu = g_inverse(s0)? + 0.5;
    let mut table = Vec::with_capacity(sigma_sequence.len());
    for &sigma in sigma_sequence {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma values must be positive, got {sigma}"
            )));
        }
        let (var_q, var_p) = match ch.class {
            ChannelClass::A2 => (sigma * sigma, (nu / sigma) * (nu / sigma)),
            _ => ((nu / sigma) * (nu / sigma), sigma * sigma),
        };
        let input = GaussianState::from_variances(var_q, var_p)?;
        let out = apply_gaussian_channel(&input, ch)?;
        table.push((sigma, gaussian_entropy(&out)?));
    }
    Ok(table)
}

/// Fock-basis matrix of a zero-mean Gaussian state with uncorrelated
/// quadratures: the squeeze exp[r(a^2 - a^dag^2)/2] conjugating the thermal
/// state of matching symplectic eigenvalue.
pub fn embed_gaussian_to_fock(s: &GaussianState, d: usize) -> Result<DensityOperator> {
    s.validate()?;
    if s.mean[0].abs() > 0.0 || s.mean[1].abs() > 0.0 {
        return Err(Error::Unsupported(
            "displaced Gaussian states are not embedded; entropies are displacement-invariant"
                .into(),
        ));
    }
    if s.cov[0][1].abs() > EMBED_DIAGONAL_TOL {
        return Err(Error::Unsupported(
            "correlated q,p covariance is not embedded; rotate to principal axes first".into(),
        ));
    }
    let nu = s.symplectic_eigenvalue();
    let thermal = gibbs_state(d, nu - 0.5)?;
    // S^dag a S = a cosh r - a^dag sinh r, so the conjugated state carries
    // var_q = nu e^{-2r}
    let r = 0.25 * (s.cov[1][1] / s.cov[0][0]).ln();
    let state = if r.abs() < 1e-14 {
        thermal
    } else {
        let a = crate::fock::annihilation(d);
        let a2 = a.dot(&a);
        let gen = (&a2 - &crate::numeric::adjoint(&a2)).mapv(|z| z * C64::new(0.5 * r, 0.0));
        let squeeze: Array2<C64> = expm_antihermitian(&gen)?;
        let m = squeeze
            .dot(thermal.matrix())
            .dot(&crate::numeric::adjoint(&squeeze));
        DensityOperator::from_trusted(m)
    };
    let tail = state.tail_mass();
    if tail >= EMBED_TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            tail_mass: tail,
            limit: EMBED_TAIL_LIMIT,
            context: format!("Gaussian embedding with variances {:?}", (s.cov[0][0], s.cov[1][1])),
        });
    }
    Ok(state)
}
