//! One-mode Gaussian channel classes: parameter records, unitary dilations,
//! quadrature routes for the additive classes, and fast superoperators that
//! reproduce the dilation channels exactly on the truncated space.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, gibbs_state, DensityOperator};
use crate::multimode::{GateKind, MultiModeState, TwoModeGate};
use crate::numeric::{self, adjoint, eigh, trace};

/// Environment tail mass allowed before a dilation refuses to run.
pub const ENV_TAIL_LIMIT: f64 = 1e-8;
/// Photon bookkeeping enforced after each dilation.
pub const BOOKKEEPING_TOL: f64 = 1e-6;
/// Trace defect allowed for the quadrature routes.
pub const QUADRATURE_TRACE_TOL: f64 = 1e-6;
/// Mean photon gain defect allowed for the classical-noise route.
pub const NOISE_GAIN_TOL: f64 = 1e-5;
/// Radial rule for the classical-noise quadrature: Gauss-Legendre nodes on
/// u in [0, range] against the weight e^{-u}, displacement radius sqrt(t u).
const B2_RADIAL_NODES: usize = 28;
const B2_RADIAL_RANGE: f64 = 26.0;
/// Position grid for the q-measuring class.
const A2_GRID_HALF_WIDTH: f64 = 14.0;
const A2_GRID_POINTS: usize = 281;
const A2_GRID_TRIM: f64 = 1e-13;
/// Environment populations below this contribute nothing to a superop.
const ENV_POP_CUT: f64 = 1e-18;

/// The seven one-mode Gaussian channel classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelClass {
    A1,
    A2,
    B1,
    B2,
    #[serde(rename = "C_att")]
    CAtt,
    #[serde(rename = "C_amp")]
    CAmp,
    D,
}

impl std::fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ChannelClass::A1 => "A1",
            ChannelClass::A2 => "A2",
            ChannelClass::B1 => "B1",
            ChannelClass::B2 => "B2",
            ChannelClass::CAtt => "C_att",
            ChannelClass::CAmp => "C_amp",
            ChannelClass::D => "D",
        };
        f.write_str(s)
    }
}

/// Channel parameters. Which fields are required depends on the class:
/// C_att takes (eta, N), C_amp and D take (kappa2, N), A1 and A2 take N,
/// B2 takes t, B1 takes nothing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub class: ChannelClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

/// Input-output law for mean photon number: n_out = slope * n_in + offset.
#[derive(Debug, Clone, Copy)]
pub struct PhotonLaw {
    pub slope: f64,
    pub offset: f64,
    /// False when the law holds only for phase-insensitive inputs.
    pub exact_for_all_inputs: bool,
}

impl ChannelSpec {
    pub fn attenuator(eta: f64, n: f64) -> Self {
        Self {
            class: ChannelClass::CAtt,
            eta: Some(eta),
            kappa2: None,
            n: Some(n),
            t: None,
        }
    }

    pub fn amplifier(kappa2: f64, n: f64) -> Self {
        Self {
            class: ChannelClass::CAmp,
            eta: None,
            kappa2: Some(kappa2),
            n: Some(n),
            t: None,
        }
    }

    pub fn class_d(kappa2: f64, n: f64) -> Self {
        Self {
            class: ChannelClass::D,
            eta: None,
            kappa2: Some(kappa2),
            n: Some(n),
            t: None,
        }
    }

    pub fn a1(n: f64) -> Self {
        Self {
            class: ChannelClass::A1,
            eta: None,
            kappa2: None,
            n: Some(n),
            t: None,
        }
    }

    pub fn a2(n: f64) -> Self {
        Self {
            class: ChannelClass::A2,
            eta: None,
            kappa2: None,
            n: Some(n),
            t: None,
        }
    }

    pub fn b1() -> Self {
        Self {
            class: ChannelClass::B1,
            eta: None,
            kappa2: None,
            n: None,
            t: None,
        }
    }

    pub fn b2(t: f64) -> Self {
        Self {
            class: ChannelClass::B2,
            eta: None,
            kappa2: None,
            n: None,
            t: Some(t),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ChannelSpec = serde_json::from_str(s)
            .map_err(|e| Error::Domain(format!("channel json rejected: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    fn require(&self, field: &str, v: Option<f64>) -> Result<f64> {
        v.ok_or_else(|| Error::Domain(format!("class {} needs field {field}", self.class)))
    }

    fn reject(&self, field: &str, v: Option<f64>) -> Result<()> {
        if v.is_some() {
            return Err(Error::Domain(format!(
                "class {} does not take field {field}",
                self.class
            )));
        }
        Ok(())
    }

    fn require_nonnegative(name: &str, v: f64) -> Result<()> {
        if v < 0.0 {
            return Err(Error::Domain(format!(
                "{name} must be nonnegative, got {v}"
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self.class {
            ChannelClass::CAtt => {
                let eta = self.require("eta", self.eta)?;
                let n = self.require("N", self.n)?;
                self.reject("kappa2", self.kappa2)?;
                self.reject("t", self.t)?;
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(Error::Domain(format!(
                        "transmissivity must lie in (0, 1], got {eta}"
                    )));
                }
                Self::require_nonnegative("N", n)?;
            }
            ChannelClass::CAmp => {
                let k2 = self.require("kappa2", self.kappa2)?;
                let n = self.require("N", self.n)?;
                self.reject("eta", self.eta)?;
                self.reject("t", self.t)?;
                if k2 < 1.0 {
                    return Err(Error::Domain(format!(
                        "amplifier gain must be at least 1, got {k2}"
                    )));
                }
                Self::require_nonnegative("N", n)?;
            }
            ChannelClass::D => {
                let k2 = self.require("kappa2", self.kappa2)?;
                let n = self.require("N", self.n)?;
                self.reject("eta", self.eta)?;
                self.reject("t", self.t)?;
                if k2 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "conjugate gain must be positive, got {k2}"
                    )));
                }
                Self::require_nonnegative("N", n)?;
            }
            ChannelClass::A1 | ChannelClass::A2 => {
                let n = self.require("N", self.n)?;
                self.reject("eta", self.eta)?;
                self.reject("kappa2", self.kappa2)?;
                self.reject("t", self.t)?;
                Self::require_nonnegative("N", n)?;
            }
            ChannelClass::B1 => {
                self.reject("eta", self.eta)?;
                self.reject("kappa2", self.kappa2)?;
                self.reject("N", self.n)?;
                self.reject("t", self.t)?;
            }
            ChannelClass::B2 => {
                let t = self.require("t", self.t)?;
                self.reject("eta", self.eta)?;
                self.reject("kappa2", self.kappa2)?;
                self.reject("N", self.n)?;
                Self::require_nonnegative("t", t)?;
            }
        }
        Ok(())
    }

    /// Mean photon input-output law. For A2 the quoted law holds exactly only
    /// on phase-insensitive inputs; `a2_exact_output_photons` is general.
    pub fn photon_law(&self) -> Result<PhotonLaw> {
        self.validate()?;
        let law = match self.class {
            ChannelClass::CAtt => {
                let eta = self.eta.unwrap();
                PhotonLaw {
                    slope: eta,
                    offset: (1.0 - eta) * self.n.unwrap(),
                    exact_for_all_inputs: true,
                }
            }
            ChannelClass::CAmp => {
                let k2 = self.kappa2.unwrap();
                PhotonLaw {
                    slope: k2,
                    offset: (k2 - 1.0) * (self.n.unwrap() + 1.0),
                    exact_for_all_inputs: true,
                }
            }
            ChannelClass::D => {
                let k2 = self.kappa2.unwrap();
                let n = self.n.unwrap();
                PhotonLaw {
                    slope: k2,
                    offset: k2 * (n + 1.0) + n,
                    exact_for_all_inputs: true,
                }
            }
            ChannelClass::B2 => PhotonLaw {
                slope: 1.0,
                offset: self.t.unwrap(),
                exact_for_all_inputs: true,
            },
            ChannelClass::B1 => PhotonLaw {
                slope: 1.0,
                offset: 0.25,
                exact_for_all_inputs: true,
            },
            ChannelClass::A1 => PhotonLaw {
                slope: 0.0,
                offset: self.n.unwrap(),
                exact_for_all_inputs: true,
            },
            ChannelClass::A2 => PhotonLaw {
                slope: 0.5,
                offset: self.n.unwrap() + 0.25,
                exact_for_all_inputs: false,
            },
        };
        Ok(law)
    }

    /// Exact A2 output photons for any input: Tr[rho q^2]/2 + N.
    pub fn a2_exact_output_photons(&self, rho: &DensityOperator) -> Result<f64> {
        if self.class != ChannelClass::A2 {
            return Err(Error::Unsupported(format!(
                "exact q-route law only applies to A2, got {}",
                self.class
            )));
        }
        self.validate()?;
        // two levels of headroom make the squared ladder exact on the support
        let padded = rho.embed(rho.dim() + 2)?;
        let q = fock::position_operator(padded.dim());
        let m = trace(&q.dot(&q).dot(padded.matrix())).re;
        Ok(0.5 * m + self.n.unwrap())
    }

    /// Thermal output mean for a thermal input with mean n0.
    pub fn thermal_output_mean(&self, n0: f64) -> Result<f64> {
        let law = self.photon_law()?;
        Ok(law.slope * n0 + law.offset)
    }
}

/// Joint state after a unitary dilation, with both reductions.
#[derive(Debug, Clone)]
pub struct DilationResult {
    pub joint: MultiModeState,
    pub output: DensityOperator,
    pub complement: DensityOperator,
}

impl DilationResult {
    /// Entropy of the joint state; equals the total input entropy because
    /// the dilation acts unitarily on the truncation.
    pub fn joint_entropy(&self) -> Result<f64> {
        self.joint.entropy()
    }
}

/// Beam splitter of transmissivity eta on (system, environment) cutoffs.
pub fn beam_splitter_unitary(eta: f64, d_sys: usize, d_env: usize) -> Result<TwoModeGate> {
    TwoModeGate::beam_splitter(eta, d_sys, d_env)
}

fn check_env_tail(env: &DensityOperator, what: &str) -> Result<()> {
    let tail = env.tail_mass();
    if tail >= ENV_TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            tail_mass: tail,
            limit: ENV_TAIL_LIMIT,
            context: format!("{what} environment"),
        });
    }
    Ok(())
}

fn check_bookkeeping(n_out: f64, n_in: f64, law: &PhotonLaw, what: &str) -> Result<()> {
    let want = law.slope * n_in + law.offset;
    let defect = (n_out - want).abs();
    if defect > BOOKKEEPING_TOL {
        return Err(Error::Constraint(format!(
            "{what}: mean photon defect {defect:.3e} (got {n_out}, want {want})"
        )));
    }
    Ok(())
}

/// Thermal-environment beam splitter dilation of the attenuator.
pub fn apply_attenuator(
    rho: &DensityOperator,
    eta: f64,
    n_env: f64,
    d_env: usize,
) -> Result<DilationResult> {
    let spec = ChannelSpec::attenuator(eta, n_env);
    spec.validate()?;
    let env = gibbs_state(d_env, n_env)?;
    check_env_tail(&env, "attenuator")?;
    let gate = TwoModeGate::beam_splitter(eta, rho.dim(), d_env)?;
    let mut joint = MultiModeState::tensor(&[rho, &env])?;
    joint.apply_two_mode_gate(&gate, 0, 1)?;
    let output = joint.reduce_to_mode(0)?;
    let complement = joint.reduce_to_mode(1)?;
    check_bookkeeping(
        output.mean_photon(),
        rho.mean_photon(),
        &spec.photon_law()?,
        "attenuator",
    )?;
    Ok(DilationResult {
        joint,
        output,
        complement,
    })
}

/// Entropies of the attenuator complement against the swapped-transmissivity
/// channel on the same environment.
#[derive(Debug, Clone, Copy)]
pub struct ComplementReport {
    pub complement_entropy: f64,
    pub swapped_entropy: f64,
    pub difference: f64,
}

/// The complement of the thermal attenuator at eta matches the thermal
/// attenuator at 1 - eta applied to the same input.
pub fn weak_complementary_attenuator(
    rho: &DensityOperator,
    eta: f64,
    n_env: f64,
    d_env: usize,
) -> Result<ComplementReport> {
    let dil = apply_attenuator(rho, eta, n_env, d_env)?;
    let complement_entropy = dil.complement.von_neumann_entropy()?;
    let swapped = apply_attenuator(rho, 1.0 - eta, n_env, d_env)?;
    let swapped_entropy = swapped.output.von_neumann_entropy()?;
    Ok(ComplementReport {
        complement_entropy,
        swapped_entropy,
        difference: (complement_entropy - swapped_entropy).abs(),
    })
}

fn amplifier_headroom(d_out: usize, kappa2: f64, n_in: f64, n_env: f64) -> Result<()> {
    let need = 2.0 * kappa2 * (n_in + n_env + 1.0);
    if (d_out as f64) < need {
        return Err(Error::Resource(format!(
            "amplifier output cutoff {d_out} below headroom {need:.1}"
        )));
    }
    Ok(())
}

fn class_d_headroom(d_out: usize, law: &PhotonLaw, n_in: f64) -> Result<()> {
    let need = 2.0 * (law.slope * n_in + law.offset + 1.0);
    if (d_out as f64) < need {
        return Err(Error::Resource(format!(
            "conjugate-class output cutoff {d_out} below headroom {need:.1}"
        )));
    }
    Ok(())
}

/// Two-mode squeezer dilation of the amplifier, gain kappa2 = cosh^2 r.
pub fn apply_amplifier(
    rho: &DensityOperator,
    kappa2: f64,
    n_env: f64,
    d_out: usize,
    d_env: usize,
) -> Result<DilationResult> {
    let spec = ChannelSpec::amplifier(kappa2, n_env);
    spec.validate()?;
    amplifier_headroom(d_out, kappa2, rho.mean_photon(), n_env)?;
    let env = gibbs_state(d_env, n_env)?;
    check_env_tail(&env, "amplifier")?;
    let r = kappa2.sqrt().acosh();
    let sys = rho.embed(d_out)?;
    let gate = TwoModeGate::two_mode_squeezer(r, d_out, d_env)?;
    let mut joint = MultiModeState::tensor(&[&sys, &env])?;
    joint.apply_two_mode_gate(&gate, 0, 1)?;
    let output = joint.reduce_to_mode(0)?;
    let complement = joint.reduce_to_mode(1)?;
    check_bookkeeping(
        output.mean_photon(),
        rho.mean_photon(),
        &spec.photon_law()?,
        "amplifier",
    )?;
    Ok(DilationResult {
        joint,
        output,
        complement,
    })
}

/// Environment-side reduction of a squeezer dilation at gain 1 + kappa2:
/// the phase-conjugating class.
pub fn apply_class_d(
    rho: &DensityOperator,
    kappa2: f64,
    n_env: f64,
    d_out: usize,
    d_sys: usize,
) -> Result<DilationResult> {
    let spec = ChannelSpec::class_d(kappa2, n_env);
    spec.validate()?;
    let law = spec.photon_law()?;
    class_d_headroom(d_out, &law, rho.mean_photon())?;
    let env = gibbs_state(d_out, n_env)?;
    check_env_tail(&env, "class D")?;
    let r = (1.0 + kappa2).sqrt().acosh();
    let sys = rho.embed(d_sys)?;
    let gate = TwoModeGate::two_mode_squeezer(r, d_sys, d_out)?;
    let mut joint = MultiModeState::tensor(&[&sys, &env])?;
    joint.apply_two_mode_gate(&gate, 0, 1)?;
    let output = joint.reduce_to_mode(1)?;
    let complement = joint.reduce_to_mode(0)?;
    check_bookkeeping(output.mean_photon(), rho.mean_photon(), &law, "class D")?;
    Ok(DilationResult {
        joint,
        output,
        complement,
    })
}

/// Radial rule for an isotropic Gaussian displacement mixture of variance t:
/// weights are normalized so the rule integrates 1 exactly.
fn b2_radial_rule(t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (xs, ws) = numeric::gauss_legendre(B2_RADIAL_NODES)?;
    let half = 0.5 * B2_RADIAL_RANGE;
    let us: Vec<f64> = xs.iter().map(|x| half * (x + 1.0)).collect();
    let mut w: Vec<f64> = us
        .iter()
        .zip(&ws)
        .map(|(u, wi)| half * wi * (-u).exp())
        .collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    let radii: Vec<f64> = us.iter().map(|u| (t * u).sqrt()).collect();
    Ok((radii, w))
}

/// Eigensystem of i(a^dag - a) at cutoff d; displacements along the real
/// axis are diagonal in this frame.
fn displacement_frame(d: usize) -> Result<(Array1<f64>, Array2<C64>)> {
    let a = fock::annihilation(d);
    let g = &fock::creation(d) - &a;
    let h = g.mapv(|z| C64::new(0.0, 1.0) * z);
    eigh(&h)
}

/// Classical isotropic Gaussian displacement noise of variance t.
pub fn apply_b2(rho: &DensityOperator, t: f64, d_out: usize) -> Result<DensityOperator> {
    ChannelSuperop::build(&ChannelSpec::b2(t), d_out, None)?.apply(rho)
}

/// Complete thermalization: every input is replaced by the N-thermal state.
pub fn apply_a1(n: f64, d_out: usize) -> Result<DensityOperator> {
    ChannelSpec::a1(n).validate()?;
    gibbs_state(d_out, n)
}

/// q-measuring class: mixture of q-displaced N-thermal states weighted by
/// the input position distribution.
pub fn apply_a2(rho: &DensityOperator, n: f64, d_out: usize) -> Result<DensityOperator> {
    ChannelSuperop::build(&ChannelSpec::a2(n), d_out, None)?.apply(rho)
}

/// Classical Gaussian noise of variance 1/2 injected into q only.
pub fn apply_b1(rho: &DensityOperator, d_out: usize) -> Result<DensityOperator> {
    ChannelSuperop::build(&ChannelSpec::b1(), d_out, None)?.apply(rho)
}

/// One-call channel action: builds the appropriate superoperator and applies
/// it, with headroom checks for the amplifying classes.
pub fn apply_channel(
    rho: &DensityOperator,
    spec: &ChannelSpec,
    d_out: usize,
) -> Result<DensityOperator> {
    spec.validate()?;
    match spec.class {
        ChannelClass::CAmp => {
            amplifier_headroom(d_out, spec.kappa2.unwrap(), rho.mean_photon(), spec.n.unwrap())?
        }
        ChannelClass::D => class_d_headroom(d_out, &spec.photon_law()?, rho.mean_photon())?,
        _ => {}
    }
    ChannelSuperop::build(spec, d_out, None)?.apply(rho)
}

/// Fast single-mode channel action on the truncated space.
///
/// The phase-covariant variants are assembled from the same sector-exact
/// dilation unitaries as the explicit routes, so they realize the identical
/// channel on the truncation; the additive variants carry closed-form
/// kernels in the displacement eigenframe.
pub enum ChannelSuperop {
    /// Coherence-order blocks; `conjugate_input` marks the transposed class,
    /// which reads input coherences of the opposite sign.
    PhaseCovariant {
        d: usize,
        conjugate_input: bool,
        law: PhotonLaw,
        check_gain: bool,
        blocks: Vec<Array2<C64>>,
    },
    /// out = V ((V^dag rho V) .* K) V^dag with a fixed Gaussian kernel.
    QKernel {
        v: Array2<C64>,
        w: Array1<f64>,
        kernel: Array2<f64>,
    },
    /// Position-distribution mixture of q-displaced thermal states.
    QMixture {
        v: Array2<C64>,
        w: Array1<f64>,
        sigma_tilde: Array2<C64>,
        xs: Vec<f64>,
        dx: f64,
    },
    /// Input-independent output.
    Constant { state: DensityOperator },
}

impl ChannelSuperop {
    /// Build the superoperator for `spec` with output cutoff `d`.
    /// `d_env` overrides the environment cutoff for the dilation classes.
    pub fn build(spec: &ChannelSpec, d: usize, d_env: Option<usize>) -> Result<Self> {
        spec.validate()?;
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        match spec.class {
            ChannelClass::CAtt => {
                let eta = spec.eta.unwrap();
                let n = spec.n.unwrap();
                let de = d_env.unwrap_or_else(|| d.max((40.0 * (n + 1.0)).ceil() as usize));
                let env = gibbs_state(de, n)?;
                check_env_tail(&env, "attenuator superop")?;
                let gate = TwoModeGate::beam_splitter(eta, d, de)?;
                let blocks = blocks_from_thermal_dilation(&gate, &env.populations());
                Ok(ChannelSuperop::PhaseCovariant {
                    d,
                    conjugate_input: false,
                    law: spec.photon_law()?,
                    check_gain: false,
                    blocks,
                })
            }
            ChannelClass::CAmp => {
                let k2 = spec.kappa2.unwrap();
                let n = spec.n.unwrap();
                let de = d_env.unwrap_or(d).max(8);
                let env = gibbs_state(de, n)?;
                check_env_tail(&env, "amplifier superop")?;
                let r = k2.sqrt().acosh();
                let gate = TwoModeGate::two_mode_squeezer(r, d, de)?;
                let blocks = blocks_from_thermal_dilation(&gate, &env.populations());
                Ok(ChannelSuperop::PhaseCovariant {
                    d,
                    conjugate_input: false,
                    law: spec.photon_law()?,
                    check_gain: false,
                    blocks,
                })
            }
            ChannelClass::D => {
                let k2 = spec.kappa2.unwrap();
                let n = spec.n.unwrap();
                let env = gibbs_state(d, n)?;
                check_env_tail(&env, "conjugate-class superop")?;
                let r = (1.0 + k2).sqrt().acosh();
                let gate = TwoModeGate::two_mode_squeezer(r, d, d)?;
                let blocks = blocks_from_conjugate_dilation(&gate, &env.populations());
                Ok(ChannelSuperop::PhaseCovariant {
                    d,
                    conjugate_input: true,
                    law: spec.photon_law()?,
                    check_gain: false,
                    blocks,
                })
            }
            ChannelClass::B2 => {
                let t = spec.t.unwrap();
                let (radii, weights) = b2_radial_rule(t)?;
                let (w, v) = displacement_frame(d)?;
                // D(r_j) = V diag(e^{-i r_j w}) V^dag
                let mut displacements = Vec::with_capacity(radii.len());
                for r in &radii {
                    let mut scaled = v.clone();
                    for (col, &wj) in w.iter().enumerate() {
                        let ph = C64::from_polar(1.0, -r * wj);
                        scaled.column_mut(col).mapv_inplace(|z| z * ph);
                    }
                    displacements.push(scaled.dot(&adjoint(&v)));
                }
                // exact angle average keeps only coherence-conserving terms
                let mut blocks = Vec::with_capacity(d);
                for k in 0..d {
                    let m = d - k;
                    let mut b = Array2::<C64>::zeros((m, m));
                    for (dj, &wj) in displacements.iter().zip(&weights) {
                        let wjc = C64::new(wj, 0.0);
                        for np in 0..m {
                            for x in 0..m {
                                b[(np, x)] += wjc * dj[(np + k, x + k)] * dj[(np, x)].conj();
                            }
                        }
                    }
                    blocks.push(b);
                }
                Ok(ChannelSuperop::PhaseCovariant {
                    d,
                    conjugate_input: false,
                    law: spec.photon_law()?,
                    check_gain: true,
                    blocks,
                })
            }
            ChannelClass::B1 => {
                let (w, v) = displacement_frame(d)?;
                // E[e^{-i (xi/sqrt2) dw}] over xi ~ N(0, 1/2) = e^{-dw^2/8}
                let mut kernel = Array2::<f64>::zeros((d, d));
                for a in 0..d {
                    for b in 0..d {
                        let dw = w[a] - w[b];
                        kernel[(a, b)] = (-dw * dw / 8.0).exp();
                    }
                }
                Ok(ChannelSuperop::QKernel { v, w, kernel })
            }
            ChannelClass::A2 => {
                let n = spec.n.unwrap();
                let (w, v) = displacement_frame(d)?;
                let sigma = gibbs_state(d, n)?;
                let sigma_tilde = adjoint(&v).dot(sigma.matrix()).dot(&v);
                let half = A2_GRID_HALF_WIDTH;
                let m = A2_GRID_POINTS;
                let dx = 2.0 * half / (m - 1) as f64;
                let xs: Vec<f64> = (0..m).map(|i| -half + dx * i as f64).collect();
                Ok(ChannelSuperop::QMixture {
                    v,
                    w,
                    sigma_tilde,
                    xs,
                    dx,
                })
            }
            ChannelClass::A1 => Ok(ChannelSuperop::Constant {
                state: gibbs_state(d, spec.n.unwrap())?,
            }),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ChannelSuperop::PhaseCovariant { d, .. } => *d,
            ChannelSuperop::QKernel { w, .. } => w.len(),
            ChannelSuperop::QMixture { w, .. } => w.len(),
            ChannelSuperop::Constant { state } => state.dim(),
        }
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let d = self.output_dim();
        if rho.dim() > d {
            return Err(Error::Shape(format!(
                "input cutoff {} exceeds output cutoff {d}",
                rho.dim()
            )));
        }
        let input = if rho.dim() == d {
            rho.clone()
        } else {
            rho.embed(d)?
        };
        match self {
            ChannelSuperop::PhaseCovariant {
                d,
                conjugate_input,
                law,
                check_gain,
                blocks,
            } => {
                let x = input.matrix();
                let mut out = Array2::<C64>::zeros((*d, *d));
                for (k, b) in blocks.iter().enumerate() {
                    let m = d - k;
                    for np in 0..m {
                        let mut acc = C64::new(0.0, 0.0);
                        for nn in 0..m {
                            let e = x[(nn + k, nn)];
                            let e = if *conjugate_input { e.conj() } else { e };
                            acc += b[(np, nn)] * e;
                        }
                        out[(np + k, np)] = acc;
                        if k > 0 {
                            out[(np, np + k)] = acc.conj();
                        }
                    }
                }
                let tr = trace(&out).re;
                if (tr - 1.0).abs() > QUADRATURE_TRACE_TOL {
                    return Err(Error::Grid(format!(
                        "superop trace defect {:.3e}",
                        (tr - 1.0).abs()
                    )));
                }
                let out = out.mapv(|z| z / tr);
                let state = DensityOperator::from_trusted(out);
                if *check_gain {
                    let want = law.slope * rho.mean_photon() + law.offset;
                    let defect = (state.mean_photon() - want).abs();
                    if defect > NOISE_GAIN_TOL {
                        return Err(Error::Grid(format!(
                            "noise gain defect {defect:.3e} beyond {NOISE_GAIN_TOL:.0e}"
                        )));
                    }
                }
                Ok(state)
            }
            ChannelSuperop::QKernel { v, w: _, kernel } => {
                let tilde = adjoint(v).dot(input.matrix()).dot(v);
                let masked = ndarray::Zip::from(&tilde)
                    .and(kernel)
                    .map_collect(|&z, &k| z * k);
                let out = v.dot(&masked).dot(&adjoint(v));
                Ok(DensityOperator::from_trusted(out))
            }
            ChannelSuperop::QMixture {
                v,
                w,
                sigma_tilde,
                xs,
                dx,
            } => {
                let p = input.position_distribution(xs);
                let d = w.len();
                let mut kernel = Array2::<C64>::zeros((d, d));
                let mut mass = 0.0;
                for (x, pi) in xs.iter().zip(p.iter()) {
                    let wg = pi * dx;
                    if wg < A2_GRID_TRIM {
                        continue;
                    }
                    mass += wg;
                    // alpha = -x/sqrt2 gives phases e^{+i (x/sqrt2) w_a}
                    let s = x / std::f64::consts::SQRT_2;
                    let phases: Vec<C64> =
                        w.iter().map(|&wa| C64::from_polar(1.0, s * wa)).collect();
                    for a in 0..d {
                        let lead = C64::new(wg, 0.0) * phases[a];
                        for b in 0..d {
                            kernel[(a, b)] += lead * phases[b].conj();
                        }
                    }
                }
                if (mass - 1.0).abs() > QUADRATURE_TRACE_TOL {
                    return Err(Error::Grid(format!(
                        "position grid mass defect {:.3e}",
                        (mass - 1.0).abs()
                    )));
                }
                let masked = ndarray::Zip::from(sigma_tilde)
                    .and(&kernel)
                    .map_collect(|&s, &k| s * k);
                let out = v.dot(&masked).dot(&adjoint(v));
                let tr = trace(&out).re;
                let out = out.mapv(|z| z / tr);
                Ok(DensityOperator::from_trusted(out))
            }
            ChannelSuperop::Constant { state } => Ok(state.clone()),
        }
    }
}

/// Coherence blocks of a thermal-environment dilation that keeps the system
/// side. With a diagonal environment each transition (m -> l) contributes a
/// Kraus operator supported on the single photon offset j, so block k picks
/// up rank-one updates along its j-th column slot:
/// B_k[n', n' + j] += p_m v[n' + k] conj(v[n']).
fn blocks_from_thermal_dilation(gate: &TwoModeGate, env_pops: &[f64]) -> Vec<Array2<C64>> {
    let d = gate.d_a;
    let de = gate.d_b;
    let mut blocks: Vec<Array2<C64>> = (0..d).map(|k| Array2::zeros((d - k, d - k))).collect();
    let mut v = vec![C64::new(0.0, 0.0); d];
    for (m, &pm) in env_pops.iter().enumerate().take(de) {
        if pm < ENV_POP_CUT {
            continue;
        }
        let pmc = C64::new(pm, 0.0);
        for l in 0..de {
            let j = match gate.kind {
                GateKind::Sum => l as isize - m as isize,
                GateKind::Difference => m as isize - l as isize,
            };
            // K[a, n] = <a, l| U |a + j, m>
            let a_lo = (-j).max(0) as usize;
            let a_hi_excl = ((d as isize - j.max(0)).max(0) as usize).min(d);
            if a_lo >= a_hi_excl {
                continue;
            }
            for slot in v.iter_mut() {
                *slot = C64::new(0.0, 0.0);
            }
            let mut all_zero = true;
            for (a, slot) in v.iter_mut().enumerate().take(a_hi_excl).skip(a_lo) {
                let n = (a as isize + j) as usize;
                let e = gate.element(a, l, n, m);
                if e != C64::new(0.0, 0.0) {
                    all_zero = false;
                }
                *slot = e;
            }
            if all_zero {
                continue;
            }
            for (k, block) in blocks.iter_mut().enumerate() {
                // x = n' + j must stay inside the block's column range
                let np_lo = a_lo.max((-j).max(0) as usize);
                let np_hi = a_hi_excl.saturating_sub(k);
                for np in np_lo..np_hi {
                    let x = np as isize + j;
                    if x < 0 || x as usize >= d - k {
                        continue;
                    }
                    let lead = pmc * v[np + k];
                    if lead != C64::new(0.0, 0.0) {
                        block[(np, x as usize)] += lead * v[np].conj();
                    }
                }
            }
        }
    }
    blocks
}

/// Coherence blocks of the squeezer dilation that keeps the environment
/// side. Conservation makes each Kraus operator anti-diagonal,
/// K[a, n] nonzero on n = (l + m) - a, so the output coherence order equals
/// minus the input order and the apply step conjugates input coherences:
/// B_k[n', (l + m) - n' - k] += p_m v[n' + k] conj(v[n']).
fn blocks_from_conjugate_dilation(gate: &TwoModeGate, env_pops: &[f64]) -> Vec<Array2<C64>> {
    let d_sys = gate.d_a;
    let d = gate.d_b;
    let mut blocks: Vec<Array2<C64>> = (0..d).map(|k| Array2::zeros((d - k, d - k))).collect();
    let mut v = vec![C64::new(0.0, 0.0); d];
    for (m, &pm) in env_pops.iter().enumerate().take(d) {
        if pm < ENV_POP_CUT {
            continue;
        }
        let pmc = C64::new(pm, 0.0);
        for l in 0..d_sys {
            let jj = l + m;
            // v[a] = <l, a| U |jj - a, m> on a in [max(0, jj - d_sys + 1), min(d - 1, jj)]
            let a_lo = jj.saturating_sub(d_sys - 1);
            let a_hi_excl = (jj + 1).min(d);
            if a_lo >= a_hi_excl {
                continue;
            }
            for slot in v.iter_mut() {
                *slot = C64::new(0.0, 0.0);
            }
            for (a, slot) in v.iter_mut().enumerate().take(a_hi_excl).skip(a_lo) {
                *slot = gate.element(l, a, jj - a, m);
            }
            for (k, block) in blocks.iter_mut().enumerate() {
                let np_lo = a_lo;
                let np_hi = a_hi_excl.saturating_sub(k);
                for np in np_lo..np_hi {
                    let x = jj as isize - np as isize - k as isize;
                    if x < 0 || x as usize >= d - k {
                        continue;
                    }
                    let lead = pmc * v[np + k];
                    if lead != C64::new(0.0, 0.0) {
                        block[(np, x as usize)] += lead * v[np].conj();
                    }
                }
            }
        }
    }
    blocks
}

/// Largest deviation between the measured output characteristic function and
/// the closed-form input-output law, over the supplied displacement grid.
/// Supported classes: C_att, A1, A2, B1, B2.
pub fn verify_char_relation(
    rho: &DensityOperator,
    spec: &ChannelSpec,
    mus: &[C64],
    d_out: usize,
) -> Result<f64> {
    spec.validate()?;
    match spec.class {
        ChannelClass::CAtt
        | ChannelClass::A1
        | ChannelClass::A2
        | ChannelClass::B1
        | ChannelClass::B2 => {}
        other => {
            return Err(Error::Unsupported(format!(
                "no closed-form characteristic relation implemented for {other}"
            )))
        }
    }
    let output = apply_channel(rho, spec, d_out)?;
    // evaluate the input characteristic function with enough headroom that
    // the truncated displacement is accurate
    let d_chi = rho.dim().max(40);
    let input = rho.embed(d_chi)?;
    let mut worst = 0.0f64;
    for &mu in mus {
        let chi_out = output.characteristic_function(mu)?;
        let law = match spec.class {
            ChannelClass::CAtt => {
                let eta = spec.eta.unwrap();
                let n = spec.n.unwrap();
                let chi_in = input.characteristic_function(mu * eta.sqrt())?;
                chi_in * C64::new((-(1.0 - eta) * (n + 0.5) * mu.norm_sqr()).exp(), 0.0)
            }
            ChannelClass::A1 => {
                let n = spec.n.unwrap();
                C64::new((-(n + 0.5) * mu.norm_sqr()).exp(), 0.0)
            }
            ChannelClass::A2 => {
                let n = spec.n.unwrap();
                let chi_in = input.characteristic_function(C64::new(0.0, -mu.im))?;
                chi_in * C64::new((-(n + 0.5) * mu.norm_sqr()).exp(), 0.0)
            }
            ChannelClass::B1 => {
                let chi_in = input.characteristic_function(mu)?;
                chi_in * C64::new((-mu.im * mu.im / 2.0).exp(), 0.0)
            }
            ChannelClass::B2 => {
                let t = spec.t.unwrap();
                let chi_in = input.characteristic_function(mu)?;
                chi_in * C64::new((-t * mu.norm_sqr()).exp(), 0.0)
            }
            _ => unreachable!(),
        };
        let resid = (chi_out - law).norm();
        if resid > worst {
            worst = resid;
        }
    }
    Ok(worst)
}
