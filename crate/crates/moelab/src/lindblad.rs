//! Diagonal Lindblad semigroups on the truncated Fock space: the generator,
//! a fixed-step integrator, instantaneous entropy production rates, and the
//! check that rates on an entropy shell stay above the thermal candidate.
//!
//! The generator acts as (gamma_plus/2) L_plus + (gamma_minus/2) L_minus with
//! L_plus(rho) = 2 a^dag rho a - aa^dag rho - rho aa^dag and
//! L_minus(rho) = 2 a rho a^dag - a^dag a rho - rho a^dag a, so the mean
//! photon number drifts as gamma_plus (n+1) - gamma_minus n.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, gibbs_state, DensityOperator};
use crate::numeric::{adjoint, eigvalsh, seeded_rng, trace};
use crate::optimizer::{assemble_state, shell_spectrum, VIOLATION_TOL};

/// Population allowed on the top Fock level before generator output is
/// untrustworthy. Raising terms at the edge are cut by the truncation.
pub const LEAK_GUARD: f64 = 1e-8;
/// The generator output must be traceless to this accuracy.
const GENERATOR_TRACE_TOL: f64 = 1e-9;
/// Trace-norm change one integrator step may take on the initial state.
const STEP_CHANGE_LIMIT: f64 = 2e-3;
/// Trace drift along the run above this reads as instability.
const STEP_DRIFT_LIMIT: f64 = 1e-5;
/// Trace drift allowed in the final state.
const FINAL_DRIFT_LIMIT: f64 = 1e-7;
/// Negative eigenvalue mass allowed in the final state.
const POSITIVITY_LIMIT: f64 = 1e-7;
/// Floor inside ln(rho); regularizes the integrable divergence of the rate
/// at the boundary of the state space.
const LN_EIG_FLOOR: f64 = 1e-14;
/// Generator weight flowing through a null direction of rho above this
/// makes the instantaneous rate divergent.
const NULL_RATE_TOL: f64 = 1e-10;
/// Target population for the top level of rate-check sample states: far
/// enough under the leak guard, comfortably above the support floor.
const WINDOW_POP: f64 = 1e-10;
/// Fock levels kept diagonal above the randomized block of a sample state.
const TAIL_LEVELS: usize = 8;

/// Rates of the upward and downward dissipators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladGenerator {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl LindbladGenerator {
    pub fn new(gamma_plus: f64, gamma_minus: f64) -> Result<Self> {
        for (name, v) in [("gamma_plus", gamma_plus), ("gamma_minus", gamma_minus)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self {
            gamma_plus,
            gamma_minus,
        })
    }

    /// Damping toward the thermal state with mean `n`; time t realizes the
    /// attenuator with eta = exp(-t) and that environment.
    pub fn attenuator_family(n: f64) -> Result<Self> {
        Self::new(n, n + 1.0)
    }

    /// Heating with gain kappa^2 = exp(t) against an environment with mean `n`.
    pub fn amplifier_family(n: f64) -> Result<Self> {
        Self::new(n + 1.0, n)
    }

    /// Balanced rates; time t adds classical number-diffusion noise t.
    pub fn classical_noise_family() -> Self {
        Self {
            gamma_plus: 1.0,
            gamma_minus: 1.0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let gen: LindbladGenerator = serde_json::from_str(s)
            .map_err(|e| Error::Domain(format!("generator json rejected: {e}")))?;
        Self::new(gen.gamma_plus, gen.gamma_minus)
    }

    /// d/dt of the mean photon number at mean `n`.
    pub fn drift_rate(&self, n: f64) -> f64 {
        self.gamma_plus * (n + 1.0) - self.gamma_minus * n
    }
}

/// The dissipator acting on a raw matrix, built from the truncated ladder
/// operators. aa^dag loses its top diagonal entry under truncation, which
/// keeps the output exactly traceless; the affected entries sit behind the
/// leak guard.
fn apply_dissipator(gen: &LindbladGenerator, m: &Array2<C64>) -> Array2<C64> {
    let d = m.nrows();
    let gp = 0.5 * gen.gamma_plus;
    let gm = 0.5 * gen.gamma_minus;
    let mut out = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        let cp_i = if i + 1 < d { (i + 1) as f64 } else { 0.0 };
        for j in 0..d {
            let cp_j = if j + 1 < d { (j + 1) as f64 } else { 0.0 };
            let mut acc = C64::new(0.0, 0.0);
            if i > 0 && j > 0 {
                acc += 2.0 * gp * ((i * j) as f64).sqrt() * m[[i - 1, j - 1]];
            }
            acc -= gp * (cp_i + cp_j) * m[[i, j]];
            if i + 1 < d && j + 1 < d {
                acc += 2.0 * gm * (((i + 1) * (j + 1)) as f64).sqrt() * m[[i + 1, j + 1]];
            }
            acc -= gm * ((i + j) as f64) * m[[i, j]];
            out[[i, j]] = acc;
        }
    }
    out
}

fn check_leak(rho: &DensityOperator, context: &str) -> Result<()> {
    let top = rho.populations()[rho.dim() - 1];
    if top >= LEAK_GUARD {
        return Err(Error::CutoffTooSmall {
            tail_mass: top,
            limit: LEAK_GUARD,
            context: context.into(),
        });
    }
    Ok(())
}

/// Time derivative of the state under the generator.
pub fn generator_apply(gen: &LindbladGenerator, rho: &DensityOperator) -> Result<Array2<C64>> {
    check_leak(rho, "generator application")?;
    let out = apply_dissipator(gen, rho.matrix());
    let tr = trace(&out).norm();
    if tr >= GENERATOR_TRACE_TOL {
        return Err(Error::InvalidTrace(tr));
    }
    Ok(out)
}

/// Health record of one integrator run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolutionReport {
    pub steps: usize,
    pub dt: f64,
    pub max_step_trace_drift: f64,
    pub final_trace_drift: f64,
    pub positivity_defect: f64,
}

fn rk4_step(gen: &LindbladGenerator, m: &Array2<C64>, dt: f64) -> Array2<C64> {
    let k1 = apply_dissipator(gen, m);
    let k2 = apply_dissipator(gen, &(m + &(&k1 * C64::new(0.5 * dt, 0.0))));
    let k3 = apply_dissipator(gen, &(m + &(&k2 * C64::new(0.5 * dt, 0.0))));
    let k4 = apply_dissipator(gen, &(m + &(&k3 * C64::new(dt, 0.0))));
    let incr = (k1 + &(k2 * 2.0) + &(k3 * 2.0) + k4) * C64::new(dt / 6.0, 0.0);
    m + &incr
}

fn hermitize(m: &Array2<C64>) -> Array2<C64> {
    (m + &adjoint(m)) * C64::new(0.5, 0.0)
}

/// Classical 4th-order integration of the master equation; `visit` sees the
/// state at every grid point, the initial one included.
fn integrate<F>(
    gen: &LindbladGenerator,
    rho: &DensityOperator,
    t: f64,
    steps: usize,
    mut visit: F,
) -> Result<(Array2<C64>, EvolutionReport)>
where
    F: FnMut(usize, &Array2<C64>) -> Result<()>,
{
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Domain(format!("evolution time must be >= 0, got {t}")));
    }
    check_leak(rho, "evolution start")?;
    if t == 0.0 {
        visit(0, rho.matrix())?;
        let report = EvolutionReport {
            steps: 0,
            dt: 0.0,
            max_step_trace_drift: 0.0,
            final_trace_drift: 0.0,
            positivity_defect: 0.0,
        };
        return Ok((rho.matrix().clone(), report));
    }
    if steps == 0 {
        return Err(Error::Domain("a positive duration needs steps >= 1".into()));
    }
    let dt = t / steps as f64;
    let speed = eigvalsh(&apply_dissipator(gen, rho.matrix()))?
        .iter()
        .map(|v| v.abs())
        .sum::<f64>();
    if dt * speed > STEP_CHANGE_LIMIT {
        return Err(Error::Step(format!(
            "step change {:.3e} exceeds {STEP_CHANGE_LIMIT:.1e}; raise steps",
            dt * speed
        )));
    }
    let d = rho.dim();
    let mut m = rho.matrix().clone();
    let mut max_drift = 0.0f64;
    visit(0, &m)?;
    for k in 1..=steps {
        m = hermitize(&rk4_step(gen, &m, dt));
        let drift = (trace(&m).re - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > STEP_DRIFT_LIMIT {
            return Err(Error::Step(format!(
                "trace drift {drift:.3e} at step {k}; integration unstable"
            )));
        }
        let top = m[[d - 1, d - 1]].re;
        if top >= LEAK_GUARD {
            return Err(Error::CutoffTooSmall {
                tail_mass: top,
                limit: LEAK_GUARD,
                context: format!("evolution step {k}"),
            });
        }
        visit(k, &m)?;
    }
    let final_drift = (trace(&m).re - 1.0).abs();
    if final_drift > FINAL_DRIFT_LIMIT {
        return Err(Error::Step(format!(
            "final trace drift {final_drift:.3e} exceeds {FINAL_DRIFT_LIMIT:.1e}"
        )));
    }
    let min_eig = eigvalsh(&m)?[0];
    if min_eig < -POSITIVITY_LIMIT {
        return Err(Error::NotPositive(min_eig));
    }
    let report = EvolutionReport {
        steps,
        dt,
        max_step_trace_drift: max_drift,
        final_trace_drift: final_drift,
        positivity_defect: (-min_eig).max(0.0),
    };
    Ok((m, report))
}

/// Evolve `rho` for duration `t` in `steps` fixed steps.
pub fn evolve(
    gen: &LindbladGenerator,
    rho: &DensityOperator,
    t: f64,
    steps: usize,
) -> Result<DensityOperator> {
    Ok(evolve_with_report(gen, rho, t, steps)?.0)
}

pub fn evolve_with_report(
    gen: &LindbladGenerator,
    rho: &DensityOperator,
    t: f64,
    steps: usize,
) -> Result<(DensityOperator, EvolutionReport)> {
    let (m, report) = integrate(gen, rho, t, steps, |_, _| Ok(()))?;
    Ok((DensityOperator::new(m)?, report))
}

/// Instantaneous entropy production -Tr[L(rho) ln rho]. Null directions of
/// rho fed by the generator make the rate divergent and return +infinity.
pub fn entropy_rate(gen: &LindbladGenerator, rho: &DensityOperator) -> Result<f64> {
    let lrho = generator_apply(gen, rho)?;
    let (eigs, vecs) = rho.eigensystem()?;
    let folded = adjoint(&vecs).dot(&lrho).dot(&vecs);
    let mut rate = 0.0;
    for (i, &lam) in eigs.iter().enumerate() {
        let w = folded[[i, i]].re;
        if lam < fock::SUPPORT_EIG_FLOOR && w > NULL_RATE_TOL {
            return Ok(f64::INFINITY);
        }
        rate -= w * lam.max(LN_EIG_FLOOR).ln();
    }
    Ok(rate)
}

/// |S(rho_T) - S(rho_0) - integral of the rate| with the integral taken as a
/// trapezoid sum on the integration grid itself.
pub fn verify_integral_form(
    gen: &LindbladGenerator,
    rho: &DensityOperator,
    t: f64,
    steps: usize,
) -> Result<f64> {
    let mut rates: Vec<f64> = Vec::with_capacity(steps + 1);
    let (m, _) = integrate(gen, rho, t, steps, |_, state| {
        let rate = entropy_rate(gen, &DensityOperator::new(state.clone())?)?;
        if !rate.is_finite() {
            return Err(Error::Step(
                "entropy rate diverged on the integration grid".into(),
            ));
        }
        rates.push(rate);
        Ok(())
    })?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let dt = t / steps as f64;
    let inner: f64 = rates[1..steps].iter().sum();
    let integral = dt * (0.5 * rates[0] + inner + 0.5 * rates[steps]);
    let s_start = rho.von_neumann_entropy()?;
    let s_end = DensityOperator::new(m)?.von_neumann_entropy()?;
    Ok((s_end - s_start - integral).abs())
}

/// Outcome of sampling entropy rates on one fixed-entropy shell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfinitesimalReport {
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    pub conjectured_rate: f64,
    pub min_rate: f64,
    pub samples: usize,
    pub violations: usize,
    pub seed: u64,
}

/// Sample states with entropy exactly `s0` and compare their entropy rates
/// against the thermal candidate's rate [(gamma_plus - gamma_minus) N0 +
/// gamma_plus] ln((N0+1)/N0). Sample 0 is the truncated thermal candidate
/// itself; the rest randomize a shell spectrum in a lower-dimensional block
/// so the top levels keep populations inside the rate window.
pub fn infinitesimal_conjecture_check(
    gen: &LindbladGenerator,
    s0: f64,
    samples: usize,
    seed: u64,
) -> Result<InfinitesimalReport> {
    if !s0.is_finite() || s0 <= 0.0 {
        return Err(Error::Domain(format!(
            "the rate check needs a positive shell entropy, got {s0}"
        )));
    }
    let n0 = fock::g_inverse(s0)?;
    let beta = ((n0 + 1.0) / n0).ln();
    let conjectured = ((gen.gamma_plus - gen.gamma_minus) * n0 + gen.gamma_plus) * beta;

    let x = n0 / (n0 + 1.0);
    let d = 1 + ((WINDOW_POP / (1.0 - x)).ln() / x.ln()).ceil() as usize;
    let d_block = d.saturating_sub(TAIL_LEVELS);
    if d_block < 2 || s0 > (d_block as f64).ln() - 0.5 {
        return Err(Error::Constraint(format!(
            "shell entropy {s0} does not fit the randomized block at cutoff {d}"
        )));
    }

    let mut min_rate = f64::INFINITY;
    let mut violations = 0usize;
    for i in 0..samples {
        let rate = if i == 0 {
            entropy_rate(gen, &gibbs_state(d, n0)?)?
        } else {
            let ramp: Vec<f64> = (0..d).map(|k| -(k as f64)).collect();
            let spectrum = shell_spectrum(&ramp, s0)?;
            let mut rng = seeded_rng(seed.wrapping_add(i as u64));
            let block = crate::numeric::haar_unitary(&mut rng, d_block)?;
            let mut u = Array2::<C64>::eye(d);
            u.slice_mut(ndarray::s![..d_block, ..d_block]).assign(&block);
            entropy_rate(gen, &assemble_state(&spectrum, &u)?)?
        };
        min_rate = min_rate.min(rate);
        if rate < conjectured - VIOLATION_TOL {
            violations += 1;
        }
    }
    Ok(InfinitesimalReport {
        s0,
        n0,
        conjectured_rate: conjectured,
        min_rate,
        samples,
        violations,
        seed,
    })
}
