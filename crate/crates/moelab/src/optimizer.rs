//! Search over fixed-entropy input states for the minimal output entropy of a
//! channel, plus the relative-entropy identities that recast that question.
//!
//! States with entropy exactly `S0` are parametrized by an unconstrained
//! spectrum pre-image and a unitary frame; after every move the spectrum is
//! re-projected onto the entropy shell by a scalar root-find, so the search
//! never leaves the constraint set.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::channels::{ChannelClass, ChannelSpec, ChannelSuperop};
use crate::error::{Error, Result};
use crate::fock::{self, gibbs_state, relative_entropy, DensityOperator};
use crate::gaussian::{embed_gaussian_to_fock, GaussianState};
use crate::numeric::{self, adjoint, expm_antihermitian, shannon_entropy};

/// A sampled or optimized output entropy this far below the conjectured
/// minimum counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-4;
/// Entropy headroom below ln(d) required of every target shell.
pub const SHELL_MARGIN: f64 = 0.5;
/// Residual allowed when the scalar root-find pins the shell entropy.
const SHELL_RESIDUAL_TOL: f64 = 1e-10;
/// Squeezed q-variances probed by scans on the anisotropic classes. Probes
/// whose Fock embedding does not fit the cutoff are skipped.
const PROBE_VARIANCES: [f64; 6] = [2.56, 1.69, 1.21, 0.9025, 0.7225, 0.5625];

/// Knobs for the local search. `step` is the relative finite-difference
/// step used for gradients.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            iterations: 40,
            step: 1e-5,
            seed: 7,
        }
    }
}

/// How cleanly the best state sits on the entropy shell and inside the cutoff.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub entropy_residual: f64,
    pub tail_mass: f64,
}

/// Outcome of a minimization or scan over one entropy shell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub channel: ChannelSpec,
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "N0")]
    pub n0: f64,
    pub conjectured_min: f64,
    pub best_found: f64,
    /// best_found - conjectured_min, reported with sign.
    pub gap: f64,
    /// Restarts that produced a candidate (aborted ones are the difference
    /// from the configured count).
    pub n_restarts: usize,
    /// Objective evaluations (minimization) or evaluated inputs (scan).
    pub n_samples: usize,
    pub violations: usize,
    pub seed: u64,
    pub cutoff: usize,
    pub best_state_diagnostics: StateDiagnostics,
}

/// One evaluated input of a scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanRow {
    pub sample: usize,
    pub input_entropy: f64,
    pub output_entropy: f64,
    pub bound: f64,
    pub slack: f64,
}

/// Scan report plus the per-sample rows backing it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub report: OptimizationReport,
    pub rows: Vec<ScanRow>,
}

/// Signed slacks of the relative-entropy inequality: `slack` carries the
/// channel-dependent prefactor, `monotonicity_slack` replaces it by 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DdsReport {
    pub slack: f64,
    pub monotonicity_slack: f64,
}

fn check_shell_target(s0: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if !s0.is_finite() || s0 < 0.0 {
        return Err(Error::Domain(format!(
            "entropy target must be finite and nonnegative, got {s0}"
        )));
    }
    let cap = (d as f64).ln() - SHELL_MARGIN;
    if s0 > cap {
        return Err(Error::Constraint(format!(
            "entropy target {s0} exceeds the reachable cap {cap} at cutoff {d}"
        )));
    }
    Ok(())
}

/// Spectrum on the S0 shell from an unconstrained pre-image `g`: the softmax
/// family p(theta) ~ exp(theta * g) interpolates between the uniform spectrum
/// (theta = 0) and a point mass, so a bisection on theta pins the Shannon
/// entropy to S0.
pub(crate) fn shell_spectrum(g: &[f64], s0: f64) -> Result<Vec<f64>> {
    let d = g.len();
    check_shell_target(s0, d)?;
    if s0 == 0.0 {
        let mut best = 0;
        for (i, &gi) in g.iter().enumerate() {
            if gi > g[best] {
                best = i;
            }
        }
        let mut p = vec![0.0; d];
        p[best] = 1.0;
        return Ok(p);
    }
    let softmax = |theta: f64| -> Vec<f64> {
        let top = g
            .iter()
            .fold(f64::NEG_INFINITY, |acc, &v| acc.max(theta * v));
        let mut p: Vec<f64> = g.iter().map(|&v| (theta * v - top).exp()).collect();
        let z: f64 = p.iter().sum();
        for v in &mut p {
            *v /= z;
        }
        p
    };
    let mut hi = 1.0;
    let mut found = false;
    for _ in 0..80 {
        if shannon_entropy(&softmax(hi)) < s0 {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return Err(Error::Constraint(
            "entropy target unreachable from this spectrum pre-image".into(),
        ));
    }
    let theta = numeric::bisect(|t| shannon_entropy(&softmax(t)) - s0, 0.0, hi, 200)?;
    let p = softmax(theta);
    let res = (shannon_entropy(&p) - s0).abs();
    if res > SHELL_RESIDUAL_TOL {
        return Err(Error::Constraint(format!(
            "shell projection residual {res:.3e} exceeds {SHELL_RESIDUAL_TOL:.1e}"
        )));
    }
    Ok(p)
}

pub(crate) fn assemble_state(p: &[f64], u: &Array2<C64>) -> Result<DensityOperator> {
    let d = p.len();
    let mut scaled = u.clone();
    for (k, &pk) in p.iter().enumerate() {
        for i in 0..d {
            scaled[(i, k)] *= C64::new(pk, 0.0);
        }
    }
    DensityOperator::new(scaled.dot(&adjoint(u)))
}

/// Draw a random state with entropy exactly `s0`: spectrum from the softmax
/// of Gaussian variates projected onto the shell, frame from a Haar unitary.
/// Deterministic per seed.
pub fn sample_fixed_entropy_state(s0: f64, d: usize, seed: u64) -> Result<DensityOperator> {
    check_shell_target(s0, d)?;
    let mut rng = numeric::seeded_rng(seed);
    let g = numeric::normal_vec(&mut rng, d);
    let u = numeric::haar_unitary(&mut rng, d)?;
    let p = shell_spectrum(&g, s0)?;
    assemble_state(&p, &u)
}

/// Conjectured minimal output entropy over the S0 shell. The additive
/// classes deviate from the thermal bookkeeping: the q-measuring class has
/// infimum g(N) (approached, not attained) and the q-noise class has
/// infimum S0 itself, both reached only in the squeezed limit.
pub fn conjectured_minimum(ch: &ChannelSpec, s0: f64) -> Result<f64> {
    ch.validate()?;
    match ch.class {
        ChannelClass::B1 => Ok(s0),
        ChannelClass::A2 => Ok(fock::g_function(ch.n.unwrap())),
        _ => {
            let n0 = fock::g_inverse(s0)?;
            Ok(fock::g_function(ch.thermal_output_mean(n0)?))
        }
    }
}

/// Output cutoff giving every state of the search space headroom through the
/// channel. Budgeted for inputs with mean photon number up to 3/4 of the
/// input cutoff; states above the budget abort their restart instead.
pub fn search_output_dim(ch: &ChannelSpec, d: usize) -> Result<usize> {
    ch.validate()?;
    let law = ch.photon_law()?;
    let dim = match ch.class {
        ChannelClass::CAtt | ChannelClass::A1 | ChannelClass::A2 | ChannelClass::B1 => {
            d + 8 + (4.0 * ch.n.unwrap_or(0.0)).ceil() as usize
        }
        ChannelClass::CAmp | ChannelClass::D => {
            let need = 2.0 * (law.slope * 0.75 * d as f64 + law.offset + 1.0);
            (need.ceil() as usize).max(d + 8)
        }
        ChannelClass::B2 => {
            let t = ch.t.unwrap();
            let reach = ((d as f64 - 1.0).sqrt() + (26.0 * t).sqrt()).powi(2);
            reach.ceil() as usize + 8
        }
    };
    Ok(dim)
}

struct ShellObjective<'a> {
    d: usize,
    s0: f64,
    superop: &'a ChannelSuperop,
}

impl ShellObjective<'_> {
    fn state(&self, x: &[f64], base: &Array2<C64>) -> Result<DensityOperator> {
        let (gpart, cpart) = x.split_at(self.d);
        let p = shell_spectrum(gpart, self.s0)?;
        let rotated = if cpart.iter().all(|&c| c == 0.0) {
            base.clone()
        } else {
            let mut a = Array2::<C64>::zeros((self.d, self.d));
            let mut k = 0;
            for i in 0..self.d {
                for j in (i + 1)..self.d {
                    let z = C64::new(cpart[2 * k], cpart[2 * k + 1]);
                    a[(i, j)] = z;
                    a[(j, i)] = -z.conj();
                    k += 1;
                }
            }
            expm_antihermitian(&a)?.dot(base)
        };
        assemble_state(&p, &rotated)
    }

    fn value(&self, x: &[f64], base: &Array2<C64>) -> Result<(f64, DensityOperator)> {
        let rho = self.state(x, base)?;
        let out = self.superop.apply(&rho)?;
        Ok((out.von_neumann_entropy()?, rho))
    }
}

/// Local descent over the S0 shell from several restarts. Restart 0 seeds
/// the thermal family (monotone spectrum pre-image in the Fock frame); later
/// restarts are random. A restart whose objective fails (cutoff leakage)
/// contributes nothing and is dropped from `n_restarts`.
pub fn minimize_output_entropy(
    ch: &ChannelSpec,
    s0: f64,
    d: usize,
    cfg: &OptimizerConfig,
) -> Result<OptimizationReport> {
    check_shell_target(s0, d)?;
    if cfg.restarts == 0 {
        return Err(Error::Domain("at least one restart is required".into()));
    }
    if !(cfg.step.is_finite() && cfg.step > 0.0) {
        return Err(Error::Domain(format!(
            "finite-difference step must be positive, got {}",
            cfg.step
        )));
    }
    let n0 = fock::g_inverse(s0)?;
    let conjectured = conjectured_minimum(ch, s0)?;
    let d_out = search_output_dim(ch, d)?;
    let superop = ChannelSuperop::build(ch, d_out, None)?;
    let objective = ShellObjective {
        d,
        s0,
        superop: &superop,
    };
    let n_params = d + d * (d - 1);

    let mut best: Option<(f64, DensityOperator)> = None;
    let mut completed = 0usize;
    let mut n_evals = 0usize;
    let mut violations = 0usize;

    for r in 0..cfg.restarts {
        let mut rng = numeric::seeded_rng(cfg.seed.wrapping_add(r as u64));
        let (pre, base) = if r == 0 {
            let ramp: Vec<f64> = (0..d).map(|i| -(i as f64)).collect();
            (ramp, Array2::<C64>::eye(d))
        } else {
            let pre = numeric::normal_vec(&mut rng, d);
            let base = numeric::haar_unitary(&mut rng, d)?;
            (pre, base)
        };
        let mut x = vec![0.0; n_params];
        x[..d].copy_from_slice(&pre);

        let (mut f0, mut rho0) = match objective.value(&x, &base) {
            Ok(v) => v,
            Err(_) => continue,
        };
        n_evals += 1;

        let mut alpha = 0.1;
        'descent: for _ in 0..cfg.iterations {
            let mut grad = vec![0.0; n_params];
            for i in 0..n_params {
                let h = cfg.step * (1.0 + x[i].abs());
                let saved = x[i];
                x[i] += h;
                let probe = objective.value(&x, &base);
                x[i] = saved;
                match probe {
                    Ok((f, _)) => {
                        grad[i] = (f - f0) / h;
                        n_evals += 1;
                    }
                    Err(_) => break 'descent,
                }
            }
            let gmax = grad.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
            if gmax < 1e-12 {
                break;
            }
            let mut a = alpha;
            let mut accepted = false;
            for _ in 0..25 {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(&xi, &gi)| xi - a * gi / gmax)
                    .collect();
                if let Ok((f, rho)) = objective.value(&trial, &base) {
                    n_evals += 1;
                    if f < f0 - 1e-12 {
                        x = trial;
                        f0 = f;
                        rho0 = rho;
                        accepted = true;
                        break;
                    }
                }
                a *= 0.5;
            }
            if !accepted {
                break;
            }
            alpha = (a * 1.5).min(1.0);
        }

        completed += 1;
        if f0 < conjectured - VIOLATION_TOL {
            violations += 1;
        }
        if best.as_ref().is_none_or(|(fb, _)| f0 < *fb) {
            best = Some((f0, rho0));
        }
    }

    let (best_found, best_state) = best.ok_or_else(|| {
        Error::Constraint("every restart aborted before producing a candidate".into())
    })?;
    let residual = (best_state.von_neumann_entropy()? - s0).abs();
    Ok(OptimizationReport {
        channel: *ch,
        s0,
        n0,
        conjectured_min: conjectured,
        best_found,
        gap: best_found - conjectured,
        n_restarts: completed,
        n_samples: n_evals,
        violations,
        seed: cfg.seed,
        cutoff: d,
        best_state_diagnostics: StateDiagnostics {
            entropy_residual: residual,
            tail_mass: best_state.tail_mass(),
        },
    })
}

/// Pure sampling over the S0 shell: no descent, one output entropy per draw.
/// For the anisotropic classes a ladder of squeezed Gaussian probes is
/// appended, since random spectra never approach the squeezed boundary where
/// those infima live. Violations are counted below conjectured - 1e-4.
pub fn conjecture_v2_scan(
    ch: &ChannelSpec,
    s0: f64,
    d: usize,
    n_samples: usize,
    seed: u64,
) -> Result<ScanOutcome> {
    check_shell_target(s0, d)?;
    let n0 = fock::g_inverse(s0)?;
    let bound = conjectured_minimum(ch, s0)?;
    let d_out = search_output_dim(ch, d)?;
    let superop = ChannelSuperop::build(ch, d_out, None)?;

    let mut rows = Vec::new();
    let mut best: Option<(f64, DensityOperator)> = None;
    let mut push = |rows: &mut Vec<ScanRow>, rho: DensityOperator, s_in: f64| -> Result<()> {
        let s_out = superop.apply(&rho)?.von_neumann_entropy()?;
        rows.push(ScanRow {
            sample: rows.len(),
            input_entropy: s_in,
            output_entropy: s_out,
            bound,
            slack: s_out - bound,
        });
        if best.as_ref().is_none_or(|(fb, _)| s_out < *fb) {
            best = Some((s_out, rho));
        }
        Ok(())
    };

    for i in 0..n_samples {
        let rho = sample_fixed_entropy_state(s0, d, seed.wrapping_add(i as u64))?;
        let s_in = rho.von_neumann_entropy()?;
        push(&mut rows, rho, s_in)?;
    }

    let anisotropic = matches!(ch.class, ChannelClass::A2 | ChannelClass::B1);
    if anisotropic && n_samples > 0 {
        let nu = n0 + 0.5;
        for &vs in PROBE_VARIANCES.iter() {
            let (vq, vp) = match ch.class {
                ChannelClass::A2 => (vs, nu * nu / vs),
                _ => (nu * nu / vs, vs),
            };
            let gs = match GaussianState::from_variances(vq, vp) {
                Ok(g) => g,
                Err(_) => continue,
            };
            let rho = match embed_gaussian_to_fock(&gs, d) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let s_in = rho.von_neumann_entropy()?;
            push(&mut rows, rho, s_in)?;
        }
    }

    let (best_found, diagnostics) = match &best {
        Some((f, rho)) => (
            *f,
            StateDiagnostics {
                entropy_residual: (rho.von_neumann_entropy()? - s0).abs(),
                tail_mass: rho.tail_mass(),
            },
        ),
        None => (
            f64::INFINITY,
            StateDiagnostics {
                entropy_residual: 0.0,
                tail_mass: 0.0,
            },
        ),
    };
    let violations = rows.iter().filter(|r| r.slack < -VIOLATION_TOL).count();
    Ok(ScanOutcome {
        report: OptimizationReport {
            channel: *ch,
            s0,
            n0,
            conjectured_min: bound,
            best_found,
            gap: best_found - bound,
            n_restarts: 0,
            n_samples: rows.len(),
            violations,
            seed,
            cutoff: d,
            best_state_diagnostics: diagnostics,
        },
        rows,
    })
}

struct RelativeTerms {
    slope: f64,
    beta_ratio: f64,
    rel_in: f64,
    rel_out: f64,
    s_out: f64,
    bound: f64,
}

/// Both relative entropies, the output entropy, and the rate prefactor for
/// the gain classes, all against the thermal reference pair.
fn relative_terms(ch: &ChannelSpec, rho: &DensityOperator, n0: f64) -> Result<RelativeTerms> {
    ch.validate()?;
    match ch.class {
        ChannelClass::CAtt | ChannelClass::CAmp | ChannelClass::B2 => {}
        other => {
            return Err(Error::Unsupported(format!(
                "relative-entropy identity covers the gain classes only, got {other}"
            )));
        }
    }
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::Domain(format!(
            "thermal reference needs a positive mean photon number, got {n0}"
        )));
    }
    let d = rho.dim();
    let law = ch.photon_law()?;
    let n0p = law.slope * n0 + law.offset;
    let beta = ((n0 + 1.0) / n0).ln();
    let beta_p = ((n0p + 1.0) / n0p).ln();

    // both thermal references must keep their whole spectrum clear of the
    // relative-entropy support floor, or every input reads as divergent
    let clear = 10.0 * fock::SUPPORT_EIG_FLOOR;
    let min_pop = |nn: f64, dim: usize| -> f64 {
        let x = nn / (nn + 1.0);
        x.powi(dim as i32 - 1) * (1.0 - x)
    };
    if min_pop(n0, d) < clear {
        return Err(Error::Domain(format!(
            "thermal reference at mean {n0} falls under the support floor at cutoff {d}; \
             use a smaller cutoff or a hotter shell"
        )));
    }
    // the output cutoff needs real headroom above the top input level: gate
    // sectors that cross it are re-unitarized after truncation and misplace
    // amplitude at the sqrt of the crossing weight
    let wanted = match ch.class {
        ChannelClass::CAtt => d + 12 + (4.0 * ch.n.unwrap()).ceil() as usize,
        ChannelClass::CAmp => {
            // amplified top level spreads negative-binomially; seven sigmas
            // keep the clipped weight out of the blocks
            let k2 = ch.kappa2.unwrap();
            let spread = (k2 * (k2 - 1.0) * d as f64).sqrt();
            (k2 * (d as f64 - 1.0) + law.offset + 7.0 * spread).ceil() as usize + 4
        }
        _ => {
            let t = ch.t.unwrap();
            let reach = ((d as f64 - 1.0).sqrt() + (15.0 * t).sqrt()).powi(2);
            reach.ceil() as usize + 4
        }
    };
    let xp = n0p / (n0p + 1.0);
    let floor_cap = 1 + ((clear / (1.0 - xp)).ln() / xp.ln()).floor() as usize;
    let d_out = wanted.min(floor_cap);
    if d_out < d {
        return Err(Error::Domain(format!(
            "output reference at mean {n0p} falls under the support floor before \
             cutoff {d}; use a smaller cutoff or a hotter shell"
        )));
    }
    let superop = ChannelSuperop::build(ch, d_out, None)?;
    let ref_in = gibbs_state(d, n0)?;
    let out = superop.apply(rho)?;
    // the channel maps thermal states to thermal states, so the output
    // reference is built directly; pushing the truncated input reference
    // through the numeric channel would starve its top levels instead
    let ref_out = gibbs_state(d_out, n0p)?;

    let rel_in = relative_entropy(rho, &ref_in)?;
    let rel_out = relative_entropy(&out, &ref_out)?;
    if !(rel_in.is_finite() && rel_out.is_finite()) {
        return Err(Error::Domain(
            "relative entropy diverged; the identity is not applicable to this input".into(),
        ));
    }
    Ok(RelativeTerms {
        slope: law.slope,
        beta_ratio: beta_p / beta,
        rel_in,
        rel_out,
        s_out: out.von_neumann_entropy()?,
        bound: fock::g_function(n0p),
    })
}

/// Residual of the identity rewriting the output-entropy gap through relative
/// entropies: |[S(out) - g(n0')] - [k2 (b'/b) S(rho||rho0) - S(out||out0)]|.
/// Meaningful when S(rho) = g(n0); diverging relative entropies are reported
/// as a domain error so callers can exclude the input.
pub fn equiv_identity_residual(ch: &ChannelSpec, rho: &DensityOperator, n0: f64) -> Result<f64> {
    let t = relative_terms(ch, rho, n0)?;
    let lhs = t.s_out - t.bound;
    let rhs = t.slope * t.beta_ratio * t.rel_in - t.rel_out;
    Ok((lhs - rhs).abs())
}

/// Signed slack of the conjectured relative-entropy inequality, together with
/// the always-true monotonicity slack (prefactor replaced by 1).
pub fn dds_inequality_check(ch: &ChannelSpec, rho: &DensityOperator, n0: f64) -> Result<DdsReport> {
    let t = relative_terms(ch, rho, n0)?;
    Ok(DdsReport {
        slack: t.slope * t.beta_ratio * t.rel_in - t.rel_out,
        monotonicity_slack: t.rel_in - t.rel_out,
    })
}

/// Margin k2 b' - b of the sufficient condition that would let monotonicity
/// alone settle the question; negative everywhere it is probed.
pub fn sufficient_condition_margin(ch: &ChannelSpec, n0: f64) -> Result<f64> {
    ch.validate()?;
    match ch.class {
        ChannelClass::CAtt | ChannelClass::CAmp | ChannelClass::B2 => {}
        other => {
            return Err(Error::Unsupported(format!(
                "sufficient-condition margin covers the gain classes only, got {other}"
            )));
        }
    }
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::Domain(format!(
            "thermal reference needs a positive mean photon number, got {n0}"
        )));
    }
    let law = ch.photon_law()?;
    let n0p = law.slope * n0 + law.offset;
    let beta = ((n0 + 1.0) / n0).ln();
    let beta_p = ((n0p + 1.0) / n0p).ln();
    Ok(law.slope * beta_p - beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{g_function, g_inverse};
    use crate::numeric::trace_distance;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixed_entropy_sampler_hits_the_shell() {
        for &s0 in &[0.5, g_function(1.0), 2.0] {
            let rho = sample_fixed_entropy_state(s0, 24, 11).unwrap();
            let s = rho.von_neumann_entropy().unwrap();
            assert!((s - s0).abs() < 1e-9, "shell residual {} at S0={s0}", s - s0);
        }
        let a = sample_fixed_entropy_state(1.2, 24, 5).unwrap();
        let b = sample_fixed_entropy_state(1.2, 24, 5).unwrap();
        let c = sample_fixed_entropy_state(1.2, 24, 6).unwrap();
        assert_abs_diff_eq!(trace_distance(a.matrix(), b.matrix()).unwrap(), 0.0);
        assert!(trace_distance(a.matrix(), c.matrix()).unwrap() > 1e-3);
    }

    #[test]
    fn zero_entropy_samples_are_pure() {
        let rho = sample_fixed_entropy_state(0.0, 16, 3).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        assert!(rho.von_neumann_entropy().unwrap() < 1e-10);
    }

    #[test]
    fn unreachable_shell_targets_are_rejected() {
        assert!(matches!(
            sample_fixed_entropy_state(-0.1, 16, 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            sample_fixed_entropy_state((16.0f64).ln(), 16, 0),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn conjectured_minima_follow_the_thermal_bookkeeping() {
        let s0 = g_function(1.0);
        let att = ChannelSpec::attenuator(0.6, 0.8);
        assert_abs_diff_eq!(
            conjectured_minimum(&att, s0).unwrap(),
            g_function(0.6 + 0.4 * 0.8),
            epsilon = 1e-12
        );
        let amp = ChannelSpec::amplifier(1.5, 0.2);
        assert_abs_diff_eq!(
            conjectured_minimum(&amp, s0).unwrap(),
            g_function(1.5 + 0.5 * 1.2),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conjectured_minimum(&ChannelSpec::a1(0.7), 2.0).unwrap(),
            g_function(0.7),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conjectured_minimum(&ChannelSpec::a2(0.4), s0).unwrap(),
            g_function(0.4),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conjectured_minimum(&ChannelSpec::b1(), s0).unwrap(),
            s0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            conjectured_minimum(&ChannelSpec::b2(0.8), s0).unwrap(),
            g_function(1.8),
            epsilon = 1e-12
        );
    }

    #[test]
    fn gibbs_candidate_attains_the_bound_for_isotropic_classes() {
        let cases = [
            ChannelSpec::attenuator(0.55, 0.7),
            ChannelSpec::amplifier(1.35, 0.4),
            ChannelSpec::class_d(0.8, 0.6),
            ChannelSpec::b2(0.5),
        ];
        for &n0 in &[0.5, 1.0, 2.0] {
            let d = if n0 > 1.5 { 48 } else { 32 };
            let rho0 = gibbs_state(d, n0).unwrap();
            for ch in &cases {
                let superop = ChannelSuperop::build(ch, 96, None).unwrap();
                let s_out = superop.apply(&rho0).unwrap().von_neumann_entropy().unwrap();
                let want = conjectured_minimum(ch, g_function(n0)).unwrap();
                assert!(
                    (s_out - want).abs() < 1e-5,
                    "{}: |{s_out} - {want}| at N0={n0}",
                    ch.class
                );
            }
        }
    }

    #[test]
    fn identity_residual_vanishes_where_it_should_and_flags_the_control() {
        // the cutoff sits in the window where the thermal reference clears
        // the support floor and its tail deficit stays below the tolerance
        let ch = ChannelSpec::attenuator(0.7, 1.0);
        let n0 = 1.0;
        // the truncated thermal reference misses g(n0) by its tail deficit,
        // which caps how exactly the identity can close at this cutoff
        let rho0 = gibbs_state(24, n0).unwrap();
        assert!(equiv_identity_residual(&ch, &rho0, n0).unwrap() < 1e-5);

        let s0 = g_function(n0);
        let rho = sample_fixed_entropy_state(s0, 24, 42).unwrap();
        let r = equiv_identity_residual(&ch, &rho, n0).unwrap();
        assert!(r < 1e-5, "on-shell residual {r:.3e}");

        let shifted = sample_fixed_entropy_state(s0 + 0.1, 24, 42).unwrap();
        assert!(equiv_identity_residual(&ch, &shifted, n0).unwrap() > 1e-2);
    }

    #[test]
    fn relative_entropy_slack_stays_nonnegative_on_the_proved_case() {
        let ch = ChannelSpec::attenuator(0.5, 1.0);
        let s0 = g_function(1.0);
        for seed in 0..10u64 {
            let rho = sample_fixed_entropy_state(s0, 24, 900 + seed).unwrap();
            let report = dds_inequality_check(&ch, &rho, 1.0).unwrap();
            assert!(report.slack >= -1e-5, "slack {}", report.slack);
            assert!(
                report.monotonicity_slack >= -1e-6,
                "monotonicity {}",
                report.monotonicity_slack
            );
        }
        let rho0 = gibbs_state(24, 1.0).unwrap();
        let at_fixed_point = dds_inequality_check(&ch, &rho0, 1.0).unwrap();
        assert!(at_fixed_point.slack.abs() < 1e-6);
    }

    #[test]
    fn sufficient_condition_margin_is_negative_on_a_grid() {
        for &eta in &[0.1, 0.3, 0.5, 0.7, 0.9] {
            for &n in &[0.2, 1.0, 3.0] {
                for &n0 in &[0.3, 1.0, 2.5] {
                    let m =
                        sufficient_condition_margin(&ChannelSpec::attenuator(eta, n), n0).unwrap();
                    assert!(m < 0.0, "attenuator margin {m} at ({eta},{n},{n0})");
                }
            }
        }
        for &k2 in &[1.1, 2.0, 5.0] {
            for &n0 in &[0.3, 1.0, 2.5] {
                let m = sufficient_condition_margin(&ChannelSpec::amplifier(k2, 0.5), n0).unwrap();
                assert!(m < 0.0, "amplifier margin {m} at ({k2},{n0})");
            }
        }
        for &t in &[0.2, 1.0] {
            for &n0 in &[0.3, 1.0, 2.5] {
                let m = sufficient_condition_margin(&ChannelSpec::b2(t), n0).unwrap();
                assert!(m < 0.0, "noise margin {m} at ({t},{n0})");
            }
        }
    }

    #[test]
    fn scans_count_violations_and_append_squeezed_probes() {
        let s0 = g_function(1.0);
        let att = ChannelSpec::attenuator(0.5, 1.0);
        let scan = conjecture_v2_scan(&att, s0, 16, 6, 77).unwrap();
        assert_eq!(scan.rows.len(), 6);
        assert_eq!(scan.report.violations, 0);
        assert_eq!(scan.report.n_samples, 6);
        let min_row = scan
            .rows
            .iter()
            .map(|r| r.output_entropy)
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(scan.report.best_found, min_row);
        assert_abs_diff_eq!(
            scan.report.gap,
            scan.report.best_found - scan.report.conjectured_min
        );

        let a2 = ChannelSpec::a2(0.6);
        let scan = conjecture_v2_scan(&a2, s0, 24, 3, 78).unwrap();
        assert!(scan.rows.len() > 3, "no squeezed probes were appended");
        for row in &scan.rows {
            assert!(row.output_entropy >= g_function(0.6) - 1e-5);
        }
        assert_eq!(scan.report.violations, 0);

        let b1 = ChannelSpec::b1();
        let scan = conjecture_v2_scan(&b1, s0, 24, 3, 79).unwrap();
        assert!(scan.rows.len() > 3);
        for row in &scan.rows {
            assert!(row.output_entropy >= s0 - 1e-5);
        }

        let empty = conjecture_v2_scan(&att, s0, 16, 0, 1).unwrap();
        assert!(empty.rows.is_empty());
        assert_eq!(empty.report.violations, 0);
    }

    #[test]
    fn minimizer_recovers_the_thermal_candidate_deterministically() {
        let ch = ChannelSpec::attenuator(0.5, 1.0);
        let s0 = g_function(1.0);
        let cfg = OptimizerConfig {
            restarts: 3,
            iterations: 8,
            step: 1e-5,
            seed: 13,
        };
        let report = minimize_output_entropy(&ch, s0, 20, &cfg).unwrap();
        let conjectured = conjectured_minimum(&ch, s0).unwrap();
        assert_eq!(report.n_restarts, 3);
        assert_eq!(report.violations, 0);
        assert!(report.gap >= -VIOLATION_TOL, "gap {}", report.gap);
        assert!(report.gap < 0.15, "gap {}", report.gap);
        assert!(report.best_state_diagnostics.entropy_residual < 1e-6);
        assert_abs_diff_eq!(report.conjectured_min, conjectured);
        assert_abs_diff_eq!(report.n0, g_inverse(s0).unwrap(), epsilon = 1e-12);

        let again = minimize_output_entropy(&ch, s0, 20, &cfg).unwrap();
        assert_eq!(report.best_found.to_bits(), again.best_found.to_bits());
        assert_eq!(report.n_samples, again.n_samples);
    }

    #[test]
    fn constant_channel_minimizes_trivially() {
        let ch = ChannelSpec::a1(0.7);
        let cfg = OptimizerConfig {
            restarts: 2,
            iterations: 2,
            step: 1e-5,
            seed: 2,
        };
        let report = minimize_output_entropy(&ch, 1.0, 12, &cfg).unwrap();
        // residual is the truncated-thermal entropy deficit at the output cutoff
        assert!(
            (report.best_found - g_function(0.7)).abs() < 1e-7,
            "constant objective drifted: {}",
            report.best_found
        );
    }

    #[test]
    fn report_serializes_with_shell_labels() {
        let ch = ChannelSpec::attenuator(0.5, 1.0);
        let scan = conjecture_v2_scan(&ch, 1.0, 12, 2, 3).unwrap();
        let js = serde_json::to_string(&scan.report).unwrap();
        assert!(js.contains("\"S0\""));
        assert!(js.contains("\"N0\""));
        assert!(js.contains("\"conjectured_min\""));
        let back: OptimizationReport = serde_json::from_str(&js).unwrap();
        assert_eq!(back.cutoff, 12);
    }
}
