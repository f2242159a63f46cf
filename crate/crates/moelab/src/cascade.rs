//! Beam-splitter cascades realizing the 1/k attenuator.
//!
//! A signal mode is mixed with k-1 thermal environments through a chain of
//! beam splitters with transmissivities eta_j = (k-j)/(k-j+1). Every output
//! port of the chain then sees the input through an effective transmissivity
//! of exactly 1/k, so subadditivity of the joint output entropy pins the
//! single-channel output entropy from below:
//!
//!   k g(N0) = S(joint) <= sum_j S(port_j) = k S(E_{1/k}(rho)).
//!
//! The module builds the chain, reduces every port, and reports the slack in
//! that chain of inequalities alongside a direct single-channel computation
//! of the same output.

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelSpec, ChannelSuperop};
use crate::error::{Error, Result};
use crate::fock::{g_function, DensityOperator};
use crate::multimode::{MultiModeState, TwoModeGate};
use crate::numeric::{bisect, trace_distance};
use crate::optimizer::sample_fixed_entropy_state;

/// Largest joint Hilbert-space dimension a cascade run may allocate.
pub const JOINT_DIM_LIMIT: usize = 1600;

/// How closely the input entropy must match g(N0).
pub const ENTROPY_MATCH_TOL: f64 = 1e-4;

/// Residual allowed when matching the environment entropy to g(N0).
const MATCH_RESIDUAL_TOL: f64 = 1e-10;

const BISECT_ITERS: usize = 200;

/// Everything one cascade run produces.
///
/// `reduced_entropies` is ordered like `eta_bar_list`: the k-1 environment
/// ports first, the through port last. With the canonical transmissivities
/// every entry of `eta_bar_list` equals 1/k.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeReport {
    pub k: usize,
    pub eta_list: Vec<f64>,
    pub eta_bar_list: Vec<f64>,
    pub joint_entropy: f64,
    pub reduced_entropies: Vec<f64>,
    pub direct_channel_entropy: f64,
    pub subadditivity_slack: f64,
}

/// Per-port agreement between the cascade and the single-channel route.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteComparison {
    pub a_reduction_distance: f64,
    pub env_entropy_gaps: Vec<f64>,
}

/// Transmissivities eta_j = (k-j)/(k-j+1) for j = 1..k-1.
///
/// Telescoping makes every effective transmissivity equal 1/k.
pub fn canonical_etas(k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Domain(format!(
            "a cascade needs at least two ports, got k = {k}"
        )));
    }
    Ok((1..k)
        .map(|j| (k - j) as f64 / (k - j + 1) as f64)
        .collect())
}

/// Effective transmissivities seen by each port of the chain.
///
/// Environment port j catches (1 - eta_j) of what survived the first j-1
/// splitters; the through port keeps the full product.
pub fn effective_transmissivities(etas: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(etas.len() + 1);
    let mut passed = 1.0;
    for &eta in etas {
        out.push((1.0 - eta) * passed);
        passed *= eta;
    }
    out.push(passed);
    out
}

/// Entropy of the normalized geometric ladder p_n ~ x^n on d levels.
fn ladder_entropy(d: usize, x: f64) -> f64 {
    let norm = (1.0 - x) / (1.0 - x.powi(d as i32));
    let mean: f64 = (0..d)
        .map(|n| n as f64 * norm * x.powi(n as i32))
        .sum::<f64>();
    -norm.ln() - mean * x.ln()
}

/// Diagonal geometric state on d levels whose entropy equals g(n0) exactly.
///
/// Clipping the infinite thermal ladder loses entropy, which would bias the
/// joint bookkeeping at small cutoffs; nudging the ratio upward restores the
/// target entropy while keeping the profile geometric.
pub fn entropy_matched_environment(d: usize, n0: f64) -> Result<DensityOperator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n0 <= 0.0 {
        return Err(Error::Domain(format!(
            "environment mean must be positive, got {n0}"
        )));
    }
    let target = g_function(n0);
    if target >= (d as f64).ln() - 1e-6 {
        return Err(Error::Domain(format!(
            "cutoff {d} cannot carry entropy {target:.6}"
        )));
    }
    let x_thermal = n0 / (n0 + 1.0);
    let f = |x: f64| ladder_entropy(d, x) - target;
    // ladder entropy grows with the ratio; the clipped thermal ratio sits at
    // or below the target, so the root lies in [x_thermal, 1)
    let x = if f(x_thermal) >= 0.0 {
        x_thermal
    } else {
        bisect(f, x_thermal, 1.0 - 1e-12, BISECT_ITERS)?
    };
    if f(x).abs() > MATCH_RESIDUAL_TOL {
        return Err(Error::Constraint(format!(
            "environment entropy matching stalled at residual {:.3e}",
            f(x)
        )));
    }
    let p: Vec<f64> = (0..d).map(|n| x.powi(n as i32)).collect();
    DensityOperator::from_populations(&p)
}

/// Fixed-entropy probe supported on the lowest `d_bulk` levels of a
/// `d`-dimensional mode.
///
/// Zero-padding leaves the spectrum, and hence the entropy, untouched while
/// the headroom keeps the chain's photon sectors complete: a probe occupying
/// every level would scatter weight past any cutoff the chain can afford.
pub fn probe_state(s0: f64, d_bulk: usize, d: usize, seed: u64) -> Result<DensityOperator> {
    if d_bulk > d {
        return Err(Error::Shape(format!(
            "bulk dimension {d_bulk} exceeds the mode dimension {d}"
        )));
    }
    sample_fixed_entropy_state(s0, d_bulk, seed)?.embed(d)
}

struct CascadeState {
    joint: MultiModeState,
    etas: Vec<f64>,
}

fn build_cascade(
    rho: &DensityOperator,
    k: usize,
    n0: f64,
    d_per_mode: usize,
) -> Result<CascadeState> {
    let etas = canonical_etas(k)?;
    if rho.dim() != d_per_mode {
        return Err(Error::Shape(format!(
            "input has dimension {}, cascade modes have {d_per_mode}",
            rho.dim()
        )));
    }
    let joint_dim = d_per_mode
        .checked_pow(k as u32)
        .ok_or(Error::InvalidDimension(d_per_mode))?;
    if joint_dim > JOINT_DIM_LIMIT {
        return Err(Error::Resource(format!(
            "joint dimension {joint_dim} exceeds the budget of {JOINT_DIM_LIMIT}; \
             lower the cutoff or the number of ports"
        )));
    }
    let target = g_function(n0);
    let s_in = rho.von_neumann_entropy()?;
    if (s_in - target).abs() > ENTROPY_MATCH_TOL {
        return Err(Error::Constraint(format!(
            "input entropy {s_in:.6} does not match g({n0}) = {target:.6} \
             within {ENTROPY_MATCH_TOL:.0e}"
        )));
    }
    let env = entropy_matched_environment(d_per_mode, n0)?;
    let mut parts: Vec<&DensityOperator> = vec![rho];
    parts.resize(k, &env);
    let mut joint = MultiModeState::tensor(&parts)?;
    for (j, &eta) in etas.iter().enumerate() {
        let gate = TwoModeGate::beam_splitter(eta, d_per_mode, d_per_mode)?;
        joint.apply_two_mode_gate(&gate, 0, j + 1)?;
    }
    Ok(CascadeState { joint, etas })
}

/// Single-channel reference: the attenuator superoperator at an output
/// cutoff generous enough that its own clipped sectors are negligible.
fn direct_output(rho: &DensityOperator, k: usize, n0: f64) -> Result<DensityOperator> {
    let spec = ChannelSpec::attenuator(1.0 / k as f64, n0);
    let x = n0 / (n0 + 1.0);
    // clipped-sector weight of the reference decays like x^headroom
    let headroom = (18.5 / -x.ln()).ceil() as usize + 8;
    let superop = ChannelSuperop::build(&spec, rho.dim() + headroom, None)?;
    superop.apply(rho)
}

/// Mix `rho` with k-1 entropy-matched environments and account for every
/// output port.
///
/// The input must carry entropy g(N0) within [`ENTROPY_MATCH_TOL`]; the run
/// refuses joint dimensions above [`JOINT_DIM_LIMIT`].
pub fn run_cascade(
    rho: &DensityOperator,
    k: usize,
    n0: f64,
    d_per_mode: usize,
) -> Result<CascadeReport> {
    let state = build_cascade(rho, k, n0, d_per_mode)?;
    let joint_entropy = state.joint.entropy()?;
    let mut reduced = Vec::with_capacity(k);
    for mode in 1..k {
        reduced.push(state.joint.reduce_to_mode(mode)?.von_neumann_entropy()?);
    }
    reduced.push(state.joint.reduce_to_mode(0)?.von_neumann_entropy()?);
    let subadditivity_slack = reduced.iter().sum::<f64>() - joint_entropy;
    let direct_channel_entropy = direct_output(rho, k, n0)?.von_neumann_entropy()?;
    let eta_bar_list = effective_transmissivities(&state.etas);
    Ok(CascadeReport {
        k,
        eta_list: state.etas,
        eta_bar_list,
        joint_entropy,
        reduced_entropies: reduced,
        direct_channel_entropy,
        subadditivity_slack,
    })
}

/// Compare the cascade's ports against the direct single-channel route: the
/// trace distance of the through port and, per environment port, the entropy
/// gap to the direct output.
pub fn reduced_vs_direct(
    rho: &DensityOperator,
    k: usize,
    n0: f64,
    d_per_mode: usize,
) -> Result<RouteComparison> {
    let state = build_cascade(rho, k, n0, d_per_mode)?;
    let direct = direct_output(rho, k, n0)?;
    let s_direct = direct.von_neumann_entropy()?;
    // the pad is exact, so the distance includes the chain's missing tail
    let a_red = state.joint.reduce_to_mode(0)?.embed(direct.dim())?;
    let a_reduction_distance = trace_distance(a_red.matrix(), direct.matrix())?;
    let mut env_entropy_gaps = Vec::with_capacity(k - 1);
    for mode in 1..k {
        let s = state.joint.reduce_to_mode(mode)?.von_neumann_entropy()?;
        env_entropy_gaps.push((s - s_direct).abs());
    }
    Ok(RouteComparison {
        a_reduction_distance,
        env_entropy_gaps,
    })
}
