//! Total-power minimization under per-user SINR targets: block descent over
//! the precoder (SOCP), the phases (ADMM with convexified SINR constraints)
//! and the amplification factors (SOCP).

use crate::error::{Error, Result};
use crate::fp::amplifier_terms;
use crate::linalg::{project_unit_modulus, RVector};
use crate::model::{
    bs_power, build_reflection_operator, composite_channels, ris_noise_at_user, ris_power, ChannelSet, LinkBudget,
    Precoder, RisState, SystemDims, SystemParams,
};
use crate::solver::{solve_a_socp_min, solve_box_qcqp_min, solve_socp_power, SolverOptions, Status};
use crate::sumrate::{initial_theta, mmse_precoder, AdmmState, Block, InnerRecord, ThetaStep};
use crate::surrogate::build_pm_constraint_data;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmOptions {
    /// Relative total-power change that ends the outer loop.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub rho: f64,
    /// Accepted relative SINR shortfall, `γ_k ≥ Γ_k(1 − sinr_tol)`.
    pub sinr_tol: f64,
    pub reset_admm: bool,
    pub solver: SolverOptions,
}

impl Default for PmOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-4,
            max_outer: 30,
            inner_tol: 1e-3,
            max_inner: 100,
            rho: 1.0,
            sinr_tol: 1e-3,
            reset_admm: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Total power (W) around one block update.
#[derive(Clone, Debug, PartialEq)]
pub struct PmStep {
    pub block: Block,
    pub power_before: f64,
    pub power_after: f64,
    pub status: Status,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmOuterRecord {
    pub steps: Vec<PmStep>,
    /// `P_b + P_r` after the sweep.
    pub total_power: f64,
    pub bs_power: f64,
    pub ris_power: f64,
    /// `min_k γ_k/Γ_k − 1`
    pub min_sinr_slack: f64,
    pub inner: Vec<InnerRecord>,
    pub inner_converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PmRunTrace {
    pub initial_power: f64,
    pub outer: Vec<PmOuterRecord>,
    pub converged: bool,
}

impl PmRunTrace {
    pub fn final_power(&self) -> f64 {
        self.outer.last().map_or(self.initial_power, |o| o.total_power)
    }
}

/// `P_b + P_r` including the static terms.
pub fn total_power(
    ch: &ChannelSet,
    st: &RisState,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> Result<f64> {
    let op = build_reflection_operator(st, dims)?;
    Ok(bs_power(pre, params) + ris_power(ch, &op, pre, params, dims))
}

/// `min_k γ_k/Γ_k − 1`
pub fn min_sinr_slack(
    ch: &ChannelSet,
    st: &RisState,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> Result<f64> {
    let op = build_reflection_operator(st, dims)?;
    let lb = LinkBudget::new(ch, &op, pre, params);
    Ok(lb
        .sinrs()
        .iter()
        .zip(&params.gamma)
        .map(|(s, g)| s / g - 1.0)
        .fold(f64::INFINITY, f64::min))
}

fn check_targets(params: &SystemParams, dims: &SystemDims) -> Result<()> {
    if params.gamma.len() != dims.k || params.gamma.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::InvalidParam {
            name: "Gamma".into(),
            reason: "need one positive SINR target per user".into(),
        });
    }
    Ok(())
}

/// Phases as in the sum-rate initialization and regularized-inverse
/// directions scaled by the smallest common factor that meets every target.
/// Uniform amplification levels `a = 0`, `1`, `√10`, … `10⁴` are tried and
/// the cheapest start is kept: block descent only trades `w` against `a`
/// locally and cannot move the amplifiers far from where they start.
pub fn initialize_power_min(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<(RisState, Precoder)> {
    check_targets(params, dims)?;
    let theta = initial_theta(ch, opts);
    let mut best: Option<(f64, RisState, Precoder)> = None;
    let mut last_err = None;
    let levels = std::iter::once(0.0).chain((0..=8).map(|i| 10f64.powf(0.5 * i as f64)));
    for a0 in levels {
        let st = RisState::new(theta.clone(), RVector::from_element(dims.l, a0));
        match feasible_precoder(ch, &st, dims, params, opts) {
            Ok(pre) => {
                let p = total_power(ch, &st, &pre, params, dims)?;
                if best.as_ref().is_none_or(|b| p < b.0) {
                    best = Some((p, st, pre));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, st, pre)) => Ok((st, pre)),
        None => Err(last_err.unwrap_or_else(|| Error::Infeasible("no feasible start".into()))),
    }
}

fn feasible_precoder(
    ch: &ChannelSet,
    st: &RisState,
    dims: &SystemDims,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<Precoder> {
    let op = build_reflection_operator(st, dims)?;
    let h = composite_channels(ch, &op);
    let noise: Vec<f64> = (0..dims.k)
        .map(|k| ris_noise_at_user(k, ch, &op, params.sigma_z_sq) + params.sigma_sq[k])
        .collect();
    // unit total power directions; γ_k(s) = s²S_k / (s²I_k + σ̃_k²)
    let dirs = mmse_precoder(&h, &noise, 1.0);
    let mut s2: f64 = 0.0;
    let mut scalable = true;
    for k in 0..dims.k {
        let sig = h[k].dotc(&dirs.w[k]).norm_sqr();
        let interf: f64 = (0..dims.k)
            .filter(|&i| i != k)
            .map(|i| h[k].dotc(&dirs.w[i]).norm_sqr())
            .sum();
        let margin = sig - params.gamma[k] * interf;
        if margin <= 0.0 {
            scalable = false;
            break;
        }
        s2 = s2.max(params.gamma[k] * noise[k] / margin);
    }
    if scalable && s2.is_finite() {
        let pre = dirs.scaled((s2 * (1.0 + 1e-9)).sqrt());
        if min_sinr_slack(ch, st, &pre, params, dims)? >= 0.0 {
            return Ok(pre);
        }
    }
    let (pre, rep) = solve_socp_power(ch, &op, params, None, opts)?;
    if rep.status == Status::Infeasible || min_sinr_slack(ch, st, &pre, params, dims)? < 0.0 {
        return Err(Error::Infeasible(
            "SINR targets unreachable from the initial phases".into(),
        ));
    }
    Ok(pre)
}

/// ADMM over `θ` minimizing the reflected power subject to convexified SINR
/// constraints, re-expanded at every inner iterate. A surrogate-infeasible
/// subproblem ends the loop with status `Infeasible`; the caller keeps the
/// incumbent then.
#[allow(clippy::too_many_arguments)]
pub fn pm_admm_theta_loop(
    st: &RisState,
    ch: &ChannelSet,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
    admm: &mut AdmmState,
    opts: &PmOptions,
) -> ThetaStep {
    let mut inner = Vec::new();
    if st.a.iter().all(|&a| a == 0.0) {
        return ThetaStep {
            theta: st.theta.clone(),
            inner,
            converged: true,
            status: Status::Optimal,
        };
    }
    let data = build_pm_constraint_data(ch, pre, &st.a, params, dims);
    let mut theta = st.theta.clone();
    let mut status = Status::Optimal;
    let mut converged = false;
    for _ in 0..opts.max_inner {
        let qp = data.theta_qp(data.surrogates(&theta), &admm.vartheta, &admm.omega, admm.rho);
        match solve_box_qcqp_min(&qp, None, &opts.solver) {
            Ok((t, r)) if r.status != Status::Infeasible => {
                if r.status != Status::Optimal {
                    status = r.status;
                }
                theta = t;
            }
            _ => {
                status = Status::Infeasible;
                break;
            }
        }
        admm.update_vartheta(&theta);
        admm.update_omega(&theta);
        let res = admm.primal_residual(&theta);
        inner.push(InnerRecord {
            al_objective: data.q2.quad_form(&theta).re + admm.penalty(&theta),
            primal_residual: res,
        });
        if res <= opts.inner_tol {
            converged = true;
            break;
        }
    }
    ThetaStep {
        theta: project_unit_modulus(&theta),
        inner,
        converged,
        status,
    }
}

struct Guard<'a> {
    ch: &'a ChannelSet,
    params: &'a SystemParams,
    dims: &'a SystemDims,
    sinr_tol: f64,
}

impl Guard<'_> {
    /// Power of the candidate when it meets every target and does not raise
    /// the power above `incumbent`.
    fn admit(&self, st: &RisState, pre: &Precoder, incumbent: f64) -> Result<Option<f64>> {
        let p = total_power(self.ch, st, pre, self.params, self.dims)?;
        let ok = p.is_finite()
            && p <= incumbent
            && min_sinr_slack(self.ch, st, pre, self.params, self.dims)? >= -self.sinr_tol;
        Ok(ok.then_some(p))
    }
}

/// Runs the full algorithm from [`initialize_power_min`]. Every block update
/// is kept only when all SINR targets still hold and the total power does
/// not grow.
pub fn run_power_min(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    opts: &PmOptions,
) -> Result<(Precoder, RisState, PmRunTrace)> {
    ch.check(dims)?;
    params.validate(dims)?;
    let (st, pre) = initialize_power_min(ch, dims, params, &opts.solver)?;
    run_power_min_from(ch, dims, params, st, pre, opts)
}

/// Same as [`run_power_min`] from a given feasible start.
pub fn run_power_min_from(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    mut st: RisState,
    mut pre: Precoder,
    opts: &PmOptions,
) -> Result<(Precoder, RisState, PmRunTrace)> {
    check_targets(params, dims)?;
    let guard = Guard {
        ch,
        params,
        dims,
        sinr_tol: opts.sinr_tol,
    };
    let mut power = total_power(ch, &st, &pre, params, dims)?;
    let mut trace = PmRunTrace {
        initial_power: power,
        ..Default::default()
    };
    let mut admm = AdmmState::new(&st.theta, opts.rho);
    for _ in 0..opts.max_outer {
        let start_power = power;
        let mut steps = Vec::with_capacity(3);
        let mut record = |block, before: f64, after: Option<f64>, status| {
            steps.push(PmStep {
                block,
                power_before: before,
                power_after: after.unwrap_or(before),
                status,
                accepted: after.is_some(),
            });
        };

        // precoder
        let op = build_reflection_operator(&st, dims)?;
        let (cand, rep) = solve_socp_power(ch, &op, params, Some(&pre), &opts.solver)?;
        let admitted = if rep.status == Status::Infeasible {
            None
        } else {
            guard.admit(&st, &cand, power)?
        };
        record(Block::W, power, admitted, rep.status);
        if let Some(p) = admitted {
            pre = cand;
            power = p;
        }

        // phases
        if opts.reset_admm {
            admm = AdmmState::new(&st.theta, opts.rho);
        }
        let step = pm_admm_theta_loop(&st, ch, &pre, params, dims, &mut admm, opts);
        let cand = RisState::new(step.theta, st.a.clone());
        let admitted = if step.status == Status::Infeasible {
            None
        } else {
            guard.admit(&cand, &pre, power)?
        };
        record(Block::Theta, power, admitted, step.status);
        if let Some(p) = admitted {
            st = cand;
            power = p;
        }
        let inner = step.inner;
        let inner_converged = step.converged;

        // amplification
        let terms = amplifier_terms(ch, &st.theta, &pre, params, dims);
        let (a_new, rep) = solve_a_socp_min(&terms, &st.a, &opts.solver)?;
        let cand = RisState::new(st.theta.clone(), a_new);
        let admitted = if rep.status == Status::Infeasible {
            None
        } else {
            guard.admit(&cand, &pre, power)?
        };
        record(Block::A, power, admitted, rep.status);
        if let Some(p) = admitted {
            st = cand;
            power = p;
        }

        let op = build_reflection_operator(&st, dims)?;
        trace.outer.push(PmOuterRecord {
            steps,
            total_power: power,
            bs_power: bs_power(&pre, params),
            ris_power: ris_power(ch, &op, &pre, params, dims),
            min_sinr_slack: min_sinr_slack(ch, &st, &pre, params, dims)?,
            inner,
            inner_converged,
        });
        if (start_power - power).abs() <= opts.outer_tol * power.abs().max(1e-300) {
            trace.converged = true;
            break;
        }
    }
    Ok((pre, st, trace))
}

/// Per-user SINRs of a solution, for reporting.
pub fn achieved_sinrs(
    ch: &ChannelSet,
    st: &RisState,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> Result<Vec<f64>> {
    let op = build_reflection_operator(st, dims)?;
    Ok(LinkBudget::new(ch, &op, pre, params).sinrs())
}
