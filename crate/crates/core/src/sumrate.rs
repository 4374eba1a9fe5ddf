//! Sum-rate maximization: fractional-programming block coordinate ascent over
//! `μ`, `η`, `w`, `θ` (ADMM with majorized subproblems) and `a`.

use std::f64::consts::LN_2;

use crate::error::Result;
use crate::fp::{
    amplifier_terms, assemble_a_problem, assemble_w_problem, f1_bits, f2_bits, f2_nats, update_eta, update_mu, FpAux,
};
use crate::linalg::{cis, project_unit_modulus, CMatrix, CVector, RVector, C64};
use crate::model::{
    build_reflection_operator, composite_channels, ris_dynamic_power, ris_noise_at_user, ChannelSet, LinkBudget,
    Precoder, RisState, SystemDims, SystemParams,
};
use crate::solver::quad_max::solve_quad_max_from;
use crate::solver::{rcg_unit_modulus, solve_box_qcqp_min, SolverOptions, Status};
use crate::surrogate::{build_theta_problem_data, build_theta_qp, MmIterate};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumRateOptions {
    /// Relative sum-rate change that ends the outer loop.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// `‖θ − ϑ‖∞` that ends the ADMM loop.
    pub inner_tol: f64,
    pub max_inner: usize,
    pub rho: f64,
    /// Restart `ϑ = θ`, `ω = 0` at every outer iteration instead of carrying
    /// the ADMM state over.
    pub reset_admm: bool,
    pub solver: SolverOptions,
}

impl Default for SumRateOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-4,
            max_outer: 30,
            inner_tol: 1e-3,
            max_inner: 100,
            rho: 1.0,
            reset_admm: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Unit-modulus shadow `ϑ`, scaled dual `ω` and penalty `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub vartheta: CVector,
    pub omega: CVector,
    pub rho: f64,
}

impl AdmmState {
    pub fn new(theta: &CVector, rho: f64) -> Self {
        Self {
            vartheta: project_unit_modulus(theta),
            omega: CVector::zeros(theta.len()),
            rho,
        }
    }

    /// `ϑ = e^{j∠(ρθ + ω)}`
    pub fn update_vartheta(&mut self, theta: &CVector) {
        let r = C64::new(self.rho, 0.0);
        self.vartheta = project_unit_modulus(&(theta * r + &self.omega));
    }

    /// `ω ← ω + ρ(θ − ϑ)`
    pub fn update_omega(&mut self, theta: &CVector) {
        self.omega += (theta - &self.vartheta) * C64::new(self.rho, 0.0);
    }

    pub fn primal_residual(&self, theta: &CVector) -> f64 {
        (theta - &self.vartheta).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `(ρ/2)‖θ − ϑ + ω/ρ‖²`
    pub fn penalty(&self, theta: &CVector) -> f64 {
        0.5 * self.rho * (theta - &self.vartheta + &self.omega / C64::new(self.rho, 0.0)).norm_squared()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerRecord {
    /// Augmented-Lagrangian objective `−f2 + penalty` up to a constant (nats).
    pub al_objective: f64,
    pub primal_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Mu,
    Eta,
    W,
    Theta,
    A,
}

/// `f2` (bits) around one block update. `accepted` is false when the update
/// was discarded and the previous value kept.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStep {
    pub block: Block,
    pub f2_before: f64,
    pub f2_after: f64,
    pub status: Option<Status>,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OuterRecord {
    pub steps: Vec<BlockStep>,
    /// Sum rate after the sweep (bits/s/Hz).
    pub sum_rate: f64,
    /// `f2` at the end of the sweep with the auxiliaries used in it.
    pub f2: f64,
    /// `Σ‖w_k‖² / P_BS − 1`
    pub bs_residual: f64,
    /// RIS dynamic power over `P_RIS`, minus one; zero when the RIS is off.
    pub ris_residual: f64,
    pub inner: Vec<InnerRecord>,
    pub inner_converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub initial_sum_rate: f64,
    pub outer: Vec<OuterRecord>,
    pub converged: bool,
    /// Static RIS draw exceeds its budget, so the surface stays off.
    pub ris_off: bool,
}

impl RunTrace {
    pub fn final_sum_rate(&self) -> f64 {
        self.outer.last().map_or(self.initial_sum_rate, |o| o.sum_rate)
    }
}

/// Phase initialization: maximize the channel power gain with `Ψ = diag(ψ)`
/// on the unit-modulus torus, then halve the phases.
pub fn initial_theta(ch: &ChannelSet, opts: &SolverOptions) -> CVector {
    let m = ch.g.nrows();
    let n = ch.g.ncols();
    let mut mm = CMatrix::zeros(m, m);
    let mut lin = CVector::zeros(m);
    for (h_r, h_d) in ch.h_r.iter().zip(&ch.h_d) {
        // R̆_k = diag(h_r,k*) G
        let r = CMatrix::from_fn(m, n, |i, j| h_r[i].conj() * ch.g[(i, j)]);
        mm += &r * r.adjoint();
        lin += &r * h_d * C64::new(2.0, 0.0);
    }
    let start = project_unit_modulus(&lin);
    let (psi_breve, _) = rcg_unit_modulus(&mm, &lin, &start, opts);
    psi_breve.map(|z| cis(-z.arg() / 2.0))
}

/// Regularized-inverse precoder normalized to `Σ‖w_k‖² = P_BS`, split evenly.
pub fn mmse_precoder(h: &[CVector], noise: &[f64], p_bs: f64) -> Precoder {
    let k = h.len();
    let n = h[0].len();
    let mut gram = CMatrix::zeros(n, n);
    for hk in h {
        gram += hk * hk.adjoint();
    }
    let w = (0..k)
        .map(|i| {
            let mut a = gram.clone();
            for d in 0..n {
                a[(d, d)] += C64::new(noise[i], 0.0);
            }
            let v = a.lu().solve(&h[i]).unwrap_or_else(|| h[i].clone());
            let nv = v.norm();
            if nv > 0.0 {
                v * C64::new((p_bs / k as f64).sqrt() / nv, 0.0)
            } else {
                v
            }
        })
        .collect();
    Precoder { w }
}

/// Largest scale in `(0, 1]` for `a` that keeps the RIS power within budget.
fn fit_amplification(
    ch: &ChannelSet,
    st: &RisState,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> Result<RVector> {
    let budget = params.p_ris(dims);
    if budget <= 0.0 {
        return Ok(RVector::zeros(dims.l));
    }
    let op = build_reflection_operator(st, dims)?;
    let used = ris_dynamic_power(ch, &op, pre, params);
    if used <= budget {
        return Ok(st.a.clone());
    }
    Ok(scale_to_budget(&st.a, used, budget))
}

/// Dynamic power is homogeneous of degree two in `a`.
fn scale_to_budget(a: &RVector, used: f64, budget: f64) -> RVector {
    a * ((budget / used).sqrt() * (1.0 - 1e-12))
}

pub fn initialize(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    opts: &SolverOptions,
) -> Result<(RisState, Precoder)> {
    let theta = initial_theta(ch, opts);
    let a = if params.p_ris(dims) > 0.0 {
        RVector::from_element(dims.l, 1.0)
    } else {
        RVector::zeros(dims.l)
    };
    let mut st = RisState::new(theta, a);
    let op = build_reflection_operator(&st, dims)?;
    let h = composite_channels(ch, &op);
    let noise: Vec<f64> = (0..dims.k)
        .map(|k| ris_noise_at_user(k, ch, &op, params.sigma_z_sq) + params.sigma_sq[k])
        .collect();
    let pre = mmse_precoder(&h, &noise, params.p_bs);
    // unit gains barely register against the double-fading loss, so start
    // with the whole amplification budget spent evenly
    let budget = params.p_ris(dims);
    if budget > 0.0 {
        let used = ris_dynamic_power(ch, &op, &pre, params);
        if used > 0.0 {
            st.a = scale_to_budget(&st.a, used, budget);
        }
    }
    Ok((st, pre))
}

/// Outcome of one ADMM phase update.
#[derive(Clone, Debug)]
pub struct ThetaStep {
    /// Projected to unit modulus.
    pub theta: CVector,
    pub inner: Vec<InnerRecord>,
    pub converged: bool,
    pub status: Status,
}

/// ADMM over `θ` for fixed `w`, `a`, `μ`, `η`. Each iteration majorizes at
/// the current relaxed iterate and solves the convex subproblem.
#[allow(clippy::too_many_arguments)]
pub fn admm_theta_loop(
    st: &RisState,
    ch: &ChannelSet,
    pre: &Precoder,
    aux: &FpAux,
    params: &SystemParams,
    dims: &SystemDims,
    admm: &mut AdmmState,
    opts: &SumRateOptions,
) -> ThetaStep {
    let data = build_theta_problem_data(ch, pre, &st.a, aux, params, dims);
    let mut inner = Vec::new();
    if data.tau < 0.0 {
        return ThetaStep {
            theta: st.theta.clone(),
            inner,
            converged: false,
            status: Status::Infeasible,
        };
    }
    let mut theta = st.theta.clone();
    let mut status = Status::Optimal;
    let mut converged = false;
    for _ in 0..opts.max_inner {
        let mm = MmIterate::new(&data, &theta);
        let qp = build_theta_qp(&data, &mm, &admm.vartheta, &admm.omega, admm.rho);
        let next = match solve_box_qcqp_min(&qp, None, &opts.solver) {
            Ok((t, r)) if r.status != Status::Infeasible => {
                if r.status != Status::Optimal {
                    status = r.status;
                }
                t
            }
            Ok((_, r)) => {
                status = r.status;
                break;
            }
            Err(_) => {
                status = Status::Infeasible;
                break;
            }
        };
        theta = next;
        admm.update_vartheta(&theta);
        admm.update_omega(&theta);
        let res = admm.primal_residual(&theta);
        inner.push(InnerRecord {
            al_objective: data.objective(&theta) + admm.penalty(&theta),
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

struct Iterate<'a> {
    ch: &'a ChannelSet,
    params: &'a SystemParams,
    dims: &'a SystemDims,
    st: RisState,
    pre: Precoder,
}

impl Iterate<'_> {
    fn link(&self, st: &RisState, pre: &Precoder) -> LinkBudget {
        let op = build_reflection_operator(st, self.dims).expect("state dimensions are fixed");
        LinkBudget::new(self.ch, &op, pre, self.params)
    }

    fn f2(&self, st: &RisState, pre: &Precoder, aux: &FpAux) -> f64 {
        f2_nats(&self.link(st, pre), aux) / LN_2
    }

    fn ris_power(&self, st: &RisState, pre: &Precoder) -> f64 {
        let op = build_reflection_operator(st, self.dims).expect("state dimensions are fixed");
        ris_dynamic_power(self.ch, &op, pre, self.params)
    }
}

/// Runs the full algorithm from [`initialize`]. Every block update that
/// would lower `f2` (solver inaccuracy, or a projected ADMM phase that does
/// not pay off) is discarded, so the sum rate never decreases across outer
/// iterations.
pub fn run_sum_rate_max(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    opts: &SumRateOptions,
) -> Result<(Precoder, RisState, RunTrace)> {
    ch.check(dims)?;
    params.validate(dims)?;
    let (st, pre) = initialize(ch, dims, params, &opts.solver)?;
    run_sum_rate_from(ch, dims, params, st, pre, opts)
}

/// Same as [`run_sum_rate_max`] from a given feasible start.
pub fn run_sum_rate_from(
    ch: &ChannelSet,
    dims: &SystemDims,
    params: &SystemParams,
    st: RisState,
    pre: Precoder,
    opts: &SumRateOptions,
) -> Result<(Precoder, RisState, RunTrace)> {
    let ris_off = params.p_ris(dims) <= 0.0;
    let mut it = Iterate {
        ch,
        params,
        dims,
        st,
        pre,
    };
    if ris_off {
        it.st.a = RVector::zeros(dims.l);
    }
    let mut trace = RunTrace {
        initial_sum_rate: it.link(&it.st, &it.pre).sum_rate(),
        ris_off,
        ..Default::default()
    };
    let mut admm = AdmmState::new(&it.st.theta, opts.rho);
    let mut rate = trace.initial_sum_rate;
    let mut prev_aux = FpAux::zeros(dims.k);
    let slack = 1e-9;
    for _ in 0..opts.max_outer {
        let mut steps = Vec::with_capacity(5);
        let lb = it.link(&it.st, &it.pre);
        // μ maximizes f2 only jointly with η, so its step is measured on
        // f1 = max_η f2; the η step is then exact on f2 itself
        let mut aux = FpAux {
            mu: update_mu(&lb),
            eta: prev_aux.eta.clone(),
        };
        let f1_new = f1_bits(&lb, &aux.mu);
        steps.push(BlockStep {
            block: Block::Mu,
            f2_before: f1_bits(&lb, &prev_aux.mu),
            f2_after: f1_new,
            status: None,
            accepted: true,
        });
        let f2_stale = f2_bits(&lb, &aux);
        aux.eta = update_eta(&lb, &aux.mu);
        let f2_eta = f2_bits(&lb, &aux);
        steps.push(BlockStep {
            block: Block::Eta,
            f2_before: f2_stale,
            f2_after: f2_eta,
            status: None,
            accepted: true,
        });

        // precoder
        let op = build_reflection_operator(&it.st, dims)?;
        let mut wp = assemble_w_problem(ch, &op, &aux, params, dims);
        if ris_off {
            wp.constraints.truncate(1);
        }
        let (w_new, w_rep) = solve_quad_max_from(&wp, None, &opts.solver)?;
        let cand = Precoder::from_stacked(&w_new, dims.k);
        let f2_w = it.f2(&it.st, &cand, &aux);
        let feasible = w_rep.status != Status::Infeasible
            && cand.transmit_power() <= params.p_bs * (1.0 + 1e-6)
            && (ris_off || it.ris_power(&it.st, &cand) <= params.p_ris(dims) * (1.0 + 1e-6));
        let accept = feasible && f2_w >= f2_eta - slack;
        steps.push(BlockStep {
            block: Block::W,
            f2_before: f2_eta,
            f2_after: if accept { f2_w } else { f2_eta },
            status: Some(w_rep.status),
            accepted: accept,
        });
        if accept {
            it.pre = cand;
        }
        let mut f2_cur = steps.last().map(|s| s.f2_after).unwrap_or(f2_eta);

        // phases
        let mut inner = Vec::new();
        let mut inner_converged = true;
        if !ris_off {
            if opts.reset_admm {
                admm = AdmmState::new(&it.st.theta, opts.rho);
            }
            let step = admm_theta_loop(&it.st, ch, &it.pre, &aux, params, dims, &mut admm, opts);
            inner = step.inner;
            inner_converged = step.converged;
            let mut cand = RisState::new(step.theta, it.st.a.clone());
            // the projection can push the reflected power over budget
            cand.a = fit_amplification(ch, &cand, &it.pre, params, dims)?;
            let f2_t = it.f2(&cand, &it.pre, &aux);
            let accept = step.status != Status::Infeasible && f2_t >= f2_cur - slack;
            steps.push(BlockStep {
                block: Block::Theta,
                f2_before: f2_cur,
                f2_after: if accept { f2_t } else { f2_cur },
                status: Some(step.status),
                accepted: accept,
            });
            if accept {
                it.st = cand;
                f2_cur = f2_t;
            }

            // amplification
            let terms = amplifier_terms(ch, &it.st.theta, &it.pre, params, dims);
            let ap = assemble_a_problem(&terms, &aux, params, dims);
            let start = it.st.a.map(|v| C64::new(v, 0.0));
            let (a_new, a_rep) = solve_quad_max_from(&ap, Some(&start), &opts.solver)?;
            let cand = RisState::new(it.st.theta.clone(), a_new.map(|z| z.re.max(0.0)));
            let f2_a = it.f2(&cand, &it.pre, &aux);
            let feasible =
                a_rep.status != Status::Infeasible && it.ris_power(&cand, &it.pre) <= params.p_ris(dims) * (1.0 + 1e-6);
            let accept = feasible && f2_a >= f2_cur - slack;
            steps.push(BlockStep {
                block: Block::A,
                f2_before: f2_cur,
                f2_after: if accept { f2_a } else { f2_cur },
                status: Some(a_rep.status),
                accepted: accept,
            });
            if accept {
                it.st = cand;
                f2_cur = f2_a;
            }
        }

        prev_aux = aux;
        let new_rate = it.link(&it.st, &it.pre).sum_rate();
        let ris_residual = if ris_off {
            0.0
        } else {
            it.ris_power(&it.st, &it.pre) / params.p_ris(dims) - 1.0
        };
        trace.outer.push(OuterRecord {
            steps,
            sum_rate: new_rate,
            f2: f2_cur,
            bs_residual: it.pre.transmit_power() / params.p_bs - 1.0,
            ris_residual,
            inner,
            inner_converged,
        });
        let change = (new_rate - rate).abs() / rate.abs().max(1e-12);
        rate = new_rate;
        if change <= opts.outer_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((it.pre, it.st, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::tests::{rand_instance, rand_unit};
    use crate::model::{sum_rate, zero_operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vartheta_aligns_with_positive_reals() {
        let mut s = AdmmState::new(&CVector::from_element(3, c(1.0, 0.0)), 2.0);
        s.omega = CVector::from_element(3, c(0.5, 0.0));
        s.update_vartheta(&CVector::from_element(3, c(0.3, 0.0)));
        assert!(s.vartheta.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn omega_update_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = rand_unit(&mut rng, 5) * c(0.7, 0.0);
        let mut s = AdmmState::new(&rand_unit(&mut rng, 5), 1.5);
        s.update_vartheta(&theta);
        let old = s.omega.clone();
        s.update_omega(&theta);
        assert!((&s.omega - &old - (&theta - &s.vartheta) * c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_initialization_aligns_phase() {
        let ch = ChannelSet {
            h_d: vec![CVector::from_element(1, c(0.3, 0.4))],
            g: CMatrix::from_element(1, 1, c(-0.2, 0.9)),
            h_r: vec![CVector::from_element(1, c(0.6, -0.1))],
        };
        let theta = initial_theta(&ch, &SolverOptions::default());
        // ψ = θ² aligns the cascade h_r* ψ g with h_d
        let psi = theta[0] * theta[0];
        let casc = ch.h_r[0][0].conj() * psi * ch.g[(0, 0)];
        assert!(
            (casc.arg() - ch.h_d[0][0].conj().arg())
                .rem_euclid(std::f64::consts::TAU)
                .min((ch.h_d[0][0].conj().arg() - casc.arg()).rem_euclid(std::f64::consts::TAU))
                < 1e-6
        );
    }

    #[test]
    fn initial_precoder_uses_full_budget() {
        let (dims, ch, _, _, params) = rand_instance(3, 4, 3, 8, 2);
        let (_, pre) = initialize(&ch, &dims, &params, &SolverOptions::default()).unwrap();
        assert!((pre.transmit_power() - params.p_bs).abs() < 1e-12);
    }

    #[test]
    fn initial_phases_beat_random_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (dims, ch, _, _, _) = rand_instance(5, 4, 2, 16, 16);
        let gain = |th: &CVector| {
            let st = RisState::new(th.clone(), RVector::from_element(dims.l, 1.0));
            let op = build_reflection_operator(&st, &dims).unwrap();
            composite_channels(&ch, &op)
                .iter()
                .map(|h| h.norm_squared())
                .sum::<f64>()
        };
        let init = gain(&initial_theta(&ch, &SolverOptions::default()));
        let mean: f64 = (0..100).map(|_| gain(&rand_unit(&mut rng, 16))).sum::<f64>() / 100.0;
        assert!(init >= mean, "{init} vs {mean}");
    }

    #[test]
    fn ris_off_matches_direct_link_pipeline() {
        let (dims, ch, _, _, mut params) = rand_instance(6, 3, 2, 8, 8);
        params.p_ris_tot = 0.5 * params.static_ris_power(&dims);
        let (pre, st, trace) = run_sum_rate_max(&ch, &dims, &params, &SumRateOptions::default()).unwrap();
        assert!(trace.ris_off);
        assert!(st.a.iter().all(|&a| a == 0.0));
        let rate = sum_rate(&ch, &zero_operator(&dims), &pre, &params);
        assert!((rate - trace.final_sum_rate()).abs() < 1e-12);
    }

    #[test]
    fn small_instance_improves_and_stays_feasible() {
        for seed in 0..3 {
            let (dims, ch, _, _, params) = rand_instance(10 + seed, 3, 2, 8, 4);
            let (pre, st, trace) = run_sum_rate_max(&ch, &dims, &params, &SumRateOptions::default()).unwrap();
            assert!(trace.final_sum_rate() >= trace.initial_sum_rate - 1e-9);
            assert!(pre.transmit_power() <= params.p_bs * (1.0 + 1e-6));
            let op = build_reflection_operator(&st, &dims).unwrap();
            assert!(ris_dynamic_power(&ch, &op, &pre, &params) <= params.p_ris(&dims) * (1.0 + 1e-6));
            assert!(st.max_modulus_error() < 1e-12);
            assert!(st.a.iter().all(|&a| a >= 0.0));
            for o in &trace.outer {
                for s in &o.steps {
                    assert!(s.f2_after >= s.f2_before - 1e-6, "{s:?}");
                }
            }
        }
    }
}
