//! Fractional-programming transforms of the sum rate.
//!
//! The Lagrangian dual transform introduces `μ` and the quadratic transform
//! `η`; with both at their closed-form optima the transformed objective
//! equals the sum rate. Internally every quantity is in nats, and the
//! `*_bits` evaluators divide by `ln 2`.

use std::f64::consts::LN_2;

use crate::linalg::{CMatrix, CVector, RVector, C64};
use crate::model::{ChannelSet, LinkBudget, Precoder, ReflectionOperator, SystemDims, SystemParams};
use crate::solver::{ASocpData, ConstraintMatrix, QuadMaxConstraint, QuadMaxProblem};

#[derive(Clone, Debug, PartialEq)]
pub struct FpAux {
    pub mu: Vec<f64>,
    pub eta: Vec<C64>,
}

impl FpAux {
    pub fn zeros(k: usize) -> Self {
        Self {
            mu: vec![0.0; k],
            eta: vec![C64::new(0.0, 0.0); k],
        }
    }

    /// Both auxiliaries at their optimum for the given link budget.
    pub fn optimal(lb: &LinkBudget) -> Self {
        let mu = update_mu(lb);
        let eta = update_eta(lb, &mu);
        Self { mu, eta }
    }
}

/// `μ_k = γ_k`
pub fn update_mu(lb: &LinkBudget) -> Vec<f64> {
    lb.sinrs()
}

/// `η_k = √(1+μ_k) h_kᴴw_k / (Σ_i |h_kᴴw_i|² + noise_k)`; zero when the
/// denominator vanishes.
pub fn update_eta(lb: &LinkBudget, mu: &[f64]) -> Vec<C64> {
    (0..lb.gains.len())
        .map(|k| {
            let d = lb.total_received(k);
            if d > 0.0 {
                lb.gains[k][k] * ((1.0 + mu[k]).sqrt() / d)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Lagrangian-dual form in nats.
pub fn f1_nats(lb: &LinkBudget, mu: &[f64]) -> f64 {
    (0..lb.gains.len())
        .map(|k| {
            let d = lb.total_received(k);
            let frac = if d > 0.0 { lb.gains[k][k].norm_sqr() / d } else { 0.0 };
            (1.0 + mu[k]).ln() - mu[k] + (1.0 + mu[k]) * frac
        })
        .sum()
}

pub fn f1_bits(lb: &LinkBudget, mu: &[f64]) -> f64 {
    f1_nats(lb, mu) / LN_2
}

/// Quadratic-transform form in nats.
pub fn f2_nats(lb: &LinkBudget, aux: &FpAux) -> f64 {
    (0..lb.gains.len())
        .map(|k| {
            let (mu, eta) = (aux.mu[k], aux.eta[k]);
            (1.0 + mu).ln() - mu + 2.0 * (1.0 + mu).sqrt() * (eta.conj() * lb.gains[k][k]).re
                - eta.norm_sqr() * lb.total_received(k)
        })
        .sum()
}

pub fn f2_bits(lb: &LinkBudget, aux: &FpAux) -> f64 {
    f2_nats(lb, aux) / LN_2
}

pub fn f2_objective(
    ch: &ChannelSet,
    op: &ReflectionOperator,
    pre: &Precoder,
    aux: &FpAux,
    params: &SystemParams,
) -> f64 {
    f2_bits(&LinkBudget::new(ch, op, pre, params), aux)
}

/// Precoding subproblem `max Re{xᴴw} − wᴴ(I_K⊗Y)w` subject to the transmit
/// budget and the RIS budget `wᴴ(I_K⊗Z)w ≤ P_RIS − ‖Ψ‖_F²σ_z²`. The second
/// bound is negative when the RIS noise alone exceeds the budget; the solver
/// then reports infeasibility.
pub fn assemble_w_problem(
    ch: &ChannelSet,
    op: &ReflectionOperator,
    aux: &FpAux,
    params: &SystemParams,
    dims: &SystemDims,
) -> QuadMaxProblem {
    let h = crate::model::composite_channels(ch, op);
    let n = dims.n;
    let mut x = CVector::zeros(n * dims.k);
    let mut y = CMatrix::zeros(n, n);
    for k in 0..dims.k {
        let coef = aux.eta[k] * (2.0 * (1.0 + aux.mu[k]).sqrt());
        x.rows_mut(k * n, n).copy_from(&(&h[k] * coef));
        y += &h[k] * h[k].adjoint() * C64::new(aux.eta[k].norm_sqr(), 0.0);
    }
    let pg = dense_psi_g(op, &ch.g);
    let z = pg.adjoint() * &pg;
    let bound = params.p_ris(dims) - op.psi.frobenius_norm_sq() * params.sigma_z_sq;
    QuadMaxProblem {
        x,
        y,
        reps: dims.k,
        constraints: vec![
            QuadMaxConstraint {
                s: ConstraintMatrix::Identity,
                bound: params.p_bs,
            },
            QuadMaxConstraint {
                s: ConstraintMatrix::Matrix(z),
                bound,
            },
        ],
        nonneg: false,
    }
}

fn dense_psi_g(op: &ReflectionOperator, g: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(g.nrows(), g.ncols());
    let q = op.q;
    for (l, b) in op.psi.blocks().iter().enumerate() {
        out.rows_mut(l * q, q).copy_from(&(b * g.rows(l * q, q)));
    }
    out
}

/// Per-amplifier coefficients of the received signals for fixed `θ` and `w`:
/// `h_kᴴw_i = h_d,kᴴw_i + b_k,iᴴ a`, RIS noise `Σ_l s_k(l) a_l²` and RIS
/// power `Σ_l t(l) a_l²`, with `Φ_l = θ̃_l θ̃_lᵀ`.
pub fn amplifier_terms(
    ch: &ChannelSet,
    theta: &CVector,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> ASocpData {
    let (k_users, l_n, q) = (dims.k, dims.l, dims.q);
    let inv_q = 1.0 / q as f64;
    let inv_sqrt_q = inv_q.sqrt();
    let g: Vec<CVector> = pre.w.iter().map(|w| &ch.g * w).collect();
    let seg_norm2: Vec<f64> = (0..l_n).map(|l| theta.rows(l * q, q).norm_squared()).collect();
    // θ̃_lᴴ h_r,k,l and θ̃_lᵀ g_i,l
    let th_h: Vec<Vec<C64>> = ch
        .h_r
        .iter()
        .map(|h| (0..l_n).map(|l| theta.rows(l * q, q).dotc(&h.rows(l * q, q))).collect())
        .collect();
    let th_g: Vec<Vec<C64>> = g
        .iter()
        .map(|gi| (0..l_n).map(|l| theta.rows(l * q, q).dot(&gi.rows(l * q, q))).collect())
        .collect();
    let direct = (0..k_users)
        .map(|k| pre.w.iter().map(|w| ch.h_d[k].dotc(w)).collect())
        .collect();
    let b = (0..k_users)
        .map(|k| {
            (0..k_users)
                .map(|i| CVector::from_fn(l_n, |l, _| th_g[i][l].conj() * th_h[k][l] * inv_sqrt_q))
                .collect()
        })
        .collect();
    let s = (0..k_users)
        .map(|k| {
            RVector::from_fn(l_n, |l, _| {
                inv_q * th_h[k][l].norm_sqr() * seg_norm2[l] * params.sigma_z_sq
            })
        })
        .collect();
    let t = RVector::from_fn(l_n, |l, _| {
        let refl: f64 = th_g.iter().map(|tg| tg[l].norm_sqr()).sum::<f64>() * seg_norm2[l];
        inv_q * (refl + seg_norm2[l] * seg_norm2[l] * params.sigma_z_sq)
    });
    ASocpData {
        t,
        direct,
        b,
        s,
        sigma_sq: params.sigma_sq.clone(),
        gamma: params.gamma.clone(),
    }
}

/// Amplification subproblem `max Re{dᴴa} − aᵀRa` subject to `aᵀTa ≤ P_RIS`
/// and `a ≥ 0`.
pub fn assemble_a_problem(terms: &ASocpData, aux: &FpAux, params: &SystemParams, dims: &SystemDims) -> QuadMaxProblem {
    let l_n = dims.l;
    let mut d = CVector::zeros(l_n);
    let mut r = CMatrix::zeros(l_n, l_n);
    for k in 0..dims.k {
        let e2 = aux.eta[k].norm_sqr();
        d += &terms.b[k][k] * (aux.eta[k] * (2.0 * (1.0 + aux.mu[k]).sqrt()));
        for i in 0..dims.k {
            let bki = &terms.b[k][i];
            d -= bki * (terms.direct[k][i] * (2.0 * e2));
            r += bki * bki.adjoint() * C64::new(e2, 0.0);
        }
        for l in 0..l_n {
            r[(l, l)] += e2 * terms.s[k][l];
        }
    }
    QuadMaxProblem {
        x: d,
        y: r,
        reps: 1,
        constraints: vec![QuadMaxConstraint {
            s: ConstraintMatrix::Matrix(CMatrix::from_diagonal(&terms.t.map(|v| C64::new(v, 0.0)))),
            bound: params.p_ris(dims),
        }],
        nonneg: true,
    }
}
