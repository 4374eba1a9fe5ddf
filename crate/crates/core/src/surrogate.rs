//! Majorizers of the phase-shift subproblems.
//!
//! With `a` and `w` fixed, the cascade `h_r,kᴴΨg_i` equals `conj(θᴴP̃_k,i θ*)`
//! where `P̃_k,i` has block `l` equal to `(a_l/√Q) h_r,k,l g_i,lᴴ`. Every
//! quartic term `vᴴFv` (`v = θ⊗θ`) is bounded through the trace of `F` and
//! `‖v‖² ≤ M²`, and every `Re{θᴴPθ*}` through the largest eigenvalue of its
//! realified Hessian. All matrices stay block diagonal plus one rank-one term;
//! the `M²×M²` matrices only appear in tests.

use crate::fp::FpAux;
use crate::linalg::{dot_t, largest_singular_value, BlockDiag, CVector, RVector, StructuredMatrix, C64, ONE};
use crate::model::{ChannelSet, Precoder, SystemDims, SystemParams};
use crate::solver::{BoxConstraint, BoxQcqp};

const EIG_TOL: f64 = 1e-8;
const EIG_MAX_ITER: usize = 500;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `θᴴ B θ*`
pub fn conj_form(b: &BlockDiag, theta: &CVector) -> C64 {
    dot_t(&theta.conjugate(), &b.mul_vec(&theta.conjugate()))
}

/// Cascade matrices `P̃_k,i`, indexed `[k][i]`, and their squared Frobenius
/// norms `‖f_k,i‖²`.
pub fn cascade_matrices(
    ch: &ChannelSet,
    pre: &Precoder,
    a: &RVector,
    dims: &SystemDims,
) -> (Vec<Vec<BlockDiag>>, Vec<Vec<f64>>) {
    let q = dims.q;
    let inv_sqrt_q = 1.0 / (q as f64).sqrt();
    let g: Vec<CVector> = pre.w.iter().map(|w| &ch.g * w).collect();
    let mut mats = Vec::with_capacity(dims.k);
    let mut norms = Vec::with_capacity(dims.k);
    for k in 0..dims.k {
        let mut row = Vec::with_capacity(dims.k);
        let mut nrow = Vec::with_capacity(dims.k);
        for gi in &g {
            let mut fn2 = 0.0;
            let blocks = (0..dims.l)
                .map(|l| {
                    let h = ch.h_r[k].rows(l * q, q);
                    let gl = gi.rows(l * q, q);
                    let s = a[l] * inv_sqrt_q;
                    fn2 += s * s * h.norm_squared() * gl.norm_squared();
                    h * gl.adjoint() * re(s)
                })
                .collect();
            row.push(BlockDiag::from_blocks(blocks));
            nrow.push(fn2);
        }
        mats.push(row);
        norms.push(nrow);
    }
    (mats, norms)
}

/// Block `l` is `a_l² u_l u_lᴴ` for the `l`-th slice of `u`.
fn weighted_outer(u: &CVector, a: &RVector, q: usize) -> BlockDiag {
    BlockDiag::from_blocks(
        (0..a.len())
            .map(|l| {
                let ul = u.rows(l * q, q);
                ul * ul.adjoint() * re(a[l] * a[l])
            })
            .collect(),
    )
}

/// `Q2 = Σ_k diag(g_k*)ΞᴴΞ diag(g_k)`, so `θᴴQ2θ = Σ_k‖ΨGw_k‖²` at unit modulus.
pub fn reflect_matrix(ch: &ChannelSet, pre: &Precoder, a: &RVector, dims: &SystemDims) -> BlockDiag {
    let mut q2 = BlockDiag::zeros(dims.l, dims.q);
    for w in &pre.w {
        let gbar = (&ch.g * w).conjugate();
        q2.axpy(ONE, &weighted_outer(&gbar, a, dims.q));
    }
    q2
}

/// `(diag(h*)ΞΞᴴdiag(h))*`, so `σ_z² θᴴ(·)θ` is the RIS noise at the user.
pub fn noise_matrix(h_r: &CVector, a: &RVector, dims: &SystemDims) -> BlockDiag {
    weighted_outer(h_r, a, dims.q)
}

/// Sum-rate phase subproblem data for fixed `w`, `a`, `μ`, `η`.
#[derive(Clone, Debug)]
pub struct ThetaProblemData {
    pub p_tilde: Vec<Vec<BlockDiag>>,
    pub f_norm_sq: Vec<Vec<f64>>,
    /// `|η_k|²`
    pub weights: Vec<f64>,
    /// `P = P2ᴴ − P1ᴴ`
    pub p: BlockDiag,
    pub q1: BlockDiag,
    pub q2: BlockDiag,
    pub tau: f64,
    pub m: usize,
}

pub fn build_theta_problem_data(
    ch: &ChannelSet,
    pre: &Precoder,
    a: &RVector,
    aux: &FpAux,
    params: &SystemParams,
    dims: &SystemDims,
) -> ThetaProblemData {
    let (p_tilde, f_norm_sq) = cascade_matrices(ch, pre, a, dims);
    let weights: Vec<f64> = aux.eta.iter().map(|e| e.norm_sqr()).collect();
    let mut p = BlockDiag::zeros(dims.l, dims.q);
    let mut q1 = BlockDiag::zeros(dims.l, dims.q);
    for k in 0..dims.k {
        for i in 0..dims.k {
            let hd = ch.h_d[k].dotc(&pre.w[i]);
            p.axpy(hd * (2.0 * weights[k]), &p_tilde[k][i].transpose());
        }
        let coef = aux.eta[k] * (2.0 * (1.0 + aux.mu[k]).sqrt());
        p.axpy(-coef, &p_tilde[k][k].transpose());
        q1.axpy(re(weights[k] * params.sigma_z_sq), &noise_matrix(&ch.h_r[k], a, dims));
    }
    let xi_norm_sq: f64 = a.iter().map(|al| al * al * dims.q as f64).sum();
    ThetaProblemData {
        p_tilde,
        f_norm_sq,
        weights,
        p,
        q1,
        q2: reflect_matrix(ch, pre, a, dims),
        tau: params.p_ris(dims) - xi_norm_sq * params.sigma_z_sq,
        m: dims.m,
    }
}

impl ThetaProblemData {
    /// `s_k,i(θ) = θᴴP̃_k,iθ* = vᴴf_k,i`
    pub fn cascade(&self, theta: &CVector) -> Vec<Vec<C64>> {
        self.p_tilde
            .iter()
            .map(|row| row.iter().map(|b| conj_form(b, theta)).collect())
            .collect()
    }

    /// `vᴴFv`
    pub fn quartic(&self, theta: &CVector) -> f64 {
        let s = self.cascade(theta);
        s.iter()
            .zip(&self.weights)
            .map(|(row, w)| w * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// `vᴴFv + Re{θᴴPθ*} + θᴴQ1θ`, equal to `−f2` (nats) plus a
    /// `θ`-independent constant on the unit-modulus torus.
    pub fn objective(&self, theta: &CVector) -> f64 {
        self.quartic(theta) + conj_form(&self.p, theta).re + self.q1.quad_form(theta).re
    }

    /// `λ_f = Tr F`
    pub fn trace_bound(&self) -> f64 {
        self.f_norm_sq
            .iter()
            .zip(&self.weights)
            .map(|(row, w)| w * row.iter().sum::<f64>())
            .sum()
    }
}

/// Quartic majorizer `Re{θᴴF̃_tθ*} + c_f` with `F̃_t` block diagonal plus
/// the rank-one term `−2λ_f θ_tθ_tᵀ`.
pub fn surrogate_quartic(data: &ThetaProblemData, theta_t: &CVector) -> (StructuredMatrix, f64, f64) {
    let lambda_f = data.trace_bound();
    let s = data.cascade(theta_t);
    let l_n = data.p.num_blocks();
    let mut block = BlockDiag::zeros(l_n, data.p.block_size());
    let mut vfv = 0.0;
    for (k, row) in data.p_tilde.iter().enumerate() {
        for (i, pt) in row.iter().enumerate() {
            block.axpy(s[k][i].conj() * (2.0 * data.weights[k]), pt);
            vfv += data.weights[k] * s[k][i].norm_sqr();
        }
    }
    let mut f_t = StructuredMatrix::from_block(block);
    f_t.push_rank_one(re(-2.0 * lambda_f), theta_t.clone(), theta_t.clone());
    let m2 = (data.m * data.m) as f64;
    let v_norm_sq = theta_t.norm_squared().powi(2);
    let c_f = lambda_f * m2 + lambda_f * v_norm_sq - vfv;
    (f_t, lambda_f, c_f)
}

/// Majorizer `(λ/2)θᴴθ + Re{θᴴ linear} + c` of `Re{θᴴPθ*}` at `θ_t`.
#[derive(Clone, Debug)]
pub struct ConjMajorizer {
    /// Largest eigenvalue of the realified Hessian, or an upper bound.
    pub lambda: f64,
    /// `U p̄_t`
    pub linear: CVector,
    pub c: f64,
    pub exact_eigenvalue: bool,
}

impl ConjMajorizer {
    pub fn value(&self, theta: &CVector) -> f64 {
        0.5 * self.lambda * theta.norm_squared() + theta.dotc(&self.linear).re + self.c
    }
}

/// The Hessian of `θ̄ᵀP̄θ̄` realifies `S = P + Pᵀ`, whose eigenvalues are
/// `±σ_i(S)`; its largest is found by power iteration on `SSᴴ`.
pub fn realify_and_majorize(p_t: &StructuredMatrix, theta_t: &CVector) -> ConjMajorizer {
    let sym = p_t.symmetrized();
    let est = largest_singular_value(&sym, None, EIG_TOL, EIG_MAX_ITER);
    let lambda = est.value;
    let linear = sym.mul_vec(&theta_t.conjugate()) - theta_t * re(lambda);
    let c = -p_t.re_conj_form(theta_t) + 0.5 * lambda * theta_t.norm_squared();
    ConjMajorizer {
        lambda,
        linear,
        c,
        exact_eigenvalue: est.converged,
    }
}

/// Everything derived from the expansion point `θ_t`.
#[derive(Clone, Debug)]
pub struct MmIterate {
    pub theta_t: CVector,
    pub lambda_f: f64,
    pub c_f: f64,
    pub p_t: StructuredMatrix,
    pub maj: ConjMajorizer,
}

impl MmIterate {
    pub fn new(data: &ThetaProblemData, theta_t: &CVector) -> Self {
        let (f_t, lambda_f, c_f) = surrogate_quartic(data, theta_t);
        let mut p_t = f_t;
        p_t.block.axpy(ONE, &data.p);
        let maj = realify_and_majorize(&p_t, theta_t);
        Self {
            theta_t: theta_t.clone(),
            lambda_f,
            c_f,
            p_t,
            maj,
        }
    }

    /// Convex upper bound of [`ThetaProblemData::objective`] (without the
    /// ADMM penalty), tight at a unit-modulus `θ_t`.
    pub fn surrogate(&self, data: &ThetaProblemData, theta: &CVector) -> f64 {
        self.maj.value(theta) + self.c_f + data.q1.quad_form(theta).re
    }
}

/// `min θᴴΥθ + Re{θᴴζ}` s.t. `θᴴQ2θ ≤ τ`, `|θ_m| ≤ 1`.
pub fn build_theta_qp(
    data: &ThetaProblemData,
    mm: &MmIterate,
    vartheta: &CVector,
    omega: &CVector,
    rho: f64,
) -> BoxQcqp {
    let mut upsilon = data.q1.clone();
    upsilon.add_identity(0.5 * (mm.maj.lambda + rho));
    let zeta = &mm.maj.linear - vartheta * re(rho) + omega;
    BoxQcqp {
        upsilon,
        zeta,
        constraints: vec![BoxConstraint {
            lambda: data.q2.clone(),
            beta: CVector::zeros(data.m),
            c: -data.tau,
        }],
        unit_ball: true,
    }
}

/// Static part of the power-minimization SINR constraints in `θ`.
#[derive(Clone, Debug)]
pub struct PmConstraintData {
    pub p_tilde: Vec<Vec<BlockDiag>>,
    pub gamma: Vec<f64>,
    /// `λ_k,1 = Γ_k Σ_{i≠k} ‖f_k,i‖²`
    pub lambda1: Vec<f64>,
    /// `λ_k,2 = ‖f_k,k‖²`
    pub lambda2: Vec<f64>,
    pub p_hat: Vec<BlockDiag>,
    pub q_hat: Vec<BlockDiag>,
    pub varsigma: Vec<f64>,
    pub q2: BlockDiag,
    pub m: usize,
}

pub fn build_pm_constraint_data(
    ch: &ChannelSet,
    pre: &Precoder,
    a: &RVector,
    params: &SystemParams,
    dims: &SystemDims,
) -> PmConstraintData {
    let (p_tilde, f_norm_sq) = cascade_matrices(ch, pre, a, dims);
    let kk = dims.k;
    let mut lambda1 = vec![0.0; kk];
    let mut lambda2 = vec![0.0; kk];
    let mut p_hat = Vec::with_capacity(kk);
    let mut q_hat = Vec::with_capacity(kk);
    let mut varsigma = vec![0.0; kk];
    for k in 0..kk {
        let gk = params.gamma[k];
        let mut ph = BlockDiag::zeros(dims.l, dims.q);
        for i in 0..kk {
            let hd = ch.h_d[k].dotc(&pre.w[i]);
            if i == k {
                lambda2[k] = f_norm_sq[k][k];
                ph.axpy(hd * -2.0, &p_tilde[k][k].transpose());
                varsigma[k] -= hd.norm_sqr();
            } else {
                lambda1[k] += gk * f_norm_sq[k][i];
                ph.axpy(hd * (2.0 * gk), &p_tilde[k][i].transpose());
                varsigma[k] += gk * hd.norm_sqr();
            }
        }
        varsigma[k] += gk * params.sigma_sq[k];
        p_hat.push(ph);
        q_hat.push(noise_matrix(&ch.h_r[k], a, dims).scaled(re(gk * params.sigma_z_sq)));
    }
    PmConstraintData {
        p_tilde,
        gamma: params.gamma.clone(),
        lambda1,
        lambda2,
        p_hat,
        q_hat,
        varsigma,
        q2: reflect_matrix(ch, pre, a, dims),
        m: dims.m,
    }
}

impl PmConstraintData {
    pub fn num_users(&self) -> usize {
        self.gamma.len()
    }

    /// `vᴴF̂_kv` through the cascade values.
    fn quartic(&self, k: usize, s: &[C64]) -> f64 {
        s.iter()
            .enumerate()
            .map(|(i, z)| {
                if i == k {
                    -z.norm_sqr()
                } else {
                    self.gamma[k] * z.norm_sqr()
                }
            })
            .sum()
    }

    /// Left side of the `k`-th SINR constraint,
    /// `vᴴF̂_kv + Re{θᴴP̂_kθ*} + θᴴQ̂_kθ + ς_k`; at unit modulus it is `≤ 0`
    /// exactly when `γ_k ≥ Γ_k`.
    pub fn constraint_value(&self, k: usize, theta: &CVector) -> f64 {
        let s: Vec<C64> = self.p_tilde[k].iter().map(|b| conj_form(b, theta)).collect();
        self.quartic(k, &s) + conj_form(&self.p_hat[k], theta).re + self.q_hat[k].quad_form(theta).re + self.varsigma[k]
    }

    /// Convex surrogates `ĝ_k(θ|θ_t) ≤ 0`, one per user.
    pub fn surrogates(&self, theta_t: &CVector) -> Vec<BoxConstraint> {
        (0..self.num_users()).map(|k| self.surrogate(k, theta_t)).collect()
    }

    pub fn surrogate(&self, k: usize, theta_t: &CVector) -> BoxConstraint {
        let lambda_k = self.lambda1[k] + self.lambda2[k];
        let s: Vec<C64> = self.p_tilde[k].iter().map(|b| conj_form(b, theta_t)).collect();
        let p0 = &self.p_hat[k];
        let mut block = p0.clone();
        for (i, pt) in self.p_tilde[k].iter().enumerate() {
            let w = if i == k { -2.0 } else { 2.0 * self.gamma[k] };
            block.axpy(s[i].conj() * w, pt);
        }
        let mut p_kt = StructuredMatrix::from_block(block);
        p_kt.push_rank_one(re(-2.0 * lambda_k), theta_t.clone(), theta_t.clone());
        let m2 = (self.m * self.m) as f64;
        let c_k = lambda_k * m2 + lambda_k * theta_t.norm_squared().powi(2) - self.quartic(k, &s);
        let maj = realify_and_majorize(&p_kt, theta_t);
        let mut lam = self.q_hat[k].clone();
        lam.add_identity(0.5 * maj.lambda);
        BoxConstraint {
            lambda: lam,
            beta: maj.linear,
            c: maj.c + c_k + self.varsigma[k],
        }
    }

    /// `min θᴴΩθ + Re{θᴴϱ}` with `Ω = Q2 + (ρ/2)I` and `ϱ = −ρϑ + ω`.
    pub fn theta_qp(&self, constraints: Vec<BoxConstraint>, vartheta: &CVector, omega: &CVector, rho: f64) -> BoxQcqp {
        let mut upsilon = self.q2.clone();
        upsilon.add_identity(0.5 * rho);
        BoxQcqp {
            upsilon,
            zeta: omega - vartheta * re(rho),
            constraints,
            unit_ball: true,
        }
    }
}

/// Dense `Σ_k w_k Σ_i f_k,i f_k,iᴴ` (test oracle, `M ≤ 8`).
#[cfg(test)]
pub(crate) fn dense_quartic_matrix(
    p_tilde: &[Vec<BlockDiag>],
    weight: impl Fn(usize, usize) -> f64,
) -> crate::linalg::CMatrix {
    let m = p_tilde[0][0].dim();
    assert!(m <= 8, "dense M²×M² oracle is for tiny M only");
    let mut f = crate::linalg::CMatrix::zeros(m * m, m * m);
    for (k, row) in p_tilde.iter().enumerate() {
        for (i, pt) in row.iter().enumerate() {
            let d = pt.to_dense();
            let fv = CVector::from_column_slice(d.as_slice());
            f += &fv * fv.adjoint() * re(weight(k, i));
        }
    }
    f
}
