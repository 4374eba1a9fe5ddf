//! Second-order cone steps of power minimization: the precoder update and
//! the amplification update, both routed through the barrier engine.

use super::barrier::{self, BarrierOptions, BarrierProblem, Partition, SocIneq, SymOp};
use super::{SolveReport, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::{deinterleave, interleave, realify_hermitian_interleaved, CMatrix, CVector, RMatrix, RVector, C64};
use crate::model::{composite_channels, ChannelSet, LinkBudget, Precoder, ReflectionOperator, SystemParams};

/// Real rows `[Re(hᴴw); Im(hᴴw)]` acting on interleaved `w`.
fn gain_rows(h: &CVector) -> (RVector, RVector) {
    let n = h.len();
    let mut re = RVector::zeros(2 * n);
    let mut im = RVector::zeros(2 * n);
    for (j, z) in h.iter().enumerate() {
        re[2 * j] = z.re;
        re[2 * j + 1] = z.im;
        im[2 * j] = -z.im;
        im[2 * j + 1] = z.re;
    }
    (re, im)
}

/// Zero-forcing precoder delivering `h_kᴴw_i = δ_ki·s_k`.
fn zero_forcing(h: &[CVector], s: &[f64]) -> Option<Vec<CVector>> {
    let n = h[0].len();
    let k = h.len();
    let hm = CMatrix::from_fn(n, k, |r, c| h[c][r]);
    let gram = hm.ad_mul(&hm);
    let inv = gram.try_inverse()?;
    let w = &hm * inv;
    let out: Vec<CVector> = (0..k).map(|i| w.column(i) * C64::new(s[i], 0.0)).collect();
    out.iter()
        .all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .then_some(out)
}

/// `min ν₁⁻¹Σ‖w_k‖² + ν₂⁻¹Σ‖ΨGw_k‖²` subject to `γ_k ≥ Γ_k` for all users.
///
/// Each SINR constraint is posed as
/// `‖[h_kᴴw_1, …, h_kᴴw_K, σ̃_k]‖ ≤ √(1 + 1/Γ_k)·Re{h_kᴴw_k}`, which is
/// equivalent after a per-user phase rotation.
pub fn solve_socp_power(
    ch: &ChannelSet,
    op: &ReflectionOperator,
    params: &SystemParams,
    start: Option<&Precoder>,
    opts: &SolverOptions,
) -> Result<(Precoder, SolveReport)> {
    let k = ch.num_users();
    let n = ch.g.ncols();
    if params.gamma.len() != k || params.gamma.iter().any(|&g| g <= 0.0) {
        return Err(Error::InvalidParam {
            name: "Gamma".into(),
            reason: "need one positive SINR target per user".into(),
        });
    }
    let h = composite_channels(ch, op);
    let zero = Precoder {
        w: vec![CVector::zeros(n); k],
    };
    let noise = LinkBudget::new(ch, op, &zero, params).noise;
    let psi_g = CMatrix::from_columns(
        &(0..n)
            .map(|c| op.psi.mul_vec(&ch.g.column(c).into_owned()))
            .collect::<Vec<_>>(),
    );
    let d = CMatrix::identity(n, n) * C64::new(1.0 / params.nu1, 0.0)
        + psi_g.ad_mul(&psi_g) * C64::new(1.0 / params.nu2, 0.0);
    let d_real = realify_hermitian_interleaved(&d);
    let part = Partition::uniform(k, 2 * n);
    let mut prob = BarrierProblem::new(part, SymOp::from_blocks(vec![d_real; k]), RVector::zeros(2 * n * k));
    for (u, hu) in h.iter().enumerate() {
        let (re, im) = gain_rows(hu);
        let mut s = SocIneq::new(2 * n * k);
        s.rows = RMatrix::zeros(2 * k, 2 * n * k);
        for i in 0..k {
            s.rows
                .view_mut((2 * i, 2 * n * i), (1, 2 * n))
                .copy_from(&re.transpose());
            s.rows
                .view_mut((2 * i + 1, 2 * n * i), (1, 2 * n))
                .copy_from(&im.transpose());
        }
        s.rows_off = RVector::zeros(2 * k);
        s.constant = noise[u].sqrt();
        s.f.rows_mut(2 * n * u, 2 * n)
            .copy_from(&(&re * (1.0 + 1.0 / params.gamma[u]).sqrt()));
        prob.socs.push(s);
    }
    let stack = |w: &[CVector]| {
        let mut x = RVector::zeros(2 * n * k);
        for (i, wi) in w.iter().enumerate() {
            x.rows_mut(2 * n * i, 2 * n).copy_from(&interleave(wi));
        }
        x
    };
    let mut x0 = RVector::zeros(2 * n * k);
    let mut found = false;
    if let Some(st) = start {
        // rotate so every h_kᴴw_k is real positive, then inflate slightly
        let w: Vec<CVector> =
            st.w.iter()
                .zip(&h)
                .map(|(wk, hk)| {
                    let g = hk.dotc(wk);
                    let rot = if g.norm() > 0.0 {
                        g.conj() / g.norm()
                    } else {
                        C64::new(1.0, 0.0)
                    };
                    wk * rot * C64::new(1.0 + 1e-6, 0.0)
                })
                .collect();
        let cand = stack(&w);
        if prob.max_violation(&cand) < 0.0 {
            x0 = cand;
            found = true;
        }
    }
    if !found {
        let s: Vec<f64> = (0..k).map(|u| (2.0 * params.gamma[u] * noise[u]).sqrt()).collect();
        if let Some(w) = zero_forcing(&h, &s) {
            x0 = stack(&w);
        }
    }
    let x_scale = (x0.norm() / ((n * k) as f64).sqrt()).max(1e-300);
    let mut bo: BarrierOptions = (*opts).into();
    bo.x_scale = if x_scale.is_finite() && x0.norm() > 0.0 {
        x_scale
    } else {
        1.0
    };
    let res = barrier::solve(&prob, &x0, &bo);
    let w = (0..k)
        .map(|i| deinterleave(&res.x.rows(2 * n * i, 2 * n).into_owned()))
        .collect();
    Ok((Precoder { w }, res.report))
}

/// Data of the amplification step: `h_kᴴw_i = direct[k][i] + b[k][i]ᴴa`,
/// RIS noise at user `k` equal to `Σ_l s[k][l]·a_l²`, and the reflect power
/// `aᵀdiag(t)a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ASocpData {
    pub t: RVector,
    pub direct: Vec<Vec<C64>>,
    pub b: Vec<Vec<CVector>>,
    pub s: Vec<RVector>,
    pub sigma_sq: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ASocpData {
    pub fn gain(&self, k: usize, i: usize, a: &RVector) -> C64 {
        let mut g = self.direct[k][i];
        for (bl, al) in self.b[k][i].iter().zip(a.iter()) {
            g += bl.conj() * al;
        }
        g
    }

    pub fn sinr(&self, k: usize, a: &RVector) -> f64 {
        let users = self.direct.len();
        let interf: f64 = (0..users)
            .filter(|&i| i != k)
            .map(|i| self.gain(k, i, a).norm_sqr())
            .sum();
        let ris: f64 = self.s[k].iter().zip(a.iter()).map(|(s, al)| s * al * al).sum();
        self.gain(k, k, a).norm_sqr() / (interf + ris + self.sigma_sq[k])
    }

    pub fn power(&self, a: &RVector) -> f64 {
        self.t.iter().zip(a.iter()).map(|(t, al)| t * al * al).sum()
    }
}

/// `min aᵀTa` subject to the SINR targets and `a ≥ 0`.
///
/// The SINR constraint of user `k` is convexified by fixing the phase of its
/// desired gain:
/// `‖[h_kᴴw_i (i ≠ k); √s_k ⊙ a; σ_k]‖ ≤ Re{e^{−jφ_k} h_kᴴw_k}/√Γ_k`.
/// Any feasible point of this restriction meets the true targets. Starting
/// from the phases at `incumbent`, the restriction is re-solved with the
/// phases of its own solution until they settle or the power stops
/// decreasing.
pub fn solve_a_socp_min(data: &ASocpData, incumbent: &RVector, opts: &SolverOptions) -> Result<(RVector, SolveReport)> {
    let l = data.t.len();
    if incumbent.len() != l || data.b.iter().flatten().any(|b| b.len() != l) || data.s.iter().any(|s| s.len() != l) {
        return Err(Error::Dimension("amplifier data lengths differ".into()));
    }
    let mut a = incumbent.clone();
    let mut best: Option<SolveReport> = None;
    let mut iterations = 0;
    for _ in 0..30 {
        let (next, rep) = solve_a_socp_restricted(data, &a, opts);
        iterations += rep.iterations;
        if rep.status == Status::Infeasible {
            break;
        }
        let before = best.as_ref().map_or(f64::INFINITY, |r| r.objective);
        let improved = rep.objective < before;
        let phase_shift = (0..data.direct.len())
            .map(|k| (data.gain(k, k, &next) * data.gain(k, k, &a).conj()).arg().abs())
            .fold(0.0, f64::max);
        if improved {
            a = next;
        }
        let done = !improved || phase_shift <= 1e-10;
        if improved || best.is_none() {
            best = Some(rep);
        }
        if done {
            break;
        }
    }
    match best {
        Some(mut rep) => {
            rep.iterations = iterations;
            Ok((a, rep))
        }
        None => {
            let mut rep = SolveReport::infeasible(data.power(incumbent));
            rep.iterations = iterations;
            Ok((incumbent.clone(), rep))
        }
    }
}

/// One convex restriction: the desired-gain phases are those at `phase_at`,
/// which also seeds the barrier path.
pub fn solve_a_socp_restricted(data: &ASocpData, phase_at: &RVector, opts: &SolverOptions) -> (RVector, SolveReport) {
    let users = data.direct.len();
    let l = data.t.len();
    let mut prob = BarrierProblem::new(
        Partition::uniform(l, 1),
        SymOp::from_blocks(data.t.iter().map(|t| RMatrix::from_element(1, 1, *t)).collect()),
        RVector::zeros(l),
    );
    for k in 0..users {
        let g = data.gain(k, k, phase_at);
        let rot = if g.norm() > 0.0 {
            g.conj() / g.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let sg = data.gamma[k].sqrt();
        let mut s = SocIneq::new(l);
        let others: Vec<usize> = (0..users).filter(|&i| i != k).collect();
        s.rows = RMatrix::zeros(2 * others.len(), l);
        s.rows_off = RVector::zeros(2 * others.len());
        for (r, &i) in others.iter().enumerate() {
            for (j, bl) in data.b[k][i].iter().enumerate() {
                s.rows[(2 * r, j)] = bl.re;
                s.rows[(2 * r + 1, j)] = -bl.im;
            }
            s.rows_off[2 * r] = data.direct[k][i].re;
            s.rows_off[2 * r + 1] = data.direct[k][i].im;
        }
        s.diag = data.s[k]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(j, v)| (j, v.sqrt()))
            .collect();
        s.constant = data.sigma_sq[k].sqrt();
        for (j, bl) in data.b[k][k].iter().enumerate() {
            s.f[j] = (rot * bl.conj()).re / sg;
        }
        s.h = (rot * data.direct[k][k]).re / sg;
        prob.socs.push(s);
    }
    for j in 0..l {
        prob.lower.push((j, 0.0));
    }
    let zero = RVector::zeros(l);
    if prob.socs.iter().all(|s| s.violation(&zero) <= 0.0) {
        let rep = SolveReport {
            status: Status::Optimal,
            kkt_residual: 0.0,
            iterations: 0,
            objective: 0.0,
            multipliers: vec![0.0; users],
        };
        return (zero, rep);
    }
    let mut bo: BarrierOptions = (*opts).into();
    let mut start = phase_at.clone();
    let mut res;
    let mut rounds = 0;
    loop {
        let scale = start.norm() / (l as f64).sqrt();
        bo.x_scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        res = barrier::solve(&prob, &start, &bo);
        rounds += 1;
        // the gap test is absolute once the scaled objective is small, so
        // repeat at the scale of the solution when it is far below the start
        let shrunk = res.x.norm() < 1e-2 * start.norm();
        if !res.report.is_optimal() || !shrunk || rounds == 4 {
            break;
        }
        start = res.x.clone();
    }
    res.report.iterations = res.report.iterations.max(rounds);
    let a = res.x.map(|v| v.max(0.0));
    let mut rep = res.report;
    rep.objective = data.power(&a);
    (a, rep)
}
