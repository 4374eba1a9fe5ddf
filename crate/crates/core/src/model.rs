//! System model of a sub-connected active RIS serving a MU-MISO downlink.
//!
//! The RIS has `M = L·Q` elements split into `L` sub-arrays of `Q` elements,
//! each sub-array sharing one amplifier. Sub-array `l` combines its incident
//! signals after the phase shifters, amplifies by `a_l`, and re-splits with a
//! `1/√Q` factor, so its reflection matrix is `(a_l/√Q)·θ̃_l θ̃_lᵀ`.

use crate::error::{Error, Result};
use crate::linalg::{BlockDiag, CMatrix, CVector, RVector, C64, ZERO};

/// Dimensions: `n` BS antennas, `k` users, `m` RIS elements, `l` amplifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemDims {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub q: usize,
}

impl SystemDims {
    pub fn new(n: usize, k: usize, m: usize, l: usize) -> Result<Self> {
        if k == 0 || n < k {
            return Err(Error::InvalidParam {
                name: "N, K".into(),
                reason: format!("need N >= K >= 1, got N = {n}, K = {k}"),
            });
        }
        if l == 0 || m < l || !m.is_multiple_of(l) {
            return Err(Error::InvalidParam {
                name: "M, L".into(),
                reason: format!("L must divide M with M >= L >= 1, got M = {m}, L = {l}"),
            });
        }
        Ok(Self { n, k, m, l, q: m / l })
    }

    /// Same antenna/user counts with a different amplifier count.
    pub fn with_amplifiers(&self, l: usize) -> Result<Self> {
        Self::new(self.n, self.k, self.m, l)
    }
}

/// Physical constants, all in watts or linear units.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub p_bs: f64,
    pub p_ris_tot: f64,
    pub w_bs: f64,
    pub w_ps: f64,
    pub w_pa: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// Per-user receiver noise power.
    pub sigma_sq: Vec<f64>,
    /// Dynamic noise power injected by each active element.
    pub sigma_z_sq: f64,
    /// Per-user SINR targets (power minimization only).
    pub gamma: Vec<f64>,
}

/// Whether any power is left for amplification once static draw is paid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RisBudget {
    Feasible,
    Infeasible,
}

impl SystemParams {
    pub fn validate(&self, dims: &SystemDims) -> Result<()> {
        let check = |name: &str, ok: bool, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParam {
                    name: name.into(),
                    reason: reason.into(),
                })
            }
        };
        check("P_BS", self.p_bs >= 0.0, "must be >= 0")?;
        check("P_RIS_tot", self.p_ris_tot >= 0.0, "must be >= 0")?;
        check("W_BS", self.w_bs >= 0.0, "must be >= 0")?;
        check("W_PS", self.w_ps >= 0.0, "must be >= 0")?;
        check("W_PA", self.w_pa >= 0.0, "must be >= 0")?;
        check("nu1", self.nu1 > 0.0 && self.nu1 <= 1.0, "must lie in (0, 1]")?;
        check("nu2", self.nu2 > 0.0 && self.nu2 <= 1.0, "must lie in (0, 1]")?;
        check("sigma_z_sq", self.sigma_z_sq >= 0.0, "must be >= 0")?;
        check(
            "sigma_sq",
            self.sigma_sq.len() == dims.k && self.sigma_sq.iter().all(|&s| s > 0.0),
            "need one positive noise power per user",
        )?;
        check(
            "Gamma",
            self.gamma.is_empty() || (self.gamma.len() == dims.k && self.gamma.iter().all(|&g| g >= 0.0)),
            "need one nonnegative target per user",
        )?;
        Ok(())
    }

    pub fn static_ris_power(&self, dims: &SystemDims) -> f64 {
        dims.m as f64 * self.w_ps + dims.l as f64 * self.w_pa
    }

    /// Power available for amplification, `ν₂(P_tot − M·W_PS − L·W_PA)`.
    /// Negative when the static draw alone exceeds the budget.
    pub fn p_ris(&self, dims: &SystemDims) -> f64 {
        self.nu2 * (self.p_ris_tot - self.static_ris_power(dims))
    }

    pub fn ris_budget(&self, dims: &SystemDims) -> RisBudget {
        if self.p_ris(dims) < 0.0 {
            RisBudget::Infeasible
        } else {
            RisBudget::Feasible
        }
    }
}

/// Phase shifts `θ` (length M) and amplification factors `a` (length L).
#[derive(Clone, Debug, PartialEq)]
pub struct RisState {
    pub theta: CVector,
    pub a: RVector,
}

impl RisState {
    pub fn new(theta: CVector, a: RVector) -> Self {
        Self { theta, a }
    }

    pub fn check(&self, dims: &SystemDims) -> Result<()> {
        if self.theta.len() != dims.m || self.a.len() != dims.l {
            return Err(Error::Dimension(format!(
                "RIS state has |θ| = {}, |a| = {}, expected {} and {}",
                self.theta.len(),
                self.a.len(),
                dims.m,
                dims.l
            )));
        }
        Ok(())
    }

    pub fn max_modulus_error(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, z| m.max((z.norm() - 1.0).abs()))
    }
}

/// Ξ = (1/√Q)·EᵀAE and Ψ = diag(θ)·Ξ·diag(θ), both stored blockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionOperator {
    pub xi: BlockDiag,
    pub psi: BlockDiag,
    pub q: usize,
}

pub fn build_reflection_operator(state: &RisState, dims: &SystemDims) -> Result<ReflectionOperator> {
    state.check(dims)?;
    let q = dims.q;
    let s = 1.0 / (q as f64).sqrt();
    let mut xi = Vec::with_capacity(dims.l);
    let mut psi = Vec::with_capacity(dims.l);
    for l in 0..dims.l {
        let al = state.a[l] * s;
        xi.push(CMatrix::from_element(q, q, C64::new(al, 0.0)));
        let t = state.theta.rows(l * q, q);
        psi.push(CMatrix::from_fn(q, q, |i, j| t[i] * t[j] * al));
    }
    Ok(ReflectionOperator {
        xi: BlockDiag::from_blocks(xi),
        psi: BlockDiag::from_blocks(psi),
        q,
    })
}

/// ‖Ψ‖_F² for unit-modulus θ, in closed form `Q·Σ a_l²`.
pub fn ris_frobenius_power(a: &RVector, dims: &SystemDims) -> f64 {
    dims.q as f64 * a.norm_squared()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// BS→user channels, one N-vector per user.
    pub h_d: Vec<CVector>,
    /// BS→RIS channel, M×N.
    pub g: CMatrix,
    /// RIS→user channels, one M-vector per user.
    pub h_r: Vec<CVector>,
}

impl ChannelSet {
    pub fn check(&self, dims: &SystemDims) -> Result<()> {
        let ok = self.h_d.len() == dims.k
            && self.h_r.len() == dims.k
            && self.h_d.iter().all(|h| h.len() == dims.n)
            && self.h_r.iter().all(|h| h.len() == dims.m)
            && self.g.nrows() == dims.m
            && self.g.ncols() == dims.n;
        if !ok {
            return Err(Error::Dimension("channel set does not match dims".into()));
        }
        let finite = self
            .h_d
            .iter()
            .chain(self.h_r.iter())
            .flat_map(|h| h.iter())
            .chain(self.g.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::InvalidParam {
                name: "channels".into(),
                reason: "non-finite entry".into(),
            });
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.h_d.len()
    }
}

/// Transmit precoders `w_1 … w_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Precoder {
    pub w: Vec<CVector>,
}

impl Precoder {
    pub fn zeros(dims: &SystemDims) -> Self {
        Self {
            w: vec![CVector::zeros(dims.n); dims.k],
        }
    }

    /// `[w_1ᵀ, …, w_Kᵀ]ᵀ`
    pub fn stacked(&self) -> CVector {
        let n = self.w.first().map_or(0, |w| w.len());
        let mut out = CVector::zeros(n * self.w.len());
        for (i, w) in self.w.iter().enumerate() {
            out.rows_mut(i * n, n).copy_from(w);
        }
        out
    }

    pub fn from_stacked(x: &CVector, k: usize) -> Self {
        let n = x.len() / k;
        Self {
            w: (0..k).map(|i| x.rows(i * n, n).into_owned()).collect(),
        }
    }

    pub fn transmit_power(&self) -> f64 {
        self.w.iter().map(|w| w.norm_squared()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w: self.w.iter().map(|w| w * C64::new(s, 0.0)).collect(),
        }
    }
}

/// Composite channel `h_k = h_d,k + Gᴴ Ψᴴ h_r,k`.
pub fn composite_channel(k: usize, ch: &ChannelSet, op: &ReflectionOperator) -> CVector {
    let reflected = op.psi.adjoint().mul_vec(&ch.h_r[k]);
    &ch.h_d[k] + ch.g.adjoint() * reflected
}

pub fn composite_channels(ch: &ChannelSet, op: &ReflectionOperator) -> Vec<CVector> {
    let psi_h = op.psi.adjoint();
    let gh = ch.g.adjoint();
    ch.h_d
        .iter()
        .zip(ch.h_r.iter())
        .map(|(hd, hr)| hd + &gh * psi_h.mul_vec(hr))
        .collect()
}

/// `‖h_r,kᴴ Ψ‖² σ_z²`, the amplified RIS noise reaching user `k`.
pub fn ris_noise_at_user(k: usize, ch: &ChannelSet, op: &ReflectionOperator, sigma_z_sq: f64) -> f64 {
    op.psi.adjoint().mul_vec(&ch.h_r[k]).norm_squared() * sigma_z_sq
}

/// Per-user terms of the SINR: signal power and total interference-plus-noise.
#[derive(Clone, Debug)]
pub struct LinkBudget {
    /// `h_kᴴ w_i`, indexed `[k][i]`.
    pub gains: Vec<Vec<C64>>,
    /// `‖h_r,kᴴ Ψ‖² σ_z² + σ_k²`
    pub noise: Vec<f64>,
}

impl LinkBudget {
    pub fn new(ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder, params: &SystemParams) -> Self {
        let h = composite_channels(ch, op);
        let gains = h.iter().map(|hk| pre.w.iter().map(|w| hk.dotc(w)).collect()).collect();
        let noise = (0..ch.num_users())
            .map(|k| ris_noise_at_user(k, ch, op, params.sigma_z_sq) + params.sigma_sq[k])
            .collect();
        Self { gains, noise }
    }

    /// `Σ_i |h_kᴴw_i|² + noise_k`
    pub fn total_received(&self, k: usize) -> f64 {
        self.gains[k].iter().map(|g| g.norm_sqr()).sum::<f64>() + self.noise[k]
    }

    pub fn sinr(&self, k: usize) -> f64 {
        let s = self.gains[k][k].norm_sqr();
        let d = self.total_received(k) - s;
        if d > 0.0 {
            s / d
        } else if s == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn sinrs(&self) -> Vec<f64> {
        (0..self.gains.len()).map(|k| self.sinr(k)).collect()
    }

    pub fn sum_rate(&self) -> f64 {
        self.sinrs().iter().map(|g| (1.0 + g).log2()).sum()
    }
}

pub fn sinr(k: usize, ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder, params: &SystemParams) -> f64 {
    LinkBudget::new(ch, op, pre, params).sinr(k)
}

pub fn sinrs(ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder, params: &SystemParams) -> Vec<f64> {
    LinkBudget::new(ch, op, pre, params).sinrs()
}

/// Sum rate in bits/s/Hz.
pub fn sum_rate(ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder, params: &SystemParams) -> f64 {
    LinkBudget::new(ch, op, pre, params).sum_rate()
}

pub fn bs_power(pre: &Precoder, params: &SystemParams) -> f64 {
    pre.transmit_power() / params.nu1 + params.w_bs
}

/// `Σ_k ‖Ψ G w_k‖²`
pub fn reflect_power(ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder) -> f64 {
    pre.w.iter().map(|w| op.psi.mul_vec(&(&ch.g * w)).norm_squared()).sum()
}

/// `Σ_k ‖Ψ G w_k‖² + ‖Ψ‖_F² σ_z²`, the quantity bounded by `P_RIS`.
pub fn ris_dynamic_power(ch: &ChannelSet, op: &ReflectionOperator, pre: &Precoder, params: &SystemParams) -> f64 {
    reflect_power(ch, op, pre) + op.psi.frobenius_norm_sq() * params.sigma_z_sq
}

pub fn ris_power(
    ch: &ChannelSet,
    op: &ReflectionOperator,
    pre: &Precoder,
    params: &SystemParams,
    dims: &SystemDims,
) -> f64 {
    ris_dynamic_power(ch, op, pre, params) / params.nu2 + params.static_ris_power(dims)
}

/// The reflection operator with every amplifier switched off.
pub fn zero_operator(dims: &SystemDims) -> ReflectionOperator {
    ReflectionOperator {
        xi: BlockDiag::zeros(dims.l, dims.q),
        psi: BlockDiag::zeros(dims.l, dims.q),
        q: dims.q,
    }
}

pub fn unit_theta(m: usize) -> CVector {
    CVector::from_element(m, C64::new(1.0, 0.0))
}

pub fn zero_vector(n: usize) -> CVector {
    CVector::from_element(n, ZERO)
}
