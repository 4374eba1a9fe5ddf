//! Complex linear-algebra helpers shared by the model, surrogate and solver
//! layers.
//!
//! Every RIS-side matrix in this crate (Ξ, Ψ, the per-user cascaded blocks,
//! the quadratic forms of the θ and a subproblems) is block diagonal with one
//! Q×Q block per amplifier. [`BlockDiag`] stores only those blocks, and
//! [`StructuredMatrix`] adds a short list of rank-one `u·vᵀ` corrections on
//! top, which is exactly the shape of the majorized quartic term.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;
pub type RVector = DVector<f64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{j·phase}`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Entrywise projection onto the unit circle. Zero entries map to `1`.
pub fn project_unit_modulus(x: &CVector) -> CVector {
    x.map(|z| {
        let n = z.norm();
        if n > 0.0 {
            z / n
        } else {
            ONE
        }
    })
}

/// `xᵀ y` without conjugation.
pub fn dot_t(x: &CVector, y: &CVector) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// Block-diagonal complex matrix with equally sized square blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiag {
    blocks: Vec<CMatrix>,
}

impl BlockDiag {
    pub fn zeros(num_blocks: usize, block_size: usize) -> Self {
        Self {
            blocks: vec![CMatrix::zeros(block_size, block_size); num_blocks],
        }
    }

    pub fn identity(num_blocks: usize, block_size: usize) -> Self {
        Self {
            blocks: vec![CMatrix::identity(block_size, block_size); num_blocks],
        }
    }

    /// Diagonal matrix, one 1×1 block per entry.
    pub fn from_diagonal(d: &CVector) -> Self {
        Self {
            blocks: d.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<CMatrix>) -> Self {
        debug_assert!(!blocks.is_empty());
        let q = blocks[0].nrows();
        debug_assert!(blocks.iter().all(|b| b.nrows() == q && b.ncols() == q));
        Self { blocks }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn dim(&self) -> usize {
        self.num_blocks() * self.block_size()
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &CMatrix {
        &self.blocks[l]
    }

    pub fn block_mut(&mut self, l: usize) -> &mut CMatrix {
        &mut self.blocks[l]
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let q = self.block_size();
        let mut out = CVector::zeros(self.dim());
        for (l, b) in self.blocks.iter().enumerate() {
            let xs = x.rows(l * q, q);
            out.rows_mut(l * q, q).copy_from(&(b * xs));
        }
        out
    }

    pub fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        self.map_blocks(|b| b.transpose())
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|b| b.adjoint())
    }

    pub fn conjugate(&self) -> Self {
        self.map_blocks(|b| b.conjugate())
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.map_blocks(|b| b * s)
    }

    /// `self += s·other`
    pub fn axpy(&mut self, s: C64, other: &BlockDiag) {
        debug_assert_eq!(self.num_blocks(), other.num_blocks());
        for (a, b) in self.blocks.iter_mut().zip(other.blocks.iter()) {
            *a += b * s;
        }
    }

    pub fn add_identity(&mut self, s: f64) {
        for b in &mut self.blocks {
            for i in 0..b.nrows() {
                b[(i, i)] += C64::new(s, 0.0);
            }
        }
    }

    /// `xᴴ B x`
    pub fn quad_form(&self, x: &CVector) -> C64 {
        x.dotc(&self.mul_vec(x))
    }

    /// `xᵀ B x`
    pub fn quad_form_t(&self, x: &CVector) -> C64 {
        dot_t(x, &self.mul_vec(x))
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn to_dense(&self) -> CMatrix {
        let q = self.block_size();
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for (l, b) in self.blocks.iter().enumerate() {
            out.view_mut((l * q, l * q), (q, q)).copy_from(b);
        }
        out
    }
}

/// `coef · u vᵀ` (plain transpose, no conjugation).
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne {
    pub coef: C64,
    pub u: CVector,
    pub v: CVector,
}

/// Block-diagonal matrix plus a few rank-one corrections.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredMatrix {
    pub block: BlockDiag,
    pub terms: Vec<RankOne>,
}

impl StructuredMatrix {
    pub fn from_block(block: BlockDiag) -> Self {
        Self {
            block,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.block.dim()
    }

    pub fn push_rank_one(&mut self, coef: C64, u: CVector, v: CVector) {
        self.terms.push(RankOne { coef, u, v });
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let mut out = self.block.mul_vec(x);
        for t in &self.terms {
            let s = t.coef * dot_t(&t.v, x);
            out.axpy(s, &t.u, ONE);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self {
            block: self.block.transpose(),
            terms: self
                .terms
                .iter()
                .map(|t| RankOne {
                    coef: t.coef,
                    u: t.v.clone(),
                    v: t.u.clone(),
                })
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            block: self.block.adjoint(),
            terms: self
                .terms
                .iter()
                .map(|t| RankOne {
                    coef: t.coef.conj(),
                    u: t.v.conjugate(),
                    v: t.u.conjugate(),
                })
                .collect(),
        }
    }

    /// `self + selfᵀ`
    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let mut block = self.block.clone();
        block.axpy(ONE, &t.block);
        let mut terms = self.terms.clone();
        terms.extend(t.terms);
        Self { block, terms }
    }

    /// `Re{xᴴ S x*}`, the real-valued form used by the θ surrogates.
    pub fn re_conj_form(&self, x: &CVector) -> f64 {
        x.dotc(&self.mul_vec(&x.conjugate())).re
    }

    /// Triangle-inequality bound on the spectral norm.
    pub fn frobenius_bound(&self) -> f64 {
        self.block.frobenius_norm_sq().sqrt()
            + self
                .terms
                .iter()
                .map(|t| t.coef.norm() * t.u.norm() * t.v.norm())
                .sum::<f64>()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = self.block.to_dense();
        for t in &self.terms {
            out += (&t.u * t.v.transpose()) * t.coef;
        }
        out
    }
}

/// Result of the largest-singular-value estimate.
#[derive(Clone, Debug)]
pub struct SpectralEstimate {
    pub value: f64,
    pub vector: CVector,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of `op` by power iteration on `opᴴ op`.
///
/// For a complex symmetric `S` this equals the largest eigenvalue of the
/// realified matrix `[[Re S, Im S], [Im S, -Re S]]`. On convergence the
/// returned value is `sqrt(ρ + ‖r‖)` with `ρ` the Rayleigh quotient and `r`
/// its residual; otherwise it falls back to [`StructuredMatrix::frobenius_bound`].
pub fn largest_singular_value(
    op: &StructuredMatrix,
    start: Option<&CVector>,
    tol: f64,
    max_iter: usize,
) -> SpectralEstimate {
    let n = op.dim();
    let adj = op.adjoint();
    let mut x = match start {
        Some(s) if s.len() == n && s.norm() > 0.0 => s.clone(),
        _ => CVector::from_fn(n, |i, _| c(1.0 + 0.1 * i as f64, 0.3 - 0.05 * i as f64)),
    };
    let nx = x.norm();
    if nx == 0.0 {
        return SpectralEstimate {
            value: 0.0,
            vector: x,
            iterations: 0,
            converged: true,
        };
    }
    x /= C64::new(nx, 0.0);
    let mut rho = 0.0;
    for it in 1..=max_iter {
        let y = adj.mul_vec(&op.mul_vec(&x));
        rho = x.dotc(&y).re;
        let r = &y - &x * C64::new(rho, 0.0);
        let rn = r.norm();
        let yn = y.norm();
        if yn == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                vector: x,
                iterations: it,
                converged: true,
            };
        }
        if rn <= tol * rho.abs().max(f64::MIN_POSITIVE) {
            return SpectralEstimate {
                value: (rho + rn).max(0.0).sqrt(),
                vector: x,
                iterations: it,
                converged: true,
            };
        }
        x = y / C64::new(yn, 0.0);
    }
    let bound = op.frobenius_bound();
    SpectralEstimate {
        value: bound.max(rho.max(0.0).sqrt()),
        vector: x,
        iterations: max_iter,
        converged: false,
    }
}

/// Realified form `[[Re S, Im S], [Im S, -Re S]]` so that
/// `θ̄ᵀ S̄ θ̄ = Re{θᴴ S θ*}` with `θ̄ = [Re θ; Im θ]`.
pub fn realify_conj_form(s: &CMatrix) -> RMatrix {
    let n = s.nrows();
    let mut out = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = s[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + n)] = z.im;
            out[(i + n, j)] = z.im;
            out[(i + n, j + n)] = -z.re;
        }
    }
    out
}

/// `[Re x; Im x]`
pub fn stack_re_im(x: &CVector) -> RVector {
    let n = x.len();
    RVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`stack_re_im`].
pub fn unstack_re_im(x: &RVector) -> CVector {
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| c(x[i], x[i + n]))
}

/// Interleaved realification `[Re x₀, Im x₀, Re x₁, …]`, which keeps
/// block-diagonal structure contiguous.
pub fn interleave(x: &CVector) -> RVector {
    RVector::from_fn(2 * x.len(), |i, _| {
        let z = x[i / 2];
        if i % 2 == 0 {
            z.re
        } else {
            z.im
        }
    })
}

pub fn deinterleave(x: &RVector) -> CVector {
    CVector::from_fn(x.len() / 2, |i, _| c(x[2 * i], x[2 * i + 1]))
}

/// Real 2n×2n matrix `H` (interleaved ordering) with `x̄ᵀ H x̄ = xᴴ A x` for
/// Hermitian `A`.
pub fn realify_hermitian_interleaved(a: &CMatrix) -> RMatrix {
    let n = a.nrows();
    let mut out = RMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    // symmetrize away round-off in the Hermitian input
    let t = out.transpose();
    (out + t) * 0.5
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    (a - a.adjoint()).iter().all(|z| z.norm() <= tol * scale)
}

/// Smallest eigenvalue of a Hermitian matrix (dense, for checks).
pub fn min_eigenvalue_hermitian(a: &CMatrix) -> f64 {
    let h = hermitian_part(a);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}
