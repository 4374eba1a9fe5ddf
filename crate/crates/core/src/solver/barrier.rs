//! Logarithmic-barrier interior-point method for small dense convex problems
//!
//! ```text
//! min  xᵀHx + gᵀx
//! s.t. xᵀA_j x + b_jᵀx + c_j ≤ 0          (convex quadratic)
//!      ‖v_s(x)‖ ≤ f_sᵀx + h_s              (second-order cone)
//!      x_i² + x_j² ≤ r²,  x_i ≥ lb          (local: disks, lower bounds)
//! ```
//!
//! Variables are partitioned into contiguous blocks. Every Hessian that shows
//! up is block diagonal plus a handful of signed rank-one terms, so Newton
//! systems are solved with per-block Cholesky factors and a Woodbury
//! correction; a dense factorization is the fallback.
//!
//! Coefficients are normalized internally (objective and each coupling
//! constraint divided by its largest coefficient, optional variable scale),
//! so tolerances are relative. A phase-I problem with one slack variable
//! finds a strictly feasible start when the given one is not.

use nalgebra::{Cholesky, Dyn, LU};

use super::{SolveReport, SolverOptions, Status};
use crate::linalg::{RMatrix, RVector};

/// Contiguous partition of the variable vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut owner = Vec::new();
        let mut off = 0;
        for (b, &s) in sizes.iter().enumerate() {
            offsets.push(off);
            off += s;
            owner.extend(std::iter::repeat_n(b, s));
        }
        Self { sizes, offsets, owner }
    }

    pub fn single(n: usize) -> Self {
        Self::new(vec![n])
    }

    pub fn uniform(blocks: usize, size: usize) -> Self {
        Self::new(vec![size; blocks])
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn offset(&self, b: usize) -> usize {
        self.offsets[b]
    }

    pub fn size(&self, b: usize) -> usize {
        self.sizes[b]
    }

    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }

    fn appended(&self, extra: usize) -> Self {
        let mut sizes = self.sizes.clone();
        sizes.push(extra);
        Self::new(sizes)
    }
}

/// Symmetric matrix stored as diagonal blocks (aligned with a [`Partition`],
/// `None` meaning zero) plus `Σ c·u uᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymOp {
    pub blocks: Vec<Option<RMatrix>>,
    pub lowrank: Vec<(f64, RVector)>,
}

impl SymOp {
    pub fn zeros(part: &Partition) -> Self {
        Self {
            blocks: vec![None; part.num_blocks()],
            lowrank: Vec::new(),
        }
    }

    pub fn from_blocks(blocks: Vec<RMatrix>) -> Self {
        Self {
            blocks: blocks.into_iter().map(Some).collect(),
            lowrank: Vec::new(),
        }
    }

    pub fn mul(&self, part: &Partition, x: &RVector) -> RVector {
        let mut out = RVector::zeros(x.len());
        for (b, blk) in self.blocks.iter().enumerate() {
            if let Some(m) = blk {
                let (o, s) = (part.offset(b), part.size(b));
                out.rows_mut(o, s).gemv(1.0, m, &x.rows(o, s), 0.0);
            }
        }
        for (c, u) in &self.lowrank {
            out.axpy(c * u.dot(x), u, 1.0);
        }
        out
    }

    pub fn quad(&self, part: &Partition, x: &RVector) -> f64 {
        x.dot(&self.mul(part, x))
    }

    pub fn scale(&mut self, s: f64) {
        for m in self.blocks.iter_mut().flatten() {
            *m *= s;
        }
        for (c, _) in &mut self.lowrank {
            *c *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        let b = self
            .blocks
            .iter()
            .flatten()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        self.lowrank
            .iter()
            .fold(b, |a, (c, u)| a.max(c.abs() * u.amax().powi(2)))
    }

    pub fn to_dense(&self, part: &Partition) -> RMatrix {
        let n = part.n();
        let mut out = RMatrix::zeros(n, n);
        for (b, blk) in self.blocks.iter().enumerate() {
            if let Some(m) = blk {
                let (o, s) = (part.offset(b), part.size(b));
                out.view_mut((o, o), (s, s)).copy_from(m);
            }
        }
        for (c, u) in &self.lowrank {
            out.ger(*c, u, u, 1.0);
        }
        out
    }

    fn extended(&self, extra: usize) -> Self {
        let mut blocks = self.blocks.clone();
        blocks.push(None);
        Self {
            blocks,
            lowrank: self.lowrank.iter().map(|(c, u)| (*c, extend(u, extra))).collect(),
        }
    }
}

fn extend(u: &RVector, extra: usize) -> RVector {
    let mut out = RVector::zeros(u.len() + extra);
    out.rows_mut(0, u.len()).copy_from(u);
    out
}

/// `xᵀA x + bᵀx + c ≤ 0` with `A` positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadIneq {
    pub a: SymOp,
    pub b: RVector,
    pub c: f64,
}

impl QuadIneq {
    pub fn value(&self, part: &Partition, x: &RVector) -> f64 {
        self.a.quad(part, x) + self.b.dot(x) + self.c
    }

    pub fn gradient(&self, part: &Partition, x: &RVector) -> RVector {
        self.a.mul(part, x) * 2.0 + &self.b
    }
}

/// `‖[rows·x + rows_off; (scale_i·x_idx_i)_i; constant]‖ ≤ fᵀx + h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocIneq {
    pub rows: RMatrix,
    pub rows_off: RVector,
    pub diag: Vec<(usize, f64)>,
    pub constant: f64,
    pub f: RVector,
    pub h: f64,
}

impl SocIneq {
    pub fn new(n: usize) -> Self {
        Self {
            rows: RMatrix::zeros(0, n),
            rows_off: RVector::zeros(0),
            diag: Vec::new(),
            constant: 0.0,
            f: RVector::zeros(n),
            h: 0.0,
        }
    }

    /// Returns `(u, dense part of v, ‖v‖²)`.
    pub fn parts(&self, x: &RVector) -> (f64, RVector, f64) {
        let u = self.f.dot(x) + self.h;
        let vd = &self.rows * x + &self.rows_off;
        let mut nv = vd.norm_squared() + self.constant * self.constant;
        for &(i, s) in &self.diag {
            nv += (s * x[i]).powi(2);
        }
        (u, vd, nv)
    }

    /// `‖v‖ − u`, negative when strictly feasible.
    pub fn violation(&self, x: &RVector) -> f64 {
        let (u, _, nv) = self.parts(x);
        nv.sqrt() - u
    }

    /// Gradient of `‖v‖² − u²`.
    pub fn gradient_sq(&self, x: &RVector) -> RVector {
        let (u, vd, _) = self.parts(x);
        let mut g = self.rows.tr_mul(&vd) * 2.0 - &self.f * (2.0 * u);
        for &(i, s) in &self.diag {
            g[i] += 2.0 * s * s * x[i];
        }
        g
    }

    fn scale(&mut self, s: f64) {
        self.rows *= s;
        self.rows_off *= s;
        for d in &mut self.diag {
            d.1 *= s;
        }
        self.constant *= s;
        self.f *= s;
        self.h *= s;
    }

    fn scale_variable(&mut self, sx: f64) {
        self.rows *= sx;
        for d in &mut self.diag {
            d.1 *= sx;
        }
        self.f *= sx;
    }

    fn max_abs(&self) -> f64 {
        let m = self
            .rows
            .amax()
            .max(self.f.amax())
            .max(self.h.abs())
            .max(self.constant.abs());
        let m = if self.rows_off.is_empty() {
            m
        } else {
            m.max(self.rows_off.amax())
        };
        self.diag.iter().fold(m, |a, d| a.max(d.1.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub i: usize,
    pub j: usize,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierProblem {
    pub part: Partition,
    pub h: SymOp,
    pub g: RVector,
    pub quads: Vec<QuadIneq>,
    pub socs: Vec<SocIneq>,
    pub disks: Vec<Disk>,
    pub lower: Vec<(usize, f64)>,
}

impl BarrierProblem {
    pub fn new(part: Partition, h: SymOp, g: RVector) -> Self {
        Self {
            part,
            h,
            g,
            quads: Vec::new(),
            socs: Vec::new(),
            disks: Vec::new(),
            lower: Vec::new(),
        }
    }

    pub fn objective(&self, x: &RVector) -> f64 {
        self.h.quad(&self.part, x) + self.g.dot(x)
    }

    pub fn objective_gradient(&self, x: &RVector) -> RVector {
        self.h.mul(&self.part, x) * 2.0 + &self.g
    }

    /// Largest constraint violation (positive when infeasible).
    pub fn max_violation(&self, x: &RVector) -> f64 {
        let mut v = f64::NEG_INFINITY;
        for q in &self.quads {
            v = v.max(q.value(&self.part, x));
        }
        for s in &self.socs {
            v = v.max(s.violation(x));
        }
        for d in &self.disks {
            v = v.max(x[d.i].powi(2) + x[d.j].powi(2) - d.r * d.r);
        }
        for &(i, lb) in &self.lower {
            v = v.max(lb - x[i]);
        }
        v
    }

    fn barrier_weight(&self) -> f64 {
        (self.quads.len() + 2 * self.socs.len() + self.disks.len() + self.lower.len()) as f64
    }
}

/// Extra options for the barrier engine.
#[derive(Clone, Copy, Debug)]
pub struct BarrierOptions {
    pub solver: SolverOptions,
    /// Typical magnitude of the variables.
    pub x_scale: f64,
    pub t0: f64,
}

impl From<SolverOptions> for BarrierOptions {
    fn from(solver: SolverOptions) -> Self {
        Self {
            solver,
            x_scale: 1.0,
            t0: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierResult {
    pub x: RVector,
    pub report: SolveReport,
    /// Multipliers of disks followed by lower bounds, in original units.
    pub local_multipliers: Vec<f64>,
    /// Relative norm of the Lagrangian gradient with the reported multipliers.
    pub stationarity: f64,
}

struct Scaled {
    prob: BarrierProblem,
    sx: f64,
    sigma0: f64,
    sigma: Vec<f64>,
}

fn normalize(prob: &BarrierProblem, sx: f64) -> Scaled {
    let mut p = prob.clone();
    p.h.scale(sx * sx);
    p.g *= sx;
    let sigma0 = nonzero(p.h.max_abs().max(p.g.amax()));
    p.h.scale(1.0 / sigma0);
    p.g /= sigma0;
    let mut sigma = Vec::new();
    for q in &mut p.quads {
        q.a.scale(sx * sx);
        q.b *= sx;
        let s = nonzero(q.a.max_abs().max(q.b.amax()).max(q.c.abs()));
        q.a.scale(1.0 / s);
        q.b /= s;
        q.c /= s;
        sigma.push(s);
    }
    for c in &mut p.socs {
        c.scale_variable(sx);
        let s = nonzero(c.max_abs());
        c.scale(1.0 / s);
        sigma.push(s * s);
    }
    for d in &mut p.disks {
        d.r /= sx;
    }
    for l in &mut p.lower {
        l.1 /= sx;
    }
    Scaled {
        prob: p,
        sx,
        sigma0,
        sigma,
    }
}

fn nonzero(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

/// Barrier arguments at a strictly interior point.
struct Eval {
    quad: Vec<f64>,
    soc: Vec<(f64, RVector, f64)>,
    disk: Vec<f64>,
    lower: Vec<f64>,
}

fn evaluate(p: &BarrierProblem, x: &RVector) -> Option<Eval> {
    let mut quad = Vec::with_capacity(p.quads.len());
    for q in &p.quads {
        let v = q.value(&p.part, x);
        if !(v < 0.0) {
            return None;
        }
        quad.push(v);
    }
    let mut soc = Vec::with_capacity(p.socs.len());
    for s in &p.socs {
        let (u, vd, nv) = s.parts(x);
        let phi = u * u - nv;
        if !(u > 0.0 && phi > 0.0) {
            return None;
        }
        soc.push((u, vd, phi));
    }
    let mut disk = Vec::with_capacity(p.disks.len());
    for d in &p.disks {
        let s = d.r * d.r - x[d.i].powi(2) - x[d.j].powi(2);
        if !(s > 0.0) {
            return None;
        }
        disk.push(s);
    }
    let mut lower = Vec::with_capacity(p.lower.len());
    for &(i, lb) in &p.lower {
        let s = x[i] - lb;
        if !(s > 0.0) {
            return None;
        }
        lower.push(s);
    }
    Some(Eval { quad, soc, disk, lower })
}

fn psi(p: &BarrierProblem, x: &RVector, t: f64, e: &Eval) -> f64 {
    let mut v = t * p.objective(x);
    v -= e.quad.iter().map(|f| (-f).ln()).sum::<f64>();
    v -= e.soc.iter().map(|s| s.2.ln()).sum::<f64>();
    v -= e.disk.iter().map(|s| s.ln()).sum::<f64>();
    v -= e.lower.iter().map(|s| s.ln()).sum::<f64>();
    v
}

/// Gradient of the barrier terms only.
fn barrier_gradient(p: &BarrierProblem, x: &RVector, e: &Eval) -> RVector {
    let mut g = RVector::zeros(x.len());
    for (q, f) in p.quads.iter().zip(&e.quad) {
        g.axpy(1.0 / -f, &q.gradient(&p.part, x), 1.0);
    }
    for (s, (_, _, phi)) in p.socs.iter().zip(&e.soc) {
        // -∇log(u² − ‖v‖²) = ∇(‖v‖² − u²)/φ
        g.axpy(1.0 / phi, &s.gradient_sq(x), 1.0);
    }
    for (d, s) in p.disks.iter().zip(&e.disk) {
        g[d.i] += 2.0 * x[d.i] / s;
        g[d.j] += 2.0 * x[d.j] / s;
    }
    for (&(i, _), s) in p.lower.iter().zip(&e.lower) {
        g[i] -= 1.0 / s;
    }
    g
}

struct Hessian {
    blocks: Vec<RMatrix>,
    lowrank: Vec<(f64, RVector)>,
}

fn hessian(p: &BarrierProblem, x: &RVector, t: f64, e: &Eval, row_owner: &[Vec<Option<usize>>]) -> Hessian {
    let part = &p.part;
    let mut blocks: Vec<RMatrix> = (0..part.num_blocks())
        .map(|b| match &p.h.blocks[b] {
            Some(m) => m * (2.0 * t),
            None => RMatrix::zeros(part.size(b), part.size(b)),
        })
        .collect();
    let mut lowrank: Vec<(f64, RVector)> = p.h.lowrank.iter().map(|(c, u)| (2.0 * t * c, u.clone())).collect();
    for (q, f) in p.quads.iter().zip(&e.quad) {
        let w = 1.0 / -f;
        let gq = q.gradient(&p.part, x);
        lowrank.push((w * w, gq));
        for (b, blk) in q.a.blocks.iter().enumerate() {
            if let Some(m) = blk {
                blocks[b] += m * (2.0 * w);
            }
        }
        for (c, u) in &q.a.lowrank {
            lowrank.push((2.0 * w * c, u.clone()));
        }
    }
    for ((s, (_, _, phi)), owners) in p.socs.iter().zip(&e.soc).zip(row_owner) {
        let gs = s.gradient_sq(x);
        lowrank.push((1.0 / (phi * phi), gs));
        lowrank.push((-2.0 / phi, s.f.clone()));
        for (r, owner) in owners.iter().enumerate() {
            let row = s.rows.row(r).transpose();
            match owner {
                Some(b) => {
                    let (o, sz) = (part.offset(*b), part.size(*b));
                    let seg = row.rows(o, sz);
                    blocks[*b].ger(2.0 / phi, &seg, &seg, 1.0);
                }
                None => lowrank.push((2.0 / phi, row)),
            }
        }
        for &(i, sc) in &s.diag {
            let b = part.owner(i);
            let li = i - part.offset(b);
            blocks[b][(li, li)] += 2.0 * sc * sc / phi;
        }
    }
    for (d, s) in p.disks.iter().zip(&e.disk) {
        let b = part.owner(d.i);
        let o = part.offset(b);
        let (i, j) = (d.i - o, d.j - o);
        let (xi, xj) = (x[d.i], x[d.j]);
        // ∇²(−log s) = ∇s∇sᵀ/s² − ∇²s/s with ∇s = −2(xi, xj), ∇²s = −2I
        let m = &mut blocks[b];
        m[(i, i)] += 4.0 * xi * xi / (s * s) + 2.0 / s;
        m[(j, j)] += 4.0 * xj * xj / (s * s) + 2.0 / s;
        m[(i, j)] += 4.0 * xi * xj / (s * s);
        m[(j, i)] += 4.0 * xi * xj / (s * s);
    }
    for (&(i, _), s) in p.lower.iter().zip(&e.lower) {
        let b = part.owner(i);
        let li = i - part.offset(b);
        blocks[b][(li, li)] += 1.0 / (s * s);
    }
    Hessian { blocks, lowrank }
}

fn cholesky_jittered(m: &RMatrix) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1e-300);
    let mut eps = 1e-14 * scale;
    for _ in 0..12 {
        let mut j = m.clone();
        for i in 0..j.nrows() {
            j[(i, i)] += eps;
        }
        if let Some(c) = Cholesky::new(j) {
            return Some(c);
        }
        eps *= 10.0;
    }
    None
}

fn dense_hessian(part: &Partition, h: &Hessian) -> RMatrix {
    let n = part.n();
    let mut out = RMatrix::zeros(n, n);
    for (b, m) in h.blocks.iter().enumerate() {
        let (o, s) = (part.offset(b), part.size(b));
        out.view_mut((o, o), (s, s)).copy_from(m);
    }
    for (c, u) in &h.lowrank {
        out.ger(*c, u, u, 1.0);
    }
    out
}

fn apply_hessian(part: &Partition, h: &Hessian, x: &RVector) -> RVector {
    let mut out = RVector::zeros(x.len());
    for (b, m) in h.blocks.iter().enumerate() {
        let (o, s) = (part.offset(b), part.size(b));
        out.rows_mut(o, s).gemv(1.0, m, &x.rows(o, s), 0.0);
    }
    for (c, u) in &h.lowrank {
        out.axpy(c * u.dot(x), u, 1.0);
    }
    out
}

fn solve_dense(part: &Partition, h: &Hessian, rhs: &RVector) -> Option<RVector> {
    let chol = cholesky_jittered(&dense_hessian(part, h))?;
    Some(chol.solve(rhs))
}

/// Solves `(B + Σ c u uᵀ) x = rhs` by block Cholesky and Woodbury.
fn solve_newton(part: &Partition, h: &Hessian, rhs: &RVector) -> Option<RVector> {
    let n = part.n();
    let r = h.lowrank.len();
    if part.num_blocks() == 1 || 3 * r >= n {
        return solve_dense(part, h, rhs);
    }
    let mut factors = Vec::with_capacity(h.blocks.len());
    for m in &h.blocks {
        factors.push(cholesky_jittered(m)?);
    }
    let bsolve = |v: &RVector| -> RVector {
        let mut out = RVector::zeros(n);
        for (b, f) in factors.iter().enumerate() {
            let (o, s) = (part.offset(b), part.size(b));
            out.rows_mut(o, s).copy_from(&f.solve(&v.rows(o, s).into_owned()));
        }
        out
    };
    let y = bsolve(rhs);
    let mut x = y.clone();
    if r > 0 {
        let w: Vec<RVector> = h.lowrank.iter().map(|(_, u)| bsolve(u)).collect();
        let mut m = RMatrix::identity(r, r);
        for i in 0..r {
            let (ci, ui) = (&h.lowrank[i].0, &h.lowrank[i].1);
            for (j, wj) in w.iter().enumerate() {
                m[(i, j)] += ci * ui.dot(wj);
            }
        }
        let z_rhs = RVector::from_fn(r, |i, _| h.lowrank[i].0 * h.lowrank[i].1.dot(&y));
        let z = LU::new(m).solve(&z_rhs)?;
        for (wj, zj) in w.iter().zip(z.iter()) {
            x.axpy(-zj, wj, 1.0);
        }
    }
    let res = apply_hessian(part, h, &x) - rhs;
    if res.norm() <= 1e-9 * rhs.norm().max(1e-300) && x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        solve_dense(part, h, rhs).or(Some(x).filter(|x| x.iter().all(|v| v.is_finite())))
    }
}

fn soc_row_owners(p: &BarrierProblem) -> Vec<Vec<Option<usize>>> {
    p.socs
        .iter()
        .map(|s| {
            (0..s.rows.nrows())
                .map(|r| {
                    let mut owner = None;
                    for (j, v) in s.rows.row(r).iter().enumerate() {
                        if *v != 0.0 {
                            let b = p.part.owner(j);
                            match owner {
                                None => owner = Some(b),
                                Some(o) if o != b => return None,
                                _ => {}
                            }
                        }
                    }
                    Some(owner.unwrap_or(0))
                })
                .collect()
        })
        .collect()
}

struct PathOutcome {
    x: RVector,
    t: f64,
    newton: usize,
    /// Squared Newton decrement at `x` for the final `t`.
    dec2: f64,
    converged: bool,
    stopped_early: bool,
}

/// Follows the central path from a strictly feasible `x0` of the normalized
/// problem. `early_stop` lets phase I quit as soon as the slack goes negative.
fn follow_path(
    p: &BarrierProblem,
    x0: RVector,
    opts: &BarrierOptions,
    early_stop: Option<&dyn Fn(&RVector) -> bool>,
) -> PathOutcome {
    let nu = p.barrier_weight();
    let owners = soc_row_owners(p);
    let mut out = PathOutcome {
        x: x0,
        t: opts.t0.max(1e-12),
        newton: 0,
        dec2: f64::INFINITY,
        converged: false,
        stopped_early: false,
    };
    let tol = opts.solver.kkt_tol;
    loop {
        // centering; tight only once the gap target is met
        let t = out.t;
        let final_stage = nu == 0.0 || nu / t <= 0.5 * tol * (1.0 + p.objective(&out.x).abs());
        let dec_tol = if final_stage { 1e-20 } else { 1e-6 };
        let mut stalled = false;
        let mut best: Option<(f64, RVector)> = None;
        let mut no_progress = 0;
        for _ in 0..60 {
            if out.newton >= opts.solver.max_iter {
                return out;
            }
            let x = &out.x;
            let e = match evaluate(p, x) {
                Some(e) => e,
                None => break,
            };
            let grad = p.objective_gradient(x) * t + barrier_gradient(p, x, &e);
            let hess = hessian(p, x, t, &e, &owners);
            let dx = match solve_newton(&p.part, &hess, &(-&grad)) {
                Some(d) => d,
                None => {
                    stalled = true;
                    break;
                }
            };
            out.newton += 1;
            let dec2 = (-grad.dot(&dx)).max(0.0);
            out.dec2 = dec2;
            if let Some((bd, _)) = &best {
                if dec2 < 1e-8 && dec2 >= 0.5 * bd {
                    no_progress += 1;
                } else {
                    no_progress = 0;
                }
            }
            if best.as_ref().is_none_or(|(bd, _)| dec2 < *bd) {
                best = Some((dec2, x.clone()));
            }
            // round-off floor: Newton steps no longer reduce the decrement
            if dec2 <= dec_tol || no_progress >= 3 {
                break;
            }
            let f0 = psi(p, x, t, &e);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let xn = x + &dx * alpha;
                if let Some(en) = evaluate(p, &xn) {
                    let fn_ = psi(p, &xn, t, &en);
                    if fn_ <= f0 - 0.01 * alpha * dec2 || (dec2 < 1e-6 && alpha == 1.0) {
                        out.x = xn;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if let Some(stop) = early_stop {
                if stop(&out.x) {
                    out.converged = true;
                    out.stopped_early = true;
                    return out;
                }
            }
            if !accepted {
                stalled = true;
                break;
            }
        }
        if let Some((bd, bx)) = best {
            if bd < out.dec2 {
                out.x = bx;
                out.dec2 = bd;
            }
        }
        if final_stage || (stalled && nu / t <= 1e3 * tol * (1.0 + p.objective(&out.x).abs())) {
            out.converged = true;
            return out;
        }
        out.t *= opts.solver.barrier_mu;
        if out.t > 1e30 {
            return out;
        }
    }
}

/// Pulls `x` strictly inside the local constraints.
fn clip_local(p: &BarrierProblem, x: &mut RVector) {
    for d in &p.disks {
        let r2 = x[d.i].powi(2) + x[d.j].powi(2);
        let lim = 0.99 * d.r;
        if r2 > lim * lim {
            let s = lim / r2.sqrt();
            x[d.i] *= s;
            x[d.j] *= s;
        }
    }
    for &(i, lb) in &p.lower {
        let margin = 1e-3 * (1.0 + lb.abs());
        if x[i] < lb + margin {
            x[i] = lb + margin;
        }
    }
}

fn coupling_violation(p: &BarrierProblem, x: &RVector) -> f64 {
    let mut v = f64::NEG_INFINITY;
    for q in &p.quads {
        v = v.max(q.value(&p.part, x));
    }
    for s in &p.socs {
        let (u, _, nv) = s.parts(x);
        v = v.max(nv.sqrt() - u);
    }
    v
}

/// Phase I: minimize a slack `s` with every coupling constraint relaxed by
/// `s`. Returns a strictly feasible point, or `None` when the slack cannot
/// be pushed below zero.
fn phase_one(p: &BarrierProblem, x0: &RVector, opts: &BarrierOptions) -> (Option<RVector>, usize, RVector) {
    let n = p.part.n();
    let part = p.part.appended(1);
    let viol = coupling_violation(p, x0);
    let s0 = viol.max(0.0) + 1.0;
    let eps = 1e-8;
    let mut h = SymOp::zeros(&part);
    for b in 0..p.part.num_blocks() {
        h.blocks[b] = Some(RMatrix::identity(p.part.size(b), p.part.size(b)) * eps);
    }
    let mut g = RVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&(x0 * (-2.0 * eps)));
    g[n] = 1.0;
    let mut q1 = BarrierProblem::new(part, h, g);
    for q in &p.quads {
        let mut b = extend(&q.b, 1);
        b[n] = -1.0;
        q1.quads.push(QuadIneq {
            a: q.a.extended(1),
            b,
            c: q.c,
        });
    }
    for s in &p.socs {
        let mut rows = RMatrix::zeros(s.rows.nrows(), n + 1);
        rows.view_mut((0, 0), (s.rows.nrows(), n)).copy_from(&s.rows);
        let mut f = extend(&s.f, 1);
        f[n] = 1.0;
        q1.socs.push(SocIneq {
            rows,
            rows_off: s.rows_off.clone(),
            diag: s.diag.clone(),
            constant: s.constant,
            f,
            h: s.h,
        });
    }
    q1.disks = p.disks.clone();
    q1.lower = p.lower.clone();
    q1.lower.push((n, -s0 - 1.0));
    let mut z0 = extend(x0, 1);
    z0[n] = s0;
    let stop = |z: &RVector| {
        let x = z.rows(0, n).into_owned();
        coupling_violation(p, &x) < 0.0 && evaluate(p, &x).is_some()
    };
    let mut o = *opts;
    o.t0 = 1.0;
    let out = follow_path(&q1, z0, &o, Some(&stop));
    let x = out.x.rows(0, n).into_owned();
    if out.stopped_early {
        (Some(x), out.newton, out.x)
    } else {
        (None, out.newton, out.x)
    }
}

/// Solves the problem from `x0`, running phase I first if `x0` is not
/// strictly feasible.
pub fn solve(prob: &BarrierProblem, x0: &RVector, opts: &BarrierOptions) -> BarrierResult {
    let sc = normalize(prob, opts.x_scale);
    let p = &sc.prob;
    let mut x = x0 / sc.sx;
    clip_local(p, &mut x);
    let mut iterations = 0;
    if evaluate(p, &x).is_none() {
        let (found, it, _) = phase_one(p, &x, opts);
        iterations += it;
        match found {
            Some(xf) => x = xf,
            None => {
                // keep the least-violating point as a certificate
                let xr = x * sc.sx;
                let objective = prob.objective(&xr);
                let mut report = SolveReport::infeasible(objective);
                report.iterations = iterations;
                return BarrierResult {
                    x: xr,
                    report,
                    local_multipliers: Vec::new(),
                    stationarity: f64::INFINITY,
                };
            }
        }
    }
    let out = follow_path(p, x, opts, None);
    iterations += out.newton;
    let x = out.x;
    let t = out.t;
    let e = evaluate(p, &x).expect("central path stays interior");
    let nu = p.barrier_weight();
    // multipliers of the normalized problem: λ = 1/(t·slack)
    let lam_quad: Vec<f64> = e.quad.iter().map(|f| 1.0 / (t * -f)).collect();
    let lam_soc: Vec<f64> = e.soc.iter().map(|s| 1.0 / (t * s.2)).collect();
    let lam_disk: Vec<f64> = e.disk.iter().map(|s| 1.0 / (t * s)).collect();
    let lam_lower: Vec<f64> = e.lower.iter().map(|s| 1.0 / (t * s)).collect();
    let g0 = p.objective_gradient(&x);
    let mut station = g0.clone();
    // largest single term, so stationarity is judged relative to what cancels
    let mut term = g0.norm();
    for (q, l) in p.quads.iter().zip(&lam_quad) {
        let gq = q.gradient(&p.part, &x) * *l;
        term = term.max(gq.norm());
        station += gq;
    }
    for (s, l) in p.socs.iter().zip(&lam_soc) {
        let gs = s.gradient_sq(&x) * *l;
        term = term.max(gs.norm());
        station += gs;
    }
    for (d, l) in p.disks.iter().zip(&lam_disk) {
        station[d.i] += 2.0 * l * x[d.i];
        station[d.j] += 2.0 * l * x[d.j];
        term = term.max(2.0 * l * d.r);
    }
    for (&(i, _), l) in p.lower.iter().zip(&lam_lower) {
        station[i] -= l;
        term = term.max(*l);
    }
    let f0 = p.objective(&x);
    let stat = station.norm() / (1.0 + term);
    // suboptimality bound of an approximately centered point
    let lam = out.dec2.sqrt();
    let centering = if lam < 1.0 {
        (lam + nu.sqrt()) * lam / (1.0 - lam)
    } else {
        f64::INFINITY
    };
    let gap = (nu + centering) / t / (1.0 + f0.abs());
    let viol = p.max_violation(&x).max(0.0);
    let kkt = gap.max(viol);
    let status = if out.converged && kkt <= opts.solver.kkt_tol {
        Status::Optimal
    } else {
        Status::MaxIter
    };
    let mut multipliers = Vec::with_capacity(lam_quad.len() + lam_soc.len());
    for (l, s) in lam_quad.iter().chain(lam_soc.iter()).zip(&sc.sigma) {
        multipliers.push(l * sc.sigma0 / s);
    }
    let sx2 = sc.sx * sc.sx;
    let local_multipliers = lam_disk
        .iter()
        .map(|l| l * sc.sigma0 / sx2)
        .chain(lam_lower.iter().map(|l| l * sc.sigma0 / sc.sx))
        .collect();
    let xr = x * sc.sx;
    BarrierResult {
        report: SolveReport {
            status,
            kkt_residual: kkt,
            iterations,
            objective: prob.objective(&xr),
            multipliers,
        },
        x: xr,
        local_multipliers,
        stationarity: stat,
    }
}
