//! `max Re{xᴴw} − wᴴYw` over at most one general ellipsoid and one ball.
//!
//! `Y` and a general constraint matrix are given as one block that is
//! repeated `reps` times along the diagonal (`I_reps ⊗ Y`), which is how the
//! precoding step arrives. The complex problem is solved through its dual:
//! for fixed multipliers the maximizer is `w(λ) = (Y + λ_s S + λ_b I)⁻¹ x / 2`,
//! the ball multiplier is found by a secular-equation bisection on the
//! eigen-decomposition of `Y + λ_s S`, and `λ_s` by an outer bisection.
//! Problems restricted to real nonnegative vectors are handed to the barrier
//! engine.

use nalgebra::SymmetricEigen;

use super::barrier::{self, BarrierOptions, BarrierProblem, Partition, QuadIneq, SymOp};
use super::{SolveReport, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, RMatrix, RVector, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintMatrix {
    Identity,
    /// One block, repeated like `Y`.
    Matrix(CMatrix),
}

/// `wᴴ S w ≤ bound`
#[derive(Clone, Debug, PartialEq)]
pub struct QuadMaxConstraint {
    pub s: ConstraintMatrix,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadMaxProblem {
    pub x: CVector,
    pub y: CMatrix,
    pub reps: usize,
    pub constraints: Vec<QuadMaxConstraint>,
    pub nonneg: bool,
}

impl QuadMaxProblem {
    pub fn dim(&self) -> usize {
        self.y.nrows() * self.reps
    }

    pub fn validate(&self) -> Result<()> {
        let nb = self.y.nrows();
        if self.y.ncols() != nb || self.x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "x has {} entries, Y block is {}x{} repeated {}",
                self.x.len(),
                nb,
                self.y.ncols(),
                self.reps
            )));
        }
        for c in &self.constraints {
            if let ConstraintMatrix::Matrix(s) = &c.s {
                if s.nrows() != nb || s.ncols() != nb {
                    return Err(Error::Dimension("constraint block size differs from Y".into()));
                }
            }
        }
        let n_id = self
            .constraints
            .iter()
            .filter(|c| c.s == ConstraintMatrix::Identity)
            .count();
        if self.constraints.len() - n_id > 1 && !self.nonneg {
            return Err(Error::InvalidParam {
                name: "constraints".into(),
                reason: "at most one general ellipsoid is supported".into(),
            });
        }
        Ok(())
    }

    fn block_apply(&self, m: &CMatrix, w: &CVector) -> CVector {
        let nb = self.y.nrows();
        let mut out = CVector::zeros(w.len());
        for r in 0..self.reps {
            out.rows_mut(r * nb, nb).copy_from(&(m * w.rows(r * nb, nb)));
        }
        out
    }

    pub fn objective(&self, w: &CVector) -> f64 {
        self.x.dotc(w).re - w.dotc(&self.block_apply(&self.y, w)).re
    }

    pub fn constraint_value(&self, c: &QuadMaxConstraint, w: &CVector) -> f64 {
        match &c.s {
            ConstraintMatrix::Identity => w.norm_squared(),
            ConstraintMatrix::Matrix(s) => w.dotc(&self.block_apply(s, w)).re,
        }
    }

    /// Largest relative violation `(wᴴSw − b)/max(b, tiny)`, or of `w ≥ 0`.
    pub fn max_violation(&self, w: &CVector) -> f64 {
        let mut v: f64 = 0.0;
        for c in &self.constraints {
            let val = self.constraint_value(c, w);
            v = v.max((val - c.bound) / c.bound.abs().max(1e-300));
        }
        if self.nonneg {
            let scale = w.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(1e-300);
            for z in w.iter() {
                v = v.max(-z.re / scale).max(z.im.abs() / scale);
            }
        }
        v
    }
}

/// Solves the problem; the returned vector is always feasible unless the
/// status is `Infeasible`.
pub fn solve_quad_max(p: &QuadMaxProblem, opts: &SolverOptions) -> Result<(CVector, SolveReport)> {
    solve_quad_max_from(p, None, opts)
}

/// Same as [`solve_quad_max`]; `start` seeds the barrier path of nonnegative
/// problems.
pub fn solve_quad_max_from(
    p: &QuadMaxProblem,
    start: Option<&CVector>,
    opts: &SolverOptions,
) -> Result<(CVector, SolveReport)> {
    p.validate()?;
    if let Some(c) = p.constraints.iter().find(|c| c.bound < 0.0) {
        let _ = c;
        return Ok((CVector::zeros(p.dim()), SolveReport::infeasible(0.0)));
    }
    if p.nonneg {
        return Ok(solve_nonneg(p, start, opts));
    }
    Ok(solve_dual(p, opts))
}

/// Eigen-decomposition of `Y + λ_s S` with the projected right-hand sides.
struct Spectrum {
    values: RVector,
    vectors: CMatrix,
    /// `|v_jᴴ x_r|²` summed over repetitions.
    weights: RVector,
}

impl Spectrum {
    fn new(p: &QuadMaxProblem, s: Option<&CMatrix>, lam_s: f64) -> Self {
        let mut a = p.y.clone();
        if let Some(s) = s {
            a += s * C64::new(lam_s, 0.0);
        }
        let a = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(a);
        let nb = p.y.nrows();
        let mut weights = RVector::zeros(nb);
        for r in 0..p.reps {
            let proj = eig.eigenvectors.ad_mul(&p.x.rows(r * nb, nb));
            for j in 0..nb {
                weights[j] += proj[j].norm_sqr();
            }
        }
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            weights,
        }
    }

    fn floor(&self) -> f64 {
        1e-13 * self.values.amax().max(1e-300)
    }

    /// `‖w(λ_b)‖²`; infinite when `x` meets a null direction at `λ_b = 0`.
    fn norm_sq(&self, lam_b: f64) -> f64 {
        let fl = self.floor();
        let mut s = 0.0;
        for (v, wt) in self.values.iter().zip(self.weights.iter()) {
            let d = v.max(0.0) + lam_b;
            if d <= fl {
                if *wt > 1e-28 * self.weights.sum().max(1e-300) {
                    return f64::INFINITY;
                }
                continue;
            }
            s += wt / (4.0 * d * d);
        }
        s
    }

    fn solution(&self, p: &QuadMaxProblem, lam_b: f64) -> CVector {
        let nb = p.y.nrows();
        let fl = self.floor();
        let mut w = CVector::zeros(p.dim());
        for r in 0..p.reps {
            let mut proj = self.vectors.ad_mul(&p.x.rows(r * nb, nb));
            for j in 0..nb {
                let d = self.values[j].max(0.0) + lam_b;
                proj[j] = if d <= fl {
                    C64::new(0.0, 0.0)
                } else {
                    proj[j] / (2.0 * d)
                };
            }
            w.rows_mut(r * nb, nb).copy_from(&(&self.vectors * proj));
        }
        w
    }
}

/// Smallest `λ ≥ 0` with `‖w(λ)‖² ≤ b` (`b = ∞` when there is no ball).
fn ball_multiplier(sp: &Spectrum, b: Option<f64>, tol: f64) -> f64 {
    let b = match b {
        Some(b) => b,
        None => return 0.0,
    };
    if sp.norm_sq(0.0) <= b {
        return 0.0;
    }
    if b <= 0.0 {
        return f64::INFINITY;
    }
    // ‖w(λ)‖² ≤ Σwt/(4λ²) gives an upper bracket
    let mut hi = (sp.weights.sum() / (4.0 * b)).sqrt().max(1e-300);
    while sp.norm_sq(hi) > b {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if sp.norm_sq(mid) > b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi {
            break;
        }
    }
    hi
}

fn solve_dual(p: &QuadMaxProblem, opts: &SolverOptions) -> (CVector, SolveReport) {
    let n = p.dim();
    if p.x.iter().all(|z| z.norm() == 0.0) {
        let mut r = report(Status::Optimal, 0.0, 0, 0.0, vec![0.0; p.constraints.len()]);
        r.kkt_residual = 0.0;
        return (CVector::zeros(n), r);
    }
    let ball = p
        .constraints
        .iter()
        .filter(|c| c.s == ConstraintMatrix::Identity)
        .map(|c| c.bound)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.min(b))));
    let general = p.constraints.iter().find_map(|c| match &c.s {
        ConstraintMatrix::Matrix(s) => Some((s, c.bound)),
        ConstraintMatrix::Identity => None,
    });
    let tol = opts.bisection_tol;
    let inner = |lam_s: f64| -> (CVector, f64) {
        let sp = Spectrum::new(p, general.map(|g| g.0), lam_s);
        let lb = ball_multiplier(&sp, ball, tol);
        if lb.is_infinite() {
            return (CVector::zeros(n), lb);
        }
        (sp.solution(p, lb), lb)
    };
    let mut iterations = 0;
    let (w, lam_b, lam_s) = match general {
        None => {
            let (w, lb) = inner(0.0);
            (w, lb, 0.0)
        }
        Some((s, bound)) => {
            let sval = |w: &CVector| w.dotc(&p.block_apply(s, w)).re;
            let (w0, lb0) = inner(0.0);
            if lb0.is_finite() && sval(&w0) <= bound {
                (w0, lb0, 0.0)
            } else {
                let scale =
                    p.y.iter()
                        .chain(s.iter())
                        .fold(0.0f64, |a, z| a.max(z.norm()))
                        .max(1e-300);
                let mut hi = scale;
                let mut sol = inner(hi);
                while !(sol.1.is_finite() && sval(&sol.0) <= bound) {
                    hi *= 4.0;
                    iterations += 1;
                    if hi > 1e300 || iterations > 2000 {
                        return (CVector::zeros(n), SolveReport::infeasible(0.0));
                    }
                    sol = inner(hi);
                }
                let mut lo = 0.0;
                for _ in 0..300 {
                    iterations += 1;
                    let mid = 0.5 * (lo + hi);
                    let cand = inner(mid);
                    if cand.1.is_finite() && sval(&cand.0) <= bound {
                        hi = mid;
                        sol = cand;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= tol * hi {
                        break;
                    }
                }
                (sol.0, sol.1, hi)
            }
        }
    };
    if lam_b.is_infinite() {
        return (CVector::zeros(n), SolveReport::infeasible(0.0));
    }
    let multipliers: Vec<f64> = p
        .constraints
        .iter()
        .map(|c| match c.s {
            ConstraintMatrix::Identity if Some(c.bound) == ball => lam_b,
            ConstraintMatrix::Identity => 0.0,
            ConstraintMatrix::Matrix(_) => lam_s,
        })
        .collect();
    let kkt = kkt_residual(p, &w, &multipliers);
    let status = if kkt <= opts.kkt_tol.max(1e-9) {
        Status::Optimal
    } else {
        Status::MaxIter
    };
    let obj = p.objective(&w);
    (w, report(status, kkt, iterations, obj, multipliers))
}

fn report(status: Status, kkt: f64, iterations: usize, objective: f64, multipliers: Vec<f64>) -> SolveReport {
    SolveReport {
        status,
        kkt_residual: kkt,
        iterations,
        objective,
        multipliers,
    }
}

/// Relative stationarity, complementarity and feasibility at `w` with the
/// given multipliers (complex problems only).
pub fn kkt_residual(p: &QuadMaxProblem, w: &CVector, multipliers: &[f64]) -> f64 {
    let mut grad = p.block_apply(&p.y, w) * C64::new(2.0, 0.0);
    for (c, l) in p.constraints.iter().zip(multipliers) {
        let sw = match &c.s {
            ConstraintMatrix::Identity => w.clone(),
            ConstraintMatrix::Matrix(s) => p.block_apply(s, w),
        };
        grad += sw * C64::new(2.0 * l, 0.0);
    }
    let xn = p.x.norm().max(1e-300);
    let stat = (&p.x - grad).norm() / xn;
    let scale = (xn * w.norm()).max(p.objective(w).abs()).max(1e-300);
    let mut comp: f64 = 0.0;
    for (c, l) in p.constraints.iter().zip(multipliers) {
        comp = comp.max((l * (c.bound - p.constraint_value(c, w))).abs() / scale);
    }
    stat.max(comp).max(p.max_violation(w).max(0.0))
}

fn re_part(m: &CMatrix) -> RMatrix {
    let r = m.map(|z| z.re);
    (&r + r.transpose()) * 0.5
}

/// Real nonnegative variant through the barrier engine.
fn solve_nonneg(p: &QuadMaxProblem, start: Option<&CVector>, opts: &SolverOptions) -> (CVector, SolveReport) {
    let nb = p.y.nrows();
    let n = p.dim();
    let part = Partition::uniform(p.reps, nb);
    let y = re_part(&p.y);
    let h = SymOp::from_blocks(vec![y; p.reps]);
    let g = RVector::from_iterator(n, p.x.iter().map(|z| -z.re));
    let mut prob = BarrierProblem::new(part, h, g);
    let mut scale_sq: Option<f64> = None;
    for c in &p.constraints {
        let a = match &c.s {
            ConstraintMatrix::Identity => SymOp::from_blocks(vec![RMatrix::identity(nb, nb); p.reps]),
            ConstraintMatrix::Matrix(s) => SymOp::from_blocks(vec![re_part(s); p.reps]),
        };
        let tr = match &c.s {
            ConstraintMatrix::Identity => n as f64,
            ConstraintMatrix::Matrix(s) => s.diagonal().iter().map(|z| z.re).sum::<f64>() * p.reps as f64,
        };
        if tr > 0.0 {
            let s = c.bound / tr;
            scale_sq = Some(scale_sq.map_or(s, |v: f64| v.min(s)));
        }
        prob.quads.push(QuadIneq {
            a,
            b: RVector::zeros(n),
            c: -c.bound,
        });
    }
    for i in 0..n {
        prob.lower.push((i, 0.0));
    }
    let x_scale = match scale_sq {
        Some(s) if s > 0.0 => s.sqrt(),
        _ => 1.0,
    };
    if scale_sq == Some(0.0) {
        // a zero budget with a positive-definite constraint leaves only 0
        let w = CVector::zeros(n);
        let obj = p.objective(&w);
        return (w, report(Status::Optimal, 0.0, 0, obj, vec![0.0; p.constraints.len()]));
    }
    let mut x0 = RVector::from_element(n, 0.5 * x_scale);
    if let Some(st) = start {
        let cand = RVector::from_iterator(n, st.iter().map(|z| z.re.max(0.0)));
        // pull slightly inside so the start is interior
        let cand = cand * 0.98 + RVector::from_element(n, 0.01 * x_scale);
        if prob.max_violation(&cand) < 0.0 {
            x0 = cand;
        }
    }
    let mut bo: BarrierOptions = (*opts).into();
    bo.x_scale = x_scale;
    let res = barrier::solve(&prob, &x0, &bo);
    let w = CVector::from_iterator(n, res.x.iter().map(|v| C64::new(v.max(0.0), 0.0)));
    let mut rep = res.report;
    rep.objective = p.objective(&w);
    (w, rep)
}
