//! Riemannian conjugate gradient ascent of `f(ψ) = ψᴴMψ + Re{ψᴴm}` over
//! the unit-modulus torus `|ψ_i| = 1`.

use super::{SolverOptions, Status};
use crate::linalg::{CMatrix, CVector, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct RcgReport {
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

fn objective(mm: &CMatrix, m: &CVector, psi: &CVector) -> f64 {
    psi.dotc(&(mm * psi)).re + psi.dotc(m).re
}

/// Projection onto the tangent space at `psi`.
fn project(psi: &CVector, v: &CVector) -> CVector {
    v.zip_map(psi, |vi, pi| vi - pi * (vi * pi.conj()).re)
}

fn retract(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

fn inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

/// Ascends from `psi0`; stops once the Riemannian gradient norm falls below
/// `opts.kkt_tol` relative to the Euclidean gradient scale.
pub fn rcg_unit_modulus(mm: &CMatrix, m: &CVector, psi0: &CVector, opts: &SolverOptions) -> (CVector, RcgReport) {
    let mut psi = retract(psi0);
    let egrad = |p: &CVector| mm * p * C64::new(2.0, 0.0) + m;
    let scale = {
        let g = egrad(&psi);
        g.norm().max(1e-300)
    };
    let mut f = objective(mm, m, &psi);
    let mut grad = project(&psi, &egrad(&psi));
    let mut dir = grad.clone();
    let mut step = 0.1 / dir.camax().max(1e-300);
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    for it in 0..opts.max_iter.max(1) * 5 {
        iterations = it;
        let gn = grad.norm();
        if gn <= opts.kkt_tol * scale {
            status = Status::Optimal;
            break;
        }
        let mut slope = inner(&grad, &dir);
        if slope <= 0.0 {
            dir = grad.clone();
            slope = gn * gn;
        }
        // Armijo backtracking along the retracted curve
        let mut alpha = step * 2.0;
        let mut next = None;
        for _ in 0..60 {
            let cand = retract(&(&psi + &dir * C64::new(alpha, 0.0)));
            let fc = objective(mm, m, &cand);
            if fc >= f + 1e-4 * alpha * slope {
                next = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        let (cand, fc) = match next {
            Some(v) => v,
            None => {
                // no ascent possible at round-off level
                status = Status::Optimal;
                break;
            }
        };
        step = alpha;
        let new_grad = project(&cand, &egrad(&cand));
        // Polak–Ribière with transport by projection
        let old_t = project(&cand, &grad);
        let beta = (inner(&new_grad, &(&new_grad - &old_t)) / (gn * gn)).max(0.0);
        dir = &new_grad + project(&cand, &dir) * C64::new(beta, 0.0);
        psi = cand;
        f = fc;
        grad = new_grad;
    }
    let grad_norm = grad.norm();
    (
        psi,
        RcgReport {
            status,
            iterations,
            objective: f,
            grad_norm,
        },
    )
}
