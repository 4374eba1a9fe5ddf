//! The convex micro-solvers on small random problems, with the residuals
//! they report.

use active_ris::linalg::{BlockDiag, CMatrix, CVector, C64};
use active_ris::solver::box_qcqp::{solve_box_qcqp_min, BoxQcqp, QuadConstraint};
use active_ris::solver::quad_max::{kkt_residual, solve_quad_max, ConstraintMatrix, QuadMaxConstraint, QuadMaxProblem};
use active_ris::solver::SolverOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rc(rng: &mut impl Rng) -> C64 {
    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn psd(rng: &mut impl Rng, n: usize) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| rc(rng));
    &b * b.adjoint()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = SolverOptions::default();

    // max Re{xᴴw} − wᴴ(I₂ ⊗ Y)w  s.t.  ‖w‖² ≤ 1, wᴴ(I₂ ⊗ S)w ≤ 0.5
    let p = QuadMaxProblem {
        x: CVector::from_fn(8, |_, _| rc(&mut rng) * 4.0),
        y: psd(&mut rng, 4),
        reps: 2,
        constraints: vec![
            QuadMaxConstraint {
                s: ConstraintMatrix::Identity,
                bound: 1.0,
            },
            QuadMaxConstraint {
                s: ConstraintMatrix::Matrix(psd(&mut rng, 4)),
                bound: 0.5,
            },
        ],
        nonneg: false,
    };
    let (w, rep) = solve_quad_max(&p, &opts)?;
    println!(
        "precoder-type ascent: {:?}, objective {:.6}, max violation {:.1e}, KKT {:.1e}, multipliers {:?}",
        rep.status,
        p.objective(&w),
        p.max_violation(&w),
        kkt_residual(&p, &w, &rep.multipliers),
        rep.multipliers
    );

    // min θᴴΥθ + Re{θᴴζ}  s.t.  one coupling quadratic, |θ_m| ≤ 1
    let blocks = |rng: &mut ChaCha8Rng| BlockDiag::from_blocks((0..3).map(|_| psd(rng, 2)).collect());
    let q = BoxQcqp {
        upsilon: blocks(&mut rng),
        zeta: CVector::from_fn(6, |_, _| rc(&mut rng) * 3.0),
        constraints: vec![QuadConstraint {
            lambda: blocks(&mut rng),
            beta: CVector::from_fn(6, |_, _| rc(&mut rng)),
            c: -0.8,
        }],
        unit_ball: true,
    };
    let (theta, rep) = solve_box_qcqp_min(&q, None, &opts)?;
    println!(
        "phase QCQP: {:?}, objective {:.6}, max violation {:.1e}, reported KKT {:.1e}",
        rep.status,
        q.objective(&theta),
        q.max_violation(&theta),
        rep.kkt_residual
    );
    println!(
        "moduli {:?}",
        theta.iter().map(|z| (z.norm() * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    Ok(())
}
