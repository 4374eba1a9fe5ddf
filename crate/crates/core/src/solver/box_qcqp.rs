//! `min θᴴΥθ + Re{θᴴζ}` subject to convex quadratic constraints and
//! `|θ_m| ≤ 1`, with every matrix block diagonal (one block per amplifier).
//!
//! The variable is realified in interleaved order so that each complex
//! `Q×Q` block becomes a real `2Q×2Q` block of the barrier Newton system.

use super::barrier::{self, BarrierOptions, BarrierProblem, Disk, Partition, QuadIneq, SymOp};
use super::{SolveReport, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{
    deinterleave, hermitian_part, interleave, realify_hermitian_interleaved, BlockDiag, CVector, RVector,
};

/// `θᴴΛθ + Re{θᴴβ} + c ≤ 0`
#[derive(Clone, Debug, PartialEq)]
pub struct QuadConstraint {
    pub lambda: BlockDiag,
    pub beta: CVector,
    pub c: f64,
}

impl QuadConstraint {
    pub fn value(&self, theta: &CVector) -> f64 {
        self.lambda.quad_form(theta).re + theta.dotc(&self.beta).re + self.c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxQcqp {
    pub upsilon: BlockDiag,
    pub zeta: CVector,
    pub constraints: Vec<QuadConstraint>,
    /// Adds `|θ_m| ≤ 1` for every entry.
    pub unit_ball: bool,
}

impl BoxQcqp {
    pub fn objective(&self, theta: &CVector) -> f64 {
        self.upsilon.quad_form(theta).re + theta.dotc(&self.zeta).re
    }

    /// Largest constraint value (positive when violated), including the
    /// entrywise modulus bound as `|θ_m| − 1`.
    pub fn max_violation(&self, theta: &CVector) -> f64 {
        let mut v = f64::NEG_INFINITY;
        for c in &self.constraints {
            v = v.max(c.value(theta));
        }
        if self.unit_ball {
            for z in theta.iter() {
                v = v.max(z.norm() - 1.0);
            }
        }
        v
    }

    fn check(&self) -> Result<()> {
        let n = self.upsilon.dim();
        if self.zeta.len() != n {
            return Err(Error::Dimension(format!(
                "zeta has {} entries, Upsilon is {n}",
                self.zeta.len()
            )));
        }
        for c in &self.constraints {
            if c.lambda.num_blocks() != self.upsilon.num_blocks()
                || c.lambda.block_size() != self.upsilon.block_size()
                || c.beta.len() != n
            {
                return Err(Error::Dimension("constraint structure differs from Upsilon".into()));
            }
        }
        Ok(())
    }
}

fn real_blocks(b: &BlockDiag) -> SymOp {
    SymOp::from_blocks(
        b.blocks()
            .iter()
            .map(|m| realify_hermitian_interleaved(&hermitian_part(m)))
            .collect(),
    )
}

/// Solves the problem from `start` (zero when absent), falling back to a
/// phase-I search when the start is not strictly feasible.
pub fn solve_box_qcqp_min(
    p: &BoxQcqp,
    start: Option<&CVector>,
    opts: &SolverOptions,
) -> Result<(CVector, SolveReport)> {
    p.check()?;
    let n = p.upsilon.dim();
    let part = Partition::uniform(p.upsilon.num_blocks(), 2 * p.upsilon.block_size());
    let mut prob = BarrierProblem::new(part, real_blocks(&p.upsilon), interleave(&p.zeta));
    for c in &p.constraints {
        prob.quads.push(QuadIneq {
            a: real_blocks(&c.lambda),
            b: interleave(&c.beta),
            c: c.c,
        });
    }
    if p.unit_ball {
        prob.disks = (0..n)
            .map(|m| Disk {
                i: 2 * m,
                j: 2 * m + 1,
                r: 1.0,
            })
            .collect();
    }
    let x0 = start.map(interleave).unwrap_or_else(|| RVector::zeros(2 * n));
    let res = barrier::solve(&prob, &x0, &BarrierOptions::from(*opts));
    Ok((deinterleave(&res.x), res.report))
}
