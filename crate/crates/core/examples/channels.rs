//! Draws one channel realization and checks the FP reformulation on it:
//! at the optimal auxiliaries, f2 equals the sum rate.

use active_ris::channel::{generate_channels, stream_rng, Geometry, PathLossParams};
use active_ris::fp::{f2_bits, update_eta, update_mu, FpAux};
use active_ris::model::{build_reflection_operator, LinkBudget, SystemDims, SystemParams};
use active_ris::solver::SolverOptions;
use active_ris::sumrate::initialize;

fn dbm(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, k, m, l) = (8, 2, 64, 16);
    let dims = SystemDims::new(n, k, m, l)?;
    let mut rng = stream_rng(7, 0);
    let geom = Geometry::standard(k, 200.0, &mut rng);
    let ch = generate_channels(&dims, &geom, &PathLossParams::default(), &mut rng)?;

    for (u, p) in geom.user_pos.iter().enumerate() {
        println!(
            "user {u} at ({:.1}, {:.1}) m: |h_d|^2 = {:.3e}, |h_r|^2 = {:.3e}",
            p.x,
            p.y,
            ch.h_d[u].norm_squared(),
            ch.h_r[u].norm_squared()
        );
    }
    println!("|G|_F^2 = {:.3e}", ch.g.norm_squared());

    let params = SystemParams {
        p_bs: dbm(30.0),
        p_ris_tot: dbm(34.15) * m as f64 / 256.0,
        w_bs: dbm(36.0),
        w_ps: dbm(7.0),
        w_pa: dbm(7.0),
        nu1: 1.0 / 1.1,
        nu2: 1.0 / 1.1,
        sigma_sq: vec![dbm(-80.0); k],
        sigma_z_sq: dbm(-80.0),
        gamma: Vec::new(),
    };
    let (st, pre) = initialize(&ch, &dims, &params, &SolverOptions::default())?;
    let op = build_reflection_operator(&st, &dims)?;
    let lb = LinkBudget::new(&ch, &op, &pre, &params);
    let mu = update_mu(&lb);
    let eta = update_eta(&lb, &mu);
    let stale = FpAux {
        mu: mu.clone(),
        eta: eta.iter().map(|e| e * 0.9).collect(),
    };
    println!("SINRs at the initial point: {:?}", lb.sinrs());
    println!("sum rate          {:.12} bit/s/Hz", lb.sum_rate());
    println!("f2 at (mu*, eta*) {:.12}", f2_bits(&lb, &FpAux { mu, eta }));
    println!("f2 at stale eta   {:.12}", f2_bits(&lb, &stale));
    Ok(())
}
