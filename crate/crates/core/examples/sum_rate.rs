//! One desk-scale sum-rate maximization run with the reference constants.

use std::time::Instant;

use active_ris::channel::{generate_channels, stream_rng, Geometry, PathLossParams};
use active_ris::model::{SystemDims, SystemParams};
use active_ris::sumrate::{run_sum_rate_max, Block, SumRateOptions};

fn dbm(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, n, k, l) = (64, 8, 2, 16);
    let dims = SystemDims::new(n, k, m, l)?;
    // Only the RIS budget shrinks with M; per-element static powers stay physical.
    let scale = m as f64 / 256.0;
    let params = SystemParams {
        p_bs: dbm(30.0),
        p_ris_tot: dbm(34.15) * scale,
        w_bs: dbm(36.0),
        w_ps: dbm(7.0),
        w_pa: dbm(7.0),
        nu1: 1.0 / 1.1,
        nu2: 1.0 / 1.1,
        sigma_sq: vec![dbm(-80.0); k],
        sigma_z_sq: dbm(-80.0),
        gamma: Vec::new(),
    };
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = stream_rng(seed, 0);
    let geom = Geometry::standard(k, 200.0, &mut rng);
    let ch = generate_channels(&dims, &geom, &PathLossParams::default(), &mut rng)?;

    let t0 = Instant::now();
    let (pre, st, trace) = run_sum_rate_max(&ch, &dims, &params, &SumRateOptions::default())?;
    println!("initial sum rate {:.4} bit/s/Hz", trace.initial_sum_rate);
    for (i, o) in trace.outer.iter().enumerate() {
        let rejected: Vec<_> = o.steps.iter().filter(|s| !s.accepted).map(|s| s.block).collect();
        let theta_gain = o
            .steps
            .iter()
            .find(|s| s.block == Block::Theta)
            .map_or(0.0, |s| s.f2_after - s.f2_before);
        println!(
            "outer {:2}: rate {:.4}  inner {:3} (conv {})  theta gain {:+.2e}  rejected {:?}",
            i + 1,
            o.sum_rate,
            o.inner.len(),
            o.inner_converged,
            theta_gain,
            rejected
        );
        if std::env::var_os("VERBOSE").is_some() {
            for s in &o.steps {
                println!(
                    "    {:?}: {:.6} -> {:.6} {:?}",
                    s.block, s.f2_before, s.f2_after, s.status
                );
            }
        }
    }
    println!(
        "final {:.4} bit/s/Hz, P_BS used {:.3e} W, mean a {:.2}, {:.2?}",
        trace.final_sum_rate(),
        pre.transmit_power(),
        st.a.mean(),
        t0.elapsed()
    );
    Ok(())
}
