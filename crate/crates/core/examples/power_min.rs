//! One desk-scale power minimization run at an 8 dB SINR target.

use std::time::Instant;

use active_ris::channel::{generate_channels, stream_rng, Geometry, PathLossParams};
use active_ris::model::{SystemDims, SystemParams};
use active_ris::powermin::{achieved_sinrs, run_power_min, PmOptions};

fn dbm(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, n, k, l) = (64, 8, 2, 16);
    let dims = SystemDims::new(n, k, m, l)?;
    // Only the RIS budget shrinks with M; per-element static powers stay physical.
    let scale = m as f64 / 256.0;
    let gamma_db: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(8.0);
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
        gamma: vec![10f64.powf(gamma_db / 10.0); k],
    };
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut rng = stream_rng(seed, 0);
    let geom = Geometry::standard(k, 200.0, &mut rng);
    let ch = generate_channels(&dims, &geom, &PathLossParams::default(), &mut rng)?;

    let t0 = Instant::now();
    let (pre, st, trace) = run_power_min(&ch, &dims, &params, &PmOptions::default())?;
    println!("initial total power {:.6} W", trace.initial_power);
    for (i, o) in trace.outer.iter().enumerate() {
        let accepted: Vec<_> = o.steps.iter().filter(|s| s.accepted).map(|s| s.block).collect();
        println!(
            "outer {:2}: total {:.6} W (BS {:.6}, RIS {:.6})  slack {:+.1e}  inner {:3}  accepted {:?}",
            i + 1,
            o.total_power,
            o.bs_power,
            o.ris_power,
            o.min_sinr_slack,
            o.inner.len(),
            accepted
        );
    }
    let sinr_db: Vec<f64> = achieved_sinrs(&ch, &st, &pre, &params, &dims)?
        .iter()
        .map(|s| 10.0 * s.log10())
        .collect();
    println!(
        "final {:.6} W, transmit {:.3e} W, mean a {:.2}, SINR {:.3?} dB, {:.2?}",
        trace.final_power(),
        pre.transmit_power(),
        st.a.mean(),
        sinr_db,
        t0.elapsed()
    );
    Ok(())
}
