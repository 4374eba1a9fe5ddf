//! A small Monte-Carlo sweep through the harness, without writing files.

use active_ris::harness::{aggregate, parse_config, run_trials};

const CONFIG: &str = "
preset = sumrate_vs_pbs
sweep = 10 dBm, 30 dBm
trials = 4
seed = 11
N = 4
K = 2
M = 16
L = 4
architectures = sub, fully
P_RIS_tot = 0.16251 W
max_outer = 10
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(CONFIG)?;
    let jobs = run_trials(&cfg)?;
    let rows: Vec<_> = jobs.iter().flat_map(|j| j.rows.iter().cloned()).collect();
    for a in aggregate(&rows).iter().filter(|a| a.metric == "sum_rate") {
        println!(
            "{:>6} P_BS = {:.2} W: {:.4} ± {:.4} bit/s/Hz over {} trials",
            a.architecture, a.sweep, a.mean, a.std_err, a.count
        );
    }
    Ok(())
}
