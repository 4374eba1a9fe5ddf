//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment. Power-like values accept
//! `W`, `mW`, `dBW`, `dBm` or `dB` suffixes; SINR targets accept `dB`.
//! List values (`sweep`, `architectures`) are comma separated. Unknown keys
//! are errors.
//!
//! | key | meaning |
//! |-----|---------|
//! | `preset` | experiment kind, see [`Preset`] |
//! | `sweep` | values of the swept quantity, units allowed |
//! | `trials`, `seed` | Monte-Carlo size and base seed |
//! | `N`, `K`, `M`, `L` | antennas, users, RIS elements, amplifiers |
//! | `architectures` | `sub`, `sub(L)` or `fully`, comma separated |
//! | `P_BS`, `P_RIS_tot`, `W_BS`, `W_PS`, `W_PA` | budgets and static draws |
//! | `nu1`, `nu2` | amplifier efficiencies |
//! | `sigma2`, `sigma_z2` | receiver and RIS noise powers |
//! | `Gamma` | common SINR target |
//! | `user_x`, `user_radius` | user disk center and radius (m) |
//! | `C0`, `d0`, `iota_d`, `iota_g`, `iota_r` | path loss model |
//! | `rho`, `outer_tol`, `max_outer`, `inner_tol`, `max_inner` | algorithm |
//! | `workers` | worker threads (0 = all cores) |
//! | `timing` | `on` to record wall time (breaks byte-identical output) |
//! | `out` | output directory |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::PathLossParams;
use crate::error::{Error, Result};
use crate::harness::units::parse_quantity;
use crate::model::{SystemDims, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    SumrateVsPbs,
    SumrateVsPris,
    SumrateVsL,
    SumrateVsK,
    SumrateVsX,
    PowerVsGamma,
    PowerVsL,
    PowerVsK,
    PowerVsX,
    ConvergenceTrace,
}

/// Quantity varied along a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    PBs,
    PRis,
    Amplifiers,
    Users,
    UserX,
    Gamma,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::SumrateVsPbs,
        Preset::SumrateVsPris,
        Preset::SumrateVsL,
        Preset::SumrateVsK,
        Preset::SumrateVsX,
        Preset::PowerVsGamma,
        Preset::PowerVsL,
        Preset::PowerVsK,
        Preset::PowerVsX,
        Preset::ConvergenceTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SumrateVsPbs => "sumrate_vs_pbs",
            Preset::SumrateVsPris => "sumrate_vs_pris",
            Preset::SumrateVsL => "sumrate_vs_L",
            Preset::SumrateVsK => "sumrate_vs_K",
            Preset::SumrateVsX => "sumrate_vs_x",
            Preset::PowerVsGamma => "power_vs_gamma",
            Preset::PowerVsL => "power_vs_L",
            Preset::PowerVsK => "power_vs_K",
            Preset::PowerVsX => "power_vs_x",
            Preset::ConvergenceTrace => "convergence_trace",
        }
    }

    pub fn is_power_min(self) -> bool {
        matches!(
            self,
            Preset::PowerVsGamma | Preset::PowerVsL | Preset::PowerVsK | Preset::PowerVsX
        )
    }

    /// The convergence preset sweeps the BS budget.
    pub fn axis(self) -> SweepAxis {
        match self {
            Preset::SumrateVsPbs | Preset::ConvergenceTrace => SweepAxis::PBs,
            Preset::SumrateVsPris => SweepAxis::PRis,
            Preset::SumrateVsL | Preset::PowerVsL => SweepAxis::Amplifiers,
            Preset::SumrateVsK | Preset::PowerVsK => SweepAxis::Users,
            Preset::SumrateVsX | Preset::PowerVsX => SweepAxis::UserX,
            Preset::PowerVsGamma => SweepAxis::Gamma,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset `{}`, expected one of {}", s.trim(), names.join(", "))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    /// Sub-connected with the configured `L`, or an explicit one.
    Sub(Option<usize>),
    /// One amplifier per element, `L = M`.
    Fully,
}

impl Architecture {
    pub fn amplifiers(self, m: usize, default_l: usize) -> usize {
        match self {
            Architecture::Sub(l) => l.unwrap_or(default_l),
            Architecture::Fully => m,
        }
    }

    pub fn label(self, m: usize, default_l: usize) -> String {
        match self {
            Architecture::Fully => "fully".into(),
            Architecture::Sub(_) => format!("sub({})", self.amplifiers(m, default_l)),
        }
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        if t == "fully" {
            return Ok(Architecture::Fully);
        }
        if t == "sub" {
            return Ok(Architecture::Sub(None));
        }
        t.strip_prefix("sub(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|n| n.trim().parse().ok())
            .map(|l| Architecture::Sub(Some(l)))
            .ok_or_else(|| format!("bad architecture `{t}`, expected `sub`, `sub(L)` or `fully`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub sweep: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub architectures: Vec<Architecture>,
    pub p_bs: f64,
    pub p_ris_tot: f64,
    pub w_bs: f64,
    pub w_ps: f64,
    pub w_pa: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub sigma_sq: f64,
    pub sigma_z_sq: f64,
    pub gamma: f64,
    pub user_x: f64,
    pub user_radius: f64,
    pub path_loss: PathLossParams,
    pub rho: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub workers: usize,
    pub timing: bool,
    pub out: PathBuf,
}

fn dbm(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

impl Default for ExperimentConfig {
    /// The full-scale scenario.
    fn default() -> Self {
        Self {
            preset: Preset::SumrateVsPbs,
            sweep: vec![dbm(30.0)],
            trials: 100,
            seed: 1,
            n: 16,
            k: 4,
            m: 256,
            l: 64,
            architectures: vec![Architecture::Sub(None)],
            p_bs: dbm(30.0),
            p_ris_tot: 10f64.powf(0.415),
            w_bs: 10f64.powf(0.6),
            w_ps: dbm(7.0),
            w_pa: dbm(7.0),
            nu1: 1.0 / 1.1,
            nu2: 1.0 / 1.1,
            sigma_sq: dbm(-80.0),
            sigma_z_sq: dbm(-80.0),
            gamma: 10f64.powf(0.8),
            user_x: 200.0,
            user_radius: 10.0,
            path_loss: PathLossParams::default(),
            rho: 1.0,
            outer_tol: 1e-4,
            max_outer: 30,
            inner_tol: 1e-3,
            max_inner: 100,
            workers: 0,
            timing: false,
            out: PathBuf::from("results"),
        }
    }
}

/// One simulated scenario: a sweep point under one architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dims: SystemDims,
    pub params: SystemParams,
    pub user_x: f64,
}

fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name: name.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Checks every invariant, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if self.sweep.is_empty() {
            return Err(invalid("sweep", "must list at least one value"));
        }
        if self.architectures.is_empty() {
            return Err(invalid("architectures", "must list at least one architecture"));
        }
        if self.l == 0 || self.l > self.m || !self.m.is_multiple_of(self.l) {
            return Err(invalid("L", format!("{} does not divide M = {}", self.l, self.m)));
        }
        for a in &self.architectures {
            if let Architecture::Sub(Some(l)) = a {
                if *l == 0 || *l > self.m || !self.m.is_multiple_of(*l) {
                    return Err(invalid(
                        "architectures",
                        format!("sub({l}) does not divide M = {}", self.m),
                    ));
                }
            }
        }
        for (name, v) in [
            ("user_radius", self.user_radius),
            ("rho", self.rho),
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
        ] {
            if !(v >= 0.0) || (name == "rho" && v == 0.0) {
                return Err(invalid(name, "out of range"));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(invalid("max_outer/max_inner", "must be >= 1"));
        }
        match self.preset.axis() {
            SweepAxis::Amplifiers => {
                for &v in &self.sweep {
                    let l = as_count("sweep", v)?;
                    if l == 0 || l > self.m || !self.m.is_multiple_of(l) {
                        return Err(invalid("sweep", format!("L = {l} does not divide M = {}", self.m)));
                    }
                }
            }
            SweepAxis::Users => {
                for &v in &self.sweep {
                    let k = as_count("sweep", v)?;
                    if k == 0 || k > self.n {
                        return Err(invalid("sweep", format!("K = {k} needs 1 <= K <= N = {}", self.n)));
                    }
                }
            }
            SweepAxis::PBs | SweepAxis::PRis | SweepAxis::Gamma => {
                if self.sweep.iter().any(|&v| !(v >= 0.0)) {
                    return Err(invalid("sweep", "powers and targets must be >= 0"));
                }
            }
            SweepAxis::UserX => {}
        }
        if self.preset.is_power_min() && !(self.gamma > 0.0) {
            return Err(invalid("Gamma", "must be positive"));
        }
        // builds every scenario once to surface model-level errors
        for &v in &self.sweep {
            for &a in &self.architectures {
                let sc = self.scenario(v, a)?;
                sc.params.validate(&sc.dims)?;
            }
        }
        Ok(())
    }

    /// Architectures simulated at a sweep point. An amplifier sweep defines
    /// the architecture itself.
    pub fn architectures_at(&self) -> Vec<Architecture> {
        if self.preset.axis() == SweepAxis::Amplifiers {
            vec![Architecture::Sub(None)]
        } else {
            self.architectures.clone()
        }
    }

    pub fn scenario(&self, sweep: f64, arch: Architecture) -> Result<Scenario> {
        let mut k = self.k;
        let mut l = arch.amplifiers(self.m, self.l);
        let mut p_bs = self.p_bs;
        let mut p_ris_tot = self.p_ris_tot;
        let mut gamma = self.gamma;
        let mut user_x = self.user_x;
        match self.preset.axis() {
            SweepAxis::PBs => p_bs = sweep,
            SweepAxis::PRis => p_ris_tot = sweep,
            SweepAxis::Amplifiers => l = as_count("sweep", sweep)?,
            SweepAxis::Users => k = as_count("sweep", sweep)?,
            SweepAxis::UserX => user_x = sweep,
            SweepAxis::Gamma => gamma = sweep,
        }
        let dims = SystemDims::new(self.n, k, self.m, l)?;
        let params = SystemParams {
            p_bs,
            p_ris_tot,
            w_bs: self.w_bs,
            w_ps: self.w_ps,
            w_pa: self.w_pa,
            nu1: self.nu1,
            nu2: self.nu2,
            sigma_sq: vec![self.sigma_sq; k],
            sigma_z_sq: self.sigma_z_sq,
            gamma: if self.preset.is_power_min() {
                vec![gamma; k]
            } else {
                Vec::new()
            },
        };
        Ok(Scenario { dims, params, user_x })
    }

    /// Label of an architecture at a sweep point.
    pub fn architecture_label(&self, sweep: f64, arch: Architecture) -> String {
        match self.preset.axis() {
            SweepAxis::Amplifiers => {
                let l = sweep as usize;
                if l == self.m {
                    "fully".into()
                } else {
                    format!("sub({l})")
                }
            }
            _ => arch.label(self.m, self.l),
        }
    }
}

fn as_count(name: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(invalid(name, format!("{v} is not a positive integer")))
    }
}

fn parse_list<T>(
    value: &str,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    // commas inside parentheses belong to the item
    let mut items = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, ch) in value.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&value[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&value[start..]);
    items.into_iter().filter(|s| !s.trim().is_empty()).map(f).collect()
}

fn parse_int<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a nonnegative integer", v.trim()))
}

fn parse_plain(v: &str) -> std::result::Result<f64, String> {
    v.trim().parse().map_err(|_| format!("`{}` is not a number", v.trim()))
}

fn parse_switch(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(format!("`{other}` is not on/off")),
    }
}

/// Parses configuration text on top of the full-scale defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut sweep_text: Option<(usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let err = |msg: String| Error::Parse {
            line: line_no,
            msg: format!("{key}: {msg}"),
        };
        match key {
            "preset" => cfg.preset = value.parse().map_err(err)?,
            // parsed last, since integer axes depend on the preset
            "sweep" => sweep_text = Some((line_no, value.to_string())),
            "trials" => cfg.trials = parse_int(value).map_err(err)?,
            "seed" => cfg.seed = parse_int(value).map_err(err)?,
            "N" => cfg.n = parse_int(value).map_err(err)?,
            "K" => cfg.k = parse_int(value).map_err(err)?,
            "M" => cfg.m = parse_int(value).map_err(err)?,
            "L" => cfg.l = parse_int(value).map_err(err)?,
            "architectures" => cfg.architectures = parse_list(value, |s| s.parse()).map_err(err)?,
            "P_BS" => cfg.p_bs = parse_quantity(value).map_err(err)?,
            "P_RIS_tot" => cfg.p_ris_tot = parse_quantity(value).map_err(err)?,
            "W_BS" => cfg.w_bs = parse_quantity(value).map_err(err)?,
            "W_PS" => cfg.w_ps = parse_quantity(value).map_err(err)?,
            "W_PA" => cfg.w_pa = parse_quantity(value).map_err(err)?,
            "nu1" => cfg.nu1 = parse_ratio(value).map_err(err)?,
            "nu2" => cfg.nu2 = parse_ratio(value).map_err(err)?,
            "sigma2" => cfg.sigma_sq = parse_quantity(value).map_err(err)?,
            "sigma_z2" => cfg.sigma_z_sq = parse_quantity(value).map_err(err)?,
            "Gamma" => cfg.gamma = parse_quantity(value).map_err(err)?,
            "user_x" => cfg.user_x = parse_plain(value).map_err(err)?,
            "user_radius" => cfg.user_radius = parse_plain(value).map_err(err)?,
            "C0" => cfg.path_loss.c0 = parse_quantity(value).map_err(err)?,
            "d0" => cfg.path_loss.d0 = parse_plain(value).map_err(err)?,
            "iota_d" => cfg.path_loss.iota_d = parse_plain(value).map_err(err)?,
            "iota_g" => cfg.path_loss.iota_g = parse_plain(value).map_err(err)?,
            "iota_r" => cfg.path_loss.iota_r = parse_plain(value).map_err(err)?,
            "rho" => cfg.rho = parse_plain(value).map_err(err)?,
            "outer_tol" => cfg.outer_tol = parse_plain(value).map_err(err)?,
            "max_outer" => cfg.max_outer = parse_int(value).map_err(err)?,
            "inner_tol" => cfg.inner_tol = parse_plain(value).map_err(err)?,
            "max_inner" => cfg.max_inner = parse_int(value).map_err(err)?,
            "workers" => cfg.workers = parse_int(value).map_err(err)?,
            "timing" => cfg.timing = parse_switch(value).map_err(err)?,
            "out" => cfg.out = PathBuf::from(value),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
    }
    if let Some((line, text)) = sweep_text {
        cfg.sweep = parse_sweep(cfg.preset, &text).map_err(|msg| Error::Parse {
            line,
            msg: format!("sweep: {msg}"),
        })?;
    } else {
        cfg.sweep = vec![default_sweep_value(&cfg)];
    }
    Ok(cfg)
}

/// `1/1.1` style fractions are common for efficiencies.
fn parse_ratio(v: &str) -> std::result::Result<f64, String> {
    match v.split_once('/') {
        Some((a, b)) => Ok(parse_plain(a)? / parse_plain(b)?),
        None => parse_quantity(v),
    }
}

fn parse_sweep(preset: Preset, text: &str) -> std::result::Result<Vec<f64>, String> {
    match preset.axis() {
        SweepAxis::Amplifiers | SweepAxis::Users => parse_list(text, |s| parse_int::<usize>(s).map(|v| v as f64)),
        SweepAxis::UserX => parse_list(text, parse_plain),
        _ => parse_list(text, parse_quantity),
    }
}

fn default_sweep_value(cfg: &ExperimentConfig) -> f64 {
    match cfg.preset.axis() {
        SweepAxis::PBs => cfg.p_bs,
        SweepAxis::PRis => cfg.p_ris_tot,
        SweepAxis::Amplifiers => cfg.l as f64,
        SweepAxis::Users => cfg.k as f64,
        SweepAxis::UserX => cfg.user_x,
        SweepAxis::Gamma => cfg.gamma,
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_are_normalized() {
        let cfg = parse_config("P_BS = 40 dBm\nGamma = 8 dB\nW_BS = 6 dBW").unwrap();
        assert!((cfg.p_bs - 10.0).abs() < 1e-12);
        assert!((cfg.gamma - 6.309_573_444_801_933).abs() < 1e-12);
        assert!((cfg.w_bs - 3.981_071_705_534_973).abs() < 1e-12);
    }

    #[test]
    fn amplifier_count_must_divide_elements() {
        let cfg = parse_config("M = 256\nL = 48").unwrap();
        match cfg.validate() {
            Err(Error::InvalidParam { name, .. }) => assert_eq!(name, "L"),
            other => panic!("expected invalid L, got {other:?}"),
        }
        let cfg = parse_config("preset = sumrate_vs_L\nM = 64\nL = 16\nsweep = 4, 8, 12").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidParam { name, .. }) if name == "sweep"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("# comment\n\nN = 4\nfoo = 3") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("N 4"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_config("\nP_BS = 3 dBx"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_config("trials = -1"), Err(Error::Parse { line: 1, .. })));
        let cfg = parse_config("trials = 0").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidParam { name, .. }) if name == "trials"));
    }

    #[test]
    fn lists_and_presets() {
        let cfg = parse_config(
            "preset = power_vs_gamma\nsweep = 0 dB, 4 dB, 8dB\narchitectures = sub(16), fully, sub\nM = 64\nL = 8\nN = 8\nK = 2",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.preset, Preset::PowerVsGamma);
        assert_eq!(cfg.sweep.len(), 3);
        assert!((cfg.sweep[1] - 10f64.powf(0.4)).abs() < 1e-12);
        assert_eq!(
            cfg.architectures,
            vec![
                Architecture::Sub(Some(16)),
                Architecture::Fully,
                Architecture::Sub(None)
            ]
        );
        let sc = cfg.scenario(cfg.sweep[2], Architecture::Fully).unwrap();
        assert_eq!(sc.dims.l, 64);
        assert_eq!(sc.params.gamma, vec![cfg.sweep[2]; 2]);
        assert_eq!(cfg.architecture_label(1.0, Architecture::Sub(None)), "sub(8)");
        assert!("bogus".parse::<Preset>().is_err());
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn full_scale_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.n, cfg.k, cfg.m), (16, 4, 256));
        assert!((cfg.nu1 - 1.0 / 1.1).abs() < 1e-15);
        assert!((cfg.p_ris_tot - parse_quantity("4.15 dBW").unwrap()).abs() < 1e-12);
        let nu = parse_config("nu1 = 1/1.1").unwrap().nu1;
        assert!((nu - 1.0 / 1.1).abs() < 1e-15);
    }
}
