//! Plain-text `key=value` run configuration. Missing keys take the reference
//! scenario defaults; unknown keys are errors. `#` starts a comment.

use crate::flux::FluxKind;
use crate::model::{ModelParams, SourceMode};
use crate::ssp::IntegratorKind;
use crate::weno::WenoMode;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: missing '=' separator")]
    MissingSeparator { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value '{value}' for '{key}': {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtSpec {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSpec {
    Times(Vec<f64>),
    Interval(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub x_len: f64,
    pub y0: f64,
    pub y1: f64,
    pub params: ModelParams,
    pub integrator: IntegratorKind,
    pub flux: FluxKind,
    pub limiter: bool,
    pub weno_mode: WenoMode,
    pub weno_eps: f64,
    pub source_mode: SourceMode,
    pub dt: DtSpec,
    pub t_final: f64,
    pub snapshots: SnapshotSpec,
    pub out_dir: PathBuf,
    pub strict_positivity: bool,
    /// 0 lets the thread pool use every available core
    pub threads: usize,
    /// reserved; the solver core is deterministic and never draws from it
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nx: 50,
            ny: 150,
            x_len: 1.0,
            y0: -1.5,
            y1: 1.5,
            params: ModelParams::default(),
            integrator: IntegratorKind::MsStep3,
            flux: FluxKind::Upwind,
            limiter: true,
            weno_mode: WenoMode::Nonlinear,
            weno_eps: crate::weno::WENO_EPS_DEFAULT,
            source_mode: SourceMode::Tensor,
            dt: DtSpec::Auto,
            t_final: 0.687,
            snapshots: SnapshotSpec::Times(vec![0.1145, 0.2290, 0.3435, 0.4580, 0.5725, 0.6870]),
            out_dir: PathBuf::from("out"),
            strict_positivity: false,
            threads: 0,
            seed: 0,
        }
    }
}

fn parse_num(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_count(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_switch(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: "expected on|off".into(),
        }),
    }
}

/// Parse a configuration document on top of the defaults. Later assignments
/// override earlier ones, which is how command-line overrides are applied.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::MissingSeparator { line });
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |reason: &str| ConfigError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
            reason: reason.into(),
        };
        match key {
            "nx" => cfg.nx = parse_count(line, key, value)?,
            "ny" => cfg.ny = parse_count(line, key, value)?,
            "x_len" => cfg.x_len = parse_num(line, key, value)?,
            "y0" => cfg.y0 = parse_num(line, key, value)?,
            "y1" => cfg.y1 = parse_num(line, key, value)?,
            "delta1" => cfg.params.delta1 = parse_num(line, key, value)?,
            "beta" => cfg.params.beta = parse_num(line, key, value)?,
            "A" => cfg.params.alpha_max = parse_num(line, key, value)?,
            "Gamma" => cfg.params.gamma = parse_num(line, key, value)?,
            "Gamma1" => cfg.params.gamma1 = parse_num(line, key, value)?,
            "q1" => cfg.params.q1 = parse_num(line, key, value)?,
            "kappa" => cfg.params.kappa = parse_num(line, key, value)?,
            "chi" => cfg.params.chi = parse_num(line, key, value)?,
            "eta" => cfg.params.eta = parse_num(line, key, value)?,
            "epsilon_v" => cfg.params.epsilon_v = parse_num(line, key, value)?,
            "sigma_v" => cfg.params.sigma_v = parse_num(line, key, value)?,
            "a" => cfg.params.a_hypoxic = parse_num(line, key, value)?,
            "c_l" => cfg.params.c_l = parse_num(line, key, value)?,
            "c_l_decay" => cfg.params.c_l_decay = parse_num(line, key, value)?,
            "v0x" => cfg.params.v0.0 = parse_num(line, key, value)?,
            "v0y" => cfg.params.v0.1 = parse_num(line, key, value)?,
            "v_box" => cfg.params.v_box = parse_num(line, key, value)?,
            "integrator" => {
                cfg.integrator = match value {
                    "euler" => IntegratorKind::Euler,
                    "rk2" => IntegratorKind::Rk2,
                    "rk3" => IntegratorKind::Rk3,
                    "msstep3" => IntegratorKind::MsStep3,
                    _ => return Err(bad("expected euler|rk2|rk3|msstep3")),
                }
            }
            "flux" => {
                cfg.flux = match value {
                    "upwind" => FluxKind::Upwind,
                    "lax-friedrichs" => FluxKind::LaxFriedrichs,
                    _ => return Err(bad("expected upwind|lax-friedrichs")),
                }
            }
            "limiter" => cfg.limiter = parse_switch(line, key, value)?,
            "weno" => {
                cfg.weno_mode = match value {
                    "nonlinear" => WenoMode::Nonlinear,
                    "linear" => WenoMode::Linear,
                    _ => return Err(bad("expected nonlinear|linear")),
                }
            }
            "weno_eps" => cfg.weno_eps = parse_num(line, key, value)?,
            "source" => {
                cfg.source_mode = match value {
                    "tensor" => SourceMode::Tensor,
                    "cell-average" => SourceMode::CellAverage,
                    _ => return Err(bad("expected tensor|cell-average")),
                }
            }
            "dt" => {
                cfg.dt = if value == "auto" {
                    DtSpec::Auto
                } else {
                    DtSpec::Fixed(parse_num(line, key, value)?)
                }
            }
            "t_final" => cfg.t_final = parse_num(line, key, value)?,
            "snapshots" => {
                let mut times = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    times.push(parse_num(line, key, part)?);
                }
                cfg.snapshots = SnapshotSpec::Times(times);
            }
            "snapshot_interval" => {
                cfg.snapshots = SnapshotSpec::Interval(parse_num(line, key, value)?)
            }
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "strict_positivity" => cfg.strict_positivity = parse_switch(line, key, value)?,
            "threads" => cfg.threads = parse_count(line, key, value)?,
            "seed" => {
                cfg.seed = value.parse::<u64>().map_err(|e| ConfigError::BadValue {
                    line,
                    key: key.into(),
                    value: value.into(),
                    reason: e.to_string(),
                })?
            }
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// Invariant checks shared by the parser and programmatic construction.
pub fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    crate::grid::build_grid(cfg.x_len, cfg.y0, cfg.y1, cfg.nx, cfg.ny)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    cfg.params.validate().map_err(ConfigError::Invalid)?;
    if !(cfg.t_final > 0.0) || !cfg.t_final.is_finite() {
        return Err(ConfigError::Invalid(format!("t_final must be positive, got {}", cfg.t_final)));
    }
    if let DtSpec::Fixed(dt) = cfg.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ConfigError::Invalid(format!("dt must be positive, got {dt}")));
        }
    }
    if !(cfg.weno_eps > 0.0) {
        return Err(ConfigError::Invalid(format!("weno_eps must be positive, got {}", cfg.weno_eps)));
    }
    match &cfg.snapshots {
        SnapshotSpec::Times(times) => {
            for &t in times {
                if !(t >= 0.0) || t > cfg.t_final * (1.0 + 1e-12) {
                    return Err(ConfigError::Invalid(format!(
                        "snapshot time {t} outside [0, t_final = {}]",
                        cfg.t_final
                    )));
                }
            }
        }
        SnapshotSpec::Interval(iv) => {
            if !(iv > &0.0) {
                return Err(ConfigError::Invalid(format!("snapshot_interval must be positive, got {iv}")));
            }
        }
    }
    Ok(())
}

/// Canonical `key=value` rendering; `parse_config(serialize(c)) == c`.
pub fn serialize(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    kv("nx", cfg.nx.to_string());
    kv("ny", cfg.ny.to_string());
    kv("x_len", cfg.x_len.to_string());
    kv("y0", cfg.y0.to_string());
    kv("y1", cfg.y1.to_string());
    kv("delta1", cfg.params.delta1.to_string());
    kv("beta", cfg.params.beta.to_string());
    kv("A", cfg.params.alpha_max.to_string());
    kv("Gamma", cfg.params.gamma.to_string());
    kv("Gamma1", cfg.params.gamma1.to_string());
    kv("q1", cfg.params.q1.to_string());
    kv("kappa", cfg.params.kappa.to_string());
    kv("chi", cfg.params.chi.to_string());
    kv("eta", cfg.params.eta.to_string());
    kv("epsilon_v", cfg.params.epsilon_v.to_string());
    kv("sigma_v", cfg.params.sigma_v.to_string());
    kv("a", cfg.params.a_hypoxic.to_string());
    kv("c_l", cfg.params.c_l.to_string());
    kv("c_l_decay", cfg.params.c_l_decay.to_string());
    kv("v0x", cfg.params.v0.0.to_string());
    kv("v0y", cfg.params.v0.1.to_string());
    kv("v_box", cfg.params.v_box.to_string());
    kv("integrator", cfg.integrator.name().to_string());
    kv(
        "flux",
        match cfg.flux {
            FluxKind::Upwind => "upwind".to_string(),
            FluxKind::LaxFriedrichs => "lax-friedrichs".to_string(),
        },
    );
    kv("limiter", if cfg.limiter { "on" } else { "off" }.to_string());
    kv(
        "weno",
        match cfg.weno_mode {
            WenoMode::Nonlinear => "nonlinear",
            WenoMode::Linear => "linear",
        }
        .to_string(),
    );
    kv("weno_eps", cfg.weno_eps.to_string());
    kv(
        "source",
        match cfg.source_mode {
            SourceMode::Tensor => "tensor",
            SourceMode::CellAverage => "cell-average",
        }
        .to_string(),
    );
    kv(
        "dt",
        match cfg.dt {
            DtSpec::Auto => "auto".to_string(),
            DtSpec::Fixed(v) => v.to_string(),
        },
    );
    kv("t_final", cfg.t_final.to_string());
    match &cfg.snapshots {
        SnapshotSpec::Times(times) => {
            let list: Vec<String> = times.iter().map(|t| t.to_string()).collect();
            kv("snapshots", list.join(","));
        }
        SnapshotSpec::Interval(iv) => kv("snapshot_interval", iv.to_string()),
    }
    kv("out_dir", cfg.out_dir.display().to_string());
    kv("strict_positivity", if cfg.strict_positivity { "on" } else { "off" }.to_string());
    kv("threads", cfg.threads.to_string());
    kv("seed", cfg.seed.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_reference_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params.beta, 5.88);
        assert_eq!(cfg.t_final, 0.687);
        match &cfg.snapshots {
            SnapshotSpec::Times(t) => assert_eq!(t.len(), 6),
            _ => panic!("default snapshots are explicit times"),
        }
    }

    #[test]
    fn single_override_keeps_other_defaults() {
        let cfg = parse_config("nx=100\n").unwrap();
        assert_eq!(cfg.nx, 100);
        assert!((cfg.x_len / cfg.nx as f64 - 0.01).abs() < 1e-15);
        assert_eq!(cfg.ny, 150);
    }

    #[test]
    fn bad_enum_and_unknown_key_are_rejected() {
        match parse_config("flux=centered\n") {
            Err(ConfigError::BadValue { line, key, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(key, "flux");
            }
            other => panic!("{other:?}"),
        }
        match parse_config("# comment\nspeed=3\n") {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "speed");
            }
            other => panic!("{other:?}"),
        }
        match parse_config("nx 100\n") {
            Err(ConfigError::MissingSeparator { line }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_config("beta=fast\n") {
            Err(ConfigError::BadValue { key, .. }) => assert_eq!(key, "beta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(matches!(parse_config("t_final=0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("nx=3\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("snapshots=0.9\nt_final=0.5\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("beta=-1\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("dt=0\n"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("# full line\n\n  nx = 60  # trailing\n").unwrap();
        assert_eq!(cfg.nx, 60);
    }

    #[test]
    fn serialize_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.nx = 77;
        cfg.params.kappa = 0.0123;
        cfg.dt = DtSpec::Fixed(2.2906e-4);
        cfg.flux = FluxKind::LaxFriedrichs;
        cfg.weno_mode = WenoMode::Linear;
        cfg.strict_positivity = true;
        cfg.snapshots = SnapshotSpec::Times(vec![0.1, 0.2, 0.25]);
        cfg.t_final = 0.3;
        let text = serialize(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);

        let mut cfg = RunConfig::default();
        cfg.snapshots = SnapshotSpec::Interval(0.05);
        cfg.t_final = 0.31;
        let back = parse_config(&serialize(&cfg)).unwrap();
        assert_eq!(back, cfg);
    }
}
