//! Simulation driver: resolves the step size, marches the coupled system,
//! writes snapshots, a run manifest and a diagnostics report, and offers the
//! `report` and `verify` entry points the command line exposes.

use crate::config::{serialize, DtSpec, RunConfig, SnapshotSpec};
use crate::diagnostics::{fit_soliton, front_speed, marginal_profile, min_and_mass, FrontSpeed, SolitonFit};
use crate::flux::cfl_max_dt;
use crate::grid::{build_grid, make_quadrature};
use crate::model::{fill_ghosts, initial_state, ModelError, ModelRhs, ModelRhsOptions, SystemState};
use crate::snapshot::{format_float, read_snapshot, write_snapshot, SnapshotError};
use crate::ssp::{advance, AdvanceConfig};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("no manifest found in {0}")]
    ManifestMissing(PathBuf),
    #[error("corrupt manifest {path}: {reason}")]
    ManifestCorrupt { path: PathBuf, reason: String },
}

/// Why a run stopped early.
#[derive(Debug, Clone)]
pub struct AbortInfo {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SnapshotSummary {
    pub index: usize,
    pub step: usize,
    pub t: f64,
    pub file: String,
    pub min_rho: f64,
    pub mass_rho: f64,
    pub min_c: f64,
    pub mass_c: f64,
    pub max_c: f64,
    pub min_i: f64,
    pub mass_i: f64,
    pub fit: Option<SolitonFit>,
}

#[derive(Debug)]
pub struct RunReport {
    pub chi1: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub completed_steps: usize,
    pub running_min_rho: f64,
    pub running_min_c: f64,
    pub running_min_i: f64,
    pub running_max_c: f64,
    pub snapshots: Vec<SnapshotSummary>,
    pub front_speed: Option<FrontSpeed>,
    pub abort: Option<AbortInfo>,
    pub wall_seconds: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
enum StepError {
    Model(ModelError),
    NonFinite { field: &'static str, i: usize, j: usize },
    Negative { field: &'static str, min: f64 },
}

impl std::fmt::Display for StepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepError::Model(e) => write!(f, "{e}"),
            StepError::NonFinite { field, i, j } => {
                write!(f, "non-finite {field} at cell ({i}, {j})")
            }
            StepError::Negative { field, min } => {
                write!(f, "strict positivity violated: min {field} = {min}")
            }
        }
    }
}

/// Resolve snapshot emission steps: requested times snap to the nearest step.
fn snapshot_schedule(cfg: &RunConfig, dt: f64, n_steps: usize) -> Vec<(usize, f64)> {
    let times: Vec<f64> = match &cfg.snapshots {
        SnapshotSpec::Times(v) => v.clone(),
        SnapshotSpec::Interval(iv) => {
            let mut out = Vec::new();
            let mut k = 1usize;
            while k as f64 * iv <= cfg.t_final * (1.0 + 1e-12) {
                out.push(k as f64 * iv);
                k += 1;
            }
            out
        }
    };
    let mut sched: Vec<(usize, f64)> = times
        .iter()
        .map(|&t| (((t / dt).round() as usize).min(n_steps), t))
        .collect();
    sched.sort_by_key(|s| s.0);
    sched.dedup_by_key(|s| s.0);
    sched
}

/// Execute one configured run. Solver aborts are reported in the returned
/// [`RunReport`]; hard failures (configuration, I/O) are errors.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    crate::config::validate(cfg)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cfg.threads > 0 {
        pool = pool.num_threads(cfg.threads);
    }
    let pool = pool.build().expect("thread pool");
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let started = std::time::Instant::now();
    let grid = build_grid(cfg.x_len, cfg.y0, cfg.y1, cfg.nx, cfg.ny)?;
    let q = make_quadrature();
    let opts = ModelRhsOptions {
        flux: cfg.flux,
        limiter: cfg.limiter,
        mode: cfg.weno_mode,
        eps: cfg.weno_eps,
        dx_over_dt: 0.0,
        dy_over_dt: 0.0,
        source_mode: cfg.source_mode,
    };
    let mut model = ModelRhs::new(grid, q.clone(), cfg.params, opts)?;
    let chi1 = model.chi1;
    let mut state = initial_state(&grid, &cfg.params, &q)?;

    let dt = match cfg.dt {
        DtSpec::Fixed(v) => v,
        DtSpec::Auto => model.auto_dt(&mut state, cfg.integrator.ssp_factor())?,
    };
    model.opts.dx_over_dt = grid.dx / dt;
    model.opts.dy_over_dt = grid.dy / dt;
    let n_steps = ((cfg.t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let sched = snapshot_schedule(cfg, dt, n_steps);

    fs::create_dir_all(&cfg.out_dir)
        .map_err(|source| RunError::Io { path: cfg.out_dir.clone(), source })?;

    let mut running_min_rho = f64::INFINITY;
    let mut running_min_c = f64::INFINITY;
    let mut running_min_i = f64::INFINITY;
    let mut running_max_c = f64::NEG_INFINITY;
    let mut completed = 0usize;
    let mut snapshots: Vec<SnapshotSummary> = Vec::new();
    let mut write_error: Option<RunError> = None;

    let strict = cfg.strict_positivity;
    let outcome = {
        let mut observe = |step: usize, _t: f64, s: &SystemState| -> Result<(), StepError> {
            for (name, field) in
                [("rho", &s.rho), ("C", &s.c), ("I", &s.i_int)]
            {
                if let Some((i, j)) = field.find_non_finite() {
                    return Err(StepError::NonFinite { field: name, i, j });
                }
            }
            let mn_rho = s.rho.min_interior();
            let mn_c = s.c.min_interior();
            let mn_i = s.i_int.min_interior();
            running_min_rho = running_min_rho.min(mn_rho);
            running_min_c = running_min_c.min(mn_c);
            running_min_i = running_min_i.min(mn_i);
            running_max_c = running_max_c.max(s.c.max_interior());
            completed = step;
            if strict {
                if mn_rho < 0.0 {
                    return Err(StepError::Negative { field: "rho", min: mn_rho });
                }
                if mn_c < 0.0 {
                    return Err(StepError::Negative { field: "C", min: mn_c });
                }
                if mn_i < 0.0 {
                    return Err(StepError::Negative { field: "I", min: mn_i });
                }
            }
            Ok(())
        };
        let mut on_snapshot = |step: usize, t: f64, s: &SystemState| {
            if write_error.is_some() {
                return;
            }
            let index = snapshots.len();
            let file = format!("snap_{index:04}.csv");
            let path = cfg.out_dir.join(&file);
            if let Err(e) = write_snapshot(&path, cfg, &grid, s, step, t) {
                write_error = Some(e.into());
                return;
            }
            let (min_rho, mass_rho) = min_and_mass(&s.rho, &grid);
            let (min_c, mass_c) = min_and_mass(&s.c, &grid);
            let (min_i, mass_i) = min_and_mass(&s.i_int, &grid);
            let profile = marginal_profile(&s.rho, &grid);
            let xs: Vec<f64> = (0..grid.nx).map(|i| grid.x_center(i as isize)).collect();
            let fit = fit_soliton(&profile, &xs).ok();
            snapshots.push(SnapshotSummary {
                index,
                step,
                t,
                file,
                min_rho,
                mass_rho,
                min_c,
                mass_c,
                max_c: s.c.max_interior(),
                min_i,
                mass_i,
                fit,
            });
        };
        let adv_cfg = AdvanceConfig {
            kind: cfg.integrator,
            dt,
            n_steps,
            snapshot_steps: sched.iter().map(|s| s.0).collect(),
        };
        let mut rhs =
            |s: &mut SystemState, t: f64| model.eval(s, t).map_err(StepError::Model);
        advance(state, &mut rhs, &adv_cfg, &mut on_snapshot, &mut observe)
    };
    if let Some(e) = write_error {
        return Err(e);
    }
    let abort = match outcome {
        Ok(_) => None,
        Err(a) => Some(AbortInfo { step: a.step, reason: a.error.to_string() }),
    };

    let fit_points: Vec<(f64, f64)> = snapshots
        .iter()
        .filter_map(|s| s.fit.map(|f| (s.t, f.x_peak)))
        .collect();
    let speed = front_speed(&fit_points).ok();

    let report = RunReport {
        chi1,
        dt,
        n_steps,
        completed_steps: completed,
        running_min_rho,
        running_min_c,
        running_min_i,
        running_max_c,
        snapshots,
        front_speed: speed,
        abort,
        wall_seconds: started.elapsed().as_secs_f64(),
        out_dir: cfg.out_dir.clone(),
    };
    write_manifest(cfg, &report)?;
    write_diagnostics(cfg, &report)?;
    Ok(report)
}

fn write_manifest(cfg: &RunConfig, r: &RunReport) -> Result<(), RunError> {
    let path = cfg.out_dir.join("manifest.txt");
    let mut out = String::new();
    out.push_str("# angio run manifest\n");
    let _ = writeln!(out, "version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "status: {}", if r.abort.is_some() { "aborted" } else { "complete" });
    if let Some(a) = &r.abort {
        let _ = writeln!(out, "abort_step: {}", a.step);
        let _ = writeln!(out, "abort_reason: {}", a.reason);
    }
    let _ = writeln!(out, "chi1: {}", format_float(r.chi1));
    let _ = writeln!(out, "dt: {}", format_float(r.dt));
    let _ = writeln!(out, "n_steps: {}", r.n_steps);
    let _ = writeln!(out, "completed_steps: {}", r.completed_steps);
    let _ = writeln!(out, "wall_seconds: {:.3}", r.wall_seconds);
    let _ = writeln!(out, "running_min_rho: {}", format_float(r.running_min_rho));
    let _ = writeln!(out, "running_min_c: {}", format_float(r.running_min_c));
    let _ = writeln!(out, "running_min_i: {}", format_float(r.running_min_i));
    let _ = writeln!(out, "running_max_c: {}", format_float(r.running_max_c));
    out.push_str("[config]\n");
    out.push_str(&serialize(cfg));
    out.push_str("[snapshots]\n");
    for s in &r.snapshots {
        let _ = writeln!(out, "{}", s.file);
    }
    fs::write(&path, out).map_err(|source| RunError::Io { path, source })
}

fn write_diagnostics(cfg: &RunConfig, r: &RunReport) -> Result<(), RunError> {
    let path = cfg.out_dir.join("diagnostics.txt");
    let mut out = String::new();
    out.push_str("# per-snapshot diagnostics\n");
    out.push_str(
        "# index t min_rho mass_rho min_c mass_c max_c min_i mass_i fit_amplitude fit_width fit_x fit_r2\n",
    );
    for s in &r.snapshots {
        let fit = match &s.fit {
            Some(f) => format!(
                "{} {} {} {}",
                format_float(f.amplitude),
                format_float(f.width_param),
                format_float(f.x_peak),
                format_float(f.r_squared)
            ),
            None => "- - - -".to_string(),
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            s.index,
            format_float(s.t),
            format_float(s.min_rho),
            format_float(s.mass_rho),
            format_float(s.min_c),
            format_float(s.mass_c),
            format_float(s.max_c),
            format_float(s.min_i),
            format_float(s.mass_i),
            fit
        );
    }
    match &r.front_speed {
        Some(fs) => {
            let _ = writeln!(
                out,
                "front_speed: {} residual_rms: {}",
                format_float(fs.speed),
                format_float(fs.residual_rms)
            );
        }
        None => out.push_str("front_speed: -\n"),
    }
    if let Some(a) = &r.abort {
        let _ = writeln!(out, "aborted_at_step: {} reason: {}", a.step, a.reason);
    }
    fs::write(&path, out).map_err(|source| RunError::Io { path, source })
}

struct Manifest {
    status: String,
    abort_reason: Option<String>,
    chi1: f64,
    dt: f64,
    config_text: String,
    snapshot_files: Vec<String>,
}

fn read_manifest(dir: &Path) -> Result<Manifest, RunError> {
    let path = dir.join("manifest.txt");
    if !path.exists() {
        return Err(RunError::ManifestMissing(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path)
        .map_err(|source| RunError::Io { path: path.clone(), source })?;
    let corrupt = |reason: &str| RunError::ManifestCorrupt {
        path: path.clone(),
        reason: reason.to_string(),
    };
    let mut status = None;
    let mut abort_reason = None;
    let mut chi1 = None;
    let mut dt = None;
    let mut config_text = String::new();
    let mut snapshot_files = Vec::new();
    let mut section = "";
    for line in text.lines() {
        if line.starts_with('#') {
            continue;
        }
        if line == "[config]" {
            section = "config";
            continue;
        }
        if line == "[snapshots]" {
            section = "snapshots";
            continue;
        }
        match section {
            "config" => {
                config_text.push_str(line);
                config_text.push('\n');
            }
            "snapshots" => {
                if !line.trim().is_empty() {
                    snapshot_files.push(line.trim().to_string());
                }
            }
            _ => {
                if let Some((k, v)) = line.split_once(':') {
                    let v = v.trim();
                    match k.trim() {
                        "status" => status = Some(v.to_string()),
                        "abort_reason" => abort_reason = Some(v.to_string()),
                        "chi1" => chi1 = v.parse().ok(),
                        "dt" => dt = v.parse().ok(),
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(Manifest {
        status: status.ok_or_else(|| corrupt("missing status"))?,
        abort_reason,
        chi1: chi1.ok_or_else(|| corrupt("missing chi1"))?,
        dt: dt.ok_or_else(|| corrupt("missing dt"))?,
        config_text,
        snapshot_files,
    })
}

/// Human-readable summary of a finished (or aborted) run directory, with the
/// per-snapshot audits and fits recomputed from the snapshot files.
pub fn report(dir: &Path) -> Result<String, RunError> {
    let manifest = read_manifest(dir)?;
    let cfg = crate::config::parse_config(&manifest.config_text).map_err(|e| {
        RunError::ManifestCorrupt {
            path: dir.join("manifest.txt"),
            reason: format!("config echo does not parse: {e}"),
        }
    })?;
    let mut out = String::new();
    let _ = writeln!(out, "run directory : {}", dir.display());
    let _ = writeln!(out, "status        : {}", manifest.status);
    if let Some(r) = &manifest.abort_reason {
        let _ = writeln!(out, "abort reason  : {r}");
    }
    let _ = writeln!(out, "chi1          : {:.9e}", manifest.chi1);
    let _ = writeln!(out, "dt            : {:.9e}", manifest.dt);
    let _ = writeln!(out, "grid          : {} x {} cells", cfg.nx, cfg.ny);
    let _ = writeln!(
        out,
        "{:>3} {:>10} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10} {:>10} {:>8}",
        "k", "t", "min rho", "mass rho", "min C", "mass C", "amp", "width", "X", "r2"
    );
    let mut fit_points = Vec::new();
    for (k, file) in manifest.snapshot_files.iter().enumerate() {
        let snap = read_snapshot(&dir.join(file))?;
        let (min_rho, mass_rho) = min_and_mass(&snap.rho, &snap.grid);
        let (min_c, mass_c) = min_and_mass(&snap.c, &snap.grid);
        let profile = marginal_profile(&snap.rho, &snap.grid);
        let xs: Vec<f64> =
            (0..snap.grid.nx).map(|i| snap.grid.x_center(i as isize)).collect();
        match fit_soliton(&profile, &xs) {
            Ok(fit) => {
                fit_points.push((snap.t, fit.x_peak));
                let _ = writeln!(
                    out,
                    "{:>3} {:>10.5} {:>12.4e} {:>12.6e} {:>12.4e} {:>12.6e} {:>10.4} {:>10.4} {:>10.5} {:>8.5}",
                    k, snap.t, min_rho, mass_rho, min_c, mass_c,
                    fit.amplitude, fit.width_param, fit.x_peak, fit.r_squared
                );
            }
            Err(_) => {
                let _ = writeln!(
                    out,
                    "{:>3} {:>10.5} {:>12.4e} {:>12.6e} {:>12.4e} {:>12.6e} {:>10} {:>10} {:>10} {:>8}",
                    k, snap.t, min_rho, mass_rho, min_c, mass_c, "-", "-", "-", "-"
                );
            }
        }
    }
    match front_speed(&fit_points) {
        Ok(fs) => {
            let _ = writeln!(
                out,
                "front speed   : {:.5} (rms residual {:.2e}, {} fits)",
                fs.speed,
                fs.residual_rms,
                fit_points.len()
            );
        }
        Err(_) => {
            let _ = writeln!(out, "front speed   : not available (fewer than 3 fits)");
        }
    }
    Ok(out)
}

/// One verification check outcome.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast self-checks: quadrature and reconstruction exactness, the published
/// weight table against its oracle, integrator orders, the dual consumption
/// quadratures, discrete conservation and a positivity probe.
pub fn verify() -> Vec<Check> {
    use crate::diagnostics::convergence_order;
    use crate::flux::{spatial_rhs, AdvectionSamples, RhsOptions, SourceSpec};
    use crate::grid::{double_average, AveragedField};
    use crate::weno::recon::ExteriorRule;
    use crate::weno::{
        reconstruct_point, solve_exactness_weights, table2_diff_report, CanonicalPoint,
        LinearWeightTable, Stencil5, Table2Misprint, WenoMode, CANONICAL_POINTS,
    };
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| {
        checks.push(Check { name, passed, detail });
    };

    // quadrature exactness on monomials
    {
        let g = build_grid(2.0, -1.0, 2.0, 8, 9).unwrap();
        let q = make_quadrature();
        let mut worst = 0.0_f64;
        for p in 0..=5i32 {
            for r in 0..=5i32 {
                let got = double_average(|x, y| x.powi(p) * y.powi(r), 3, 4, &g, &q).unwrap();
                let fine = {
                    // 7-point Gauss per direction on the nested averages
                    let gl = [
                        (-0.949107912342759, 0.129484966168870),
                        (-0.741531185599394, 0.279705391489277),
                        (-0.405845151377397, 0.381830050505119),
                        (0.0, 0.417959183673469),
                        (0.405845151377397, 0.381830050505119),
                        (0.741531185599394, 0.279705391489277),
                        (0.949107912342759, 0.129484966168870),
                    ];
                    let avg1 = |c: f64, h: f64, pw: i32| -> f64 {
                        let inner = |s: f64| -> f64 {
                            let a = s - 0.5 * h;
                            let b = s + 0.5 * h;
                            (b.powi(pw + 1) - a.powi(pw + 1)) / ((pw + 1) as f64 * h)
                        };
                        0.5 * gl.iter().map(|(n, w)| w * inner(c + 0.5 * h * n)).sum::<f64>()
                    };
                    avg1(g.x_center(3), g.dx, p) * avg1(g.y_center(4), g.dy, r)
                };
                worst = worst.max((got - fine).abs() / fine.abs().max(1e-30));
            }
        }
        push("quadrature exactness (degree <= 5)", worst <= 1e-13, format!("max rel err {worst:.2e}"));
    }

    // reconstruction exactness on degree-4 data, linear weighting
    {
        let da = |l: u32, k: f64| -> f64 {
            match l {
                0 => 1.0,
                1 => k,
                2 => k * k + 1.0 / 6.0,
                3 => k * k * k + 0.5 * k,
                _ => k.powi(4) + k * k + 1.0 / 15.0,
            }
        };
        let mut worst = 0.0_f64;
        for l in 0..=4u32 {
            let mut s = [0.0; 5];
            for (idx, cell) in (-2..=2).enumerate() {
                s[idx] = da(l, cell as f64);
            }
            let s = Stencil5(s);
            for &p in &CANONICAL_POINTS {
                let got = reconstruct_point(&s, p, 1e-6, WenoMode::Linear);
                let want = p.offset().powi(l as i32);
                worst = worst.max((got - want).abs());
            }
        }
        push("reconstruction exactness (degree <= 4)", worst <= 1e-11, format!("max err {worst:.2e}"));
    }

    // stored weight table vs exactness oracle, and the published-diff audit
    {
        let mut worst = 0.0_f64;
        for e in LinearWeightTable::get().all() {
            let (d, _) = solve_exactness_weights(e.offset);
            for m in 0..3 {
                worst = worst.max((d[m] - e.d[m]).abs() / e.d[m].abs().max(1.0));
            }
        }
        let diffs = table2_diff_report();
        let expected = diffs.len() == 3
            && matches!(
                diffs[0],
                Table2Misprint::Value { point: CanonicalPoint::Interior(0), column: 2, .. }
            )
            && matches!(diffs[1], Table2Misprint::PointLabel { .. })
            && matches!(diffs[2], Table2Misprint::PointLabel { .. });
        push(
            "weight table oracle + misprint audit",
            worst <= 1e-12 && expected,
            format!("max table err {worst:.2e}; {} documented misprints", diffs.len()),
        );
    }

    // integrator orders on u' = -u
    {
        use crate::ssp::{advance as ssp_advance, AdvanceConfig, IntegratorKind};
        let run = |kind: IntegratorKind, n: usize| -> f64 {
            let cfg = AdvanceConfig { kind, dt: 1.0 / n as f64, n_steps: n, snapshot_steps: vec![] };
            ssp_advance(
                1.0_f64,
                &mut |u: &mut f64, _| Ok::<f64, std::convert::Infallible>(-*u),
                &cfg,
                &mut |_, _, _| {},
                &mut |_, _, _| Ok(()),
            )
            .unwrap_or_else(|_| unreachable!())
        };
        let exact = (-1.0_f64).exp();
        let order = |kind: IntegratorKind| {
            let e1 = (run(kind, 20) - exact).abs();
            let e2 = (run(kind, 40) - exact).abs();
            (e1 / e2).log2()
        };
        use crate::ssp::IntegratorKind as K;
        let (oe, o2, o3, om) = (order(K::Euler), order(K::Rk2), order(K::Rk3), order(K::MsStep3));
        push(
            "integrator orders",
            oe >= 0.95 && o2 >= 1.95 && o3 >= 2.95 && om >= 2.95,
            format!("euler {oe:.2}, rk2 {o2:.2}, rk3 {o3:.2}, msstep3 {om:.2}"),
        );
    }

    // dual quadratures of the consumption coefficient
    {
        let p = crate::model::ModelParams::default();
        match (p.chi1(), p.chi1_unlimited()) {
            (Ok(adaptive), Ok(unlimited)) => {
                let simpson = p.chi1_simpson();
                let rel = (adaptive - simpson).abs() / adaptive.abs();
                let rel_lim = (adaptive - unlimited).abs() / unlimited.abs();
                push(
                    "chi1 dual quadrature + cutoff limit",
                    rel < 1e-8 && rel_lim < 1e-6,
                    format!("dual rel {rel:.2e}, limit rel {rel_lim:.2e}"),
                );
            }
            _ => push("chi1 dual quadrature + cutoff limit", false, "quadrature failed".into()),
        }
    }

    // conservation under periodic pure advection
    {
        let g = build_grid(1.0, 0.0, 1.0, 12, 10).unwrap();
        let q = make_quadrature();
        let tau = std::f64::consts::TAU;
        let mut f = AveragedField::from_fn(&g, &q, |x, y| {
            1.5 + (tau * x).sin() * (tau * y).cos()
        })
        .unwrap();
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (0.9, -0.4));
        let opts = RhsOptions { exterior: ExteriorRule::PeriodicWrap, ..Default::default() };
        let mut ws = crate::flux::RhsWorkspace::new();
        let dt = cfl_max_dt(0.9, 0.4, 0.0, &g, 1.0).unwrap();
        let m0 = f.sum_interior() * g.cell_area();
        let mut ok = true;
        let mut drift = 0.0_f64;
        for _ in 0..200 {
            f.fill_ghosts_periodic();
            let rhs = match spatial_rhs(&f, Some(&adv), 0.0, SourceSpec::None, &g, &q, &opts, &mut ws)
            {
                Ok(r) => r,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            for i in 0..g.nx as isize {
                for j in 0..g.ny as isize {
                    f.set(i, j, f.get(i, j) + dt * rhs.get(i, j));
                }
            }
            drift = drift.max((f.sum_interior() * g.cell_area() - m0).abs());
        }
        push("mass conservation (periodic advection)", ok && drift <= 1e-10, format!("max drift {drift:.2e}"));
    }

    // positivity probe: one Euler step from a nonnegative bump
    {
        let g = build_grid(1.0, 0.0, 1.0, 20, 20).unwrap();
        let q = make_quadrature();
        let f = AveragedField::from_fn(&g, &q, |x, y| {
            (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.01).exp()
        })
        .unwrap();
        let mut f = f;
        f.fill_ghosts_periodic();
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (1.0, 0.5));
        let opts = RhsOptions {
            limiter: true,
            exterior: ExteriorRule::PeriodicWrap,
            ..Default::default()
        };
        let mut ws = crate::flux::RhsWorkspace::new();
        let dt = cfl_max_dt(1.0, 0.5, 0.0, &g, 1.0).unwrap();
        let rhs = spatial_rhs(&f, Some(&adv), 0.0, SourceSpec::None, &g, &q, &opts, &mut ws);
        let min = match rhs {
            Ok(r) => {
                let mut m = f64::INFINITY;
                for i in 0..20 {
                    for j in 0..20 {
                        m = m.min(f.get(i, j) + dt * r.get(i, j));
                    }
                }
                m
            }
            Err(_) => f64::NEG_INFINITY,
        };
        push("positivity probe (limited Euler step)", min >= 0.0, format!("min after step {min:.2e}"));
    }

    // convergence-order estimator sanity
    {
        let h = [0.1_f64, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x.powi(5)).collect();
        let o = convergence_order(&e, &h).unwrap_or(0.0);
        push("order estimator", (o - 5.0).abs() < 1e-9, format!("slope {o:.6}"));
    }

    checks
}

/// Model time-stepping entry used by tests that need a bare state trajectory
/// without files: fills ghosts, resolves dt, runs, and returns the final
/// state with running minima.
pub struct BareRunOutcome {
    pub final_state: SystemState,
    pub dt: f64,
    pub n_steps: usize,
    pub min_rho: f64,
    pub min_c: f64,
    pub max_c: f64,
}

pub fn run_bare(cfg: &RunConfig) -> Result<BareRunOutcome, RunError> {
    crate::config::validate(cfg)?;
    let grid = build_grid(cfg.x_len, cfg.y0, cfg.y1, cfg.nx, cfg.ny)?;
    let q = make_quadrature();
    let opts = ModelRhsOptions {
        flux: cfg.flux,
        limiter: cfg.limiter,
        mode: cfg.weno_mode,
        eps: cfg.weno_eps,
        dx_over_dt: 0.0,
        dy_over_dt: 0.0,
        source_mode: cfg.source_mode,
    };
    let mut model = ModelRhs::new(grid, q.clone(), cfg.params, opts)?;
    let mut state = initial_state(&grid, &cfg.params, &q)?;
    fill_ghosts(&mut state, &grid, &cfg.params, &q, 0.0);
    let dt = match cfg.dt {
        DtSpec::Fixed(v) => v,
        DtSpec::Auto => model.auto_dt(&mut state, cfg.integrator.ssp_factor())?,
    };
    model.opts.dx_over_dt = grid.dx / dt;
    model.opts.dy_over_dt = grid.dy / dt;
    let n_steps = ((cfg.t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut min_rho = f64::INFINITY;
    let mut min_c = f64::INFINITY;
    let mut max_c = f64::NEG_INFINITY;
    let adv_cfg = AdvanceConfig { kind: cfg.integrator, dt, n_steps, snapshot_steps: vec![] };
    let mut rhs = |s: &mut SystemState, t: f64| model.eval(s, t).map_err(StepError::Model);
    let final_state = advance(
        state,
        &mut rhs,
        &adv_cfg,
        &mut |_, _, _| {},
        &mut |_, _, s: &SystemState| -> Result<(), StepError> {
            min_rho = min_rho.min(s.rho.min_interior());
            min_c = min_c.min(s.c.min_interior());
            max_c = max_c.max(s.c.max_interior());
            Ok(())
        },
    )
    .map_err(|a| match a.error {
        StepError::Model(e) => RunError::Model(e),
        other => unreachable!("bare runs abort only through the model: {other}"),
    })?;
    Ok(BareRunOutcome { final_state, dt, n_steps, min_rho, min_c, max_c })
}
