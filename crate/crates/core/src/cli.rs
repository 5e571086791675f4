//! Subcommand implementations behind the binary: parameter checks,
//! simulations, scattering runs, sweeps, and the selftest battery.
//!
//! Every output file is tied to the configuration by its content hash;
//! writing into an output directory whose manifest carries a different
//! hash is refused.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{RunConfig, ScatterPipeline};
use crate::dynamics::{
    energy, evolve, from_halfwaves, picard_iterate, to_halfwaves, FieldState, Trajectory,
};
use crate::error::{Error, Result};
use crate::params::{check_constraints, feasible_gamma_interval, theoretical_decay, Params};
use crate::potential::{build_kernel, KernelMultiplier};
use crate::scattering::{
    extract_final_state, solve_final_state_problem, xnorm_diagnostics, FinalStateConfig,
    ScatteringReport, XNormReport,
};
use crate::spectral::{write_field, ComplexField, SpectralGrid};
use crate::util::{fmt_f64, parse_rational, rational_f64, rational_string};

/// Outcome of `check-params`: the JSON report and the feasibility bit
/// that drives the exit code.
pub fn cmd_check_params(cfg: &RunConfig) -> Result<(serde_json::Value, bool)> {
    let params = cfg.build_params()?;
    let report = check_constraints(&params);
    let interval = feasible_gamma_interval(params.n())?;
    let json = serde_json::json!({
        "config_hash": cfg.hash(),
        "params": {
            "n": params.n(),
            "gamma": rational_string(params.gamma()),
            "beta": rational_string(params.beta()),
            "k": rational_string(params.weight()),
        },
        "gamma_interval": {
            "lower": rational_string(&interval.lower),
            "upper": rational_string(&interval.upper),
            "empty": interval.is_empty(),
        },
        "report": report.to_json(),
    });
    Ok((json, report.feasible))
}

fn ensure_out_dir(out: &Path, hash: &str) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = out.join("manifest.json");
    if manifest.exists() {
        let text = fs::read_to_string(&manifest)?;
        if let Ok(previous) = serde_json::from_str::<serde_json::Value>(&text) {
            if let Some(old) = previous.get("config_hash").and_then(|v| v.as_str()) {
                if old != hash {
                    return Err(Error::Config(format!(
                        "output directory {} belongs to config {old}, refusing to mix with {hash}",
                        out.display()
                    )));
                }
            }
        }
    }
    Ok(())
}

fn write_manifest(out: &Path, manifest: &serde_json::Value) -> Result<PathBuf> {
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(manifest)?)?;
    Ok(path)
}

fn write_field_file(out: &Path, name: &str, field: &ComplexField) -> Result<String> {
    let path = out.join(name);
    let mut writer = BufWriter::new(fs::File::create(&path)?);
    write_field(field, &mut writer)?;
    Ok(name.to_string())
}

fn gaussian_data(cfg: &RunConfig, grid: &std::sync::Arc<SpectralGrid>) -> Result<FieldState> {
    let data = cfg
        .initial_data
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs an initial_data section".into()))?;
    if data.k0.len() != grid.dim() {
        return Err(Error::Config(format!(
            "k0 needs {} components, got {}",
            grid.dim(),
            data.k0.len()
        )));
    }
    let f = ComplexField::gaussian(grid, data.amplitude, data.sigma, &data.k0);
    let g = ComplexField::zeros(grid);
    FieldState::new(f, g, 0.0)
}

fn sample_times(t0: f64, dt: f64, steps: usize, every: usize) -> Vec<f64> {
    let every = every.max(1);
    let mut times: Vec<f64> = (0..=steps)
        .filter(|j| j % every == 0 || *j == steps)
        .map(|j| t0 + j as f64 * dt)
        .collect();
    times.dedup();
    times
}

fn run_forward(cfg: &RunConfig) -> Result<(Trajectory, KernelMultiplier)> {
    cfg.validate_mode()?;
    let grid = cfg.build_grid()?;
    let kernel = build_kernel(&grid, &cfg.build_potential_spec()?)?;
    let initial = gaussian_data(cfg, &grid)?;
    let integ = cfg
        .integrator
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs an integrator section".into()))?;
    let steps = (integ.t_final / integ.dt).round() as usize;
    let times = sample_times(0.0, integ.dt, steps, integ.sample_every);
    let traj = evolve(
        &initial,
        integ.t_final,
        integ.dt,
        &times,
        &kernel,
        cfg.potential.coupling,
        cfg.theorem_mode(),
    )?;
    Ok((traj, kernel))
}

/// Summary returned by `simulate`.
#[derive(Debug)]
pub struct SimulateSummary {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub energy_drift: f64,
    pub samples: usize,
}

/// Run the Strang integrator and write the norms CSV, field snapshots,
/// and manifest.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary> {
    let hash = cfg.hash();
    ensure_out_dir(out, &hash)?;
    let (traj, kernel) = run_forward(cfg)?;
    let beta = cfg.beta_f64()?;
    let coupling = cfg.potential.coupling;

    let csv_path = out.join("norms.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(["t", "energy", "u_hbeta", "w_plus_hbeta", "w_minus_hbeta", "config_hash"])?;
    let mut files = Vec::new();
    let mut norm_rows = Vec::new();
    let mut first_energy = None;
    let mut last_energy = 0.0;
    for (idx, pair) in traj.samples().iter().enumerate() {
        let state = from_halfwaves(pair);
        let e = energy(&state, &kernel, coupling)?;
        first_energy.get_or_insert(e);
        last_energy = e;
        let u_norm = state.u.h_norm(beta);
        writer.write_record([
            fmt_f64(pair.time),
            fmt_f64(e),
            fmt_f64(u_norm),
            fmt_f64(pair.plus.h_norm(beta)),
            fmt_f64(pair.minus.h_norm(beta)),
            hash.clone(),
        ])?;
        norm_rows.push(serde_json::json!({"t": pair.time, "energy": e, "u_hbeta": u_norm}));
        files.push(write_field_file(out, &format!("w_plus_{idx:04}.bin"), &pair.plus)?);
        files.push(write_field_file(out, &format!("w_minus_{idx:04}.bin"), &pair.minus)?);
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))?;

    let first = first_energy.unwrap_or(0.0);
    let energy_drift = if first.abs() > 0.0 { (last_energy - first).abs() / first.abs() } else { 0.0 };
    let manifest = serde_json::json!({
        "tool": "kgscatter simulate",
        "config_hash": hash,
        "config": cfg,
        "meta": traj.meta,
        "times": traj.times(),
        "norms": norm_rows,
        "threads": cfg.threads.unwrap_or(1),
        "energy_drift": energy_drift,
        "files": files,
    });
    let manifest_path = write_manifest(out, &manifest)?;
    Ok(SimulateSummary { csv_path, manifest_path, energy_drift, samples: traj.len() })
}

fn write_series_csv(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["t", "value"])?;
    for (t, v) in series {
        writer.write_record([fmt_f64(*t), fmt_f64(*v)])?;
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// Summary returned by `scatter`.
#[derive(Debug)]
pub struct ScatterSummary {
    pub manifest_path: PathBuf,
    pub delta_fit: Option<f64>,
    pub free_flow: bool,
}

/// Forward scattering diagnostics or the final-state problem, per the
/// config's scatter.pipeline.
pub fn cmd_scatter(cfg: &RunConfig, out: &Path) -> Result<ScatterSummary> {
    let hash = cfg.hash();
    ensure_out_dir(out, &hash)?;
    let scatter = cfg
        .scatter
        .as_ref()
        .ok_or_else(|| Error::Config("scatter needs a scatter section".into()))?;
    let beta = cfg.beta_f64()?;
    let params = cfg.build_params()?;
    let delta_theory = theoretical_decay(params.n(), params.beta())?;

    match scatter.pipeline {
        ScatterPipeline::Forward => {
            let (traj, kernel) = run_forward(cfg)?;
            let report = extract_final_state(
                &traj,
                beta,
                Some(delta_theory),
                scatter.fit_window,
            )?;
            let xnorm = xnorm_diagnostics(&traj, &kernel, cfg.potential.coupling, beta)?;
            write_reports(out, cfg, &hash, &report, Some(&xnorm), None)?;
            Ok(ScatterSummary {
                manifest_path: out.join("manifest.json"),
                delta_fit: report.delta_fit.as_ref().map(|f| f.delta),
                free_flow: report.free_flow,
            })
        }
        ScatterPipeline::FinalState => {
            cfg.validate_mode()?;
            let grid = cfg.build_grid()?;
            let kernel = build_kernel(&grid, &cfg.build_potential_spec()?)?;
            let data = gaussian_data(cfg, &grid)?;
            let picard = cfg
                .picard
                .as_ref()
                .ok_or_else(|| Error::Config("final-state pipeline needs a picard section".into()))?;
            let t_start = scatter
                .t_start
                .ok_or_else(|| Error::Config("final-state pipeline needs scatter.t_start".into()))?;
            let guard = scatter.smallness_guard.or(if cfg.theorem_mode() { Some(1.0) } else { None });
            let fs_cfg = FinalStateConfig {
                t_start,
                dtau: picard.dtau,
                iterations: picard.iterations,
                beta,
                sign: cfg.final_state_sign()?,
                smallness_guard: guard,
                enforce_horizon: cfg.theorem_mode(),
            };
            let sol = solve_final_state_problem(&data.u, &data.v, &fs_cfg, &kernel, cfg.potential.coupling)?;
            let files = vec![
                write_field_file(out, "f_plus.bin", &sol.f_plus)?,
                write_field_file(out, "g_plus.bin", &sol.g_plus)?,
                write_field_file(out, "w_plus_final_plus.bin", &sol.w_plus.plus)?,
                write_field_file(out, "w_plus_final_minus.bin", &sol.w_plus.minus)?,
            ];
            write_series_csv(&out.join("tail.csv"), &sol.report.tail_series)?;
            write_series_csv(&out.join("cauchy.csv"), &sol.report.cauchy_series)?;
            let manifest = serde_json::json!({
                "tool": "kgscatter scatter (final-state)",
                "config_hash": hash,
                "config": cfg,
                "picard": sol.picard,
                "report": sol.report.to_json(),
                "threads": cfg.threads.unwrap_or(1),
                "files": files,
            });
            let manifest_path = write_manifest(out, &manifest)?;
            Ok(ScatterSummary {
                manifest_path,
                delta_fit: sol.report.delta_fit.as_ref().map(|f| f.delta),
                free_flow: sol.report.free_flow,
            })
        }
    }
}

fn write_reports(
    out: &Path,
    cfg: &RunConfig,
    hash: &str,
    report: &ScatteringReport,
    xnorm: Option<&XNormReport>,
    extra: Option<serde_json::Value>,
) -> Result<()> {
    let mut report_json = report.to_json();
    report_json["config_hash"] = serde_json::Value::String(hash.to_string());
    fs::write(out.join("scattering_report.json"), serde_json::to_string_pretty(&report_json)?)?;
    if let Some(x) = xnorm {
        let mut j = serde_json::to_value(x)?;
        j["config_hash"] = serde_json::Value::String(hash.to_string());
        fs::write(out.join("xnorm_report.json"), serde_json::to_string_pretty(&j)?)?;
    }
    write_series_csv(&out.join("tail.csv"), &report.tail_series)?;
    write_series_csv(&out.join("cauchy.csv"), &report.cauchy_series)?;
    let mut files = vec![
        "scattering_report.json".to_string(),
        "tail.csv".to_string(),
        "cauchy.csv".to_string(),
    ];
    if xnorm.is_some() {
        files.push("xnorm_report.json".to_string());
    }
    files.push(write_field_file(out, "final_profile_plus.bin", &report.final_state.plus)?);
    files.push(write_field_file(out, "final_profile_minus.bin", &report.final_state.minus)?);
    let mut manifest = serde_json::json!({
        "tool": "kgscatter scatter (forward)",
        "config_hash": hash,
        "config": cfg,
        "threads": cfg.threads.unwrap_or(1),
        "files": files,
    });
    if let Some(extra) = extra {
        manifest["extra"] = extra;
    }
    write_manifest(out, &manifest)?;
    Ok(())
}

const SWEEP_COLUMNS: [&str; 14] = [
    "gamma",
    "beta",
    "points",
    "dt",
    "amplitude",
    "feasible",
    "delta_positive",
    "contraction_ratio",
    "picard_diverged",
    "energy_drift",
    "selfconv_error",
    "delta_fit",
    "status",
    "config_hash",
];

#[derive(Debug, Clone)]
struct SweepCase {
    gamma: String,
    beta: String,
    points: usize,
    dt: Option<f64>,
    amplitude: Option<f64>,
}

fn sweep_row(cfg: &RunConfig, case: &SweepCase, hash: &str) -> Vec<String> {
    let mut row = vec![
        case.gamma.clone(),
        case.beta.clone(),
        case.points.to_string(),
        case.dt.map(fmt_f64).unwrap_or_default(),
        case.amplitude.map(fmt_f64).unwrap_or_default(),
    ];
    let blank = |row: &mut Vec<String>, n: usize| {
        for _ in 0..n {
            row.push(String::new());
        }
    };
    let outcome = (|| -> Result<Vec<String>> {
        let mut cells = Vec::new();
        let gamma = parse_rational(&case.gamma)?;
        let beta = parse_rational(&case.beta)?;
        let params = Params::new(cfg.params.n, gamma, beta.clone(), parse_rational(&cfg.params.k)?)?;
        let report = check_constraints(&params);
        cells.push(report.feasible.to_string());
        cells.push(report.delta_positive.to_string());
        if cfg.theorem_mode() && !report.feasible {
            // infeasible rows are recorded, not run
            for _ in 0..4 {
                cells.push(String::new());
            }
            return Ok(cells);
        }

        let grid = SpectralGrid::new(cfg.params.n as usize, case.points, cfg.grid.box_length)?;
        let spec = crate::potential::PotentialSpec::new(parse_rational(&case.gamma)?)?
            .with_backend(cfg.potential.backend)
            .with_origin_rule(cfg.potential.origin_rule)
            .with_coupling(cfg.potential.coupling);
        let kernel = build_kernel(&grid, &spec)?;
        let beta_f = rational_f64(&beta);

        let data = cfg
            .initial_data
            .as_ref()
            .ok_or_else(|| Error::Config("sweep needs an initial_data section".into()))?;
        let amplitude = case.amplitude.unwrap_or(data.amplitude);
        let f = ComplexField::gaussian(&grid, amplitude, data.sigma, &data.k0);
        let g = ComplexField::zeros(&grid);

        // contraction diagnostics
        if let Some(picard) = &cfg.picard {
            let w0 = to_halfwaves(&f, &g, 0.0)?;
            let out = picard_iterate(
                &w0,
                0.0,
                picard.t_final,
                picard.dtau,
                picard.iterations,
                &kernel,
                cfg.potential.coupling,
                beta_f,
            )?;
            let ratio = out.diagnostics.ratios.last().copied().unwrap_or(f64::NAN);
            cells.push(fmt_f64(ratio));
            cells.push(out.diagnostics.diverged.to_string());
        } else {
            cells.push(String::new());
            cells.push(String::new());
        }

        // energy drift and dt self-convergence
        if let Some(integ) = &cfg.integrator {
            let dt = case.dt.unwrap_or(integ.dt);
            let initial = FieldState::new(f.clone(), g.clone(), 0.0)?;
            let run = |dt: f64| -> Result<(Trajectory, f64, f64)> {
                let steps = (integ.t_final / dt).round() as usize;
                let times = sample_times(0.0, dt, steps, integ.sample_every);
                let traj = evolve(
                    &initial,
                    integ.t_final,
                    dt,
                    &times,
                    &kernel,
                    cfg.potential.coupling,
                    cfg.theorem_mode(),
                )?;
                let e0 = energy(&from_halfwaves(&traj.samples()[0]), &kernel, cfg.potential.coupling)?;
                let e1 = energy(
                    &from_halfwaves(traj.samples().last().expect("nonempty")),
                    &kernel,
                    cfg.potential.coupling,
                )?;
                let drift = if e0.abs() > 0.0 { (e1 - e0).abs() / e0.abs() } else { 0.0 };
                let final_norm = traj.samples().last().expect("nonempty").h_norm(beta_f);
                Ok((traj, drift, final_norm))
            };
            let (traj, drift, _) = run(dt)?;
            let (traj_half, _, _) = run(dt / 2.0)?;
            let diff = traj
                .samples()
                .last()
                .expect("nonempty")
                .sub(traj_half.samples().last().expect("nonempty"))
                .h_norm(beta_f);
            cells.push(fmt_f64(drift));
            cells.push(fmt_f64(diff));

            if matches!(
                cfg.scatter.as_ref().map(|s| s.pipeline),
                Some(ScatterPipeline::Forward)
            ) {
                let report = extract_final_state(&traj, beta_f, None, None)?;
                cells.push(report.delta_fit.map(|f| fmt_f64(f.delta)).unwrap_or_default());
            } else {
                cells.push(String::new());
            }
        } else {
            cells.push(String::new());
            cells.push(String::new());
            cells.push(String::new());
        }
        Ok(cells)
    })();

    match outcome {
        Ok(cells) => {
            row.extend(cells);
            // pad optional cells if a branch returned early
            while row.len() < SWEEP_COLUMNS.len() - 2 {
                row.push(String::new());
            }
            row.push("ok".to_string());
        }
        Err(e) => {
            let missing = SWEEP_COLUMNS.len() - 2 - row.len();
            blank(&mut row, missing);
            row.push(format!("error: {e}"));
        }
    }
    row.push(hash.to_string());
    row
}

/// Cartesian sweep over the configured ranges; one CSV row per run.
/// Individual run failures are recorded per-row and the sweep continues.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<PathBuf> {
    let hash = cfg.hash();
    ensure_out_dir(out, &hash)?;
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let gammas = sweep.gamma.unwrap_or_else(|| vec![cfg.params.gamma.clone()]);
    let betas = sweep.beta.unwrap_or_else(|| vec![cfg.params.beta.clone()]);
    let points = sweep.points.unwrap_or_else(|| vec![cfg.grid.points]);
    let dts: Vec<Option<f64>> = match sweep.dt {
        Some(list) => list.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let amplitudes: Vec<Option<f64>> = match sweep.amplitude {
        Some(list) => list.into_iter().map(Some).collect(),
        None => vec![None],
    };

    let mut cases = Vec::new();
    for gamma in &gammas {
        for beta in &betas {
            for &pts in &points {
                for &dt in &dts {
                    for &amplitude in &amplitudes {
                        cases.push(SweepCase {
                            gamma: gamma.clone(),
                            beta: beta.clone(),
                            points: pts,
                            dt,
                            amplitude,
                        });
                    }
                }
            }
        }
    }

    let threads = cfg.threads.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<Vec<String>> =
        pool.install(|| cases.par_iter().map(|case| sweep_row(cfg, case, &hash)).collect());

    let csv_path = out.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(SWEEP_COLUMNS)?;
    for row in &rows {
        writer.write_record(row)?;
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))?;

    let manifest = serde_json::json!({
        "tool": "kgscatter sweep",
        "config_hash": hash,
        "config": cfg,
        "threads": threads,
        "rows": rows.len(),
        "files": ["sweep.csv"],
    });
    write_manifest(out, &manifest)?;
    Ok(csv_path)
}

/// Built-in verification battery. Prints one PASS/FAIL line per check
/// and returns whether everything passed.
pub fn cmd_selftest(seed: u64) -> Result<bool> {
    use crate::util::{rat, SplitMix64};
    let mut all_ok = true;
    let mut check = |name: &str, outcome: std::result::Result<(), String>| {
        match outcome {
            Ok(()) => println!("[PASS] {name}"),
            Err(msg) => {
                println!("[FAIL] {name}: {msg}");
                all_ok = false;
            }
        }
    };

    // exact admissibility goldens
    check("admissibility goldens (n=3, γ=13/10, β=9/5)", {
        let p = Params::with_unit_weight(3, rat(13, 10), rat(9, 5)).unwrap();
        let report = check_constraints(&p);
        match report.derived {
            Some(d) if report.feasible && d.q == rat(75, 34) && d.delta == rat(4, 25) => Ok(()),
            _ => Err("reference exponents did not match".into()),
        }
    });

    check("empty gamma window at n=2", {
        let interval = feasible_gamma_interval(2)?;
        if interval.is_empty() { Ok(()) } else { Err("interval should be empty".into()) }
    });

    // half-wave round trip on random data
    check("half-wave round trip", {
        let grid = SpectralGrid::new(2, 16, 9.0)?;
        let mut rng = SplitMix64::new(seed);
        let mut mk = |s: u64| {
            let _ = s;
            let values = (0..grid.total_points())
                .map(|_| Complex64::new(rng.next_signed(), rng.next_signed()))
                .collect();
            ComplexField::from_values(&grid, values).unwrap()
        };
        let f = mk(1);
        let g = mk(2);
        let pair = to_halfwaves(&f, &g, 0.0)?;
        let back = from_halfwaves(&pair);
        let err = back.u.sub(&f).l2_norm() / f.l2_norm() + back.v.sub(&g).l2_norm() / g.l2_norm();
        if err < 1e-12 { Ok(()) } else { Err(format!("round-trip error {err}")) }
    });

    // convolution against the direct periodic sum
    check("hartree force vs brute-force sum (n=2, N=8)", {
        let grid = SpectralGrid::new(2, 8, 5.0)?;
        let spec = crate::potential::PotentialSpec::new(rat(13, 10))?;
        let kernel = build_kernel(&grid, &spec)?;
        let mut rng = SplitMix64::new(seed.wrapping_add(1));
        let u = ComplexField::from_values(
            &grid,
            (0..64).map(|_| Complex64::new(rng.next_signed(), rng.next_signed())).collect(),
        )?;
        let fast = crate::potential::hartree_force(&u, &kernel, -1.0)?;
        let n = 8;
        let hn = grid.cell_volume();
        let origin = crate::potential::cell_average_origin(2, 1.3, grid.spacing());
        let mut max_err = 0.0f64;
        for a0 in 0..n {
            for a1 in 0..n {
                let mut pot = Complex64::default();
                for b0 in 0..n {
                    for b1 in 0..n {
                        let dflat = ((a0 + n - b0) % n) * n + (a1 + n - b1) % n;
                        let d = grid.displacement(dflat);
                        let k = if dflat == 0 {
                            origin
                        } else {
                            (d[0] * d[0] + d[1] * d[1]).sqrt().powf(-1.3)
                        };
                        pot += k * u.values()[b0 * n + b1].norm_sqr();
                    }
                }
                let expected = -pot * hn * u.values()[a0 * n + a1];
                max_err = max_err.max((expected - fast.values()[a0 * n + a1]).norm());
            }
        }
        let scale = fast.max_abs();
        if max_err < 1e-10 * scale { Ok(()) } else { Err(format!("oracle mismatch {max_err}")) }
    });

    // free-flow identities
    check("free propagator unitarity and group property", {
        let grid = SpectralGrid::new(2, 32, 40.0)?;
        let mut rng = SplitMix64::new(seed.wrapping_add(2));
        let f = ComplexField::from_values(
            &grid,
            (0..grid.total_points())
                .map(|_| Complex64::new(rng.next_signed(), rng.next_signed()))
                .collect(),
        )?;
        let beta = 1.8;
        let base = f.h_norm(beta);
        let drift = (f.free_propagate(100.0, crate::spectral::Branch::Plus).h_norm(beta) - base)
            .abs()
            / base;
        let composed = f
            .free_propagate(0.7, crate::spectral::Branch::Minus)
            .free_propagate(-2.0, crate::spectral::Branch::Minus);
        let direct = f.free_propagate(-1.3, crate::spectral::Branch::Minus);
        let group = composed.sub(&direct).l2_norm() / direct.l2_norm();
        if drift < 1e-10 && group < 1e-10 {
            Ok(())
        } else {
            Err(format!("unitarity {drift}, group {group}"))
        }
    });

    // Strang reversibility
    check("strang reversibility", {
        let grid = SpectralGrid::new(1, 64, 30.0)?;
        let kernel = build_kernel(&grid, &crate::potential::PotentialSpec::new(rat(1, 2))?)?;
        let u = ComplexField::gaussian(&grid, 0.3, 2.0, &[0.5]);
        let mut state = FieldState::new(u.clone(), ComplexField::zeros(&grid), 0.0)?;
        for _ in 0..10 {
            crate::dynamics::step_strang(&mut state, 0.05, &kernel, -1.0)?;
        }
        for _ in 0..10 {
            crate::dynamics::step_strang(&mut state, -0.05, &kernel, -1.0)?;
        }
        let err = state.u.sub(&u).l2_norm() / u.l2_norm();
        if err < 1e-11 { Ok(()) } else { Err(format!("reversal error {err}")) }
    });

    // decay-fit calibration
    check("decay-fit calibration", {
        let mut rng = SplitMix64::new(seed.wrapping_add(3));
        let mut ok = true;
        for target in [0.16, 0.5, 1.0] {
            let series: Vec<(f64, f64)> = (2..60)
                .map(|j| {
                    let t = j as f64 * 0.5;
                    (t, (1.0 + t * t).sqrt().powf(-target) * (1.0 + 0.01 * rng.next_signed()))
                })
                .collect();
            let fit = crate::scattering::fit_decay_exponent(&series, None)?;
            ok &= (fit.delta - target).abs() < 0.02;
        }
        if ok { Ok(()) } else { Err("planted exponent not recovered".into()) }
    });

    Ok(all_ok)
}
