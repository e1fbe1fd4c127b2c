use super::{Cli, CliError, Command, FamilyArgs, FamilyKind, FileConfig, Outcome, Settings};
use crate::dynamics::{classify_quadratic_measure, lyapunov_fixed_point, markov_decompose, mean_log_norm, GeneratorFamily, ProbeConfig};
use crate::engine::{deterministic_newton, find_all_roots, EngineConfig, OrbitStatus, TraceOptions};
use crate::measure::LambdaMeasure;
use crate::montecarlo::{estimate_t, rate_check, render_basin, BasinSpec};
use crate::poly::{parse_complex, parse_polynomial, Polynomial};
use crate::sphere::SphericalPoint;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::fmt::Write;
use std::path::PathBuf;

pub fn dispatch(cli: &Cli, settings: &Settings) -> Result<Outcome, CliError> {
    let mut echo = FileConfig {
        seed: Some(settings.seed),
        sequential: Some(cli.sequential || settings.file.sequential.unwrap_or(false)),
        ..Default::default()
    };
    let mut outcome = match &cli.command {
        Command::FindRoots { poly, start, measure, engine } => {
            let g = parse_polynomial(poly)?;
            let tau = settings.measure(measure, cli.seed)?;
            let mut cfg = settings.engine(engine)?;
            if let Some(s) = start {
                cfg.start = parse_complex(s)?;
            }
            echo_settings(&mut echo, &tau, Some(&cfg));
            find_roots(&g, &tau, &cfg)?
        }
        Command::TrapDemo { poly, start, runs, measure, engine } => {
            let g = parse_polynomial(poly)?;
            let tau = settings.measure(measure, cli.seed)?;
            let cfg = settings.engine(engine)?;
            echo_settings(&mut echo, &tau, Some(&cfg));
            trap_demo(&g, &tau, parse_complex(start)?, *runs, &cfg)?
        }
        Command::Lyapunov { family, point, multiplicity, measure } => {
            let tau = settings.measure(measure, cli.seed)?;
            echo_settings(&mut echo, &tau, None);
            let fam = build_family(family, settings)?;
            lyapunov(&fam, &tau, point, *multiplicity)?
        }
        Command::Markov { family, measure } => {
            let tau = settings.measure(measure, cli.seed)?;
            echo_settings(&mut echo, &tau, None);
            let fam = build_family(family, settings)?;
            markov(&fam, &tau)?
        }
        Command::Classify { measure } => {
            let tau = settings.measure(measure, cli.seed)?;
            echo_settings(&mut echo, &tau, None);
            let probe = ProbeConfig { execution: settings.execution, ..Default::default() };
            let report = classify_quadratic_measure(&tau, &probe)?;
            let mut text = format!("type: {}\nsup |lambda| = {}\n", report.kind, report.sup_abs_lambda);
            if let Some(chi) = &report.chi {
                let _ = writeln!(text, "chi(tau, {{0}}) = {} ± {:.2e}", chi.value, chi.std_error);
            }
            if let Some(p) = &report.probe {
                let _ = writeln!(text, "attractor probe: {} of {} orbits separated from 0 and inf", p.separated_orbits, p.orbits);
            }
            Outcome { result: serde_json::to_value(&report).unwrap(), text, files: vec![], config: Value::Null }
        }
        Command::BasinMap { poly, bounds, res, runs, png, csv, full, measure, engine } => {
            let g = parse_polynomial(poly)?;
            let tau = settings.measure(measure, cli.seed)?;
            let cfg = settings.engine(engine)?;
            echo_settings(&mut echo, &tau, Some(&cfg));
            let spec = parse_grid(bounds, res, *full)?;
            basin_map(&g, &tau, &cfg, &spec, *runs, png.as_ref(), csv.as_ref())?
        }
        Command::RateCheck { poly, start, traces, floor, lock_radius, measure, engine } => {
            let g = parse_polynomial(poly)?;
            let tau = settings.measure(measure, cli.seed)?;
            let cfg = settings.engine(engine)?;
            echo_settings(&mut echo, &tau, Some(&cfg));
            if !(*floor > 0.0 && *lock_radius > 0.0) {
                return Err(CliError::BadArguments("floor and lock radius must be positive".into()));
            }
            rate(&g, &tau, &cfg, parse_complex(start)?, *traces, TraceOptions { lock_radius: *lock_radius, floor: *floor })?
        }
    };
    outcome.config = serde_json::to_value(&echo).expect("config serializes");
    Ok(outcome)
}

fn echo_settings(echo: &mut FileConfig, tau: &LambdaMeasure, cfg: Option<&EngineConfig>) {
    echo.measure = Some(tau.to_spec());
    echo.engine = cfg.map(|c| serde_json::to_value(c).expect("engine config serializes"));
}

fn fmt_complex(z: Complex64) -> String {
    format!("{:+.12} {:+.12}i", z.re, z.im)
}

fn find_roots(g: &Polynomial, tau: &LambdaMeasure, cfg: &EngineConfig) -> Result<Outcome, CliError> {
    let roots = find_all_roots(g, tau, cfg)?;
    let mut text = format!("{:<38} {:>4} {:>12} {:>12}\n", "root", "mult", "residual", "backward");
    for r in &roots {
        let _ =
            writeln!(text, "{:<38} {:>4} {:>12.3e} {:>12.3e}", fmt_complex(r.value), r.multiplicity_estimate, r.residual, r.backward_error);
    }
    let result = json!({ "polynomial": g, "degree": g.degree(), "measure": tau.to_spec(), "roots": roots });
    Ok(Outcome { result, text, files: vec![], config: Value::Null })
}

fn trap_demo(g: &Polynomial, tau: &LambdaMeasure, z0: Complex64, runs: u64, cfg: &EngineConfig) -> Result<Outcome, CliError> {
    let det = deterministic_newton(g, z0, cfg)?;
    let roots = find_all_roots(g, tau, cfg)?;
    let t = estimate_t(g, tau, z0, &roots, runs, cfg)?;
    let converged: u64 = t.per_root.iter().map(|p| p.count).sum();
    let cycle_length = match det.status {
        OrbitStatus::DetectedCycle(n) => Some(n),
        _ => None,
    };
    let det_outcome = match det.status {
        OrbitStatus::DetectedCycle(n) => format!("cycle of length {n}"),
        OrbitStatus::ConvergedToRoot(_) => "converged".to_string(),
        other => format!("{other:?}"),
    };
    let mut text = format!("start z0 = {}\n", fmt_complex(z0));
    let _ = writeln!(text, "{:<14} {:<24} {:>6} {:>10} {:>9}", "scheme", "outcome", "runs", "converged", "fraction");
    let _ = writeln!(
        text,
        "{:<14} {:<24} {:>6} {:>10} {:>9.4}",
        "deterministic",
        det_outcome,
        1,
        det.converged() as u8,
        det.converged() as u8 as f64
    );
    let _ = writeln!(
        text,
        "{:<14} {:<24} {:>6} {:>10} {:>9.4}",
        "randomized",
        "converged to a root",
        runs,
        converged,
        converged as f64 / runs as f64
    );
    let result = json!({
        "start": z0,
        "deterministic": { "status": det.status, "iterations": det.iterations, "cycle_length": cycle_length },
        "randomized": {
            "runs": runs,
            "converged": converged,
            "fraction": converged as f64 / runs as f64,
            "estimate": t,
        },
        "roots": roots,
    });
    Ok(Outcome { result, text, files: vec![], config: Value::Null })
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, text: &Option<String>) -> Result<T, CliError> {
    let text = text.as_deref().ok_or_else(|| CliError::BadArguments(format!("--{what} is required for this family")))?;
    serde_json::from_str(text).map_err(|e| CliError::BadArguments(format!("{what}: {e}")))
}

fn build_family(args: &FamilyArgs, settings: &Settings) -> Result<GeneratorFamily, CliError> {
    Ok(match args.family {
        FamilyKind::RelaxedNewton => {
            let text = args.poly.as_deref().ok_or_else(|| CliError::BadArguments("--poly is required for relaxed-newton".into()))?;
            let g = parse_polynomial(text)?;
            let cfg = EngineConfig { execution: settings.execution, ..Default::default() };
            let roots = find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, settings.seed)?, &cfg)?;
            GeneratorFamily::relaxed_newton(g, &roots)
        }
        FamilyKind::Quadratic => GeneratorFamily::Quadratic,
        FamilyKind::Rotation => {
            let n = args.n.ok_or_else(|| CliError::BadArguments("--n is required for rotation".into()))?;
            if n < 2 {
                return Err(CliError::BadArguments("--n must be at least 2".into()));
            }
            GeneratorFamily::Rotation { n }
        }
        FamilyKind::EmbeddedMarkov => {
            let points: Vec<[f64; 2]> = parse_json("points", &args.points)?;
            let maps: Vec<Vec<usize>> = parse_json("maps", &args.maps)?;
            GeneratorFamily::embedded_markov(points.iter().map(|&[re, im]| Complex64::new(re, im)).collect(), &maps)?
        }
    })
}

fn parse_point(text: &str) -> Result<SphericalPoint, CliError> {
    match text.trim() {
        "inf" | "infinity" | "∞" => Ok(SphericalPoint::Infinity),
        other => Ok(SphericalPoint::Finite(parse_complex(other)?)),
    }
}

fn lyapunov(fam: &GeneratorFamily, tau: &LambdaMeasure, point: &str, order: Option<usize>) -> Result<Outcome, CliError> {
    let mut p = parse_point(point)?;
    // snap an approximate root onto the computed one
    if let (GeneratorFamily::RelaxedNewton { roots, .. }, SphericalPoint::Finite(z)) = (fam, p) {
        if let Some(&(x, _)) = roots.iter().find(|(x, _)| (x - z).norm() <= 1e-6 * x.norm().max(1.0)) {
            p = SphericalPoint::Finite(x);
        }
    }
    let est = lyapunov_fixed_point(tau, fam, p, order)?;
    let report = markov_decompose(fam, tau)
        .ok()
        .and_then(|reports| reports.into_iter().find(|r| r.points.iter().any(|q| q.chordal_distance(&p) < 1e-9)));
    let classification = report.as_ref().map(|r| r.classification.clone());
    let mut text = format!("chi = {} ± {:.2e} ({:?})\n", est.value, est.std_error, est.method);
    if let Some(c) = &classification {
        let _ = writeln!(text, "classification: {:?}", c.classification);
    }
    let result = json!({
        "family": fam.name(),
        "point": p,
        "chi": est.value,
        "std_error": est.std_error,
        "method": est.method,
        "classification": classification,
    });
    Ok(Outcome { result, text, files: vec![], config: Value::Null })
}

fn markov(fam: &GeneratorFamily, tau: &LambdaMeasure) -> Result<Outcome, CliError> {
    let reports = markov_decompose(fam, tau)?;
    let mut text = format!("{:<6} {:>6} {:>7} {:>14} {:<24} points\n", "set", "size", "period", "lyapunov", "classification");
    for (i, r) in reports.iter().enumerate() {
        let pts: Vec<String> = r.points.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            text,
            "{:<6} {:>6} {:>7} {:>14} {:<24} {}",
            i,
            r.points.len(),
            r.period,
            r.lyapunov.value.to_string(),
            format!("{:?}", r.classification.classification),
            pts.join(", ")
        );
    }
    let result = json!({ "family": fam.name(), "minimal_sets": reports });
    Ok(Outcome { result, text, files: vec![], config: Value::Null })
}

fn parse_grid(bounds: &str, res: &str, full: bool) -> Result<BasinSpec, CliError> {
    let b: Vec<f64> = bounds
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::BadArguments(format!("bounds: {e}")))?;
    let [re_min, re_max, im_min, im_max] = b[..] else {
        return Err(CliError::BadArguments("bounds must be re_min,re_max,im_min,im_max".into()));
    };
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| CliError::BadArguments(format!("res: {e}")));
    let (nx, ny) = match res.split_once(['x', 'X']) {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let n = parse(res)?;
            (n, n)
        }
    };
    Ok(BasinSpec { re_min, re_max, im_min, im_max, nx, ny, full })
}

fn basin_map(
    g: &Polynomial,
    tau: &LambdaMeasure,
    cfg: &EngineConfig,
    spec: &BasinSpec,
    runs: u64,
    png: Option<&PathBuf>,
    csv: Option<&PathBuf>,
) -> Result<Outcome, CliError> {
    let roots = find_all_roots(g, tau, cfg)?;
    let grid = render_basin(g, tau, &roots, spec, runs, cfg)?;
    let mut files = Vec::new();
    if let Some(path) = csv {
        let mut bytes = Vec::new();
        grid.write_csv(&mut bytes).expect("writing to memory");
        std::fs::write(path, &bytes).map_err(|e| CliError::failure("io", format!("cannot write {}: {e}", path.display())))?;
        files.push(("csv".to_string(), path.clone(), bytes));
    }
    if let Some(path) = png {
        let mut bytes = Vec::new();
        grid.write_png(&mut bytes)?;
        std::fs::write(path, &bytes).map_err(|e| CliError::failure("io", format!("cannot write {}: {e}", path.display())))?;
        files.push(("png".to_string(), path.clone(), bytes));
    }
    let n = grid.cells.len() as f64;
    let mean = |f: fn(&crate::montecarlo::BasinCell) -> f64| grid.cells.iter().map(f).sum::<f64>() / n;
    let (escape, unresolved) = (mean(|c| c.escape_prob), mean(|c| c.unresolved_prob));
    let mut text = format!("{}x{} cells, {} runs per cell, {} roots\n", spec.nx, spec.ny, runs, roots.len());
    let _ = writeln!(text, "mean escape probability {escape:.4}, mean unresolved probability {unresolved:.4}");
    for (label, path, _) in &files {
        let _ = writeln!(text, "wrote {label}: {}", path.display());
    }
    let result = json!({
        "summary": { "mean_escape": escape, "mean_unresolved": unresolved },
        "grid": grid,
    });
    Ok(Outcome { result, text, files, config: Value::Null })
}

fn rate(
    g: &Polynomial,
    tau: &LambdaMeasure,
    cfg: &EngineConfig,
    z0: Complex64,
    traces: u64,
    trace: TraceOptions,
) -> Result<Outcome, CliError> {
    let roots = find_all_roots(g, tau, cfg)?;
    let summary = rate_check(g, tau, z0, &roots, traces, cfg, trace)?;
    let fam = GeneratorFamily::relaxed_newton(g.clone(), &roots);
    let chis = match &fam {
        GeneratorFamily::RelaxedNewton { roots, .. } => roots
            .iter()
            .map(|&(x, _)| mean_log_norm(&fam, tau, SphericalPoint::Finite(x), None).map(|e| e.value.as_f64()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => unreachable!(),
    };
    // a single reference exponent exists when every root contracts at the same rate
    let reference = chis.iter().all(|c| (c - chis[0]).abs() < 1e-12).then(|| chis[0]);
    let mut text = format!(
        "mean tail slope {:.5} ± {:.5} over {} of {} traces\n",
        summary.mean_slope, summary.std_error, summary.fitted, summary.traces
    );
    match reference {
        Some(chi) => {
            let _ = writeln!(text, "lyapunov exponent {chi:.5}, difference {:+.5}", summary.mean_slope - chi);
        }
        None => {
            let _ = writeln!(text, "lyapunov exponents by root: {chis:?}");
        }
    }
    let result = json!({
        "mean_slope": summary.mean_slope,
        "std_error": summary.std_error,
        "fitted": summary.fitted,
        "traces": summary.traces,
        "chi_by_root": chis,
        "chi": reference,
        "difference": reference.map(|c| summary.mean_slope - c),
        "slopes": summary.slopes,
    });
    Ok(Outcome { result, text, files: vec![], config: Value::Null })
}
