//! Orchestration of each command into an output [`Bundle`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tvvar_core::algebra::Mat;
use tvvar_core::forecast::{expanding_forecast, ForecastTask};
use tvvar_core::irf::{irf_bands, longrun_mean};
use tvvar_core::modelselect::{
    cv_bandwidth, default_bandwidth_grid, default_max_lag, select_lag_with, BandwidthRule,
    PenaltyBandwidth,
};
use tvvar_core::simlab::{run_monte_carlo, simulate_tvvar, CoefficientPath, McConfig, PathSpec, SimConfig};
use tvvar_core::trend::{default_mcv_grid, default_mcv_k, dwb_bands, mcv_bandwidth, DependenceKernel, DwbConfig};
use tvvar_core::tvvar::{fit_tvvar, pointwise_ci, v_hat, PointwiseCi};
use tvvar_core::{Error as CoreError, SeriesMatrix};

use crate::config::{
    Choice, Cli, Command, FitArgs, ForecastArgs, IrfArgs, ModelArgs, MonteCarloArgs, PathArgs, Preset,
    SelectArgs, SimulateArgs, TrendArgs,
};
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::output::{num, opt, Bundle, SCHEMA};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rendered outputs plus a short report for stdout.
pub struct Outcome {
    pub bundle: Bundle,
    pub report: String,
}

/// Validates, computes and writes. Nothing is written unless every step
/// succeeds.
pub fn execute(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let outcome = run_with_threads(cli)?;
    let written = outcome.bundle.write(&cli.out)?;
    if !outcome.report.is_empty() {
        print!("{}", outcome.report);
    }
    Ok(written)
}

pub fn run_with_threads(cli: &Cli) -> CliResult<Outcome> {
    cli.validate()?;
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {n} threads: {e}")))?
            .install(|| run(cli)),
        None => run(cli),
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    cli.validate()?;
    let mut bundle = Bundle::new(&cli.format);
    let report = match &cli.command {
        Command::Select(a) => select(cli, a, &mut bundle)?,
        Command::Fit(a) => fit(cli, a, &mut bundle)?,
        Command::Irf(a) => irf(cli, a, &mut bundle)?,
        Command::Trend(a) => trend(cli, a, &mut bundle)?,
        Command::Forecast(a) => forecast(cli, a, &mut bundle)?,
        Command::Simulate(a) => simulate(cli, a, &mut bundle)?,
        Command::Montecarlo(a) => montecarlo(cli, a, &mut bundle)?,
    };
    Ok(Outcome { bundle, report })
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::numerical(format!("cannot encode output: {e}")))
}

fn envelope<A: Serialize>(cli: &Cli, args: &A, input: Value, result: Value) -> CliResult<Value> {
    Ok(json!({
        "schema": SCHEMA,
        "version": VERSION,
        "command": cli.command.name(),
        "config": { "formats": to_value(&cli.format)?, "args": to_value(args)? },
        "input": input,
        "result": result,
    }))
}

fn describe_input(path: &Path, x: &SeriesMatrix) -> Value {
    json!({
        "path": path.display().to_string(),
        "rows": x.len(),
        "columns": x.names(),
        "labels": x.labels().is_some(),
    })
}

fn mat_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Row label of a grid point that coincides with a sample point.
fn label_for(x: &SeriesMatrix, tau: f64) -> String {
    let Some(labels) = x.labels() else { return String::new() };
    let s = tau * x.len() as f64;
    let t = s.round();
    if (s - t).abs() < 1e-9 && t >= 1.0 && t as usize <= labels.len() {
        labels[t as usize - 1].clone()
    } else {
        String::new()
    }
}

fn regressor_names(names: &[String], p: usize) -> Vec<String> {
    let mut out = vec!["const".to_string()];
    for j in 1..=p {
        out.extend(names.iter().map(|n| format!("{n}.l{j}")));
    }
    out
}

fn bandwidth_rule(h: &Choice<f64>, grid: &Option<Vec<f64>>) -> BandwidthRule {
    match h {
        Choice::Fixed(h) => BandwidthRule::Fixed(*h),
        Choice::Auto => BandwidthRule::CrossValidation(grid.clone().unwrap_or_else(default_bandwidth_grid)),
    }
}

/// Lag order and bandwidth, plus the selection trace that produced them.
fn resolve_model(x: &SeriesMatrix, m: &ModelArgs) -> CliResult<(usize, f64, Value)> {
    let sel = &m.selection;
    match m.lag {
        Choice::Auto => {
            let max_lag = sel.max_lag.unwrap_or_else(|| default_max_lag(x.len()));
            let rule = bandwidth_rule(&sel.bandwidth, &sel.bandwidth_grid);
            let trace = select_lag_with(x, max_lag, &rule, PenaltyBandwidth::from(sel.penalty))?;
            Ok((trace.chosen_p, trace.chosen_bandwidth, json!({ "information_criterion": to_value(&trace)? })))
        }
        Choice::Fixed(p) => match sel.bandwidth {
            Choice::Fixed(h) => Ok((p, h, Value::Null)),
            Choice::Auto => {
                let grid = sel.bandwidth_grid.clone().unwrap_or_else(default_bandwidth_grid);
                let trace = cv_bandwidth(x, p, &grid)?;
                Ok((p, trace.chosen, json!({ "cross_validation": to_value(&trace)? })))
            }
        },
    }
}

fn select(cli: &Cli, a: &SelectArgs, out: &mut Bundle) -> CliResult<String> {
    let x = ingest_csv(&a.input)?;
    let sel = &a.selection;
    let max_lag = sel.max_lag.unwrap_or_else(|| default_max_lag(x.len()));
    let rule = bandwidth_rule(&sel.bandwidth, &sel.bandwidth_grid);
    let trace = select_lag_with(&x, max_lag, &rule, PenaltyBandwidth::from(sel.penalty))?;

    let ic_rows: Vec<Vec<String>> = trace
        .candidates
        .iter()
        .map(|c| {
            vec![
                c.p.to_string(),
                opt(c.bandwidth),
                opt(c.rss),
                opt(c.penalty),
                opt(c.ic),
                (c.p == trace.chosen_p).to_string(),
                c.reason.clone().unwrap_or_default(),
            ]
        })
        .collect();
    out.add_csv("select_ic.csv", &["p", "bandwidth", "rss", "penalty", "ic", "chosen", "reason"], &ic_rows)?;
    let cv_rows: Vec<Vec<String>> = trace
        .cv
        .iter()
        .flat_map(|cv| {
            cv.candidates.iter().map(move |c| {
                vec![
                    cv.p.to_string(),
                    num(c.bandwidth),
                    opt(c.cv),
                    (c.bandwidth == cv.chosen).to_string(),
                    c.reason.clone().unwrap_or_default(),
                ]
            })
        })
        .collect();
    out.add_csv("select_cv.csv", &["p", "bandwidth", "cv", "chosen", "reason"], &cv_rows)?;
    let result = json!({
        "lag": trace.chosen_p,
        "bandwidth": trace.chosen_bandwidth,
        "max_lag": max_lag,
        "trace": to_value(&trace)?,
    });
    out.add_json("select.json", &envelope(cli, a, describe_input(&a.input, &x), result)?)?;
    Ok(format!("lag {} bandwidth {}\n", trace.chosen_p, trace.chosen_bandwidth))
}

fn fit(cli: &Cli, a: &FitArgs, out: &mut Bundle) -> CliResult<String> {
    let x = ingest_csv(&a.input)?;
    let (p, h, selection) = resolve_model(&x, &a.model)?;
    let grid = a.grid.resolve(x.len());
    let fitted = fit_tvvar(&x, p, h, &grid)?;
    let cis: Vec<PointwiseCi> = grid
        .par_iter()
        .map(|&tau| {
            let cov = v_hat(&fitted, tau)?;
            pointwise_ci(&fitted, &cov, tau, a.alpha)
        })
        .collect::<Result<_, CoreError>>()?;

    let names = x.names();
    let d = x.dim();
    let regs = regressor_names(names, p);
    let mut coef_rows = Vec::new();
    let mut omega_rows = Vec::new();
    let mut points = Vec::new();
    for (g, &tau) in grid.iter().enumerate() {
        let label = label_for(&x, tau);
        let ci = &cis[g];
        for (c, reg) in regs.iter().enumerate() {
            for (i, name) in names.iter().enumerate() {
                let iv = &ci.coef[c * d + i];
                coef_rows.push(vec![
                    num(tau),
                    label.clone(),
                    name.clone(),
                    reg.clone(),
                    num(iv.estimate),
                    num(iv.lower),
                    num(iv.upper),
                    num(iv.std_error),
                ]);
            }
        }
        let mut idx = 0;
        for j in 0..d {
            for i in j..d {
                let iv = &ci.omega[idx];
                idx += 1;
                omega_rows.push(vec![
                    num(tau),
                    label.clone(),
                    names[i].clone(),
                    names[j].clone(),
                    num(iv.estimate),
                    num(iv.lower),
                    num(iv.upper),
                    num(iv.std_error),
                ]);
            }
        }
        let flags = &fitted.flags[g];
        points.push(json!({
            "tau": tau,
            "label": label,
            "coef": mat_rows(&fitted.coefs[g]),
            "omega": mat_rows(&fitted.omegas[g]),
            "condition": flags.condition,
            "regularized": flags.regularized,
            "omega_not_pd": flags.omega_not_pd,
            "intervals": to_value(ci)?,
        }));
    }
    let cols = ["tau", "label", "series", "regressor", "estimate", "lower", "upper", "std_error"];
    out.add_csv("fit_coefficients.csv", &cols, &coef_rows)?;
    let cols = ["tau", "label", "series", "column", "estimate", "lower", "upper", "std_error"];
    out.add_csv("fit_omega.csv", &cols, &omega_rows)?;
    let result = json!({
        "lag": p,
        "bandwidth": h,
        "kernel": to_value(&fitted.kernel)?,
        "alpha": a.alpha,
        "regressors": regs,
        "selection": selection,
        "points": points,
    });
    out.add_json("fit.json", &envelope(cli, a, describe_input(&a.input, &x), result)?)?;
    Ok(format!("lag {p} bandwidth {h} points {}\n", grid.len()))
}

fn irf(cli: &Cli, a: &IrfArgs, out: &mut Bundle) -> CliResult<String> {
    let x = ingest_csv(&a.input)?;
    let (p, h, selection) = resolve_model(&x, &a.model)?;
    let grid = a.tau.resolve(x.len());
    let fitted = fit_tvvar(&x, p, h, &grid)?;
    let res = irf_bands(&fitted, &grid, a.horizons - 1, a.alpha)?;

    let names = x.names();
    let d = x.dim();
    let scale = fitted.t_len() as f64 * fitted.bandwidth();
    let mut rows = Vec::with_capacity(grid.len() * a.horizons * d * d);
    for (g, &tau) in grid.iter().enumerate() {
        let label = label_for(&x, tau);
        for j in 0..a.horizons {
            let (b, s) = (&res.b_hat[g][j], &res.sigma_bj[g][j]);
            for r in 0..d {
                for c in 0..d {
                    let se = (s[(c * d + r, c * d + r)].max(0.0) / scale).sqrt();
                    rows.push(vec![
                        num(tau),
                        label.clone(),
                        j.to_string(),
                        names[r].clone(),
                        names[c].clone(),
                        num(b[(r, c)]),
                        num(res.lower[g][j][(r, c)]),
                        num(res.upper[g][j][(r, c)]),
                        num(se),
                    ]);
                }
            }
        }
    }
    let cols = ["tau", "label", "horizon", "response", "shock", "estimate", "lower", "upper", "std_error"];
    out.add_csv("irf.csv", &cols, &rows)?;
    let nested = |m: &Vec<Vec<Mat>>| -> Vec<Vec<Vec<Vec<f64>>>> {
        m.iter().map(|per| per.iter().map(mat_rows).collect()).collect()
    };
    let result = json!({
        "lag": p,
        "bandwidth": h,
        "alpha": a.alpha,
        "identification": to_value(&res.identification)?,
        "grid": grid,
        "horizons": a.horizons,
        "responses": nested(&res.b_hat),
        "lower": nested(&res.lower),
        "upper": nested(&res.upper),
        "unstable": res.unstable,
        "jittered": res.jittered,
        "clipped": res.clipped,
        "selection": selection,
    });
    out.add_json("irf.json", &envelope(cli, a, describe_input(&a.input, &x), result)?)?;
    let unstable = res.unstable.iter().filter(|u| **u).count();
    Ok(format!("lag {p} bandwidth {h} points {} unstable {unstable}\n", grid.len()))
}

fn trend(cli: &Cli, a: &TrendArgs, out: &mut Bundle) -> CliResult<String> {
    let x = ingest_csv(&a.input)?;
    let t_len = x.len();
    let (h, mcv) = match a.bandwidth {
        Choice::Fixed(h) => (h, Value::Null),
        Choice::Auto => {
            let k = a.mcv_k.unwrap_or_else(|| default_mcv_k(t_len));
            let cand = a.bandwidth_grid.clone().unwrap_or_else(|| default_mcv_grid(t_len));
            let trace = mcv_bandwidth(&x, k, &cand)?;
            (trace.chosen, to_value(&trace)?)
        }
    };
    let grid = a.grid.resolve(t_len);
    let cfg = DwbConfig {
        block_length: a.block_length,
        replications: a.reps,
        kernel: DependenceKernel::Bartlett,
        c0: a.c0,
        pilot_bandwidth: a.pilot_bandwidth,
        seed: a.seed,
        enforce_containment: !a.no_containment,
    };
    let band = dwb_bands(&x, h, &cfg, a.alpha, &grid)?;

    let (longrun, longrun_info) = if a.no_longrun {
        (vec![None; grid.len()], Value::Null)
    } else {
        let model = ModelArgs {
            lag: a.var_lag,
            selection: crate::config::SelectionArgs {
                max_lag: None,
                bandwidth: a.var_bandwidth,
                bandwidth_grid: None,
                penalty: crate::config::Penalty::LargestLag,
            },
        };
        let (p, hv, selection) = resolve_model(&x, &model)?;
        let fitted = fit_tvvar(&x, p, hv, &grid)?;
        let mut path = Vec::with_capacity(grid.len());
        let mut nonstationary = Vec::new();
        for &tau in &grid {
            match longrun_mean(&fitted, tau) {
                Ok(mu) => path.push(Some(mu)),
                Err(CoreError::NonStationary { .. }) => {
                    nonstationary.push(tau);
                    path.push(None);
                }
                Err(e) => return Err(e.into()),
            }
        }
        let info = json!({
            "lag": p,
            "bandwidth": hv,
            "selection": selection,
            "nonstationary": nonstationary,
            "mean": path,
        });
        (path, info)
    };

    let names = x.names();
    let mut rows = Vec::new();
    for (g, &tau) in grid.iter().enumerate() {
        let label = label_for(&x, tau);
        for (i, name) in names.iter().enumerate() {
            rows.push(vec![
                num(tau),
                label.clone(),
                name.clone(),
                num(band.estimate[g][i]),
                num(band.lower[g][i]),
                num(band.upper[g][i]),
                opt(longrun[g].as_ref().map(|m| m[i])),
            ]);
        }
    }
    let cols = ["tau", "label", "series", "estimate", "lower", "upper", "longrun_mean"];
    out.add_csv("trend.csv", &cols, &rows)?;
    let result = json!({
        "bandwidth": h,
        "mcv": mcv,
        "band": to_value(&band)?,
        "longrun": longrun_info,
    });
    out.add_json("trend.json", &envelope(cli, a, describe_input(&a.input, &x), result)?)?;
    Ok(format!("bandwidth {h} pilot {} block length {}\n", band.pilot_bandwidth, band.block_length))
}

fn forecast(cli: &Cli, a: &ForecastArgs, out: &mut Bundle) -> CliResult<String> {
    let x = ingest_csv(&a.input)?;
    let first_origin = a
        .first_origin
        .unwrap_or_else(|| (a.first_origin_frac * x.len() as f64).floor() as usize);
    let task = ForecastTask {
        horizons: a.horizons.clone(),
        p_constant: a.lag_constant,
        p_tv: a.lag_tv,
        bandwidth: bandwidth_rule(&a.bandwidth, &a.bandwidth_grid),
        reselect_every: a.reselect_every,
        iterated: a.iterated,
        ..ForecastTask::new(first_origin)
    };
    let table = expanding_forecast(&x, &task)?;

    let mut rows = Vec::new();
    for (hi, h) in table.horizons.iter().enumerate() {
        for (m, method) in table.methods.iter().enumerate() {
            for (i, name) in table.series.iter().enumerate() {
                rows.push(vec![
                    h.to_string(),
                    name.clone(),
                    method.label().to_string(),
                    num(table.rmse[m][hi][i]),
                    num(table.ratio[m][hi][i]),
                    table.counts[hi].to_string(),
                ]);
            }
            rows.push(vec![
                h.to_string(),
                "pooled".to_string(),
                method.label().to_string(),
                num(table.rmse_pooled[m][hi]),
                num(table.ratio_pooled[m][hi]),
                table.counts[hi].to_string(),
            ]);
        }
    }
    out.add_csv("forecast.csv", &["horizon", "series", "method", "rmse", "ratio", "count"], &rows)?;
    let result = json!({ "first_origin": first_origin, "table": to_value(&table)? });
    out.add_json("forecast.json", &envelope(cli, a, describe_input(&a.input, &x), result)?)?;
    let mut report = String::new();
    for (hi, h) in table.horizons.iter().enumerate() {
        let ratios: Vec<String> = table.ratio_pooled.iter().map(|r| format!("{:.4}", r[hi])).collect();
        report.push_str(&format!("h={h} pooled ratio {}\n", ratios.join(" ")));
    }
    Ok(report)
}

fn load_path(src: &PathArgs) -> CliResult<CoefficientPath> {
    match (&src.preset, &src.path) {
        (Some(Preset::Benchmark), _) => Ok(CoefficientPath::benchmark()),
        (None, Some(file)) => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", file.display())))?;
            let spec: PathSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("bad path specification {}: {e}", file.display())))?;
            // An unusable user path is a configuration problem, whatever the cause.
            CoefficientPath::new(spec).map_err(|e| CliError::config(format!("{}: {e}", file.display())))
        }
        (None, None) => Err(CliError::config("give --preset or --path")),
    }
}

fn path_summary(path: &CoefficientPath) -> CliResult<Value> {
    Ok(json!({
        "dim": path.dim(),
        "lag_order": path.lag_order(),
        "max_spectral_radius": path.max_spectral_radius(),
        "spec": to_value(path.spec())?,
    }))
}

fn simulate(cli: &Cli, a: &SimulateArgs, out: &mut Bundle) -> CliResult<String> {
    let path = load_path(&a.source)?;
    let cfg = SimConfig { t_len: a.t_len, burn_in: a.burn_in, seed: a.seed, stream: a.stream, law: a.law.0 };
    let x = simulate_tvvar(&path, &cfg)?;
    let header: Vec<&str> = x.names().iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..x.len()).map(|t| x.obs(t).iter().map(|v| num(*v)).collect()).collect();
    out.add_csv("simulated.csv", &header, &rows)?;
    out.add_json("simulate.json", &envelope(cli, a, Value::Null, json!({ "path": path_summary(&path)? }))?)?;
    Ok(String::new())
}

fn montecarlo(cli: &Cli, a: &MonteCarloArgs, out: &mut Bundle) -> CliResult<String> {
    let path = load_path(&a.source)?;
    let cfg = McConfig {
        t_list: a.t_list.clone(),
        n_reps: a.reps,
        seed: a.seed,
        alpha: a.alpha,
        burn_in: a.burn_in,
        law: a.law.0,
        max_lag: a.max_lag,
        exclude_boundary: a.exclude_boundary,
        ..McConfig::default()
    };
    let mut report = run_monte_carlo(&path, &cfg)?;
    // Timings vary between runs; keep them out of the artifacts.
    for r in &mut report.rows {
        r.wall_clock_secs = 0.0;
    }
    let cols = [
        "T", "max_lag", "reps", "failed", "frac_below", "frac_equal", "frac_above", "rmse_a", "rmse_omega",
        "coverage_a", "coverage_omega", "mean_bandwidth",
    ];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.t_len.to_string(),
                r.max_lag.to_string(),
                r.n_reps.to_string(),
                r.n_failed.to_string(),
                num(r.frac_below),
                num(r.frac_equal),
                num(r.frac_above),
                num(r.rmse_a),
                num(r.rmse_omega),
                num(r.coverage_a),
                num(r.coverage_omega),
                num(r.mean_bandwidth),
            ]
        })
        .collect();
    out.add_csv("montecarlo.csv", &cols, &rows)?;
    let result = json!({ "path": path_summary(&path)?, "report": to_value(&report)? });
    out.add_json("montecarlo.json", &envelope(cli, a, Value::Null, result)?)?;
    Ok(report.to_text())
}
