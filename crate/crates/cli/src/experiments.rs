//! Curve-producing commands. Each returns the count of rate-distortion
//! points that failed to converge so the caller can set the exit status.

use crate::io::{meta_line, write_csv};
use crate::{CliError, CliResult};
use ezzq::adaptive::{build_table, default_j_range, default_lambda_grid};
use ezzq::ggd::GgdParams;
use ezzq::quant::{
    frontier_rate_at, simulated_family_frontiers, sweep_operating_points, OperatingPoint,
    QuantizerKind,
};
use ezzq::rd::{
    discretize_empirical, discretize_ggd_auto, koshelev_bound, rd_curve, shannon_lower_bound,
    RdCurve,
};
use std::path::Path;

/// Monte Carlo commands refuse sample counts too small to mean anything.
pub const MIN_MONTE_CARLO_N: usize = 1000;

fn model(alpha: f64) -> CliResult<GgdParams> {
    GgdParams::new(alpha, 1.0).map_err(|e| CliError::usage(e.to_string()))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Rate at normalized distortion `d_abs / source variance`, or `None` when
/// the curve doesn't reach that distortion.
fn rate_at_abs(curve: &RdCurve, src_variance: f64, d_abs: f64) -> Option<f64> {
    curve.rate_at(d_abs / src_variance).ok()
}

/// Shape tags usable in file names: `0.25` stays `0.25`, `2` stays `2`.
fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}")
}

/// Theoretical vs sampled rate-distortion curves for one shape: the model
/// curve against a Blahut solve of the sample histogram, on a shared grid
/// of absolute distortions.
pub fn cmd_fig3(
    alpha: f64,
    n: usize,
    seed: u64,
    slopes: usize,
    bins: usize,
    out: Option<&Path>,
) -> CliResult<usize> {
    if n < MIN_MONTE_CARLO_N {
        return Err(CliError::usage(format!(
            "need at least {MIN_MONTE_CARLO_N} samples for a Monte Carlo run, got {n}"
        )));
    }
    let p = model(alpha)?;
    let theory_src = discretize_ggd_auto(&p)?;
    let theory = rd_curve(&theory_src, slopes)?;
    let samples = p.sample(n, seed);
    let empirical_src = discretize_empirical(&samples, bins)?;
    let empirical = rd_curve(&empirical_src, slopes)?;

    let mut rows = Vec::new();
    let mut max_delta: f64 = 0.0;
    for d in log_grid(1e-3, 1.0, 25) {
        let rt = rate_at_abs(&theory, theory_src.variance(), d);
        let re = rate_at_abs(&empirical, empirical_src.variance(), d);
        let delta = match (rt, re) {
            (Some(a), Some(b)) => {
                max_delta = max_delta.max((a - b).abs());
                format!("{}", (a - b).abs())
            }
            _ => String::new(),
        };
        rows.push(format!(
            "{d},{},{},{delta}",
            rt.map_or(String::new(), |v| format!("{v}")),
            re.map_or(String::new(), |v| format!("{v}")),
        ));
    }
    write_csv(
        out,
        &meta_line(
            "fig3",
            &format!("alpha={alpha} n={n} seed={seed} slopes={slopes} bins={bins}"),
        ),
        "distortion,rate_theoretical,rate_empirical,abs_delta",
        &rows,
        &[format!("max_abs_delta_bits={max_delta}")],
    )?;
    Ok(theory.unconverged() + empirical.unconverged())
}

/// Rate-distortion function, both analytic bounds, and the two uniform
/// quantizer curves for each shape, one CSV per shape.
pub fn cmd_rdcurves(alphas: &[f64], slopes: usize, out_dir: &Path) -> CliResult<usize> {
    if alphas.is_empty() {
        return Err(CliError::usage("need at least one shape"));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    let lambda_grid = default_lambda_grid();
    let mut unconverged = 0;
    for &alpha in alphas {
        let p = model(alpha)?;
        let src = discretize_ggd_auto(&p)?;
        let curve = rd_curve(&src, slopes)?;
        unconverged += curve.unconverged();
        let usq = sweep_operating_points(&p, QuantizerKind::Usq, &[0], &lambda_grid)?;
        let ousq = sweep_operating_points(&p, QuantizerKind::Ousq, &[0], &lambda_grid)?;

        let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
        let mut rows = Vec::new();
        for d in log_grid(1e-3, 1.0, 31) {
            rows.push(format!(
                "{d},{},{},{},{},{}",
                fmt(rate_at_abs(&curve, src.variance(), d)),
                fmt(shannon_lower_bound(&p, d).ok()),
                fmt(koshelev_bound(&p, d).ok()),
                fmt(frontier_rate_at(&usq, d).ok()),
                fmt(frontier_rate_at(&ousq, d).ok()),
            ));
        }
        write_csv(
            Some(&out_dir.join(format!("rd_alpha_{}.csv", alpha_tag(alpha)))),
            &meta_line(
                "rdcurves",
                &format!(
                    "alpha={alpha} slopes={slopes} lambda_grid={}x[{},{}]",
                    lambda_grid.len(),
                    lambda_grid[0],
                    lambda_grid[lambda_grid.len() - 1]
                ),
            ),
            "distortion,rate,shannon_bound,koshelev_bound,usq,ousq",
            &rows,
            &[],
        )?;
    }
    Ok(unconverged)
}

/// The four family frontiers for one shape, ready for loss evaluation,
/// plus the variance the frontier distortions are measured against.
/// Shapes below 1 are measured on seeded samples; 1 and up use the model.
/// Simulated losses are normalized by the sample variance, not the model
/// variance: measured distortions scale with the drawn block, so the
/// empirical ratio cancels the common sampling fluctuation.
pub fn family_frontiers_for(
    p: &GgdParams,
    n: usize,
    seed: u64,
) -> CliResult<([(&'static str, Vec<OperatingPoint>); 4], f64)> {
    let j_range = default_j_range();
    if p.alpha() < 1.0 {
        let samples = p.sample(n, seed);
        let var = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
        let lambda_grid: Vec<f64> = default_lambda_grid()
            .iter()
            .map(|l| l * var.sqrt())
            .collect();
        let f = simulated_family_frontiers(&samples, &j_range, &lambda_grid)?;
        Ok((
            [
                ("usq", f.usq),
                ("ezz", f.ezz),
                ("soezz", f.soezz),
                ("oezz", f.oezz),
            ],
            var,
        ))
    } else {
        let lambda_grid: Vec<f64> = default_lambda_grid()
            .iter()
            .map(|l| l * p.sigma())
            .collect();
        Ok((
            [
                (
                    "usq",
                    sweep_operating_points(p, QuantizerKind::Usq, &[0], &lambda_grid)?,
                ),
                (
                    "ezz",
                    sweep_operating_points(p, QuantizerKind::Ezz, &j_range, &lambda_grid)?,
                ),
                (
                    "soezz",
                    sweep_operating_points(p, QuantizerKind::Soezz, &j_range, &lambda_grid)?,
                ),
                (
                    "oezz",
                    sweep_operating_points(p, QuantizerKind::Oezz, &j_range, &lambda_grid)?,
                ),
            ],
            p.sigma2(),
        ))
    }
}

/// Loss-of-gain curves `L(R)` for USQ/EZZ/SOEZZ/OEZZ per shape, one CSV per
/// shape, over rates 0.2 to 4 bits/sample.
pub fn cmd_losscurves(
    alphas: &[f64],
    n: usize,
    seed: u64,
    slopes: usize,
    out_dir: &Path,
) -> CliResult<usize> {
    if alphas.is_empty() {
        return Err(CliError::usage("need at least one shape"));
    }
    if n < MIN_MONTE_CARLO_N {
        return Err(CliError::usage(format!(
            "need at least {MIN_MONTE_CARLO_N} samples for a Monte Carlo run, got {n}"
        )));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    let mut unconverged = 0;
    for &alpha in alphas {
        let p = model(alpha)?;
        let src = discretize_ggd_auto(&p)?;
        let curve = rd_curve(&src, slopes)?;
        unconverged += curve.unconverged();
        let (frontiers, variance) = family_frontiers_for(&p, n, seed)?;

        let mut rows = Vec::new();
        for r10 in 2..=40 {
            let r = r10 as f64 / 10.0;
            let mut row = format!("{r}");
            let g_max = curve.g_max(r).ok();
            for (_, frontier) in &frontiers {
                let loss = g_max.and_then(|g| {
                    ezzq::quant::frontier_distortion_at(frontier, r)
                        .ok()
                        .map(|d| g - 10.0 * (variance / d).log10())
                });
                row.push(',');
                if let Some(l) = loss {
                    row.push_str(&format!("{l}"));
                }
            }
            rows.push(row);
        }
        let mode = if alpha < 1.0 {
            format!("simulated n={n} seed={seed}")
        } else {
            "model".to_string()
        };
        write_csv(
            Some(&out_dir.join(format!("loss_alpha_{}.csv", alpha_tag(alpha)))),
            &meta_line(
                "losscurves",
                &format!("alpha={alpha} slopes={slopes} mode=\"{mode}\""),
            ),
            "rate,usq_db,ezz_db,soezz_db,oezz_db",
            &rows,
            &[],
        )?;
    }
    Ok(unconverged)
}

/// Dumps the adaptive codec's operating-point table: the Pareto frontier of
/// the shared-first-magnitude quantizer per shape at unit variance.
pub fn cmd_soezz_table(alphas: &[f64], out: Option<&Path>) -> CliResult<usize> {
    if alphas.is_empty() {
        return Err(CliError::usage("need at least one shape"));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let j_range = default_j_range();
    let lambda_grid = default_lambda_grid();
    let table = build_table(&sorted, QuantizerKind::Soezz, &j_range, &lambda_grid)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, &alpha) in table.alphas().iter().enumerate() {
        for e in table.row(i) {
            rows.push(format!("{alpha},{},{},{},{}", e.rate, e.distortion, e.j, e.lambda));
        }
    }
    write_csv(
        out,
        &meta_line(
            "soezz-table",
            &format!(
                "kind=soezz sigma2=1 j=0..={} lambda_grid={}x[{},{}]",
                j_range[j_range.len() - 1],
                lambda_grid.len(),
                lambda_grid[0],
                lambda_grid[lambda_grid.len() - 1]
            ),
        ),
        "alpha,rate,distortion,j,lambda",
        &rows,
        &[],
    )?;
    Ok(0)
}
