//! Model estimation reports and the encode/decode pipeline.

use crate::io::{
    check_bands, meta_line, read_bands, read_container, read_samples, write_container, write_csv,
    write_samples, DataFormat,
};
use crate::{CliError, CliResult};
use ezzq::adaptive::{
    adaptive_decode, adaptive_encode, build_table, default_j_range, default_lambda_grid,
    spec_from_side, OperatingPointTable,
};
use ezzq::ggd::{estimate_params, GgdParams};
use ezzq::quant::{OperatingPoint, QuantizerKind};
use std::fs;
use std::path::Path;

/// Loads bands or defaults to one band covering the whole file, then
/// validates coverage.
fn bands_for(bands_path: Option<&Path>, n: usize) -> CliResult<Vec<(usize, usize)>> {
    let bands = match bands_path {
        Some(path) => read_bands(path)?,
        None => vec![(0, n)],
    };
    check_bands(&bands, n)?;
    Ok(bands)
}

/// Per-subband model fit report.
pub fn cmd_estimate(
    input: &Path,
    format: DataFormat,
    bands_path: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<usize> {
    let samples = read_samples(input, format)?;
    let bands = bands_for(bands_path, samples.len())?;
    let mut rows = Vec::new();
    for (band, &(start, end)) in bands.iter().enumerate() {
        let slice = &samples[start..end];
        if slice.len() < 2 || slice.iter().all(|&x| x == 0.0) {
            rows.push(format!("{band},{start},{end},{},,,,degenerate", slice.len()));
            continue;
        }
        let est = estimate_params(slice).map_err(|e| CliError::data(e.to_string()))?;
        let flag = if est.clamped { "clamped" } else { "ok" };
        rows.push(format!(
            "{band},{start},{end},{},{},{},{},{flag}",
            est.moments.n,
            est.params.alpha(),
            est.moments.sigma2_hat,
            est.moments.mu_hat,
        ));
    }
    write_csv(
        out,
        &meta_line("estimate", &format!("input={}", input.display())),
        "band,start,end,n,alpha_hat,sigma2_hat,mu_hat,flag",
        &rows,
        &[],
    )?;
    Ok(0)
}

/// Writes a synthetic coefficient file drawn from the source model.
pub fn cmd_generate(
    alpha: f64,
    sigma2: f64,
    n: usize,
    seed: u64,
    format: DataFormat,
    out: &Path,
) -> CliResult<usize> {
    if n == 0 {
        return Err(CliError::usage("sample count must be positive"));
    }
    let p = GgdParams::new(alpha, sigma2).map_err(|e| CliError::usage(e.to_string()))?;
    write_samples(out, format, &p.sample(n, seed))?;
    Ok(0)
}

/// Loads an operating-point table from a `soezz-table` CSV dump. The
/// metadata line must name the same kind the encoder wants to use.
pub fn load_table_csv(path: &Path, kind: QuantizerKind) -> CliResult<OperatingPointTable> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut alphas: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<OperatingPoint>> = Vec::new();
    let mut meta_kind: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(v) = token.strip_prefix("kind=") {
                    meta_kind = Some(v.to_string());
                }
            }
            continue;
        }
        if trimmed.starts_with("alpha,") {
            continue;
        }
        let err = || {
            CliError::data(format!(
                "{}:{}: expected \"alpha,rate,distortion,j,lambda\", got {trimmed:?}",
                path.display(),
                lineno + 1
            ))
        };
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(err());
        }
        let alpha: f64 = fields[0].trim().parse().map_err(|_| err())?;
        let point = OperatingPoint {
            rate: fields[1].trim().parse().map_err(|_| err())?,
            distortion: fields[2].trim().parse().map_err(|_| err())?,
            j: fields[3].trim().parse().map_err(|_| err())?,
            lambda: fields[4].trim().parse().map_err(|_| err())?,
        };
        if alphas.last() != Some(&alpha) {
            alphas.push(alpha);
            rows.push(Vec::new());
        }
        rows.last_mut().expect("row pushed with alpha").push(point);
    }
    match meta_kind {
        Some(k) if k == kind.to_string() => {}
        Some(k) => {
            return Err(CliError::data(format!(
                "{}: table was built for kind {k}, not {kind}",
                path.display()
            )));
        }
        None => {
            return Err(CliError::data(format!(
                "{}: missing kind= in the metadata line",
                path.display()
            )));
        }
    }
    OperatingPointTable::from_rows(kind, alphas, rows)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Distortion target per subband: a fixed mean squared error, or a coding
/// gain in dB below each subband's estimated variance.
#[derive(Debug, Clone, Copy)]
pub enum Target {
    Mse(f64),
    GainDb(f64),
}

impl Target {
    fn validate(self) -> CliResult<Self> {
        let v = match self {
            Target::Mse(v) | Target::GainDb(v) => v,
        };
        if !v.is_finite() || (matches!(self, Target::Mse(_)) && v <= 0.0) {
            return Err(CliError::usage(format!("invalid distortion target {v}")));
        }
        Ok(self)
    }

    /// Absolute MSE target for one subband's samples.
    fn mse_for(self, slice: &[f64]) -> CliResult<f64> {
        match self {
            Target::Mse(v) => Ok(v),
            Target::GainDb(db) => {
                // All-zero slices never reach here (degenerate path), but a
                // constant slice can still fail estimation; surface that.
                let est = estimate_params(slice).map_err(|e| CliError::data(e.to_string()))?;
                Ok(est.moments.sigma2_hat * 10f64.powf(-db / 10.0))
            }
        }
    }
}

/// Encodes a coefficient file band by band and reports what was chosen.
/// The report's distortion column accounts for the decoder emitting 32-bit
/// floats, so it matches a file-level comparison exactly.
#[allow(clippy::too_many_arguments)]
pub fn cmd_encode(
    input: &Path,
    format: DataFormat,
    bands_path: Option<&Path>,
    target: Target,
    kind: QuantizerKind,
    table_path: Option<&Path>,
    out: &Path,
    report: Option<&Path>,
) -> CliResult<usize> {
    let target = target.validate()?;
    let samples = read_samples(input, format)?;
    let bands = bands_for(bands_path, samples.len())?;
    let table = match table_path {
        Some(path) => load_table_csv(path, kind)?,
        None => build_table(
            &ezzq::adaptive::DEFAULT_ALPHA_GRID,
            kind,
            &default_j_range(),
            &default_lambda_grid(),
        )
        .map_err(|e| CliError::usage(e.to_string()))?,
    };

    let mut blocks = Vec::new();
    let mut rows = Vec::new();
    for (band, &(start, end)) in bands.iter().enumerate() {
        let slice = &samples[start..end];
        if slice.len() < 2 {
            return Err(CliError::data(format!(
                "subband {band} has {} samples; need at least 2",
                slice.len()
            )));
        }
        let mse = if slice.iter().all(|&x| x == 0.0) {
            // Placeholder; the encoder short-circuits before using it.
            1.0
        } else {
            target.mse_for(slice)?
        };
        let (block, summary) = adaptive_encode(slice, mse, &table, kind)?;

        // Account distortion against the 32-bit values a decoded file
        // carries.
        let spec = spec_from_side(&block.side)?;
        let mut sse = 0.0;
        for (&x, &k) in slice.iter().zip(block.frame.indices()) {
            let recon = spec.reconstruct(k as i64) as f32 as f64;
            sse += (x - recon) * (x - recon);
        }
        let distortion = sse / slice.len() as f64;

        let flag = if summary.degenerate {
            "degenerate"
        } else if summary.unreachable {
            "unreachable"
        } else {
            "ok"
        };
        let alpha_hat = summary
            .estimate
            .map_or(String::new(), |e| format!("{}", e.params.alpha()));
        let sigma2_hat = summary.estimate.map(|e| e.moments.sigma2_hat);
        let gain = sigma2_hat
            .filter(|_| distortion > 0.0)
            .map_or(String::new(), |s2| {
                format!("{}", 10.0 * (s2 / distortion).log10())
            });
        rows.push(format!(
            "{band},{start},{end},{},{alpha_hat},{},{},{},{},{},{distortion},{gain},{flag}",
            slice.len(),
            sigma2_hat.map_or(String::new(), |v| format!("{v}")),
            block.side.j,
            block.side.lambda,
            summary.rate,
            summary.side_info_bits,
        ));
        blocks.push(block);
    }
    write_container(out, &blocks)?;
    write_csv(
        report,
        &meta_line(
            "encode",
            &format!(
                "input={} kind={kind} target={} container={}",
                input.display(),
                match target {
                    Target::Mse(v) => format!("mse={v}"),
                    Target::GainDb(v) => format!("db={v}"),
                },
                out.display()
            ),
        ),
        "band,start,end,n,alpha_hat,sigma2_hat,j,lambda,rate_bits,side_info_bits,distortion,gain_db,flag",
        &rows,
        &[],
    )?;
    Ok(0)
}

/// Reconstructs a container back into a coefficient file.
pub fn cmd_decode(input: &Path, format: DataFormat, out: &Path) -> CliResult<usize> {
    let blocks = read_container(input)?;
    let mut values = Vec::new();
    for block in &blocks {
        values.extend(adaptive_decode(block).map_err(|e| CliError::data(e.to_string()))?);
    }
    write_samples(out, format, &values)?;
    Ok(0)
}
