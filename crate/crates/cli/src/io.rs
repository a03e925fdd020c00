//! File formats: coefficient files, subband boundary lists, the encoded
//! container, and CSV output.

use crate::{CliError, CliResult};
use clap::ValueEnum;
use ezzq::adaptive::{EncodedBlock, SideInfo};
use ezzq::quant::QuantizedFrame;
use std::fs;
use std::io::Write as _;
use std::path::Path;

/// Coefficient file encoding: one decimal float per line, or raw
/// little-endian 32-bit floats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum DataFormat {
    #[default]
    Text,
    F32le,
}

pub fn read_samples(path: &Path, format: DataFormat) -> CliResult<Vec<f64>> {
    let values = match format {
        DataFormat::Text => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            let mut values = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let v: f64 = trimmed.parse().map_err(|_| {
                    CliError::data(format!(
                        "{}:{}: not a number: {trimmed:?}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                values.push(v);
            }
            values
        }
        DataFormat::F32le => {
            let bytes = fs::read(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            if bytes.len() % 4 != 0 {
                return Err(CliError::data(format!(
                    "{}: {} bytes is not a whole number of 32-bit floats",
                    path.display(),
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
    };
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(CliError::data(format!(
                "{}: sample {i} is not finite ({v})",
                path.display()
            )));
        }
    }
    Ok(values)
}

/// Writes coefficients, rounding every value to 32-bit precision in both
/// formats so the two emissions carry identical information.
pub fn write_samples(path: &Path, format: DataFormat, values: &[f64]) -> CliResult<()> {
    let bytes = match format {
        DataFormat::Text => {
            let mut out = String::with_capacity(values.len() * 12);
            for &v in values {
                out.push_str(&format!("{}\n", v as f32));
            }
            out.into_bytes()
        }
        DataFormat::F32le => {
            let mut out = Vec::with_capacity(values.len() * 4);
            for &v in values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            out
        }
    };
    fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Subband boundaries as half-open `[start, end)` index ranges.
pub fn read_bands(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut bands = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = || {
            CliError::data(format!(
                "{}:{}: expected \"start,end\", got {trimmed:?}",
                path.display(),
                lineno + 1
            ))
        };
        let (a, b) = trimmed.split_once(',').ok_or_else(err)?;
        let start: usize = a.trim().parse().map_err(|_| err())?;
        let end: usize = b.trim().parse().map_err(|_| err())?;
        bands.push((start, end));
    }
    if bands.is_empty() {
        return Err(CliError::data(format!(
            "{}: no subband ranges found",
            path.display()
        )));
    }
    Ok(bands)
}

/// Checks that bands ascend, don't overlap, and cover `0..n` exactly.
pub fn check_bands(bands: &[(usize, usize)], n: usize) -> CliResult<()> {
    let mut cursor = 0;
    for &(start, end) in bands {
        if start != cursor || end < start {
            return Err(CliError::data(format!(
                "subband {start}..{end} breaks coverage at index {cursor}"
            )));
        }
        cursor = end;
    }
    if cursor != n {
        return Err(CliError::data(format!(
            "subbands cover 0..{cursor} but the file holds {n} samples"
        )));
    }
    Ok(())
}

/// Container layout: per subband, a little-endian u32 byte length followed
/// by the side-info record and the signed 32-bit indices.
pub fn write_container(path: &Path, blocks: &[EncodedBlock]) -> CliResult<()> {
    let mut out = Vec::new();
    for block in blocks {
        let side = block
            .side
            .serialize()
            .map_err(|e| CliError::data(e.to_string()))?;
        let len = side.len() + 4 * block.frame.n();
        let len: u32 = len
            .try_into()
            .map_err(|_| CliError::data(format!("subband section of {len} bytes overflows u32")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&side);
        for &k in block.frame.indices() {
            out.extend_from_slice(&k.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn read_container(path: &Path) -> CliResult<Vec<EncodedBlock>> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut blocks = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(CliError::data(format!(
                "{}: truncated section length at byte {pos}",
                path.display()
            )));
        }
        let len = u32::from_le_bytes([bytes[pos], bytes[pos + 1], bytes[pos + 2], bytes[pos + 3]])
            as usize;
        pos += 4;
        if bytes.len() - pos < len {
            return Err(CliError::data(format!(
                "{}: section of {len} bytes truncated at byte {pos}",
                path.display()
            )));
        }
        let section = &bytes[pos..pos + len];
        let (side, consumed) =
            SideInfo::parse(section).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let index_bytes = &section[consumed..];
        if index_bytes.len() % 4 != 0 {
            return Err(CliError::data(format!(
                "{}: {} index bytes is not a whole number of 32-bit values",
                path.display(),
                index_bytes.len()
            )));
        }
        let indices = index_bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        blocks.push(EncodedBlock {
            side,
            frame: QuantizedFrame::from_indices(indices),
        });
        pos += len;
    }
    if blocks.is_empty() {
        return Err(CliError::data(format!("{}: empty container", path.display())));
    }
    Ok(blocks)
}

/// Writes a CSV: one `#` metadata line, a header row, then data rows, plus
/// optional trailing `#` summary lines. `None` writes to stdout.
pub fn write_csv(
    out: Option<&Path>,
    meta: &str,
    header: &str,
    rows: &[String],
    footers: &[String],
) -> CliResult<()> {
    let mut text = String::new();
    text.push_str(&format!("# {meta}\n"));
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    for footer in footers {
        text.push_str(&format!("# {footer}\n"));
    }
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::data(e.to_string()))
        }
    }
}

/// Standard metadata prefix: tool version plus the command's own settings.
pub fn meta_line(cmd: &str, settings: &str) -> String {
    format!(
        "tool=ezzq version={} cmd={cmd} {settings}",
        env!("CARGO_PKG_VERSION")
    )
}
