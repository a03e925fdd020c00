//! Block-adaptive quantization with explicit side information.
//!
//! The encoder fits the source model to each block, normalizes the target
//! distortion by the estimated variance, and looks up the cheapest
//! precomputed operating point that meets it. The chosen zone exponent and
//! step, plus any data-derived reconstruction magnitudes, travel to the
//! decoder in a small fixed-layout side-info record; the index stream
//! itself is carried verbatim (entropy coding is out of scope, rate is
//! reported as plug-in entropy).
//!
//! The step and the magnitudes are transmitted as 32-bit floats, and both
//! ends of the pipeline quantize against those rounded values, so decoding
//! reproduces the encoder's reconstruction bit for bit.

use crate::error::{Error, Result};
use crate::ggd::{estimate_params, GgdParams, ParamEstimate};
use crate::quant::{
    cell_bounds, empirical_centroids, empirical_rate_distortion, quantize_frame, EzzScale,
    OperatingPoint, QuantizedFrame, QuantizerKind, QuantizerSpec, sweep_operating_points, J_MAX,
};

/// Shape values the default tables are built for.
pub const DEFAULT_ALPHA_GRID: [f64; 8] = [0.25, 0.4, 0.5, 0.67, 0.8, 1.0, 1.3, 2.0];

/// Steps per zone exponent in the default tables.
pub const DEFAULT_LAMBDA_COUNT: usize = 96;

// Log-spaced step range at unit variance. The small end pushes every
// default shape past 6 bits/sample; the large end reaches the zero-rate
// corner even at j = 0.
const DEFAULT_LAMBDA_MIN: f64 = 0.02;
const DEFAULT_LAMBDA_MAX: f64 = 16.0;

/// Side-info flag: no table entry met the target, the minimum-distortion
/// entry was sent instead.
pub const FLAG_UNREACHABLE: u8 = 0x01;
/// Side-info flag: the block was identically zero, so no model was fitted.
pub const FLAG_DEGENERATE: u8 = 0x02;

const MAGIC: u16 = 0x455A;
const VERSION: u8 = 1;
/// Bytes before the magnitude array: magic, version, kind, flags, j, step,
/// magnitude count.
const HEADER_BYTES: usize = 12;

/// Default step grid: `DEFAULT_LAMBDA_COUNT` log-spaced values per zone
/// exponent, spanning rates from 0 to past 6 bits/sample at unit variance.
pub fn default_lambda_grid() -> Vec<f64> {
    let ratio = (DEFAULT_LAMBDA_MAX / DEFAULT_LAMBDA_MIN).ln();
    (0..DEFAULT_LAMBDA_COUNT)
        .map(|i| {
            DEFAULT_LAMBDA_MIN * (ratio * i as f64 / (DEFAULT_LAMBDA_COUNT - 1) as f64).exp()
        })
        .collect()
}

/// Default zone exponents: everything the family supports.
pub fn default_j_range() -> Vec<u8> {
    (0..=J_MAX).collect()
}

/// Per-shape Pareto frontiers of model operating points at unit variance.
/// Steps are stored for `sigma = 1` and rescaled by the estimated deviation
/// at encode time.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPointTable {
    kind: QuantizerKind,
    alphas: Vec<f64>,
    rows: Vec<Vec<OperatingPoint>>,
}

/// Builds a table by sweeping every `(j, lambda)` combination per shape.
/// Only the zero-zone kinds are adaptive; the uniform quantizers are their
/// `j_range = [0]` specializations.
pub fn build_table(
    alpha_grid: &[f64],
    kind: QuantizerKind,
    j_range: &[u8],
    lambda_grid: &[f64],
) -> Result<OperatingPointTable> {
    if !matches!(
        kind,
        QuantizerKind::Ezz | QuantizerKind::Soezz | QuantizerKind::Oezz
    ) {
        return Err(Error::domain(format!(
            "adaptive tables are built for the zone kinds, not {kind}; use j_range = [0] for uniform behavior"
        )));
    }
    if alpha_grid.is_empty() {
        return Err(Error::domain("shape grid must be nonempty"));
    }
    if !alpha_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::domain("shape grid must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let p = GgdParams::new(alpha, 1.0)?;
        rows.push(sweep_operating_points(&p, kind, j_range, lambda_grid)?);
    }
    Ok(OperatingPointTable {
        kind,
        alphas: alpha_grid.to_vec(),
        rows,
    })
}

impl OperatingPointTable {
    /// Rebuilds a table from stored rows (a CSV dump, say) with the same
    /// invariants `build_table` guarantees: zone kind, strictly ascending
    /// shapes, rows sorted by rate with strictly decreasing distortion.
    pub fn from_rows(
        kind: QuantizerKind,
        alphas: Vec<f64>,
        rows: Vec<Vec<OperatingPoint>>,
    ) -> Result<Self> {
        if !matches!(
            kind,
            QuantizerKind::Ezz | QuantizerKind::Soezz | QuantizerKind::Oezz
        ) {
            return Err(Error::domain(format!("not an adaptive table kind: {kind}")));
        }
        if alphas.is_empty() || alphas.len() != rows.len() {
            return Err(Error::domain(format!(
                "{} shapes against {} rows",
                alphas.len(),
                rows.len()
            )));
        }
        if !alphas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("shape grid must be strictly increasing"));
        }
        for (alpha, row) in alphas.iter().zip(&rows) {
            if row.is_empty() {
                return Err(Error::domain(format!("empty row for shape {alpha}")));
            }
            for e in row {
                if !(e.rate.is_finite() && e.rate >= 0.0)
                    || !(e.distortion.is_finite() && e.distortion > 0.0)
                    || !(e.lambda.is_finite() && e.lambda > 0.0)
                    || e.j > J_MAX
                {
                    return Err(Error::domain(format!(
                        "invalid entry ({}, {}, {}, {}) for shape {alpha}",
                        e.rate, e.distortion, e.j, e.lambda
                    )));
                }
            }
            if !row
                .windows(2)
                .all(|w| w[0].rate < w[1].rate && w[0].distortion > w[1].distortion)
            {
                return Err(Error::domain(format!(
                    "row for shape {alpha} is not a sorted Pareto frontier"
                )));
            }
        }
        Ok(Self { kind, alphas, rows })
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn row(&self, idx: usize) -> &[OperatingPoint] {
        &self.rows[idx]
    }

    /// Index of the shape nearest to `alpha_hat` in log distance (shape is
    /// a scale-like parameter). Ties resolve to the smaller shape.
    pub fn nearest_row(&self, alpha_hat: f64) -> usize {
        let target = alpha_hat.ln();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &a) in self.alphas.iter().enumerate() {
            let d = (a.ln() - target).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// The decoder-facing description of one block's quantizer: zone exponent,
/// step in signal units, and the transmitted reconstruction magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub kind: QuantizerKind,
    pub flags: u8,
    pub j: u8,
    /// Step in signal units. Stored as f32; the encoder quantizes with this
    /// rounded value so both ends see the same partition.
    pub lambda: f32,
    /// Reconstruction magnitudes: empty (midpoints), one shared value, or
    /// one per cell pair out to the largest occupied cell.
    pub a: Vec<f32>,
}

impl SideInfo {
    fn kind_byte(kind: QuantizerKind) -> Result<u8> {
        match kind {
            QuantizerKind::Ezz => Ok(0),
            QuantizerKind::Soezz => Ok(1),
            QuantizerKind::Oezz => Ok(2),
            other => Err(Error::domain(format!(
                "side info carries the zone kinds, not {other}"
            ))),
        }
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_BYTES + 4 * self.a.len()
    }

    /// Side-info cost in bits, as reported alongside every encoded block.
    pub fn cost_bits(&self) -> usize {
        8 * self.serialized_len()
    }

    /// Fixed little-endian layout: magic, version, kind, flags, j, step,
    /// magnitude count, magnitudes.
    pub fn serialize(&self) -> Result<Vec<u8>> {
        let kind_byte = Self::kind_byte(self.kind)?;
        if self.a.len() > u16::MAX as usize {
            return Err(Error::range(format!(
                "{} magnitudes exceed the 16-bit count field",
                self.a.len()
            )));
        }
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&MAGIC.to_le_bytes());
        out.push(VERSION);
        out.push(kind_byte);
        out.push(self.flags);
        out.push(self.j);
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&(self.a.len() as u16).to_le_bytes());
        for &a in &self.a {
            out.extend_from_slice(&a.to_le_bytes());
        }
        Ok(out)
    }

    /// Inverse of [`serialize`](Self::serialize). Returns the record and the
    /// number of bytes consumed; trailing bytes are left for the caller.
    pub fn parse(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::parse(format!(
                "side info truncated: {} of {HEADER_BYTES} header bytes",
                bytes.len()
            )));
        }
        let magic = u16::from_le_bytes([bytes[0], bytes[1]]);
        if magic != MAGIC {
            return Err(Error::parse(format!("bad magic {magic:#06x}")));
        }
        if bytes[2] != VERSION {
            return Err(Error::parse(format!("unsupported version {}", bytes[2])));
        }
        let kind = match bytes[3] {
            0 => QuantizerKind::Ezz,
            1 => QuantizerKind::Soezz,
            2 => QuantizerKind::Oezz,
            other => return Err(Error::parse(format!("unknown kind byte {other}"))),
        };
        let flags = bytes[4];
        if flags & !(FLAG_UNREACHABLE | FLAG_DEGENERATE) != 0 {
            return Err(Error::parse(format!("undefined flag bits in {flags:#04x}")));
        }
        let j = bytes[5];
        if j > J_MAX {
            return Err(Error::parse(format!("zone exponent {j} out of range")));
        }
        let lambda = f32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]);
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::parse(format!("invalid step {lambda}")));
        }
        let a_count = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
        let total = HEADER_BYTES + 4 * a_count;
        if bytes.len() < total {
            return Err(Error::parse(format!(
                "side info truncated: {} of {total} bytes",
                bytes.len()
            )));
        }
        let max_count = match kind {
            QuantizerKind::Ezz => 0,
            QuantizerKind::Soezz => 1,
            _ => usize::MAX,
        };
        if a_count > max_count {
            return Err(Error::parse(format!(
                "{a_count} magnitudes are inconsistent with kind {kind}"
            )));
        }
        let mut a = Vec::with_capacity(a_count);
        for i in 0..a_count {
            let off = HEADER_BYTES + 4 * i;
            let v = f32::from_le_bytes([
                bytes[off],
                bytes[off + 1],
                bytes[off + 2],
                bytes[off + 3],
            ]);
            if !v.is_finite() {
                return Err(Error::parse(format!("non-finite magnitude a_{}", i + 1)));
            }
            a.push(v);
        }
        Ok((
            Self {
                kind,
                flags,
                j,
                lambda,
                a,
            },
            total,
        ))
    }
}

/// One encoded block: the side info and the raw signed index stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBlock {
    pub side: SideInfo,
    pub frame: QuantizedFrame,
}

/// Everything the encoder learned and chose for one block, reported next to
/// the block itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSummary {
    /// Fitted model; absent for an all-zero block.
    pub estimate: Option<ParamEstimate>,
    /// Shape of the table row used; absent when no lookup happened.
    pub row_alpha: Option<f64>,
    /// Selected unit-variance operating point; absent for the zero-rate and
    /// degenerate shortcuts.
    pub entry: Option<OperatingPoint>,
    /// Realized plug-in entropy of the index stream, bits/sample.
    pub rate: f64,
    /// Realized mean squared error against the decoder's reconstruction.
    pub distortion: f64,
    pub side_info_bits: usize,
    pub unreachable: bool,
    pub degenerate: bool,
}

/// Builds the quantizer a decoder would use for `side`. The encoder uses the
/// same construction, which is what makes the distortion accounting exact.
pub fn spec_from_side(side: &SideInfo) -> Result<QuantizerSpec> {
    let scale = EzzScale::new(side.j, side.lambda as f64)?;
    match (side.kind, side.a.len()) {
        (_, 0) => QuantizerSpec::ezz(scale),
        (QuantizerKind::Soezz, 1) => QuantizerSpec::soezz(scale, side.a[0] as f64),
        (QuantizerKind::Oezz, _) => {
            QuantizerSpec::oezz(scale, side.a.iter().map(|&v| v as f64).collect())
        }
        (kind, n) => Err(Error::domain(format!(
            "{n} magnitudes are inconsistent with kind {kind}"
        ))),
    }
}

/// Encodes one block: fit the model, normalize the target by the estimated
/// variance, take the lowest-rate table entry meeting it (or the
/// minimum-distortion entry, flagged, if none does), quantize with the
/// f32-rounded step, and attach data-derived magnitudes per the kind.
///
/// A target at or above the estimated variance short-circuits to an all-zero
/// block, and an identically zero input produces a flagged zero-rate block
/// without fitting anything.
pub fn adaptive_encode(
    samples: &[f64],
    target_d: f64,
    table: &OperatingPointTable,
    kind: QuantizerKind,
) -> Result<(EncodedBlock, EncodeSummary)> {
    if kind != table.kind() {
        return Err(Error::domain(format!(
            "table was built for {}, not {kind}",
            table.kind()
        )));
    }
    if samples.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(target_d.is_finite() && target_d > 0.0) {
        return Err(Error::domain(format!(
            "target distortion must be positive, got {target_d}"
        )));
    }
    if samples.iter().all(|&x| x == 0.0) {
        let side = SideInfo {
            kind,
            flags: FLAG_DEGENERATE,
            j: 0,
            lambda: 1.0,
            a: Vec::new(),
        };
        let side_info_bits = side.cost_bits();
        let block = EncodedBlock {
            side,
            frame: QuantizedFrame::from_indices(vec![0; samples.len()]),
        };
        let summary = EncodeSummary {
            estimate: None,
            row_alpha: None,
            entry: None,
            rate: 0.0,
            distortion: 0.0,
            side_info_bits,
            unreachable: false,
            degenerate: true,
        };
        return Ok((block, summary));
    }

    let est = estimate_params(samples)?;
    let sigma2 = est.moments.sigma2_hat;

    if target_d >= sigma2 {
        return finish(samples, zero_rate_side(samples, kind)?, est, None, None, false);
    }

    let row_idx = table.nearest_row(est.params.alpha());
    let row = table.row(row_idx);
    if row.is_empty() {
        return Err(Error::domain("table row is empty"));
    }
    let normalized = target_d / sigma2;
    // Rows are sorted by rate with strictly decreasing distortion, so the
    // first qualifying entry is the lowest-rate one.
    let (entry, unreachable) = match row.iter().find(|e| e.distortion <= normalized) {
        Some(e) => (e, false),
        None => (row.last().expect("nonempty"), true),
    };

    let lambda = (entry.lambda * sigma2.sqrt()) as f32;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::range(format!(
            "step {} does not survive 32-bit rounding",
            entry.lambda * sigma2.sqrt()
        )));
    }
    let scale = EzzScale::new(entry.j, lambda as f64)?;
    let a = match kind {
        QuantizerKind::Ezz => Vec::new(),
        QuantizerKind::Soezz => {
            let c = empirical_centroids(&scale, samples, 1)?;
            vec![fit_in_cell(&scale, 1, c.a[0] as f32)]
        }
        QuantizerKind::Oezz => {
            let max_k = samples
                .iter()
                .map(|&x| crate::quant::quantize(&scale, x))
                .try_fold(0u64, |m, k| k.map(|k| m.max(k.unsigned_abs())))?;
            if max_k > u16::MAX as u64 {
                return Err(Error::range(format!(
                    "{max_k} cell pairs exceed the side-info capacity"
                )));
            }
            let c = empirical_centroids(&scale, samples, max_k)?;
            c.a.iter()
                .enumerate()
                .map(|(i, &a)| fit_in_cell(&scale, i as u64 + 1, a as f32))
                .collect()
        }
        _ => unreachable!("table kinds are restricted at build"),
    };
    let side = SideInfo {
        kind,
        flags: if unreachable { FLAG_UNREACHABLE } else { 0 },
        j: entry.j,
        lambda,
        a,
    };
    finish(
        samples,
        side,
        est,
        Some(table.alphas()[row_idx]),
        Some(*entry),
        unreachable,
    )
}

/// Quantizes with the decoder's spec and assembles the block and summary.
fn finish(
    samples: &[f64],
    side: SideInfo,
    est: ParamEstimate,
    row_alpha: Option<f64>,
    entry: Option<OperatingPoint>,
    unreachable: bool,
) -> Result<(EncodedBlock, EncodeSummary)> {
    let spec = spec_from_side(&side)?;
    let frame = quantize_frame(spec.scale(), samples)?;
    let (rate, distortion) = empirical_rate_distortion(&spec, samples)?;
    let side_info_bits = side.cost_bits();
    Ok((
        EncodedBlock { side, frame },
        EncodeSummary {
            estimate: Some(est),
            row_alpha,
            entry,
            rate,
            distortion,
            side_info_bits,
            unreachable,
            degenerate: false,
        },
    ))
}

/// Side info whose zone swallows every sample: widest zone, step bumped an
/// ulp at a time until the f32-rounded zone strictly covers the largest
/// magnitude.
fn zero_rate_side(samples: &[f64], kind: QuantizerKind) -> Result<SideInfo> {
    let max_abs = samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let half_zone_cells = f64::exp2(J_MAX as f64 - 1.0);
    let mut lambda = (max_abs / half_zone_cells) as f32;
    if !lambda.is_finite() {
        return Err(Error::range(format!(
            "block magnitude {max_abs} overflows the 32-bit step"
        )));
    }
    if lambda <= 0.0 {
        lambda = f32::MIN_POSITIVE;
    }
    while (lambda as f64) * half_zone_cells <= max_abs {
        lambda = lambda.next_up();
        if !lambda.is_finite() {
            return Err(Error::range(format!(
                "block magnitude {max_abs} overflows the 32-bit step"
            )));
        }
    }
    Ok(SideInfo {
        kind,
        flags: 0,
        j: J_MAX,
        lambda,
        a: Vec::new(),
    })
}

/// Nudges an f32 magnitude into the half-open cell it reconstructs, undoing
/// any boundary crossing introduced by the f64 -> f32 rounding.
fn fit_in_cell(scale: &EzzScale, k: u64, a: f32) -> f32 {
    let (lo, hi) = cell_bounds(scale, k as i64);
    let mut a = a;
    while (a as f64) < lo {
        a = a.next_up();
    }
    while (a as f64) >= hi {
        a = a.next_down();
    }
    a
}

/// Reconstructs a block from its own contents alone.
pub fn adaptive_decode(block: &EncodedBlock) -> Result<Vec<f64>> {
    let spec = spec_from_side(&block.side)?;
    Ok(spec.reconstruct_frame(&block.frame))
}
