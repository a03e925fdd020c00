//! The extended-zero-zone scalar quantizer family.
//!
//! A scale `B(j, lambda)` partitions the line into a central zero zone of
//! total width `lambda * 2^j` and uniform cells of width `lambda` beyond it.
//! `j = 0` recovers the plain uniform midtread quantizer. On top of one
//! partition, the family members differ only in reconstruction: midpoints
//! (USQ, EZZ), a single shared magnitude for the first cell pair (SOEZZ), or
//! a full per-cell centroid table (OUSQ, OEZZ). Rate is always the entropy
//! of the cell occupancy, so all members of a partition share it.

use crate::error::{Error, Result};
use crate::ggd::GgdParams;
use crate::parallel;
use crate::rd::RdCurve;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Largest supported zero-zone exponent; wider zones serve no operating
/// point on any tested curve.
pub const J_MAX: u8 = 8;

// Model cell enumeration and centroid tables stop once the mass beyond the
// current cell drops below this; the final cell is integrated out to
// infinity instead, so the truncation shows up only through the
// reconstruction value used for that sliver.
const MODEL_TAIL_EPS: f64 = 1e-10;

/// A zero-zone partition: cells `(-inf, ..., -1, 0, 1, ..., +inf)` with the
/// zero cell spanning `(-lambda*2^(j-1), lambda*2^(j-1))` and every other
/// cell of width `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EzzScale {
    j: u8,
    lambda: f64,
}

impl EzzScale {
    pub fn new(j: u8, lambda: f64) -> Result<Self> {
        if j > J_MAX {
            return Err(Error::domain(format!(
                "zone exponent {j} exceeds the maximum {J_MAX}"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!(
                "step must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { j, lambda })
    }

    pub fn j(&self) -> u8 {
        self.j
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Half-width of the zero zone, `lambda * 2^(j-1)`. Exact: powers of two
    /// only rescale the exponent.
    pub fn zone_half_width(&self) -> f64 {
        self.lambda * f64::exp2(self.j as f64 - 1.0)
    }

    /// Midpoint of the positive cell `k >= 1`.
    fn cell_mid(&self, k: u64) -> f64 {
        self.zone_half_width() + (k as f64 - 0.5) * self.lambda
    }
}

/// Cell boundaries for a signed index: `(lo, hi)` with the convention that a
/// magnitude exactly on a boundary belongs to the higher-|k| cell.
pub fn cell_bounds(scale: &EzzScale, k: i64) -> (f64, f64) {
    let w = scale.zone_half_width();
    if k == 0 {
        (-w, w)
    } else if k > 0 {
        let lo = w + (k - 1) as f64 * scale.lambda;
        (lo, lo + scale.lambda)
    } else {
        let hi = -(w + (-k - 1) as f64 * scale.lambda);
        (hi - scale.lambda, hi)
    }
}

/// Maps a sample to its signed cell index: 0 inside the zero zone, otherwise
/// `sign(x) * (floor((|x| - w)/lambda) + 1)`. Boundary ties go outward, so
/// the map is odd and monotone.
pub fn quantize(scale: &EzzScale, x: f64) -> Result<i64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("cannot quantize {x}")));
    }
    let w = scale.zone_half_width();
    let mag = x.abs();
    if mag < w {
        return Ok(0);
    }
    let kf = ((mag - w) / scale.lambda).floor() + 1.0;
    if !(kf < i64::MAX as f64) {
        return Err(Error::range(format!(
            "sample {x} overflows the index range at step {}",
            scale.lambda
        )));
    }
    let k = kf as i64;
    Ok(if x > 0.0 { k } else { -k })
}

/// A quantized block: signed cell indices, one per input sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedFrame {
    indices: Vec<i32>,
}

impl QuantizedFrame {
    /// Wraps raw indices (used when decoding a stored frame).
    pub fn from_indices(indices: Vec<i32>) -> Self {
        Self { indices }
    }

    pub fn indices(&self) -> &[i32] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.indices.len()
    }
}

/// Quantizes a block. Indices are stored as `i32`; a sample that lands
/// beyond that range (absurd step/sample combinations) is a range error
/// rather than a silent wrap.
pub fn quantize_frame(scale: &EzzScale, samples: &[f64]) -> Result<QuantizedFrame> {
    let mut indices = Vec::with_capacity(samples.len());
    for &x in samples {
        let k = quantize(scale, x)?;
        if k > i32::MAX as i64 || k < i32::MIN as i64 {
            return Err(Error::range(format!(
                "index {k} does not fit the frame's 32-bit storage"
            )));
        }
        indices.push(k as i32);
    }
    Ok(QuantizedFrame { indices })
}

/// Which member of the family a spec realizes. USQ/OUSQ are the `j = 0`
/// specializations of EZZ/OEZZ kept as distinct names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantizerKind {
    Usq,
    Ousq,
    Ezz,
    Soezz,
    Oezz,
}

impl fmt::Display for QuantizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            QuantizerKind::Usq => "usq",
            QuantizerKind::Ousq => "ousq",
            QuantizerKind::Ezz => "ezz",
            QuantizerKind::Soezz => "soezz",
            QuantizerKind::Oezz => "oezz",
        };
        f.write_str(name)
    }
}

impl FromStr for QuantizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "usq" => Ok(QuantizerKind::Usq),
            "ousq" => Ok(QuantizerKind::Ousq),
            "ezz" => Ok(QuantizerKind::Ezz),
            "soezz" => Ok(QuantizerKind::Soezz),
            "oezz" => Ok(QuantizerKind::Oezz),
            other => Err(Error::parse(format!("unknown quantizer kind {other:?}"))),
        }
    }
}

/// How non-zero cells reconstruct. The zero cell always reconstructs to 0,
/// and every rule is odd-symmetric: cell `-k` reconstructs to the negative
/// of cell `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconRule {
    /// Midpoint of every cell.
    Midpoint,
    /// One transmitted magnitude for the cells adjacent to the zero zone;
    /// midpoints beyond.
    SharedFirst(f64),
    /// Magnitudes `a_1..a_K` for the first `K` cell pairs; midpoints beyond.
    Table(Vec<f64>),
}

/// A complete quantizer: partition, kind, and reconstruction rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    kind: QuantizerKind,
    scale: EzzScale,
    recon: ReconRule,
}

impl QuantizerSpec {
    /// Validates the kind/scale/rule combination: USQ and OUSQ require
    /// `j = 0`, midpoint kinds take `Midpoint`, SOEZZ takes `SharedFirst`,
    /// centroid kinds take `Table`, and every table magnitude must lie
    /// inside its own cell.
    pub fn new(kind: QuantizerKind, scale: EzzScale, recon: ReconRule) -> Result<Self> {
        match kind {
            QuantizerKind::Usq | QuantizerKind::Ousq if scale.j() != 0 => {
                return Err(Error::domain(format!(
                    "{kind} is a j=0 quantizer, got j={}",
                    scale.j()
                )));
            }
            _ => {}
        }
        let rule_ok = matches!(
            (kind, &recon),
            (QuantizerKind::Usq | QuantizerKind::Ezz, ReconRule::Midpoint)
                | (QuantizerKind::Soezz, ReconRule::SharedFirst(_))
                | (QuantizerKind::Ousq | QuantizerKind::Oezz, ReconRule::Table(_))
        );
        if !rule_ok {
            return Err(Error::domain(format!(
                "reconstruction rule {recon:?} does not match kind {kind}"
            )));
        }
        let magnitudes: &[f64] = match &recon {
            ReconRule::Midpoint => &[],
            ReconRule::SharedFirst(a1) => std::slice::from_ref(a1),
            ReconRule::Table(a) => a,
        };
        for (i, &a) in magnitudes.iter().enumerate() {
            let (lo, hi) = cell_bounds(&scale, i as i64 + 1);
            if !(a.is_finite() && a >= lo && a < hi) {
                return Err(Error::domain(format!(
                    "magnitude a_{} = {a} outside its cell [{lo}, {hi})",
                    i + 1
                )));
            }
        }
        Ok(Self { kind, scale, recon })
    }

    pub fn usq(lambda: f64) -> Result<Self> {
        Self::new(QuantizerKind::Usq, EzzScale::new(0, lambda)?, ReconRule::Midpoint)
    }

    pub fn ousq(lambda: f64, table: Vec<f64>) -> Result<Self> {
        Self::new(QuantizerKind::Ousq, EzzScale::new(0, lambda)?, ReconRule::Table(table))
    }

    pub fn ezz(scale: EzzScale) -> Result<Self> {
        Self::new(QuantizerKind::Ezz, scale, ReconRule::Midpoint)
    }

    pub fn soezz(scale: EzzScale, a1: f64) -> Result<Self> {
        Self::new(QuantizerKind::Soezz, scale, ReconRule::SharedFirst(a1))
    }

    pub fn oezz(scale: EzzScale, table: Vec<f64>) -> Result<Self> {
        Self::new(QuantizerKind::Oezz, scale, ReconRule::Table(table))
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn scale(&self) -> &EzzScale {
        &self.scale
    }

    pub fn recon(&self) -> &ReconRule {
        &self.recon
    }

    /// Reconstruction value for a signed index. Cells beyond the magnitude
    /// table fall back to their midpoint, the decoder-safe default.
    pub fn reconstruct(&self, k: i64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mag_idx = k.unsigned_abs();
        let a = match &self.recon {
            ReconRule::Midpoint => self.scale.cell_mid(mag_idx),
            ReconRule::SharedFirst(a1) if mag_idx == 1 => *a1,
            ReconRule::SharedFirst(_) => self.scale.cell_mid(mag_idx),
            ReconRule::Table(t) => t
                .get(mag_idx as usize - 1)
                .copied()
                .unwrap_or_else(|| self.scale.cell_mid(mag_idx)),
        };
        if k > 0 {
            a
        } else {
            -a
        }
    }

    /// Decodes a frame back to sample values.
    pub fn reconstruct_frame(&self, frame: &QuantizedFrame) -> Vec<f64> {
        frame
            .indices()
            .iter()
            .map(|&k| self.reconstruct(k as i64))
            .collect()
    }
}

/// Per-cell magnitude means estimated from data, with the cells that were
/// empty (and fell back to midpoints) recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidEstimate {
    /// Magnitudes `a_1..a_max_k`.
    pub a: Vec<f64>,
    /// 1-based cell numbers that had no samples.
    pub empty_cells: Vec<u64>,
}

/// Estimates reconstruction magnitudes `a_k = mean(|x| in cell k)` for
/// `k = 1..=max_k`, pooling the `+k` and `-k` cells. Empty cells take their
/// midpoint and are flagged.
pub fn empirical_centroids(
    scale: &EzzScale,
    samples: &[f64],
    max_k: u64,
) -> Result<CentroidEstimate> {
    let mut count = vec![0u64; max_k as usize];
    let mut sum = vec![0.0f64; max_k as usize];
    for &x in samples {
        let k = quantize(scale, x)?.unsigned_abs();
        if k >= 1 && k <= max_k {
            count[k as usize - 1] += 1;
            sum[k as usize - 1] += x.abs();
        }
    }
    let mut a = Vec::with_capacity(max_k as usize);
    let mut empty_cells = Vec::new();
    for k in 1..=max_k {
        if count[k as usize - 1] > 0 {
            a.push(sum[k as usize - 1] / count[k as usize - 1] as f64);
        } else {
            a.push(scale.cell_mid(k));
            empty_cells.push(k);
        }
    }
    Ok(CentroidEstimate { a, empty_cells })
}

/// Model reconstruction magnitudes: the conditional mean of `|x|` in each
/// cell under `p`, for every cell pair holding at least `1e-10` of reachable
/// mass. Each centroid is taken over the nominal finite cell, so it always
/// lies inside the cell.
pub fn model_centroids(scale: &EzzScale, p: &GgdParams) -> Vec<f64> {
    let mut a = Vec::new();
    let mut k = 1u64;
    loop {
        let (lo, hi) = cell_bounds(scale, k as i64);
        if p.tail_mass(lo) < MODEL_TAIL_EPS {
            break;
        }
        let stats = p
            .cell_stats(lo, hi)
            .expect("cell bounds are ordered and finite");
        a.push(stats.centroid);
        k += 1;
    }
    a
}

/// Entropy (bits/sample) and mean squared error of a quantizer against the
/// model density. Cells are enumerated outward until the remaining tail
/// mass falls under `1e-10`; the last cell absorbs that tail.
pub fn model_rate_distortion(spec: &QuantizerSpec, p: &GgdParams) -> (f64, f64) {
    let scale = spec.scale();
    let w = scale.zone_half_width();
    let (m0, _, m20) = p.half_moments(0.0, w);
    let p0 = 2.0 * m0;
    let mut dist = 2.0 * m20;
    let mut rate = 0.0;
    if p0 > 0.0 {
        rate -= p0 * p0.log2();
    }
    let mut k = 1i64;
    loop {
        let (lo, hi_nominal) = cell_bounds(scale, k);
        let open_ended = p.tail_mass(hi_nominal) < MODEL_TAIL_EPS;
        let hi = if open_ended { f64::INFINITY } else { hi_nominal };
        let (m, m1, m2) = p.half_moments(lo, hi);
        let r = spec.reconstruct(k);
        dist += 2.0 * (m2 - 2.0 * r * m1 + r * r * m);
        if m > 0.0 {
            // The +k and -k cells each hold mass m.
            rate -= 2.0 * m * m.log2();
        }
        if open_ended {
            break;
        }
        k += 1;
    }
    (rate.max(0.0), dist)
}

/// Plug-in entropy (bits/sample) of signed cell indices and the mean squared
/// reconstruction error over a sample block.
pub fn empirical_rate_distortion(spec: &QuantizerSpec, samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::domain("cannot measure an empty block"));
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut sse = 0.0;
    for &x in samples {
        let k = quantize(spec.scale(), x)?;
        *counts.entry(k).or_insert(0) += 1;
        let e = x - spec.reconstruct(k);
        sse += e * e;
    }
    let n = samples.len() as f64;
    Ok((plug_in_entropy(&counts, n), sse / n))
}

fn plug_in_entropy(counts: &BTreeMap<i64, u64>, n: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts.values() {
        if c > 0 {
            let f = c as f64 / n;
            h -= f * f.log2();
        }
    }
    h.max(0.0)
}

/// The three family distortions measured on one block at one scale, with
/// reconstruction magnitudes estimated from that same block.
///
/// All three share the partition, hence the single rate. The distortions are
/// derived from one set of per-cell accumulators: starting from the midpoint
/// error, each refinement subtracts an explicitly nonnegative per-cell
/// penalty `s1^2/n`, so `ezz >= soezz >= oezz` holds exactly in floating
/// point, not merely up to rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySplit {
    pub rate: f64,
    pub d_ezz: f64,
    pub d_soezz: f64,
    pub d_oezz: f64,
}

/// Measures EZZ, SOEZZ, and OEZZ on the same block at the same scale. See
/// [`FamilySplit`] for the exact-ordering construction.
pub fn family_split(scale: &EzzScale, samples: &[f64]) -> Result<FamilySplit> {
    if samples.is_empty() {
        return Err(Error::domain("cannot measure an empty block"));
    }
    struct Cell {
        n: u64,
        s1: f64,
        s2: f64,
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut cells: BTreeMap<u64, Cell> = BTreeMap::new();
    let mut sse_zero = 0.0;
    for &x in samples {
        let k = quantize(scale, x)?;
        *counts.entry(k).or_insert(0) += 1;
        if k == 0 {
            sse_zero += x * x;
        } else {
            let cell = cells
                .entry(k.unsigned_abs())
                .or_insert(Cell { n: 0, s1: 0.0, s2: 0.0 });
            // Deviations are accumulated against the midpoint, so s1^2/n is
            // both the midpoint-vs-mean penalty and nonnegative by
            // construction.
            let d = x.abs() - scale.cell_mid(k.unsigned_abs());
            cell.n += 1;
            cell.s1 += d;
            cell.s2 += d * d;
        }
    }
    let mut sse_ezz = sse_zero;
    for cell in cells.values() {
        sse_ezz += cell.s2;
    }
    let mut sse_soezz = sse_ezz;
    if let Some(first) = cells.get(&1) {
        sse_soezz -= first.s1 * first.s1 / first.n as f64;
    }
    let mut sse_oezz = sse_soezz;
    for (&k, cell) in &cells {
        if k >= 2 {
            sse_oezz -= cell.s1 * cell.s1 / cell.n as f64;
        }
    }
    let n = samples.len() as f64;
    Ok(FamilySplit {
        rate: plug_in_entropy(&counts, n),
        d_ezz: sse_ezz / n,
        d_soezz: sse_soezz / n,
        d_oezz: sse_oezz / n,
    })
}

/// Quantization gain `10 log10(sigma2 / d)` in dB.
pub fn gain(sigma2: f64, d: f64) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::domain(format!("variance must be positive, got {sigma2}")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::domain(format!("distortion must be positive, got {d}")));
    }
    Ok(10.0 * (sigma2 / d).log10())
}

/// Coding-gain loss against the curve's bound at the same rate:
/// `L(r) = G_max(r) - g`. Fails outside the curve's rate range.
pub fn loss(curve: &RdCurve, r: f64, g: f64) -> Result<f64> {
    Ok(curve.g_max(r)? - g)
}

/// One swept configuration: model rate and distortion with the scale that
/// produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub rate: f64,
    pub distortion: f64,
    pub j: u8,
    pub lambda: f64,
}

/// Evaluates `kind` over the cross product of `j_range` and `lambda_grid`
/// against the model and keeps the Pareto frontier, sorted by rate.
/// Reconstruction tables for the centroid kinds come from the model.
pub fn sweep_operating_points(
    p: &GgdParams,
    kind: QuantizerKind,
    j_range: &[u8],
    lambda_grid: &[f64],
) -> Result<Vec<OperatingPoint>> {
    if j_range.is_empty() || lambda_grid.is_empty() {
        return Err(Error::domain("sweep ranges must be nonempty"));
    }
    let mut pairs = Vec::with_capacity(j_range.len() * lambda_grid.len());
    for &j in j_range {
        for &lambda in lambda_grid {
            pairs.push((j, lambda));
        }
    }
    let evaluated = parallel::map_indexed(&pairs, |&(j, lambda)| -> Result<OperatingPoint> {
        let (rate, distortion) = model_rate_distortion(&spec_for(p, kind, j, lambda)?, p);
        Ok(OperatingPoint {
            rate,
            distortion,
            j,
            lambda,
        })
    });
    let points = evaluated.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pareto_frontier(points))
}

/// Keeps the undominated points, sorted by rate. Ties on rate keep the
/// smaller distortion; exact duplicates collapse to one point.
fn pareto_frontier(mut points: Vec<OperatingPoint>) -> Vec<OperatingPoint> {
    points.sort_by(|a, b| {
        a.rate
            .total_cmp(&b.rate)
            .then(a.distortion.total_cmp(&b.distortion))
    });
    let mut frontier: Vec<OperatingPoint> = Vec::new();
    for pt in points {
        if frontier
            .last()
            .map_or(true, |last| pt.distortion < last.distortion)
        {
            frontier.push(pt);
        }
    }
    frontier
}

/// Rate of a frontier at distortion `d`, linear in `(ln d, rate)` between
/// bracketing points. `d` must lie inside the frontier's distortion range.
pub fn frontier_rate_at(points: &[OperatingPoint], d: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::domain("need at least two frontier points"));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::domain(format!("distortion must be positive, got {d}")));
    }
    if d > points[0].distortion || d < points[points.len() - 1].distortion {
        return Err(Error::range(format!(
            "distortion {d} outside the frontier range [{}, {}]",
            points[points.len() - 1].distortion,
            points[0].distortion
        )));
    }
    let hi = points.partition_point(|p| p.distortion > d);
    if hi == 0 {
        return Ok(points[0].rate);
    }
    let (a, b) = (&points[hi - 1], &points[hi]);
    let t = (a.distortion.ln() - d.ln()) / (a.distortion.ln() - b.distortion.ln());
    Ok(a.rate + t * (b.rate - a.rate))
}

/// Distortion of a frontier at rate `r`, linear in `(rate, ln d)` between
/// bracketing points. `r` must lie inside the frontier's rate range.
pub fn frontier_distortion_at(points: &[OperatingPoint], r: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::domain("need at least two frontier points"));
    }
    if !r.is_finite() {
        return Err(Error::domain(format!("rate must be finite, got {r}")));
    }
    if r < points[0].rate || r > points[points.len() - 1].rate {
        return Err(Error::range(format!(
            "rate {r} outside the frontier range [{}, {}]",
            points[0].rate,
            points[points.len() - 1].rate
        )));
    }
    let hi = points.partition_point(|p| p.rate < r);
    if hi == 0 {
        return Ok(points[0].distortion);
    }
    let (a, b) = (&points[hi - 1], &points[hi]);
    let t = (r - a.rate) / (b.rate - a.rate);
    Ok((a.distortion.ln() + t * (b.distortion.ln() - a.distortion.ln())).exp())
}

/// Measured Pareto frontiers for the whole family from one pass per
/// configuration over shared data.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyFrontiers {
    pub usq: Vec<OperatingPoint>,
    pub ezz: Vec<OperatingPoint>,
    pub soezz: Vec<OperatingPoint>,
    pub oezz: Vec<OperatingPoint>,
}

/// Sweeps `(j, lambda)` over a sample block, measuring all three zone
/// distortions per configuration via [`family_split`], and returns the four
/// frontiers (USQ is the `j = 0` slice under midpoint reconstruction).
pub fn simulated_family_frontiers(
    samples: &[f64],
    j_range: &[u8],
    lambda_grid: &[f64],
) -> Result<FamilyFrontiers> {
    if j_range.is_empty() || lambda_grid.is_empty() {
        return Err(Error::domain("sweep ranges must be nonempty"));
    }
    let mut pairs = Vec::with_capacity(j_range.len() * lambda_grid.len());
    for &j in j_range {
        for &lambda in lambda_grid {
            pairs.push((j, lambda));
        }
    }
    let measured = parallel::map_indexed(&pairs, |&(j, lambda)| -> Result<(u8, f64, FamilySplit)> {
        let scale = EzzScale::new(j, lambda)?;
        Ok((j, lambda, family_split(&scale, samples)?))
    });
    let mut usq = Vec::new();
    let mut ezz = Vec::new();
    let mut soezz = Vec::new();
    let mut oezz = Vec::new();
    for item in measured {
        let (j, lambda, split) = item?;
        let point = |distortion: f64| OperatingPoint {
            rate: split.rate,
            distortion,
            j,
            lambda,
        };
        // A measured distortion of exactly zero (every occupied cell a
        // singleton) is a finite-data artifact; log-domain interpolation
        // cannot carry it, so such points stay off the frontier.
        if j == 0 && split.d_ezz > 0.0 {
            usq.push(point(split.d_ezz));
        }
        if split.d_ezz > 0.0 {
            ezz.push(point(split.d_ezz));
        }
        if split.d_soezz > 0.0 {
            soezz.push(point(split.d_soezz));
        }
        if split.d_oezz > 0.0 {
            oezz.push(point(split.d_oezz));
        }
    }
    Ok(FamilyFrontiers {
        usq: pareto_frontier(usq),
        ezz: pareto_frontier(ezz),
        soezz: pareto_frontier(soezz),
        oezz: pareto_frontier(oezz),
    })
}

/// Builds the spec for one swept configuration, with model-derived
/// reconstruction values where the kind needs them.
fn spec_for(p: &GgdParams, kind: QuantizerKind, j: u8, lambda: f64) -> Result<QuantizerSpec> {
    let scale = EzzScale::new(j, lambda)?;
    match kind {
        // Build through the full validator so a nonzero j with the j=0-only
        // kinds is rejected instead of silently reset.
        QuantizerKind::Usq => QuantizerSpec::new(kind, scale, ReconRule::Midpoint),
        QuantizerKind::Ezz => QuantizerSpec::ezz(scale),
        QuantizerKind::Ousq => {
            QuantizerSpec::new(kind, scale, ReconRule::Table(model_centroids(&scale, p)))
        }
        QuantizerKind::Oezz => QuantizerSpec::oezz(scale, model_centroids(&scale, p)),
        QuantizerKind::Soezz => {
            let (lo, hi) = cell_bounds(&scale, 1);
            let a1 = p
                .cell_stats(lo, hi)
                .expect("first cell is well formed")
                .centroid;
            QuantizerSpec::soezz(scale, a1)
        }
    }
}
