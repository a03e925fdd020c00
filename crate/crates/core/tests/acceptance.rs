//! Numbered acceptance checks pinning the reference numbers this library is
//! expected to reproduce, one verdict line per criterion. Run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see the
//! lines for passing checks too; the harness swallows stdout otherwise.
//!
//! Tolerances are pinned next to each check and are not to be loosened to
//! make a run green. A failing check prints its measured values so the gap
//! is visible.

use ezzq::adaptive::{
    adaptive_decode, adaptive_encode, build_table, default_j_range, default_lambda_grid,
    spec_from_side, SideInfo,
};
use ezzq::ggd::{estimate_params, GgdParams};
use ezzq::quant::{
    family_split, frontier_distortion_at, frontier_rate_at, model_centroids,
    model_rate_distortion, simulated_family_frontiers, sweep_operating_points, EzzScale,
    OperatingPoint, QuantizerKind, QuantizerSpec, J_MAX,
};
use ezzq::rd::{discretize_empirical, discretize_ggd_auto, rd_curve, RdCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Slope count shared by every curve in this suite.
const N_SLOPES: usize = 41;

fn verdict(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{name}: {tag} - {detail}");
    assert!(pass, "{name}: FAIL - {detail}");
}

/// Rate-distortion curve for a unit-variance shape, cached across checks,
/// along with the discretized source variance for distortion normalization.
fn curve(alpha: f64) -> Arc<(RdCurve, f64)> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<(RdCurve, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(alpha.to_bits())
        .or_insert_with(|| {
            let p = GgdParams::new(alpha, 1.0).expect("valid shape");
            let src = discretize_ggd_auto(&p).expect("discretizable");
            let var = src.variance();
            Arc::new((rd_curve(&src, N_SLOPES).expect("curve"), var))
        })
        .clone()
}

/// Rate on a cached curve at an absolute distortion.
fn rate_at(c: &(RdCurve, f64), d: f64) -> f64 {
    c.0.rate_at(d / c.1).expect("distortion on curve")
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Largest loss difference between a frontier and the best zone frontier,
/// evaluated at the first frontier's own points so no interpolation error
/// lands on the side being maximized.
fn peak_gap_at_nodes(
    over: &[OperatingPoint],
    under: &[OperatingPoint],
    r_lo: f64,
    r_hi: f64,
) -> (f64, f64) {
    let mut peak = (f64::NAN, f64::NEG_INFINITY);
    for pt in over {
        if pt.rate < r_lo || pt.rate > r_hi {
            continue;
        }
        if let Ok(d_under) = frontier_distortion_at(under, pt.rate) {
            let gap = 10.0 * (pt.distortion / d_under).log10();
            if gap > peak.1 {
                peak = (pt.rate, gap);
            }
        }
    }
    assert!(peak.1.is_finite(), "frontiers never overlap in [{r_lo},{r_hi}]");
    peak
}

#[test]
fn criterion_1_gaussian_rate_checkpoints() {
    let c = curve(2.0);
    let r = rate_at(&c, 0.01);

    let p = GgdParams::new(2.0, 1.0).unwrap();
    let ousq = sweep_operating_points(&p, QuantizerKind::Ousq, &[0], &default_lambda_grid())
        .unwrap();
    let r_ousq = frontier_rate_at(&ousq, 0.01).unwrap();

    verdict(
        "criterion 1",
        (r - 3.32).abs() <= 0.05 && (r_ousq - 3.58).abs() <= 0.08,
        &format!("R(0.01)={r:.4} (want 3.32±0.05); OUSQ rate={r_ousq:.4} (want 3.58±0.08)"),
    );
}

#[test]
fn criterion_2_heavy_tail_rate_checkpoints() {
    let zone_kinds = [QuantizerKind::Ezz, QuantizerKind::Soezz, QuantizerKind::Oezz];
    let best_family_rate = |alpha: f64| -> f64 {
        let p = GgdParams::new(alpha, 1.0).unwrap();
        zone_kinds
            .iter()
            .map(|&k| {
                let f =
                    sweep_operating_points(&p, k, &default_j_range(), &default_lambda_grid())
                        .unwrap();
                frontier_rate_at(&f, 0.01).unwrap()
            })
            .fold(f64::INFINITY, f64::min)
    };

    let r_opt = rate_at(&curve(0.25), 0.01);
    let best = best_family_rate(0.25);
    let gap = best - r_opt;
    let gap2 = best_family_rate(2.0) - rate_at(&curve(2.0), 0.01);

    verdict(
        "criterion 2",
        (r_opt - 1.50).abs() <= 0.10
            && (best - 1.61).abs() <= 0.10
            && (gap - 0.11).abs() <= 0.05
            && (gap2 - 0.25).abs() <= 0.05,
        &format!(
            "alpha=0.25: R(0.01)={r_opt:.4} (1.50±0.10), best zone rate={best:.4} (1.61±0.10), \
             gap={gap:.4} (0.11±0.05); alpha=2 gap={gap2:.4} (0.25±0.05)"
        ),
    );
}

#[test]
fn criterion_3_uniform_quantizer_sandwich() {
    let mut detail = String::new();
    let mut pass = true;
    for alpha in [0.5, 1.0, 2.0] {
        let c = curve(alpha);
        let p = GgdParams::new(alpha, 1.0).unwrap();
        let ousq =
            sweep_operating_points(&p, QuantizerKind::Ousq, &[0], &default_lambda_grid()).unwrap();

        // The bit sandwich holds from 3 bits on. The dB form is an
        // asymptotic statement; at alpha=0.5 the loss only enters the band
        // near 3.5 bits, so it is checked on the 5-to-6-bit points.
        let mut checked = 0;
        let mut high_rate = 0;
        let (mut gap_lo, mut gap_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut loss_lo, mut loss_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for pt in &ousq {
            if pt.rate < 3.0 || pt.rate > 6.0 {
                continue;
            }
            let gap = pt.rate - rate_at(&c, pt.distortion);
            gap_lo = gap_lo.min(gap);
            gap_hi = gap_hi.max(gap);
            checked += 1;
            if pt.rate >= 5.0 {
                let loss = c.0.g_max(pt.rate).unwrap() - 10.0 * (1.0 / pt.distortion).log10();
                loss_lo = loss_lo.min(loss);
                loss_hi = loss_hi.max(loss);
                high_rate += 1;
            }
        }
        pass &= checked >= 10
            && high_rate >= 5
            && gap_lo >= -1e-3
            && gap_hi <= 0.26
            && loss_lo >= 1.53 - 0.15
            && loss_hi <= 1.53 + 0.15;
        detail.push_str(&format!(
            "alpha={alpha}: rate gap [{gap_lo:.4},{gap_hi:.4}] over {checked} points in R 3-6 \
             (want [0,0.26]), loss [{loss_lo:.3},{loss_hi:.3}] dB over {high_rate} points in \
             R 5-6 (want 1.53±0.15); "
        ));
    }
    verdict("criterion 3", pass, detail.trim_end_matches("; "));
}

#[test]
fn criterion_4_model_vs_sampled_curve() {
    let p = GgdParams::new(0.67, 1.0).unwrap();
    let samples = p.sample(1_000_000, 67);
    let theory = curve(0.67);
    let emp_src = discretize_empirical(&samples, 4001).unwrap();
    let emp_var = emp_src.variance();
    let emp = rd_curve(&emp_src, N_SLOPES).unwrap();

    let mut max_delta: f64 = 0.0;
    let mut compared = 0;
    for d in log_grid(1e-3, 1.0, 25) {
        let rt = theory.0.rate_at(d / theory.1).ok();
        let re = emp.rate_at(d / emp_var).ok();
        if let (Some(rt), Some(re)) = (rt, re) {
            max_delta = max_delta.max((rt - re).abs());
            compared += 1;
        }
    }
    verdict(
        "criterion 4",
        compared >= 20 && max_delta <= 0.05,
        &format!("max |R_model - R_sampled| = {max_delta:.4} bits over {compared} grid points (want <=0.05)"),
    );
}

#[test]
fn criterion_5_loss_gap_trends() {
    // Heavy tail: measured on samples, like the loss-curve experiment.
    let p = GgdParams::new(0.25, 1.0).unwrap();
    let samples = p.sample(1_000_000, 1);
    let var = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    let lambda_grid: Vec<f64> = default_lambda_grid().iter().map(|l| l * var.sqrt()).collect();
    let fronts = simulated_family_frontiers(&samples, &default_j_range(), &lambda_grid).unwrap();
    let (r_peak, g_peak) = peak_gap_at_nodes(&fronts.usq, &fronts.soezz, 0.2, 4.0);
    let g_at_1 = 10.0
        * (frontier_distortion_at(&fronts.usq, 1.0).unwrap()
            / frontier_distortion_at(&fronts.soezz, 1.0).unwrap())
        .log10();
    let c = curve(0.25);
    let l_soezz_1 = c.0.g_max(1.0).unwrap()
        - 10.0 * (var / frontier_distortion_at(&fronts.soezz, 1.0).unwrap()).log10();

    // Gaussian: straight from the model.
    let p2 = GgdParams::new(2.0, 1.0).unwrap();
    let usq2 =
        sweep_operating_points(&p2, QuantizerKind::Usq, &[0], &default_lambda_grid()).unwrap();
    let soezz2 = sweep_operating_points(
        &p2,
        QuantizerKind::Soezz,
        &default_j_range(),
        &default_lambda_grid(),
    )
    .unwrap();
    let (r_peak2, g_peak2) = peak_gap_at_nodes(&usq2, &soezz2, 0.2, 4.0);

    verdict(
        "criterion 5",
        (g_peak - 0.5).abs() <= 0.2 && (g_peak2 - 1.0).abs() <= 0.3 && l_soezz_1 <= 0.6,
        &format!(
            "alpha=0.25 peak USQ-SOEZZ gap {g_peak:.4} dB at R={r_peak:.2} (want 0.5±0.2, \
             gap at R=1 is {g_at_1:.4}); \
             alpha=2 peak {g_peak2:.4} dB at R={r_peak2:.2} (want 1.0±0.3); \
             L_soezz(1)={l_soezz_1:.4} dB (want <=0.6)"
        ),
    );
}

#[test]
fn criterion_6_family_distortion_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let trials = 250;
    for trial in 0..trials {
        let alpha = 10f64.powf(rng.gen_range(-0.82..0.48));
        let sigma2 = rng.gen_range(0.25..4.0);
        let p = GgdParams::new(alpha, sigma2).unwrap();
        let samples = p.sample(rng.gen_range(500..4000), 1000 + trial);
        let j = rng.gen_range(0..=J_MAX);
        let lambda = p.sigma() * 10f64.powf(rng.gen_range(-1.3..0.9));
        let scale = EzzScale::new(j, lambda).unwrap();
        let split = family_split(&scale, &samples).unwrap();
        assert!(
            split.d_ezz >= split.d_soezz && split.d_soezz >= split.d_oezz,
            "trial {trial} (alpha={alpha:.3}, j={j}, lambda={lambda:.3}): \
             {} >= {} >= {} violated",
            split.d_ezz,
            split.d_soezz,
            split.d_oezz
        );
    }
    verdict(
        "criterion 6",
        true,
        &format!("D_ezz >= D_soezz >= D_oezz held exactly on {trials} random configurations"),
    );
}

#[test]
fn criterion_7_shape_estimator_accuracy() {
    let mut detail = String::new();
    let mut pass = true;
    for (i, &alpha) in [0.3, 0.5, 1.0, 2.0].iter().enumerate() {
        let p = GgdParams::new(alpha, 1.0).unwrap();
        let mut errs: Vec<f64> = (0..20)
            .map(|s| {
                let est = estimate_params(&p.sample(100_000, 7000 + 100 * i as u64 + s)).unwrap();
                (est.params.alpha() - alpha).abs() / alpha
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = (errs[9] + errs[10]) / 2.0;
        pass &= median <= 0.05;
        detail.push_str(&format!("alpha={alpha}: median rel err {median:.4}; "));
    }
    verdict(
        "criterion 7",
        pass,
        &format!("{}(want <=0.05 each)", detail),
    );
}

#[test]
fn criterion_8_adaptive_end_to_end() {
    let p = GgdParams::new(0.5, 1.0).unwrap();
    let samples = p.sample(100_000, 88);
    let table = build_table(
        &[0.5],
        QuantizerKind::Soezz,
        &default_j_range(),
        &default_lambda_grid(),
    )
    .unwrap();
    let est = estimate_params(&samples).unwrap();
    let target = est.moments.sigma2_hat * 1e-2; // 20 dB below the block's variance
    let (block, summary) = adaptive_encode(&samples, target, &table, QuantizerKind::Soezz).unwrap();

    let realized_db = 10.0 * (est.moments.sigma2_hat / summary.distortion).log10();
    let entry = summary.entry.expect("normal path selects a table entry");
    let rate_delta = (summary.rate - entry.rate).abs();

    // The decoder's output is the encoder's reconstruction, value for value,
    // so re-measuring distortion the encoder's way reproduces the report bit
    // for bit.
    let decoded = adaptive_decode(&block).unwrap();
    let spec = spec_from_side(&block.side).unwrap();
    let mut pointwise = true;
    for (&k, &y) in block.frame.indices().iter().zip(&decoded) {
        pointwise &= spec.reconstruct(k as i64).to_bits() == y.to_bits();
    }
    let (re_rate, re_dist) = ezzq::quant::empirical_rate_distortion(&spec, &samples).unwrap();
    let exact = re_dist.to_bits() == summary.distortion.to_bits()
        && re_rate.to_bits() == summary.rate.to_bits();

    let bytes = block.side.serialize().unwrap();
    let (parsed, used) = SideInfo::parse(&bytes).unwrap();
    let side_round_trip = used == bytes.len() && parsed.serialize().unwrap() == bytes;

    verdict(
        "criterion 8",
        (realized_db - 20.0).abs() <= 1.0
            && rate_delta <= 0.1
            && pointwise
            && exact
            && side_round_trip
            && !summary.unreachable
            && !summary.degenerate,
        &format!(
            "realized gain {realized_db:.3} dB (want 20±1); |measured - table| rate \
             {rate_delta:.4} bits (want <=0.1); decode==encode pointwise: {pointwise}; \
             re-measured distortion exact: {exact}; side info round trip: {side_round_trip}"
        ),
    );
}

#[test]
fn criterion_9_oracle_suites() {
    // Blahut against the Gaussian closed form R(D) = log2(1/D) / 2.
    let c = curve(2.0);
    let mut max_dev: f64 = 0.0;
    for d in log_grid(1e-3, 0.9, 15) {
        max_dev = max_dev.max((rate_at(&c, d) - 0.5 * (1.0 / d).log2()).abs());
    }
    let blahut_ok = max_dev <= 0.02;

    // Sampled rate/distortion against the model at n = 10^6.
    let p = GgdParams::new(1.0, 1.0).unwrap();
    let samples = p.sample(1_000_000, 4242);
    let scale_s = EzzScale::new(1, 0.5).unwrap();
    let scale_o = EzzScale::new(0, 0.8).unwrap();
    let specs = [
        QuantizerSpec::usq(0.4).unwrap(),
        QuantizerSpec::soezz(scale_s, model_centroids(&scale_s, &p)[0]).unwrap(),
        QuantizerSpec::oezz(scale_o, model_centroids(&scale_o, &p)).unwrap(),
    ];
    let mut conv_ok = true;
    let mut conv_detail = String::new();
    for spec in &specs {
        let (rm, dm) = model_rate_distortion(spec, &p);
        let (re, de) = ezzq::quant::empirical_rate_distortion(spec, &samples).unwrap();
        conv_ok &= (re - rm).abs() <= 0.01 && (de - dm).abs() / dm <= 0.02;
        conv_detail.push_str(&format!(
            "{} dR={:.4} dD={:.2}%; ",
            spec.kind(),
            (re - rm).abs(),
            100.0 * (de - dm).abs() / dm
        ));
    }

    // Sweep against brute-force enumeration plus an independent Pareto pass.
    let j_range = [0u8, 1, 2, 3];
    let lambdas = log_grid(0.1, 4.0, 24);
    let swept =
        sweep_operating_points(&p, QuantizerKind::Soezz, &j_range, &lambdas).unwrap();
    let mut all: Vec<OperatingPoint> = Vec::new();
    for &j in &j_range {
        for &lambda in &lambdas {
            let scale = EzzScale::new(j, lambda).unwrap();
            let spec = QuantizerSpec::soezz(scale, model_centroids(&scale, &p)[0]).unwrap();
            let (rate, distortion) = model_rate_distortion(&spec, &p);
            all.push(OperatingPoint {
                rate,
                distortion,
                j,
                lambda,
            });
        }
    }
    all.sort_by(|a, b| {
        a.rate
            .total_cmp(&b.rate)
            .then(a.distortion.total_cmp(&b.distortion))
    });
    let mut expected: Vec<OperatingPoint> = Vec::new();
    for pt in all {
        if expected.last().map_or(true, |l| pt.distortion < l.distortion) {
            expected.push(pt);
        }
    }
    let sweep_ok = swept.len() == expected.len()
        && swept.iter().zip(&expected).all(|(a, b)| {
            a.rate.to_bits() == b.rate.to_bits()
                && a.distortion.to_bits() == b.distortion.to_bits()
                && a.j == b.j
                && a.lambda.to_bits() == b.lambda.to_bits()
        });

    verdict(
        "criterion 9",
        blahut_ok && conv_ok && sweep_ok,
        &format!(
            "Blahut vs closed form max dev {max_dev:.4} bits (want <=0.02); \
             convergence {conv_detail}(want dR<=0.01, dD<=2%); \
             sweep == brute force: {sweep_ok} ({} points)",
            expected.len()
        ),
    );
}
