//! End-to-end runs of the installed binary: subcommand output formats, exit
//! codes, and the contract that a decoded file's measured error matches the
//! encode report bit for bit.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ezzq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ezzq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = ezzq(dir, args);
    assert!(
        out.status.code() == Some(0),
        "ezzq {args:?} exited {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn exit_code(dir: &Path, args: &[&str]) -> i32 {
    ezzq(dir, args).status.code().expect("exit code")
}

/// Data rows of a CSV file: comment and header lines stripped, fields split.
fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).expect("csv readable");
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .skip(1)
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn footer_value(path: &Path, key: &str) -> Option<f64> {
    let text = fs::read_to_string(path).expect("csv readable");
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.strip_prefix(key))
        .filter_map(|l| l.strip_prefix('='))
        .find_map(|v| v.trim().parse().ok())
}

#[test]
fn estimate_reports_one_fit_per_band() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(
        d,
        &[
            "generate", "--alpha", "1", "--n", "60000", "--seed", "11", "--out", "a.txt",
        ],
    );
    run_ok(
        d,
        &[
            "generate", "--alpha", "0.5", "--sigma2", "4", "--n", "40000", "--seed", "12",
            "--out", "b.txt",
        ],
    );
    let mut mix = fs::read_to_string(d.join("a.txt")).unwrap();
    mix.push_str(&fs::read_to_string(d.join("b.txt")).unwrap());
    mix.push_str(&"0\n".repeat(500));
    fs::write(d.join("mix.txt"), mix).unwrap();
    fs::write(d.join("bands.txt"), "0,60000\n60000,100000\n100000,100500\n").unwrap();

    run_ok(
        d,
        &[
            "estimate", "mix.txt", "--bands", "bands.txt", "--out", "est.csv",
        ],
    );
    let rows = data_rows(&d.join("est.csv"));
    assert_eq!(rows.len(), 3);

    let a0: f64 = rows[0][4].parse().unwrap();
    assert!((a0 - 1.0).abs() < 0.1, "band 0 alpha_hat {a0}");
    assert_eq!(rows[0][7], "ok");

    let a1: f64 = rows[1][4].parse().unwrap();
    let s1: f64 = rows[1][5].parse().unwrap();
    assert!((a1 - 0.5).abs() < 0.08, "band 1 alpha_hat {a1}");
    assert!((3.0..5.0).contains(&s1), "band 1 sigma2_hat {s1}");

    assert_eq!(rows[2][7], "degenerate");
    assert!(rows[2][4].is_empty() && rows[2][5].is_empty());
}

#[test]
fn fig3_tracks_the_model_curve_on_sampled_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = exit_code(
        d,
        &[
            "fig3", "--alpha", "0.67", "--n", "20000", "--seed", "9", "--slopes", "9",
            "--bins", "301", "--out", "fig3.csv",
        ],
    );
    assert!(code == 0 || code == 3, "unexpected exit {code}");

    let rows = data_rows(&d.join("fig3.csv"));
    assert_eq!(rows.len(), 25);
    for row in &rows {
        let dquery: f64 = row[0].parse().unwrap();
        assert!((1e-3..=1.0 + 1e-12).contains(&dquery));
    }
    // At this sample count the curves already agree to a few hundredths.
    let delta = footer_value(&d.join("fig3.csv"), "max_abs_delta_bits").unwrap();
    assert!(delta < 0.25, "max delta {delta}");
}

#[test]
fn rdcurves_match_the_gaussian_reference_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["rdcurves", "--alpha", "2", "--out", "rd"]);

    let rows = data_rows(&d.join("rd/rd_alpha_2.csv"));
    let row = rows
        .iter()
        .find(|r| (r[0].parse::<f64>().unwrap() - 0.01).abs() < 1e-9)
        .expect("grid hits D=0.01");
    let rate: f64 = row[1].parse().unwrap();
    let ousq: f64 = row[5].parse().unwrap();
    let usq: f64 = row[4].parse().unwrap();
    assert!((rate - 3.32).abs() < 0.05, "R(0.01) = {rate}");
    assert!((ousq - 3.58).abs() < 0.08, "OUSQ rate {ousq}");
    assert!(usq >= ousq - 1e-9 && ousq >= rate - 1e-9);

    // Every populated row keeps the same ordering.
    for r in &rows {
        if let (Ok(rd), Ok(u), Ok(o)) = (
            r[1].parse::<f64>(),
            r[4].parse::<f64>(),
            r[5].parse::<f64>(),
        ) {
            assert!(u >= o - 1e-9 && o >= rd - 1e-9, "ordering broken at {r:?}");
        }
    }
}

#[test]
fn encode_decode_pipeline_reproduces_the_reported_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(d, &["soezz-table", "--alpha", "0.5", "--out", "table.csv"]);
    run_ok(
        d,
        &[
            "generate", "--alpha", "0.5", "--sigma2", "2.3", "--n", "60000", "--seed", "7",
            "--out", "c.txt",
        ],
    );
    fs::write(d.join("bands.txt"), "0,30000\n30000,60000\n").unwrap();
    run_ok(
        d,
        &[
            "encode", "c.txt", "--bands", "bands.txt", "--table", "table.csv", "--kind",
            "soezz", "--target-db", "20", "--out", "cont.bin", "--report", "rep.csv",
        ],
    );

    let rows = data_rows(&d.join("rep.csv"));
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let gain: f64 = row[11].parse().unwrap();
        assert!((19.0..21.0).contains(&gain), "gain {gain}");
        assert_eq!(row[12], "ok");
    }

    // Raw 32-bit output reproduces the reported distortion bit for bit.
    run_ok(
        d,
        &[
            "decode", "cont.bin", "--format", "f32le", "--out", "dec.f32",
        ],
    );
    let input: Vec<f64> = fs::read_to_string(d.join("c.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let raw = fs::read(d.join("dec.f32")).unwrap();
    let decoded: Vec<f64> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    assert_eq!(decoded.len(), input.len());
    for (row, range) in rows.iter().zip([0..30000, 30000..60000]) {
        let mut sse = 0.0;
        for i in range.clone() {
            let e = input[i] - decoded[i];
            sse += e * e;
        }
        let mse = sse / range.len() as f64;
        let reported: f64 = row[10].parse().unwrap();
        assert_eq!(mse, reported, "band {} distortion drifts", row[0]);
    }

    // Text output carries the same values: each printed line parses back to
    // the same 32-bit float the raw format stores.
    run_ok(d, &["decode", "cont.bin", "--out", "dec.txt"]);
    let text_vals: Vec<f32> = fs::read_to_string(d.join("dec.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let raw_vals: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(text_vals.len(), raw_vals.len());
    for (i, (t, r)) in text_vals.iter().zip(&raw_vals).enumerate() {
        assert_eq!(t.to_bits(), r.to_bits(), "sample {i}");
    }

    // Same inputs, same bytes.
    run_ok(
        d,
        &[
            "encode", "c.txt", "--bands", "bands.txt", "--table", "table.csv", "--kind",
            "soezz", "--target-db", "20", "--out", "cont2.bin",
        ],
    );
    assert_eq!(
        fs::read(d.join("cont.bin")).unwrap(),
        fs::read(d.join("cont2.bin")).unwrap()
    );
}

#[test]
fn encode_builds_a_default_table_when_none_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(
        d,
        &[
            "generate", "--alpha", "0.8", "--n", "5000", "--seed", "3", "--format", "f32le",
            "--out", "c.f32",
        ],
    );
    run_ok(
        d,
        &[
            "encode", "c.f32", "--format", "f32le", "--target-mse", "0.05", "--out",
            "cont.bin", "--report", "rep.csv",
        ],
    );
    let rows = data_rows(&d.join("rep.csv"));
    assert_eq!(rows.len(), 1);
    let reported: f64 = rows[0][10].parse().unwrap();
    assert!(
        (0.02..=0.055).contains(&reported),
        "distortion {reported} for target 0.05"
    );
    run_ok(d, &["decode", "cont.bin", "--out", "dec.txt"]);
}

#[test]
fn failure_modes_map_to_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // Usage errors.
    assert_eq!(exit_code(d, &[]), 1);
    assert_eq!(exit_code(d, &["fig3", "--alpha", "1", "--n", "10"]), 1);
    assert_eq!(exit_code(d, &["generate", "--alpha", "0", "--n", "5", "--out", "x"]), 1);
    assert_eq!(
        exit_code(
            d,
            &[
                "encode", "x.txt", "--target-db", "20", "--target-mse", "0.1", "--out", "c",
            ],
        ),
        1
    );
    assert_eq!(exit_code(d, &["--help"]), 0);
    assert_eq!(exit_code(d, &["--version"]), 0);

    // Data errors.
    assert_eq!(exit_code(d, &["estimate", "missing.txt"]), 2);
    fs::write(d.join("short.txt"), "1.0\n2.0\n3.0\n").unwrap();
    fs::write(d.join("bands.txt"), "0,2\n").unwrap();
    assert_eq!(
        exit_code(d, &["estimate", "short.txt", "--bands", "bands.txt"]),
        2,
        "bands not covering the file"
    );
    fs::write(d.join("junk.txt"), "1.0\nnot-a-number\n").unwrap();
    assert_eq!(exit_code(d, &["estimate", "junk.txt"]), 2);

    // A truncated container is a data error on decode.
    run_ok(
        d,
        &[
            "generate", "--alpha", "1", "--n", "2000", "--seed", "1", "--out", "g.txt",
        ],
    );
    run_ok(
        d,
        &[
            "soezz-table", "--alpha", "1", "--out", "t.csv",
        ],
    );
    run_ok(
        d,
        &[
            "encode", "g.txt", "--table", "t.csv", "--target-mse", "0.1", "--out", "cont.bin",
        ],
    );
    let bytes = fs::read(d.join("cont.bin")).unwrap();
    fs::write(d.join("cut.bin"), &bytes[..bytes.len() - 5]).unwrap();
    assert_eq!(exit_code(d, &["decode", "cut.bin", "--out", "dec.txt"]), 2);

    // A table built for one kind cannot drive another.
    assert_eq!(
        exit_code(
            d,
            &[
                "encode", "g.txt", "--table", "t.csv", "--kind", "oezz", "--target-mse",
                "0.1", "--out", "c2.bin",
            ],
        ),
        2
    );
}
