use std::path::Path;
use std::process::{Command, Output};

use dplqr::PAPER_CONFIG;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dplqr");

fn dplqr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn edited(from: &str, to: &str) -> String {
    assert!(PAPER_CONFIG.contains(from));
    PAPER_CONFIG.replacen(from, to, 1)
}

#[test]
fn trace_round_trips_through_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(dir.path(), PAPER_CONFIG);
    let out = dplqr(&["simulate", "--config", &cfg, "--trials", "5", "--steps", "40", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, stdout_json(&out));

    let mut reader = csv::Reader::from_path(out_dir.join("trace.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["trial", "t", "agent", "x_1", "x_2", "x_3", "eta_1", "eta_2", "eta_3", "gap_inf", "V_t", "eps_step", "eps_cum"]
    );

    let (trials, steps, n, dim) = (5, 40, 4, 3);
    // states[trial][t] = stacked x
    let mut states = vec![vec![Vec::new(); steps + 1]; trials];
    let mut reported_v = vec![vec![0.0; steps + 1]; trials];
    let mut eps_cum = vec![0.0; trials];
    let mut last = None;
    for record in reader.records() {
        let r = record.unwrap();
        let (trial, t, agent): (usize, usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        let key = (trial, t, agent);
        assert!(last.is_none_or(|l| l < key), "rows out of order at {key:?}");
        last = Some(key);
        for field in r.iter().skip(3) {
            let mantissa = field.split('e').next().unwrap();
            assert!(mantissa.chars().filter(char::is_ascii_digit).count() >= 12, "{field}");
        }
        states[trial][t].extend((0..dim).map(|k| r[3 + k].parse::<f64>().unwrap()));
        reported_v[trial][t] = r[3 + 2 * dim + 1].parse().unwrap();
        eps_cum[trial] = r[3 + 2 * dim + 3].parse().unwrap();
    }
    assert_eq!(last, Some((trials - 1, steps, n)));

    let mean_v = summary["monte_carlo"]["mean_v"].as_array().unwrap();
    for t in 0..=steps {
        let mut total = 0.0;
        for trial in 0..trials {
            let x = &states[trial][t];
            let mut v = 0.0;
            for k in 0..dim {
                let mean = (0..n).map(|i| x[i * dim + k]).sum::<f64>() / n as f64;
                v += (0..n).map(|i| (x[i * dim + k] - mean).powi(2)).sum::<f64>();
            }
            assert!((v - reported_v[trial][t]).abs() <= 1e-9 * reported_v[trial][t].max(1.0));
            total += v;
        }
        let recomputed = total / trials as f64;
        let emitted = mean_v[t].as_f64().unwrap();
        assert!((recomputed - emitted).abs() <= 1e-9 * emitted.max(1.0), "t = {t}: {recomputed} vs {emitted}");
    }

    let cumulative = summary["privacy"]["cumulative"].as_f64().unwrap();
    assert!(eps_cum.iter().all(|&c| (c - cumulative).abs() <= 1e-12 * cumulative));
    assert_eq!(summary["privacy"]["releases"], steps);
}

#[test]
fn noiseless_run_contracts_and_is_noise_free() {
    let dir = tempfile::tempdir().unwrap();
    let out = dplqr(&["paper", "--no-noise", "--trials", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let s = stdout_json(&out);
    assert_eq!(s["scenario"]["noise_enabled"], false);
    let final_v = s["monte_carlo"]["final_mean_v"].as_f64().unwrap();
    assert!(final_v < 4783.5);
    assert_eq!(s["monte_carlo"]["half_width"][120], 0.0);
    assert_eq!(s["leakage_window"]["to_t"], 120);
    assert!((s["leakage_window"]["cumulative"].as_f64().unwrap() - 21.9828).abs() < 1e-3);

    let mut reader = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    for r in reader.records() {
        let r = r.unwrap();
        assert!((6..9).all(|k| r[k].parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn validate_rejects_non_summable_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let text = edited("beta = 1.3", "beta = 0.2").replacen("gamma = 1.1", "gamma = 0", 1);
    let cfg = write_config(dir.path(), &text);
    let out = dplqr(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let report = stdout_json(&out);
    assert_eq!(report["assumptions"]["a3_c_square_summable"]["passed"], false);
    assert_eq!(report["assumptions"]["a2_summable_privacy"]["passed"], false);
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "assumptions");
    assert!(err["error"]["details"].as_array().unwrap().contains(&"a3_c_square_summable".into()));
}

#[test]
fn required_assumptions_block_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &edited("noise_enabled = true", "noise_enabled = true\nrequire_assumptions = true"));
    let out = dplqr(&["simulate", "--config", &cfg, "--trials", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["details"], serde_json::json!(["a3_noise_gain"]));
}

#[test]
fn config_errors_are_listed_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = edited("[0, 1, 1, 0]", "[1, 1, 1, 0]").replacen("epsilon = 5.0", "epsilon = 0.0\nextra = 1", 1);
    let cfg = write_config(dir.path(), &text);
    let out = dplqr(&["bounds", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "config");
    let mut paths: Vec<&str> =
        err["error"]["details"].as_array().unwrap().iter().map(|d| d["path"].as_str().unwrap()).collect();
    paths.sort();
    assert_eq!(paths, ["graph.adjacency[0][0]", "privacy.epsilon", "privacy.extra"]);
}

#[test]
fn disconnected_graph_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // agent 1 neither sends nor receives
    let text = edited("[1, 0, 0, 0],\n]", "[0, 0, 0, 0],\n]").replacen("[0, 1, 1, 0]", "[0, 0, 0, 0]", 1);
    let cfg = write_config(dir.path(), &text);
    let out = dplqr(&["gains", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["error"]["details"][0]["message"].as_str().unwrap().contains("spanning tree"));
}

#[test]
fn usage_errors_are_json() {
    let out = dplqr(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    let out = dplqr(&["frobnicate", "--config", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    let out = dplqr(&["paper", "--config", "x.cfg"]);
    assert_eq!(out.status.code(), Some(2));

    let out = dplqr(&["privacy", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "config");

    let out = dplqr(&["paper", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gains_command_reports_sensitivity_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PAPER_CONFIG);
    let out = dplqr(&["gains", "--config", &cfg, "--steps", "10"]);
    assert!(out.status.success());
    let s = stdout_json(&out);
    let g = &s["gains"];
    assert_eq!(g["steps"], 10);
    assert!((g["delta_hat"].as_f64().unwrap() - 18.0).abs() < 1e-6);
    assert!((g["delta_bar"].as_f64().unwrap() - 36.0).abs() < 1e-6);
    let agents = g["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 4);
    assert_eq!(agents[0]["in_degree"], 2);
    let sens: Vec<f64> = agents[0]["sensitivity"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(sens.len(), 11);
    assert!(sens.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(agents[0]["gain"][0].as_array().unwrap().len(), 3);
}

#[test]
fn bounds_command_flags_undefined_quantities() {
    let out = dplqr(&["paper", "--trials", "1", "--steps", "5"]);
    assert!(out.status.success());
    let s = stdout_json(&out);
    assert_eq!(s["constants"]["rho_lambda"]["status"], "defined");
    assert_eq!(s["bounds"]["sigma"]["defined"], false);
    assert!(s["bounds"]["sigma"]["value"].is_null());
    assert!(s["bounds"]["sigma"]["note"].as_str().unwrap().contains("q ="));
    assert_eq!(s["monte_carlo"]["checks"]["final_within_sigma"], Value::Null);
}
