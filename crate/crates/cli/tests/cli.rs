use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mrtlb(sub: &str, config_text: &str) -> (Run, TempDir) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config_text).unwrap();
    let out = dir.path().join("out");
    let Output { status, stderr, .. } = Command::new(env!("CARGO_BIN_EXE_mrtlb"))
        .args([sub, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env_remove("MRTLB_OUT_DIR")
        .output()
        .unwrap();
    let run = Run { code: status.code().unwrap(), stderr: String::from_utf8(stderr).unwrap(), out };
    (run, dir)
}

fn shipped(name: &str) -> String {
    fs::read_to_string(configs().join(name)).unwrap()
}

fn name_values(path: &Path) -> HashMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (n, v) = l.split_once(',').unwrap();
            (n.to_string(), v.to_string())
        })
        .collect()
}

fn num(map: &HashMap<String, String>, key: &str) -> f64 {
    map[key].parse().unwrap()
}

#[test]
fn params_reproduce_the_anisotropic_reference_model() {
    let (run, _dir) = mrtlb("params", &shipped("anisotropic.toml"));
    assert_eq!(run.code, 0, "{}", run.stderr);
    let p = name_values(&run.out.join("params.csv"));
    let expected = [
        ("omega_0", 0.392414074930637),
        ("omega_1", 0.003792962534682),
        ("omega_2", 11.0 / 45.0),
        ("s_x1", 0.258403002308493),
        ("s_x2", 1.5),
        ("s2_x1x2", 1.466835061000191),
    ];
    for (key, want) in expected {
        assert!((num(&p, key) - want).abs() < 1e-9, "{key}: {} vs {want}", p[key]);
    }
}

#[test]
fn params_toml_round_trips_as_overrides() {
    let base = shipped("anisotropic.toml");
    let (first, _a) = mrtlb("params", &base);
    assert_eq!(first.code, 0, "{}", first.stderr);
    let emitted = fs::read_to_string(first.out.join("params.toml")).unwrap();
    let (second, _b) = mrtlb("params", &format!("{base}\n{emitted}"));
    assert_eq!(second.code, 0, "{}", second.stderr);
    let (a, b) = (fs::read(first.out.join("params.csv")).unwrap(), fs::read(second.out.join("params.csv")).unwrap());
    assert_eq!(a, b);
}

#[test]
fn axis_lattice_rejects_anisotropy() {
    let (run, _dir) = mrtlb("params", "lattice = \"axis\"\neps_tilde = [0.2, 0.1]\ndx = 0.1\nscaling_ratio = 1\n");
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("infeasible: anisotropic"), "{}", run.stderr);
}

#[test]
fn config_errors_exit_with_two() {
    for text in [
        "eps_tilde = [0.2, 0.2]\ndx = 0.1\n",
        "eps_tilde = [0.2, 0.2]\ndx = 0.1\ndt = 0.01\nscaling_ratio = 1\n",
        "eps_tilde = [0.2, 0.2]\nkappa = [0.2, 0.2]\ndx = 0.1\ndt = 0.01\n",
        "eps_tilde = [0.2, 0.2]\ndx = 0.1\ndt = \"1/\"\n",
        "eps_tilde = [0.2, 0.2]\ndx = 0.1\ndt = 0.01\nmystery = 1\n",
        "eps_tilde = [0.2, 0.2]\nd = 3\ndx = 0.1\ndt = 0.01\n",
    ] {
        let (run, _dir) = mrtlb("params", text);
        assert_eq!(run.code, 2, "{text}: {}", run.stderr);
        assert!(!run.stderr.is_empty());
    }
}

#[test]
fn source_model_is_stable() {
    let text = format!("{}\n[stability]\nresolution = 24\n", shipped("source_params.toml"));
    let (run, _dir) = mrtlb("stability", &text);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = name_values(&run.out.join("stability.csv"));
    assert_eq!(r["stable"], "1");
    assert_eq!(r["scan_resolution"], "24");
}

#[test]
fn axis_closed_form_at_large_diffusion_is_rejected_before_the_scan() {
    let text = "lattice = \"axis\"\neps_tilde = [0.2, 0.2]\ndx = 0.025\nscaling_ratio = 16\n";
    let (run, _dir) = mrtlb("stability", text);
    assert_eq!(run.code, 4);
    assert!(run.stderr.contains("before the scan") && run.stderr.contains("omega_0"), "{}", run.stderr);
    assert!(!run.out.join("stability.csv").exists());
}

#[test]
fn broken_rate_ties_are_reported_unstable() {
    let text = format!("{}\n[stability]\nresolution = 8\n[overrides]\ns3 = [1.2, 0.7]\n", shipped("anisotropic.toml"));
    let (run, _dir) = mrtlb("stability", &text);
    assert_eq!(run.code, 4, "{}", run.stderr);
    let r = name_values(&run.out.join("stability.csv"));
    assert!(num(&r, "jw_asymmetry") > 1e-6);
    assert_eq!(r["structure_ok"], "0");
}

#[test]
fn smallest_region_has_four_rows() {
    let text = "d = 2\n[region]\nkind = \"stability\"\nx = { min = 0.1, max = 0.2, n = 2 }\n\
                y = { min = 0.1, max = 0.2, n = 2 }\nresolution = 4\n";
    let (run, _dir) = mrtlb("region", text);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let csv = fs::read_to_string(run.out.join("region.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv.lines().next(), Some("omega_tilde,x,y,verdict"));
}

fn feasible_sets(csv: &str) -> Vec<Vec<bool>> {
    let mut sets: Vec<(String, Vec<bool>)> = Vec::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if sets.last().is_none_or(|s| s.0 != cols[0]) {
            sets.push((cols[0].to_string(), Vec::new()));
        }
        sets.last_mut().unwrap().1.push(cols[3] == "1");
    }
    sets.into_iter().map(|s| s.1).collect()
}

#[test]
fn solvability_regions_grow_as_the_diagonal_weight_shrinks() {
    let text = shipped("solvability.toml").replace("n = 40", "n = 12");
    let (run, _dir) = mrtlb("region", &text);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let sets = feasible_sets(&fs::read_to_string(run.out.join("region.csv")).unwrap());
    assert_eq!(sets.len(), 3);
    for w in sets.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| !a || *b));
        assert!(w[0].iter().filter(|v| **v).count() < w[1].iter().filter(|v| **v).count());
    }
}

#[test]
fn zero_final_time_dumps_the_initial_field() {
    let text = "eps_tilde = [0.3, 0.1]\ndx = 0.25\nscaling_ratio = 250\nt_final = 0\n[case]\nname = \"gauss_hill\"\n\
                gamma0 = 0.3\n";
    let (run, _dir) = mrtlb("run", text);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let field = fs::read_to_string(run.out.join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 1 + 8 * 8);
    let summary = name_values(&run.out.join("run.csv"));
    assert_eq!(summary["steps"], "0");
    assert_eq!(num(&summary, "l2_error"), 0.0);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let text = "eps_tilde = [0.3, 0.1]\ndx = 0.1\ndt = \"1/40\"\nt_final = 0.5\n[case]\nname = \"gauss_hill\"\n\
                gamma0 = 0.2\n";
    let (a, _da) = mrtlb("run", text);
    let (b, _db) = mrtlb("run", text);
    assert_eq!(a.code, 0, "{}", a.stderr);
    for file in ["field.csv", "run.csv"] {
        assert_eq!(fs::read(a.out.join(file)).unwrap(), fs::read(b.out.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn overflowing_run_exits_with_five() {
    let text = "eps_tilde = [0.2, 0.2]\ndx = 0.25\ndt = 0.001\nt_final = 2\n[case]\nname = \"gauss_hill\"\n\
                gamma0 = 0.3\n[overrides]\ns2_diag = [3.9, 3.9]\n";
    let (run, _dir) = mrtlb("run", text);
    assert_eq!(run.code, 5, "{}", run.stderr);
    assert!(run.stderr.contains("divergence detected at step"), "{}", run.stderr);
}

#[test]
fn sine_source_converges_at_fourth_order() {
    let (run, _dir) = mrtlb("converge", &shipped("sine_source.toml"));
    assert_eq!(run.code, 0, "{}", run.stderr);
    let csv = fs::read_to_string(run.out.join("convergence.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["dx", "dt", "l2_error", "rate"]);
    let l2: f64 = rows[1][2].parse().unwrap();
    let rate: f64 = rows[2][3].parse().unwrap();
    assert!((l2 / 1.8240e-8 - 1.0).abs() < 0.01, "{l2}");
    assert!((rate - 3.9961).abs() < 0.05, "{rate}");
}

#[test]
fn several_init_schemes_get_a_label_column() {
    let text = "eps_tilde = [0.3, 0.1]\nscaling_ratio = 40\nt_final = 0.5\n\
                init = [\"equilibrium\", \"fourth_order\"]\n[case]\nname = \"gauss_hill\"\ngamma0 = 0.2\n\
                [converge]\ndx = [\"1/20\", \"1/40\"]\n";
    let (run, _dir) = mrtlb("converge", text);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let csv = fs::read_to_string(run.out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "init,dx,dt,l2_error,rate");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("equilibrium,") && lines[4].starts_with("fourth_order,"));
    let err = |l: &str| -> f64 { l.split(',').nth(3).unwrap().parse().unwrap() };
    assert!(err(lines[4]) < err(lines[2]));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("p.toml");
    fs::write(&cfg, shipped("anisotropic.toml")).unwrap();
    let target = dir.path().join("from_env");
    let status = Command::new(env!("CARGO_BIN_EXE_mrtlb"))
        .args(["params", "--threads", "1", "--config"])
        .arg(&cfg)
        .env("MRTLB_OUT_DIR", &target)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(target.join("params.csv").exists());
}
