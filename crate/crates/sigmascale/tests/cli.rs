use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 4] = ["--corpus", "synth:1:3:32", "--n-levels", "8"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigmascale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(out: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    run(&all)
}

fn csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn select_phi_writes_ranking_and_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["select-phi", "--candidates", "log,squash:0.3,square"];
    args.extend(SMALL);
    let o = run_in(dir.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ranking = csv(&dir.path().join("ranking.csv"));
    assert_eq!(ranking[0], ["rank", "spec", "r2"]);
    assert_eq!(ranking.len(), 4);
    for spec in ["log", "squash_0.3", "square"] {
        let prof = csv(&dir.path().join(format!("profile_{spec}.csv")));
        assert_eq!(prof[0], ["i", "sigma", "phi", "mean_ssim"]);
        assert_eq!(prof.len(), 9);
    }
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("squash:0.3"));
}

#[test]
fn schedule_columns_and_precision() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["schedule", "--steps", "5", "--order", "ascending"]);
    assert!(o.status.success());
    let rows = csv(&dir.path().join("schedule.csv"));
    assert_eq!(rows[0], ["i", "sigma", "phi_sigma"]);
    assert_eq!(rows[1][0], "0");
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.002);
    assert_eq!(rows[5][1].parse::<f64>().unwrap(), 80.0);
    let step = rows[2][2].parse::<f64>().unwrap() - rows[1][2].parse::<f64>().unwrap();
    assert!((step - 0.24741).abs() < 1e-5);
    let text = fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    assert!(!text.contains('\r'));
}

#[test]
fn ddpm_schedule_leaves_phi_blank_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(
        dir.path(),
        &["schedule", "--kind", "ddpm", "--steps", "10", "--order", "ascending"],
    );
    assert!(o.status.success());
    let rows = csv(&dir.path().join("schedule.csv"));
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[1][2], "");
}

#[test]
fn corrupt_grid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["ddpm", "edm", "phi"] {
        let mut args = vec!["corrupt-grid", "--schedule", kind];
        args.extend(SMALL);
        assert!(run_in(dir.path(), &args).status.success());
        let grid = sigmascale::io::load_png(dir.path().join(format!("grid_{kind}.png"))).unwrap();
        assert_eq!((grid.width(), grid.height()), (5 * 32, 5 * 32));
        let curve = csv(&dir.path().join(format!("curve_{kind}.csv")));
        assert_eq!(curve[0], ["step", "sigma", "ssim"]);
        assert_eq!(curve.len(), 26);
    }
}

#[test]
fn sample_oracle_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["sample-oracle", "--samples", "50", "--steps", "20"]);
    assert!(o.status.success());
    let samples = csv(&dir.path().join("samples.csv"));
    assert_eq!(samples[0], ["sample", "x0", "x1"]);
    assert_eq!(samples.len(), 51);
    let trace = csv(&dir.path().join("trace.csv"));
    assert_eq!(trace[0], ["i", "sigma", "phi_sigma", "ssim", "x0", "x1"]);
    assert_eq!(trace[1][0], "19");
    assert_eq!(trace[20][0], "0");
    assert_eq!(trace[1][3], "");
}

#[test]
fn image_commands_accept_input_png() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    let im = sigmascale_core::synth::synth_corpus(3, 1, 40).remove(0);
    sigmascale::io::save_png(&im, &input).unwrap();
    let inp = input.to_str().unwrap();
    for (cmd, file) in [("sketch", "sketch.png"), ("warp", "warped.png")] {
        assert!(run_in(dir.path(), &[cmd, "--input", inp]).status.success());
        let out = sigmascale::io::load_png(dir.path().join(file)).unwrap();
        assert_eq!((out.width(), out.height()), (40, 40));
    }
    assert!(run_in(dir.path(), &["curves", "--input", inp, "--n-levels", "12"])
        .status
        .success());
    let rows = csv(&dir.path().join("curves.csv"));
    assert_eq!(rows[0], ["direction", "i", "sigma", "phi", "ssim"]);
    assert_eq!(rows.iter().filter(|r| r[0] == "forward").count(), 12);
    assert_eq!(rows.iter().filter(|r| r[0] == "reverse").count(), 12);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test\nn_levels = 6\nsigma_max = 10\n").unwrap();
    let o = run_in(
        dir.path(),
        &["schedule", "--config", cfg.to_str().unwrap(), "--sigma-max", "20"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv(&dir.path().join("schedule.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 20.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        run_in(dir.path(), &["schedule", "--transform", "squash:-2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run_in(dir.path(), &["schedule", "--rho", "0.5"]).status.code(), Some(1));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        run_in(dir.path(), &["schedule", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let o = run_in(dir.path(), &["sketch", "--input", "/definitely/not/here.png"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let mut args = vec!["select-phi"];
    args.extend(["--corpus", "synth:1:0:32"]);
    assert_eq!(run_in(dir.path(), &args).status.code(), Some(2));
}
