//! End-to-end subcommand behavior: exit codes, validation reporting, CSV
//! schema round-trips, and plotting.

use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fadelink")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_cli(args: &[&str]) -> Output {
    std::process::Command::new(bin()).args(args).output().unwrap()
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn validate_accepts_good_spec() {
    let dir = tmp_dir("cli_validate_ok");
    let spec = write_spec(
        &dir,
        "good.toml",
        "experiment = \"fig3\"\noutput = \"o.csv\"\n[channel]\na1 = 0.5\n",
    );
    let out = run_cli(&["validate", spec.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("no violations"));
}

#[test]
fn validate_reports_every_violation() {
    let dir = tmp_dir("cli_validate_multi");
    let spec = write_spec(
        &dir,
        "bad.toml",
        "experiment = \"custom\"\noutput = \"o.csv\"\n\
         [channel]\nsigma = 0.0\na1 = 0.5\n\
         [policy]\nkind = \"adaptive\"\npt = 2.0\npt_max = 1.0\np_out = 0.1\n\
         [sim]\nepisodes = 0\n",
    );
    let out = run_cli(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("LognormalParams.sigma"), "{text}");
    assert!(text.contains("PowerPolicy.pt_max"), "{text}");
    assert!(text.contains("SimConfig.episodes"), "{text}");
    assert_eq!(text.matches("violation:").count(), 3, "{text}");
}

#[test]
fn run_rejects_zero_episodes() {
    let dir = tmp_dir("cli_run_invalid");
    let spec = write_spec(
        &dir,
        "bad.toml",
        "experiment = \"fig2\"\noutput = \"o.csv\"\n[channel]\na1 = 0.5\n[sim]\nepisodes = 0\n",
    );
    let out = run_cli(&["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tmp_dir("cli_parse_error");
    let spec = write_spec(
        &dir,
        "typo.toml",
        "experiment = \"fig2\"\noutput = \"o.csv\"\n[channel]\na1 = 0.5\nsgima = 1.0\n",
    );
    let out = run_cli(&["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("sgima"), "parse error should name the field: {text}");
}

#[test]
fn missing_spec_file_is_io_failure() {
    let out = run_cli(&["run", "/nonexistent/path/spec.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn stalled_episode_is_convergence_failure() {
    // deep negative SNR with kilobit packets erases essentially every
    // transmission; a tiny slot cap turns that into an abort
    let dir = tmp_dir("cli_convergence");
    let out_csv = dir.join("never.csv");
    let spec = write_spec(
        &dir,
        "stall.toml",
        &format!(
            "experiment = \"custom\"\noutput = \"{}\"\n\
             [channel]\na1 = 0.0\n\
             [link]\nbits_per_packet = 1000\n\
             [sim]\nepisodes = 1\nsnr_db = [-60.0]\nslot_cap = 100\n",
            out_csv.to_str().unwrap()
        ),
    );
    let out = run_cli(&["run", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slot cap"));
}

#[test]
fn named_experiment_pins_reference_parameters() {
    let dir = tmp_dir("cli_pinning");
    let spec = write_spec(
        &dir,
        "pinned.toml",
        "experiment = \"fig2\"\noutput = \"o.csv\"\n[channel]\na1 = 0.5\n[policy]\npt = 2.0\n",
    );
    let out = run_cli(&["validate", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PowerPolicy.pt"), "{text}");
    assert!(text.contains("allow_overrides"), "{text}");
    // the explicit override flag lifts the pin
    let spec = write_spec(
        &dir,
        "override.toml",
        "experiment = \"fig2\"\noutput = \"o.csv\"\nallow_overrides = true\n\
         [channel]\na1 = 0.5\n[policy]\npt = 2.0\n",
    );
    let out = run_cli(&["validate", spec.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn run_emits_parseable_csv() {
    let dir = tmp_dir("cli_run_csv");
    let out_csv = dir.join("out.csv");
    let spec = write_spec(
        &dir,
        "small.toml",
        &format!(
            "experiment = \"custom\"\noutput = \"{}\"\n\
             [channel]\na1 = 0.3\n[sim]\nepisodes = 50\nsnr_db = [0.0, 20.0]\n",
            out_csv.to_str().unwrap()
        ),
    );
    let out = run_cli(&["run", spec.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let mut data_lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = data_lines.next().unwrap();
    assert_eq!(
        header,
        "snr_db,scheme,policy,a1,mean_time,se_time,mean_throughput,se_throughput,\
         mean_erasure,se_erasure,mean_energy,se_energy,mean_silent,episodes"
            .replace(' ', "")
    );
    let rows: Vec<&str> = data_lines.collect();
    assert_eq!(rows.len(), 2, "one row per SNR point");
    for row in rows {
        assert_eq!(row.split(',').count(), 14);
        let first: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert!(first == 0.0 || first == 20.0);
    }
    // config is echoed as comment lines
    assert!(text.lines().any(|l| l.starts_with("# sim.episodes = 50")));
    // stdout summarizes one line per point
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("snr=").count(), 2, "{stdout}");
}

#[test]
fn sweep_flags_and_plot_round_trip() {
    let dir = tmp_dir("cli_sweep_plot");
    let csv = dir.join("sweep.csv");
    let out = run_cli(&[
        "sweep",
        "--snr-db",
        "0,15,30",
        "--episodes",
        "80",
        "--seed",
        "9",
        "--scheme",
        "uncoded",
        "--policy",
        "fixed",
        "--a1",
        "0.7",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 4);

    let svg = dir.join("sweep.svg");
    let out = run_cli(&[
        "plot",
        csv.to_str().unwrap(),
        "--x",
        "snr_db",
        "--y",
        "mean_throughput",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert!(svg_text.contains("<polyline"));
    assert!(svg_text.contains("snr_db"));
    assert!(svg_text.contains("mean_throughput"));
    assert!(svg_text.trim_end().ends_with("</svg>"));

    // unknown column is a validation failure naming the column
    let out = run_cli(&[
        "plot",
        csv.to_str().unwrap(),
        "--x",
        "snr_db",
        "--y",
        "nope",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn sweep_rejects_bad_a1() {
    let dir = tmp_dir("cli_sweep_bad");
    let out = run_cli(&[
        "sweep",
        "--snr-db",
        "0",
        "--a1",
        "1.5",
        "--out",
        dir.join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_repeats_identically() {
    let dir = tmp_dir("cli_sweep_det");
    let mut contents = Vec::new();
    for pass in 0..2 {
        let csv = dir.join(format!("s{pass}.csv"));
        let out = run_cli(&[
            "sweep",
            "--snr-db",
            "5,25",
            "--episodes",
            "60",
            "--seed",
            "4",
            "--a1",
            "0.9",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        contents.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(contents[0], contents[1]);
}
