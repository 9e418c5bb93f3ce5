use std::fs;
use std::path::Path;
use std::process::Command;

use psam_cli::{run, EXIT_ERROR, EXIT_OK};
use psam_core::IsubGrid;

const RESULTS_HEADER: &str = "model,snr_db,mode,policy,n_pilots,spacing,rate,rate_unit,baseline_rate,training_beneficial,improvement_pct,improvement_ref,pilot_powers,data_powers";
const PROFILE_HEADER: &str = "slot,role,power,error_variance,isub,m1,m2,p1";

/// A tiny grid and search space so each run takes well under a second.
/// Flags given in `extra` replace the defaults.
fn small(cmd: &str, out: &Path, extra: &[&str]) -> Vec<String> {
    let defaults = [("--p-max", "10"), ("--p-points", "6"), ("--v-points", "5"), ("--kmax", "2"), ("--tmax", "12")];
    let mut args = vec!["psam".to_string(), cmd.to_string()];
    for (flag, value) in defaults {
        if !extra.contains(&flag) {
            args.extend([flag.to_string(), value.to_string()]);
        }
    }
    args.extend(["--out".to_string(), out.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

fn grid_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("isub_grid_"))
        .collect();
    v.sort();
    v
}

#[test]
fn empty_policy_list_gives_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(small("optimize", dir.path(), &["--policy", "none"])), EXIT_OK);
    assert_eq!(read(dir.path().join("results.csv")), format!("{RESULTS_HEADER}\n"));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("results.json"))).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn result_and_profile_schemas_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(small("optimize", dir.path(), &["--policy", "1,2"])), EXIT_OK);
    let text = read(dir.path().join("results.csv"));
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 2);
    for r in &records {
        assert_eq!(r.len(), RESULTS_HEADER.split(',').count());
    }
    assert_eq!(&records[0][3], "I");
    assert_eq!(&records[1][3], "II");
    let json = read(dir.path().join("results.json"));
    let keys = ["\"mode\"", "\"model\"", "\"noise_var\"", "\"rate_unit\"", "\"results\"", "\"rows\"", "\"snr_db\""];
    let top: Vec<usize> = keys.iter().map(|k| json.find(&format!("\n  {k}")).expect(k)).collect();
    assert!(top.windows(2).all(|w| w[0] < w[1]), "top-level key order changed");

    assert_eq!(run(small("profile", dir.path(), &["--policy", "3"])), EXIT_OK);
    let profile = read(dir.path().join("profile.csv"));
    assert_eq!(profile.lines().next().unwrap(), PROFILE_HEADER);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(run(small("optimize", dir, &["--snr-db", "-3"])), EXIT_OK);
    }
    for f in ["results.csv", "results.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let ga = grid_files(a.path());
    let gb = grid_files(b.path());
    assert_eq!(ga.len(), 1);
    assert_eq!(fs::read(&ga[0]).unwrap(), fs::read(&gb[0]).unwrap());

    // Re-running against the existing grid reproduces the same bytes.
    let before = fs::read(a.path().join("results.json")).unwrap();
    assert_eq!(run(small("optimize", a.path(), &["--snr-db", "-3"])), EXIT_OK);
    assert_eq!(fs::read(a.path().join("results.json")).unwrap(), before);
}

#[test]
fn timestamp_flag_only_adds_a_field() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(small("baseline", dir.path(), &[])), EXIT_OK);
    let plain: serde_json::Value = serde_json::from_str(&read(dir.path().join("baseline.json"))).unwrap();
    assert_eq!(run(small("baseline", dir.path(), &["--timestamp"])), EXIT_OK);
    let mut stamped: serde_json::Value = serde_json::from_str(&read(dir.path().join("baseline.json"))).unwrap();
    assert!(stamped["generated_at"].is_u64());
    stamped.as_object_mut().unwrap().remove("generated_at");
    assert_eq!(plain, stamped);
}

#[test]
fn grid_command_is_idempotent_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(small("grid", dir.path(), &["--rate-unit", "nats"])), EXIT_OK);
    let files = grid_files(dir.path());
    assert_eq!(files.len(), 1);
    let first = fs::read(&files[0]).unwrap();
    let modified = fs::metadata(&files[0]).unwrap().modified().unwrap();
    assert_eq!(run(small("grid", dir.path(), &["--rate-unit", "nats"])), EXIT_OK);
    assert_eq!(fs::read(&files[0]).unwrap(), first);
    assert_eq!(fs::metadata(&files[0]).unwrap().modified().unwrap(), modified);

    let text = String::from_utf8(first).unwrap();
    let g = IsubGrid::from_text(&text).unwrap();
    assert_eq!(g.to_text(), text);
    assert_eq!(g.p_axis().len(), 7);
    assert_eq!(g.v_axis().len(), 5);
    assert!(g.config_hash().is_some_and(|h| h.len() == 64));
}

#[test]
fn grid_for_another_snr_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.txt");
    let grid_arg = grid.display().to_string();
    assert_eq!(run(small("grid", dir.path(), &["--grid-file", &grid_arg])), EXIT_OK);
    assert_eq!(
        run(small("optimize", dir.path(), &["--grid-file", &grid_arg, "--snr-db", "6"])),
        EXIT_ERROR
    );
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn config_file_is_merged_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "model = \"gauss_markov\"\nalpha = 0.95\nsnr_db = 3.0\npolicy = \"2\"\nmode = \"noncausal\"\n").unwrap();
    let cfg_arg = cfg.display().to_string();
    assert_eq!(run(small("optimize", dir.path(), &["--config", &cfg_arg, "--snr-db", "0"])), EXIT_OK);
    let csv = read(dir.path().join("results.csv"));
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("gauss_markov(alpha=0.95),0.0,noncausal,II,"), "{row}");
    assert_eq!(csv.lines().count(), 2);

    fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    assert_eq!(run(small("optimize", dir.path(), &["--config", &cfg_arg])), EXIT_ERROR);
}

#[test]
fn white_fading_profile_has_no_information() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(small("profile", dir.path(), &["--alpha", "0", "--policy", "2"])), EXIT_OK);
    let profile = read(dir.path().join("profile.csv"));
    let data: Vec<&str> = profile.lines().filter(|l| l.contains(",data,")).collect();
    assert!(!data.is_empty());
    for l in data {
        assert_eq!(l.split(',').nth(3).unwrap(), "1.0", "{l}");
    }
}

#[test]
fn forced_cluster_profile_puts_power_on_last_pilot() {
    let dir = tempfile::tempdir().unwrap();
    let args = small("profile", dir.path(), &["--policy", "4", "--kmin", "4", "--kmax", "4", "--tmax", "30"]);
    assert_eq!(run(args), EXIT_OK);
    let profile = read(dir.path().join("profile.csv"));
    let pilots: Vec<f64> = profile
        .lines()
        .filter(|l| l.contains(",pilot,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(pilots.len(), 4);
    let total: f64 = pilots.iter().sum();
    assert!(pilots[3] >= 0.99 * total, "{pilots:?}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_psam");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();

    let s = Command::new(bin).args(["optimize", "--no-such-flag"]).output().unwrap();
    assert_eq!(s.status.code(), Some(EXIT_ERROR));
    let s = Command::new(bin).args(["optimize", "--mode", "sideways", "--out", &out]).output().unwrap();
    assert_eq!(s.status.code(), Some(EXIT_ERROR));
    let s = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(s.status.code(), Some(EXIT_OK));

    let s = Command::new(bin).args(["verify", "--out", &out]).output().unwrap();
    assert_eq!(s.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&s.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path().join("verify.json"))).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["name"]
        .as_str()
        .unwrap()
        .starts_with("theorem1 k=1")));

    // An output path under a regular file cannot be created.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let bad_out = blocker.join("sub").display().to_string();
    let s = Command::new(bin).args(["verify", "--out", &bad_out]).output().unwrap();
    assert_eq!(s.status.code(), Some(EXIT_ERROR));
}
