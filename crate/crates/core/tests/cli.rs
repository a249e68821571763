use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_chronodil");

fn chronodil(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg(args[0]).arg("--config").arg(&cfg).args(&args[1..]);
    cmd.current_dir(dir).output().unwrap()
}

const SWP_GAUSSIAN: &str = "\
# SWP clock on an electron packet with a slowed speed of light
clock = swp
d = 4
omega = 2324.7785636564
kstate = gaussian
mass = 9.1093837015e-31
sigma_x = 1e-9
g = 0
c_scale = 0.01
t = 1e-3
[verify]
c_scalings = 1, 2, 4
";

fn result_line(csv: &str) -> &str {
    csv.lines().find(|l| l.starts_with("# result")).unwrap()
}

#[test]
fn verify_swp_gaussian_passes_with_exponent_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["verify", "--no-timestamp"], SWP_GAUSSIAN);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let line = result_line(&csv);
    assert!(line.contains("passed=true"), "{line}");
    let e: f64 = line
        .split("relative_exponent=")
        .nth(1)
        .unwrap()
        .split(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((e + 2.0).abs() < 0.1, "{e}");
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 3);
}

#[test]
fn failed_verification_exits_three() {
    // p/mc of order one: the first-order formula misses by about 100% at
    // every scaling, so no c^-2 falloff appears
    let config = SWP_GAUSSIAN
        .replace("c_scale = 0.01", "c_scale = 1e-4")
        .replace("sigma_x = 1e-9", "sigma_x = 1e-11");
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["verify", "--no-timestamp"], &config);
    assert_eq!(out.status.code(), Some(3));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(result_line(&csv).contains("passed=false"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verification failed"));
}

#[test]
fn coherence_identity_is_independent_of_jobs() {
    let config = "\
seed = 11
clock = idealised
sigma_nr = 0
kstate = cat
mass = 4.48345547982e-26
sigma_x = 3.68e-10
delta_x0 = 7.36e-10
g = 9.81
t = 1
[verify]
quantity = coherence_identity
samples = 50
";
    let dir = tempfile::tempdir().unwrap();
    let a = chronodil(dir.path(), &["verify", "--no-timestamp"], config);
    assert_eq!(a.status.code(), Some(0));
    let b = chronodil(dir.path(), &["verify", "--no-timestamp", "--jobs", "3"], config);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn physics_errors_exit_two() {
    let config = SWP_GAUSSIAN.replace("g = 0", "g = 9.81");
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["precision"], &config);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("physics error"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_errors_exit_one_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["dilation"], &SWP_GAUSSIAN.replace("d = 4", "d = 4\nwobble = 3"));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("wobble"), "{err}");

    let out = chronodil(dir.path(), &["dilation"], &SWP_GAUSSIAN.replace("sigma_x = 1e-9", "sigma_x = -1e-9"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 7"));

    let out = chronodil(dir.path(), &["coherence"], SWP_GAUSSIAN);
    assert_eq!(out.status.code(), Some(1));

    let out = chronodil(dir.path(), &["sweep"], &format!("command = dilation\n{SWP_GAUSSIAN}"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = Command::new(BIN).args(["dilation", "--jobs", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn timestamp_is_the_only_difference() {
    let dir = tempfile::tempdir().unwrap();
    let a = chronodil(dir.path(), &["dilation"], SWP_GAUSSIAN);
    let b = chronodil(dir.path(), &["dilation", "--no-timestamp"], SWP_GAUSSIAN);
    let a = String::from_utf8(a.stdout).unwrap();
    let b = String::from_utf8(b.stdout).unwrap();
    let stripped: String = a
        .lines()
        .filter(|l| !l.starts_with("# timestamp="))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_ne!(a, b);
    assert_eq!(stripped, b);
}

#[test]
fn measurement_writes_csv_and_plot_script() {
    let config = "\
clock = idealised
sigma_nr = 1e-9
kstate = gaussian
mass = 9.1093837015e-31
sigma_x = 1e-9
g = 0
t = 0.25, 0.5, 1
[measurement]
q = 0.01, 1, 1000
";
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["measurement", "--out", "m.csv", "--no-timestamp", "--jobs", "2"], config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\n"));
    let script = std::fs::read_to_string(dir.path().join("m.csv.gp")).unwrap();
    assert_eq!(script.matches("'m.csv' every").count(), 3);
    assert!(!script.contains(dir.path().to_str().unwrap()));
}

#[test]
fn shipped_example_runs_coherence_and_sweep() {
    let example = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/aluminium.cfg");
    let text = std::fs::read_to_string(example).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = chronodil(dir.path(), &["coherence", "--no-timestamp"], &text);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let last = csv.lines().last().unwrap();
    let t_coh: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!((t_coh - 2.1451778746108062e-17).abs() < 1e-12 * t_coh);

    let out = chronodil(dir.path(), &["sweep", "--out", "s.csv", "--no-timestamp"], &text);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.contains("interior=true"));
    let script = std::fs::read_to_string(dir.path().join("s.csv.gp")).unwrap();
    assert!(script.contains("set label 1 'extremum T_coh"));
}
