use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meld::files::{CertificateFile, TraceColumns};
use meld::ScenarioConfig;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn meld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meld")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &TempDir, name: &str, cfg: &ScenarioConfig) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, cfg.to_text()).unwrap();
    path
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&fixture(name)).unwrap()
}

fn files_in(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn fixtures_round_trip() {
    for f in ["arm.toml", "arm-certified.toml", "double-integrator.toml"] {
        let c = load(f);
        let text = c.to_text();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), c, "{f}");
    }
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[model]\nkind = \"manipulator-3r\"\n[gains\n").unwrap();
    let out = dir.path().join("out");
    for cmd in ["enumerate", "certify", "simulate"] {
        let o = meld(&[cmd, "--config", p(&bad), "--out", p(&out)]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(files_in(&out).is_empty());
    }
    let mut cfg = load("double-integrator.toml");
    cfg.simulation.x0 = vec![0.0];
    let short = write_config(&dir, "short.toml", &cfg);
    assert_eq!(meld(&["certify", "--config", p(&short), "--out", p(&out)]).status.code(), Some(2));
    assert!(files_in(&out).is_empty());
}

#[test]
fn enumerate_reports_meld_counts() {
    let dir = TempDir::new().unwrap();
    let o = meld(&["enumerate", "--config", p(&fixture("double-integrator.toml")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("melds.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",true,")).count(), 1);

    let o = meld(&["enumerate", "--config", p(&fixture("arm.toml")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("melds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 36);
    let flag = |bits: &str| csv.lines().find(|l| l.starts_with(bits)).unwrap().split(',').nth(4).unwrap().to_string();
    for bits in ["0011100", "0010011", "0100011", "1110000"] {
        assert_eq!(flag(bits), "true", "{bits}");
    }
    // singular at the operating point, certified at its own pose during certify
    assert_eq!(flag("1000011"), "false");
}

#[test]
fn double_integrator_run_verifies() {
    let dir = TempDir::new().unwrap();
    let o = meld(&["simulate", "--config", p(&fixture("double-integrator.toml")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names = files_in(dir.path());
    names.sort();
    assert_eq!(names, ["certificate.txt", "summary.txt", "trace.csv"]);
    let trace = dir.path().join("trace.csv");
    let header = std::fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x1,x2,u1,meld_id,y1,y2,yd1,yd2,err1,err2,chi_err,bound_S");
    let cert = dir.path().join("certificate.txt");
    let o = meld(&["verify", "--trace", p(&trace), "--certificate", p(&cert), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert_eq!(report, String::from_utf8_lossy(&o.stdout));
    assert!(report.contains("schedule: certified"));
    for check in ["transient-bound", "dwell-bound", "state-bound"] {
        let line = report.lines().find(|l| l.starts_with(check)).unwrap();
        assert!(line.contains("PASS"), "{line}");
    }
}

#[test]
fn truncated_trace_makes_state_bound_not_applicable() {
    let dir = TempDir::new().unwrap();
    meld(&["simulate", "--config", p(&fixture("double-integrator.toml")), "--out", p(dir.path())]);
    let cert = CertificateFile::load(&dir.path().join("certificate.txt")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let keep = (cert.t / 1e-3) as usize / 2;
    let short: String = text.lines().take(keep).map(|l| format!("{l}\n")).collect();
    let trace = dir.path().join("short.csv");
    std::fs::write(&trace, short).unwrap();
    let o = meld(&["verify", "--trace", p(&trace), "--certificate", p(&dir.path().join("certificate.txt"))]);
    assert_eq!(o.status.code(), Some(0));
    let report = String::from_utf8_lossy(&o.stdout);
    let line = report.lines().find(|l| l.starts_with("state-bound")).unwrap();
    assert!(line.contains("NOT-APPLICABLE"), "{line}");
}

#[test]
fn mismatched_fixtures_exit_6() {
    let dir = TempDir::new().unwrap();
    let di = dir.path().join("di");
    meld(&["simulate", "--config", p(&fixture("double-integrator.toml")), "--out", p(&di)]);
    let mut cert = CertificateFile::load(&di.join("certificate.txt")).unwrap();
    cert.deck.push("x3".into());
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, cert.to_text()).unwrap();
    let o = meld(&["verify", "--trace", p(&di.join("trace.csv")), "--certificate", p(&bad)]);
    assert_eq!(o.status.code(), Some(6));

    let mut cert = CertificateFile::load(&di.join("certificate.txt")).unwrap();
    cert.schedule_starts = vec![0.5];
    std::fs::write(&bad, cert.to_text()).unwrap();
    let o = meld(&["verify", "--trace", p(&di.join("trace.csv")), "--certificate", p(&bad)]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn singular_start_exits_5_with_time() {
    let dir = TempDir::new().unwrap();
    let mut cfg = load("arm.toml");
    cfg.melds.list = vec!["0011100".into()];
    cfg.schedule.starts = vec![0.0];
    cfg.schedule.sequence = vec![1];
    cfg.reference.poses.truncate(1);
    cfg.simulation.x0 = vec![0.0; 6];
    cfg.simulation.t_end = 1.0;
    cfg.certificate.samples_per_level = 200;
    let path = write_config(&dir, "stretched.toml", &cfg);
    let out = dir.path().join("out");
    let o = meld(&["simulate", "--config", p(&path), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(5), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t = 0"));
    assert!(files_in(&out).is_empty());
}

fn perturbed_di(dir: &TempDir) -> PathBuf {
    let mut cfg = load("double-integrator.toml");
    cfg.reference.consistency = meld::config::Consistency::Perturbed;
    cfg.reference.perturb_amplitude = vec![0.0, 0.05];
    write_config(dir, "perturbed.toml", &cfg)
}

#[test]
fn larger_epsilon_shortens_dwell() {
    let dir = TempDir::new().unwrap();
    let cfg = perturbed_di(&dir);
    let mut tau = Vec::new();
    for eps in ["0.01", "0.1"] {
        let out = dir.path().join(eps);
        let o = meld(&["certify", "--config", p(&cfg), "--out", p(&out), "--epsilon", eps]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let c = CertificateFile::load(&out.join("certificate.txt")).unwrap();
        assert!(c.n > 1e-3 && c.tau_bar > 0.0 && c.s.is_finite());
        tau.push(c.tau_bar);
    }
    assert!(tau[1] < tau[0], "{tau:?}");
}

#[test]
fn zero_initial_error_gives_zero_tau0() {
    let dir = TempDir::new().unwrap();
    let mut cfg = load("double-integrator.toml");
    cfg.simulation.x0 = vec![0.0, 0.0];
    let path = write_config(&dir, "rest.toml", &cfg);
    let o = meld(&["certify", "--config", p(&path), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let c = CertificateFile::load(&dir.path().join("certificate.txt")).unwrap();
    assert_eq!(c.initial_error, 0.0);
    assert_eq!(c.tau0, 0.0);
}

#[test]
fn halving_dt_barely_moves_the_terminal_state() {
    let dir = TempDir::new().unwrap();
    let mut last = Vec::new();
    for dt in ["0.001", "0.0005"] {
        let out = dir.path().join(dt);
        let o = meld(&["simulate", "--config", p(&fixture("double-integrator.toml")), "--out", p(&out), "--dt", dt]);
        assert_eq!(o.status.code(), Some(0));
        let text = std::fs::read_to_string(out.join("trace.csv")).unwrap();
        let row: Vec<f64> = text.lines().last().unwrap().split(',').take(3).map(|v| v.parse().unwrap()).collect();
        last.push(row);
    }
    assert_eq!(last[0][0], last[1][0]);
    assert!((last[0][1] - last[1][1]).abs() < 1e-6 && (last[0][2] - last[1][2]).abs() < 1e-6, "{last:?}");
}

#[test]
fn short_dwell_is_flagged_uncertified() {
    let dir = TempDir::new().unwrap();
    let base = dir.path().join("base");
    let o = meld(&["certify", "--config", p(&fixture("arm.toml")), "--out", p(&base)]);
    assert_eq!(o.status.code(), Some(0));
    let tau_bar = CertificateFile::load(&base.join("certificate.txt")).unwrap().tau_bar;

    let mut cfg = load("arm.toml");
    let step = tau_bar / 10.0;
    cfg.schedule.starts = (0..6).map(|k| k as f64 * step).collect();
    cfg.simulation.t_end = 6.0 * step;
    cfg.reference.move_duration = 0.5 * step;
    let path = write_config(&dir, "short.toml", &cfg);
    let out = dir.path().join("out");
    let o = meld(&["simulate", "--config", p(&path), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = meld(&["verify", "--trace", p(&out.join("trace.csv")), "--certificate", p(&out.join("certificate.txt"))]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("uncertified schedule"), "{report}");
    let cols = TraceColumns::load(&out.join("trace.csv")).unwrap();
    assert_eq!(cols.meld_id.first(), Some(&5));
}

#[test]
fn auto_certified_schedule_respects_dwell() {
    let dir = TempDir::new().unwrap();
    let o = meld(&["certify", "--config", p(&fixture("arm-certified.toml")), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let c = CertificateFile::load(&dir.path().join("certificate.txt")).unwrap();
    assert!(c.certified);
    let gaps: Vec<f64> = c.schedule_starts.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps[0] >= c.tau0 - 1e-9 && gaps[1..].iter().all(|g| *g >= c.tau_bar - 1e-9), "{gaps:?}");
    assert_eq!(c.schedule_sequence, vec![5, 1, 2, 3, 4, 5]);
}
