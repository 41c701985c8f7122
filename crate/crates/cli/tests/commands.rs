mod common;

use std::path::{Path, PathBuf};
use std::process::Output;

use rmcontrast::runstore::read_reports;
use rmcontrast::AttributeCatalog;
use rmcontrast_testkit::fixtures::{write_planted_fixture, FixtureDir};
use rmcontrast_testkit::ToyRewardSpec;

use common::{describe, run_bin, stdout_line, MockProcess};

struct Env {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    fixture: FixtureDir,
    mock: MockProcess,
}

impl Env {
    fn new() -> Env {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let fixture = write_planted_fixture(&root.join("data"), "toy", 6, &AttributeCatalog::default()).unwrap();
        let strict = ToyRewardSpec {
            length_weight: 0.04,
            ..ToyRewardSpec::default()
        };
        let strict_path = root.join("strict.json");
        std::fs::write(&strict_path, serde_json::to_string(&strict).unwrap()).unwrap();
        let reward = format!("strict={}", strict_path.display());
        let mock = MockProcess::start_with(&fixture.canned, &root, &["--reward", &reward]);
        Env {
            _tmp: tmp,
            root,
            fixture,
            mock,
        }
    }

    /// Default flags for `command`; a flag repeated in `extra` replaces its default.
    fn args(&self, command: &str, extra: &[&str]) -> Vec<String> {
        let defaults = [
            ("--dataset", "toy".to_string()),
            ("--registry", self.fixture.registry.display().to_string()),
            ("--models", "mock".to_string()),
            ("--base-url", self.mock.url.clone()),
            ("--seeds", "1,2".to_string()),
            ("--n", "4".to_string()),
            ("--retries", "0".to_string()),
            ("--cache", self.root.join("cache").display().to_string()),
            ("--out", self.root.join("runs").display().to_string()),
        ];
        let mut args = vec![command.to_string(), "--test-mode".to_string()];
        for (flag, value) in defaults {
            if !extra.contains(&flag) {
                args.push(flag.to_string());
                args.push(value);
            }
        }
        args.extend(extra.iter().map(|s| s.to_string()));
        args
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        let args = self.args(command, extra);
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_bin(&refs)
    }

    fn two_models(&self) -> String {
        format!("mock,strict={}/strict", self.mock.url)
    }
}

fn run_dir(out: &Output) -> PathBuf {
    PathBuf::from(stdout_line(out, "run: ").expect("run directory printed"))
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "{}", describe(out));
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn warm_cache_reruns_give_identical_reports() {
    let env = Env::new();
    let first = env.run("explain", &[]);
    assert_ok(&first);
    assert_eq!(stdout_line(&first, "explained: "), Some("8"));
    let second = env.run("explain", &["--offline"]);
    assert_ok(&second);
    let (a, b) = (run_dir(&first), run_dir(&second));
    assert_ne!(a, b);
    assert_eq!(read_reports(&a).unwrap(), read_reports(&b).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let env = Env::new();
    let unknown = env.run("explain", &["--dataset", "nope"]);
    assert_eq!(unknown.status.code(), Some(2), "{}", describe(&unknown));
    let one_model = env.run("compare-models", &[]);
    assert_eq!(one_model.status.code(), Some(2), "{}", describe(&one_model));
    let bad_variant = env.run("explain", &["--variant", "sideways"]);
    assert_eq!(bad_variant.status.code(), Some(2));
    let too_many = env.run("explain", &["--n", "100"]);
    assert_eq!(too_many.status.code(), Some(2), "{}", describe(&too_many));
}

#[test]
fn unreachable_endpoints_exit_3() {
    let env = Env::new();
    let out = env.run("explain", &["--base-url", "http://127.0.0.1:9", "--no-cache"]);
    assert_eq!(out.status.code(), Some(3), "{}", describe(&out));
    let cold = env.run("explain", &["--offline", "--cache", &env.root.join("empty").display().to_string()]);
    assert_eq!(cold.status.code(), Some(3), "{}", describe(&cold));
}

#[test]
fn two_model_commands() {
    let env = Env::new();
    let models = env.two_models();
    let compare = env.run("compare-models", &["--models", &models]);
    assert_ok(&compare);
    let text = stdout(&compare);
    assert!(text.contains("chosen side") && text.contains("rejected side"), "{text}");
    let reports = read_reports(&run_dir(&compare)).unwrap();
    assert!(reports.contains_key("compare_models.json"));
    assert!(reports.contains_key("strict/sensitivity.json"));
    let summary: serde_json::Value = serde_json::from_str(&reports["summary.json"]).unwrap();
    assert_eq!(summary["similarity"]["chosen"]["tau"][0][0], 1.0);

    let reps = env.run("representatives", &["--models", &models]);
    assert_ok(&reps);
    assert!(stdout(&reps).contains("model strict: representative comparisons"));
}

#[test]
fn sensitivity_prints_the_planted_attribute_first() {
    let env = Env::new();
    let out = env.run("sensitivity", &[]);
    assert_ok(&out);
    let text = stdout(&out);
    let first_row = text
        .lines()
        .skip_while(|l| !l.trim_start().starts_with("attribute"))
        .nth(1)
        .unwrap();
    assert!(first_row.trim_start().starts_with("harmlessness"), "{text}");
    assert!(first_row.contains("1.000"));
}

#[test]
fn ablation_tabulates_every_variant() {
    let env = Env::new();
    let dry = env.run("ablate", &["--dry-run"]);
    assert_ok(&dry);
    assert_eq!(stdout_line(&dry, "runs: "), Some("3"));
    assert_eq!(stdout_line(&dry, "planned requests: "), Some((3 * 8 * 64).to_string().as_str()));

    let out = env.run("ablate", &[]);
    assert_ok(&out);
    let dir = PathBuf::from(stdout_line(&out, "ablation: ").unwrap());
    let coverage = std::fs::read_to_string(dir.join("coverage.csv")).unwrap();
    for variant in ["only", "pass", "center"] {
        assert!(coverage.contains(&format!("toy,ours ({variant}),")), "{coverage}");
    }
    assert!(Path::new(&dir.join("distance.csv")).exists());
}

#[test]
fn random_baseline_run() {
    let env = Env::new();
    let dry = env.run("explain", &["--generator", "random", "--random-per-side", "3", "--dry-run"]);
    assert_ok(&dry);
    // per comparison: 2 original scores + 2·3 rewrites + 2·3 rewrite scores
    assert_eq!(stdout_line(&dry, "planned requests: "), Some((8 * 14).to_string().as_str()));
    let out = env.run("explain", &["--generator", "random", "--random-per-side", "3"]);
    assert_ok(&out);
    let reports = read_reports(&run_dir(&out)).unwrap();
    assert!(reports["mock/coverage.csv"].contains("toy,random,"));
    assert!(!reports.contains_key("mock/sensitivity.json"));
}

#[test]
fn discovery_ranks_named_attributes() {
    let env = Env::new();
    let out = env.run_discover();
    assert_ok(&out);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].ends_with("helpfulness"));
    assert!(lines[0].trim_start().starts_with('6'));
}

impl Env {
    fn run_discover(&self) -> Output {
        run_bin(&[
            "discover",
            "--dataset",
            "toy",
            "--registry",
            &self.fixture.registry.display().to_string(),
            "--models",
            "mock",
            "--base-url",
            &self.mock.url,
            "--seeds",
            "1",
            "--n",
            "6",
            "--test-mode",
            "--no-cache",
        ])
    }
}

#[test]
fn replay_flags_a_tampered_run() {
    let env = Env::new();
    let out = env.run("explain", &[]);
    assert_ok(&out);
    let dir = run_dir(&out);
    let labels = dir.join(rmcontrast::runstore::LABELS_FILE);
    let text = std::fs::read_to_string(&labels).unwrap();
    let tampered = text.replacen("\"counterfactual\"", "\"semifactual\"", 1);
    assert_ne!(text, tampered);
    std::fs::write(&labels, tampered).unwrap();
    let cache = env.root.join("cache").display().to_string();
    let replay = run_bin(&["replay", &dir.display().to_string(), "--cache", &cache]);
    assert_eq!(replay.status.code(), Some(1), "{}", describe(&replay));
    assert!(String::from_utf8_lossy(&replay.stderr).contains("results of seed"));
}
