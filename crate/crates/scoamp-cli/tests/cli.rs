use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scoamp_cli::config::ExperimentConfig;
use tempfile::TempDir;

const SMALL: &str = r#"
seed = 3

[system]
L = 4
W = 1
N = 256
M = 77
ensemble = "row-orthogonal"
rho = 0.1
snr_db = 30

[simulate]
T = 12
trials = 3
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scoamp"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Metadata lines and the CSV rows below them.
fn split(text: &str) -> (Vec<&str>, Vec<Vec<&str>>) {
    let meta = text.lines().take_while(|l| l.starts_with('#')).collect();
    let rows = text.lines().skip_while(|l| l.starts_with('#')).map(|l| l.split(',').collect()).collect();
    (meta, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_twice_with_same_seed_is_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate", "--config", s(&cfg), "--trials", "1", "--seed", "7", "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--trials", "1", "--seed", "7", "--out", s(&b), "--workers", "1"]);
    let ta = std::fs::read_to_string(&a).unwrap();
    assert_eq!(ta, std::fs::read_to_string(&b).unwrap());
    let (meta, _) = split(&ta);
    assert!(meta.iter().any(|l| l.starts_with("# config_sha256: ") && l.len() == "# config_sha256: ".len() + 64));
    assert!(meta.contains(&"# seed: 7"));

    let c = dir.path().join("c.csv");
    ok(&["simulate", "--config", s(&cfg), "--trials", "1", "--seed", "8", "--out", s(&c)]);
    assert_ne!(ta, std::fs::read_to_string(&c).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate", "--config", s(&cfg), "--workers", "1", "--out", s(&a)]);
    ok(&["simulate", "--config", s(&cfg), "--workers", "3", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn json_and_toml_configs_agree() {
    let dir = TempDir::new().unwrap();
    let toml_cfg = write(&dir, "c.toml", SMALL);
    let parsed = ExperimentConfig::from_toml(SMALL).unwrap();
    let json_cfg = write(&dir, "c.json", &serde_json::to_string_pretty(&parsed).unwrap());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate", "--config", s(&toml_cfg), "--out", s(&a)]);
    ok(&["simulate", "--config", s(&json_cfg), "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn simulate_rows_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&text);
    assert_eq!(rows[0], ["W", "M", "trial", "iter", "section", "mse"]);
    // 3 trials, 12 iterations, 4 sections, one summary row.
    assert_eq!(rows.len(), 1 + 3 * 12 * 4 + 1);
    let last = rows.last().unwrap();
    assert_eq!(&last[..5], ["1", "77", "all", "12", "largest"]);

    let summary = json(&dir.path().join("sim.json"));
    let p = &summary["points"][0];
    let mean = p["largest_mse_mean"].as_f64().unwrap();
    assert_eq!(last[5].parse::<f64>().unwrap(), mean);
    assert!(mean > 0.0 && mean < 1e-2, "largest MSE {mean}");
    assert!(p["largest_mse_std"].as_f64().unwrap() >= 0.0);
    assert_eq!(p["failures"], 0);
    // Largest among the final-iteration rows of each trial.
    for trial in 0..3 {
        let t = trial.to_string();
        let largest = rows[1..].iter().filter(|r| r[2] == t && r[3] == "12").map(|r| r[5].parse::<f64>().unwrap()).fold(0.0, f64::max);
        assert!(largest > 0.0);
    }
}

#[test]
fn sweep_points_override_rate_and_damping() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.to_owned() + "points = [{ M = 77, zeta = 0.8 }, { W = 0, M = 90 }]\n";
    let cfg = write(&dir, "c.toml", &text);
    let out = dir.path().join("sim.csv");
    ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let summary = json(&dir.path().join("sim.json"));
    let pts = summary["points"].as_array().unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[0]["zeta"], 0.8);
    assert_eq!(pts[1]["W"], 0);
    assert_eq!(pts[1]["zeta"], 1.0);
    let rate = pts[1]["rate"].as_f64().unwrap();
    assert!((rate - 90.0 / 256.0).abs() < 1e-15);
    let text = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&text);
    assert_eq!(rows.iter().filter(|r| r[4] == "largest").count(), 2);
}

#[test]
fn lm_oamp_reports_equivalence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let out = dir.path().join("lm.csv");
    ok(&["simulate", "--config", s(&cfg), "--algo", "lm-oamp", "--trials", "2", "--out", s(&out)]);
    let summary = json(&dir.path().join("lm.json"));
    let eq = &summary["points"][0]["equivalence"];
    assert_eq!(eq["posdef_ok"], true);
    assert!(eq["max_mean_dev"].as_f64().unwrap() < 2.0 / 16.0);
    assert!(eq["max_var_dev"].as_f64().is_some());
}

#[test]
fn amp_runs_on_iid_and_rejects_other_ensembles() {
    let dir = TempDir::new().unwrap();
    let iid = write(&dir, "iid.toml", &SMALL.replace("row-orthogonal", "iid-gaussian"));
    let out = dir.path().join("amp.csv");
    ok(&["simulate", "--config", s(&iid), "--algo", "amp", "--zeta", "0.9", "--out", s(&out)]);
    let summary = json(&dir.path().join("amp.json"));
    assert_eq!(summary["algo"], "amp");
    assert_eq!(summary["points"][0]["diverged"], 0);

    let ro = write(&dir, "ro.toml", SMALL);
    let res = run(&["simulate", "--config", s(&ro), "--algo", "amp"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("iid-gaussian"));
}

#[test]
fn missing_key_exits_2_naming_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &SMALL.replace("M = 77\n", ""));
    let res = run(&["simulate", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`M`"));
    assert!(res.stdout.is_empty());

    let cfg = write(&dir, "c.json", r#"{"system": {"L": 4, "W": 1, "N": 64, "ensemble": "iid-gaussian", "rho": 0.1, "snr_db": 30}}"#);
    let res = run(&["se", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`M`"));

    let cfg = write(&dir, "p.toml", "seed = 1\n");
    let res = run(&["potential", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`potential`"));
}

#[test]
fn bad_configs_exit_2() {
    let dir = TempDir::new().unwrap();
    let unknown = write(&dir, "u.toml", &(SMALL.to_owned() + "colour = 1\n"));
    let res = run(&["simulate", "--config", s(&unknown)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));

    let yaml = write(&dir, "c.yaml", SMALL);
    assert_eq!(run(&["simulate", "--config", s(&yaml)]).status.code(), Some(2));

    let cfg = write(&dir, "c.toml", SMALL);
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--zeta", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--workers", "0"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--algo", "lm-oamp", "--zeta", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--config", s(&cfg), "--algo", "nope"]).status.code(), Some(2));
}

#[test]
fn se_comparison_emits_diff_column() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.to_owned() + "\n[se]\nkind = \"bayes\"\nT = 200\ncompare = \"approx\"\n";
    let cfg = write(&dir, "c.toml", &text);
    let out = dir.path().join("se.csv");
    ok(&["se", "--config", s(&cfg), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&text);
    assert_eq!(rows[0], ["iter", "section", "v_post", "v_post_compare", "diff"]);
    for r in &rows[1..] {
        let (a, b, d) = (r[2].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap(), r[4].parse::<f64>().unwrap());
        assert_eq!(d, a - b);
    }
    let summary = json(&dir.path().join("se.json"));
    assert_eq!(summary["kind"], "bayes");
    assert_eq!(summary["compare"]["kind"], "approx");
    assert_eq!(summary["converged"], true);
}

#[test]
fn se_lm_kind_is_the_diagonal_and_matches_bayes() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.to_owned() + "\n[se]\nkind = \"lm\"\nT = 30\ntol = 0\ncompare = \"bayes\"\n";
    let cfg = write(&dir, "c.toml", &text);
    let out = dir.path().join("se.csv");
    ok(&["se", "--config", s(&cfg), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&text);
    assert_eq!(rows.len(), 1 + 30 * 4);
    let summary = json(&dir.path().join("se.json"));
    assert!(summary["compare"]["max_abs_diff"].as_f64().unwrap() < 1e-10);
}

#[test]
fn wave_front_recipe_shows_threshold_saturation() {
    let dir = TempDir::new().unwrap();
    let recipe = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes/wave_front.toml");
    let out = dir.path().join("wave.csv");
    ok(&["se", "--config", s(&recipe), "--out", s(&out)]);
    let summary = json(&dir.path().join("wave.json"));
    assert_eq!(summary["converged"], true);
    let good = summary["uncoupled"]["artificial"].as_f64().unwrap();
    let bad = summary["uncoupled"]["standard"].as_f64().unwrap();
    assert!(bad > 10.0 * good);
    // Boundary sections see extra measurements and may settle lower.
    for v in summary["final"].as_array().unwrap() {
        assert!(v.as_f64().unwrap() - good < 1e-6);
    }
    // The edges lead the center: at iteration 400 the ends are near the
    // good fixed point while the middle still sits near the bad one.
    let text = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&text);
    let at = |t: &str, l: &str| rows.iter().find(|r| r[0] == t && r[1] == l).unwrap()[2].parse::<f64>().unwrap();
    assert!(at("400", "0") < 2.0 * good);
    assert!(at("400", "25") > 0.5 * bad);
}

#[test]
fn potential_curves_and_minimizers() {
    let dir = TempDir::new().unwrap();
    let text = r#"
[potential]
spectrum = { kind = "iid-gaussian", delta = 0.18 }
prior = { prior = "bg", rho = 0.1 }
snr_db = 30
grid = 64
"#;
    let cfg = write(&dir, "p.toml", text);
    let out = dir.path().join("p.csv");
    ok(&["potential", "--config", s(&cfg), "--out", s(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let (_, rows) = split(&csv);
    assert_eq!(rows[0], ["delta", "E", "F"]);
    assert_eq!(rows.len(), 1 + 64);
    let summary = json(&dir.path().join("p.json"));
    // Inside the waterfall there are two local minimizers.
    assert_eq!(summary["minimizers"].as_array().unwrap().len(), 2);
    assert_eq!(summary["unique"], false);

    let sweep = write(&dir, "q.toml", &(text.to_owned() + "deltas = [0.1, 0.4]\n"));
    let out = dir.path().join("q.csv");
    ok(&["potential", "--config", s(&sweep), "--out", s(&out)]);
    let summary = json(&dir.path().join("q.json"));
    let arr = summary.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert!(arr[1]["e_opt"].as_f64().unwrap() < 1e-3);
}

const THRESHOLD: &str = r#"
[threshold]
ensembles = [{ kind = "iid-gaussian" }]
W = [0]
prior = { prior = "bg", rho = 0.1 }
snr_db = 30
lo = 0.15
hi = 0.26
step = 0.02
tol = 1e-3
"#;

#[test]
fn threshold_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "t.toml", THRESHOLD);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["threshold", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["threshold", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let summary = json(&dir.path().join("a.json"));
    let bp = summary["delta_BP"].as_f64().unwrap();
    let opt = summary["delta_opt"].as_f64().unwrap();
    let sc = summary["delta_SC"].as_f64().unwrap();
    assert!((bp - 0.2079).abs() < 2e-3, "delta_BP {bp}");
    assert!(opt <= bp);
    assert!((sc - bp).abs() < 2e-3, "W = 0 coupled threshold {sc}");
    assert_eq!(summary["rate_adjusted"], summary["delta_SC"]);
}

#[test]
fn degenerate_bracket_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "t.toml", &THRESHOLD.replace("hi = 0.26", "hi = 0.19"));
    let res = run(&["threshold", "--config", s(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(res.stdout.is_empty());
}

#[test]
fn recipes_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if let Some(sys) = &cfg.system {
            sys.validate().unwrap();
            if let Some(sim) = &cfg.simulate {
                sim.validate(sys).unwrap();
            }
        }
        if let Some(se) = &cfg.se {
            se.validate().unwrap();
        }
        if let Some(p) = &cfg.potential {
            p.validate().unwrap();
        }
        if let Some(t) = &cfg.threshold {
            t.validate().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 5);
}
