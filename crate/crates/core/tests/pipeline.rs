//! End-to-end pipeline runs against real files on disk: config parsing
//! with overrides, schema sidecars, report rendering, and research
//! bundles, exercised through `prepare`/`run_audit`/`run_research`
//! exactly as the CLI drives them.

use std::fs;
use std::path::Path;

use tabaudit_core::pipeline::{parse_config, run_audit, run_research, AuditError, Overrides};
use tempfile::TempDir;

fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).expect("write fixture");
    path
}

const LOANS: &str = "\
age,income,sex,repaid
24,1100,f,no
31,3500,m,yes
42,5100,m,yes
28,2300,f,no
39,4200,f,yes
46,6100,m,yes
22,1600,f,no
35,3800,m,yes
51,7200,f,yes
27,2000,m,no
";

fn full_config(data: &Path) -> String {
    format!(
        r#"seed = 9
data = {:?}
labels = "repaid"
positive = "yes"
protected = "sex"

[model]
kind = "logistic"
epochs = 80
learning_rate = 0.2
train_fraction = 0.7

[fairness]
tolerance = 0.15
metrics = ["positive_rate", "equalized_odds"]
disparate_impact = true
data_bias = true
systemic_pairs = true

[accountability.density]
k = 3

[accountability.robustness]
anchors = [0, 4]
n_samples = 150

[accountability.performance]
metrics = ["accuracy", "tpr"]

[transparency]
grid_resolution = 6
pd = ["age", "income"]
ice = ["age"]

[transparency.surrogate]
anchors = [2]
n_samples = 250
"#,
        data.to_str().unwrap()
    )
}

#[test]
fn full_audit_from_files_renders_every_section() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "loans.csv", LOANS);
    let cfg = parse_config(&full_config(&data), &Overrides::default()).expect("config");
    let report = run_audit(&cfg).expect("audit");
    let text = report.render();

    // Sections appear in their fixed order. The two-space indent pins
    // the match to top-level keys ("violations" also occurs nested
    // inside each fairness metric).
    let order = [
        "meta",
        "fairness",
        "accountability",
        "transparency",
        "violations",
    ];
    let positions: Vec<usize> = order
        .iter()
        .map(|k| {
            text.find(&format!("\n  \"{k}\":"))
                .unwrap_or_else(|| panic!("{k} missing"))
        })
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{positions:?}");

    // The requested analyses all surface.
    for key in [
        "\"equalized_odds\"",
        "\"disparate_impact\"",
        "\"data_bias\"",
        "\"systemic_pairs\"",
        "\"density\"",
        "\"robustness\"",
        "\"performance\"",
        "\"pd\"",
        "\"ice\"",
        "\"surrogate\"",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
    assert!(text.trim_end().ends_with('}'));
}

#[test]
fn reports_are_stable_across_processes_and_runs() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "loans.csv", LOANS);
    let toml = full_config(&data);
    let a = run_audit(&parse_config(&toml, &Overrides::default()).unwrap()).unwrap();
    let b = run_audit(&parse_config(&toml, &Overrides::default()).unwrap()).unwrap();
    assert_eq!(a.render(), b.render());

    // A stamp is the documented way to break that equality.
    let stamped = Overrides {
        stamp: Some("2026-01-01T00:00:00Z".to_string()),
        ..Overrides::default()
    };
    let c = run_audit(&parse_config(&toml, &stamped).unwrap()).unwrap();
    assert_ne!(a.render(), c.render());
    assert!(c.render().contains("\"stamp\": \"2026-01-01T00:00:00Z\""));
}

#[test]
fn schema_sidecar_forces_feature_kinds() {
    let dir = TempDir::new().unwrap();
    // `branch` is all digits; without a sidecar it would infer numeric.
    let data = write(
        dir.path(),
        "d.csv",
        "branch,score,paid\n01,3,yes\n02,5,no\n01,4,yes\n03,2,no\n",
    );
    let schema = write(
        dir.path(),
        "d.schema.toml",
        "branch = \"categorical\"\nscore = \"numeric\"\n",
    );
    let toml = format!(
        r#"seed = 3
data = {:?}
schema = {:?}
labels = "paid"
positive = "yes"
protected = "branch"

[model]
kind = "majority"

[fairness]
metrics = ["positive_rate"]
"#,
        data.to_str().unwrap(),
        schema.to_str().unwrap()
    );
    let cfg = parse_config(&toml, &Overrides::default()).expect("config");
    let report = run_audit(&cfg).expect("audit");
    // Three branch groups prove the digits were treated as tokens.
    let text = report.render();
    for g in ["\"01\"", "\"02\"", "\"03\""] {
        assert!(text.contains(g), "missing group {g}");
    }
}

#[test]
fn predictions_column_mode_reports_known_values() {
    let dir = TempDir::new().unwrap();
    // Group m: 1/2 predicted positive; group f: 1/4 → ratio 0.5, fail.
    let data = write(
        dir.path(),
        "d.csv",
        "x,sex,truth,scored\n1,m,yes,yes\n2,m,no,no\n3,f,yes,yes\n4,f,no,no\n5,f,no,no\n6,f,yes,no\n",
    );
    let toml = format!(
        r#"seed = 1
data = {:?}
labels = "truth"
positive = "yes"
protected = "sex"

[predictions]
column = "scored"

[fairness]
tolerance = 0.05
metrics = ["positive_rate"]
disparate_impact = true
"#,
        data.to_str().unwrap()
    );
    let cfg = parse_config(&toml, &Overrides::default()).expect("config");
    let report = run_audit(&cfg).expect("audit");
    let text = report.render();
    assert!(text.contains("\"source\": \"column:scored\""));
    assert!(text.contains("\"ratio\": 5.0000000000000000e-1"));
    assert!(text.contains("\"pass\": false"));
    assert!(report.violations.count >= 1);
}

#[test]
fn research_bundle_matches_the_configured_requests() {
    let dir = TempDir::new().unwrap();
    let data = write(dir.path(), "loans.csv", LOANS);
    let cfg = parse_config(&full_config(&data), &Overrides::default()).expect("config");
    let bundle = run_research(&cfg).expect("research");
    let names: Vec<&str> = bundle.tables.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["pd_age", "pd_income", "ice_age", "surrogate_2"]);

    let grid = 6;
    let rows = LOANS.lines().count() - 1;
    assert_eq!(bundle.tables[0].rows.len(), grid);
    // ICE: one curve per dataset row plus the PD overlay.
    assert_eq!(bundle.tables[2].rows.len(), rows * grid + grid);
    // Surrogate: one weight per encoded feature (age, income, sex=f, sex=m).
    assert_eq!(bundle.tables[3].rows.len(), 4);
}

#[test]
fn overrides_replace_paths_and_seed() {
    let dir = TempDir::new().unwrap();
    let stale = write(dir.path(), "stale.csv", "x,sex,repaid\n1,m,yes\n");
    let fresh = write(dir.path(), "fresh.csv", LOANS);
    let toml = format!(
        r#"seed = 1
data = {:?}
labels = "repaid"
positive = "yes"
protected = "sex"

[model]
kind = "knn"
k = 3

[fairness]
metrics = ["positive_rate"]
"#,
        stale.to_str().unwrap()
    );
    let overrides = Overrides {
        data: Some(fresh.clone()),
        seed: Some(77),
        ..Overrides::default()
    };
    let cfg = parse_config(&toml, &overrides).expect("config");
    assert_eq!(cfg.data_path, fresh);
    assert_eq!(cfg.seed, 77);
    let report = run_audit(&cfg).expect("audit");
    assert!(report.render().contains("\"n_rows\": 10"));
}

#[test]
fn missing_files_surface_as_data_read_errors() {
    let dir = TempDir::new().unwrap();
    let toml = format!(
        r#"seed = 1
data = {:?}
labels = "repaid"
positive = "yes"
protected = "sex"

[model]
kind = "majority"

[fairness]
metrics = ["positive_rate"]
"#,
        dir.path().join("absent.csv").to_str().unwrap()
    );
    let cfg = parse_config(&toml, &Overrides::default()).expect("config");
    let err = run_audit(&cfg).unwrap_err();
    assert!(
        matches!(err, AuditError::Data { ref stage, .. } if stage == "read"),
        "{err:?}"
    );
    assert_eq!(err.exit_code(), 3);
}
