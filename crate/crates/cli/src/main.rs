//! tabaudit: fairness / accountability / transparency audits for
//! tabular predictive pipelines.
//!
//! `report` runs every analysis the config requests and emits one JSON
//! document; the section subcommands run a single section; `research`
//! emits plot-ready CSV tables instead of a report. Exit codes: 0
//! success, 2 usage or config error, 3 data error, 4 fairness
//! violations found under `--fail-on-violation`, 5 analysis error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tabaudit_core::dataset::group_by_feature;
use tabaudit_core::pipeline::{
    self, parse_config, svg, AuditConfig, AuditError, Overrides, PlotBundle, Prepared,
};

#[derive(Parser)]
#[command(
    name = "tabaudit",
    version,
    about = "Audit the fairness, accountability and transparency of a tabular predictive pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Audit configuration file (TOML)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Data CSV; overrides the config's `data`
    #[arg(long, global = true, value_name = "FILE")]
    data: Option<PathBuf>,

    /// Schema sidecar (TOML); overrides the config's `schema`
    #[arg(long, global = true, value_name = "FILE")]
    schema: Option<PathBuf>,

    /// Base seed; overrides the config's `seed`
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output file (report and section commands) or directory
    /// (`research`); defaults to standard output
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Exit with code 4 when the report counts any fairness violation
    #[arg(long, global = true)]
    fail_on_violation: bool,

    /// Add a wall-clock timestamp to the report meta section (breaks
    /// byte-determinism, which is why it is off by default)
    #[arg(long, global = true)]
    stamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Load and cross-check the config, data and schema, then print a
    /// summary of what an audit would see
    Validate,
    /// Run only the fairness section
    Fairness,
    /// Run only the accountability section
    Accountability,
    /// Run only the surrogate explanations
    Explain,
    /// Run only the partial-dependence curves
    Pd,
    /// Run only the individual conditional expectation curves
    Ice,
    /// Run the full audit and emit the JSON report
    Report,
    /// Emit plot-ready CSV tables for the configured visualisations
    Research {
        /// Also render minimal SVG line charts (numeric grids only);
        /// requires --out
        #[arg(long)]
        svg: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("tabaudit: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn config_err(message: impl Into<String>) -> AuditError {
    AuditError::Config(message.into())
}

fn write_err(e: impl ToString) -> AuditError {
    AuditError::Analysis {
        stage: "write".to_string(),
        message: e.to_string(),
    }
}

fn run(cli: Cli) -> Result<i32, AuditError> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| config_err("--config is required"))?;
    let config_text = fs::read_to_string(config_path)
        .map_err(|e| config_err(format!("{}: {e}", config_path.display())))?;
    let overrides = Overrides {
        data: cli.data.clone(),
        schema: cli.schema.clone(),
        seed: cli.seed,
        output: cli.out.clone(),
        stamp: cli.stamp.then(now_utc),
    };
    let mut cfg = parse_config(&config_text, &overrides)?;

    match cli.command {
        Command::Validate => {
            let prep = pipeline::prepare(&cfg)?;
            emit_text(&cfg, &validate_summary(&prep))?;
            Ok(0)
        }
        Command::Report => report_command(&cfg, cli.fail_on_violation),
        Command::Fairness => {
            if cfg.fairness.is_none() {
                return Err(config_err("the config has no [fairness] section"));
            }
            cfg.accountability = None;
            cfg.transparency = None;
            report_command(&cfg, cli.fail_on_violation)
        }
        Command::Accountability => {
            if cfg.accountability.is_none() {
                return Err(config_err("the config has no [accountability] section"));
            }
            cfg.fairness = None;
            cfg.transparency = None;
            report_command(&cfg, cli.fail_on_violation)
        }
        Command::Explain => {
            narrow_transparency(&mut cfg, Keep::Surrogate)?;
            report_command(&cfg, cli.fail_on_violation)
        }
        Command::Pd => {
            narrow_transparency(&mut cfg, Keep::Pd)?;
            report_command(&cfg, cli.fail_on_violation)
        }
        Command::Ice => {
            narrow_transparency(&mut cfg, Keep::Ice)?;
            report_command(&cfg, cli.fail_on_violation)
        }
        Command::Research { svg } => research_command(&cfg, svg),
    }
}

enum Keep {
    Surrogate,
    Pd,
    Ice,
}

/// Reduces the config to a single transparency request kind, erroring
/// when the config never asked for it.
fn narrow_transparency(cfg: &mut AuditConfig, keep: Keep) -> Result<(), AuditError> {
    let Some(t) = cfg.transparency.as_mut() else {
        return Err(config_err("the config has no [transparency] section"));
    };
    match keep {
        Keep::Surrogate => {
            if t.surrogate.is_none() {
                return Err(config_err(
                    "the config has no [transparency.surrogate] section",
                ));
            }
            t.pd_features.clear();
            t.ice_features.clear();
        }
        Keep::Pd => {
            if t.pd_features.is_empty() {
                return Err(config_err(
                    "the config requests no `transparency.pd` features",
                ));
            }
            t.ice_features.clear();
            t.surrogate = None;
        }
        Keep::Ice => {
            if t.ice_features.is_empty() {
                return Err(config_err(
                    "the config requests no `transparency.ice` features",
                ));
            }
            t.pd_features.clear();
            t.surrogate = None;
        }
    }
    cfg.fairness = None;
    cfg.accountability = None;
    Ok(())
}

fn report_command(cfg: &AuditConfig, fail_on_violation: bool) -> Result<i32, AuditError> {
    let report = pipeline::run_audit(cfg)?;
    emit_text(cfg, &report.render())?;
    let count = report.violations.count;
    if count > 0 {
        eprintln!(
            "tabaudit: {count} fairness violation{} found",
            if count == 1 { "" } else { "s" }
        );
        if fail_on_violation {
            return Ok(4);
        }
    }
    Ok(0)
}

fn research_command(cfg: &AuditConfig, render_svg: bool) -> Result<i32, AuditError> {
    let bundle = pipeline::run_research(cfg)?;
    match &cfg.output_path {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(write_err)?;
            for table in &bundle.tables {
                let path = dir.join(format!("{}.csv", table.name));
                fs::write(&path, table.to_csv()?).map_err(write_err)?;
                eprintln!("tabaudit: wrote {}", path.display());
            }
            if render_svg {
                write_svgs(&bundle, dir)?;
            }
        }
        None => {
            if render_svg {
                return Err(config_err(
                    "--svg needs --out to know where to put the images",
                ));
            }
            // Tables go to standard output, each introduced by a
            // comment line so they stay separable.
            let mut stdout = String::new();
            for table in &bundle.tables {
                writeln!(stdout, "# table {}", table.name).expect("write to String");
                stdout
                    .push_str(std::str::from_utf8(&table.to_csv()?).expect("csv output is utf-8"));
                stdout.push('\n');
            }
            print!("{stdout}");
        }
    }
    Ok(0)
}

fn write_svgs(bundle: &PlotBundle, dir: &std::path::Path) -> Result<(), AuditError> {
    for table in &bundle.tables {
        if let Some(image) = svg::line_chart(table) {
            let path = dir.join(format!("{}.svg", table.name));
            fs::write(&path, image).map_err(write_err)?;
            eprintln!("tabaudit: wrote {}", path.display());
        }
    }
    Ok(())
}

/// Sends `text` to the configured output file, or to standard output
/// when none is set.
fn emit_text(cfg: &AuditConfig, text: &str) -> Result<(), AuditError> {
    match &cfg.output_path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(write_err)?;
            }
            fs::write(path, text).map_err(write_err)?;
            eprintln!("tabaudit: wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn validate_summary(prep: &Prepared) -> String {
    let cfg = &prep.config;
    let mut out = String::new();
    writeln!(out, "config: ok (digest {})", cfg.digest).expect("write to String");
    writeln!(
        out,
        "data: {} ({} rows, {} features)",
        cfg.data_path.display(),
        prep.features.n_rows(),
        prep.features.n_features()
    )
    .expect("write to String");
    writeln!(out, "features:").expect("write to String");
    for f in prep.features.schema().features() {
        writeln!(out, "  {}: {}", f.name, f.kind).expect("write to String");
    }
    let universe = prep.labels.distinct_sorted();
    writeln!(
        out,
        "labels: {} ({} distinct: {})",
        cfg.labels_column,
        universe.len(),
        universe.join(", ")
    )
    .expect("write to String");
    let group_count = group_by_feature(&prep.features, &cfg.protected)
        .map(|g| g.len())
        .unwrap_or(0);
    writeln!(out, "protected: {} ({} groups)", cfg.protected, group_count)
        .expect("write to String");
    writeln!(out, "positive: {}", cfg.positive).expect("write to String");
    match prep.trained_rows {
        Some(k) => writeln!(
            out,
            "source: {} (trained on {k} of {} rows)",
            source_label(cfg),
            prep.features.n_rows()
        )
        .expect("write to String"),
        None => writeln!(out, "source: {}", source_label(cfg)).expect("write to String"),
    }
    out
}

fn source_label(cfg: &AuditConfig) -> String {
    match &cfg.source {
        pipeline::PredictionSource::Column(name) => format!("predictions column `{name}`"),
        pipeline::PredictionSource::Model(m) => format!("built-in {} model", m.kind.name()),
    }
}

/// Seconds-resolution UTC timestamp (RFC 3339), e.g.
/// `2026-08-14T09:30:00Z`.
fn now_utc() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_rfc3339_shaped() {
        let s = now_utc();
        assert_eq!(s.len(), 20, "{s}");
        assert_eq!(&s[4..5], "-");
        assert_eq!(&s[10..11], "T");
        assert!(s.ends_with('Z'));
    }
}
