//! Subcommand implementations.
//!
//! Every command validates its configuration and reads all inputs before the
//! first output file is written; outputs go through a temporary file and a
//! rename so a failed run never leaves a truncated artifact behind.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use ctpanel_core::curiosity::derive_curiosity;
use ctpanel_core::featurize::{featurize_session, FeaturizeConfig};
use ctpanel_core::io::{read_panel_file, read_ratings_csv, read_session_dir, read_turns_csv, write_panel_jsonl};
use ctpanel_core::panel::{slice_grid, validate_panel, BehaviorPanel};
use ctpanel_core::turns::slice_turn_metrics;
use ctpanel_core::CHANNELS;
use ctpanel_ctsem::fit::FitResult;
use ctpanel_ctsem::io::{fit_to_json, read_design_toml, read_fit_json, read_model_toml, write_links_csv};
use ctpanel_ctsem::{fit, rank_links, recovery_experiment, simulate, CtModelSpec, Grouping, LinkReport, SimDesign};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::{
    Command, CompareArgs, FeaturizeArgs, FitArgs, Mode, RateArgs, RecoverArgs, ReportArgs, SimulateArgs, TurnsArgs,
    SCHEMA_VERSION,
};

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Featurize(a) => featurize(a, out),
        Command::Rate(a) => rate(a),
        Command::Turns(a) => turns(a),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Recover(a) => recover(a, out),
        Command::Report(a) => report(a, out),
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn with_path<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn panel_bytes(panels: &[BehaviorPanel]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_panel_jsonl(panels, &mut buf)?;
    Ok(buf)
}

fn json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------- featurize

fn session_name(dir: &Path) -> Result<String, CliError> {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .filter(|n| !n.is_empty() && n != "." && n != "..")
        .ok_or_else(|| CliError::Usage(format!("{}: cannot name a session after this path", dir.display())))
}

struct SessionOutcome {
    name: String,
    result: Result<(BehaviorPanel, serde_json::Value), String>,
}

fn featurize_one(dir: &Path, name: String, cfg: &FeaturizeConfig) -> SessionOutcome {
    let result = read_session_dir(dir)
        .and_then(|s| featurize_session(&s, cfg))
        .map_err(|e| format!("{}: {e}", dir.display()))
        .and_then(|f| {
            let report = validate_panel(&f.panel);
            if !report.is_valid() {
                return Err(format!("{}: {}", dir.display(), report.violations.join("; ")));
            }
            let missing: serde_json::Map<String, serde_json::Value> = report
                .channel_missing_rate
                .iter()
                .map(|(c, r)| (c.name().to_string(), json!(r)))
                .collect();
            let summary = json!({
                "records": f.panel.n_records(),
                "members": report.member_slice_counts,
                "channel_missing_rate": missing,
                "curiosity_missing_rate": report.curiosity_missing_rate,
            });
            Ok((f.panel, summary))
        });
    SessionOutcome { name, result }
}

fn featurize(args: FeaturizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let settings = PipelineConfig::load(args.config.as_deref())?;
    let cfg = settings.featurize_config()?;
    let mut names = BTreeSet::new();
    let named: Vec<(PathBuf, String)> = args
        .sessions
        .iter()
        .map(|d| {
            let name = session_name(d)?;
            if !names.insert(name.clone()) {
                return Err(CliError::Usage(format!("two session directories are named `{name}`")));
            }
            Ok((d.clone(), name))
        })
        .collect::<Result<_, _>>()?;
    let pool = thread_pool(args.jobs)?;
    let outcomes: Vec<SessionOutcome> = pool.install(|| {
        named
            .par_iter()
            .map(|(dir, name)| featurize_one(dir, name.clone(), &cfg))
            .collect()
    });

    let mut statuses = Vec::new();
    let mut failures = Vec::new();
    for o in &outcomes {
        match &o.result {
            Ok((panel, summary)) => {
                let rel = format!("{}/panel.jsonl", o.name);
                write_atomic(&args.out.join(&rel), &panel_bytes(std::slice::from_ref(panel))?)?;
                statuses.push(json!({"session": o.name, "status": "ok", "panel": rel, "summary": summary}));
                writeln!(out, "{}: {} records", o.name, panel.n_records())?;
            }
            Err(msg) => {
                statuses.push(json!({"session": o.name, "status": "failed", "error": msg}));
                failures.push(msg.clone());
            }
        }
    }
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "settings": settings,
        "affect_rules": cfg.rules.names().collect::<Vec<_>>(),
        "channels": CHANNELS.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "sessions": statuses,
    });
    write_atomic(&args.out.join("manifest.json"), &json_bytes(&manifest)?)?;
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            log::error!("session failed: {f}");
        }
        Err(CliError::Data(format!(
            "{} of {} sessions failed\n  {}",
            failures.len(),
            outcomes.len(),
            failures.join("\n  ")
        )))
    }
}

// ---------------------------------------------------------------- rate / turns

fn rate(args: RateArgs) -> Result<(), CliError> {
    let mut settings = PipelineConfig::load(args.config.as_deref())?;
    if let Some(m) = args.min_raters {
        settings.rating.min_raters = m;
    }
    if let Some(k) = args.time_sd {
        settings.rating.time_sd_k = k;
    }
    settings.featurize_config()?;
    let ratings = read_ratings_csv(&args.ratings)?;
    let labels = derive_curiosity(&ratings, &settings.rating)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["member", "slice", "score", "subset_icc"])?;
    for l in &labels {
        w.write_record([
            l.member.clone(),
            l.slice.to_string(),
            l.score.map(|s| s.to_string()).unwrap_or_default(),
            opt(l.subset_icc),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&args.out, &bytes)
}

fn turns(args: TurnsArgs) -> Result<(), CliError> {
    let mut settings = PipelineConfig::load(args.config.as_deref())?;
    if let Some(s) = args.slice {
        settings.slice_len = s;
    }
    settings.featurize_config()?;
    let events = read_turns_csv(&args.turns)?;
    let grid = slice_grid(args.session_length, settings.slice_len)?;
    let members: Vec<String> = if args.members.is_empty() {
        events
            .iter()
            .map(|t| t.speaker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        args.members.clone()
    };
    let metrics = slice_turn_metrics(&events, &grid, &members, &settings.turns)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["member", "slice", "indegree", "outdegree"])?;
    for m in &metrics {
        w.write_record([m.member.clone(), m.slice.to_string(), opt(m.indegree), opt(m.outdegree)])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&args.out, &bytes)
}

// ---------------------------------------------------------------- fit / report

fn load_spec(path: Option<&Path>) -> Result<CtModelSpec, CliError> {
    match path {
        None => Ok(CtModelSpec::default()),
        Some(p) => read_model_toml(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
    }
}

fn links_bytes(report: &LinkReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_links_csv(report, &mut buf)?;
    Ok(buf)
}

fn fit_links(fit: &FitResult, top_k: usize) -> Result<LinkReport, CliError> {
    let table = fit
        .standardized
        .as_ref()
        .ok_or_else(|| CliError::Data("fit carries no standardized effects".into()))?;
    Ok(rank_links(table, top_k))
}

fn fit_cmd(args: FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = load_spec(args.config.as_deref())?;
    if let Some(m) = args.mode {
        spec.grouping = match m {
            Mode::Constrained => Grouping::Constrained,
            Mode::Free => Grouping::Free,
        };
    }
    if let Some(s) = args.seed {
        spec.optimizer.seed = s;
    }
    if let Some(s) = args.starts {
        spec.optimizer.starts = s;
    }
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.top_k == 0 {
        return Err(CliError::Usage("--top-k must be >= 1".into()));
    }
    let pool = thread_pool(args.jobs)?;

    let mut panels = Vec::new();
    for p in &args.panels {
        panels.extend(read_panel_file(p)?);
    }
    let result = pool.install(|| fit(&spec, &panels))?;
    let links = match &args.links {
        Some(_) => Some(fit_links(&result, args.top_k)?),
        None => None,
    };

    write_atomic(&args.out, fit_to_json(&result)?.as_bytes())?;
    if let (Some(path), Some(report)) = (&args.links, &links) {
        write_atomic(path, &links_bytes(report)?)?;
    }
    writeln!(
        out,
        "loglik {:.3}  k {}  AIC {:.3}  converged {}",
        result.loglik, result.n_params, result.aic, result.converged
    )?;
    for n in &result.notes {
        writeln!(out, "note: {n}")?;
    }
    Ok(())
}

fn report(args: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.top_k == 0 {
        return Err(CliError::Usage("--top-k must be >= 1".into()));
    }
    let fit = read_fit_json(&args.fit).map_err(with_path(&args.fit))?;
    let links = fit_links(&fit, args.top_k)?;
    for e in &links.edges {
        writeln!(out, "{e}")?;
    }
    if let Some(p) = &args.links {
        write_atomic(p, &links_bytes(&links)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- compare

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub mode: String,
    pub loglik: f64,
    pub k: usize,
    pub aic: f64,
}

/// `(AIC_b − AIC_a, AIC_b / AIC_a)`.
pub fn aic_contrast(aic_a: f64, aic_b: f64) -> (f64, f64) {
    (aic_b - aic_a, aic_b / aic_a)
}

/// Renders the comparison: one row per model with ΔAIC against the best,
/// followed by the B − A contrast when exactly two models are given.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let best = rows.iter().map(|r| r.aic).fold(f64::INFINITY, f64::min);
    let width = rows.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let mut s = format!(
        "{:<width$}  {:<11}  {:>12}  {:>5}  {:>12}  {:>10}\n",
        "model", "mode", "loglik", "k", "AIC", "ΔAIC"
    );
    for r in rows {
        s += &format!(
            "{:<width$}  {:<11}  {:>12.3}  {:>5}  {:>12.3}  {:>10.3}\n",
            r.model,
            r.mode,
            r.loglik,
            r.k,
            r.aic,
            r.aic - best
        );
    }
    if let [a, b] = rows {
        let (diff, ratio) = aic_contrast(a.aic, b.aic);
        s += &format!(
            "{} − {}: ΔAIC {:.3}, ratio {:.2} ({:.2}x the AIC of {})\n",
            b.model, a.model, diff, ratio, ratio, a.model
        );
    }
    s
}

fn compare(args: CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = args
        .fits
        .iter()
        .map(|p| {
            let fit = read_fit_json(p).map_err(with_path(p))?;
            let model = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string());
            let mode = match fit.mode {
                Grouping::Constrained => "constrained",
                Grouping::Free => "free",
            };
            Ok(CompareRow {
                model,
                mode: mode.into(),
                loglik: fit.loglik,
                k: fit.n_params,
                aic: fit.aic,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    out.write_all(compare_table(&rows).as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------- simulate / recover

fn load_design(path: &Path) -> Result<ctpanel_ctsem::io::DesignFile, CliError> {
    read_design_toml(path).map_err(|e| match CliError::from(e) {
        CliError::Data(m) | CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), CliError> {
    let mut design: SimDesign = load_design(&args.design)?.design;
    if let Some(s) = args.seed {
        design.seed = s;
    }
    let panels = simulate(&design)?;
    let truth = json!({
        "schema_version": SCHEMA_VERSION,
        "seed": design.seed,
        "params": design.expanded_params(),
    });
    write_atomic(&args.out.join("panel.jsonl"), &panel_bytes(&panels)?)?;
    write_atomic(&args.out.join("true_params.json"), &json_bytes(&truth)?)
}

fn recover(args: RecoverArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = load_design(&args.design)?;
    let reps = args.reps.or(file.replicates).unwrap_or(20);
    if reps == 0 {
        return Err(CliError::Usage("--reps must be >= 1".into()));
    }
    let spec = file.model.clone().unwrap_or_default();
    let pool = thread_pool(args.jobs)?;
    let report = pool.install(|| recovery_experiment(&file.design, &spec, reps, args.compare_free))?;
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "design": file.design,
        "model": spec,
        "report": report,
    });
    write_atomic(&args.out, &json_bytes(&doc)?)?;
    writeln!(
        out,
        "replicates {}  drift MAE {:.4}  loading MAE {:.4}  drift signs {:.3}  loading signs {:.3}  converged {:.3}",
        report.n_replicates,
        report.drift_mae,
        report.loading_mae,
        report.drift_sign_rate,
        report.loading_sign_rate,
        report.converged_rate
    )?;
    if let Some(w) = report.constrained_wins_rate {
        writeln!(
            out,
            "constrained model preferred by AIC in {:.1}% of replicates",
            100.0 * w
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, aic: f64) -> CompareRow {
        CompareRow {
            model: model.into(),
            mode: "constrained".into(),
            loglik: -aic / 2.0,
            k: 0,
            aic,
        }
    }

    #[test]
    fn contrast_of_published_aics() {
        let (diff, ratio) = aic_contrast(933.48, 2278.689);
        assert!((diff - 1345.209).abs() < 1e-9);
        assert!((ratio - 2.44).abs() < 0.005);
        let table = compare_table(&[row("constrained", 933.48), row("free", 2278.689)]);
        assert!(table.contains("ΔAIC 1345.209"), "{table}");
        assert!(table.contains("ratio 2.44"), "{table}");
    }

    #[test]
    fn identical_fits_have_zero_delta() {
        let (diff, ratio) = aic_contrast(100.0, 100.0);
        assert_eq!(diff, 0.0);
        assert_eq!(ratio, 1.0);
        let table = compare_table(&[row("a", 100.0), row("b", 100.0)]);
        assert!(table.contains("ΔAIC 0.000"), "{table}");
    }

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
