use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use pcdisco_bench::{
    audit_labels, generate_dataset, load_dataset, summarize, write_jsonl, GenerateConfig, Sample,
};
use pcdisco_core::graph::{RelationKind, Variable};
use pcdisco_core::pc::{solve_sample, StageOutputs};
use pcdisco_eval::{
    bootstrap_f1, classification_metrics, failure_profile, payloads_of, stage_f1, trace_stats_with,
    TraceConfig, TraceStats,
};
use pcdisco_pipeline::{
    build_client, mode as run_mode, read_run_records, run_batch, run_oracle, Payload, RunLog,
    RunRecord, Stage,
};

use crate::config::{ClientArgs, FileConfig};

pub enum Outcome {
    Done,
    /// Finished, but some samples failed.
    Partial(String),
}

pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<anyhow::Error> for CliError {
    fn from(error: anyhow::Error) -> Self {
        CliError { code: 1, error }
    }
}

fn invalid(error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        code: 2,
        error: error.into(),
    }
}

type CmdResult = Result<Outcome, CliError>;

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, short)]
    pub dataset: PathBuf,
    /// Run records are appended here; samples already present are skipped.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Only run the first N samples of the dataset.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub client: ClientArgs,
}

fn load_samples(path: &Path) -> Result<Vec<Sample>, CliError> {
    let report = load_dataset(path).map_err(invalid)?;
    if !report.skipped.is_empty() {
        eprintln!(
            "skipped {} of {} rows in {}",
            report.skipped.len(),
            report.rows(),
            path.display()
        );
        for d in report.skipped.iter().take(5) {
            eprintln!("  row {}: {}", d.row, d.message);
        }
    }
    for d in report.warnings.iter().take(5) {
        eprintln!("  row {}: {}", d.row, d.message);
    }
    if report.samples.is_empty() {
        return Err(invalid(anyhow!(
            "{} holds no usable samples",
            path.display()
        )));
    }
    Ok(report.samples)
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

pub fn generate(n: usize, kinds: &[String], out: &Path, force: bool) -> CmdResult {
    let mut cfg = GenerateConfig::new(n);
    if !kinds.is_empty() {
        cfg.kinds = kinds
            .iter()
            .map(|k| {
                k.trim()
                    .parse::<RelationKind>()
                    .map_err(|e| invalid(anyhow!("{e}")))
            })
            .collect::<Result<_, _>>()?;
    }
    if out.exists() && !force {
        return Err(invalid(anyhow!(
            "{} exists; pass --force to overwrite",
            out.display()
        )));
    }
    let samples = generate_dataset(&cfg).map_err(invalid)?;
    create_parent(out)?;
    write_jsonl(out, &samples, force).context("writing dataset")?;
    let s = summarize(&samples);
    println!(
        "wrote {} samples from {} classes to {} ({} true, {} false, {:.1}% false)",
        s.samples,
        s.classes,
        out.display(),
        s.positives,
        s.negatives,
        100.0 * (1.0 - s.positive_rate)
    );
    Ok(Outcome::Done)
}

pub fn solve(dataset: &Path, out: Option<&Path>, force: bool) -> CmdResult {
    let samples = load_samples(dataset)?;
    if let Some(out) = out {
        if out.exists() && !force {
            return Err(invalid(anyhow!(
                "{} exists; pass --force to overwrite",
                out.display()
            )));
        }
        if force && out.exists() {
            std::fs::remove_file(out).with_context(|| format!("removing {}", out.display()))?;
        }
        create_parent(out)?;
        let mut log = RunLog::open(out).with_context(|| format!("opening {}", out.display()))?;
        for s in &samples {
            log.append(&run_oracle(s)).context("appending run record")?;
        }
    }
    let audit = audit_labels(&samples);
    println!(
        "checked {} labels, {} agree with the engine",
        audit.checked, audit.agreed
    );
    for id in audit.mismatches.iter().take(20) {
        println!("  mismatch: {id}");
    }
    for f in audit.failures.iter().take(20) {
        println!("  row {}: {}", f.row, f.message);
    }
    if audit.mismatches.is_empty() && audit.failures.is_empty() {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::Partial(format!(
            "{} mismatched and {} unsolvable samples",
            audit.mismatches.len(),
            audit.failures.len()
        )))
    }
}

pub fn run(mode_name: &str, args: &RunArgs, file: &FileConfig) -> CmdResult {
    let mode = run_mode(mode_name).ok_or_else(|| {
        invalid(anyhow!(
            "unknown mode {mode_name:?}; use baseline, pipeline or oracle"
        ))
    })?;
    let mut samples = load_samples(&args.dataset)?;
    if let Some(limit) = args.limit {
        samples.truncate(limit);
    }

    let client_args = if mode.name() == "oracle" {
        ClientArgs {
            oracle: true,
            mock: None,
            client: None,
            ..args.client.clone()
        }
    } else {
        args.client.clone()
    };
    let (client_name, cfg) = client_args.resolve(&file.chat).map_err(invalid)?;
    let client = build_client(&client_name, &cfg).map_err(|e| invalid(anyhow!(e)))?;

    create_parent(&args.out)?;
    let mut log =
        RunLog::open(&args.out).with_context(|| format!("opening {}", args.out.display()))?;
    let todo: Vec<Sample> = samples
        .into_iter()
        .filter(|s| !log.is_done(&s.id))
        .collect();
    if log.completed() > 0 {
        eprintln!(
            "resuming: {} records already in {}",
            log.completed(),
            args.out.display()
        );
    }
    let total = todo.len();
    let (mut done, mut failed, mut tokens) = (0usize, 0usize, 0u64);
    run_batch(
        mode,
        client.as_ref(),
        &todo,
        &cfg,
        |rec| -> anyhow::Result<()> {
            done += 1;
            tokens += rec.total_tokens;
            let status = match (&rec.error, rec.verdict) {
                (Some(e), _) => {
                    failed += 1;
                    format!("failed at {}: {}", e.stage, e.message)
                }
                (None, Some(v)) => format!("verdict {v}"),
                (None, None) => "no verdict".to_string(),
            };
            eprintln!(
                "[{done}/{total}] {} {status} ({} tokens)",
                rec.sample_id, rec.total_tokens
            );
            log.append(&rec).context("appending run record")
        },
    )?;
    println!(
        "{} mode via {}: {} samples run, {} failed, {} tokens total",
        mode.name(),
        client.name(),
        done,
        failed,
        tokens
    );
    if failed > 0 {
        Ok(Outcome::Partial(format!(
            "{failed} of {done} samples failed"
        )))
    } else {
        Ok(Outcome::Done)
    }
}

/// Dataset samples paired with their run record, in dataset order.
fn join(run: &Path, dataset: &Path) -> Result<Vec<(Sample, RunRecord)>, CliError> {
    let samples = load_samples(dataset)?;
    let (records, bad) = read_run_records(run)
        .with_context(|| format!("reading {}", run.display()))
        .map_err(invalid)?;
    if !bad.is_empty() {
        eprintln!(
            "ignored {} unreadable lines in {}",
            bad.len(),
            run.display()
        );
    }
    let mut by_id: HashMap<String, RunRecord> = HashMap::new();
    let mut dupes = 0;
    for r in records {
        if by_id.contains_key(&r.sample_id) {
            dupes += 1;
        } else {
            by_id.insert(r.sample_id.clone(), r);
        }
    }
    if dupes > 0 {
        eprintln!("ignored {dupes} duplicate records");
    }
    let joined: Vec<(Sample, RunRecord)> = samples
        .into_iter()
        .filter_map(|s| by_id.remove(&s.id).map(|r| (s, r)))
        .collect();
    if !by_id.is_empty() {
        eprintln!(
            "{} records have no sample in {}",
            by_id.len(),
            dataset.display()
        );
    }
    if joined.is_empty() {
        return Err(invalid(anyhow!(
            "no run records in {} match samples in {}",
            run.display(),
            dataset.display()
        )));
    }
    Ok(joined)
}

fn verdicts(joined: &[(Sample, RunRecord)]) -> (Vec<bool>, Vec<bool>) {
    joined
        .iter()
        .map(|(s, r)| (r.verdict.unwrap_or(false), s.label))
        .unzip()
}

fn oracle_outputs<'a>(
    samples: impl Iterator<Item = &'a Sample>,
) -> Result<Vec<StageOutputs>, CliError> {
    samples
        .map(|s| {
            solve_sample(&s.facts, &s.hypothesis).map_err(|e| invalid(anyhow!("{}: {e}", s.id)))
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    sample_id: &'a str,
    n: usize,
    mode: &'a str,
    label: bool,
    verdict: Option<bool>,
    correct: bool,
    prompt_tokens: u64,
    completion_tokens: u64,
    total_tokens: u64,
    wall_ms: u64,
    error: Option<String>,
}

pub fn score(
    run: &Path,
    dataset: &Path,
    as_json: bool,
    csv_out: Option<&Path>,
    profile: bool,
) -> CmdResult {
    let joined = join(run, dataset)?;
    let (preds, labels) = verdicts(&joined);
    let mut report = classification_metrics(&preds, &labels).map_err(invalid)?;
    let tokens: u64 = joined.iter().map(|(_, r)| r.total_tokens).sum();
    report = report.with_mean_tokens(tokens as f64 / joined.len() as f64);

    let staged: Vec<&(Sample, RunRecord)> = joined
        .iter()
        .filter(|(_, r)| r.artifact(Stage::Skeleton).is_some())
        .collect();
    let mut skeleton_ok = None;
    if !staged.is_empty() {
        let gold = oracle_outputs(staged.iter().map(|(s, _)| s))?;
        let items: Vec<_> = staged
            .iter()
            .map(|(_, r)| payloads_of(r))
            .zip(&gold)
            .collect();
        report = report.with_stage_f1(stage_f1(&items).map_err(invalid)?);
        skeleton_ok = Some(
            items
                .iter()
                .map(|(p, g)| match p[0] {
                    Some(Payload::Skeleton(s)) => {
                        let got: BTreeSet<_> = s.edges.iter().cloned().collect();
                        let want: BTreeSet<_> = g.skeleton.named_undirected().into_iter().collect();
                        got == want
                    }
                    _ => false,
                })
                .collect::<Vec<bool>>(),
        );
        if staged.len() < joined.len() {
            eprintln!(
                "stage scores cover {} of {} samples",
                staged.len(),
                joined.len()
            );
        }
    }

    let profile_report = if profile {
        let ok = skeleton_ok.as_ref().ok_or_else(|| {
            invalid(anyhow!(
                "failure profile needs stage-1 artifacts; this run has none"
            ))
        })?;
        let samples: Vec<Sample> = staged.iter().map(|(s, _)| s.clone()).collect();
        Some(failure_profile(&samples, ok).map_err(invalid)?)
    } else {
        None
    };

    if let Some(path) = csv_out {
        create_parent(path)?;
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        for (s, r) in &joined {
            let verdict = r.verdict;
            w.serialize(CsvRow {
                sample_id: &s.id,
                n: s.n,
                mode: &r.mode,
                label: s.label,
                verdict,
                correct: verdict.unwrap_or(false) == s.label,
                prompt_tokens: r.tokens.prompt,
                completion_tokens: r.tokens.completion,
                total_tokens: r.total_tokens,
                wall_ms: r.wall_ms,
                error: r
                    .error
                    .as_ref()
                    .map(|e| format!("{}: {}", e.stage, e.message)),
            })
            .context("writing CSV row")?;
        }
        w.flush().context("writing CSV")?;
    }

    if as_json {
        let mut v = serde_json::to_value(&report).context("serializing report")?;
        if let Some(p) = &profile_report {
            v["failure_profile"] = serde_json::to_value(p).context("serializing profile")?;
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&v).context("serializing report")?
        );
    } else {
        print!("{}", report.to_table());
        if let Some(p) = &profile_report {
            print!("\n{}", p.to_table());
        }
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    sample_id: &'a str,
    stage: Stage,
    #[serde(flatten)]
    stats: TraceStats,
}

pub fn traces(
    run: &Path,
    dataset: &Path,
    stage: Option<&str>,
    cfg: &TraceConfig,
    as_json: bool,
) -> CmdResult {
    let stage: Option<Stage> = stage
        .map(|s| s.parse::<Stage>().map_err(|e| invalid(anyhow!("{e}"))))
        .transpose()?;
    let joined = join(run, dataset)?;
    let mut rows = Vec::new();
    for (s, r) in &joined {
        let vars: Vec<&Variable> = s.facts.variables().iter().collect();
        let edges: Vec<(Variable, Variable)> = vars
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                vars[i + 1..]
                    .iter()
                    .map(move |b| ((*a).clone(), (*b).clone()))
            })
            .collect();
        for a in &r.artifacts {
            if stage.is_some_and(|st| st != a.stage) || a.traces().is_empty() {
                continue;
            }
            let text = a.traces().join("\n\n");
            rows.push(TraceRow {
                sample_id: &s.id,
                stage: a.stage,
                stats: trace_stats_with(&text, &edges, cfg),
            });
        }
    }
    let n = rows.len();
    let mean = |f: &dyn Fn(&TraceRow) -> f64| {
        if n == 0 {
            0.0
        } else {
            rows.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let edge_visits: Vec<usize> = rows
        .iter()
        .flat_map(|r| r.stats.revisit_counts.values().copied())
        .collect();
    let summary = json!({
        "traces": n,
        "mean_micro_steps": mean(&|r| r.stats.micro_steps as f64),
        "max_micro_steps": rows.iter().map(|r| r.stats.micro_steps).max().unwrap_or(0),
        "mean_self_check_markers": mean(&|r| r.stats.self_check_markers as f64),
        "mean_revisits_per_edge": if edge_visits.is_empty() {
            0.0
        } else {
            edge_visits.iter().sum::<usize>() as f64 / edge_visits.len() as f64
        },
        "markers": cfg.markers,
        "case_insensitive": cfg.case_insensitive,
    });
    if as_json {
        let out = json!({ "summary": summary, "traces": rows });
        println!(
            "{}",
            serde_json::to_string_pretty(&out).context("serializing traces")?
        );
    } else {
        println!("traces            {n}");
        println!(
            "mean micro-steps  {:.2}",
            summary["mean_micro_steps"].as_f64().unwrap_or(0.0)
        );
        println!("max micro-steps   {}", summary["max_micro_steps"]);
        println!(
            "mean markers      {:.2}",
            summary["mean_self_check_markers"].as_f64().unwrap_or(0.0)
        );
        println!(
            "revisits per edge {:.2}",
            summary["mean_revisits_per_edge"].as_f64().unwrap_or(0.0)
        );
    }
    Ok(Outcome::Done)
}

pub fn bootstrap(
    run: &Path,
    dataset: &Path,
    reps: usize,
    resamples: usize,
    seed: u64,
    as_json: bool,
) -> CmdResult {
    let joined = join(run, dataset)?;
    let (preds, labels) = verdicts(&joined);
    let b = bootstrap_f1(&preds, &labels, reps, resamples, seed).map_err(invalid)?;
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&b).context("serializing bootstrap")?
        );
    } else {
        println!("samples   {}", joined.len());
        println!("F1        {:.4}", b.point);
        println!(
            "mean F1   {:.4} (R={}, B={}, seed {})",
            b.mean, b.reps, b.resamples, b.seed
        );
        println!("std       {:.4}", b.std);
        println!("95% CI    [{:.4}, {:.4}]", b.ci_low, b.ci_high);
    }
    Ok(Outcome::Done)
}
