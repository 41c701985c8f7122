use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rmcontrast::analysis::win_rate;
use rmcontrast::exec::bounded_map;
use rmcontrast::gateway::{Gateway, ResponseCache};
use rmcontrast::metrics::GatewayEmbedder;
use rmcontrast::orient_comparison;
use rmcontrast::perturbation::{Generator, OriginalRewards, TemplateSet};
use rmcontrast::pipeline::PipelineOptions;
use rmcontrast::runstore::{
    build_reports, emit_tables, execute, model_dir, persist, read_record, replay, table_row, write_reports,
    ManifestParts, RunManifest, RunRecord,
};
use rmcontrast::{GeneratorKind, PromptVariant};
use rmcontrast_testkit::{CannedPerturbationSpec, MockServer, MockServices, ToyRewardSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::{info, warn};

use crate::args::{DiscoverArgs, MockServeArgs, ReplayArgs, ReportArgs, RunArgs, WinrateArgs};
use crate::exit::{AnalysisFailure, TransportFailures, UsageError};
use crate::setup::{catalog, Samples};

/// What to print after a pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Explain,
    Sensitivity,
    Representatives,
    CompareModels,
}

impl RunKind {
    fn command(self) -> &'static str {
        match self {
            RunKind::Explain => "explain",
            RunKind::Sensitivity => "sensitivity",
            RunKind::Representatives => "representatives",
            RunKind::CompareModels => "compare-models",
        }
    }
}

struct Prepared {
    samples: Samples,
    parts: ManifestParts,
}

fn prepare(args: &RunArgs, command: &str, variant: PromptVariant) -> Result<Prepared> {
    let endpoints = args.endpoints.resolve()?;
    let catalog = catalog(args.catalog.as_deref())?;
    if args.parallelism == 0 {
        return Err(UsageError("--parallelism must be at least 1".into()).into());
    }
    if args.generator == GeneratorKind::RandomBaseline && args.random_per_side == 0 {
        return Err(UsageError("--random-per-side must be at least 1".into()).into());
    }
    if let Some(dir) = &args.templates {
        TemplateSet::with_overrides(dir).map_err(|e| UsageError(e.to_string()))?;
    }
    let temperature = args.temperature.unwrap_or(match args.generator {
        GeneratorKind::AttributeConditioned => 0.0,
        GeneratorKind::RandomBaseline => 1.0,
    });
    let chat = endpoints.chat.clone().with_temperature(temperature);
    chat.validate().map_err(|e| UsageError(e.to_string()))?;
    let samples = args.dataset.load()?;
    let parts = ManifestParts {
        command: command.to_string(),
        dataset: samples.spec.clone(),
        plan: samples.plan.clone(),
        models: endpoints.models,
        chat,
        embedding: endpoints.embedding,
        options: PipelineOptions {
            variant,
            generator: args.generator,
            random_per_side: args.random_per_side,
            parallelism: args.parallelism,
            fixture_markers: args.test_mode,
        },
        catalog,
        template_dir: args.templates.clone(),
    };
    Ok(Prepared { samples, parts })
}

fn planned(prepared: &Prepared) -> u64 {
    let comparisons: usize = prepared.samples.samples.iter().map(|(_, s)| s.len()).sum();
    prepared
        .parts
        .options
        .planned_requests(comparisons, prepared.parts.models.len(), prepared.parts.catalog.len())
}

fn print_dry_run(prepared: &[Prepared]) {
    let total: u64 = prepared.iter().map(planned).sum();
    let first = &prepared[0].parts;
    let comparisons: usize = prepared[0].samples.samples.iter().map(|(_, s)| s.len()).sum();
    println!("comparisons: {comparisons}");
    println!("models: {}", first.models.len());
    println!("attributes: {}", first.catalog.len());
    println!("runs: {}", prepared.len());
    println!("planned requests: {total}");
}

fn run_one(prepared: Prepared, args: &RunArgs) -> Result<(RunRecord, PathBuf)> {
    let gateway = args.endpoints.gateway()?;
    let manifest = RunManifest::new(prepared.parts);
    let dir = args.out.join(&manifest.run_id);
    let record = execute(manifest, &prepared.samples.samples, &gateway)?;
    persist(&record, &dir)?;
    let transport: usize = record.seeds.iter().map(|s| s.transport_failures()).sum();
    let explained: usize = record.seeds.iter().map(|s| s.explained()).sum();
    info!(
        run = %dir.display(),
        explained,
        network = gateway.network_requests(),
        cache_hits = gateway.cache_hits(),
        "run persisted"
    );
    println!("run: {}", dir.display());
    println!("explained: {explained}");
    if transport > 0 {
        return Err(TransportFailures {
            count: transport,
            run: dir.display().to_string(),
        }
        .into());
    }
    Ok((record, dir))
}

fn report_json(record: &RunRecord, name: &str) -> Result<Value> {
    let text = record
        .reports
        .get(name)
        .ok_or_else(|| AnalysisFailure(format!("no {name} report; was any comparison explained?")))?;
    let value: Value = serde_json::from_str(text).with_context(|| format!("parsing report {name}"))?;
    if let Some(e) = value.get("error").and_then(Value::as_str) {
        return Err(AnalysisFailure(format!("{name}: {e}")).into());
    }
    Ok(value)
}

fn fmt_rate(v: &Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

fn print_sensitivity(record: &RunRecord) -> Result<()> {
    for model in &record.manifest.models {
        let report = report_json(record, &format!("{}/sensitivity.json", model_dir(&model.id)))?;
        let rejected: std::collections::HashMap<&str, &Value> = report["rejected"]["attributes"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|a| Some((a["attribute"].as_str()?, &a["pfr"])))
            .collect();
        let mut rows: Vec<(&str, &Value)> = report["chosen"]["attributes"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|a| Some((a["attribute"].as_str()?, &a["pfr"])))
            .collect();
        rows.sort_by(|a, b| {
            let (x, y) = (a.1.as_f64().unwrap_or(-1.0), b.1.as_f64().unwrap_or(-1.0));
            y.total_cmp(&x).then_with(|| a.0.cmp(b.0))
        });
        println!("model {}: preference flip rate", model.id);
        println!("  {:<28} {:>7} {:>8}", "attribute", "chosen", "rejected");
        for (name, pfr) in rows {
            let other = rejected.get(name).map_or_else(|| "n/a".to_string(), |v| fmt_rate(v));
            println!("  {:<28} {:>7} {:>8}", name, fmt_rate(pfr), other);
        }
    }
    Ok(())
}

fn print_representatives(value: &Value, limit: usize) {
    for r in value.as_array().into_iter().flatten().take(limit) {
        println!(
            "  {:<24} score {:>6}",
            r["comparison_id"].as_str().unwrap_or_default(),
            r["score"].as_f64().map_or_else(|| "n/a".into(), |s| format!("{s:.3}"))
        );
    }
}

pub fn run(args: &RunArgs, kind: RunKind) -> Result<()> {
    let prepared = prepare(args, kind.command(), args.variant)?;
    if kind == RunKind::CompareModels && prepared.parts.models.len() < 2 {
        return Err(UsageError("compare-models needs at least two reward models".into()).into());
    }
    if kind != RunKind::Explain && args.generator != GeneratorKind::AttributeConditioned {
        return Err(UsageError(format!("{} needs the attribute generator", kind.command())).into());
    }
    if args.dry_run {
        print_dry_run(&[prepared]);
        return Ok(());
    }
    let (record, _) = run_one(prepared, args)?;
    match kind {
        RunKind::Explain => {}
        RunKind::Sensitivity => print_sensitivity(&record)?,
        RunKind::Representatives => {
            for model in &record.manifest.models {
                let reps = report_json(&record, &format!("{}/representatives.json", model_dir(&model.id)))?;
                println!("model {}: representative comparisons", model.id);
                print_representatives(&reps, 5);
            }
        }
        RunKind::CompareModels => {
            let compare = report_json(&record, "compare_models.json")?;
            for side in ["chosen", "rejected"] {
                let reps = &compare["representatives"][side];
                if let Some(e) = reps.get("error") {
                    return Err(AnalysisFailure(format!("{side} side: {e}")).into());
                }
                println!("{side} side: comparisons explained alike by both models");
                print_representatives(reps, 5);
            }
        }
    }
    Ok(())
}

pub fn ablate(args: &RunArgs) -> Result<()> {
    if args.generator != GeneratorKind::AttributeConditioned {
        return Err(UsageError("ablate sweeps prompt variants of the attribute generator".into()).into());
    }
    let prepared = PromptVariant::ALL
        .iter()
        .map(|v| prepare(args, "ablate", *v))
        .collect::<Result<Vec<_>>>()?;
    if args.dry_run {
        print_dry_run(&prepared);
        return Ok(());
    }
    let mut records = Vec::new();
    let mut transport = 0;
    for p in prepared {
        match run_one(p, args) {
            Ok(r) => records.push(r),
            Err(e) => match e.downcast::<TransportFailures>() {
                Ok(t) => transport += t.count,
                Err(e) => return Err(e),
            },
        }
    }
    if transport > 0 {
        return Err(TransportFailures {
            count: transport,
            run: args.out.display().to_string(),
        }
        .into());
    }
    let gateway = args.endpoints.gateway()?;
    let mut coverage = String::new();
    let mut distance = String::new();
    for (i, model) in records[0].0.manifest.models.iter().enumerate() {
        let mut rows = Vec::new();
        for (record, _) in &records {
            let embedder = GatewayEmbedder {
                gateway: &gateway,
                config: &record.manifest.embedding,
            };
            rows.push(table_row(&record.manifest, &record.seeds, &model.id, &embedder)?);
        }
        let (c, d) = emit_tables(&rows);
        if i > 0 {
            coverage.push('\n');
            distance.push('\n');
        }
        writeln!(coverage, "# {}", model.id)?;
        writeln!(distance, "# {}", model.id)?;
        coverage.push_str(&c);
        distance.push_str(&d);
    }
    let dir = args.out.join(format!("ablation-{}", records[0].0.manifest.run_id));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("coverage.csv"), &coverage)?;
    std::fs::write(dir.join("distance.csv"), &distance)?;
    let runs: Vec<Value> = records
        .iter()
        .map(|(r, d)| json!({ "variant": r.manifest.options.variant.as_str(), "run": d }))
        .collect();
    std::fs::write(dir.join("runs.json"), serde_json::to_string_pretty(&runs)? + "\n")?;
    println!("ablation: {}", dir.display());
    print!("{coverage}");
    print!("{distance}");
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PairRecord {
    prompt: String,
    original: String,
    perturbed: String,
}

#[derive(Debug, Serialize)]
struct WinrateResult {
    model: String,
    pairs: usize,
    wins: usize,
    ties: usize,
    win_rate: f64,
}

pub fn winrate(args: &WinrateArgs) -> Result<()> {
    let endpoints = args.endpoints.resolve()?;
    let text = std::fs::read_to_string(&args.pairs).map_err(|e| UsageError(format!("{}: {e}", args.pairs.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: PairRecord = serde_json::from_str(line)
            .map_err(|e| UsageError(format!("{} line {}: {e}", args.pairs.display(), i + 1)))?;
        pairs.push(p);
    }
    if pairs.is_empty() {
        return Err(UsageError(format!("{} holds no pairs", args.pairs.display())).into());
    }
    let gateway = args.endpoints.gateway()?;
    let mut results = Vec::new();
    for model in &endpoints.models {
        let scored = bounded_map(&pairs, args.parallelism.max(1), |p| {
            let s = |text: &str| gateway.score(&model.endpoint, model.scalarisation.as_ref(), &p.prompt, text);
            Ok::<_, rmcontrast::error::GatewayError>((s(&p.original)?.scalar, s(&p.perturbed)?.scalar))
        });
        let scored = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
        let rate = win_rate(&scored).map_err(|e| AnalysisFailure(e.to_string()))?;
        let wins = scored.iter().filter(|(o, p)| p > o).count();
        let ties = scored.iter().filter(|(o, p)| p == o).count();
        println!("{}: win rate {rate:.2} ({wins}/{} perturbed responses preferred, {ties} ties)", model.id, scored.len());
        results.push(WinrateResult {
            model: model.id.clone(),
            pairs: scored.len(),
            wins,
            ties,
            win_rate: rate,
        });
    }
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&results)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn discover(args: &DiscoverArgs) -> Result<()> {
    let endpoints = args.endpoints.resolve()?;
    let samples = args.dataset.load()?;
    let templates = match &args.templates {
        Some(dir) => TemplateSet::with_overrides(dir).map_err(|e| UsageError(e.to_string()))?,
        None => TemplateSet::default(),
    };
    let gateway = args.endpoints.gateway()?;
    let model = &endpoints.models[0];
    let mut seen = std::collections::BTreeSet::new();
    let comparisons: Vec<_> = samples
        .samples
        .iter()
        .flat_map(|(_, s)| s.iter())
        .filter(|c| seen.insert(c.id.clone()))
        .cloned()
        .collect();
    let scored = bounded_map(&comparisons, args.parallelism.max(1), |c| {
        let s = |text: &str| gateway.score(&model.endpoint, model.scalarisation.as_ref(), &c.prompt, text);
        let (a, b) = (s(&c.chosen)?.scalar, s(&c.rejected)?.scalar);
        Ok::<_, rmcontrast::error::Error>(match orient_comparison(c, a, b) {
            Ok((oriented, swapped)) => {
                let (hi, lo) = if swapped { (b, a) } else { (a, b) };
                Some((oriented, OriginalRewards::new(hi, lo)))
            }
            Err(_) => None,
        })
    });
    let mut inputs = Vec::new();
    for r in scored {
        match r {
            Ok(Some(x)) => inputs.push(x),
            Ok(None) => {}
            Err(e) => warn!("skipping comparison: {e}"),
        }
    }
    if inputs.is_empty() {
        bail!(rmcontrast::error::Error::Gateway(rmcontrast::error::GatewayError::Transport {
            url: model.endpoint.base_url.clone(),
            attempts: 0,
            message: "no comparison could be scored".into(),
        }));
    }
    let generator = Generator {
        gateway: &gateway,
        chat: &endpoints.chat,
        templates: &templates,
        fixture_markers: args.test_mode,
        parallelism: args.parallelism.max(1),
    };
    let (ranked, failures) = generator
        .discover_attributes(&inputs)
        .map_err(rmcontrast::error::Error::from)?;
    if !failures.is_empty() {
        warn!(failures = failures.len(), "some discovery calls failed");
    }
    let shown = args.top.unwrap_or(ranked.len()).min(ranked.len());
    for (name, count) in &ranked[..shown] {
        println!("{count:>5}  {name}");
    }
    if let Some(out) = &args.out {
        let value: Vec<Value> = ranked.iter().map(|(n, c)| json!({ "attribute": n, "count": c })).collect();
        std::fs::write(out, serde_json::to_string_pretty(&value)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let record = read_record(&args.run)?;
    let cache = ResponseCache::on_disk(&args.cache)?;
    let gateway = if args.online {
        Gateway::http(cache)
    } else {
        Gateway::offline(cache)
    };
    let embedder = GatewayEmbedder {
        gateway: &gateway,
        config: &record.manifest.embedding,
    };
    let reports = build_reports(&record.manifest, &record.seeds, &embedder)?;
    write_reports(&args.run, &reports)?;
    for name in reports.keys() {
        println!("{}", args.run.join(rmcontrast::runstore::REPORTS_DIR).join(name).display());
    }
    Ok(())
}

pub fn replay_run(args: &ReplayArgs) -> Result<()> {
    let gateway = Gateway::offline(ResponseCache::on_disk(&args.cache)?);
    let record = replay(&args.run, &gateway)?;
    println!(
        "replay of {} matches: {} seed(s), {} report file(s), 0 network requests",
        args.run.display(),
        record.seeds.len(),
        record.reports.len()
    );
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

pub fn mock_serve(args: &MockServeArgs) -> Result<()> {
    let canned = match &args.canned {
        Some(path) => CannedPerturbationSpec::from_json_file(path).map_err(UsageError)?,
        None => CannedPerturbationSpec::default(),
    };
    let mut services = MockServices::new(ToyRewardSpec::default(), canned);
    for spec in &args.rewards {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| UsageError(format!("bad --reward `{spec}`; expected name=spec.json")))?;
        let toy: ToyRewardSpec = read_json(Path::new(path))?;
        toy.validate().map_err(UsageError)?;
        services = services.with_reward_model(name, toy);
    }
    let server = MockServer::start(Arc::new(services), &args.addr, args.threads)
        .map_err(|e| UsageError(e.to_string()))?;
    let url = server.url();
    if let Some(path) = &args.url_file {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &url)?;
        std::fs::rename(&tmp, path)?;
    }
    println!("serving mock endpoints at {url}");
    server.join();
    Ok(())
}
