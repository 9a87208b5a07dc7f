use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::time::Instant;

use infograph::infotheory::{distance_trace, entropy_trace, mi_trace, DistanceTrace, EntropyTrace, MITrace};
use infograph::interaction::{detect, Detection};
use infograph::metrics::{gra, load_trials, trial_report, tsa, tsa_one_to_one, TrialReport};
use infograph::planner::{emit_plan, ordering_accuracy, plan_coverage, verification_correctness, BehaviorTree, Subtask};
use infograph::scenegraph::{build_timeline, GraphTimeline};
use infograph::segmentation::{boundaries, segment, Segment};
use infograph::synthgen::{generate_with, jitter, templates, DemoScript, GroundTruth};
use infograph::{AnalysisConfig, Demonstration};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, ConfigArgs, EvalArgs, SynthArgs, Template};
use crate::manifest::{now, RunManifest};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load_config(args: &ConfigArgs) -> Result<AnalysisConfig> {
    let base = match &args.config {
        Some(path) => AnalysisConfig::from_file(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => AnalysisConfig::default(),
    };
    let cfg = args.overlay(base);
    cfg.validate()?;
    Ok(cfg)
}

fn read_bytes(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| data_err(path, e))?;
    manifest.add_input(path, &bytes);
    Ok(bytes)
}

fn read_demo(path: &Path, manifest: &mut RunManifest) -> Result<Demonstration> {
    let bytes = read_bytes(path, manifest)?;
    let demo = Demonstration::load(&bytes[..]).map_err(|e| data_err(path, e))?;
    let uniform = demo.ensure_uniform().map_err(|e| data_err(path, e))?.into_owned();
    Ok(uniform)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| data_err(path, e))
}

/// Writes to `out` with a manifest beside it, or to stdout.
fn emit(out: Option<&Path>, text: &str, manifest: RunManifest) -> Result<()> {
    match out {
        Some(path) => {
            write_file(path, text)?;
            write_file(&path.with_extension("manifest.json"), &to_json(&manifest.finish()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Pipeline {
    detection: Detection,
    timeline: GraphTimeline,
    segments: Vec<Segment>,
    plan: BehaviorTree,
}

fn pipeline(demo: &Demonstration, cfg: &AnalysisConfig) -> Result<Pipeline> {
    let detection = detect(demo, cfg)?;
    let timeline = build_timeline(demo, &detection.events);
    let hands: Vec<&str> = demo.hands().map(|h| h.id.as_str()).collect();
    let segments = segment(&timeline, &detection.events, &hands);
    let plan = emit_plan(&timeline, &segments, demo, cfg);
    Ok(Pipeline { detection, timeline, segments, plan })
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    let seed = cli.config.seed;
    let mut manifest = RunManifest::new(&cfg, seed, now());
    match cli.command {
        Command::Analyze { demo, out, csv } => analyze(&demo, &out, csv, &cfg, manifest),
        Command::Graph { demo, out, keyframes_only } => {
            let d = read_demo(&demo, &mut manifest)?;
            let mut timeline = pipeline(&d, &cfg)?.timeline;
            if keyframes_only {
                let graphs = timeline.keyframe_graphs().cloned().collect();
                timeline = GraphTimeline { graphs, keyframes: timeline.keyframes };
            }
            emit(out.as_deref(), &to_json(&timeline), manifest)
        }
        Command::Segment { demo, out } => {
            let d = read_demo(&demo, &mut manifest)?;
            let segments = pipeline(&d, &cfg)?.segments;
            let doc = SegmentDocument { boundaries: boundaries(&segments), segments };
            emit(out.as_deref(), &to_json(&doc), manifest)
        }
        Command::Plan { demo, out } => {
            let d = read_demo(&demo, &mut manifest)?;
            let mut text = pipeline(&d, &cfg)?.plan.to_json();
            text.push('\n');
            emit(out.as_deref(), &text, manifest)
        }
        Command::Eval(args) => eval(&args, &cfg, manifest),
        Command::Synth(args) => synth(&args, &cfg, seed, manifest),
    }
}

#[derive(Serialize)]
struct SegmentDocument {
    segments: Vec<Segment>,
    boundaries: Vec<f64>,
}

#[derive(Serialize)]
struct TraceBundle {
    entropy: Vec<EntropyTrace>,
    mutual_information: Vec<MITrace>,
    distance: Vec<DistanceTrace>,
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .join("__")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn analyze(path: &Path, out: &Path, csv: bool, cfg: &AnalysisConfig, mut manifest: RunManifest) -> Result<()> {
    let demo = read_demo(path, &mut manifest)?;
    let p = pipeline(&demo, cfg)?;

    let mut entropy = Vec::new();
    for track in &demo.tracks {
        for &axis in cfg.axes() {
            entropy.push(entropy_trace(track, axis, demo.rate, cfg).map_err(|e| data_err(path, e))?);
        }
    }
    let hands: Vec<_> = demo.hands().collect();
    let objects: Vec<_> = demo.objects().collect();
    let mut mutual_information = Vec::new();
    let mut distance = Vec::new();
    for h in &hands {
        for o in &objects {
            mutual_information.push(mi_trace(h, o, demo.rate, cfg));
            distance.push(distance_trace(h, o, demo.rate, cfg));
        }
    }
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            distance.push(distance_trace(a, b, demo.rate, cfg));
        }
    }
    let bundle = TraceBundle { entropy, mutual_information, distance };

    write_file(&out.join("events.json"), &to_json(&p.detection.events))?;
    write_file(&out.join("traces.json"), &to_json(&bundle))?;
    if csv {
        let dir = out.join("csv");
        for t in &bundle.entropy {
            let name = format!("entropy_{}.csv", file_stem(&[&t.entity_id, &format!("{:?}", t.axis).to_lowercase()]));
            write_file(&dir.join(name), &t.to_csv())?;
        }
        for t in &bundle.mutual_information {
            write_file(&dir.join(format!("mi_{}.csv", file_stem(&[&t.pair.0, &t.pair.1]))), &t.to_csv())?;
        }
        for t in &bundle.distance {
            write_file(&dir.join(format!("distance_{}.csv", file_stem(&[&t.pair.0, &t.pair.1]))), &t.to_csv())?;
        }
    }
    write_file(&out.join("manifest.json"), &to_json(&manifest.finish()))
}

/// The parts of a prediction or ground-truth document that evaluation reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Evaluable {
    timeline: GraphTimeline,
    boundaries: Vec<f64>,
    #[serde(default)]
    subtasks: Vec<Subtask>,
}

/// Expands directories into their files with the given suffix, sorted by name.
fn expand(paths: &[PathBuf], suffix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| data_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)))
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_evaluable(path: &Path, cfg: &AnalysisConfig, manifest: &mut RunManifest) -> Result<Evaluable> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let demo = read_demo(path, manifest)?;
        let p = pipeline(&demo, cfg)?;
        return Ok(Evaluable { boundaries: boundaries(&p.segments), subtasks: p.plan.subtasks(), timeline: p.timeline });
    }
    let bytes = read_bytes(path, manifest)?;
    serde_json::from_slice(&bytes).map_err(|e| data_err(path, e))
}

#[derive(Debug, Serialize)]
struct PairScores {
    pred: String,
    gt: String,
    gra: f64,
    tsa: Option<f64>,
    pc: Option<f64>,
    oa: Option<f64>,
}

#[derive(Debug, Default, Serialize)]
struct Aggregate {
    gra: Option<f64>,
    tsa: Option<f64>,
    pc: Option<f64>,
    oa: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    pairs: Vec<PairScores>,
    aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    vc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<TrialReport>,
}

#[derive(Deserialize)]
struct VerificationRecord {
    gt: bool,
    pred: bool,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn score_pair(pred: &Evaluable, gt: &Evaluable, args: &EvalArgs, cfg: &AnalysisConfig) -> infograph::Result<(f64, Option<f64>, Option<f64>, Option<f64>)> {
    let g = gra(&pred.timeline, &gt.timeline, cfg)?;
    let t = if gt.boundaries.is_empty() {
        None
    } else if args.tsa_one_to_one {
        Some(tsa_one_to_one(&pred.boundaries, &gt.boundaries, cfg.tsa_tol)?)
    } else {
        Some(tsa(&pred.boundaries, &gt.boundaries, cfg.tsa_tol)?)
    };
    let pc = plan_coverage(&gt.subtasks, &pred.subtasks).ok();
    let oa = ordering_accuracy(&gt.subtasks, &pred.subtasks).ok();
    Ok((g, t, pc, oa))
}

fn eval(args: &EvalArgs, cfg: &AnalysisConfig, mut manifest: RunManifest) -> Result<()> {
    let started = Instant::now();
    let preds = expand(&args.pred, ".jsonl")?;
    let gts = expand(&args.gt, ".truth.json")?;
    if preds.len() != gts.len() {
        return Err(CliError::Data(format!("{} prediction inputs but {} ground-truth inputs", preds.len(), gts.len())));
    }
    if preds.is_empty() && args.trials.is_none() && args.verification.is_none() {
        return Err(CliError::Usage("nothing to evaluate: give --pred/--gt, --trials or --verification".into()));
    }

    let scored: Vec<Result<(PairScores, RunManifest)>> = preds
        .par_iter()
        .zip(gts.par_iter())
        .map(|(p, g)| {
            let mut m = RunManifest::new(cfg, None, String::new());
            let pred = load_evaluable(p, cfg, &mut m)?;
            let gt = load_evaluable(g, cfg, &mut m)?;
            let (gra, tsa, pc, oa) = score_pair(&pred, &gt, args, cfg).map_err(|e| data_err(g, e))?;
            let scores = PairScores { pred: p.display().to_string(), gt: g.display().to_string(), gra, tsa, pc, oa };
            Ok((scores, m))
        })
        .collect();
    let mut pairs = Vec::new();
    for r in scored {
        let (scores, m) = r?;
        manifest.inputs.extend(m.inputs);
        pairs.push(scores);
    }
    let aggregate = Aggregate {
        gra: mean(pairs.iter().map(|p| Some(p.gra))),
        tsa: mean(pairs.iter().map(|p| p.tsa)),
        pc: mean(pairs.iter().map(|p| p.pc)),
        oa: mean(pairs.iter().map(|p| p.oa)),
    };

    let trials = match &args.trials {
        Some(path) => {
            let bytes = read_bytes(path, &mut manifest)?;
            let records = load_trials(&bytes[..]).map_err(|e| data_err(path, e))?;
            Some(trial_report(&records, args.lambda).map_err(|e| data_err(path, e))?)
        }
        None => None,
    };
    let vc = match &args.verification {
        Some(path) => {
            let bytes = read_bytes(path, &mut manifest)?;
            let mut gt_flags = Vec::new();
            let mut pred_flags = Vec::new();
            for (i, line) in bytes.lines().enumerate() {
                let line = line.map_err(|e| data_err(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: VerificationRecord =
                    serde_json::from_str(&line).map_err(|e| data_err(path, format!("line {}: {e}", i + 1)))?;
                gt_flags.push(r.gt);
                pred_flags.push(r.pred);
            }
            Some(verification_correctness(&gt_flags, &pred_flags).map_err(|e| data_err(path, e))?)
        }
        None => None,
    };

    let report = EvalReport { pairs, aggregate, vc, trials };
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "evaluated {} pairs in {:.3} s: GRA {} TSA {} PC {} OA {}",
        report.pairs.len(),
        started.elapsed().as_secs_f64(),
        fmt(report.aggregate.gra),
        fmt(report.aggregate.tsa),
        fmt(report.aggregate.pc),
        fmt(report.aggregate.oa)
    );
    emit(args.out.as_deref(), &to_json(&report), manifest)?;

    if args.r#assert {
        let mut failures = Vec::new();
        let mut check = |name: &str, value: Option<f64>, min: Option<f64>| {
            if let (Some(v), Some(m)) = (value, min) {
                if v < m {
                    failures.push(format!("{name} {v:.4} < {m}"));
                }
            }
        };
        let has_pairs = !report.pairs.is_empty();
        check("GRA", report.aggregate.gra, has_pairs.then_some(args.min_gra));
        check("TSA", report.aggregate.tsa, has_pairs.then_some(args.min_tsa));
        check("PC", report.aggregate.pc, args.min_pc);
        check("OA", report.aggregate.oa, args.min_oa);
        check("VC", report.vc, args.min_vc);
        if !failures.is_empty() {
            return Err(CliError::Assert(failures));
        }
    }
    Ok(())
}

fn template(t: Template) -> DemoScript {
    match t {
        Template::Single => templates::single_pick_place(),
        Template::Flyby => templates::with_flyby(&templates::single_pick_place()),
        Template::Relocation => templates::relocation(),
        Template::Stirring => templates::stirring(),
        Template::LetterR => templates::letter_r(),
    }
}

fn write_generated(out: &Path, stem: &str, script: &DemoScript, demo: &Demonstration, truth: &GroundTruth) -> Result<()> {
    write_file(&out.join(format!("{stem}.jsonl")), &demo.to_jsonl_string())?;
    write_file(&out.join(format!("{stem}.truth.json")), &to_json(truth))?;
    write_file(&out.join(format!("{stem}.script.json")), &to_json(script))
}

fn synth(args: &SynthArgs, cfg: &AnalysisConfig, seed: Option<u64>, mut manifest: RunManifest) -> Result<()> {
    let mut script = match (&args.script, args.template) {
        (Some(path), _) => {
            let bytes = read_bytes(path, &mut manifest)?;
            serde_json::from_slice::<DemoScript>(&bytes).map_err(|e| data_err(path, e))?
        }
        (None, Some(t)) => template(t),
        (None, None) => return Err(CliError::Usage("give a script file or --template".into())),
    };
    if let Some(sigma) = args.noise_sigma {
        script.noise_sigma = sigma;
    }
    match args.count {
        0 => return Err(CliError::Usage("--count must be at least 1".into())),
        1 => {
            if let Some(s) = seed {
                script.seed = s;
            }
            manifest.seed = Some(script.seed);
            let (demo, truth) = generate_with(&script, cfg)?;
            write_generated(&args.out, "demo", &script, &demo, &truth)?;
        }
        n => {
            let corpus_seed = seed.unwrap_or(script.seed);
            manifest.seed = Some(corpus_seed);
            let generated: Vec<_> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let s = jitter(&script, corpus_seed, i);
                    generate_with(&s, cfg).map(|(d, t)| (s, d, t))
                })
                .collect::<infograph::Result<_>>()?;
            for (i, (s, d, t)) in generated.iter().enumerate() {
                write_generated(&args.out, &format!("demo_{i:03}"), s, d, t)?;
            }
        }
    }
    write_file(&args.out.join("manifest.json"), &to_json(&manifest.finish()))
}
