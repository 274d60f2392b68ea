//! `mlsad`: speech activity detection from multi-lingual posteriors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use mlsad::config::{FusionMethod, PipelineConfig};
use mlsad::formats;
use mlsad::fsutil::{find_files, write_atomic};
use mlsad::pipeline;
use mlsad_core::scorer::score_corpus;
use mlsad_core::toytrain::{generate_corpus, run_training, Split};
use mlsad_core::{DecisionTrack, ScoreReport, Timeline};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "mlsad", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Frame grid in seconds that tracks are resampled to.
    #[arg(long, global = true)]
    frame_step: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus: config, references and scored regions.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the toy multi-task acoustic model on the synthetic corpus.
    TrainToy {
        /// Model file (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write per-language posteriors of a synthetic split as SPM files.
    Infer {
        /// Toy model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "eval")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Speech/non-speech decisions from SPM files.
    Decide {
        /// SPM files or directories searched recursively.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit the logistic-regression fusion on development tracks.
    TrainLr {
        /// Directory of `<language>/<utterance>.track` files.
        tracks: PathBuf,
        /// Reference RTTM.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fuse language tracks, smooth, and write segments.
    Fuse {
        /// Directory of `<language>/<utterance>.track` files.
        tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// mv, lr or single:<language_id>.
        #[arg(long)]
        method: Option<FusionMethod>,
        /// LR fusion model (JSON).
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// DetER / FA / Miss / HTER of a hypothesis RTTM.
    Score {
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        uem: Option<PathBuf>,
        #[arg(long)]
        collar: Option<f64>,
        /// Also write the full report as JSON (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// A command that ran to completion but failed on some inputs.
#[derive(Debug)]
struct PartialFailure {
    failed: usize,
    total: usize,
}

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} inputs failed", self.failed, self.total)
    }
}

impl std::error::Error for PartialFailure {}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    if let Some(step) = common.frame_step {
        cfg.frame_step = step;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// Tallies per-input results, logging each failure.
fn finish<T>(results: &[(String, anyhow::Result<T>)]) -> Result<()> {
    let failed = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| (name, e)))
        .inspect(|(name, e)| log::error!("{name}: {e:#}"))
        .count();
    if failed > 0 {
        return Err(PartialFailure {
            failed,
            total: results.len(),
        }
        .into());
    }
    Ok(())
}

fn cmd_synth(out: &Path, seed: Option<u64>, common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = seed {
        cfg.synth.seed = s;
    }
    if let Some(step) = common.frame_step {
        cfg.synth.frame_step = step;
    }
    cfg.languages = cfg.synth.language_specs()?;
    cfg.validate()?;
    let corpus = pool(cfg.jobs)?.install(|| generate_corpus(&cfg.synth))?;
    for split in [Split::Dev, Split::Eval] {
        let utts = corpus.split(split);
        let refs = pipeline::references(utts);
        let regions = pipeline::full_regions(utts, cfg.synth.frame_step);
        formats::write_rttm(&out.join(format!("{}.rttm", split.name())), refs.values())?;
        formats::write_uem(&out.join(format!("{}.uem", split.name())), regions.values())?;
    }
    write_atomic(&out.join("pipeline.toml"), cfg.to_toml().as_bytes())?;
    info!(
        "{} train, {} dev, {} eval utterances in {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.eval.len(),
        out.display()
    );
    Ok(())
}

fn cmd_train_toy(out: &Path, log_path: Option<&Path>, seed: Option<u64>, common: &Common) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = seed {
        cfg.toy.seed = s;
    }
    let corpus = generate_corpus(&cfg.synth)?;
    let (params, log) = run_training(&corpus, &cfg.toy)?;
    for (l, id) in log.language_ids.iter().enumerate() {
        let first = log.losses.first().map_or(f64::NAN, |e| e[l]);
        let last = log.losses.last().map_or(f64::NAN, |e| e[l]);
        info!("{id}: loss {first:.4} -> {last:.4}");
    }
    formats::write_toy_model(out, &params, &log.language_ids)?;
    if let Some(p) = log_path {
        formats::write_training_log(p, &log)?;
    }
    Ok(())
}

fn cmd_infer(model: &Path, split: Split, out: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    if split == Split::Train {
        bail!("infer works on the dev or eval split");
    }
    let (params, ids) = formats::read_toy_model(model)?;
    let corpus = generate_corpus(&cfg.synth)?;
    let corpus_ids: Vec<String> = corpus.languages.iter().map(|l| l.language_id.clone()).collect();
    if ids != corpus_ids {
        bail!("model languages {ids:?} do not match corpus languages {corpus_ids:?}");
    }
    let results: Vec<(String, anyhow::Result<()>)> = pool(cfg.jobs)?.install(|| {
        let all = pipeline::infer_split(&params, &corpus, split)?;
        Ok::<_, anyhow::Error>(
            all.par_iter()
                .flatten()
                .map(|m| {
                    let spec = cfg
                        .language(m.language_id())
                        .with_context(|| format!("language {} not configured", m.language_id()));
                    let r = spec.and_then(|spec| {
                        let path = out.join(m.language_id()).join(format!("{}.spm", m.utterance_id()));
                        let ns: Vec<usize> = spec.nonspeech_pdf_ids.iter().copied().collect();
                        Ok(formats::write_spm(&path, m, &ns)?)
                    });
                    (format!("{}/{}", m.language_id(), m.utterance_id()), r)
                })
                .collect(),
        )
    })?;
    info!("{} posterior matrices written to {}", results.len(), out.display());
    finish(&results)
}

fn cmd_decide(inputs: &[PathBuf], out: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let mut files = Vec::new();
    for input in inputs {
        files.extend(find_files(input, "spm").with_context(|| input.display().to_string())?);
    }
    if files.is_empty() {
        warn!("0 files");
        return Ok(());
    }
    let results: Vec<(String, anyhow::Result<()>)> = pool(cfg.jobs)?.install(|| {
        files
            .par_iter()
            .map(|path| {
                let r = (|| {
                    let (m, meta) = formats::read_spm(path)?;
                    let spec = cfg
                        .language(&meta.language_id)
                        .with_context(|| format!("unknown language `{}`", meta.language_id))?;
                    let track = pipeline::decide(&m, spec)?;
                    let dest = out.join(&meta.language_id).join(format!("{}.track", meta.utterance_id));
                    formats::write_track(&dest, &track)?;
                    Ok(())
                })();
                (path.display().to_string(), r)
            })
            .collect()
    });
    info!("{} files decided", results.iter().filter(|r| r.1.is_ok()).count());
    finish(&results)
}

/// Reads `<dir>/<language>/<utterance>.track` files grouped by utterance.
fn read_track_dir(
    dir: &Path,
) -> Result<(BTreeMap<String, Vec<DecisionTrack>>, Vec<(String, anyhow::Result<()>)>)> {
    let files = find_files(dir, "track").with_context(|| dir.display().to_string())?;
    let mut groups: BTreeMap<String, Vec<DecisionTrack>> = BTreeMap::new();
    let mut failures = Vec::new();
    for path in files {
        let name = |p: Option<&std::ffi::OsStr>| p.and_then(|s| s.to_str()).map(str::to_string);
        let lang = name(path.parent().and_then(Path::file_name));
        let utt = name(path.file_stem());
        let (Some(lang), Some(utt)) = (lang, utt) else {
            failures.push((path.display().to_string(), Err(anyhow::anyhow!("unusable file name"))));
            continue;
        };
        match formats::read_track(&path, &utt, &lang) {
            Ok(t) => groups.entry(utt).or_default().push(t),
            Err(e) => failures.push((path.display().to_string(), Err(e.into()))),
        }
    }
    Ok((groups, failures))
}

fn cmd_train_lr(tracks: &Path, reference: &Path, out: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let refs = formats::read_rttm(reference)?;
    let (groups, failures) = read_track_dir(tracks)?;
    finish(&failures)?;
    if groups.is_empty() {
        bail!("no tracks under {}", tracks.display());
    }
    let model = pipeline::train_lr(&groups, &refs, &cfg)?;
    let fused: BTreeMap<String, DecisionTrack> = groups
        .iter()
        .map(|(utt, set)| {
            let f = pipeline::fuse(set, &FusionMethod::Lr, Some(&model), &cfg.languages, cfg.frame_step)?;
            Ok((utt.clone(), f))
        })
        .collect::<Result<_>>()?;
    let (hyp, lab): (Vec<bool>, Vec<bool>) = fused
        .iter()
        .map(|(utt, f)| Ok((f.clone(), pipeline::reference_track(refs.get(utt), f)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flat_map(|(f, r)| f.decisions.into_iter().zip(r.decisions))
        .unzip();
    let hter = mlsad_core::fusion::compute_hter(
        &DecisionTrack::new("dev", "lr", cfg.frame_step, hyp)?,
        &DecisionTrack::new("dev", "ref", cfg.frame_step, lab)?,
    )?;
    formats::write_lr_model(out, &model)?;
    println!("dev HTER {hter:.2}%  threshold {}", model.threshold);
    Ok(())
}

fn cmd_fuse(
    tracks: &Path,
    out: &Path,
    method: Option<FusionMethod>,
    model: Option<PathBuf>,
    common: &Common,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(m) = method {
        cfg.fusion.method = m;
    }
    if model.is_some() {
        cfg.fusion.model = model;
    }
    cfg.validate()?;
    let lr = match (&cfg.fusion.method, &cfg.fusion.model) {
        (FusionMethod::Lr, None) => return Err(Usage("--method lr needs --model".into()).into()),
        (FusionMethod::Lr, Some(p)) => Some(formats::read_lr_model(p)?),
        _ => None,
    };
    let (groups, mut results) = read_track_dir(tracks)?;
    if groups.is_empty() && results.is_empty() {
        warn!("0 files");
    }
    let fused: Vec<(String, anyhow::Result<Timeline>)> = pool(cfg.jobs)?.install(|| {
        groups
            .par_iter()
            .map(|(utt, set)| {
                let r = (|| {
                    let f = pipeline::fuse(set, &cfg.fusion.method, lr.as_ref(), &cfg.languages, cfg.frame_step)?;
                    formats::write_track(&out.join(format!("{utt}.track")), &f)?;
                    Ok(pipeline::segment(&f, &cfg.smoothing)?)
                })();
                (utt.clone(), r)
            })
            .collect()
    });
    let timelines: Vec<&Timeline> = fused.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    formats::write_rttm(&out.join("hyp.rttm"), timelines)?;
    info!("{} utterances fused with {}", fused.len(), cfg.fusion.method);
    results.extend(fused.into_iter().map(|(u, r)| (u, r.map(drop))));
    finish(&results)
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.1}")
}

fn report_table(r: &ScoreReport) -> String {
    let hter = r.hter_pct.map_or_else(|| "-".to_string(), fmt_pct);
    format!(
        "{:>7} {:>7} {:>7} {:>7}\n{:>7} {:>7} {:>7} {:>7}\n",
        "DetER",
        "FA",
        "Miss",
        "HTER",
        fmt_pct(r.deter_pct),
        fmt_pct(r.fa_pct),
        fmt_pct(r.miss_pct),
        hter
    )
}

fn cmd_score(
    hyp: &Path,
    reference: &Path,
    uem: Option<PathBuf>,
    collar: Option<f64>,
    json: Option<&Path>,
    common: &Common,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(c) = collar {
        cfg.scoring.collar = c;
    }
    if uem.is_some() {
        cfg.scoring.uem = uem;
    }
    cfg.validate()?;
    let refs = formats::read_rttm(reference)?;
    let hyps = formats::read_rttm(hyp)?;
    let regions = cfg.scoring.uem.as_deref().map(formats::read_uem).transpose()?;
    let report = score_corpus(&hyps, &refs, &cfg.scoring_config(regions))?;
    print!("{}", report_table(&report));
    if let Some(p) = json {
        let text = serde_json::to_string_pretty(&report)? + "\n";
        if p == Path::new("-") {
            print!("{text}");
        } else {
            write_atomic(p, text.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, seed, common } => cmd_synth(&out, seed, &common),
        Command::TrainToy {
            out,
            log,
            seed,
            common,
        } => cmd_train_toy(&out, log.as_deref(), seed, &common),
        Command::Infer {
            model,
            split,
            out,
            common,
        } => cmd_infer(&model, split, &out, &common),
        Command::Decide { inputs, out, common } => cmd_decide(&inputs, &out, &common),
        Command::TrainLr {
            tracks,
            reference,
            out,
            common,
        } => cmd_train_lr(&tracks, &reference, &out, &common),
        Command::Fuse {
            tracks,
            out,
            method,
            model,
            common,
        } => cmd_fuse(&tracks, &out, method, model, &common),
        Command::Score {
            hyp,
            reference,
            uem,
            collar,
            json,
            common,
        } => cmd_score(&hyp, &reference, uem, collar, json.as_deref(), &common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
