//! Command-line front end: corpus generation, preparation, training,
//! synthesis, evaluation and report rendering.
//!
//! Every option may also come from a `key=value` file given with
//! `--config`; flags win over the file, the file over built-in defaults.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::audio::{read_wav_canonical, write_wav, AudioBuffer, CANONICAL_RATE};
use crate::dataset::{
    generate_corpus, load_sources, prepare, synth_loop, write_prepared, LoopSpec, PrepareConfig, PreparedManifest,
    Split, CORPUS_MANIFEST, NORM_STATS_FILE, TARGET_BPM, TEST_FRACTION,
};
use crate::error::Error;
use crate::evaluation::{
    coherence_sweep, coherence_table, feature_table, frechet_report, griffin_lim_baseline, quality_table,
    synthesize_all, ModelSynthesizer, Table, GRIFFIN_LIM_ROW, SWEEP_LEVELS,
};
use crate::features::{read_feature_file, ConditioningSet, NormStats};
use crate::model::{load_checkpoint, save_checkpoint, ModelVariant, SEGMENT_LEN};
use crate::train::{append_log, evaluate_model, load_examples, TrainConfig, Trainer, DEFAULT_BATCH};

/// Caps the worker threads of every parallel stage.
pub const THREADS_ENV: &str = "DRUMLOOP_THREADS";
pub const LOCK_FILE: &str = ".drumloop.lock";
pub const LOSS_LOG: &str = "loss.csv";
pub const EVAL_LOG: &str = "eval.csv";
pub const LATEST_CHECKPOINT: &str = "latest.lfw";
pub const MODEL_MANIFEST: &str = "model.txt";
pub const DEFAULT_GRIFFIN_LIM_ITERATIONS: usize = 60;
pub const DEFAULT_EVAL_LOOPS: usize = 16;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            status: Status::Usage,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            status: Status::Data,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NonFinite { .. } => Status::Numeric,
            _ => Status::Data,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "drumloop", version, about = "Conditional drum-loop synthesis")]
pub struct Cli {
    /// key=value file supplying defaults for any option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic loop corpus with a manifest.
    GenCorpus(GenCorpusArgs),
    /// Stretch, segment and split a corpus and extract conditioning.
    Prepare(PrepareArgs),
    /// Train a model on a prepared directory.
    Train(TrainArgs),
    /// Render one segment from a checkpoint.
    Synth(SynthArgs),
    /// Quality and coherence of one or more checkpoints on the test split.
    Eval(EvalArgs),
    /// Print the tables written by `eval`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// Output directory [key: corpus].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of loops [key: count, default 64].
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Corpus directory holding the loop manifest [key: corpus].
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory for segments and features [key: workdir].
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared directory [key: workdir].
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Checkpoint directory [key: checkpoints, default <workdir>/checkpoints/<variant>].
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// MULTI, MULTI_NOENV, WAV, STFT or REC.
    #[arg(long)]
    pub variant: Option<ModelVariant>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Total step count to reach.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Continue from the latest checkpoint in the checkpoint directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Conditioning from a prepared feature file.
    #[arg(long, group = "source")]
    pub features: Option<PathBuf>,
    /// Conditioning extracted from a reference recording.
    #[arg(long, group = "source")]
    pub reference: Option<PathBuf>,
    /// Conditioning extracted from a rendered loop pattern (JSON loop spec).
    #[arg(long, group = "source")]
    pub pattern: Option<PathBuf>,
    /// Take HPCP and timbre from this feature file or WAV instead.
    #[arg(long)]
    pub globals_from: Option<PathBuf>,
    /// Normalization statistics for WAV and pattern sources [key: norm_stats,
    /// default <workdir>/norm_stats.txt].
    #[arg(long)]
    pub norm_stats: Option<PathBuf>,
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub griffin_lim_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prepared directory whose test split is evaluated [key: workdir].
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Checkpoint files; repeat for several models [key: checkpoints, comma-separated].
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    /// Report directory [key: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Test loops in the coherence sweep [default 16].
    #[arg(long)]
    pub loops: Option<usize>,
    #[arg(long)]
    pub griffin_lim_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `eval` [key: out].
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

/// Values read from a `key=value` file. Keys accept `-` or `_`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: HashMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `flag`, else the file's `key`, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key {key}: cannot parse `{v}`"))),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.pick(flag, key)?
            .ok_or_else(|| CliError::usage(format!("missing --{} (or `{key}` in the config file)", key.replace('_', "-"))))
    }
}

/// Parses `args` and runs the command; returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Usage as i32 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => Status::Success as i32,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.status as i32
        }
    }
}

pub fn execute(cli: Cli) -> CliResult {
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::GenCorpus(a) => gen_corpus(a, &settings),
        Command::Prepare(a) => cmd_prepare(a, &settings),
        Command::Train(a) => train(a, &settings),
        Command::Synth(a) => synth(a, &settings),
        Command::Eval(a) => eval(a, &settings),
        Command::Report(a) => report(a, &settings),
    }
}

/// Configures the global thread pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> CliResult {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))
}

/// Exclusive claim on a directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        let path = dir.join(LOCK_FILE);
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => CliError::usage(format!(
                    "{} is in use by another run (remove {} if it is stale)",
                    dir.display(),
                    path.display()
                )),
                _ => CliError::data(format!("{}: {e}", path.display())),
            })?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn gen_corpus(a: GenCorpusArgs, s: &Settings) -> CliResult {
    let out: PathBuf = s.required(a.out, "corpus")?;
    let count = s.or(a.count, "count", 64)?;
    let seed = s.or(a.seed, "seed", 0)?;
    let _lock = DirLock::acquire(&out)?;
    let entries = generate_corpus(&out, count, seed)?;
    info!("wrote {} loops to {}", entries.len(), out.display());
    println!("{} loops in {}", entries.len(), out.display());
    Ok(())
}

fn cmd_prepare(a: PrepareArgs, s: &Settings) -> CliResult {
    let corpus: PathBuf = s.required(a.corpus, "corpus")?;
    let workdir: PathBuf = s.required(a.workdir, "workdir")?;
    let config = PrepareConfig {
        target_bpm: TARGET_BPM,
        test_fraction: s.or(a.test_fraction, "test_fraction", TEST_FRACTION)?,
        seed: s.or(a.seed, "seed", 0)?,
    };
    let manifest = corpus.join(CORPUS_MANIFEST);
    if !manifest.is_file() {
        return Err(CliError::data(format!("no loop manifest at {}", manifest.display())));
    }
    let sources = load_sources(&manifest)?;
    let _lock = DirLock::acquire(&workdir)?;
    let prepared = prepare(&sources, &config)?;
    let m = write_prepared(&prepared, &workdir)?;
    let train = m.entries(Split::Train).count();
    println!(
        "{} segments ({train} train, {} test), {} loops skipped",
        m.segments.len(),
        m.segments.len() - train,
        m.skipped.len()
    );
    Ok(())
}

fn checkpoint_name(step: u64) -> String {
    format!("step_{step:06}.lfw")
}

fn train(a: TrainArgs, s: &Settings) -> CliResult {
    let workdir: PathBuf = s.required(a.workdir, "workdir")?;
    let variant = s.or(a.variant, "variant", ModelVariant::Multi)?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        variant,
        seed: s.or(a.seed, "seed", defaults.seed)?,
        lr: s.or(a.lr, "lr", defaults.lr)?,
        batch_size: s.or(a.batch, "batch", DEFAULT_BATCH)?,
        steps: s.or(a.steps, "steps", defaults.steps)?,
        checkpoint_every: s.or(a.checkpoint_every, "checkpoint_every", defaults.checkpoint_every)?,
        clip_norm: s.pick(a.clip_norm, "clip_norm")?,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let dir = match s.pick(a.checkpoints, "checkpoints")? {
        Some(d) => d,
        None => workdir.join("checkpoints").join(variant.name()),
    };
    let _lock = DirLock::acquire(&dir)?;

    let train_set = load_examples(&workdir, Split::Train, variant)?;
    let test_set = load_examples(&workdir, Split::Test, variant)?;
    if train_set.is_empty() {
        return Err(CliError::data(format!("{} has no training segments", workdir.display())));
    }
    let latest = dir.join(LATEST_CHECKPOINT);
    let resume = a.resume || s.or(None, "resume", false)?;
    let mut trainer = if resume {
        if !latest.is_file() {
            return Err(CliError::data(format!("nothing to resume: {} is missing", latest.display())));
        }
        Trainer::resume(config.clone(), load_checkpoint(&latest)?)?
    } else {
        Trainer::new(config.clone())?
    };
    info!(
        "training {} from step {} to {} on {} segments",
        variant,
        trainer.step_count(),
        config.steps,
        train_set.len()
    );
    let save = |trainer: &Trainer| -> CliResult {
        let step = trainer.step_count();
        let ck = trainer.checkpoint();
        save_checkpoint(dir.join(checkpoint_name(step)), &ck)?;
        save_checkpoint(&latest, &ck)?;
        let manifest = dir.join(MODEL_MANIFEST);
        fs::write(&manifest, trainer.manifest().to_text())
            .map_err(|e| CliError::data(format!("{}: {e}", manifest.display())))?;
        if !test_set.is_empty() {
            let held_out = evaluate_model(trainer.model(), &test_set, trainer.loss_kind())?;
            append_log(dir.join(EVAL_LOG), step, &held_out)?;
        }
        Ok(())
    };
    while trainer.step_count() < config.steps {
        let step = trainer.step_count() + 1;
        let loss = trainer.step(&train_set)?;
        append_log(dir.join(LOSS_LOG), step, &loss)?;
        info!("step {step} loss {:.5}", loss.total);
        if config.checkpoint_every > 0 && step % config.checkpoint_every == 0 {
            save(&trainer)?;
        }
    }
    if config.checkpoint_every == 0 || trainer.step_count() % config.checkpoint_every != 0 {
        save(&trainer)?;
    }
    println!("step {} checkpoint in {}", trainer.step_count(), dir.display());
    Ok(())
}

/// Conditioning from an `.lfc` feature file or from audio; audio needs the
/// normalization statistics.
fn conditioning_from(path: &Path, stats: &dyn Fn() -> CliResult<NormStats>) -> CliResult<ConditioningSet> {
    let is_wav = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    if is_wav {
        let audio = fit_segment(read_wav_canonical(path)?)?;
        Ok(ConditioningSet::extract(&audio, &stats()?)?)
    } else {
        Ok(ConditioningSet::from_tensor(&read_feature_file(path)?.conditioning)?)
    }
}

/// First segment of `audio`, zero-padded if shorter.
fn fit_segment(audio: AudioBuffer) -> CliResult<AudioBuffer> {
    let mut x = audio.into_samples();
    x.resize(SEGMENT_LEN, 0.0);
    Ok(AudioBuffer::new(x, CANONICAL_RATE)?)
}

fn synth(a: SynthArgs, s: &Settings) -> CliResult {
    let checkpoint: PathBuf = s.required(a.checkpoint, "checkpoint")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let iterations = s.or(a.griffin_lim_iters, "griffin_lim_iters", DEFAULT_GRIFFIN_LIM_ITERATIONS)?;
    let seed = s.or(a.seed, "seed", 0)?;
    let stats_path = match (s.pick(a.norm_stats, "norm_stats")?, s.pick(a.workdir, "workdir")?) {
        (Some(p), _) => Some(p),
        (None, Some(w)) => Some(w.join(NORM_STATS_FILE)),
        (None, None) => None,
    };
    let stats = || -> CliResult<NormStats> {
        let p = stats_path
            .as_ref()
            .ok_or_else(|| CliError::usage("audio sources need --norm-stats or --workdir"))?;
        Ok(NormStats::load(p)?)
    };
    let features: Option<PathBuf> = s.pick(a.features, "features")?;
    let reference: Option<PathBuf> = s.pick(a.reference, "reference")?;
    let pattern: Option<PathBuf> = s.pick(a.pattern, "pattern")?;
    let mut cond = match (features, reference, pattern) {
        (Some(f), None, None) => conditioning_from(&f, &stats)?,
        (None, Some(r), None) => conditioning_from(&r, &stats)?,
        (None, None, Some(p)) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            let mut spec: LoopSpec =
                serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            spec.bpm = TARGET_BPM;
            let audio = fit_segment(synth_loop(&spec)?)?;
            ConditioningSet::extract(&audio, &stats()?)?
        }
        _ => return Err(CliError::usage("give exactly one of --features, --reference, --pattern")),
    };
    if let Some(g) = s.pick(a.globals_from, "globals_from")? {
        cond = cond.with_globals_from(&conditioning_from(&g, &stats)?);
    }
    cond.validate()?;

    let model = load_checkpoint(&checkpoint)?.into_model()?;
    let input = cond.assemble(model.config().variant.include_envelope())?;
    let start = Instant::now();
    let audio = model.synthesize(&input, iterations, seed)?;
    let secs = start.elapsed().as_secs_f64();
    write_wav(&out, &audio)?;
    info!("synthesized {} samples in {secs:.3} s", audio.len());
    println!("{} ({} samples) in {secs:.3} s", out.display(), audio.len());
    Ok(())
}

fn eval(a: EvalArgs, s: &Settings) -> CliResult {
    let workdir: PathBuf = s.required(a.workdir, "workdir")?;
    let out: PathBuf = s.required(a.out, "out")?;
    let loops = s.or(a.loops, "loops", DEFAULT_EVAL_LOOPS)?;
    let iterations = s.or(a.griffin_lim_iters, "griffin_lim_iters", DEFAULT_GRIFFIN_LIM_ITERATIONS)?;
    let seed = s.or(a.seed, "seed", 0)?;
    let checkpoints: Vec<PathBuf> = if a.checkpoints.is_empty() {
        s.required::<String>(None, "checkpoints")?
            .split(',')
            .map(|p| PathBuf::from(p.trim()))
            .collect()
    } else {
        a.checkpoints
    };
    let models = checkpoints
        .iter()
        .map(|p| {
            if !p.is_file() {
                return Err(CliError::data(format!("checkpoint {} not found", p.display())));
            }
            Ok(load_checkpoint(p)?.into_model()?)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let manifest = PreparedManifest::load(&workdir)?;
    let entries: Vec<_> = manifest.entries(Split::Test).collect();
    if entries.len() < 2 {
        return Err(CliError::data(format!(
            "{} has {} test segments; the Fréchet distance needs at least 2",
            workdir.display(),
            entries.len()
        )));
    }
    let reference = entries
        .iter()
        .map(|e| read_wav_canonical(workdir.join(&e.audio)))
        .collect::<crate::Result<Vec<_>>>()?;
    let conditioning = entries
        .iter()
        .map(|e| ConditioningSet::from_tensor(&read_feature_file(workdir.join(&e.features))?.conditioning))
        .collect::<crate::Result<Vec<_>>>()?;

    fs::create_dir_all(&out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    let mut distances = Vec::new();
    let mut coherence = Vec::new();
    let sweep_loops = &conditioning[..loops.min(conditioning.len())];
    for model in models {
        let synth = ModelSynthesizer {
            model,
            griffin_lim_iterations: iterations,
        };
        let name = synth.model.config().variant.to_string();
        let generated = synthesize_all(&synth, &conditioning)?;
        let fd = frechet_report(&reference, &generated)?;
        info!("{name}: FD {:.4}", fd.distance);
        distances.push((name.clone(), fd.distance));
        let report = coherence_sweep(&synth, sweep_loops, SWEEP_LEVELS)?;
        info!("{name}: {} coherence outputs", report.total_outputs);
        write_table(&out, &format!("coherence_{}", name.to_lowercase()), &feature_table(&report)?)?;
        coherence.push(report);
    }
    let baseline = griffin_lim_baseline(&reference, iterations, seed)?;
    distances.push((GRIFFIN_LIM_ROW.to_string(), frechet_report(&reference, &baseline)?.distance));

    let quality = quality_table(&distances)?;
    let coherence = coherence_table(&coherence)?;
    write_table(&out, "quality", &quality)?;
    write_table(&out, "coherence", &coherence)?;
    print!("{}\n{}", quality.to_text(), coherence.to_text());
    Ok(())
}

fn write_table(dir: &Path, stem: &str, table: &Table) -> CliResult {
    for (ext, text) in [("txt", table.to_text()), ("csv", table.to_csv())] {
        let p = dir.join(format!("{stem}.{ext}"));
        fs::write(&p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn report(a: ReportArgs, s: &Settings) -> CliResult {
    let dir: PathBuf = s.required(a.dir, "out")?;
    let quality = dir.join("quality.csv");
    if !quality.is_file() {
        return Err(CliError::data(format!("no evaluation results in {}", dir.display())));
    }
    let mut stems: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_suffix(".csv").map(str::to_string)
        })
        .collect();
    stems.sort_by_key(|s| (s != "quality", s != "coherence", s.clone()));
    for stem in stems {
        let p = dir.join(format!("{stem}.csv"));
        let text = fs::read_to_string(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        let title = fs::read_to_string(dir.join(format!("{stem}.txt")))
            .ok()
            .and_then(|t| t.lines().next().map(str::to_string))
            .unwrap_or_else(|| stem.clone());
        println!("{}", Table::from_csv(title, &text)?.to_text());
    }
    Ok(())
}
