//! Subcommand dispatch for the `periodwave` binary. Every run resolves a
//! config (file defaults, then flags), executes, and writes a manifest
//! sufficient to reproduce it.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::audio::{self, WavEncoding, Waveform};
use crate::error::{Error, Result};
use crate::estimator::{load_checkpoint, save_checkpoint, Estimator};
use crate::mel::{self, MelSpec};
use crate::metrics::{bench_speed, mstft_distance, MstftConfig};
use crate::runcfg::{band_array, write_run_manifest, RunConfig};
use crate::sampler::{self, OdeMethod, SamplerConfig};
use crate::train::{random_segment, TrainConfig, TrainItem, TrainLogRecord, TrainLogger, TrainState};
use crate::rng::Rng;
use crate::wavelet;

#[derive(Parser, Debug)]
#[command(name = "periodwave", version, about = "Flow-matching waveform generation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Train an estimator (full-band or one wavelet band).
    Train(TrainArgs),
    /// Synthesize a waveform from a checkpoint plus a wav or mel file.
    Synth(SynthArgs),
    /// Hierarchical multi-band synthesis from four band checkpoints.
    SynthMb(SynthMbArgs),
    /// Split a wav into four wavelet bands and reconstruct it.
    Dwt(DwtArgs),
    /// Score generated files against references (CSV of file,mstft).
    Eval(EvalArgs),
    /// Sweep ODE methods and step counts against a reference rendering.
    BenchOde(BenchOdeArgs),
    /// Measure synthesis speed.
    BenchSpeed(BenchSpeedArgs),
}

#[derive(Args, Debug)]
struct CommonCfg {
    /// Flat dotted-key JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonCfg {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonCfg,
    /// Training wav file or directory of wav files.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for checkpoint, log and manifest.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Train the estimator for one wavelet band (0..4) instead of full-band.
    #[arg(long)]
    band: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    segment: Option<usize>,
    /// Log every N steps.
    #[arg(long, default_value_t = 10)]
    log_every: u64,
}

#[derive(Args, Debug)]
struct SamplerFlags {
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<OdeMethod>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    freeu_alpha: Option<f64>,
    #[arg(long)]
    freeu_beta: Option<f64>,
}

fn parse_method(s: &str) -> std::result::Result<OdeMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl SamplerFlags {
    fn apply(&self, cfg: &mut SamplerConfig) {
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(t) = self.tau {
            cfg.temperature = t;
        }
        if let Some(a) = self.freeu_alpha {
            cfg.freeu.skip_scale = a;
            cfg.freeu.enabled = true;
        }
        if let Some(b) = self.freeu_beta {
            cfg.freeu.backbone_scale = b;
            cfg.freeu.enabled = true;
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonCfg,
    /// Checkpoint directory.
    #[arg(long)]
    ckpt: PathBuf,
    /// Input wav (mel computed internally) or persisted .mel file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out.wav")]
    out: PathBuf,
    #[command(flatten)]
    sampler: SamplerFlags,
}

#[derive(Args, Debug)]
struct SynthMbArgs {
    #[command(flatten)]
    common: CommonCfg,
    /// Four checkpoint directories, bands 0..4 in order.
    #[arg(long, num_args = 4)]
    ckpt: Vec<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out.wav")]
    out: PathBuf,
    /// Per-band sampling steps, e.g. 16,8,4,4.
    #[arg(long, value_delimiter = ',', default_values_t = [16usize, 16, 16, 16])]
    band_steps: Vec<usize>,
    /// Optional per-band temperatures, e.g. 0.667,0.667,0.5,0.5.
    #[arg(long, value_delimiter = ',')]
    band_tau: Option<Vec<f64>>,
    #[command(flatten)]
    sampler: SamplerFlags,
}

#[derive(Args, Debug)]
struct DwtArgs {
    /// Input wav file.
    input: PathBuf,
    /// Output directory for band and reconstruction wavs.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Report the split-merge roundtrip error and fail if it exceeds 1e-6.
    #[arg(long)]
    roundtrip: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory of reference wavs.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Directory of generated wavs (paired by file name).
    #[arg(long = "gen")]
    generated: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchOdeArgs {
    #[command(flatten)]
    common: CommonCfg,
    #[arg(long)]
    ckpt: PathBuf,
    /// Input wav used as conditioning source.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = ["euler".to_string(), "midpoint".to_string(), "rk4".to_string()])]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16])]
    steps: Vec<usize>,
    #[arg(long, default_value = "bench_ode.csv")]
    out: PathBuf,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args, Debug)]
struct BenchSpeedArgs {
    #[command(flatten)]
    common: CommonCfg,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "bench_speed.json")]
    out: PathBuf,
    #[command(flatten)]
    sampler: SamplerFlags,
}

/// Entry point: parse `argv` (including the program name) and run.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train(args) => cmd_train(args),
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::SynthMb(args) => cmd_synth_mb(args),
        Cmd::Dwt(args) => cmd_dwt(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::BenchOde(args) => cmd_bench_ode(args),
        Cmd::BenchSpeed(args) => cmd_bench_speed(args),
    }
}

fn collect_wavs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Error::Config(format!("no wav files under {}", path.display())));
    }
    Ok(out)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(data) = &args.data {
        cfg.data = Some(data.clone());
    }
    if let Some(ms) = args.max_steps {
        cfg.train.max_steps = ms;
    }
    if let Some(bs) = args.batch_size {
        cfg.train.batch_size = bs;
    }
    if let Some(seg) = args.segment {
        cfg.train.segment = seg;
    }
    if let Some(band) = args.band {
        cfg.band = Some(band);
        cfg.estimator = crate::estimator::EstimatorConfig::multi_band(band);
        let band_train = TrainConfig::band_default();
        cfg.train.lr = band_train.lr;
        cfg.train.batch_size = args.batch_size.unwrap_or(band_train.batch_size);
    }
    cfg.train.validate()?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_run_manifest(args.out.join("run_manifest.json"), "train", &cfg)?;

    let mut est = Estimator::init(cfg.estimator.clone(), cfg.mel_encoder.clone(), cfg.seed)?;
    println!("initialized estimator: {} parameters", est.param_count());

    if cfg.train.max_steps == 0 {
        save_checkpoint(
            &est,
            &cfg.mel,
            cfg.band.map_or(0, |b| b + 1),
            args.out.join("checkpoint"),
        )?;
        println!("wrote initial checkpoint to {}", args.out.join("checkpoint").display());
        return Ok(());
    }

    let data = cfg
        .data
        .clone()
        .ok_or_else(|| Error::Config("training needs --data or data.train in the config".into()))?;
    let paths = collect_wavs(&data)?;
    let clips: Vec<Waveform> = paths.iter().map(audio::load_wav).collect::<Result<_>>()?;
    for clip in &clips {
        if clip.sample_rate != cfg.mel.sample_rate {
            return Err(Error::Config(format!(
                "clip rate {} != mel config rate {}",
                clip.sample_rate, cfg.mel.sample_rate
            )));
        }
    }

    let mut rng = Rng::seed_from(cfg.seed);
    let mut state = TrainState::new(est);
    let mut logger = TrainLogger::create(args.out.join("train_log.jsonl"))?;
    for _ in 0..cfg.train.max_steps {
        let start = std::time::Instant::now();
        let batch: Vec<TrainItem> = (0..cfg.train.batch_size)
            .map(|_| {
                let clip = &clips[rng.below(clips.len())];
                let seg = random_segment(clip, cfg.train.segment, &mut rng)?;
                match cfg.band {
                    None => TrainItem::full_band(&seg, &cfg.mel),
                    Some(k) => TrainItem::band(&seg, k, &cfg.mel),
                }
            })
            .collect::<Result<_>>()?;
        let loss = state.train_step(&batch, &cfg.train, &mut rng)?;
        let step = state.step();
        if step == 1 || step % args.log_every == 0 || step == cfg.train.max_steps {
            let rec = TrainLogRecord {
                step,
                loss,
                lr: cfg.train.lr,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            logger.log(&rec)?;
            println!("step {step}: loss {loss:.6}");
        }
    }
    est = state.est;
    save_checkpoint(
        &est,
        &cfg.mel,
        cfg.band.map_or(0, |b| b + 1),
        args.out.join("checkpoint"),
    )?;
    println!("wrote checkpoint to {}", args.out.join("checkpoint").display());
    Ok(())
}

/// Load the conditioning mel from a wav (computing it) or a persisted .mel
/// file. Returns the mel plus the original sample count when known.
fn load_conditioning(input: &Path, mel_cfg: &crate::mel::MelConfig) -> Result<(MelSpec, Option<usize>)> {
    if input.extension().is_some_and(|e| e == "mel") {
        let m = mel::load_mel(input)?;
        if m.config != *mel_cfg {
            eprintln!("warning: mel sidecar config differs from checkpoint mel config");
        }
        Ok((m, None))
    } else {
        let w = audio::load_wav(input)?;
        let m = mel::mel_spectrogram(&w, mel_cfg)?;
        let len = w.len();
        Ok((m, Some(len)))
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    args.sampler.apply(&mut cfg.sampler);
    let (est, mel_cfg, band) = load_checkpoint(&args.ckpt)?;
    if band != 0 {
        return Err(Error::Config(
            "synth wants a full-band checkpoint; use synth-mb for band models".into(),
        ));
    }
    cfg.mel = mel_cfg.clone();
    let (mel_spec, orig_len) = load_conditioning(&args.input, &mel_cfg)?;
    let prior = mel::full_band_prior(&mel_spec)?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut wav = sampler::synthesize(&est, &mel_spec, &prior, &cfg.sampler, &mut rng)?;
    if let Some(len) = orig_len {
        wav.samples.truncate(len);
    }
    audio::save_wav(&wav, &args.out, WavEncoding::Float32)?;
    write_run_manifest(manifest_path(&args.out), "synth", &cfg)?;
    println!("wrote {} ({} samples)", args.out.display(), wav.len());
    Ok(())
}

fn cmd_synth_mb(args: SynthMbArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    args.sampler.apply(&mut cfg.sampler);
    cfg.sampler.per_band_steps = Some(band_array("--band-steps", &args.band_steps)?);
    if let Some(taus) = &args.band_tau {
        if taus.len() != 4 {
            return Err(Error::Config("--band-tau wants exactly 4 values".into()));
        }
        cfg.sampler.per_band_temperature = Some([taus[0], taus[1], taus[2], taus[3]]);
    }
    if args.ckpt.len() != 4 {
        return Err(Error::Config("synth-mb wants exactly 4 checkpoints".into()));
    }
    let mut estimators = Vec::with_capacity(4);
    let mut mel_cfg = None;
    for (k, dir) in args.ckpt.iter().enumerate() {
        let (est, mc, band) = load_checkpoint(dir)?;
        if band != k + 1 {
            return Err(Error::Config(format!(
                "{}: expected band {} checkpoint, manifest says {band}",
                dir.display(),
                k + 1
            )));
        }
        mel_cfg.get_or_insert(mc);
        estimators.push(est);
    }
    let mel_cfg = mel_cfg.unwrap();
    cfg.mel = mel_cfg.clone();
    let (mel_spec, orig_len) = load_conditioning(&args.input, &mel_cfg)?;
    let priors = [
        mel::band_prior(&mel_spec, 0)?,
        mel::band_prior(&mel_spec, 1)?,
        mel::band_prior(&mel_spec, 2)?,
        mel::band_prior(&mel_spec, 3)?,
    ];
    let ests: [Estimator; 4] = estimators
        .try_into()
        .map_err(|_| Error::Config("expected 4 estimators".into()))?;
    let mut rng = Rng::seed_from(cfg.seed);
    let mut wav = sampler::synthesize_mb(&ests, &mel_spec, &priors, &cfg.sampler, &mut rng)?;
    if let Some(len) = orig_len {
        wav.samples.truncate(len);
    }
    audio::save_wav(&wav, &args.out, WavEncoding::Float32)?;
    write_run_manifest(manifest_path(&args.out), "synth-mb", &cfg)?;
    println!("wrote {} ({} samples)", args.out.display(), wav.len());
    Ok(())
}

fn cmd_dwt(args: DwtArgs) -> Result<()> {
    let w = audio::load_wav(&args.input)?;
    let padded_len = w.len().div_ceil(4) * 4;
    let mut samples = w.samples.clone();
    samples.resize(padded_len, 0.0);
    let bands = wavelet::packet_split(&samples)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "signal".into());
    for (k, band) in bands.bands.iter().enumerate() {
        let path = args.out.join(format!("{stem}_band{k}.wav"));
        let bw = Waveform::new(band.clone(), w.sample_rate / 4)?;
        audio::save_wav(&bw, &path, WavEncoding::Float32)?;
    }
    let merged = wavelet::packet_merge(&bands)?;
    let recon = Waveform::new(merged[..w.len()].to_vec(), w.sample_rate)?;
    let recon_path = args.out.join(format!("{stem}_recon.wav"));
    audio::save_wav(&recon, &recon_path, WavEncoding::Float32)?;
    let max_err = w
        .samples
        .iter()
        .zip(&recon.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("wrote 4 band files and {}", recon_path.display());
    if args.roundtrip {
        println!("max reconstruction error: {max_err:.3e}");
        if max_err >= 1e-6 {
            return Err(Error::Msg(format!(
                "roundtrip error {max_err:.3e} exceeds 1e-6"
            )));
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let refs = collect_wavs(&args.reference)?;
    let cfg = MstftConfig::default();
    let rows: Vec<(String, Result<f64>)> = refs
        .par_iter()
        .filter_map(|ref_path| {
            let name = ref_path.file_name()?.to_string_lossy().to_string();
            let gen_path = args.generated.join(&name);
            if !gen_path.exists() {
                eprintln!("warning: no generated file for {name}, skipping");
                return None;
            }
            let result = (|| {
                let r = audio::load_wav(ref_path)?;
                let mut g = audio::load_wav(&gen_path)?;
                if g.len() > r.len() {
                    g.samples.truncate(r.len());
                } else if g.len() < r.len() {
                    return Err(Error::Shape(format!(
                        "{name}: generated shorter than reference"
                    )));
                }
                mstft_distance(&r, &g, &cfg)
            })();
            Some((name, result))
        })
        .collect();
    let mut csv = String::from("file,mstft\n");
    let mut evaluated = 0;
    for (name, result) in rows {
        match result {
            Ok(d) => {
                csv.push_str(&format!("{name},{d:.6}\n"));
                evaluated += 1;
            }
            Err(e) => eprintln!("warning: {e}"),
        }
    }
    if evaluated == 0 {
        return Err(Error::Msg("no file pairs evaluated".into()));
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::io(path, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_bench_ode(args: BenchOdeArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    if let Some(t) = args.tau {
        cfg.sampler.temperature = t;
    }
    let (est, mel_cfg, band) = load_checkpoint(&args.ckpt)?;
    if band != 0 {
        return Err(Error::Config("bench-ode wants a full-band checkpoint".into()));
    }
    cfg.mel = mel_cfg.clone();
    let (mel_spec, _) = load_conditioning(&args.input, &mel_cfg)?;
    let prior = mel::full_band_prior(&mel_spec)?;
    let methods: Vec<OdeMethod> = args
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    let mut rng = Rng::seed_from(cfg.seed);
    let rows = sampler::bench_ode(
        &est,
        &mel_spec,
        &prior,
        &methods,
        &args.steps,
        &cfg.sampler,
        &mut rng,
    )?;
    let mut csv = String::from("method,steps,wall_ms,mstft\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{:.3},{:.6}\n", r.method, r.steps, r.wall_ms, r.mstft));
    }
    std::fs::write(&args.out, csv).map_err(|e| Error::io(&args.out, e))?;
    write_run_manifest(manifest_path(&args.out), "bench-ode", &cfg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_bench_speed(args: BenchSpeedArgs) -> Result<()> {
    let mut cfg = args.common.resolve()?;
    args.sampler.apply(&mut cfg.sampler);
    let (est, mel_cfg, band) = load_checkpoint(&args.ckpt)?;
    if band != 0 {
        return Err(Error::Config("bench-speed wants a full-band checkpoint".into()));
    }
    cfg.mel = mel_cfg.clone();
    let (mel_spec, _) = load_conditioning(&args.input, &mel_cfg)?;
    let prior = mel::full_band_prior(&mel_spec)?;
    let seed = cfg.seed;
    let report = bench_speed(
        || {
            let mut rng = Rng::seed_from(seed);
            sampler::synthesize(&est, &mel_spec, &prior, &cfg.sampler, &mut rng)
        },
        args.reps,
    )?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Msg(e.to_string()))?;
    std::fs::write(&args.out, &json).map_err(|e| Error::io(&args.out, e))?;
    write_run_manifest(manifest_path(&args.out), "bench-speed", &cfg)?;
    println!("{json}");
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".manifest.json");
    os.into()
}
