//! Command-line surface.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on file
//! errors (missing, unreadable or malformed input, unwritable output).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::dataset::{describe, generate_synthetic_dataset, load_dir, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::io::write_atomic;
use crate::metrics::{evaluate_generator, format_report, single_and_ensemble, Protocol};
use crate::model::{generate_diverse_set, ImageRecord};
use crate::rng::RngStreams;
use crate::subset::TagSubset;
use crate::train::{
    format_history, pretrain_discriminator, pretrain_generator, train, TrainConfig, TrainState,
};

#[derive(Parser, Debug)]
#[command(
    name = "tagdiv",
    version,
    about = "Diverse and distinct image tagging with path-constrained DPPs"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print every semantic path of a hierarchy with its tag weights.
    BuildPaths {
        hierarchy: PathBuf,
        /// Write the dump here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Initialize a model and pre-train the generator by cross-entropy.
    PretrainG {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hp: Hyper,
    },
    /// Pre-train the discriminator by F1 regression.
    PretrainD {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        hp: Hyper,
    },
    /// Adversarial training; writes per-epoch checkpoints and history.tsv.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        hp: Hyper,
    },
    /// Tag images with single and ensemble subsets.
    Annotate(AnnotateArgs),
    /// Score a checkpoint on a split.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    paths: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 500)]
    images: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value_t = 60)]
    feature_dim: usize,
    #[arg(long, default_value_t = 16)]
    embed_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Overrides for the training configuration. Unset flags keep the value
/// from the checkpoint (or the defaults for a new model).
#[derive(Args, Debug, Default)]
struct Hyper {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    noise_dim: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Seed for a new model; re-seeds the random streams of an existing one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    gt_cap: Option<usize>,
    #[arg(long)]
    candidates: Option<usize>,
    /// Learning rate of the current pre-training phase.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    per_candidate_noise: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    /// Image ids to tag; all images of the split when omitted.
    #[arg(long, value_delimiter = ',')]
    images: Vec<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    n_noise: usize,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    split: Split,
    /// Subset sizes to score; repeat for several.
    #[arg(long, default_values_t = [3, 5])]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    n_noise: usize,
    #[arg(long, default_value_t = 5)]
    top: usize,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "tagdiv")]
    method: String,
    /// Write the full report here; stdout gets only the summary.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl Hyper {
    fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(k => k, repeats => repeats, noise_dim => d_z, beta => beta, seed => seed,
             batch_size => batch_size, lr_g => lr_g, lr_d => lr_d,
             weight_decay => weight_decay, gt_cap => gt_cap, candidates => candidates_per_step);
        if self.per_candidate_noise {
            c.per_candidate_noise = true;
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn run(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::BuildPaths {
            hierarchy,
            out: dest,
        } => {
            let g = SemanticGraph::read_hierarchy(&hierarchy)?;
            let dump = g.path_dump();
            match dest {
                Some(p) => write_atomic(&p, dump.as_bytes()),
                None => emit(out, &dump),
            }
        }
        Command::Synth(a) => {
            let spec = SynthSpec {
                m: a.m,
                n_paths: a.paths,
                max_depth: a.depth,
                n_images: a.images,
                n_test: a.test,
                d_g: a.feature_dim,
                embed_dim: a.embed_dim,
                noise: a.noise,
                seed: a.seed,
            };
            let ds = generate_synthetic_dataset(&spec)?;
            ds.write(&a.out)?;
            emit(out, &describe(&ds.header()))
        }
        Command::PretrainG {
            data,
            out: dest,
            hp,
        } => {
            let ds = load_dir(&data)?;
            let mut config = TrainConfig::default();
            hp.apply(&mut config);
            if let Some(e) = hp.epochs {
                config.pretrain_g_epochs = e;
            }
            if let Some(lr) = hp.lr {
                config.pretrain_g_lr = lr;
            }
            config.validate()?;
            let mut state = TrainState::new(&ds, &config);
            let losses = pretrain_generator(&mut state, &ds, &config)?;
            for (e, l) in losses.iter().enumerate() {
                let _ = writeln!(err, "pretrain-g epoch {e}: cross-entropy {l:.6}");
            }
            save_checkpoint(&state, &config, &dest)
        }
        Command::PretrainD {
            data,
            checkpoint,
            out: dest,
            hp,
        } => {
            let ds = load_dir(&data)?;
            let (mut state, mut config) = load_for(&ds, &checkpoint, &hp)?;
            if let Some(e) = hp.epochs {
                config.pretrain_d_epochs = e;
            }
            if let Some(lr) = hp.lr {
                config.pretrain_d_lr = lr;
            }
            config.validate()?;
            pretrain_discriminator(&mut state, &ds, &config)?;
            save_checkpoint(&state, &config, &dest)
        }
        Command::Train {
            data,
            checkpoint,
            out_dir,
            hp,
        } => {
            let ds = load_dir(&data)?;
            let (mut state, mut config) = load_for(&ds, &checkpoint, &hp)?;
            if let Some(e) = hp.epochs {
                config.epochs = e;
            }
            config.validate()?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let result = train(&mut state, &ds, &config, Some(&out_dir));
            write_atomic(
                &out_dir.join("history.tsv"),
                format_history(&state.history).as_bytes(),
            )?;
            result?;
            emit(out, &format_history(&state.history))
        }
        Command::Annotate(a) => annotate(a, out),
        Command::Evaluate(a) => {
            let ds = load_dir(&a.data)?;
            let (state, _) = load_checked(&ds, &a.checkpoint)?;
            let images = split(&ds, a.split);
            let mut reports = Vec::new();
            for &k in &a.k {
                let protocol = Protocol {
                    k,
                    n_samples: a.n_noise,
                    top: a.top,
                    repeats: a.repeats,
                };
                reports.push(evaluate_generator(
                    &state.generator,
                    &ds.space,
                    images,
                    protocol,
                    a.seed,
                    a.jobs,
                )?);
            }
            let text = format_report(&a.method, &reports);
            match &a.report {
                Some(p) => {
                    write_atomic(p, text.as_bytes())?;
                    let summary = text.find("# summary").map_or("", |i| &text[i..]);
                    emit(out, summary)
                }
                None => emit(out, &text),
            }
        }
    }
}

fn split(ds: &Dataset, s: Split) -> &[ImageRecord] {
    match s {
        Split::Train => &ds.train,
        Split::Test => &ds.test,
    }
}

/// Loads a checkpoint and checks it fits the dataset.
fn load_checked(ds: &Dataset, path: &Path) -> Result<(TrainState, TrainConfig)> {
    let (state, config) = load_checkpoint(path)?;
    let h = ds.header();
    let g = &state.generator;
    let d = &state.discriminator;
    if (g.m, g.d_g, d.d_d, d.e_dim) != (h.m, h.d_g, h.d_d, ds.space.embeddings.dim()) {
        return Err(Error::Shape(format!(
            "checkpoint {} was trained for (m={}, d_g={}, d_d={}, e={}) but the dataset has (m={}, d_g={}, d_d={}, e={})",
            path.display(),
            g.m,
            g.d_g,
            d.d_d,
            d.e_dim,
            h.m,
            h.d_g,
            h.d_d,
            ds.space.embeddings.dim()
        )));
    }
    Ok((state, config))
}

fn load_for(ds: &Dataset, path: &Path, hp: &Hyper) -> Result<(TrainState, TrainConfig)> {
    let (mut state, mut config) = load_checked(ds, path)?;
    if hp.noise_dim.is_some_and(|d| d != state.generator.d_z) {
        return Err(Error::Validation(format!(
            "--noise-dim cannot change an existing model (it has {})",
            state.generator.d_z
        )));
    }
    hp.apply(&mut config);
    if let Some(seed) = hp.seed {
        state.streams = RngStreams::new(seed);
    }
    Ok((state, config))
}

fn names(graph: &SemanticGraph, s: &TagSubset) -> Result<Vec<String>> {
    s.ids()
        .iter()
        .map(|&t| graph.name(t).map(str::to_string))
        .collect()
}

fn annotate(a: AnnotateArgs, out: &mut dyn Write) -> Result<()> {
    let ds = load_dir(&a.data)?;
    let (state, _) = load_checked(&ds, &a.checkpoint)?;
    if a.top == 0 || a.top > a.n_noise {
        return Err(Error::Validation(
            "--top must be between 1 and --n-noise".into(),
        ));
    }
    let images = split(&ds, a.split);
    let chosen: Vec<usize> = if a.images.is_empty() {
        (0..images.len()).collect()
    } else {
        a.images
            .iter()
            .map(|id| {
                images
                    .iter()
                    .position(|r| &r.id == id)
                    .ok_or_else(|| Error::lookup("image", id))
            })
            .collect::<Result<_>>()?
    };
    let graph = &ds.space.graph;
    let mut text = String::new();
    if a.format == Format::Tsv {
        text.push_str("image_id\tprotocol\ttags\n");
    }
    for idx in chosen {
        let image = &images[idx];
        let mut streams = RngStreams::for_eval(a.seed, idx);
        let samples = generate_diverse_set(
            &state.generator,
            image,
            &ds.space,
            a.n_noise,
            a.k,
            a.repeats,
            &mut streams,
        )?;
        let (single, ensemble) = single_and_ensemble(graph, &samples, a.top)?;
        let (s, e) = (names(graph, &single)?, names(graph, &ensemble)?);
        match a.format {
            Format::Text => {
                text.push_str(&format!(
                    "{}\n  single:   {}\n  ensemble: {}\n",
                    image.id,
                    s.join(", "),
                    e.join(", ")
                ));
            }
            Format::Tsv => {
                text.push_str(&format!("{}\tsingle\t{}\n", image.id, s.join(",")));
                text.push_str(&format!("{}\tensemble\t{}\n", image.id, e.join(",")));
            }
        }
    }
    emit(out, &text)
}
