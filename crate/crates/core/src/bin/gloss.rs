use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gloss::corpus::read_corpus_file;
use gloss::eval::{self, ProbeConfig, ProbeDataset};
use gloss::genlab;
use gloss::persistence;
use gloss::trainer::{infer_latent, infer_many, train_with_progress};
use gloss::{EncodedCorpus, GlossError, InferOptions, Model, ModelKind, TrainConfig, Vocab};

#[derive(Parser)]
#[command(
    name = "gloss",
    version,
    about = "Sentence embeddings by generative latent optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit latents and decoder on a corpus and save the model.
    Train(TrainCmd),
    /// Embed one sentence per input line.
    Embed(EmbedCmd),
    /// Pearson correlation (x100) of embedding cosines with gold scores.
    EvalSts(EvalStsCmd),
    /// Logistic-regression probe accuracy on frozen embeddings.
    Probe(ProbeCmd),
    /// Decode interpolations between two sentences (positional models).
    Interpolate(InterpolateCmd),
    /// Nearest training sentences to a query.
    Nn(NnCmd),
    /// Probe accuracy as a function of latent dimensionality, as CSV.
    Sweep(SweepCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Bow,
    Pos,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Bow => ModelKind::Bow,
            KindArg::Pos => ModelKind::Pos,
        }
    }
}

fn positive_usize(name: &'static str) -> impl Fn(&str) -> Result<usize, String> + Clone {
    move |s| match s.parse::<usize>() {
        Ok(0) => Err(format!("{name} must be positive")),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("{name} must be a positive integer")),
    }
}

fn positive_f64(name: &'static str) -> impl Fn(&str) -> Result<f64, String> + Clone {
    move |s| match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{name} must be positive")),
    }
}

#[derive(Args)]
struct Hyper {
    #[arg(long, default_value_t = 2.0, value_parser = positive_f64("radius"))]
    radius: f64,
    #[arg(long, default_value_t = 3e-4, value_parser = positive_f64("lr"))]
    lr: f64,
    #[arg(long, default_value_t = 25.0, value_parser = positive_f64("clip"))]
    clip: f64,
    #[arg(long, default_value_t = 210, value_parser = positive_usize("epochs"))]
    epochs: usize,
    #[arg(long, default_value_t = 128, value_parser = positive_usize("batch"))]
    batch: usize,
    #[arg(long, default_value_t = 1, value_parser = positive_usize("min-count"))]
    min_count: usize,
    #[arg(long, default_value_t = 64, value_parser = positive_usize("max-len"))]
    max_len: usize,
    #[arg(long, env = "GLOSS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = positive_usize("threads"))]
    threads: usize,
}

impl Hyper {
    fn config(&self, kind: ModelKind, dim: usize) -> TrainConfig {
        TrainConfig {
            kind,
            dim,
            radius: self.radius,
            lr: self.lr,
            clip: self.clip,
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
            max_len: self.max_len,
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long, value_enum)]
    model: KindArg,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = positive_usize("dim"))]
    dim: usize,
    #[command(flatten)]
    hyper: Hyper,
    /// Write the per-epoch loss trace as `epoch,loss` CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Optimization steps per sentence.
    #[arg(long, default_value_t = 250)]
    steps: usize,
    /// Learning rate for inference.
    #[arg(long = "lr", default_value_t = 1.0, value_parser = positive_f64("lr"))]
    infer_lr: f64,
    /// Plain gradient descent instead of Adam.
    #[arg(long)]
    infer_plain_sgd: bool,
    #[arg(long, default_value_t = 1, value_parser = positive_usize("threads"))]
    threads: usize,
}

impl InferArgs {
    fn options(&self) -> InferOptions {
        InferOptions {
            steps: self.steps,
            lr: self.infer_lr,
            plain_sgd: self.infer_plain_sgd,
        }
    }
}

#[derive(Args)]
struct EmbedCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    infer: InferArgs,
    /// Emit a raw little-endian f32 row-major matrix instead of text.
    #[arg(long)]
    binary: bool,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalStsCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct ProbeCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    infer: InferArgs,
    #[command(flatten)]
    probe: ProbeArgs,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long, default_value_t = 1000)]
    probe_steps: usize,
    #[arg(long, default_value_t = 0.1, value_parser = positive_f64("probe-lr"))]
    probe_lr: f64,
}

impl ProbeArgs {
    fn config(&self) -> ProbeConfig {
        ProbeConfig {
            l2: self.l2,
            steps: self.probe_steps,
            lr: self.probe_lr,
        }
    }
}

#[derive(Args)]
struct InterpolateCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    src: String,
    #[arg(long)]
    tgt: String,
    #[arg(long, default_value_t = 4)]
    points: usize,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct NnCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(short = 'k', long = "k", default_value_t = 5)]
    k: usize,
    /// Training corpus, to print neighbour sentences alongside indices.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct SweepCmd {
    #[arg(long, value_enum)]
    model: KindArg,
    #[arg(long)]
    corpus: PathBuf,
    /// Comma-separated latent sizes.
    #[arg(long, value_delimiter = ',', required = true, value_parser = positive_usize("dims"))]
    dims: Vec<usize>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[command(flatten)]
    hyper: Hyper,
    #[command(flatten)]
    probe: ProbeArgs,
    #[arg(long, default_value_t = 250)]
    steps: usize,
    #[arg(long = "infer-lr", default_value_t = 1.0, value_parser = positive_f64("infer-lr"))]
    infer_lr: f64,
    #[arg(long)]
    infer_plain_sgd: bool,
    /// CSV output file (default: standard output).
    #[arg(long)]
    csv: Option<PathBuf>,
}

type CmdResult = Result<(), GlossError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> GlossError + '_ {
    move |e| GlossError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn stdout_err(e: io::Error) -> GlossError {
    GlossError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, GlossError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fit(
    kind: ModelKind,
    dim: usize,
    corpus_path: &Path,
    hyper: &Hyper,
) -> Result<(Model, Vec<f64>), GlossError> {
    let lines = read_corpus_file(corpus_path)?;
    let vocab = Vocab::build(&lines, hyper.min_count as u64)?;
    let corpus = EncodedCorpus::encode(&lines, &vocab, hyper.max_len)?;
    let cfg = hyper.config(kind, dim);
    train_with_progress(vocab, &corpus, cfg, |epoch, loss| {
        eprintln!("epoch {epoch} loss {loss}");
    })
}

fn cmd_train(cmd: TrainCmd) -> CmdResult {
    let (model, trace) = fit(cmd.model.into(), cmd.dim, &cmd.corpus, &cmd.hyper)?;
    if let Some(path) = &cmd.loss_csv {
        let mut out = output(Some(path))?;
        let write = |out: &mut Box<dyn Write>| -> io::Result<()> {
            writeln!(out, "epoch,loss")?;
            for (epoch, loss) in trace.iter().enumerate() {
                writeln!(out, "{epoch},{loss}")?;
            }
            out.flush()
        };
        write(&mut out).map_err(io_err(path))?;
    }
    persistence::save(&model, &cmd.out)
}

/// Non-blank lines of `path`; a blank line is an error naming its number.
fn read_sentences(path: &Path) -> Result<Vec<String>, GlossError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            if line.trim().is_empty() {
                Err(GlossError::Parse {
                    line: i + 1,
                    message: "blank line".into(),
                })
            } else {
                Ok(line.to_string())
            }
        })
        .collect()
}

fn cmd_embed(cmd: EmbedCmd) -> CmdResult {
    let model = persistence::load(&cmd.model)?;
    let sentences = read_sentences(&cmd.input)?;
    let embeddings = infer_many(&model, &sentences, &cmd.infer.options(), cmd.infer.threads)?;
    let mut out = output(cmd.out.as_deref())?;
    let result = if cmd.binary {
        embeddings
            .iter()
            .flatten()
            .try_for_each(|&v| out.write_all(&(v as f32).to_le_bytes()))
    } else {
        embeddings.iter().try_for_each(|z| {
            let line: Vec<String> = z.iter().map(f64::to_string).collect();
            writeln!(out, "{}", line.join(" "))
        })
    };
    result.and_then(|_| out.flush()).map_err(stdout_err)
}

fn cmd_eval_sts(cmd: EvalStsCmd) -> CmdResult {
    let model = persistence::load(&cmd.model)?;
    let pairs = eval::read_sts_file(&cmd.pairs)?;
    let score = eval::eval_sts(&model, &pairs, &cmd.infer.options(), cmd.infer.threads)?;
    println!("pearson_x100 {score:.1}");
    Ok(())
}

fn probe_accuracy(
    model: &Model,
    train_path: &Path,
    test_path: &Path,
    opts: &InferOptions,
    threads: usize,
    probe: &ProbeConfig,
) -> Result<f64, GlossError> {
    let train_rows = eval::read_probe_file(train_path)?;
    let test_rows = eval::read_probe_file(test_path)?;
    let classes = train_rows
        .iter()
        .chain(&test_rows)
        .map(|(l, _)| l + 1)
        .max()
        .unwrap_or(0);
    let dataset = |rows: &[(usize, String)]| -> Result<ProbeDataset, GlossError> {
        let sentences: Vec<&str> = rows.iter().map(|(_, s)| s.as_str()).collect();
        let emb = infer_many(model, &sentences, opts, threads)?;
        ProbeDataset::from_rows(&emb, rows.iter().map(|(l, _)| *l).collect(), classes)
    };
    let train = dataset(&train_rows)?;
    let test = dataset(&test_rows)?;
    let probe_model = eval::probe_train(&train, probe)?;
    eval::probe_eval(&probe_model, &test)
}

fn cmd_probe(cmd: ProbeCmd) -> CmdResult {
    let model = persistence::load(&cmd.model)?;
    let acc = probe_accuracy(
        &model,
        &cmd.train,
        &cmd.test,
        &cmd.infer.options(),
        cmd.infer.threads,
        &cmd.probe.config(),
    )?;
    println!("accuracy {acc}");
    Ok(())
}

fn cmd_interpolate(cmd: InterpolateCmd) -> CmdResult {
    let model = persistence::load(&cmd.model)?;
    let lines =
        genlab::interpolation_lines(&model, &cmd.src, &cmd.tgt, cmd.points, &cmd.infer.options())?;
    let mut out = output(None)?;
    lines
        .iter()
        .try_for_each(|l| writeln!(out, "{}\t{}", l.label, l.text))
        .and_then(|_| out.flush())
        .map_err(stdout_err)
}

fn cmd_nn(cmd: NnCmd) -> CmdResult {
    let model = persistence::load(&cmd.model)?;
    let corpus = cmd.corpus.as_deref().map(read_corpus_file).transpose()?;
    let z = infer_latent(&model, &cmd.query, &cmd.infer.options())?;
    let hits = genlab::nearest_neighbors(&model, &z, cmd.k)?;
    let mut out = output(None)?;
    hits.iter()
        .enumerate()
        .try_for_each(
            |(rank, &(i, c))| match corpus.as_ref().and_then(|lines| lines.get(i)) {
                Some(text) => writeln!(out, "{}\t{i}\t{c:.6}\t{text}", rank + 1),
                None => writeln!(out, "{}\t{i}\t{c:.6}", rank + 1),
            },
        )
        .and_then(|_| out.flush())
        .map_err(stdout_err)
}

fn cmd_sweep(cmd: SweepCmd) -> CmdResult {
    let opts = InferOptions {
        steps: cmd.steps,
        lr: cmd.infer_lr,
        plain_sgd: cmd.infer_plain_sgd,
    };
    let mut rows = Vec::with_capacity(cmd.dims.len());
    for &dim in &cmd.dims {
        let (model, _) = fit(cmd.model.into(), dim, &cmd.corpus, &cmd.hyper)?;
        let acc = probe_accuracy(
            &model,
            &cmd.train,
            &cmd.test,
            &opts,
            cmd.hyper.threads,
            &cmd.probe.config(),
        )?;
        eprintln!("dim {dim} accuracy {acc}");
        rows.push((dim, acc));
    }
    let mut out = output(cmd.csv.as_deref())?;
    let write = |out: &mut Box<dyn Write>| -> io::Result<()> {
        writeln!(out, "dim,accuracy")?;
        for (dim, acc) in &rows {
            writeln!(out, "{dim},{acc}")?;
        }
        out.flush()
    };
    write(&mut out).map_err(stdout_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Embed(c) => cmd_embed(c),
        Command::EvalSts(c) => cmd_eval_sts(c),
        Command::Probe(c) => cmd_probe(c),
        Command::Interpolate(c) => cmd_interpolate(c),
        Command::Nn(c) => cmd_nn(c),
        Command::Sweep(c) => cmd_sweep(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
