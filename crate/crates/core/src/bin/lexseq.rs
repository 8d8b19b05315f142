use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lexseq::baselines::{lmm_em_fit, LmmModel};
use lexseq::bench::{
    evaluate_online, gen_synthetic, learning_curve, rows_to_csv, summarize, sweep, Algo, CurveConfig, ModelParams,
    OnlinePstPredictor, SweepGrid, SyntheticConfig, Trained, Validation,
};
use lexseq::lex_train::{augment_pool, train_lex, ExpertPool};
use lexseq::online_wm::{Eta, WeightLoss};
use lexseq::{Dataset, Error, PenaltyProfile, WmMode};

#[derive(Parser)]
#[command(
    name = "lexseq",
    version,
    about = "Context-tree expert pools for online sequence prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-type synthetic corpus.
    Gen(GenArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Predict a corpus online and report per-sequence accuracy.
    Eval(EvalArgs),
    /// Learning curves for all four algorithms on synthetic data.
    Curve(CurveArgs),
    /// Grid search with cross-validation.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 300)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the hidden type of each sequence, one per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainAlgo {
    Lex,
    Onelex,
    Lmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalAlgo {
    Lex,
    Onelex,
    Lmm,
    Onlinepst,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Expected,
    Sampled,
}

/// Model hyperparameters shared by train, curve and sweep.
#[derive(Args)]
struct ParamArgs {
    /// Number of experts (mixture components for lmm).
    #[arg(long, default_value_t = 2)]
    r: usize,
    /// Norm radius B.
    #[arg(long, default_value_t = ModelParams::default().b)]
    b: f64,
    /// History length (Markov order; trees are capped at depth d+1).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Additive smoothing for lmm.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Base SGD step size.
    #[arg(long, default_value_t = 1.0)]
    eta0: f64,
    /// SGD passes per M-step.
    #[arg(long, default_value_t = ModelParams::default().epochs)]
    epochs: usize,
    /// Maximum alternating iterations.
    #[arg(long, default_value_t = 50)]
    outer: usize,
    /// Node penalty profile: quadratic, normalized, decreasing or power:E[:S].
    #[arg(long, default_value = "quadratic")]
    penalty: PenaltyProfile,
    /// Do not append a 1-LEX expert to LEX pools.
    #[arg(long)]
    no_augment: bool,
    /// Weighted Majority rate: `anytime` (sqrt(log r / t)), `fixed` (sqrt(log r / T)), or a number.
    #[arg(long, default_value = "anytime")]
    wm_eta: String,
    /// Loss driving the Weighted Majority update.
    #[arg(long, value_enum, default_value_t = WmLoss::ZeroOne)]
    wm_loss: WmLoss,
}

#[derive(Clone, Copy, ValueEnum)]
enum WmLoss {
    ZeroOne,
    Log,
}

fn parse_wm_eta(s: &str) -> Result<Option<Eta>, Error> {
    match s {
        "fixed" => Ok(None),
        "anytime" => Ok(Some(Eta::Anytime)),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0)
            .map(|v| Some(Eta::Fixed(v)))
            .ok_or_else(|| Error::InvalidArgument(format!("bad --wm-eta {v:?}"))),
    }
}

impl ParamArgs {
    fn params(&self) -> Result<ModelParams, Error> {
        Ok(ModelParams {
            r: self.r,
            d: Some(self.d),
            b: self.b,
            eta0: self.eta0,
            epochs: self.epochs,
            outer_iters: self.outer,
            alpha: self.alpha,
            penalty: self.penalty,
            augment: !self.no_augment,
            wm_eta: parse_wm_eta(&self.wm_eta)?,
            wm_weight_loss: match self.wm_loss {
                WmLoss::ZeroOne => WeightLoss::ZeroOne,
                WmLoss::Log => WeightLoss::Log,
            },
            ..ModelParams::default()
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    algo: TrainAlgo,
    #[arg(long)]
    data: PathBuf,
    /// Token vocabulary for raw corpora (`index<TAB>token` lines).
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    algo: EvalAlgo,
    /// Trained model (not needed for onlinepst).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Expected)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Online PST settings.
    #[arg(long, default_value_t = ModelParams::default().pst_b)]
    b: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = ModelParams::default().pst_eta0)]
    eta0: f64,
    /// Weighted Majority rate for pools: `anytime`, `fixed` or a number.
    #[arg(long, default_value = "anytime")]
    wm_eta: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    /// Comma-separated ascending training sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// k=200, T=250, 400 test sequences, sizes up to 1000.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    test_m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    params: ParamArgs,
    /// Online PST step size and radius.
    #[arg(long, default_value_t = ModelParams::default().pst_eta0)]
    pst_eta0: f64,
    #[arg(long, default_value_t = ModelParams::default().pst_b)]
    pst_b: f64,
    /// Report the randomized forecaster instead of expected accuracy.
    #[arg(long)]
    sampled: bool,
    /// Write wall_ms = 0 so the report is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Training corpus; a synthetic desk-scale corpus when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Held-out validation corpus instead of folds.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Overrides the grid file's fold count.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_format_error() {
            Failure::Data(e)
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn write_out(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| {
        Failure::Data(Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn load_data(path: &Path, vocab: Option<&Path>) -> Result<Dataset, Error> {
    match vocab {
        Some(v) => Dataset::load_with_vocab(path, v),
        None => Dataset::load(path),
    }
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let (ds, labels) = gen_synthetic(&SyntheticConfig {
        k: a.k,
        m: a.m,
        t: a.t,
        seed: a.seed,
    })?;
    ds.save(&a.out)?;
    if let Some(path) = a.labels {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        write_out(&path, &text)?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let ds = load_data(&a.data, a.vocab.as_deref())?;
    let params = a.params.params()?;
    match a.algo {
        TrainAlgo::Lex | TrainAlgo::Onelex => {
            let r = if matches!(a.algo, TrainAlgo::Onelex) {
                1
            } else {
                params.r
            };
            let config = params.train_config(r, a.seed);
            let outcome = train_lex(&ds, &config)?;
            eprintln!(
                "stopped after {} iterations ({:?}), objective {:.6}",
                outcome.outer_iters,
                outcome.stop,
                outcome.trace.last().map_or(f64::NAN, |e| e.objective)
            );
            let pool = if matches!(a.algo, TrainAlgo::Lex) && params.augment {
                augment_pool(&outcome.pool, &ds, &config)?
            } else {
                outcome.pool
            };
            pool.save(&a.out)?;
        }
        TrainAlgo::Lmm => {
            let (model, trace) = lmm_em_fit(&ds, &params.lmm_config(a.seed))?;
            eprintln!(
                "EM ran {} iterations, log-likelihood {:.6}",
                trace.loglik.len(),
                trace.loglik.last().copied().unwrap_or(f64::NAN)
            );
            model.save(&a.out)?;
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let ds = load_data(&a.data, a.vocab.as_deref())?;
    let mode = match a.mode {
        Mode::Expected => WmMode::Expected,
        Mode::Sampled => WmMode::Sampled { seed: a.seed },
    };
    let model_path = || {
        a.model
            .as_deref()
            .ok_or_else(|| Failure::Usage("--model is required for this algorithm".into()))
    };
    let (algo, trained) = match a.algo {
        EvalAlgo::Lex | EvalAlgo::Onelex => {
            let pool = ExpertPool::load(model_path()?)?;
            let algo = if matches!(a.algo, EvalAlgo::Lex) {
                Algo::Lex
            } else {
                Algo::OneLex
            };
            let params = ModelParams {
                wm_eta: parse_wm_eta(&a.wm_eta)?,
                ..ModelParams::default()
            };
            (algo, Trained::Pool(params.pool_predictor(pool, mode)))
        }
        EvalAlgo::Lmm => (Algo::Lmm, Trained::Lmm(LmmModel::load(model_path()?)?)),
        EvalAlgo::Onlinepst => {
            let params = ModelParams {
                d: Some(a.d),
                pst_b: a.b,
                pst_eta0: a.eta0,
                ..ModelParams::default()
            };
            (
                Algo::OnlinePst,
                Trained::OnlinePst(OnlinePstPredictor {
                    k: ds.k(),
                    config: params.pst_config(),
                }),
            )
        }
    };
    let report = evaluate_online(trained.as_predictor(), algo.name(), &ds)?;
    let mut csv = String::from("algo,sequence,length,accuracy,wm_avg_loss,best_expert_loss,regret_bound\n");
    for (i, (o, seq)) in report.per_sequence.iter().zip(ds.sequences()).enumerate() {
        let wm = o.wm.map_or_else(
            || ",,".to_string(),
            |w| format!("{:.6},{:.6},{:.6}", w.avg_loss, w.best_expert_loss, w.regret_bound),
        );
        csv.push_str(&format!("{algo},{i},{},{:.6},{wm}\n", seq.len(), o.accuracy));
    }
    write_out(&a.out, &csv)?;
    println!(
        "{algo} mean accuracy {:.6} over {} sequences",
        report.mean_accuracy,
        ds.len()
    );
    Ok(())
}

fn cmd_curve(a: CurveArgs) -> CliResult {
    let mut config = if a.paper_scale {
        CurveConfig::paper_scale()
    } else {
        CurveConfig::desk_scale()
    };
    if let Some(sizes) = a.sizes {
        config.sizes = sizes;
    }
    if let Some(trials) = a.trials {
        config.trials = trials;
    }
    config.k = a.k.unwrap_or(config.k);
    config.t = a.t.unwrap_or(config.t);
    config.test_m = a.test_m.unwrap_or(config.test_m);
    config.seed = a.seed;
    config.params = ModelParams {
        pst_eta0: a.pst_eta0,
        pst_b: a.pst_b,
        ..a.params.params()?
    };
    config.mode = if a.sampled {
        WmMode::Sampled { seed: a.seed }
    } else {
        WmMode::Expected
    };
    config.timing = !a.no_timing;
    let rows = learning_curve(&config)?;
    write_out(&a.out, &rows_to_csv(&rows))?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "algo,train_size,mean_accuracy,std");
    for (algo, size, mu, sd) in summarize(&rows) {
        let _ = writeln!(stdout, "{algo},{size},{mu:.4},{sd:.4}");
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let text = std::fs::read_to_string(&a.grid).map_err(|e| {
        Failure::Data(Error::Io {
            path: a.grid.clone(),
            source: e,
        })
    })?;
    let mut grid = SweepGrid::parse(&text)?;
    if let Some(f) = a.folds {
        grid.folds = f;
    }
    grid.validate()?;
    let train = match &a.data {
        Some(p) => load_data(p, a.vocab.as_deref())?,
        None => {
            let desk = CurveConfig::desk_scale();
            gen_synthetic(&SyntheticConfig {
                k: desk.k,
                m: 100,
                t: desk.t,
                seed: grid.seed,
            })?
            .0
        }
    };
    let val = a.val.as_deref().map(|p| load_data(p, a.vocab.as_deref())).transpose()?;
    let validation = match &val {
        Some(v) => Validation::Holdout(v),
        None => Validation::Folds(grid.folds),
    };
    let result = sweep(&grid, &train, validation, &ModelParams::default())?;
    write_out(&a.out, &result.to_csv(grid.algo))?;
    let b = result.best;
    println!(
        "best {}: r={} d={} b={} alpha={} eta0={} accuracy={:.6}",
        grid.algo, b.r, b.d, b.b, b.alpha, b.eta0, result.best_accuracy
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("LEXSEQ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Curve(a) => cmd_curve(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
