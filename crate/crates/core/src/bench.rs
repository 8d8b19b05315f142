//! Experiment harness: the two-type synthetic generator, online evaluation
//! of every predictor family, learning curves and hyperparameter sweeps.
//!
//! Everything is a deterministic function of its seeds. The only
//! nondeterministic output is wall-clock time, which can be zeroed.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{lmm_em_fit, online_pst_run, LmmConfig, LmmFilter, LmmModel, OnlinePstConfig};
use crate::context_tree::PenaltyProfile;
use crate::corpus::{Dataset, Symbol};
use crate::error::{Error, Result};
use crate::lex_train::{augment_pool, train_lex, ExpertPool, SgdConfig, TrainConfig};
use crate::online_wm::{default_eta, wm_run, Eta, WeightLoss, WmMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub k: usize,
    pub m: usize,
    pub t: usize,
    pub seed: u64,
}

/// Draws `m` sequences of length `t`. Each sequence first picks a type
/// `j ∈ {1, 2}` uniformly, then draws i.i.d. symbols with `P(j) = 1/2` and
/// `P(x) = 1/(2(k-1))` for every other symbol. Returns the hidden types too.
///
/// With `k = 2` both types are the uniform distribution.
pub fn gen_synthetic(config: &SyntheticConfig) -> Result<(Dataset, Vec<u8>)> {
    let SyntheticConfig { k, m, t, seed } = *config;
    if k < 2 || m == 0 || t == 0 {
        return Err(Error::invalid("synthetic data needs k >= 2, m >= 1, T >= 1"));
    }
    let mut rng = crate::rng::stream(seed, 0);
    let mut sequences = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let j: Symbol = rng.gen_range(1..=2);
        let seq: Vec<Symbol> = (0..t)
            .map(|_| {
                if rng.gen::<f64>() < 0.5 {
                    j
                } else {
                    let v = rng.gen_range(1..k as Symbol);
                    if v < j {
                        v
                    } else {
                        v + 1
                    }
                }
            })
            .collect();
        sequences.push(seq);
        labels.push(j as u8);
    }
    Ok((Dataset::from_symbols(k, sequences)?, labels))
}

/// Expected accuracy of always predicting symbol 1 (or 2) on synthetic data.
pub fn constant_predictor_accuracy(k: usize) -> f64 {
    0.5 * 0.5 + 0.5 / (2.0 * (k as f64 - 1.0))
}

/// Fraction of sequences whose assigned expert agrees with the majority
/// expert of their hidden type.
pub fn purity(assignment: &[usize], labels: &[u8]) -> f64 {
    let mut counts: std::collections::BTreeMap<(u8, usize), usize> = Default::default();
    for (&a, &l) in assignment.iter().zip(labels) {
        *counts.entry((l, a)).or_default() += 1;
    }
    let mut best: std::collections::BTreeMap<u8, usize> = Default::default();
    for (&(l, _), &c) in &counts {
        let e = best.entry(l).or_default();
        *e = (*e).max(c);
    }
    best.values().sum::<usize>() as f64 / assignment.len() as f64
}

/// Outcome of predicting one sequence online.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    pub accuracy: f64,
    /// Weighted Majority diagnostics, for pool predictors.
    pub wm: Option<WmDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WmDiagnostics {
    pub avg_loss: f64,
    pub best_expert_loss: f64,
    pub regret_bound: f64,
}

/// Something that predicts a sequence left to right.
pub trait OnlinePredictor: Sync {
    fn k(&self) -> usize;

    /// Predicts `x` online; `index` identifies the sequence within the test
    /// set (used to derive per-sequence seeds).
    fn run(&self, index: usize, x: &[Symbol]) -> SequenceOutcome;
}

/// Weighted Majority over a trained pool.
#[derive(Debug, Clone)]
pub struct PoolPredictor {
    pub pool: ExpertPool,
    pub mode: WmMode,
    pub weight_loss: WeightLoss,
    /// Learning rate; `None` uses the fixed `sqrt(log r / T)` per sequence.
    pub eta: Option<Eta>,
}

impl PoolPredictor {
    pub fn new(pool: ExpertPool) -> Self {
        PoolPredictor {
            pool,
            mode: WmMode::Expected,
            weight_loss: WeightLoss::ZeroOne,
            eta: None,
        }
    }
}

impl OnlinePredictor for PoolPredictor {
    fn k(&self) -> usize {
        self.pool.k()
    }

    fn run(&self, index: usize, x: &[Symbol]) -> SequenceOutcome {
        let eta = self
            .eta
            .unwrap_or_else(|| Eta::Fixed(default_eta(self.pool.len(), x.len())));
        let mode = match self.mode {
            WmMode::Sampled { seed } => WmMode::Sampled {
                seed: seed.wrapping_add(index as u64),
            },
            WmMode::Expected => WmMode::Expected,
        };
        let rep = wm_run(&self.pool.experts, x, eta, mode, self.weight_loss).expect("pool and sequence are nonempty");
        SequenceOutcome {
            accuracy: 1.0 - rep.avg_loss,
            wm: Some(WmDiagnostics {
                avg_loss: rep.avg_loss,
                best_expert_loss: rep.best_expert_loss,
                regret_bound: rep.regret_bound,
            }),
        }
    }
}

impl OnlinePredictor for LmmModel {
    fn k(&self) -> usize {
        LmmModel::k(self)
    }

    fn run(&self, _: usize, x: &[Symbol]) -> SequenceOutcome {
        let mut filter = LmmFilter::new(self);
        let mut correct = 0usize;
        for &sym in x {
            correct += usize::from(filter.predict() == sym);
            filter.observe(sym);
        }
        SequenceOutcome {
            accuracy: correct as f64 / x.len() as f64,
            wm: None,
        }
    }
}

/// The online PST baseline for a fixed alphabet size.
#[derive(Debug, Clone)]
pub struct OnlinePstPredictor {
    pub k: usize,
    pub config: OnlinePstConfig,
}

impl OnlinePredictor for OnlinePstPredictor {
    fn k(&self) -> usize {
        self.k
    }

    fn run(&self, _: usize, x: &[Symbol]) -> SequenceOutcome {
        SequenceOutcome {
            accuracy: online_pst_run(x, self.k, &self.config).accuracy(),
            wm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub predictor: String,
    pub per_sequence: Vec<SequenceOutcome>,
    pub mean_accuracy: f64,
    pub mean_wm_loss: Option<f64>,
    pub mean_best_expert_loss: Option<f64>,
    pub mean_regret_bound: Option<f64>,
    pub runtime: Duration,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Runs `predictor` online over every test sequence.
pub fn evaluate_online<P: OnlinePredictor + ?Sized>(predictor: &P, id: &str, test: &Dataset) -> Result<EvalReport> {
    if predictor.k() != test.k() {
        return Err(Error::AlphabetMismatch {
            expected: predictor.k(),
            found: test.k(),
        });
    }
    let start = Instant::now();
    let per_sequence: Vec<SequenceOutcome> = test
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(i, x)| predictor.run(i, x.symbols()))
        .collect();
    let runtime = start.elapsed();
    let wm: Option<Vec<WmDiagnostics>> = per_sequence.iter().map(|o| o.wm).collect();
    Ok(EvalReport {
        predictor: id.to_string(),
        mean_accuracy: mean(per_sequence.iter().map(|o| o.accuracy)),
        mean_wm_loss: wm.as_ref().map(|w| mean(w.iter().map(|d| d.avg_loss))),
        mean_best_expert_loss: wm.as_ref().map(|w| mean(w.iter().map(|d| d.best_expert_loss))),
        mean_regret_bound: wm.as_ref().map(|w| mean(w.iter().map(|d| d.regret_bound))),
        per_sequence,
        runtime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algo {
    Lex,
    OneLex,
    Lmm,
    OnlinePst,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Lex, Algo::OneLex, Algo::Lmm, Algo::OnlinePst];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Lex => "lex",
            Algo::OneLex => "onelex",
            Algo::Lmm => "lmm",
            Algo::OnlinePst => "onlinepst",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Hyperparameters shared by every algorithm in a run.
///
/// `d` is the history length: the Markov order of the mixture baseline and
/// `d + 1` as the depth cap of context trees (`None` = unbounded trees and
/// is not valid for the mixture).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub r: usize,
    pub d: Option<usize>,
    pub b: f64,
    pub eta0: f64,
    pub epochs: usize,
    pub outer_iters: usize,
    pub alpha: f64,
    pub penalty: PenaltyProfile,
    /// Append a 1-LEX expert to LEX pools.
    pub augment: bool,
    /// Step size and radius of the online PST baseline.
    pub pst_eta0: f64,
    pub pst_b: f64,
    /// Weighted Majority settings for pool predictors; `None` is the fixed
    /// rate `sqrt(log r / T)`.
    pub wm_eta: Option<Eta>,
    pub wm_weight_loss: WeightLoss,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            r: 2,
            d: Some(2),
            b: 10.0,
            eta0: 1.0,
            epochs: 5,
            outer_iters: 50,
            alpha: 0.1,
            penalty: PenaltyProfile::default(),
            augment: true,
            pst_eta0: 1.0,
            pst_b: 10.0,
            wm_eta: Some(Eta::Anytime),
            wm_weight_loss: WeightLoss::ZeroOne,
        }
    }
}

impl ModelParams {
    pub fn train_config(&self, r: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            r,
            b: self.b,
            penalty: self.penalty,
            cap: self.d.map(|d| d + 1),
            sgd: SgdConfig {
                eta0: self.eta0,
                epochs: self.epochs,
                per_position: false,
            },
            outer_iters: self.outer_iters,
            seed,
            tolerance: 1e-5,
        }
    }

    pub fn lmm_config(&self, seed: u64) -> LmmConfig {
        LmmConfig {
            r: self.r,
            d: self.d.unwrap_or(1),
            alpha: self.alpha,
            max_iters: 100,
            tolerance: 1e-6,
            seed,
        }
    }

    pub fn pool_predictor(&self, pool: ExpertPool, mode: WmMode) -> PoolPredictor {
        PoolPredictor {
            pool,
            mode,
            weight_loss: self.wm_weight_loss,
            eta: self.wm_eta,
        }
    }

    pub fn pst_config(&self) -> OnlinePstConfig {
        OnlinePstConfig {
            penalty: self.penalty,
            cap: self.d.map(|d| d + 1),
            eta0: self.pst_eta0,
            b: self.pst_b,
        }
    }
}

/// A trained predictor of any family.
pub enum Trained {
    Pool(PoolPredictor),
    Lmm(LmmModel),
    OnlinePst(OnlinePstPredictor),
}

impl Trained {
    pub fn as_predictor(&self) -> &dyn OnlinePredictor {
        match self {
            Trained::Pool(p) => p,
            Trained::Lmm(m) => m,
            Trained::OnlinePst(p) => p,
        }
    }
}

/// Trains `algo` on `train`. The online PST ignores the training data.
pub fn train_algo(algo: Algo, train: &Dataset, params: &ModelParams, seed: u64, mode: WmMode) -> Result<Trained> {
    Ok(match algo {
        Algo::Lex => {
            let config = params.train_config(params.r, seed);
            let mut pool = train_lex(train, &config)?.pool;
            if params.augment {
                pool = augment_pool(&pool, train, &config)?;
            }
            Trained::Pool(params.pool_predictor(pool, mode))
        }
        Algo::OneLex => {
            let pool = train_lex(train, &params.train_config(1, seed))?.pool;
            Trained::Pool(params.pool_predictor(pool, mode))
        }
        Algo::Lmm => Trained::Lmm(lmm_em_fit(train, &params.lmm_config(seed))?.0),
        Algo::OnlinePst => Trained::OnlinePst(OnlinePstPredictor {
            k: train.k(),
            config: params.pst_config(),
        }),
    })
}

/// One learning-curve measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub algo: Algo,
    pub train_size: usize,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub wm_avg_loss: Option<f64>,
    pub best_expert_loss: Option<f64>,
    pub regret_bound: Option<f64>,
    pub wall_ms: u128,
}

pub const CSV_HEADER: &str = "algo,train_size,trial,seed,accuracy,wm_avg_loss,best_expert_loss,regret_bound,wall_ms";

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl CurveRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{},{},{},{}",
            self.algo,
            self.train_size,
            self.trial,
            self.seed,
            self.accuracy,
            opt(self.wm_avg_loss),
            opt(self.best_expert_loss),
            opt(self.regret_bound),
            self.wall_ms
        )
    }
}

pub fn rows_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub k: usize,
    pub t: usize,
    pub test_m: usize,
    /// Ascending training-set sizes.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub params: ModelParams,
    pub algos: Vec<Algo>,
    pub mode: WmMode,
    /// Record wall-clock time (otherwise `wall_ms` is 0 and output is
    /// byte-for-byte reproducible).
    pub timing: bool,
}

impl CurveConfig {
    /// k=20, T=100, 100 test sequences, 5 trials.
    pub fn desk_scale() -> Self {
        CurveConfig {
            k: 20,
            t: 100,
            test_m: 100,
            sizes: vec![10, 25, 50, 100, 200, 300],
            trials: 5,
            seed: 1,
            params: ModelParams::default(),
            algos: Algo::ALL.to_vec(),
            mode: WmMode::Expected,
            timing: true,
        }
    }

    /// k=200, T=250, 400 test sequences, up to 1000 training sequences.
    pub fn paper_scale() -> Self {
        CurveConfig {
            k: 200,
            t: 250,
            test_m: 400,
            sizes: vec![10, 25, 50, 100, 250, 500, 1000],
            ..Self::desk_scale()
        }
    }

    /// Test-set seed; trial `i` trains on data drawn with `trial_seed(i)`.
    pub fn test_seed(&self) -> u64 {
        self.seed
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(1 + trial as u64)
    }
}

/// Trains every algorithm on growing prefixes of a per-trial training
/// corpus and evaluates on one fixed test set.
pub fn learning_curve(config: &CurveConfig) -> Result<Vec<CurveRow>> {
    if config.sizes.is_empty() || config.trials == 0 {
        return Err(Error::invalid("need at least one size and one trial"));
    }
    if config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("training sizes must be strictly ascending"));
    }
    let max_size = *config.sizes.last().expect("nonempty");
    let (test, _) = gen_synthetic(&SyntheticConfig {
        k: config.k,
        m: config.test_m,
        t: config.t,
        seed: config.test_seed(),
    })?;

    let mut rows = Vec::new();
    for trial in 0..config.trials {
        let seed = config.trial_seed(trial);
        let (corpus, _) = gen_synthetic(&SyntheticConfig {
            k: config.k,
            m: max_size,
            t: config.t,
            seed,
        })?;
        let mut pst_row: Option<CurveRow> = None;
        for &size in &config.sizes {
            let train = corpus.take(size)?;
            for &algo in &config.algos {
                if algo == Algo::OnlinePst {
                    // independent of the training data: evaluate once per trial
                    if pst_row.is_none() {
                        pst_row = Some(measure(algo, &train, &test, config, trial, seed)?);
                    }
                    let mut row = pst_row.clone().expect("set above");
                    row.train_size = size;
                    rows.push(row);
                } else {
                    rows.push(measure(algo, &train, &test, config, trial, seed)?);
                }
            }
        }
    }
    Ok(rows)
}

fn measure(
    algo: Algo,
    train: &Dataset,
    test: &Dataset,
    config: &CurveConfig,
    trial: usize,
    seed: u64,
) -> Result<CurveRow> {
    let start = Instant::now();
    let trained = train_algo(algo, train, &config.params, seed, config.mode)?;
    let report = evaluate_online(trained.as_predictor(), algo.name(), test)?;
    let wall_ms = if config.timing { start.elapsed().as_millis() } else { 0 };
    Ok(CurveRow {
        algo,
        train_size: train.len(),
        trial,
        seed,
        accuracy: report.mean_accuracy,
        wm_avg_loss: report.mean_wm_loss,
        best_expert_loss: report.mean_best_expert_loss,
        regret_bound: report.mean_regret_bound,
        wall_ms,
    })
}

/// Mean and sample standard deviation of accuracy per (algo, size).
pub fn summarize(rows: &[CurveRow]) -> Vec<(Algo, usize, f64, f64)> {
    let mut groups: std::collections::BTreeMap<(usize, Algo), Vec<f64>> = Default::default();
    for row in rows {
        groups.entry((row.train_size, row.algo)).or_default().push(row.accuracy);
    }
    groups
        .into_iter()
        .map(|((size, algo), accs)| {
            let n = accs.len() as f64;
            let mu = accs.iter().sum::<f64>() / n;
            let var = if accs.len() > 1 {
                accs.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (algo, size, mu, var.sqrt())
        })
        .collect()
}

/// One hyperparameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r: usize,
    pub d: usize,
    pub b: f64,
    pub alpha: f64,
    pub eta0: f64,
}

impl SweepPoint {
    fn cmp_lex(&self, other: &Self) -> std::cmp::Ordering {
        self.r
            .cmp(&other.r)
            .then(self.d.cmp(&other.d))
            .then(self.b.total_cmp(&other.b))
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.eta0.total_cmp(&other.eta0))
    }

    fn params(&self, base: &ModelParams) -> ModelParams {
        ModelParams {
            r: self.r,
            d: Some(self.d),
            b: self.b,
            alpha: self.alpha,
            eta0: self.eta0,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub algo: Algo,
    pub r: Vec<usize>,
    pub d: Vec<usize>,
    pub b: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eta0: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.r.is_empty() || self.d.is_empty() || self.b.is_empty() || self.alpha.is_empty() || self.eta0.is_empty()
        {
            return Err(Error::invalid("every grid list must be nonempty"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("need at least 2 folds"));
        }
        Ok(())
    }

    /// Grid points relevant to the algorithm; lists an algorithm ignores are
    /// pinned to their first value.
    pub fn points(&self) -> Vec<SweepPoint> {
        let (rs, bs, alphas, etas): (&[usize], &[f64], &[f64], &[f64]) = match self.algo {
            Algo::Lex => (&self.r, &self.b, &self.alpha[..1], &self.eta0),
            Algo::OneLex => (&[1], &self.b, &self.alpha[..1], &self.eta0),
            Algo::Lmm => (&self.r, &self.b[..1], &self.alpha, &self.eta0[..1]),
            Algo::OnlinePst => (&self.r[..1], &self.b, &self.alpha[..1], &self.eta0),
        };
        let mut out = Vec::new();
        for &r in rs {
            for &d in &self.d {
                for &b in bs {
                    for &alpha in alphas {
                        for &eta0 in etas {
                            out.push(SweepPoint { r, d, b, alpha, eta0 });
                        }
                    }
                }
            }
        }
        out
    }

    /// Parses `key = v1, v2, ...` lines (`algo`, `r`, `d`, `b`, `alpha`,
    /// `eta0`, `folds`, `seed`); `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = SweepGrid {
            algo: Algo::Lex,
            r: vec![2],
            d: vec![2],
            b: vec![10.0],
            alpha: vec![0.1],
            eta0: vec![1.0],
            folds: 3,
            seed: 0,
        };
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(n, "expected key = values"))?;
            let value = value.trim();
            fn list<T: FromStr>(v: &str, n: usize) -> Result<Vec<T>> {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|_| Error::parse(n, format!("bad value {s:?}")))
                    })
                    .collect()
            }
            match key.trim() {
                "algo" => grid.algo = value.parse().map_err(|_| Error::parse(n, "bad algo"))?,
                "r" => grid.r = list(value, n)?,
                "d" => grid.d = list(value, n)?,
                "b" => grid.b = list(value, n)?,
                "alpha" => grid.alpha = list(value, n)?,
                "eta0" => grid.eta0 = list(value, n)?,
                "folds" => grid.folds = value.parse().map_err(|_| Error::parse(n, "bad folds"))?,
                "seed" => grid.seed = value.parse().map_err(|_| Error::parse(n, "bad seed"))?,
                other => return Err(Error::parse(n, format!("unknown key {other:?}"))),
            }
        }
        grid.validate()?;
        Ok(grid)
    }
}

pub enum Validation<'a> {
    Holdout(&'a Dataset),
    Folds(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: SweepPoint,
    pub best_accuracy: f64,
    /// Every point with its mean validation accuracy, in grid order.
    pub table: Vec<(SweepPoint, f64)>,
}

impl SweepResult {
    pub fn to_csv(&self, algo: Algo) -> String {
        let mut out = String::from("algo,r,d,b,alpha,eta0,accuracy,selected\n");
        for (p, acc) in &self.table {
            let _ = writeln!(
                out,
                "{algo},{},{},{:?},{:?},{:?},{acc:.6},{}",
                p.r,
                p.d,
                p.b,
                p.alpha,
                p.eta0,
                u8::from(p.cmp_lex(&self.best).is_eq())
            );
        }
        out
    }
}

/// Seeded fold assignment: position `i` of a shuffled order goes to fold
/// `i mod folds`.
pub fn fold_indices(m: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut crate::rng::stream(seed, 0));
    let mut out = vec![Vec::new(); folds];
    for (pos, i) in order.into_iter().enumerate() {
        out[pos % folds].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

/// Evaluates every grid point and selects the one with the best mean
/// validation accuracy (ties go to the lexicographically smallest point).
pub fn sweep(grid: &SweepGrid, train: &Dataset, validation: Validation<'_>, base: &ModelParams) -> Result<SweepResult> {
    grid.validate()?;
    let points = grid.points();
    let splits: Vec<(Dataset, Dataset)> = match validation {
        Validation::Holdout(val) => vec![(train.clone(), val.clone())],
        Validation::Folds(folds) => {
            if folds < 2 || folds > train.len() {
                return Err(Error::invalid(format!(
                    "cannot make {folds} folds from {} sequences",
                    train.len()
                )));
            }
            let parts = fold_indices(train.len(), folds, grid.seed);
            (0..folds)
                .map(|f| {
                    let rest: Vec<usize> = (0..folds).filter(|&g| g != f).flat_map(|g| parts[g].clone()).collect();
                    Ok((train.subset(&rest)?, train.subset(&parts[f])?))
                })
                .collect::<Result<_>>()?
        }
    };
    let table: Vec<(SweepPoint, f64)> = points
        .iter()
        .map(|p| {
            let params = p.params(base);
            let accs = splits
                .iter()
                .map(|(tr, va)| {
                    let trained = train_algo(grid.algo, tr, &params, grid.seed, WmMode::Expected)?;
                    Ok(evaluate_online(trained.as_predictor(), grid.algo.name(), va)?.mean_accuracy)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((*p, accs.iter().sum::<f64>() / accs.len() as f64))
        })
        .collect::<Result<_>>()?;
    let (best, best_accuracy) = table
        .iter()
        .copied()
        .reduce(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0.cmp_lex(&a.0).is_lt()) {
                b
            } else {
                a
            }
        })
        .expect("grid is nonempty");
    Ok(SweepResult {
        best,
        best_accuracy,
        table,
    })
}
