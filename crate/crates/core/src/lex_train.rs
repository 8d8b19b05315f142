//! LEX: learning a pool of context-tree experts by alternating minimisation
//! of the empirical hindsight loss
//!
//! ```text
//!     (1/m) sum_i min_j L(f_j, x_i)
//! ```
//!
//! The assignment step puts every training sequence on its best expert; the
//! expert step runs projected SGD for each expert on the sequences assigned to
//! it. Each expert is kept inside the norm ball `{U : |U| <= B}`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::context_tree::{ContextTreeModel, PenaltyProfile};
use crate::corpus::{read_file, write_file, Dataset, Sequence};
use crate::error::{Error, Result};
use crate::losses::{argmin, log_loss_grad_into, sequence_loss, LossKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    /// Base step size; the step at update `tau` is `eta0 / sqrt(tau)`.
    pub eta0: f64,
    /// Passes over the assigned sequences per expert step.
    pub epochs: usize,
    /// Update after every position instead of once per sequence.
    pub per_position: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            eta0: 1.0,
            epochs: 1,
            per_position: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub r: usize,
    /// Norm budget of every expert.
    pub b: f64,
    pub penalty: PenaltyProfile,
    /// Maximum tree depth (root has depth 1); `None` for unbounded.
    pub cap: Option<usize>,
    pub sgd: SgdConfig,
    pub outer_iters: usize,
    pub seed: u64,
    /// Stop once the objective improves by less than this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            r: 2,
            b: 10.0,
            penalty: PenaltyProfile::default(),
            cap: None,
            sgd: SgdConfig::default(),
            outer_iters: 50,
            seed: 0,
            tolerance: 1e-5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::invalid("r must be at least 1"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::invalid(format!("B must be positive, got {}", self.b)));
        }
        if !(self.sgd.eta0 >= 0.0 && self.sgd.eta0.is_finite()) {
            return Err(Error::invalid("eta0 must be finite and nonnegative"));
        }
        if self.sgd.epochs == 0 || self.outer_iters == 0 {
            return Err(Error::invalid("epochs and outer iterations must be positive"));
        }
        if self.cap == Some(0) {
            return Err(Error::invalid("depth cap must be at least 1"));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::invalid("tolerance must be nonnegative"));
        }
        self.penalty.validate()
    }

    /// Canonical one-line description, hashed into the pool digest.
    pub fn canonical(&self) -> String {
        format!(
            "r={} b={:?} penalty={} cap={} eta0={:?} epochs={} per_position={} outer={} seed={} tol={:?}",
            self.r,
            self.b,
            self.penalty,
            self.cap.map_or("inf".to_string(), |d| d.to_string()),
            self.sgd.eta0,
            self.sgd.epochs,
            self.sgd.per_position,
            self.outer_iters,
            self.seed,
            self.tolerance,
        )
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// An ordered set of trained experts sharing an alphabet and norm budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool {
    pub experts: Vec<ContextTreeModel>,
    pub b: f64,
    pub digest: String,
}

impl ExpertPool {
    pub fn new(experts: Vec<ContextTreeModel>, b: f64, digest: impl Into<String>) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::EmptyPool);
        }
        let k = experts[0].k();
        if let Some(e) = experts.iter().find(|e| e.k() != k) {
            return Err(Error::AlphabetMismatch {
                expected: k,
                found: e.k(),
            });
        }
        Ok(ExpertPool {
            experts,
            b,
            digest: digest.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn k(&self) -> usize {
        self.experts[0].k()
    }

    /// Manifest text plus one context-tree text per expert. `names` are the
    /// expert file names recorded in the manifest.
    pub fn to_texts(&self, names: &[String]) -> (String, Vec<String>) {
        assert_eq!(names.len(), self.len());
        let mut manifest = format!(
            "LEXPOOL 1\nr={}\nk={}\nB={:?}\ndigest={}\n",
            self.len(),
            self.k(),
            self.b,
            self.digest
        );
        for (i, name) in names.iter().enumerate() {
            let _ = writeln!(manifest, "expert {} {}", i + 1, name);
        }
        (manifest, self.experts.iter().map(|e| e.to_text()).collect())
    }

    /// Writes the manifest at `path` and each expert next to it as
    /// `<file name>.<i>.pst`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path
            .file_name()
            .ok_or_else(|| Error::invalid(format!("bad pool path {}", path.display())))?
            .to_string_lossy()
            .into_owned();
        let names: Vec<String> = (1..=self.len()).map(|i| format!("{base}.{i}.pst")).collect();
        let (manifest, experts) = self.to_texts(&names);
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for (name, text) in names.iter().zip(&experts) {
            write_file(&dir.join(name), text)?;
        }
        write_file(path, &manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read_file(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_manifest(&text, |name| {
            let p: PathBuf = dir.join(name);
            ContextTreeModel::load(&p).map_err(|e| match e {
                Error::Parse { line, msg } => Error::Parse {
                    line,
                    msg: format!("{}: {msg}", p.display()),
                },
                other => other,
            })
        })
    }

    /// Parses a manifest, resolving expert file names with `load_expert`.
    pub fn from_manifest<F>(text: &str, mut load_expert: F) -> Result<Self>
    where
        F: FnMut(&str) -> Result<ContextTreeModel>,
    {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "LEXPOOL 1")) => {}
            Some((n, _)) => return Err(Error::parse(n, "expected 'LEXPOOL 1'")),
            None => return Err(Error::parse(1, "empty pool manifest")),
        }
        let mut r = None;
        let mut k = None;
        let mut b = None;
        let mut digest = String::new();
        let mut experts = Vec::new();
        for (n, line) in lines {
            if let Some(v) = line.strip_prefix("r=") {
                r = Some(v.parse::<usize>().map_err(|_| Error::parse(n, "bad r"))?);
            } else if let Some(v) = line.strip_prefix("k=") {
                k = Some(v.parse::<usize>().map_err(|_| Error::parse(n, "bad k"))?);
            } else if let Some(v) = line.strip_prefix("B=") {
                b = Some(v.parse::<f64>().map_err(|_| Error::parse(n, "bad B"))?);
            } else if let Some(v) = line.strip_prefix("digest=") {
                digest = v.to_string();
            } else if let Some(rest) = line.strip_prefix("expert ") {
                let (idx, name) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::parse(n, "expected 'expert <i> <file>'"))?;
                if idx.parse::<usize>() != Ok(experts.len() + 1) {
                    return Err(Error::parse(n, "experts must be listed in index order"));
                }
                experts.push(load_expert(name.trim())?);
            } else {
                return Err(Error::parse(n, format!("unexpected line {line:?}")));
            }
        }
        let r = r.ok_or_else(|| Error::parse(0, "manifest missing r"))?;
        let b = b.ok_or_else(|| Error::parse(0, "manifest missing B"))?;
        if experts.len() != r {
            return Err(Error::parse(
                0,
                format!("manifest declares r={r} but lists {} experts", experts.len()),
            ));
        }
        let pool = ExpertPool::new(experts, b, digest)?;
        if let Some(k) = k {
            if k != pool.k() {
                return Err(Error::AlphabetMismatch {
                    expected: k,
                    found: pool.k(),
                });
            }
        }
        Ok(pool)
    }
}

/// Hard assignment of sequences to experts (0-based expert indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn expert_of(&self, seq: usize) -> usize {
        self.0[seq]
    }

    pub fn members(&self, expert: usize) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] == expert).collect()
    }

    pub fn sizes(&self, r: usize) -> Vec<usize> {
        let mut sizes = vec![0; r];
        for &j in &self.0 {
            sizes[j] += 1;
        }
        sizes
    }
}

/// `loss[i][j] = L(f_j, x_i)` under log-loss.
pub fn loss_matrix(experts: &[ContextTreeModel], dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset
        .sequences()
        .par_iter()
        .map(|x| {
            experts
                .iter()
                .map(|f| sequence_loss(f, x.symbols(), LossKind::Log))
                .collect()
        })
        .collect()
}

/// Mean hindsight log-loss of the pool over the dataset.
pub fn objective(experts: &[ContextTreeModel], dataset: &Dataset) -> Result<f64> {
    if experts.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(hindsight_mean(&loss_matrix(experts, dataset)))
}

fn hindsight_mean(matrix: &[Vec<f64>]) -> f64 {
    let total: f64 = matrix.iter().map(|row| argmin(row).map_or(0.0, |(v, _)| v)).sum();
    total / matrix.len() as f64
}

fn assigned_mean(matrix: &[Vec<f64>], assignment: &Assignment) -> f64 {
    let total: f64 = matrix.iter().zip(&assignment.0).map(|(row, &j)| row[j]).sum();
    total / matrix.len() as f64
}

/// Mean log-loss when every sequence is scored by its assigned expert.
pub fn assigned_objective(experts: &[ContextTreeModel], dataset: &Dataset, assignment: &Assignment) -> f64 {
    assigned_mean(&loss_matrix(experts, dataset), assignment)
}

/// Seeded balanced random partition of `m` sequences over `r` experts.
pub fn init_assignment(m: usize, r: usize, seed: u64) -> Result<Assignment> {
    if r == 0 || m < r {
        return Err(Error::invalid(format!("need at least r={r} sequences, got {m}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut crate::rng::stream(seed, 0));
    let mut expert_of = vec![0; m];
    for (pos, &i) in order.iter().enumerate() {
        expert_of[i] = pos % r;
    }
    Ok(Assignment(expert_of))
}

/// Row-wise argmin of a loss matrix; ties go to the lowest expert.
pub fn reassign_from_matrix(matrix: &[Vec<f64>]) -> Assignment {
    Assignment(matrix.iter().map(|row| argmin(row).map_or(0, |(_, j)| j)).collect())
}

/// Puts every sequence on the expert with the smallest log-loss on it.
pub fn reassign(experts: &[ContextTreeModel], dataset: &Dataset) -> Assignment {
    reassign_from_matrix(&loss_matrix(experts, dataset))
}

/// Moves a sequence onto every expert left without one: the sequence with
/// the largest loss under its current expert, taken from an expert that keeps
/// at least one member. Returns the number of moves.
fn repair_empty(assignment: &mut Assignment, matrix: &[Vec<f64>], r: usize) -> usize {
    let mut moves = 0;
    loop {
        let sizes = assignment.sizes(r);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return moves;
        };
        let worst = (0..matrix.len())
            .filter(|&i| sizes[assignment.0[i]] > 1)
            .max_by(|&a, &b| {
                let la = matrix[a][assignment.0[a]];
                let lb = matrix[b][assignment.0[b]];
                la.total_cmp(&lb).then(b.cmp(&a))
            });
        match worst {
            Some(i) => {
                assignment.0[i] = empty;
                moves += 1;
            }
            None => return moves,
        }
    }
}

/// Step size after `tau` updates.
fn rate(eta0: f64, tau: u64) -> f64 {
    eta0 / (tau as f64).sqrt()
}

/// Applies one log-loss gradient step for the whole sequence: the gradient
/// of the mean per-position loss, evaluated at the current parameters.
fn sequence_step(expert: &mut ContextTreeModel, x: &Sequence, step: f64) {
    let xs = x.symbols();
    let k = expert.k();
    let mut grads = vec![0.0; k * xs.len()];
    for t in 0..xs.len() {
        let z = expert.predict_scores(&xs[..t]);
        log_loss_grad_into(&z, xs[t], &mut grads[t * k..(t + 1) * k]);
    }
    let scaled = step / xs.len() as f64;
    for t in 0..xs.len() {
        expert.apply_update(&xs[..t], &grads[t * k..(t + 1) * k], scaled);
    }
}

fn position_step(expert: &mut ContextTreeModel, prefix: &[crate::Symbol], y: crate::Symbol, step: f64, b: f64) {
    let z = expert.predict_scores(prefix);
    let mut g = vec![0.0; z.len()];
    log_loss_grad_into(&z, y, &mut g);
    expert.apply_update(prefix, &g, step);
    expert.project_to_ball(b);
}

/// One shuffled pass of projected SGD over `sequences`. `tau` counts the
/// updates this expert has received so far and is advanced in place.
pub fn sgd_epoch(
    expert: &mut ContextTreeModel,
    sequences: &[&Sequence],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    tau: &mut u64,
) {
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    order.shuffle(rng);
    for i in order {
        let x = sequences[i];
        if config.sgd.per_position {
            let xs = x.symbols();
            for t in 0..xs.len() {
                *tau += 1;
                position_step(expert, &xs[..t], xs[t], rate(config.sgd.eta0, *tau), config.b);
                check_feasible(expert, config.b);
            }
        } else {
            *tau += 1;
            sequence_step(expert, x, rate(config.sgd.eta0, *tau));
            expert.project_to_ball(config.b);
            check_feasible(expert, config.b);
        }
    }
}

#[inline]
fn check_feasible(expert: &ContextTreeModel, b: f64) {
    debug_assert!(
        expert.weighted_norm() <= b + 1e-6,
        "expert norm {} exceeds B={b}",
        expert.weighted_norm()
    );
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init,
    /// After the expert (SGD) step, scored with the previous assignment.
    Experts,
    /// After reassignment, before empty-expert repair.
    Assign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub outer: usize,
    pub phase: Phase,
    pub objective: f64,
    /// Largest expert norm at this point.
    pub max_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    FixedPoint,
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub pool: ExpertPool,
    pub assignment: Assignment,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
    pub outer_iters: usize,
    /// Sequences moved onto experts that lost all their members.
    pub repairs: usize,
}

fn max_norm(experts: &[ContextTreeModel]) -> f64 {
    experts.iter().map(|e| e.weighted_norm()).fold(0.0, f64::max)
}

/// Trains `config.r` experts on `dataset` by alternating minimisation.
pub fn train_lex(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let m = dataset.len();
    let r = config.r;
    let mut assignment = init_assignment(m, r, config.seed)?;
    let mut experts: Vec<ContextTreeModel> = (0..r)
        .map(|_| ContextTreeModel::new(dataset.k(), config.penalty, config.cap))
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..r).map(|j| crate::rng::stream(config.seed, j as u64 + 1)).collect();
    let mut taus = vec![0u64; r];

    let mut trace = Vec::new();
    let init_obj = assigned_objective(&experts, dataset, &assignment);
    trace.push(TraceEntry {
        outer: 0,
        phase: Phase::Init,
        objective: init_obj,
        max_norm: 0.0,
    });
    let mut previous = init_obj;
    let mut repairs = 0;
    let mut stop = StopReason::MaxIters;
    let mut iters = 0;

    for outer in 1..=config.outer_iters {
        iters = outer;
        let members: Vec<Vec<&Sequence>> = (0..r)
            .map(|j| {
                assignment
                    .members(j)
                    .into_iter()
                    .map(|i| &dataset.sequences()[i])
                    .collect()
            })
            .collect();
        experts
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .zip(taus.par_iter_mut())
            .zip(members.par_iter())
            .for_each(|(((expert, rng), tau), seqs)| {
                if seqs.is_empty() {
                    return;
                }
                for _ in 0..config.sgd.epochs {
                    sgd_epoch(expert, seqs, config, rng, tau);
                }
            });

        let matrix = loss_matrix(&experts, dataset);
        trace.push(TraceEntry {
            outer,
            phase: Phase::Experts,
            objective: assigned_mean(&matrix, &assignment),
            max_norm: max_norm(&experts),
        });

        let mut next = reassign_from_matrix(&matrix);
        let current = assigned_mean(&matrix, &next);
        trace.push(TraceEntry {
            outer,
            phase: Phase::Assign,
            objective: current,
            max_norm: max_norm(&experts),
        });
        repairs += repair_empty(&mut next, &matrix, r);

        let unchanged = next == assignment;
        let improvement = previous - current;
        assignment = next;
        previous = current;
        if unchanged {
            stop = StopReason::FixedPoint;
            break;
        }
        if improvement < config.tolerance {
            stop = StopReason::Tolerance;
            break;
        }
    }

    Ok(TrainOutcome {
        pool: ExpertPool::new(experts, config.b, config.digest())?,
        assignment,
        trace,
        stop,
        outer_iters: iters,
        repairs,
    })
}

/// Appends a single expert trained on the whole dataset (a 1-LEX).
pub fn augment_pool(pool: &ExpertPool, dataset: &Dataset, config: &TrainConfig) -> Result<ExpertPool> {
    if pool.k() != dataset.k() {
        return Err(Error::AlphabetMismatch {
            expected: pool.k(),
            found: dataset.k(),
        });
    }
    let single = TrainConfig { r: 1, ..config.clone() };
    let extra = train_lex(dataset, &single)?.pool.experts.remove(0);
    let mut experts = pool.experts.clone();
    experts.push(extra);
    ExpertPool::new(experts, pool.b, format!("{}+{}", pool.digest, single.digest()))
}
