//! Baseline predictors: a mixture of order-`d` Markov chains fitted with EM
//! and predicting through the MAP chain type, and a context tree trained
//! online on the test sequence alone.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::context_tree::{predict_symbol, ContextTreeModel, PenaltyProfile};
use crate::corpus::{read_file, write_file, Dataset, Symbol};
use crate::error::{Error, Result};
use crate::losses::log_loss_grad_into;

/// Padding symbol for positions before the start of a sequence.
pub const START: Symbol = 0;

/// The length-`d` context of position `prefix.len() + 1`, left-padded with
/// [`START`].
pub fn context_key(prefix: &[Symbol], d: usize) -> Vec<Symbol> {
    let have = prefix.len().min(d);
    let mut key = vec![START; d - have];
    key.extend_from_slice(&prefix[prefix.len() - have..]);
    key
}

/// Next-symbol distribution for one context. Symbols not listed in `probs`
/// get probability `rest`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDist {
    probs: Vec<(Symbol, f64)>,
    rest: f64,
}

impl ContextDist {
    fn uniform(k: usize) -> Self {
        ContextDist {
            probs: Vec::new(),
            rest: 1.0 / k as f64,
        }
    }

    pub fn prob(&self, x: Symbol) -> f64 {
        match self.probs.binary_search_by_key(&x, |&(s, _)| s) {
            Ok(i) => self.probs[i].1,
            Err(_) => self.rest,
        }
    }

    pub fn dense(&self, k: usize) -> Vec<f64> {
        let mut out = vec![self.rest; k];
        for &(s, p) in &self.probs {
            out[s as usize - 1] = p;
        }
        out
    }

    fn argmax(&self, k: usize) -> Symbol {
        predict_symbol(&self.dense(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmModel {
    k: usize,
    d: usize,
    alpha: f64,
    prior: Vec<f64>,
    /// Per component: observed context -> distribution. Unlisted contexts
    /// are uniform.
    tables: Vec<BTreeMap<Vec<Symbol>, ContextDist>>,
}

impl LmmModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.prior.len()
    }

    pub fn order(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// `theta_q(x | context)`; `q` is 0-based.
    pub fn transition(&self, q: usize, context: &[Symbol], x: Symbol) -> f64 {
        match self.tables[q].get(context) {
            Some(dist) => dist.prob(x),
            None => 1.0 / self.k as f64,
        }
    }

    /// Full distribution `theta_q(. | context)`.
    pub fn transition_row(&self, q: usize, context: &[Symbol]) -> Vec<f64> {
        match self.tables[q].get(context) {
            Some(dist) => dist.dense(self.k),
            None => vec![1.0 / self.k as f64; self.k],
        }
    }

    /// Contexts with a stored distribution for component `q`.
    pub fn contexts(&self, q: usize) -> impl Iterator<Item = &Vec<Symbol>> {
        self.tables[q].keys()
    }

    fn log_transition(&self, q: usize, context: &[Symbol], x: Symbol) -> f64 {
        self.transition(q, context, x).ln()
    }

    /// Posterior over the chain type given the observed prefix.
    pub fn posterior(&self, prefix: &[Symbol]) -> Vec<f64> {
        let mut filter = LmmFilter::new(self);
        for &x in prefix {
            filter.observe(x);
        }
        filter.posterior()
    }

    /// MAP chain type, then the most likely next symbol under it.
    pub fn predict(&self, prefix: &[Symbol]) -> Symbol {
        let mut filter = LmmFilter::new(self);
        for &x in prefix {
            filter.observe(x);
        }
        filter.predict()
    }

    /// Mixture predictive `sum_q P(z=q | prefix) theta_q(. | context)`.
    pub fn predictive(&self, prefix: &[Symbol]) -> Vec<f64> {
        let post = self.posterior(prefix);
        let ctx = context_key(prefix, self.d);
        let mut out = vec![0.0; self.k];
        for (q, w) in post.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.transition_row(q, &ctx)) {
                *o += w * p;
            }
        }
        out
    }

    /// Log-likelihood of a whole sequence under component `q`.
    pub fn sequence_loglik(&self, q: usize, x: &[Symbol]) -> f64 {
        (0..x.len())
            .map(|t| self.log_transition(q, &context_key(&x[..t], self.d), x[t]))
            .sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("LMM 1 {} {} {} {:?}\n", self.r(), self.d, self.k, self.alpha);
        let prior: Vec<String> = self.prior.iter().map(|p| format!("{p:?}")).collect();
        out.push_str(&prior.join(" "));
        out.push('\n');
        for (q, table) in self.tables.iter().enumerate() {
            for (ctx, dist) in table {
                let _ = write!(out, "{}", q + 1);
                for s in ctx {
                    let _ = write!(out, " {s}");
                }
                for p in dist.dense(self.k) {
                    let _ = write!(out, " {p:?}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 6 || h[0] != "LMM" || h[1] != "1" {
            return Err(Error::parse(1, "expected 'LMM 1 r d k alpha'"));
        }
        let r: usize = h[2].parse().map_err(|_| Error::parse(1, "bad r"))?;
        let d: usize = h[3].parse().map_err(|_| Error::parse(1, "bad d"))?;
        let k: usize = h[4].parse().map_err(|_| Error::parse(1, "bad k"))?;
        let alpha: f64 = h[5].parse().map_err(|_| Error::parse(1, "bad alpha"))?;
        if r == 0 || k == 0 {
            return Err(Error::parse(1, "r and k must be positive"));
        }
        let (n, prior_line) = lines.next().ok_or_else(|| Error::parse(2, "missing prior line"))?;
        let prior = parse_probs(prior_line.split_whitespace(), n)?;
        if prior.len() != r {
            return Err(Error::parse(n, format!("expected {r} prior weights")));
        }
        let mut tables = vec![BTreeMap::new(); r];
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 1 + d + k {
                return Err(Error::parse(n, format!("expected {} fields", 1 + d + k)));
            }
            let q: usize = f[0]
                .parse()
                .ok()
                .filter(|&q| q >= 1 && q <= r)
                .ok_or_else(|| Error::parse(n, "bad component"))?;
            let ctx = f[1..1 + d]
                .iter()
                .map(|t| {
                    t.parse::<Symbol>()
                        .ok()
                        .filter(|&s| s as usize <= k)
                        .ok_or_else(|| Error::parse(n, format!("bad context symbol {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let probs = parse_probs(f[1 + d..].iter().copied(), n)?;
            let dist = ContextDist {
                probs: probs
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| ((i + 1) as Symbol, p))
                    .collect(),
                rest: 0.0,
            };
            if tables[q - 1].insert(ctx, dist).is_some() {
                return Err(Error::parse(n, "duplicate context"));
            }
        }
        Ok(LmmModel {
            k,
            d,
            alpha,
            prior,
            tables,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_text())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&read_file(path.as_ref())?)
    }
}

fn parse_probs<'a>(fields: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>> {
    fields
        .map(|t| match t.parse::<f64>() {
            Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
            _ => Err(Error::parse(line, format!("bad probability {t:?}"))),
        })
        .collect()
}

/// Incremental filtered posterior over chain types.
#[derive(Debug, Clone)]
pub struct LmmFilter<'a> {
    model: &'a LmmModel,
    log_post: Vec<f64>,
    history: Vec<Symbol>,
}

impl<'a> LmmFilter<'a> {
    pub fn new(model: &'a LmmModel) -> Self {
        LmmFilter {
            model,
            log_post: model.prior.iter().map(|p| p.ln()).collect(),
            history: Vec::new(),
        }
    }

    pub fn observe(&mut self, x: Symbol) {
        let ctx = context_key(&self.history, self.model.d);
        for (q, lp) in self.log_post.iter_mut().enumerate() {
            *lp += self.model.log_transition(q, &ctx, x);
        }
        self.history.push(x);
    }

    pub fn posterior(&self) -> Vec<f64> {
        let max = self.log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            // no component explains the prefix
            return self.model.prior.clone();
        }
        let w: Vec<f64> = self.log_post.iter().map(|lp| (lp - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect()
    }

    /// MAP chain type (ties to the lowest index).
    pub fn map_component(&self) -> usize {
        let mut best = 0;
        for (q, &lp) in self.log_post.iter().enumerate() {
            if lp > self.log_post[best] {
                best = q;
            }
        }
        best
    }

    pub fn predict(&self) -> Symbol {
        let q = self.map_component();
        let ctx = context_key(&self.history, self.model.d);
        match self.model.tables[q].get(&ctx) {
            Some(dist) => dist.argmax(self.model.k),
            None => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmConfig {
    pub r: usize,
    pub d: usize,
    pub alpha: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LmmConfig {
    fn default() -> Self {
        LmmConfig {
            r: 2,
            d: 1,
            alpha: 0.1,
            max_iters: 100,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmTrace {
    /// Data log-likelihood of each successive parameter set.
    pub loglik: Vec<f64>,
    /// Log-likelihood plus the smoothing term
    /// `alpha * sum_{q, context, x} log theta_q(x | context)`, which is what
    /// the smoothed M-step maximises.
    pub penalized: Vec<f64>,
}

/// Per-sequence sufficient statistics: counts of (context id, symbol).
struct SeqCounts(Vec<(usize, Symbol, f64)>);

fn sufficient_stats(dataset: &Dataset, d: usize) -> (Vec<Vec<Symbol>>, Vec<SeqCounts>, Vec<Vec<Symbol>>) {
    let mut ctx_ids: HashMap<Vec<Symbol>, usize> = HashMap::new();
    let mut contexts = Vec::new();
    let mut per_seq = Vec::with_capacity(dataset.len());
    for seq in dataset.sequences() {
        let x = seq.symbols();
        let mut counts: BTreeMap<(usize, Symbol), f64> = BTreeMap::new();
        for t in 0..x.len() {
            let key = context_key(&x[..t], d);
            let id = *ctx_ids.entry(key.clone()).or_insert_with(|| {
                contexts.push(key);
                contexts.len() - 1
            });
            *counts.entry((id, x[t])).or_insert(0.0) += 1.0;
        }
        per_seq.push(SeqCounts(counts.into_iter().map(|((c, s), n)| (c, s, n)).collect()));
    }
    let mut support: Vec<Vec<Symbol>> = vec![Vec::new(); contexts.len()];
    for sc in &per_seq {
        for &(c, s, _) in &sc.0 {
            support[c].push(s);
        }
    }
    for s in &mut support {
        s.sort_unstable();
        s.dedup();
    }
    (contexts, per_seq, support)
}

/// Fits an `r`-component mixture of order-`d` Markov chains with EM.
pub fn lmm_em_fit(dataset: &Dataset, config: &LmmConfig) -> Result<(LmmModel, EmTrace)> {
    let LmmConfig {
        r,
        d,
        alpha,
        max_iters,
        tolerance,
        seed,
    } = *config;
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    let k = dataset.k();
    let m = dataset.len();
    let (contexts, per_seq, support) = sufficient_stats(dataset, d);

    let mut rng = crate::rng::stream(seed, 0);
    let mut resp: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let row: Vec<f64> = (0..r).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();

    let mut trace = EmTrace {
        loglik: Vec::new(),
        penalized: Vec::new(),
    };
    let mut model = m_step(&resp, &per_seq, &contexts, &support, k, d, alpha);
    for iter in 0..max_iters.max(1) {
        let (ll, new_resp) = e_step(&model, &per_seq, &contexts);
        let penalized = ll + smoothing_term(&model, alpha);
        let converged = trace.penalized.last().is_some_and(|&prev| penalized - prev < tolerance);
        trace.loglik.push(ll);
        trace.penalized.push(penalized);
        if converged || iter + 1 == max_iters.max(1) {
            break;
        }
        resp = new_resp;
        model = m_step(&resp, &per_seq, &contexts, &support, k, d, alpha);
    }
    Ok((model, trace))
}

fn m_step(
    resp: &[Vec<f64>],
    per_seq: &[SeqCounts],
    contexts: &[Vec<Symbol>],
    support: &[Vec<Symbol>],
    k: usize,
    d: usize,
    alpha: f64,
) -> LmmModel {
    let r = resp[0].len();
    let m = resp.len() as f64;
    let prior: Vec<f64> = (0..r).map(|q| resp.iter().map(|row| row[q]).sum::<f64>() / m).collect();
    let mut tables = Vec::with_capacity(r);
    for q in 0..r {
        // counts aligned with `support`
        let mut counts: Vec<Vec<f64>> = support.iter().map(|s| vec![0.0; s.len()]).collect();
        for (row, sc) in resp.iter().zip(per_seq) {
            let w = row[q];
            if w == 0.0 {
                continue;
            }
            for &(c, s, n) in &sc.0 {
                let pos = support[c].binary_search(&s).expect("symbol in support");
                counts[c][pos] += w * n;
            }
        }
        let mut table = BTreeMap::new();
        for (c, ctx) in contexts.iter().enumerate() {
            let total: f64 = counts[c].iter().sum();
            let denom = total + k as f64 * alpha;
            let dist = if denom > 0.0 {
                ContextDist {
                    probs: support[c]
                        .iter()
                        .zip(&counts[c])
                        .map(|(&s, &n)| (s, (n + alpha) / denom))
                        .collect(),
                    rest: alpha / denom,
                }
            } else {
                ContextDist::uniform(k)
            };
            table.insert(ctx.clone(), dist);
        }
        tables.push(table);
    }
    LmmModel {
        k,
        d,
        alpha,
        prior,
        tables,
    }
}

/// Returns the data log-likelihood and the responsibilities.
fn e_step(model: &LmmModel, per_seq: &[SeqCounts], contexts: &[Vec<Symbol>]) -> (f64, Vec<Vec<f64>>) {
    let r = model.r();
    let mut total = 0.0;
    let mut resp = Vec::with_capacity(per_seq.len());
    for sc in per_seq {
        let logp: Vec<f64> = (0..r)
            .map(|q| {
                let mut lp = model.prior[q].ln();
                for &(c, s, n) in &sc.0 {
                    lp += n * model.tables[q][&contexts[c]].prob(s).ln();
                }
                lp
            })
            .collect();
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            total += f64::NEG_INFINITY;
            resp.push(vec![1.0 / r as f64; r]);
            continue;
        }
        let sum: f64 = logp.iter().map(|lp| (lp - max).exp()).sum();
        let ll = max + sum.ln();
        total += ll;
        resp.push(logp.iter().map(|lp| (lp - ll).exp()).collect());
    }
    (total, resp)
}

fn smoothing_term(model: &LmmModel, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let k = model.k as f64;
    let mut total = 0.0;
    for table in &model.tables {
        for dist in table.values() {
            let listed: f64 = dist.probs.iter().map(|&(_, p)| p.ln()).sum();
            let rest = (k - dist.probs.len() as f64) * dist.rest.ln();
            total += listed + if dist.probs.len() < model.k { rest } else { 0.0 };
        }
    }
    alpha * total
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePstConfig {
    pub penalty: PenaltyProfile,
    pub cap: Option<usize>,
    /// Step at position `t` is `eta0 / sqrt(t)`.
    pub eta0: f64,
    pub b: f64,
}

impl Default for OnlinePstConfig {
    fn default() -> Self {
        OnlinePstConfig {
            penalty: PenaltyProfile::default(),
            cap: None,
            eta0: 1.0,
            b: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePstTrace {
    pub predictions: Vec<Symbol>,
    pub losses: Vec<f64>,
    /// Largest model norm seen after any step.
    pub max_norm: f64,
}

impl OnlinePstTrace {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}

/// Predicts `x` left to right with a context tree that starts at zero and
/// takes one projected log-loss gradient step after every symbol.
pub fn online_pst_run(x: &[Symbol], k: usize, config: &OnlinePstConfig) -> OnlinePstTrace {
    assert!(!x.is_empty(), "sequence must be nonempty");
    let mut model = ContextTreeModel::new(k, config.penalty, config.cap);
    let mut predictions = Vec::with_capacity(x.len());
    let mut losses = Vec::with_capacity(x.len());
    let mut max_norm: f64 = 0.0;
    let mut g = vec![0.0; k];
    for t in 0..x.len() {
        let prefix = &x[..t];
        let z = model.predict_scores(prefix);
        let guess = predict_symbol(&z);
        predictions.push(guess);
        losses.push(if guess == x[t] { 0.0 } else { 1.0 });
        log_loss_grad_into(&z, x[t], &mut g);
        model.apply_update(prefix, &g, config.eta0 / ((t + 1) as f64).sqrt());
        model.project_to_ball(config.b);
        debug_assert!(model.weighted_norm() <= config.b + 1e-6);
        max_norm = max_norm.max(model.weighted_norm());
    }
    OnlinePstTrace {
        predictions,
        losses,
        max_norm,
    }
}
