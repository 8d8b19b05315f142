//! Weighted Majority over a fixed pool of experts.
//!
//! Weights start uniform and are updated multiplicatively,
//! `w_{t+1}[i] ∝ w_t[i] exp(-eta * loss_i)`, then renormalised every round.
//! In [`WmMode::Expected`] the recorded loss of a round is the probability of
//! a mistake under `w_t`, which makes the forecaster deterministic; in
//! [`WmMode::Sampled`] an expert is drawn from `w_t` with a seeded generator.

use rand::Rng;

use crate::corpus::Symbol;
use crate::error::{Error, Result};
use crate::losses::{log_loss, Expert};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmMode {
    Expected,
    Sampled { seed: u64 },
}

/// Loss that drives the multiplicative update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightLoss {
    #[default]
    ZeroOne,
    /// Log-loss divided by `log(1 + (k-1)e)` (the loss of an all-zero score
    /// vector) and clipped to `[0, 1]`.
    Log,
}

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Fixed(f64),
    /// `eta_t = sqrt(log r / t)`.
    Anytime,
}

impl From<f64> for Eta {
    fn from(v: f64) -> Self {
        Eta::Fixed(v)
    }
}

/// `sqrt(log r / T)`.
pub fn default_eta(r: usize, horizon: usize) -> f64 {
    assert!(r >= 1 && horizon >= 1);
    ((r as f64).ln() / horizon as f64).sqrt()
}

/// `sqrt(4 log r / T)`.
pub fn regret_bound(r: usize, horizon: usize) -> f64 {
    assert!(r >= 1 && horizon >= 1);
    (4.0 * (r as f64).ln() / horizon as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmState {
    weights: Vec<f64>,
    eta: f64,
    round: usize,
}

impl WmState {
    pub fn new(r: usize, eta: f64) -> Self {
        assert!(r >= 1, "pool must be nonempty");
        assert!(eta >= 0.0 && eta.is_finite(), "eta must be finite and nonnegative");
        WmState {
            weights: vec![1.0 / r as f64; r],
            eta,
            round: 1,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn set_eta(&mut self, eta: f64) {
        self.eta = eta;
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// `sum_i w_t[i] * mistake_i`.
    pub fn expected_loss(&self, mistakes: &[bool]) -> f64 {
        self.weights
            .iter()
            .zip(mistakes)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum()
    }

    /// Draws an expert index from `w_t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    pub fn update(&mut self, losses: &[f64]) {
        assert_eq!(losses.len(), self.weights.len());
        for (w, l) in self.weights.iter_mut().zip(losses) {
            *w *= (-self.eta * l).exp();
        }
        let total: f64 = self.weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            self.weights.iter_mut().for_each(|w| *w /= total);
        } else {
            // every weight underflowed: fall back to the experts with the
            // smallest loss this round
            let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
            let n = losses.iter().filter(|&&l| l == min).count() as f64;
            for (w, &l) in self.weights.iter_mut().zip(losses) {
                *w = if l == min { 1.0 / n } else { 0.0 };
            }
        }
        self.round += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmReport {
    pub per_step_loss: Vec<f64>,
    pub avg_loss: f64,
    /// Smallest average 0-1 loss of a single expert on the sequence.
    pub best_expert_loss: f64,
    pub regret_bound: f64,
    pub final_weights: Vec<f64>,
}

impl WmReport {
    pub fn accuracy(&self) -> f64 {
        1.0 - self.avg_loss
    }
}

/// Per-round expert mistakes and update losses for a pool on `x`.
pub struct RoundLosses {
    /// `mistakes[t][i]`: expert `i` errs at position `t`.
    pub mistakes: Vec<Vec<bool>>,
    /// `update[t][i]`: loss fed to the multiplicative update.
    pub update: Vec<Vec<f64>>,
}

pub fn round_losses<E: Expert>(pool: &[E], x: &[Symbol], weight_loss: WeightLoss) -> RoundLosses {
    let k = pool.first().map(|e| e.k()).unwrap_or(2);
    let norm = (1.0 + (k as f64 - 1.0) * std::f64::consts::E).ln();
    let mut mistakes = Vec::with_capacity(x.len());
    let mut update = Vec::with_capacity(x.len());
    for t in 0..x.len() {
        let prefix = &x[..t];
        let mut m = Vec::with_capacity(pool.len());
        let mut u = Vec::with_capacity(pool.len());
        for expert in pool {
            let z = expert.scores(prefix);
            let wrong = crate::context_tree::predict_symbol(&z) != x[t];
            m.push(wrong);
            u.push(match weight_loss {
                WeightLoss::ZeroOne => f64::from(u8::from(wrong)),
                WeightLoss::Log => (log_loss(&z, x[t]) / norm).clamp(0.0, 1.0),
            });
        }
        mistakes.push(m);
        update.push(u);
    }
    RoundLosses { mistakes, update }
}

/// Runs Weighted Majority over `pool` on the sequence `x`.
pub fn wm_run<E: Expert>(
    pool: &[E],
    x: &[Symbol],
    eta: impl Into<Eta>,
    mode: WmMode,
    weight_loss: WeightLoss,
) -> Result<WmReport> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if x.is_empty() {
        return Err(Error::invalid("sequence must be nonempty"));
    }
    let rounds = round_losses(pool, x, weight_loss);
    wm_run_losses(&rounds, eta.into(), mode)
}

/// Weighted Majority on precomputed per-round losses.
pub fn wm_run_losses(rounds: &RoundLosses, eta: Eta, mode: WmMode) -> Result<WmReport> {
    let horizon = rounds.mistakes.len();
    let r = rounds.mistakes.first().map(Vec::len).unwrap_or(0);
    if r == 0 {
        return Err(Error::EmptyPool);
    }
    let initial_eta = match eta {
        Eta::Fixed(v) => {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("eta must be nonnegative, got {v}")));
            }
            v
        }
        Eta::Anytime => default_eta(r, 1),
    };
    let mut state = WmState::new(r, initial_eta);
    let mut rng = match mode {
        WmMode::Sampled { seed } => Some(crate::rng::stream(seed, 0)),
        WmMode::Expected => None,
    };
    let mut per_step_loss = Vec::with_capacity(horizon);
    let mut mistake_counts = vec![0usize; r];
    for (t, (mistakes, update)) in rounds.mistakes.iter().zip(&rounds.update).enumerate() {
        if let Eta::Anytime = eta {
            state.set_eta(default_eta(r, t + 1));
        }
        let loss = match rng.as_mut() {
            None => state.expected_loss(mistakes),
            Some(rng) => f64::from(u8::from(mistakes[state.sample(rng)])),
        };
        per_step_loss.push(loss);
        for (c, &m) in mistake_counts.iter_mut().zip(mistakes) {
            *c += usize::from(m);
        }
        state.update(update);
    }
    let avg_loss = per_step_loss.iter().sum::<f64>() / horizon as f64;
    let best = mistake_counts.iter().copied().min().unwrap_or(0);
    Ok(WmReport {
        per_step_loss,
        avg_loss,
        best_expert_loss: best as f64 / horizon as f64,
        regret_bound: regret_bound(r, horizon),
        final_weights: state.weights,
    })
}
