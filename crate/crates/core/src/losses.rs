//! Multiclass log-loss, 0-1 loss, and their per-sequence aggregates.

use crate::context_tree::{predict_symbol, ContextTreeModel};
use crate::corpus::Symbol;
use crate::error::{Error, Result};

/// Anything that scores the next symbol from a history.
pub trait Expert {
    fn k(&self) -> usize;

    fn scores(&self, prefix: &[Symbol]) -> Vec<f64>;

    fn predict(&self, prefix: &[Symbol]) -> Symbol {
        predict_symbol(&self.scores(prefix))
    }
}

impl Expert for ContextTreeModel {
    fn k(&self) -> usize {
        ContextTreeModel::k(self)
    }

    fn scores(&self, prefix: &[Symbol]) -> Vec<f64> {
        self.predict_scores(prefix)
    }
}

impl<E: Expert + ?Sized> Expert for &E {
    fn k(&self) -> usize {
        (**self).k()
    }

    fn scores(&self, prefix: &[Symbol]) -> Vec<f64> {
        (**self).scores(prefix)
    }

    fn predict(&self, prefix: &[Symbol]) -> Symbol {
        (**self).predict(prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Log,
    ZeroOne,
}

/// Margin terms `v_c = 1[c != y] + z_c - z_y`.
fn margins(z: &[f64], y: Symbol) -> impl Iterator<Item = f64> + '_ {
    let yi = y as usize - 1;
    let zy = z[yi];
    z.iter()
        .enumerate()
        .map(move |(c, &zc)| if c == yi { 0.0 } else { 1.0 + zc - zy })
}

/// `log sum_c exp(1[c != y] - z_y + z_c)`.
pub fn log_loss(z: &[f64], y: Symbol) -> f64 {
    let max = margins(z, y).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = margins(z, y).map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Gradient of [`log_loss`] with respect to `z`: `softmax(v) - e_y`.
pub fn log_loss_grad(z: &[f64], y: Symbol) -> Vec<f64> {
    let mut g = vec![0.0; z.len()];
    log_loss_grad_into(z, y, &mut g);
    g
}

/// Writes the gradient into `out` and returns the loss value.
pub fn log_loss_grad_into(z: &[f64], y: Symbol, out: &mut [f64]) -> f64 {
    let max = margins(z, y).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(margins(z, y)) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    out[y as usize - 1] -= 1.0;
    max + sum.ln()
}

pub fn zero_one(z: &[f64], y: Symbol) -> f64 {
    if predict_symbol(z) == y {
        0.0
    } else {
        1.0
    }
}

pub fn pointwise_loss(z: &[f64], y: Symbol, kind: LossKind) -> f64 {
    match kind {
        LossKind::Log => log_loss(z, y),
        LossKind::ZeroOne => zero_one(z, y),
    }
}

/// `L(f, x) = (1/T) sum_t loss(f(x_{1:t-1}), x_t)`; position 1 uses the
/// empty history.
pub fn sequence_loss<E: Expert + ?Sized>(expert: &E, x: &[Symbol], kind: LossKind) -> f64 {
    assert!(!x.is_empty(), "sequence must be nonempty");
    let total: f64 = (0..x.len())
        .map(|t| pointwise_loss(&expert.scores(&x[..t]), x[t], kind))
        .sum();
    total / x.len() as f64
}

/// `min_f L(f, x)` and the first (0-based) expert attaining it.
pub fn hindsight_loss<E: Expert>(pool: &[E], x: &[Symbol], kind: LossKind) -> Result<(f64, usize)> {
    let losses: Vec<f64> = pool.iter().map(|f| sequence_loss(f, x, kind)).collect();
    argmin(&losses).ok_or(Error::EmptyPool)
}

/// Smallest value and its first index.
pub fn argmin(values: &[f64]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((b, _)) if v >= b => {}
            _ => best = Some((v, i)),
        }
    }
    best
}
