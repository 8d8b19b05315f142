#![allow(dead_code)]

use lexseq::context_tree::psi_path;
use lexseq::losses::Expert;
use lexseq::{ContextTreeModel, Dataset, PenaltyProfile, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sequence(rng: &mut impl Rng, k: usize, len: usize) -> Vec<Symbol> {
    (0..len).map(|_| rng.gen_range(1..=k as Symbol)).collect()
}

pub fn random_dataset(rng: &mut impl Rng, k: usize, m: usize, max_len: usize) -> Dataset {
    let seqs = (0..m)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            random_sequence(rng, k, len)
        })
        .collect();
    Dataset::from_symbols(k, seqs).unwrap()
}

/// A tree with random scores on the nodes visited by a few random histories.
pub fn random_tree(rng: &mut impl Rng, k: usize, cap: Option<usize>, histories: usize) -> ContextTreeModel {
    let mut m = ContextTreeModel::new(k, PenaltyProfile::default(), cap);
    for _ in 0..histories {
        let len = rng.gen_range(0..6);
        let h = random_sequence(rng, k, len);
        for path in psi_path(&h, cap) {
            let scores: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            m.set_node_scores(&path, &scores);
        }
    }
    m
}

/// Predicts a fixed symbol per position, read from a table.
pub struct Scripted {
    pub k: usize,
    pub predictions: Vec<Symbol>,
}

impl Expert for Scripted {
    fn k(&self) -> usize {
        self.k
    }

    fn scores(&self, prefix: &[Symbol]) -> Vec<f64> {
        let mut z = vec![0.0; self.k];
        z[self.predictions[prefix.len()] as usize - 1] = 1.0;
        z
    }
}
