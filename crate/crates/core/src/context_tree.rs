//! Sparse multiclass context trees.
//!
//! A tree maps a history `x_{1:t-1}` to a score vector `z ∈ R^k` by walking
//! from the root through the children labelled `x_{t-1}, x_{t-2}, ...` and
//! summing the vectors stored on the visited nodes. Nodes that were never
//! touched by an update are not stored; they contribute zero.
//!
//! The parameters are measured with a depth-weighted Euclidean norm
//! `sqrt(sum_i p_{d(i)} * |u_i|^2)` where `d(i)` is the depth of node `i`
//! (root has depth 1). Deep nodes get larger `p_d`, so long histories are
//! expensive.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{read_file, write_file, Symbol};
use crate::error::{Error, Result};

/// Depth weights `p_d = scale * d^exponent`.
///
/// The default (`exponent = 2`, `scale = 1`) penalises deep nodes
/// quadratically. A negative exponent gives the decreasing weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyProfile {
    pub exponent: f64,
    pub scale: f64,
}

impl Default for PenaltyProfile {
    fn default() -> Self {
        PenaltyProfile {
            exponent: 2.0,
            scale: 1.0,
        }
    }
}

impl PenaltyProfile {
    pub fn power(exponent: f64, scale: f64) -> Result<Self> {
        let p = PenaltyProfile { exponent, scale };
        p.validate()?;
        Ok(p)
    }

    /// `p_d = (pi^2 / 6) d^2`, i.e. the dual weights `1/p_d` sum to one.
    pub fn normalized_quadratic() -> Self {
        PenaltyProfile {
            exponent: 2.0,
            scale: std::f64::consts::PI.powi(2) / 6.0,
        }
    }

    /// `p_d = d^-2`: deep nodes are cheaper than shallow ones.
    pub fn decreasing() -> Self {
        PenaltyProfile {
            exponent: -2.0,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite() && self.exponent.is_finite()) {
            return Err(Error::invalid(format!("invalid penalty profile {self}")));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, depth: usize) -> f64 {
        if self.exponent == 2.0 {
            let d = depth as f64;
            self.scale * d * d
        } else {
            self.scale * (depth as f64).powf(self.exponent)
        }
    }

    /// Whether `p_d` is nondecreasing in depth.
    pub fn is_nondecreasing(&self) -> bool {
        self.exponent >= 0.0
    }

    /// `sum_{d=1}^{n} 1/p_d`: the squared dual norm of a feature vector that
    /// visits `n` nodes.
    pub fn dual_mass(&self, path_len: usize) -> f64 {
        (1..=path_len).map(|d| 1.0 / self.weight(d)).sum()
    }
}

impl fmt::Display for PenaltyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "power:{:?}:{:?}", self.exponent, self.scale)
    }
}

impl FromStr for PenaltyProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => return Ok(Self::default()),
            "normalized" => return Ok(Self::normalized_quadratic()),
            "decreasing" => return Ok(Self::decreasing()),
            _ => {}
        }
        let bad = || Error::invalid(format!("bad penalty profile {s:?}"));
        let mut parts = s.split(':');
        if parts.next() != Some("power") {
            return Err(bad());
        }
        let exponent = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let scale = match parts.next() {
            Some(v) => v.parse().map_err(|_| bad())?,
            None => 1.0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Self::power(exponent, scale)
    }
}

/// Visited node paths for a history: the root, then `(x_{t-1})`,
/// `(x_{t-1}, x_{t-2})`, ... Each path lists symbols most-recent first.
/// With a depth cap `D` at most `D - 1` context symbols are used.
pub fn psi_path(prefix: &[Symbol], cap: Option<usize>) -> Vec<Vec<Symbol>> {
    let n = path_len(prefix.len(), cap);
    (0..n)
        .map(|len| prefix.iter().rev().take(len).copied().collect())
        .collect()
}

/// `min(t - 1, D - 1) + 1` for a prefix of length `t - 1`.
#[inline]
pub fn path_len(prefix_len: usize, cap: Option<usize>) -> usize {
    match cap {
        Some(d) => prefix_len.min(d.saturating_sub(1)) + 1,
        None => prefix_len + 1,
    }
}

/// Index of the largest score; ties go to the smallest symbol.
pub fn predict_symbol(z: &[f64]) -> Symbol {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    (best + 1) as Symbol
}

#[derive(Debug, Clone)]
struct Node {
    depth: u32,
    children: Vec<(Symbol, u32)>,
}

impl Node {
    fn child(&self, symbol: Symbol) -> Option<u32> {
        self.children
            .binary_search_by_key(&symbol, |&(s, _)| s)
            .ok()
            .map(|i| self.children[i].1)
    }
}

/// A node as seen from outside the tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Context symbols from the root, most recent first. Empty for the root.
    pub path: Vec<Symbol>,
    pub depth: usize,
    pub scores: Vec<f64>,
}

/// One expert: a lazily materialised context tree.
///
/// Scores are stored as `scale * raw` so that projecting onto the norm ball is
/// a constant-time rescale; the weighted squared norm of `raw` is maintained
/// incrementally by [`apply_update`](Self::apply_update).
#[derive(Debug, Clone)]
pub struct ContextTreeModel {
    k: usize,
    penalty: PenaltyProfile,
    cap: Option<usize>,
    nodes: Vec<Node>,
    raw: Vec<f64>,
    scale: f64,
    raw_sq_norm: f64,
}

const ROOT: u32 = 0;

impl ContextTreeModel {
    pub fn new(k: usize, penalty: PenaltyProfile, cap: Option<usize>) -> Self {
        assert!(k >= 1, "alphabet size must be positive");
        assert!(cap != Some(0), "depth cap must be at least 1");
        ContextTreeModel {
            k,
            penalty,
            cap,
            nodes: vec![Node {
                depth: 1,
                children: Vec::new(),
            }],
            raw: vec![0.0; k],
            scale: 1.0,
            raw_sq_norm: 0.0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn penalty(&self) -> PenaltyProfile {
        self.penalty
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    /// Number of materialised nodes, root included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn raw_of(&self, id: u32) -> &[f64] {
        let start = id as usize * self.k;
        &self.raw[start..start + self.k]
    }

    /// Adds the scores along the history path into `out`.
    pub fn add_scores_into(&self, prefix: &[Symbol], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k);
        let mut acc = vec![0.0; self.k];
        let mut node = ROOT;
        let n = path_len(prefix.len(), self.cap);
        for step in 0..n {
            if step > 0 {
                match self.nodes[node as usize].child(prefix[prefix.len() - step]) {
                    Some(c) => node = c,
                    None => break,
                }
            }
            for (a, r) in acc.iter_mut().zip(self.raw_of(node)) {
                *a += r;
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o += self.scale * a;
        }
    }

    /// `z = U psi(prefix)`.
    pub fn predict_scores(&self, prefix: &[Symbol]) -> Vec<f64> {
        let mut z = vec![0.0; self.k];
        self.add_scores_into(prefix, &mut z);
        z
    }

    pub fn predict(&self, prefix: &[Symbol]) -> Symbol {
        predict_symbol(&self.predict_scores(prefix))
    }

    /// Subtracts `step * g` from every node on the history path, creating
    /// missing nodes with zero scores.
    pub fn apply_update(&mut self, prefix: &[Symbol], g: &[f64], step: f64) {
        assert_eq!(g.len(), self.k, "gradient length must equal k");
        if step == 0.0 || g.iter().all(|&v| v == 0.0) {
            return;
        }
        let c = step / self.scale;
        let n = path_len(prefix.len(), self.cap);
        let mut node = ROOT;
        for step_idx in 0..n {
            if step_idx > 0 {
                let sym = prefix[prefix.len() - step_idx];
                node = self.child_or_insert(node, sym);
            }
            let depth = self.nodes[node as usize].depth as usize;
            let start = node as usize * self.k;
            let mut delta = 0.0;
            for (r, gv) in self.raw[start..start + self.k].iter_mut().zip(g) {
                let old = *r;
                *r = old - c * gv;
                delta += *r * *r - old * old;
            }
            self.raw_sq_norm += self.penalty.weight(depth) * delta;
        }
        if self.raw_sq_norm < 0.0 {
            self.raw_sq_norm = self.recompute_raw_sq_norm();
        }
    }

    fn child_or_insert(&mut self, parent: u32, symbol: Symbol) -> u32 {
        let pos = self.nodes[parent as usize]
            .children
            .binary_search_by_key(&symbol, |&(s, _)| s);
        match pos {
            Ok(i) => self.nodes[parent as usize].children[i].1,
            Err(i) => {
                let id = self.nodes.len() as u32;
                let depth = self.nodes[parent as usize].depth + 1;
                self.nodes[parent as usize].children.insert(i, (symbol, id));
                self.nodes.push(Node {
                    depth,
                    children: Vec::new(),
                });
                self.raw.extend(std::iter::repeat_n(0.0, self.k));
                id
            }
        }
    }

    fn recompute_raw_sq_norm(&self) -> f64 {
        self.nodes
            .iter()
            .enumerate()
            .map(|(id, node)| {
                let sq: f64 = self.raw_of(id as u32).iter().map(|v| v * v).sum();
                self.penalty.weight(node.depth as usize) * sq
            })
            .sum()
    }

    /// Cached `sqrt(sum_i p_{d(i)} |u_i|^2)`.
    pub fn weighted_norm(&self) -> f64 {
        self.scale.abs() * self.raw_sq_norm.max(0.0).sqrt()
    }

    /// The same norm recomputed from scratch.
    pub fn recomputed_norm(&self) -> f64 {
        self.scale.abs() * self.recompute_raw_sq_norm().sqrt()
    }

    /// Radial projection onto `{U : |U| <= b}`. Norms within a relative
    /// 1e-12 of `b` count as inside, so projecting twice changes nothing.
    pub fn project_to_ball(&mut self, b: f64) {
        assert!(b > 0.0, "ball radius must be positive");
        let norm = self.weighted_norm();
        if norm > b * (1.0 + 1e-12) {
            self.scale *= b / norm;
            if self.scale.abs() < 1e-100 {
                self.fold_scale();
            }
        }
    }

    /// Multiplies every score by `c`.
    pub fn scale_by(&mut self, c: f64) {
        if c == 0.0 {
            self.raw.iter_mut().for_each(|v| *v = 0.0);
            self.raw_sq_norm = 0.0;
            self.scale = 1.0;
        } else {
            self.scale *= c;
            if self.scale.abs() < 1e-100 {
                self.fold_scale();
            }
        }
    }

    fn fold_scale(&mut self) {
        let s = self.scale;
        self.raw.iter_mut().for_each(|v| *v *= s);
        self.scale = 1.0;
        self.raw_sq_norm = self.recompute_raw_sq_norm();
    }

    /// Trie merge that sums scores node-wise.
    pub fn merged_sum(&self, other: &ContextTreeModel) -> Result<ContextTreeModel> {
        if self.k != other.k {
            return Err(Error::AlphabetMismatch {
                expected: self.k,
                found: other.k,
            });
        }
        let mut out = ContextTreeModel::new(self.k, self.penalty, self.cap);
        for model in [self, other] {
            for node in model.nodes_in_order() {
                let id = out.materialize(&node.path);
                let start = id as usize * out.k;
                for (r, v) in out.raw[start..start + out.k].iter_mut().zip(&node.scores) {
                    *r += v;
                }
            }
        }
        out.raw_sq_norm = out.recompute_raw_sq_norm();
        Ok(out)
    }

    fn materialize(&mut self, path: &[Symbol]) -> u32 {
        let mut node = ROOT;
        for &s in path {
            node = self.child_or_insert(node, s);
        }
        node
    }

    /// All stored nodes, breadth first then lexicographic by path.
    pub fn nodes_in_order(&self) -> Vec<TreeNode> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut frontier: Vec<(u32, Vec<Symbol>)> = vec![(ROOT, Vec::new())];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (id, path) in frontier {
                for &(sym, child) in &self.nodes[id as usize].children {
                    let mut p = path.clone();
                    p.push(sym);
                    next.push((child, p));
                }
                out.push(TreeNode {
                    depth: self.nodes[id as usize].depth as usize,
                    scores: self.raw_of(id).iter().map(|v| self.scale * v).collect(),
                    path,
                });
            }
            next.sort_by(|a, b| a.1.cmp(&b.1));
            frontier = next;
        }
        out
    }

    /// Scores stored at a context path, if that node exists.
    pub fn node_scores(&self, path: &[Symbol]) -> Option<Vec<f64>> {
        let mut node = ROOT;
        for &s in path {
            node = self.nodes[node as usize].child(s)?;
        }
        Some(self.raw_of(node).iter().map(|v| self.scale * v).collect())
    }

    /// Sets the scores at a context path, creating the node if needed.
    pub fn set_node_scores(&mut self, path: &[Symbol], scores: &[f64]) {
        assert_eq!(scores.len(), self.k, "score length must equal k");
        if let Some(d) = self.cap {
            assert!(path.len() < d, "path exceeds depth cap");
        }
        let id = self.materialize(path);
        let start = id as usize * self.k;
        let s = self.scale;
        for (r, v) in self.raw[start..start + self.k].iter_mut().zip(scores) {
            *r = v / s;
        }
        self.raw_sq_norm = self.recompute_raw_sq_norm();
    }

    pub fn to_text(&self) -> String {
        let cap = match self.cap {
            Some(d) => d.to_string(),
            None => "inf".to_string(),
        };
        let mut out = format!("LEXPST 1 k={} penalty={} cap={}\n", self.k, self.penalty, cap);
        for node in self.nodes_in_order() {
            let _ = write!(out, "{}", node.depth);
            if node.path.is_empty() {
                out.push_str(" -");
            }
            for s in &node.path {
                let _ = write!(out, " {s}");
            }
            for v in &node.scores {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let (k, penalty, cap) = parse_header(header)?;
        let mut model = ContextTreeModel::new(k, penalty, cap);
        let mut seen_root = false;
        for (lineno, line) in lines {
            let line_no = lineno + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let depth: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad depth {:?}", fields[0])))?;
            if depth == 0 {
                return Err(Error::parse(line_no, "depth must be at least 1"));
            }
            let path_fields = if depth == 1 {
                if fields.get(1) != Some(&"-") {
                    return Err(Error::parse(line_no, "root path must be '-'"));
                }
                &fields[2.min(fields.len())..2.min(fields.len())]
            } else {
                fields
                    .get(1..depth)
                    .ok_or_else(|| Error::parse(line_no, "truncated path"))?
            };
            let path = path_fields
                .iter()
                .map(|t| match t.parse::<Symbol>() {
                    Ok(s) if s >= 1 && s as usize <= k => Ok(s),
                    _ => Err(Error::parse(line_no, format!("bad path symbol {t:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let score_start = if depth == 1 { 2 } else { depth };
            let scores = fields
                .get(score_start..)
                .unwrap_or(&[])
                .iter()
                .map(|t| match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::parse(line_no, format!("bad score {t:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            if scores.len() != k {
                return Err(Error::parse(
                    line_no,
                    format!("expected {k} scores, found {}", scores.len()),
                ));
            }
            if let Some(d) = cap {
                if depth > d {
                    return Err(Error::parse(line_no, "node deeper than depth cap"));
                }
            }
            if depth == 1 {
                if seen_root {
                    return Err(Error::parse(line_no, "duplicate root"));
                }
                seen_root = true;
            } else {
                let mut node = ROOT;
                for &s in &path[..path.len() - 1] {
                    node = model.nodes[node as usize]
                        .child(s)
                        .ok_or_else(|| Error::parse(line_no, "node listed before its parent"))?;
                }
                if model.nodes[node as usize].child(path[path.len() - 1]).is_some() {
                    return Err(Error::parse(line_no, "duplicate node"));
                }
            }
            let id = model.materialize(&path);
            let start = id as usize * k;
            model.raw[start..start + k].copy_from_slice(&scores);
        }
        model.raw_sq_norm = model.recompute_raw_sq_norm();
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_text())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&read_file(path.as_ref())?)
    }
}

fn parse_header(line: &str) -> Result<(usize, PenaltyProfile, Option<usize>)> {
    let bad = |msg: &str| Error::parse(1, format!("malformed header: {msg}"));
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "LEXPST" || fields[1] != "1" {
        return Err(bad("expected 'LEXPST 1 k=.. penalty=.. cap=..'"));
    }
    let k = fields[2]
        .strip_prefix("k=")
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&k| k >= 1)
        .ok_or_else(|| bad("k"))?;
    let penalty = fields[3]
        .strip_prefix("penalty=")
        .ok_or_else(|| bad("penalty"))?
        .parse::<PenaltyProfile>()
        .map_err(|_| bad("penalty"))?;
    let cap = match fields[4].strip_prefix("cap=").ok_or_else(|| bad("cap"))? {
        "inf" => None,
        v => Some(v.parse::<usize>().ok().filter(|&d| d >= 1).ok_or_else(|| bad("cap"))?),
    };
    Ok((k, penalty, cap))
}

impl PartialEq for ContextTreeModel {
    /// Equal node sets and scores; the internal scale factor is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.penalty == other.penalty
            && self.cap == other.cap
            && self.nodes_in_order() == other.nodes_in_order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model2() -> ContextTreeModel {
        let mut m = ContextTreeModel::new(2, PenaltyProfile::default(), None);
        m.set_node_scores(&[], &[1.0, -1.0]);
        m.set_node_scores(&[2], &[0.0, 3.0]);
        m
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_path(&[1, 2], None), vec![vec![], vec![2], vec![2, 1]]);
        assert_eq!(psi_path(&[], None), vec![Vec::<Symbol>::new()]);
        assert_eq!(psi_path(&[1, 2], Some(2)), vec![vec![], vec![2]]);
        assert_eq!(psi_path(&[1, 2, 3], Some(1)), vec![Vec::<Symbol>::new()]);
    }

    #[test]
    fn scores_examples() {
        let empty = ContextTreeModel::new(3, PenaltyProfile::default(), None);
        assert_eq!(empty.predict_scores(&[1, 2]), vec![0.0; 3]);
        let m = model2();
        assert_eq!(m.predict_scores(&[1, 2]), vec![1.0, 2.0]);
        assert_eq!(m.predict_scores(&[2, 1]), vec![1.0, -1.0]);
    }

    #[test]
    fn argmax_ties() {
        assert_eq!(predict_symbol(&[0.0, 0.0]), 1);
        assert_eq!(predict_symbol(&[0.1, 0.7, 0.3]), 2);
        assert_eq!(predict_symbol(&[5.0, 5.0, 6.0]), 3);
    }

    #[test]
    fn norm_examples() {
        let mut m = ContextTreeModel::new(2, PenaltyProfile::default(), None);
        m.set_node_scores(&[], &[3.0, 4.0]);
        assert!((m.weighted_norm() - 5.0).abs() < 1e-12);
        m.set_node_scores(&[1, 1], &[1.0, 0.0]);
        assert!((m.weighted_norm() - 34f64.sqrt()).abs() < 1e-12);
        assert!((m.weighted_norm() - 5.830_951_894_845_301).abs() < 1e-12);
        let before = m.weighted_norm();
        m.scale_by(-2.5);
        assert!((m.weighted_norm() - 2.5 * before).abs() < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let mut m = ContextTreeModel::new(2, PenaltyProfile::default(), None);
        m.set_node_scores(&[], &[3.0, 4.0]);
        m.project_to_ball(2.5);
        assert!((m.weighted_norm() - 2.5).abs() < 1e-9);
        assert_eq!(m.node_scores(&[]).unwrap(), vec![1.5, 2.0]);
        let snapshot = m.clone();
        m.project_to_ball(2.5);
        assert_eq!(m, snapshot);

        let mut small = ContextTreeModel::new(2, PenaltyProfile::default(), None);
        small.set_node_scores(&[], &[0.6, 0.8]);
        let before = small.clone();
        small.project_to_ball(2.0);
        assert_eq!(small, before);
    }

    #[test]
    fn update_examples() {
        let mut m = ContextTreeModel::new(2, PenaltyProfile::default(), None);
        m.apply_update(&[1], &[1.0, 0.0], 0.5);
        assert_eq!(m.node_scores(&[]).unwrap(), vec![-0.5, 0.0]);
        assert_eq!(m.node_scores(&[1]).unwrap(), vec![-0.5, 0.0]);
        assert_eq!(m.node_count(), 2);

        let before = m.clone();
        m.apply_update(&[2, 2, 1], &[3.0, 1.0], 0.0);
        assert_eq!(m, before);
        assert_eq!(m.node_count(), 2);

        m.apply_update(&[2, 1], &[0.3, -0.7], 0.25);
        m.apply_update(&[2, 1], &[-0.3, 0.7], 0.25);
        for (a, b) in m.nodes_in_order().iter().zip(before.nodes_in_order().iter()) {
            for (x, y) in a.scores.iter().zip(&b.scores) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn update_respects_cap() {
        let mut m = ContextTreeModel::new(3, PenaltyProfile::default(), Some(2));
        m.apply_update(&[1, 2, 3], &[1.0, 0.0, -1.0], 1.0);
        assert_eq!(m.node_count(), 2);
        assert!(m.node_scores(&[3]).is_some());
        assert!(m.node_scores(&[3, 2]).is_none());
    }

    #[test]
    fn cached_norm_tracks_updates() {
        let mut m = ContextTreeModel::new(4, PenaltyProfile::default(), Some(5));
        let seq: Vec<Symbol> = (0..60).map(|i| (i * 7 % 4 + 1) as Symbol).collect();
        for t in 0..seq.len() {
            let g = [0.1 * t as f64, -0.2, 0.05, 0.05];
            m.apply_update(&seq[..t], &g, 0.3);
            if t % 5 == 0 {
                m.project_to_ball(2.0);
            }
        }
        let rel = (m.weighted_norm() - m.recomputed_norm()).abs() / m.recomputed_norm();
        assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn serialization_roundtrip() {
        let empty = ContextTreeModel::new(3, PenaltyProfile::default(), None);
        assert_eq!(ContextTreeModel::from_text(&empty.to_text()).unwrap(), empty);

        let mut m = ContextTreeModel::new(3, PenaltyProfile::normalized_quadratic(), Some(4));
        m.apply_update(&[1, 3], &[0.1, 1.0 / 3.0, -0.4333333333333333], 0.7);
        m.project_to_ball(0.1);
        let text = m.to_text();
        let back = ContextTreeModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert!((back.weighted_norm() - m.recomputed_norm()).abs() < 1e-12);
        assert_eq!(m.node_count(), 3);
        assert!(text.starts_with("LEXPST 1 k=3 penalty=power:2.0:1.6449340668482264 cap=4\n1 -"));
    }

    #[test]
    fn serialization_errors() {
        let good = model2().to_text();
        assert!(matches!(
            ContextTreeModel::from_text("LEXPST 2 k=2 penalty=quadratic cap=inf\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let corrupted = good.replace("3.0", "3.x");
        assert!(matches!(
            ContextTreeModel::from_text(&corrupted),
            Err(Error::Parse { line: 3, .. })
        ));
        let orphan = "LEXPST 1 k=2 penalty=quadratic cap=inf\n1 - 0.0 0.0\n3 1 2 0.5 0.5\n";
        assert!(matches!(
            ContextTreeModel::from_text(orphan),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn penalty_parsing() {
        assert_eq!(
            "quadratic".parse::<PenaltyProfile>().unwrap(),
            PenaltyProfile::default()
        );
        let p: PenaltyProfile = "power:1.5:2".parse().unwrap();
        assert_eq!(p.weight(4), 2.0 * 8.0);
        assert_eq!(p.to_string().parse::<PenaltyProfile>().unwrap(), p);
        assert!("power:1:0".parse::<PenaltyProfile>().is_err());
        assert!(!PenaltyProfile::decreasing().is_nondecreasing());
        let mass = PenaltyProfile::default().dual_mass(100_000);
        assert!(mass < std::f64::consts::PI.powi(2) / 6.0);
        assert!((PenaltyProfile::normalized_quadratic().dual_mass(1_000_000) - 1.0).abs() < 1e-5);
    }
}
