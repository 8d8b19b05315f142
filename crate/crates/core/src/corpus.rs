//! Alphabets, encoded sequences and datasets.
//!
//! Symbols are 1-based contiguous indices `1..=k`. Raw tokens only appear at
//! the I/O boundary: [`build_vocab`] assigns indices in order of first
//! appearance, and [`Alphabet::encode`] / [`Alphabet::decode`] translate.
//!
//! Dataset files are UTF-8 text with one sequence per line and
//! whitespace-separated tokens; lines starting with `#` are comments. The
//! encoded form uses integer indices and starts with a `# k=<k>` comment so
//! that the alphabet size survives symbols that never occur.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};

/// A symbol index in `1..=k`.
pub type Symbol = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    tokens: Vec<String>,
    lookup: HashMap<String, Symbol>,
}

impl Alphabet {
    /// Builds an alphabet from tokens listed in index order (index 1 first).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid token {tok:?}")));
            }
            if lookup.insert(tok.clone(), (i + 1) as Symbol).is_some() {
                return Err(Error::invalid(format!("duplicate token {tok}")));
            }
        }
        Ok(Alphabet { tokens, lookup })
    }

    /// The alphabet `{1, ..., k}` whose tokens are the decimal indices.
    pub fn numeric(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("alphabet size must be positive"));
        }
        Self::from_tokens((1..=k).map(|i| i.to_string()))
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_numeric(&self) -> bool {
        self.tokens
            .iter()
            .enumerate()
            .all(|(i, t)| t.parse::<usize>() == Ok(i + 1))
    }

    pub fn token(&self, symbol: Symbol) -> Result<&str> {
        self.check(symbol)?;
        Ok(&self.tokens[symbol as usize - 1])
    }

    pub fn symbol(&self, token: &str) -> Result<Symbol> {
        self.lookup
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn check(&self, symbol: Symbol) -> Result<()> {
        if symbol == 0 || symbol as usize > self.size() {
            return Err(Error::SymbolOutOfRange {
                index: symbol,
                k: self.size(),
            });
        }
        Ok(())
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Sequence> {
        let symbols = tokens
            .iter()
            .map(|t| self.symbol(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Sequence::new(symbols, self.size())
    }

    pub fn decode(&self, seq: &Sequence) -> Result<Vec<String>> {
        seq.symbols()
            .iter()
            .map(|&s| self.token(s).map(str::to_string))
            .collect()
    }

    /// Vocabulary file: one `index<TAB>token` line per symbol, ascending.
    pub fn to_vocab_string(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}", i + 1, tok);
        }
        out
    }

    pub fn parse_vocab(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (idx, tok) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(line_no, "expected index<TAB>token"))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad index {idx:?}")))?;
            if idx != tokens.len() + 1 {
                return Err(Error::parse(
                    line_no,
                    format!("expected index {}, found {idx}", tokens.len() + 1),
                ));
            }
            tokens.push(tok.to_string());
        }
        Self::from_tokens(tokens).map_err(|e| match e {
            Error::EmptyCorpus => Error::parse(0, "empty vocabulary"),
            other => other,
        })
    }

    pub fn save_vocab(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_vocab_string())
    }

    pub fn load_vocab(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_vocab(&read_file(path.as_ref())?)
    }
}

/// Assigns indices to raw tokens in order of first appearance.
pub fn build_vocab<S: AsRef<str>>(raw_sequences: &[Vec<S>]) -> Result<Alphabet> {
    let mut seen = HashMap::new();
    let mut tokens = Vec::new();
    for tok in raw_sequences.iter().flatten() {
        let tok = tok.as_ref();
        if !seen.contains_key(tok) {
            seen.insert(tok.to_string(), ());
            tokens.push(tok.to_string());
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Alphabet::from_tokens(tokens)
}

/// A nonempty sequence of symbols from `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence(Vec<Symbol>);

impl Sequence {
    pub fn new(symbols: Vec<Symbol>, k: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("sequence must be nonempty"));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s == 0 || s as usize > k) {
            return Err(Error::SymbolOutOfRange { index: bad, k });
        }
        Ok(Sequence(symbols))
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `x_{1:t-1}` for a 1-based position `t`.
    pub fn prefix(&self, t: usize) -> &[Symbol] {
        &self.0[..t - 1]
    }
}

impl AsRef<[Symbol]> for Sequence {
    fn as_ref(&self) -> &[Symbol] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    alphabet: Alphabet,
    sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn new(alphabet: Alphabet, sequences: Vec<Sequence>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = alphabet.size();
        for seq in &sequences {
            if let Some(&bad) = seq.symbols().iter().find(|&&s| s as usize > k) {
                return Err(Error::SymbolOutOfRange { index: bad, k });
            }
        }
        Ok(Dataset { alphabet, sequences })
    }

    /// Dataset over the numeric alphabet `1..=k`.
    pub fn from_symbols(k: usize, sequences: Vec<Vec<Symbol>>) -> Result<Self> {
        let alphabet = Alphabet::numeric(k)?;
        let sequences = sequences
            .into_iter()
            .map(|s| Sequence::new(s, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, sequences)
    }

    /// Encodes raw token sequences with a vocabulary built from them.
    pub fn from_raw<S: AsRef<str>>(raw: &[Vec<S>]) -> Result<Self> {
        let alphabet = build_vocab(raw)?;
        let sequences = raw
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| alphabet.encode(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, sequences)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.size()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// A dataset over the same alphabet holding the sequences at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let sequences = indices.iter().map(|&i| self.sequences[i].clone()).collect();
        Self::new(self.alphabet.clone(), sequences)
    }

    /// The first `n` sequences.
    pub fn take(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::invalid(format!(
                "requested {n} sequences but only {} available",
                self.len()
            )));
        }
        Self::new(self.alphabet.clone(), self.sequences[..n].to_vec())
    }

    /// Encoded text form (integer indices with a `# k=` header).
    pub fn to_encoded_string(&self) -> String {
        let mut out = format!("# k={}\n", self.k());
        for seq in &self.sequences {
            let mut first = true;
            for s in seq.symbols() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{s}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses either an encoded file (recognised by its `# k=` header) or a
    /// raw token file, whose vocabulary is built in order of first appearance.
    pub fn parse(text: &str) -> Result<Self> {
        match encoded_header(text)? {
            Some(k) => Self::parse_encoded(text, k),
            None => Self::from_raw(&raw_lines(text)),
        }
    }

    /// Parses raw tokens against an existing vocabulary. Integer files with a
    /// `# k=` header are also accepted as long as `k` matches.
    pub fn parse_with_vocab(text: &str, alphabet: &Alphabet) -> Result<Self> {
        if let Some(k) = encoded_header(text)? {
            if k != alphabet.size() {
                return Err(Error::AlphabetMismatch {
                    expected: alphabet.size(),
                    found: k,
                });
            }
            let ds = Self::parse_encoded(text, k)?;
            return Self::new(alphabet.clone(), ds.sequences);
        }
        let mut sequences = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let toks: Vec<&str> = content_tokens(line);
            if toks.is_empty() {
                continue;
            }
            let seq = alphabet.encode(&toks).map_err(|e| match e {
                Error::UnknownToken(t) => Error::parse(lineno + 1, format!("unknown token {t}")),
                other => other,
            })?;
            sequences.push(seq);
        }
        Self::new(alphabet.clone(), sequences)
    }

    fn parse_encoded(text: &str, k: usize) -> Result<Self> {
        let mut sequences = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let toks = content_tokens(line);
            if toks.is_empty() {
                continue;
            }
            let symbols = toks
                .iter()
                .map(|t| {
                    t.parse::<Symbol>()
                        .map_err(|_| Error::parse(lineno + 1, format!("bad symbol {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let seq = Sequence::new(symbols, k).map_err(|e| Error::parse(lineno + 1, e.to_string()))?;
            sequences.push(seq);
        }
        Self::new(Alphabet::numeric(k)?, sequences)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_encoded_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&read_file(path.as_ref())?)
    }

    /// Loads a dataset whose alphabet comes from a vocabulary file.
    pub fn load_with_vocab(path: impl AsRef<Path>, vocab: impl AsRef<Path>) -> Result<Self> {
        let alphabet = Alphabet::load_vocab(vocab)?;
        Self::parse_with_vocab(&read_file(path.as_ref())?, &alphabet)
    }
}

fn content_tokens(line: &str) -> Vec<&str> {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') {
        return Vec::new();
    }
    trimmed.split_whitespace().collect()
}

fn raw_lines(text: &str) -> Vec<Vec<&str>> {
    text.lines().map(content_tokens).filter(|t| !t.is_empty()).collect()
}

fn encoded_header(text: &str) -> Result<Option<usize>> {
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(k) = rest.trim().strip_prefix("k=") {
                let k = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(lineno + 1, format!("bad alphabet size {k:?}")))?;
                return Ok(Some(k));
            }
            continue;
        }
        return Ok(None);
    }
    Ok(None)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Self {
        SplitFractions { train, val, test }
    }
}

/// Seeded disjoint split. Validation and test sizes are `floor(m * frac)`;
/// the remainder goes to training.
pub fn split_dataset(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let SplitFractions { train, val, test } = fractions;
    if !(train > 0.0 && val > 0.0 && test > 0.0) {
        return Err(Error::invalid("split fractions must be positive"));
    }
    if ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions sum to {}, expected 1",
            train + val + test
        )));
    }
    let m = dataset.len();
    let n_val = (m as f64 * val + 1e-9).floor() as usize;
    let n_test = (m as f64 * test + 1e-9).floor() as usize;
    let n_train = m - n_val - n_test;
    if n_val == 0 || n_test == 0 || n_train == 0 {
        return Err(Error::invalid(format!("split of {m} sequences leaves an empty part")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut crate::rng::stream(seed, 0));
    Ok((
        dataset.subset(&order[..n_train])?,
        dataset.subset(&order[n_train..n_train + n_val])?,
        dataset.subset(&order[n_train + n_val..])?,
    ))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
