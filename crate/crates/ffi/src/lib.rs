//! C ABI over `lexseq`.
//!
//! Every fallible function returns a [`LexseqStatus`]; on failure the
//! message is kept per thread and can be copied out with
//! [`lexseq_last_error_message`]. Objects are opaque handles created by
//! `*_new`/`*_load`/`*_train`/`*_fit` functions and released with the
//! matching `*_free`. Symbols are 1-based `uint32_t` values.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lexseq::baselines::{lmm_em_fit, LmmModel};
use lexseq::bench::{evaluate_online, gen_synthetic, ModelParams, SyntheticConfig};
use lexseq::lex_train::{augment_pool, train_lex};
use lexseq::online_wm::{default_eta, wm_run, Eta, WeightLoss};
use lexseq::{Dataset, Error, ExpertPool, WmMode};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexseqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    FormatError = 3,
    IoError = 4,
    EmptyPool = 5,
    AlphabetMismatch = 6,
    Panic = 7,
}

/// Opaque corpus handle.
pub struct LexseqDataset(Dataset);

/// Opaque handle to a trained expert pool.
pub struct LexseqPool(ExpertPool);

/// Opaque handle to a fitted mixture of Markov chains.
pub struct LexseqLmm(LmmModel);

/// Training settings for [`lexseq_pool_train`]. `d` is the history
/// length; trees are capped at depth `d + 1`, and `d < 0` means unbounded.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LexseqTrainParams {
    pub r: usize,
    pub b: f64,
    pub d: i64,
    pub eta0: f64,
    pub epochs: usize,
    pub outer_iters: usize,
    pub seed: u64,
    /// Nonzero appends a single-expert model trained on all data.
    pub augment: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> LexseqStatus {
    match e {
        Error::Io { .. } => LexseqStatus::IoError,
        Error::EmptyPool => LexseqStatus::EmptyPool,
        Error::AlphabetMismatch { .. } => LexseqStatus::AlphabetMismatch,
        e if e.is_format_error() => LexseqStatus::FormatError,
        _ => LexseqStatus::InvalidArgument,
    }
}

enum Fail {
    Null,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LexseqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LexseqStatus::Ok
        }
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument");
            LexseqStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(msg);
            LexseqStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::InvalidArgument("path is not UTF-8".into())))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Fail> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(Fail::Null)
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null);
    }
    out.write(v);
    Ok(())
}

unsafe fn write_handle<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    write_out(out, Box::into_raw(Box::new(v)))
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length in
/// bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn lexseq_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lexseq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Draws the two-type synthetic corpus. `labels` may be null; otherwise it
/// must hold `m` bytes and receives each sequence's hidden type (1 or 2).
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_generate(
    k: usize,
    m: usize,
    t: usize,
    seed: u64,
    labels: *mut u8,
    out: *mut *mut LexseqDataset,
) -> LexseqStatus {
    guard(|| {
        let (ds, l) = gen_synthetic(&SyntheticConfig { k, m, t, seed })?;
        if !labels.is_null() {
            ptr::copy_nonoverlapping(l.as_ptr(), labels, l.len());
        }
        write_handle(out, LexseqDataset(ds))
    })
}

/// Builds a corpus over `1..=k` from `count` sequences stored back to back
/// in `symbols`, with lengths in `lengths`.
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_from_symbols(
    k: usize,
    symbols: *const u32,
    lengths: *const usize,
    count: usize,
    out: *mut *mut LexseqDataset,
) -> LexseqStatus {
    guard(|| {
        let lengths = slice_arg(lengths, count)?;
        let total: usize = lengths.iter().sum();
        let symbols = slice_arg(symbols, total)?;
        let mut seqs = Vec::with_capacity(count);
        let mut at = 0;
        for &n in lengths {
            seqs.push(symbols[at..at + n].to_vec());
            at += n;
        }
        write_handle(out, LexseqDataset(Dataset::from_symbols(k, seqs)?))
    })
}

/// Loads an encoded or raw corpus file.
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_load(path: *const c_char, out: *mut *mut LexseqDataset) -> LexseqStatus {
    guard(|| write_handle(out, LexseqDataset(Dataset::load(path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_save(ds: *const LexseqDataset, path: *const c_char) -> LexseqStatus {
    guard(|| Ok(as_ref(ds)?.0.save(path_arg(path)?)?))
}

/// Number of sequences (0 for null).
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_len(ds: *const LexseqDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Alphabet size (0 for null).
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_k(ds: *const LexseqDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.k())
}

/// Length of sequence `i`, or 0 when out of range.
#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_seq_len(ds: *const LexseqDataset, i: usize) -> usize {
    ds.as_ref().and_then(|d| d.0.sequences().get(i)).map_or(0, |s| s.len())
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_dataset_free(ds: *mut LexseqDataset) {
    free_handle(ds)
}

/// The harness defaults.
#[no_mangle]
pub extern "C" fn lexseq_train_params_default() -> LexseqTrainParams {
    let p = ModelParams::default();
    LexseqTrainParams {
        r: p.r,
        b: p.b,
        d: p.d.map_or(-1, |d| d as i64),
        eta0: p.eta0,
        epochs: p.epochs,
        outer_iters: p.outer_iters,
        seed: 0,
        augment: u8::from(p.augment),
    }
}

fn model_params(p: &LexseqTrainParams) -> ModelParams {
    ModelParams {
        r: p.r,
        b: p.b,
        d: usize::try_from(p.d).ok(),
        eta0: p.eta0,
        epochs: p.epochs,
        outer_iters: p.outer_iters,
        augment: p.augment != 0,
        ..ModelParams::default()
    }
}

/// Trains a pool of `params.r` experts (plus one when `augment` is set).
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_train(
    ds: *const LexseqDataset,
    params: *const LexseqTrainParams,
    out: *mut *mut LexseqPool,
) -> LexseqStatus {
    guard(|| {
        let ds = &as_ref(ds)?.0;
        let p = as_ref(params)?;
        let mp = model_params(p);
        let config = mp.train_config(p.r, p.seed);
        let mut pool = train_lex(ds, &config)?.pool;
        if mp.augment {
            pool = augment_pool(&pool, ds, &config)?;
        }
        write_handle(out, LexseqPool(pool))
    })
}

/// Loads a pool manifest (expert files are resolved beside it).
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_load(path: *const c_char, out: *mut *mut LexseqPool) -> LexseqStatus {
    guard(|| write_handle(out, LexseqPool(ExpertPool::load(path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_save(pool: *const LexseqPool, path: *const c_char) -> LexseqStatus {
    guard(|| Ok(as_ref(pool)?.0.save(path_arg(path)?)?))
}

/// Number of experts (0 for null).
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_len(pool: *const LexseqPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.len())
}

/// Alphabet size (0 for null).
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_k(pool: *const LexseqPool) -> usize {
    pool.as_ref().map_or(0, |p| p.0.k())
}

/// Next-symbol prediction of expert `expert` (0-based) after `prefix`.
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_expert_predict(
    pool: *const LexseqPool,
    expert: usize,
    prefix: *const u32,
    len: usize,
    out: *mut u32,
) -> LexseqStatus {
    guard(|| {
        let pool = &as_ref(pool)?.0;
        let prefix = slice_arg(prefix, len)?;
        let e = pool
            .experts
            .get(expert)
            .ok_or_else(|| Error::InvalidArgument(format!("expert {expert} out of range")))?;
        for &s in prefix {
            if s == 0 || s as usize > pool.k() {
                return Err(Error::SymbolOutOfRange { index: s, k: pool.k() }.into());
            }
        }
        write_out(out, e.predict(prefix))
    })
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_free(pool: *mut LexseqPool) {
    free_handle(pool)
}

/// Runs Weighted Majority in expected mode over one sequence.
/// `eta < 0` selects the fixed rate `sqrt(log r / T)`. Any output pointer
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn lexseq_wm_run(
    pool: *const LexseqPool,
    x: *const u32,
    len: usize,
    eta: f64,
    avg_loss: *mut f64,
    best_expert_loss: *mut f64,
    regret_bound: *mut f64,
) -> LexseqStatus {
    guard(|| {
        let pool = &as_ref(pool)?.0;
        let x = slice_arg(x, len)?;
        if let Some(&s) = x.iter().find(|&&s| s == 0 || s as usize > pool.k()) {
            return Err(Error::SymbolOutOfRange { index: s, k: pool.k() }.into());
        }
        let eta = if eta < 0.0 {
            default_eta(pool.len(), x.len())
        } else {
            eta
        };
        let rep = wm_run(&pool.experts, x, Eta::Fixed(eta), WmMode::Expected, WeightLoss::ZeroOne)?;
        for (p, v) in [
            (avg_loss, rep.avg_loss),
            (best_expert_loss, rep.best_expert_loss),
            (regret_bound, rep.regret_bound),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Mean online accuracy of the pool over a corpus, using the harness's
/// default Weighted Majority settings.
#[no_mangle]
pub unsafe extern "C" fn lexseq_pool_evaluate(
    pool: *const LexseqPool,
    ds: *const LexseqDataset,
    accuracy: *mut f64,
) -> LexseqStatus {
    guard(|| {
        let pred = ModelParams::default().pool_predictor(as_ref(pool)?.0.clone(), WmMode::Expected);
        let report = evaluate_online(&pred, "lex", &as_ref(ds)?.0)?;
        write_out(accuracy, report.mean_accuracy)
    })
}

/// Fits an `r`-component mixture of order-`d` Markov chains by EM.
#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_fit(
    ds: *const LexseqDataset,
    r: usize,
    d: usize,
    alpha: f64,
    seed: u64,
    out: *mut *mut LexseqLmm,
) -> LexseqStatus {
    guard(|| {
        let params = ModelParams {
            r,
            d: Some(d),
            alpha,
            ..ModelParams::default()
        };
        let (model, _) = lmm_em_fit(&as_ref(ds)?.0, &params.lmm_config(seed))?;
        write_handle(out, LexseqLmm(model))
    })
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_load(path: *const c_char, out: *mut *mut LexseqLmm) -> LexseqStatus {
    guard(|| write_handle(out, LexseqLmm(LmmModel::load(path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_save(model: *const LexseqLmm, path: *const c_char) -> LexseqStatus {
    guard(|| Ok(as_ref(model)?.0.save(path_arg(path)?)?))
}

/// MAP next-symbol prediction after `prefix`.
#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_predict(
    model: *const LexseqLmm,
    prefix: *const u32,
    len: usize,
    out: *mut u32,
) -> LexseqStatus {
    guard(|| {
        let m = &as_ref(model)?.0;
        let prefix = slice_arg(prefix, len)?;
        if let Some(&s) = prefix.iter().find(|&&s| s == 0 || s as usize > m.k()) {
            return Err(Error::SymbolOutOfRange { index: s, k: m.k() }.into());
        }
        write_out(out, m.predict(prefix))
    })
}

/// Mean online MAP accuracy over a corpus.
#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_evaluate(
    model: *const LexseqLmm,
    ds: *const LexseqDataset,
    accuracy: *mut f64,
) -> LexseqStatus {
    guard(|| {
        let report = evaluate_online(&as_ref(model)?.0, "lmm", &as_ref(ds)?.0)?;
        write_out(accuracy, report.mean_accuracy)
    })
}

#[no_mangle]
pub unsafe extern "C" fn lexseq_lmm_free(model: *mut LexseqLmm) {
    free_handle(model)
}
