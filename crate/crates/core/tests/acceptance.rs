//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. The paper-scale run (criterion 8) is
//! skipped unless `LEXSEQ_PAPER_SCALE=1` is set or `--include-ignored` is
//! passed; run it with `--release`.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{random_dataset, random_sequence, random_tree, rng, Scripted};
use lexseq::baselines::{lmm_em_fit, online_pst_run, LmmConfig, OnlinePstConfig};
use lexseq::bench::{learning_curve, Algo, CurveConfig, CurveRow};
use lexseq::lex_train::{assigned_objective, init_assignment, objective, reassign, train_lex, SgdConfig};
use lexseq::losses::{log_loss, log_loss_grad, sequence_loss, LossKind};
use lexseq::online_wm::{default_eta, regret_bound, wm_run, WeightLoss};
use lexseq::{ContextTreeModel, Dataset, TrainConfig, WmMode};
use rand::Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within(budget: Duration, start: Instant, verdict: Verdict) -> Verdict {
    let took = start.elapsed();
    match verdict {
        Verdict::Pass(d) if took > budget => Verdict::Fail(format!("{d}; took {took:.1?}, budget {budget:?}")),
        v => v,
    }
}

fn regret_property() -> Verdict {
    let start = Instant::now();
    let mut g = rng(1);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let r = g.gen_range(1..=8);
        let t = g.gen_range(5..=200);
        let k = g.gen_range(2..=10);
        let pool: Vec<Scripted> = (0..r)
            .map(|_| Scripted {
                k,
                predictions: random_sequence(&mut g, k, t),
            })
            .collect();
        let x = random_sequence(&mut g, k, t);
        let rep = wm_run(&pool, &x, default_eta(r, t), WmMode::Expected, WeightLoss::ZeroOne).unwrap();
        let slack = rep.avg_loss - rep.best_expert_loss - regret_bound(r, t);
        worst = worst.max(slack);
        violations += usize::from(slack > 0.0);
    }
    within(
        Duration::from_secs(10),
        start,
        check(
            violations == 0,
            format!("{violations} violations in 1000 instances, max excess {worst:.4}"),
        ),
    )
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut g = rng(2);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..200 {
        let k = g.gen_range(2..=10);
        let z: Vec<f64> = (0..k).map(|_| g.gen_range(-10.0..10.0)).collect();
        let y = g.gen_range(1..=k as u32);
        let grad = log_loss_grad(&z, y);
        for c in 0..k {
            let (mut up, mut down) = (z.clone(), z.clone());
            up[c] += h;
            down[c] -= h;
            let fd = (log_loss(&up, y) - log_loss(&down, y)) / (2.0 * h);
            // relative error, measured absolutely for components below 1e-3
            let err = (fd - grad[c]).abs() / grad[c].abs().max(fd.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    within(
        Duration::from_secs(1),
        start,
        check(worst < 1e-4, format!("max relative error {worst:.2e} over 200 triples")),
    )
}

/// Recomputes the objective from the node list alone.
fn brute_force_objective(experts: &[ContextTreeModel], ds: &Dataset) -> f64 {
    let tables: Vec<HashMap<Vec<u32>, Vec<f64>>> = experts
        .iter()
        .map(|e| e.nodes_in_order().into_iter().map(|n| (n.path, n.scores)).collect())
        .collect();
    let mut total = 0.0;
    for seq in ds.sequences() {
        let x = seq.symbols();
        let mut best = f64::INFINITY;
        for (e, table) in experts.iter().zip(&tables) {
            let mut sum = 0.0;
            for t in 0..x.len() {
                let mut z = vec![0.0; ds.k()];
                let max_len = e.cap().map_or(t, |d| t.min(d - 1));
                for len in 0..=max_len {
                    let path: Vec<u32> = x[..t].iter().rev().take(len).copied().collect();
                    if let Some(s) = table.get(&path) {
                        for (zc, sc) in z.iter_mut().zip(s) {
                            *zc += sc;
                        }
                    }
                }
                let y = x[t] as usize - 1;
                let inner: f64 = (0..ds.k())
                    .map(|c| (f64::from(u8::from(c != y)) + z[c] - z[y]).exp())
                    .sum();
                sum += inner.ln();
            }
            best = best.min(sum / x.len() as f64);
        }
        total += best;
    }
    total / ds.len() as f64
}

fn hindsight_oracle() -> Verdict {
    let start = Instant::now();
    let mut g = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let r = g.gen_range(1..=3);
        let m = g.gen_range(1..=10);
        let k = g.gen_range(2..=4);
        let cap = if g.gen_bool(0.3) {
            None
        } else {
            Some(g.gen_range(1..=4))
        };
        let experts: Vec<ContextTreeModel> = (0..r).map(|_| random_tree(&mut g, k, cap, 4)).collect();
        let ds = random_dataset(&mut g, k, m, 8);
        let fast = objective(&experts, &ds).unwrap();
        worst = worst.max((fast - brute_force_objective(&experts, &ds)).abs());
    }
    within(
        Duration::from_secs(5),
        start,
        check(
            worst <= 1e-9,
            format!("max |objective - oracle| = {worst:.2e} over 50 instances"),
        ),
    )
}

fn e_step_monotone() -> Verdict {
    let mut g = rng(4);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..100 {
        let r = g.gen_range(1..=4);
        let m = g.gen_range(r..=15);
        let k = g.gen_range(2..=5);
        let experts: Vec<ContextTreeModel> = (0..r).map(|_| random_tree(&mut g, k, Some(3), 4)).collect();
        let ds = random_dataset(&mut g, k, m, 10);
        let before = init_assignment(m, r, i).unwrap();
        let after = reassign(&experts, &ds);
        let rise = assigned_objective(&experts, &ds, &after) - assigned_objective(&experts, &ds, &before);
        worst = worst.max(rise);
    }
    check(
        worst <= 1e-12,
        format!("largest change across reassign {worst:.3e} over 100 instances"),
    )
}

fn em_monotone() -> Verdict {
    let mut g = rng(5);
    let mut worst_drop: f64 = 0.0;
    let mut worst_penalized: f64 = 0.0;
    for i in 0..50 {
        let config = LmmConfig {
            r: g.gen_range(1..=4),
            d: g.gen_range(0..=2),
            alpha: if g.gen_bool(0.5) { 0.1 } else { 1.0 },
            seed: i,
            ..LmmConfig::default()
        };
        let k = g.gen_range(2..=5);
        let m = g.gen_range(3..=12);
        let ds = random_dataset(&mut g, k, m, 15);
        let (_, trace) = lmm_em_fit(&ds, &config).unwrap();
        for w in trace.loglik.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        for w in trace.penalized.windows(2) {
            worst_penalized = worst_penalized.max(w[0] - w[1]);
        }
    }
    check(
        worst_drop <= 1e-8,
        format!(
            "largest log-likelihood decrease {worst_drop:.3e} (smoothed objective {worst_penalized:.3e}) over 50 configurations"
        ),
    )
}

fn feasibility() -> Verdict {
    // debug builds also assert the bound inside both training loops
    let mut g = rng(6);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10 {
        let b = [0.3, 1.0, 5.0][i % 3];
        let ds = random_dataset(&mut g, 4, 12, 20);
        let config = TrainConfig {
            r: 2,
            b,
            cap: Some(3),
            sgd: SgdConfig {
                eta0: 2.0,
                epochs: 2,
                ..SgdConfig::default()
            },
            outer_iters: 5,
            seed: i as u64,
            ..TrainConfig::default()
        };
        let out = train_lex(&ds, &config).unwrap();
        for e in out.trace.iter() {
            worst = worst.max(e.max_norm - b);
        }
        for e in &out.pool.experts {
            worst = worst.max(e.weighted_norm() - b);
        }
        let x = random_sequence(&mut g, 4, 60);
        let pst = online_pst_run(
            &x,
            4,
            &OnlinePstConfig {
                b,
                ..OnlinePstConfig::default()
            },
        );
        worst = worst.max(pst.max_norm - b);
    }
    check(worst <= 1e-6, format!("largest norm excess over B: {worst:.3e}"))
}

fn mean_accuracy(rows: &[CurveRow], algo: Algo, size: usize) -> f64 {
    let accs: Vec<f64> = rows
        .iter()
        .filter(|r| r.algo == algo && r.train_size == size)
        .map(|r| r.accuracy)
        .collect();
    accs.iter().sum::<f64>() / accs.len() as f64
}

fn desk_scale() -> Verdict {
    let start = Instant::now();
    let config = CurveConfig {
        sizes: vec![50],
        timing: false,
        ..CurveConfig::desk_scale()
    };
    let rows = learning_curve(&config).unwrap();
    let acc = |a| mean_accuracy(&rows, a, 50);
    let (lex, one, lmm, pst) = (acc(Algo::Lex), acc(Algo::OneLex), acc(Algo::Lmm), acc(Algo::OnlinePst));
    let a = lex >= 0.43;
    let b = lex >= one && lex >= lmm;
    let c = pst < lex && pst < one && pst < lmm;
    let detail = format!(
        "lex {lex:.4}, onelex {one:.4}, lmm {lmm:.4}, onlinepst {pst:.4}; (a) {} (b) {} (c) {}",
        ok(a),
        ok(b),
        ok(c)
    );
    within(Duration::from_secs(300), start, check(a && b && c, detail))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn paper_scale(enabled: bool) -> Verdict {
    if !enabled {
        return Verdict::Skip("slow; set LEXSEQ_PAPER_SCALE=1 and use --release".into());
    }
    let start = Instant::now();
    let config = CurveConfig {
        sizes: vec![500],
        trials: 1,
        algos: vec![Algo::Lex],
        timing: false,
        ..CurveConfig::paper_scale()
    };
    let rows = learning_curve(&config).unwrap();
    let lex = mean_accuracy(&rows, Algo::Lex, 500);
    within(
        Duration::from_secs(3600),
        start,
        check(
            lex >= 0.45,
            format!("lex accuracy {lex:.4} with 500 training sequences"),
        ),
    )
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_lexseq"))
        .current_dir(dir)
        .env("LEXSEQ_THREADS", threads)
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn determinism() -> Verdict {
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4"]) {
        let d = dir.path();
        run_cli(
            d,
            threads,
            &[
                "gen", "--k", "8", "--m", "30", "--t", "40", "--seed", "11", "--out", "data.txt",
            ],
        );
        run_cli(
            d,
            threads,
            &[
                "train", "--algo", "lex", "--data", "data.txt", "--seed", "3", "--out", "pool.txt",
            ],
        );
        run_cli(
            d,
            threads,
            &[
                "train", "--algo", "lmm", "--data", "data.txt", "--seed", "3", "--out", "lmm.txt",
            ],
        );
        run_cli(
            d,
            threads,
            &[
                "curve",
                "--sizes",
                "5,10",
                "--trials",
                "2",
                "--k",
                "6",
                "--t",
                "20",
                "--test-m",
                "8",
                "--no-timing",
                "--out",
                "curve.csv",
            ],
        );
    }
    let files = [
        "data.txt",
        "pool.txt",
        "pool.txt.1.pst",
        "pool.txt.3.pst",
        "lmm.txt",
        "curve.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(dirs[0].path().join(f)).unwrap() != std::fs::read(dirs[1].path().join(f)).unwrap())
        .collect();
    check(
        differing.is_empty(),
        format!(
            "{} artifacts compared across two runs (1 vs 4 threads); differing: {differing:?}",
            files.len()
        ),
    )
}

fn degenerate_identities() -> Verdict {
    let mut g = rng(10);
    let mut failures = Vec::new();

    let expert = random_tree(&mut g, 3, Some(3), 5);
    let x = random_sequence(&mut g, 3, 50);
    let rep = wm_run(
        std::slice::from_ref(&expert),
        &x,
        0.7,
        WmMode::Expected,
        WeightLoss::ZeroOne,
    )
    .unwrap();
    if rep.avg_loss != sequence_loss(&expert, &x, LossKind::ZeroOne) {
        failures.push("r=1 WM loss");
    }

    let pool: Vec<ContextTreeModel> = (0..4).map(|_| random_tree(&mut g, 3, Some(3), 5)).collect();
    let rep = wm_run(&pool, &x, 0.0, WmMode::Expected, WeightLoss::ZeroOne).unwrap();
    if rep.final_weights.iter().any(|&w| w != 0.25) {
        failures.push("eta=0 weights");
    }

    let ds = random_dataset(&mut g, 4, 6, 12);
    let alpha = 0.1;
    let (model, _) = lmm_em_fit(
        &ds,
        &LmmConfig {
            r: 1,
            d: 0,
            alpha,
            ..LmmConfig::default()
        },
    )
    .unwrap();
    let mut counts = [0.0f64; 4];
    for s in ds.sequences() {
        for &sym in s.symbols() {
            counts[sym as usize - 1] += 1.0;
        }
    }
    let n: f64 = counts.iter().sum();
    let unigram: Vec<f64> = counts.iter().map(|c| (c + alpha) / (n + 4.0 * alpha)).collect();
    if model.transition_row(0, &[]) != unigram {
        failures.push("r=1, d=0 LMM unigram");
    }
    check(
        failures.is_empty(),
        format!("exact identities; mismatches: {failures:?}"),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let paper = std::env::var("LEXSEQ_PAPER_SCALE").is_ok_and(|v| v == "1")
        || args.iter().any(|a| a == "--include-ignored" || a == "--ignored");

    type Criterion<'a> = (&'a str, Box<dyn Fn() -> Verdict>);
    let criteria: Vec<Criterion> = vec![
        ("1 regret bound", Box::new(regret_property)),
        ("2 gradient", Box::new(gradient_check)),
        ("3 hindsight oracle", Box::new(hindsight_oracle)),
        ("4 E-step monotonicity", Box::new(e_step_monotone)),
        ("5 EM monotonicity", Box::new(em_monotone)),
        ("6 feasibility", Box::new(feasibility)),
        ("7 desk-scale curve", Box::new(desk_scale)),
        ("8 paper-scale smoke", Box::new(move || paper_scale(paper))),
        ("9 determinism", Box::new(determinism)),
        ("10 degenerate identities", Box::new(degenerate_identities)),
    ];

    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in &criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        match verdict {
            Verdict::Pass(d) => println!("PASS criterion {name}: {d} [{took:.2?}]"),
            Verdict::Skip(d) => println!("SKIP criterion {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
