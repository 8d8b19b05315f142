mod common;

use common::{random_dataset, random_sequence, random_tree, rng, Scripted};
use lexseq::baselines::{lmm_em_fit, online_pst_run, LmmConfig, LmmFilter, OnlinePstConfig};
use lexseq::bench::{evaluate_online, PoolPredictor};
use lexseq::context_tree::{path_len, predict_symbol, psi_path};
use lexseq::corpus::{split_dataset, SplitFractions};
use lexseq::lex_train::{assigned_objective, init_assignment, objective, reassign, ExpertPool};
use lexseq::losses::{hindsight_loss, log_loss, log_loss_grad, sequence_loss, LossKind};
use lexseq::online_wm::{default_eta, regret_bound, wm_run, Eta, WeightLoss, WmState};
use lexseq::{ContextTreeModel, Dataset, PenaltyProfile, WmMode};
use proptest::prelude::*;

fn scores(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, k)
}

fn scores_and_label() -> impl Strategy<Value = (Vec<f64>, u32)> {
    (2usize..=10).prop_flat_map(|k| (scores(k), 1..=k as u32))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_roundtrip(seed in any::<u64>(), k in 1usize..8, m in 1usize..12) {
        let ds = random_dataset(&mut rng(seed), k, m, 20);
        let back = Dataset::parse(&ds.to_encoded_string()).unwrap();
        prop_assert_eq!(back.k(), ds.k());
        prop_assert_eq!(back.sequences(), ds.sequences());
    }

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), m in 10usize..60) {
        let seqs: Vec<Vec<u32>> = (0..m).map(|i| vec![1, (i % 3) as u32 + 1, i as u32 % 2 + 1]).collect();
        let ds = Dataset::from_symbols(3, seqs).unwrap();
        let (tr, va, te) = split_dataset(&ds, SplitFractions::new(0.6, 0.2, 0.2), seed).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), m);
        let mut all: Vec<Vec<u32>> = [tr, va, te]
            .iter()
            .flat_map(|d| d.sequences().iter().map(|s| s.symbols().to_vec()))
            .collect();
        let mut orig: Vec<Vec<u32>> = ds.sequences().iter().map(|s| s.symbols().to_vec()).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
    }

    #[test]
    fn psi_path_sparsity(seed in any::<u64>(), t in 0usize..12, cap in prop::option::of(1usize..6)) {
        let prefix = random_sequence(&mut rng(seed), 4, t);
        let path = psi_path(&prefix, cap);
        let expected = match cap { Some(d) => t.min(d - 1) + 1, None => t + 1 };
        prop_assert_eq!(path.len(), expected);
        prop_assert_eq!(path_len(t, cap), expected);
        prop_assert!(path[0].is_empty());
    }

    #[test]
    fn scores_are_linear(seed in any::<u64>(), k in 2usize..5) {
        let mut r = rng(seed);
        let a = random_tree(&mut r, k, Some(4), 4);
        let b = random_tree(&mut r, k, Some(4), 4);
        let sum = a.merged_sum(&b).unwrap();
        for _ in 0..5 {
            let len = rand::Rng::gen_range(&mut r, 0..7);
            let h = random_sequence(&mut r, k, len);
            let (za, zb, zs) = (a.predict_scores(&h), b.predict_scores(&h), sum.predict_scores(&h));
            for c in 0..k {
                prop_assert!((za[c] + zb[c] - zs[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn norm_homogeneous_and_subadditive(seed in any::<u64>(), c in -5.0f64..5.0) {
        let mut r = rng(seed);
        let a = random_tree(&mut r, 3, None, 4);
        let b = random_tree(&mut r, 3, None, 4);
        let sum = a.merged_sum(&b).unwrap();
        prop_assert!(sum.weighted_norm() <= a.weighted_norm() + b.weighted_norm() + 1e-9);
        let mut scaled = a.clone();
        scaled.scale_by(c);
        prop_assert!((scaled.weighted_norm() - c.abs() * a.weighted_norm()).abs() < 1e-9 * (1.0 + a.weighted_norm()));
        prop_assert!((a.weighted_norm() - a.recomputed_norm()).abs() < 1e-9);
    }

    #[test]
    fn projection_lands_in_ball(seed in any::<u64>(), b in 0.01f64..20.0) {
        let mut m = random_tree(&mut rng(seed), 3, Some(3), 5);
        m.project_to_ball(b);
        prop_assert!(m.weighted_norm() <= b + 1e-9);
        let once = m.clone();
        m.project_to_ball(b);
        prop_assert_eq!(m.nodes_in_order(), once.nodes_in_order());
    }

    #[test]
    fn dual_mass_bounded(n in 1usize..500) {
        prop_assert!(PenaltyProfile::default().dual_mass(n) <= std::f64::consts::PI.powi(2) / 6.0 + 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences((z, y) in scores_and_label()) {
        let g = log_loss_grad(&z, y);
        let h = 1e-5;
        for c in 0..z.len() {
            let (mut up, mut down) = (z.clone(), z.clone());
            up[c] += h;
            down[c] -= h;
            let fd = (log_loss(&up, y) - log_loss(&down, y)) / (2.0 * h);
            // components below 1e-3 are compared absolutely: the difference
            // quotient's rounding error is about 1e-10 there
            let err = (fd - g[c]).abs() / g[c].abs().max(fd.abs()).max(1e-3);
            prop_assert!(err < 1e-4, "c={} fd={} g={}", c, fd, g[c]);
        }
    }

    #[test]
    fn mistakes_cost_at_least_one((z, y) in scores_and_label()) {
        let guess = predict_symbol(&z);
        let strict = z.iter().filter(|&&v| v == z[guess as usize - 1]).count() == 1;
        if guess != y && strict {
            prop_assert!(log_loss(&z, y) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn shift_invariance((z, y) in scores_and_label(), c in -100.0f64..100.0) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        prop_assert!((log_loss(&z, y) - log_loss(&shifted, y)).abs() < 1e-12 * (1.0 + c.abs()).max(1.0) * 10.0);
        prop_assert_eq!(predict_symbol(&z), predict_symbol(&shifted));
    }

    #[test]
    fn log_loss_is_lipschitz_in_sup_norm((u, y) in scores_and_label(), seed in any::<u64>()) {
        // each margin z_c - z_y moves by up to twice the sup-norm change
        let mut r = rng(seed);
        let v: Vec<f64> = u.iter().map(|x| x + rand::Rng::gen_range(&mut r, -3.0..3.0)).collect();
        let sup = u.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!((log_loss(&u, y) - log_loss(&v, y)).abs() <= 2.0 * sup + 1e-12);
    }

    #[test]
    fn hindsight_below_each_expert(seed in any::<u64>(), r in 1usize..4) {
        let mut g = rng(seed);
        let pool: Vec<ContextTreeModel> = (0..r).map(|_| random_tree(&mut g, 3, Some(3), 3)).collect();
        let x = random_sequence(&mut g, 3, 10);
        for kind in [LossKind::Log, LossKind::ZeroOne] {
            let (best, _) = hindsight_loss(&pool, &x, kind).unwrap();
            for f in &pool {
                prop_assert!(best <= sequence_loss(f, &x, kind));
            }
        }
    }

    #[test]
    fn wm_weights_stay_on_simplex_and_ordered(seed in any::<u64>(), r in 1usize..6, t in 1usize..60) {
        let mut g = rng(seed);
        let mut state = WmState::new(r, default_eta(r, t));
        let mut mistakes = vec![0usize; r];
        for _ in 0..t {
            let losses: Vec<f64> = (0..r).map(|_| f64::from(u8::from(rand::Rng::gen_bool(&mut g, 0.5)))).collect();
            for (m, l) in mistakes.iter_mut().zip(&losses) {
                *m += *l as usize;
            }
            state.update(&losses);
            let w = state.weights();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            for i in 0..r {
                for j in 0..r {
                    if mistakes[i] > mistakes[j] {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn wm_regret_bound(seed in any::<u64>(), r in 1usize..6, t in 1usize..80, k in 2usize..5) {
        let mut g = rng(seed);
        let pool: Vec<Scripted> = (0..r).map(|_| Scripted { k, predictions: random_sequence(&mut g, k, t) }).collect();
        let x = random_sequence(&mut g, k, t);
        let rep = wm_run(&pool, &x, default_eta(r, t), WmMode::Expected, WeightLoss::ZeroOne).unwrap();
        prop_assert!(rep.avg_loss <= rep.best_expert_loss + regret_bound(r, t));
    }

    #[test]
    fn wm_sampled_reproducible(seed in any::<u64>()) {
        let mut g = rng(seed);
        let pool: Vec<Scripted> = (0..3).map(|_| Scripted { k: 3, predictions: random_sequence(&mut g, 3, 30) }).collect();
        let x = random_sequence(&mut g, 3, 30);
        let a = wm_run(&pool, &x, Eta::Anytime, WmMode::Sampled { seed }, WeightLoss::ZeroOne).unwrap();
        let b = wm_run(&pool, &x, Eta::Anytime, WmMode::Sampled { seed }, WeightLoss::ZeroOne).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn reassign_never_increases_objective(seed in any::<u64>(), r in 1usize..4, m in 4usize..12) {
        let mut g = rng(seed);
        let experts: Vec<ContextTreeModel> = (0..r).map(|_| random_tree(&mut g, 3, Some(3), 3)).collect();
        let ds = random_dataset(&mut g, 3, m, 8);
        let before = init_assignment(m, r, seed).unwrap();
        let after = reassign(&experts, &ds);
        let (b, a) = (assigned_objective(&experts, &ds, &before), assigned_objective(&experts, &ds, &after));
        prop_assert!(a <= b + 1e-12);
        prop_assert!((a - objective(&experts, &ds).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lmm_distributions_normalized(seed in any::<u64>(), r in 1usize..4, d in 0usize..3) {
        let mut g = rng(seed);
        let ds = random_dataset(&mut g, 4, 8, 12);
        let (model, trace) = lmm_em_fit(&ds, &LmmConfig { r, d, alpha: 0.5, seed, ..LmmConfig::default() }).unwrap();
        for w in trace.penalized.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8);
        }
        let h = random_sequence(&mut g, 4, 5);
        prop_assert!((model.posterior(&h).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((model.predictive(&h).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for q in 0..r {
            let row = model.transition_row(q, &h);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&p| p > 0.0));
        }
        let mut filter = LmmFilter::new(&model);
        for &s in &h {
            filter.observe(s);
        }
        let direct = model.posterior(&h);
        for (a, b) in filter.posterior().iter().zip(&direct) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        if r == 1 {
            prop_assert_eq!(model.posterior(&h), vec![1.0]);
        }
    }

    #[test]
    fn online_pst_stays_feasible(seed in any::<u64>(), b in 0.1f64..5.0) {
        let x = random_sequence(&mut rng(seed), 4, 40);
        let trace = online_pst_run(&x, 4, &OnlinePstConfig { b, cap: Some(3), ..OnlinePstConfig::default() });
        prop_assert!(trace.max_norm <= b + 1e-6);
    }
}

#[test]
fn sup_norm_constant_one_is_too_small() {
    let (u, v) = ([0.0, 10.0], [-1.0, 11.0]);
    let gap = (log_loss(&u, 1) - log_loss(&v, 1)).abs();
    assert!(gap > 1.99 && gap <= 2.0);
}

#[test]
fn pool_accuracy_is_one_minus_wm_loss() {
    let mut g = rng(5);
    let experts: Vec<ContextTreeModel> = (0..3).map(|_| random_tree(&mut g, 3, Some(3), 4)).collect();
    let pool = ExpertPool::new(experts, 10.0, "test").unwrap();
    let ds = random_dataset(&mut g, 3, 15, 20);
    let report = evaluate_online(&PoolPredictor::new(pool), "lex", &ds).unwrap();
    assert!((report.mean_accuracy - (1.0 - report.mean_wm_loss.unwrap())).abs() < 1e-9);
    assert!(report.per_sequence.iter().all(|o| (0.0..=1.0).contains(&o.accuracy)));
}
