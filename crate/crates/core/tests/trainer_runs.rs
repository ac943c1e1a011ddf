mod common;

use semmac::env::{AssociationMatrix, EnvConfig, TrajectoryWriter};
use semmac::objective::AlphaFairness;
use semmac::trainer::{evaluate, run, run_recorded, Hyperparameters, RunConfig, RunResult, Variant};

fn small_hyper() -> Hyperparameters {
    Hyperparameters { lstm_units: 8, fc1_units: 16, fc2_units: 8, batch_size: 8, ..Default::default() }
}

fn config(matrix: AssociationMatrix, channels: usize, variant: Variant, horizon: u64) -> RunConfig {
    RunConfig {
        env: EnvConfig::new(matrix, channels),
        fairness: AlphaFairness::finite(1.0),
        variant,
        horizon,
        hyper: small_hyper(),
    }
}

fn without_clock(mut r: RunResult) -> RunResult {
    r.wall_clock_secs = 0.0;
    r
}

#[test]
fn same_seed_same_result() {
    let cfg = config(common::pair_matrix(), 1, Variant::Sama, 120);
    let a = without_clock(run(&cfg, 11).unwrap());
    let b = without_clock(run(&cfg, 11).unwrap());
    assert_eq!(a, b);
    let c = without_clock(run(&cfg, 12).unwrap());
    assert_ne!(a.reward, c.reward);
}

#[test]
fn identity_matrix_makes_baselines_identical() {
    let m = AssociationMatrix::identity(3);
    let sama = run(&config(m.clone(), 2, Variant::Sama, 150), 4).unwrap();
    let ma = run(&config(m, 2, Variant::Ma, 150), 4).unwrap();
    assert_eq!(sama.reward, ma.reward);
    assert_eq!(sama.successes, ma.successes);
    assert_eq!(sama.x, ma.x);
    assert_eq!(sama.objective, ma.objective);
    assert_eq!(sama.own_objective, ma.own_objective);
}

#[test]
fn random_agents_hit_the_enumerated_mean() {
    let expected = common::expected_successes(4, 1);
    assert!((expected - 0.25).abs() < 1e-12);
    let r = run(&config(AssociationMatrix::identity(4), 1, Variant::Random, 19_999), 2).unwrap();
    let n = r.successes.len() as f64;
    let mean = r.successes.iter().map(|&s| s as f64).sum::<f64>() / n;
    let var = r.successes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - expected).abs() < 3.0 * (var / n).sqrt(), "mean {mean} vs {expected}");
    assert_eq!(r.train_steps, 0);
}

#[test]
fn zero_horizon_gives_one_slot() {
    let r = run(&config(common::pair_matrix(), 1, Variant::Sama, 0), 0).unwrap();
    assert_eq!((r.objective.len(), r.reward.len(), r.train_steps), (1, 1, 0));
}

#[test]
fn semantic_run_credits_only_sharing_ues() {
    let r = run(&config(common::pair_matrix(), 1, Variant::Sama, 300), 3).unwrap();
    assert!(r.all_time[0].assisted_x > 0.0 && r.all_time[1].assisted_x > 0.0);
    assert_eq!(r.all_time[2].assisted_x, 0.0);
    assert_eq!(r.all_time[3].assisted_x, 0.0);
}

#[test]
fn oblivious_bookkeeping_ignores_assistance() {
    let r = run(&config(common::pair_matrix(), 1, Variant::Ma, 300), 3).unwrap();
    let f = AlphaFairness::finite(0.0);
    let own = r.own_objective_series(&f).unwrap();
    let semantic = r.objective_series(&f).unwrap();
    assert!(own.iter().zip(&semantic).all(|(o, s)| o <= s));
    assert!(own.last() < semantic.last());
}

#[test]
fn evaluate_examples() {
    let mut r = run(&config(common::pair_matrix(), 1, Variant::Random, 49), 0).unwrap();
    let f = AlphaFairness::finite(0.0);
    let last = *r.objective_series(&f).unwrap().last().unwrap();
    assert_eq!(evaluate(&r, &f, 1).unwrap().tail_objective, last);
    // Freeze the throughput series to a constant.
    let x0: Vec<f64> = r.throughput_at(10).to_vec();
    for s in 0..r.slots() {
        r.x[s * 4..(s + 1) * 4].copy_from_slice(&x0);
    }
    let v = f.utility(&x0).unwrap();
    for tail in [1, 7, 50] {
        assert!((evaluate(&r, &f, tail).unwrap().tail_objective - v).abs() < 1e-12);
    }
}

#[test]
fn trajectory_has_one_row_per_ue_and_slot() {
    let cfg = config(common::pair_matrix(), 1, Variant::Sama, 30);
    let mut w = TrajectoryWriter::new(Vec::new(), true).unwrap();
    let r = run_recorded(&cfg, 5, Some(&mut w)).unwrap();
    let text = String::from_utf8(w.finish().unwrap()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("schema_version,t,ue,"));
    assert!(header.ends_with(",objective"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 31 * 4);
    let last_obj: f64 = rows.last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(last_obj, *r.objective.last().unwrap());
    assert_eq!(without_clock(r), without_clock(run(&cfg, 5).unwrap()));
}
