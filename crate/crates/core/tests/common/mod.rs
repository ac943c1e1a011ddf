#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semmac::env::{resolve_slot, AssociationMatrix, EnvConfig, JointAction, MacEnv, MinCombiner, UeAction};
use semmac::qnet::{loss_and_gradients, Architecture, QNetwork, SlotBundle, Transition, Which};

pub fn pair_matrix() -> AssociationMatrix {
    AssociationMatrix::new(vec![
        vec![1, 1, 0, 0, 0],
        vec![1, 0, 1, 0, 0],
        vec![0, 0, 0, 1, 0],
        vec![0, 0, 0, 0, 1],
    ])
    .unwrap()
}

/// Random binary matrix where every UE has at least one segment.
pub fn random_matrix(rng: &mut ChaCha8Rng, ues: usize, segments: usize) -> AssociationMatrix {
    let rows = (0..ues)
        .map(|_| {
            let mut row: Vec<u8> = (0..segments).map(|_| rng.gen_range(0..2)).collect();
            if row.iter().all(|&v| v == 0) {
                row[rng.gen_range(0..segments)] = 1;
            }
            row
        })
        .collect();
    AssociationMatrix::new(rows).unwrap()
}

pub fn random_joint(rng: &mut ChaCha8Rng, ues: usize, channels: usize) -> JointAction {
    JointAction((0..ues).map(|_| UeAction::from_index(rng.gen_range(0..2 * channels), channels)).collect())
}

/// E[Σ z] when every UE picks one of its `2C` actions uniformly, by
/// enumerating the whole joint action space.
pub fn expected_successes(ues: usize, channels: usize) -> f64 {
    let m = AssociationMatrix::identity(ues);
    let actions = 2 * channels;
    let total = actions.pow(ues as u32);
    let weights = vec![1.0 / ues as f64; ues];
    let mut sum = 0usize;
    for code in 0..total {
        let mut c = code;
        let joint: Vec<UeAction> = (0..ues)
            .map(|_| {
                let a = c % actions;
                c /= actions;
                UeAction::from_index(a, channels)
            })
            .collect();
        let out = resolve_slot(m.slot(0), ues, channels, &joint, &weights, &MinCombiner);
        sum += out.success.iter().filter(|&&z| z).count();
    }
    sum as f64 / total as f64
}

/// Single-channel schedule realizing time share `p` over `slots` slots:
/// the transmitter of slot `t` is picked by where `t·φ mod 1` falls in the
/// cumulative shares (φ the golden-ratio conjugate), idle past `Σp`.
pub fn realize_time_share(p: &[f64], slots: usize) -> Vec<JointAction> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    (0..slots)
        .map(|t| {
            let u = (t as f64 * phi).fract();
            let mut acc = 0.0;
            let mut tx = None;
            for (i, &pi) in p.iter().enumerate() {
                if u >= acc && u < acc + pi {
                    tx = Some(i);
                    break;
                }
                acc += pi;
            }
            JointAction::transmitters(p.len(), &tx.map(|i| vec![(i, 0)]).unwrap_or_default())
        })
        .collect()
}

/// Runs `schedule` cyclically for `repeats` periods and returns the
/// all-time throughputs.
pub fn simulate(matrix: &AssociationMatrix, channels: usize, schedule: &[JointAction], repeats: usize) -> Vec<f64> {
    let mut env = MacEnv::reset(&EnvConfig::new(matrix.clone(), channels), 0).unwrap();
    for _ in 0..repeats {
        for a in schedule {
            env.step(a).unwrap();
        }
    }
    env.all_time_throughputs().unwrap().iter().map(|u| u.x).collect()
}

/// Random small nets and a one-bundle batch for gradient checks.
pub fn grad_fixture(seed: u64, channels: usize, agents: usize) -> (Vec<QNetwork>, SlotBundle, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture::with_sizes(channels, 4, 8, 64, 32);
    let nets: Vec<QNetwork> = (0..agents).map(|_| QNetwork::new(arch, &mut rng, false)).collect();
    let mut state = || -> Vec<f64> { (0..arch.state_len()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let transitions = (0..agents)
        .map(|_| Transition { state: state(), action: 0, next_state: state() })
        .collect::<Vec<_>>();
    let mut bundle = SlotBundle { reward: 0.0, transitions };
    for t in &mut bundle.transitions {
        t.action = rng.gen_range(0..arch.actions);
    }
    bundle.reward = rng.gen_range(0.0..0.25);
    let target = rng.gen_range(-1.0..1.0);
    (nets, bundle, target)
}

/// Largest relative error between the analytic TD-loss gradient and central
/// differences, per (agent, tensor name).
pub fn gradient_errors(seed: u64, channels: usize) -> Vec<(usize, &'static str, f64)> {
    let (mut nets, bundle, target) = grad_fixture(seed, channels, 2);
    let batch = [&bundle];
    let (_, grads) = loss_and_gradients(&nets, &batch, &[target]);
    let h = 1e-5;
    let mut out = Vec::new();
    for agent in 0..nets.len() {
        let layout = nets[agent].architecture().layout();
        for (name, range) in layout.tensors() {
            let mut worst: f64 = 0.0;
            for idx in range {
                let orig = nets[agent].params(Which::Online)[idx];
                nets[agent].params_mut(Which::Online)[idx] = orig + h;
                let hi = loss_and_gradients(&nets, &batch, &[target]).0;
                nets[agent].params_mut(Which::Online)[idx] = orig - h;
                let lo = loss_and_gradients(&nets, &batch, &[target]).0;
                nets[agent].params_mut(Which::Online)[idx] = orig;
                let numeric = (hi - lo) / (2.0 * h);
                let analytic = grads[agent][idx];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
            }
            out.push((agent, name, worst));
        }
    }
    out
}
