//! Optimal allocations for benchmarking the learners.
//!
//! Two oracles are provided: a grid search over stationary single-channel
//! time shares, and an exhaustive search over short periodic joint-action
//! schedules that works for any channel count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{resolve_slot, AssociationMatrix, JointAction, MinCombiner, UeAction};
use crate::objective::{AlphaFairness, ObjectiveError};

/// Largest number of simplex grid points `optimal_time_share` will visit.
pub const MAX_GRID_POINTS: u128 = 2_000_000_000;
/// Largest joint schedule space, in bits, `brute_force_schedule` will enumerate.
pub const MAX_SCHEDULE_BITS: f64 = 24.0;
pub const MAX_PERIOD: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("search budget exceeded: {0}")]
    Budget(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Fraction of single-channel slots granted to each UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShare(pub Vec<f64>);

impl TimeShare {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.0.iter().any(|&p| !(p >= 0.0)) {
            return Err(OracleError::Invalid("time share entries must be >= 0".into()));
        }
        if self.0.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(OracleError::Invalid("time shares sum to more than 1".into()));
        }
        Ok(())
    }

    pub fn equal(ues: usize) -> Self {
        Self(vec![1.0 / ues as f64; ues])
    }
}

/// Optimum of `optimal_time_share`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShareOptimum {
    pub share: TimeShare,
    /// Self throughputs (equal to the shares under one channel).
    pub self_throughputs: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub objective: f64,
}

fn require_single_channel_static(matrix: &AssociationMatrix, channels: usize) -> Result<(), OracleError> {
    if channels != 1 {
        return Err(OracleError::Unsupported(format!(
            "stationary time sharing assumes one channel, got {channels}; use brute_force_schedule"
        )));
    }
    if !matrix.is_static() {
        return Err(OracleError::Unsupported("time-varying association matrix".into()));
    }
    Ok(())
}

/// Long-run normalized throughputs under time share `p` on a single channel:
/// `x_i = Ω_i Σ_k a_{i,k} Σ_j a_{j,k} p_j`.
pub fn stationary_throughputs(
    share: &TimeShare,
    matrix: &AssociationMatrix,
    channels: usize,
) -> Result<Vec<f64>, OracleError> {
    require_single_channel_static(matrix, channels)?;
    share.validate()?;
    if share.0.len() != matrix.ues() {
        return Err(OracleError::Invalid(format!(
            "time share has {} entries for {} UEs",
            share.0.len(),
            matrix.ues()
        )));
    }
    let shared = matrix.shared_counts();
    Ok((0..matrix.ues())
        .map(|i| {
            let num: f64 = (0..matrix.ues()).map(|j| shared[i][j] as f64 * share.0[j]).sum();
            num / shared[i][i] as f64
        })
        .collect())
}

fn binom(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of points `{n ∈ ℕ^N : Σ n_i ≤ M}`.
pub fn grid_points(ues: usize, units: u64) -> u128 {
    binom(units as u128 + ues as u128, ues as u128)
}

struct Grid<'a> {
    shared: Vec<Vec<f64>>,
    own: Vec<f64>,
    units: u64,
    step: f64,
    fairness: &'a AlphaFairness,
}

impl Grid<'_> {
    fn ues(&self) -> usize {
        self.own.len()
    }

    fn value(&self, acc: &[f64], x: &mut [f64]) -> f64 {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = acc[i] * self.step / self.own[i];
        }
        self.fairness.utility(x).expect("grid throughputs are non-negative")
    }

    /// Visits every grid point whose first coordinate is `first`.
    /// `acc[i] = Σ_j S_ij n_j` is maintained incrementally.
    fn walk(&self, first: u64, visit: &mut dyn FnMut(&[u64], f64)) {
        let n = self.ues();
        let mut units = vec![0u64; n];
        let mut acc = vec![0.0; n];
        let mut x = vec![0.0; n];
        units[0] = first;
        for (i, a) in acc.iter_mut().enumerate() {
            *a = self.shared[i][0] * first as f64;
        }
        self.rec(1, self.units - first, &mut units, &mut acc, &mut x, visit);
    }

    fn rec(
        &self,
        depth: usize,
        left: u64,
        units: &mut [u64],
        acc: &mut [f64],
        x: &mut [f64],
        visit: &mut dyn FnMut(&[u64], f64),
    ) {
        if depth == self.ues() {
            let v = self.value(acc, x);
            visit(units, v);
            return;
        }
        let saved: Vec<f64> = acc.to_vec();
        for u in 0..=left {
            units[depth] = u;
            for i in 0..acc.len() {
                acc[i] = saved[i] + self.shared[i][depth] * u as f64;
            }
            self.rec(depth + 1, left - u, units, acc, x, visit);
        }
        acc.copy_from_slice(&saved);
        units[depth] = 0;
    }
}

/// Grid search over `{p : Σ p_i ≤ 1, p_i ∈ step·ℕ}` maximizing the α-fair
/// utility of the stationary throughputs.
///
/// Points within `1e-9 · max(1, |U*|)` of the best value count as ties; ties
/// go to the smallest `Σ p_i²` (the most even split), then to the
/// lexicographically smallest `p`.
pub fn optimal_time_share(
    matrix: &AssociationMatrix,
    fairness: &AlphaFairness,
    grid_step: f64,
) -> Result<TimeShareOptimum, OracleError> {
    require_single_channel_static(matrix, 1)?;
    fairness.validate()?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(OracleError::Invalid(format!("grid step must be in (0, 1], got {grid_step}")));
    }
    let units_f = 1.0 / grid_step;
    let units = units_f.round() as u64;
    if (units_f - units as f64).abs() > 1e-6 {
        return Err(OracleError::Invalid(format!("grid step {grid_step} must divide 1")));
    }
    let n = matrix.ues();
    let points = grid_points(n, units);
    if points > MAX_GRID_POINTS {
        let mut coarser = units;
        while coarser > 1 && grid_points(n, coarser) > MAX_GRID_POINTS {
            coarser -= 1;
        }
        return Err(OracleError::Budget(format!(
            "{points} grid points for N={n} at step {grid_step} exceed the budget of {MAX_GRID_POINTS}; \
             try step {}",
            1.0 / coarser as f64
        )));
    }

    let shared_counts = matrix.shared_counts();
    let grid = Grid {
        shared: shared_counts.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect(),
        own: (0..n).map(|i| shared_counts[i][i] as f64).collect(),
        units,
        step: 1.0 / units as f64,
        fairness,
    };

    let best = (0..=units)
        .into_par_iter()
        .map(|first| {
            let mut best = f64::NEG_INFINITY;
            grid.walk(first, &mut |_, v| best = best.max(v));
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * best.abs().max(1.0);

    // (Σ n², n) is a total order on integers, so the reduction is deterministic
    let pick = (0..=units)
        .into_par_iter()
        .filter_map(|first| {
            let mut chosen: Option<(u64, Vec<u64>)> = None;
            grid.walk(first, &mut |u, v| {
                if v >= best - tol {
                    let key = (u.iter().map(|&k| k * k).sum::<u64>(), u.to_vec());
                    if chosen.as_ref().is_none_or(|c| key < *c) {
                        chosen = Some(key);
                    }
                }
            });
            chosen
        })
        .min()
        .expect("the grid is never empty");

    let share = TimeShare(pick.1.iter().map(|&u| u as f64 * grid.step).collect());
    let throughputs = stationary_throughputs(&share, matrix, 1)?;
    let objective = fairness.utility(&throughputs)?;
    Ok(TimeShareOptimum { self_throughputs: share.0.clone(), share, throughputs, objective })
}

/// Best periodic schedule found by `brute_force_schedule`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptimum {
    pub schedule: Vec<JointAction>,
    /// Long-run throughputs of the repeated schedule.
    pub throughputs: Vec<f64>,
    pub self_throughputs: Vec<f64>,
    pub objective: f64,
}

/// Size, in bits, of the space of `period`-slot joint schedules.
pub fn schedule_bits(ues: usize, channels: usize, period: usize) -> f64 {
    (ues * period) as f64 * ((2 * channels) as f64).log2()
}

/// Per joint-action outcome of one slot under a static matrix.
pub(crate) struct SlotTable {
    pub total: Vec<f64>,
    pub own: Vec<f64>,
    pub associated: Vec<f64>,
}

pub(crate) fn slot_table(matrix: &AssociationMatrix, channels: usize) -> SlotTable {
    let n = matrix.ues();
    let actions = 2 * channels;
    let joint = actions.pow(n as u32);
    let weights = vec![1.0 / n as f64; n];
    let mut total = Vec::with_capacity(joint * n);
    let mut own = Vec::with_capacity(joint * n);
    let mut idx = vec![0usize; n];
    for j in 0..joint {
        decode(j, actions, &mut idx);
        let acts: Vec<UeAction> = idx.iter().map(|&a| UeAction::from_index(a, channels)).collect();
        let out = resolve_slot(matrix.slot(0), matrix.segments(), channels, &acts, &weights, &MinCombiner);
        total.extend_from_slice(&out.credit.total);
        own.extend_from_slice(&out.credit.own);
    }
    let associated = (0..n).map(|i| matrix.segment_count(0, i) as f64).collect();
    SlotTable { total, own, associated }
}

fn decode(mut j: usize, base: usize, out: &mut [usize]) {
    for d in out.iter_mut() {
        *d = j % base;
        j /= base;
    }
}

/// Exhaustive search over every `period`-slot joint-action schedule, each
/// slot resolved with the environment's channel and segment semantics.
/// The objective is the α-fair utility of the long-run throughputs of the
/// schedule repeated forever. Ties keep the first schedule in enumeration
/// order.
pub fn brute_force_schedule(
    matrix: &AssociationMatrix,
    channels: usize,
    period: usize,
    fairness: &AlphaFairness,
) -> Result<ScheduleOptimum, OracleError> {
    fairness.validate()?;
    if channels == 0 {
        return Err(OracleError::Invalid("channel count must be >= 1".into()));
    }
    if !matrix.is_static() {
        return Err(OracleError::Unsupported("time-varying association matrix".into()));
    }
    if period == 0 || period > MAX_PERIOD {
        return Err(OracleError::Budget(format!("period must be in 1..={MAX_PERIOD}, got {period}")));
    }
    let n = matrix.ues();
    let bits = schedule_bits(n, channels, period);
    if bits > MAX_SCHEDULE_BITS + 1e-9 {
        return Err(OracleError::Budget(format!(
            "{bits:.1} bits of schedule space for N={n}, C={channels}, period={period} exceed {MAX_SCHEDULE_BITS}"
        )));
    }

    let table = slot_table(matrix, channels);
    let joint = (2 * channels).pow(n as u32);
    let total_schedules = joint.pow(period as u32);
    let denom: Vec<f64> = table.associated.iter().map(|a| a * period as f64).collect();

    let evaluate = |s: usize, x: &mut [f64], slots: &mut [usize]| -> f64 {
        decode(s, joint, slots);
        x.iter_mut().for_each(|v| *v = 0.0);
        for &j in slots.iter() {
            for (i, v) in x.iter_mut().enumerate() {
                *v += table.total[j * n + i];
            }
        }
        for (v, d) in x.iter_mut().zip(&denom) {
            *v /= d;
        }
        fairness.utility(x).expect("schedule throughputs are non-negative")
    };

    const CHUNK: usize = 1 << 14;
    let chunks = total_schedules.div_ceil(CHUNK);
    let (best_idx, _) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut x = vec![0.0; n];
            let mut slots = vec![0usize; period];
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for s in c * CHUNK..((c + 1) * CHUNK).min(total_schedules) {
                let v = evaluate(s, &mut x, &mut slots);
                if v > best.1 {
                    best = (s, v);
                }
            }
            best
        })
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );

    let mut slots = vec![0usize; period];
    decode(best_idx, joint, &mut slots);
    let mut per_ue = vec![0usize; n];
    let schedule: Vec<JointAction> = slots
        .iter()
        .map(|&j| {
            decode(j, 2 * channels, &mut per_ue);
            JointAction::from_indices(&per_ue, channels)
        })
        .collect();
    let mut throughputs = vec![0.0; n];
    let mut self_throughputs = vec![0.0; n];
    for &j in &slots {
        for i in 0..n {
            throughputs[i] += table.total[j * n + i];
            self_throughputs[i] += table.own[j * n + i];
        }
    }
    for i in 0..n {
        throughputs[i] /= denom[i];
        self_throughputs[i] /= denom[i];
    }
    let objective = fairness.utility(&throughputs)?;
    Ok(ScheduleOptimum { schedule, throughputs, self_throughputs, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_matrix() -> AssociationMatrix {
        AssociationMatrix::new(vec![
            vec![1, 1, 0, 0, 0],
            vec![1, 0, 1, 0, 0],
            vec![0, 0, 0, 1, 0],
            vec![0, 0, 0, 0, 1],
        ])
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn closed_form_table_rows() {
        let m = pair_matrix();
        let x = stationary_throughputs(&TimeShare(vec![0.5, 0.5, 0.0, 0.0]), &m, 1).unwrap();
        assert!(close(&x, &[0.75, 0.75, 0.0, 0.0], 1e-12));
        let x = stationary_throughputs(&TimeShare(vec![0.2, 0.2, 0.3, 0.3]), &m, 1).unwrap();
        assert!(close(&x, &[0.3; 4], 1e-12));
    }

    #[test]
    fn identity_gives_self_share() {
        let p = TimeShare(vec![0.25; 4]);
        let x = stationary_throughputs(&p, &AssociationMatrix::identity(4), 1).unwrap();
        assert_eq!(x, p.0);
    }

    #[test]
    fn closed_form_rejects_multichannel() {
        let r = stationary_throughputs(&TimeShare(vec![0.5, 0.5]), &AssociationMatrix::identity(2), 2);
        assert!(matches!(r, Err(OracleError::Unsupported(_))));
    }

    #[test]
    fn grid_optimum_rows_at_coarse_step() {
        let m = pair_matrix();
        let o = optimal_time_share(&m, &AlphaFairness::finite(0.0), 0.05).unwrap();
        assert!((o.objective - 1.5).abs() < 1e-12);
        assert!(close(&o.share.0, &[0.5, 0.5, 0.0, 0.0], 1e-12));

        let o = optimal_time_share(&m, &AlphaFairness::finite(1.0), 0.05).unwrap();
        assert!(close(&o.share.0, &[0.25; 4], 1e-12));
        assert!(close(&o.throughputs, &[0.375, 0.375, 0.25, 0.25], 1e-12));

        let o = optimal_time_share(&m, &AlphaFairness::finite(0.5), 0.05).unwrap();
        assert!(close(&o.share.0, &[0.3, 0.3, 0.2, 0.2], 1e-12));
    }

    #[test]
    fn grid_budget_suggests_step() {
        let m = AssociationMatrix::identity(12);
        match optimal_time_share(&m, &AlphaFairness::finite(1.0), 0.01) {
            Err(OracleError::Budget(msg)) => assert!(msg.contains("try step")),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn equal_share_on_identity() {
        for f in [AlphaFairness::finite(0.5), AlphaFairness::finite(1.0), AlphaFairness::max_min()] {
            let o = optimal_time_share(&AssociationMatrix::identity(3), &f, 0.05).unwrap();
            // 1/3 is not on the 0.05 grid; the best grid points are within one step
            assert!(o.throughputs.iter().all(|&x| (x - 1.0 / 3.0).abs() <= 0.05), "{f:?} {o:?}");
        }
        let o = optimal_time_share(&AssociationMatrix::identity(4), &AlphaFairness::finite(1.0), 0.05)
            .unwrap();
        assert!(close(&o.throughputs, &[0.25; 4], 1e-12));
    }

    #[test]
    fn brute_force_pair_alternation() {
        let o = brute_force_schedule(&pair_matrix(), 1, 2, &AlphaFairness::finite(0.0)).unwrap();
        assert!((o.objective - 1.5).abs() < 1e-12);
        assert_eq!(o.schedule.len(), 2);
    }

    #[test]
    fn brute_force_no_contention() {
        let o = brute_force_schedule(&AssociationMatrix::identity(2), 2, 1, &AlphaFairness::finite(0.0))
            .unwrap();
        assert_eq!(o.objective, 2.0);
    }

    #[test]
    fn brute_force_budget() {
        let m = AssociationMatrix::identity(4);
        assert!(matches!(
            brute_force_schedule(&m, 2, 4, &AlphaFairness::finite(0.0)),
            Err(OracleError::Budget(_))
        ));
        assert!(matches!(
            brute_force_schedule(&AssociationMatrix::identity(1), 1, 9, &AlphaFairness::finite(0.0)),
            Err(OracleError::Budget(_))
        ));
    }
}
