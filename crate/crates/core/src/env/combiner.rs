//! Segment reception functions.

use std::fmt::Debug;

use super::EnvError;

/// Decides how much of a segment the receiver obtains from the per-UE
/// contributions `a_{j,k} · z_j` delivered in one slot.
pub trait Combiner: Debug + Send + Sync {
    fn combine(&self, contributions: &[f64]) -> f64;
}

/// `min{1, Σ_j a_{j,k} z_j}`: duplicate copies of a segment add nothing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MinCombiner;

impl Combiner for MinCombiner {
    fn combine(&self, contributions: &[f64]) -> f64 {
        contributions.iter().sum::<f64>().min(1.0)
    }
}

/// Sum of contributions capped at `cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedSumCombiner {
    pub cap: f64,
}

impl Combiner for CappedSumCombiner {
    fn combine(&self, contributions: &[f64]) -> f64 {
        contributions.iter().sum::<f64>().min(self.cap)
    }
}

/// Reception indicator of one segment given its association column and the
/// success flags of every UE.
pub fn segment_indicator(
    association: &[u8],
    success: &[u8],
    combiner: &dyn Combiner,
) -> Result<f64, EnvError> {
    if association.len() != success.len() {
        return Err(EnvError::Contract(format!(
            "association column has {} entries but success vector has {}",
            association.len(),
            success.len()
        )));
    }
    let contributions: Vec<f64> = association
        .iter()
        .zip(success)
        .map(|(&a, &z)| f64::from(a) * f64::from(z))
        .collect();
    Ok(combiner.combine(&contributions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_do_not_add() {
        assert_eq!(segment_indicator(&[1, 1, 0, 0], &[1, 1, 0, 0], &MinCombiner).unwrap(), 1.0);
    }

    #[test]
    fn no_associated_transmitter() {
        assert_eq!(segment_indicator(&[0, 0, 1, 0], &[1, 1, 0, 1], &MinCombiner).unwrap(), 0.0);
    }

    #[test]
    fn custom_combiner_is_pluggable() {
        let g = CappedSumCombiner { cap: 2.0 };
        assert_eq!(segment_indicator(&[1, 1, 0, 0], &[1, 1, 0, 0], &g).unwrap(), 2.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            segment_indicator(&[1, 0], &[1], &MinCombiner),
            Err(EnvError::Contract(_))
        ));
    }
}
