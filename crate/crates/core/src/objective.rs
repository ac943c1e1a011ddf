//! α-fairness utilities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default clamp applied to zero throughputs when α ≥ 1.
pub const DEFAULT_CLAMP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("negative throughput {value} for UE {ue}")]
    NegativeThroughput { ue: usize, value: f64 },
    #[error("empty throughput vector")]
    Empty,
    #[error("invalid fairness parameter: {0}")]
    Invalid(String),
}

/// The fairness exponent. `MaxMin` stands for α = ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    MaxMin,
}

impl Alpha {
    pub fn is_max_min(self) -> bool {
        matches!(self, Alpha::MaxMin)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::MaxMin => f.write_str("inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" | "maxmin" | "max-min" => Ok(Alpha::MaxMin),
            other => {
                let a: f64 = other
                    .parse()
                    .map_err(|_| ObjectiveError::Invalid(format!("cannot parse alpha {s:?}")))?;
                if a.is_infinite() && a > 0.0 {
                    return Ok(Alpha::MaxMin);
                }
                if !(a >= 0.0) {
                    return Err(ObjectiveError::Invalid(format!("alpha must be >= 0, got {s}")));
                }
                Ok(Alpha::Finite(a))
            }
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            Alpha::MaxMin => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        let raw = Raw::deserialize(d)?;
        let parsed = match raw {
            Raw::Num(v) => v.to_string().parse::<Alpha>(),
            Raw::Int(v) => (v as f64).to_string().parse::<Alpha>(),
            Raw::Text(t) => t.parse::<Alpha>(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// α together with the clamp guarding log / negative powers of zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFairness {
    pub alpha: Alpha,
    pub clamp: f64,
}

impl AlphaFairness {
    pub fn new(alpha: Alpha) -> Self {
        Self { alpha, clamp: DEFAULT_CLAMP }
    }

    pub fn finite(alpha: f64) -> Self {
        Self::new(Alpha::Finite(alpha))
    }

    pub fn max_min() -> Self {
        Self::new(Alpha::MaxMin)
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if let Alpha::Finite(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(ObjectiveError::Invalid(format!("alpha must be finite and >= 0, got {a}")));
            }
        }
        if !(self.clamp > 0.0) {
            return Err(ObjectiveError::Invalid(format!("clamp must be > 0, got {}", self.clamp)));
        }
        Ok(())
    }

    /// U_α(x). Dispatches to [`max_min`] for α = ∞.
    pub fn utility(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        utility(x, self)
    }
}

fn check(x: &[f64]) -> Result<(), ObjectiveError> {
    match x.iter().enumerate().find(|(_, &v)| v < 0.0 || v.is_nan()) {
        Some((ue, &value)) => Err(ObjectiveError::NegativeThroughput { ue, value }),
        None => Ok(()),
    }
}

/// α-fair utility of a throughput vector.
///
/// α = 0 is the plain sum. For α ≥ 1 every throughput is first clamped to
/// `fairness.clamp` so starved UEs give a finite (very negative) value.
pub fn utility(x: &[f64], fairness: &AlphaFairness) -> Result<f64, ObjectiveError> {
    check(x)?;
    match fairness.alpha {
        Alpha::MaxMin => max_min(x),
        Alpha::Finite(a) if a == 0.0 => Ok(x.iter().sum()),
        Alpha::Finite(a) if a == 1.0 => Ok(x.iter().map(|&v| v.max(fairness.clamp).ln()).sum()),
        Alpha::Finite(a) => {
            let floor = if a > 1.0 { fairness.clamp } else { 0.0 };
            let e = 1.0 - a;
            Ok(x.iter().map(|&v| v.max(floor).powf(e)).sum::<f64>() / e)
        }
    }
}

/// min_i x_i.
pub fn max_min(x: &[f64]) -> Result<f64, ObjectiveError> {
    check(x)?;
    x.iter().copied().reduce(f64::min).ok_or(ObjectiveError::Empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sum_throughput() {
        assert_eq!(utility(&[0.75, 0.75, 0.0, 0.0], &AlphaFairness::finite(0.0)).unwrap(), 1.5);
    }

    #[test]
    fn max_min_values() {
        assert_eq!(utility(&[0.3; 4], &AlphaFairness::max_min()).unwrap(), 0.3);
        assert_eq!(max_min(&[0.45, 0.45, 0.2, 0.2]).unwrap(), 0.2);
        assert_eq!(max_min(&[]), Err(ObjectiveError::Empty));
    }

    #[test]
    fn log_of_ones() {
        assert_eq!(utility(&[1.0, 1.0], &AlphaFairness::finite(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_is_clamped_for_alpha_one_and_above() {
        let u = utility(&[0.0], &AlphaFairness::finite(1.0)).unwrap();
        assert_eq!(u, DEFAULT_CLAMP.ln());
        let u2 = utility(&[0.0], &AlphaFairness::finite(2.0)).unwrap();
        assert!(u2.is_finite());
        assert_eq!(utility(&[0.0], &AlphaFairness::finite(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn negative_rejected() {
        assert!(matches!(
            utility(&[0.1, -0.1], &AlphaFairness::finite(0.0)),
            Err(ObjectiveError::NegativeThroughput { ue: 1, .. })
        ));
    }

    #[test]
    fn alpha_parsing() {
        assert_eq!("inf".parse::<Alpha>().unwrap(), Alpha::MaxMin);
        assert_eq!("0.5".parse::<Alpha>().unwrap(), Alpha::Finite(0.5));
        assert!("-1".parse::<Alpha>().is_err());
        let v: Alpha = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(v, Alpha::MaxMin);
        let v: Alpha = serde_json::from_str("2").unwrap();
        assert_eq!(v, Alpha::Finite(2.0));
    }

    fn alphas() -> impl Strategy<Value = AlphaFairness> {
        prop_oneof![
            Just(AlphaFairness::finite(0.0)),
            Just(AlphaFairness::finite(0.5)),
            Just(AlphaFairness::finite(1.0)),
            Just(AlphaFairness::finite(2.0)),
            (0.0f64..5.0).prop_map(AlphaFairness::finite),
            Just(AlphaFairness::max_min()),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_each_coordinate(
            x in prop::collection::vec(0.0f64..1.0, 1..6),
            idx in 0usize..6,
            bump in 0.0f64..0.5,
            f in alphas(),
        ) {
            let i = idx % x.len();
            let mut y = x.clone();
            y[i] += bump;
            prop_assert!(utility(&y, &f).unwrap() >= utility(&x, &f).unwrap() - 1e-12);
        }

        #[test]
        fn permutation_invariant(
            x in prop::collection::vec(0.0f64..1.0, 1..6),
            f in alphas(),
        ) {
            let mut y = x.clone();
            y.reverse();
            let (a, b) = (utility(&x, &f).unwrap(), utility(&y, &f).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn ordering_stable_around_alpha_one(
            x in prop::collection::vec(0.05f64..1.0, 2..6),
            scale in prop::collection::vec(0.5f64..1.5, 6),
        ) {
            let y: Vec<f64> = x.iter().zip(&scale).map(|(v, s)| (v * s).min(1.0)).collect();
            let at = |a: f64, v: &[f64]| utility(v, &AlphaFairness::finite(a)).unwrap();
            let log_order = at(1.0, &x).partial_cmp(&at(1.0, &y)).unwrap();
            // second-order term in (α − 1) is bounded by ~0.3 on this domain
            prop_assume!((at(1.0, &x) - at(1.0, &y)).abs() > 0.5);
            for a in [0.99, 0.995, 1.005, 1.01] {
                prop_assert_eq!(at(a, &x).partial_cmp(&at(a, &y)).unwrap(), log_order);
            }
        }
    }
}
