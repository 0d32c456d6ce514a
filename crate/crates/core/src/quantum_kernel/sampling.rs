use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Shot budget per expectation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Shots {
    #[default]
    Exact,
    Finite(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => write!(f, "exact"),
            Shots::Finite(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s.eq_ignore_ascii_case("exact") || s.eq_ignore_ascii_case("inf") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(n) if n >= 1 => Ok(Shots::Finite(n)),
            _ => Err(Error::Config(format!(
                "shots must be a positive integer or `exact`, got `{s}`"
            ))),
        }
    }
}

impl TryFrom<String> for Shots {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Shots> for String {
    fn from(s: Shots) -> String {
        s.to_string()
    }
}

/// Estimate of an expectation in `[-1, 1]` from `n` ±1 outcomes with
/// `P(+1) = (1 + exact)/2`. Exact mode returns the input.
pub fn sample_expectation(exact: f64, shots: Shots, seed: u64) -> f64 {
    match shots {
        Shots::Exact => exact,
        Shots::Finite(n) => {
            let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hits = Binomial::new(n, p).expect("valid binomial").sample(&mut rng);
            2.0 * hits as f64 / n as f64 - 1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_outcome_is_exact() {
        for n in [1, 10, 1000] {
            assert_eq!(sample_expectation(1.0, Shots::Finite(n), 7), 1.0);
            assert_eq!(sample_expectation(-1.0, Shots::Finite(n), 7), -1.0);
        }
    }

    #[test]
    fn exact_passthrough() {
        assert_eq!(sample_expectation(0.123, Shots::Exact, 0), 0.123);
    }

    #[test]
    fn million_shots_near_zero() {
        for seed in 0..20 {
            assert!(sample_expectation(0.0, Shots::Finite(1_000_000), seed).abs() <= 0.005);
        }
    }

    #[test]
    fn unbiased_over_seeds() {
        let (exact, n) = (0.3, 100u64);
        let mean: f64 = (0..1000)
            .map(|s| sample_expectation(exact, Shots::Finite(n), s))
            .sum::<f64>()
            / 1000.0;
        let se = ((1.0 - exact * exact) / n as f64).sqrt() / 1000f64.sqrt();
        assert!((mean - exact).abs() < 4.0 * se);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_expectation(0.2, Shots::Finite(500), 42);
        assert_eq!(a, sample_expectation(0.2, Shots::Finite(500), 42));
    }

    #[test]
    fn parse_shots() {
        assert_eq!("exact".parse::<Shots>().unwrap(), Shots::Exact);
        assert_eq!("128".parse::<Shots>().unwrap(), Shots::Finite(128));
        assert!("0".parse::<Shots>().is_err());
        assert!("x".parse::<Shots>().is_err());
    }
}
