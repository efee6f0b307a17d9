//! Deterministic start vectors.

use std::str::FromStr;

use cgeig_core::{m_norm, HermitianOperator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessStyle {
    #[default]
    Ones,
    RandomNormal,
}

impl FromStr for GuessStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ones" => Ok(Self::Ones),
            "random-normal" => Ok(Self::RandomNormal),
            _ => Err(format!("unknown initial guess '{s}'")),
        }
    }
}

/// Start vector of unit M-norm. `ones` ignores the seed.
pub fn initial_guess(m: &HermitianOperator<f64>, seed: u64, style: GuessStyle) -> Vec<f64> {
    let n = m.dim();
    let mut x: Vec<f64> = match style {
        GuessStyle::Ones => vec![1.0; n],
        GuessStyle::RandomNormal => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let s = m_norm(m, &x).expect("dimensions agree by construction");
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mass() -> HermitianOperator<f64> {
        HermitianOperator::from_real_diagonal(&[1.0, 4.0, 9.0, 16.0]).unwrap()
    }

    #[test]
    fn ones_is_m_normalized_and_seed_free() {
        let m = mass();
        let a = initial_guess(&m, 0, GuessStyle::Ones);
        let b = initial_guess(&m, 77, GuessStyle::Ones);
        assert_eq!(a, b);
        assert!((m_norm(&m, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn random_is_deterministic_per_seed() {
        let m = mass();
        let a = initial_guess(&m, 3, GuessStyle::RandomNormal);
        assert_eq!(a, initial_guess(&m, 3, GuessStyle::RandomNormal));
        let b = initial_guess(&m, 4, GuessStyle::RandomNormal);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!(d > 0.0);
        assert!((m_norm(&m, &a).unwrap() - 1.0).abs() < 1e-14);
    }
}
