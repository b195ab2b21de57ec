//! The five-point innovation law driving the price tree.

use num_rational::Ratio;

/// One atom of the pentanomial law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Innovation {
    pub value: i8,
    pub prob: Ratio<i64>,
}

impl Innovation {
    pub fn prob_f64(&self) -> f64 {
        *self.prob.numer() as f64 / *self.prob.denom() as f64
    }
}

/// Innovation values in tree order: child `zeta + value + 2`.
pub const EPSILONS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Probabilities matching [`EPSILONS`].
pub const PROBS: [f64; 5] = [1.0 / 12.0, 1.0 / 6.0, 0.5, 1.0 / 6.0, 1.0 / 12.0];

/// The pentanomial law with exact probabilities. Its first four moments are
/// those of a standard normal: 0, 1, 0, 3.
pub fn innovation_support() -> [Innovation; 5] {
    let p = |n, d| Ratio::new(n, d);
    [
        Innovation { value: -2, prob: p(1, 12) },
        Innovation { value: -1, prob: p(1, 6) },
        Innovation { value: 0, prob: p(1, 2) },
        Innovation { value: 1, prob: p(1, 6) },
        Innovation { value: 2, prob: p(1, 12) },
    ]
}

/// Exact raw moment `E[eps^k]`.
pub fn moment(k: u32) -> Ratio<i64> {
    innovation_support()
        .iter()
        .map(|i| i.prob * Ratio::from_integer(i64::from(i.value).pow(k)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_standard_normal() {
        assert_eq!(moment(0), Ratio::from_integer(1));
        assert_eq!(moment(1), Ratio::from_integer(0));
        assert_eq!(moment(2), Ratio::from_integer(1));
        assert_eq!(moment(3), Ratio::from_integer(0));
        assert_eq!(moment(4), Ratio::from_integer(3));
    }

    #[test]
    fn float_tables_agree_with_exact_law() {
        for (atom, (&e, &p)) in innovation_support().iter().zip(EPSILONS.iter().zip(PROBS.iter())) {
            assert_eq!(f64::from(atom.value), e);
            assert_eq!(atom.prob_f64(), p);
        }
    }
}
