//! Joint law of the closing-price innovation and the intraday execution
//! noise: `eps' = (sqrt(3)/2) eps + eps_tilde / 2` with `eps_tilde` an
//! independent copy of the pentanomial innovation.

use std::ops::{Add, Mul};

use num_rational::Ratio;

use crate::model::{innovation_support, EPSILONS, PROBS};

type Q = Ratio<i64>;

/// Exact element `rational + irrational * sqrt(3)` of the field Q(sqrt 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadraticSurd {
    pub rational: Q,
    pub irrational: Q,
}

impl QuadraticSurd {
    pub fn new(rational: Q, irrational: Q) -> Self {
        Self { rational, irrational }
    }

    pub fn zero() -> Self {
        Self::new(Q::from_integer(0), Q::from_integer(0))
    }

    pub fn from_rational(r: Q) -> Self {
        Self::new(r, Q::from_integer(0))
    }

    pub fn to_f64(&self) -> f64 {
        let f = |r: Q| *r.numer() as f64 / *r.denom() as f64;
        f(self.rational) + f(self.irrational) * 3f64.sqrt()
    }
}

impl Add for QuadraticSurd {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.rational + o.rational, self.irrational + o.irrational)
    }
}

impl Mul for QuadraticSurd {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let three = Q::from_integer(3);
        Self::new(
            self.rational * o.rational + three * self.irrational * o.irrational,
            self.rational * o.irrational + self.irrational * o.rational,
        )
    }
}

/// One atom of the 25-point joint law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointInnovation {
    pub eps: i8,
    pub eps_tilde: i8,
    pub prob: Q,
}

impl JointInnovation {
    /// `eps'` exactly.
    pub fn eps_prime(&self) -> QuadraticSurd {
        QuadraticSurd::new(
            Q::new(i64::from(self.eps_tilde), 2),
            Q::new(i64::from(self.eps), 2),
        )
    }

    pub fn eps_prime_f64(&self) -> f64 {
        eps_prime(f64::from(self.eps), f64::from(self.eps_tilde))
    }
}

/// `eps'` from its two independent components.
pub fn eps_prime(eps: f64, eps_tilde: f64) -> f64 {
    0.5 * 3f64.sqrt() * eps + 0.5 * eps_tilde
}

pub fn joint_innovation_support() -> Vec<JointInnovation> {
    let law = innovation_support();
    let mut out = Vec::with_capacity(25);
    for a in &law {
        for b in &law {
            out.push(JointInnovation { eps: a.value, eps_tilde: b.value, prob: a.prob * b.prob });
        }
    }
    out
}

/// Exact `E[eps^i eps'^j]` under the joint law.
pub fn joint_moment(i: u32, j: u32) -> QuadraticSurd {
    let mut total = QuadraticSurd::zero();
    for atom in joint_innovation_support() {
        let mut term = QuadraticSurd::from_rational(atom.prob * Q::from_integer(i64::from(atom.eps).pow(i)));
        for _ in 0..j {
            term = term * atom.eps_prime();
        }
        total = total + term;
    }
    total
}

/// `E[exp(t eps)]` of the pentanomial law.
pub(crate) fn mgf(t: f64) -> f64 {
    PROBS.iter().zip(EPSILONS).map(|(p, e)| p * (t * e).exp()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    #[test]
    fn second_moments_are_exact() {
        assert_eq!(joint_moment(0, 0), QuadraticSurd::from_rational(q(1, 1)));
        assert_eq!(joint_moment(0, 1), QuadraticSurd::zero());
        assert_eq!(joint_moment(1, 0), QuadraticSurd::zero());
        assert_eq!(joint_moment(0, 2), QuadraticSurd::from_rational(q(1, 1)));
        assert_eq!(joint_moment(2, 0), QuadraticSurd::from_rational(q(1, 1)));
        // Covariance sqrt(3)/2.
        assert_eq!(joint_moment(1, 1), QuadraticSurd::new(q(0, 1), q(1, 2)));
    }

    #[test]
    fn marginal_of_eps_is_pentanomial() {
        let joint = joint_innovation_support();
        for atom in innovation_support() {
            let p: Q = joint.iter().filter(|j| j.eps == atom.value).map(|j| j.prob).sum();
            assert_eq!(p, atom.prob);
        }
        let total: Q = joint.iter().map(|j| j.prob).sum();
        assert_eq!(total, q(1, 1));
    }

    #[test]
    fn float_view_matches_exact_value() {
        for atom in joint_innovation_support() {
            assert!((atom.eps_prime().to_f64() - atom.eps_prime_f64()).abs() < 1e-15);
        }
    }

    #[test]
    fn mgf_matches_direct_sum() {
        let t = 0.37;
        let direct: f64 = innovation_support()
            .iter()
            .map(|i| i.prob_f64() * (t * f64::from(i.value)).exp())
            .sum();
        assert!((mgf(t) - direct).abs() < 1e-15);
        assert_eq!(mgf(0.0), 1.0);
    }
}
