//! Exponential-utility certainty equivalents of random costs.

/// Risk-adjusted value of a random cost `Y` under CARA preferences:
/// `(1/gamma) log E[exp(gamma Y)]`, and `E[Y]` when `gamma == 0`.
///
/// The exponentials are shifted so that nothing overflows; when the spread of
/// `gamma Y` is small the sum is centred on the mean and evaluated with
/// `expm1`/`ln_1p` so that tiny risk aversions keep full precision.
pub fn certainty_cost(gamma: f64, probs: &[f64], costs: &[f64]) -> f64 {
    debug_assert_eq!(probs.len(), costs.len());
    let mean: f64 = probs.iter().zip(costs).map(|(p, y)| p * y).sum();
    if gamma == 0.0 {
        return mean;
    }
    let (lo, hi) = costs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if gamma * (hi - lo) <= 1.0 {
        let excess: f64 = probs
            .iter()
            .zip(costs)
            .map(|(p, y)| p * (gamma * (y - mean)).exp_m1())
            .sum();
        return mean + excess.ln_1p() / gamma;
    }
    let shift = gamma * hi;
    let sum: f64 = probs
        .iter()
        .zip(costs)
        .map(|(p, y)| p * (gamma * y - shift).exp())
        .sum();
    (shift + sum.ln()) / gamma
}

/// Certainty equivalent of a random gain `W`: `-(1/gamma) log E[exp(-gamma W)]`.
pub fn certainty_equivalent(gamma: f64, probs: &[f64], gains: &[f64]) -> f64 {
    let costs: Vec<f64> = gains.iter().map(|w| -w).collect();
    -certainty_cost(gamma, probs, &costs)
}
