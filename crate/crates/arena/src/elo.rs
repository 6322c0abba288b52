//! Elo ratings for pairwise votes.

pub const BASE_RATING: f64 = 1500.0;
pub const K_FACTOR: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

/// Probability that `a` beats `b`.
pub fn expected(a: f64, b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((b - a) / 400.0))
}

/// Standard Elo update. The same amount moves from one side to the other,
/// so `a' + b' == a + b` up to rounding.
pub fn update_ratings(a: f64, b: f64, outcome: Outcome) -> (f64, f64) {
    let s_a = match outcome {
        Outcome::AWins => 1.0,
        Outcome::BWins => 0.0,
        Outcome::Tie => 0.5,
    };
    let delta = K_FACTOR * (s_a - expected(a, b));
    (a + delta, b - delta)
}
