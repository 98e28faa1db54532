//! Compactly supported even bump `ρ(t) ∝ (1 − t²)³` on `[−1, 1]`, the
//! smooth cutoffs built from it and the mollified two-phase laminate profile.

/// Normalised bump density on `[−1, 1]`.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        35.0 / 32.0 * s * s * s
    }
}

/// `∫_{−1}^{t} ρ`.
pub fn bump_cdf(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t2 = t * t;
        0.5 + 35.0 / 32.0 * t * (1.0 - t2 + 0.6 * t2 * t2 - t2 * t2 * t2 / 7.0)
    }
}

/// Discrete mollifier weights for offsets `−R..=R` cells: the mass of the
/// bump of radius `r` cells over each cell. The weights sum to one.
pub fn grid_weights(r: f64) -> Vec<f64> {
    assert!(r > 0.0, "mollifier radius must be positive");
    let half = (r + 0.5).ceil() as i64;
    let raw: Vec<f64> = (-half..=half)
        .map(|j| bump_cdf((j as f64 + 0.5) / r) - bump_cdf((j as f64 - 0.5) / r))
        .collect();
    let total: f64 = raw.iter().sum();
    let first = raw.iter().position(|w| *w > 0.0).unwrap_or(0);
    let last = raw.len() - raw.iter().rev().position(|w| *w > 0.0).unwrap_or(0);
    raw[first..last].iter().map(|w| w / total).collect()
}

/// C^∞ transition equal to 0 for `t ≤ 0` and 1 for `t ≥ 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// The 1-periodic zero-mean profile taking `1 − θ` on `[0, θ)` and `−θ` on
/// `[θ, 1)`, convolved with the bump of radius `eps` (`eps = 0` is sharp).
pub fn laminate_profile(s: f64, theta: f64, eps: f64) -> f64 {
    let f = s - s.floor();
    if eps <= 0.0 {
        return if f < theta { 1.0 - theta } else { -theta };
    }
    // mass of ρ_eps(s − ·) on the union of the phase-one intervals [n, n + θ)
    let mut mass = 0.0;
    let lo = (f - eps - theta).floor() as i64 - 1;
    let hi = (f + eps).ceil() as i64 + 1;
    for n in lo..=hi {
        let a = n as f64;
        mass += bump_cdf((f - a) / eps) - bump_cdf((f - a - theta) / eps);
    }
    mass - theta
}
