//! Closed-form reference solutions used to validate the propagators.

/// Rates closer than this are treated as equal.
pub const DEGENERATE_RATE_TOL: f64 = 1e-12;

/// Populations (lower, upper) after a resonant two-level rotation by
/// θ = d·∫f dt, starting from the lower level.
pub fn rabi_populations(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (c * c, s * s)
}

/// Populations of a pure decay cascade N → N−1 → … → 1.
///
/// `rates[k]` is the decay rate of level `k + 2` into level `k + 1`; the
/// ground state is stable. The chain starts with all population in
/// `start_level` (1-based). Returned vector has one entry per level.
///
/// This is the Bateman solution written as a divided difference of
/// e^{−λt} over the rates along the chain, which extends continuously to
/// coincident rates through derivatives (the confluent limit).
pub fn cascade_populations(rates: &[f64], t: f64, start_level: usize) -> Vec<f64> {
    let n = rates.len() + 1;
    assert!(
        (1..=n).contains(&start_level),
        "start level {start_level} outside 1..={n}"
    );
    let mut pops = vec![0.0; n];
    // Chain positions: start_level, start_level − 1, …, 1 with decay
    // constant of level ℓ = rates[ℓ − 2] (0 for the ground state).
    let lambda = |level: usize| if level == 1 { 0.0 } else { rates[level - 2] };
    let mut prefactor = 1.0;
    let mut nodes = Vec::with_capacity(start_level);
    for (m, level) in (1..=start_level).rev().enumerate() {
        nodes.push(lambda(level));
        // p_m(t) = (Π_{i<m} λ_i) · (−1)^m · f[λ_0, …, λ_m],  f(x) = e^{−xt}
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        pops[level - 1] = (prefactor * sign * exp_divided_difference(&nodes, t)).max(0.0);
        prefactor *= lambda(level);
    }
    pops
}

/// Divided difference of f(x) = e^{−xt} over `nodes`, with repeated nodes
/// handled through f^{(k)}(x)/k! = (−t)^k e^{−xt}/k!.
fn exp_divided_difference(nodes: &[f64], t: f64) -> f64 {
    let mut x = nodes.to_vec();
    x.sort_by(f64::total_cmp);
    // Snap near-coincident nodes onto one value so equal groups are exact.
    for i in 1..x.len() {
        if (x[i] - x[i - 1]).abs() < DEGENERATE_RATE_TOL {
            x[i] = x[i - 1];
        }
    }
    let m = x.len();
    // table[i] holds f[x_i, …, x_{i+k}] after pass k.
    let mut table: Vec<f64> = x.iter().map(|&xi| (-xi * t).exp()).collect();
    let mut factorial = 1.0;
    for k in 1..m {
        factorial *= k as f64;
        for i in 0..m - k {
            table[i] = if x[i + k] == x[i] {
                (-t).powi(k as i32) * (-x[i] * t).exp() / factorial
            } else {
                (table[i + 1] - table[i]) / (x[i + k] - x[i])
            };
        }
    }
    table[0]
}
