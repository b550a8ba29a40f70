//! Small statistics helpers for run summaries and experiment analysis.

/// Arithmetic mean; 0 for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by n).
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn population_std(xs: &[f64]) -> f64 {
    population_variance(xs).sqrt()
}

/// Median; averages the two middle values for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Ranks with ties replaced by their average rank (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("no NaN in rank input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "spearman needs paired samples");
    if xs.len() < 2 {
        return 0.0;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `wins + losses` fair coin flips. Ties must already be dropped.
pub fn sign_test_one_sided(wins: u32, losses: u32) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    // Exact binomial tail; n is small (paired seeds), so f64 is plenty.
    let mut tail = 0.0;
    for k in wins..=n {
        tail += binomial(n, k);
    }
    tail / 2f64.powi(n as i32)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_variance_basics() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(population_variance(&[1.0, 2.0, 3.0]), 2.0 / 3.0);
        assert_eq!(population_variance(&[5.0, 5.0]), 0.0);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn spearman_sees_monotone_relations() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 4.0, 9.0, 16.0, 30.0]; // monotone but nonlinear
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        let flipped: Vec<f64> = ys.iter().map(|y| -y).collect();
        assert!((spearman(&xs, &flipped) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 1.0, 2.0, 3.0];
        assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_test_matches_hand_computed_tails() {
        // P(X >= 9 | n = 10) = (10 + 1) / 1024
        assert!((sign_test_one_sided(9, 1) - 11.0 / 1024.0).abs() < 1e-12);
        // P(X >= 8 | n = 10) = (45 + 10 + 1) / 1024
        assert!((sign_test_one_sided(8, 2) - 56.0 / 1024.0).abs() < 1e-12);
        assert_eq!(sign_test_one_sided(0, 0), 1.0);
        assert!((sign_test_one_sided(10, 0) - 1.0 / 1024.0).abs() < 1e-15);
    }
}
