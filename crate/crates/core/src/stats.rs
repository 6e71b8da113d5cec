//! Small ranking statistics shared by the detectors.

/// Probability that a positive outscores a negative, ties counted as 1/2.
/// `None` if either side is empty.
pub fn pairwise_auc(negatives: &[f64], positives: &[f64]) -> Option<f64> {
    if negatives.is_empty() || positives.is_empty() {
        return None;
    }
    let mut neg = negatives.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in positives {
        let below = neg.partition_point(|&n| n < p);
        let not_above = neg.partition_point(|&n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Some(wins / (negatives.len() * positives.len()) as f64)
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn mean_abs_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(neg: &[f64], pos: &[f64]) -> f64 {
        let mut s = 0.0;
        for p in pos {
            for n in neg {
                s += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        s / (neg.len() * pos.len()) as f64
    }

    #[test]
    fn matches_brute_force() {
        let neg = [0.1, 0.4, 0.4, 0.9, 0.3];
        let pos = [0.4, 0.95, 0.2, 0.4];
        assert_eq!(pairwise_auc(&neg, &pos).unwrap(), brute(&neg, &pos));
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap() - 0.99795).abs() < 1e-4);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert!((pearson(&[1.0, 2.0], &[3.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_and_identical() {
        assert_eq!(pairwise_auc(&[0.1, 0.2], &[0.3, 0.4]), Some(1.0));
        assert_eq!(pairwise_auc(&[0.5; 3], &[0.5; 4]), Some(0.5));
        assert_eq!(pairwise_auc(&[], &[1.0]), None);
    }
}
