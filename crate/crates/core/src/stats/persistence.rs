use serde::Serialize;

use super::{linear_fit, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignPersistence {
    pub lags: Vec<usize>,
    /// Probability that the sign `lag` steps later agrees.
    pub p_same: Vec<f64>,
    /// Probability that it disagrees; `1 - p_same`.
    pub p_opposite: Vec<f64>,
    /// Exponent of `p_same - p_opposite ~ K lag^-gamma`, fitted over lags
    /// where the difference is positive.
    pub gamma: Option<f64>,
    pub prefactor: Option<f64>,
}

pub fn sign_persistence(signs: &[i8], lags: &[usize]) -> Result<SignPersistence, StatsError> {
    let n = signs.len();
    if let Some(&bad) = lags.iter().find(|&&l| l == 0 || l >= n / 10) {
        return Err(StatsError::InvalidInput(format!("lag {bad} must be in [1, n/10) for n = {n}")));
    }
    let mut p_same = Vec::with_capacity(lags.len());
    for &lag in lags {
        let agree = signs.iter().zip(&signs[lag..]).filter(|(a, b)| a == b).count();
        p_same.push(agree as f64 / (n - lag) as f64);
    }
    let p_opposite: Vec<f64> = p_same.iter().map(|p| 1.0 - p).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = lags
        .iter()
        .zip(p_same.iter().zip(&p_opposite))
        .filter(|(_, (s, o))| *s > *o)
        .map(|(&l, (s, o))| ((l as f64).ln(), (s - o).ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys);
    Ok(SignPersistence {
        lags: lags.to_vec(),
        p_same,
        p_opposite,
        gamma: fit.map(|f| -f.slope),
        prefactor: fit.map(|f| f.intercept.exp()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::signs_fgn;
    use crate::stats::geometric_grid;

    #[test]
    fn iid_signs_have_no_persistence() {
        let s = signs_fgn(200_000, 0.5, 3).unwrap();
        let p = sign_persistence(&s, &[1, 10, 100, 1000]).unwrap();
        for v in &p.p_same {
            assert!((v - 0.5).abs() < 0.01, "{v}");
        }
    }

    #[test]
    fn complementary_probabilities() {
        let s = signs_fgn(50_000, 0.8, 3).unwrap();
        let p = sign_persistence(&s, &[1, 2, 3, 50]).unwrap();
        for (a, b) in p.p_same.iter().zip(&p.p_opposite) {
            assert_eq!(a + b, 1.0);
        }
    }

    #[test]
    fn alternating_signs() {
        let s: Vec<i8> = (0..10_000).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let p = sign_persistence(&s, &[1, 2, 3, 4]).unwrap();
        assert_eq!(p.p_same, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn fgn_signs_decay_with_two_minus_two_h() {
        let h = 0.77;
        let s = signs_fgn(1_000_000, h, 5).unwrap();
        let lags = geometric_grid(10, 1000, 12);
        let p = sign_persistence(&s, &lags).unwrap();
        let gamma = p.gamma.unwrap();
        assert!((gamma - (2.0 - 2.0 * h)).abs() < 0.1, "{gamma}");
        assert!(p.p_same.iter().all(|&v| v > 0.5));
    }

    #[test]
    fn lag_out_of_range() {
        assert!(sign_persistence(&[1; 100], &[10]).is_err());
        assert!(sign_persistence(&[1; 100], &[0]).is_err());
    }
}
