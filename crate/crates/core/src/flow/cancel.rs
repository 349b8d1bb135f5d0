use super::{check, FlowError};

/// Per-order state the cancellation probability depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CancellationInputs {
    /// Distance to the opposite best relative to the distance at placement.
    pub y: f64,
    /// Fraction of resting orders on the order's own side.
    pub n_imb: f64,
    /// Total resting orders.
    pub n_tot: usize,
}

/// `min(1, A (1 - e^-y) (n_imb + B) / n_tot)`.
pub fn cancel_prob(inputs: CancellationInputs, a: f64, b: f64) -> Result<f64, FlowError> {
    let CancellationInputs { y, n_imb, n_tot } = inputs;
    check("n_tot", n_tot as f64, n_tot >= 1, ">= 1")?;
    check("y", y, y >= 0.0, ">= 0")?;
    check("n_imb", n_imb, (0.0..=1.0).contains(&n_imb), "in [0, 1]")?;
    Ok(cancel_prob_unchecked(y, n_imb, n_tot as f64, a, b))
}

#[inline]
pub(crate) fn cancel_prob_unchecked(y: f64, n_imb: f64, n_tot: f64, a: f64, b: f64) -> f64 {
    (a * -(-y).exp_m1() * (n_imb + b) / n_tot).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(y: f64, n_imb: f64, n_tot: usize) -> f64 {
        cancel_prob(CancellationInputs { y, n_imb, n_tot }, 1.12, 0.20).unwrap()
    }

    #[test]
    fn vanishes_at_opposite_best() {
        assert_eq!(p(0.0, 0.5, 10), 0.0);
        assert_eq!(cancel_prob(CancellationInputs { y: 0.0, n_imb: 0.9, n_tot: 1 }, 5.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn azn_far_from_best() {
        // 1.12 * 1 * (0.5 + 0.2) / 100
        assert!((p(1e3, 0.5, 100) - 0.00784).abs() < 1e-12);
    }

    #[test]
    fn inverse_in_book_size() {
        let one = p(1.3, 0.4, 50);
        let two = p(1.3, 0.4, 100);
        assert!((one / two - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_and_monotone() {
        assert_eq!(cancel_prob(CancellationInputs { y: 5.0, n_imb: 1.0, n_tot: 1 }, 10.0, 0.2).unwrap(), 1.0);
        assert!(p(0.5, 0.5, 20) < p(1.0, 0.5, 20));
        assert!(p(1.0, 0.3, 20) < p(1.0, 0.6, 20));
        assert!(p(1.0, 0.3, 20) > p(1.0, 0.3, 40));
    }

    #[test]
    fn rejects_empty_book() {
        assert!(cancel_prob(CancellationInputs { y: 1.0, n_imb: 0.5, n_tot: 0 }, 1.0, 0.2).is_err());
    }

    #[test]
    fn total_rate_independent_of_replication() {
        // a book and its k-fold replica: same y and n_imb per order, n_tot x k
        let orders = [(0.3, 0.6), (1.0, 0.6), (2.5, 0.4), (0.8, 0.4)];
        let total = |k: usize| -> f64 {
            let n = orders.len() * k;
            (0..k)
                .flat_map(|_| orders.iter())
                .map(|&(y, imb)| cancel_prob(CancellationInputs { y, n_imb: imb, n_tot: n }, 1.12, 0.2).unwrap())
                .sum()
        };
        for k in [2, 5, 17] {
            assert!((total(1) - total(k)).abs() < 1e-12);
        }
    }
}
