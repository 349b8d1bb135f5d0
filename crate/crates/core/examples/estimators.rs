//! The estimators on synthetic data with known answers.
//!
//!     cargo run --release --example estimators

use lobflow::flow::fgn;
use lobflow::stats::{dfa_hurst_default, hill_estimator, tail_report, variance_plot_se, EmpiricalDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Pareto with CCDF x^-2.5
    let pareto: Vec<f64> = (0..100_000).map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 2.5)).collect();
    let h = hill_estimator(&pareto, 0.05)?;
    println!("Hill, Pareto(2.5): {:.3} +- {:.3} from the top {} values", h.alpha, h.std_err, h.k);
    let report = tail_report(&pareto, &[0.025, 0.05, 0.1])?;
    println!("  across tail fractions: {:?}", report.estimates.iter().map(|e| (e.0, (e.1.alpha * 1000.0).round() / 1000.0)).collect::<Vec<_>>());

    let d = EmpiricalDistribution::new(pareto);
    for x in [2.0, 10.0, 50.0] {
        println!("  P(X >= {x}) = {:.2e} (exact {:.2e})", d.ccdf(x), f64::powf(x, -2.5));
    }

    for h in [0.5, 0.75, 0.9] {
        let x = fgn(1 << 18, h, &mut rng)?;
        let est = dfa_hurst_default(&x)?;
        let vp = variance_plot_se(&x)?;
        println!(
            "fGn H {h}: DFA {:.3} (R^2 {:.4}); mean SE {:.2e} vs naive {:.2e}",
            est.hurst, est.r_squared, vp.se, vp.naive_se
        );
    }
    Ok(())
}
