//! The three ingredients of the order flow: long-memory signs, Student
//! distributed placement, and the cancellation probability.
//!
//!     cargo run --release --example order_flow

use lobflow::flow::{cancel_prob, signs_fgn, signs_hidden_order, transaction_prob, CancellationInputs, HiddenOrderParams, StudentSampler};
use lobflow::stats::{dfa_hurst_default, sign_persistence};
use rand_distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 500_000;
    let lags = [1, 10, 100, 1000];
    for (name, signs) in [
        ("fGn signs, H 0.77", signs_fgn(n, 0.77, 1)?),
        ("hidden orders", signs_hidden_order(n, HiddenOrderParams::default(), 1)?),
    ] {
        let as_f64: Vec<f64> = signs.iter().map(|&s| s as f64).collect();
        let h = dfa_hurst_default(&as_f64)?;
        let p = sign_persistence(&signs, &lags)?;
        let diff: Vec<String> = p.p_same.iter().zip(&p.p_opposite).map(|(a, b)| format!("{:.3}", a - b)).collect();
        println!("{name}: DFA H = {:.3}, p_same - p_opp at lags {lags:?} = {}", h.hurst, diff.join(" "));
    }

    // placement: relative price x from the same best
    let sampler = StudentSampler::new(2.4e-3, 1.31)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xs: Vec<f64> = (0..200_000).map(|_| sampler.sample(&mut rng)).collect();
    for s in [0.5e-3, 1e-3, 2e-3, 5e-3] {
        let empirical = xs.iter().filter(|&&x| x >= s).count() as f64 / xs.len() as f64;
        println!("spread {s:.1e}: P(x >= s) sampled {empirical:.3}, exact {:.3}", transaction_prob(s, 2.4e-3, 1.31));
    }

    // cancellation: rises with distance and own-side share, falls with book size
    for (y, n_imb, n_tot) in [(0.1, 0.5, 40), (1.0, 0.5, 40), (3.0, 0.5, 40), (1.0, 0.9, 40), (1.0, 0.5, 400)] {
        let p = cancel_prob(CancellationInputs { y, n_imb, n_tot }, 1.12, 0.20)?;
        println!("y {y:<3} n_imb {n_imb} n_tot {n_tot:<3} -> P(cancel) {p:.4}");
    }
    Ok(())
}
