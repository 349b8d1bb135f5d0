//! One simulation at the AZN parameters, summarised the way price series
//! are compared against data.
//!
//!     cargo run --release --example simulate -- [steps] [seed] [series.csv]

use std::fs::File;
use std::io::BufWriter;

use lobflow::report::{write_series, SimSummary};
use lobflow::sim::{run, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1_000_000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let config = SimConfig::azn(steps, seed);

    let started = std::time::Instant::now();
    let out = run(&config)?;
    let s = SimSummary::new(&out, config.flow.p0, 0.05);
    println!("{steps} steps in {:.1} s, verdict {:?}", started.elapsed().as_secs_f64(), out.verdict);
    println!("E|r|      {:.2e}   sigma|r| {:.2e}   alpha|r| {:.2}", s.E_abs_r, s.sigma_abs_r, s.alpha_r.unwrap_or(f64::NAN));
    println!("E(s)      {:.2e}   sigma(s) {:.2e}   alpha(s) {:.2}", s.E_s, s.sigma_s, s.alpha_s.unwrap_or(f64::NAN));
    if let Some(se) = s.abs_r.mean_se {
        println!("E|r| standard error under long memory {se:.1e}");
    }
    println!("transactions per step {:.3}, mean book size {:.0}", s.transaction_rate, s.mean_n_tot);
    if let Some(g) = s.lifetimes.gamma_c {
        println!("cancelled lifetimes: {} with tail exponent {g:.2} over [10, 1000]", s.lifetimes.cancelled);
    }
    let d = &out.diagnostics;
    println!(
        "limit {} market {} refused {} cancelled {} (refused by floor {})",
        d.limit_orders, d.market_orders, d.rejected_markets, d.cancellations, d.rejected_cancellations
    );

    if let Some(path) = args.next() {
        write_series(BufWriter::new(File::create(&path)?), &out)?;
        println!("series written to {path}");
    }
    Ok(())
}
