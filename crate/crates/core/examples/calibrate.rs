//! Round trip: simulate with known parameters, keep the order events, and
//! estimate the parameters back from the events alone.
//!
//!     cargo run --release --example calibrate -- [steps] [seed]

use lobflow::calib::{calibrate, CalibrationOptions, EventLog};
use lobflow::events::{Clock, OrderEvent};
use lobflow::sim::{run_with_events, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1_200_000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);
    let config = SimConfig::azn(steps, seed);

    let mut events: Vec<OrderEvent> = Vec::new();
    let out = run_with_events(&config, &mut events)?;
    println!("{} events from {steps} steps ({:?})", events.len(), out.verdict);

    let mut options = CalibrationOptions { tick: Some(config.flow.tick_size), ..Default::default() };
    // simulated books never go below the floor, so cancellations stop there
    options.cancel_bins.depth_floor = config.depth_floor;
    let r = calibrate(&EventLog { clock: Clock::EventTime, events }, &options)?;

    let f = config.flow;
    println!("{:<8} {:>10} {:>10} {:>7}", "", "true", "fitted", "error");
    for (name, truth, fit) in [
        ("H_s", f.hurst, r.hurst),
        ("alpha_x", f.alpha_x, r.alpha_x),
        ("sigma_x", f.sigma_x, r.sigma_x),
        ("A", f.cancel_scale, r.cancel_scale),
        ("B", f.imbalance_offset, r.imbalance_offset),
    ] {
        println!("{name:<8} {truth:>10.4e} {fit:>10.4e} {:>+6.1}%", (fit / truth - 1.0) * 100.0);
    }

    let c = &r.diagnostics.cancellation;
    println!(
        "factor curves: K1 {:.3e} K2 {:.3e} K3 {:.3} P(C) {:.3e} -> A {:.3}, B {:.3}",
        c.k1, c.k2, c.k3, c.p_c, c.a, c.b
    );
    println!("book-size slope {:.3} +- {:.3} (model: -1)", c.ntot_slope, c.ntot_slope_se);
    Ok(())
}
