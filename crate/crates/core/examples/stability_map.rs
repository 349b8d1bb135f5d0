//! Where the book stays bounded. Small tick-to-price ratios and fast
//! cancellation keep it bounded; the divergent corner grows with the tick.
//!
//!     cargo run --release --example stability_map -- [steps]

use lobflow::sim::{sweep_stability, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let a_grid: Vec<f64> = (0..8).map(|i| 0.3 + 0.25 * i as f64).collect();
    let p0_grid: Vec<f64> = (0..8).map(|i| 500.0 + 650.0 * i as f64).collect();
    let ticks = [0.25, 0.5, 1.0];
    let map = sweep_stability(&SimConfig::azn(steps, 1), &a_grid, &p0_grid, &ticks, steps, 0)?;

    for (t, tick) in ticks.iter().enumerate() {
        println!("T = {tick}  (# divergent, . bounded; A down, p0 across)");
        let mask = map.divergent_mask(t);
        for (a, row) in a_grid.iter().zip(&mask).rev() {
            let cells: String = row.iter().map(|&d| if d { '#' } else { '.' }).collect();
            println!("  A {a:4.2}  {cells}");
        }
        println!("  {} divergent, lower-left: {}", map.divergent_count(t), map.is_lower_left(t));
    }
    println!("grows with T: {}", map.grows_with_tick());
    Ok(())
}
