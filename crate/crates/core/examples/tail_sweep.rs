//! Fatter placement tails and longer sign memory both fatten the return
//! tail. Prints the Hill exponent of |r| over an (alpha_x, H_s) grid.
//!
//!     cargo run --release --example tail_sweep -- [steps]

use lobflow::sim::{sweep_tails, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300_000);
    let alphas = [0.9, 1.3, 1.9];
    let hursts = [0.5, 0.85];
    let seeds = [1, 2];
    let cells = sweep_tails(&SimConfig::azn(steps, 1), &alphas, &hursts, &seeds, 0.05, 0)?;

    print!("{:>8}", "alpha_x");
    for h in hursts {
        print!("   H={h:<4}");
    }
    println!();
    for ax in alphas {
        print!("{ax:>8}");
        for h in hursts {
            let v: Vec<f64> = cells.iter().filter(|c| c.alpha_x == ax && c.hurst == h).filter_map(|c| c.alpha_r).collect();
            print!("   {:6.2}", v.iter().sum::<f64>() / v.len() as f64);
        }
        println!();
    }
    Ok(())
}
