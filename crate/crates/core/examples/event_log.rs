//! The order-event CSV: write a simulated log, read it back, check it
//! replays cleanly, and pull the placement records out of it.
//!
//!     cargo run --release --example event_log -- [events.csv]

use std::fs::File;
use std::io::{BufReader, BufWriter};

use lobflow::calib::{extract_placements, filter_placements, infer_tick_size, load_events, validate_replay, FilterRules};
use lobflow::events::{Clock, EventWriter};
use lobflow::sim::{run_with_events, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("lobflow-events.csv").display().to_string());

    let mut writer = EventWriter::new(BufWriter::new(File::create(&path)?), Clock::EventTime)?;
    run_with_events(&SimConfig::azn(100_000, 1), &mut writer)?;
    writer.flush()?;
    drop(writer);

    let log = load_events(BufReader::new(File::open(&path)?))?;
    let tick = infer_tick_size(&log.events).ok_or("no tick size fits the prices")?;
    println!("{path}: {} events, tick {tick}", log.events.len());
    for e in log.events.iter().skip(20).take(5) {
        println!("  {} {} {} {} {}", e.time, e.kind, e.order_id, e.side.code(), e.price);
    }

    let book = validate_replay(&log, tick)?;
    let q = book.quotes()?;
    println!("replayed book: {} orders, bid {:.0} ask {:.0}", book.n_tot(), q.bid.exp(), q.ask.exp());

    let placements = extract_placements(&log, tick)?;
    let kept = filter_placements(&placements, &FilterRules::default(), log.clock);
    let markets = kept.kept.iter().filter(|p| p.market).count();
    println!("{} placements, {} kept, {markets} market orders", placements.len(), kept.kept.len());
    Ok(())
}
