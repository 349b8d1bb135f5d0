//! The book engine on its own: price-time priority, the depth floor, and the
//! quantities the cancellation model reads off the book.
//!
//!     cargo run --example order_book

use lobflow::book::{OrderBook, Side, TickGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // prices in ticks of 1 (pence), at most 2 orders may be removed down to
    let mut book = OrderBook::new(TickGrid::new(1.0)?).with_depth_floor(2);

    for t in 0..3 {
        book.place_limit(Side::Buy, 2999, t)?;
        book.place_limit(Side::Sell, 3001, t)?;
    }
    book.place_limit(Side::Buy, 2997, 3)?;
    let q = book.quotes()?;
    println!("bid {:.0} ask {:.0} spread {:.2e} (log)", q.bid.exp(), q.ask.exp(), q.spread);

    // a limit at the opposite best would cross; the simulator turns those
    // into market orders before they reach the book
    println!("crossing buy: {}", book.place_limit(Side::Buy, 3001, 4).unwrap_err());

    // market orders fill the oldest order at the best price
    let filled = book.execute_market(Side::Buy, 5)?;
    println!("buy market filled order {} placed at t={}, lifetime {}", filled.order.id, filled.order.t_placed, filled.lifetime());

    // the floor keeps two sells resting
    println!("second buy market: {:?}", book.execute_market(Side::Buy, 6).map(|r| r.order.id));
    println!("third buy market: {}", book.execute_market(Side::Buy, 7).unwrap_err());

    // order #0 arrived before any ask, so it has no distance at placement
    // and y is undefined (printed as inf)
    for o in book.orders() {
        println!(
            "  {} {} @ {} y = {:.3}",
            o.id,
            o.side,
            o.price_ticks,
            o.relative_distance(&book.quotes()?)
        );
    }
    println!("n_tot {} buy-side fraction {:.2}", book.n_tot(), book.imbalance(Side::Buy)?);
    book.check_invariants()?;
    Ok(())
}
