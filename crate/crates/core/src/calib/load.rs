use std::collections::HashMap;
use std::io::Read;

use crate::book::{OrderBook, OrderId, Side, TickGrid};
use crate::events::{Clock, EventKind, OrderEvent, STEP_HEADER, TIMESTAMP_HEADER};

use super::CalibError;

/// A parsed event log with its clock.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub clock: Clock,
    pub events: Vec<OrderEvent>,
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "B" | "buy" => Some(Side::Buy),
        "S" | "sell" => Some(Side::Sell),
        _ => None,
    }
}

/// Parse a CSV event log. Rows must be time-ordered; line numbers in errors
/// count the header as line 1.
pub fn load_events<R: Read>(input: R) -> Result<EventLog, CalibError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| CalibError::Parse { line: 1, message: e.to_string() })?;
    let joined = header.iter().collect::<Vec<_>>().join(",");
    let clock = if joined == STEP_HEADER {
        Clock::EventTime
    } else if joined == TIMESTAMP_HEADER {
        Clock::WallClock
    } else {
        return Err(CalibError::Parse {
            line: 1,
            message: format!("expected header `{STEP_HEADER}` or `{TIMESTAMP_HEADER}`, found `{joined}`"),
        });
    };
    let mut events = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |message: String| CalibError::Parse { line, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", row.len())));
        }
        let num = |k: usize, what: &str| -> Result<f64, CalibError> {
            row[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("{what} `{}` is not a number", &row[k])))
        };
        let time = num(0, "time")?;
        let kind = EventKind::parse(&row[1]).ok_or_else(|| bad(format!("unknown event type `{}`", &row[1])))?;
        let order_id = row[2].parse::<u64>().map_err(|_| bad(format!("order id `{}` is not an integer", &row[2])))?;
        let side = parse_side(&row[3]).ok_or_else(|| bad(format!("unknown side `{}`", &row[3])))?;
        let price = num(4, "price")?;
        let size = num(5, "size")?;
        if price <= 0.0 {
            return Err(bad(format!("price {price} must be positive")));
        }
        if size < 0.0 {
            return Err(bad(format!("size {size} must be nonnegative")));
        }
        if time < last_time {
            return Err(bad(format!("time {time} goes backwards (previous {last_time})")));
        }
        last_time = time;
        events.push(OrderEvent { time, kind, order_id, side, price, size });
    }
    Ok(EventLog { clock, events })
}

/// Largest conventional tick size on which every price in the log lies.
pub fn infer_tick_size(events: &[OrderEvent]) -> Option<f64> {
    const CANDIDATES: [f64; 13] = [100.0, 50.0, 10.0, 5.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.01, 0.005, 0.001, 0.0001];
    if events.is_empty() {
        return None;
    }
    CANDIDATES.into_iter().find(|&t| {
        events.iter().all(|e| {
            let q = e.price / t;
            (q - q.round()).abs() < 1e-6 * q.max(1.0)
        })
    })
}

/// Book state observed while replaying a log.
pub(crate) struct Replay {
    pub book: OrderBook,
    /// External order id to book id.
    pub ids: HashMap<u64, OrderId>,
}

impl Replay {
    pub fn new(tick: f64) -> Result<Self, CalibError> {
        let grid = TickGrid::new(tick).map_err(|e| CalibError::Integrity { index: 0, message: e.to_string() })?;
        Ok(Self { book: OrderBook::new(grid).with_depth_floor(0), ids: HashMap::new() })
    }

    /// Apply one event; `index` is its position in the log, for messages.
    pub fn apply(&mut self, e: &OrderEvent, index: usize) -> Result<(), CalibError> {
        let fail = |message: String| CalibError::Integrity { index, message };
        let now = e.time as u64;
        match e.kind {
            EventKind::Limit => {
                if self.ids.contains_key(&e.order_id) {
                    return Err(fail(format!("order {} placed twice", e.order_id)));
                }
                let ticks = self.book.grid().round_to_tick(e.price).map_err(|err| fail(err.to_string()))?;
                if (self.book.grid().price(ticks) - e.price).abs() > 1e-6 * e.price {
                    return Err(fail(format!("price {} is off the tick grid", e.price)));
                }
                let id = self.book.place_limit(e.side, ticks, now).map_err(|err| fail(err.to_string()))?;
                self.ids.insert(e.order_id, id);
            }
            EventKind::Market => {
                let target = e.side.opposite();
                let id = *self.ids.get(&e.order_id).ok_or_else(|| fail(format!("execution of unknown order {}", e.order_id)))?;
                let order = self.book.get(id).expect("mapped ids rest in the book");
                if order.side != target {
                    return Err(fail(format!("{} market order filled a {} order", e.side, order.side)));
                }
                if self.book.best_ticks(target) != Some(order.price_ticks) {
                    return Err(fail(format!("order {} filled away from the opposite best", e.order_id)));
                }
                self.book.remove_order(id, now).map_err(|err| fail(err.to_string()))?;
                self.ids.remove(&e.order_id);
            }
            EventKind::Cancel => {
                let id = self.ids.remove(&e.order_id).ok_or_else(|| fail(format!("cancel of unknown order {}", e.order_id)))?;
                self.book.remove_order(id, now).map_err(|err| fail(err.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Replay the whole log, checking every event against the book.
pub fn validate_replay(log: &EventLog, tick: f64) -> Result<OrderBook, CalibError> {
    let mut replay = Replay::new(tick)?;
    for (i, e) in log.events.iter().enumerate() {
        replay.apply(e, i)?;
    }
    Ok(replay.book)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(body: &str) -> Result<EventLog, CalibError> {
        load_events(format!("{STEP_HEADER}\n{body}").as_bytes())
    }

    #[test]
    fn parses_both_spellings() {
        let l = log("0,L,0,B,99,1\n0,place,1,sell,101,2\n1,execute,1,B,101,1\n").unwrap();
        assert_eq!(l.clock, Clock::EventTime);
        assert_eq!(l.events.len(), 3);
        assert_eq!(l.events[2].kind, EventKind::Market);
        assert_eq!(l.events[1].side, Side::Sell);
        assert_eq!(l.events[1].size, 2.0);
        let w = load_events(format!("{TIMESTAMP_HEADER}\n3.5,L,7,B,10.25,100\n").as_bytes()).unwrap();
        assert_eq!(w.clock, Clock::WallClock);
        assert_eq!(w.events[0].time, 3.5);
    }

    #[test]
    fn malformed_rows_report_line() {
        let e = log("0,L,0,B,99,1\n1,X,1,B,99,1\n").unwrap_err();
        assert!(matches!(e, CalibError::Parse { line: 3, .. }), "{e}");
        let e = log("0,L,0,B,abc,1\n").unwrap_err();
        assert!(matches!(e, CalibError::Parse { line: 2, .. }), "{e}");
        let e = log("0,L,0,B,-5,1\n").unwrap_err();
        assert!(matches!(e, CalibError::Parse { line: 2, .. }));
        assert!(load_events("a,b,c\n".as_bytes()).is_err());
    }

    #[test]
    fn out_of_order_times() {
        let e = log("5,L,0,B,99,1\n4,L,1,S,101,1\n").unwrap_err();
        assert!(matches!(e, CalibError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn replay_integrity() {
        let ok = log("0,L,0,B,99,1\n0,L,1,S,101,1\n1,M,1,B,101,1\n2,C,0,B,99,1\n").unwrap();
        let book = validate_replay(&ok, 1.0).unwrap();
        assert_eq!(book.n_tot(), 0);
        let unknown = log("0,L,0,B,99,1\n1,C,5,B,99,1\n").unwrap();
        assert!(matches!(validate_replay(&unknown, 1.0), Err(CalibError::Integrity { index: 1, .. })));
        let crossing = log("0,L,0,B,99,1\n0,L,1,S,98,1\n").unwrap();
        assert!(matches!(validate_replay(&crossing, 1.0), Err(CalibError::Integrity { .. })));
        let wrong_side = log("0,L,0,B,99,1\n0,L,1,S,101,1\n1,M,0,B,99,1\n").unwrap();
        assert!(validate_replay(&wrong_side, 1.0).is_err());
        let off_grid = log("0,L,0,B,99.5,1\n").unwrap();
        assert!(validate_replay(&off_grid, 1.0).is_err());
    }

    #[test]
    fn tick_inference() {
        let l = log("0,L,0,B,99.25,1\n0,L,1,S,100.5,1\n").unwrap();
        assert_eq!(infer_tick_size(&l.events), Some(0.25));
        let l = log("0,L,0,B,2999,1\n0,L,1,S,3000,1\n").unwrap();
        assert_eq!(infer_tick_size(&l.events), Some(1.0));
    }
}
