//! Order-event log: one CSV row per book mutation.
//!
//! ```text
//! step,event,order_id,side,price,size
//! 0,L,0,B,2999,1
//! 1,M,10,B,3000,1
//! 1,C,4,S,3004,1
//! ```
//!
//! The first column is `step` for event-time logs (one step per order
//! placement, as the simulator writes them) or `timestamp` for wall-clock
//! logs in seconds. `L` rests a new limit order under `order_id`; `M` is an
//! incoming market order of side `side` that filled resting order `order_id`
//! at `price`; `C` cancels resting order `order_id`.

use std::fmt;
use std::io::{self, Write};

use crate::book::Side;

pub const STEP_HEADER: &str = "step,event,order_id,side,price,size";
pub const TIMESTAMP_HEADER: &str = "timestamp,event,order_id,side,price,size";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Limit,
    Market,
    Cancel,
}

impl EventKind {
    pub fn code(self) -> &'static str {
        match self {
            EventKind::Limit => "L",
            EventKind::Market => "M",
            EventKind::Cancel => "C",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "L" | "place" => Some(EventKind::Limit),
            "M" | "execute" => Some(EventKind::Market),
            "C" | "cancel" => Some(EventKind::Cancel),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Which clock the `time` column of a log uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    /// Integer order-placement count.
    EventTime,
    /// Seconds.
    WallClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEvent {
    pub time: f64,
    pub kind: EventKind,
    pub order_id: u64,
    pub side: Side,
    pub price: f64,
    pub size: f64,
}

/// Destination for book mutations emitted during a run.
pub trait EventSink {
    fn record(&mut self, event: &OrderEvent) -> io::Result<()>;
}

impl EventSink for Vec<OrderEvent> {
    fn record(&mut self, event: &OrderEvent) -> io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Writes events in the CSV layout described at module level.
pub struct EventWriter<W: Write> {
    out: W,
    clock: Clock,
}

impl<W: Write> EventWriter<W> {
    pub fn new(mut out: W, clock: Clock) -> io::Result<Self> {
        let header = match clock {
            Clock::EventTime => STEP_HEADER,
            Clock::WallClock => TIMESTAMP_HEADER,
        };
        writeln!(out, "{header}")?;
        Ok(Self { out, clock })
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

impl<W: Write> EventSink for EventWriter<W> {
    fn record(&mut self, e: &OrderEvent) -> io::Result<()> {
        match self.clock {
            Clock::EventTime => write!(self.out, "{}", e.time as u64)?,
            Clock::WallClock => write!(self.out, "{}", e.time)?,
        }
        writeln!(self.out, ",{},{},{},{},{}", e.kind, e.order_id, e.side.code(), e.price, e.size)
    }
}
