//! Continuous double auction book with price-time priority and unit-size orders.
//!
//! Prices live on an integer tick grid; log prices are derived from
//! `ticks * tick_size` when needed. Every side keeps a minimum depth (two
//! orders by default) below which executions and cancellations are refused.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Default minimum number of resting orders kept on each side.
pub const DEFAULT_DEPTH_FLOOR: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BookError {
    #[error("invalid price {0}: must be positive and finite")]
    InvalidPrice(f64),
    #[error("invalid tick size {0}")]
    InvalidTick(f64),
    #[error("{side} limit at tick {price} crosses the opposite best")]
    Crossing { side: Side, price: i64 },
    #[error("order {0} not found")]
    NotFound(OrderId),
    #[error("{0} side of the book is empty")]
    EmptySide(Side),
    #[error("book is empty")]
    EmptyBook,
    #[error("{side} side is at the depth floor ({depth} orders)")]
    DepthFloor { side: Side, depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// +1 for buys, -1 for sells.
    pub fn sign(self) -> i8 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn from_sign(sign: i8) -> Self {
        if sign >= 0 {
            Side::Buy
        } else {
            Side::Sell
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct OrderId(pub u64);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Price grid with a fixed minimum increment in currency units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TickGrid {
    tick_size: f64,
}

impl TickGrid {
    pub fn new(tick_size: f64) -> Result<Self, BookError> {
        if !(tick_size.is_finite() && tick_size > 0.0) {
            return Err(BookError::InvalidTick(tick_size));
        }
        Ok(Self { tick_size })
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    /// Largest grid index whose price does not exceed `price`.
    pub fn round_to_tick(&self, price: f64) -> Result<i64, BookError> {
        if !(price.is_finite() && price > 0.0) {
            return Err(BookError::InvalidPrice(price));
        }
        let mut idx = (price / self.tick_size).floor();
        // p/T can land a hair above an integer for prices that sit exactly
        // on the grid but are not representable; pull it back if so.
        if idx * self.tick_size > price {
            idx -= 1.0;
        } else if (idx + 1.0) * self.tick_size <= price {
            idx += 1.0;
        }
        Ok(idx as i64)
    }

    pub fn price(&self, ticks: i64) -> f64 {
        ticks as f64 * self.tick_size
    }

    pub fn log_price(&self, ticks: i64) -> f64 {
        self.price(ticks).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub id: OrderId,
    pub side: Side,
    pub price_ticks: i64,
    pub log_price: f64,
    pub t_placed: u64,
    /// Log distance to the opposite best at placement.
    pub delta0: f64,
}

impl Order {
    /// Current log distance to the opposite best.
    pub fn distance(&self, quotes: &Quotes) -> f64 {
        match self.side {
            Side::Buy => quotes.ask - self.log_price,
            Side::Sell => self.log_price - quotes.bid,
        }
    }

    /// Distance to the opposite best relative to its value at placement.
    pub fn relative_distance(&self, quotes: &Quotes) -> f64 {
        self.distance(quotes) / self.delta0
    }
}

/// Best quotes in log prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quotes {
    pub bid: f64,
    pub ask: f64,
    pub mid: f64,
    pub spread: f64,
}

/// An order leaving the book, with its lifetime in event time.
#[derive(Debug, Clone, PartialEq)]
pub struct Removed {
    pub order: Order,
    pub at: u64,
}

impl Removed {
    pub fn lifetime(&self) -> u64 {
        self.at.saturating_sub(self.order.t_placed)
    }
}

/// Prefix-count tree over order ids; answers "k-th resting order in id order".
#[derive(Debug, Clone, Default)]
struct RankIndex {
    tree: Vec<u32>,
}

impl RankIndex {
    fn lowbit(i: usize) -> usize {
        i & i.wrapping_neg()
    }

    fn prefix(&self, mut i: usize) -> u32 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i - 1];
            i -= Self::lowbit(i);
        }
        s
    }

    /// Append slot `len()` holding `value`.
    fn push(&mut self, value: u32) {
        let i = self.tree.len() + 1;
        let node = value + self.prefix(i - 1) - self.prefix(i - Self::lowbit(i));
        self.tree.push(node);
    }

    fn len(&self) -> usize {
        self.tree.len()
    }

    fn add(&mut self, slot: usize, delta: i32) {
        let mut i = slot + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] = (self.tree[i - 1] as i64 + delta as i64) as u32;
            i += Self::lowbit(i);
        }
    }

    /// Slot holding the `k`-th (0-based) set entry.
    fn select(&self, k: u32) -> Option<usize> {
        let n = self.tree.len();
        let mut pos = 0usize;
        let mut rem = k + 1;
        let mut step = if n == 0 { 0 } else { 1usize << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] < rem {
                pos = next;
                rem -= self.tree[next - 1];
            }
            step >>= 1;
        }
        (pos < n).then_some(pos)
    }
}

#[derive(Debug, Clone)]
pub struct OrderBook {
    grid: TickGrid,
    depth_floor: usize,
    bids: BTreeMap<i64, VecDeque<OrderId>>,
    asks: BTreeMap<i64, VecDeque<OrderId>>,
    orders: BTreeMap<OrderId, Order>,
    ranks: RankIndex,
    best_bid: Option<i64>,
    best_ask: Option<i64>,
    n_buy: usize,
    n_sell: usize,
}

impl OrderBook {
    pub fn new(grid: TickGrid) -> Self {
        Self {
            grid,
            depth_floor: DEFAULT_DEPTH_FLOOR,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            orders: BTreeMap::new(),
            ranks: RankIndex::default(),
            best_bid: None,
            best_ask: None,
            n_buy: 0,
            n_sell: 0,
        }
    }

    /// Book that allows removals down to `floor` orders per side.
    pub fn with_depth_floor(mut self, floor: usize) -> Self {
        self.depth_floor = floor;
        self
    }

    pub fn grid(&self) -> &TickGrid {
        &self.grid
    }

    pub fn depth_floor(&self) -> usize {
        self.depth_floor
    }

    pub fn n_buy(&self) -> usize {
        self.n_buy
    }

    pub fn n_sell(&self) -> usize {
        self.n_sell
    }

    pub fn n_tot(&self) -> usize {
        self.n_buy + self.n_sell
    }

    pub fn depth(&self, side: Side) -> usize {
        match side {
            Side::Buy => self.n_buy,
            Side::Sell => self.n_sell,
        }
    }

    pub fn best_bid_ticks(&self) -> Option<i64> {
        self.best_bid
    }

    pub fn best_ask_ticks(&self) -> Option<i64> {
        self.best_ask
    }

    pub fn best_ticks(&self, side: Side) -> Option<i64> {
        match side {
            Side::Buy => self.best_bid,
            Side::Sell => self.best_ask,
        }
    }

    pub fn get(&self, id: OrderId) -> Option<&Order> {
        self.orders.get(&id)
    }

    /// Identifier the next placement will receive.
    pub fn next_id(&self) -> OrderId {
        OrderId(self.ranks.len() as u64)
    }

    /// The `k`-th resting order counted in id (placement) order.
    pub fn nth_resting(&self, k: usize) -> Option<&Order> {
        if k >= self.n_tot() {
            return None;
        }
        let slot = self.ranks.select(k as u32)?;
        self.orders.get(&OrderId(slot as u64))
    }

    /// Resting orders in id order.
    pub fn resting(&self) -> impl Iterator<Item = &Order> + '_ {
        (0..self.n_tot()).filter_map(move |k| self.nth_resting(k))
    }

    /// Resting orders in id order; cheaper than [`OrderBook::resting`].
    pub fn orders(&self) -> impl Iterator<Item = &Order> + '_ {
        self.orders.values()
    }

    /// Order ids at one price level, oldest first.
    pub fn level(&self, side: Side, price_ticks: i64) -> impl Iterator<Item = OrderId> + '_ {
        let levels = match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        levels.get(&price_ticks).into_iter().flat_map(|q| q.iter().copied())
    }

    /// Number of occupied price levels on a side.
    pub fn level_count(&self, side: Side) -> usize {
        match side {
            Side::Buy => self.bids.len(),
            Side::Sell => self.asks.len(),
        }
    }

    pub fn quotes(&self) -> Result<Quotes, BookError> {
        let bid = self.best_bid.ok_or(BookError::EmptySide(Side::Buy))?;
        let ask = self.best_ask.ok_or(BookError::EmptySide(Side::Sell))?;
        let bid = self.grid.log_price(bid);
        let ask = self.grid.log_price(ask);
        Ok(Quotes { bid, ask, mid: 0.5 * (bid + ask), spread: ask - bid })
    }

    /// Fraction of resting orders on `side`.
    pub fn imbalance(&self, side: Side) -> Result<f64, BookError> {
        let tot = self.n_tot();
        if tot == 0 {
            return Err(BookError::EmptyBook);
        }
        Ok(self.depth(side) as f64 / tot as f64)
    }

    /// Rest a limit order at the back of its price level.
    pub fn place_limit(&mut self, side: Side, price_ticks: i64, now: u64) -> Result<OrderId, BookError> {
        if price_ticks <= 0 {
            return Err(BookError::InvalidPrice(self.grid.price(price_ticks)));
        }
        let crosses = match side {
            Side::Buy => self.best_ask.is_some_and(|a| price_ticks >= a),
            Side::Sell => self.best_bid.is_some_and(|b| price_ticks <= b),
        };
        if crosses {
            return Err(BookError::Crossing { side, price: price_ticks });
        }
        let log_price = self.grid.log_price(price_ticks);
        // With the opposite side empty there is no reference; zero marks
        // "undefined" and such orders never enter a cancellation sweep.
        let delta0 = match side {
            Side::Buy => self.best_ask.map_or(0.0, |a| self.grid.log_price(a) - log_price),
            Side::Sell => self.best_bid.map_or(0.0, |b| log_price - self.grid.log_price(b)),
        };
        let id = self.next_id();
        self.ranks.push(1);
        self.orders.insert(id, Order { id, side, price_ticks, log_price, t_placed: now, delta0 });
        match side {
            Side::Buy => {
                self.bids.entry(price_ticks).or_default().push_back(id);
                self.n_buy += 1;
                if self.best_bid.is_none_or(|b| price_ticks > b) {
                    self.best_bid = Some(price_ticks);
                }
            }
            Side::Sell => {
                self.asks.entry(price_ticks).or_default().push_back(id);
                self.n_sell += 1;
                if self.best_ask.is_none_or(|a| price_ticks < a) {
                    self.best_ask = Some(price_ticks);
                }
            }
        }
        Ok(id)
    }

    /// Fill the oldest order at the opposite best against an incoming
    /// market order of side `aggressor`.
    pub fn execute_market(&mut self, aggressor: Side, now: u64) -> Result<Removed, BookError> {
        let target = aggressor.opposite();
        let depth = self.depth(target);
        if depth == 0 {
            return Err(BookError::EmptySide(target));
        }
        if depth <= self.depth_floor {
            return Err(BookError::DepthFloor { side: target, depth });
        }
        let best = self.best_ticks(target).ok_or(BookError::EmptySide(target))?;
        let levels = match target {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        };
        let id = *levels.get(&best).and_then(|q| q.front()).ok_or(BookError::EmptySide(target))?;
        self.remove_order(id, now)
    }

    /// Cancel a resting order, respecting the depth floor.
    pub fn cancel_order(&mut self, id: OrderId, now: u64) -> Result<Removed, BookError> {
        let side = self.orders.get(&id).ok_or(BookError::NotFound(id))?.side;
        let depth = self.depth(side);
        if depth <= self.depth_floor {
            return Err(BookError::DepthFloor { side, depth });
        }
        self.remove_order(id, now)
    }

    /// Remove an order regardless of the depth floor (used for log replay).
    pub fn remove_order(&mut self, id: OrderId, now: u64) -> Result<Removed, BookError> {
        let order = self.orders.remove(&id).ok_or(BookError::NotFound(id))?;
        self.ranks.add(id.0 as usize, -1);
        let (levels, count) = match order.side {
            Side::Buy => (&mut self.bids, &mut self.n_buy),
            Side::Sell => (&mut self.asks, &mut self.n_sell),
        };
        *count -= 1;
        let queue = levels.get_mut(&order.price_ticks).expect("resting order has a level");
        let pos = queue.iter().position(|&q| q == id).expect("resting order is queued");
        queue.remove(pos);
        if queue.is_empty() {
            levels.remove(&order.price_ticks);
            match order.side {
                Side::Buy if self.best_bid == Some(order.price_ticks) => {
                    self.best_bid = self.bids.keys().next_back().copied();
                }
                Side::Sell if self.best_ask == Some(order.price_ticks) => {
                    self.best_ask = self.asks.keys().next().copied();
                }
                _ => {}
            }
        }
        Ok(Removed { order, at: now })
    }

    /// Check every structural invariant; returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut counts = [0usize; 2];
        for (side, levels) in [(Side::Buy, &self.bids), (Side::Sell, &self.asks)] {
            for (&price, queue) in levels {
                if queue.is_empty() {
                    return Err(format!("empty {side} level at {price}"));
                }
                let mut last = None;
                for id in queue {
                    let o = self.orders.get(id).ok_or_else(|| format!("queued {id} not stored"))?;
                    if o.side != side || o.price_ticks != price {
                        return Err(format!("{id} queued at wrong level"));
                    }
                    if last.is_some_and(|l| l >= *id) {
                        return Err(format!("fifo violated at {side} {price}"));
                    }
                    last = Some(*id);
                }
                counts[(side == Side::Sell) as usize] += queue.len();
            }
        }
        if counts != [self.n_buy, self.n_sell] {
            return Err(format!("counts {counts:?} vs cached ({}, {})", self.n_buy, self.n_sell));
        }
        if counts[0] + counts[1] != self.orders.len() {
            return Err("stored orders differ from queued orders".into());
        }
        if self.ranks.prefix(self.ranks.len()) as usize != self.orders.len() {
            return Err("rank index out of sync".into());
        }
        if self.best_bid != self.bids.keys().next_back().copied() {
            return Err("stale best bid".into());
        }
        if self.best_ask != self.asks.keys().next().copied() {
            return Err("stale best ask".into());
        }
        if let (Some(b), Some(a)) = (self.best_bid, self.best_ask) {
            if b >= a {
                return Err(format!("crossed book: bid {b} ask {a}"));
            }
        }
        Ok(())
    }
}
