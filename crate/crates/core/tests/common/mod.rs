#![allow(dead_code)]

use lobflow::book::{BookError, OrderBook, OrderId, Side, TickGrid};
use rand::Rng;

/// One randomized book operation.
#[derive(Debug, Clone, Copy)]
pub enum Op {
    /// Limit order `offset` ticks behind the opposite best; negative offsets
    /// try to cross.
    Limit { side: Side, offset: i64 },
    Market { side: Side },
    /// Cancel the `k`-th resting order (mod book size), honouring the floor.
    Cancel { k: usize },
    /// Remove the `k`-th resting order regardless of the floor.
    Remove { k: usize },
}

pub fn random_op<R: Rng>(rng: &mut R, n_tot: usize) -> Op {
    let side = if rng.random::<bool>() { Side::Buy } else { Side::Sell };
    // cancel more as the book fills so it stays around a few hundred orders
    let p_cancel = (n_tot as f64 / 400.0).min(0.6);
    let u: f64 = rng.random();
    if u < p_cancel {
        if rng.random::<f64>() < 0.9 {
            Op::Cancel { k: rng.random_range(0..1 << 20) }
        } else {
            Op::Remove { k: rng.random_range(0..1 << 20) }
        }
    } else if u < p_cancel + 0.2 {
        Op::Market { side }
    } else {
        Op::Limit { side, offset: rng.random_range(-2..25) }
    }
}

/// Naive reference book: every resting order in placement order.
#[derive(Debug, Default)]
pub struct Shadow {
    pub orders: Vec<(u64, Side, i64)>,
    pub next: u64,
}

impl Shadow {
    pub fn best(&self, side: Side) -> Option<i64> {
        let prices = self.orders.iter().filter(|o| o.1 == side).map(|o| o.2);
        match side {
            Side::Buy => prices.max(),
            Side::Sell => prices.min(),
        }
    }

    pub fn depth(&self, side: Side) -> usize {
        self.orders.iter().filter(|o| o.1 == side).count()
    }
}

const BASE: i64 = 1000;

/// Apply `op` to both books and compare. Returns the first disagreement.
pub fn apply(book: &mut OrderBook, shadow: &mut Shadow, op: Op, now: u64) -> Result<(), String> {
    let floor = book.depth_floor();
    match op {
        Op::Limit { side, offset } => {
            let price = match side {
                Side::Buy => shadow.best(Side::Sell).or(shadow.best(Side::Buy).map(|b| b + 1)).unwrap_or(BASE) - 1 - offset,
                Side::Sell => shadow.best(Side::Buy).or(shadow.best(Side::Sell).map(|a| a - 1)).unwrap_or(BASE) + 1 + offset,
            }
            .max(1);
            let crosses = match side {
                Side::Buy => shadow.best(Side::Sell).is_some_and(|a| price >= a),
                Side::Sell => shadow.best(Side::Buy).is_some_and(|b| price <= b),
            };
            match (book.place_limit(side, price, now), crosses) {
                (Err(BookError::Crossing { .. }), true) => {}
                (Ok(id), false) if id == OrderId(shadow.next) => {
                    shadow.orders.push((shadow.next, side, price));
                    shadow.next += 1;
                }
                (got, _) => return Err(format!("{op:?} at {price}: got {got:?}, crossing {crosses}")),
            }
        }
        Op::Market { side } => {
            let target = side.opposite();
            let depth = shadow.depth(target);
            let expect = shadow.best(target).map(|p| {
                let i = shadow.orders.iter().position(|o| o.1 == target && o.2 == p).unwrap();
                (i, shadow.orders[i].0)
            });
            match (book.execute_market(side, now), expect) {
                (Err(BookError::EmptySide(_)), None) => {}
                (Err(BookError::DepthFloor { .. }), Some(_)) if depth <= floor => {}
                (Ok(r), Some((i, id))) if depth > floor && r.order.id == OrderId(id) => {
                    shadow.orders.remove(i);
                }
                (got, _) => return Err(format!("{op:?}: got {got:?}, expected {expect:?}, depth {depth}")),
            }
        }
        Op::Cancel { k } | Op::Remove { k } => {
            if shadow.orders.is_empty() {
                return Ok(());
            }
            let i = k % shadow.orders.len();
            let (id, side, _) = shadow.orders[i];
            let honour = matches!(op, Op::Cancel { .. });
            let refused = honour && shadow.depth(side) <= floor;
            let got = if honour { book.cancel_order(OrderId(id), now) } else { book.remove_order(OrderId(id), now) };
            match got {
                Err(BookError::DepthFloor { .. }) if refused => {}
                Ok(r) if !refused && r.order.id == OrderId(id) && r.at == now => {
                    shadow.orders.remove(i);
                }
                got => return Err(format!("{op:?} on {id}: got {got:?}, refused {refused}")),
            }
        }
    }
    compare(book, shadow)
}

pub fn compare(book: &OrderBook, shadow: &Shadow) -> Result<(), String> {
    book.check_invariants()?;
    if book.n_buy() != shadow.depth(Side::Buy) || book.n_sell() != shadow.depth(Side::Sell) {
        return Err(format!("counts ({}, {}) vs shadow", book.n_buy(), book.n_sell()));
    }
    if book.best_bid_ticks() != shadow.best(Side::Buy) || book.best_ask_ticks() != shadow.best(Side::Sell) {
        return Err("best quotes differ from shadow".into());
    }
    if let (Some(b), Some(a)) = (book.best_bid_ticks(), book.best_ask_ticks()) {
        if b >= a {
            return Err(format!("crossed: {b} >= {a}"));
        }
    }
    // id order of the resting orders matches placement order
    if !book.orders().map(|o| o.id.0).eq(shadow.orders.iter().map(|o| o.0)) {
        return Err("resting orders differ from shadow".into());
    }
    if book.n_tot() <= 64 && !book.resting().map(|o| o.id).eq(book.orders().map(|o| o.id)) {
        return Err("rank index disagrees with the order map".into());
    }
    Ok(())
}

pub fn new_book(floor: usize) -> OrderBook {
    OrderBook::new(TickGrid::new(1.0).unwrap()).with_depth_floor(floor)
}

/// Drive `n` random operations, stopping at the first disagreement.
pub fn drive<R: Rng>(rng: &mut R, n: usize, floor: usize) -> Result<(), String> {
    let mut book = new_book(floor);
    let mut shadow = Shadow::default();
    for t in 0..n {
        let op = random_op(rng, book.n_tot());
        apply(&mut book, &mut shadow, op, t as u64).map_err(|e| format!("op {t}: {e}"))?;
    }
    Ok(())
}
