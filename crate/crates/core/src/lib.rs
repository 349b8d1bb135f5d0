//! Order-flow driven limit order book simulation.
//!
//! Order signs follow a long-memory process, limit prices are drawn from a
//! Student distribution relative to the same best, and resting orders are
//! cancelled with a probability that depends on their distance to the
//! opposite best, the book imbalance and the book size. The crate simulates
//! the resulting continuous double auction, calibrates the model from
//! order-event logs, and provides the tail and long-memory estimators used to
//! compare simulated and real price series.

pub mod book;
pub mod calib;
pub mod cli;
pub mod config;
pub mod events;
pub mod flow;
pub mod report;
pub mod stats;
pub mod sim;
