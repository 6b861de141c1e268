//! Deterministic in-process network simulation.
//!
//! A [`Link`] decides, with a seeded RNG, whether and when each unit arrives
//! at the far end. A [`VirtualClock`] orders deliveries in virtual time and
//! a [`SimPair`] drives two endpoint brokers over one link, interleaving
//! deliveries with the brokers' layer timers in global timestamp order.

mod clock;
mod driver;
mod link;

pub use clock::VirtualClock;
pub use driver::{SimError, SimPair, SimStats};
pub use link::{Direction, Link, LinkMode, LinkModel, LinkStats};
