//! Composable protocol layers for actor-style message passing.
//!
//! Messaging guarantees (framing, ordering, reliable delivery, slicing,
//! failure detection) are implemented as layers that can be stacked on top
//! of any transport. The pieces:
//!
//! - [`wire`]: identities, messages, fixed-size header codecs.
//! - [`layers`]: the layers and their composition into a [`LayerStack`].
//! - [`transport`]: TCP, UDP and in-memory transports.
//! - [`broker`]: endpoint and accept brokers driven by a [`Multiplexer`].
//! - [`simnet`]: a seeded, virtual-time lossy link.
//! - [`bench`]: the experiment harness behind the `bench` binary.
//!
//! [`LayerStack`]: layers::LayerStack
//! [`Multiplexer`]: broker::Multiplexer

pub mod bench;
pub mod broker;
pub mod layers;
pub mod simnet;
pub mod time;
pub mod transport;
pub mod wire;

pub use layers::{LayerStack, Preset, StackConfig};
pub use time::{Clock, ManualClock, SystemClock, Time};
pub use transport::{Transport, UnitKind};
pub use wire::{ActorId, Message, NodeId};
