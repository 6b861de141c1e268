//! Brokers: actor-like wrappers binding a transport to a protocol policy.
//!
//! An [`EndpointBroker`] owns one transport and one [`LayerStack`] and hands
//! every decoded message to its [`Behavior`]. Accept brokers spawn endpoint
//! brokers for new connections or new datagram sources. A [`Multiplexer`]
//! runs all of them on one event-loop thread.

mod accept;
mod endpoint;
mod mux;
mod timers;

pub use accept::{AcceptPolicy, TcpAcceptBroker, UdpAcceptBroker};
pub use endpoint::{BrokerStats, EndpointBroker};
pub use mux::{BrokerId, Command, MuxError, MuxHandle, Multiplexer};
pub use timers::{TimerId, TimerQueue};

use crate::layers::LayerError;
use crate::time::Time;
use crate::wire::Message;
use std::thread::ThreadId;

/// Something a broker reports to its behavior besides messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrokerEvent {
    /// The peer closed the connection or a write found it gone.
    PeerClosed,
    /// Establishing the connection failed.
    ConnectFailed(String),
    /// A message could not be sent through the stack.
    SendFailed(LayerError),
    /// The failure detector suspects the peer.
    PeerSuspected,
    /// The outbound queue crossed the write watermark.
    WriteBacklog(usize),
}

/// Handle given to a behavior while it runs.
pub struct BehaviorCx<'a> {
    now: Time,
    outbox: &'a mut Vec<Message>,
}

impl<'a> BehaviorCx<'a> {
    pub(crate) fn new(now: Time, outbox: &'a mut Vec<Message>) -> Self {
        BehaviorCx { now, outbox }
    }

    pub fn now(&self) -> Time {
        self.now
    }

    /// Queues a message to the broker's peer. It is sent once the behavior
    /// returns.
    pub fn send(&mut self, msg: Message) {
        self.outbox.push(msg);
    }
}

/// Application logic attached to an endpoint broker.
///
/// A behavior runs on the multiplexer thread; blocking in it stalls every
/// broker of that multiplexer.
pub trait Behavior: Send + 'static {
    fn on_message(&mut self, msg: Message, cx: &mut BehaviorCx<'_>);

    fn on_event(&mut self, event: BrokerEvent, _cx: &mut BehaviorCx<'_>) {
        log::debug!("unhandled broker event: {event:?}");
    }
}

impl Behavior for Box<dyn Behavior> {
    fn on_message(&mut self, msg: Message, cx: &mut BehaviorCx<'_>) {
        (**self).on_message(msg, cx)
    }

    fn on_event(&mut self, event: BrokerEvent, cx: &mut BehaviorCx<'_>) {
        (**self).on_event(event, cx)
    }
}

/// Adapts a closure into a [`Behavior`] that ignores events.
pub struct FnBehavior<F>(pub F);

impl<F> Behavior for FnBehavior<F>
where
    F: FnMut(Message, &mut BehaviorCx<'_>) + Send + 'static,
{
    fn on_message(&mut self, msg: Message, cx: &mut BehaviorCx<'_>) {
        (self.0)(msg, cx)
    }
}

/// Asserts that broker state is only touched from the thread that adopted
/// it.
#[derive(Debug, Default)]
pub(crate) struct OwnerCheck {
    owner: Option<ThreadId>,
}

impl OwnerCheck {
    pub fn adopt(&mut self) {
        self.owner = Some(std::thread::current().id());
    }

    pub fn check(&mut self) {
        let current = std::thread::current().id();
        let owner = *self.owner.get_or_insert(current);
        assert_eq!(owner, current, "broker state touched outside its owning loop");
    }
}
