use super::stack::StackError;
use super::{HeartbeatLayer, LayerStack, OrderingLayer, ReliabilityLayer, SlicingLayer};
use crate::transport::UnitKind;
use crate::wire::{OrderingHeader, ReliabilityHeader};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

/// Tunables shared by the preset stacks.
#[derive(Debug, Clone)]
pub struct StackConfig {
    pub rto: Duration,
    pub max_pending: usize,
    pub delivery_timeout: Duration,
    /// Datagram size budget used by the slicing layer, all headers included.
    pub mtu: usize,
    /// Adds an outermost heartbeat layer to datagram stacks.
    pub heartbeat: bool,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            rto: ReliabilityLayer::DEFAULT_RTO,
            max_pending: OrderingLayer::DEFAULT_MAX_PENDING,
            delivery_timeout: OrderingLayer::DEFAULT_DELIVERY_TIMEOUT,
            mtu: SlicingLayer::DEFAULT_MTU,
            heartbeat: false,
        }
    }
}

/// Named layer compositions, outermost layer first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Payload only.
    Raw,
    /// BASP framing.
    Basp,
    /// ordering over raw payload.
    Ordering,
    /// ordering, BASP.
    OrderingBasp,
    /// reliability, BASP.
    Rudp,
    /// reliability, ordering, BASP.
    Roudp,
    /// reliability, ordering, slicing, BASP.
    UdpDefault,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Raw,
        Preset::Basp,
        Preset::Ordering,
        Preset::OrderingBasp,
        Preset::Rudp,
        Preset::Roudp,
        Preset::UdpDefault,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Raw => "raw",
            Preset::Basp => "basp",
            Preset::Ordering => "ordering",
            Preset::OrderingBasp => "ordering_basp",
            Preset::Rudp => "rudp",
            Preset::Roudp => "roudp",
            Preset::UdpDefault => "udp",
        }
    }

    pub fn supports(self, kind: UnitKind) -> bool {
        kind == UnitKind::Datagram || matches!(self, Preset::Raw | Preset::Basp)
    }

    pub fn build(self, kind: UnitKind, cfg: &StackConfig) -> Result<LayerStack, StackError> {
        let mut b = LayerStack::builder(kind);
        let mut outer = 0;
        if cfg.heartbeat && kind == UnitKind::Datagram {
            b = b.layer(HeartbeatLayer::default());
            outer += 1;
        }
        if matches!(self, Preset::Rudp | Preset::Roudp | Preset::UdpDefault) {
            b = b.layer(ReliabilityLayer::new(cfg.rto));
            outer += ReliabilityHeader::LEN;
        }
        if matches!(self, Preset::Ordering | Preset::OrderingBasp | Preset::Roudp | Preset::UdpDefault) {
            b = b.layer(OrderingLayer::new(cfg.max_pending, cfg.delivery_timeout));
            outer += OrderingHeader::LEN;
        }
        if self == Preset::UdpDefault {
            b = b.layer(SlicingLayer::new(cfg.mtu - outer));
        }
        if self != Preset::Raw && self != Preset::Ordering {
            b = b.basp();
        }
        b.build()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown stack `{s}`"))
    }
}
