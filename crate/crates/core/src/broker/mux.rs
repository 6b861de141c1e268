use super::accept::DynBroker;
use super::timers::{TimerId, TimerQueue};
use super::{AcceptPolicy, Behavior, BehaviorCx, BrokerEvent, EndpointBroker, TcpAcceptBroker, UdpAcceptBroker};
use crate::layers::LayerStack;
use crate::time::{Clock, SystemClock, Time};
use crate::transport::{tcp_connect, tcp_listen, udp_bind, Transport, TransportError};
use crate::wire::Message;
use mio::{Events, Interest, Poll, Token, Waker};
use std::collections::{HashMap, VecDeque};
use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

const WAKER: Token = Token(0);
const GRANULARITY: Duration = Duration::from_millis(1);

/// Identifies an endpoint broker within its multiplexer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BrokerId(u64);

#[derive(Debug, thiserror::Error)]
pub enum MuxError {
    #[error("poller failure: {0}")]
    Poll(#[from] io::Error),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("no broker with id {0:?}")]
    UnknownBroker(BrokerId),
}

type Job = Box<dyn FnOnce(&mut Multiplexer) + Send>;

/// Work injected into a multiplexer from other threads.
pub enum Command {
    Send { to: BrokerId, msg: Message },
    Close(BrokerId),
    Exec(Job),
    Shutdown,
}

/// Thread-safe handle for injecting commands into a running multiplexer.
#[derive(Clone)]
pub struct MuxHandle {
    mailbox: Arc<Mutex<VecDeque<Command>>>,
    waker: Arc<Waker>,
}

impl MuxHandle {
    pub fn submit(&self, command: Command) {
        self.mailbox.lock().expect("mailbox poisoned").push_back(command);
        if let Err(e) = self.waker.wake() {
            log::error!("failed to wake multiplexer: {e}");
        }
    }

    /// Sends `msg` through the broker's stack on the loop thread.
    pub fn send(&self, to: BrokerId, msg: Message) {
        self.submit(Command::Send { to, msg });
    }

    pub fn close(&self, id: BrokerId) {
        self.submit(Command::Close(id));
    }

    /// Runs `f` on the loop thread.
    pub fn exec(&self, f: impl FnOnce(&mut Multiplexer) + Send + 'static) {
        self.submit(Command::Exec(Box::new(f)));
    }

    pub fn shutdown(&self) {
        self.submit(Command::Shutdown);
    }
}

enum Slot {
    Endpoint(DynBroker),
    TcpAccept(TcpAcceptBroker),
    UdpAccept(UdpAcceptBroker),
}

impl Slot {
    fn next_deadline(&self) -> Option<Time> {
        match self {
            Slot::Endpoint(b) => b.next_deadline(),
            Slot::TcpAccept(_) => None,
            Slot::UdpAccept(a) => a.next_deadline(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Route {
    Slot(Token),
    UdpPeer(Token, SocketAddr),
}

enum TimerTarget {
    Slot(Token),
    Job(Job),
}

/// Single-threaded event loop owning a set of brokers.
///
/// Each turn polls socket readiness (waiting at most until the nearest
/// timer, rounded up to 1 ms), dispatches readiness to the owning brokers,
/// drains the command mailbox and fires due timers.
pub struct Multiplexer {
    poll: Poll,
    events: Events,
    waker: Arc<Waker>,
    mailbox: Arc<Mutex<VecDeque<Command>>>,
    clock: Arc<dyn Clock>,
    slots: HashMap<Token, Slot>,
    next_token: usize,
    routes: HashMap<BrokerId, Route>,
    udp_peers: HashMap<(Token, SocketAddr), BrokerId>,
    next_id: u64,
    timers: TimerQueue<TimerTarget>,
    armed: HashMap<Token, (TimerId, Time)>,
    shutdown: bool,
}

impl Multiplexer {
    pub fn new() -> Result<Multiplexer, MuxError> {
        Multiplexer::with_clock(Arc::new(SystemClock::new()))
    }

    /// Uses `clock` as the time source for timers, e.g. a
    /// [`ManualClock`](crate::time::ManualClock) in tests.
    pub fn with_clock(clock: Arc<dyn Clock>) -> Result<Multiplexer, MuxError> {
        let poll = Poll::new()?;
        let waker = Arc::new(Waker::new(poll.registry(), WAKER)?);
        Ok(Multiplexer {
            poll,
            events: Events::with_capacity(256),
            waker,
            mailbox: Arc::default(),
            clock,
            slots: HashMap::new(),
            next_token: 1,
            routes: HashMap::new(),
            udp_peers: HashMap::new(),
            next_id: 0,
            timers: TimerQueue::new(),
            armed: HashMap::new(),
            shutdown: false,
        })
    }

    pub fn handle(&self) -> MuxHandle {
        MuxHandle {
            mailbox: self.mailbox.clone(),
            waker: self.waker.clone(),
        }
    }

    pub fn now(&self) -> Time {
        self.clock.now()
    }

    pub fn is_shutdown(&self) -> bool {
        self.shutdown
    }

    /// Number of endpoint brokers, including ones spawned by accept brokers.
    pub fn broker_count(&self) -> usize {
        self.routes.len()
    }

    /// Registers an endpoint broker for an established transport.
    pub fn add_endpoint(
        &mut self,
        transport: Box<dyn Transport>,
        stack: LayerStack,
        behavior: Box<dyn Behavior>,
    ) -> Result<BrokerId, MuxError> {
        let broker = EndpointBroker::new(transport, stack, behavior);
        self.insert_endpoint(broker)
    }

    /// Connects over TCP and registers a broker for the connection. On
    /// failure the behavior receives [`BrokerEvent::ConnectFailed`] and
    /// `None` is returned.
    pub fn connect_tcp(
        &mut self,
        addr: SocketAddr,
        stack: LayerStack,
        mut behavior: Box<dyn Behavior>,
    ) -> Option<BrokerId> {
        match tcp_connect(addr) {
            Ok(transport) => match self.add_endpoint(Box::new(transport), stack, behavior) {
                Ok(id) => Some(id),
                Err(e) => {
                    log::warn!("failed to register connection to {addr}: {e}");
                    None
                }
            },
            Err(e) => {
                let mut outbox = Vec::new();
                let mut cx = BehaviorCx::new(self.now(), &mut outbox);
                behavior.on_event(BrokerEvent::ConnectFailed(e.to_string()), &mut cx);
                None
            }
        }
    }

    /// Listens for TCP connections; `policy` builds a broker for each.
    pub fn listen_tcp(&mut self, addr: SocketAddr, policy: impl AcceptPolicy) -> Result<SocketAddr, MuxError> {
        let listener = tcp_listen(addr)?;
        let mut acceptor = TcpAcceptBroker::new(listener, policy);
        let local = acceptor.local_addr()?;
        let token = self.token();
        self.poll
            .registry()
            .register(acceptor.listener_mut(), token, Interest::READABLE)?;
        self.slots.insert(token, Slot::TcpAccept(acceptor));
        Ok(local)
    }

    /// Binds a UDP socket and spawns a broker per datagram source.
    pub fn bind_udp(&mut self, addr: SocketAddr, policy: impl AcceptPolicy) -> Result<SocketAddr, MuxError> {
        let mut socket = udp_bind(addr)?;
        let local = socket.local_addr()?;
        let token = self.token();
        self.poll.registry().register(&mut socket, token, Interest::READABLE)?;
        self.slots
            .insert(token, Slot::UdpAccept(UdpAcceptBroker::new(socket, policy)));
        Ok(local)
    }

    /// Runs `f` at or after `deadline` on the loop thread.
    pub fn set_timer(&mut self, deadline: Time, f: impl FnOnce(&mut Multiplexer) + Send + 'static) -> TimerId {
        self.timers.insert(deadline, TimerTarget::Job(Box::new(f)))
    }

    pub fn cancel_timer(&mut self, id: TimerId) -> bool {
        self.timers.cancel(id).is_some()
    }

    pub fn send(&mut self, to: BrokerId, msg: Message) -> Result<(), MuxError> {
        let now = self.now();
        self.with_broker(to, |b| b.send(msg, now))
    }

    pub fn close(&mut self, id: BrokerId) -> Result<(), MuxError> {
        let now = self.now();
        self.with_broker(id, |b| b.close(now))
    }

    /// Inspects a broker. Only meaningful on the loop thread.
    pub fn broker(&self, id: BrokerId) -> Option<&DynBroker> {
        match *self.routes.get(&id)? {
            Route::Slot(token) => match self.slots.get(&token)? {
                Slot::Endpoint(b) => Some(b),
                _ => None,
            },
            Route::UdpPeer(token, addr) => match self.slots.get(&token)? {
                Slot::UdpAccept(a) => a.peer(&addr),
                _ => None,
            },
        }
    }

    pub fn broker_ids(&self) -> Vec<BrokerId> {
        let mut ids: Vec<BrokerId> = self.routes.keys().copied().collect();
        ids.sort();
        ids
    }

    /// Runs until a shutdown command arrives.
    pub fn run(&mut self) -> Result<(), MuxError> {
        self.adopt_all();
        while !self.shutdown {
            self.turn(None)?;
        }
        Ok(())
    }

    /// Moves the loop onto its own thread.
    pub fn spawn(mut self) -> (MuxHandle, JoinHandle<Result<(), MuxError>>) {
        let handle = self.handle();
        let join = std::thread::Builder::new()
            .name("multiplexer".into())
            .spawn(move || self.run())
            .expect("spawn multiplexer thread");
        (handle, join)
    }

    /// One iteration of the loop, blocking for at most `max_wait` (or until
    /// the next timer if `None`).
    pub fn turn(&mut self, max_wait: Option<Duration>) -> Result<(), MuxError> {
        let now = self.now();
        let until_timer = self.timers.next_deadline().map(|d| round_up(d.saturating_sub(now)));
        let timeout = match (until_timer, max_wait) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Err(e) = self.poll.poll(&mut self.events, timeout) {
            if e.kind() != io::ErrorKind::Interrupted {
                return Err(e.into());
            }
        }
        let ready: Vec<(Token, bool, bool)> = self
            .events
            .iter()
            .map(|e| (e.token(), e.is_readable() || e.is_read_closed() || e.is_error(), e.is_writable()))
            .collect();
        for (token, readable, writable) in ready {
            if token != WAKER {
                self.dispatch(token, readable, writable);
            }
        }
        self.drain_mailbox();
        self.fire_timers();
        Ok(())
    }

    fn token(&mut self) -> Token {
        let token = Token(self.next_token);
        self.next_token += 1;
        token
    }

    fn broker_id(&mut self) -> BrokerId {
        let id = BrokerId(self.next_id);
        self.next_id += 1;
        id
    }

    fn insert_endpoint(&mut self, mut broker: DynBroker) -> Result<BrokerId, MuxError> {
        let token = self.token();
        if let Some(source) = broker.transport_mut().source() {
            self.poll
                .registry()
                .register(source, token, Interest::READABLE | Interest::WRITABLE)?;
        }
        broker.adopt();
        let id = self.broker_id();
        self.slots.insert(token, Slot::Endpoint(broker));
        self.routes.insert(id, Route::Slot(token));
        self.rearm(token);
        Ok(id)
    }

    fn adopt_all(&mut self) {
        for slot in self.slots.values_mut() {
            match slot {
                Slot::Endpoint(b) => b.adopt(),
                Slot::UdpAccept(a) => a.adopt(),
                Slot::TcpAccept(_) => {}
            }
        }
    }

    fn dispatch(&mut self, token: Token, readable: bool, writable: bool) {
        let now = self.now();
        let mut accepted = Vec::new();
        let mut new_peers = Vec::new();
        match self.slots.get_mut(&token) {
            Some(Slot::Endpoint(b)) => {
                if writable {
                    b.on_writable(now);
                }
                if readable {
                    b.on_readable(now);
                }
            }
            Some(Slot::TcpAccept(a)) => accepted = a.on_readable(),
            Some(Slot::UdpAccept(a)) => new_peers = a.on_readable(now),
            None => return,
        }
        for broker in accepted {
            if let Err(e) = self.insert_endpoint(broker) {
                log::warn!("failed to register accepted connection: {e}");
            }
        }
        for addr in new_peers {
            let id = self.broker_id();
            self.routes.insert(id, Route::UdpPeer(token, addr));
            self.udp_peers.insert((token, addr), id);
        }
        self.rearm(token);
    }

    fn with_broker<R>(&mut self, id: BrokerId, f: impl FnOnce(&mut DynBroker) -> R) -> Result<R, MuxError> {
        let route = *self.routes.get(&id).ok_or(MuxError::UnknownBroker(id))?;
        let (token, result) = match route {
            Route::Slot(token) => match self.slots.get_mut(&token) {
                Some(Slot::Endpoint(b)) => (token, f(b)),
                _ => return Err(MuxError::UnknownBroker(id)),
            },
            Route::UdpPeer(token, addr) => match self.slots.get_mut(&token) {
                Some(Slot::UdpAccept(a)) => match a.peer_mut(&addr) {
                    Some(b) => (token, f(b)),
                    None => return Err(MuxError::UnknownBroker(id)),
                },
                _ => return Err(MuxError::UnknownBroker(id)),
            },
        };
        self.rearm(token);
        Ok(result)
    }

    fn drain_mailbox(&mut self) {
        loop {
            let command = self.mailbox.lock().expect("mailbox poisoned").pop_front();
            let Some(command) = command else { break };
            match command {
                Command::Send { to, msg } => {
                    if let Err(e) = self.send(to, msg) {
                        log::warn!("send command dropped: {e}");
                    }
                }
                Command::Close(id) => {
                    if let Err(e) = self.close(id) {
                        log::warn!("close command dropped: {e}");
                    }
                }
                Command::Exec(job) => job(self),
                Command::Shutdown => self.shutdown = true,
            }
        }
    }

    fn fire_timers(&mut self) {
        let now = self.now();
        for (id, target) in self.timers.pop_due(now) {
            match target {
                TimerTarget::Slot(token) => {
                    if self.armed.get(&token).is_some_and(|&(armed, _)| armed == id) {
                        self.armed.remove(&token);
                    }
                    match self.slots.get_mut(&token) {
                        Some(Slot::Endpoint(b)) => b.on_timer(now),
                        Some(Slot::UdpAccept(a)) => a.on_timer(now),
                        _ => {}
                    }
                    self.rearm(token);
                }
                TimerTarget::Job(job) => job(self),
            }
        }
    }

    /// Keeps exactly one timer armed per slot, at the slot's next deadline.
    fn rearm(&mut self, token: Token) {
        let wanted = self.slots.get(&token).and_then(Slot::next_deadline);
        match (self.armed.get(&token).copied(), wanted) {
            (Some((_, at)), Some(want)) if at == want => {}
            (current, wanted) => {
                if let Some((id, _)) = current {
                    self.timers.cancel(id);
                    self.armed.remove(&token);
                }
                if let Some(at) = wanted {
                    let id = self.timers.insert(at, TimerTarget::Slot(token));
                    self.armed.insert(token, (id, at));
                }
            }
        }
    }
}

fn round_up(d: Duration) -> Duration {
    let ms = d.as_nanos().div_ceil(GRANULARITY.as_nanos());
    GRANULARITY * ms as u32
}
