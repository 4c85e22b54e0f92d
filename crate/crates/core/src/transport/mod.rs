//! Rank-addressed messaging over a full TCP mesh.
//!
//! A [`ProcessGroup`] holds one connection per peer. Messages are byte
//! strings matched exactly by `(source rank, tag)` and delivered in send
//! order per `(source, destination, tag)`. Bodies shorter than the phase
//! threshold go eagerly; longer ones use a request-to-send / clear-to-send
//! handshake so the receiver has posted a matching receive before any body
//! bytes move.
//!
//! Encrypted variants seal the body into a [`Frame`](crate::aead::Frame)
//! before it is queued and open it on the receiving side. For non-blocking
//! receives, decryption happens inside [`RecvRequest::wait`].

mod peer;
mod request;
mod roster;
pub mod wire;

use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::aead::AeadProvider;
use peer::{Peer, PeerThreads, WireCounters};

pub use peer::WireStats;
pub use request::{waitall, RecvRequest, Request, SendRequest};
pub use roster::Roster;

/// Default eager/rendezvous switch point, in plaintext bytes.
pub const DEFAULT_PHASE_THRESHOLD: usize = 128 * 1024;

/// Tags at or above this value are used by the library itself.
pub const RESERVED_TAG_BASE: u32 = 0xFFFF_FF00;
pub(crate) const TAG_BARRIER: u32 = u32::MAX;

const HELLO_MAGIC: u32 = 0x534d_5347; // "SMSG"

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("invalid roster: {0}")]
    Roster(String),
    #[error("startup failed: rank {rank} unreachable: {reason}")]
    Unreachable { rank: usize, reason: String },
    #[error("startup failed: {0}")]
    Startup(String),
    #[error("rank {rank} is not a valid peer of rank {me} in a group of {size}")]
    InvalidRank { rank: usize, me: usize, size: usize },
    #[error("connection to rank {rank} lost: {reason}")]
    ConnectionLost { rank: usize, reason: String },
    #[error("protocol violation from rank {rank}: {msg}")]
    Protocol { rank: usize, msg: String },
    #[error("message of {len} bytes exceeds the 32-bit length field")]
    TooLarge { len: usize },
    #[error("message from rank {rank} failed authentication")]
    Integrity { rank: usize },
    #[error("aead: {0}")]
    Aead(String),
}

impl TransportError {
    pub fn is_integrity(&self) -> bool {
        matches!(self, TransportError::Integrity { .. })
    }
}

#[derive(Clone, Debug)]
pub struct GroupConfig {
    /// Plaintext length at which sends switch to rendezvous.
    pub phase_threshold: usize,
    /// How long startup waits for every peer to connect.
    pub connect_timeout: Duration,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            phase_threshold: DEFAULT_PHASE_THRESHOLD,
            connect_timeout: Duration::from_secs(30),
        }
    }
}

pub struct ProcessGroup {
    rank: usize,
    size: usize,
    config: GroupConfig,
    peers: Vec<Option<Arc<Peer>>>,
    threads: Vec<PeerThreads>,
    counters: Arc<WireCounters>,
}

impl std::fmt::Debug for ProcessGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessGroup")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .finish()
    }
}

impl ProcessGroup {
    /// Binds this rank's roster address and connects to every peer.
    pub fn init(rank: usize, roster: &Roster, config: GroupConfig) -> Result<Self, TransportError> {
        roster.check_rank(rank)?;
        let listener = TcpListener::bind(roster.addr(rank)).map_err(|e| {
            TransportError::Startup(format!("rank {rank} cannot bind {}: {e}", roster.addr(rank)))
        })?;
        Self::with_listener(rank, roster, listener, config)
    }

    /// Like [`init`](Self::init) but with an already-bound listener.
    pub fn with_listener(
        rank: usize,
        roster: &Roster,
        listener: TcpListener,
        config: GroupConfig,
    ) -> Result<Self, TransportError> {
        roster.check_rank(rank)?;
        let size = roster.len();
        let deadline = Instant::now() + config.connect_timeout;
        let mut streams: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();

        // lower ranks accept, higher ranks connect
        for (peer, slot) in streams.iter_mut().enumerate().take(rank) {
            let mut s = connect_with_retry(peer, roster.addr(peer), deadline)?;
            write_hello(&mut s, rank, size).map_err(|e| TransportError::Unreachable {
                rank: peer,
                reason: e.to_string(),
            })?;
            *slot = Some(s);
        }
        let expected = size - rank - 1;
        listener
            .set_nonblocking(true)
            .map_err(|e| TransportError::Startup(e.to_string()))?;
        let mut accepted = 0;
        while accepted < expected {
            match listener.accept() {
                Ok((mut s, _)) => {
                    s.set_nonblocking(false)
                        .map_err(|e| TransportError::Startup(e.to_string()))?;
                    s.set_read_timeout(Some(Duration::from_secs(10))).ok();
                    let (peer, their_size) = read_hello(&mut s)
                        .map_err(|e| TransportError::Startup(format!("bad handshake: {e}")))?;
                    s.set_read_timeout(None).ok();
                    if their_size != size || peer <= rank || peer >= size {
                        return Err(TransportError::Startup(format!(
                            "unexpected handshake from rank {peer} (group size {their_size})"
                        )));
                    }
                    if streams[peer].is_some() {
                        return Err(TransportError::Startup(format!(
                            "rank {peer} connected twice"
                        )));
                    }
                    streams[peer] = Some(s);
                    accepted += 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        let missing = (rank + 1..size).find(|&p| streams[p].is_none()).unwrap();
                        return Err(TransportError::Unreachable {
                            rank: missing,
                            reason: "did not connect before the startup timeout".into(),
                        });
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(TransportError::Startup(e.to_string())),
            }
        }
        drop(listener);

        let counters = Arc::new(WireCounters::default());
        let mut peers = Vec::with_capacity(size);
        let mut threads = Vec::with_capacity(size.saturating_sub(1));
        for (p, s) in streams.into_iter().enumerate() {
            match s {
                Some(s) => {
                    let (peer, th) = Peer::spawn(p, s, Arc::clone(&counters))
                        .map_err(|e| TransportError::Startup(e.to_string()))?;
                    peers.push(Some(peer));
                    threads.push(th);
                }
                None => peers.push(None),
            }
        }
        let group = ProcessGroup {
            rank,
            size,
            config,
            peers,
            threads,
            counters,
        };
        group.barrier()?;
        log::debug!("rank {rank} connected to {} peers", size - 1);
        Ok(group)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn phase_threshold(&self) -> usize {
        self.config.phase_threshold
    }

    /// Number of live connections held by this rank.
    pub fn connection_count(&self) -> usize {
        self.peers.iter().filter(|p| p.is_some()).count()
    }

    pub fn wire_stats(&self) -> WireStats {
        self.counters.snapshot()
    }

    /// True when a plaintext of `len` bytes takes the rendezvous path.
    pub fn uses_rendezvous(&self, plaintext_len: usize) -> bool {
        plaintext_len >= self.config.phase_threshold
    }

    fn peer(&self, rank: usize) -> Result<&Peer, TransportError> {
        self.peers
            .get(rank)
            .and_then(|p| p.as_deref())
            .ok_or(TransportError::InvalidRank {
                rank,
                me: self.rank,
                size: self.size,
            })
    }

    pub(crate) fn post_send(
        &self,
        dest: usize,
        tag: u32,
        body: Vec<u8>,
        plaintext_len: usize,
    ) -> Result<SendRequest, TransportError> {
        let peer = self.peer(dest)?;
        let slot = peer.post_send(tag, body, self.uses_rendezvous(plaintext_len))?;
        Ok(SendRequest::new(slot))
    }

    pub(crate) fn post_recv(
        &self,
        src: usize,
        tag: u32,
        opener: Option<AeadProvider>,
    ) -> Result<RecvRequest, TransportError> {
        let slot = self.peer(src)?.post_recv(tag)?;
        Ok(RecvRequest::new(src, slot, opener))
    }

    pub fn isend(&self, dest: usize, tag: u32, body: &[u8]) -> Result<SendRequest, TransportError> {
        self.post_send(dest, tag, body.to_vec(), body.len())
    }

    pub fn irecv(&self, src: usize, tag: u32) -> Result<RecvRequest, TransportError> {
        self.post_recv(src, tag, None)
    }

    pub fn send(&self, dest: usize, tag: u32, body: &[u8]) -> Result<(), TransportError> {
        self.isend(dest, tag, body)?.wait()
    }

    pub fn recv(&self, src: usize, tag: u32) -> Result<Vec<u8>, TransportError> {
        self.irecv(src, tag)?.into_data()
    }

    pub fn encrypted_isend(
        &self,
        aead: &AeadProvider,
        dest: usize,
        tag: u32,
        plaintext: &[u8],
    ) -> Result<SendRequest, TransportError> {
        self.peer(dest)?;
        let frame = aead
            .seal_to_bytes(plaintext)
            .map_err(|e| TransportError::Aead(e.to_string()))?;
        self.post_send(dest, tag, frame, plaintext.len())
    }

    pub fn encrypted_irecv(
        &self,
        aead: &AeadProvider,
        src: usize,
        tag: u32,
    ) -> Result<RecvRequest, TransportError> {
        self.post_recv(src, tag, Some(aead.clone()))
    }

    pub fn encrypted_send(
        &self,
        aead: &AeadProvider,
        dest: usize,
        tag: u32,
        plaintext: &[u8],
    ) -> Result<(), TransportError> {
        self.encrypted_isend(aead, dest, tag, plaintext)?.wait()
    }

    pub fn encrypted_recv(
        &self,
        aead: &AeadProvider,
        src: usize,
        tag: u32,
    ) -> Result<Vec<u8>, TransportError> {
        self.encrypted_irecv(aead, src, tag)?.into_data()
    }

    /// Returns once every rank has entered the barrier.
    pub fn barrier(&self) -> Result<(), TransportError> {
        let mut reqs = Vec::with_capacity(2 * self.size);
        for p in (0..self.size).filter(|&p| p != self.rank) {
            reqs.push(Request::Recv(self.irecv(p, TAG_BARRIER)?));
        }
        for p in (0..self.size).filter(|&p| p != self.rank) {
            reqs.push(Request::Send(self.isend(p, TAG_BARRIER, &[])?));
        }
        waitall(&mut reqs)
    }

    /// A view that sends plaintext or sealed frames depending on `security`.
    pub fn channel<'g>(&'g self, security: &Security) -> Channel<'g> {
        Channel {
            group: self,
            aead: match security {
                Security::Plain => None,
                Security::Encrypted(p) => Some(p.clone()),
            },
        }
    }
}

impl Drop for ProcessGroup {
    fn drop(&mut self) {
        for p in self.peers.iter().flatten() {
            p.close_outgoing();
        }
        for th in self.threads.drain(..) {
            let _ = th.writer.join();
            // half-close only: the reader keeps draining until the peer closes
            // too, so the socket never resets with unsent data queued
            let _ = th.stream.shutdown(std::net::Shutdown::Write);
            drop(th.reader);
        }
    }
}

/// Whether a [`Channel`] encrypts.
#[derive(Clone, Debug)]
pub enum Security {
    Plain,
    Encrypted(AeadProvider),
}

impl Security {
    pub fn is_encrypted(&self) -> bool {
        matches!(self, Security::Encrypted(_))
    }
}

/// Point-to-point operations with the plaintext/encrypted choice made once.
#[derive(Clone)]
pub struct Channel<'g> {
    group: &'g ProcessGroup,
    aead: Option<AeadProvider>,
}

impl<'g> Channel<'g> {
    pub fn group(&self) -> &'g ProcessGroup {
        self.group
    }

    pub fn isend(&self, dest: usize, tag: u32, body: &[u8]) -> Result<SendRequest, TransportError> {
        match &self.aead {
            None => self.group.isend(dest, tag, body),
            Some(a) => self.group.encrypted_isend(a, dest, tag, body),
        }
    }

    pub fn irecv(&self, src: usize, tag: u32) -> Result<RecvRequest, TransportError> {
        self.group.post_recv(src, tag, self.aead.clone())
    }

    pub fn send(&self, dest: usize, tag: u32, body: &[u8]) -> Result<(), TransportError> {
        self.isend(dest, tag, body)?.wait()
    }

    pub fn recv(&self, src: usize, tag: u32) -> Result<Vec<u8>, TransportError> {
        self.irecv(src, tag)?.into_data()
    }
}

fn connect_with_retry(
    rank: usize,
    addr: &str,
    deadline: Instant,
) -> Result<TcpStream, TransportError> {
    let unreachable = |reason: String| TransportError::Unreachable { rank, reason };
    let addrs: Vec<SocketAddr> = addr
        .to_socket_addrs()
        .map_err(|e| unreachable(format!("cannot resolve {addr}: {e}")))?
        .collect();
    let mut last_err = String::from("no addresses");
    loop {
        for a in &addrs {
            match TcpStream::connect_timeout(a, Duration::from_millis(500)) {
                Ok(s) => return Ok(s),
                Err(e) => last_err = e.to_string(),
            }
        }
        if Instant::now() >= deadline {
            return Err(unreachable(format!("{addr}: {last_err}")));
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn write_hello(s: &mut TcpStream, rank: usize, size: usize) -> std::io::Result<()> {
    use std::io::Write;
    let mut b = [0u8; 12];
    b[0..4].copy_from_slice(&HELLO_MAGIC.to_le_bytes());
    b[4..8].copy_from_slice(&(rank as u32).to_le_bytes());
    b[8..12].copy_from_slice(&(size as u32).to_le_bytes());
    s.write_all(&b)
}

fn read_hello(s: &mut TcpStream) -> std::io::Result<(usize, usize)> {
    use std::io::Read;
    let mut b = [0u8; 12];
    s.read_exact(&mut b)?;
    if u32::from_le_bytes(b[0..4].try_into().unwrap()) != HELLO_MAGIC {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad magic",
        ));
    }
    Ok((
        u32::from_le_bytes(b[4..8].try_into().unwrap()) as usize,
        u32::from_le_bytes(b[8..12].try_into().unwrap()) as usize,
    ))
}

/// Spawns `n` ranks as threads on loopback and runs `f` on each.
///
/// Returns the per-rank results in rank order. Used by the tests and by the
/// CLI's single-host mode.
pub fn run_local<T, F>(n: usize, config: GroupConfig, f: F) -> Result<Vec<T>, TransportError>
where
    T: Send,
    F: Fn(ProcessGroup) -> T + Sync,
{
    let listeners = (0..n)
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TransportError::Startup(e.to_string()))?;
    let addrs = listeners
        .iter()
        .map(|l| l.local_addr().map(|a| a.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| TransportError::Startup(e.to_string()))?;
    let roster = Roster::new(addrs)?;
    std::thread::scope(|scope| {
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(rank, l)| {
                let roster = &roster;
                let config = config.clone();
                let f = &f;
                scope.spawn(move || {
                    ProcessGroup::with_listener(rank, roster, l, config).map(f)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank thread panicked"))
            .collect()
    })
}
