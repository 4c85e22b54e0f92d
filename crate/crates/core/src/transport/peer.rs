//! One connection to one peer: a reader thread that demultiplexes incoming
//! units into the match queues, and a writer thread that owns the write half.
//!
//! Neither thread ever blocks on the other direction, so two peers streaming
//! large bodies at each other always make progress.

use std::collections::VecDeque;
use std::io::{BufWriter, Read, Write};
use std::net::TcpStream;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use super::wire::{MessageHeader, Mode, CTS_BYTE, HEADER_LEN};
use super::TransportError;

/// A one-shot value that one thread fills and another waits for.
pub(crate) struct Slot<T> {
    value: Mutex<Option<T>>,
    cv: Condvar,
}

impl<T> Slot<T> {
    pub(crate) fn new() -> Arc<Self> {
        Arc::new(Slot {
            value: Mutex::new(None),
            cv: Condvar::new(),
        })
    }

    pub(crate) fn filled(v: T) -> Arc<Self> {
        Arc::new(Slot {
            value: Mutex::new(Some(v)),
            cv: Condvar::new(),
        })
    }

    pub(crate) fn fill(&self, v: T) {
        let mut g = self.value.lock().unwrap();
        if g.is_none() {
            *g = Some(v);
        }
        self.cv.notify_all();
    }

    pub(crate) fn take(&self) -> T {
        let mut g = self.value.lock().unwrap();
        loop {
            if let Some(v) = g.take() {
                return v;
            }
            g = self.cv.wait(g).unwrap();
        }
    }

    pub(crate) fn is_filled(&self) -> bool {
        self.value.lock().unwrap().is_some()
    }
}

pub(crate) type RecvSlot = Slot<Result<Vec<u8>, TransportError>>;
pub(crate) type SendSlot = Slot<Result<(), TransportError>>;

/// Byte counters for one process group.
#[derive(Debug, Default)]
pub struct WireCounters {
    pub(crate) body_bytes_sent: AtomicU64,
    pub(crate) body_bytes_received: AtomicU64,
    pub(crate) messages_sent: AtomicU64,
    pub(crate) messages_received: AtomicU64,
}

/// Snapshot of [`WireCounters`]. Body bytes exclude headers and handshake units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WireStats {
    pub body_bytes_sent: u64,
    pub body_bytes_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

impl WireCounters {
    pub(crate) fn snapshot(&self) -> WireStats {
        WireStats {
            body_bytes_sent: self.body_bytes_sent.load(Ordering::Relaxed),
            body_bytes_received: self.body_bytes_received.load(Ordering::Relaxed),
            messages_sent: self.messages_sent.load(Ordering::Relaxed),
            messages_received: self.messages_received.load(Ordering::Relaxed),
        }
    }
}

enum Unexpected {
    Eager { tag: u32, data: Vec<u8> },
    Rts { tag: u32, len: u32 },
}

impl Unexpected {
    fn tag(&self) -> u32 {
        match self {
            Unexpected::Eager { tag, .. } | Unexpected::Rts { tag, .. } => *tag,
        }
    }
}

struct PendingRts {
    tag: u32,
    body: Vec<u8>,
    done: Arc<SendSlot>,
}

struct Granted {
    tag: u32,
    len: u32,
    slot: Arc<RecvSlot>,
}

#[derive(Default)]
struct MatchState {
    unexpected: VecDeque<Unexpected>,
    posted: VecDeque<(u32, Arc<RecvSlot>)>,
    granted: VecDeque<Granted>,
    pending_rts: VecDeque<PendingRts>,
    broken: Option<TransportError>,
}

impl MatchState {
    fn fail_all(&mut self, err: &TransportError) {
        for (_, slot) in self.posted.drain(..) {
            slot.fill(Err(err.clone()));
        }
        for g in self.granted.drain(..) {
            g.slot.fill(Err(err.clone()));
        }
        for p in self.pending_rts.drain(..) {
            p.done.fill(Err(err.clone()));
        }
        if self.broken.is_none() {
            self.broken = Some(err.clone());
        }
    }
}

pub(crate) struct Outgoing {
    header: MessageHeader,
    body: Option<Vec<u8>>,
    done: Option<Arc<SendSlot>>,
}

pub(crate) struct Peer {
    rank: usize,
    state: Mutex<MatchState>,
    tx: Mutex<Option<mpsc::Sender<Outgoing>>>,
    counters: Arc<WireCounters>,
}

pub(crate) struct PeerThreads {
    pub(crate) reader: JoinHandle<()>,
    pub(crate) writer: JoinHandle<()>,
    pub(crate) stream: TcpStream,
}

impl Peer {
    pub(crate) fn spawn(
        rank: usize,
        stream: TcpStream,
        counters: Arc<WireCounters>,
    ) -> std::io::Result<(Arc<Peer>, PeerThreads)> {
        stream.set_nodelay(true)?;
        let (tx, rx) = mpsc::channel::<Outgoing>();
        let peer = Arc::new(Peer {
            rank,
            state: Mutex::new(MatchState::default()),
            tx: Mutex::new(Some(tx)),
            counters,
        });
        let read_half = stream.try_clone()?;
        let write_half = stream.try_clone()?;

        let p = Arc::clone(&peer);
        let reader = std::thread::Builder::new()
            .name(format!("secmsg-rx-{rank}"))
            .spawn(move || {
                if let Err(e) = p.read_loop(read_half) {
                    p.state.lock().unwrap().fail_all(&e);
                }
            })?;

        let p = Arc::clone(&peer);
        let writer = std::thread::Builder::new()
            .name(format!("secmsg-tx-{rank}"))
            .spawn(move || p.write_loop(write_half, rx))?;

        Ok((
            peer,
            PeerThreads {
                reader,
                writer,
                stream,
            },
        ))
    }

    /// Drops the outgoing queue; the writer exits once it has flushed everything.
    pub(crate) fn close_outgoing(&self) {
        self.tx.lock().unwrap().take();
    }

    fn enqueue(&self, out: Outgoing) -> Result<(), TransportError> {
        let guard = self.tx.lock().unwrap();
        let lost = || TransportError::ConnectionLost {
            rank: self.rank,
            reason: "writer closed".into(),
        };
        match guard.as_ref() {
            Some(tx) => tx.send(out).map_err(|_| lost()),
            None => Err(lost()),
        }
    }

    fn send_cts(&self, tag: u32) -> Result<(), TransportError> {
        self.enqueue(Outgoing {
            header: MessageHeader {
                body_length: 1,
                tag,
                mode: Mode::Cts,
            },
            body: Some(vec![CTS_BYTE]),
            done: None,
        })
    }

    /// Queues a message. `rendezvous` selects the RTS/CTS path.
    pub(crate) fn post_send(
        &self,
        tag: u32,
        body: Vec<u8>,
        rendezvous: bool,
    ) -> Result<Arc<SendSlot>, TransportError> {
        let body_length = u32::try_from(body.len()).map_err(|_| TransportError::TooLarge {
            len: body.len(),
        })?;
        let done = Slot::new();
        if rendezvous {
            let mut st = self.state.lock().unwrap();
            if let Some(e) = &st.broken {
                return Err(e.clone());
            }
            st.pending_rts.push_back(PendingRts {
                tag,
                body,
                done: Arc::clone(&done),
            });
            self.enqueue(Outgoing {
                header: MessageHeader {
                    body_length,
                    tag,
                    mode: Mode::Rts,
                },
                body: None,
                done: None,
            })?;
        } else {
            if let Some(e) = &self.state.lock().unwrap().broken {
                return Err(e.clone());
            }
            self.enqueue(Outgoing {
                header: MessageHeader {
                    body_length,
                    tag,
                    mode: Mode::Eager,
                },
                body: Some(body),
                done: Some(Arc::clone(&done)),
            })?;
        }
        Ok(done)
    }

    /// Posts a receive for the next message with `tag`.
    pub(crate) fn post_recv(&self, tag: u32) -> Result<Arc<RecvSlot>, TransportError> {
        let mut st = self.state.lock().unwrap();
        if let Some(pos) = st.unexpected.iter().position(|u| u.tag() == tag) {
            match st.unexpected.remove(pos).unwrap() {
                Unexpected::Eager { data, .. } => return Ok(Slot::filled(Ok(data))),
                Unexpected::Rts { tag, len } => {
                    let slot = Slot::new();
                    st.granted.push_back(Granted {
                        tag,
                        len,
                        slot: Arc::clone(&slot),
                    });
                    self.send_cts(tag)?;
                    return Ok(slot);
                }
            }
        }
        if let Some(e) = &st.broken {
            return Err(e.clone());
        }
        let slot = Slot::new();
        st.posted.push_back((tag, Arc::clone(&slot)));
        Ok(slot)
    }

    fn read_loop(&self, mut stream: TcpStream) -> Result<(), TransportError> {
        let lost = |e: std::io::Error| TransportError::ConnectionLost {
            rank: self.rank,
            reason: e.to_string(),
        };
        loop {
            let mut hb = [0u8; HEADER_LEN];
            match stream.read_exact(&mut hb) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                    return Err(TransportError::ConnectionLost {
                        rank: self.rank,
                        reason: "peer closed the connection".into(),
                    })
                }
                Err(e) => return Err(lost(e)),
            }
            let h = MessageHeader::decode(&hb, self.rank)?;
            match h.mode {
                Mode::Eager => {
                    let data = read_body(&mut stream, h.body_length).map_err(lost)?;
                    self.count_received(data.len());
                    let mut st = self.state.lock().unwrap();
                    if let Some(pos) = st.posted.iter().position(|(t, _)| *t == h.tag) {
                        let (_, slot) = st.posted.remove(pos).unwrap();
                        slot.fill(Ok(data));
                    } else {
                        st.unexpected.push_back(Unexpected::Eager { tag: h.tag, data });
                    }
                }
                Mode::Rts => {
                    let mut st = self.state.lock().unwrap();
                    if let Some(pos) = st.posted.iter().position(|(t, _)| *t == h.tag) {
                        let (_, slot) = st.posted.remove(pos).unwrap();
                        st.granted.push_back(Granted {
                            tag: h.tag,
                            len: h.body_length,
                            slot,
                        });
                        self.send_cts(h.tag)?;
                    } else {
                        st.unexpected.push_back(Unexpected::Rts {
                            tag: h.tag,
                            len: h.body_length,
                        });
                    }
                }
                Mode::Cts => {
                    let body = read_body(&mut stream, h.body_length).map_err(lost)?;
                    if body != [CTS_BYTE] {
                        return Err(TransportError::Protocol {
                            rank: self.rank,
                            msg: "malformed clear-to-send".into(),
                        });
                    }
                    let mut st = self.state.lock().unwrap();
                    let pos = st
                        .pending_rts
                        .iter()
                        .position(|p| p.tag == h.tag)
                        .ok_or_else(|| TransportError::Protocol {
                            rank: self.rank,
                            msg: format!("clear-to-send for tag {} with no pending send", h.tag),
                        })?;
                    let p = st.pending_rts.remove(pos).unwrap();
                    self.enqueue(Outgoing {
                        header: MessageHeader {
                            body_length: p.body.len() as u32,
                            tag: p.tag,
                            mode: Mode::Data,
                        },
                        body: Some(p.body),
                        done: Some(p.done),
                    })?;
                }
                Mode::Data => {
                    let data = read_body(&mut stream, h.body_length).map_err(lost)?;
                    self.count_received(data.len());
                    let mut st = self.state.lock().unwrap();
                    let pos = st
                        .granted
                        .iter()
                        .position(|g| g.tag == h.tag)
                        .ok_or_else(|| TransportError::Protocol {
                            rank: self.rank,
                            msg: format!("data for tag {} was never granted", h.tag),
                        })?;
                    let g = st.granted.remove(pos).unwrap();
                    if g.len != h.body_length {
                        return Err(TransportError::Protocol {
                            rank: self.rank,
                            msg: format!(
                                "announced {} bytes but delivered {}",
                                g.len, h.body_length
                            ),
                        });
                    }
                    g.slot.fill(Ok(data));
                }
            }
        }
    }

    fn count_received(&self, n: usize) {
        self.counters
            .body_bytes_received
            .fetch_add(n as u64, Ordering::Relaxed);
        self.counters.messages_received.fetch_add(1, Ordering::Relaxed);
    }

    fn write_loop(&self, stream: TcpStream, rx: mpsc::Receiver<Outgoing>) {
        let mut w = BufWriter::with_capacity(64 * 1024, stream);
        let mut completed: Vec<Arc<SendSlot>> = Vec::new();
        while let Ok(first) = rx.recv() {
            let mut next = Some(first);
            let mut result = Ok(());
            while let Some(out) = next.take() {
                if result.is_ok() {
                    result = self.write_one(&mut w, &out);
                }
                if let Some(done) = out.done {
                    completed.push(done);
                }
                next = rx.try_recv().ok();
            }
            if result.is_ok() {
                result = w.flush();
            }
            match result {
                Ok(()) => {
                    for d in completed.drain(..) {
                        d.fill(Ok(()));
                    }
                }
                Err(e) => {
                    let err = TransportError::ConnectionLost {
                        rank: self.rank,
                        reason: e.to_string(),
                    };
                    for d in completed.drain(..) {
                        d.fill(Err(err.clone()));
                    }
                    self.state.lock().unwrap().fail_all(&err);
                    // keep draining so senders never block on a dead queue
                    for out in rx.iter() {
                        if let Some(d) = out.done {
                            d.fill(Err(err.clone()));
                        }
                    }
                    return;
                }
            }
        }
    }

    fn write_one(&self, w: &mut BufWriter<TcpStream>, out: &Outgoing) -> std::io::Result<()> {
        w.write_all(&out.header.encode())?;
        if let Some(body) = &out.body {
            w.write_all(body)?;
            if matches!(out.header.mode, Mode::Eager | Mode::Data) {
                self.counters
                    .body_bytes_sent
                    .fetch_add(body.len() as u64, Ordering::Relaxed);
                self.counters.messages_sent.fetch_add(1, Ordering::Relaxed);
            }
        }
        Ok(())
    }
}

fn read_body(stream: &mut TcpStream, len: u32) -> std::io::Result<Vec<u8>> {
    let mut data = vec![0u8; len as usize];
    stream.read_exact(&mut data)?;
    Ok(data)
}
