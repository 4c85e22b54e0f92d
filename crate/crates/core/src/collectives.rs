//! Plaintext and encrypted collectives.
//!
//! The encrypted forms seal every outgoing element under its own fresh nonce,
//! run the plaintext collective on the serialized frames, and open every
//! incoming frame. The rank's own element goes through the same seal/open
//! pair even though it never touches the wire.
//!
//! Plaintext algorithms: pairwise exchange for alltoall(v) and allgather,
//! binomial tree for bcast. All ranks of the group must call the same
//! collective in the same order.

use thiserror::Error;

use crate::aead::{AeadError, AeadProvider, FRAME_OVERHEAD};
use crate::transport::{
    waitall, ProcessGroup, Request, TransportError, RESERVED_TAG_BASE,
};

const TAG_ALLTOALL: u32 = RESERVED_TAG_BASE + 1;
const TAG_ALLGATHER: u32 = RESERVED_TAG_BASE + 2;
const TAG_BCAST: u32 = RESERVED_TAG_BASE + 3;
const TAG_ALLTOALLV_LENS: u32 = RESERVED_TAG_BASE + 4;
const TAG_ALLTOALLV: u32 = RESERVED_TAG_BASE + 5;
const TAG_ALLTOALLV_VERDICT: u32 = RESERVED_TAG_BASE + 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollectiveError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("element from rank {source_rank} failed authentication")]
    Integrity { source_rank: usize },
    #[error("invalid collective arguments: {0}")]
    InvalidArgument(String),
    #[error("alltoallv length matrix is inconsistent: {0}")]
    LengthMismatch(String),
    #[error("aead: {0}")]
    Aead(String),
}

impl CollectiveError {
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            CollectiveError::Integrity { .. }
                | CollectiveError::Transport(TransportError::Integrity { .. })
        )
    }
}

pub type Result<T> = std::result::Result<T, CollectiveError>;

/// Counts and displacements for a variable-length exchange, in plaintext and
/// in frame (plaintext + 28) units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableLayout {
    pub lens: Vec<usize>,
    pub displs: Vec<usize>,
    pub enc_lens: Vec<usize>,
    pub enc_displs: Vec<usize>,
}

impl VariableLayout {
    pub fn new(lens: &[usize]) -> Self {
        let prefix = |v: &[usize]| {
            v.iter()
                .scan(0usize, |acc, &l| {
                    let d = *acc;
                    *acc += l;
                    Some(d)
                })
                .collect::<Vec<_>>()
        };
        let enc_lens: Vec<usize> = lens.iter().map(|l| l + FRAME_OVERHEAD).collect();
        Self {
            displs: prefix(lens),
            enc_displs: prefix(&enc_lens),
            lens: lens.to_vec(),
            enc_lens,
        }
    }

    pub fn total(&self) -> usize {
        self.lens.iter().sum()
    }

    pub fn enc_total(&self) -> usize {
        self.enc_lens.iter().sum()
    }
}

fn open_from(aead: &AeadProvider, src: usize, bytes: &[u8]) -> Result<Vec<u8>> {
    aead.open_bytes(bytes).map_err(|e| match e {
        AeadError::Integrity | AeadError::Malformed { .. } => {
            CollectiveError::Integrity { source_rank: src }
        }
        other => CollectiveError::Aead(other.to_string()),
    })
}

fn seal(aead: &AeadProvider, plaintext: &[u8]) -> Result<Vec<u8>> {
    aead.seal_to_bytes(plaintext)
        .map_err(|e| CollectiveError::Aead(e.to_string()))
}

/// Sends `outgoing[p]` to every `p != me` and returns what each peer sent;
/// the own slot is moved straight across. `plain_lens[p]` drives the
/// eager/rendezvous choice.
fn exchange(
    g: &ProcessGroup,
    tag: u32,
    mut outgoing: Vec<Vec<u8>>,
    plain_lens: &[usize],
) -> Result<Vec<Vec<u8>>> {
    let (n, me) = (g.size(), g.rank());
    let mut recvs = Vec::with_capacity(n);
    for step in 1..n {
        let src = (me + n - step) % n;
        recvs.push(g.irecv(src, tag)?);
    }
    let mut sends: Vec<Request> = Vec::with_capacity(n);
    for step in 1..n {
        let dest = (me + step) % n;
        let body = std::mem::take(&mut outgoing[dest]);
        sends.push(g.post_send(dest, tag, body, plain_lens[dest])?.into());
    }
    let mut result: Vec<Vec<u8>> = vec![Vec::new(); n];
    result[me] = std::mem::take(&mut outgoing[me]);
    let mut first_err = None;
    for r in recvs {
        let src = r.source();
        match r.into_data() {
            Ok(d) => result[src] = d,
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Err(e) = waitall(&mut sends) {
        first_err.get_or_insert(e);
    }
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(result),
    }
}

fn check_uniform(g: &ProcessGroup, sendbuf: &[Vec<u8>]) -> Result<usize> {
    if sendbuf.len() != g.size() {
        return Err(CollectiveError::InvalidArgument(format!(
            "need {} elements, got {}",
            g.size(),
            sendbuf.len()
        )));
    }
    let len = sendbuf.first().map_or(0, Vec::len);
    if sendbuf.iter().any(|e| e.len() != len) {
        return Err(CollectiveError::InvalidArgument(
            "alltoall elements must share one length".into(),
        ));
    }
    Ok(len)
}

/// `recvbuf[i]` is what rank `i` addressed to this rank.
pub fn alltoall(g: &ProcessGroup, sendbuf: &[Vec<u8>]) -> Result<Vec<Vec<u8>>> {
    let len = check_uniform(g, sendbuf)?;
    exchange(g, TAG_ALLTOALL, sendbuf.to_vec(), &vec![len; g.size()])
}

pub fn encrypted_alltoall(
    g: &ProcessGroup,
    aead: &AeadProvider,
    sendbuf: &[Vec<u8>],
) -> Result<Vec<Vec<u8>>> {
    let len = check_uniform(g, sendbuf)?;
    let enc_sendbuf = sendbuf
        .iter()
        .map(|p| seal(aead, p))
        .collect::<Result<Vec<_>>>()?;
    let enc_recvbuf = exchange(g, TAG_ALLTOALL, enc_sendbuf, &vec![len; g.size()])?;
    enc_recvbuf
        .iter()
        .enumerate()
        .map(|(src, f)| open_from(aead, src, f))
        .collect()
}

pub fn allgather(g: &ProcessGroup, element: &[u8]) -> Result<Vec<Vec<u8>>> {
    let n = g.size();
    exchange(g, TAG_ALLGATHER, vec![element.to_vec(); n], &vec![element.len(); n])
}

pub fn encrypted_allgather(
    g: &ProcessGroup,
    aead: &AeadProvider,
    element: &[u8],
) -> Result<Vec<Vec<u8>>> {
    let n = g.size();
    let frame = seal(aead, element)?;
    let frames = exchange(g, TAG_ALLGATHER, vec![frame; n], &vec![element.len(); n])?;
    frames
        .iter()
        .enumerate()
        .map(|(src, f)| open_from(aead, src, f))
        .collect()
}

fn tree_bcast(g: &ProcessGroup, root: usize, data: Option<Vec<u8>>, plain_len_of: impl Fn(usize) -> usize) -> Result<Vec<u8>> {
    let n = g.size();
    if root >= n {
        return Err(CollectiveError::InvalidArgument(format!(
            "root {root} outside group of {n}"
        )));
    }
    let rel = (g.rank() + n - root) % n;
    let mut buf = if rel == 0 {
        data.ok_or_else(|| CollectiveError::InvalidArgument("root must supply data".into()))?
    } else {
        Vec::new()
    };
    let mut mask = 1usize;
    while mask < n {
        if rel & mask != 0 {
            let src = (rel - mask + root) % n;
            buf = g.recv(src, TAG_BCAST)?;
            break;
        }
        mask <<= 1;
    }
    mask >>= 1;
    let mut sends: Vec<Request> = Vec::new();
    while mask > 0 {
        if rel + mask < n {
            let dest = (rel + mask + root) % n;
            sends.push(g.post_send(dest, TAG_BCAST, buf.clone(), plain_len_of(buf.len()))?.into());
        }
        mask >>= 1;
    }
    waitall(&mut sends)?;
    Ok(buf)
}

/// Every rank returns the root's `body`; non-roots pass `None`.
pub fn bcast(g: &ProcessGroup, root: usize, body: Option<&[u8]>) -> Result<Vec<u8>> {
    tree_bcast(g, root, body.map(<[u8]>::to_vec), |l| l)
}

/// The root seals once, the frame travels the tree, and every rank
/// (root included) opens it once.
pub fn encrypted_bcast(
    g: &ProcessGroup,
    aead: &AeadProvider,
    root: usize,
    body: Option<&[u8]>,
) -> Result<Vec<u8>> {
    let frame = match (g.rank() == root, body) {
        (true, Some(b)) => Some(seal(aead, b)?),
        _ => None,
    };
    let frame = tree_bcast(g, root, frame, |l| l.saturating_sub(FRAME_OVERHEAD))?;
    open_from(aead, root, &frame)
}

/// Checks that what every rank plans to send matches what its peers expect,
/// and makes every rank agree on the verdict before any payload moves.
fn agree_on_lengths(g: &ProcessGroup, send_lens: &[usize], recv_lens: &[usize]) -> Result<()> {
    let n = g.size();
    if send_lens.len() != n || recv_lens.len() != n {
        return Err(CollectiveError::InvalidArgument(format!(
            "alltoallv needs {n} send and {n} receive lengths"
        )));
    }
    let announced = exchange(
        g,
        TAG_ALLTOALLV_LENS,
        send_lens.iter().map(|&l| (l as u64).to_le_bytes().to_vec()).collect(),
        &[8; 1].repeat(n),
    )?;
    let mut problem = None;
    for (src, bytes) in announced.iter().enumerate() {
        let got = bytes
            .as_slice()
            .try_into()
            .map(u64::from_le_bytes)
            .unwrap_or(u64::MAX);
        if got != recv_lens[src] as u64 {
            problem.get_or_insert(format!(
                "rank {src} sends {got} bytes to rank {} which expects {}",
                g.rank(),
                recv_lens[src]
            ));
        }
    }
    let verdict = [problem.is_none() as u8];
    let verdicts = exchange(g, TAG_ALLTOALLV_VERDICT, vec![verdict.to_vec(); n], &[1; 1].repeat(n))?;
    if let Some(p) = problem {
        return Err(CollectiveError::LengthMismatch(p));
    }
    if let Some(bad) = verdicts.iter().position(|v| v.first() != Some(&1)) {
        return Err(CollectiveError::LengthMismatch(format!(
            "rank {bad} reported inconsistent lengths"
        )));
    }
    Ok(())
}

/// Variable-length alltoall. `sendbuf[j]` goes to rank `j`; `recv_lens[i]`
/// is the length this rank expects from rank `i`.
pub fn alltoallv(
    g: &ProcessGroup,
    sendbuf: &[Vec<u8>],
    recv_lens: &[usize],
) -> Result<Vec<Vec<u8>>> {
    let send_lens: Vec<usize> = sendbuf.iter().map(Vec::len).collect();
    agree_on_lengths(g, &send_lens, recv_lens)?;
    exchange(g, TAG_ALLTOALLV, sendbuf.to_vec(), &send_lens)
}

pub fn encrypted_alltoallv(
    g: &ProcessGroup,
    aead: &AeadProvider,
    sendbuf: &[Vec<u8>],
    recv_lens: &[usize],
) -> Result<Vec<Vec<u8>>> {
    let send_lens: Vec<usize> = sendbuf.iter().map(Vec::len).collect();
    agree_on_lengths(g, &send_lens, recv_lens)?;

    let send_layout = VariableLayout::new(&send_lens);
    let mut enc_sendbuf = vec![0u8; send_layout.enc_total()];
    for (i, p) in sendbuf.iter().enumerate() {
        let at = send_layout.enc_displs[i];
        enc_sendbuf[at..at + send_layout.enc_lens[i]].copy_from_slice(&seal(aead, p)?);
    }
    let outgoing = (0..g.size())
        .map(|i| {
            let at = send_layout.enc_displs[i];
            enc_sendbuf[at..at + send_layout.enc_lens[i]].to_vec()
        })
        .collect();
    let incoming = exchange(g, TAG_ALLTOALLV, outgoing, &send_lens)?;

    let recv_layout = VariableLayout::new(recv_lens);
    let mut enc_recvbuf = vec![0u8; recv_layout.enc_total()];
    for (i, f) in incoming.iter().enumerate() {
        if f.len() != recv_layout.enc_lens[i] {
            return Err(CollectiveError::LengthMismatch(format!(
                "rank {i} delivered {} frame bytes, expected {}",
                f.len(),
                recv_layout.enc_lens[i]
            )));
        }
        let at = recv_layout.enc_displs[i];
        enc_recvbuf[at..at + f.len()].copy_from_slice(f);
    }
    (0..g.size())
        .map(|i| {
            let at = recv_layout.enc_displs[i];
            open_from(aead, i, &enc_recvbuf[at..at + recv_layout.enc_lens[i]])
        })
        .collect()
}
