use std::sync::Arc;

use crate::aead::{AeadError, AeadProvider};

use super::peer::{RecvSlot, SendSlot};
use super::TransportError;

/// Handle for a posted send. The body may be dropped by the caller immediately;
/// `wait` returns once it has been handed to the kernel.
pub struct SendRequest {
    slot: Arc<SendSlot>,
    outcome: Option<Result<(), TransportError>>,
}

impl SendRequest {
    pub(crate) fn new(slot: Arc<SendSlot>) -> Self {
        Self {
            slot,
            outcome: None,
        }
    }

    /// Blocks until the send completes. Repeated calls return the same result.
    pub fn wait(&mut self) -> Result<(), TransportError> {
        if self.outcome.is_none() {
            self.outcome = Some(self.slot.take());
        }
        self.outcome.clone().unwrap()
    }

    pub fn is_complete(&self) -> bool {
        self.outcome.is_some() || self.slot.is_filled()
    }
}

/// Handle for a posted receive. For encrypted receives the frame is opened
/// inside [`wait`](Self::wait); the plaintext is never visible before that.
pub struct RecvRequest {
    src: usize,
    slot: Arc<RecvSlot>,
    opener: Option<AeadProvider>,
    outcome: Option<Result<Vec<u8>, TransportError>>,
}

impl RecvRequest {
    pub(crate) fn new(src: usize, slot: Arc<RecvSlot>, opener: Option<AeadProvider>) -> Self {
        Self {
            src,
            slot,
            opener,
            outcome: None,
        }
    }

    pub fn source(&self) -> usize {
        self.src
    }

    fn complete(&mut self) {
        if self.outcome.is_some() {
            return;
        }
        let raw = self.slot.take();
        let src = self.src;
        self.outcome = Some(match (&self.opener, raw) {
            (None, r) => r,
            (Some(_), Err(e)) => Err(e),
            (Some(aead), Ok(frame)) => aead.open_bytes(&frame).map_err(|e| match e {
                AeadError::Integrity | AeadError::Malformed { .. } => {
                    TransportError::Integrity { rank: src }
                }
                other => TransportError::Aead(other.to_string()),
            }),
        });
    }

    /// Blocks until the message is here and returns its (decrypted) body.
    /// Waiting again is a no-op returning the same outcome.
    pub fn wait(&mut self) -> Result<&[u8], TransportError> {
        self.complete();
        match self.outcome.as_ref().unwrap() {
            Ok(v) => Ok(v.as_slice()),
            Err(e) => Err(e.clone()),
        }
    }

    pub fn into_data(mut self) -> Result<Vec<u8>, TransportError> {
        self.complete();
        self.outcome.take().unwrap()
    }

    pub fn is_complete(&self) -> bool {
        self.outcome.is_some()
    }
}

pub enum Request {
    Send(SendRequest),
    Recv(RecvRequest),
}

impl Request {
    pub fn wait(&mut self) -> Result<(), TransportError> {
        match self {
            Request::Send(s) => s.wait(),
            Request::Recv(r) => r.wait().map(|_| ()),
        }
    }
}

impl From<SendRequest> for Request {
    fn from(s: SendRequest) -> Self {
        Request::Send(s)
    }
}

impl From<RecvRequest> for Request {
    fn from(r: RecvRequest) -> Self {
        Request::Recv(r)
    }
}

/// Completes every request, returning the first error seen. All requests are
/// driven to completion even if an earlier one fails.
pub fn waitall(reqs: &mut [Request]) -> Result<(), TransportError> {
    let mut first_err = None;
    for r in reqs.iter_mut() {
        if let Err(e) = r.wait() {
            first_err.get_or_insert(e);
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
