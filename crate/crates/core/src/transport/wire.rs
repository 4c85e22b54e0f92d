//! Message header encoding.
//!
//! Every unit on a connection starts with a 12-byte little-endian header:
//!
//! ```text
//! [u32 body_length][u32 tag][u8 mode][0u8; 3]
//! ```
//!
//! `EAGER` and `DATA` headers are followed by `body_length` body bytes. An
//! `RTS` header announces a body of `body_length` bytes and carries nothing
//! else; the receiver answers with a `CTS` unit whose one-byte body is
//! [`CTS_BYTE`], after which the sender ships the body as a `DATA` unit.

use super::TransportError;

pub const HEADER_LEN: usize = 12;
pub const CTS_BYTE: u8 = 0xC7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Mode {
    Eager = 0,
    Rts = 1,
    Cts = 2,
    Data = 3,
}

impl Mode {
    fn from_u8(b: u8) -> Option<Mode> {
        match b {
            0 => Some(Mode::Eager),
            1 => Some(Mode::Rts),
            2 => Some(Mode::Cts),
            3 => Some(Mode::Data),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageHeader {
    pub body_length: u32,
    pub tag: u32,
    pub mode: Mode,
}

impl MessageHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&self.body_length.to_le_bytes());
        out[4..8].copy_from_slice(&self.tag.to_le_bytes());
        out[8] = self.mode as u8;
        out
    }

    pub fn decode(bytes: &[u8; HEADER_LEN], peer: usize) -> Result<Self, TransportError> {
        let mode = Mode::from_u8(bytes[8]).ok_or_else(|| TransportError::Protocol {
            rank: peer,
            msg: format!("unknown mode byte {:#04x}", bytes[8]),
        })?;
        if bytes[9..12] != [0, 0, 0] {
            return Err(TransportError::Protocol {
                rank: peer,
                msg: "nonzero header padding".into(),
            });
        }
        Ok(MessageHeader {
            body_length: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            tag: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            mode,
        })
    }
}
