//! AES-GCM framing of byte messages.
//!
//! Every message is sealed under a fresh, uniformly random 12-byte nonce and
//! travels as a [`Frame`]:
//!
//! ```text
//! +-----------+------------------------------+----------+
//! | nonce(12) | ciphertext (plaintext len)   | tag(16)  |
//! +-----------+------------------------------+----------+
//! ```
//!
//! so the serialized frame is always exactly [`FRAME_OVERHEAD`] bytes longer
//! than its plaintext. No associated data is authenticated.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use aes_gcm::aead::Aead;
use aes_gcm::{Aes128Gcm, Aes256Gcm, KeyInit};
use rand::RngCore;
use thiserror::Error;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
/// Bytes added to every plaintext on the wire.
pub const FRAME_OVERHEAD: usize = NONCE_LEN + TAG_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AeadError {
    /// The key or backend could not be set up.
    #[error("aead configuration error: {0}")]
    Config(String),
    /// Authentication failed: the frame was modified or sealed under another key.
    #[error("message failed authentication")]
    Integrity,
    /// The byte string is too short to be a frame.
    #[error("malformed frame: {len} bytes, need at least {FRAME_OVERHEAD}")]
    Malformed { len: usize },
}

/// A 128- or 256-bit AES-GCM key.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    pub fn new(bytes: &[u8]) -> Result<Self, AeadError> {
        match bytes.len() {
            16 | 32 => Ok(Self(bytes.to_vec())),
            n => Err(AeadError::Config(format!(
                "key must be 16 or 32 bytes, got {n}"
            ))),
        }
    }

    /// Parses a key from 32 or 64 hex digits.
    pub fn from_hex(hex: &str) -> Result<Self, AeadError> {
        let hex = hex.trim();
        if hex.len() % 2 != 0 {
            return Err(AeadError::Config("odd number of hex digits in key".into()));
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AeadError::Config(format!("invalid hex key: {e}")))?;
        Self::new(&bytes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }

    fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey({} bits)", self.bits())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub fn random() -> Self {
        let mut n = [0u8; NONCE_LEN];
        rand::thread_rng().fill_bytes(&mut n);
        Nonce(n)
    }
}

/// Wire unit: nonce followed by ciphertext with the tag in the last 16 bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub nonce: Nonce,
    pub ciphertext_and_tag: Vec<u8>,
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        NONCE_LEN + self.ciphertext_and_tag.len()
    }

    pub fn plaintext_len(&self) -> usize {
        self.ciphertext_and_tag.len() - TAG_LEN
    }

    pub fn tag(&self) -> &[u8] {
        &self.ciphertext_and_tag[self.ciphertext_and_tag.len() - TAG_LEN..]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.nonce.0);
        out.extend_from_slice(&self.ciphertext_and_tag);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AeadError> {
        if bytes.len() < FRAME_OVERHEAD {
            return Err(AeadError::Malformed { len: bytes.len() });
        }
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&bytes[..NONCE_LEN]);
        Ok(Frame {
            nonce: Nonce(nonce),
            ciphertext_and_tag: bytes[NONCE_LEN..].to_vec(),
        })
    }
}

/// Available AES-GCM implementations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Pure-Rust `aes-gcm` crate.
    RustCrypto,
    /// `ring` (BoringSSL-derived assembly).
    Ring,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::RustCrypto, Backend::Ring];

    pub fn name(self) -> &'static str {
        match self {
            Backend::RustCrypto => "rustcrypto",
            Backend::Ring => "ring",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = AeadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rustcrypto" | "aes-gcm" => Ok(Backend::RustCrypto),
            "ring" => Ok(Backend::Ring),
            other => Err(AeadError::Config(format!("unknown aead backend `{other}`"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

enum Cipher {
    RustCrypto128(Box<Aes128Gcm>),
    RustCrypto256(Box<Aes256Gcm>),
    Ring(ring::aead::LessSafeKey),
}

/// Counts of seal/open calls made through a provider.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AeadStats {
    pub seals: u64,
    pub opens: u64,
}

struct Inner {
    backend: Backend,
    key_bits: usize,
    cipher: Cipher,
    seals: AtomicU64,
    opens: AtomicU64,
}

/// An AES-GCM backend bound to a key.
///
/// Cloning is cheap and clones share the key schedule and the call counters.
/// Calls take `&self`, so one provider can serve several threads.
#[derive(Clone)]
pub struct AeadProvider {
    inner: Arc<Inner>,
}

impl fmt::Debug for AeadProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AeadProvider")
            .field("backend", &self.inner.backend)
            .field("key_bits", &self.inner.key_bits)
            .finish()
    }
}

impl AeadProvider {
    pub fn new(backend: Backend, key: &SecretKey) -> Result<Self, AeadError> {
        let cipher = match (backend, key.len()) {
            (Backend::RustCrypto, 16) => Cipher::RustCrypto128(Box::new(
                Aes128Gcm::new_from_slice(key.as_bytes())
                    .map_err(|e| AeadError::Config(e.to_string()))?,
            )),
            (Backend::RustCrypto, 32) => Cipher::RustCrypto256(Box::new(
                Aes256Gcm::new_from_slice(key.as_bytes())
                    .map_err(|e| AeadError::Config(e.to_string()))?,
            )),
            (Backend::Ring, n) => {
                let alg = if n == 16 {
                    &ring::aead::AES_128_GCM
                } else {
                    &ring::aead::AES_256_GCM
                };
                let unbound = ring::aead::UnboundKey::new(alg, key.as_bytes())
                    .map_err(|_| AeadError::Config("ring rejected key".into()))?;
                Cipher::Ring(ring::aead::LessSafeKey::new(unbound))
            }
            (_, n) => return Err(AeadError::Config(format!("unsupported key length {n}"))),
        };
        Ok(Self {
            inner: Arc::new(Inner {
                backend,
                key_bits: key.bits(),
                cipher,
                seals: AtomicU64::new(0),
                opens: AtomicU64::new(0),
            }),
        })
    }

    pub fn backend(&self) -> Backend {
        self.inner.backend
    }

    pub fn key_bits(&self) -> usize {
        self.inner.key_bits
    }

    pub fn stats(&self) -> AeadStats {
        AeadStats {
            seals: self.inner.seals.load(Ordering::Relaxed),
            opens: self.inner.opens.load(Ordering::Relaxed),
        }
    }

    /// Encrypts `plaintext` under a fresh random nonce.
    pub fn seal(&self, plaintext: &[u8]) -> Result<Frame, AeadError> {
        let nonce = Nonce::random();
        self.inner.seals.fetch_add(1, Ordering::Relaxed);
        let ciphertext_and_tag = match &self.inner.cipher {
            Cipher::RustCrypto128(c) => c
                .encrypt((&nonce.0).into(), plaintext)
                .map_err(|_| AeadError::Config("aes-gcm encryption failed".into()))?,
            Cipher::RustCrypto256(c) => c
                .encrypt((&nonce.0).into(), plaintext)
                .map_err(|_| AeadError::Config("aes-gcm encryption failed".into()))?,
            Cipher::Ring(key) => {
                let mut buf = Vec::with_capacity(plaintext.len() + TAG_LEN);
                buf.extend_from_slice(plaintext);
                key.seal_in_place_append_tag(
                    ring::aead::Nonce::assume_unique_for_key(nonce.0),
                    ring::aead::Aad::empty(),
                    &mut buf,
                )
                .map_err(|_| AeadError::Config("ring encryption failed".into()))?;
                buf
            }
        };
        Ok(Frame {
            nonce,
            ciphertext_and_tag,
        })
    }

    /// Decrypts and authenticates `frame`.
    pub fn open(&self, frame: &Frame) -> Result<Vec<u8>, AeadError> {
        if frame.ciphertext_and_tag.len() < TAG_LEN {
            return Err(AeadError::Malformed {
                len: frame.encoded_len(),
            });
        }
        self.inner.opens.fetch_add(1, Ordering::Relaxed);
        match &self.inner.cipher {
            Cipher::RustCrypto128(c) => c
                .decrypt((&frame.nonce.0).into(), frame.ciphertext_and_tag.as_slice())
                .map_err(|_| AeadError::Integrity),
            Cipher::RustCrypto256(c) => c
                .decrypt((&frame.nonce.0).into(), frame.ciphertext_and_tag.as_slice())
                .map_err(|_| AeadError::Integrity),
            Cipher::Ring(key) => {
                let mut buf = frame.ciphertext_and_tag.clone();
                let len = key
                    .open_in_place(
                        ring::aead::Nonce::assume_unique_for_key(frame.nonce.0),
                        ring::aead::Aad::empty(),
                        &mut buf,
                    )
                    .map_err(|_| AeadError::Integrity)?
                    .len();
                buf.truncate(len);
                Ok(buf)
            }
        }
    }

    /// Seals and serializes in one step.
    pub fn seal_to_bytes(&self, plaintext: &[u8]) -> Result<Vec<u8>, AeadError> {
        self.seal(plaintext).map(|f| f.to_bytes())
    }

    /// Parses and opens a serialized frame.
    pub fn open_bytes(&self, bytes: &[u8]) -> Result<Vec<u8>, AeadError> {
        self.open(&Frame::from_bytes(bytes)?)
    }
}
