use proptest::prelude::*;
use secmsg::aead::{AeadError, AeadProvider, Backend, SecretKey, FRAME_OVERHEAD};

fn pair(key: &[u8]) -> (AeadProvider, AeadProvider) {
    let k = SecretKey::new(key).unwrap();
    (
        AeadProvider::new(Backend::Ring, &k).unwrap(),
        AeadProvider::new(Backend::RustCrypto, &k).unwrap(),
    )
}

fn key_bytes() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![prop::collection::vec(any::<u8>(), 16), prop::collection::vec(any::<u8>(), 32)]
}

proptest! {
    #[test]
    fn round_trip_across_backends(key in key_bytes(), msg in prop::collection::vec(any::<u8>(), 0..2048)) {
        let (ring, rc) = pair(&key);
        let a = ring.seal_to_bytes(&msg).unwrap();
        let b = rc.seal_to_bytes(&msg).unwrap();
        prop_assert_eq!(a.len(), msg.len() + FRAME_OVERHEAD);
        prop_assert_eq!(rc.open_bytes(&a).unwrap(), msg.clone());
        prop_assert_eq!(ring.open_bytes(&b).unwrap(), msg);
    }

    #[test]
    fn any_single_flip_is_rejected(
        msg in prop::collection::vec(any::<u8>(), 0..256),
        at in any::<prop::sample::Index>(),
        mask in 1u8..=255,
    ) {
        let (ring, _) = pair(&[3; 32]);
        let mut f = ring.seal_to_bytes(&msg).unwrap();
        let i = at.index(f.len());
        f[i] ^= mask;
        prop_assert_eq!(ring.open_bytes(&f), Err(AeadError::Integrity));
    }

    #[test]
    fn truncation_is_never_accepted(msg in prop::collection::vec(any::<u8>(), 0..256), cut in 1usize..64) {
        let (ring, _) = pair(&[4; 16]);
        let f = ring.seal_to_bytes(&msg).unwrap();
        let keep = f.len().saturating_sub(cut);
        prop_assert!(ring.open_bytes(&f[..keep]).is_err());
    }
}

#[test]
fn other_key_is_rejected() {
    let (a, _) = pair(&[1; 32]);
    let (b, _) = pair(&[2; 32]);
    let f = a.seal_to_bytes(b"payload").unwrap();
    assert_eq!(b.open_bytes(&f), Err(AeadError::Integrity));
}
