//! Encryption backend contract and the reference backend.
//!
//! The reference backend reproduces the properties the protocol observes:
//! encryption is probabilistic (every ciphertext carries a fresh nonce and its
//! payload is the plaintext masked with a keyed PRF of that nonce), decryption
//! needs the [`SecretKey`] capability, ciphertexts from different key pairs
//! never mix, and all evaluation goes through the oblivious [`Backend`]
//! interface. It is an emulation: the evaluation key inside a [`PublicKey`]
//! can unmask payloads, so it only hides plaintexts from code that stays
//! behind this API. It is not a lattice scheme and offers no cryptographic
//! security against a process that inspects its own memory.

mod backend;
mod reference;
mod trace;

use std::fmt;
use std::hash::Hasher;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use siphasher::sip::SipHasher13;
use thiserror::Error;

pub use backend::{Backend, Operand};
pub use reference::{Decryptor, Evaluator};
pub use trace::{OpKind, OperandKind, OperationTrace, TraceEvent, TraceLevel};

/// Backend id written into every ciphertext envelope.
pub const REFERENCE_BACKEND_ID: u8 = 1;
/// Envelope format version.
pub const ENVELOPE_VERSION: u8 = 1;
/// Serialized size of one ciphertext envelope in bytes.
pub const ENVELOPE_LEN: usize = 1 + 1 + 1 + 8 + 16 + 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("key mismatch: ciphertext was produced under a different key pair")]
    KeyMismatch,
    #[error("non-ASCII character {ch:?} at position {position}")]
    NonAscii { position: usize, ch: char },
    #[error("invalid security parameter {0}: must be positive")]
    InvalidSecurityParameter(u32),
    #[error("malformed ciphertext envelope: {0}")]
    Malformed(String),
    #[error("ciphertext integrity check failed")]
    Corrupted,
}

/// Short public identifier of a key pair.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyFingerprint(pub [u8; 8]);

impl fmt::Debug for KeyFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyFingerprint({})", hex::encode(self.0))
    }
}

impl fmt::Display for KeyFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Clone, Copy)]
pub(crate) struct MaskKey {
    k0: u64,
    k1: u64,
}

impl MaskKey {
    #[inline]
    pub(crate) fn mask(&self, nonce: u128) -> u64 {
        let mut h = SipHasher13::new_with_keys(self.k0, self.k1);
        h.write_u128(nonce);
        h.finish()
    }
}

pub(crate) struct PublicInner {
    pub(crate) mask: MaskKey,
    rng: Mutex<ChaCha20Rng>,
}

/// Shareable encryption/evaluation handle.
#[derive(Clone)]
pub struct PublicKey {
    fingerprint: KeyFingerprint,
    security_param: u32,
    pub(crate) inner: Arc<PublicInner>,
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PublicKey")
            .field("fingerprint", &self.fingerprint)
            .field("security_param", &self.security_param)
            .finish_non_exhaustive()
    }
}

impl PublicKey {
    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    pub fn security_param(&self) -> u32 {
        self.security_param
    }

    pub(crate) fn fresh_nonce(&self) -> u128 {
        self.inner.rng.lock().expect("rng poisoned").random()
    }

    pub(crate) fn seal(&self, value: u64, nonce: u128) -> Envelope {
        Envelope {
            fingerprint: self.fingerprint,
            nonce,
            payload: self.inner.mask.mask(nonce) ^ value,
        }
    }

    #[inline]
    pub(crate) fn open(&self, env: &Envelope) -> Result<u64, CryptoError> {
        if env.fingerprint != self.fingerprint {
            return Err(CryptoError::KeyMismatch);
        }
        Ok(self.inner.mask.mask(env.nonce) ^ env.payload)
    }
}

/// Decryption capability. Deliberately not serializable.
pub struct SecretKey {
    fingerprint: KeyFingerprint,
    mask: MaskKey,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("fingerprint", &self.fingerprint)
            .finish_non_exhaustive()
    }
}

impl SecretKey {
    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    fn open(&self, env: &Envelope, max: u64) -> Result<u64, CryptoError> {
        if env.fingerprint != self.fingerprint {
            return Err(CryptoError::KeyMismatch);
        }
        let v = self.mask.mask(env.nonce) ^ env.payload;
        if v > max {
            return Err(CryptoError::Corrupted);
        }
        Ok(v)
    }
}

#[derive(Debug)]
pub struct KeyPair {
    pub pk: PublicKey,
    pub sk: SecretKey,
}

/// Generates a fresh key pair from the process-wide randomness source.
pub fn keygen(security_param: u32) -> Result<KeyPair, CryptoError> {
    keygen_with_rng(security_param, &mut crate::seed::rng_from(None))
}

/// Generates a key pair deterministically from `seed`.
pub fn keygen_seeded(security_param: u32, seed: u64) -> Result<KeyPair, CryptoError> {
    keygen_with_rng(security_param, &mut ChaCha20Rng::seed_from_u64(seed))
}

fn keygen_with_rng(security_param: u32, rng: &mut ChaCha20Rng) -> Result<KeyPair, CryptoError> {
    if security_param == 0 {
        return Err(CryptoError::InvalidSecurityParameter(security_param));
    }
    let identity: [u8; 32] = rng.random();
    let mask = MaskKey {
        k0: rng.random(),
        k1: rng.random(),
    };
    let enc_seed: [u8; 32] = rng.random();

    let mut h = Sha256::new();
    h.update(b"blindanno/pk");
    h.update(security_param.to_le_bytes());
    h.update(identity);
    let digest = h.finalize();
    let fingerprint = KeyFingerprint(digest[..8].try_into().expect("digest is 32 bytes"));

    let pk = PublicKey {
        fingerprint,
        security_param,
        inner: Arc::new(PublicInner {
            mask,
            rng: Mutex::new(ChaCha20Rng::from_seed(enc_seed)),
        }),
    };
    Ok(KeyPair {
        pk,
        sk: SecretKey { fingerprint, mask },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct Envelope {
    pub(crate) fingerprint: KeyFingerprint,
    pub(crate) nonce: u128,
    pub(crate) payload: u64,
}

const KIND_BYTE: u8 = 0;
const KIND_BOOL: u8 = 1;

impl Envelope {
    fn to_bytes(self, kind: u8) -> [u8; ENVELOPE_LEN] {
        let mut out = [0u8; ENVELOPE_LEN];
        out[0] = ENVELOPE_VERSION;
        out[1] = REFERENCE_BACKEND_ID;
        out[2] = kind;
        out[3..11].copy_from_slice(&self.fingerprint.0);
        out[11..27].copy_from_slice(&self.nonce.to_le_bytes());
        out[27..35].copy_from_slice(&self.payload.to_le_bytes());
        out
    }

    fn from_bytes(bytes: &[u8], kind: u8) -> Result<Self, CryptoError> {
        if bytes.len() != ENVELOPE_LEN {
            return Err(CryptoError::Malformed(format!(
                "expected {ENVELOPE_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0] != ENVELOPE_VERSION {
            return Err(CryptoError::Malformed(format!("unsupported version {}", bytes[0])));
        }
        if bytes[1] != REFERENCE_BACKEND_ID {
            return Err(CryptoError::Malformed(format!("unknown backend id {}", bytes[1])));
        }
        if bytes[2] != kind {
            return Err(CryptoError::Malformed(format!("wrong ciphertext kind {}", bytes[2])));
        }
        Ok(Envelope {
            fingerprint: KeyFingerprint(bytes[3..11].try_into().expect("sliced 8")),
            nonce: u128::from_le_bytes(bytes[11..27].try_into().expect("sliced 16")),
            payload: u64::from_le_bytes(bytes[27..35].try_into().expect("sliced 8")),
        })
    }
}

macro_rules! envelope_type {
    ($name:ident, $kind:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        pub struct $name(pub(crate) Envelope);

        impl $name {
            pub fn fingerprint(&self) -> KeyFingerprint {
                self.0.fingerprint
            }

            /// The masked payload. Reveals nothing without the secret key.
            pub fn payload(&self) -> u64 {
                self.0.payload
            }

            pub fn nonce(&self) -> u128 {
                self.0.nonce
            }

            /// Versioned envelope: version, backend id, kind, key fingerprint, nonce, payload.
            pub fn to_bytes(&self) -> [u8; ENVELOPE_LEN] {
                self.0.to_bytes($kind)
            }

            pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
                Envelope::from_bytes(bytes, $kind).map($name)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({}…)", stringify!($name), &hex::encode(self.0.payload.to_le_bytes())[..8])
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.to_bytes()))
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
                $name::from_bytes(&bytes).map_err(serde::de::Error::custom)
            }
        }
    };
}

envelope_type!(Ciphertext, KIND_BYTE);
envelope_type!(CipherBool, KIND_BOOL);

/// An encrypted ASCII string. The length is public.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CipherString {
    chars: Vec<Ciphertext>,
}

impl CipherString {
    pub fn from_chars(chars: Vec<Ciphertext>) -> Self {
        CipherString { chars }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[Ciphertext] {
        &self.chars
    }

    pub fn into_chars(self) -> Vec<Ciphertext> {
        self.chars
    }

    /// Length-prefixed concatenation of the character envelopes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.chars.len() * ENVELOPE_LEN);
        out.push(ENVELOPE_VERSION);
        out.extend_from_slice(&(self.chars.len() as u32).to_le_bytes());
        for c in &self.chars {
            out.extend_from_slice(&c.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() < 5 || bytes[0] != ENVELOPE_VERSION {
            return Err(CryptoError::Malformed("bad string header".into()));
        }
        let n = u32::from_le_bytes(bytes[1..5].try_into().expect("sliced 4")) as usize;
        let body = &bytes[5..];
        if body.len() != n * ENVELOPE_LEN {
            return Err(CryptoError::Malformed(format!(
                "string length {n} does not match {} body bytes",
                body.len()
            )));
        }
        let chars = body
            .chunks_exact(ENVELOPE_LEN)
            .map(Ciphertext::from_bytes)
            .collect::<Result<_, _>>()?;
        Ok(CipherString { chars })
    }
}

pub fn enc(value: u8, pk: &PublicKey) -> Ciphertext {
    Ciphertext(pk.seal(value as u64, pk.fresh_nonce()))
}

pub fn enc_bool(value: bool, pk: &PublicKey) -> CipherBool {
    CipherBool(pk.seal(value as u64, pk.fresh_nonce()))
}

/// Encrypts ASCII text character by character.
pub fn enc_str(text: &str, pk: &PublicKey) -> Result<CipherString, CryptoError> {
    if let Some((position, ch)) = text.chars().enumerate().find(|(_, c)| !c.is_ascii()) {
        return Err(CryptoError::NonAscii { position, ch });
    }
    Ok(CipherString {
        chars: text.bytes().map(|b| enc(b, pk)).collect(),
    })
}

pub fn dec(c: &Ciphertext, sk: &SecretKey) -> Result<u8, CryptoError> {
    sk.open(&c.0, u8::MAX as u64).map(|v| v as u8)
}

pub fn dec_bool(c: &CipherBool, sk: &SecretKey) -> Result<bool, CryptoError> {
    sk.open(&c.0, 1).map(|v| v == 1)
}

pub fn dec_str(s: &CipherString, sk: &SecretKey) -> Result<Vec<u8>, CryptoError> {
    s.chars.iter().map(|c| dec(c, sk)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> KeyPair {
        keygen_seeded(128, 7).unwrap()
    }

    #[test]
    fn round_trip_all_ascii() {
        let kp = pair();
        for x in 0..=127u8 {
            assert_eq!(dec(&enc(x, &kp.pk), &kp.sk).unwrap(), x);
        }
    }

    #[test]
    fn key_isolation() {
        let a = keygen(128).unwrap();
        let b = keygen(128).unwrap();
        assert_ne!(a.pk.fingerprint(), b.pk.fingerprint());
        let c = enc(0x41, &a.pk);
        assert_eq!(dec(&c, &b.sk), Err(CryptoError::KeyMismatch));
        assert_eq!(dec(&c, &a.sk), Ok(0x41));
    }

    #[test]
    fn seeded_keygen_is_reproducible() {
        let a = keygen_seeded(128, 42).unwrap();
        let b = keygen_seeded(128, 42).unwrap();
        assert_eq!(a.pk.fingerprint(), b.pk.fingerprint());
        assert_eq!(a.pk.fingerprint().to_string(), "93b0873e35fcb21d");
        assert_ne!(keygen_seeded(128, 43).unwrap().pk.fingerprint(), a.pk.fingerprint());
    }

    #[test]
    fn zero_security_param_rejected() {
        assert!(matches!(keygen(0), Err(CryptoError::InvalidSecurityParameter(0))));
    }

    #[test]
    fn probabilistic_string_encryption() {
        let kp = pair();
        let x = enc_str("Canon 24-70mm", &kp.pk).unwrap();
        let y = enc_str("Canon 24-70mm", &kp.pk).unwrap();
        assert_ne!(x, y);
        for (a, b) in x.chars().iter().zip(y.chars()) {
            assert_ne!(a.payload(), b.payload());
        }
        assert_eq!(dec_str(&x, &kp.sk).unwrap(), dec_str(&y, &kp.sk).unwrap());
    }

    #[test]
    fn empty_and_ascii_strings() {
        let kp = pair();
        assert_eq!(enc_str("", &kp.pk).unwrap().len(), 0);
        assert_eq!(dec_str(&enc_str("abc", &kp.pk).unwrap(), &kp.sk).unwrap(), vec![0x61, 0x62, 0x63]);
        assert_eq!(
            enc_str("caf\u{e9}", &kp.pk).unwrap_err(),
            CryptoError::NonAscii { position: 3, ch: '\u{e9}' }
        );
    }

    #[test]
    fn envelope_round_trip_and_rejection() {
        let kp = pair();
        let c = enc(0x7f, &kp.pk);
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), ENVELOPE_LEN);
        assert_eq!(Ciphertext::from_bytes(&bytes).unwrap(), c);
        assert!(CipherBool::from_bytes(&bytes).is_err());
        let mut bad = bytes;
        bad[0] = 9;
        assert!(Ciphertext::from_bytes(&bad).is_err());

        let s = enc_str("hello", &kp.pk).unwrap();
        assert_eq!(CipherString::from_bytes(&s.to_bytes()).unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CipherString>(&json).unwrap(), s);
    }

    #[test]
    fn bool_decrypts_to_bit() {
        let kp = pair();
        assert!(dec_bool(&enc_bool(true, &kp.pk), &kp.sk).unwrap());
        assert!(!dec_bool(&enc_bool(false, &kp.pk), &kp.sk).unwrap());
        // a byte ciphertext of 0x41 relabelled as a bool fails the integrity check
        let c = enc(0x41, &kp.pk);
        assert_eq!(dec_bool(&CipherBool(c.0), &kp.sk), Err(CryptoError::Corrupted));
    }
}
