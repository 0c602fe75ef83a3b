use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use hmac::{Hmac, KeyInit, Mac};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

type HmacSha256 = Hmac<Sha256>;

/// Banknote identifier, rendered as 16 hex digits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Serial(pub u64);

impl fmt::Display for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl fmt::Debug for Serial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Serial({self})")
    }
}

impl FromStr for Serial {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        u64::from_str_radix(s, 16).map(Serial)
    }
}

impl Serialize for Serial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Serial {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// HMAC-SHA256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AuthTag(pub [u8; 32]);

impl fmt::Debug for AuthTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AuthTag({})", hex::encode(&self.0[..6]))
    }
}

impl Serialize for AuthTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for AuthTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(AuthTag(out))
    }
}

/// Length-prefixed message builder so that field boundaries are unambiguous.
#[derive(Default)]
pub(crate) struct Transcript(Vec<u8>);

impl Transcript {
    pub(crate) fn new(domain: &str) -> Self {
        let mut t = Self::default();
        t.push(domain.as_bytes());
        t
    }

    pub(crate) fn push(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
        self.0.extend_from_slice(bytes);
        self
    }

    pub(crate) fn push_u64(&mut self, v: u64) -> &mut Self {
        self.push(&v.to_be_bytes())
    }

    pub(crate) fn bytes(&self) -> &[u8] {
        &self.0
    }
}

pub(crate) fn mac(key: &[u8], message: &[u8]) -> AuthTag {
    let mut m = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(message);
    AuthTag(m.finalize().into_bytes().into())
}

pub(crate) fn mac_verify(key: &[u8], message: &[u8], tag: &AuthTag) -> bool {
    let mut m = HmacSha256::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(message);
    m.verify_slice(&tag.0).is_ok()
}

/// The issuer's symmetric authentication key.
#[derive(Clone)]
pub(crate) struct AuthKey(Arc<[u8; 32]>);

impl AuthKey {
    pub(crate) fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; 32];
        rng.fill_bytes(&mut k);
        Self(Arc::new(k))
    }

    pub(crate) fn tag(&self, message: &Transcript) -> AuthTag {
        mac(&self.0[..], message.bytes())
    }

    pub(crate) fn fingerprint(&self) -> String {
        hex::encode(&Sha256::digest(&self.0[..])[..8])
    }

    pub(crate) fn verifier(&self) -> TagVerifier {
        TagVerifier(self.clone())
    }
}

/// Sealed capability that checks issuer tags without exposing the key.
#[derive(Clone)]
pub struct TagVerifier(AuthKey);

impl TagVerifier {
    pub(crate) fn verify(&self, message: &Transcript, tag: &AuthTag) -> bool {
        mac_verify(&self.0 .0[..], message.bytes(), tag)
    }
}

impl fmt::Debug for TagVerifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagVerifier({})", self.0.fingerprint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_hex_round_trip() {
        let s = Serial(0xdead_beef);
        assert_eq!(s.to_string(), "00000000deadbeef");
        assert_eq!("0x00000000deadbeef".parse::<Serial>().unwrap(), s);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Serial>(&json).unwrap(), s);
    }

    #[test]
    fn tags_bind_every_field() {
        let key = [7u8; 32];
        let mut a = Transcript::new("x");
        a.push(b"ab").push(b"c");
        let mut b = Transcript::new("x");
        b.push(b"a").push(b"bc");
        let ta = mac(&key, a.bytes());
        assert!(mac_verify(&key, a.bytes(), &ta));
        assert!(!mac_verify(&key, b.bytes(), &ta));
        assert!(!mac_verify(&[8u8; 32], a.bytes(), &ta));
    }
}
