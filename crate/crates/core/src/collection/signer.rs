use std::collections::BTreeMap;

use bytes::Bytes;
use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::packet::{Data, SigInfo, Signature, SignatureScheme};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignError {
    #[error("unknown key id {0}")]
    UnknownKey(String),
    #[error("packet is unsigned")]
    Unsigned,
}

pub trait Signer {
    fn key_id(&self) -> &[u8];
    fn scheme(&self) -> SignatureScheme;
    fn sign(&self, message: &[u8]) -> Vec<u8>;

    fn sig_info(&self) -> SigInfo {
        SigInfo {
            scheme: self.scheme(),
            key_id: self.key_id().to_vec(),
        }
    }
}

/// Deterministic keyed-hash scheme (HMAC-SHA256). Signer and verifier share
/// the secret, so it only stands in for real signatures in tests and sims.
#[derive(Clone)]
pub struct HmacSigner {
    key_id: Vec<u8>,
    secret: Vec<u8>,
}

impl HmacSigner {
    pub fn new(key_id: impl Into<Vec<u8>>, secret: impl Into<Vec<u8>>) -> Self {
        Self {
            key_id: key_id.into(),
            secret: secret.into(),
        }
    }

    pub fn verify_key(&self) -> VerifyKey {
        VerifyKey::Hmac(self.secret.clone())
    }
}

fn hmac_tag(secret: &[u8], message: &[u8]) -> Vec<u8> {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret).expect("hmac accepts any key length");
    mac.update(message);
    mac.finalize().into_bytes().to_vec()
}

impl Signer for HmacSigner {
    fn key_id(&self) -> &[u8] {
        &self.key_id
    }

    fn scheme(&self) -> SignatureScheme {
        SignatureScheme::KeyedSha256
    }

    fn sign(&self, message: &[u8]) -> Vec<u8> {
        hmac_tag(&self.secret, message)
    }
}

pub struct Ed25519Signer {
    key_id: Vec<u8>,
    key: SigningKey,
}

impl Ed25519Signer {
    pub fn from_seed(key_id: impl Into<Vec<u8>>, seed: [u8; 32]) -> Self {
        Self {
            key_id: key_id.into(),
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn verify_key(&self) -> VerifyKey {
        VerifyKey::Ed25519(self.key.verifying_key())
    }
}

impl Signer for Ed25519Signer {
    fn key_id(&self) -> &[u8] {
        &self.key_id
    }

    fn scheme(&self) -> SignatureScheme {
        SignatureScheme::Ed25519
    }

    fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.key.sign(message).to_bytes().to_vec()
    }
}

#[derive(Clone, Debug)]
pub enum VerifyKey {
    Hmac(Vec<u8>),
    Ed25519(VerifyingKey),
}

impl VerifyKey {
    fn scheme(&self) -> SignatureScheme {
        match self {
            VerifyKey::Hmac(_) => SignatureScheme::KeyedSha256,
            VerifyKey::Ed25519(_) => SignatureScheme::Ed25519,
        }
    }

    pub fn verify(&self, message: &[u8], value: &[u8]) -> bool {
        match self {
            VerifyKey::Hmac(secret) => {
                let mut mac =
                    Hmac::<Sha256>::new_from_slice(secret).expect("hmac accepts any key length");
                mac.update(message);
                mac.verify_slice(value).is_ok()
            }
            VerifyKey::Ed25519(vk) => match ed25519_dalek::Signature::from_slice(value) {
                Ok(sig) => vk.verify(message, &sig).is_ok(),
                Err(_) => false,
            },
        }
    }
}

/// Static set of keys trusted to sign collection metadata.
#[derive(Clone, Debug, Default)]
pub struct TrustAnchors {
    keys: BTreeMap<Vec<u8>, VerifyKey>,
}

impl TrustAnchors {
    pub fn add(&mut self, key_id: impl Into<Vec<u8>>, key: VerifyKey) {
        self.keys.insert(key_id.into(), key);
    }

    pub fn with(mut self, key_id: impl Into<Vec<u8>>, key: VerifyKey) -> Self {
        self.add(key_id, key);
        self
    }

    pub fn verify(&self, message: &[u8], sig: &Signature) -> Result<bool, SignError> {
        let key = self
            .keys
            .get(&sig.info.key_id)
            .ok_or_else(|| SignError::UnknownKey(String::from_utf8_lossy(&sig.info.key_id).into()))?;
        if key.scheme() != sig.info.scheme {
            return Ok(false);
        }
        Ok(key.verify(message, &sig.value))
    }
}

pub fn sign_data(data: &mut Data, signer: &dyn Signer) {
    let info = signer.sig_info();
    let value = signer.sign(&data.signed_portion(&info));
    data.signature = Some(Signature {
        info,
        value: Bytes::from(value),
    });
}

pub fn verify_data(data: &Data, anchors: &TrustAnchors) -> Result<bool, SignError> {
    let sig = data.signature.as_ref().ok_or(SignError::Unsigned)?;
    anchors.verify(&data.signed_portion(&sig.info), sig)
}
