use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

/// Packet digest algorithm. `TigerLike` stands in for any 24-byte hash and
/// is computed as a truncated SHA-256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DigestAlgo {
    Sha1,
    #[default]
    Sha256,
    TigerLike,
}

impl DigestAlgo {
    pub fn output_len(self) -> usize {
        match self {
            DigestAlgo::Sha1 => 20,
            DigestAlgo::Sha256 => 32,
            DigestAlgo::TigerLike => 24,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DigestAlgo::Sha1 => 1,
            DigestAlgo::Sha256 => 2,
            DigestAlgo::TigerLike => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DigestAlgo::Sha1),
            2 => Some(DigestAlgo::Sha256),
            3 => Some(DigestAlgo::TigerLike),
            _ => None,
        }
    }

    pub fn digest(self, bytes: &[u8]) -> Vec<u8> {
        match self {
            DigestAlgo::Sha1 => Sha1::digest(bytes).to_vec(),
            DigestAlgo::Sha256 => Sha256::digest(bytes).to_vec(),
            DigestAlgo::TigerLike => Sha256::digest(bytes)[..24].to_vec(),
        }
    }

    /// Digest of the concatenation `a ‖ b`.
    pub fn digest_pair(self, a: &[u8], b: &[u8]) -> Vec<u8> {
        match self {
            DigestAlgo::Sha1 => Sha1::new().chain_update(a).chain_update(b).finalize().to_vec(),
            DigestAlgo::Sha256 => Sha256::new().chain_update(a).chain_update(b).finalize().to_vec(),
            DigestAlgo::TigerLike => {
                Sha256::new().chain_update(a).chain_update(b).finalize()[..24].to_vec()
            }
        }
    }
}
