//! File collections: segmentation into named packets, signed metadata in
//! digest-list or Merkle-root form, and per-packet integrity checks.

mod digest;
mod merkle;
mod metadata;
mod signer;
mod verify;

use std::collections::BTreeSet;

use bytes::Bytes;
use thiserror::Error;

use crate::name::Name;
use crate::packet::Data;

pub use digest::DigestAlgo;
pub use merkle::{merkle_root, MerkleTree};
pub use metadata::{
    build_metadata, metadata_subnames_bytes, reassemble_metadata, CollectionMetadata, FileEntry,
    MetadataFormat, SUBNAME_FRAMING_BYTES, SUBNAME_INDEX_BYTES,
};
pub use signer::{
    sign_data, verify_data, Ed25519Signer, HmacSigner, SignError, Signer, TrustAnchors, VerifyKey,
};
pub use verify::{verify_packet, Verdict, VerifyContext};

pub const DEFAULT_PACKET_SIZE: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CollectionError {
    #[error("duplicate file name {0:?}")]
    DuplicateFileName(String),
    #[error("file {0:?} is empty")]
    EmptyFile(String),
    #[error("invalid file name {0:?}")]
    InvalidFileName(String),
    #[error("packet size must be at least 1")]
    ZeroPacketSize,
    #[error("collection has no files")]
    NoFiles,
    #[error("unknown file {0:?}")]
    UnknownFile(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("packet {0} is outside the collection")]
    ForeignPacket(Name),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileSpec {
    pub name: String,
    pub content: Vec<u8>,
}

impl FileSpec {
    pub fn new(name: impl Into<String>, content: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Collection {
    pub name: Name,
    pub files: Vec<FileSpec>,
    pub packet_size: usize,
    /// Per file, packets in index order.
    pub packets: Vec<Vec<Data>>,
}

impl Collection {
    pub fn total_packets(&self) -> usize {
        self.packets.iter().map(Vec::len).sum()
    }

    /// Packets of all files in canonical order.
    pub fn iter_packets(&self) -> impl Iterator<Item = &Data> {
        self.packets.iter().flatten()
    }

    pub fn packet_name(&self, file: usize, index: usize) -> Name {
        packet_name(&self.name, self.files[file].name.as_bytes(), index)
    }
}

pub fn packet_name(collection: &Name, file: &[u8], index: usize) -> Name {
    collection.child(file.to_vec()).child_num(index as u64)
}

pub fn packet_count(len: usize, packet_size: usize) -> usize {
    len.div_ceil(packet_size)
}

pub fn build_collection(
    name: Name,
    files: Vec<FileSpec>,
    packet_size: usize,
    signer: &dyn Signer,
) -> Result<Collection, CollectionError> {
    if packet_size == 0 {
        return Err(CollectionError::ZeroPacketSize);
    }
    if files.is_empty() {
        return Err(CollectionError::NoFiles);
    }
    let mut seen = BTreeSet::new();
    for f in &files {
        if f.name.is_empty() || f.name.contains('/') || f.name == "metadata" || f.name == "bitmap" {
            return Err(CollectionError::InvalidFileName(f.name.clone()));
        }
        if !seen.insert(f.name.as_str()) {
            return Err(CollectionError::DuplicateFileName(f.name.clone()));
        }
        if f.content.is_empty() {
            return Err(CollectionError::EmptyFile(f.name.clone()));
        }
    }
    let packets = files
        .iter()
        .map(|f| {
            let shared = Bytes::from(f.content.clone());
            (0..packet_count(shared.len(), packet_size))
                .map(|i| {
                    let start = i * packet_size;
                    let end = (start + packet_size).min(shared.len());
                    let mut d =
                        Data::new(packet_name(&name, f.name.as_bytes(), i), shared.slice(start..end));
                    sign_data(&mut d, signer);
                    d
                })
                .collect()
        })
        .collect();
    Ok(Collection {
        name,
        files,
        packet_size,
        packets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn signer() -> HmacSigner {
        HmacSigner::new("producer", "k")
    }

    fn c() -> Name {
        Name::parse("/c").unwrap()
    }

    #[test]
    fn hundred_packets_indexed_from_zero() {
        let col = build_collection(c(), vec![FileSpec::new("f", vec![1u8; 100 * 1024])], 1024, &signer()).unwrap();
        assert_eq!(col.packets[0].len(), 100);
        assert_eq!(col.packets[0][0].name.to_string(), "/c/f/0");
        assert_eq!(col.packets[0][99].name.to_string(), "/c/f/99");
        assert!(col.iter_packets().all(|d| d.signature.is_some()));
    }

    #[test]
    fn one_byte_file_is_one_packet() {
        let col = build_collection(c(), vec![FileSpec::new("f", vec![1u8])], 1024, &signer()).unwrap();
        assert_eq!(col.total_packets(), 1);
    }

    #[test]
    fn remainder_packet() {
        let col = build_collection(c(), vec![FileSpec::new("f", vec![1u8; 1025])], 1024, &signer()).unwrap();
        assert_eq!(col.packets[0].len(), 2);
        assert_eq!(col.packets[0][1].content.len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let s = signer();
        let dup = vec![FileSpec::new("f", vec![1u8]), FileSpec::new("f", vec![2u8])];
        assert_eq!(
            build_collection(c(), dup, 1024, &s).unwrap_err(),
            CollectionError::DuplicateFileName("f".into())
        );
        assert_eq!(
            build_collection(c(), vec![FileSpec::new("f", vec![1u8])], 0, &s).unwrap_err(),
            CollectionError::ZeroPacketSize
        );
        assert!(build_collection(c(), vec![FileSpec::new("f", Vec::<u8>::new())], 4, &s).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn reassembly_reproduces_files(
            sizes in prop::collection::vec(1usize..=64 * 1024, 1..=5),
            big in any::<bool>(),
            seed in any::<u8>(),
        ) {
            let packet_size = if big { 1024 } else { 256 };
            let files: Vec<FileSpec> = sizes
                .iter()
                .enumerate()
                .map(|(i, n)| FileSpec::new(format!("file{i}"), (0..*n).map(|b| (b as u8).wrapping_mul(31).wrapping_add(seed)).collect::<Vec<u8>>()))
                .collect();
            let col = build_collection(c(), files.clone(), packet_size, &signer()).unwrap();
            let md = build_metadata(&col, MetadataFormat::DigestList, DigestAlgo::Sha256, &signer()).0;
            let lookup: std::collections::BTreeMap<Name, &Data> = col.iter_packets().map(|d| (d.name.clone(), d)).collect();
            let mut rebuilt: Vec<Vec<u8>> = vec![Vec::new(); files.len()];
            for g in 0..md.total_packets() {
                let name = md.packet_name(g).unwrap();
                let (fi, _) = md.locate(g).unwrap();
                rebuilt[fi].extend_from_slice(&lookup[&name].content);
            }
            for (f, r) in files.iter().zip(&rebuilt) {
                prop_assert_eq!(&f.content, r);
            }
        }
    }
}
