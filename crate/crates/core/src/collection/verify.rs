use std::collections::BTreeMap;

use crate::packet::Data;

use super::merkle::merkle_root;
use super::metadata::{CollectionMetadata, MetadataFormat};
use super::CollectionError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Global indices whose integrity is now established.
    Accepted(Vec<usize>),
    /// Global indices that must be discarded.
    Rejected { reason: String, indices: Vec<usize> },
    /// Merkle-format packet waiting for the rest of its file.
    Deferred,
}

/// Leaf digests collected per file while a Merkle tree is incomplete.
#[derive(Debug, Default, Clone)]
pub struct VerifyContext {
    pending: BTreeMap<usize, BTreeMap<usize, Vec<u8>>>,
}

impl VerifyContext {
    pub fn pending_in(&self, file: usize) -> usize {
        self.pending.get(&file).map_or(0, BTreeMap::len)
    }
}

pub fn verify_packet(
    md: &CollectionMetadata,
    pkt: &Data,
    ctx: &mut VerifyContext,
) -> Result<Verdict, CollectionError> {
    let g = md.global_index(&pkt.name)?;
    let (f, i) = md.locate(g)?;
    let digest = md.algo.digest(&pkt.content);
    match md.format {
        MetadataFormat::DigestList => {
            let expected = md.files[f].digests.get(i).ok_or(CollectionError::IndexOutOfRange {
                index: i,
                limit: md.files[f].digests.len(),
            })?;
            if *expected == digest {
                Ok(Verdict::Accepted(vec![g]))
            } else {
                Ok(Verdict::Rejected {
                    reason: "digest mismatch".into(),
                    indices: vec![g],
                })
            }
        }
        MetadataFormat::MerkleRoots => {
            let file = &md.files[f];
            let leaves = ctx.pending.entry(f).or_default();
            leaves.insert(i, digest);
            if leaves.len() < file.packet_count {
                return Ok(Verdict::Deferred);
            }
            let leaves = ctx.pending.remove(&f).unwrap();
            let base = md.ordering().offset(f);
            let indices: Vec<usize> = (base..base + file.packet_count).collect();
            let root = merkle_root(leaves.into_values().collect(), md.algo);
            if Some(&root) == file.merkle_root.as_ref() {
                Ok(Verdict::Accepted(indices))
            } else {
                Ok(Verdict::Rejected {
                    reason: "merkle root mismatch".into(),
                    indices,
                })
            }
        }
    }
}
