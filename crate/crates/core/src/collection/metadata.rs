//! Metadata wire layout (content of the concatenated metadata segments):
//!
//! ```text
//! NAME                       collection name
//! MD_FORMAT      (0x81)      1 byte: 0 digest-list, 1 merkle-roots
//! MD_DIGEST_ALGO (0x82)      1 byte
//! MD_FILE        (0x83)*     per file, in collection order:
//!   FILE_NAME    (0x84)        component bytes
//!   PACKET_COUNT (0x85)        4 bytes
//!   SUBNAME      (0x0100)*     digest-list only, index order:
//!     INDEX      (0x87)          4 bytes
//!     DIGEST     (0x88)          digest bytes
//!   MERKLE_ROOT  (0x86)        merkle-roots only
//! MD_PRODUCER    (0x89)      producer key id
//! SIGNATURE_INFO, SIGNATURE_VALUE over every preceding byte
//! ```
//!
//! With a 20-byte digest a subname is `FD 01 00 1C | 87 04 <4> | 88 14 <20>`:
//! 4 index bytes, 20 digest bytes and 8 bytes of framing.

use bytes::Bytes;
use serde::{Deserialize, Serialize};

use crate::advertisement::GlobalOrdering;
use crate::name::Name;
use crate::packet::{
    decode_name, encode_name, types, Data, SigInfo, Signature, SignatureScheme,
};
use crate::tlv::{read_u32_be, write_tlv, CodecError, TlvReader};

use super::digest::DigestAlgo;
use super::merkle::merkle_root;
use super::signer::{sign_data, SignError, Signer, TrustAnchors};
use super::{packet_name, Collection, CollectionError};

pub mod mdtypes {
    pub const FORMAT: u64 = 0x81;
    pub const DIGEST_ALGO: u64 = 0x82;
    pub const FILE: u64 = 0x83;
    pub const FILE_NAME: u64 = 0x84;
    pub const PACKET_COUNT: u64 = 0x85;
    pub const MERKLE_ROOT: u64 = 0x86;
    pub const INDEX: u64 = 0x87;
    pub const DIGEST: u64 = 0x88;
    pub const PRODUCER: u64 = 0x89;
    pub const SUBNAME: u64 = 0x0100;
}

pub const SUBNAME_INDEX_BYTES: usize = 4;
pub const SUBNAME_FRAMING_BYTES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetadataFormat {
    #[default]
    DigestList,
    MerkleRoots,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub name: Vec<u8>,
    pub packet_count: usize,
    pub digests: Vec<Vec<u8>>,
    pub merkle_root: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionMetadata {
    pub collection: Name,
    pub format: MetadataFormat,
    pub algo: DigestAlgo,
    pub files: Vec<FileEntry>,
    pub producer: Vec<u8>,
    pub signature: Option<Signature>,
    ordering: GlobalOrdering,
}

/// Bytes taken by `n` digest subnames.
pub fn metadata_subnames_bytes(
    n_subnames: u64,
    index_bytes: u64,
    digest_bytes: u64,
    framing_bytes: u64,
) -> u64 {
    n_subnames * (index_bytes + digest_bytes + framing_bytes)
}

#[cfg(test)]
fn subname_len(digest_len: usize) -> usize {
    use crate::tlv::tlv_len;
    let inner = tlv_len(mdtypes::INDEX, SUBNAME_INDEX_BYTES) + tlv_len(mdtypes::DIGEST, digest_len);
    tlv_len(mdtypes::SUBNAME, inner)
}

impl CollectionMetadata {
    pub fn new(
        collection: Name,
        format: MetadataFormat,
        algo: DigestAlgo,
        files: Vec<FileEntry>,
        producer: Vec<u8>,
    ) -> Self {
        let ordering = GlobalOrdering::from_counts(files.iter().map(|f| f.packet_count));
        Self {
            collection,
            format,
            algo,
            files,
            producer,
            signature: None,
            ordering,
        }
    }

    pub fn ordering(&self) -> &GlobalOrdering {
        &self.ordering
    }

    pub fn total_packets(&self) -> usize {
        self.ordering.total()
    }

    pub fn file_index(&self, component: &[u8]) -> Option<usize> {
        self.files.iter().position(|f| f.name == component)
    }

    pub fn locate(&self, g: usize) -> Result<(usize, usize), CollectionError> {
        self.ordering.locate(g).ok_or(CollectionError::IndexOutOfRange {
            index: g,
            limit: self.total_packets(),
        })
    }

    pub fn packet_name(&self, g: usize) -> Result<Name, CollectionError> {
        let (f, i) = self.locate(g)?;
        Ok(packet_name(&self.collection, &self.files[f].name, i))
    }

    /// Global index of a collection packet name `<collection>/<file>/<seq>`.
    pub fn global_index(&self, name: &Name) -> Result<usize, CollectionError> {
        let base = self.collection.len();
        if name.len() != base + 2 || !self.collection.is_prefix_of(name) {
            return Err(CollectionError::ForeignPacket(name.clone()));
        }
        let file = name.get(base).unwrap();
        let f = self
            .file_index(file)
            .ok_or_else(|| CollectionError::UnknownFile(String::from_utf8_lossy(file).into()))?;
        let i = name
            .get_num(base + 1)
            .ok_or_else(|| CollectionError::ForeignPacket(name.clone()))? as usize;
        let limit = self.files[f].packet_count;
        if i >= limit {
            return Err(CollectionError::IndexOutOfRange { index: i, limit });
        }
        Ok(self.ordering.global(f, i))
    }

    pub fn metadata_prefix(&self) -> Name {
        metadata_prefix(&self.collection)
    }

    fn encode_unsigned(&self) -> (Vec<u8>, usize) {
        let mut buf = Vec::new();
        let mut subnames = 0;
        encode_name(&mut buf, &self.collection);
        let fmt = match self.format {
            MetadataFormat::DigestList => 0u8,
            MetadataFormat::MerkleRoots => 1u8,
        };
        write_tlv(&mut buf, mdtypes::FORMAT, &[fmt]);
        write_tlv(&mut buf, mdtypes::DIGEST_ALGO, &[self.algo.code()]);
        for f in &self.files {
            let mut inner = Vec::new();
            write_tlv(&mut inner, mdtypes::FILE_NAME, &f.name);
            write_tlv(&mut inner, mdtypes::PACKET_COUNT, &(f.packet_count as u32).to_be_bytes());
            for (i, d) in f.digests.iter().enumerate() {
                let mut sub = Vec::with_capacity(SUBNAME_INDEX_BYTES + d.len() + 4);
                write_tlv(&mut sub, mdtypes::INDEX, &(i as u32).to_be_bytes());
                write_tlv(&mut sub, mdtypes::DIGEST, d);
                let before = inner.len();
                write_tlv(&mut inner, mdtypes::SUBNAME, &sub);
                subnames += inner.len() - before;
            }
            if let Some(root) = &f.merkle_root {
                write_tlv(&mut inner, mdtypes::MERKLE_ROOT, root);
            }
            write_tlv(&mut buf, mdtypes::FILE, &inner);
        }
        write_tlv(&mut buf, mdtypes::PRODUCER, &self.producer);
        (buf, subnames)
    }

    /// Byte count of all subname elements as emitted by the serializer.
    pub fn subnames_section_len(&self) -> usize {
        self.encode_unsigned().1
    }

    pub fn sign(&mut self, signer: &dyn Signer) {
        let info = signer.sig_info();
        let mut msg = self.encode_unsigned().0;
        encode_sig_info(&mut msg, &info);
        self.signature = Some(Signature {
            info,
            value: Bytes::from(signer.sign(&msg)),
        });
    }

    pub fn verify_signature(&self, anchors: &TrustAnchors) -> Result<bool, SignError> {
        let sig = self.signature.as_ref().ok_or(SignError::Unsigned)?;
        let mut msg = self.encode_unsigned().0;
        encode_sig_info(&mut msg, &sig.info);
        anchors.verify(&msg, sig)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = self.encode_unsigned().0;
        if let Some(sig) = &self.signature {
            encode_sig_info(&mut buf, &sig.info);
            write_tlv(&mut buf, types::SIGNATURE_VALUE, &sig.value);
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = TlvReader::new(bytes);
        let (v, off) = r.expect(types::NAME)?;
        let collection = decode_name(v, off)?;
        let (v, off) = r.expect(mdtypes::FORMAT)?;
        let format = match v {
            [0] => MetadataFormat::DigestList,
            [1] => MetadataFormat::MerkleRoots,
            _ => return Err(CodecError::new(off, "bad metadata format")),
        };
        let (v, off) = r.expect(mdtypes::DIGEST_ALGO)?;
        let algo = match v {
            [c] => DigestAlgo::from_code(*c),
            _ => None,
        }
        .ok_or_else(|| CodecError::new(off, "bad digest algorithm"))?;
        let mut files = Vec::new();
        while r.peek_type() == Some(mdtypes::FILE) {
            let (v, off) = r.expect(mdtypes::FILE)?;
            files.push(decode_file(v, off, format, algo)?);
        }
        let (v, _) = r.expect(mdtypes::PRODUCER)?;
        let producer = v.to_vec();
        let signature = if r.is_empty() {
            None
        } else {
            let (v, off) = r.expect(types::SIGNATURE_INFO)?;
            let info = decode_sig_info(v, off)?;
            let (v, _) = r.expect(types::SIGNATURE_VALUE)?;
            Some(Signature {
                info,
                value: Bytes::copy_from_slice(v),
            })
        };
        r.expect_end()?;
        let mut md = CollectionMetadata::new(collection, format, algo, files, producer);
        md.signature = signature;
        Ok(md)
    }

    /// Splits the encoding into signed Data segments `<collection>/metadata/<seq>`.
    pub fn segments(&self, segment_size: usize, signer: &dyn Signer) -> Vec<Data> {
        let bytes = Bytes::from(self.encode());
        let prefix = self.metadata_prefix();
        let n = bytes.len().div_ceil(segment_size.max(1)).max(1);
        (0..n)
            .map(|i| {
                let start = i * segment_size;
                let end = (start + segment_size).min(bytes.len());
                let mut d = Data::new(prefix.child_num(i as u64), bytes.slice(start..end));
                sign_data(&mut d, signer);
                d
            })
            .collect()
    }
}

pub fn metadata_prefix(collection: &Name) -> Name {
    collection.child("metadata")
}

fn encode_sig_info(buf: &mut Vec<u8>, info: &SigInfo) {
    let mut inner = Vec::new();
    write_tlv(&mut inner, types::SIGNATURE_TYPE, &[info.scheme.code()]);
    write_tlv(&mut inner, types::KEY_ID, &info.key_id);
    write_tlv(buf, types::SIGNATURE_INFO, &inner);
}

fn decode_sig_info(v: &[u8], off: usize) -> Result<SigInfo, CodecError> {
    let mut r = TlvReader::with_base(v, off);
    let (t, toff) = r.expect(types::SIGNATURE_TYPE)?;
    let scheme = match t {
        [c] => SignatureScheme::from_code(*c),
        _ => None,
    }
    .ok_or_else(|| CodecError::new(toff, "bad signature type"))?;
    let (k, _) = r.expect(types::KEY_ID)?;
    r.expect_end()?;
    Ok(SigInfo {
        scheme,
        key_id: k.to_vec(),
    })
}

fn decode_file(
    v: &[u8],
    off: usize,
    format: MetadataFormat,
    algo: DigestAlgo,
) -> Result<FileEntry, CodecError> {
    let mut r = TlvReader::with_base(v, off);
    let (name, noff) = r.expect(mdtypes::FILE_NAME)?;
    if name.is_empty() || name.contains(&b'/') {
        return Err(CodecError::new(noff, "bad file name"));
    }
    let (c, coff) = r.expect(mdtypes::PACKET_COUNT)?;
    let packet_count = read_u32_be(c, coff)? as usize;
    if packet_count == 0 {
        return Err(CodecError::new(coff, "file without packets"));
    }
    let mut digests = Vec::new();
    let mut merkle = None;
    match format {
        MetadataFormat::DigestList => {
            for i in 0..packet_count {
                let (s, soff) = r.expect(mdtypes::SUBNAME)?;
                let mut sr = TlvReader::with_base(s, soff);
                let (idx, ioff) = sr.expect(mdtypes::INDEX)?;
                if read_u32_be(idx, ioff)? as usize != i {
                    return Err(CodecError::new(ioff, "subname out of order"));
                }
                let (d, doff) = sr.expect(mdtypes::DIGEST)?;
                if d.len() != algo.output_len() {
                    return Err(CodecError::new(doff, "digest length mismatch"));
                }
                sr.expect_end()?;
                digests.push(d.to_vec());
            }
        }
        MetadataFormat::MerkleRoots => {
            let (root, roff) = r.expect(mdtypes::MERKLE_ROOT)?;
            if root.len() != algo.output_len() {
                return Err(CodecError::new(roff, "root length mismatch"));
            }
            merkle = Some(root.to_vec());
        }
    }
    r.expect_end()?;
    Ok(FileEntry {
        name: name.to_vec(),
        packet_count,
        digests,
        merkle_root: merkle,
    })
}

/// Builds and signs metadata for `col`, returning it with its segments.
pub fn build_metadata(
    col: &Collection,
    format: MetadataFormat,
    algo: DigestAlgo,
    signer: &dyn Signer,
) -> (CollectionMetadata, Vec<Data>) {
    let files = col
        .files
        .iter()
        .zip(&col.packets)
        .map(|(f, pkts)| {
            let digests: Vec<Vec<u8>> = pkts.iter().map(|d| algo.digest(&d.content)).collect();
            let (digests, merkle_root) = match format {
                MetadataFormat::DigestList => (digests, None),
                MetadataFormat::MerkleRoots => (Vec::new(), Some(merkle_root(digests, algo))),
            };
            FileEntry {
                name: f.name.as_bytes().to_vec(),
                packet_count: pkts.len(),
                digests,
                merkle_root,
            }
        })
        .collect();
    let mut md = CollectionMetadata::new(
        col.name.clone(),
        format,
        algo,
        files,
        signer.key_id().to_vec(),
    );
    md.sign(signer);
    let segs = md.segments(col.packet_size, signer);
    (md, segs)
}

/// Decodes metadata from its segments given in sequence order.
pub fn reassemble_metadata(segments: &[Data]) -> Result<CollectionMetadata, CodecError> {
    let mut buf = Vec::new();
    for s in segments {
        buf.extend_from_slice(&s.content);
    }
    CollectionMetadata::decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{build_collection, FileSpec, HmacSigner};
    use proptest::prelude::*;

    fn signer() -> HmacSigner {
        HmacSigner::new("producer", "k")
    }

    fn one_mb() -> Collection {
        let content: Vec<u8> = (0..1000 * 1024).map(|i| (i % 251) as u8).collect();
        build_collection(
            Name::parse("/c/1533783192").unwrap(),
            vec![FileSpec::new("f", content)],
            1024,
            &signer(),
        )
        .unwrap()
    }

    #[test]
    fn subnames_formula() {
        assert_eq!(metadata_subnames_bytes(1000, 4, 20, 8), 32_000);
        assert_eq!(metadata_subnames_bytes(0, 4, 20, 8), 0);
        assert_eq!(metadata_subnames_bytes(1, 4, 32, 8), 44);
    }

    #[test]
    fn subname_framing_is_eight_bytes_for_all_digests() {
        for a in [DigestAlgo::Sha1, DigestAlgo::Sha256, DigestAlgo::TigerLike] {
            assert_eq!(
                subname_len(a.output_len()),
                SUBNAME_INDEX_BYTES + a.output_len() + SUBNAME_FRAMING_BYTES
            );
        }
    }

    #[test]
    fn digest_list_for_one_megabyte_spans_32_packets() {
        let col = one_mb();
        let (md, segs) = build_metadata(&col, MetadataFormat::DigestList, DigestAlgo::Sha1, &signer());
        assert_eq!(md.subnames_section_len(), 32_000);
        assert!(segs.len() >= 32, "{} segments", segs.len());
        assert_eq!(segs[0].name.to_string(), "/c/1533783192/metadata/0");
    }

    #[test]
    fn merkle_roots_fit_one_packet() {
        let col = one_mb();
        let (md, segs) = build_metadata(&col, MetadataFormat::MerkleRoots, DigestAlgo::TigerLike, &signer());
        assert_eq!(segs.len(), 1);
        assert_eq!(md.files[0].merkle_root.as_ref().unwrap().len(), 24);
    }

    #[test]
    fn single_byte_file_fits_one_packet() {
        let col = build_collection(Name::parse("/c").unwrap(), vec![FileSpec::new("f", vec![1u8])], 1024, &signer()).unwrap();
        let (_, segs) = build_metadata(&col, MetadataFormat::DigestList, DigestAlgo::Sha256, &signer());
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn round_trip_and_signature() {
        let col = one_mb();
        let s = signer();
        let anchors = TrustAnchors::default().with("producer", s.verify_key());
        for fmt in [MetadataFormat::DigestList, MetadataFormat::MerkleRoots] {
            let (md, segs) = build_metadata(&col, fmt, DigestAlgo::Sha256, &s);
            let back = reassemble_metadata(&segs).unwrap();
            assert_eq!(back, md);
            assert_eq!(back.verify_signature(&anchors), Ok(true));
            let mut tampered = back.clone();
            tampered.producer = b"mallory".to_vec();
            assert_eq!(tampered.verify_signature(&anchors), Ok(false));
        }
    }

    #[test]
    fn two_file_layout_global_names() {
        let col = build_collection(
            Name::parse("/damaged-bridge-1533783192").unwrap(),
            vec![
                FileSpec::new("bridge-picture", vec![0u8; 100 * 1024]),
                FileSpec::new("bridge-location", vec![0u8; 3 * 1024]),
            ],
            1024,
            &signer(),
        )
        .unwrap();
        let (md, _) = build_metadata(&col, MetadataFormat::MerkleRoots, DigestAlgo::Sha256, &signer());
        assert_eq!(md.packet_name(0).unwrap().to_string(), "/damaged-bridge-1533783192/bridge-picture/0");
        assert_eq!(md.packet_name(100).unwrap().to_string(), "/damaged-bridge-1533783192/bridge-location/0");
        assert!(matches!(md.packet_name(103), Err(CollectionError::IndexOutOfRange { .. })));
        assert_eq!(md.global_index(&md.packet_name(101).unwrap()).unwrap(), 101);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn size_law_and_determinism(
            sizes in prop::collection::vec(1usize..=64 * 1024, 1..=5),
            big in any::<bool>(),
            algo in prop::sample::select(vec![DigestAlgo::Sha1, DigestAlgo::Sha256, DigestAlgo::TigerLike]),
        ) {
            let packet_size = if big { 1024 } else { 256 };
            let files: Vec<FileSpec> = sizes.iter().enumerate()
                .map(|(i, n)| FileSpec::new(format!("f{i}"), vec![i as u8; *n])).collect();
            let col = build_collection(Name::parse("/p").unwrap(), files, packet_size, &signer()).unwrap();
            let (md, segs) = build_metadata(&col, MetadataFormat::DigestList, algo, &signer());
            let expect = metadata_subnames_bytes(
                col.total_packets() as u64,
                SUBNAME_INDEX_BYTES as u64,
                algo.output_len() as u64,
                SUBNAME_FRAMING_BYTES as u64,
            );
            prop_assert_eq!(md.subnames_section_len() as u64, expect);
            let (_, again) = build_metadata(&col, MetadataFormat::DigestList, algo, &signer());
            prop_assert_eq!(segs, again);
        }
    }
}
