//! Message names and payloads.
//!
//! | message          | name                                          |
//! |------------------|-----------------------------------------------|
//! | discovery        | `/dapes/discovery` (Data: `.../<peerId>`)       |
//! | metadata segment | `<collection>/metadata/<seq>`                 |
//! | bitmap request   | `<collection>/bitmap/<peerId>/<seq>`          |
//! | bitmap response  | `<collection>/bitmap/<peerId>/<seq>/<responderId>` |
//! | collection data  | `<collection>/<file>/<seq>`                   |

use crate::advertisement::Bitmap;
use crate::name::Name;
use crate::packet::{decode_name, encode_name, types};
use crate::tlv::{read_u32_be, read_u64_be, write_tlv, CodecError, TlvReader};

pub const DISCOVERY: &str = "/dapes/discovery";

mod t {
    pub const PEER_ID: u64 = 0x90;
    pub const ENTRY: u64 = 0x91;
    pub const SEGMENTS: u64 = 0x92;
    pub const HAVE: u64 = 0x93;
    pub const TOTAL: u64 = 0x94;
    pub const HOLDER: u64 = 0x95;
}

pub fn discovery_prefix() -> Name {
    Name::parse(DISCOVERY).unwrap()
}

pub fn discovery_data_name(peer: u64) -> Name {
    discovery_prefix().child_num(peer)
}

pub fn metadata_name(collection: &Name, seq: u32) -> Name {
    collection.child("metadata").child_num(seq as u64)
}

pub fn bitmap_request_name(collection: &Name, peer: u64, seq: u32) -> Name {
    collection.child("bitmap").child_num(peer).child_num(seq as u64)
}

pub fn bitmap_response_name(request: &Name, responder: u64) -> Name {
    request.child_num(responder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Discovery,
    Metadata,
    Bitmap,
    Data,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Discovery,
        Category::Metadata,
        Category::Bitmap,
        Category::Data,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Discovery => "discovery",
            Category::Metadata => "metadata",
            Category::Bitmap => "bitmap",
            Category::Data => "data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Discovery { responder: Option<u64> },
    Metadata { collection: Name, seq: u64 },
    BitmapRequest { collection: Name, peer: u64, seq: u64 },
    BitmapResponse { collection: Name, peer: u64, seq: u64, responder: u64 },
    /// `<collection>/<file>/<seq>` shape; the collection boundary is
    /// assumed to sit two components from the end.
    Packet { collection: Name, seq: u64 },
    Other,
}

fn comp_is(name: &Name, i: usize, s: &str) -> bool {
    name.get(i) == Some(s.as_bytes())
}

/// Classifies a name by its structure.
pub fn classify(name: &Name) -> Message {
    let n = name.len();
    let disc = discovery_prefix();
    if disc.is_prefix_of(name) {
        return match n {
            2 => Message::Discovery { responder: None },
            3 => match name.get_num(2) {
                Some(p) => Message::Discovery { responder: Some(p) },
                None => Message::Other,
            },
            _ => Message::Other,
        };
    }
    if n >= 3 && comp_is(name, n - 2, "metadata") {
        if let Some(seq) = name.get_num(n - 1) {
            return Message::Metadata {
                collection: name.prefix(n - 2),
                seq,
            };
        }
    }
    if n >= 4 && comp_is(name, n - 3, "bitmap") {
        if let (Some(peer), Some(seq)) = (name.get_num(n - 2), name.get_num(n - 1)) {
            return Message::BitmapRequest {
                collection: name.prefix(n - 3),
                peer,
                seq,
            };
        }
    }
    if n >= 5 && comp_is(name, n - 4, "bitmap") {
        if let (Some(peer), Some(seq), Some(responder)) =
            (name.get_num(n - 3), name.get_num(n - 2), name.get_num(n - 1))
        {
            return Message::BitmapResponse {
                collection: name.prefix(n - 4),
                peer,
                seq,
                responder,
            };
        }
    }
    if n >= 3 {
        if let Some(seq) = name.get_num(n - 1) {
            return Message::Packet {
                collection: name.prefix(n - 2),
                seq,
            };
        }
    }
    Message::Other
}

pub fn category(name: &Name) -> Category {
    match classify(name) {
        Message::Discovery { .. } => Category::Discovery,
        Message::Metadata { .. } => Category::Metadata,
        Message::BitmapRequest { .. } | Message::BitmapResponse { .. } => Category::Bitmap,
        Message::Packet { .. } | Message::Other => Category::Data,
    }
}

/// One advertised collection in a discovery reply. `holder` is the
/// replying peer for its own collections, or a direct neighbor of it whose
/// holdings it passes on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryEntry {
    pub collection: Name,
    pub holder: u64,
    pub segments: u32,
    pub have: u32,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscoveryPayload {
    pub peer: u64,
    pub entries: Vec<DiscoveryEntry>,
}

impl DiscoveryPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tlv(&mut buf, t::PEER_ID, &self.peer.to_be_bytes());
        for e in &self.entries {
            let mut inner = Vec::new();
            encode_name(&mut inner, &e.collection);
            write_tlv(&mut inner, t::HOLDER, &e.holder.to_be_bytes());
            write_tlv(&mut inner, t::SEGMENTS, &e.segments.to_be_bytes());
            write_tlv(&mut inner, t::HAVE, &e.have.to_be_bytes());
            write_tlv(&mut inner, t::TOTAL, &e.total.to_be_bytes());
            write_tlv(&mut buf, t::ENTRY, &inner);
        }
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = TlvReader::new(bytes);
        let (v, off) = r.expect(t::PEER_ID)?;
        let peer = read_u64_be(v, off)?;
        let mut entries = Vec::new();
        while !r.is_empty() {
            let (v, off) = r.expect(t::ENTRY)?;
            let mut er = TlvReader::with_base(v, off);
            let (nv, noff) = er.expect(types::NAME)?;
            let collection = decode_name(nv, noff)?;
            let (hv, hoff) = er.expect(t::HOLDER)?;
            let holder = read_u64_be(hv, hoff)?;
            let mut num = |typ| -> Result<u32, CodecError> {
                let (v, off) = er.expect(typ)?;
                read_u32_be(v, off)
            };
            let segments = num(t::SEGMENTS)?;
            let have = num(t::HAVE)?;
            let total = num(t::TOTAL)?;
            er.expect_end()?;
            entries.push(DiscoveryEntry {
                collection,
                holder,
                segments,
                have,
                total,
            });
        }
        Ok(Self { peer, entries })
    }
}

/// Application parameters of a bitmap request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitmapRequest {
    pub bitmap: Bitmap,
    /// Responses wanted before responders stop; `u16::MAX` means all.
    pub wanted: u16,
    pub fresh_encounter: bool,
}

impl BitmapRequest {
    pub fn encode(&self) -> Vec<u8> {
        let mut buf = self.bitmap.encode();
        buf.extend_from_slice(&self.wanted.to_be_bytes());
        buf.push(self.fresh_encounter as u8);
        buf
    }

    pub fn decode(collection: Name, bytes: &[u8]) -> Result<Self, CodecError> {
        let (bitmap, used) = Bitmap::decode(collection, bytes)?;
        let rest = &bytes[used..];
        if rest.len() != 3 {
            return Err(CodecError::new(used, "bad bitmap request trailer"));
        }
        Ok(Self {
            bitmap,
            wanted: u16::from_be_bytes([rest[0], rest[1]]),
            fresh_encounter: rest[2] & 1 == 1,
        })
    }
}

/// Content of a bitmap response: the responder id and its bitmap.
pub fn encode_bitmap_response(peer: u64, bitmap: &Bitmap) -> Vec<u8> {
    let mut buf = peer.to_be_bytes().to_vec();
    buf.extend_from_slice(&bitmap.encode());
    buf
}

pub fn decode_bitmap_response(collection: Name, bytes: &[u8]) -> Result<(u64, Bitmap), CodecError> {
    let head = bytes
        .get(..8)
        .ok_or_else(|| CodecError::new(0, "truncated bitmap response"))?;
    let peer = read_u64_be(head, 0)?;
    let (bitmap, used) = Bitmap::decode(collection, &bytes[8..])?;
    if 8 + used != bytes.len() {
        return Err(CodecError::new(8 + used, "trailing bytes"));
    }
    Ok((peer, bitmap))
}
