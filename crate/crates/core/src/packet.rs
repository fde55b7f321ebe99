//! Interest/Data packet model and its wire codec.
//!
//! Type numbers are private to this crate and listed in [`types`]; they do not
//! aim at compatibility with any deployed forwarder.

use bytes::Bytes;

use crate::name::Name;
use crate::tlv::{read_u32_be, tlv_len, write_tlv, write_varint, CodecError, TlvReader};

pub mod types {
    pub const INTEREST: u64 = 0x05;
    pub const DATA: u64 = 0x06;
    pub const NAME: u64 = 0x07;
    pub const NAME_COMPONENT: u64 = 0x08;
    pub const NONCE: u64 = 0x0A;
    pub const CONTENT: u64 = 0x15;
    pub const SIGNATURE_INFO: u64 = 0x16;
    pub const SIGNATURE_VALUE: u64 = 0x17;
    pub const SIGNATURE_TYPE: u64 = 0x1B;
    pub const KEY_ID: u64 = 0x1D;
    pub const APP_PARAMETERS: u64 = 0x24;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignatureScheme {
    /// HMAC-SHA256 under a shared key; deterministic and cheap.
    KeyedSha256,
    Ed25519,
}

impl SignatureScheme {
    pub fn code(self) -> u8 {
        match self {
            SignatureScheme::KeyedSha256 => 4,
            SignatureScheme::Ed25519 => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            4 => Some(SignatureScheme::KeyedSha256),
            5 => Some(SignatureScheme::Ed25519),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigInfo {
    pub scheme: SignatureScheme,
    pub key_id: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub info: SigInfo,
    pub value: Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    /// Application parameters; carries the sender bitmap for bitmap Interests.
    pub app_params: Bytes,
}

impl Interest {
    pub fn new(name: Name, nonce: u32) -> Self {
        Self {
            name,
            nonce,
            app_params: Bytes::new(),
        }
    }

    pub fn with_params(name: Name, nonce: u32, params: impl Into<Bytes>) -> Self {
        Self {
            name,
            nonce,
            app_params: params.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Data {
    pub name: Name,
    pub content: Bytes,
    pub signature: Option<Signature>,
}

impl Data {
    pub fn new(name: Name, content: impl Into<Bytes>) -> Self {
        Self {
            name,
            content: content.into(),
            signature: None,
        }
    }

    /// Bytes covered by the signature: encoded name, content and signature info.
    pub fn signed_portion(&self, info: &SigInfo) -> Vec<u8> {
        let mut buf = Vec::new();
        encode_name(&mut buf, &self.name);
        write_tlv(&mut buf, types::CONTENT, &self.content);
        encode_sig_info(&mut buf, info);
        buf
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    Interest,
    Data,
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
        }
    }

    pub fn kind(&self) -> PacketKind {
        match self {
            Packet::Interest(_) => PacketKind::Interest,
            Packet::Data(_) => PacketKind::Data,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.wire_len());
        match self {
            Packet::Interest(i) => {
                write_varint(&mut buf, types::INTEREST);
                write_varint(&mut buf, interest_body_len(i) as u64);
                encode_name(&mut buf, &i.name);
                write_tlv(&mut buf, types::NONCE, &i.nonce.to_be_bytes());
                if !i.app_params.is_empty() {
                    write_tlv(&mut buf, types::APP_PARAMETERS, &i.app_params);
                }
            }
            Packet::Data(d) => {
                write_varint(&mut buf, types::DATA);
                write_varint(&mut buf, data_body_len(d) as u64);
                encode_name(&mut buf, &d.name);
                write_tlv(&mut buf, types::CONTENT, &d.content);
                if let Some(sig) = &d.signature {
                    encode_sig_info(&mut buf, &sig.info);
                    write_tlv(&mut buf, types::SIGNATURE_VALUE, &sig.value);
                }
            }
        }
        debug_assert_eq!(buf.len(), self.wire_len());
        buf
    }

    /// Encoded size in bytes, computed without encoding.
    pub fn wire_len(&self) -> usize {
        match self {
            Packet::Interest(i) => tlv_len(types::INTEREST, interest_body_len(i)),
            Packet::Data(d) => tlv_len(types::DATA, data_body_len(d)),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Packet, CodecError> {
        if bytes.is_empty() {
            return Err(CodecError::new(0, "empty input"));
        }
        let mut r = TlvReader::new(bytes);
        let (typ, body, off) = r.read_with_offset()?;
        r.expect_end()?;
        match typ {
            types::INTEREST => decode_interest(body, off).map(Packet::Interest),
            types::DATA => decode_data(body, off).map(Packet::Data),
            other => Err(CodecError::new(0, format!("unknown packet type {other}"))),
        }
    }
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(i)
    }
}

impl From<Data> for Packet {
    fn from(d: Data) -> Self {
        Packet::Data(d)
    }
}

fn name_value_len(name: &Name) -> usize {
    name.components()
        .iter()
        .map(|c| tlv_len(types::NAME_COMPONENT, c.len()))
        .sum()
}

pub fn name_wire_len(name: &Name) -> usize {
    tlv_len(types::NAME, name_value_len(name))
}

pub fn encode_name(buf: &mut Vec<u8>, name: &Name) {
    write_varint(buf, types::NAME);
    write_varint(buf, name_value_len(name) as u64);
    for c in name.components() {
        write_tlv(buf, types::NAME_COMPONENT, c);
    }
}

pub fn decode_name(value: &[u8], offset: usize) -> Result<Name, CodecError> {
    let mut r = TlvReader::with_base(value, offset);
    let mut name = Name::empty();
    while !r.is_empty() {
        let (c, at) = r.expect(types::NAME_COMPONENT)?;
        name.try_push(c.to_vec())
            .map_err(|e| CodecError::new(at, e.to_string()))?;
    }
    Ok(name)
}

fn sig_info_value_len(info: &SigInfo) -> usize {
    tlv_len(types::SIGNATURE_TYPE, 1) + tlv_len(types::KEY_ID, info.key_id.len())
}

fn encode_sig_info(buf: &mut Vec<u8>, info: &SigInfo) {
    write_varint(buf, types::SIGNATURE_INFO);
    write_varint(buf, sig_info_value_len(info) as u64);
    write_tlv(buf, types::SIGNATURE_TYPE, &[info.scheme.code()]);
    write_tlv(buf, types::KEY_ID, &info.key_id);
}

fn interest_body_len(i: &Interest) -> usize {
    let mut n = name_wire_len(&i.name) + tlv_len(types::NONCE, 4);
    if !i.app_params.is_empty() {
        n += tlv_len(types::APP_PARAMETERS, i.app_params.len());
    }
    n
}

fn data_body_len(d: &Data) -> usize {
    let mut n = name_wire_len(&d.name) + tlv_len(types::CONTENT, d.content.len());
    if let Some(sig) = &d.signature {
        n += tlv_len(types::SIGNATURE_INFO, sig_info_value_len(&sig.info));
        n += tlv_len(types::SIGNATURE_VALUE, sig.value.len());
    }
    n
}

fn decode_interest(body: &[u8], offset: usize) -> Result<Interest, CodecError> {
    let mut r = TlvReader::with_base(body, offset);
    let (name_v, name_off) = r.expect(types::NAME)?;
    let name = decode_name(name_v, name_off)?;
    let (nonce_v, nonce_off) = r.expect(types::NONCE)?;
    let nonce = read_u32_be(nonce_v, nonce_off)?;
    let mut app_params = Bytes::new();
    if !r.is_empty() {
        let (p, _) = r.expect(types::APP_PARAMETERS)?;
        if p.is_empty() {
            return Err(r.err("empty application parameters must be omitted"));
        }
        app_params = Bytes::copy_from_slice(p);
    }
    r.expect_end()?;
    Ok(Interest {
        name,
        nonce,
        app_params,
    })
}

fn decode_data(body: &[u8], offset: usize) -> Result<Data, CodecError> {
    let mut r = TlvReader::with_base(body, offset);
    let (name_v, name_off) = r.expect(types::NAME)?;
    let name = decode_name(name_v, name_off)?;
    let (content, _) = r.expect(types::CONTENT)?;
    let mut signature = None;
    if !r.is_empty() {
        let (info_v, info_off) = r.expect(types::SIGNATURE_INFO)?;
        let info = decode_sig_info(info_v, info_off)?;
        let (value, _) = r.expect(types::SIGNATURE_VALUE)?;
        signature = Some(Signature {
            info,
            value: Bytes::copy_from_slice(value),
        });
    }
    r.expect_end()?;
    Ok(Data {
        name,
        content: Bytes::copy_from_slice(content),
        signature,
    })
}

fn decode_sig_info(value: &[u8], offset: usize) -> Result<SigInfo, CodecError> {
    let mut r = TlvReader::with_base(value, offset);
    let (t, t_off) = r.expect(types::SIGNATURE_TYPE)?;
    let scheme = match t {
        [code] => SignatureScheme::from_code(*code),
        _ => None,
    }
    .ok_or_else(|| CodecError::new(t_off, "unknown signature type"))?;
    let (key_id, _) = r.expect(types::KEY_ID)?;
    r.expect_end()?;
    Ok(SigInfo {
        scheme,
        key_id: key_id.to_vec(),
    })
}

/// Framing overhead of a Data packet beyond its content bytes.
pub fn data_overhead(d: &Data) -> usize {
    Packet::Data(d.clone()).wire_len() - d.content.len()
}
