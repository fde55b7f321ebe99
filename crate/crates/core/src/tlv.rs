//! Type-length-value framing.
//!
//! Type and length are both variable-length unsigned integers:
//!
//! | value range            | encoding                    |
//! |------------------------|-----------------------------|
//! | `< 253`                | 1 byte                      |
//! | `<= 0xFFFF`            | `0xFD` + 2 bytes big-endian |
//! | `<= 0xFFFF_FFFF`       | `0xFE` + 4 bytes big-endian |
//! | otherwise              | `0xFF` + 8 bytes big-endian |

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("codec error at offset {offset}: {reason}")]
pub struct CodecError {
    pub offset: usize,
    pub reason: String,
}

impl CodecError {
    pub fn new(offset: usize, reason: impl Into<String>) -> Self {
        Self {
            offset,
            reason: reason.into(),
        }
    }
}

pub fn varint_len(v: u64) -> usize {
    match v {
        0..=252 => 1,
        253..=0xFFFF => 3,
        0x1_0000..=0xFFFF_FFFF => 5,
        _ => 9,
    }
}

pub fn write_varint(buf: &mut Vec<u8>, v: u64) {
    match v {
        0..=252 => buf.push(v as u8),
        253..=0xFFFF => {
            buf.push(0xFD);
            buf.extend_from_slice(&(v as u16).to_be_bytes());
        }
        0x1_0000..=0xFFFF_FFFF => {
            buf.push(0xFE);
            buf.extend_from_slice(&(v as u32).to_be_bytes());
        }
        _ => {
            buf.push(0xFF);
            buf.extend_from_slice(&v.to_be_bytes());
        }
    }
}

/// Encoded size of a TLV element with a value of `value_len` bytes.
pub fn tlv_len(typ: u64, value_len: usize) -> usize {
    varint_len(typ) + varint_len(value_len as u64) + value_len
}

pub fn write_tlv(buf: &mut Vec<u8>, typ: u64, value: &[u8]) {
    write_varint(buf, typ);
    write_varint(buf, value.len() as u64);
    buf.extend_from_slice(value);
}

/// Writes a TLV whose value is produced by `f`, patching in the length.
pub fn write_nested(buf: &mut Vec<u8>, typ: u64, f: impl FnOnce(&mut Vec<u8>)) {
    let mut inner = Vec::new();
    f(&mut inner);
    write_tlv(buf, typ, &inner);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlvElement {
    pub typ: u64,
    pub value: Vec<u8>,
}

impl TlvElement {
    pub fn new(typ: u64, value: impl Into<Vec<u8>>) -> Self {
        Self {
            typ,
            value: value.into(),
        }
    }

    pub fn length(&self) -> u64 {
        self.value.len() as u64
    }

    pub fn encoded_len(&self) -> usize {
        tlv_len(self.typ, self.value.len())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        write_tlv(&mut buf, self.typ, &self.value);
        buf
    }

    /// Decodes exactly one element; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = TlvReader::new(bytes);
        let (typ, value) = r.read()?;
        r.expect_end()?;
        Ok(Self::new(typ, value))
    }
}

/// Cursor over a byte slice of concatenated TLV elements.
#[derive(Debug, Clone)]
pub struct TlvReader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> TlvReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self::with_base(buf, 0)
    }

    /// `base` is added to reported error offsets so nested readers report
    /// positions relative to the outermost buffer.
    pub fn with_base(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn err(&self, reason: impl Into<String>) -> CodecError {
        CodecError::new(self.offset(), reason)
    }

    pub fn read_varint(&mut self) -> Result<u64, CodecError> {
        let first = *self
            .buf
            .get(self.pos)
            .ok_or_else(|| self.err("truncated varint"))?;
        let width = match first {
            0..=252 => {
                self.pos += 1;
                return Ok(first as u64);
            }
            0xFD => 2,
            0xFE => 4,
            0xFF => 8,
        };
        let start = self.pos + 1;
        let bytes = self
            .buf
            .get(start..start + width)
            .ok_or_else(|| self.err("truncated varint"))?;
        let v = bytes.iter().fold(0u64, |acc, b| (acc << 8) | *b as u64);
        self.pos = start + width;
        Ok(v)
    }

    /// Reads one element, returning its type, value slice, and the offset of the value.
    pub fn read_with_offset(&mut self) -> Result<(u64, &'a [u8], usize), CodecError> {
        let start = self.pos;
        let typ = self.read_varint()?;
        let len = self.read_varint()?;
        let len = usize::try_from(len).map_err(|_| self.err("length overflow"))?;
        let value_off = self.pos;
        let end = value_off
            .checked_add(len)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| {
                CodecError::new(self.base + start, format!("truncated element of type {typ}"))
            })?;
        self.pos = end;
        Ok((typ, &self.buf[value_off..end], self.base + value_off))
    }

    pub fn read(&mut self) -> Result<(u64, &'a [u8]), CodecError> {
        self.read_with_offset().map(|(t, v, _)| (t, v))
    }

    /// Reads one element and checks its type.
    pub fn expect(&mut self, typ: u64) -> Result<(&'a [u8], usize), CodecError> {
        let at = self.offset();
        let (t, v, off) = self.read_with_offset()?;
        if t != typ {
            return Err(CodecError::new(at, format!("expected type {typ}, found {t}")));
        }
        Ok((v, off))
    }

    /// Type of the next element without consuming it.
    pub fn peek_type(&self) -> Option<u64> {
        let mut probe = self.clone();
        probe.read_varint().ok()
    }

    pub fn expect_end(&self) -> Result<(), CodecError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self.err("trailing bytes"))
        }
    }
}

pub fn read_u32_be(value: &[u8], offset: usize) -> Result<u32, CodecError> {
    let arr: [u8; 4] = value
        .try_into()
        .map_err(|_| CodecError::new(offset, "expected 4-byte integer"))?;
    Ok(u32::from_be_bytes(arr))
}

pub fn read_u64_be(value: &[u8], offset: usize) -> Result<u64, CodecError> {
    let arr: [u8; 8] = value
        .try_into()
        .map_err(|_| CodecError::new(offset, "expected 8-byte integer"))?;
    Ok(u64::from_be_bytes(arr))
}
