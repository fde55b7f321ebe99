use crate::name::Name;
use crate::tlv::CodecError;

/// Maps file-local packet indices onto one global index space: file `i`
/// occupies `[offset(i), offset(i) + count_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GlobalOrdering {
    /// Prefix sums; `offsets[i]` is the first index of file `i`, the last
    /// element is the total.
    offsets: Vec<usize>,
}

impl GlobalOrdering {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        Self { offsets }
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn file_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn offset(&self, file: usize) -> usize {
        self.offsets[file]
    }

    pub fn global(&self, file: usize, local: usize) -> usize {
        self.offsets[file] + local
    }

    /// `(file, local index)` for a global index.
    pub fn locate(&self, g: usize) -> Option<(usize, usize)> {
        if g >= self.total() {
            return None;
        }
        let file = self.offsets.partition_point(|o| *o <= g) - 1;
        Some((file, g - self.offsets[file]))
    }
}

/// One bit per collection packet, set when the packet is held.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    collection: Name,
    words: Vec<u64>,
    len: usize,
    have: usize,
}

impl Bitmap {
    pub fn new(collection: Name, len: usize) -> Self {
        Self {
            collection,
            words: vec![0; len.div_ceil(64)],
            len,
            have: 0,
        }
    }

    pub fn full(collection: Name, len: usize) -> Self {
        let mut b = Self::new(collection, len);
        for g in 0..len {
            b.set(g);
        }
        b
    }

    pub fn collection(&self) -> &Name {
        &self.collection
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn have_count(&self) -> usize {
        self.have
    }

    pub fn missing_count(&self) -> usize {
        self.len - self.have
    }

    pub fn is_complete(&self) -> bool {
        self.have == self.len
    }

    pub fn get(&self, g: usize) -> bool {
        assert!(g < self.len, "bit {g} out of range {}", self.len);
        self.words[g / 64] >> (g % 64) & 1 == 1
    }

    /// Sets bit `g`; returns true if it was previously clear.
    pub fn set(&mut self, g: usize) -> bool {
        assert!(g < self.len, "bit {g} out of range {}", self.len);
        let mask = 1u64 << (g % 64);
        let w = &mut self.words[g / 64];
        let fresh = *w & mask == 0;
        *w |= mask;
        self.have += fresh as usize;
        fresh
    }

    pub fn clear(&mut self, g: usize) -> bool {
        assert!(g < self.len, "bit {g} out of range {}", self.len);
        let mask = 1u64 << (g % 64);
        let w = &mut self.words[g / 64];
        let was = *w & mask != 0;
        *w &= !mask;
        self.have -= was as usize;
        was
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |g| self.get(*g))
    }

    pub fn zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |g| !self.get(*g))
    }

    /// Calls `f` for every clear bit in ascending order.
    pub fn for_each_zero(&self, mut f: impl FnMut(usize)) {
        for (wi, w) in self.words.iter().enumerate() {
            let base = wi * 64;
            let valid = (self.len - base).min(64);
            let mask = if valid == 64 { u64::MAX } else { (1u64 << valid) - 1 };
            let mut z = !w & mask;
            while z != 0 {
                f(base + z.trailing_zeros() as usize);
                z &= z - 1;
            }
        }
    }

    /// In-place union; lengths must match.
    pub fn union_with(&mut self, other: &Bitmap) {
        assert_eq!(self.len, other.len, "bitmap length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
        self.have = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    /// Number of bits set here and clear in `other`.
    pub fn count_and_not(&self, other: &Bitmap) -> usize {
        assert_eq!(self.len, other.len, "bitmap length mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & !b).count_ones() as usize)
            .sum()
    }

    /// Wire form: 4-byte big-endian bit count, then the bits packed
    /// most-significant first, zero padded to a whole byte.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u32).to_be_bytes());
        let mut bytes = vec![0u8; self.len.div_ceil(8)];
        for g in self.ones() {
            bytes[g / 8] |= 0x80 >> (g % 8);
        }
        out.extend_from_slice(&bytes);
        out
    }

    /// Decodes a wire bitmap, returning it and the number of bytes consumed.
    pub fn decode(collection: Name, bytes: &[u8]) -> Result<(Bitmap, usize), CodecError> {
        let head: [u8; 4] = bytes
            .get(..4)
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| CodecError::new(0, "truncated bitmap length"))?;
        let len = u32::from_be_bytes(head) as usize;
        let nbytes = len.div_ceil(8);
        let body = bytes
            .get(4..4 + nbytes)
            .ok_or_else(|| CodecError::new(4, "truncated bitmap body"))?;
        let mut b = Bitmap::new(collection, len);
        for (i, byte) in body.iter().enumerate() {
            for bit in 0..8 {
                if byte & (0x80 >> bit) != 0 {
                    let g = i * 8 + bit;
                    if g >= len {
                        return Err(CodecError::new(4 + i, "nonzero bitmap padding"));
                    }
                    b.set(g);
                }
            }
        }
        Ok((b, 4 + nbytes))
    }
}
