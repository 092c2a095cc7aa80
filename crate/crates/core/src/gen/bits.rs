/// MSB-first bit cursor over a byte slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn bit_pos(&self) -> u64 {
        self.pos
    }

    pub fn remaining_bits(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    /// Reads `width` (1..=64) bits as a big-endian unsigned integer.
    pub fn read(&mut self, width: u32) -> Option<u64> {
        if u64::from(width) > self.remaining_bits() || width == 0 || width > 64 {
            return None;
        }
        let mut v: u64 = 0;
        for _ in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | u64::from(bit);
            self.pos += 1;
        }
        Some(v)
    }

    /// Reads `n` whole bytes; the cursor must be byte aligned.
    pub fn read_bytes(&mut self, n: u64) -> Option<&'a [u8]> {
        if self.pos % 8 != 0 || n.checked_mul(8)? > self.remaining_bits() {
            return None;
        }
        let start = (self.pos / 8) as usize;
        self.pos += n * 8;
        Some(&self.bytes[start..start + n as usize])
    }
}

#[derive(Debug, Clone, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    pos: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        BitWriter::default()
    }

    pub fn bit_pos(&self) -> u64 {
        self.pos
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            let bit = ((value >> i) & 1) as u8;
            if self.pos % 8 == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                let last = self.bytes.last_mut().expect("pushed above");
                *last |= 1 << (7 - (self.pos % 8));
            }
            self.pos += 1;
        }
    }

    pub fn write_bytes(&mut self, data: &[u8]) {
        if self.pos % 8 == 0 {
            self.bytes.extend_from_slice(data);
            self.pos += data.len() as u64 * 8;
        } else {
            for b in data {
                self.write(u64::from(*b), 8);
            }
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Overwrites `width` bits at `bit_offset` in place.
pub fn patch_bits(bytes: &mut [u8], bit_offset: u64, width: u32, value: u64) {
    for i in 0..u64::from(width) {
        let bit = (value >> (u64::from(width) - 1 - i)) & 1;
        let pos = bit_offset + i;
        let mask = 1u8 << (7 - (pos % 8));
        let byte = &mut bytes[(pos / 8) as usize];
        if bit == 1 {
            *byte |= mask;
        } else {
            *byte &= !mask;
        }
    }
}
