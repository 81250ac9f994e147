//! Byte-level plumbing for the binary key files. All key containers share
//! one frame: magic, format version, a kind tag, and a profile flag, then
//! kind-specific payload. Lengths and scalars are little-endian.

pub(crate) const MAGIC: [u8; 4] = *b"PRCK";
pub(crate) const VERSION: u8 = 1;

pub(crate) const KIND_SUBSTITUTION: u8 = 0;
pub(crate) const KIND_INDEXING: u8 = 1;
pub(crate) const KIND_WATERMARK: u8 = 2;

pub(crate) const PROFILE_THEORY: u8 = 0;
/// Demo-profile keys are marked insecure right in the header: their sizes
/// are picked for fast experiments, not for any hardness margin.
pub(crate) const PROFILE_INSECURE_DEMO: u8 = 1;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(kind: u8, profile: u8) -> Writer {
        let mut buf = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.push(VERSION);
        buf.push(kind);
        buf.push(profile);
        Writer { buf }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn blob(&mut self, bytes: &[u8]) {
        self.u32(bytes.len() as u32);
        self.buf.extend_from_slice(bytes);
    }

    /// Bits packed LSB-first into ceil(len/8) bytes, without a length
    /// prefix; the count must be recoverable from earlier fields.
    pub fn bits(&mut self, bits: impl Iterator<Item = bool>) {
        let mut byte = 0u8;
        let mut at = 0;
        for b in bits {
            byte |= (b as u8) << at;
            at += 1;
            if at == 8 {
                self.buf.push(byte);
                byte = 0;
                at = 0;
            }
        }
        if at > 0 {
            self.buf.push(byte);
        }
    }

    pub fn indices(&mut self, v: &[u32]) {
        for &i in v {
            self.u32(i);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    /// Checks the frame and returns the reader positioned at the payload,
    /// along with the kind and profile tags.
    pub fn open(bytes: &'a [u8]) -> Result<(Reader<'a>, u8, u8), String> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != MAGIC {
            return Err("missing key file magic".to_string());
        }
        let version = r.u8()?;
        if version != VERSION {
            return Err(format!("unsupported key file version {version}"));
        }
        let kind = r.u8()?;
        let profile = r.u8()?;
        Ok((r, kind, profile))
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8], String> {
        if self.at + len > self.bytes.len() {
            return Err(format!(
                "truncated key file: wanted {len} bytes at offset {}, have {}",
                self.at,
                self.bytes.len() - self.at
            ));
        }
        let s = &self.bytes[self.at..self.at + len];
        self.at += len;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn blob(&mut self) -> Result<&'a [u8], String> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn bits(&mut self, count: usize) -> Result<Vec<bool>, String> {
        let packed = self.take(count.div_ceil(8))?;
        Ok((0..count)
            .map(|i| packed[i / 8] >> (i % 8) & 1 == 1)
            .collect())
    }

    pub fn indices(&mut self, count: usize) -> Result<Vec<u32>, String> {
        (0..count).map(|_| self.u32()).collect()
    }

    pub fn expect_end(&self) -> Result<(), String> {
        if self.at != self.bytes.len() {
            return Err(format!(
                "{} trailing bytes in key file",
                self.bytes.len() - self.at
            ));
        }
        Ok(())
    }
}
