//! Local weak PRF families keying the substitution code. Every function
//! here reads only a few input coordinates (the support), which is what the
//! noise-sensitivity machinery in [`crate::oracle`] feeds on. Three kinds
//! are provided: sparse parity, majority XOR parity, and a random lookup
//! table standing in for an arbitrary local function.

use crate::seed::Seed;
use crate::symbols::{Alphabet, SymbolString};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrfError {
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("input has {got} bits, key expects {expected}")]
    LengthMismatch { expected: u32, got: usize },
    #[error("expected a binary string, got an alphabet of {size} symbols")]
    NotBinary { size: u32 },
    #[error("cannot parse key bytes: {0}")]
    ParseKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrfKind {
    SparseParity,
    MajorityParity,
    LookupTable,
}

/// Sampling parameters for a local PRF: input width, locality budget, and
/// output noise. The locality cap tau <= ceil(log2 n) keeps brute-force
/// attacks superpolynomial while the function stays testable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalPrfFamily {
    pub input_len: u32,
    pub locality: u32,
    pub noise_level: f64,
    pub kind: PrfKind,
}

fn ceil_log2(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

fn check_noise(q: f64) -> Result<(), PrfError> {
    if !(0.0..0.5).contains(&q) {
        return Err(PrfError::InvalidFamily(format!(
            "noise level {q} outside [0, 1/2)"
        )));
    }
    Ok(())
}

impl LocalPrfFamily {
    pub fn new(
        input_len: u32,
        locality: u32,
        noise_level: f64,
        kind: PrfKind,
    ) -> Result<LocalPrfFamily, PrfError> {
        check_noise(noise_level)?;
        if locality == 0 || locality > ceil_log2(input_len) {
            return Err(PrfError::InvalidFamily(format!(
                "locality {locality} outside 1..=ceil(log2({input_len})) = {}",
                ceil_log2(input_len)
            )));
        }
        if kind == PrfKind::MajorityParity && locality % 2 != 0 {
            return Err(PrfError::InvalidFamily(format!(
                "majority-parity needs an even locality to split, got {locality}"
            )));
        }
        Ok(LocalPrfFamily {
            input_len,
            locality,
            noise_level,
            kind,
        })
    }
}

/// One sampled local function together with its output noise level. Keys
/// built by [`sample_key`] respect the family's locality cap; the direct
/// constructors only check structure, so tests can build wider functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PrfKey {
    input_len: u32,
    noise_level: f64,
    kind: PrfKeyKind,
}

#[derive(Debug, Clone, PartialEq)]
enum PrfKeyKind {
    /// XOR of the input over `support`.
    SparseParity { support: Vec<u32> },
    /// Majority over `maj` XOR parity over `par`. An even split inside
    /// `maj` counts as majority 0.
    MajorityParity { maj: Vec<u32>, par: Vec<u32> },
    /// `table[idx]` where bit j of `idx` is the input at `support[j]`.
    LookupTable { support: Vec<u32>, table: Vec<bool> },
}

fn check_support(what: &str, support: &[u32], input_len: u32) -> Result<(), PrfError> {
    for (i, &s) in support.iter().enumerate() {
        if s >= input_len {
            return Err(PrfError::InvalidKey(format!(
                "{what} index {s} >= input length {input_len}"
            )));
        }
        if support[..i].contains(&s) {
            return Err(PrfError::InvalidKey(format!("{what} index {s} repeated")));
        }
    }
    Ok(())
}

impl PrfKey {
    pub fn sparse_parity(
        input_len: u32,
        noise_level: f64,
        support: Vec<u32>,
    ) -> Result<PrfKey, PrfError> {
        check_noise(noise_level)?;
        check_support("support", &support, input_len)?;
        if support.is_empty() {
            return Err(PrfError::InvalidKey("empty support".to_string()));
        }
        Ok(PrfKey {
            input_len,
            noise_level,
            kind: PrfKeyKind::SparseParity { support },
        })
    }

    pub fn majority_parity(
        input_len: u32,
        noise_level: f64,
        maj: Vec<u32>,
        par: Vec<u32>,
    ) -> Result<PrfKey, PrfError> {
        check_noise(noise_level)?;
        let mut combined = maj.clone();
        combined.extend_from_slice(&par);
        check_support("support", &combined, input_len)?;
        if maj.is_empty() || par.is_empty() {
            return Err(PrfError::InvalidKey(
                "majority and parity sets must be nonempty".to_string(),
            ));
        }
        Ok(PrfKey {
            input_len,
            noise_level,
            kind: PrfKeyKind::MajorityParity { maj, par },
        })
    }

    pub fn lookup_table(
        input_len: u32,
        noise_level: f64,
        support: Vec<u32>,
        table: Vec<bool>,
    ) -> Result<PrfKey, PrfError> {
        check_noise(noise_level)?;
        check_support("support", &support, input_len)?;
        if support.is_empty() || support.len() > 16 {
            return Err(PrfError::InvalidKey(format!(
                "support size {} outside 1..=16",
                support.len()
            )));
        }
        if table.len() != 1 << support.len() {
            return Err(PrfError::InvalidKey(format!(
                "table has {} entries, support of {} bits needs {}",
                table.len(),
                support.len(),
                1u32 << support.len()
            )));
        }
        Ok(PrfKey {
            input_len,
            noise_level,
            kind: PrfKeyKind::LookupTable { support, table },
        })
    }

    pub fn input_len(&self) -> u32 {
        self.input_len
    }

    pub fn noise_level(&self) -> f64 {
        self.noise_level
    }

    /// Number of input coordinates the function actually reads.
    pub fn locality(&self) -> u32 {
        match &self.kind {
            PrfKeyKind::SparseParity { support } => support.len() as u32,
            PrfKeyKind::MajorityParity { maj, par } => (maj.len() + par.len()) as u32,
            PrfKeyKind::LookupTable { support, .. } => support.len() as u32,
        }
    }

    pub fn kind(&self) -> PrfKind {
        match &self.kind {
            PrfKeyKind::SparseParity { .. } => PrfKind::SparseParity,
            PrfKeyKind::MajorityParity { .. } => PrfKind::MajorityParity,
            PrfKeyKind::LookupTable { .. } => PrfKind::LookupTable,
        }
    }

    /// The coordinates the function reads, in evaluation order.
    pub fn support(&self) -> Vec<u32> {
        match &self.kind {
            PrfKeyKind::SparseParity { support } => support.clone(),
            PrfKeyKind::MajorityParity { maj, par } => {
                let mut s = maj.clone();
                s.extend_from_slice(par);
                s
            }
            PrfKeyKind::LookupTable { support, .. } => support.clone(),
        }
    }
}

/// Draws a key from the family: a random support of the right size, plus a
/// random table for the lookup-table kind. Majority-parity splits the
/// support into two disjoint halves, majority over the first and parity
/// over the second.
pub fn sample_key(family: &LocalPrfFamily, seed: &Seed) -> Result<PrfKey, PrfError> {
    LocalPrfFamily::new(
        family.input_len,
        family.locality,
        family.noise_level,
        family.kind,
    )?;
    let mut rng = seed.rng();
    let tau = family.locality as usize;
    let mut support: Vec<u32> = sample_indices(&mut rng, family.input_len as usize, tau)
        .iter()
        .map(|i| i as u32)
        .collect();
    match family.kind {
        PrfKind::SparseParity => {
            support.sort_unstable();
            PrfKey::sparse_parity(family.input_len, family.noise_level, support)
        }
        PrfKind::MajorityParity => {
            let par = support.split_off(tau / 2);
            let mut maj = support;
            maj.sort_unstable();
            let mut par = par;
            par.sort_unstable();
            PrfKey::majority_parity(family.input_len, family.noise_level, maj, par)
        }
        PrfKind::LookupTable => {
            support.sort_unstable();
            let table: Vec<bool> = (0..1usize << tau).map(|_| rng.gen()).collect();
            PrfKey::lookup_table(family.input_len, family.noise_level, support, table)
        }
    }
}

fn check_input(key: &PrfKey, x: &SymbolString) -> Result<(), PrfError> {
    if x.alphabet() != Alphabet::BINARY {
        return Err(PrfError::NotBinary {
            size: x.alphabet().size(),
        });
    }
    if x.len() != key.input_len as usize {
        return Err(PrfError::LengthMismatch {
            expected: key.input_len,
            got: x.len(),
        });
    }
    Ok(())
}

/// Evaluates the keyed function on an input bit string.
pub fn eval(key: &PrfKey, x: &SymbolString) -> Result<bool, PrfError> {
    check_input(key, x)?;
    Ok(match &key.kind {
        PrfKeyKind::SparseParity { support } => support
            .iter()
            .fold(false, |acc, &i| acc ^ x.bit(i as usize)),
        PrfKeyKind::MajorityParity { maj, par } => {
            let ones = maj.iter().filter(|&&i| x.bit(i as usize)).count();
            let majority = 2 * ones > maj.len();
            let parity = par.iter().fold(false, |acc, &i| acc ^ x.bit(i as usize));
            majority ^ parity
        }
        PrfKeyKind::LookupTable { support, table } => {
            let mut idx = 0usize;
            for (j, &i) in support.iter().enumerate() {
                idx |= (x.bit(i as usize) as usize) << j;
            }
            table[idx]
        }
    })
}

/// Evaluates the function and XORs in a Bernoulli(q) bit drawn from the
/// seed, q being the key's noise level.
pub fn eval_noisy(key: &PrfKey, x: &SymbolString, seed: &Seed) -> Result<bool, PrfError> {
    let clean = eval(key, x)?;
    let flip = key.noise_level > 0.0 && seed.rng().gen_bool(key.noise_level);
    Ok(clean ^ flip)
}

/// A lazily sampled uniform random function on n-bit inputs, the ideal
/// object the keyed families are compared against. Each distinct input gets
/// an independent bit, derived so the answer does not depend on query
/// order.
#[derive(Debug, Clone)]
pub struct RandomFunction {
    input_len: u32,
    seed: Seed,
}

impl RandomFunction {
    pub fn new(input_len: u32, seed: &Seed) -> RandomFunction {
        RandomFunction {
            input_len,
            seed: seed.split("random-function"),
        }
    }

    pub fn eval(&self, x: &SymbolString) -> Result<bool, PrfError> {
        if x.alphabet() != Alphabet::BINARY {
            return Err(PrfError::NotBinary {
                size: x.alphabet().size(),
            });
        }
        if x.len() != self.input_len as usize {
            return Err(PrfError::LengthMismatch {
                expected: self.input_len,
                got: x.len(),
            });
        }
        let mut packed = vec![0u8; x.len().div_ceil(8)];
        for i in 0..x.len() {
            packed[i / 8] |= (x.bit(i) as u8) << (i % 8);
        }
        let h = crate::seed::fnv1a64(&packed);
        Ok(self.seed.split_index("x", h).rng().gen())
    }
}

const KEY_VERSION: u8 = 1;

impl PrfKey {
    /// Byte layout: version u8, kind u8 (0 parity, 1 majority-parity,
    /// 2 lookup-table), input length u32 LE, noise level f64 LE bits, then
    /// per kind: parity = support length u32 LE + indices u32 LE each;
    /// majority-parity = the two set lengths u32 LE then both index lists;
    /// lookup-table = support as for parity, then the table packed LSB
    /// first into ceil(2^tau / 8) bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![KEY_VERSION];
        let push_indices = |out: &mut Vec<u8>, v: &[u32]| {
            out.extend_from_slice(&(v.len() as u32).to_le_bytes());
            for &i in v {
                out.extend_from_slice(&i.to_le_bytes());
            }
        };
        match &self.kind {
            PrfKeyKind::SparseParity { support } => {
                out.push(0);
                out.extend_from_slice(&self.input_len.to_le_bytes());
                out.extend_from_slice(&self.noise_level.to_le_bytes());
                push_indices(&mut out, support);
            }
            PrfKeyKind::MajorityParity { maj, par } => {
                out.push(1);
                out.extend_from_slice(&self.input_len.to_le_bytes());
                out.extend_from_slice(&self.noise_level.to_le_bytes());
                push_indices(&mut out, maj);
                push_indices(&mut out, par);
            }
            PrfKeyKind::LookupTable { support, table } => {
                out.push(2);
                out.extend_from_slice(&self.input_len.to_le_bytes());
                out.extend_from_slice(&self.noise_level.to_le_bytes());
                push_indices(&mut out, support);
                let mut packed = vec![0u8; table.len().div_ceil(8)];
                for (i, &b) in table.iter().enumerate() {
                    packed[i / 8] |= (b as u8) << (i % 8);
                }
                out.extend_from_slice(&packed);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PrfKey, PrfError> {
        let mut cur = Cursor { bytes, at: 0 };
        let version = cur.u8()?;
        if version != KEY_VERSION {
            return Err(PrfError::ParseKey(format!(
                "unsupported key version {version}"
            )));
        }
        let kind = cur.u8()?;
        let input_len = cur.u32()?;
        let noise_level = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
        let key = match kind {
            0 => {
                let support = cur.indices()?;
                PrfKey::sparse_parity(input_len, noise_level, support)
            }
            1 => {
                let maj = cur.indices()?;
                let par = cur.indices()?;
                PrfKey::majority_parity(input_len, noise_level, maj, par)
            }
            2 => {
                let support = cur.indices()?;
                let entries = 1usize
                    .checked_shl(support.len() as u32)
                    .filter(|_| support.len() <= 16)
                    .ok_or_else(|| PrfError::ParseKey("table too wide".to_string()))?;
                let packed = cur.take(entries.div_ceil(8))?;
                let table = (0..entries)
                    .map(|i| packed[i / 8] >> (i % 8) & 1 == 1)
                    .collect();
                PrfKey::lookup_table(input_len, noise_level, support, table)
            }
            other => return Err(PrfError::ParseKey(format!("unknown kind tag {other}"))),
        }
        .map_err(|e| PrfError::ParseKey(e.to_string()))?;
        if cur.at != bytes.len() {
            return Err(PrfError::ParseKey(format!(
                "{} trailing bytes",
                bytes.len() - cur.at
            )));
        }
        Ok(key)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], PrfError> {
        if self.at + len > self.bytes.len() {
            return Err(PrfError::ParseKey("truncated key".to_string()));
        }
        let s = &self.bytes[self.at..self.at + len];
        self.at += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PrfError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PrfError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn indices(&mut self) -> Result<Vec<u32>, PrfError> {
        let len = self.u32()? as usize;
        if len > 1 << 16 {
            return Err(PrfError::ParseKey(format!("index list of {len} entries")));
        }
        (0..len).map(|_| self.u32()).collect()
    }
}
