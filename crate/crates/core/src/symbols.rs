//! Alphabet-generic symbol strings, permutations, and distances. Everything
//! downstream (codes, channels, models) is built on these types. Symbols are
//! 0-indexed integers in `[0, alphabet.size)`.

use crate::seed::Seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest supported alphabet. Keeps fiber tables and hash maps at desk scale.
pub const MAX_ALPHABET: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    size: u32,
}

impl Alphabet {
    pub fn new(size: u32) -> Result<Alphabet, SymbolError> {
        if size == 0 || size > MAX_ALPHABET {
            return Err(SymbolError::InvalidAlphabet { size });
        }
        Ok(Alphabet { size })
    }

    pub const BINARY: Alphabet = Alphabet { size: 2 };

    pub fn size(&self) -> u32 {
        self.size
    }
}

/// A sequence of symbols over a fixed alphabet. Binary codewords are the
/// `Alphabet::BINARY` case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolString {
    alphabet: Alphabet,
    symbols: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymbolError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("alphabet mismatch: {left} vs {right} symbols")]
    AlphabetMismatch { left: u32, right: u32 },
    #[error("symbol {symbol} out of range for alphabet of {size} symbols")]
    SymbolOutOfRange { symbol: u32, size: u32 },
    #[error("alphabet size {size} not supported (must be 1..={max})", max = MAX_ALPHABET)]
    InvalidAlphabet { size: u32 },
    #[error("cannot parse symbol string: {0}")]
    Parse(String),
    #[error("sequence of length {len} is not a permutation of 0..{len}")]
    NotAPermutation { len: usize },
}

impl SymbolString {
    pub fn new(alphabet: Alphabet, symbols: Vec<u32>) -> Result<SymbolString, SymbolError> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alphabet.size()) {
            return Err(SymbolError::SymbolOutOfRange {
                symbol: bad,
                size: alphabet.size(),
            });
        }
        Ok(SymbolString { alphabet, symbols })
    }

    pub fn empty(alphabet: Alphabet) -> SymbolString {
        SymbolString {
            alphabet,
            symbols: Vec::new(),
        }
    }

    /// Binary string from bits, most convenient for codeword construction.
    pub fn from_bits(bits: &[bool]) -> SymbolString {
        SymbolString {
            alphabet: Alphabet::BINARY,
            symbols: bits.iter().map(|&b| b as u32).collect(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn push(&mut self, symbol: u32) -> Result<(), SymbolError> {
        if symbol >= self.alphabet.size() {
            return Err(SymbolError::SymbolOutOfRange {
                symbol,
                size: self.alphabet.size(),
            });
        }
        self.symbols.push(symbol);
        Ok(())
    }

    /// The first `len` symbols as a new string; autoregressive models
    /// condition on these.
    pub fn prefix(&self, len: usize) -> SymbolString {
        SymbolString {
            alphabet: self.alphabet,
            symbols: self.symbols[..len].to_vec(),
        }
    }

    pub fn bit(&self, i: usize) -> bool {
        self.symbols[i] != 0
    }

    /// Text form: decimal symbols separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, sym) in self.symbols.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&sym.to_string());
        }
        s
    }

    /// Parses the space-separated decimal form. Binary strings may also be
    /// written as one contiguous run of 0/1 characters ("0110").
    pub fn parse(alphabet: Alphabet, text: &str) -> Result<SymbolString, SymbolError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Ok(SymbolString::empty(alphabet));
        }
        if alphabet == Alphabet::BINARY
            && !trimmed.contains(char::is_whitespace)
            && trimmed.len() > 1
            && trimmed.chars().all(|c| c == '0' || c == '1')
        {
            let symbols = trimmed.chars().map(|c| (c == '1') as u32).collect();
            return SymbolString::new(alphabet, symbols);
        }
        let mut symbols = Vec::new();
        for tok in trimmed.split_whitespace() {
            let sym: u32 = tok
                .parse()
                .map_err(|_| SymbolError::Parse(format!("not a decimal symbol: {tok:?}")))?;
            symbols.push(sym);
        }
        SymbolString::new(alphabet, symbols)
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Number of positions where `a` and `b` differ. Requires equal lengths and
/// equal alphabets.
pub fn hamming_distance(a: &SymbolString, b: &SymbolString) -> Result<usize, SymbolError> {
    if a.alphabet != b.alphabet {
        return Err(SymbolError::AlphabetMismatch {
            left: a.alphabet.size(),
            right: b.alphabet.size(),
        });
    }
    if a.len() != b.len() {
        return Err(SymbolError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.symbols
        .iter()
        .zip(&b.symbols)
        .filter(|(x, y)| x != y)
        .count())
}

/// Minimum number of substitutions, insertions, and deletions transforming
/// `a` into `b`. Unit costs, classic dynamic program, linear space.
pub fn edit_distance(a: &SymbolString, b: &SymbolString) -> Result<usize, SymbolError> {
    if a.alphabet != b.alphabet {
        return Err(SymbolError::AlphabetMismatch {
            left: a.alphabet.size(),
            right: b.alphabet.size(),
        });
    }
    let (s, t) = (a.symbols(), b.symbols());
    let mut prev: Vec<usize> = (0..=t.len()).collect();
    let mut cur = vec![0usize; t.len() + 1];
    for (i, &sa) in s.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &sb) in t.iter().enumerate() {
            let sub = prev[j] + (sa != sb) as usize;
            let del = prev[j + 1] + 1;
            let ins = cur[j] + 1;
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[t.len()])
}

/// A bijection on `[0, n)` stored with its inverse, so both directions are
/// O(1) per lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Permutation {
        let forward: Vec<u32> = (0..n as u32).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn from_forward(forward: Vec<u32>) -> Result<Permutation, SymbolError> {
        let n = forward.len();
        let mut inverse = vec![u32::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if (f as usize) >= n || inverse[f as usize] != u32::MAX {
                return Err(SymbolError::NotAPermutation { len: n });
            }
            inverse[f as usize] = i as u32;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[u32] {
        &self.forward
    }

    pub fn inverse(&self) -> &[u32] {
        &self.inverse
    }

    /// The inverse permutation as its own object.
    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }
}

/// Uniformly random permutation of `[0, n)` via Fisher-Yates, deterministic
/// in the seed.
pub fn random_permutation(n: usize, seed: &Seed) -> Permutation {
    let mut forward: Vec<u32> = (0..n as u32).collect();
    forward.shuffle(&mut seed.rng());
    Permutation::from_forward(forward).expect("shuffle preserves bijection")
}

/// Applies a permutation to a string: `output[i] = x[pi.forward[i]]`.
pub fn apply_permutation(pi: &Permutation, x: &SymbolString) -> Result<SymbolString, SymbolError> {
    if pi.len() != x.len() {
        return Err(SymbolError::LengthMismatch {
            left: pi.len(),
            right: x.len(),
        });
    }
    let symbols = pi.forward.iter().map(|&f| x.symbols[f as usize]).collect();
    Ok(SymbolString {
        alphabet: x.alphabet,
        symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bin(s: &str) -> SymbolString {
        SymbolString::parse(Alphabet::BINARY, s).unwrap()
    }

    #[test]
    fn hamming_basics() {
        assert_eq!(hamming_distance(&bin("0101"), &bin("0101")).unwrap(), 0);
        assert_eq!(hamming_distance(&bin("0101"), &bin("1101")).unwrap(), 1);
        assert_eq!(
            hamming_distance(&bin("00000000"), &bin("11111111")).unwrap(),
            8
        );
    }

    #[test]
    fn hamming_rejects_mismatches() {
        assert_eq!(
            hamming_distance(&bin("01"), &bin("011")),
            Err(SymbolError::LengthMismatch { left: 2, right: 3 })
        );
        let a3 = Alphabet::new(3).unwrap();
        let x = SymbolString::new(a3, vec![0, 1]).unwrap();
        assert_eq!(
            hamming_distance(&x, &bin("01")),
            Err(SymbolError::AlphabetMismatch { left: 3, right: 2 })
        );
    }

    /// Plain recursive edit distance with memoization, kept independent of
    /// the row-based dynamic program it checks.
    fn edit_oracle(a: &[u32], b: &[u32]) -> usize {
        fn go(
            a: &[u32],
            b: &[u32],
            i: usize,
            j: usize,
            memo: &mut Vec<Vec<Option<usize>>>,
        ) -> usize {
            if i == a.len() {
                return b.len() - j;
            }
            if j == b.len() {
                return a.len() - i;
            }
            if let Some(v) = memo[i][j] {
                return v;
            }
            let v = if a[i] == b[j] {
                go(a, b, i + 1, j + 1, memo)
            } else {
                let sub = go(a, b, i + 1, j + 1, memo);
                let del = go(a, b, i + 1, j, memo);
                let ins = go(a, b, i, j + 1, memo);
                1 + sub.min(del).min(ins)
            };
            memo[i][j] = Some(v);
            v
        }
        let mut memo = vec![vec![None; b.len()]; a.len()];
        go(a, b, 0, 0, &mut memo)
    }

    #[test]
    fn edit_distance_basics() {
        let a26 = Alphabet::new(26).unwrap();
        let word = |w: &str| {
            SymbolString::new(a26, w.bytes().map(|b| (b - b'a') as u32).collect()).unwrap()
        };
        assert_eq!(edit_distance(&word("abc"), &word("abc")).unwrap(), 0);
        assert_eq!(edit_distance(&word("abc"), &word("ab")).unwrap(), 1);
        let (k, s) = (word("kitten"), word("sitting"));
        assert_eq!(edit_distance(&k, &s).unwrap(), 3);
        assert_eq!(edit_oracle(k.symbols(), s.symbols()), 3);
    }

    #[test]
    fn edit_distance_matches_recursive_oracle_exhaustively() {
        // All pairs of binary strings of length <= 5, plus symmetry and the
        // triangle inequality over a subsample of triples.
        let mut all: Vec<Vec<u32>> = vec![vec![]];
        for len in 1..=5usize {
            for bits in 0u32..(1 << len) {
                all.push((0..len).map(|i| (bits >> i) & 1).collect());
            }
        }
        let strings: Vec<SymbolString> = all
            .iter()
            .map(|v| SymbolString::new(Alphabet::BINARY, v.clone()).unwrap())
            .collect();
        for a in &strings {
            for b in &strings {
                let d = edit_distance(a, b).unwrap();
                assert_eq!(d, edit_oracle(a.symbols(), b.symbols()));
                assert_eq!(d, edit_distance(b, a).unwrap(), "symmetry");
                if a.len() == b.len() {
                    assert!(d <= hamming_distance(a, b).unwrap());
                }
            }
        }
        for (i, a) in strings.iter().enumerate().step_by(7) {
            for (j, b) in strings.iter().enumerate().step_by(5) {
                for c in strings.iter().skip((i + j) % 11).step_by(11) {
                    let ab = edit_distance(a, b).unwrap();
                    let bc = edit_distance(b, c).unwrap();
                    let ac = edit_distance(a, c).unwrap();
                    assert!(ac <= ab + bc, "triangle violated");
                }
            }
        }
    }

    #[test]
    fn permutation_application() {
        let x = SymbolString::new(Alphabet::new(3).unwrap(), vec![0, 1, 2]).unwrap();
        let id = Permutation::identity(3);
        assert_eq!(apply_permutation(&id, &x).unwrap(), x);
        let rev = Permutation::from_forward(vec![2, 1, 0]).unwrap();
        let y = apply_permutation(&rev, &x).unwrap();
        assert_eq!(y.symbols(), &[2, 1, 0]);
    }

    #[test]
    fn size_one_permutation_is_identity() {
        let p = random_permutation(1, &Seed::new(99));
        assert_eq!(p.forward(), &[0]);
    }

    #[test]
    fn random_permutation_is_deterministic() {
        let s = Seed::labeled(41, "perm");
        assert_eq!(random_permutation(20, &s), random_permutation(20, &s));
        assert_ne!(
            random_permutation(20, &s),
            random_permutation(20, &Seed::labeled(42, "perm"))
        );
    }

    #[test]
    fn rejects_invalid_forward_maps() {
        assert!(Permutation::from_forward(vec![0, 0]).is_err());
        assert!(Permutation::from_forward(vec![1, 2]).is_err());
    }

    proptest! {
        #[test]
        fn inverse_law(seed in 0u64..1000, n in 1usize..60) {
            let pi = random_permutation(n, &Seed::new(seed));
            let x = {
                let mut rng = Seed::labeled(seed, "x").rng();
                let symbols = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..4u32)).collect();
                SymbolString::new(Alphabet::new(4).unwrap(), symbols).unwrap()
            };
            let there = apply_permutation(&pi, &x).unwrap();
            let back = apply_permutation(&pi.inverted(), &there).unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn hamming_is_xor_weight_on_bits(a in proptest::collection::vec(0u32..2, 0..40)) {
            let b: Vec<u32> = a.iter().map(|&x| x ^ 1).collect();
            let sa = SymbolString::new(Alphabet::BINARY, a.clone()).unwrap();
            let sb = SymbolString::new(Alphabet::BINARY, b).unwrap();
            let weight = sa.symbols().iter().zip(sb.symbols()).filter(|(x, y)| *x ^ *y == 1).count();
            prop_assert_eq!(hamming_distance(&sa, &sb).unwrap(), weight);
        }
    }

    #[test]
    fn text_roundtrip() {
        let a5 = Alphabet::new(5).unwrap();
        let x = SymbolString::new(a5, vec![4, 0, 3]).unwrap();
        assert_eq!(x.to_text(), "4 0 3");
        assert_eq!(SymbolString::parse(a5, "4 0 3").unwrap(), x);
        assert_eq!(
            SymbolString::parse(Alphabet::BINARY, "0110")
                .unwrap()
                .symbols(),
            &[0, 1, 1, 0]
        );
        assert_eq!(
            SymbolString::parse(Alphabet::BINARY, "1 0 1")
                .unwrap()
                .symbols(),
            &[1, 0, 1]
        );
        assert!(SymbolString::parse(a5, "4 9").is_err());
        assert!(SymbolString::parse(a5, "fish").is_err());
        assert!(SymbolString::parse(a5, "").unwrap().is_empty());
    }

    #[test]
    fn empirical_permutation_frequencies_are_uniform() {
        // 60000 draws over the 6 permutations of 3 elements. Each frequency
        // should sit within 3 sigma of 1/6 (sigma for a Bin(60000, 1/6)).
        let trials = 60_000u32;
        let mut counts = [0u32; 6];
        let base = Seed::labeled(2024, "perm-freq");
        for t in 0..trials {
            let p = random_permutation(3, &base.split_index("t", t as u64));
            let f = p.forward();
            let idx = (f[0] * 2 + if f[1] == (f[0] + 1) % 3 { 0 } else { 1 }) as usize;
            counts[idx] += 1;
        }
        let expect = trials as f64 / 6.0;
        let sigma = (trials as f64 * (1.0 / 6.0) * (5.0 / 6.0)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "permutation frequency {c} outside 3 sigma of {expect}"
            );
        }
    }
}
