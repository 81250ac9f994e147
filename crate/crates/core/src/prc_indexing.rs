//! Edit-robust wrapper around the substitution code. Symbols of the output
//! alphabet are indices that a balanced secret map psi sends onto bit
//! positions of the inner binary codeword; decoding only asks which
//! positions are hit, so insertions, deletions, and substitutions of
//! symbols turn into a bounded number of bit flips for the inner decoder.
//! Encoding first rewrites the codeword's support with a set-difference
//! perturbation so that honest outputs stay distributed like uniform
//! strings.

use crate::keyfile;
use crate::prc_substitution::{self, DecodeOutcome, SubError, SubKey, SubParams};
use crate::prf::LocalPrfFamily;
use crate::seed::Seed;
use crate::symbols::{Alphabet, SymbolError, SymbolString, MAX_ALPHABET};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IdxError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("input has {got} symbols, expected {expected}")]
    LengthMismatch { expected: u32, got: usize },
    #[error("symbol {symbol} outside alphabet of {size}")]
    SymbolOutOfRange { symbol: u32, size: u32 },
    #[error("cannot parse key file: {0}")]
    ParseKey(String),
    #[error(transparent)]
    Sub(#[from] SubError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Sizes of the wrapper: the output block carries m_out symbols from an
/// alphabet of q_out = rho * inner block length indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdxParams {
    pub inner: SubParams,
    pub rho: u32,
    pub m_out: u32,
    pub q_out: u32,
}

impl IdxParams {
    /// Derives the output shape from the inner block length n:
    /// m_out = ceil(ln(2) * n) and q_out = rho * n. The log-two length
    /// makes a uniform output string hit about half the inner positions,
    /// which is exactly how a codeword's support looks.
    pub fn new(inner: SubParams, rho: u32) -> Result<IdxParams, IdxError> {
        if rho < 2 {
            return Err(IdxError::InvalidParams(format!(
                "redundancy rho = {rho}, need at least 2"
            )));
        }
        let n = inner.block_len;
        let q_out = (rho as u64) * (n as u64);
        if q_out > MAX_ALPHABET as u64 {
            return Err(IdxError::InvalidParams(format!(
                "alphabet rho * n = {q_out} exceeds the supported {MAX_ALPHABET}"
            )));
        }
        let m_out = (std::f64::consts::LN_2 * n as f64).ceil() as u32;
        Ok(IdxParams {
            inner,
            rho,
            m_out,
            q_out: q_out as u32,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.q_out).expect("validated at construction")
    }
}

/// Smallest redundancy the set-difference analysis tolerates for a target
/// inner substitution rate p0, namely ceil(8 / p0) and at least 2. The
/// analysis also wants rho below the fourth root of the block length, which
/// only has room at far larger blocks than experiments run; demo keys take
/// the rate requirement and calibrate robustness empirically.
pub fn default_demo_rho(p0: f64) -> Result<u32, IdxError> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(IdxError::InvalidParams(format!(
            "target rate {p0} outside (0, 1]"
        )));
    }
    Ok(((8.0 / p0).ceil() as u32).max(2))
}

/// Secret key: the inner key plus the balanced index map, stored as the
/// length-q_out array psi.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxKey {
    inner_key: SubKey,
    psi: Vec<u32>,
}

impl IdxKey {
    pub fn inner_key(&self) -> &SubKey {
        &self.inner_key
    }

    pub fn psi(&self) -> &[u32] {
        &self.psi
    }
}

/// Uniformly random map from `[rho * n]` onto `[n]` with every fiber of
/// size exactly rho, drawn by shuffling the multiset that holds each target
/// rho times.
pub fn sample_balanced_map(n: u32, rho: u32, seed: &Seed) -> Vec<u32> {
    let mut psi: Vec<u32> = (0..n)
        .flat_map(|j| std::iter::repeat(j).take(rho as usize))
        .collect();
    psi.shuffle(&mut seed.rng());
    psi
}

pub fn keygen_idx(
    params: &IdxParams,
    family: &LocalPrfFamily,
    seed: &Seed,
) -> Result<IdxKey, IdxError> {
    let inner_key = prc_substitution::keygen(&params.inner, family, &seed.split("inner"))?;
    let psi = sample_balanced_map(params.inner.block_len, params.rho, &seed.split("psi"));
    Ok(IdxKey { inner_key, psi })
}

/// Rewrites a fresh uniform string y1 in `[n]^m` so that its set of
/// distinct symbols moves toward the support S0 of the bit string y0: a
/// uniform injection matches the fresh symbols of y1 against the unused
/// symbols of S0 (whichever side is smaller), and matched symbols are
/// substituted through the whole string. Under uniform y0 the output is
/// exactly uniform; for a fixed y0 its symbol set hugs S0.
pub fn perturb_difference(
    n: u32,
    m: u32,
    y0: &SymbolString,
    seed: &Seed,
) -> Result<SymbolString, IdxError> {
    if y0.alphabet() != Alphabet::BINARY {
        return Err(IdxError::InvalidParams(format!(
            "support string must be binary, got {} symbols",
            y0.alphabet().size()
        )));
    }
    if y0.len() != n as usize {
        return Err(IdxError::LengthMismatch {
            expected: n,
            got: y0.len(),
        });
    }
    if m == 0 {
        return Err(IdxError::InvalidParams(
            "output length m must be positive".to_string(),
        ));
    }
    let mut rng = seed.rng();
    let y1: Vec<u32> = (0..m).map(|_| rng.gen_range(0..n)).collect();
    let mut in_s1 = vec![false; n as usize];
    for &d in &y1 {
        in_s1[d as usize] = true;
    }
    let missing: Vec<u32> = (0..n)
        .filter(|&i| y0.bit(i as usize) && !in_s1[i as usize])
        .collect();
    let fresh: Vec<u32> = (0..n)
        .filter(|&i| in_s1[i as usize] && !y0.bit(i as usize))
        .collect();
    // A uniform injection of the smaller set into the larger: shuffle the
    // targets and pair them off in order.
    let mut replace: Vec<u32> = (0..n).collect();
    if missing.len() >= fresh.len() {
        let mut targets = missing;
        targets.shuffle(&mut rng);
        for (&a, &t) in fresh.iter().zip(&targets) {
            replace[a as usize] = t;
        }
    } else {
        let mut targets = fresh;
        targets.shuffle(&mut rng);
        for (&a, &t) in missing.iter().zip(&targets) {
            replace[t as usize] = a;
        }
    }
    let out: Vec<u32> = y1.iter().map(|&d| replace[d as usize]).collect();
    Ok(SymbolString::new(
        Alphabet::new(n).map_err(IdxError::Symbol)?,
        out,
    )?)
}

/// One codeword: inner encode, support perturbation, then each output
/// symbol drawn uniformly from the fiber over its target position.
pub fn encode_idx(key: &IdxKey, params: &IdxParams, seed: &Seed) -> Result<SymbolString, IdxError> {
    check_key(key, params)?;
    let y0 = prc_substitution::encode(&key.inner_key, &params.inner, &seed.split("inner"))?;
    let y = perturb_difference(
        params.inner.block_len,
        params.m_out,
        &y0,
        &seed.split("perturb"),
    )?;
    let mut fibers = vec![Vec::with_capacity(params.rho as usize); params.inner.block_len as usize];
    for (a, &j) in key.psi.iter().enumerate() {
        fibers[j as usize].push(a as u32);
    }
    let mut rng = seed.split("fiber").rng();
    let z: Vec<u32> = y
        .symbols()
        .iter()
        .map(|&j| {
            let fiber = &fibers[j as usize];
            fiber[rng.gen_range(0..fiber.len())]
        })
        .collect();
    Ok(SymbolString::new(params.alphabet(), z)?)
}

fn check_key(key: &IdxKey, params: &IdxParams) -> Result<(), IdxError> {
    if key.psi.len() != params.q_out as usize {
        return Err(IdxError::InvalidParams(format!(
            "psi maps {} symbols, parameters say {}",
            key.psi.len(),
            params.q_out
        )));
    }
    Ok(())
}

/// Collapses a symbol string to the bit string of inner positions it
/// touches: bit i is set iff some symbol maps to i under psi. Length and
/// order of z are irrelevant, only its set of symbols matters.
pub fn project(psi: &[u32], n: u32, z: &SymbolString) -> Result<SymbolString, IdxError> {
    let mut hit = vec![false; n as usize];
    for &a in z.symbols() {
        let a = a as usize;
        if a >= psi.len() {
            return Err(IdxError::SymbolOutOfRange {
                symbol: a as u32,
                size: psi.len() as u32,
            });
        }
        hit[psi[a] as usize] = true;
    }
    Ok(SymbolString::from_bits(&hit))
}

/// Projects the received string onto inner positions and runs the inner
/// decoder. Accepts strings of any length, since edits change length.
pub fn decode_idx(
    key: &IdxKey,
    params: &IdxParams,
    z: &SymbolString,
) -> Result<DecodeOutcome, IdxError> {
    check_key(key, params)?;
    let projected = project(&key.psi, params.inner.block_len, z)?;
    Ok(prc_substitution::decode(
        &key.inner_key,
        &params.inner,
        &projected,
    )?)
}

/// Whether the number of distinct symbols of z sits inside the band
/// q(1 - e^(-m/q)) +/- 2 sqrt(m) ln(m), the range that uniform strings of
/// nominal length m over q symbols land in almost surely. Post-channel
/// strings are audited against the nominal (pre-channel) m.
pub fn is_typical(z: &SymbolString, q: u32, m: u32) -> bool {
    let mut seen = std::collections::HashSet::new();
    let unique = z.symbols().iter().filter(|&&a| seen.insert(a)).count() as f64;
    let (qf, mf) = (f64::from(q), f64::from(m));
    let center = qf * (1.0 - (-mf / qf).exp());
    let slack = 2.0 * mf.sqrt() * mf.ln();
    (center - slack..=center + slack).contains(&unique)
}

/// Key file layout after the common frame: the substitution payload, then
/// rho (u32) and the psi array (u32 per symbol).
pub fn key_to_bytes(params: &IdxParams, key: &IdxKey) -> Vec<u8> {
    let profile = match params.inner.profile {
        prc_substitution::Profile::Theory => keyfile::PROFILE_THEORY,
        prc_substitution::Profile::Demo => keyfile::PROFILE_INSECURE_DEMO,
    };
    let mut w = keyfile::Writer::new(keyfile::KIND_INDEXING, profile);
    write_payload(&mut w, params, key);
    w.finish()
}

pub(crate) fn write_payload(w: &mut keyfile::Writer, params: &IdxParams, key: &IdxKey) {
    prc_substitution::write_payload(w, &params.inner, &key.inner_key);
    w.u32(params.rho);
    w.indices(&key.psi);
}

pub fn key_from_bytes(bytes: &[u8]) -> Result<(IdxParams, IdxKey), IdxError> {
    let (mut r, kind, profile) = keyfile::Reader::open(bytes).map_err(IdxError::ParseKey)?;
    if kind != keyfile::KIND_INDEXING {
        return Err(IdxError::ParseKey(format!(
            "kind tag {kind} is not an indexing key"
        )));
    }
    let (params, key) = read_payload(&mut r, profile)?;
    r.expect_end().map_err(IdxError::ParseKey)?;
    Ok((params, key))
}

pub(crate) fn read_payload(
    r: &mut keyfile::Reader<'_>,
    profile: u8,
) -> Result<(IdxParams, IdxKey), IdxError> {
    let (inner, inner_key) = prc_substitution::read_payload(r, profile)
        .map_err(|e| IdxError::ParseKey(e.to_string()))?;
    let rho = r.u32().map_err(IdxError::ParseKey)?;
    let params = IdxParams::new(inner, rho).map_err(|e| IdxError::ParseKey(e.to_string()))?;
    let psi = r
        .indices(params.q_out as usize)
        .map_err(IdxError::ParseKey)?;
    let mut counts = vec![0u32; params.inner.block_len as usize];
    for &j in &psi {
        if j >= params.inner.block_len {
            return Err(IdxError::ParseKey(format!(
                "psi target {j} outside the block"
            )));
        }
        counts[j as usize] += 1;
    }
    if counts.iter().any(|&c| c != rho) {
        return Err(IdxError::ParseKey(
            "psi fibers are not balanced".to_string(),
        ));
    }
    Ok((params, IdxKey { inner_key, psi }))
}
