//! Binary code whose codewords survive a bounded rate of bit flips while
//! looking uniformly random without the key. A codeword packs m samples
//! (x_j, F(x_j) xor e_j) of a noisy local PRF plus uniform filler, XORs the
//! whole block with a secret pad, and scrambles it with a secret
//! permutation. Detection recounts how many samples still agree with the
//! PRF and compares against a threshold a random string almost never
//! clears.

use crate::keyfile;
use crate::prf::{self, LocalPrfFamily, PrfError, PrfKey};
use crate::seed::Seed;
use crate::symbols::{
    apply_permutation, random_permutation, Alphabet, Permutation, SymbolError, SymbolString,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubError {
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("demo block length {block_len} below ({n}+1)*{m}")]
    DemoParamsViolateBlockBound { n: u32, m: u32, block_len: u32 },
    #[error("PRF family does not fit the code parameters: {0}")]
    FamilyMismatch(String),
    #[error("key does not match the parameters: {0}")]
    KeyMismatch(String),
    #[error("input has {got} bits, block length is {expected}")]
    LengthMismatch { expected: u32, got: usize },
    #[error("cannot parse key file: {0}")]
    ParseKey(String),
    #[error(transparent)]
    Prf(#[from] PrfError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Whether parameters came from the asymptotic formula or were supplied by
/// hand for fast experiments. Demo keys are flagged insecure on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Theory,
    Demo,
}

/// Code shape: m PRF samples of n+1 bits each inside a block of
/// `block_len` bits, targeting substitution rate p with PRF output noise q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubParams {
    pub n: u32,
    pub m: u32,
    pub block_len: u32,
    pub p: f64,
    pub q: f64,
    pub profile: Profile,
}

fn check_rates(p: f64, q: f64) -> Result<(), SubError> {
    if !(p > 0.0 && p < 0.5) {
        return Err(SubError::InvalidRate(format!(
            "substitution rate {p} outside (0, 1/2)"
        )));
    }
    if !(0.0..0.5).contains(&q) {
        return Err(SubError::InvalidRate(format!(
            "noise level {q} outside [0, 1/2)"
        )));
    }
    Ok(())
}

impl SubParams {
    /// Parameters from the asymptotic recipe: m grows like
    /// c0 * (1-2q)^-4 * n^(4 log2(1/(1-2p))) and the block is
    /// 3m(n+1)^2 bits, leaving most of it as filler. Sizes explode fast;
    /// see [`SubParams::demo`] for hand-sized experiments.
    pub fn theory(n: u32, p: f64, q: f64, c0: f64) -> Result<SubParams, SubError> {
        check_rates(p, q)?;
        if n == 0 {
            return Err(SubError::InvalidParams("n must be positive".to_string()));
        }
        if !(c0 > 0.0) {
            return Err(SubError::InvalidParams(format!(
                "c0 = {c0} must be positive"
            )));
        }
        let exponent = 4.0 * (1.0 / (1.0 - 2.0 * p)).log2();
        let m_real = c0 * (1.0 - 2.0 * q).powi(-4) * (n as f64).powf(exponent);
        // The nudge keeps float fuzz in powf from pushing an exact integer
        // over the next ceiling.
        let m = (m_real - 1e-9).ceil();
        if !(m >= 1.0 && m <= u32::MAX as f64) {
            return Err(SubError::InvalidParams(format!(
                "sample count {m_real:.3e} out of range"
            )));
        }
        let m = m as u32;
        let block_len = 3 * m as u64 * (n as u64 + 1).pow(2);
        if block_len > u32::MAX as u64 {
            return Err(SubError::InvalidParams(format!(
                "block length {block_len} out of range"
            )));
        }
        Ok(SubParams {
            n,
            m,
            block_len: block_len as u32,
            p,
            q,
            profile: Profile::Theory,
        })
    }

    /// Hand-picked sizes for experiments. The block must still hold all m
    /// samples: block_len >= (n+1) * m.
    pub fn demo(n: u32, m: u32, block_len: u32, p: f64, q: f64) -> Result<SubParams, SubError> {
        check_rates(p, q)?;
        if n == 0 || m == 0 {
            return Err(SubError::InvalidParams(format!(
                "need n, m >= 1, got n={n}, m={m}"
            )));
        }
        if (block_len as u64) < (n as u64 + 1) * m as u64 {
            return Err(SubError::DemoParamsViolateBlockBound { n, m, block_len });
        }
        Ok(SubParams {
            n,
            m,
            block_len,
            p,
            q,
            profile: Profile::Demo,
        })
    }

    /// Bits occupied by the PRF samples at the front of the unscrambled
    /// block; the rest is uniform filler.
    pub fn samples_len(&self) -> u32 {
        (self.n + 1) * self.m
    }

    /// Detection cutoff: accept only when more than m/2 + ln(m) sqrt(m)
    /// samples agree with the PRF.
    pub fn threshold(&self) -> f64 {
        let m = self.m as f64;
        m / 2.0 + m.ln() * m.sqrt()
    }
}

/// Secret key: the PRF, a one-time pad over the block, and the scrambling
/// permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubKey {
    prf_key: PrfKey,
    pad: SymbolString,
    perm: Permutation,
}

impl SubKey {
    pub fn prf_key(&self) -> &PrfKey {
        &self.prf_key
    }

    pub fn pad(&self) -> &SymbolString {
        &self.pad
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    fn check(&self, params: &SubParams) -> Result<(), SubError> {
        if self.prf_key.input_len() != params.n {
            return Err(SubError::KeyMismatch(format!(
                "PRF reads {} bits, parameters say n = {}",
                self.prf_key.input_len(),
                params.n
            )));
        }
        if self.pad.len() != params.block_len as usize {
            return Err(SubError::KeyMismatch(format!(
                "pad has {} bits, block length is {}",
                self.pad.len(),
                params.block_len
            )));
        }
        if self.perm.len() != params.block_len as usize {
            return Err(SubError::KeyMismatch(format!(
                "permutation covers {} positions, block length is {}",
                self.perm.len(),
                params.block_len
            )));
        }
        Ok(())
    }
}

/// Samples a fresh key: PRF key, uniform pad, uniform permutation, all
/// deterministic in the seed.
pub fn keygen(
    params: &SubParams,
    family: &LocalPrfFamily,
    seed: &Seed,
) -> Result<SubKey, SubError> {
    if family.input_len != params.n {
        return Err(SubError::FamilyMismatch(format!(
            "family reads {} bits, parameters say n = {}",
            family.input_len, params.n
        )));
    }
    let prf_key = prf::sample_key(family, &seed.split("prf"))?;
    let mut rng = seed.split("pad").rng();
    let pad =
        SymbolString::from_bits(&(0..params.block_len).map(|_| rng.gen()).collect::<Vec<_>>());
    let perm = random_permutation(params.block_len as usize, &seed.split("perm"));
    Ok(SubKey { prf_key, pad, perm })
}

/// Emits one codeword: m fresh PRF samples with Bernoulli(q) output noise,
/// uniform filler, pad, scramble. Output length is exactly the block
/// length.
pub fn encode(key: &SubKey, params: &SubParams, seed: &Seed) -> Result<SymbolString, SubError> {
    key.check(params)?;
    let mut rng = seed.rng();
    let n = params.n as usize;
    let mut block = Vec::with_capacity(params.block_len as usize);
    for _ in 0..params.m {
        let x = SymbolString::from_bits(&(0..n).map(|_| rng.gen()).collect::<Vec<_>>());
        let noise = params.q > 0.0 && rng.gen_bool(params.q);
        let w = prf::eval(&key.prf_key, &x)? ^ noise;
        block.extend(x.symbols().iter().map(|&b| b != 0));
        block.push(w);
    }
    for _ in block.len()..params.block_len as usize {
        block.push(rng.gen());
    }
    let padded: Vec<bool> = block
        .iter()
        .zip(key.pad.symbols())
        .map(|(&b, &z)| b != (z != 0))
        .collect();
    Ok(apply_permutation(
        &key.perm,
        &SymbolString::from_bits(&padded),
    )?)
}

/// What detection saw: how many of the m samples agreed with the PRF, and
/// the cutoff that count was compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub accept: bool,
    pub agreeing: u32,
    pub samples: u32,
    pub threshold: f64,
}

/// Unscrambles and unpads the block, re-evaluates the PRF on each of the m
/// recovered samples, and accepts when strictly more than
/// m/2 + ln(m) sqrt(m) of them agree (a tie rejects).
pub fn decode(
    key: &SubKey,
    params: &SubParams,
    y: &SymbolString,
) -> Result<DecodeOutcome, SubError> {
    key.check(params)?;
    if y.alphabet() != Alphabet::BINARY || y.len() != params.block_len as usize {
        return Err(SubError::LengthMismatch {
            expected: params.block_len,
            got: y.len(),
        });
    }
    let unscrambled = apply_permutation(&key.perm.inverted(), y)?;
    let block: Vec<bool> = unscrambled
        .symbols()
        .iter()
        .zip(key.pad.symbols())
        .map(|(&b, &z)| b != z)
        .collect();
    let n = params.n as usize;
    let mut agreeing = 0u32;
    for j in 0..params.m as usize {
        let at = j * (n + 1);
        let x = SymbolString::from_bits(&block[at..at + n]);
        let w = block[at + n];
        agreeing += (prf::eval(&key.prf_key, &x)? == w) as u32;
    }
    let threshold = params.threshold();
    Ok(DecodeOutcome {
        accept: f64::from(agreeing) > threshold,
        agreeing,
        samples: params.m,
        threshold,
    })
}

/// Serializes parameters and key into one self-describing record. Layout
/// after the common frame: n, m, block length (u32 each), p, q (f64), the
/// PRF key as a length-prefixed blob, the pad packed LSB-first, then the
/// permutation's forward array (u32 each).
pub fn key_to_bytes(params: &SubParams, key: &SubKey) -> Vec<u8> {
    let profile = match params.profile {
        Profile::Theory => keyfile::PROFILE_THEORY,
        Profile::Demo => keyfile::PROFILE_INSECURE_DEMO,
    };
    let mut w = keyfile::Writer::new(keyfile::KIND_SUBSTITUTION, profile);
    write_payload(&mut w, params, key);
    w.finish()
}

pub(crate) fn write_payload(w: &mut keyfile::Writer, params: &SubParams, key: &SubKey) {
    w.u32(params.n);
    w.u32(params.m);
    w.u32(params.block_len);
    w.f64(params.p);
    w.f64(params.q);
    w.blob(&key.prf_key.to_bytes());
    w.bits(key.pad.symbols().iter().map(|&b| b != 0));
    w.indices(key.perm.forward());
}

pub fn key_from_bytes(bytes: &[u8]) -> Result<(SubParams, SubKey), SubError> {
    let (mut r, kind, profile) = keyfile::Reader::open(bytes).map_err(SubError::ParseKey)?;
    if kind != keyfile::KIND_SUBSTITUTION {
        return Err(SubError::ParseKey(format!(
            "kind tag {kind} is not a substitution key"
        )));
    }
    let (params, key) = read_payload(&mut r, profile)?;
    r.expect_end().map_err(SubError::ParseKey)?;
    Ok((params, key))
}

pub(crate) fn read_payload(
    r: &mut keyfile::Reader<'_>,
    profile: u8,
) -> Result<(SubParams, SubKey), SubError> {
    let profile = match profile {
        keyfile::PROFILE_THEORY => Profile::Theory,
        keyfile::PROFILE_INSECURE_DEMO => Profile::Demo,
        other => return Err(SubError::ParseKey(format!("unknown profile tag {other}"))),
    };
    let take = |r: &mut keyfile::Reader<'_>| -> Result<(SubParams, SubKey), String> {
        let n = r.u32()?;
        let m = r.u32()?;
        let block_len = r.u32()?;
        let p = r.f64()?;
        let q = r.f64()?;
        let prf_key = PrfKey::from_bytes(r.blob()?).map_err(|e| e.to_string())?;
        let pad = SymbolString::from_bits(&r.bits(block_len as usize)?);
        let forward = r.indices(block_len as usize)?;
        let perm = Permutation::from_forward(forward).map_err(|e| e.to_string())?;
        let params = SubParams {
            n,
            m,
            block_len,
            p,
            q,
            profile,
        };
        Ok((params, SubKey { prf_key, pad, perm }))
    };
    let (params, key) = take(r).map_err(SubError::ParseKey)?;
    check_rates(params.p, params.q).map_err(|e| SubError::ParseKey(e.to_string()))?;
    if params.m == 0 || (params.block_len as u64) < (params.n as u64 + 1) * params.m as u64 {
        return Err(SubError::ParseKey(
            "block too short for the sample count".to_string(),
        ));
    }
    key.check(&params)
        .map_err(|e| SubError::ParseKey(e.to_string()))?;
    Ok((params, key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prf::PrfKind;

    fn demo_params() -> SubParams {
        SubParams::demo(4, 256, 1536, 0.05, 0.05).unwrap()
    }

    fn demo_family() -> LocalPrfFamily {
        LocalPrfFamily::new(4, 2, 0.05, PrfKind::SparseParity).unwrap()
    }

    #[test]
    fn theory_sizes_follow_the_recipe() {
        let params = SubParams::theory(4, 0.25, 0.0, 1.0).unwrap();
        assert_eq!(params.m, 256);
        assert_eq!(params.block_len, 19200);
        assert_eq!(params.profile, Profile::Theory);
        // Halving 1-2q scales m by (1-2q)^-4 = 16.
        let noisy = SubParams::theory(4, 0.25, 0.25, 1.0).unwrap();
        assert_eq!(noisy.m, 4096);
    }

    #[test]
    fn demo_sizes_must_fit_the_samples() {
        let ok = SubParams::demo(4, 64, 320, 0.1, 0.0).unwrap();
        assert_eq!(ok.samples_len(), 320);
        assert_eq!(
            SubParams::demo(4, 64, 300, 0.1, 0.0),
            Err(SubError::DemoParamsViolateBlockBound {
                n: 4,
                m: 64,
                block_len: 300
            })
        );
    }

    #[test]
    fn rates_are_validated() {
        assert!(matches!(
            SubParams::demo(4, 8, 40, 0.0, 0.0),
            Err(SubError::InvalidRate(_))
        ));
        assert!(matches!(
            SubParams::demo(4, 8, 40, 0.5, 0.0),
            Err(SubError::InvalidRate(_))
        ));
        assert!(matches!(
            SubParams::demo(4, 8, 40, 0.1, 0.5),
            Err(SubError::InvalidRate(_))
        ));
        assert!(matches!(
            SubParams::demo(4, 8, 40, 0.1, -0.01),
            Err(SubError::InvalidRate(_))
        ));
        assert!(matches!(
            SubParams::theory(4, 0.25, 0.0, 0.0),
            Err(SubError::InvalidParams(_))
        ));
    }

    #[test]
    fn keygen_is_deterministic_with_the_right_shapes() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(1)).unwrap();
        assert_eq!(key.pad().len(), 1536);
        assert_eq!(key.perm().len(), 1536);
        assert_eq!(key, keygen(&params, &demo_family(), &Seed::new(1)).unwrap());
        assert_ne!(key, keygen(&params, &demo_family(), &Seed::new(2)).unwrap());
    }

    #[test]
    fn keygen_rejects_mismatched_families() {
        let params = demo_params();
        let family = LocalPrfFamily::new(8, 2, 0.05, PrfKind::SparseParity).unwrap();
        assert!(matches!(
            keygen(&params, &family, &Seed::new(1)),
            Err(SubError::FamilyMismatch(_))
        ));
    }

    #[test]
    fn pad_bits_are_uniform_across_keygens() {
        // Small block so the per-position check stays sharp: 2000 keys,
        // each of the 40 pad positions within 3 sigma of half ones.
        let params = SubParams::demo(4, 8, 40, 0.1, 0.0).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.0, PrfKind::SparseParity).unwrap();
        let base = Seed::labeled(301, "pad-freq");
        let trials = 2000u64;
        let mut ones = vec![0u32; 40];
        for t in 0..trials {
            let key = keygen(&params, &family, &base.split_index("t", t)).unwrap();
            for (count, &bit) in ones.iter_mut().zip(key.pad().symbols()) {
                *count += bit;
            }
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        for (i, &c) in ones.iter().enumerate() {
            assert!(
                (f64::from(c) - trials as f64 / 2.0).abs() < 3.0 * sigma,
                "pad position {i}: {c} ones in {trials}"
            );
        }
    }

    #[test]
    fn encode_emits_full_blocks_that_decode() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(7)).unwrap();
        let base = Seed::labeled(7, "enc");
        let mut accepts = 0;
        for t in 0..200u64 {
            let cw = encode(&key, &params, &base.split_index("t", t)).unwrap();
            assert_eq!(cw.len(), 1536);
            let outcome = decode(&key, &params, &cw).unwrap();
            accepts += outcome.accept as u32;
            assert!(f64::from(outcome.agreeing) <= 256.0);
        }
        assert!(
            accepts >= 198,
            "only {accepts}/200 clean roundtrips accepted"
        );
    }

    #[test]
    fn distinct_seeds_give_distinct_codewords() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(9)).unwrap();
        let base = Seed::labeled(9, "enc");
        let first = encode(&key, &params, &base.split_index("t", 0)).unwrap();
        for t in 1..50u64 {
            assert_ne!(
                encode(&key, &params, &base.split_index("t", t)).unwrap(),
                first
            );
        }
    }

    #[test]
    fn random_strings_are_rejected_under_fresh_keys() {
        let params = demo_params();
        let y = {
            let mut rng = Seed::labeled(11, "probe").rng();
            SymbolString::from_bits(&(0..1536).map(|_| rng.gen()).collect::<Vec<_>>())
        };
        let base = Seed::labeled(11, "keys");
        let rejects = (0..500u64)
            .filter(|&t| {
                let key = keygen(&params, &demo_family(), &base.split_index("k", t)).unwrap();
                !decode(&key, &params, &y).unwrap().accept
            })
            .count();
        assert!(
            rejects >= 495,
            "only {rejects}/500 rejections of a fixed string"
        );
    }

    #[test]
    fn flooding_the_sample_coordinates_defeats_decoding() {
        // Flip the recovered w_j slot of every sample: far over any budget,
        // and aimed exactly at the agreement statistic.
        let params = SubParams::demo(4, 256, 1536, 0.05, 0.0).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.0, PrfKind::SparseParity).unwrap();
        let base = Seed::labeled(13, "attack");
        for t in 0..20u64 {
            let key = keygen(&params, &family, &base.split_index("k", t)).unwrap();
            let cw = encode(&key, &params, &base.split_index("e", t)).unwrap();
            let mut bits: Vec<bool> = cw.symbols().iter().map(|&b| b != 0).collect();
            for (pos, &orig) in key.perm().forward().iter().enumerate() {
                let orig = orig as usize;
                if orig < params.samples_len() as usize && orig % 5 == 4 {
                    bits[pos] = !bits[pos];
                }
            }
            let outcome = decode(&key, &params, &SymbolString::from_bits(&bits)).unwrap();
            assert!(
                !outcome.accept,
                "trial {t} accepted with all samples flipped"
            );
        }
    }

    #[test]
    fn filler_corruption_never_changes_the_outcome() {
        let params = SubParams::demo(4, 256, 1536, 0.05, 0.0).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.0, PrfKind::SparseParity).unwrap();
        let key = keygen(&params, &family, &Seed::new(15)).unwrap();
        let base = Seed::labeled(15, "filler");
        for t in 0..20u64 {
            let cw = encode(&key, &params, &base.split_index("t", t)).unwrap();
            let clean = decode(&key, &params, &cw).unwrap();
            let mut bits: Vec<bool> = cw.symbols().iter().map(|&b| b != 0).collect();
            for (pos, &orig) in key.perm().forward().iter().enumerate() {
                if orig >= params.samples_len() {
                    bits[pos] = !bits[pos];
                }
            }
            let mangled = decode(&key, &params, &SymbolString::from_bits(&bits)).unwrap();
            assert_eq!(mangled.agreeing, clean.agreeing);
        }
    }

    #[test]
    fn bounded_flips_leave_codewords_decodable() {
        // 2% of the block flipped at random positions, noiseless PRF: the
        // agreement count stays far above threshold.
        let params = SubParams::demo(4, 256, 1536, 0.05, 0.0).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.0, PrfKind::SparseParity).unwrap();
        let key = keygen(&params, &family, &Seed::new(17)).unwrap();
        let base = Seed::labeled(17, "flips");
        let budget = (0.02 * 1536.0) as usize;
        let mut accepts = 0;
        for t in 0..100u64 {
            let cw = encode(&key, &params, &base.split_index("e", t)).unwrap();
            let mut bits: Vec<bool> = cw.symbols().iter().map(|&b| b != 0).collect();
            let mut rng = base.split_index("pos", t).rng();
            for pos in rand::seq::index::sample(&mut rng, 1536, budget) {
                bits[pos] = !bits[pos];
            }
            accepts += decode(&key, &params, &SymbolString::from_bits(&bits))
                .unwrap()
                .accept as u32;
        }
        assert!(accepts >= 99, "only {accepts}/100 accepted at 2% flips");
    }

    #[test]
    fn decode_demands_exact_block_length() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(19)).unwrap();
        let short = SymbolString::from_bits(&vec![false; 1535]);
        assert_eq!(
            decode(&key, &params, &short),
            Err(SubError::LengthMismatch {
                expected: 1536,
                got: 1535
            })
        );
    }

    #[test]
    fn ties_at_the_threshold_reject() {
        // Thresholds are strictly compared, so agreement exactly at the
        // cutoff must reject: check the predicate directly around it.
        let params = demo_params();
        let t = params.threshold();
        assert!(f64::from(t.floor() as u32) <= t);
        assert!(!(t > t));
    }

    #[test]
    fn fresh_key_codewords_look_positionally_uniform() {
        // Necessary condition for key-free indistinguishability: averaged
        // over fresh keys, every output position is an unbiased bit and
        // adjacent positions are uncorrelated.
        let params = SubParams::demo(4, 8, 40, 0.1, 0.25).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.25, PrfKind::SparseParity).unwrap();
        let base = Seed::labeled(23, "marginal");
        let trials = 2000u64;
        let len = 40usize;
        let mut ones = vec![0u32; len];
        let mut pair_ones = vec![0u32; len - 1];
        for t in 0..trials {
            let key = keygen(&params, &family, &base.split_index("k", t)).unwrap();
            let cw = encode(&key, &params, &base.split_index("e", t)).unwrap();
            for (i, &b) in cw.symbols().iter().enumerate() {
                ones[i] += b;
                if i + 1 < len {
                    pair_ones[i] += (b == 1 && cw.symbols()[i + 1] == 1) as u32;
                }
            }
        }
        let sigma = (trials as f64 * 0.25).sqrt();
        for (i, &c) in ones.iter().enumerate() {
            assert!(
                (f64::from(c) - trials as f64 / 2.0).abs() < 3.0 * sigma,
                "position {i}: {c} ones"
            );
        }
        // Both-one frequency for independent unbiased bits is 1/4.
        let pair_sigma = (trials as f64 * 0.25 * 0.75).sqrt();
        for (i, &c) in pair_ones.iter().enumerate() {
            assert!(
                (f64::from(c) - trials as f64 / 4.0).abs() < 3.5 * pair_sigma,
                "positions {i},{}: {c} joint ones",
                i + 1
            );
        }
    }

    #[test]
    fn key_files_roundtrip_and_flag_demo_keys() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(29)).unwrap();
        let bytes = key_to_bytes(&params, &key);
        assert_eq!(&bytes[..4], b"PRCK");
        assert_eq!(bytes[6], keyfile::PROFILE_INSECURE_DEMO);
        let (params2, key2) = key_from_bytes(&bytes).unwrap();
        assert_eq!(params2, params);
        assert_eq!(key2, key);

        let theory = SubParams::theory(4, 0.25, 0.0, 0.01).unwrap();
        let family = LocalPrfFamily::new(4, 2, 0.0, PrfKind::SparseParity).unwrap();
        let tkey = keygen(&theory, &family, &Seed::new(31)).unwrap();
        let tbytes = key_to_bytes(&theory, &tkey);
        assert_eq!(tbytes[6], keyfile::PROFILE_THEORY);
        assert_eq!(key_from_bytes(&tbytes).unwrap().0.profile, Profile::Theory);
    }

    #[test]
    fn key_parsing_rejects_mangled_files() {
        let params = demo_params();
        let key = keygen(&params, &demo_family(), &Seed::new(37)).unwrap();
        let good = key_to_bytes(&params, &key);
        assert!(matches!(
            key_from_bytes(&good[..10]),
            Err(SubError::ParseKey(_))
        ));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            key_from_bytes(&bad_magic),
            Err(SubError::ParseKey(_))
        ));
        let mut bad_kind = good.clone();
        bad_kind[5] = 9;
        assert!(matches!(
            key_from_bytes(&bad_kind),
            Err(SubError::ParseKey(_))
        ));
        let mut trailing = good;
        trailing.push(0);
        assert!(matches!(
            key_from_bytes(&trailing),
            Err(SubError::ParseKey(_))
        ));
    }
}
