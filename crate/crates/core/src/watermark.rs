//! Embedding index-code codewords into autoregressive sampling. A secret
//! map phi labels every model token with a code symbol; generation biases
//! each token draw toward the label the current codeword asks for, while
//! leaving the overall output distribution untouched. Detection maps a
//! suspect text back through phi and scans every window of up to one
//! block for a decodable codeword.

use crate::keyfile;
use crate::lm::{LanguageModel, LmError, TokenDistribution, MAX_MODEL_LENGTH};
use crate::prc_indexing::{self, IdxError, IdxKey, IdxParams};
use crate::prc_substitution::Profile;
use crate::prf::{self, LocalPrfFamily, PrfError};
use crate::seed::Seed;
use crate::symbols::{Alphabet, SymbolError, SymbolString, MAX_ALPHABET};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WmError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(
        "alphabet of {sigma} tokens is below the theory bound (needs ln size >= {required_ln:.2})"
    )]
    AlphabetTooSmall { sigma: u32, required_ln: f64 },
    #[error("token alphabet does not match the watermark parameters")]
    AlphabetMismatch,
    #[error("conditional token mass vanished; the embedding branch should be unreachable")]
    DegenerateResidual,
    #[error("cannot parse key file: {0}")]
    ParseKey(String),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Prf(#[from] PrfError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Shape of one watermarking deployment: the code's block length in
/// tokens, the entropy-rate parameter the robustness guarantee is stated
/// against, the model's token alphabet size, and the output length cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkParams {
    pub n: u32,
    pub alpha: f64,
    pub sigma_size: u32,
    pub l_max: u32,
    pub profile: Profile,
}

impl WatermarkParams {
    pub fn new(
        n: u32,
        alpha: f64,
        sigma_size: u32,
        l_max: u32,
        profile: Profile,
    ) -> Result<WatermarkParams, WmError> {
        if n == 0 {
            return Err(WmError::InvalidParams(
                "block length must be positive".to_string(),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(WmError::InvalidParams(format!(
                "entropy rate {alpha} outside (0, 1)"
            )));
        }
        if sigma_size < 2 || sigma_size > MAX_ALPHABET {
            return Err(WmError::InvalidParams(format!(
                "alphabet of {sigma_size} symbols, need 2 ..= {MAX_ALPHABET}"
            )));
        }
        if l_max == 0 || l_max > MAX_MODEL_LENGTH {
            return Err(WmError::InvalidParams(format!(
                "length cap {l_max} outside 1 ..= {MAX_MODEL_LENGTH}"
            )));
        }
        Ok(WatermarkParams {
            n,
            alpha,
            sigma_size,
            l_max,
            profile,
        })
    }

    /// Entropy threshold for a window of ell tokens: windows whose
    /// surprisal reaches beta_threshold(ell) * ln(sigma_size) carry the
    /// detection guarantee.
    pub fn beta_threshold(&self, ell: u64) -> f64 {
        beta_formula(self.n, self.alpha, ell)
    }
}

/// 8n + 6 * alpha * ell, in units of ln-alphabet-size nats.
pub fn beta_formula(n: u32, alpha: f64, ell: u64) -> f64 {
    8.0 * f64::from(n) + 6.0 * alpha * ell as f64
}

/// Code key plus the token-labeling map phi, one entry per token symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkKey {
    prc_key: IdxKey,
    phi: Vec<u32>,
}

impl WatermarkKey {
    pub fn prc_key(&self) -> &IdxKey {
        &self.prc_key
    }

    pub fn phi(&self) -> &[u32] {
        &self.phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detected: bool,
    /// First window (start, end), inclusive on both sides, whose mapped
    /// symbols decode. Present exactly when detected.
    pub witness: Option<(usize, usize)>,
}

pub fn setup(
    params: &WatermarkParams,
    idx_params: &IdxParams,
    family: &LocalPrfFamily,
    seed: &Seed,
) -> Result<WatermarkKey, WmError> {
    check_block(params, idx_params)?;
    let k = idx_params.q_out;
    if params.profile == Profile::Theory {
        // |Sigma| >= (8/alpha * k)^(2/alpha), compared in log space since
        // the right side overflows at any interesting alpha.
        let required_ln = (2.0 / params.alpha) * (8.0 * f64::from(k) / params.alpha).ln();
        if f64::from(params.sigma_size).ln() < required_ln {
            return Err(WmError::AlphabetTooSmall {
                sigma: params.sigma_size,
                required_ln,
            });
        }
    }
    let prc_key = prc_indexing::keygen_idx(idx_params, family, &seed.split("prc"))?;
    let mut rng = seed.split("phi").rng();
    let phi = (0..params.sigma_size)
        .map(|_| rng.gen_range(0..k))
        .collect();
    Ok(WatermarkKey { prc_key, phi })
}

fn check_block(params: &WatermarkParams, idx_params: &IdxParams) -> Result<(), WmError> {
    if params.n != idx_params.m_out {
        return Err(WmError::InvalidParams(format!(
            "block length {} does not match the code's {}",
            params.n, idx_params.m_out
        )));
    }
    Ok(())
}

fn check_key(
    key: &WatermarkKey,
    params: &WatermarkParams,
    idx_params: &IdxParams,
) -> Result<(), WmError> {
    check_block(params, idx_params)?;
    if key.phi.len() != params.sigma_size as usize {
        return Err(WmError::InvalidParams(format!(
            "phi labels {} tokens, parameters say {}",
            key.phi.len(),
            params.sigma_size
        )));
    }
    Ok(())
}

/// Shared state for repeated embedding against one phi: the preimage
/// lists make the conditional draw proportional to the model's own
/// probabilities cheap.
struct Embedder<'a> {
    phi: &'a [u32],
    k: u32,
    preimages: Vec<Vec<u32>>,
}

impl<'a> Embedder<'a> {
    fn new(phi: &'a [u32], k: u32) -> Embedder<'a> {
        let mut preimages = vec![Vec::new(); k as usize];
        for (sym, &image) in phi.iter().enumerate() {
            preimages[image as usize].push(sym as u32);
        }
        Embedder { phi, k, preimages }
    }

    fn embed(&self, x_j: u32, p: &TokenDistribution, rng: &mut impl Rng) -> Result<u32, WmError> {
        let probs = p.probs();
        let kf = f64::from(self.k);
        let mut bar = vec![0.0f64; self.k as usize];
        for (sym, &image) in self.phi.iter().enumerate() {
            bar[image as usize] += probs[sym as usize];
        }
        let keep = (kf * bar[x_j as usize]).min(1.0);
        let y = if keep >= 1.0 || rng.gen_bool(keep) {
            x_j
        } else {
            // Draw from the mass exceeding the uniform level. Exact
            // arithmetic makes this branch imply positive residual; a
            // rounding-level residual falls back to the wanted symbol
            // instead of dividing by almost-zero.
            let floor = 1.0 / kf;
            let total: f64 = bar.iter().map(|&b| (b - floor).max(0.0)).sum();
            if total <= 1e-12 {
                x_j
            } else {
                let mut u = rng.gen::<f64>() * total;
                let mut pick = x_j;
                for (sigma, &b) in bar.iter().enumerate() {
                    let w = (b - floor).max(0.0);
                    if w > 0.0 {
                        pick = sigma as u32;
                        if u < w {
                            break;
                        }
                        u -= w;
                    }
                }
                pick
            }
        };
        // Token from the model's distribution conditioned on carrying the
        // label y. Both branches above put positive mass on y's preimage,
        // so an empty draw here means float catastrophe, not bad luck.
        let pre = &self.preimages[y as usize];
        let mass: f64 = pre.iter().map(|&sym| probs[sym as usize]).sum();
        if mass <= 0.0 {
            return Err(WmError::DegenerateResidual);
        }
        let mut u = rng.gen::<f64>() * mass;
        let mut pick = None;
        for &sym in pre {
            let w = probs[sym as usize];
            if w > 0.0 {
                pick = Some(sym);
                if u < w {
                    break;
                }
                u -= w;
            }
        }
        pick.ok_or(WmError::DegenerateResidual)
    }
}

/// One biased token draw: push the model's conditional through phi, keep
/// the wanted code symbol with probability min(1, k * mass), otherwise
/// draw a label from the above-uniform residual, and emit a token from
/// the conditional restricted to that label's preimage.
pub fn embed_token(
    x_j: u32,
    p: &TokenDistribution,
    phi: &[u32],
    prc_alphabet: Alphabet,
    seed: &Seed,
) -> Result<u32, WmError> {
    let k = prc_alphabet.size();
    if phi.len() != p.probs().len() {
        return Err(WmError::InvalidParams(format!(
            "phi labels {} tokens, distribution covers {}",
            phi.len(),
            p.probs().len()
        )));
    }
    if x_j >= k || phi.iter().any(|&v| v >= k) {
        return Err(WmError::InvalidParams(
            "code symbol outside the code alphabet".to_string(),
        ));
    }
    Embedder::new(phi, k).embed(x_j, p, &mut seed.rng())
}

/// Watermarked generation: sample the model token by token, steering each
/// draw toward the current codeword symbol, with a fresh codeword every n
/// tokens. Stops at the terminal token or after l_max tokens.
pub fn wat(
    key: &WatermarkKey,
    params: &WatermarkParams,
    idx_params: &IdxParams,
    model: &dyn LanguageModel,
    seed: &Seed,
) -> Result<SymbolString, WmError> {
    check_key(key, params, idx_params)?;
    if model.alphabet().size() != params.sigma_size {
        return Err(WmError::AlphabetMismatch);
    }
    let embedder = Embedder::new(&key.phi, idx_params.q_out);
    let mut rng = seed.split("embed").rng();
    let mut block = 0u64;
    let mut x =
        prc_indexing::encode_idx(&key.prc_key, idx_params, &seed.split_index("block", block))?;
    let mut j = 0usize;
    let mut tok = SymbolString::empty(model.alphabet());
    while (tok.len() as u32) < params.l_max {
        let p = model.next(&tok)?;
        let sym = embedder.embed(x.symbols()[j], &p, &mut rng)?;
        tok.push(sym)?;
        if sym == model.terminal_token() {
            break;
        }
        j += 1;
        if j == idx_params.m_out as usize {
            j = 0;
            block += 1;
            x = prc_indexing::encode_idx(
                &key.prc_key,
                idx_params,
                &seed.split_index("block", block),
            )?;
        }
    }
    Ok(tok)
}

/// Rolling decoder state for the window scan: the de-permuted, un-padded
/// block bits and each sample's current agreement with the keyed
/// function. Setting or clearing one projected position touches exactly
/// one block bit, so only that bit's sample needs re-evaluation.
struct Scanner<'a> {
    prf_key: &'a prf::PrfKey,
    n: usize,
    samples_len: usize,
    block: Vec<bool>,
    agree: Vec<bool>,
    w: i64,
}

impl<'a> Scanner<'a> {
    fn new(key: &'a IdxKey, idx_params: &IdxParams) -> Result<Scanner<'a>, WmError> {
        let sub = &idx_params.inner;
        let inner = key.inner_key();
        let n = sub.n as usize;
        let samples_len = sub.samples_len() as usize;
        // The empty window projects to the all-zero string, whose
        // unscrambled form is the pad itself.
        let block: Vec<bool> = inner.pad().symbols()[..samples_len]
            .iter()
            .map(|&b| b != 0)
            .collect();
        let mut scanner = Scanner {
            prf_key: inner.prf_key(),
            n,
            samples_len,
            block,
            agree: vec![false; sub.m as usize],
            w: 0,
        };
        for s in 0..sub.m as usize {
            let a = scanner.eval_sample(s)?;
            scanner.agree[s] = a;
            scanner.w += a as i64;
        }
        Ok(scanner)
    }

    fn eval_sample(&self, s: usize) -> Result<bool, WmError> {
        let at = s * (self.n + 1);
        let x = SymbolString::from_bits(&self.block[at..at + self.n]);
        Ok(prf::eval(self.prf_key, &x)? == self.block[at + self.n])
    }

    /// Flips the block bit that inner position `idx` scrambles to, if it
    /// lands inside the sample region, and refreshes that sample.
    fn toggle(&mut self, pos: usize) -> Result<(), WmError> {
        if pos >= self.samples_len {
            return Ok(());
        }
        self.block[pos] = !self.block[pos];
        let s = pos / (self.n + 1);
        let now = self.eval_sample(s)?;
        self.w += now as i64 - self.agree[s] as i64;
        self.agree[s] = now;
        Ok(())
    }
}

/// Scans every window of at most n tokens, mapping tokens through phi and
/// running the code's decoder on each, and reports the first window that
/// decodes. Equivalent to decoding each window from scratch, but windows
/// grow by one symbol at a time, and one extra symbol flips at most one
/// projected bit.
pub fn detect(
    key: &WatermarkKey,
    params: &WatermarkParams,
    idx_params: &IdxParams,
    tok: &SymbolString,
) -> Result<DetectionResult, WmError> {
    check_key(key, params, idx_params)?;
    if tok.alphabet().size() != params.sigma_size {
        return Err(WmError::AlphabetMismatch);
    }
    let sub = &idx_params.inner;
    let psi = key.prc_key.psi();
    // Tokens name inner positions directly: first phi, then psi.
    let kappa: Vec<u32> = key.phi.iter().map(|&v| psi[v as usize]).collect();
    let forward = key.prc_key.inner_key().perm().forward();
    let threshold = sub.threshold();
    let mut scanner = Scanner::new(&key.prc_key, idx_params)?;
    let mut in_window = vec![false; sub.block_len as usize];
    let mut flips: Vec<u32> = Vec::with_capacity(idx_params.m_out as usize);
    let len = tok.len();
    let window_cap = idx_params.m_out as usize;
    for start in 0..len {
        let mut hit = None;
        for at in start..len.min(start + window_cap) {
            let idx = kappa[tok.symbols()[at] as usize];
            if !in_window[idx as usize] {
                in_window[idx as usize] = true;
                flips.push(idx);
                scanner.toggle(forward[idx as usize] as usize)?;
            }
            if scanner.w as f64 > threshold {
                hit = Some((start, at));
                break;
            }
        }
        for idx in flips.drain(..) {
            in_window[idx as usize] = false;
            scanner.toggle(forward[idx as usize] as usize)?;
        }
        if hit.is_some() {
            return Ok(DetectionResult {
                detected: true,
                witness: hit,
            });
        }
    }
    Ok(DetectionResult {
        detected: false,
        witness: None,
    })
}

/// Key file layout after the common frame: the indexing payload, then the
/// block length (u32), alpha (f64), alphabet size and length cap (u32),
/// and the phi array.
pub fn key_to_bytes(
    params: &WatermarkParams,
    idx_params: &IdxParams,
    key: &WatermarkKey,
) -> Vec<u8> {
    let profile = match params.profile {
        Profile::Theory => keyfile::PROFILE_THEORY,
        Profile::Demo => keyfile::PROFILE_INSECURE_DEMO,
    };
    let mut w = keyfile::Writer::new(keyfile::KIND_WATERMARK, profile);
    prc_indexing::write_payload(&mut w, idx_params, &key.prc_key);
    w.u32(params.n);
    w.f64(params.alpha);
    w.u32(params.sigma_size);
    w.u32(params.l_max);
    w.indices(&key.phi);
    w.finish()
}

pub fn key_from_bytes(bytes: &[u8]) -> Result<(WatermarkParams, IdxParams, WatermarkKey), WmError> {
    let (mut r, kind, profile) = keyfile::Reader::open(bytes).map_err(WmError::ParseKey)?;
    if kind != keyfile::KIND_WATERMARK {
        return Err(WmError::ParseKey(format!(
            "kind tag {kind} is not a watermark key"
        )));
    }
    let (idx_params, prc_key) = prc_indexing::read_payload(&mut r, profile)
        .map_err(|e| WmError::ParseKey(e.to_string()))?;
    let take = |r: &mut keyfile::Reader<'_>| -> Result<(u32, f64, u32, u32), String> {
        Ok((r.u32()?, r.f64()?, r.u32()?, r.u32()?))
    };
    let (n, alpha, sigma_size, l_max) = take(&mut r).map_err(WmError::ParseKey)?;
    let wm_profile = match profile {
        keyfile::PROFILE_THEORY => Profile::Theory,
        _ => Profile::Demo,
    };
    let params = WatermarkParams::new(n, alpha, sigma_size, l_max, wm_profile)
        .map_err(|e| WmError::ParseKey(e.to_string()))?;
    check_block(&params, &idx_params).map_err(|e| WmError::ParseKey(e.to_string()))?;
    let phi = r.indices(sigma_size as usize).map_err(WmError::ParseKey)?;
    if let Some(&bad) = phi.iter().find(|&&v| v >= idx_params.q_out) {
        return Err(WmError::ParseKey(format!(
            "phi value {bad} outside the code alphabet"
        )));
    }
    r.expect_end().map_err(WmError::ParseKey)?;
    Ok((params, idx_params, WatermarkKey { prc_key, phi }))
}
