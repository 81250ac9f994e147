//! Autoregressive token models with a terminal token, plus the entropy
//! functionals the watermark detector is calibrated against. Models here
//! are toys: just enough structure to exercise embedding and detection at
//! controllable entropy rates.
//!
//! Window arguments are 0-based and half-open, so `start..end` covers the
//! tokens `tok[start]` through `tok[end - 1]`, each conditioned on
//! everything before it.

use crate::seed::Seed;
use crate::symbols::{Alphabet, SymbolError, SymbolString};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("negative probability at symbol {0}")]
    NegativeProbability(u32),
    #[error("token alphabet does not match the model's")]
    AlphabetMismatch,
    #[error("window {start}..{end} invalid for length {len}")]
    InvalidWindow {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("model assigns probability zero to the token at position {pos}")]
    ZeroProbabilityToken { pos: usize },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// One conditional next-token distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<TokenDistribution, LmError> {
        if probs.len() != alphabet.size() as usize {
            return Err(LmError::InvalidModel(format!(
                "{} probabilities for an alphabet of {}",
                probs.len(),
                alphabet.size()
            )));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if p < 0.0 || !p.is_finite() {
                return Err(LmError::NegativeProbability(i as u32));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LmError::NotNormalized(sum));
        }
        Ok(TokenDistribution { alphabet, probs })
    }

    pub fn point_mass(alphabet: Alphabet, symbol: u32) -> Result<TokenDistribution, LmError> {
        if symbol >= alphabet.size() {
            return Err(LmError::InvalidModel(format!(
                "point mass on {symbol} outside alphabet"
            )));
        }
        let mut probs = vec![0.0; alphabet.size() as usize];
        probs[symbol as usize] = 1.0;
        Ok(TokenDistribution { alphabet, probs })
    }

    pub fn uniform(alphabet: Alphabet) -> TokenDistribution {
        let n = alphabet.size() as usize;
        TokenDistribution {
            alphabet,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: u32) -> f64 {
        self.probs.get(symbol as usize).copied().unwrap_or(0.0)
    }

    /// Inverse-CDF draw. The residual mass left by float rounding goes to
    /// the last symbol with positive probability.
    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        let mut u: f64 = rng.gen();
        let mut last_positive = 0u32;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i as u32;
                if u < p {
                    return last_positive;
                }
                u -= p;
            }
        }
        last_positive
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    /// Distribution of phi(X) for X drawn from self; phi maps every
    /// source symbol to one of `target`'s symbols.
    pub fn pushforward(&self, phi: &[u32], target: Alphabet) -> Result<TokenDistribution, LmError> {
        if phi.len() != self.probs.len() {
            return Err(LmError::InvalidModel(format!(
                "map covers {} symbols, alphabet has {}",
                phi.len(),
                self.probs.len()
            )));
        }
        let mut out = vec![0.0; target.size() as usize];
        for (sym, &image) in phi.iter().enumerate() {
            if image >= target.size() {
                return Err(LmError::InvalidModel(format!(
                    "map sends {sym} outside the target alphabet"
                )));
            }
            out[image as usize] += self.probs[sym];
        }
        Ok(TokenDistribution {
            alphabet: target,
            probs: out,
        })
    }
}

/// An autoregressive model over a fixed alphabet with one distinguished
/// terminal token. Implementations must be pure in the prefix and
/// absorbing at the terminal: once the terminal appears anywhere in the
/// prefix, `next` is a point mass on the terminal.
pub trait LanguageModel {
    fn alphabet(&self) -> Alphabet;
    fn terminal_token(&self) -> u32;
    fn next(&self, prefix: &SymbolString) -> Result<TokenDistribution, LmError>;
}

fn absorbed(prefix: &SymbolString, terminal: u32) -> bool {
    prefix.symbols().contains(&terminal)
}

/// Output-length caps beyond this are almost certainly a configuration
/// mistake for toy models.
pub const MAX_MODEL_LENGTH: u32 = 1 << 20;

/// Serializable description of a toy model; `build` turns it into a
/// runnable one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ToyModelSpec {
    /// Every step is uniform over a fixed subset of symbols, forever.
    /// Sequences only end via the caller's cap unless the subset contains
    /// the terminal.
    UniformSubset {
        alphabet_size: u32,
        terminal: u32,
        subset: Vec<u32>,
    },
    /// First token from `initial`, each later token from the row of its
    /// predecessor.
    Markov {
        terminal: u32,
        initial: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
    /// Uniform over the non-terminal symbols for exactly `length` steps,
    /// then the terminal.
    FixedLengthUniform {
        alphabet_size: u32,
        terminal: u32,
        length: u32,
    },
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    alphabet: Alphabet,
    terminal: u32,
    kind: ToyKind,
}

#[derive(Debug, Clone)]
enum ToyKind {
    UniformSubset {
        step: TokenDistribution,
    },
    Markov {
        initial: TokenDistribution,
        rows: Vec<TokenDistribution>,
    },
    FixedLengthUniform {
        step: TokenDistribution,
        length: u32,
    },
}

impl ToyModelSpec {
    pub fn build(&self) -> Result<ToyModel, LmError> {
        match self {
            ToyModelSpec::UniformSubset {
                alphabet_size,
                terminal,
                subset,
            } => {
                let alphabet = Alphabet::new(*alphabet_size)?;
                check_terminal(*terminal, alphabet)?;
                if subset.is_empty() {
                    return Err(LmError::InvalidModel("empty subset".to_string()));
                }
                let mut seen = std::collections::HashSet::new();
                let mut probs = vec![0.0; *alphabet_size as usize];
                for &s in subset {
                    if s >= *alphabet_size {
                        return Err(LmError::InvalidModel(format!(
                            "subset symbol {s} outside alphabet"
                        )));
                    }
                    if !seen.insert(s) {
                        return Err(LmError::InvalidModel(format!("subset repeats symbol {s}")));
                    }
                    probs[s as usize] = 1.0 / subset.len() as f64;
                }
                Ok(ToyModel {
                    alphabet,
                    terminal: *terminal,
                    kind: ToyKind::UniformSubset {
                        step: TokenDistribution::new(alphabet, probs)?,
                    },
                })
            }
            ToyModelSpec::Markov {
                terminal,
                initial,
                rows,
            } => {
                let size = rows.len() as u32;
                let alphabet = Alphabet::new(size)?;
                check_terminal(*terminal, alphabet)?;
                if initial.len() != rows.len() {
                    return Err(LmError::InvalidModel(format!(
                        "initial distribution over {} symbols, table over {}",
                        initial.len(),
                        rows.len()
                    )));
                }
                let initial = TokenDistribution::new(alphabet, initial.clone())?;
                let rows = rows
                    .iter()
                    .map(|row| TokenDistribution::new(alphabet, row.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ToyModel {
                    alphabet,
                    terminal: *terminal,
                    kind: ToyKind::Markov { initial, rows },
                })
            }
            ToyModelSpec::FixedLengthUniform {
                alphabet_size,
                terminal,
                length,
            } => {
                let alphabet = Alphabet::new(*alphabet_size)?;
                check_terminal(*terminal, alphabet)?;
                if *alphabet_size < 2 {
                    return Err(LmError::InvalidModel(
                        "need at least one non-terminal symbol".to_string(),
                    ));
                }
                if *length > MAX_MODEL_LENGTH {
                    return Err(LmError::InvalidModel(format!(
                        "length {length} above cap {MAX_MODEL_LENGTH}"
                    )));
                }
                let others = alphabet.size() - 1;
                let probs = (0..alphabet.size())
                    .map(|s| {
                        if s == *terminal {
                            0.0
                        } else {
                            1.0 / others as f64
                        }
                    })
                    .collect();
                Ok(ToyModel {
                    alphabet,
                    terminal: *terminal,
                    kind: ToyKind::FixedLengthUniform {
                        step: TokenDistribution::new(alphabet, probs)?,
                        length: *length,
                    },
                })
            }
        }
    }
}

fn check_terminal(terminal: u32, alphabet: Alphabet) -> Result<(), LmError> {
    if terminal >= alphabet.size() {
        return Err(LmError::InvalidModel(format!(
            "terminal {terminal} outside alphabet"
        )));
    }
    Ok(())
}

impl LanguageModel for ToyModel {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn terminal_token(&self) -> u32 {
        self.terminal
    }

    fn next(&self, prefix: &SymbolString) -> Result<TokenDistribution, LmError> {
        if prefix.alphabet() != self.alphabet {
            return Err(LmError::AlphabetMismatch);
        }
        if absorbed(prefix, self.terminal) {
            return TokenDistribution::point_mass(self.alphabet, self.terminal);
        }
        match &self.kind {
            ToyKind::UniformSubset { step } => Ok(step.clone()),
            ToyKind::Markov { initial, rows } => match prefix.symbols().last() {
                None => Ok(initial.clone()),
                Some(&last) => Ok(rows[last as usize].clone()),
            },
            ToyKind::FixedLengthUniform { step, length } => {
                if prefix.len() as u32 >= *length {
                    TokenDistribution::point_mass(self.alphabet, self.terminal)
                } else {
                    Ok(step.clone())
                }
            }
        }
    }
}

/// Draws tokens sequentially until the terminal appears or `cap` tokens
/// have been emitted. A sampled terminal is included in the output; any
/// padding beyond it is the caller's business.
pub fn sample_sequence(
    model: &dyn LanguageModel,
    seed: &Seed,
    cap: u32,
) -> Result<SymbolString, LmError> {
    let mut rng = seed.rng();
    let mut tok = SymbolString::empty(model.alphabet());
    while (tok.len() as u32) < cap {
        let dist = model.next(&tok)?;
        let sym = dist.sample(&mut rng);
        tok.push(sym)?;
        if sym == model.terminal_token() {
            break;
        }
    }
    Ok(tok)
}

fn check_window(start: usize, end: usize, len: usize) -> Result<(), LmError> {
    if start >= end || end > len {
        return Err(LmError::InvalidWindow { start, end, len });
    }
    Ok(())
}

/// Surprisal of the realized window: the sum over positions in
/// `start..end` of -ln P(tok[pos] | tok[..pos]), in nats. Windows of a
/// partition add up exactly.
pub fn empirical_entropy(
    model: &dyn LanguageModel,
    tok: &SymbolString,
    start: usize,
    end: usize,
) -> Result<f64, LmError> {
    check_window(start, end, tok.len())?;
    let mut total = 0.0;
    for pos in start..end {
        let prefix = tok.prefix(pos);
        let p = model.next(&prefix)?.prob(tok.symbols()[pos]);
        if p <= 0.0 {
            return Err(LmError::ZeroProbabilityToken { pos });
        }
        total -= p.ln();
    }
    Ok(total)
}

/// Sum of the Shannon entropies of the conditional distributions along
/// the realized prefix, over positions `start..end`, in nats. Unlike the
/// surprisal it never blows up on an unlucky realized token.
pub fn mean_entropy(
    model: &dyn LanguageModel,
    tok: &SymbolString,
    start: usize,
    end: usize,
) -> Result<f64, LmError> {
    check_window(start, end, tok.len())?;
    let mut total = 0.0;
    for pos in start..end {
        total += model.next(&tok.prefix(pos))?.entropy();
    }
    Ok(total)
}

/// How much of each step's conditional mass survives capping at the
/// uniform level after mapping through phi: the sum over positions in
/// `start..end` of sum_sigma' min(1/|target|, pushforward(P_pos)(sigma')).
/// Each step contributes at most 1 (uniform pushforward) and at least
/// 1/|target| (deterministic step).
pub fn spread(
    model: &dyn LanguageModel,
    phi: &[u32],
    target: Alphabet,
    tok: &SymbolString,
    start: usize,
    end: usize,
) -> Result<f64, LmError> {
    check_window(start, end, tok.len())?;
    let cap = 1.0 / target.size() as f64;
    let mut total = 0.0;
    for pos in start..end {
        let pushed = model.next(&tok.prefix(pos))?.pushforward(phi, target)?;
        total += pushed.probs().iter().map(|&p| p.min(cap)).sum::<f64>();
    }
    Ok(total)
}
