//! Adversarial corruption of symbol strings under a hard edit budget. A
//! channel never holds any key material; the strongest strategy here gets
//! at most a guess at the index map. Budgets are floors of rate * length
//! and are never exceeded, so compliance is checkable after the fact with
//! [`verify_budget`].

use crate::seed::Seed;
use crate::symbols::{edit_distance, hamming_distance, SymbolError, SymbolString};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid channel spec: {0}")]
    InvalidSpec(String),
    #[error("strategy {strategy} is not defined for {kind} channels")]
    InvalidStrategyForKind {
        strategy: &'static str,
        kind: &'static str,
    },
    #[error("cannot parse edit script: {0}")]
    InvalidScript(String),
    #[error("script spends {ops} edits, budget is {budget}")]
    ScriptExceedsBudget { ops: usize, budget: usize },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Changes symbols in place; length is preserved.
    Substitution,
    /// Substitutions, insertions, and deletions; length may change.
    Edit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Strategy {
    /// Spends the budget at uniformly chosen positions.
    IidRandom,
    /// Concentrates the whole budget on one contiguous window:
    /// substitutions in place for substitution channels, a deleted window
    /// for edit channels.
    Burst,
    /// Edit-only: deletes the symbols whose removal shrinks the set of
    /// occupied index classes fastest, using a guessed index map when one
    /// is supplied and uniform positions otherwise.
    GreedyTargeted { psi_guess: Option<Vec<u32>> },
    /// Edit-only: inserts copies of symbols already present.
    Duplication,
    /// Replays a fixed edit script, for regression-testing specific
    /// corruption patterns.
    CustomScript { script: String },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::IidRandom => "iid-random",
            Strategy::Burst => "burst",
            Strategy::GreedyTargeted { .. } => "greedy-targeted",
            Strategy::Duplication => "duplication",
            Strategy::CustomScript { .. } => "custom-script",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub rate: f64,
    pub strategy: Strategy,
    pub seed: Seed,
}

impl ChannelSpec {
    /// Edits allowed against a string of the given length: floor of
    /// rate * len, with a nudge so decimal rates hit their intended
    /// integer budgets. Rates above 1 are legal and buy more edits than
    /// the string has symbols, which only an edit channel can spend
    /// usefully; strategies that pick distinct positions clamp at len.
    pub fn budget(&self, len: usize) -> usize {
        (self.rate * len as f64 + 1e-9).floor() as usize
    }

    fn check(&self) -> Result<(), ChannelError> {
        if !self.rate.is_finite() || self.rate < 0.0 {
            return Err(ChannelError::InvalidSpec(format!(
                "rate {} is not a finite nonnegative number",
                self.rate
            )));
        }
        Ok(())
    }
}

/// One parsed edit script operation. Positions index the evolving string,
/// so later operations see the effect of earlier ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Substitute { pos: usize, symbol: u32 },
    Insert { pos: usize, symbol: u32 },
    Delete { pos: usize },
}

/// Parses the line-oriented script form: one op per line, `S <pos> <sym>`,
/// `I <pos> <sym>`, or `D <pos>`. Blank lines are skipped.
pub fn parse_script(text: &str) -> Result<Vec<EditOp>, ChannelError> {
    let mut ops = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(op) = fields.next() else { continue };
        let mut number = |what: &str| -> Result<usize, ChannelError> {
            fields
                .next()
                .ok_or_else(|| {
                    ChannelError::InvalidScript(format!("line {}: missing {what}", lineno + 1))
                })?
                .parse()
                .map_err(|_| {
                    ChannelError::InvalidScript(format!("line {}: bad {what}", lineno + 1))
                })
        };
        let parsed = match op {
            "S" => EditOp::Substitute {
                pos: number("position")?,
                symbol: number("symbol")? as u32,
            },
            "I" => EditOp::Insert {
                pos: number("position")?,
                symbol: number("symbol")? as u32,
            },
            "D" => EditOp::Delete {
                pos: number("position")?,
            },
            other => {
                return Err(ChannelError::InvalidScript(format!(
                    "line {}: unknown op {other:?}",
                    lineno + 1
                )))
            }
        };
        if fields.next().is_some() {
            return Err(ChannelError::InvalidScript(format!(
                "line {}: trailing fields",
                lineno + 1
            )));
        }
        ops.push(parsed);
    }
    Ok(ops)
}

fn apply_script(
    x: &SymbolString,
    ops: &[EditOp],
    kind: ChannelKind,
) -> Result<Vec<u32>, ChannelError> {
    let size = x.alphabet().size();
    let mut cur = x.symbols().to_vec();
    for (i, &op) in ops.iter().enumerate() {
        let oob = |pos: usize, bound: usize| {
            ChannelError::InvalidScript(format!("op {}: position {pos} outside 0..{bound}", i + 1))
        };
        match op {
            EditOp::Substitute { pos, symbol } => {
                if pos >= cur.len() {
                    return Err(oob(pos, cur.len()));
                }
                if symbol >= size {
                    return Err(ChannelError::InvalidScript(format!(
                        "op {}: symbol {symbol} outside alphabet",
                        i + 1
                    )));
                }
                cur[pos] = symbol;
            }
            EditOp::Insert { pos, symbol } => {
                if kind == ChannelKind::Substitution {
                    return Err(ChannelError::InvalidStrategyForKind {
                        strategy: "custom-script insert",
                        kind: "substitution",
                    });
                }
                if pos > cur.len() {
                    return Err(oob(pos, cur.len() + 1));
                }
                if symbol >= size {
                    return Err(ChannelError::InvalidScript(format!(
                        "op {}: symbol {symbol} outside alphabet",
                        i + 1
                    )));
                }
                cur.insert(pos, symbol);
            }
            EditOp::Delete { pos } => {
                if kind == ChannelKind::Substitution {
                    return Err(ChannelError::InvalidStrategyForKind {
                        strategy: "custom-script delete",
                        kind: "substitution",
                    });
                }
                if pos >= cur.len() {
                    return Err(oob(pos, cur.len()));
                }
                cur.remove(pos);
            }
        }
    }
    Ok(cur)
}

/// Picks a replacement different from `old` when the alphabet has room;
/// single-symbol alphabets have nothing to change to.
fn substitute_symbol(rng: &mut impl Rng, size: u32, old: u32) -> u32 {
    if size < 2 {
        return old;
    }
    let pick = rng.gen_range(0..size - 1);
    if pick >= old {
        pick + 1
    } else {
        pick
    }
}

/// Corrupts x within the channel's budget. The output always satisfies
/// [`verify_budget`] against the input.
pub fn apply_channel(spec: &ChannelSpec, x: &SymbolString) -> Result<SymbolString, ChannelError> {
    spec.check()?;
    let budget = spec.budget(x.len());
    let size = x.alphabet().size();
    let mut rng = spec.seed.rng();
    let out: Vec<u32> = match (&spec.strategy, spec.kind) {
        (Strategy::IidRandom, ChannelKind::Substitution) => {
            let mut cur = x.symbols().to_vec();
            for pos in sample_indices(&mut rng, cur.len(), budget.min(cur.len())) {
                cur[pos] = substitute_symbol(&mut rng, size, cur[pos]);
            }
            cur
        }
        (Strategy::IidRandom, ChannelKind::Edit) => {
            let mut cur = x.symbols().to_vec();
            for _ in 0..budget {
                match if cur.is_empty() {
                    1
                } else {
                    rng.gen_range(0..3)
                } {
                    0 => {
                        let pos = rng.gen_range(0..cur.len());
                        cur[pos] = substitute_symbol(&mut rng, size, cur[pos]);
                    }
                    1 => {
                        let pos = rng.gen_range(0..=cur.len());
                        cur.insert(pos, rng.gen_range(0..size));
                    }
                    _ => {
                        let pos = rng.gen_range(0..cur.len());
                        cur.remove(pos);
                    }
                }
            }
            cur
        }
        (Strategy::Burst, ChannelKind::Substitution) => {
            let mut cur = x.symbols().to_vec();
            let width = budget.min(cur.len());
            if width > 0 {
                let start = rng.gen_range(0..=cur.len() - width);
                for slot in &mut cur[start..start + width] {
                    *slot = substitute_symbol(&mut rng, size, *slot);
                }
            }
            cur
        }
        (Strategy::Burst, ChannelKind::Edit) => {
            let mut cur = x.symbols().to_vec();
            let width = budget.min(cur.len());
            if width > 0 {
                let start = rng.gen_range(0..=cur.len() - width);
                cur.drain(start..start + width);
            }
            cur
        }
        (Strategy::GreedyTargeted { .. }, ChannelKind::Substitution)
        | (Strategy::Duplication, ChannelKind::Substitution) => {
            return Err(ChannelError::InvalidStrategyForKind {
                strategy: spec.strategy.name(),
                kind: "substitution",
            });
        }
        (Strategy::GreedyTargeted { psi_guess }, ChannelKind::Edit) => match psi_guess {
            None => {
                let mut doomed: Vec<usize> =
                    sample_indices(&mut rng, x.len(), budget.min(x.len())).into_vec();
                doomed.sort_unstable();
                let mut cur = x.symbols().to_vec();
                for &pos in doomed.iter().rev() {
                    cur.remove(pos);
                }
                cur
            }
            Some(psi) => greedy_class_deletion(x, psi, budget)?,
        },
        (Strategy::Duplication, ChannelKind::Edit) => {
            let mut cur = x.symbols().to_vec();
            for _ in 0..budget {
                if cur.is_empty() {
                    break;
                }
                let pos = rng.gen_range(0..cur.len());
                cur.insert(pos + 1, cur[pos]);
            }
            cur
        }
        (Strategy::CustomScript { script }, kind) => {
            let ops = parse_script(script)?;
            if ops.len() > budget {
                return Err(ChannelError::ScriptExceedsBudget {
                    ops: ops.len(),
                    budget,
                });
            }
            apply_script(x, &ops, kind)?
        }
    };
    Ok(SymbolString::new(x.alphabet(), out)?)
}

/// Deletes whole index classes, rarest first, until the budget runs out:
/// killing every copy of a class removes one element from the set the
/// decoder sees, so sparse classes are the cheapest targets.
fn greedy_class_deletion(
    x: &SymbolString,
    psi: &[u32],
    budget: usize,
) -> Result<Vec<u32>, ChannelError> {
    let class_of = |sym: u32| -> Result<u32, ChannelError> {
        psi.get(sym as usize).copied().ok_or_else(|| {
            ChannelError::InvalidSpec(format!("psi guess covers {} symbols, saw {sym}", psi.len()))
        })
    };
    let mut counts = std::collections::BTreeMap::new();
    for &sym in x.symbols() {
        *counts.entry(class_of(sym)?).or_insert(0usize) += 1;
    }
    // BTreeMap iteration makes the tie order deterministic.
    let mut order: Vec<(u32, usize)> = counts.into_iter().collect();
    order.sort_by_key(|&(class, count)| (count, class));
    let mut remaining = budget;
    let mut doomed = std::collections::HashSet::new();
    for (class, count) in order {
        if remaining == 0 {
            break;
        }
        if count <= remaining {
            doomed.insert(class);
            remaining -= count;
        }
    }
    let mut partial = remaining;
    let mut out = Vec::with_capacity(x.len());
    for &sym in x.symbols() {
        let class = class_of(sym)?;
        if doomed.contains(&class) {
            continue;
        }
        if partial > 0 {
            partial -= 1;
            continue;
        }
        out.push(sym);
    }
    Ok(out)
}

/// Checks after the fact that y is reachable from x inside the budget:
/// bounded hamming distance at equal length for substitution channels,
/// bounded edit distance for edit channels.
pub fn verify_budget(spec: &ChannelSpec, x: &SymbolString, y: &SymbolString) -> bool {
    let budget = spec.budget(x.len());
    match spec.kind {
        ChannelKind::Substitution => {
            x.len() == y.len() && matches!(hamming_distance(x, y), Ok(d) if d <= budget)
        }
        ChannelKind::Edit => matches!(edit_distance(x, y), Ok(d) if d <= budget),
    }
}
