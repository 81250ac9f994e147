//! prc: command line front end for the code toolkit. Keys are opaque
//! binary files; strings travel as space-separated decimals (binary
//! strings may also be one contiguous 0/1 run); configs are JSON.
//!
//! Exit codes: 0 success, 1 negative verdict (REJECT / NOT-DETECTED),
//! 2 bad usage or unparseable input, 3 file I/O failure.

mod experiment;
mod params;

use clap::{Parser, Subcommand, ValueEnum};
use prc_core::channels::{apply_channel, ChannelSpec};
use prc_core::lm::{LanguageModel, ToyModelSpec};
use prc_core::oracle;
use prc_core::prc_indexing::{self, decode_idx, encode_idx, keygen_idx, IdxKey, IdxParams};
use prc_core::prc_substitution::{self, decode, encode, keygen, SubKey, SubParams};
use prc_core::seed::Seed;
use prc_core::symbols::{Alphabet, SymbolString};
use prc_core::watermark::{self, detect, setup, wat, WatermarkKey, WatermarkParams};
use serde::Deserialize;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Keygen refuses blocks past this many bits unless --allow-large is
/// set; it is a guard against typos in JSON, not a hard capability cap.
const MAX_KEYGEN_BLOCK: u64 = 1 << 24;

#[derive(Parser)]
#[command(
    name = "prc",
    version,
    about = "Pseudorandom codes, attack channels, and watermarking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KeyKind {
    /// Binary code decoded against substitution noise.
    Sub,
    /// Indexed code over a large alphabet, robust to edits.
    Idx,
    /// Watermarking key wrapping an indexed code.
    Wm,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a key from a JSON parameter spec and write it to a file.
    Keygen {
        #[arg(long, value_enum)]
        kind: KeyKind,
        /// JSON file with the generation parameters.
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Permit block lengths past the safety cutoff.
        #[arg(long)]
        allow_large: bool,
    },
    /// Sample one codeword under a sub or idx key.
    Encode {
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test a string against a sub or idx key. Prints the verdict and
    /// the agreement statistic; exits 1 on REJECT.
    Decode {
        #[arg(long)]
        key: PathBuf,
        /// Read from this file instead of stdin.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a corruption channel over a string.
    Attack {
        /// JSON channel spec: kind, rate, strategy, seed.
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Alphabet size for parsing the input; defaults to one past
        /// the largest symbol present (at least 2).
        #[arg(long)]
        alphabet: Option<u32>,
    },
    /// Sample watermarked text from a toy model under a wm key.
    Wat {
        #[arg(long)]
        key: PathBuf,
        /// JSON toy model spec.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan text for a watermark. Prints the witness window when one
    /// is found; exits 1 on NOT-DETECTED.
    Detect {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Exact reference computations, printed at full precision.
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// Sweep channel rates against one key and write a CSV of detection
    /// rates. Deterministic given the config file and --seed.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Noise sensitivity of a boolean function by direct enumeration.
    NsBrute {
        /// Truth table as a 0/1 string of power-of-two length.
        table: String,
        delta: f64,
    },
    /// The same quantity through the Fourier expansion.
    NsFourier { table: String, delta: f64 },
    /// Total variation distance between Binomial(t, k/n) and the
    /// hypergeometric law of t draws from a k-of-n population.
    Tvd { n: u64, k: u64, t: u64 },
    /// Exact output law of the set-difference perturbation on [n]^m,
    /// one "index probability" line per output string.
    PdLaw {
        n: u32,
        m: u32,
        /// Condition on this input bit mask instead of averaging.
        #[arg(long)]
        y0: Option<u32>,
    },
    /// Exact token marginal of one embedding step, one "token
    /// probability" line per token.
    EmbedMarginal {
        /// JSON file with fields p, phi, k_prc.
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Reads the string under test from a file or, when no path is given,
/// from stdin.
fn read_input(path: Option<&Path>) -> Result<String, CliError> {
    match path {
        Some(p) => read_text(p),
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| CliError::Io(format!("reading stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_bytes(p, format!("{text}\n").as_bytes()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

enum AnyKey {
    Sub(SubParams, SubKey),
    Idx(IdxParams, IdxKey),
    Wm(WatermarkParams, IdxParams, WatermarkKey),
}

impl AnyKey {
    fn kind_name(&self) -> &'static str {
        match self {
            AnyKey::Sub(..) => "sub",
            AnyKey::Idx(..) => "idx",
            AnyKey::Wm(..) => "wm",
        }
    }
}

/// The three key formats share a header, so exactly one parser can
/// claim a well-formed file; a sub-key error stands in for all three
/// when none does.
fn load_key(path: &Path) -> Result<AnyKey, CliError> {
    let bytes = read_bytes(path)?;
    if let Ok((params, key)) = prc_substitution::key_from_bytes(&bytes) {
        return Ok(AnyKey::Sub(params, key));
    }
    if let Ok((params, key)) = prc_indexing::key_from_bytes(&bytes) {
        return Ok(AnyKey::Idx(params, key));
    }
    match watermark::key_from_bytes(&bytes) {
        Ok((params, idx, key)) => Ok(AnyKey::Wm(params, idx, key)),
        Err(_) => {
            let e = prc_substitution::key_from_bytes(&bytes).unwrap_err();
            Err(CliError::Usage(format!("{}: {e}", path.display())))
        }
    }
}

fn guard_block(block_len: u32, allow_large: bool) -> Result<(), CliError> {
    if u64::from(block_len) > MAX_KEYGEN_BLOCK && !allow_large {
        return Err(CliError::Usage(format!(
            "block length {block_len} exceeds {MAX_KEYGEN_BLOCK}; pass --allow-large to proceed"
        )));
    }
    Ok(())
}

fn parse_table(table: &str) -> Result<Vec<bool>, CliError> {
    table
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(CliError::Usage(format!(
                "truth table character {other:?} is not 0 or 1"
            ))),
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedMarginalSpec {
    p: Vec<f64>,
    phi: Vec<u32>,
    k_prc: u32,
}

/// Witness statistic for a detection hit: the watermark window mapped
/// through phi and handed back to the code decoder.
fn witness_stat(
    key: &WatermarkKey,
    idx: &IdxParams,
    toks: &SymbolString,
    window: (usize, usize),
) -> Result<prc_substitution::DecodeOutcome, CliError> {
    let (i, j) = window;
    let mapped: Vec<u32> = toks.symbols()[i..=j]
        .iter()
        .map(|&s| key.phi()[s as usize])
        .collect();
    let z = SymbolString::new(idx.alphabet(), mapped).map_err(usage)?;
    decode_idx(key.prc_key(), idx, &z).map_err(usage)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Keygen {
            kind,
            params,
            seed,
            out,
            allow_large,
        } => {
            let spec: params::KeygenSpec = parse_json(&params)?;
            let family = spec.build_family().map_err(CliError::Usage)?;
            let seed = Seed::new(seed);
            let bytes = match kind {
                KeyKind::Sub => {
                    let p = spec.build_sub().map_err(CliError::Usage)?;
                    guard_block(p.block_len, allow_large)?;
                    let key = keygen(&p, &family, &seed).map_err(usage)?;
                    prc_substitution::key_to_bytes(&p, &key)
                }
                KeyKind::Idx => {
                    let p = spec.build_idx().map_err(CliError::Usage)?;
                    guard_block(p.inner.block_len, allow_large)?;
                    let key = keygen_idx(&p, &family, &seed).map_err(usage)?;
                    prc_indexing::key_to_bytes(&p, &key)
                }
                KeyKind::Wm => {
                    let (wp, ip) = spec.build_wm().map_err(CliError::Usage)?;
                    guard_block(ip.inner.block_len, allow_large)?;
                    let key = setup(&wp, &ip, &family, &seed).map_err(usage)?;
                    watermark::key_to_bytes(&wp, &ip, &key)
                }
            };
            write_bytes(&out, &bytes)?;
            Ok(0)
        }
        Command::Encode { key, seed, out } => {
            let seed = Seed::new(seed);
            let word = match load_key(&key)? {
                AnyKey::Sub(p, k) => encode(&k, &p, &seed).map_err(usage)?,
                AnyKey::Idx(p, k) => encode_idx(&k, &p, &seed).map_err(usage)?,
                other @ AnyKey::Wm(..) => {
                    return Err(CliError::Usage(format!(
                        "{} holds a {} key; watermark keys sample with wat",
                        key.display(),
                        other.kind_name()
                    )))
                }
            };
            write_output(out.as_deref(), &word.to_text())?;
            Ok(0)
        }
        Command::Decode { key, input } => {
            let text = read_input(input.as_deref())?;
            let outcome = match load_key(&key)? {
                AnyKey::Sub(p, k) => {
                    let y = SymbolString::parse(Alphabet::BINARY, &text).map_err(usage)?;
                    decode(&k, &p, &y).map_err(usage)?
                }
                AnyKey::Idx(p, k) => {
                    let y = SymbolString::parse(p.alphabet(), &text).map_err(usage)?;
                    decode_idx(&k, &p, &y).map_err(usage)?
                }
                other @ AnyKey::Wm(..) => {
                    return Err(CliError::Usage(format!(
                        "{} holds a {} key; watermarked text scans with detect",
                        key.display(),
                        other.kind_name()
                    )))
                }
            };
            let verdict = if outcome.accept { "ACCEPT" } else { "REJECT" };
            println!(
                "{verdict} W={} threshold={:.3} samples={}",
                outcome.agreeing, outcome.threshold, outcome.samples
            );
            Ok(if outcome.accept { 0 } else { 1 })
        }
        Command::Attack {
            channel,
            input,
            out,
            alphabet,
        } => {
            let spec: ChannelSpec = parse_json(&channel)?;
            let text = read_input(input.as_deref())?;
            let size = match alphabet {
                Some(s) => s,
                None => {
                    // Infer from the loosest possible read of the text,
                    // then take the largest symbol actually present.
                    let widest = Alphabet::new(prc_core::symbols::MAX_ALPHABET).map_err(usage)?;
                    let probe = SymbolString::parse(widest, &text).map_err(usage)?;
                    probe
                        .symbols()
                        .iter()
                        .max()
                        .map_or(2, |&top| (top + 1).max(2))
                }
            };
            let x =
                SymbolString::parse(Alphabet::new(size).map_err(usage)?, &text).map_err(usage)?;
            let y = apply_channel(&spec, &x).map_err(usage)?;
            write_output(out.as_deref(), &y.to_text())?;
            Ok(0)
        }
        Command::Wat {
            key,
            model,
            seed,
            out,
        } => {
            let AnyKey::Wm(wp, ip, k) = load_key(&key)? else {
                return Err(CliError::Usage(format!(
                    "{} does not hold a watermark key",
                    key.display()
                )));
            };
            let spec: ToyModelSpec = parse_json(&model)?;
            let lm = spec.build().map_err(usage)?;
            if lm.alphabet().size() != wp.sigma_size {
                return Err(CliError::Usage(format!(
                    "model alphabet has {} symbols, key expects {}",
                    lm.alphabet().size(),
                    wp.sigma_size
                )));
            }
            let toks = wat(&k, &wp, &ip, &lm, &Seed::new(seed)).map_err(usage)?;
            write_output(out.as_deref(), &toks.to_text())?;
            Ok(0)
        }
        Command::Detect { key, input } => {
            let AnyKey::Wm(wp, ip, k) = load_key(&key)? else {
                return Err(CliError::Usage(format!(
                    "{} does not hold a watermark key",
                    key.display()
                )));
            };
            let text = read_input(input.as_deref())?;
            let sigma = Alphabet::new(wp.sigma_size).map_err(usage)?;
            let toks = SymbolString::parse(sigma, &text).map_err(usage)?;
            let res = detect(&k, &wp, &ip, &toks).map_err(usage)?;
            match res.witness {
                Some((i, j)) => {
                    let stat = witness_stat(&k, &ip, &toks, (i, j))?;
                    println!(
                        "DETECTED window=[{i},{j}] W={} threshold={:.3} samples={}",
                        stat.agreeing, stat.threshold, stat.samples
                    );
                    Ok(0)
                }
                None => {
                    println!("NOT-DETECTED");
                    Ok(1)
                }
            }
        }
        Command::Oracle { which } => {
            match which {
                OracleCmd::NsBrute { table, delta } => {
                    let t = parse_table(&table)?;
                    println!(
                        "{}",
                        oracle::noise_sensitivity_bruteforce(&t, delta).map_err(usage)?
                    );
                }
                OracleCmd::NsFourier { table, delta } => {
                    let t = parse_table(&table)?;
                    println!(
                        "{}",
                        oracle::noise_sensitivity_fourier(&t, delta).map_err(usage)?
                    );
                }
                OracleCmd::Tvd { n, k, t } => {
                    println!(
                        "{}",
                        oracle::tvd_binomial_hypergeometric(n, k, t).map_err(usage)?
                    );
                }
                OracleCmd::PdLaw { n, m, y0 } => {
                    let law = match y0 {
                        Some(mask) => {
                            oracle::perturb_difference_exact_law_given(n, m, mask).map_err(usage)?
                        }
                        None => oracle::perturb_difference_exact_law(n, m).map_err(usage)?,
                    };
                    for (i, p) in law.iter().enumerate() {
                        println!("{i} {p}");
                    }
                }
                OracleCmd::EmbedMarginal { spec } => {
                    let s: EmbedMarginalSpec = parse_json(&spec)?;
                    let marginal =
                        oracle::exact_embed_marginal(&s.p, &s.phi, s.k_prc).map_err(usage)?;
                    for (tok, p) in marginal.iter().enumerate() {
                        println!("{tok} {p}");
                    }
                }
            }
            Ok(0)
        }
        Command::Experiment { config, out, seed } => {
            let raw = read_bytes(&config)?;
            let cfg: experiment::ExperimentConfig = serde_json::from_slice(&raw)
                .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))?;
            let csv = experiment::run_experiment(&cfg, &Seed::new(seed), &raw)
                .map_err(CliError::Usage)?;
            write_bytes(&out, csv.as_bytes())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
