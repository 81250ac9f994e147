//! Robustness sweeps: one key, a grid of channel rates, Monte Carlo
//! trials per rate, CSV out. Trials run in parallel but are reduced in
//! trial order, and every random draw comes from the master seed, so a
//! rerun writes the identical file.

use crate::params::KeygenSpec;
use prc_core::channels::{apply_channel, ChannelKind, ChannelSpec, Strategy};
use prc_core::lm::{LanguageModel, ToyModelSpec};
use prc_core::prc_indexing::{decode_idx, encode_idx, keygen_idx};
use prc_core::prc_substitution::{decode, encode, keygen};
use prc_core::seed::{fnv1a64, Seed};
use prc_core::symbols::{Alphabet, SymbolString};
use prc_core::watermark::{detect, setup, wat};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sub,
    Idx,
    Wm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub keygen: KeygenSpec,
    #[serde(default)]
    pub model: Option<ToyModelSpec>,
    pub rates: Vec<f64>,
    pub trials: u32,
    #[serde(default)]
    pub channel_kind: Option<ChannelKind>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    /// Off by default so reruns are byte-identical; wall_ms reads 0.
    #[serde(default)]
    pub record_timing: bool,
}

pub const CSV_HEADER: &str = "rate,alpha,n,trials,detect_rate,fp_rate,mean_stat,wall_ms";

fn random_string(alphabet: Alphabet, len: usize, seed: &Seed) -> SymbolString {
    let mut rng = seed.rng();
    let symbols = (0..len)
        .map(|_| rng.gen_range(0..alphabet.size()))
        .collect();
    SymbolString::new(alphabet, symbols).expect("symbols drawn inside the alphabet")
}

/// One (accept, statistic) pair per real trial plus a false-positive
/// verdict, everything derived from the per-trial seed.
type TrialOutcome = Result<(bool, f64, bool), String>;

pub fn run_experiment(
    config: &ExperimentConfig,
    master: &Seed,
    raw: &[u8],
) -> Result<String, String> {
    let mut out = String::new();
    out.push_str(&format!("# config-hash: {:016x}\n", fnv1a64(raw)));
    out.push_str(CSV_HEADER);
    out.push('\n');

    let strategy = config.strategy.clone().unwrap_or(Strategy::IidRandom);
    let channel_kind = config.channel_kind.unwrap_or(match config.kind {
        ExperimentKind::Sub => ChannelKind::Substitution,
        ExperimentKind::Idx | ExperimentKind::Wm => ChannelKind::Edit,
    });
    let key_seed = master.split("key");

    // Build the keys once; each row reuses them against fresh channels.
    enum Built {
        Sub(
            prc_core::prc_substitution::SubParams,
            prc_core::prc_substitution::SubKey,
        ),
        Idx(
            prc_core::prc_indexing::IdxParams,
            prc_core::prc_indexing::IdxKey,
        ),
        Wm(
            prc_core::watermark::WatermarkParams,
            prc_core::prc_indexing::IdxParams,
            prc_core::watermark::WatermarkKey,
            prc_core::lm::ToyModel,
        ),
    }
    let family = config.keygen.build_family()?;
    let built = match config.kind {
        ExperimentKind::Sub => {
            let params = config.keygen.build_sub()?;
            let key = keygen(&params, &family, &key_seed).map_err(|e| e.to_string())?;
            Built::Sub(params, key)
        }
        ExperimentKind::Idx => {
            let params = config.keygen.build_idx()?;
            let key = keygen_idx(&params, &family, &key_seed).map_err(|e| e.to_string())?;
            Built::Idx(params, key)
        }
        ExperimentKind::Wm => {
            let (params, idx) = config.keygen.build_wm()?;
            let key = setup(&params, &idx, &family, &key_seed).map_err(|e| e.to_string())?;
            let model = config
                .model
                .as_ref()
                .ok_or("watermark experiments need a model")?
                .build()
                .map_err(|e| e.to_string())?;
            if model.alphabet().size() != params.sigma_size {
                return Err(format!(
                    "model alphabet has {} symbols, key expects {}",
                    model.alphabet().size(),
                    params.sigma_size
                ));
            }
            Built::Wm(params, idx, key, model)
        }
    };

    for (row, &rate) in config.rates.iter().enumerate() {
        let row_seed = master.split_index("rate", row as u64);
        let started = std::time::Instant::now();
        let one = |t: u32| -> TrialOutcome {
            let trial = row_seed.split_index("trial", u64::from(t));
            let channel = || ChannelSpec {
                kind: channel_kind,
                rate,
                strategy: strategy.clone(),
                seed: trial.split("chan"),
            };
            match &built {
                Built::Sub(params, key) => {
                    let x = encode(key, params, &trial.split("enc")).map_err(|e| e.to_string())?;
                    let y = apply_channel(&channel(), &x).map_err(|e| e.to_string())?;
                    let outcome = decode(key, params, &y).map_err(|e| e.to_string())?;
                    let junk = random_string(
                        Alphabet::BINARY,
                        params.block_len as usize,
                        &trial.split("fp"),
                    );
                    let fp = decode(key, params, &junk)
                        .map_err(|e| e.to_string())?
                        .accept;
                    Ok((outcome.accept, f64::from(outcome.agreeing), fp))
                }
                Built::Idx(params, key) => {
                    let x =
                        encode_idx(key, params, &trial.split("enc")).map_err(|e| e.to_string())?;
                    let y = apply_channel(&channel(), &x).map_err(|e| e.to_string())?;
                    let outcome = decode_idx(key, params, &y).map_err(|e| e.to_string())?;
                    let junk =
                        random_string(params.alphabet(), params.m_out as usize, &trial.split("fp"));
                    let fp = decode_idx(key, params, &junk)
                        .map_err(|e| e.to_string())?
                        .accept;
                    Ok((outcome.accept, f64::from(outcome.agreeing), fp))
                }
                Built::Wm(params, idx, key, model) => {
                    let tok = wat(key, params, idx, model, &trial.split("wat"))
                        .map_err(|e| e.to_string())?;
                    let hit = apply_channel(&channel(), &tok).map_err(|e| e.to_string())?;
                    let res = detect(key, params, idx, &hit).map_err(|e| e.to_string())?;
                    // The statistic of the witness window, recomputed
                    // through the public decoder; 0 when nothing decoded.
                    let stat = match res.witness {
                        None => 0.0,
                        Some((i, j)) => {
                            let mapped: Vec<u32> = hit.symbols()[i..=j]
                                .iter()
                                .map(|&s| key.phi()[s as usize])
                                .collect();
                            let z = SymbolString::new(idx.alphabet(), mapped)
                                .map_err(|e| e.to_string())?;
                            let outcome =
                                decode_idx(key.prc_key(), idx, &z).map_err(|e| e.to_string())?;
                            f64::from(outcome.agreeing)
                        }
                    };
                    let junk = random_string(
                        Alphabet::new(params.sigma_size).map_err(|e| e.to_string())?,
                        params.l_max as usize,
                        &trial.split("fp"),
                    );
                    let fp = detect(key, params, idx, &junk)
                        .map_err(|e| e.to_string())?
                        .detected;
                    Ok((res.detected, stat, fp))
                }
            }
        };
        let outcomes: Vec<TrialOutcome> = (0..config.trials).into_par_iter().map(one).collect();
        let mut detected = 0u32;
        let mut fps = 0u32;
        let mut stat_sum = 0.0;
        for o in outcomes {
            let (hit, stat, fp) = o?;
            detected += u32::from(hit);
            fps += u32::from(fp);
            stat_sum += stat;
        }
        let trials = f64::from(config.trials.max(1));
        let wall_ms = if config.record_timing {
            started.elapsed().as_millis()
        } else {
            0
        };
        let (alpha, n) = match &built {
            Built::Sub(params, _) => (0.0, params.n),
            Built::Idx(params, _) => (0.0, params.inner.n),
            Built::Wm(params, ..) => (params.alpha, params.n),
        };
        out.push_str(&format!(
            "{rate},{alpha},{n},{trials},{:.4},{:.4},{:.3},{wall_ms}\n",
            f64::from(detected) / trials,
            f64::from(fps) / trials,
            stat_sum / trials,
            trials = config.trials,
        ));
    }
    Ok(out)
}
