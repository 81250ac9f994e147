//! Key-generation parameter files. One JSON document describes the code
//! shape, the keyed function family, and (for watermark keys) the
//! embedding scale; the kind requested on the command line decides how
//! much of it is read.

use prc_core::prc_indexing::{default_demo_rho, IdxParams};
use prc_core::prc_substitution::{Profile, SubParams};
use prc_core::prf::{LocalPrfFamily, PrfKind};
use prc_core::watermark::WatermarkParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: PrfKind,
    pub locality: u32,
}

/// The whole parameter file. `m` and `block_len` shape demo-profile
/// blocks; `c0` scales the theory recipe; `rho` and the watermark fields
/// only matter for the larger key kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeygenSpec {
    pub profile: Profile,
    pub n: u32,
    pub p: f64,
    pub q: f64,
    pub family: FamilySpec,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub block_len: Option<u32>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default)]
    pub rho: Option<u32>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub sigma_size: Option<u32>,
    #[serde(default)]
    pub l_max: Option<u32>,
}

impl KeygenSpec {
    pub fn build_family(&self) -> Result<LocalPrfFamily, String> {
        LocalPrfFamily::new(self.n, self.family.locality, self.q, self.family.kind)
            .map_err(|e| e.to_string())
    }

    pub fn build_sub(&self) -> Result<SubParams, String> {
        match self.profile {
            Profile::Demo => {
                let m = self.m.ok_or("demo profile needs m")?;
                let block_len = self.block_len.ok_or("demo profile needs block_len")?;
                SubParams::demo(self.n, m, block_len, self.p, self.q).map_err(|e| e.to_string())
            }
            Profile::Theory => SubParams::theory(self.n, self.p, self.q, self.c0.unwrap_or(1.0))
                .map_err(|e| e.to_string()),
        }
    }

    pub fn build_idx(&self) -> Result<IdxParams, String> {
        let inner = self.build_sub()?;
        let rho = match self.rho {
            Some(r) => r,
            None => default_demo_rho(self.p).map_err(|e| e.to_string())?,
        };
        IdxParams::new(inner, rho).map_err(|e| e.to_string())
    }

    pub fn build_wm(&self) -> Result<(WatermarkParams, IdxParams), String> {
        let idx = self.build_idx()?;
        let alpha = self.alpha.ok_or("watermark keys need alpha")?;
        let sigma_size = self.sigma_size.ok_or("watermark keys need sigma_size")?;
        let l_max = self.l_max.ok_or("watermark keys need l_max")?;
        let params = WatermarkParams::new(idx.m_out, alpha, sigma_size, l_max, self.profile)
            .map_err(|e| e.to_string())?;
        Ok((params, idx))
    }
}
