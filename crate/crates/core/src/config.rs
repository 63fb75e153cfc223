//! Run configuration shared by the command-line tools.
//!
//! ```json
//! { "v": 10, "source": "coherent", "loss_db": 20, "epsilon": 0.0,
//!   "n": 1000000, "seed": 42, "reveal_fraction": 0.1 }
//! ```
//!
//! The channel is given either as `g` or `loss_db`, and its noise as `chi` or
//! `epsilon` (default: pure loss). The source is `coherent` unless `source`
//! or `s` say otherwise.

use serde::{Deserialize, Serialize};

use crate::channel::{loss_db_to_gain, ChannelModel, ExcessNoise, SourceKind, SourceModel};
use crate::error::{Error, Result};
use crate::protocol::{ProtocolRun, Realization, DEFAULT_PESSIMISM, DEFAULT_REVEAL_FRACTION};

pub const DEFAULT_SYMBOLS: usize = 1_000_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization: Option<Realization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pessimism: Option<f64>,
}

impl RunConfig {
    pub fn gain(&self) -> Result<f64> {
        match (self.g, self.loss_db) {
            (Some(_), Some(_)) => Err(Error::domain("give either `g` or `loss_db`, not both")),
            (Some(g), None) => Ok(g),
            (None, Some(db)) => Ok(loss_db_to_gain(db)),
            (None, None) => Err(Error::domain("missing channel gain: set `g` or `loss_db`")),
        }
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        let g = self.gain()?;
        match (self.chi, self.epsilon) {
            (Some(_), Some(_)) => Err(Error::domain("give either `chi` or `epsilon`, not both")),
            (Some(chi), None) => ChannelModel::symmetric(g, chi),
            (None, eps) => ChannelModel::with_excess_noise(
                g,
                ExcessNoise {
                    epsilon: eps.unwrap_or(0.0),
                },
            ),
        }
    }

    pub fn source_model(&self) -> Result<SourceModel> {
        match (self.source, self.s) {
            (None, None) | (Some(SourceKind::Coherent), None) => SourceModel::coherent(self.v),
            (Some(SourceKind::Epr), None) => SourceModel::epr(self.v),
            (Some(SourceKind::Squeezed), None) => Err(Error::domain("a squeezed source needs `s`")),
            (Some(SourceKind::Squeezed), Some(s)) | (None, Some(s)) => SourceModel::new(self.v, s),
            (Some(kind), Some(s)) => {
                let m = match kind {
                    SourceKind::Coherent => SourceModel::coherent(self.v)?,
                    _ => SourceModel::epr(self.v)?,
                };
                if (m.s() - s).abs() > 1e-12 * m.s() {
                    return Err(Error::domain(format!(
                        "`s` = {s} contradicts source `{kind:?}` (s = {})",
                        m.s()
                    )));
                }
                Ok(m)
            }
        }
    }

    pub fn protocol_run(&self, default_seed: u64) -> Result<ProtocolRun> {
        Ok(ProtocolRun::new(
            self.source_model()?,
            self.channel_model()?,
            self.n.unwrap_or(DEFAULT_SYMBOLS),
            self.seed.unwrap_or(default_seed),
        )
        .reveal_fraction(self.reveal_fraction.unwrap_or(DEFAULT_REVEAL_FRACTION))
        .realization(self.realization.unwrap_or_default())
        .pessimism(self.pessimism.unwrap_or(DEFAULT_PESSIMISM)))
    }
}
