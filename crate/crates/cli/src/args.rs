use std::fmt;

use clap::{ArgGroup, Args, ValueEnum};
use cvqkd::channel::SourceKind;
use cvqkd::config::RunConfig;
use serde::Deserialize;

/// Bad invocation or unreadable input; maps to exit code 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub const SEED_ENV: &str = "CVQKD_SEED";

/// Flag, then `CVQKD_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>) -> anyhow::Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    env_seed().map(|s| s.unwrap_or(0))
}

pub fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolArg {
    Coherent,
    Epr,
    Squeezed,
}

impl ProtocolArg {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolArg::Coherent => "coherent",
            ProtocolArg::Epr => "epr",
            ProtocolArg::Squeezed => "squeezed",
        }
    }
}

impl From<ProtocolArg> for SourceKind {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Coherent => SourceKind::Coherent,
            ProtocolArg::Epr => SourceKind::Epr,
            ProtocolArg::Squeezed => SourceKind::Squeezed,
        }
    }
}

/// Channel as (`--g` | `--loss-db`) and optionally (`--chi` | `--epsilon`).
#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("gain").required(true).args(["g", "loss_db"])))]
pub struct ChannelArgs {
    /// Intensity gain G of the line.
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Line loss in dB; G = 10^(-dB/10).
    #[arg(long, allow_negative_numbers = true)]
    pub loss_db: Option<f64>,
    /// Added noise referred to the input, in shot-noise units.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "epsilon")]
    pub chi: Option<f64>,
    /// Excess noise above pure loss (default 0).
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Total variance V of Alice's quadratures.
    #[arg(long, allow_negative_numbers = true)]
    pub v: f64,
    /// Preparation noise s (squeezed sources).
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
}

pub fn run_config(channel: &ChannelArgs, source: &SourceArgs) -> RunConfig {
    RunConfig {
        v: source.v,
        source: source.protocol.map(Into::into),
        s: source.s,
        g: channel.g,
        loss_db: channel.loss_db,
        chi: channel.chi,
        epsilon: channel.epsilon,
        ..Default::default()
    }
}
