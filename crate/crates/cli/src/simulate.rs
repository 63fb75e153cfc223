use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use cvqkd::config::RunConfig;
use cvqkd::protocol::{run_protocol, EstimatedChannel, Realization};
use cvqkd::KeyRateReport;
use serde::Serialize;

use crate::args::{env_seed, usage, ProtocolArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RealizationArg {
    Direct,
    Cloner,
}

/// Flags override the matching fields of `--config`.
#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "loss_db")]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub loss_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with = "epsilon")]
    pub chi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    /// Emitted symbols (default 1000000).
    #[arg(long)]
    pub n: Option<usize>,
    /// RNG seed; beats the config file, which beats $CVQKD_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reveal_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub realization: Option<RealizationArg>,
    /// Standard errors of pessimism applied before the abort decision.
    #[arg(long)]
    pub pessimism: Option<f64>,
    /// Write the revealed (basis, alice, bob) symbols to this CSV file.
    #[arg(long)]
    pub revealed_csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SimulateOutput {
    config: RunConfig,
    emitted: usize,
    sifted: usize,
    revealed: usize,
    key_symbols: usize,
    abort: bool,
    estimate: EstimatedChannel,
    plug_in: KeyRateReport,
    verdict: KeyRateReport,
}

impl SimulateArgs {
    pub fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str::<RunConfig>(&text)
                    .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => {
                let v = self
                    .v
                    .ok_or_else(|| usage("give --config or at least --v and --g/--loss-db"))?;
                RunConfig {
                    v,
                    ..Default::default()
                }
            }
        };
        fn set<T: Copy>(slot: &mut Option<T>, flag: Option<T>) {
            if flag.is_some() {
                *slot = flag;
            }
        }
        // A flag replaces the whole gain or noise parameterization.
        if self.g.is_some() || self.loss_db.is_some() {
            cfg.g = self.g;
            cfg.loss_db = self.loss_db;
        }
        if self.chi.is_some() || self.epsilon.is_some() {
            cfg.chi = self.chi;
            cfg.epsilon = self.epsilon;
        }
        if let Some(v) = self.v {
            cfg.v = v;
        }
        set(&mut cfg.s, self.s);
        set(&mut cfg.source, self.protocol.map(Into::into));
        set(&mut cfg.n, self.n);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.reveal_fraction, self.reveal_fraction);
        set(&mut cfg.pessimism, self.pessimism);
        set(
            &mut cfg.realization,
            self.realization.map(|r| match r {
                RealizationArg::Direct => Realization::Direct,
                RealizationArg::Cloner => Realization::Cloner,
            }),
        );
        if cfg.seed.is_none() {
            cfg.seed = Some(env_seed()?.unwrap_or(0));
        }
        Ok(cfg)
    }
}

pub fn run(args: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = args.run_config()?;
    let run = cfg.protocol_run(0)?;
    let outcome = run_protocol(&run)?;
    if let Some(path) = &args.revealed_csv {
        let file = std::fs::File::create(path)
            .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
        outcome.revealed.write_csv(std::io::BufWriter::new(file))?;
    }
    let report = SimulateOutput {
        config: RunConfig {
            n: Some(run.n_symbols),
            reveal_fraction: Some(run.reveal_fraction),
            realization: Some(run.realization),
            pessimism: Some(run.pessimism),
            ..cfg
        },
        emitted: outcome.emitted,
        sifted: outcome.sifted,
        revealed: outcome.revealed.len(),
        key_symbols: outcome.key.len(),
        abort: outcome.abort(),
        estimate: outcome.estimate,
        plug_in: outcome.plug_in,
        verdict: outcome.verdict,
    };
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}
