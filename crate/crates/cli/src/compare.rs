use std::io::Write;

use clap::{ArgGroup, Args};
use cvqkd::channel::{loss_db_to_gain, ExcessNoise};
use cvqkd::security::RateComparison;

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("gain").required(true).args(["g", "loss_db"])))]
pub struct CompareArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub loss_db: Option<f64>,
    /// Added noise; default is pure loss.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "epsilon")]
    pub chi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 10.0)]
    pub v: f64,
    /// Symbols (or BB84 time slots) per second.
    #[arg(long, default_value_t = 2e6)]
    pub symbol_rate: f64,
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: &CompareArgs) -> anyhow::Result<()> {
    let g = match (args.g, args.loss_db) {
        (Some(g), _) => g,
        (None, Some(db)) => loss_db_to_gain(db),
        (None, None) => unreachable!("clap requires one of --g/--loss-db"),
    };
    let chi = args.chi.or_else(|| {
        args.epsilon
            .map(|epsilon| ExcessNoise { epsilon }.to_added_noise(g))
    });
    let c = RateComparison::compute(g, chi, args.v, args.symbol_rate)?;
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &c)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(
        out,
        "G = {}  V = {}  symbol rate = {} Hz",
        c.g, c.v, c.symbol_rate_hz
    )?;
    writeln!(out)?;
    writeln!(
        out,
        "{:<24} {:>14} {:>16}",
        "scheme", "bits/symbol", "bits/s"
    )?;
    for (name, per, rate) in [
        (
            "coherent (RR)",
            c.delta_i_coherent,
            c.coherent_bits_per_second,
        ),
        ("EPR (RR)", c.delta_i_epr, c.epr_bits_per_second),
        (
            "high-loss G/(2 ln 2)",
            c.high_loss_asymptote,
            c.high_loss_asymptote * c.symbol_rate_hz,
        ),
        (
            "BB84 n=1",
            c.bb84_single_photon,
            c.bb84_single_photon_bits_per_second,
        ),
        (
            "BB84 n=0.1",
            c.bb84_weak_pulse,
            c.bb84_weak_pulse_bits_per_second,
        ),
    ] {
        writeln!(out, "{name:<24} {per:>14.6e} {rate:>16.1}")?;
    }
    Ok(())
}
