use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use cvqkd::cloner::{simulate_attack, AttackAnalysis, ClonerSetup};
use serde::Serialize;

use crate::args::{resolve_seed, run_config, usage, ChannelArgs, SourceArgs};

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Number of simulated symbols.
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// RNG seed (default: $CVQKD_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also dump every simulated mode to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct AttackOutput {
    passed: bool,
    analysis: AttackAnalysis,
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn run(args: &AttackArgs) -> anyhow::Result<()> {
    let cfg = run_config(&args.channel, &args.source);
    let channel = cfg.channel_model()?;
    let source = cfg.source_model()?;
    let seed = resolve_seed(args.seed)?;
    let setup = ClonerSetup::build(&channel, &source)?;
    let batch = simulate_attack(&setup, args.n, seed)?;
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path)
            .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
        batch.write_csv(std::io::BufWriter::new(file))?;
    }
    let a = AttackAnalysis::from_batch(&setup, &batch)?;
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(
            &mut out,
            &AttackOutput {
                passed: a.passed(),
                analysis: a,
            },
        )?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(
        out,
        "entangling cloner: G = {}  chi = {}  V = {}  s = {}  n = {}  seed = {}",
        setup.gain(),
        setup.added_noise(),
        source.v_total(),
        source.s(),
        a.n,
        seed
    )?;
    writeln!(
        out,
        "Eve's EPR variance {:.6}  (known {:.6}, unknown {:.6})",
        setup.e1_variance, setup.known_variance, setup.unknown_variance
    )?;
    writeln!(out)?;
    writeln!(
        out,
        "{:<22} {:>12} {:>12} {:>12}  check",
        "quantity", "analytic", "empirical", "3 SE"
    )?;
    writeln!(
        out,
        "{:<22} {:>12.6} {:>12.6} {:>12.6}  {}",
        "V(x_B|x_E)",
        a.eve_analytic,
        a.eve_empirical,
        3.0 * a.eve_standard_error,
        mark(a.saturation_pass)
    )?;
    writeln!(
        out,
        "{:<22} {:>12.6} {:>12.6} {:>12.6}  {}",
        "V(x_B|x_A)",
        a.alice_analytic,
        a.alice_empirical,
        3.0 * a.alice_standard_error,
        mark(a.alice_pass)
    )?;
    writeln!(
        out,
        "{:<22} {:>12.6} {:>12.6} {:>12}  {}",
        "V(x_B|x_A)·V(p_B|p_E)",
        1.0,
        a.heisenberg_product,
        "",
        mark(a.heisenberg_pass)
    )?;
    writeln!(
        out,
        "{:<22} {:>12} {:>12.6} {:>12}  {}",
        "reduced-form V(x_B|x_E)",
        "",
        a.eve_reduced,
        "",
        mark(a.forms_agree)
    )?;
    if a.low_sample_warning {
        writeln!(out, "warning: few samples, standard errors are unreliable")?;
    }
    writeln!(out)?;
    writeln!(out, "result: {}", if a.passed() { "pass" } else { "FAIL" })?;
    Ok(())
}
