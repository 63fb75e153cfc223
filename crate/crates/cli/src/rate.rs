use std::io::Write;

use clap::Args;
use cvqkd::channel::gain_to_loss_db;
use cvqkd::security::{
    excess_noise_root, excess_noise_threshold, max_tolerable_added_noise, KeyRateReport, Protocol,
};
use cvqkd::{ChannelModel, Quadrature, Verdict};
use serde::Serialize;

use crate::args::{run_config, ChannelArgs, SourceArgs};

#[derive(Args, Debug)]
pub struct RateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
pub struct Inputs {
    pub g: f64,
    pub loss_db: f64,
    pub chi: f64,
    pub epsilon: f64,
    pub v: f64,
    pub s: f64,
    pub protocol: &'static str,
}

impl Inputs {
    pub fn new(channel: &ChannelModel, v: f64, protocol: Protocol) -> Self {
        Self {
            g: channel.g_x,
            loss_db: gain_to_loss_db(channel.g_x),
            chi: channel.chi_x,
            epsilon: channel.excess_noise(Quadrature::X).epsilon,
            v,
            s: protocol.squeezing(v),
            protocol: protocol.name(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Thresholds {
    /// Small-gain closed form; absent for squeezed sources or V = 1.
    pub excess_noise_threshold: Option<f64>,
    /// Exact zero crossing in ε at this gain.
    pub excess_noise_root: Option<f64>,
    /// `excess_noise_root − ε`; positive means room to spare.
    pub excess_noise_margin: Option<f64>,
    /// Largest `Gχ` tolerated with unbounded modulation.
    pub max_tolerable_added_noise: f64,
    /// `max_tolerable_added_noise − Gχ`.
    pub added_noise_margin: f64,
}

#[derive(Debug, Serialize)]
pub struct Variants {
    pub coherent: KeyRateReport,
    pub epr: KeyRateReport,
}

#[derive(Debug, Serialize)]
pub struct RateOutput {
    pub inputs: Inputs,
    /// Secret bits per emitted symbol for the selected protocol.
    pub delta_i: f64,
    pub verdict: Verdict,
    pub report: KeyRateReport,
    pub variants: Variants,
    pub thresholds: Thresholds,
}

pub fn evaluate(channel: &ChannelModel, v: f64, protocol: Protocol) -> cvqkd::Result<RateOutput> {
    let report = KeyRateReport::evaluate_as(channel, v, protocol)?;
    let variants = Variants {
        coherent: KeyRateReport::evaluate_as(channel, v, Protocol::Coherent)?,
        epr: KeyRateReport::evaluate_as(channel, v, Protocol::Epr)?,
    };
    let inputs = Inputs::new(channel, v, protocol);
    let root = excess_noise_root(inputs.g, v, protocol).ok();
    let max_added = max_tolerable_added_noise(inputs.g, inputs.s)?;
    let thresholds = Thresholds {
        excess_noise_threshold: excess_noise_threshold(v, protocol).ok(),
        excess_noise_root: root,
        excess_noise_margin: root.map(|r| r - inputs.epsilon),
        max_tolerable_added_noise: max_added,
        added_noise_margin: max_added - inputs.g * inputs.chi,
    };
    Ok(RateOutput {
        delta_i: report.secret_rate,
        verdict: report.verdict,
        inputs,
        report,
        variants,
        thresholds,
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Secure => "secure",
        Verdict::Insecure => "insecure",
        Verdict::InsecureBoundary => "insecure-boundary",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

fn write_table(out: &mut impl Write, r: &RateOutput) -> std::io::Result<()> {
    let i = &r.inputs;
    writeln!(
        out,
        "G = {} ({:.3} dB)  chi = {}  epsilon = {}  V = {}  s = {}  [{}]",
        i.g, i.loss_db, i.chi, i.epsilon, i.v, i.s, i.protocol
    )?;
    writeln!(out)?;
    writeln!(
        out,
        "{:<10} {:>14} {:>14} {:>14} {:>14}  verdict",
        "protocol", "I_BA", "I_BE", "dI/sifted", "dI/symbol"
    )?;
    let mut rows = vec![("coherent", &r.variants.coherent), ("epr", &r.variants.epr)];
    if i.protocol == "squeezed" {
        rows.push(("squeezed", &r.report));
    }
    for (name, rep) in rows {
        writeln!(
            out,
            "{:<10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}  {}",
            name,
            rep.i_ba,
            rep.i_be,
            rep.delta_i,
            rep.secret_rate,
            verdict_name(rep.verdict)
        )?;
    }
    writeln!(out)?;
    let t = &r.thresholds;
    writeln!(
        out,
        "excess-noise threshold  {}",
        opt(t.excess_noise_threshold)
    )?;
    writeln!(out, "excess-noise root       {}", opt(t.excess_noise_root))?;
    writeln!(
        out,
        "excess-noise margin     {}",
        opt(t.excess_noise_margin)
    )?;
    writeln!(
        out,
        "max tolerable G*chi     {:.6e}",
        t.max_tolerable_added_noise
    )?;
    writeln!(out, "added-noise margin      {:.6e}", t.added_noise_margin)?;
    writeln!(out)?;
    writeln!(
        out,
        "delta_i = {:e} bits/symbol ({})",
        r.delta_i,
        verdict_name(r.verdict)
    )
}

pub fn run(args: &RateArgs) -> anyhow::Result<()> {
    let cfg = run_config(&args.channel, &args.source);
    let channel = cfg.channel_model()?;
    let source = cfg.source_model()?;
    let output = evaluate(&channel, source.v_total(), Protocol::from_source(&source))?;
    let mut out = std::io::stdout().lock();
    if args.json {
        serde_json::to_writer_pretty(&mut out, &output)?;
        writeln!(out)?;
    } else {
        write_table(&mut out, &output)?;
    }
    Ok(())
}
