//! Grid sweeps over G (or loss), V, s and the channel noise.
//!
//! ```json
//! {
//!   "axes": [{ "name": "loss_db", "min": 0, "max": 30, "count": 31 }],
//!   "fixed": { "v": 10, "epsilon": 0.0 },
//!   "protocols": ["coherent", "epr"]
//! }
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use cvqkd::channel::{gain_to_loss_db, SourceModel};
use cvqkd::config::RunConfig;
use cvqkd::security::{max_tolerable_added_noise, KeyRateReport, Protocol};
use cvqkd::Quadrature;
use rayon::prelude::*;
use serde::Deserialize;

use crate::args::{usage, ProtocolArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    G,
    LossDb,
    Chi,
    Epsilon,
    V,
    S,
}

impl Param {
    const ALL: [Param; 6] = [
        Param::G,
        Param::LossDb,
        Param::Chi,
        Param::Epsilon,
        Param::V,
        Param::S,
    ];

    fn name(self) -> &'static str {
        match self {
            Param::G => "g",
            Param::LossDb => "loss_db",
            Param::Chi => "chi",
            Param::Epsilon => "epsilon",
            Param::V => "v",
            Param::S => "s",
        }
    }

    fn index(self) -> usize {
        Param::ALL.iter().position(|p| *p == self).unwrap()
    }
}

impl FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s || (s == "loss-db" && *p == Param::LossDb))
            .ok_or_else(|| {
                format!("unknown parameter `{s}` (expected g, loss_db, chi, epsilon, v or s)")
            })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: Param,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    fn check(&self) -> Result<(), String> {
        let n = self.name.name();
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(format!("axis `{n}`: bounds must be finite"));
        }
        if self.count == 0 {
            return Err(format!("axis `{n}`: count must be at least 1"));
        }
        if self.spacing == Spacing::Log && !(self.min > 0.0 && self.max > 0.0) {
            return Err(format!("axis `{n}`: log spacing needs positive bounds"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        match self.spacing {
            Spacing::Linear => (0..self.count)
                .map(|i| self.min + (self.max - self.min) * i as f64 / last)
                .collect(),
            Spacing::Log => {
                let (a, b) = (self.min.log10(), self.max.log10());
                (0..self.count)
                    .map(|i| {
                        if i == 0 {
                            self.min
                        } else if i + 1 == self.count {
                            self.max
                        } else {
                            10f64.powf(a + (b - a) * i as f64 / last)
                        }
                    })
                    .collect()
            }
        }
    }
}

/// `name:min:max:count[:log|:linear]`.
pub fn parse_axis(raw: &str) -> Result<Axis, String> {
    let parts: Vec<&str> = raw.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(format!("`{raw}`: expected name:min:max:count[:log]"));
    }
    let num = |i: usize, what: &str| -> Result<f64, String> {
        parts[i]
            .parse()
            .map_err(|_| format!("`{raw}`: {what} `{}` is not a number", parts[i]))
    };
    let spacing = match parts.get(4) {
        None | Some(&"linear") | Some(&"lin") => Spacing::Linear,
        Some(&"log") => Spacing::Log,
        Some(other) => return Err(format!("`{raw}`: unknown spacing `{other}`")),
    };
    let axis = Axis {
        name: parts[0].parse()?,
        min: num(1, "min")?,
        max: num(2, "max")?,
        count: parts[3].parse().map_err(|_| {
            format!(
                "`{raw}`: count `{}` is not a non-negative integer",
                parts[3]
            )
        })?,
        spacing,
    };
    axis.check()?;
    Ok(axis)
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixed {
    pub g: Option<f64>,
    pub loss_db: Option<f64>,
    pub chi: Option<f64>,
    pub epsilon: Option<f64>,
    pub v: Option<f64>,
    pub s: Option<f64>,
}

impl Fixed {
    fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::G => self.g,
            Param::LossDb => self.loss_db,
            Param::Chi => self.chi,
            Param::Epsilon => self.epsilon,
            Param::V => self.v,
            Param::S => self.s,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub fixed: Fixed,
    #[serde(default)]
    pub protocols: Vec<ProtocolArg>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// JSON sweep specification; flags below are merged into it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Swept parameter as name:min:max:count[:log]; repeat for a grid.
    #[arg(long = "axis", value_parser = parse_axis)]
    pub axes: Vec<Axis>,
    #[arg(long, allow_negative_numbers = true)]
    pub g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub loss_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub chi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub s: Option<f64>,
    /// Protocols to tabulate (default: coherent,epr, plus squeezed when s is set).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub protocols: Vec<ProtocolArg>,
    /// Write the CSV here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn load_spec(path: &Path) -> anyhow::Result<SweepSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read sweep spec {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid sweep spec {}: {e}", path.display())))
}

impl SweepArgs {
    pub fn spec(&self) -> anyhow::Result<SweepSpec> {
        let mut spec = match &self.spec {
            Some(path) => load_spec(path)?,
            None => SweepSpec::default(),
        };
        for a in &spec.axes {
            a.check().map_err(usage)?;
        }
        spec.axes.extend(self.axes.iter().cloned());
        let f = &mut spec.fixed;
        for (slot, flag) in [
            (&mut f.g, self.g),
            (&mut f.loss_db, self.loss_db),
            (&mut f.chi, self.chi),
            (&mut f.epsilon, self.epsilon),
            (&mut f.v, self.v),
            (&mut f.s, self.s),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        if !self.protocols.is_empty() {
            spec.protocols = self.protocols.clone();
        }
        Ok(spec)
    }
}

/// Validated sweep: which parameter each axis drives, plus fixed values.
#[derive(Debug)]
pub struct Plan {
    axes: Vec<Axis>,
    values: Vec<Vec<f64>>,
    fixed: [Option<f64>; 6],
    protocols: Vec<ProtocolArg>,
}

impl Plan {
    pub fn new(spec: SweepSpec) -> anyhow::Result<Self> {
        let mut present = [false; 6];
        let mut fixed = [None; 6];
        for p in Param::ALL {
            fixed[p.index()] = spec.fixed.get(p);
            present[p.index()] = fixed[p.index()].is_some();
        }
        for a in &spec.axes {
            let i = a.name.index();
            if spec.axes.iter().filter(|b| b.name == a.name).count() > 1 {
                return Err(usage(format!(
                    "parameter `{}` is swept twice",
                    a.name.name()
                )));
            }
            if fixed[i].is_some() {
                return Err(usage(format!(
                    "parameter `{}` is both swept and fixed",
                    a.name.name()
                )));
            }
            present[i] = true;
        }
        let has = |p: Param| present[p.index()];
        if has(Param::G) == has(Param::LossDb) {
            return Err(usage(
                "give exactly one of `g` or `loss_db` (fixed or swept)",
            ));
        }
        if has(Param::Chi) && has(Param::Epsilon) {
            return Err(usage("give at most one of `chi` or `epsilon`"));
        }
        if !has(Param::V) {
            return Err(usage("missing `v` (fixed or swept)"));
        }
        let protocols = if spec.protocols.is_empty() {
            let mut p = vec![ProtocolArg::Coherent, ProtocolArg::Epr];
            if has(Param::S) {
                p.push(ProtocolArg::Squeezed);
            }
            p
        } else {
            let mut seen = Vec::new();
            for p in spec.protocols {
                if !seen.contains(&p) {
                    seen.push(p);
                }
            }
            seen
        };
        let values = spec.axes.iter().map(Axis::values).collect();
        Ok(Self {
            axes: spec.axes,
            values,
            fixed,
            protocols,
        })
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    /// Parameter values at grid index `k`; the first axis varies slowest.
    fn point(&self, mut k: usize) -> [Option<f64>; 6] {
        let mut p = self.fixed;
        for (axis, vals) in self.axes.iter().zip(&self.values).rev() {
            p[axis.name.index()] = Some(vals[k % vals.len()]);
            k /= vals.len();
        }
        p
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "index", "g", "loss_db", "chi", "epsilon", "v", "s", "valid", "error",
        ]
        .map(String::from)
        .to_vec();
        for p in &self.protocols {
            h.push(format!("delta_i_{}", p.name()));
            h.push(format!("secure_{}", p.name()));
        }
        h.push("max_added_noise".into());
        h.push("added_noise".into());
        h
    }

    fn row(&self, index: usize) -> Vec<String> {
        let p = self.point(index);
        match self.evaluate(&p) {
            Ok(row) => {
                let mut out = vec![index.to_string()];
                out.extend(row.inputs.iter().map(|x| num(Some(*x))));
                out.push("true".into());
                out.push(String::new());
                for (rate, secure) in &row.protocols {
                    out.push(num(Some(*rate)));
                    out.push(secure.to_string());
                }
                out.push(num(Some(row.max_added_noise)));
                out.push(num(Some(row.added_noise)));
                out
            }
            Err(err) => {
                let mut out = vec![index.to_string()];
                out.extend(Param::ALL.iter().map(|q| num(p[q.index()])));
                out.push("false".into());
                out.push(err.to_string());
                out.extend(std::iter::repeat_n(
                    String::new(),
                    2 * self.protocols.len() + 2,
                ));
                out
            }
        }
    }

    fn evaluate(&self, p: &[Option<f64>; 6]) -> cvqkd::Result<Row> {
        let get = |q: Param| p[q.index()];
        let cfg = RunConfig {
            v: get(Param::V).unwrap_or(f64::NAN),
            g: get(Param::G),
            loss_db: get(Param::LossDb),
            chi: get(Param::Chi),
            epsilon: get(Param::Epsilon),
            s: get(Param::S),
            ..Default::default()
        };
        let channel = cfg.channel_model()?;
        let v = cfg.v;
        if let Some(s) = cfg.s {
            SourceModel::new(v, s)?;
        }
        let mut protocols = Vec::with_capacity(self.protocols.len());
        for proto in &self.protocols {
            let protocol = match proto {
                ProtocolArg::Coherent => Protocol::Coherent,
                ProtocolArg::Epr => Protocol::Epr,
                ProtocolArg::Squeezed => {
                    Protocol::Squeezed(get(Param::S).ok_or_else(|| {
                        cvqkd::Error::Domain("squeezed protocol needs `s`".into())
                    })?)
                }
            };
            let report = KeyRateReport::evaluate_as(&channel, v, protocol)?;
            protocols.push((report.secret_rate, report.secure));
        }
        let g = channel.g_x;
        let s = get(Param::S).unwrap_or(1.0);
        Ok(Row {
            inputs: [
                g,
                gain_to_loss_db(g),
                channel.chi_x,
                channel.excess_noise(Quadrature::X).epsilon,
                v,
                s,
            ],
            protocols,
            max_added_noise: max_tolerable_added_noise(g, s)?,
            added_noise: g * channel.chi_x,
        })
    }

    /// All rows in grid order; evaluated in parallel.
    pub fn rows(&self) -> Vec<Vec<String>> {
        (0..self.len())
            .into_par_iter()
            .map(|k| self.row(k))
            .collect()
    }
}

struct Row {
    inputs: [f64; 6],
    protocols: Vec<(f64, bool)>,
    max_added_noise: f64,
    added_noise: f64,
}

/// Shortest round-trip representation; empty when absent.
fn num(x: Option<f64>) -> String {
    x.map_or_else(String::new, |x| format!("{x:?}"))
}

pub fn run(args: &SweepArgs) -> anyhow::Result<()> {
    let plan = Plan::new(args.spec()?)?;
    let rows = plan.rows();
    let sink: Box<dyn std::io::Write> = match &args.output {
        Some(path) => Box::new(
            std::fs::File::create(path)
                .map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(plan.header())?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
