//! Classical-statistics skeleton of a protocol run: modulation, transmission,
//! random basis choice, sifting, parameter estimation on a revealed subset and
//! the resulting key-rate verdict.
//!
//! Bob measures one quadrature per symbol, chosen by a fair coin. With a
//! coherent source every symbol is kept; EPR and squeezed sources also draw
//! Alice's basis and keep only the symbols where the two agree. Only Bob's
//! measured quadrature is revealed, so each quadrature is estimated from its
//! own subset.

use serde::{Deserialize, Serialize};

use crate::channel::{propagate, ChannelModel, Quadrature, SourceModel};
use crate::cloner::{simulate_attack, ClonerSetup};
use crate::error::{Error, Result};
use crate::gaussian::{
    derive_seed, empirical_conditional_variance, sample_bits, sample_indices, second_moment,
    variance_standard_error, SampleBatch,
};
use crate::security::KeyRateReport;

pub const MIN_SYMBOLS: usize = 100;
pub const MIN_REVEALED: usize = 10;
pub const DEFAULT_REVEAL_FRACTION: f64 = 0.1;
pub const DEFAULT_PESSIMISM: f64 = 3.0;

const BOB_BASIS: u64 = 20;
const ALICE_BASIS: u64 = 21;
const REVEAL: u64 = 22;

/// How the channel between Alice and Bob is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Realization {
    /// Additive Gaussian noise, [`propagate`].
    #[default]
    Direct,
    /// Eve's entangling cloner, [`simulate_attack`].
    Cloner,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolRun {
    pub source: SourceModel,
    /// Ground truth; never seen by the estimator.
    pub channel: ChannelModel,
    pub n_symbols: usize,
    pub reveal_fraction: f64,
    pub seed: u64,
    pub realization: Realization,
    /// Number of standard errors each estimate is moved toward pessimism
    /// before the abort decision.
    pub pessimism: f64,
}

impl ProtocolRun {
    pub fn new(source: SourceModel, channel: ChannelModel, n_symbols: usize, seed: u64) -> Self {
        Self {
            source,
            channel,
            n_symbols,
            reveal_fraction: DEFAULT_REVEAL_FRACTION,
            seed,
            realization: Realization::Direct,
            pessimism: DEFAULT_PESSIMISM,
        }
    }

    pub fn reveal_fraction(mut self, fraction: f64) -> Self {
        self.reveal_fraction = fraction;
        self
    }

    pub fn realization(mut self, realization: Realization) -> Self {
        self.realization = realization;
        self
    }

    pub fn pessimism(mut self, k: f64) -> Self {
        self.pessimism = k;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_symbols < MIN_SYMBOLS {
            return Err(Error::InsufficientSamples {
                needed: MIN_SYMBOLS,
                got: self.n_symbols,
            });
        }
        if !(self.reveal_fraction > 0.0 && self.reveal_fraction < 1.0) {
            return Err(Error::domain(format!(
                "reveal fraction must lie in (0, 1), got {}",
                self.reveal_fraction
            )));
        }
        if !(self.pessimism.is_finite() && self.pessimism >= 0.0) {
            return Err(Error::domain(format!(
                "pessimism must be non-negative, got {}",
                self.pessimism
            )));
        }
        Ok(())
    }
}

/// Gain and added-noise estimate on one quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub gain: f64,
    pub gain_se: f64,
    pub added_noise: f64,
    pub added_noise_se: f64,
    /// Regression slope `<ab>/<a²>`, the amplitude gain.
    pub slope: f64,
    /// `V(b|a)`, Alice's conditional variance on Bob's values.
    pub residual_variance: f64,
    pub n: usize,
    /// The raw added-noise estimate was negative and has been clamped to 0.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatedChannel {
    pub x: QuadratureEstimate,
    pub p: QuadratureEstimate,
    /// Both quadratures pooled, for a channel assumed symmetric.
    pub pooled: QuadratureEstimate,
}

impl EstimatedChannel {
    pub fn quadrature(&self, q: Quadrature) -> &QuadratureEstimate {
        match q {
            Quadrature::X => &self.x,
            Quadrature::P => &self.p,
        }
    }

    /// Channel built from the estimates, each moved `k` standard errors
    /// upward. Larger gain or added noise raises the security product, so this
    /// is the pessimistic direction.
    pub fn padded_channel(&self, k: f64) -> Result<ChannelModel> {
        ChannelModel::new(
            self.x.gain + k * self.x.gain_se,
            self.x.added_noise + k * self.x.added_noise_se,
            self.p.gain + k * self.p.gain_se,
            self.p.added_noise + k * self.p.added_noise_se,
        )
    }
}

fn estimate_quadrature(alice: &[f64], bob: &[f64], s: f64) -> Result<QuadratureEstimate> {
    if alice.len() < MIN_REVEALED {
        return Err(Error::InsufficientSamples {
            needed: MIN_REVEALED,
            got: alice.len(),
        });
    }
    let n = alice.len();
    let (residual, est) = empirical_conditional_variance(alice, bob)?;
    let slope = est.coefficient;
    let gain = slope * slope;
    if !(gain > 0.0) {
        return Err(Error::domain(
            "degenerate estimate: no correlation between Alice and Bob",
        ));
    }
    let sum_a2 = second_moment(alice) * n as f64;
    let slope_se = (residual / sum_a2).sqrt();
    let gain_se = 2.0 * slope.abs() * slope_se;
    let raw_chi = residual / gain - s;
    let residual_se = variance_standard_error(residual, n);
    let added_noise_se = (residual_se / gain).hypot(residual * gain_se / (gain * gain));
    Ok(QuadratureEstimate {
        gain,
        gain_se,
        added_noise: raw_chi.max(0.0),
        added_noise_se,
        slope,
        residual_variance: residual,
        n,
        clamped: raw_chi < 0.0,
    })
}

/// Estimates `(Ĝ, χ̂)` per quadrature from revealed `(alice, bob)` pairs.
///
/// The batch needs columns `basis` (0 = x, 1 = p), `alice` and `bob`.
/// `Ĝ` is the squared regression slope and `χ̂ = V(b|a)/Ĝ − s`, with `s`
/// known from Alice's source.
pub fn estimate_channel(revealed: &SampleBatch, source: &SourceModel) -> Result<EstimatedChannel> {
    let basis = revealed.column("basis")?;
    let alice = revealed.column("alice")?;
    let bob = revealed.column("bob")?;
    let split = |want: f64| -> (Vec<f64>, Vec<f64>) {
        basis
            .iter()
            .zip(alice.iter().zip(bob))
            .filter(|(b, _)| **b == want)
            .map(|(_, (a, b))| (*a, *b))
            .unzip()
    };
    let (ax, bx) = split(0.0);
    let (ap, bp) = split(1.0);
    Ok(EstimatedChannel {
        x: estimate_quadrature(&ax, &bx, source.s())?,
        p: estimate_quadrature(&ap, &bp, source.s())?,
        pooled: estimate_quadrature(alice, bob, source.s())?,
    })
}

/// Key-rate report from estimates moved `k` standard errors toward
/// pessimism; `secure == false` means the run should be aborted.
pub fn secure_verdict(
    est: &EstimatedChannel,
    source: &SourceModel,
    k: f64,
) -> Result<KeyRateReport> {
    KeyRateReport::evaluate(&est.padded_channel(k)?, source)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    /// Sifted key-bearing symbols; revealed symbols are not included.
    pub key: SampleBatch,
    pub revealed: SampleBatch,
    pub estimate: EstimatedChannel,
    /// Report from the raw estimates.
    pub plug_in: KeyRateReport,
    /// Report from the padded estimates; drives the abort decision.
    pub verdict: KeyRateReport,
    pub emitted: usize,
    pub sifted: usize,
}

impl ProtocolOutcome {
    pub fn abort(&self) -> bool {
        !self.verdict.secure
    }
}

pub fn run_protocol(run: &ProtocolRun) -> Result<ProtocolOutcome> {
    run.validate()?;
    let n = run.n_symbols;
    let raw = match run.realization {
        Realization::Direct => propagate(&run.source, &run.channel, n, run.seed)?,
        Realization::Cloner => {
            let setup = ClonerSetup::build(&run.channel, &run.source)?;
            simulate_attack(&setup, n, run.seed)?
        }
    };
    let bob_basis = sample_bits(n, derive_seed(run.seed, BOB_BASIS))?;
    let kept: Vec<usize> = if run.source.needs_sifting() {
        let alice_basis = sample_bits(n, derive_seed(run.seed, ALICE_BASIS))?;
        (0..n).filter(|&i| alice_basis[i] == bob_basis[i]).collect()
    } else {
        (0..n).collect()
    };
    let sifted = kept.len();
    let n_reveal = (run.reveal_fraction * sifted as f64).round() as usize;
    if n_reveal < MIN_REVEALED || n_reveal >= sifted {
        return Err(Error::InsufficientSamples {
            needed: MIN_REVEALED,
            got: n_reveal,
        });
    }
    let revealed_pos = sample_indices(sifted, n_reveal, derive_seed(run.seed, REVEAL))?;

    let (xa, xb, pa, pb) = (
        raw.column("x_A")?,
        raw.column("x_B")?,
        raw.column("p_A")?,
        raw.column("p_B")?,
    );
    let record = |positions: &mut dyn Iterator<Item = usize>| -> Result<SampleBatch> {
        let (mut sym, mut basis, mut alice, mut bob) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for pos in positions {
            let i = kept[pos];
            let on_p = bob_basis[i];
            sym.push(i as f64);
            basis.push(if on_p { 1.0 } else { 0.0 });
            alice.push(if on_p { pa[i] } else { xa[i] });
            bob.push(if on_p { pb[i] } else { xb[i] });
        }
        SampleBatch::new(run.seed)
            .with("symbol", sym)?
            .with("basis", basis)?
            .with("alice", alice)?
            .with("bob", bob)
    };
    let revealed = record(&mut revealed_pos.iter().copied())?;
    let mut is_revealed = vec![false; sifted];
    for &pos in &revealed_pos {
        is_revealed[pos] = true;
    }
    let key = record(&mut (0..sifted).filter(|&pos| !is_revealed[pos]))?;

    let estimate = estimate_channel(&revealed, &run.source)?;
    let plug_in = secure_verdict(&estimate, &run.source, 0.0)?;
    let verdict = secure_verdict(&estimate, &run.source, run.pessimism)?;
    Ok(ProtocolOutcome {
        key,
        revealed,
        estimate,
        plug_in,
        verdict,
        emitted: n,
        sifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ExcessNoise;
    use crate::security::{delta_i_coherent, excess_noise_threshold, Protocol};

    fn exact(gain: f64, added_noise: f64) -> QuadratureEstimate {
        QuadratureEstimate {
            gain,
            gain_se: 0.0,
            added_noise,
            added_noise_se: 0.0,
            slope: gain.sqrt(),
            residual_variance: gain * (added_noise + 1.0),
            n: 1_000_000,
            clamped: false,
        }
    }

    fn exact_channel(g: f64, chi: f64) -> EstimatedChannel {
        EstimatedChannel {
            x: exact(g, chi),
            p: exact(g, chi),
            pooled: exact(g, chi),
        }
    }

    #[test]
    fn verdict_at_worked_point() {
        let est = exact_channel(0.01, 99.0);
        let r = secure_verdict(&est, &SourceModel::coherent(10.0).unwrap(), 3.0).unwrap();
        assert!((r.secret_rate - 6.52e-3).abs() < 1e-5);
        assert!(r.secure);
    }

    #[test]
    fn verdict_above_threshold_aborts() {
        let eps = excess_noise_threshold(10.0, Protocol::Coherent).unwrap() + 0.05;
        let chi = ExcessNoise { epsilon: eps }.to_added_noise(0.01);
        let r = secure_verdict(
            &exact_channel(0.01, chi),
            &SourceModel::coherent(10.0).unwrap(),
            0.0,
        )
        .unwrap();
        assert!(!r.secure);
    }

    #[test]
    fn verdict_asymmetric_uses_general_form() {
        let est = EstimatedChannel {
            x: exact(0.5, 1.0),
            p: exact(0.5, 4.0),
            pooled: exact(0.5, 2.5),
        };
        let src = SourceModel::coherent(10.0).unwrap();
        let r = secure_verdict(&est, &src, 0.0).unwrap();
        let expected =
            KeyRateReport::evaluate(&ChannelModel::new(0.5, 1.0, 0.5, 4.0).unwrap(), &src).unwrap();
        assert_eq!(r, expected);
        assert!(!r.secure);
    }

    #[test]
    fn run_validation() {
        let src = SourceModel::coherent(10.0).unwrap();
        let ch = ChannelModel::pure_loss(0.5).unwrap();
        assert!(run_protocol(&ProtocolRun::new(src, ch, 50, 1)).is_err());
        assert!(run_protocol(&ProtocolRun::new(src, ch, 1000, 1).reveal_fraction(1.0)).is_err());
        // 200 symbols * 0.01 = 2 revealed
        let err =
            run_protocol(&ProtocolRun::new(src, ch, 200, 1).reveal_fraction(0.01)).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }

    #[test]
    fn noiseless_identity_channel() {
        let src = SourceModel::coherent(10.0).unwrap();
        let ch = ChannelModel::symmetric(1.0, 0.0).unwrap();
        let out = run_protocol(&ProtocolRun::new(src, ch, 200_000, 3)).unwrap();
        let est = out.estimate.pooled;
        assert!((est.gain - 1.0).abs() < 0.01, "{est:?}");
        assert!(est.added_noise < 0.05, "{est:?}");
        let expected = 0.5 * (1.0f64 / (0.1 * 1.0)).log2();
        assert!((out.plug_in.secret_rate - expected).abs() < 0.05 * expected);
    }

    #[test]
    fn revealed_and_key_are_disjoint() {
        let src = SourceModel::epr(10.0).unwrap();
        let ch = ChannelModel::pure_loss(0.5).unwrap();
        let out = run_protocol(&ProtocolRun::new(src, ch, 20_000, 9)).unwrap();
        let rev: std::collections::HashSet<u64> = out
            .revealed
            .column("symbol")
            .unwrap()
            .iter()
            .map(|&v| v as u64)
            .collect();
        assert!(out
            .key
            .column("symbol")
            .unwrap()
            .iter()
            .all(|&v| !rev.contains(&(v as u64))));
        assert_eq!(out.key.len() + out.revealed.len(), out.sifted);
    }

    #[test]
    fn epr_sifting_keeps_about_half() {
        let n = 100_000;
        let src = SourceModel::epr(10.0).unwrap();
        let ch = ChannelModel::pure_loss(0.5).unwrap();
        let out = run_protocol(&ProtocolRun::new(src, ch, n, 12)).unwrap();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((out.sifted as f64 - n as f64 / 2.0).abs() < 3.0 * sigma);
        let coh = run_protocol(&ProtocolRun::new(
            SourceModel::coherent(10.0).unwrap(),
            ch,
            n,
            12,
        ))
        .unwrap();
        assert_eq!(coh.sifted, n);
    }

    #[test]
    fn moderate_loss_estimation() {
        let src = SourceModel::coherent(10.0).unwrap();
        let ch = ChannelModel::symmetric(0.5, 1.0).unwrap();
        let out = run_protocol(&ProtocolRun::new(src, ch, 1_000_000, 21)).unwrap();
        for q in [&out.estimate.x, &out.estimate.p, &out.estimate.pooled] {
            assert!((q.gain - 0.5).abs() < 0.02 * 0.5, "{q:?}");
            assert!((q.added_noise - 1.0).abs() < 0.05, "{q:?}");
        }
        let analytic = delta_i_coherent(0.5, 1.0, 10.0).unwrap();
        assert!((out.plug_in.secret_rate - analytic).abs() < 0.1 * analytic);
    }

    #[test]
    fn synthetic_estimation() {
        // Revealed pairs straight from the generator, no sifting.
        let src = SourceModel::coherent(10.0).unwrap();
        let ch = ChannelModel::pure_loss(0.25).unwrap();
        let n = 100_000;
        let raw = propagate(&src, &ch, n, 77).unwrap();
        let batch = SampleBatch::new(77)
            .with("basis", (0..n).map(|i| (i % 2) as f64).collect())
            .unwrap()
            .with(
                "alice",
                (0..n)
                    .map(|i| {
                        if i % 2 == 0 {
                            raw.column("x_A").unwrap()[i]
                        } else {
                            raw.column("p_A").unwrap()[i]
                        }
                    })
                    .collect(),
            )
            .unwrap()
            .with(
                "bob",
                (0..n)
                    .map(|i| {
                        if i % 2 == 0 {
                            raw.column("x_B").unwrap()[i]
                        } else {
                            raw.column("p_B").unwrap()[i]
                        }
                    })
                    .collect(),
            )
            .unwrap();
        let est = estimate_channel(&batch, &src).unwrap();
        assert!(
            (est.pooled.gain - 0.25).abs() < 0.02 * 0.25,
            "{:?}",
            est.pooled
        );
        assert!(
            (est.pooled.added_noise - 3.0).abs() < 0.05 * 3.0,
            "{:?}",
            est.pooled
        );
    }

    #[test]
    fn too_few_revealed_per_quadrature() {
        let batch = SampleBatch::new(0)
            .with("basis", vec![0.0; 20])
            .unwrap()
            .with("alice", (0..20).map(|i| i as f64).collect())
            .unwrap()
            .with("bob", (0..20).map(|i| i as f64).collect())
            .unwrap();
        assert!(estimate_channel(&batch, &SourceModel::coherent(10.0).unwrap()).is_err());
    }

    #[test]
    fn cloner_realization_runs() {
        let src = SourceModel::coherent(10.0).unwrap();
        let ch = ChannelModel::symmetric(0.5, 2.0).unwrap();
        let out =
            run_protocol(&ProtocolRun::new(src, ch, 100_000, 4).realization(Realization::Cloner))
                .unwrap();
        assert!((out.estimate.pooled.gain - 0.5).abs() < 0.05);
        // The cloner can't realize a sub-vacuum channel.
        let bad = ChannelModel::symmetric(0.5, 0.5).unwrap();
        let err =
            run_protocol(&ProtocolRun::new(src, bad, 1000, 4).realization(Realization::Cloner))
                .unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }
}
