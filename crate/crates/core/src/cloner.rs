//! Monte Carlo entangling cloner.
//!
//! Eve replaces the lossy line by a beam splitter of transmission `G`. Into
//! its second input she injects one half `E1` of an EPR pair whose variance is
//! chosen so that Bob sees exactly the channel noise `Gχ`; measuring the twin
//! beam tells her the part `x_known` of `x_E1`, leaving `x_unknown` with
//! `<x_unknown²> = 1 / <x_E1²>`. She keeps the reflected beam `E2`:
//!
//! ```text
//! x_B  = √G x_in + √(1−G) x_E1
//! x_E2 = √G x_E1 − √(1−G) x_in
//! ```
//!
//! The twin-beam measurement is not simulated; `x_E1` is drawn directly as
//! `x_known + x_unknown`, which reproduces all second moments.

use serde::Serialize;

use crate::channel::{streams, ChannelModel, Quadrature, SourceModel, BOUNDARY_SLACK};
use crate::error::{Error, Result};
use crate::gaussian::{
    derive_seed, empirical_conditional_variance, empirical_conditional_variance_multi,
    sample_gaussian, variance_standard_error, SampleBatch,
};
use crate::security::{alice_conditional_variance, eve_min_conditional_variance};

/// Below this many samples the empirical estimates carry a warning flag.
pub const MIN_RELIABLE_SAMPLES: usize = 1000;

const KNOWN_X: u64 = 7;
const UNKNOWN_X: u64 = 8;
const KNOWN_P: u64 = 9;
const UNKNOWN_P: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClonerSetup {
    pub channel: ChannelModel,
    pub source: SourceModel,
    /// `<x_E1²> = Gχ / (1 − G)`.
    pub e1_variance: f64,
    pub known_variance: f64,
    pub unknown_variance: f64,
}

impl ClonerSetup {
    /// Builds the cloner that reproduces `channel` exactly at Bob's end.
    pub fn build(channel: &ChannelModel, source: &SourceModel) -> Result<Self> {
        let (g, chi) = channel.symmetric_params().map_err(|_| {
            Error::Infeasible("entangling cloner needs a channel symmetric in x and p".into())
        })?;
        if g >= 1.0 {
            return Err(Error::Infeasible(format!(
                "entangling cloner is only constructed for G < 1, got G={g}"
            )));
        }
        if !(chi > 0.0) {
            return Err(Error::Infeasible(format!(
                "entangling cloner needs chi > 0 for a lossy channel, got {chi}"
            )));
        }
        let e1_variance = g * chi / (1.0 - g);
        if e1_variance < 1.0 - BOUNDARY_SLACK {
            return Err(Error::Infeasible(format!(
                "channel noise below cloner's EPR feasibility: <x_E1^2> = {e1_variance} < 1 (G*chi < 1 - G)"
            )));
        }
        // Pure loss puts e1 on the vacuum boundary; round-off must not make
        // the known part negative.
        let unknown_variance = 1.0 / e1_variance;
        let known_variance = (e1_variance - unknown_variance).max(0.0);
        Ok(Self {
            channel: *channel,
            source: *source,
            e1_variance,
            known_variance,
            unknown_variance,
        })
    }

    pub fn gain(&self) -> f64 {
        self.channel.g_x
    }

    pub fn added_noise(&self) -> f64 {
        self.channel.chi_x
    }

    /// Noise the injected beam adds at Bob's end, `(1 − G)<x_E1²>`; equals `Gχ`.
    pub fn induced_noise(&self) -> f64 {
        (1.0 - self.gain()) * self.e1_variance
    }

    /// Analytic `V_{B|E,min}` this attack should reach.
    pub fn analytic_eve_variance(&self) -> f64 {
        eve_min_conditional_variance(self.gain(), self.added_noise(), self.source.v_total())
            .expect("setup parameters validated at construction")
    }

    pub fn analytic_alice_variance(&self) -> f64 {
        alice_conditional_variance(self.gain(), self.added_noise(), self.source.s())
            .expect("setup parameters validated at construction")
    }
}

fn column(q: Quadrature, name: &str) -> String {
    let tag = match q {
        Quadrature::X => "x",
        Quadrature::P => "p",
    };
    if name == "prep" {
        format!("A_{tag}")
    } else {
        format!("{tag}_{name}")
    }
}

/// Runs the attack on `n` symbols.
///
/// Columns per quadrature (shown for x): `x_A, A_x, x_in, x_known,
/// x_unknown, x_E1, x_B, x_E2`, plus the reduced records `x_E2c =
/// √G x_unknown − √(1−G) x_in` and `x_Bc = √G x_in + √(1−G) x_unknown` left
/// after Eve subtracts what she knows.
pub fn simulate_attack(setup: &ClonerSetup, n: usize, seed: u64) -> Result<SampleBatch> {
    let g = setup.gain();
    let t = g.sqrt();
    let r = (1.0 - g).sqrt();
    let modulation = setup.source.modulation_variance();
    let mut batch = SampleBatch::new(seed);
    for q in [Quadrature::X, Quadrature::P] {
        let (ms, ps, ks, us) = match q {
            Quadrature::X => (streams::MOD_X, streams::PREP_X, KNOWN_X, UNKNOWN_X),
            Quadrature::P => (streams::MOD_P, streams::PREP_P, KNOWN_P, UNKNOWN_P),
        };
        let alice = sample_gaussian(modulation, n, derive_seed(seed, ms))?;
        let prep = sample_gaussian(setup.source.s(), n, derive_seed(seed, ps))?;
        let known = sample_gaussian(setup.known_variance, n, derive_seed(seed, ks))?;
        let unknown = sample_gaussian(setup.unknown_variance, n, derive_seed(seed, us))?;

        let input: Vec<f64> = alice.iter().zip(&prep).map(|(a, e)| a + e).collect();
        let e1: Vec<f64> = known.iter().zip(&unknown).map(|(k, u)| k + u).collect();
        let bob: Vec<f64> = input.iter().zip(&e1).map(|(i, e)| t * i + r * e).collect();
        let e2: Vec<f64> = e1.iter().zip(&input).map(|(e, i)| t * e - r * i).collect();
        let e2_reduced: Vec<f64> = unknown
            .iter()
            .zip(&input)
            .map(|(u, i)| t * u - r * i)
            .collect();
        let bob_reduced: Vec<f64> = input
            .iter()
            .zip(&unknown)
            .map(|(i, u)| t * i + r * u)
            .collect();

        batch.insert(column(q, "A"), alice)?;
        batch.insert(column(q, "prep"), prep)?;
        batch.insert(column(q, "in"), input)?;
        batch.insert(column(q, "known"), known)?;
        batch.insert(column(q, "unknown"), unknown)?;
        batch.insert(column(q, "E1"), e1)?;
        batch.insert(column(q, "B"), bob)?;
        batch.insert(column(q, "E2"), e2)?;
        batch.insert(column(q, "E2c"), e2_reduced)?;
        batch.insert(column(q, "Bc"), bob_reduced)?;
    }
    Ok(batch)
}

/// Eve's empirical conditional variance on one of Bob's quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EveEstimate {
    /// Residual of `x_B` given `(x_known, x_E2)`.
    pub variance: f64,
    /// Residual of `x_Bc` given `x_E2c`.
    pub reduced_variance: f64,
    pub standard_error: f64,
    /// The two forms agree within three standard errors.
    pub forms_agree: bool,
    pub low_sample_warning: bool,
    pub n: usize,
}

pub fn eve_conditional_variance_empirical(
    batch: &SampleBatch,
    q: Quadrature,
) -> Result<EveEstimate> {
    let target = batch.column(&column(q, "B"))?;
    let known = batch.column(&column(q, "known"))?;
    let e2 = batch.column(&column(q, "E2"))?;
    let variance = empirical_conditional_variance_multi(&[known, e2], target)?;
    let (reduced_variance, _) = empirical_conditional_variance(
        batch.column(&column(q, "E2c"))?,
        batch.column(&column(q, "Bc"))?,
    )?;
    let n = batch.len();
    let standard_error = variance_standard_error(variance, n);
    Ok(EveEstimate {
        variance,
        reduced_variance,
        standard_error,
        forms_agree: (variance - reduced_variance).abs() <= 3.0 * standard_error,
        low_sample_warning: n < MIN_RELIABLE_SAMPLES,
        n,
    })
}

/// `V(x_B | x_A)` measured on a batch holding `x_A` and `x_B` (or the p columns).
pub fn alice_conditional_variance_empirical(batch: &SampleBatch, q: Quadrature) -> Result<f64> {
    let (v, _) = empirical_conditional_variance(
        batch.column(&column(q, "A"))?,
        batch.column(&column(q, "B"))?,
    )?;
    Ok(v)
}

/// Empirical-vs-analytic comparison of one attack run, in shot-noise units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackAnalysis {
    pub setup: ClonerSetup,
    pub n: usize,
    pub seed: u64,
    pub eve_analytic: f64,
    pub eve_empirical: f64,
    pub eve_reduced: f64,
    pub eve_standard_error: f64,
    pub alice_analytic: f64,
    pub alice_empirical: f64,
    pub alice_standard_error: f64,
    /// Empirical `V(x_B|x_A) · V(p_B|p_E)`.
    pub heisenberg_product: f64,
    pub heisenberg_standard_error: f64,
    pub saturation_pass: bool,
    pub alice_pass: bool,
    pub heisenberg_pass: bool,
    pub forms_agree: bool,
    pub low_sample_warning: bool,
}

impl AttackAnalysis {
    pub fn run(setup: &ClonerSetup, n: usize, seed: u64) -> Result<Self> {
        let batch = simulate_attack(setup, n, seed)?;
        Self::from_batch(setup, &batch)
    }

    pub fn from_batch(setup: &ClonerSetup, batch: &SampleBatch) -> Result<Self> {
        let n = batch.len();
        let eve_x = eve_conditional_variance_empirical(batch, Quadrature::X)?;
        let eve_p = eve_conditional_variance_empirical(batch, Quadrature::P)?;
        let alice_x = alice_conditional_variance_empirical(batch, Quadrature::X)?;
        let eve_analytic = setup.analytic_eve_variance();
        let alice_analytic = setup.analytic_alice_variance();
        let eve_se = variance_standard_error(eve_analytic, n);
        let alice_se = variance_standard_error(alice_analytic, n);
        let heisenberg_product = alice_x * eve_p.variance;
        let rel = (2.0 / n as f64).sqrt();
        let heisenberg_standard_error = heisenberg_product * rel * std::f64::consts::SQRT_2;
        Ok(Self {
            setup: *setup,
            n,
            seed: batch.seed(),
            eve_analytic,
            eve_empirical: eve_x.variance,
            eve_reduced: eve_x.reduced_variance,
            eve_standard_error: eve_se,
            alice_analytic,
            alice_empirical: alice_x,
            alice_standard_error: alice_se,
            heisenberg_product,
            heisenberg_standard_error,
            saturation_pass: (eve_x.variance - eve_analytic).abs() < 3.0 * eve_se,
            alice_pass: (alice_x - alice_analytic).abs() < 3.0 * alice_se,
            heisenberg_pass: heisenberg_product >= 1.0 - 5.0 * rel * std::f64::consts::SQRT_2,
            forms_agree: eve_x.forms_agree,
            low_sample_warning: eve_x.low_sample_warning,
        })
    }

    pub fn passed(&self) -> bool {
        self.saturation_pass && self.alice_pass && self.heisenberg_pass && self.forms_agree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{propagate, ChannelModel, SourceModel};
    use crate::gaussian::{cross_moment, second_moment, MomentEstimate};

    fn coherent(v: f64) -> SourceModel {
        SourceModel::coherent(v).unwrap()
    }

    #[test]
    fn build_examples() {
        let s = ClonerSetup::build(&ChannelModel::symmetric(0.5, 1.0).unwrap(), &coherent(10.0))
            .unwrap();
        assert_eq!(
            (s.e1_variance, s.unknown_variance, s.known_variance),
            (1.0, 1.0, 0.0)
        );
        let s = ClonerSetup::build(&ChannelModel::symmetric(0.5, 2.0).unwrap(), &coherent(10.0))
            .unwrap();
        assert_eq!(
            (s.e1_variance, s.unknown_variance, s.known_variance),
            (2.0, 0.5, 1.5)
        );
        let s = ClonerSetup::build(
            &ChannelModel::symmetric(0.25, 3.0).unwrap(),
            &coherent(10.0),
        )
        .unwrap();
        assert_eq!(s.e1_variance, 1.0);
        assert_eq!(s.known_variance, 0.0);
    }

    #[test]
    fn induced_noise_matches_channel() {
        for (g, chi) in [(0.3, 4.0), (0.01, 120.0), (0.9, 0.5)] {
            let s = ClonerSetup::build(&ChannelModel::symmetric(g, chi).unwrap(), &coherent(5.0))
                .unwrap();
            assert!((s.induced_noise() - g * chi).abs() < 1e-12);
            assert!((s.unknown_variance * s.e1_variance - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn build_rejections() {
        let src = coherent(10.0);
        let amp = ChannelModel::symmetric(1.0, 0.5).unwrap();
        assert!(matches!(
            ClonerSetup::build(&amp, &src),
            Err(Error::Infeasible(_))
        ));
        let sub_vacuum = ChannelModel::symmetric(0.5, 0.5).unwrap();
        let err = ClonerSetup::build(&sub_vacuum, &src).unwrap_err();
        assert!(err.to_string().contains("EPR feasibility"), "{err}");
        let asym = ChannelModel::new(0.5, 1.0, 0.4, 1.5).unwrap();
        assert!(ClonerSetup::build(&asym, &src).is_err());
        assert!(ClonerSetup::build(&ChannelModel::symmetric(0.5, 0.0).unwrap(), &src).is_err());
    }

    #[test]
    fn pure_loss_random_gains_build() {
        for i in 1..100 {
            let g = i as f64 / 100.0;
            let c = ChannelModel::pure_loss(g).unwrap();
            let s = ClonerSetup::build(&c, &coherent(10.0)).unwrap();
            assert!(s.known_variance < 1e-12 && s.known_variance >= 0.0);
        }
    }

    fn within(x: f64, expected: f64, n: usize, k: f64) -> bool {
        (x - expected).abs() < k * variance_standard_error(expected, n)
    }

    #[test]
    fn saturates_bound_pure_loss() {
        let n = 1_000_000;
        let setup =
            ClonerSetup::build(&ChannelModel::symmetric(0.5, 1.0).unwrap(), &coherent(10.0))
                .unwrap();
        let batch = simulate_attack(&setup, n, 17).unwrap();
        assert!(batch.column("x_known").unwrap().iter().all(|&v| v == 0.0));
        let eve = eve_conditional_variance_empirical(&batch, Quadrature::X).unwrap();
        assert!(within(eve.variance, 1.0 / 0.55, n, 3.0), "{eve:?}");
        assert!(eve.forms_agree);
        assert!(!eve.low_sample_warning);
    }

    #[test]
    fn saturates_bound_noisy() {
        let n = 1_000_000;
        let setup =
            ClonerSetup::build(&ChannelModel::symmetric(0.9, 2.0).unwrap(), &coherent(20.0))
                .unwrap();
        let a = AttackAnalysis::run(&setup, n, 5).unwrap();
        assert!((a.eve_analytic - 1.0 / (0.9 * 2.05)).abs() < 1e-12);
        assert!(a.passed(), "{a:?}");
    }

    #[test]
    fn no_modulation_still_on_bound() {
        let n = 200_000;
        let setup = ClonerSetup::build(&ChannelModel::symmetric(0.4, 3.0).unwrap(), &coherent(1.0))
            .unwrap();
        let a = AttackAnalysis::run(&setup, n, 8).unwrap();
        assert!((a.eve_analytic - 1.0 / (0.4 * 4.0)).abs() < 1e-12);
        assert!(a.saturation_pass, "{a:?}");
    }

    #[test]
    fn alice_side() {
        let n = 1_000_000;
        let c = ChannelModel::symmetric(0.5, 1.0).unwrap();
        let setup = ClonerSetup::build(&c, &coherent(10.0)).unwrap();
        let b = simulate_attack(&setup, n, 1).unwrap();
        assert!(within(
            alice_conditional_variance_empirical(&b, Quadrature::X).unwrap(),
            1.0,
            n,
            3.0
        ));
        let setup = ClonerSetup::build(&c, &SourceModel::epr(10.0).unwrap()).unwrap();
        let b = simulate_attack(&setup, n, 2).unwrap();
        assert!(within(
            alice_conditional_variance_empirical(&b, Quadrature::P).unwrap(),
            0.55,
            n,
            3.0
        ));
        // Identity channel through propagate: only shot noise is left.
        let id = ChannelModel::symmetric(1.0, 0.0).unwrap();
        let b = propagate(&coherent(10.0), &id, n, 3).unwrap();
        assert!(within(
            alice_conditional_variance_empirical(&b, Quadrature::X).unwrap(),
            1.0,
            n,
            3.0
        ));
    }

    #[test]
    fn bob_sees_the_nominal_channel() {
        let n = 1_000_000;
        let (g, chi, v) = (0.3, 4.0, 10.0);
        let setup =
            ClonerSetup::build(&ChannelModel::symmetric(g, chi).unwrap(), &coherent(v)).unwrap();
        let b = simulate_attack(&setup, n, 4).unwrap();
        let expected = g * (v + chi);
        assert!(within(
            second_moment(b.column("x_B").unwrap()),
            expected,
            n,
            3.0
        ));
        let cross =
            MomentEstimate::from_samples(b.column("x_in").unwrap(), b.column("x_E1").unwrap())
                .unwrap();
        assert!(cross.value.abs() < 3.0 * cross.standard_error);
        let cov = cross_moment(b.column("x_A").unwrap(), b.column("x_B").unwrap());
        assert!((cov - g.sqrt() * (v - 1.0)).abs() < 0.02);
    }

    #[test]
    fn attack_is_deterministic() {
        let setup =
            ClonerSetup::build(&ChannelModel::symmetric(0.5, 2.0).unwrap(), &coherent(10.0))
                .unwrap();
        assert_eq!(
            simulate_attack(&setup, 5000, 3).unwrap(),
            simulate_attack(&setup, 5000, 3).unwrap()
        );
    }

    #[test]
    fn small_batches_warn() {
        let setup =
            ClonerSetup::build(&ChannelModel::symmetric(0.5, 2.0).unwrap(), &coherent(10.0))
                .unwrap();
        let b = simulate_attack(&setup, 100, 3).unwrap();
        assert!(
            eve_conditional_variance_empirical(&b, Quadrature::X)
                .unwrap()
                .low_sample_warning
        );
    }
}
