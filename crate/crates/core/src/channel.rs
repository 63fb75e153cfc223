//! Alice's source and the Alice→Bob Gaussian channel.
//!
//! The channel acts on each quadrature as `x_B = √G · (x_in + B_x)`, with `G`
//! the intensity gain and `B_x` an added noise of variance `χ` (both referred
//! to the channel input). Every variance formula below uses the intensity gain
//! `G`; the amplitude gain `√G` only appears when samples are propagated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{derive_seed, sample_gaussian, SampleBatch};

/// Relative slack applied to the `s ≥ 1/V` and `Gχ ≥ 1 − G` boundaries so
/// that values built exactly on them survive floating-point round-off.
pub(crate) const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    pub fn conjugate(self) -> Self {
        match self {
            Quadrature::X => Quadrature::P,
            Quadrature::P => Quadrature::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Coherent,
    Epr,
    Squeezed,
}

/// Field prepared by Alice: total variance `V` and preparation noise `s`
/// (both in shot-noise units), with `1/V ≤ s ≤ V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceModel {
    v_total: f64,
    s: f64,
    kind: SourceKind,
}

impl SourceModel {
    /// Validates `(V, s)` and infers the source kind from `s`.
    pub fn new(v_total: f64, s: f64) -> Result<Self> {
        validate_total_variance(v_total)?;
        let kind = if s == 1.0 {
            SourceKind::Coherent
        } else if (s - 1.0 / v_total).abs() <= BOUNDARY_SLACK / v_total {
            SourceKind::Epr
        } else {
            SourceKind::Squeezed
        };
        Self::checked(v_total, s, kind)
    }

    /// Coherent states: `s = 1`.
    pub fn coherent(v_total: f64) -> Result<Self> {
        validate_total_variance(v_total)?;
        Self::checked(v_total, 1.0, SourceKind::Coherent)
    }

    /// Half of an EPR pair (or a maximally squeezed modulated beam): `s = 1/V`.
    pub fn epr(v_total: f64) -> Result<Self> {
        validate_total_variance(v_total)?;
        Self::checked(v_total, 1.0 / v_total, SourceKind::Epr)
    }

    pub fn squeezed(v_total: f64, s: f64) -> Result<Self> {
        validate_total_variance(v_total)?;
        Self::checked(v_total, s, SourceKind::Squeezed)
    }

    fn checked(v_total: f64, s: f64, kind: SourceKind) -> Result<Self> {
        check_squeezing(s, v_total)?;
        if s > v_total {
            return Err(Error::domain(format!(
                "preparation noise s={s} exceeds total variance V={v_total}"
            )));
        }
        Ok(Self { v_total, s, kind })
    }

    pub fn v_total(&self) -> f64 {
        self.v_total
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    /// Variance `V − s` of Alice's known modulation, per quadrature.
    pub fn modulation_variance(&self) -> f64 {
        (self.v_total - self.s).max(0.0)
    }

    /// Whether Alice must pick a basis per symbol (and sifting discards half).
    pub fn needs_sifting(&self) -> bool {
        !matches!(self.kind, SourceKind::Coherent)
    }
}

fn validate_total_variance(v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 1.0) {
        return Err(Error::domain(format!(
            "total variance V must be finite and at least 1 (shot noise), got {v}"
        )));
    }
    Ok(())
}

/// Rejects `s < 1/V`. Accepts `V = +inf` (then any `s > 0`).
pub(crate) fn check_squeezing(s: f64, v: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!(
            "squeezing s must be positive, got {s}"
        )));
    }
    if s < (1.0 / v) * (1.0 - BOUNDARY_SLACK) {
        return Err(Error::domain(format!(
            "unphysical source: s={s} below 1/V={}",
            1.0 / v
        )));
    }
    Ok(())
}

/// Excess noise `ε = χ − (1−G)/G` referred to the channel input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessNoise {
    pub epsilon: f64,
}

impl ExcessNoise {
    /// Added noise `χ = (1−G)/G + ε` for a channel of gain `g`.
    pub fn to_added_noise(self, g: f64) -> f64 {
        loss_noise(g) + self.epsilon
    }
}

/// Vacuum noise forced by a loss `1 − G`, referred to input: `(1−G)/G`.
pub fn loss_noise(g: f64) -> f64 {
    (1.0 - g) / g
}

/// Intensity gain for a loss expressed in dB.
pub fn loss_db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn gain_to_loss_db(g: f64) -> f64 {
    // `+ 0.0` keeps G = 1 at 0 dB rather than −0 dB.
    -10.0 * g.log10() + 0.0
}

/// Per-quadrature Gaussian channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    pub g_x: f64,
    pub g_p: f64,
    pub chi_x: f64,
    pub chi_p: f64,
}

impl ChannelModel {
    pub fn new(g_x: f64, chi_x: f64, g_p: f64, chi_p: f64) -> Result<Self> {
        for (name, g) in [("g_x", g_x), ("g_p", g_p)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {g}")));
            }
        }
        for (name, chi) in [("chi_x", chi_x), ("chi_p", chi_p)] {
            if !(chi.is_finite() && chi >= 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be non-negative, got {chi}"
                )));
            }
        }
        Ok(Self {
            g_x,
            g_p,
            chi_x,
            chi_p,
        })
    }

    pub fn symmetric(g: f64, chi: f64) -> Result<Self> {
        Self::new(g, chi, g, chi)
    }

    /// Lossy channel without excess noise: `χ = (1−G)/G`.
    pub fn pure_loss(g: f64) -> Result<Self> {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::domain(format!(
                "pure-loss channel needs 0 < G <= 1, got {g}"
            )));
        }
        Self::symmetric(g, loss_noise(g))
    }

    /// Symmetric channel described by gain and excess noise.
    pub fn with_excess_noise(g: f64, excess: ExcessNoise) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::domain(format!("gain must be positive, got {g}")));
        }
        Self::symmetric(g, excess.to_added_noise(g))
    }

    pub fn gain(&self, q: Quadrature) -> f64 {
        match q {
            Quadrature::X => self.g_x,
            Quadrature::P => self.g_p,
        }
    }

    pub fn added_noise(&self, q: Quadrature) -> f64 {
        match q {
            Quadrature::X => self.chi_x,
            Quadrature::P => self.chi_p,
        }
    }

    pub fn excess_noise(&self, q: Quadrature) -> ExcessNoise {
        let g = self.gain(q);
        ExcessNoise {
            epsilon: self.added_noise(q) - loss_noise(g),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.g_x == self.g_p && self.chi_x == self.chi_p
    }

    /// For `G ≤ 1`: the added noise is at least the loss-induced vacuum noise,
    /// `Gχ ≥ 1 − G`, on both quadratures. Amplifying quadratures always pass.
    pub fn is_loss_compatible(&self) -> bool {
        [Quadrature::X, Quadrature::P].into_iter().all(|q| {
            let g = self.gain(q);
            g > 1.0 || g * self.added_noise(q) >= (1.0 - g) * (1.0 - BOUNDARY_SLACK)
        })
    }

    /// Bob's quadrature variance `G(V + χ)`.
    pub fn output_variance(&self, q: Quadrature, v_total: f64) -> f64 {
        self.gain(q) * (v_total + self.added_noise(q))
    }

    /// Unpacks a symmetric channel into `(G, χ)`.
    pub fn symmetric_params(&self) -> Result<(f64, f64)> {
        if !self.is_symmetric() {
            return Err(Error::domain("channel is not symmetric in x and p"));
        }
        Ok((self.g_x, self.chi_x))
    }
}

/// Column streams used by [`propagate`]; also reused by the cloner simulation.
pub(crate) mod streams {
    pub const MOD_X: u64 = 1;
    pub const MOD_P: u64 = 2;
    pub const PREP_X: u64 = 3;
    pub const PREP_P: u64 = 4;
    pub const NOISE_X: u64 = 5;
    pub const NOISE_P: u64 = 6;
}

/// Draws Alice's modulation, her preparation noise and the channel noise,
/// then forms `x_in = x_A + A_x` and `x_B = √G (x_in + B_x)` (same for p).
///
/// Columns: `x_A, p_A, A_x, A_p, x_in, p_in, B_x, B_p, x_B, p_B`.
pub fn propagate(
    source: &SourceModel,
    channel: &ChannelModel,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let modulation = source.modulation_variance();
    let mut batch = SampleBatch::new(seed);
    let quadrature = |q: Quadrature, batch: &mut SampleBatch| -> Result<()> {
        let (tag, ms, ps, ns) = match q {
            Quadrature::X => ("x", streams::MOD_X, streams::PREP_X, streams::NOISE_X),
            Quadrature::P => ("p", streams::MOD_P, streams::PREP_P, streams::NOISE_P),
        };
        let alice = sample_gaussian(modulation, n, derive_seed(seed, ms))?;
        let prep = sample_gaussian(source.s(), n, derive_seed(seed, ps))?;
        let noise = sample_gaussian(channel.added_noise(q), n, derive_seed(seed, ns))?;
        let amp = channel.gain(q).sqrt();
        let input: Vec<f64> = alice.iter().zip(&prep).map(|(a, e)| a + e).collect();
        let bob: Vec<f64> = input
            .iter()
            .zip(&noise)
            .map(|(i, b)| amp * (i + b))
            .collect();
        batch.insert(format!("{tag}_A"), alice)?;
        batch.insert(format!("A_{tag}"), prep)?;
        batch.insert(format!("{tag}_in"), input)?;
        batch.insert(format!("B_{tag}"), noise)?;
        batch.insert(format!("{tag}_B"), bob)?;
        Ok(())
    };
    quadrature(Quadrature::X, &mut batch)?;
    quadrature(Quadrature::P, &mut batch)?;
    Ok(batch)
}
