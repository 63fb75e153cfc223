//! Closed-form security quantities for reverse reconciliation.
//!
//! Scalar functions take the symmetric parameters `(G, χ, s, V)` in
//! shot-noise units. `V` may be `f64::INFINITY` to evaluate the
//! high-modulation limit. Eve's bound on one quadrature is built from Alice's
//! minimal conditional variance on the conjugate one, so the general
//! (asymmetric) forms take a whole [`ChannelModel`].

use serde::Serialize;

use crate::channel::{
    check_squeezing, loss_noise, ChannelModel, Quadrature, SourceKind, SourceModel,
};
use crate::error::{Error, Result};
use crate::gaussian::ShotNoise;

fn check_gain(g: f64) -> Result<()> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::domain(format!("gain G must be positive, got {g}")));
    }
    Ok(())
}

fn check_chi(chi: f64) -> Result<()> {
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(Error::domain(format!(
            "added noise chi must be non-negative, got {chi}"
        )));
    }
    Ok(())
}

fn check_v(v: f64) -> Result<()> {
    if !(v >= 1.0) {
        return Err(Error::domain(format!(
            "total variance V must be at least 1, got {v}"
        )));
    }
    Ok(())
}

/// `V_{B|A} = G(χ + s)`.
pub fn alice_conditional_variance(g: f64, chi: f64, s: f64) -> Result<f64> {
    check_gain(g)?;
    check_chi(chi)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!(
            "squeezing s must be positive, got {s}"
        )));
    }
    Ok(g * (chi + s))
}

/// `V_{B|A,min} = G(χ + 1/V)`, reached by an EPR source.
pub fn alice_min_conditional_variance(g: f64, chi: f64, v: f64) -> Result<f64> {
    check_gain(g)?;
    check_chi(chi)?;
    check_v(v)?;
    Ok(g * (chi + 1.0 / v))
}

/// Eve's minimal conditional variance on one quadrature, `1 / V_{B|A,min}`
/// evaluated with the conjugate quadrature's channel parameters.
///
/// Returns `+inf` when the conjugate minimum vanishes (noiseless channel with
/// unbounded modulation).
pub fn eve_min_conditional_variance(g_conj: f64, chi_conj: f64, v: f64) -> Result<f64> {
    let alice_min = alice_min_conditional_variance(g_conj, chi_conj, v)?;
    Ok(if alice_min == 0.0 {
        f64::INFINITY
    } else {
        1.0 / alice_min
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecurityCondition {
    /// `(Gχ + Gs)(Gχ + G/V)`; the protocol is secure iff this is below 1.
    pub product: f64,
    pub secure: bool,
}

/// Symmetric security condition `(Gχ + Gs)(Gχ + G/V) < 1`.
pub fn security_condition(g: f64, chi: f64, s: f64, v: f64) -> Result<SecurityCondition> {
    check_gain(g)?;
    check_chi(chi)?;
    check_v(v)?;
    check_squeezing(s, v)?;
    let product = (g * chi + g * s) * (g * chi + g / v);
    Ok(SecurityCondition {
        product,
        secure: product < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralSecurityCondition {
    /// Condition on Bob's x quadrature: `(G_xχ_x + G_x s)(G_pχ_p + G_p/V)`.
    pub product_x: f64,
    /// Condition on Bob's p quadrature: `(G_pχ_p + G_p s)(G_xχ_x + G_x/V)`.
    pub product_p: f64,
    /// A key can be distilled when either quadrature satisfies its condition.
    pub secure: bool,
}

/// Two-quadrature security conditions for an asymmetric channel.
pub fn security_condition_general(
    channel: &ChannelModel,
    s: f64,
    v: f64,
) -> Result<GeneralSecurityCondition> {
    check_v(v)?;
    check_squeezing(s, v)?;
    let product = |q: Quadrature| {
        let c = q.conjugate();
        let own = channel.gain(q) * (channel.added_noise(q) + s);
        let conj = channel.gain(c) * (channel.added_noise(c) + 1.0 / v);
        own * conj
    };
    let product_x = product(Quadrature::X);
    let product_p = product(Quadrature::P);
    Ok(GeneralSecurityCondition {
        product_x,
        product_p,
        secure: product_x < 1.0 || product_p < 1.0,
    })
}

/// `½·log2(1/x)`, with the zero at `x = 1` reported as `+0`.
fn half_log_inverse(x: f64) -> f64 {
    -0.5 * x.log2() + 0.0
}

/// Secret information per key-bearing symbol, `−½·log2((Gχ+G/V)(Gχ+Gs))`.
pub fn delta_i(g: f64, chi: f64, s: f64, v: f64) -> Result<f64> {
    let cond = security_condition(g, chi, s, v)?;
    Ok(half_log_inverse(cond.product))
}

/// EPR rate per emitted symbol, `½·log2(1/(Gχ + G/V))`.
///
/// The associated per-sifted-symbol rate is twice this: only half the symbols
/// survive basis agreement.
pub fn delta_i_epr(g: f64, chi: f64, v: f64) -> Result<f64> {
    check_gain(g)?;
    check_chi(chi)?;
    check_v(v)?;
    Ok(half_log_inverse(g * chi + g / v))
}

/// Coherent-state rate, `½·log2(1/((Gχ + G/V)(Gχ + G)))`; identical to
/// [`delta_i`] with `s = 1`.
pub fn delta_i_coherent(g: f64, chi: f64, v: f64) -> Result<f64> {
    delta_i(g, chi, 1.0, v)
}

/// High-modulation bound on the added noise `Gχ`: `½(√(G²s² + 4) − Gs)`.
pub fn max_tolerable_added_noise(g: f64, s: f64) -> Result<f64> {
    check_gain(g)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!(
            "squeezing s must be positive, got {s}"
        )));
    }
    let gs = g * s;
    // Equivalent to ½(√(gs² + 4) − gs) without cancellation for large gs.
    Ok(2.0 / ((gs * gs + 4.0).sqrt() + gs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "s")]
pub enum Protocol {
    Coherent,
    Epr,
    Squeezed(f64),
}

impl Protocol {
    pub fn from_source(source: &SourceModel) -> Self {
        match source.kind() {
            SourceKind::Coherent => Protocol::Coherent,
            SourceKind::Epr => Protocol::Epr,
            SourceKind::Squeezed => Protocol::Squeezed(source.s()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Coherent => "coherent",
            Protocol::Epr => "epr",
            Protocol::Squeezed(_) => "squeezed",
        }
    }

    /// Fraction of emitted symbols that carry key after basis sifting.
    pub fn sift_factor(&self) -> f64 {
        match self {
            Protocol::Coherent => 1.0,
            Protocol::Epr | Protocol::Squeezed(_) => 0.5,
        }
    }

    /// Alice's preparation noise for a source of total variance `v`.
    pub fn squeezing(&self, v: f64) -> f64 {
        match *self {
            Protocol::Coherent => 1.0,
            Protocol::Epr => 1.0 / v,
            Protocol::Squeezed(s) => s,
        }
    }

    pub fn source(&self, v: f64) -> Result<SourceModel> {
        match *self {
            Protocol::Coherent => SourceModel::coherent(v),
            Protocol::Epr => SourceModel::epr(v),
            Protocol::Squeezed(s) => SourceModel::squeezed(v, s),
        }
    }
}

/// Tolerable excess noise `ε` in the small-gain limit: `(V−1)/(2V)` for
/// coherent states, `(V−1)/V` for EPR beams (exact at every `G ≤ 1`).
pub fn excess_noise_threshold(v: f64, protocol: Protocol) -> Result<f64> {
    if !(v > 1.0) {
        return Err(Error::domain(format!(
            "excess-noise threshold needs V > 1 (some modulation), got {v}"
        )));
    }
    match protocol {
        Protocol::Coherent => Ok((v - 1.0) / (2.0 * v)),
        Protocol::Epr => Ok((v - 1.0) / v),
        Protocol::Squeezed(_) => Err(Error::domain(
            "closed-form excess-noise threshold exists only for coherent and EPR sources",
        )),
    }
}

/// Exact zero crossing in `ε` of the secret rate at gain `g`, found by
/// bisection. `g` must be in `(0, 1]`.
pub fn excess_noise_root(g: f64, v: f64, protocol: Protocol) -> Result<f64> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::domain(format!(
            "excess-noise root needs 0 < G <= 1, got {g}"
        )));
    }
    if !(v > 1.0 && v.is_finite()) {
        return Err(Error::domain(format!(
            "excess-noise root needs finite V > 1, got {v}"
        )));
    }
    let s = protocol.squeezing(v);
    let rate = |eps: f64| delta_i(g, loss_noise(g) + eps, s, v);
    let mut lo = 0.0;
    if rate(lo)? <= 0.0 {
        return Err(Error::domain(
            "protocol is insecure even without excess noise",
        ));
    }
    let mut hi = 1.0;
    while rate(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::domain("no excess-noise root below 1e12"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Strong-loss limit of the pure-loss rate, `G / (2 ln 2)`.
pub fn high_loss_asymptote(g: f64) -> f64 {
    g / (2.0 * std::f64::consts::LN_2)
}

/// Ideal BB84 secret rate `½·G·n̄` bits per time slot.
pub fn bb84_reference_rate(g: f64, n_bar: f64) -> Result<f64> {
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::domain(format!(
            "BB84 reference needs 0 < G <= 1, got {g}"
        )));
    }
    if !(n_bar.is_finite() && n_bar >= 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be non-negative, got {n_bar}"
        )));
    }
    Ok(0.5 * g * n_bar)
}

/// Direct reconciliation is only secure above 50 % transmission.
pub fn dr_loss_limit_secure(g: f64) -> bool {
    g > 0.5
}

/// Side-by-side rates for a pure-loss line, with throughput at a given
/// symbol rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateComparison {
    pub g: f64,
    pub v: f64,
    pub symbol_rate_hz: f64,
    pub delta_i_coherent: f64,
    pub delta_i_epr: f64,
    pub high_loss_asymptote: f64,
    pub bb84_single_photon: f64,
    pub bb84_weak_pulse: f64,
    pub coherent_bits_per_second: f64,
    pub epr_bits_per_second: f64,
    pub bb84_single_photon_bits_per_second: f64,
    pub bb84_weak_pulse_bits_per_second: f64,
}

/// Mean photon number of the attenuated-pulse BB84 reference.
pub const WEAK_PULSE_PHOTONS: f64 = 0.1;

impl RateComparison {
    /// `chi` defaults to pure loss when `None`.
    pub fn compute(g: f64, chi: Option<f64>, v: f64, symbol_rate_hz: f64) -> Result<Self> {
        if !(symbol_rate_hz.is_finite() && symbol_rate_hz > 0.0) {
            return Err(Error::domain(format!(
                "symbol rate must be positive, got {symbol_rate_hz}"
            )));
        }
        check_gain(g)?;
        let chi = chi.unwrap_or_else(|| loss_noise(g));
        let coh = delta_i_coherent(g, chi, v)?;
        let epr = delta_i_epr(g, chi, v)?;
        let single = bb84_reference_rate(g, 1.0)?;
        let weak = bb84_reference_rate(g, WEAK_PULSE_PHOTONS)?;
        Ok(Self {
            g,
            v,
            symbol_rate_hz,
            delta_i_coherent: coh,
            delta_i_epr: epr,
            high_loss_asymptote: high_loss_asymptote(g),
            bb84_single_photon: single,
            bb84_weak_pulse: weak,
            coherent_bits_per_second: coh.max(0.0) * symbol_rate_hz,
            epr_bits_per_second: epr.max(0.0) * symbol_rate_hz,
            bb84_single_photon_bits_per_second: single * symbol_rate_hz,
            bb84_weak_pulse_bits_per_second: weak * symbol_rate_hz,
        })
    }
}

/// Analytic conditional variances on one of Bob's quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureVariances {
    pub b_given_a: f64,
    pub b_given_a_min: f64,
    /// Built from the conjugate quadrature's `b_given_a_min`.
    pub b_given_e_min: f64,
}

/// Monte Carlo counterparts of the analytic variances (x quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalVariances {
    pub b_given_a: f64,
    pub b_given_e: f64,
    pub n: usize,
}

/// `V_{B|A}`, `V_{B|A,min}` and `V_{B|E,min}` for both quadratures, in
/// absolute units (multiples of `n0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalVarianceSet {
    pub n0: f64,
    pub x: QuadratureVariances,
    pub p: QuadratureVariances,
    pub empirical: Option<EmpiricalVariances>,
}

impl ConditionalVarianceSet {
    pub fn compute(
        channel: &ChannelModel,
        source: &SourceModel,
        shot_noise: ShotNoise,
    ) -> Result<Self> {
        let v = source.v_total();
        let n0 = shot_noise.n0();
        let quad = |q: Quadrature| -> Result<QuadratureVariances> {
            let c = q.conjugate();
            let b_given_a =
                alice_conditional_variance(channel.gain(q), channel.added_noise(q), source.s())?;
            let b_given_a_min =
                alice_min_conditional_variance(channel.gain(q), channel.added_noise(q), v)?;
            let b_given_e_min =
                eve_min_conditional_variance(channel.gain(c), channel.added_noise(c), v)?;
            Ok(QuadratureVariances {
                b_given_a: b_given_a * n0,
                b_given_a_min: b_given_a_min * n0,
                b_given_e_min: b_given_e_min * n0,
            })
        };
        Ok(Self {
            n0,
            x: quad(Quadrature::X)?,
            p: quad(Quadrature::P)?,
            empirical: None,
        })
    }

    pub fn with_empirical(mut self, empirical: EmpiricalVariances) -> Self {
        self.empirical = Some(empirical);
        self
    }

    pub fn quadrature(&self, q: Quadrature) -> &QuadratureVariances {
        match q {
            Quadrature::X => &self.x,
            Quadrature::P => &self.p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Secure,
    Insecure,
    /// The security product equals 1 up to round-off: no key, no margin.
    InsecureBoundary,
}

/// Rates on one of Bob's quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureRate {
    pub product: f64,
    pub i_ba: f64,
    pub i_be: f64,
    pub delta_i: f64,
}

/// Mutual informations and secret rate for one protocol over one channel.
///
/// `delta_i` is per key-bearing (sifted) symbol; `secret_rate` multiplies it by
/// the sift factor to give bits per emitted symbol. For asymmetric channels
/// the key is taken on the better quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub protocol: Protocol,
    pub channel: ChannelModel,
    pub v: f64,
    pub s: f64,
    pub i_ba: f64,
    pub i_be: f64,
    pub delta_i: f64,
    pub sift_factor: f64,
    pub secret_rate: f64,
    pub quadrature: Quadrature,
    pub x: QuadratureRate,
    pub p: QuadratureRate,
    pub secure: bool,
    pub verdict: Verdict,
    /// Set when a non-finite value had to be clamped to ±`f64::MAX`.
    pub unbounded: bool,
}

fn clamp(value: f64, unbounded: &mut bool) -> f64 {
    if value.is_finite() {
        value
    } else {
        *unbounded = true;
        if value > 0.0 {
            f64::MAX
        } else {
            -f64::MAX
        }
    }
}

impl KeyRateReport {
    pub fn evaluate(channel: &ChannelModel, source: &SourceModel) -> Result<Self> {
        Self::evaluate_as(channel, source.v_total(), Protocol::from_source(source))
    }

    /// Report for `protocol` with a source of total variance `v`.
    pub fn evaluate_as(channel: &ChannelModel, v: f64, protocol: Protocol) -> Result<Self> {
        let s = protocol.squeezing(v);
        check_v(v)?;
        check_squeezing(s, v)?;
        let cond = security_condition_general(channel, s, v)?;
        let mut unbounded = false;
        let mut rate = |q: Quadrature, product: f64| -> Result<QuadratureRate> {
            let g = channel.gain(q);
            let chi = channel.added_noise(q);
            let c = q.conjugate();
            let signal = channel.output_variance(q, v);
            let v_ba = alice_conditional_variance(g, chi, s)?;
            let v_be = eve_min_conditional_variance(channel.gain(c), channel.added_noise(c), v)?;
            let i_ba = crate::gaussian::shannon_rate(signal, v_ba)?;
            let i_be = crate::gaussian::shannon_rate(signal, v_be)?;
            Ok(QuadratureRate {
                product,
                i_ba: clamp(i_ba, &mut unbounded),
                i_be: clamp(i_be, &mut unbounded),
                delta_i: clamp(half_log_inverse(product), &mut unbounded),
            })
        };
        let x = rate(Quadrature::X, cond.product_x)?;
        let p = rate(Quadrature::P, cond.product_p)?;
        let (quadrature, best) = if p.delta_i > x.delta_i {
            (Quadrature::P, p)
        } else {
            (Quadrature::X, x)
        };
        let secure = best.product < 1.0;
        let verdict = if secure {
            Verdict::Secure
        } else if (best.product - 1.0).abs() <= 1e-12 {
            Verdict::InsecureBoundary
        } else {
            Verdict::Insecure
        };
        let sift_factor = protocol.sift_factor();
        Ok(Self {
            protocol,
            channel: *channel,
            v,
            s,
            i_ba: best.i_ba,
            i_be: best.i_be,
            delta_i: best.delta_i,
            sift_factor,
            secret_rate: sift_factor * best.delta_i,
            quadrature,
            x,
            p,
            secure,
            verdict,
            unbounded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn alice_variance_examples() {
        assert_eq!(alice_conditional_variance(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(alice_conditional_variance(0.5, 1.0, 1.0).unwrap(), 1.0);
        assert!(close(
            alice_conditional_variance(0.01, 99.0, 1.0).unwrap(),
            1.0,
            1e-12
        ));
        assert!(alice_conditional_variance(0.0, 1.0, 1.0).is_err());
        assert!(alice_conditional_variance(0.5, -1.0, 1.0).is_err());
        assert!(alice_conditional_variance(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn alice_min_examples() {
        assert_eq!(alice_min_conditional_variance(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(close(
            alice_min_conditional_variance(0.5, 1.0, 10.0).unwrap(),
            0.55,
            1e-15
        ));
        assert_eq!(
            alice_min_conditional_variance(0.5, 1.0, f64::INFINITY).unwrap(),
            0.5
        );
        assert!(alice_min_conditional_variance(0.5, 1.0, 0.9).is_err());
    }

    #[test]
    fn eve_min_examples() {
        assert_eq!(
            eve_min_conditional_variance(1.0, 0.0, f64::INFINITY).unwrap(),
            f64::INFINITY
        );
        assert!(close(
            eve_min_conditional_variance(0.5, 1.0, 10.0).unwrap(),
            1.0 / 0.55,
            1e-12
        ));
        let a = alice_min_conditional_variance(0.3, 2.0, 7.0).unwrap();
        let e = eve_min_conditional_variance(0.3, 2.0, 7.0).unwrap();
        assert!(close(a * e, 1.0, 1e-15));
    }

    #[test]
    fn security_condition_examples() {
        let c = security_condition(0.5, 1.0, 1.0, 10.0).unwrap();
        assert!(close(c.product, 0.55, 1e-15) && c.secure);
        let c = security_condition(0.01, 99.0, 1.0, 10.0).unwrap();
        assert!(close(c.product, 0.991, 1e-12) && c.secure);
        let c = security_condition(1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(c.product, 1.0);
        assert!(!c.secure);
        assert!(security_condition(0.5, 1.0, 0.05, 10.0).is_err());
    }

    #[test]
    fn delta_i_examples() {
        assert_eq!(delta_i(1.0, 0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(close(
            delta_i(0.01, 99.0, 1.0, 10.0).unwrap(),
            6.52e-3,
            1e-5
        ));
        let expected = -0.5 * (0.55f64 * 0.55).log2();
        assert!(close(
            delta_i(0.5, 1.0, 0.1, 10.0).unwrap(),
            expected,
            1e-12
        ));
        assert!(close(expected, 0.862, 1e-3));
    }

    #[test]
    fn epr_examples() {
        let pure = |g: f64, v: f64| delta_i_epr(g, loss_noise(g), v).unwrap();
        let direct = |g: f64, v: f64| 0.5 * (1.0 / (1.0 - g * (1.0 - 1.0 / v))).log2();
        for g in [0.001, 0.1, 0.5, 0.99, 1.0] {
            assert!(close(pure(g, 10.0), direct(g, 10.0), 1e-12));
            assert!(pure(g, 10.0) >= 0.0);
        }
        assert!(close(
            pure(0.01, 10.0),
            0.5 * (1.0f64 / 0.991).log2(),
            1e-12
        ));
        assert_eq!(delta_i_epr(1.0, 0.0, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn coherent_examples() {
        assert!(close(
            delta_i_coherent(0.01, 99.0, 10.0).unwrap(),
            6.5e-3,
            2e-4
        ));
        for g in [0.02, 0.3, 0.9] {
            let chi = loss_noise(g);
            assert!(close(
                delta_i_coherent(g, chi, 10.0).unwrap(),
                delta_i_epr(g, chi, 10.0).unwrap(),
                1e-12
            ));
        }
        let r = delta_i_coherent(0.5, 1.5, 10.0).unwrap();
        assert!(close(r, 0.0, 1e-15));
        // ΔI_coh = ΔI_EPR − ½ log2 G(1+χ)
        let (g, chi, v) = (0.4, 2.3, 12.0);
        let lhs = delta_i_coherent(g, chi, v).unwrap();
        let rhs = delta_i_epr(g, chi, v).unwrap() - 0.5 * (g * (1.0 + chi)).log2();
        assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn tolerable_noise() {
        assert!(close(
            max_tolerable_added_noise(1e-9, 1.0).unwrap(),
            1.0,
            1e-9
        ));
        assert!(close(
            max_tolerable_added_noise(1.0, 1.0).unwrap(),
            0.5 * (5f64.sqrt() - 1.0),
            1e-15
        ));
        assert!(max_tolerable_added_noise(1.0, 0.0).is_err());
    }

    #[test]
    fn tolerable_noise_decreases_with_gs() {
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let gs = 1e-3 * 1.05f64.powi(i);
            let b = max_tolerable_added_noise(gs, 1.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn thresholds() {
        assert!(close(
            excess_noise_threshold(10.0, Protocol::Coherent).unwrap(),
            0.45,
            1e-15
        ));
        assert!(close(
            excess_noise_threshold(10.0, Protocol::Epr).unwrap(),
            0.9,
            1e-15
        ));
        assert!(close(
            excess_noise_threshold(1e12, Protocol::Coherent).unwrap(),
            0.5,
            1e-9
        ));
        assert!(close(
            excess_noise_threshold(1e12, Protocol::Epr).unwrap(),
            1.0,
            1e-9
        ));
        assert!(excess_noise_threshold(1.0, Protocol::Epr).is_err());
        assert!(excess_noise_threshold(10.0, Protocol::Squeezed(0.5)).is_err());
    }

    #[test]
    fn roots() {
        for g in [0.01, 0.5, 0.9] {
            let r = excess_noise_root(g, 10.0, Protocol::Epr).unwrap();
            assert!(close(r, 0.9, 1e-9), "g={g} root={r}");
        }
        let r = excess_noise_root(0.01, 10.0, Protocol::Coherent).unwrap();
        assert!(close(r, 0.45, 0.005), "root={r}");
        assert!(excess_noise_root(1.5, 10.0, Protocol::Epr).is_err());
    }

    #[test]
    fn asymptote_and_bb84() {
        assert!(close(high_loss_asymptote(0.01), 7.2135e-3, 1e-6));
        assert!(close(high_loss_asymptote(0.001), 7.2135e-4, 1e-7));
        assert_eq!(bb84_reference_rate(0.01, 1.0).unwrap(), 5e-3);
        assert!(close(bb84_reference_rate(0.01, 0.1).unwrap(), 5e-4, 1e-18));
        assert_eq!(bb84_reference_rate(0.01, 0.0).unwrap(), 0.0);
        assert!(bb84_reference_rate(1.1, 1.0).is_err());
    }

    #[test]
    fn comparison_at_worked_point() {
        let c = RateComparison::compute(0.01, None, 10.0, 2e6).unwrap();
        assert!(c.coherent_bits_per_second > 1e4);
        assert_eq!(c.bb84_single_photon, 5e-3);
        assert!((c.high_loss_asymptote - 7.21e-3).abs() < 1e-5);
        assert!(c.delta_i_coherent > c.bb84_single_photon);
        assert!(RateComparison::compute(0.01, None, 10.0, 0.0).is_err());
    }

    #[test]
    fn direct_reconciliation_limit() {
        assert!(dr_loss_limit_secure(0.6));
        assert!(!dr_loss_limit_secure(0.5));
        assert!(!dr_loss_limit_secure(0.01));
    }

    #[test]
    fn report_matches_scalar_forms() {
        let channel = ChannelModel::pure_loss(0.01).unwrap();
        let r = KeyRateReport::evaluate(&channel, &SourceModel::coherent(10.0).unwrap()).unwrap();
        assert!(close(
            r.delta_i,
            delta_i_coherent(0.01, channel.chi_x, 10.0).unwrap(),
            1e-15
        ));
        assert!(close(r.i_ba - r.i_be, r.delta_i, 1e-12));
        assert_eq!(r.secret_rate, r.delta_i);
        assert!(r.secure);
        assert_eq!(r.verdict, Verdict::Secure);

        let r = KeyRateReport::evaluate_as(
            &ChannelModel::symmetric(1.0, 0.0).unwrap(),
            4.0,
            Protocol::Epr,
        )
        .unwrap();
        assert!(close(r.delta_i, 2.0, 1e-12));
        assert!(close(r.secret_rate, 1.0, 1e-12));
    }

    #[test]
    fn boundary_verdict() {
        let c = ChannelModel::symmetric(0.5, 1.5).unwrap();
        let r = KeyRateReport::evaluate_as(&c, 10.0, Protocol::Coherent).unwrap();
        assert!(!r.secure);
        assert_eq!(r.verdict, Verdict::InsecureBoundary);
        let c = ChannelModel::symmetric(0.5, 3.0).unwrap();
        let r = KeyRateReport::evaluate_as(&c, 10.0, Protocol::Coherent).unwrap();
        assert_eq!(r.verdict, Verdict::Insecure);
        assert!(r.delta_i < 0.0);
    }

    #[test]
    fn asymmetric_channel_uses_better_quadrature() {
        let c = ChannelModel::new(0.5, 1.0, 0.5, 4.0).unwrap();
        let cond = security_condition_general(&c, 1.0, 10.0).unwrap();
        // x: (0.5 + 0.5)(2 + 0.05) = 2.05; p: (2 + 0.5)(0.5 + 0.05) = 1.375
        assert!(close(cond.product_x, 2.05, 1e-12));
        assert!(close(cond.product_p, 1.375, 1e-12));
        assert!(!cond.secure);
        let c = ChannelModel::new(0.5, 1.0, 0.5, 1.2).unwrap();
        let r = KeyRateReport::evaluate_as(&c, 10.0, Protocol::Coherent).unwrap();
        let cond = security_condition_general(&c, 1.0, 10.0).unwrap();
        assert_eq!(r.secure, cond.secure);
        assert_eq!(r.delta_i, r.x.delta_i.max(r.p.delta_i));
        // Symmetric reduction
        let sym = ChannelModel::symmetric(0.3, 2.5).unwrap();
        let g = security_condition_general(&sym, 0.4, 8.0).unwrap();
        let s = security_condition(0.3, 2.5, 0.4, 8.0).unwrap();
        assert_eq!(g.product_x, s.product);
        assert_eq!(g.product_p, s.product);
    }

    #[test]
    fn variance_set_cross_pairing() {
        let c = ChannelModel::new(0.4, 2.0, 0.7, 0.6).unwrap();
        let src = SourceModel::squeezed(9.0, 0.5).unwrap();
        let set = ConditionalVarianceSet::compute(&c, &src, ShotNoise::new(2.0).unwrap()).unwrap();
        assert!(close(set.x.b_given_a_min * set.p.b_given_e_min, 4.0, 1e-12));
        assert!(close(set.p.b_given_a_min * set.x.b_given_e_min, 4.0, 1e-12));
        assert!(set.x.b_given_a >= set.x.b_given_a_min);
        assert!(set.p.b_given_a >= set.p.b_given_a_min);
    }
}
