//! Asymptotic secure key rate per pulse.

use serde::Serialize;

use crate::error::{ensure, Result};
use crate::numeric::entropy_bits;
use crate::tagging::{rtag_coherent, TagParams};

/// Binary entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&x), "x", || {
        format!("binary entropy argument {x} is outside [0, 1]")
    })?;
    Ok(entropy_bits(x))
}

/// Error-correction cost as a fraction of the sifted key, given the bit error rate.
pub trait ErrorCorrection {
    fn cost(&self, bit_error_rate: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ErrorCorrection for F {
    fn cost(&self, bit_error_rate: f64) -> f64 {
        self(bit_error_rate)
    }
}

/// `inefficiency * h(e)`; `inefficiency = 1` is the Shannon limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShannonLimit {
    pub inefficiency: f64,
}

impl Default for ShannonLimit {
    fn default() -> Self {
        Self { inefficiency: 1.0 }
    }
}

impl ErrorCorrection for ShannonLimit {
    fn cost(&self, bit_error_rate: f64) -> f64 {
        self.inefficiency * entropy_bits(bit_error_rate)
    }
}

/// Privacy-amplification fraction, or infeasibility when `rtag > Q - 2 E1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyAmplification {
    Feasible(f64),
    Infeasible,
}

impl PrivacyAmplification {
    pub fn fraction(self) -> Option<f64> {
        match self {
            Self::Feasible(f) => Some(f),
            Self::Infeasible => None,
        }
    }
}

/// `rtag/Q + (1 - rtag/Q) h(E1 / (Q - rtag))` on the feasible region.
pub fn privacy_amp_fraction(q: f64, e1: f64, rtag: f64) -> Result<PrivacyAmplification> {
    ensure(q > 0.0 && q.is_finite(), "Q", || {
        format!("must be > 0, got {q}")
    })?;
    ensure(e1 >= 0.0, "E1", || format!("must be >= 0, got {e1}"))?;
    ensure(rtag >= 0.0, "rtag", || format!("must be >= 0, got {rtag}"))?;
    if rtag > q - 2.0 * e1 {
        return Ok(PrivacyAmplification::Infeasible);
    }
    let untagged = q - rtag;
    let phase_error = if untagged > 0.0 { e1 / untagged } else { 0.0 };
    let tagged_share = rtag / q;
    Ok(PrivacyAmplification::Feasible(
        tagged_share + (1.0 - tagged_share) * entropy_bits(phase_error),
    ))
}

/// Yield `Q = 1 - exp(-(L-1) mu eta)` of a lossy channel with `L - 1` valid timings.
pub fn channel_q(block_len: usize, mu: f64, eta: f64) -> f64 {
    -(-((block_len - 1) as f64) * mu * eta).exp_m1()
}

/// Observed parameters of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateInputs {
    #[serde(rename = "L")]
    pub block_len: usize,
    pub mu: f64,
    pub p0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
}

impl RateInputs {
    /// Error weights `E0`, `E1` normalized as the sifted yield `Q`.
    pub fn new(block_len: usize, mu: f64, p0: f64, q: f64, e0: f64, e1: f64) -> Result<Self> {
        TagParams::new(block_len, mu)?;
        ensure(mu > 0.0, "mu", || format!("must be > 0, got {mu}"))?;
        ensure(p0 > 0.0 && p0 <= 1.0, "p0", || {
            format!("must be in (0, 1], got {p0}")
        })?;
        ensure((0.0..=1.0).contains(&q), "Q", || {
            format!("must be in [0, 1], got {q}")
        })?;
        ensure(e0 >= 0.0 && e0 <= q, "E0", || {
            format!("must be in [0, Q = {q}], got {e0}")
        })?;
        ensure(e1 >= 0.0 && e1 <= q, "E1", || {
            format!("must be in [0, Q = {q}], got {e1}")
        })?;
        Ok(Self {
            block_len,
            mu,
            p0,
            q,
            e0,
            e1,
        })
    }

    /// From bit error rates `E0/Q` and `E1/Q`.
    pub fn from_error_rates(
        block_len: usize,
        mu: f64,
        p0: f64,
        q: f64,
        data_error_rate: f64,
        check_error_rate: f64,
    ) -> Result<Self> {
        ensure((0.0..=1.0).contains(&data_error_rate), "error_rate", || {
            format!("data-basis error rate must be in [0, 1], got {data_error_rate}")
        })?;
        ensure(
            (0.0..=1.0).contains(&check_error_rate),
            "error_rate",
            || format!("check-basis error rate must be in [0, 1], got {check_error_rate}"),
        )?;
        Self::new(
            block_len,
            mu,
            p0,
            q,
            data_error_rate * q,
            check_error_rate * q,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub rtag: f64,
    #[serde(rename = "fPA")]
    pub f_pa: f64,
    #[serde(rename = "fEC")]
    pub f_ec: f64,
    pub rate_per_pulse: f64,
    pub feasible: bool,
    pub mu_used: f64,
}

impl KeyRateReport {
    pub(crate) fn zero(rtag: f64, mu_used: f64) -> Self {
        Self {
            rtag,
            f_pa: 1.0,
            f_ec: 0.0,
            rate_per_pulse: 0.0,
            feasible: false,
            mu_used,
        }
    }
}

/// `R_L = (p0^2/L) [(Q - rtag)(1 - h(E1/(Q - rtag))) - Q fEC(E0/Q)]`,
/// with `rtag` from the coherent-source closed form.
pub fn key_rate(inputs: &RateInputs, ec: &impl ErrorCorrection) -> Result<KeyRateReport> {
    let rtag = rtag_coherent(&TagParams::new(inputs.block_len, inputs.mu)?);
    key_rate_with_rtag(inputs, rtag, ec)
}

/// [`key_rate`] with an externally supplied tagging probability.
pub fn key_rate_with_rtag(
    inputs: &RateInputs,
    rtag: f64,
    ec: &impl ErrorCorrection,
) -> Result<KeyRateReport> {
    let RateInputs {
        block_len,
        mu,
        p0,
        q,
        e0,
        e1,
    } = *inputs;
    if q == 0.0 {
        return Ok(KeyRateReport::zero(rtag, mu));
    }
    let f_pa = match privacy_amp_fraction(q, e1, rtag)? {
        PrivacyAmplification::Feasible(f) => f,
        PrivacyAmplification::Infeasible => return Ok(KeyRateReport::zero(rtag, mu)),
    };
    let f_ec = ec.cost(e0 / q);
    let untagged = q - rtag;
    let phase_term = if untagged > 0.0 {
        untagged * (1.0 - entropy_bits(e1 / untagged))
    } else {
        0.0
    };
    let rate = p0 * p0 / block_len as f64 * (phase_term - q * f_ec);
    let feasible = rate > 0.0;
    Ok(KeyRateReport {
        rtag,
        f_pa,
        f_ec,
        rate_per_pulse: rate.max(0.0),
        feasible,
        mu_used: mu,
    })
}
