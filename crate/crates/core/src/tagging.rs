//! Photon configurations and the tagging probability of an emitted block.
//!
//! A block of `L` pulses is *untagged* when no pulse carries two or more
//! photons and no two neighboring pulses both carry a photon. The tagging
//! probability `r_tag` is the probability mass of all other configurations.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{domain, ensure, Error, Result};
use crate::numeric::KahanSum;

/// Default per-pulse photon cap for [`rtag_bruteforce`].
pub const DEFAULT_PHOTON_CAP: u32 = 8;
/// Default number of configurations [`rtag_bruteforce`] may enumerate.
pub const DEFAULT_WORK_LIMIT: u128 = 100_000_000;

/// Residue of `1 - sum` below this magnitude is treated as zero.
const NEGATIVE_RESIDUE: f64 = 1e-12;
/// Tolerance on the total probability of a [`SourceDistribution`].
const NORMALIZATION_TOL: f64 = 1e-12;

/// Photon numbers of the `L` pulses of one block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhotonConfig(Vec<u32>);

impl PhotonConfig {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        ensure(counts.len() >= 2, "L", || {
            format!("a block needs at least 2 pulses, got {}", counts.len())
        })?;
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn block_len(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn is_untagged(&self) -> bool {
        counts_untagged(&self.0)
    }
}

impl fmt::Display for PhotonConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// True iff no pulse holds two photons and no neighboring pulses both hold one.
pub fn is_untagged_config(config: &PhotonConfig) -> bool {
    config.is_untagged()
}

pub(crate) fn counts_untagged(counts: &[u32]) -> bool {
    counts.iter().all(|&c| c <= 1) && counts.windows(2).all(|w| w[0] + w[1] <= 1)
}

/// Block size and mean photon number per pulse of a coherent source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagParams {
    block_len: usize,
    mu: f64,
}

impl TagParams {
    /// `mu = 0` is accepted as the vacuum limit.
    pub fn new(block_len: usize, mu: f64) -> Result<Self> {
        ensure(block_len >= 2, "L", || {
            format!("must be >= 2, got {block_len}")
        })?;
        ensure(mu.is_finite() && mu >= 0.0, "mu", || {
            format!("must be a finite non-negative number, got {mu}")
        })?;
        Ok(Self { block_len, mu })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Largest photon number an untagged block of `block_len` pulses can hold.
pub fn max_untagged_photons(block_len: usize) -> usize {
    block_len.div_ceil(2)
}

/// Number of untagged configurations of `block_len` pulses holding `m` photons,
/// `(L+1-m)! / (m! (L+1-2m)!)`, in exact integer arithmetic.
pub fn count_untagged_configs(block_len: usize, m: usize) -> Result<u128> {
    ensure(block_len >= 2, "L", || {
        format!("must be >= 2, got {block_len}")
    })?;
    let m_max = max_untagged_photons(block_len);
    ensure(m <= m_max, "m", || {
        format!("no untagged configuration of {block_len} pulses holds {m} > {m_max} photons")
    })?;
    binomial(block_len + 1 - m, m)
}

fn binomial(n: usize, k: usize) -> Result<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("untagged configuration count"))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// Tagging probability of a phase-randomized coherent block,
/// `1 - e^{-muL} sum_m mu^m (L+1-m)!/(m!(L+1-2m)!)`.
///
/// The sum is taken in log space and the final subtraction goes through
/// `expm1`, so small values of `r_tag` keep their relative precision.
pub fn rtag_coherent(p: &TagParams) -> f64 {
    let (l, mu) = (p.block_len, p.mu);
    if mu == 0.0 {
        return 0.0;
    }
    let ln_mu = mu.ln();
    let log_terms: Vec<f64> = (0..=max_untagged_photons(l))
        .map(|m| m as f64 * ln_mu + ln_binomial((l + 1 - m) as u64, m as u64))
        .collect();
    let peak = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let ln_sum = if peak <= 0.0 {
        // m = 0 dominates: ln(1 + rest) keeps the small terms.
        let mut rest = KahanSum::default();
        log_terms[1..].iter().for_each(|t| rest.add(t.exp()));
        rest.value().ln_1p()
    } else {
        let mut acc = KahanSum::default();
        log_terms.iter().for_each(|t| acc.add((t - peak).exp()));
        peak + acc.value().ln()
    };

    let r = -(ln_sum - mu * l as f64).exp_m1();
    clamp_probability(r)
}

fn clamp_probability(r: f64) -> f64 {
    if r < 0.0 {
        debug_assert!(r > -NEGATIVE_RESIDUE, "negative tagging probability {r}");
        0.0
    } else {
        r.min(1.0)
    }
}

/// Options for [`rtag_bruteforce`].
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub photon_cap: u32,
    pub work_limit: u128,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            photon_cap: DEFAULT_PHOTON_CAP,
            work_limit: DEFAULT_WORK_LIMIT,
        }
    }
}

/// Result of exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BruteForce {
    /// Tagged mass among configurations with every pulse at most `photon_cap`.
    pub value: f64,
    /// Mass of the configurations that were not enumerated.
    pub truncation_bound: f64,
    pub configs_enumerated: u128,
}

/// Tagging probability by enumerating every configuration with at most
/// `photon_cap` photons per pulse under independent Poisson(mu) pulses.
///
/// Independent of the closed form in [`rtag_coherent`]; used as its oracle.
pub fn rtag_bruteforce(p: &TagParams, opts: OracleOptions) -> Result<BruteForce> {
    ensure(opts.photon_cap >= 2, "photon_cap", || {
        format!("must be >= 2, got {}", opts.photon_cap)
    })?;
    let branches = u128::from(opts.photon_cap) + 1;
    let requested = u32::try_from(p.block_len)
        .ok()
        .and_then(|l| branches.checked_pow(l))
        .unwrap_or(u128::MAX);
    if requested > opts.work_limit {
        return Err(Error::WorkLimit {
            requested,
            limit: opts.work_limit,
        });
    }

    let pmf = poisson_pmf(p.mu, opts.photon_cap);
    let enumerator = Enumerator {
        pmf: &pmf,
        block_len: p.block_len,
    };
    // Parallel over the photon number of the first pulse; the partial sums
    // are reduced in a fixed order.
    let partial: Vec<f64> = (0..=opts.photon_cap)
        .into_par_iter()
        .map(|k| pmf[k as usize] * enumerator.tagged_mass(1, k, k >= 2))
        .collect();
    let mut value = KahanSum::default();
    partial.into_iter().for_each(|v| value.add(v));

    let tail = poisson_upper_tail(p.mu, opts.photon_cap);
    let truncation_bound = -(p.block_len as f64 * (-tail).ln_1p()).exp_m1();

    Ok(BruteForce {
        value: value.value(),
        truncation_bound,
        configs_enumerated: requested,
    })
}

struct Enumerator<'a> {
    pmf: &'a [f64],
    block_len: usize,
}

impl Enumerator<'_> {
    /// Conditional tagged mass of every completion of a prefix ending at
    /// pulse `depth - 1` with `prev` photons.
    fn tagged_mass(&self, depth: usize, prev: u32, tagged: bool) -> f64 {
        if depth == self.block_len {
            return if tagged { 1.0 } else { 0.0 };
        }
        let mut sum = 0.0;
        for (k, &pk) in self.pmf.iter().enumerate() {
            let k = k as u32;
            let next = tagged || k >= 2 || (k >= 1 && prev >= 1);
            sum += pk * self.tagged_mass(depth + 1, k, next);
        }
        sum
    }
}

/// Poisson(mu) probabilities of 0..=cap photons.
pub(crate) fn poisson_pmf(mu: f64, cap: u32) -> Vec<f64> {
    (0..=cap)
        .map(|k| {
            if mu == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-mu + f64::from(k) * mu.ln() - ln_factorial(u64::from(k))).exp()
            }
        })
        .collect()
}

/// P(N > cap) for N ~ Poisson(mu), summed upward from cap + 1.
pub(crate) fn poisson_upper_tail(mu: f64, cap: u32) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let mut k = u64::from(cap) + 1;
    let mut term = (-mu + k as f64 * mu.ln() - ln_factorial(k)).exp();
    let mut tail = KahanSum::default();
    while term > 0.0 {
        tail.add(term);
        k += 1;
        term *= mu / k as f64;
        if term < tail.value() * 1e-18 && (k as f64) > mu {
            break;
        }
    }
    tail.value().min(1.0)
}

/// Photon-number distribution of one block from a general source.
///
/// Only the photon-number diagonal of the source state matters for tagging.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDistribution {
    block_len: usize,
    support: Vec<(PhotonConfig, f64)>,
}

impl SourceDistribution {
    pub fn new(support: Vec<(PhotonConfig, f64)>) -> Result<Self> {
        let dist = Self::unnormalized(support)?;
        let total = dist.total_probability();
        ensure(
            (total - 1.0).abs() <= NORMALIZATION_TOL,
            "probability",
            || format!("probabilities sum to {total}, expected 1"),
        )?;
        Ok(dist)
    }

    fn unnormalized(support: Vec<(PhotonConfig, f64)>) -> Result<Self> {
        let first = support
            .first()
            .ok_or_else(|| domain("support", "source distribution is empty"))?;
        let block_len = first.0.block_len();
        for (config, prob) in &support {
            ensure(config.block_len() == block_len, "L", || {
                format!(
                    "mixed block sizes in source distribution: {} and {block_len}",
                    config.block_len()
                )
            })?;
            ensure((0.0..=1.0).contains(prob), "probability", || {
                format!("{prob} is outside [0, 1] for configuration ({config})")
            })?;
        }
        Ok(Self { block_len, support })
    }

    /// Product-Poisson distribution restricted to at most `cap` photons per
    /// pulse. The omitted mass is not redistributed, so the total falls
    /// short of 1 by the truncation mass.
    pub fn truncated_poisson(p: &TagParams, cap: u32) -> Result<Self> {
        let pmf = poisson_pmf(p.mu, cap);
        let l = p.block_len;
        let mut support = Vec::new();
        let mut counts = vec![0u32; l];
        loop {
            let prob: f64 = counts.iter().map(|&k| pmf[k as usize]).product();
            support.push((PhotonConfig(counts.clone()), prob));
            // odometer increment, last pulse fastest
            let mut i = l;
            loop {
                if i == 0 {
                    return Self::unnormalized(support);
                }
                i -= 1;
                if counts[i] < cap {
                    counts[i] += 1;
                    break;
                }
                counts[i] = 0;
            }
        }
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn support(&self) -> &[(PhotonConfig, f64)] {
        &self.support
    }

    pub fn total_probability(&self) -> f64 {
        let mut acc = KahanSum::default();
        self.support.iter().for_each(|(_, p)| acc.add(*p));
        acc.value()
    }
}

/// Parses one record per line, `m_0 m_1 ... m_{L-1} probability`.
/// Blank lines and lines starting with `#` are skipped.
impl FromStr for SourceDistribution {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut support = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: idx + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let (prob, counts) = fields
                .split_last()
                .ok_or_else(|| parse_err("empty record".into()))?;
            let prob: f64 = prob
                .parse()
                .map_err(|e| parse_err(format!("bad probability {prob:?}: {e}")))?;
            let counts = counts
                .iter()
                .map(|f| {
                    f.parse::<u32>()
                        .map_err(|e| parse_err(format!("bad photon count {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let config = PhotonConfig::new(counts).map_err(|e| parse_err(e.to_string()))?;
            support.push((config, prob));
        }
        Self::new(support)
    }
}

/// Tagging probability of a general source: the mass of tagged configurations.
pub fn rtag_general(src: &SourceDistribution) -> f64 {
    let mut acc = KahanSum::default();
    src.support
        .iter()
        .filter(|(c, _)| !c.is_untagged())
        .for_each(|(_, p)| acc.add(*p));
    acc.value()
}
