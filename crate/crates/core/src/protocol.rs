//! Photon-level Monte Carlo of the DQPS protocol.
//!
//! Alice sends phase-randomized coherent blocks of `L` pulses with phases
//! `theta_l = a_l pi + (pi/2) l c`. Bob's delayed interferometer adds
//! `theta_B = (pi/2) d` (plus a misalignment phase `delta`) on the long arm
//! and two threshold detectors watch the `L - 1` valid timings. Detector 0
//! is the constructive port when `theta_l - theta_{l-1} - theta_B = 0`.
//!
//! For a phase-randomized coherent input every output mode is an
//! independent Poisson source, so clicks are drawn per timing and detector
//! from their mean photon numbers. Tagging is decided from an independently
//! sampled photon configuration of the emitted block and is a diagnostic
//! only: the protocol never observes it.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{ensure, Result};
use crate::keyrate::{key_rate_with_rtag, KeyRateReport, RateInputs, ShannonLimit};
use crate::rng::{batch_rng, batches};
use crate::tagging::{counts_untagged, rtag_coherent, TagParams};

/// Below this many sifted check-basis bits `E1_hat` is reported with a warning.
pub const MIN_CHECK_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    #[serde(rename = "L")]
    pub block_len: usize,
    pub mu: f64,
    pub p1: f64,
    pub n_blocks: u64,
    pub seed: u64,
}

impl ProtocolParams {
    pub fn new(block_len: usize, mu: f64, p1: f64, n_blocks: u64, seed: u64) -> Result<Self> {
        TagParams::new(block_len, mu)?;
        ensure(mu > 0.0, "mu", || format!("must be > 0, got {mu}"))?;
        ensure(p1 > 0.0 && p1 < 1.0, "p1", || {
            format!("must be in (0, 1), got {p1}")
        })?;
        ensure(n_blocks > 0, "blocks", || "must be > 0".into())?;
        Ok(Self {
            block_len,
            mu,
            p1,
            n_blocks,
            seed,
        })
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    /// Overall transmission including detector efficiency.
    pub eta: f64,
    /// Dark-click probability per detector per valid timing.
    pub p_dark: f64,
    /// Extra phase on the long arm of Bob's interferometer, radians.
    pub delta: f64,
    /// Probability of flipping Bob's bit after detection.
    pub bit_flip: f64,
}

impl ChannelModel {
    pub fn new(eta: f64, p_dark: f64, delta: f64, bit_flip: f64) -> Result<Self> {
        ensure((0.0..=1.0).contains(&eta), "eta", || {
            format!("must be in [0, 1], got {eta}")
        })?;
        ensure((0.0..1.0).contains(&p_dark), "p_dark", || {
            format!("must be in [0, 1), got {p_dark}")
        })?;
        ensure(delta.is_finite(), "delta", || {
            format!("must be finite, got {delta}")
        })?;
        ensure((0.0..0.5).contains(&bit_flip), "bitflip", || {
            format!("must be in [0, 0.5), got {bit_flip}")
        })?;
        Ok(Self {
            eta,
            p_dark,
            delta,
            bit_flip,
        })
    }

    pub fn noiseless(eta: f64) -> Result<Self> {
        Self::new(eta, 0.0, 0.0, 0.0)
    }

    /// Misalignment phase whose wrong-port intensity fraction `sin^2(delta/2)`
    /// equals `error_rate`.
    pub fn delta_for_error_rate(error_rate: f64) -> f64 {
        2.0 * error_rate.sqrt().asin()
    }
}

/// Alice's phase on pulse `l`.
pub fn alice_phase(bit: u8, l: usize, basis: u8) -> f64 {
    f64::from(bit) * PI + FRAC_PI_2 * (l as f64) * f64::from(basis)
}

/// Mean photon numbers reaching detectors 0 and 1 at one valid timing.
/// They always sum to `mu_eta`.
pub fn detector_means(
    theta_prev: f64,
    theta_cur: f64,
    theta_bob: f64,
    delta: f64,
    mu_eta: f64,
) -> [f64; 2] {
    let c = (theta_cur - theta_prev - theta_bob - delta).cos();
    [0.5 * mu_eta * (1.0 + c), 0.5 * mu_eta * (1.0 - c)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockOutcome {
    pub c: u8,
    pub d: u8,
    /// Earliest clicked valid timing, 0 when there is none.
    pub j: usize,
    pub a: Option<u8>,
    pub b: Option<u8>,
    pub tagged: bool,
    /// `clicks[t - 1]` holds detectors 0 and 1 at valid timing `t`.
    pub clicks: Vec<[bool; 2]>,
}

struct BlockSimulator {
    block_len: usize,
    p1: f64,
    mu_eta: f64,
    p_dark: f64,
    delta: f64,
    bit_flip: f64,
    photons: Poisson<f64>,
}

impl BlockSimulator {
    fn new(p: &ProtocolParams, ch: &ChannelModel) -> Self {
        Self {
            block_len: p.block_len,
            p1: p.p1,
            mu_eta: p.mu * ch.eta,
            p_dark: ch.p_dark,
            delta: ch.delta,
            bit_flip: ch.bit_flip,
            photons: Poisson::new(p.mu).expect("mu validated > 0"),
        }
    }

    fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> BlockOutcome {
        let c = u8::from(rng.random_bool(self.p1));
        let d = u8::from(rng.random_bool(self.p1));
        let bits: Vec<u8> = (0..self.block_len)
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let theta_bob = FRAC_PI_2 * f64::from(d);

        let clicks: Vec<[bool; 2]> = (1..self.block_len)
            .map(|l| {
                let means = detector_means(
                    alice_phase(bits[l - 1], l - 1, c),
                    alice_phase(bits[l], l, c),
                    theta_bob,
                    self.delta,
                    self.mu_eta,
                );
                means.map(|nu| {
                    let signal = rng.random::<f64>() < -(-nu).exp_m1();
                    let dark = self.p_dark > 0.0 && rng.random_bool(self.p_dark);
                    signal || dark
                })
            })
            .collect();

        let j = clicks
            .iter()
            .position(|&[d0, d1]| d0 || d1)
            .map_or(0, |i| i + 1);
        let (a, b) = if j == 0 {
            (None, None)
        } else {
            let a = bits[j - 1] ^ bits[j];
            let mut b = match clicks[j - 1] {
                [true, true] => u8::from(rng.random::<bool>()),
                [true, false] => 0,
                _ => 1,
            };
            if self.bit_flip > 0.0 && rng.random_bool(self.bit_flip) {
                b ^= 1;
            }
            (Some(a), Some(b))
        };

        let emitted: Vec<u32> = (0..self.block_len)
            .map(|_| self.photons.sample(rng) as u32)
            .collect();

        BlockOutcome {
            c,
            d,
            j,
            a,
            b,
            tagged: !counts_untagged(&emitted),
            clicks,
        }
    }
}

/// One round of steps 1-5: basis and bit choices, transmission, detection,
/// the choice of `j` and both raw bits.
pub fn simulate_block<R: Rng + ?Sized>(
    p: &ProtocolParams,
    ch: &ChannelModel,
    rng: &mut R,
) -> BlockOutcome {
    BlockSimulator::new(p, ch).simulate(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedStats {
    pub n_rep: u64,
    pub sifted_data: u64,
    pub errors_data: u64,
    pub sifted_check: u64,
    pub errors_check: u64,
    pub tagged_data: u64,
    #[serde(rename = "Q_hat")]
    pub q_hat: f64,
    #[serde(rename = "E0_hat")]
    pub e0_hat: f64,
    #[serde(rename = "E1_hat")]
    pub e1_hat: f64,
    #[serde(rename = "Delta_hat")]
    pub delta_hat: f64,
    /// Histogram of `j` over all blocks, split by Bob's basis `d`.
    pub j_counts: [Vec<u64>; 2],
}

#[derive(Debug, Clone)]
struct Tally {
    sifted_data: u64,
    errors_data: u64,
    sifted_check: u64,
    errors_check: u64,
    tagged_data: u64,
    j_counts: [Vec<u64>; 2],
}

impl Tally {
    fn new(block_len: usize) -> Self {
        Self {
            sifted_data: 0,
            errors_data: 0,
            sifted_check: 0,
            errors_check: 0,
            tagged_data: 0,
            j_counts: [vec![0; block_len], vec![0; block_len]],
        }
    }

    fn record(&mut self, o: &BlockOutcome) {
        self.j_counts[o.d as usize][o.j] += 1;
        let (Some(a), Some(b)) = (o.a, o.b) else {
            return;
        };
        match (o.c, o.d) {
            (0, 0) => {
                self.sifted_data += 1;
                self.errors_data += u64::from(a != b);
                self.tagged_data += u64::from(o.tagged);
            }
            (1, 1) => {
                self.sifted_check += 1;
                self.errors_check += u64::from(a != b);
            }
            _ => {}
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.sifted_data += other.sifted_data;
        self.errors_data += other.errors_data;
        self.sifted_check += other.sifted_check;
        self.errors_check += other.errors_check;
        self.tagged_data += other.tagged_data;
        for (mine, theirs) in self.j_counts.iter_mut().zip(&other.j_counts) {
            mine.iter_mut().zip(theirs).for_each(|(x, y)| *x += y);
        }
        self
    }
}

/// Runs `n_blocks` rounds and sifts them into the observed parameters.
///
/// Blocks are simulated in fixed-size batches with one random stream per
/// batch, so the result depends only on the parameters and the seed.
pub fn run_simulation(p: &ProtocolParams, ch: &ChannelModel) -> ObservedStats {
    let sim = BlockSimulator::new(p, ch);
    let plan: Vec<(u64, u64)> = batches(p.n_blocks).collect();
    let tally = plan
        .par_iter()
        .map(|&(index, len)| {
            let mut rng = batch_rng(p.seed, index);
            let mut tally = Tally::new(p.block_len);
            for _ in 0..len {
                tally.record(&sim.simulate(&mut rng));
            }
            tally
        })
        .reduce(|| Tally::new(p.block_len), Tally::merge);

    if tally.sifted_check < MIN_CHECK_SAMPLES {
        log::warn!(
            "only {} sifted check-basis bits; E1_hat is not meaningful",
            tally.sifted_check
        );
    }

    let n = p.n_blocks as f64;
    let (p0, p1) = (p.p0(), p.p1);
    ObservedStats {
        n_rep: p.n_blocks,
        sifted_data: tally.sifted_data,
        errors_data: tally.errors_data,
        sifted_check: tally.sifted_check,
        errors_check: tally.errors_check,
        tagged_data: tally.tagged_data,
        q_hat: tally.sifted_data as f64 / (n * p0 * p0),
        e0_hat: tally.errors_data as f64 / (n * p0 * p0),
        e1_hat: tally.errors_check as f64 / (n * p1 * p1),
        delta_hat: if tally.sifted_data == 0 {
            0.0
        } else {
            tally.tagged_data as f64 / tally.sifted_data as f64
        },
        j_counts: tally.j_counts,
    }
}

/// Key rate from simulated observations. The tagging probability comes from
/// the coherent-source closed form, never from `Delta_hat`.
pub fn estimate_key_rate(stats: &ObservedStats, p: &ProtocolParams) -> Result<KeyRateReport> {
    let rtag = rtag_coherent(&TagParams::new(p.block_len, p.mu)?);
    // Sample estimates may leave the population bounds (E1 <= Q <= 1), so the
    // inputs are assembled without the constructor's range checks.
    let inputs = RateInputs {
        block_len: p.block_len,
        mu: p.mu,
        p0: p.p0(),
        q: stats.q_hat,
        e0: stats.e0_hat,
        e1: stats.e1_hat,
    };
    key_rate_with_rtag(&inputs, rtag, &ShannonLimit::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test that the distribution of `j` does not depend on Bob's basis.
pub fn basis_independence_test(stats: &ObservedStats) -> ChiSquareTest {
    let [d0, d1] = &stats.j_counts;
    let rows = [d0.iter().sum::<u64>() as f64, d1.iter().sum::<u64>() as f64];
    let total = rows[0] + rows[1];
    let mut statistic = 0.0;
    let mut columns = 0usize;
    for (&x0, &x1) in d0.iter().zip(d1) {
        let col = (x0 + x1) as f64;
        if col == 0.0 {
            continue;
        }
        columns += 1;
        for (obs, row) in [(x0 as f64, rows[0]), (x1 as f64, rows[1])] {
            let expected = row * col / total;
            if expected > 0.0 {
                statistic += (obs - expected).powi(2) / expected;
            }
        }
    }
    let dof = columns.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map(|chi| chi.sf(statistic))
            .unwrap_or(f64::NAN)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::channel_q;
    use crate::rng::batch_rng;

    fn params(l: usize, mu: f64, n: u64) -> ProtocolParams {
        ProtocolParams::new(l, mu, 0.5, n, 11).unwrap()
    }

    #[test]
    fn flux_is_conserved() {
        for (tp, tc, tb, delta) in [
            (0.0, PI, 0.0, 0.0),
            (1.3, 0.2, FRAC_PI_2, 0.4),
            (5.0, 2.0, 0.0, -1.0),
        ] {
            let [n0, n1] = detector_means(tp, tc, tb, delta, 0.37);
            assert!((n0 + n1 - 0.37).abs() < 1e-15);
            assert!(n0 >= 0.0 && n1 >= 0.0);
        }
    }

    #[test]
    fn matched_bases_interfere_deterministically() {
        for c in [0u8, 1] {
            for (a_prev, a_cur) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
                let means = detector_means(
                    alice_phase(a_prev, 4, c),
                    alice_phase(a_cur, 5, c),
                    FRAC_PI_2 * f64::from(c),
                    0.0,
                    1.0,
                );
                let right = (a_prev ^ a_cur) as usize;
                assert!((means[right] - 1.0).abs() < 1e-12);
                assert!(means[1 - right].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detector_symmetry() {
        // Flipping every bit leaves all relative phases and so every mean unchanged;
        // flipping one bit of a pair swaps the detectors at that timing.
        for c in [0u8, 1] {
            let base = detector_means(alice_phase(0, 2, c), alice_phase(1, 3, c), 0.7, 0.1, 0.5);
            let all = detector_means(alice_phase(1, 2, c), alice_phase(0, 3, c), 0.7, 0.1, 0.5);
            let one = detector_means(alice_phase(0, 2, c), alice_phase(0, 3, c), 0.7, 0.1, 0.5);
            assert!((base[0] - all[0]).abs() < 1e-15 && (base[1] - all[1]).abs() < 1e-15);
            assert!((base[0] - one[1]).abs() < 1e-15 && (base[1] - one[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_matched_blocks_have_no_errors() {
        let p = params(6, 0.5, 1);
        let ch = ChannelModel::noiseless(1.0).unwrap();
        let mut rng = batch_rng(3, 0);
        let mut matched = 0;
        for _ in 0..5000 {
            let o = simulate_block(&p, &ch, &mut rng);
            assert_eq!(o.clicks.len(), 5);
            if o.j != 0 {
                assert!(o.clicks[..o.j - 1].iter().all(|t| t == &[false, false]));
                assert!(o.clicks[o.j - 1].contains(&true));
                if o.c == o.d {
                    matched += 1;
                    assert_eq!(o.a, o.b);
                }
            } else {
                assert_eq!((o.a, o.b), (None, None));
            }
        }
        assert!(matched > 1000);
    }

    #[test]
    fn no_light_no_detection() {
        let p = params(5, 0.3, 1);
        let ch = ChannelModel::noiseless(0.0).unwrap();
        let mut rng = batch_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(simulate_block(&p, &ch, &mut rng).j, 0);
        }
    }

    #[test]
    fn yield_tracks_channel_model() {
        let p = params(8, 0.1, 200_000);
        let ch = ChannelModel::noiseless(0.2).unwrap();
        let stats = run_simulation(&p, &ch);
        let q = channel_q(8, 0.1, 0.2);
        let sigma = (q * (1.0 - q) / (200_000.0 * 0.25)).sqrt();
        assert!(
            (stats.q_hat - q).abs() < 3.0 * sigma,
            "{} vs {q}",
            stats.q_hat
        );
        assert_eq!(stats.e0_hat, 0.0);
        assert_eq!(stats.e1_hat, 0.0);
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let p = params(4, 0.2, 50_000);
        let ch = ChannelModel::new(0.5, 1e-3, 0.2, 0.0).unwrap();
        assert_eq!(run_simulation(&p, &ch), run_simulation(&p, &ch));
        let other = ProtocolParams { seed: 12, ..p };
        assert_ne!(run_simulation(&p, &ch), run_simulation(&other, &ch));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = params(5, 0.1, 70_000);
        let ch = ChannelModel::new(0.3, 1e-4, 0.1, 0.01).unwrap();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        assert_eq!(
            one.install(|| run_simulation(&p, &ch)),
            four.install(|| run_simulation(&p, &ch))
        );
    }

    #[test]
    fn key_rate_from_stats() {
        let p = params(4, 0.1, 1);
        let mut stats = ObservedStats {
            n_rep: 1,
            sifted_data: 0,
            errors_data: 0,
            sifted_check: 0,
            errors_check: 0,
            tagged_data: 0,
            q_hat: 0.2,
            e0_hat: 0.0,
            e1_hat: 0.0,
            delta_hat: 0.0,
            j_counts: [vec![], vec![]],
        };
        let good = estimate_key_rate(&stats, &p).unwrap();
        assert!(good.feasible && good.rate_per_pulse > 0.0);

        stats.e1_hat = (stats.q_hat - good.rtag) / 2.0 + 1e-6;
        assert!(!estimate_key_rate(&stats, &p).unwrap().feasible);

        stats.e1_hat = 0.0;
        stats.q_hat = good.rtag;
        let edge = estimate_key_rate(&stats, &p).unwrap();
        assert_eq!(edge.rate_per_pulse, 0.0);
        assert!(!edge.feasible);
    }

    #[test]
    fn chi_square_of_identical_rows_is_zero() {
        let stats = ObservedStats {
            n_rep: 0,
            sifted_data: 0,
            errors_data: 0,
            sifted_check: 0,
            errors_check: 0,
            tagged_data: 0,
            q_hat: 0.0,
            e0_hat: 0.0,
            e1_hat: 0.0,
            delta_hat: 0.0,
            j_counts: [vec![10, 20, 30, 0], vec![10, 20, 30, 0]],
        };
        let t = basis_independence_test(&stats);
        assert_eq!(t.dof, 2);
        assert!(t.statistic.abs() < 1e-12);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProtocolParams::new(1, 0.1, 0.5, 10, 0).is_err());
        assert!(ProtocolParams::new(2, 0.1, 1.0, 10, 0).is_err());
        assert!(ProtocolParams::new(2, 0.0, 0.5, 10, 0).is_err());
        assert!(ChannelModel::new(1.1, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelModel::new(0.5, 1.0, 0.0, 0.0).is_err());
        assert!(ChannelModel::new(0.5, 0.0, 0.0, 0.5).is_err());
    }
}
