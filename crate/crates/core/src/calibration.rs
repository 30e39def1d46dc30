//! Off-line calibration of the light source: coincidence measurements that
//! upper-bound the tagging probability without trusting the source model.
//!
//! Two setups are simulated. With two detectors behind a beam splitter a
//! double coincidence (both detectors click within a pair of neighboring
//! pulses) has probability at least `2 eta1 eta2` for every tagged
//! configuration, giving `r_tag <= (n_double / n_test) / (2 eta1 eta2)`.
//! When detectors have dead time, an absorber and a third detector bound
//! the masked coincidences through triple coincidences.
//!
//! Photons are routed one by one, which is exact for linear optics on
//! Poissonian and other photon-number-diagonal inputs.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, ensure, Result};
use crate::rng::{batch_rng, batches};
use crate::tagging::{rtag_coherent, rtag_general, SourceDistribution, TagParams};

/// Below this many trains the reported bound carries a warning.
pub const MIN_TRAINS: u64 = 10_000;

/// Upper bound on the probability of three or more photons after the
/// absorber, `(n_triple / n_test) / (6 eta1 eta2 eta3)`.
pub fn q3_bound(n_triple: u64, n_test: u64, eta1: f64, eta2: f64, eta3: f64) -> Result<f64> {
    ensure(n_test > 0, "n_test", || "must be > 0".into())?;
    for (param, eta) in [("eta1", eta1), ("eta2", eta2), ("eta3", eta3)] {
        ensure(eta > 0.0 && eta <= 1.0, param, || {
            format!("must be in (0, 1], got {eta}")
        })?;
    }
    Ok(n_triple as f64 / n_test as f64 / (6.0 * eta1 * eta2 * eta3))
}

/// Two detectors behind one beam splitter, no dead time.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibSetup2 {
    pub block_len: usize,
    pub mu: f64,
    /// Declared lower bound on `T * eff1`.
    pub eta1: f64,
    /// Declared lower bound on `R * eff2`.
    pub eta2: f64,
    pub true_t: f64,
    pub true_r: f64,
    pub true_eff1: f64,
    pub true_eff2: f64,
    pub n_test: u64,
    pub seed: u64,
    /// Emits blocks from this distribution instead of a coherent source.
    pub source: Option<SourceDistribution>,
}

impl CalibSetup2 {
    /// Coherent source with the declared bounds equal to the true efficiencies.
    pub fn exact(
        block_len: usize,
        mu: f64,
        t: f64,
        eff1: f64,
        eff2: f64,
        n_test: u64,
        seed: u64,
    ) -> Self {
        let r = 1.0 - t;
        Self {
            block_len,
            mu,
            eta1: t * eff1,
            eta2: r * eff2,
            true_t: t,
            true_r: r,
            true_eff1: eff1,
            true_eff2: eff2,
            n_test,
            seed,
            source: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_source(self.block_len, self.mu, self.n_test)?;
        check_fraction("true_T", self.true_t)?;
        check_fraction("true_R", self.true_r)?;
        check_fraction("true_eff1", self.true_eff1)?;
        check_fraction("true_eff2", self.true_eff2)?;
        ensure(self.true_t + self.true_r <= 1.0 + 1e-12, "true_R", || {
            format!("T + R = {} exceeds 1", self.true_t + self.true_r)
        })?;
        check_lower_bound("eta1", self.eta1, self.true_t * self.true_eff1)?;
        check_lower_bound("eta2", self.eta2, self.true_r * self.true_eff2)?;
        if let Some(src) = &self.source {
            ensure(src.block_len() == self.block_len, "L", || {
                format!(
                    "source blocks have {} pulses but L = {}",
                    src.block_len(),
                    self.block_len
                )
            })?;
        }
        Ok(())
    }

    fn routing(&self) -> [f64; 3] {
        [
            self.true_t * self.true_eff1,
            self.true_r * self.true_eff2,
            0.0,
        ]
    }
}

/// Absorber, then a splitter sending reflected light to detector 3 and
/// transmitted light to a second splitter feeding detectors 1 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibSetup3 {
    pub block_len: usize,
    pub mu: f64,
    /// Declared lower bounds on `T1 T2 eff1`, `T1 R2 eff2`, `R1 eff3` and the
    /// absorber transmittance.
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta_abs: f64,
    pub true_abs: f64,
    pub true_t1: f64,
    pub true_r1: f64,
    pub true_t2: f64,
    pub true_r2: f64,
    pub true_eff1: f64,
    pub true_eff2: f64,
    pub true_eff3: f64,
    /// Pulse slots a detector stays blind after clicking; 0 means none.
    pub dead_time: usize,
    pub n_test: u64,
    pub seed: u64,
}

impl CalibSetup3 {
    /// Lossless splitters with the given splits, declared bounds equal to the truth.
    #[allow(clippy::too_many_arguments)]
    pub fn exact(
        block_len: usize,
        mu: f64,
        absorber: f64,
        t1: f64,
        t2: f64,
        dead_time: usize,
        n_test: u64,
        seed: u64,
    ) -> Self {
        Self {
            block_len,
            mu,
            eta1: t1 * t2,
            eta2: t1 * (1.0 - t2),
            eta3: 1.0 - t1,
            eta_abs: absorber,
            true_abs: absorber,
            true_t1: t1,
            true_r1: 1.0 - t1,
            true_t2: t2,
            true_r2: 1.0 - t2,
            true_eff1: 1.0,
            true_eff2: 1.0,
            true_eff3: 1.0,
            dead_time,
            n_test,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_source(self.block_len, self.mu, self.n_test)?;
        for (param, v) in [
            ("true_abs", self.true_abs),
            ("true_T1", self.true_t1),
            ("true_R1", self.true_r1),
            ("true_T2", self.true_t2),
            ("true_R2", self.true_r2),
            ("true_eff1", self.true_eff1),
            ("true_eff2", self.true_eff2),
            ("true_eff3", self.true_eff3),
        ] {
            check_fraction(param, v)?;
        }
        ensure(
            self.true_t1 + self.true_r1 <= 1.0 + 1e-12,
            "true_R1",
            || "T1 + R1 exceeds 1".into(),
        )?;
        ensure(
            self.true_t2 + self.true_r2 <= 1.0 + 1e-12,
            "true_R2",
            || "T2 + R2 exceeds 1".into(),
        )?;
        let [p1, p2, p3] = self.path_efficiencies();
        check_lower_bound("eta1", self.eta1, p1)?;
        check_lower_bound("eta2", self.eta2, p2)?;
        check_lower_bound("eta3", self.eta3, p3)?;
        check_lower_bound("eta_abs", self.eta_abs, self.true_abs)?;
        Ok(())
    }

    fn path_efficiencies(&self) -> [f64; 3] {
        [
            self.true_t1 * self.true_t2 * self.true_eff1,
            self.true_t1 * self.true_r2 * self.true_eff2,
            self.true_r1 * self.true_eff3,
        ]
    }

    fn routing(&self) -> [f64; 3] {
        self.path_efficiencies().map(|p| p * self.true_abs)
    }
}

fn validate_source(block_len: usize, mu: f64, n_test: u64) -> Result<()> {
    TagParams::new(block_len, mu)?;
    ensure(n_test > 0, "n_test", || "must be > 0".into())?;
    if n_test < MIN_TRAINS {
        log::warn!("{n_test} trains is too few for a statistically meaningful bound");
    }
    Ok(())
}

fn check_fraction(param: &'static str, v: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&v), param, || {
        format!("must be in [0, 1], got {v}")
    })
}

fn check_lower_bound(param: &'static str, declared: f64, actual: f64) -> Result<()> {
    ensure(declared > 0.0, param, || {
        format!("must be > 0, got {declared}")
    })?;
    ensure(declared <= actual + 1e-12, param, || {
        format!("declared {declared} exceeds the actual value {actual}")
    })
}

/// Probabilities that one emitted photon reaches detector 1, 2, 3 or is
/// lost. They sum to 1.
pub fn routing_probabilities(detectors: [f64; 3]) -> [f64; 4] {
    let [a, b, c] = detectors;
    [a, b, c, (1.0 - a - b - c).max(0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CalibMode {
    #[serde(rename = "2det")]
    TwoDetector,
    #[serde(rename = "3det")]
    ThreeDetector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub mode: CalibMode,
    pub n_test: u64,
    /// Observed double coincidences between detectors 1 and 2.
    pub n_double: u64,
    /// Double coincidences of fictitious detectors without dead time.
    pub n_double_true: Option<u64>,
    pub n_triple: Option<u64>,
    pub bound: f64,
    pub true_rtag: f64,
    pub slack: f64,
    /// Standard error of `bound` from the finite number of trains.
    pub sigma: f64,
}

/// Detector click slots of one train, recorded only on request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrainEvent {
    pub train: u64,
    pub det1: Vec<usize>,
    pub det2: Vec<usize>,
    pub det3: Vec<usize>,
    pub double: bool,
    pub triple: bool,
}

enum Emitter {
    Vacuum,
    Coherent(Poisson<f64>),
    General(WeightedIndex<f64>, SourceDistribution),
}

impl Emitter {
    fn coherent(mu: f64) -> Self {
        if mu == 0.0 {
            Self::Vacuum
        } else {
            Self::Coherent(Poisson::new(mu).expect("mu validated finite"))
        }
    }

    fn general(src: &SourceDistribution) -> Result<Self> {
        let weights = WeightedIndex::new(src.support().iter().map(|(_, p)| *p))
            .map_err(|e| domain("source", e.to_string()))?;
        Ok(Self::General(weights, src.clone()))
    }

    fn emit<R: Rng + ?Sized>(&self, rng: &mut R, counts: &mut [u32]) {
        match self {
            Self::Vacuum => counts.fill(0),
            Self::Coherent(poisson) => counts
                .iter_mut()
                .for_each(|c| *c = poisson.sample(rng) as u32),
            Self::General(weights, src) => {
                counts.copy_from_slice(src.support()[weights.sample(rng)].0.counts())
            }
        }
    }
}

/// Per-train detector hits before dead-time masking.
struct Hits {
    det: [Vec<bool>; 3],
    counts: Vec<u32>,
}

impl Hits {
    fn new(block_len: usize) -> Self {
        Self {
            det: [
                vec![false; block_len],
                vec![false; block_len],
                vec![false; block_len],
            ],
            counts: vec![0; block_len],
        }
    }

    /// Emits one train and routes every photon independently.
    fn fill<R: Rng + ?Sized>(&mut self, emitter: &Emitter, routing: [f64; 3], rng: &mut R) {
        emitter.emit(rng, &mut self.counts);
        self.det.iter_mut().for_each(|d| d.fill(false));
        let [p1, p2, p3] = routing;
        let (c1, c2, c3) = (p1, p1 + p2, p1 + p2 + p3);
        for (slot, &n) in self.counts.iter().enumerate() {
            for _ in 0..n {
                let u: f64 = rng.random();
                let target = if u < c1 {
                    0
                } else if u < c2 {
                    1
                } else if u < c3 {
                    2
                } else {
                    continue;
                };
                self.det[target][slot] = true;
            }
        }
    }
}

/// Clicks that survive dead time: after a click at slot `l` the detector
/// ignores slots `l + 1 ..= l + dead_time`.
fn apply_dead_time(hits: &[bool], dead_time: usize, out: &mut [bool]) {
    let mut ready_at = 0;
    for (l, (&hit, click)) in hits.iter().zip(out.iter_mut()).enumerate() {
        *click = hit && l >= ready_at;
        if *click {
            ready_at = l + dead_time + 1;
        }
    }
}

/// Both detectors click within a pair of neighboring pulses (`|t1 - t2| <= 1`).
fn neighboring_coincidence(a: &[bool], b: &[bool]) -> bool {
    let n = a.len();
    (0..n).any(|l| a[l] && (b[l] || (l > 0 && b[l - 1]) || (l + 1 < n && b[l + 1])))
}

fn slots(v: &[bool]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Default)]
struct CoincidenceTally {
    /// Trains by (observed double, triple).
    cells: [[u64; 2]; 2],
    double_true: u64,
    events: Vec<TrainEvent>,
}

impl CoincidenceTally {
    fn merge(mut self, other: Self) -> Self {
        for i in 0..2 {
            for j in 0..2 {
                self.cells[i][j] += other.cells[i][j];
            }
        }
        self.double_true += other.double_true;
        self.events.extend(other.events);
        self
    }

    fn doubles(&self) -> u64 {
        self.cells[1][0] + self.cells[1][1]
    }

    fn triples(&self) -> u64 {
        self.cells[0][1] + self.cells[1][1]
    }

    /// Mean and standard error of a per-train score `w_double * [double] + w_triple * [triple]`.
    fn score(&self, n: u64, w_double: f64, w_triple: f64) -> (f64, f64) {
        let n = n as f64;
        let mut mean = 0.0;
        let mut second = 0.0;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                let x = w_double * i as f64 + w_triple * j as f64;
                mean += x * count as f64 / n;
                second += x * x * count as f64 / n;
            }
        }
        let var = (second - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

struct TrainRun<'a> {
    block_len: usize,
    routing: [f64; 3],
    dead_time: Option<usize>,
    emitter: &'a Emitter,
    seed: u64,
    n_test: u64,
    log_events: bool,
}

impl TrainRun<'_> {
    fn run(&self) -> CoincidenceTally {
        let plan: Vec<(u64, u64)> = batches(self.n_test).collect();
        plan.par_iter()
            .map(|&(index, len)| self.batch(index, len))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(CoincidenceTally::default(), CoincidenceTally::merge)
    }

    fn batch(&self, index: u64, len: u64) -> CoincidenceTally {
        let mut rng = batch_rng(self.seed, index);
        let mut hits = Hits::new(self.block_len);
        let mut observed = [vec![false; self.block_len], vec![false; self.block_len]];
        let mut tally = CoincidenceTally::default();
        for k in 0..len {
            hits.fill(self.emitter, self.routing, &mut rng);
            let (double, triple) = match self.dead_time {
                None => (neighboring_coincidence(&hits.det[0], &hits.det[1]), false),
                Some(dead) => {
                    for (raw, out) in hits.det[..2].iter().zip(observed.iter_mut()) {
                        apply_dead_time(raw, dead, out);
                    }
                    if neighboring_coincidence(&hits.det[0], &hits.det[1]) {
                        tally.double_true += 1;
                    }
                    let triple = hits.det.iter().all(|d| d.contains(&true));
                    (neighboring_coincidence(&observed[0], &observed[1]), triple)
                }
            };
            tally.cells[usize::from(double)][usize::from(triple)] += 1;
            if self.log_events && hits.det.iter().any(|d| d.contains(&true)) {
                let shown = |i: usize| match self.dead_time {
                    Some(_) if i < 2 => slots(&observed[i]),
                    _ => slots(&hits.det[i]),
                };
                tally.events.push(TrainEvent {
                    train: index * crate::rng::BATCH_SIZE + k,
                    det1: shown(0),
                    det2: shown(1),
                    det3: shown(2),
                    double,
                    triple,
                });
            }
        }
        tally
    }
}

/// Two-detector calibration; returns `(n_double / n_test) / (2 eta1 eta2)`.
pub fn simulate_two_detector(setup: &CalibSetup2) -> Result<CalibrationReport> {
    two_detector(setup, false).map(|(r, _)| r)
}

/// [`simulate_two_detector`] plus an event for every train with a click.
pub fn simulate_two_detector_logged(
    setup: &CalibSetup2,
) -> Result<(CalibrationReport, Vec<TrainEvent>)> {
    two_detector(setup, true)
}

fn two_detector(
    setup: &CalibSetup2,
    log_events: bool,
) -> Result<(CalibrationReport, Vec<TrainEvent>)> {
    setup.validate()?;
    let (emitter, true_rtag) = match &setup.source {
        Some(src) => (Emitter::general(src)?, rtag_general(src)),
        None => (
            Emitter::coherent(setup.mu),
            rtag_coherent(&TagParams::new(setup.block_len, setup.mu)?),
        ),
    };
    let tally = TrainRun {
        block_len: setup.block_len,
        routing: setup.routing(),
        dead_time: None,
        emitter: &emitter,
        seed: setup.seed,
        n_test: setup.n_test,
        log_events,
    }
    .run();
    let (bound, sigma) = tally.score(setup.n_test, 1.0 / (2.0 * setup.eta1 * setup.eta2), 0.0);
    let report = CalibrationReport {
        mode: CalibMode::TwoDetector,
        n_test: setup.n_test,
        n_double: tally.doubles(),
        n_double_true: None,
        n_triple: None,
        bound,
        true_rtag,
        slack: bound - true_rtag,
        sigma,
    };
    Ok((report, tally.events))
}

/// Three-detector calibration tolerant to dead time; returns
/// `(n_double_obs/n_test + q3_bound) / (2 eta1 eta2 eta_abs^2)`.
pub fn simulate_three_detector(setup: &CalibSetup3) -> Result<CalibrationReport> {
    three_detector(setup, false).map(|(r, _)| r)
}

pub fn simulate_three_detector_logged(
    setup: &CalibSetup3,
) -> Result<(CalibrationReport, Vec<TrainEvent>)> {
    three_detector(setup, true)
}

fn three_detector(
    setup: &CalibSetup3,
    log_events: bool,
) -> Result<(CalibrationReport, Vec<TrainEvent>)> {
    setup.validate()?;
    let emitter = Emitter::coherent(setup.mu);
    let tally = TrainRun {
        block_len: setup.block_len,
        routing: setup.routing(),
        dead_time: Some(setup.dead_time),
        emitter: &emitter,
        seed: setup.seed,
        n_test: setup.n_test,
        log_events,
    }
    .run();

    let scale = 1.0 / (2.0 * setup.eta1 * setup.eta2 * setup.eta_abs * setup.eta_abs);
    let triple_weight = scale / (6.0 * setup.eta1 * setup.eta2 * setup.eta3);
    let (bound, sigma) = tally.score(setup.n_test, scale, triple_weight);
    debug_assert!({
        let q3 = q3_bound(
            tally.triples(),
            setup.n_test,
            setup.eta1,
            setup.eta2,
            setup.eta3,
        )
        .unwrap_or(0.0);
        let direct = (tally.doubles() as f64 / setup.n_test as f64 + q3) * scale;
        (direct - bound).abs() <= 1e-9 * direct.max(1e-300)
    });
    let true_rtag = rtag_coherent(&TagParams::new(setup.block_len, setup.mu)?);
    let report = CalibrationReport {
        mode: CalibMode::ThreeDetector,
        n_test: setup.n_test,
        n_double: tally.doubles(),
        n_double_true: Some(tally.double_true),
        n_triple: Some(tally.triples()),
        bound,
        true_rtag,
        slack: bound - true_rtag,
        sigma,
    };
    Ok((report, tally.events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagging::PhotonConfig;

    #[test]
    fn q3_bound_values() {
        assert_eq!(q3_bound(0, 100, 0.5, 0.5, 0.5).unwrap(), 0.0);
        assert!((q3_bound(6, 1_000_000, 1.0, 1.0, 1.0).unwrap() - 1e-6).abs() < 1e-18);
        assert!(q3_bound(1, 10, 0.0, 1.0, 1.0).is_err());
        assert!(q3_bound(1, 0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dead_time_masking() {
        let hits = [true, true, false, true, true, true];
        let mut out = [false; 6];
        apply_dead_time(&hits, 0, &mut out);
        assert_eq!(out, hits);
        apply_dead_time(&hits, 1, &mut out);
        assert_eq!(out, [true, false, false, true, false, true]);
        apply_dead_time(&hits, 5, &mut out);
        assert_eq!(out, [true, false, false, false, false, false]);
    }

    #[test]
    fn neighboring_pairs() {
        assert!(neighboring_coincidence(
            &[true, false, false],
            &[false, true, false]
        ));
        assert!(neighboring_coincidence(
            &[false, false, true],
            &[false, false, true]
        ));
        assert!(!neighboring_coincidence(
            &[true, false, false],
            &[false, false, true]
        ));
        // 3L-2 ordered slot pairs out of L^2
        let l = 5;
        let mut count = 0;
        for i in 0..l {
            for j in 0..l {
                let mut a = vec![false; l];
                let mut b = vec![false; l];
                a[i] = true;
                b[j] = true;
                count += usize::from(neighboring_coincidence(&a, &b));
            }
        }
        assert_eq!(count, 3 * l - 2);
    }

    #[test]
    fn routing_is_conserved() {
        let s = CalibSetup3::exact(4, 0.1, 0.3, 0.6, 0.5, 1, 1_000, 0);
        let probs = routing_probabilities(s.routing());
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn vacuum_gives_zero_bound() {
        let two =
            simulate_two_detector(&CalibSetup2::exact(6, 0.0, 0.5, 1.0, 1.0, 20_000, 1)).unwrap();
        assert_eq!((two.n_double, two.bound), (0, 0.0));
        let three =
            simulate_three_detector(&CalibSetup3::exact(6, 0.0, 0.5, 0.6, 0.5, 2, 20_000, 1))
                .unwrap();
        assert_eq!(
            (three.n_double, three.n_triple, three.bound),
            (0, Some(0), 0.0)
        );
    }

    #[test]
    fn looser_declared_efficiency_raises_bound() {
        let exact = CalibSetup2::exact(5, 0.05, 0.5, 0.9, 0.8, 50_000, 3);
        let loose = CalibSetup2 {
            eta1: exact.eta1 * 0.8,
            ..exact.clone()
        };
        let a = simulate_two_detector(&exact).unwrap();
        let b = simulate_two_detector(&loose).unwrap();
        assert_eq!(a.n_double, b.n_double);
        assert!(b.bound >= a.bound);
    }

    #[test]
    fn declared_bounds_above_truth_are_rejected() {
        let mut s = CalibSetup2::exact(5, 0.05, 0.5, 0.9, 0.8, 50_000, 3);
        s.eta2 = 0.5;
        assert!(matches!(
            simulate_two_detector(&s),
            Err(crate::Error::Domain { param: "eta2", .. })
        ));
        let mut s3 = CalibSetup3::exact(5, 0.05, 0.5, 0.6, 0.5, 1, 50_000, 3);
        s3.eta_abs = 0.6;
        assert!(simulate_three_detector(&s3).is_err());
    }

    #[test]
    fn dead_time_never_creates_coincidences() {
        for seed in 0..5 {
            for dead in [1, 2, 5] {
                let s = CalibSetup3::exact(8, 0.3, 0.8, 0.6, 0.5, dead, 20_000, seed);
                let r = simulate_three_detector(&s).unwrap();
                assert!(r.n_double <= r.n_double_true.unwrap());
            }
        }
    }

    #[test]
    fn no_dead_time_matches_two_detector_counting() {
        let s3 = CalibSetup3::exact(7, 0.2, 0.7, 0.6, 0.4, 0, 30_000, 9);
        let [p1, p2, _] = s3.routing();
        // Same per-photon routing thresholds, so identical hits per seed.
        let s2 = CalibSetup2 {
            block_len: 7,
            mu: 0.2,
            eta1: p1,
            eta2: p2,
            true_t: p1,
            true_r: p2,
            true_eff1: 1.0,
            true_eff2: 1.0,
            n_test: 30_000,
            seed: 9,
            source: None,
        };
        let r3 = simulate_three_detector(&s3).unwrap();
        let r2 = simulate_two_detector(&s2).unwrap();
        assert_eq!(r3.n_double, r2.n_double);
        assert_eq!(r3.n_double_true, Some(r2.n_double));
    }

    #[test]
    fn general_source_bound() {
        // Pairs of photons in neighboring pulses half of the time.
        let src = SourceDistribution::new(vec![
            (PhotonConfig::new(vec![1, 1, 0, 0]).unwrap(), 0.5),
            (PhotonConfig::new(vec![1, 0, 1, 0]).unwrap(), 0.5),
        ])
        .unwrap();
        let mut s = CalibSetup2::exact(4, 0.0, 0.5, 1.0, 1.0, 40_000, 5);
        s.source = Some(src);
        let r = simulate_two_detector(&s).unwrap();
        assert_eq!(r.true_rtag, 0.5);
        // Each tagged train splits its photons across detectors with probability 1/2.
        assert!((r.bound - 0.5).abs() < 4.0 * r.sigma, "{r:?}");
    }

    #[test]
    fn event_log_lists_clicking_trains() {
        let s = CalibSetup2::exact(4, 0.2, 0.5, 1.0, 1.0, 2_000, 8);
        let (report, events) = simulate_two_detector_logged(&s).unwrap();
        assert_eq!(report, simulate_two_detector(&s).unwrap());
        assert_eq!(
            events.iter().filter(|e| e.double).count() as u64,
            report.n_double
        );
        assert!(events.windows(2).all(|w| w[0].train < w[1].train));
    }
}
