//! Optimization of the mean photon number and parameter sweeps.
//!
//! The default channel model keeps both bit error rates fixed at
//! `error_rate` for every `eta` and `mu`, with `Q = 1 - exp(-(L-1) mu eta)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Result};
use crate::keyrate::{channel_q, key_rate, KeyRateReport, RateInputs, ShannonLimit};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Log-spaced points scanned before the golden-section refinement.
    pub grid_points: usize,
    /// Final bracket width in `ln(mu)`.
    pub tolerance: f64,
    pub p0: f64,
    pub error_correction: ShannonLimit,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            mu_lo: 1e-6,
            mu_hi: 1.0,
            grid_points: 200,
            tolerance: 1e-10,
            p0: 1.0,
            error_correction: ShannonLimit::default(),
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        ensure(self.mu_lo > 0.0 && self.mu_lo.is_finite(), "mu_lo", || {
            format!("must be > 0, got {}", self.mu_lo)
        })?;
        ensure(
            self.mu_hi > self.mu_lo && self.mu_hi.is_finite(),
            "mu_hi",
            || format!("must exceed mu_lo = {}, got {}", self.mu_lo, self.mu_hi),
        )?;
        ensure(self.grid_points >= 3, "grid_points", || {
            format!("need at least 3 grid points, got {}", self.grid_points)
        })?;
        ensure(self.tolerance > 0.0, "tolerance", || {
            format!("must be > 0, got {}", self.tolerance)
        })?;
        ensure(self.p0 > 0.0 && self.p0 <= 1.0, "p0", || {
            format!("must be in (0, 1], got {}", self.p0)
        })?;
        Ok(())
    }
}

/// Rate at one operating point of the fixed-error-rate channel model.
pub fn rate_at(
    block_len: usize,
    eta: f64,
    error_rate: f64,
    mu: f64,
    opts: &OptimizerOptions,
) -> Result<KeyRateReport> {
    ensure((0.0..=1.0).contains(&eta), "eta", || {
        format!("must be in [0, 1], got {eta}")
    })?;
    let q = channel_q(block_len, mu, eta);
    let inputs = RateInputs::from_error_rates(block_len, mu, opts.p0, q, error_rate, error_rate)?;
    key_rate(&inputs, &opts.error_correction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuOptimum {
    /// `None` when no grid point gives a positive rate.
    pub mu_opt: Option<f64>,
    pub rate: f64,
    /// Best rate found by the coarse grid alone.
    pub grid_rate: f64,
}

/// Maximizes the key rate over `mu`: a log-spaced grid scan localizes the
/// peak, then golden-section search refines it inside the neighboring
/// grid cells.
pub fn optimize_mu(
    block_len: usize,
    eta: f64,
    error_rate: f64,
    opts: &OptimizerOptions,
) -> Result<MuOptimum> {
    opts.validate()?;
    ensure(eta > 0.0 && eta <= 1.0, "eta", || {
        format!("must be in (0, 1], got {eta}")
    })?;
    ensure((0.0..0.5).contains(&error_rate), "error_rate", || {
        format!("must be in [0, 0.5), got {error_rate}")
    })?;

    let eval = |ln_mu: f64| -> Result<f64> {
        Ok(rate_at(block_len, eta, error_rate, ln_mu.exp(), opts)?.rate_per_pulse)
    };

    let (lo, hi) = (opts.mu_lo.ln(), opts.mu_hi.ln());
    let n = opts.grid_points;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let values = grid.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;
    let (best, &grid_rate) =
        values.iter().enumerate().fold(
            (0, &values[0]),
            |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc },
        );

    if grid_rate <= 0.0 {
        return Ok(MuOptimum {
            mu_opt: None,
            rate: 0.0,
            grid_rate: 0.0,
        });
    }

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n - 1)];
    let (x, fx) = golden_section_max(eval, a, b, opts.tolerance)?;
    let (x, rate) = if fx >= grid_rate {
        (x, fx)
    } else {
        (grid[best], grid_rate)
    };
    Ok(MuOptimum {
        mu_opt: Some(x.exp()),
        rate,
        grid_rate,
    })
}

fn golden_section_max(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticOptimum {
    pub mu_opt: f64,
    pub rate_opt: f64,
}

/// Small-loss, zero-error optimum: `mu = (L-1) eta / (3L-2)` and
/// `R = (L-1)^2 eta^2 / (2L(3L-2))`.
pub fn asymptotic_refs(block_len: usize, eta: f64) -> AsymptoticOptimum {
    let l = block_len as f64;
    AsymptoticOptimum {
        mu_opt: (l - 1.0) * eta / (3.0 * l - 2.0),
        rate_opt: (l - 1.0).powi(2) * eta * eta / (2.0 * l * (3.0 * l - 2.0)),
    }
}

/// `eta = 10^(-dB/10)`.
pub fn db_to_eta(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn eta_to_db(eta: f64) -> f64 {
    -10.0 * eta.log10()
}

/// `lo, lo + step, ..., hi` with points computed by index, not accumulation.
pub fn db_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    ensure(step > 0.0 && step.is_finite(), "step", || {
        format!("must be > 0, got {step}")
    })?;
    ensure(hi >= lo, "hi", || {
        format!("range end {hi} is below its start {lo}")
    })?;
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub block_sizes: Vec<usize>,
    /// Channel losses in dB.
    pub eta_db: Vec<f64>,
    pub error_rate: f64,
    pub options: OptimizerOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        ensure(!self.block_sizes.is_empty(), "L_values", || {
            "list is empty".into()
        })?;
        ensure(!self.eta_db.is_empty(), "eta_grid", || {
            "grid is empty".into()
        })?;
        for &l in &self.block_sizes {
            ensure(l >= 2, "L", || format!("must be >= 2, got {l}"))?;
        }
        for &db in &self.eta_db {
            ensure(db >= 0.0 && db.is_finite(), "eta_db", || {
                format!("loss must be a finite value >= 0 dB, got {db}")
            })?;
        }
        ensure((0.0..0.5).contains(&self.error_rate), "error_rate", || {
            format!("must be in [0, 0.5), got {}", self.error_rate)
        })?;
        self.options.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "L")]
    pub block_len: usize,
    pub eta_db: f64,
    pub eta: f64,
    pub mu_opt: Option<f64>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    pub rtag: Option<f64>,
    pub rate: f64,
    pub error: Option<String>,
}

/// One row per `(L, eta)` pair, `L`-major in the given order, `eta` ascending.
/// Per-row failures are recorded in the row.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut losses = spec.eta_db.clone();
    losses.sort_by(|a, b| b.total_cmp(a));
    let points: Vec<(usize, f64)> = spec
        .block_sizes
        .iter()
        .flat_map(|&l| losses.iter().map(move |&db| (l, db)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(l, db)| sweep_row(l, db, spec.error_rate, &spec.options))
        .collect())
}

fn sweep_row(block_len: usize, eta_db: f64, error_rate: f64, opts: &OptimizerOptions) -> SweepRow {
    let eta = db_to_eta(eta_db);
    let mut row = SweepRow {
        block_len,
        eta_db,
        eta,
        mu_opt: None,
        q: None,
        rtag: None,
        rate: 0.0,
        error: None,
    };
    let result = optimize_mu(block_len, eta, error_rate, opts).and_then(|opt| {
        let report = opt
            .mu_opt
            .map(|mu| rate_at(block_len, eta, error_rate, mu, opts))
            .transpose()?;
        Ok((opt, report))
    });
    match result {
        Ok((opt, report)) => {
            row.mu_opt = opt.mu_opt;
            row.rate = opt.rate;
            if let (Some(mu), Some(report)) = (opt.mu_opt, report) {
                row.q = Some(channel_q(block_len, mu, eta));
                row.rtag = Some(report.rtag);
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default()
    }

    #[test]
    fn asymptotic_closed_forms() {
        let r = asymptotic_refs(2, 0.01);
        assert_relative_eq!(r.mu_opt, 0.0025, max_relative = 1e-15);
        assert_relative_eq!(r.rate_opt, 1e-4 / 16.0, max_relative = 1e-15);
        let big = asymptotic_refs(1_000_000, 1.0);
        assert_relative_eq!(big.rate_opt, 1.0 / 6.0, max_relative = 1e-5);
        assert_relative_eq!(
            big.rate_opt / r.rate_opt * 1e-4,
            8.0 / 3.0,
            max_relative = 1e-5
        );
    }

    #[test]
    fn zero_error_small_loss_matches_asymptotics() {
        for l in [2, 3, 4, 20] {
            for eta in [1e-3, 1e-4] {
                let opt = optimize_mu(l, eta, 0.0, &opts()).unwrap();
                let refs = asymptotic_refs(l, eta);
                let mu = opt.mu_opt.unwrap();
                assert!(
                    (mu - refs.mu_opt).abs() / refs.mu_opt < 0.05,
                    "L={l} eta={eta}"
                );
                assert!((opt.rate - refs.rate_opt).abs() / refs.rate_opt < 0.05);
            }
        }
        let opt = optimize_mu(2, 1e-4, 0.0, &opts()).unwrap();
        assert_relative_eq!(opt.rate, 1e-8 / 16.0, max_relative = 0.01);
    }

    #[test]
    fn refinement_never_regresses() {
        for (l, eta, e) in [
            (2, 0.5, 0.03),
            (20, 1.0, 0.03),
            (4, 0.01, 0.0),
            (7, 0.1, 0.08),
        ] {
            let opt = optimize_mu(l, eta, e, &opts()).unwrap();
            assert!(opt.rate >= opt.grid_rate);
        }
    }

    #[test]
    fn unreachable_rate_reports_no_mu() {
        let opt = optimize_mu(4, 0.1, 0.2, &opts()).unwrap();
        assert_eq!(opt.mu_opt, None);
        assert_eq!(opt.rate, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(optimize_mu(2, 0.0, 0.03, &opts()).is_err());
        assert!(optimize_mu(2, 0.1, 0.5, &opts()).is_err());
        let bad = OptimizerOptions {
            mu_hi: 1e-7,
            ..opts()
        };
        assert!(optimize_mu(2, 0.1, 0.0, &bad).is_err());
    }

    #[test]
    fn db_conversions() {
        assert_relative_eq!(db_to_eta(20.0), 0.01, max_relative = 1e-15);
        assert_relative_eq!(eta_to_db(1e-3), 30.0, max_relative = 1e-15);
        let grid = db_grid(0.0, 40.0, 0.5).unwrap();
        assert_eq!(grid.len(), 81);
        assert_eq!(grid[80], 40.0);
        assert_eq!(db_grid(1.0, 1.0, 0.3).unwrap(), vec![1.0]);
        assert!(db_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sweep_ordering_and_monotonicity() {
        let spec = SweepSpec {
            block_sizes: vec![4, 2],
            eta_db: vec![0.0, 10.0, 5.0, 30.0, 20.0],
            error_rate: 0.03,
            options: opts(),
        };
        let rows = sweep(&spec).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows[..5].iter().all(|r| r.block_len == 4));
        for block in rows.chunks(5) {
            for w in block.windows(2) {
                assert!(w[0].eta < w[1].eta);
                assert!(w[0].rate <= w[1].rate);
            }
            assert!(block.iter().all(|r| r.error.is_none() && r.rate > 0.0));
        }
    }

    #[test]
    fn sweep_matches_serial_evaluation() {
        let spec = SweepSpec {
            block_sizes: vec![3],
            eta_db: vec![3.0, 13.0],
            error_rate: 0.01,
            options: opts(),
        };
        let rows = sweep(&spec).unwrap();
        for row in rows {
            let opt = optimize_mu(3, row.eta, 0.01, &opts()).unwrap();
            assert_eq!(row.rate, opt.rate);
            assert_eq!(row.mu_opt, opt.mu_opt);
        }
    }
}
