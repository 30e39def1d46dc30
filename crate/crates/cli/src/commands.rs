use std::path::Path;

use dqps_core::calibration::{
    simulate_three_detector, simulate_three_detector_logged, simulate_two_detector,
    simulate_two_detector_logged, CalibSetup2, CalibSetup3, CalibrationReport, TrainEvent,
};
use dqps_core::keyrate::ShannonLimit;
use dqps_core::optimizer::{db_grid, optimize_mu, rate_at, sweep, OptimizerOptions, SweepSpec};
use dqps_core::protocol::{
    basis_independence_test, estimate_key_rate, run_simulation, ChannelModel, ProtocolParams,
};
use dqps_core::tagging::{rtag_bruteforce, rtag_coherent, rtag_general, OracleOptions};
use dqps_core::{channel_q, KeyRateReport, SourceDistribution, TagParams};
use serde::Serialize;

use crate::cli::{
    CalibModeArg, CalibrateArgs, Cli, Command, KeyrateArgs, RtagArgs, SimulateArgs, SweepArgs,
};
use crate::error::{CliError, CliResult};
use crate::output::{Format, RecordWriter};

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = cli.command.common().threads;
    match threads {
        None => dispatch(&cli.command),
        Some(0) => Err(CliError::Validation(
            "invalid `threads`: must be >= 1".into(),
        )),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Resource(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(&cli.command)),
    }
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Keyrate(a) => keyrate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => simulate(a),
        Command::Rtag(a) => rtag(a),
        Command::Calibrate(a) => calibrate(a),
    }
}

fn error_correction(fec: f64) -> CliResult<ShannonLimit> {
    if fec >= 1.0 && fec.is_finite() {
        Ok(ShannonLimit { inefficiency: fec })
    } else {
        Err(CliError::Validation(format!(
            "invalid `fec`: must be >= 1, got {fec}"
        )))
    }
}

#[derive(Serialize)]
struct KeyrateRecord {
    #[serde(rename = "L")]
    block_len: usize,
    eta: f64,
    error_rate: f64,
    mu_opt: Option<f64>,
    #[serde(rename = "Q")]
    q: f64,
    #[serde(flatten)]
    report: KeyRateReport,
}

fn keyrate(a: &KeyrateArgs) -> CliResult<()> {
    let eta = a.eta.value();
    if !(0.0..0.5).contains(&a.error_rate) {
        return Err(CliError::Validation(format!(
            "invalid `error-rate`: must be in [0, 0.5), got {}",
            a.error_rate
        )));
    }
    let opts = OptimizerOptions {
        p0: a.p0,
        error_correction: error_correction(a.fec)?,
        ..OptimizerOptions::default()
    };
    let (mu, mu_opt) = match a.mu.mu {
        Some(mu) => (mu, None),
        None => {
            let best = optimize_mu(a.block_len, eta, a.error_rate, &opts)?;
            (best.mu_opt.unwrap_or(opts.mu_lo), best.mu_opt)
        }
    };
    let report = rate_at(a.block_len, eta, a.error_rate, mu, &opts)?;
    let record = KeyrateRecord {
        block_len: a.block_len,
        eta,
        error_rate: a.error_rate,
        mu_opt,
        q: channel_q(a.block_len, mu, eta),
        report,
    };
    let mut out = RecordWriter::new(a.common.format.unwrap_or(Format::Jsonl));
    out.record(&record)?;
    out.finish(a.common.output.as_deref())
}

/// Parses `lo:hi:step`.
pub fn parse_range(text: &str) -> CliResult<(f64, f64, f64)> {
    let bad = || {
        CliError::Validation(format!(
            "invalid `eta-db-range`: expected lo:hi:step, got {text:?}"
        ))
    };
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    match parts[..] {
        [lo, hi, step] => Ok((lo, hi, step)),
        _ => Err(bad()),
    }
}

#[derive(Serialize)]
struct SweepCsvRow {
    #[serde(rename = "L")]
    block_len: usize,
    eta_db: f64,
    eta: f64,
    mu_opt: Option<f64>,
    #[serde(rename = "Q")]
    q: Option<f64>,
    rtag: Option<f64>,
    rate: f64,
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    let (lo, hi, step) = parse_range(&a.eta_db_range)?;
    let spec = SweepSpec {
        block_sizes: a.block_sizes.clone(),
        eta_db: db_grid(lo, hi, step)?,
        error_rate: a.error_rate,
        options: OptimizerOptions {
            p0: a.p0,
            error_correction: error_correction(a.fec)?,
            ..OptimizerOptions::default()
        },
    };
    let rows = sweep(&spec)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut out = RecordWriter::new(format);
    for row in &rows {
        if let Some(err) = &row.error {
            log::warn!("L = {}, {} dB: {err}", row.block_len, row.eta_db);
        }
        match format {
            Format::Jsonl => out.record(row)?,
            Format::Csv => out.record(&SweepCsvRow {
                block_len: row.block_len,
                eta_db: row.eta_db,
                eta: row.eta,
                mu_opt: row.mu_opt,
                q: row.q,
                rtag: row.rtag,
                rate: row.rate,
            })?,
        }
    }
    out.finish(a.common.output.as_deref())
}

#[derive(Serialize)]
struct BasisTestRecord {
    chi2: f64,
    dof: usize,
    p_value: f64,
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let params = ProtocolParams::new(a.block_len, a.mu, a.p1, a.blocks, a.seed)?;
    let channel = ChannelModel::new(
        a.eta.value(),
        a.p_dark,
        a.delta.unwrap_or(0.0),
        a.bitflip.unwrap_or(0.0),
    )?;
    let stats = run_simulation(&params, &channel);
    let report = estimate_key_rate(&stats, &params)?;
    let chi = basis_independence_test(&stats);
    let mut out = RecordWriter::new(a.common.format.unwrap_or(Format::Jsonl));
    out.record(&stats)?;
    out.record(&report)?;
    out.record(&BasisTestRecord {
        chi2: chi.statistic,
        dof: chi.dof,
        p_value: chi.p_value,
    })?;
    out.finish(a.common.output.as_deref())
}

fn load_source(path: &Path) -> CliResult<SourceDistribution> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<SourceDistribution>()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct RtagRecord {
    #[serde(rename = "L")]
    block_len: usize,
    mu: Option<f64>,
    rtag: f64,
    oracle: Option<f64>,
    truncation_bound: Option<f64>,
    configs_enumerated: Option<u64>,
}

fn rtag(a: &RtagArgs) -> CliResult<()> {
    let record = if let Some(path) = &a.source {
        let src = load_source(path)?;
        if let Some(l) = a.block_len.filter(|&l| l != src.block_len()) {
            return Err(CliError::Validation(format!(
                "invalid `L`: {l} does not match the {} pulses per block in {}",
                src.block_len(),
                path.display()
            )));
        }
        RtagRecord {
            block_len: src.block_len(),
            mu: None,
            rtag: rtag_general(&src),
            oracle: None,
            truncation_bound: None,
            configs_enumerated: None,
        }
    } else {
        let (Some(block_len), Some(mu)) = (a.block_len, a.mu) else {
            unreachable!("clap requires L and mu without a source")
        };
        let params = TagParams::new(block_len, mu)?;
        let mut record = RtagRecord {
            block_len,
            mu: Some(mu),
            rtag: rtag_coherent(&params),
            oracle: None,
            truncation_bound: None,
            configs_enumerated: None,
        };
        if a.oracle {
            if !(a.work_limit >= 1.0 && a.work_limit.is_finite()) {
                return Err(CliError::Validation(format!(
                    "invalid `work-limit`: must be >= 1, got {}",
                    a.work_limit
                )));
            }
            let opts = OracleOptions {
                photon_cap: a.cap,
                work_limit: a.work_limit as u128,
            };
            let bf = rtag_bruteforce(&params, opts)?;
            record.oracle = Some(bf.value);
            record.truncation_bound = Some(bf.truncation_bound);
            record.configs_enumerated =
                Some(u64::try_from(bf.configs_enumerated).unwrap_or(u64::MAX));
        }
        record
    };
    let mut out = RecordWriter::new(a.common.format.unwrap_or(Format::Jsonl));
    out.record(&record)?;
    out.finish(a.common.output.as_deref())
}

fn calibrate(a: &CalibrateArgs) -> CliResult<()> {
    let source = a.source.as_deref().map(load_source).transpose()?;
    let block_len = match (a.block_len, &source) {
        (Some(l), _) => l,
        (None, Some(src)) => src.block_len(),
        (None, None) => unreachable!("clap requires L without a source"),
    };
    let logged = a.events.is_some();
    let (report, events): (CalibrationReport, Vec<TrainEvent>) = match a.mode {
        CalibModeArg::TwoDetector => {
            let r = a.r.unwrap_or(1.0 - a.t);
            let setup = CalibSetup2 {
                block_len,
                mu: a.mu,
                eta1: a.eta1.unwrap_or(a.t * a.eff1),
                eta2: a.eta2.unwrap_or(r * a.eff2),
                true_t: a.t,
                true_r: r,
                true_eff1: a.eff1,
                true_eff2: a.eff2,
                n_test: a.n_test,
                seed: a.seed,
                source,
            };
            if logged {
                simulate_two_detector_logged(&setup)?
            } else {
                (simulate_two_detector(&setup)?, Vec::new())
            }
        }
        CalibModeArg::ThreeDetector => {
            if source.is_some() {
                return Err(CliError::Validation(
                    "invalid `source`: the three-detector setup supports coherent sources only"
                        .into(),
                ));
            }
            if a.dead_time == 0 {
                return Err(CliError::Validation(
                    "invalid `dead-time`: must be >= 1".into(),
                ));
            }
            let (r1, r2) = (1.0 - a.t1, 1.0 - a.t2);
            let setup = CalibSetup3 {
                block_len,
                mu: a.mu,
                eta1: a.eta1.unwrap_or(a.t1 * a.t2 * a.eff1),
                eta2: a.eta2.unwrap_or(a.t1 * r2 * a.eff2),
                eta3: a.eta3.unwrap_or(r1 * a.eff3),
                eta_abs: a.eta_abs.unwrap_or(a.absorber),
                true_abs: a.absorber,
                true_t1: a.t1,
                true_r1: r1,
                true_t2: a.t2,
                true_r2: r2,
                true_eff1: a.eff1,
                true_eff2: a.eff2,
                true_eff3: a.eff3,
                dead_time: a.dead_time,
                n_test: a.n_test,
                seed: a.seed,
            };
            if logged {
                simulate_three_detector_logged(&setup)?
            } else {
                (simulate_three_detector(&setup)?, Vec::new())
            }
        }
    };
    let format = a.common.format.unwrap_or(Format::Jsonl);
    if let Some(path) = &a.events {
        let mut log = RecordWriter::new(format);
        for e in &events {
            log.record(e)?;
        }
        log.finish(Some(path))?;
    }
    let mut out = RecordWriter::new(format);
    out.record(&report)?;
    out.finish(a.common.output.as_deref())
}
