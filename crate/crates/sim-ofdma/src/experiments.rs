//! Sweeps behind the `nmse`, `ber`, `sumrate` and `single` verbs.
//!
//! Run `r` of a sweep uses the seed `derive_seed(base, r)` for both its
//! channel realization and its optimizer start. Work fans out over the
//! current rayon pool; rows are assembled in a fixed order (sweep value,
//! scheme, run) so output never depends on scheduling.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sim_ofdma_core::allocation::{check_feasible, gamma_expanded, AssignmentMatrix, MilpInstance};
use sim_ofdma_core::config::SystemConfig;
use sim_ofdma_core::joint::{optimize, FitState};
use sim_ofdma_core::metrics::{
    ber_monte_carlo, digital_zf_channels, heatmap, iterative_water_filling, nmse, ofdma_snr_offset_db,
    sum_rate, LinkBudget, MetricsRecord,
};
use sim_ofdma_core::nalgebra::DMatrix;
use sim_ofdma_core::phase::{optimal_alpha, AlphaMode};
use sim_ofdma_core::rng::derive_seed;
use sim_ofdma_core::stack::SimStack;
use sim_ofdma_core::CMatrix;

use crate::output::{format_matrix, format_milp, format_trace, write_metadata, write_rows, Row};
use crate::settings::{ExperimentConfig, Scheme};
use crate::RunError;

/// Outer rounds of the interference-aware water-filling.
const WATER_FILLING_ROUNDS: usize = 20;

pub fn run_seed(base: u64, run: usize) -> u64 {
    derive_seed(base, run as u64)
}

/// What the link-level metrics need from a scheme.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub h: Vec<CMatrix>,
    pub alpha: f64,
    pub assignment: AssignmentMatrix,
    pub gamma: f64,
    pub fit: Option<FitState>,
}

/// Optimizes (or, for digital ZF, computes) the end-to-end channel of a scheme.
pub fn evaluate_scheme(
    cfg: &ExperimentConfig,
    stack: &SimStack,
    channel: &[CMatrix],
    scheme: Scheme,
    k_c: usize,
    seed: u64,
) -> Result<Evaluated, RunError> {
    match scheme.zstep() {
        Some(zstep) => {
            let fit = optimize(stack, channel, &cfg.ao_config(k_c, zstep), seed)?;
            Ok(Evaluated {
                h: stack.effective_channels(channel, &fit.phases),
                alpha: fit.alpha,
                assignment: fit.assignment.clone(),
                gamma: fit.gamma,
                fit: Some(fit),
            })
        }
        None => {
            let h = digital_zf_channels(channel)?;
            let z = AssignmentMatrix::ones(cfg.system.users, cfg.system.subcarriers);
            let alpha = optimal_alpha(&h, &z, AlphaMode::Restricted)?;
            Ok(Evaluated {
                gamma: gamma_expanded(&h, alpha, &z),
                h,
                alpha,
                assignment: z,
                fit: None,
            })
        }
    }
}

/// Link metrics of one scheme at one power.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub ber_per_user: Vec<f64>,
    pub ber: f64,
    pub sum_rate: f64,
}

pub fn link_metrics(e: &Evaluated, budget: &LinkBudget, trials: u64, seed: u64) -> Result<LinkMetrics, RunError> {
    let noise = budget.effective_noise();
    let powers = iterative_water_filling(
        &e.h,
        e.alpha,
        &e.assignment,
        budget.transmit_power(),
        noise,
        WATER_FILLING_ROUNDS,
    )?;
    let rate = sum_rate(&e.h, e.alpha, &e.assignment, &powers, noise)?;
    let est = if trials == 0 {
        None
    } else {
        Some(ber_monte_carlo(&e.h, e.alpha, &e.assignment, &powers, noise, 0..trials, seed)?)
    };
    Ok(LinkMetrics {
        ber_per_user: est.as_ref().map_or_else(Vec::new, |b| b.per_user()),
        ber: est.as_ref().map_or(f64::NAN, |b| b.aggregate()),
        sum_rate: rate,
    })
}

fn scheme_offset_db(scheme: Scheme, system: &SystemConfig, k_c: usize) -> f64 {
    if scheme == Scheme::SimOfdma {
        ofdma_snr_offset_db(k_c, system.users, system.subcarriers)
    } else {
        0.0
    }
}

fn channels(cfg: &ExperimentConfig) -> Result<Vec<(u64, Vec<CMatrix>)>, RunError> {
    (0..cfg.system.runs)
        .into_par_iter()
        .map(|r| {
            let seed = run_seed(cfg.seed, r);
            Ok((seed, cfg.system.channel(seed)?.matrices))
        })
        .collect()
}

struct RowSink<'a> {
    hash: &'a str,
    key: &'static str,
    rows: Vec<Row>,
}

impl RowSink<'_> {
    fn push(&mut self, scheme: Scheme, value: f64, seed: u64, metric: &str, v: f64) {
        self.rows.push(Row {
            scheme: scheme.label().into(),
            sweep_key: self.key.into(),
            sweep_value: value,
            seed,
            metric_name: metric.into(),
            metric_value: v,
            config_hash: self.hash.into(),
        });
    }

    /// Per-run rows followed by `<metric>_mean` and `<metric>_std`.
    fn push_runs(&mut self, scheme: Scheme, value: f64, base: u64, metric: &str, runs: &[(u64, f64)]) {
        for &(seed, v) in runs {
            self.push(scheme, value, seed, metric, v);
        }
        let (mean, std) = mean_std(runs.iter().map(|r| r.1));
        self.push(scheme, value, base, &format!("{metric}_mean"), mean);
        self.push(scheme, value, base, &format!("{metric}_std"), std);
    }

    fn warn_infeasible(&mut self, schemes: &[Scheme], value: f64, base: u64, why: &str) {
        eprintln!("warning: skipping {} = {value}: {why}", self.key);
        for &s in schemes {
            self.push(s, value, base, "infeasible", f64::NAN);
        }
    }
}

/// Mean and sample standard deviation, summed in order.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Fitting NMSE versus `K_c` for joint, greedy and random assignment.
pub fn run_nmse(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let schemes = cfg.schemes_for(&[Scheme::Joint, Scheme::Greedy, Scheme::Random])?;
    let stack = cfg.system.build_stack()?;
    let chans = channels(cfg)?;
    let hash = cfg.hash();
    let mut sink = RowSink { hash: &hash, key: "k_c", rows: Vec::new() };
    for &k_c in &cfg.sweep.nmse_k_c {
        if let Err(e) = check_feasible(cfg.system.users, cfg.system.subcarriers, k_c) {
            sink.warn_infeasible(&schemes, k_c as f64, cfg.seed, &e.to_string());
            continue;
        }
        let tasks: Vec<(Scheme, usize)> = schemes
            .iter()
            .flat_map(|&s| (0..chans.len()).map(move |r| (s, r)))
            .collect();
        let values: Vec<f64> = tasks
            .par_iter()
            .map(|&(s, r)| {
                let (seed, ch) = &chans[r];
                let e = evaluate_scheme(cfg, &stack, ch, s, k_c, *seed)?;
                Ok(nmse(e.gamma, &e.assignment)?)
            })
            .collect::<Result<_, RunError>>()?;
        for (j, &s) in schemes.iter().enumerate() {
            let runs: Vec<(u64, f64)> = (0..chans.len())
                .map(|r| (chans[r].0, values[j * chans.len() + r]))
                .collect();
            sink.push_runs(s, k_c as f64, cfg.seed, "nmse", &runs);
        }
    }
    Ok(sink.rows)
}

/// BER versus transmit power for the proposed design and the references.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let schemes = cfg.schemes_for(&[Scheme::Joint, Scheme::SimSdma, Scheme::SimOfdma, Scheme::DigitalZf])?;
    let sys = &cfg.system;
    check_feasible(sys.users, sys.subcarriers, sys.k_c)?;
    let stack = sys.build_stack()?;
    let chans = channels(cfg)?;
    let hash = cfg.hash();
    let tasks: Vec<(Scheme, usize)> = schemes
        .iter()
        .flat_map(|&s| (0..chans.len()).map(move |r| (s, r)))
        .collect();
    // per task: BER at every swept power
    let results: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(s, r)| {
            let (seed, ch) = &chans[r];
            let e = evaluate_scheme(cfg, &stack, ch, s, sys.k_c, *seed)?;
            cfg.sweep
                .power_dbm
                .iter()
                .map(|&dbm| {
                    let budget = cfg
                        .system
                        .link_budget(dbm)?
                        .with_offset(scheme_offset_db(s, sys, sys.k_c));
                    Ok(link_metrics(&e, &budget, sys.ber_trials, *seed)?.ber)
                })
                .collect::<Result<Vec<f64>, RunError>>()
        })
        .collect::<Result<_, RunError>>()?;
    let mut sink = RowSink { hash: &hash, key: "power_dbm", rows: Vec::new() };
    for (pi, &dbm) in cfg.sweep.power_dbm.iter().enumerate() {
        for (j, &s) in schemes.iter().enumerate() {
            let runs: Vec<(u64, f64)> = (0..chans.len())
                .map(|r| (chans[r].0, results[j * chans.len() + r][pi]))
                .collect();
            sink.push_runs(s, dbm, cfg.seed, "ber", &runs);
        }
    }
    Ok(sink.rows)
}

/// `K_c` values of the sum-rate sweep.
pub fn sumrate_k_c(cfg: &ExperimentConfig) -> Vec<usize> {
    if !cfg.sweep.sumrate_k_c.is_empty() {
        return cfg.sweep.sumrate_k_c.clone();
    }
    let s = &cfg.system;
    (s.subcarriers.div_ceil(s.users)..=s.subcarriers).collect()
}

/// Sum rate versus `K_c` at the configured transmit power, with the
/// digital-ZF reference repeated on every point.
pub fn run_sumrate(cfg: &ExperimentConfig) -> Result<Vec<Row>, RunError> {
    let schemes = cfg.schemes_for(&[Scheme::Joint, Scheme::DigitalZf])?;
    let sys = &cfg.system;
    let stack = sys.build_stack()?;
    let chans = channels(cfg)?;
    let hash = cfg.hash();
    let budget = sys.link_budget(sys.transmit_power_dbm)?;
    let k_cs = sumrate_k_c(cfg);
    let zf: Vec<f64> = if schemes.contains(&Scheme::DigitalZf) {
        chans
            .par_iter()
            .map(|(seed, ch)| {
                let e = evaluate_scheme(cfg, &stack, ch, Scheme::DigitalZf, sys.users, *seed)?;
                Ok(link_metrics(&e, &budget, 0, *seed)?.sum_rate)
            })
            .collect::<Result<_, RunError>>()?
    } else {
        Vec::new()
    };
    let mut sink = RowSink { hash: &hash, key: "k_c", rows: Vec::new() };
    for &k_c in &k_cs {
        if let Err(e) = check_feasible(sys.users, sys.subcarriers, k_c) {
            sink.warn_infeasible(&schemes, k_c as f64, cfg.seed, &e.to_string());
            continue;
        }
        for &s in &schemes {
            let runs: Vec<(u64, f64)> = if s == Scheme::DigitalZf {
                chans.iter().zip(&zf).map(|((seed, _), &v)| (*seed, v)).collect()
            } else {
                chans
                    .par_iter()
                    .map(|(seed, ch)| {
                        let e = evaluate_scheme(cfg, &stack, ch, s, k_c, *seed)?;
                        Ok((*seed, link_metrics(&e, &budget, 0, *seed)?.sum_rate))
                    })
                    .collect::<Result<_, RunError>>()?
            };
            sink.push_runs(s, k_c as f64, cfg.seed, "sum_rate", &runs);
        }
    }
    Ok(sink.rows)
}

/// One optimization with everything needed to inspect it.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub seed: u64,
    pub fit: FitState,
    pub record: MetricsRecord,
    pub heatmap: DMatrix<f64>,
    /// The 0-1 program at the final state (joint Z-step only).
    pub milp: Option<MilpInstance>,
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleRun, RunError> {
    let sys = &cfg.system;
    let seed = run_seed(cfg.seed, 0);
    let stack = sys.build_stack()?;
    let channel = sys.channel(seed)?.matrices;
    let zstep = cfg.zstep();
    let fit = optimize(&stack, &channel, &cfg.ao_config(sys.k_c, zstep), seed)?;
    let h = stack.effective_channels(&channel, &fit.phases);
    let e = Evaluated {
        h,
        alpha: fit.alpha,
        assignment: fit.assignment.clone(),
        gamma: fit.gamma,
        fit: None,
    };
    let offset = if zstep == sim_ofdma_core::joint::ZStep::FixedOfdma {
        scheme_offset_db(Scheme::SimOfdma, sys, sys.k_c)
    } else {
        0.0
    };
    let budget = sys.link_budget(sys.transmit_power_dbm)?.with_offset(offset);
    let link = link_metrics(&e, &budget, sys.ber_trials, seed)?;
    let milp = match zstep {
        sim_ofdma_core::joint::ZStep::Milp => Some(MilpInstance::from_effective(&e.h, e.alpha, sys.k_c)?),
        _ => None,
    };
    Ok(SingleRun {
        seed,
        heatmap: heatmap(&e.h, e.alpha, &e.assignment),
        record: MetricsRecord {
            scheme: zstep.label().into(),
            seed,
            config_hash: cfg.hash(),
            nmse: nmse(fit.gamma, &fit.assignment)?,
            ber_per_user: link.ber_per_user,
            ber: link.ber,
            sum_rate: link.sum_rate,
        },
        milp,
        fit,
    })
}

/// `<name>.csv` plus `<name>.meta.toml`.
pub fn write_sweep(out: &Path, name: &str, cfg: &ExperimentConfig, rows: &[Row]) -> Result<(), RunError> {
    fs::create_dir_all(out)?;
    write_rows(&out.join(format!("{name}.csv")), rows)?;
    write_metadata(&out.join(format!("{name}.meta.toml")), cfg, name)
}

/// Metrics CSV, trace CSV, heatmap, optional 0-1 program and metadata.
pub fn write_single(out: &Path, cfg: &ExperimentConfig, run: &SingleRun) -> Result<(), RunError> {
    fs::create_dir_all(out)?;
    let r = &run.record;
    let mut rows = Vec::new();
    let mut push = |name: String, v: f64| {
        rows.push(Row {
            scheme: r.scheme.clone(),
            sweep_key: "k_c".into(),
            sweep_value: cfg.system.k_c as f64,
            seed: r.seed,
            metric_name: name,
            metric_value: v,
            config_hash: r.config_hash.clone(),
        })
    };
    push("nmse".into(), r.nmse);
    push("gamma".into(), run.fit.gamma);
    push("alpha".into(), run.fit.alpha);
    push("ber".into(), r.ber);
    for (k, b) in r.ber_per_user.iter().enumerate() {
        push(format!("ber_user{k}"), *b);
    }
    push("sum_rate".into(), r.sum_rate);
    write_rows(&out.join("single.csv"), &rows)?;
    fs::write(out.join("single_trace.csv"), format_trace(&run.fit.trace, run.seed, &r.config_hash))?;
    fs::write(out.join("single_heatmap.txt"), format_matrix(&run.heatmap, run.seed, &r.config_hash))?;
    if let Some(m) = &run.milp {
        fs::write(out.join("single_milp.txt"), format_milp(m))?;
    }
    write_metadata(&out.join("single.meta.toml"), cfg, "single")
}
