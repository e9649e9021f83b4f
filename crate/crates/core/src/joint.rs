//! Alternating optimization of the assignment, the SIM phases and the
//! scaling factor.
//!
//! Each iteration runs a phase step over all layers, an `alpha` step, an
//! assignment step and a second `alpha` step. Every sub-step is either exact
//! or guarded so the fitting cost `Gamma` never increases.

use alloc::vec::Vec;
use core::fmt;

use crate::allocation::{
    baseline_assignment, gamma_expanded, greedy_assignment, random_assignment,
    solve_branch_and_bound, AssignmentMatrix, Baseline, EffectiveProbe, MilpInstance,
};
use crate::linalg::CMatrix;
use crate::phase::{optimal_alpha, sweep_layers, AlphaMode, InnerSolver};
use crate::rng::derive_seed;
use crate::stack::{PhaseConfig, SimStack};
use crate::{Error, Result};

/// How the assignment step picks `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZStep {
    /// Exact 0-1 program solved by branch and bound.
    #[default]
    Milp,
    /// Random `Z` drawn once at initialization and kept.
    Random,
    /// Magnitude-ranked greedy `Z` built once from the initial phases and kept.
    Greedy,
    FixedOfdma,
    FixedSdma,
}

impl ZStep {
    pub fn label(self) -> &'static str {
        match self {
            ZStep::Milp => "milp",
            ZStep::Random => "random",
            ZStep::Greedy => "greedy",
            ZStep::FixedOfdma => "ofdma",
            ZStep::FixedSdma => "sdma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    /// Per-user subcarrier count `K_c`. Ignored by the fixed baselines.
    pub k_c: usize,
    pub iterations: usize,
    pub inner: InnerSolver,
    pub zstep: ZStep,
    pub alpha_mode: AlphaMode,
    /// Relative improvement below which an iteration window counts as a plateau.
    pub plateau_tol: f64,
    pub plateau_window: usize,
    pub restarts: usize,
    pub greedy_threshold: f64,
}

impl AoConfig {
    pub fn new(k_c: usize) -> Self {
        AoConfig {
            k_c,
            iterations: 50,
            inner: InnerSolver::default(),
            zstep: ZStep::Milp,
            alpha_mode: AlphaMode::Restricted,
            plateau_tol: 1e-5,
            plateau_window: 3,
            restarts: 1,
            greedy_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Init,
    Phase(usize),
    Alpha,
    Assignment,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Init => f.write_str("init"),
            Step::Phase(l) => write!(f, "phase{l}"),
            Step::Alpha => f.write_str("alpha"),
            Step::Assignment => f.write_str("assignment"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub step: Step,
    pub gamma: f64,
    pub alpha: f64,
    pub max_slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub assignment: AssignmentMatrix,
    pub phases: PhaseConfig,
    pub alpha: f64,
    pub gamma: f64,
    pub trace: Vec<TraceEntry>,
}

impl FitState {
    /// Recomputes `Gamma` from `(Z, theta, alpha)`.
    pub fn recompute_gamma(&self, stack: &SimStack, channel: &[CMatrix]) -> f64 {
        gamma_expanded(&stack.effective_channels(channel, &self.phases), self.alpha, &self.assignment)
    }

    fn log(&mut self, iteration: usize, step: Step, max_slack: f64) {
        self.trace.push(TraceEntry {
            iteration,
            step,
            gamma: self.gamma,
            alpha: self.alpha,
            max_slack,
        });
    }
}

/// Random phases, the scheme's starting `Z` and the matching `alpha`.
pub fn initialize(
    stack: &SimStack,
    channel: &[CMatrix],
    config: &AoConfig,
    seed: u64,
) -> Result<FitState> {
    let users = channel.first().map_or(0, |g| g.nrows());
    let n = stack.subcarriers();
    if channel.len() != n {
        return Err(Error::Dimension("one channel matrix per subcarrier".into()));
    }
    let phases = PhaseConfig::random(stack.layers(), stack.atoms(), seed);
    let h = stack.effective_channels(channel, &phases);
    let assignment = match config.zstep {
        ZStep::Milp | ZStep::Random => random_assignment(users, n, config.k_c, seed)?,
        ZStep::Greedy => {
            let full = AssignmentMatrix::ones(users, n);
            let probe_alpha = optimal_alpha(&h, &full, AlphaMode::Unrestricted)?;
            let probe = EffectiveProbe {
                channels: &h,
                alpha: probe_alpha,
            };
            greedy_assignment(channel, config.k_c, &probe, config.greedy_threshold)?
        }
        ZStep::FixedOfdma => baseline_assignment(Baseline::Ofdma, users, n)?,
        ZStep::FixedSdma => baseline_assignment(Baseline::Sdma, users, n)?,
    };
    let alpha = optimal_alpha(&h, &assignment, config.alpha_mode)?;
    let mut state = FitState {
        gamma: gamma_expanded(&h, alpha, &assignment),
        assignment,
        phases,
        alpha,
        trace: Vec::new(),
    };
    state.log(0, Step::Init, 0.0);
    Ok(state)
}

fn alpha_step(
    state: &mut FitState,
    h: &[CMatrix],
    mode: AlphaMode,
    iteration: usize,
) -> Result<()> {
    let alpha = optimal_alpha(h, &state.assignment, mode)?;
    let gamma = gamma_expanded(h, alpha, &state.assignment);
    // the closed form is exact; the guard only absorbs rounding
    if gamma <= state.gamma {
        state.alpha = alpha;
        state.gamma = gamma;
    }
    state.log(iteration, Step::Alpha, 0.0);
    Ok(())
}

fn assignment_step(
    state: &mut FitState,
    h: &[CMatrix],
    config: &AoConfig,
    iteration: usize,
) -> Result<()> {
    let candidate = match config.zstep {
        ZStep::Milp => {
            let instance = MilpInstance::from_effective(h, state.alpha, config.k_c)?;
            Some(solve_branch_and_bound(&instance)?.assignment)
        }
        ZStep::Random | ZStep::Greedy | ZStep::FixedOfdma | ZStep::FixedSdma => None,
    };
    if let Some(z) = candidate {
        let gamma = gamma_expanded(h, state.alpha, &z);
        if gamma <= state.gamma {
            state.assignment = z;
            state.gamma = gamma;
        }
    }
    state.log(iteration, Step::Assignment, 0.0);
    Ok(())
}

/// Runs up to `config.iterations` AO iterations from `state` and returns the
/// best state seen.
pub fn alternating_optimize(
    stack: &SimStack,
    channel: &[CMatrix],
    mut state: FitState,
    config: &AoConfig,
) -> Result<FitState> {
    let mut best: Option<(f64, AssignmentMatrix, PhaseConfig, f64)> = None;
    let mut history = Vec::with_capacity(config.iterations + 1);
    history.push(state.gamma);
    for it in 1..=config.iterations {
        let reports = sweep_layers(
            stack,
            channel,
            &mut state.phases,
            &state.assignment,
            state.alpha,
            &config.inner,
        )
        .map_err(|e| e.in_step("phase"))?;
        for r in reports {
            state.gamma = state.gamma.min(r.gamma);
            state.log(it, Step::Phase(r.layer), r.max_slack);
        }
        let h = stack.effective_channels(channel, &state.phases);
        // resynchronize with a direct evaluation
        state.gamma = gamma_expanded(&h, state.alpha, &state.assignment);
        alpha_step(&mut state, &h, config.alpha_mode, it).map_err(|e| e.in_step("alpha"))?;
        assignment_step(&mut state, &h, config, it).map_err(|e| e.in_step("assignment"))?;
        alpha_step(&mut state, &h, config.alpha_mode, it).map_err(|e| e.in_step("alpha"))?;

        if best.as_ref().is_none_or(|b| state.gamma < b.0) {
            best = Some((state.gamma, state.assignment.clone(), state.phases.clone(), state.alpha));
        }
        history.push(state.gamma);
        let w = config.plateau_window;
        if w > 0 && history.len() > w {
            let old = history[history.len() - 1 - w];
            let gain = old - state.gamma;
            if gain <= config.plateau_tol * old.abs() {
                break;
            }
        }
    }
    if let Some((gamma, assignment, phases, alpha)) = best {
        if gamma < state.gamma {
            state.gamma = gamma;
            state.assignment = assignment;
            state.phases = phases;
            state.alpha = alpha;
        }
    }
    Ok(state)
}

/// Multi-start optimization; restart `r > 0` uses a seed derived from `seed`.
pub fn optimize(
    stack: &SimStack,
    channel: &[CMatrix],
    config: &AoConfig,
    seed: u64,
) -> Result<FitState> {
    let mut best: Option<FitState> = None;
    for r in 0..config.restarts.max(1) {
        let s = if r == 0 { seed } else { derive_seed(seed, r as u64) };
        let init = initialize(stack, channel, config, s)?;
        let fit = alternating_optimize(stack, channel, init, config)?;
        if best.as_ref().is_none_or(|b| fit.gamma < b.gamma) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::Invariant("no restart ran".into()))
}
