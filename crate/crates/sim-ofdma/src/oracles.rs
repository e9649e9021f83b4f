//! Self-contained correctness checks with independent oracles. `selftest`
//! runs them all; the acceptance suite runs them at the same sizes.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sim_ofdma_core::allocation::{
    brute_force, check_feasible, gamma_expanded, random_assignment, selection_matrices, solve_branch_and_bound,
    AssignmentMatrix, MilpInstance,
};
use sim_ofdma_core::config::{Scenario, SystemConfig};
use sim_ofdma_core::joint::{optimize, AoConfig};
use sim_ofdma_core::metrics::{ber_monte_carlo, bpsk_ber, db_to_linear, water_filling};
use sim_ofdma_core::phase::{
    coordinate_descent_layer, layer_quadratic, optimal_alpha, pccp_layer, AlphaMode, PccpOptions,
};
use sim_ofdma_core::stack::{PhaseConfig, SimGeometry, SimStack};
use sim_ofdma_core::{CMatrix, Complex64};

#[derive(Debug, Clone)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Duration,
}

impl Check {
    /// Runs `f` and folds its wall time into the verdict.
    pub fn run(id: u8, name: &'static str, limit: Duration, f: impl FnOnce() -> (bool, String)) -> Self {
        let start = Instant::now();
        let (ok, detail) = f();
        let elapsed = start.elapsed();
        Check {
            id,
            name,
            passed: ok && elapsed <= limit,
            detail,
            elapsed,
            limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {}: {} ({:.2} s, limit {} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        )
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_z(rng: &mut ChaCha8Rng, k: usize, n: usize) -> AssignmentMatrix {
    let cells = (0..k * n).map(|_| rng.random_bool(0.6)).collect();
    AssignmentMatrix::new(k, n, cells).expect("shape matches")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `sum_i ||a T_i H_i T_i - T_i||_F^2` with explicit matrix products.
pub fn gamma_direct(h: &[CMatrix], alpha: f64, z: &AssignmentMatrix) -> f64 {
    selection_matrices(z)
        .iter()
        .zip(h)
        .map(|(t, hi)| {
            let t = t.map(|v| Complex64::new(v, 0.0));
            let e = &t * hi * &t * Complex64::new(alpha, 0.0) - &t;
            e.iter().map(|v| v.norm_sqr()).sum::<f64>()
        })
        .sum()
}

pub fn expansion_identity() -> Check {
    Check::run(1, "expansion identity", Duration::from_secs(5), || {
        let mut r = rng(101);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let k = r.random_range(1..=4);
            let n = r.random_range(1..=16);
            let h: Vec<CMatrix> = (0..n).map(|_| random_matrix(&mut r, k, k)).collect();
            let a = r.random_range(-3.0..3.0);
            let z = random_z(&mut r, k, n);
            let direct = gamma_direct(&h, a, &z);
            let err = if direct == 0.0 { gamma_expanded(&h, a, &z).abs() } else { rel(gamma_expanded(&h, a, &z), direct) };
            worst = worst.max(err);
        }
        (worst <= 1e-10, format!("500 instances, worst relative error {worst:.2e}"))
    })
}

fn random_stack(r: &mut ChaCha8Rng, m: usize, k: usize, layers: usize, n: usize) -> SimStack {
    let geometry = SimGeometry {
        layers,
        meta_cols: m,
        meta_rows: 1,
        atom_pitch: 0.005,
        atom_area: 2.5e-5,
        thickness: 0.05,
        feeds: k,
    };
    let w = (0..n)
        .map(|_| {
            (0..layers)
                .map(|l| random_matrix(r, m, if l == 0 { k } else { m }))
                .collect()
        })
        .collect();
    SimStack::from_matrices(geometry, vec![28e9; n], w).expect("consistent shapes")
}

pub fn vectorization_identity() -> Check {
    Check::run(2, "vectorization identity", Duration::from_secs(30), || {
        let mut r = rng(202);
        let mut worst = 0.0f64;
        let mut evaluations = 0;
        for _ in 0..100 {
            let m = r.random_range(1..=12);
            let k = r.random_range(1..=4);
            let layers = r.random_range(1..=3);
            let n = r.random_range(1..=4);
            let stack = random_stack(&mut r, m, k, layers, n);
            let g: Vec<CMatrix> = (0..n).map(|_| random_matrix(&mut r, k, m)).collect();
            let mut z = random_z(&mut r, k, n);
            z.set(0, 0, true);
            let a = r.random_range(0.1..2.0);
            let base = PhaseConfig::random(layers, m, r.random());
            for l in 0..layers {
                let q = layer_quadratic(&stack, &g, &base, &z, a, l).expect("valid shapes");
                for _ in 0..50 {
                    let theta: Vec<f64> = (0..m).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
                    let phi: Vec<Complex64> = theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                    let mut p = base.clone();
                    p.set_layer_phasors(l, &phi);
                    let direct = gamma_direct(&stack.effective_channels(&g, &p), a, &z);
                    worst = worst.max(rel(q.evaluate(&phi), direct));
                    evaluations += 1;
                }
            }
        }
        (worst <= 1e-9, format!("{evaluations} evaluations, worst relative error {worst:.2e}"))
    })
}

pub fn milp_exactness() -> Check {
    Check::run(3, "MILP exactness", Duration::from_secs(60), || {
        let mut r = rng(303);
        let shapes: Vec<(usize, usize, usize)> = [(2, 2), (2, 3), (2, 4), (3, 3)]
            .iter()
            .flat_map(|&(k, n)| (1..=n).filter(move |&kc| check_feasible(k, n, kc).is_ok()).map(move |kc| (k, n, kc)))
            .collect();
        let mut mismatches = 0;
        for t in 0..200 {
            let (k, n, k_c) = shapes[t % shapes.len()];
            let h: Vec<CMatrix> = (0..n).map(|_| random_matrix(&mut r, k, k)).collect();
            let inst = MilpInstance::from_effective(&h, r.random_range(0.2..2.0), k_c).expect("square channels");
            let (bb, bf) = (solve_branch_and_bound(&inst), brute_force(&inst));
            match (bb, bf) {
                (Ok(a), Ok(b)) if a.objective == b.objective => {}
                _ => mismatches += 1,
            }
        }
        (
            mismatches == 0,
            format!("200 instances over {} (K, N_c, K_c) shapes, {mismatches} mismatches", shapes.len()),
        )
    })
}

pub fn alpha_optimality() -> Check {
    Check::run(4, "alpha optimality", Duration::from_secs(5), || {
        let mut r = rng(404);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let k = r.random_range(1..=4);
            let n = r.random_range(1..=16);
            let h: Vec<CMatrix> = (0..n).map(|_| random_matrix(&mut r, k, k)).collect();
            let mut z = random_z(&mut r, k, n);
            z.set(0, 0, true);
            let a = optimal_alpha(&h, &z, AlphaMode::Restricted).expect("non-degenerate");
            let step = 1e-6 * a.abs().max(1.0);
            let slope = (gamma_expanded(&h, a + step, &z) - gamma_expanded(&h, a - step, &z)) / (2.0 * step);
            let g = gamma_expanded(&h, a, &z);
            worst = worst.max(slope.abs() / g.abs().max(f64::MIN_POSITIVE));
        }
        let eye = vec![CMatrix::identity(4, 4); 16];
        let unit = optimal_alpha(&eye, &AssignmentMatrix::ones(4, 16), AlphaMode::Restricted).unwrap_or(f64::NAN);
        (
            worst <= 1e-6 && (unit - 1.0).abs() <= 1e-12,
            format!("worst |slope|/Gamma {worst:.2e}, identity alpha {unit}"),
        )
    })
}

pub fn ao_descent() -> Check {
    Check::run(5, "AO descent", Duration::from_secs(600), || {
        let cfg = SystemConfig::desk();
        let mut worst = f64::NEG_INFINITY;
        let mut steps = 0;
        for seed in 0..10u64 {
            let sc = match Scenario::new(&cfg, seed) {
                Ok(s) => s,
                Err(e) => return (false, e.to_string()),
            };
            let fit = match optimize(&sc.stack, &sc.channel, &AoConfig { iterations: 50, ..cfg.ao_config(10) }, seed) {
                Ok(f) => f,
                Err(e) => return (false, e.to_string()),
            };
            for w in fit.trace.windows(2) {
                worst = worst.max((w[1].gamma - w[0].gamma) / w[0].gamma.max(1.0));
                steps += 1;
            }
        }
        (
            worst <= 1e-9,
            format!("10 seeds, {steps} sub-steps, largest increase {worst:.2e}"),
        )
    })
}

pub fn pccp_agreement() -> Check {
    Check::run(6, "PCCP/coordinate-descent agreement", Duration::from_secs(300), || {
        let cfg = SystemConfig {
            meta_cols: 4,
            meta_rows: 2,
            ..SystemConfig::desk()
        };
        let stack = match cfg.build_stack() {
            Ok(s) => s,
            Err(e) => return (false, e.to_string()),
        };
        let mut worst_gap = 0.0f64;
        let mut worst_slack = 0.0f64;
        for seed in 0..20u64 {
            let g = cfg.channel(seed).expect("valid geometry").matrices;
            let z = random_assignment(4, 16, 8, seed).expect("feasible");
            let ph = PhaseConfig::random(3, 8, seed);
            let h = stack.effective_channels(&g, &ph);
            let a = optimal_alpha(&h, &z, AlphaMode::Restricted).expect("non-degenerate");
            let l = (seed % 3) as usize;
            let q = layer_quadratic(&stack, &g, &ph, &z, a, l).expect("valid shapes");
            let init = ph.layer_phasors(l);
            let out = match pccp_layer(&q, &init, &PccpOptions::default()) {
                Ok(o) => o,
                Err(e) => return (false, format!("seed {seed}: {e}")),
            };
            let cd = q.evaluate(&coordinate_descent_layer(&q, &init, 200));
            worst_gap = worst_gap.max(rel(out.objective, cd));
            worst_slack = worst_slack.max(out.max_slack());
        }
        (
            worst_gap <= 0.01 && worst_slack < 1e-6,
            format!("20 instances, worst gap {:.3}%, worst slack {worst_slack:.1e}", 100.0 * worst_gap),
        )
    })
}

pub fn ber_calibration() -> Check {
    Check::run(7, "BER calibration", Duration::from_secs(60), || {
        let (k, n) = (4, 25);
        let z = AssignmentMatrix::ones(k, n);
        let h = vec![CMatrix::identity(k, k); n];
        let noise = 1e-3;
        let mut ok = true;
        let mut parts = Vec::new();
        for db in [0.0, 2.0, 4.0, 6.0, 8.0] {
            let p = vec![db_to_linear(db) * noise; k * n];
            let est = match ber_monte_carlo(&h, 1.0, &z, &p, noise, 0..1000, 707) {
                Ok(e) => e,
                Err(e) => return (false, e.to_string()),
            };
            let bits = est.bits.iter().sum::<u64>() as f64;
            let expect = bpsk_ber(db_to_linear(db));
            let sigma = (expect * (1.0 - expect) / bits).sqrt();
            let z_score = (est.aggregate() - expect) / sigma;
            ok &= z_score.abs() <= 3.0 && bits == 1e5;
            parts.push(format!("{db} dB: {:.4} vs {expect:.4} ({z_score:+.2} sd)", est.aggregate()));
        }
        (ok, parts.join("; "))
    })
}

pub fn water_filling_kkt() -> Check {
    Check::run(8, "water-filling KKT", Duration::from_secs(1), || {
        let mut r = rng(808);
        let (mut level_err, mut sum_err) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let n = r.random_range(1..=64);
            let mut gains: Vec<f64> = (0..n)
                .map(|_| if r.random_bool(0.1) { 0.0 } else { 10f64.powf(r.random_range(-3.0..3.0)) })
                .collect();
            gains[0] = gains[0].max(1e-3);
            let total = 10f64.powf(r.random_range(-3.0..1.0));
            let noise = 10f64.powf(r.random_range(-3.0..0.0));
            let a = match water_filling(&gains, total, noise) {
                Ok(a) => a,
                Err(e) => return (false, e.to_string()),
            };
            sum_err = sum_err.max(rel(a.powers.iter().sum(), total));
            for (&g, &p) in gains.iter().zip(&a.powers) {
                if p > 0.0 {
                    level_err = level_err.max(rel(p + noise / g, a.level));
                } else if g > 0.0 && noise / g < a.level * (1.0 - 1e-12) {
                    level_err = f64::INFINITY;
                }
            }
        }
        (
            level_err <= 1e-6 && sum_err <= 1e-9,
            format!("100 vectors, level spread {level_err:.1e}, power error {sum_err:.1e}"),
        )
    })
}

/// Criteria 1 to 8 in order.
pub fn all() -> Vec<Check> {
    vec![
        expansion_identity(),
        vectorization_identity(),
        milp_exactness(),
        alpha_optimality(),
        ao_descent(),
        pccp_agreement(),
        ber_calibration(),
        water_filling_kkt(),
    ]
}
