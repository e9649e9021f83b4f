//! Per-layer phase optimization for a fixed assignment.
//!
//! For a fixed layer `l` the fitting cost is a quadratic form in the layer
//! phasors `phi`:
//!
//! `Gamma(phi) = alpha^2 phi^H A phi - 2 alpha Re(b^H phi) + c`.
//!
//! Two solvers minimize it over the unit-modulus torus: exact per-atom
//! coordinate descent and a penalty convex-concave procedure (PCCP).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::allocation::AssignmentMatrix;
use crate::linalg::{frobenius_sq, scale_cols, scale_rows, select_cols, select_rows, CMatrix};
use crate::stack::{PhaseConfig, SimStack};
use crate::{Error, Result};

/// Rows of `G_i` and columns of `P_i` for the active users of one subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedPair {
    pub g: CMatrix,
    pub p: CMatrix,
    pub users: Vec<usize>,
}

impl RestrictedPair {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// `||alpha G_z P_z - I_R||_F^2`.
    pub fn cost(&self, alpha: f64) -> f64 {
        let mut h = &self.g * &self.p * Complex64::new(alpha, 0.0);
        for r in 0..self.len() {
            h[(r, r)] -= 1.0;
        }
        frobenius_sq(&h)
    }
}

pub fn restrict(g: &CMatrix, p: &CMatrix, users: &[usize]) -> Result<RestrictedPair> {
    if users.is_empty() {
        return Err(Error::Invariant(
            "column-coverage constraint: subcarrier has no active user".into(),
        ));
    }
    if users.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invariant(format!(
            "active users must be strictly increasing, got {users:?}"
        )));
    }
    if g.ncols() != p.nrows() {
        return Err(Error::Dimension(format!(
            "G is {}x{}, P is {}x{}",
            g.nrows(),
            g.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let last = users[users.len() - 1];
    if last >= g.nrows() || last >= p.ncols() {
        return Err(Error::Dimension(format!(
            "user {last} out of range for {} users",
            g.nrows().min(p.ncols())
        )));
    }
    Ok(RestrictedPair {
        g: select_rows(g, users),
        p: select_cols(p, users),
        users: users.to_vec(),
    })
}

/// `Gamma` as a function of one layer's phasors.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerQuadratic {
    pub a: CMatrix,
    pub b: Vec<Complex64>,
    pub constant: f64,
    pub alpha: f64,
}

impl LayerQuadratic {
    fn zeros(atoms: usize, alpha: f64) -> Self {
        LayerQuadratic {
            a: CMatrix::zeros(atoms, atoms),
            b: vec![Complex64::new(0.0, 0.0); atoms],
            constant: 0.0,
            alpha,
        }
    }

    pub fn atoms(&self) -> usize {
        self.b.len()
    }

    pub fn evaluate(&self, phi: &[Complex64]) -> f64 {
        let ap = self.apply(phi);
        let quad: f64 = phi.iter().zip(&ap).map(|(p, q)| (p.conj() * q).re).sum();
        let lin: f64 = self.b.iter().zip(phi).map(|(b, p)| (b.conj() * p).re).sum();
        self.alpha * self.alpha * quad - 2.0 * self.alpha * lin + self.constant
    }

    fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let m = self.atoms();
        (0..m)
            .map(|r| (0..m).map(|c| self.a[(r, c)] * phi[c]).sum())
            .collect()
    }

    /// Coefficient `c_m` with `Gamma = a_m |phi_m|^2 + 2 Re(conj(phi_m) c_m) + const`
    /// when every other atom is held fixed.
    fn coupling(&self, m: usize, phi: &[Complex64], a_phi: &[Complex64]) -> Complex64 {
        let a2 = self.alpha * self.alpha;
        (a_phi[m] - self.a[(m, m)] * phi[m]) * a2 - self.b[m] * self.alpha
    }

    /// Accumulates the contribution of one subcarrier given `B = G_z P_L`
    /// (`R x M`) and `C = P_R(:, u)` (`M x R`).
    fn accumulate(&mut self, b_mat: &CMatrix, c_mat: &CMatrix) {
        let x = b_mat.adjoint() * b_mat;
        let y = c_mat * c_mat.adjoint();
        let m = self.atoms();
        for r in 0..m {
            for c in 0..m {
                self.a[(r, c)] += x[(r, c)] * y[(c, r)];
            }
        }
        for k in 0..m {
            let mut d = Complex64::new(0.0, 0.0);
            for r in 0..b_mat.nrows() {
                d += c_mat[(k, r)] * b_mat[(r, k)];
            }
            self.b[k] += d.conj();
        }
        self.constant += b_mat.nrows() as f64;
    }
}

/// Builds the quadratic for layer `l` with all other layers at `phases`.
pub fn layer_quadratic(
    stack: &SimStack,
    channel: &[CMatrix],
    phases: &PhaseConfig,
    z: &AssignmentMatrix,
    alpha: f64,
    l: usize,
) -> Result<LayerQuadratic> {
    check_shapes(stack, channel, phases, z)?;
    let mut q = LayerQuadratic::zeros(stack.atoms(), alpha);
    for (i, g) in channel.iter().enumerate() {
        let users = z.column_users(i);
        if users.is_empty() {
            continue;
        }
        let (left, right) = stack.split_cascade(phases, i, l)?;
        let b_mat = select_rows(g, &users) * left;
        q.accumulate(&b_mat, &select_cols(&right, &users));
    }
    Ok(q)
}

fn check_shapes(
    stack: &SimStack,
    channel: &[CMatrix],
    phases: &PhaseConfig,
    z: &AssignmentMatrix,
) -> Result<()> {
    if channel.len() != stack.subcarriers() || z.subcarriers() != stack.subcarriers() {
        return Err(Error::Dimension(format!(
            "{} channel matrices and {} assignment columns for {} subcarriers",
            channel.len(),
            z.subcarriers(),
            stack.subcarriers()
        )));
    }
    if phases.layers() != stack.layers() || phases.atoms() != stack.atoms() {
        return Err(Error::Dimension(format!(
            "phases are {}x{}, stack is {}x{}",
            phases.layers(),
            phases.atoms(),
            stack.layers(),
            stack.atoms()
        )));
    }
    for g in channel {
        if g.ncols() != stack.atoms() || g.nrows() != z.users() {
            return Err(Error::Dimension(format!(
                "channel is {}x{}, expected {}x{}",
                g.nrows(),
                g.ncols(),
                z.users(),
                stack.atoms()
            )));
        }
    }
    Ok(())
}

/// Exact per-atom minimization on the unit circle, `sweeps` passes over the atoms.
pub fn coordinate_descent_layer(
    q: &LayerQuadratic,
    phi_init: &[Complex64],
    sweeps: usize,
) -> Vec<Complex64> {
    let mut phi: Vec<Complex64> = phi_init.iter().map(|p| unit(*p)).collect();
    let mut a_phi = q.apply(&phi);
    for _ in 0..sweeps {
        for m in 0..phi.len() {
            let c = q.coupling(m, &phi, &a_phi);
            let n = c.norm();
            if n < 1e-14 {
                continue;
            }
            let new = -c / n;
            let delta = new - phi[m];
            for r in 0..phi.len() {
                a_phi[r] += q.a[(r, m)] * delta;
            }
            phi[m] = new;
        }
    }
    phi
}

fn unit(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n > 0.0 {
        z / n
    } else {
        Complex64::new(1.0, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PccpOptions {
    pub lambda0: f64,
    pub growth: f64,
    pub lambda_max: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Block-coordinate passes per convex subproblem.
    pub inner_sweeps: usize,
}

impl Default for PccpOptions {
    fn default() -> Self {
        PccpOptions {
            lambda0: 1e-3,
            growth: 2.0,
            lambda_max: 1e4,
            tol: 1e-6,
            max_iterations: 200,
            inner_sweeps: 500,
        }
    }
}

impl PccpOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda0 > 0.0
            && self.growth >= 1.0
            && self.lambda_max >= self.lambda0
            && self.tol > 0.0
            && self.max_iterations > 0
            && self.inner_sweeps > 0;
        if ok && self.lambda_max.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid PCCP options {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PccpOutcome {
    /// Unit-modulus projection of the last iterate.
    pub phases: Vec<Complex64>,
    pub raw: Vec<Complex64>,
    /// `[concave-constraint slacks; norm slacks]`, `2M` entries.
    pub slacks: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// `Gamma` at the projected phases.
    pub objective: f64,
}

impl PccpOutcome {
    pub fn max_slack(&self) -> f64 {
        self.slacks.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_modulus_deviation(&self) -> f64 {
        self.raw
            .iter()
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Slacks of the relaxed constraints at `phi` linearized around `phi0`.
pub fn pccp_slacks(phi: &[Complex64], phi0: &[Complex64]) -> Vec<f64> {
    let concave = phi
        .iter()
        .zip(phi0)
        .map(|(z, z0)| (1.0 + z0.norm_sqr() - 2.0 * (z.conj() * z0).re).max(0.0));
    let norm = phi.iter().map(|z| (z.norm_sqr() - 1.0).max(0.0));
    concave.chain(norm).collect()
}

/// Penalized objective with the slacks eliminated.
fn penalized(q: &LayerQuadratic, phi: &[Complex64], phi0: &[Complex64], lambda: f64) -> f64 {
    q.evaluate(phi) + lambda * pccp_slacks(phi, phi0).iter().sum::<f64>()
}

/// Minimizes `a|z|^2 + 2Re(conj(z) g) + lambda (max(0,|z|^2-1) + max(0, k - 2Re(conj(z) z0)))`
/// over the complex plane, `k = 1 + |z0|^2`.
///
/// The function is convex and piecewise quadratic; its minimizer is a
/// stationary point of one piece, a constrained minimizer along one of the
/// two boundaries, or one of their intersections.
fn atom_minimizer(a: f64, g: Complex64, z0: Complex64, lambda: f64) -> Complex64 {
    let kappa = 1.0 + z0.norm_sqr();
    let f = |z: Complex64| {
        a * z.norm_sqr()
            + 2.0 * (z.conj() * g).re
            + lambda * ((z.norm_sqr() - 1.0).max(0.0) + (kappa - 2.0 * (z.conj() * z0).re).max(0.0))
    };
    let mut cands: Vec<Complex64> = Vec::with_capacity(16);
    cands.push(z0);
    cands.push(unit(z0));
    for s1 in [0.0, 1.0] {
        for s2 in [0.0, 1.0] {
            let aa = a + lambda * s1;
            let gg = g - z0 * (lambda * s2);
            if aa > 0.0 {
                cands.push(-gg / aa);
            }
            if s1 == 0.0 {
                // on the unit circle
                let n = gg.norm();
                if n > 0.0 {
                    cands.push(-gg / n);
                }
            }
        }
    }
    let n0 = z0.norm_sqr();
    if n0 > 0.0 {
        let base = z0 * (kappa / (2.0 * n0));
        let dir = Complex64::new(0.0, 1.0) * unit(z0);
        let slope = (dir.conj() * g).re;
        for s1 in [0.0, 1.0] {
            let aa = a + lambda * s1;
            if aa > 0.0 {
                cands.push(base + dir * (-slope / aa));
            }
        }
        let rem = 1.0 - base.norm_sqr();
        if rem >= 0.0 {
            let t = libm::sqrt(rem);
            cands.push(base + dir * t);
            cands.push(base - dir * t);
        }
    }
    let mut best = cands[0];
    let mut best_f = f(best);
    for &c in &cands[1..] {
        let v = f(c);
        if v < best_f {
            best = c;
            best_f = v;
        }
    }
    best
}

/// Penalty convex-concave procedure on the unit-modulus constraints.
///
/// Each convex subproblem is solved by exact block-coordinate descent over
/// the atoms; the penalty grows geometrically up to `lambda_max`.
pub fn pccp_layer(
    q: &LayerQuadratic,
    phi_init: &[Complex64],
    opts: &PccpOptions,
) -> Result<PccpOutcome> {
    opts.validate()?;
    if phi_init.len() != q.atoms() {
        return Err(Error::Dimension(format!(
            "{} initial phasors for {} atoms",
            phi_init.len(),
            q.atoms()
        )));
    }
    let m = q.atoms();
    let a2 = q.alpha * q.alpha;
    let mut phi0: Vec<Complex64> = phi_init.iter().map(|p| unit(*p)).collect();
    let mut lambda = opts.lambda0;
    let mut prev = q.evaluate(&phi0);
    let mut last_change = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mut phi = phi0.clone();
        let mut a_phi = q.apply(&phi);
        let mut prev_inner = penalized(q, &phi, &phi0, lambda);
        for _ in 0..opts.inner_sweeps {
            let mut moved = 0.0f64;
            for k in 0..m {
                let g = q.coupling(k, &phi, &a_phi);
                let new = atom_minimizer(a2 * q.a[(k, k)].re, g, phi0[k], lambda);
                let delta = new - phi[k];
                if delta.norm() > 0.0 {
                    for r in 0..m {
                        a_phi[r] += q.a[(r, k)] * delta;
                    }
                    phi[k] = new;
                    moved = moved.max(delta.norm());
                }
            }
            let cur = penalized(q, &phi, &phi0, lambda);
            let settled = prev_inner - cur <= 1e-14 * (1.0 + cur.abs());
            prev_inner = cur;
            if moved < 1e-12 || settled {
                break;
            }
        }
        let slacks = pccp_slacks(&phi, &phi0);
        let max_slack = slacks.iter().copied().fold(0.0, f64::max);
        let obj = q.evaluate(&phi);
        last_change = (obj - prev).abs();
        prev = obj;
        phi0 = phi;
        if max_slack < opts.tol && last_change < opts.tol * (1.0 + obj.abs()) {
            let phases: Vec<Complex64> = phi0.iter().map(|p| unit(*p)).collect();
            return Ok(PccpOutcome {
                objective: q.evaluate(&phases),
                phases,
                raw: phi0,
                slacks,
                lambda,
                iterations: it,
            });
        }
        lambda = (lambda * opts.growth).min(opts.lambda_max);
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        detail: format!("PCCP stopped at lambda {lambda:e}, last objective change {last_change:e}"),
    })
}

/// Which entries of `H_i` enter the closed-form scaling factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlphaMode {
    /// Only the active `(u, u)` block, matching the fitting cost.
    #[default]
    Restricted,
    /// The whole `K x K` effective channel.
    Unrestricted,
}

/// Closed-form real scaling factor for effective channels `h`.
pub fn optimal_alpha(h: &[CMatrix], z: &AssignmentMatrix, mode: AlphaMode) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, hi) in h.iter().enumerate() {
        match mode {
            AlphaMode::Restricted => {
                let users = z.column_users(i);
                for &p in &users {
                    num += hi[(p, p)].re;
                    for &q in &users {
                        den += hi[(p, q)].norm_sqr();
                    }
                }
            }
            AlphaMode::Unrestricted => {
                num += (0..hi.nrows().min(hi.ncols())).map(|k| hi[(k, k)].re).sum::<f64>();
                den += frobenius_sq(hi);
            }
        }
    }
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::DegenerateChannel(
            "effective channel vanishes on every active pair",
        ));
    }
    Ok(num / den)
}

/// Inner solver for one layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerSolver {
    CoordinateDescent { sweeps: usize },
    Pccp(PccpOptions),
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver::CoordinateDescent { sweeps: 3 }
    }
}

/// Report for one optimized layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerReport {
    pub layer: usize,
    pub gamma: f64,
    /// Zero for coordinate descent.
    pub max_slack: f64,
}

/// One ascending pass over all layers.
///
/// Left chains `G_i P_L` are computed once per pass and right chains are
/// extended as layers are updated, so each layer costs one `M x M` product
/// per subcarrier. A layer update is kept only if it does not increase
/// `Gamma`.
pub fn sweep_layers(
    stack: &SimStack,
    channel: &[CMatrix],
    phases: &mut PhaseConfig,
    z: &AssignmentMatrix,
    alpha: f64,
    solver: &InnerSolver,
) -> Result<Vec<LayerReport>> {
    check_shapes(stack, channel, phases, z)?;
    let layers = stack.layers();
    let users: Vec<Vec<usize>> = (0..stack.subcarriers()).map(|i| z.column_users(i)).collect();
    // left[i][l] = G_i(u, :) P_L(l)
    let mut left: Vec<Vec<CMatrix>> = Vec::with_capacity(channel.len());
    for (i, g) in channel.iter().enumerate() {
        let mut chain = vec![select_rows(g, &users[i]); layers];
        for l in (0..layers.saturating_sub(1)).rev() {
            let scaled = scale_cols(&chain[l + 1], &phases.layer_phasors(l + 1));
            chain[l] = scaled * stack.transmission(i, l + 1);
        }
        left.push(chain);
    }
    let mut right: Vec<CMatrix> = (0..channel.len())
        .map(|i| stack.transmission(i, 0).clone())
        .collect();
    let mut reports = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut q = LayerQuadratic::zeros(stack.atoms(), alpha);
        for i in 0..channel.len() {
            if users[i].is_empty() {
                continue;
            }
            q.accumulate(&left[i][l], &select_cols(&right[i], &users[i]));
        }
        let current = phases.layer_phasors(l);
        let before = q.evaluate(&current);
        let (candidate, max_slack) = match solver {
            InnerSolver::CoordinateDescent { sweeps } => {
                (coordinate_descent_layer(&q, &current, *sweeps), 0.0)
            }
            InnerSolver::Pccp(opts) => {
                let out = pccp_layer(&q, &current, opts).map_err(|e| e.in_step("pccp"))?;
                let s = out.max_slack();
                (out.phases, s)
            }
        };
        let after = q.evaluate(&candidate);
        let gamma = if after <= before {
            phases.set_layer_phasors(l, &candidate);
            after
        } else {
            before
        };
        reports.push(LayerReport {
            layer: l,
            gamma,
            max_slack,
        });
        if l + 1 < layers {
            let phi = phases.layer_phasors(l);
            for i in 0..channel.len() {
                right[i] = stack.transmission(i, l + 1) * scale_rows(&right[i], &phi);
            }
        }
    }
    Ok(reports)
}
