//! Wave-domain propagation through the stacked metasurface.
//!
//! Layers are indexed from 0 (closest to the feed antennas) to `L - 1`.
//! `transmission(i, 0)` is the `M x K` feed-to-first-layer matrix and
//! `transmission(i, l)` for `l >= 1` the `M x M` matrix from layer `l - 1` to
//! layer `l`. The cascade is `P_i = Phi^{L-1} W^{L-1} ... Phi^0 W^0`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{phasors, scale_rows, wrap_phase, CMatrix};
use crate::rng::{self, Purpose};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct SimGeometry {
    pub layers: usize,
    pub meta_cols: usize,
    pub meta_rows: usize,
    /// Meta-atom pitch `r_T`, m. Also the feed-antenna pitch.
    pub atom_pitch: f64,
    /// Meta-atom area `S_T`, m^2.
    pub atom_area: f64,
    /// Total stack thickness `D_T`, m.
    pub thickness: f64,
    /// Number of feed antennas (one per stream).
    pub feeds: usize,
}

impl SimGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("SIM needs at least one layer".into()));
        }
        if self.meta_cols == 0 || self.meta_rows == 0 || self.feeds == 0 {
            return Err(Error::Config("SIM grid and feed count must be non-empty".into()));
        }
        for (what, v) in [
            ("atom_pitch", self.atom_pitch),
            ("atom_area", self.atom_area),
            ("thickness", self.thickness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(())
    }

    pub fn atoms(&self) -> usize {
        self.meta_cols * self.meta_rows
    }

    /// Inter-layer spacing `d_T = D_T / L`.
    pub fn layer_gap(&self) -> f64 {
        self.thickness / self.layers as f64
    }

    /// In-plane `(x, z)` of atom `m = m_x * M_z + m_z`, grid centred on the origin.
    pub fn atom_position(&self, m: usize) -> (f64, f64) {
        let mx = (m / self.meta_rows) as f64;
        let mz = (m % self.meta_rows) as f64;
        (
            (mx - (self.meta_cols as f64 - 1.0) / 2.0) * self.atom_pitch,
            (mz - (self.meta_rows as f64 - 1.0) / 2.0) * self.atom_pitch,
        )
    }

    /// Feed antennas form a centred line along x, one gap before layer 0.
    pub fn feed_position(&self, k: usize) -> (f64, f64) {
        (
            (k as f64 - (self.feeds as f64 - 1.0) / 2.0) * self.atom_pitch,
            0.0,
        )
    }
}

/// Rayleigh-Sommerfeld transmission coefficient between two atoms at distance
/// `t` on layers `gap` apart:
/// `(S_T d_T / t^2) (1 / (2 pi t) - j f / c) e^{j 2 pi t f / c}`.
pub fn rs_coefficient(t: f64, area: f64, gap: f64, frequency: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            what: "atom distance",
            value: t,
        });
    }
    let k = frequency / SPEED_OF_LIGHT;
    let front = area * gap / (t * t);
    let arg = 2.0 * PI * t * k;
    Ok(Complex64::new(front / (2.0 * PI * t), -front * k)
        * Complex64::new(libm::cos(arg), libm::sin(arg)))
}

/// Phase shifts `theta[l][m]` of every meta-atom, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    layers: usize,
    atoms: usize,
    theta: Vec<f64>,
}

impl PhaseConfig {
    pub fn zeros(layers: usize, atoms: usize) -> Self {
        Self {
            layers,
            atoms,
            theta: alloc::vec![0.0; layers * atoms],
        }
    }

    /// Row-major `L x M` phases.
    pub fn from_theta(layers: usize, atoms: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != layers * atoms {
            return Err(Error::Dimension(format!(
                "{} phases for {layers} layers of {atoms} atoms",
                theta.len()
            )));
        }
        Ok(Self {
            layers,
            atoms,
            theta,
        })
    }

    /// i.i.d. uniform phases in `[0, 2 pi)`.
    pub fn random(layers: usize, atoms: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Phases, 0);
        let theta = (0..layers * atoms)
            .map(|_| 2.0 * PI * rng.random::<f64>())
            .collect();
        Self {
            layers,
            atoms,
            theta,
        }
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn layer_theta(&self, l: usize) -> &[f64] {
        &self.theta[l * self.atoms..(l + 1) * self.atoms]
    }

    /// `phi^l = e^{j theta^l}`.
    pub fn layer_phasors(&self, l: usize) -> Vec<Complex64> {
        phasors(self.layer_theta(l))
    }

    /// Stores the phases of `phi`; magnitudes are discarded.
    pub fn set_layer_phasors(&mut self, l: usize, phi: &[Complex64]) {
        for (t, p) in self.theta[l * self.atoms..(l + 1) * self.atoms]
            .iter_mut()
            .zip(phi)
        {
            *t = wrap_phase(*p);
        }
    }

    /// Adds `delta` to every phase of layer `l`.
    pub fn rotate_layer(&mut self, l: usize, delta: f64) {
        for t in &mut self.theta[l * self.atoms..(l + 1) * self.atoms] {
            *t += delta;
        }
    }
}

/// Precomputed transmission matrices for every subcarrier.
#[derive(Debug, Clone)]
pub struct SimStack {
    geometry: SimGeometry,
    frequencies: Vec<f64>,
    /// `[i][l]`, see the module docs.
    transmissions: Vec<Vec<CMatrix>>,
}

impl SimStack {
    pub fn build(geometry: &SimGeometry, frequencies: &[f64]) -> Result<Self> {
        geometry.validate()?;
        let m = geometry.atoms();
        let gap = geometry.layer_gap();
        let area = geometry.atom_area;
        let distance = |(x0, z0): (f64, f64), (x1, z1): (f64, f64)| {
            let (dx, dz) = (x1 - x0, z1 - z0);
            libm::sqrt(gap * gap + dx * dx + dz * dz)
        };

        let mut transmissions = Vec::with_capacity(frequencies.len());
        for &f in frequencies {
            let mut per_layer = Vec::with_capacity(geometry.layers);
            let mut feed = CMatrix::zeros(m, geometry.feeds);
            for a in 0..m {
                for k in 0..geometry.feeds {
                    let t = distance(geometry.feed_position(k), geometry.atom_position(a));
                    feed[(a, k)] = rs_coefficient(t, area, gap, f)?;
                }
            }
            per_layer.push(feed);
            if geometry.layers > 1 {
                let mut inter = CMatrix::zeros(m, m);
                for a in 0..m {
                    for b in a..m {
                        let t = distance(geometry.atom_position(b), geometry.atom_position(a));
                        let w = rs_coefficient(t, area, gap, f)?;
                        inter[(a, b)] = w;
                        inter[(b, a)] = w;
                    }
                }
                // equal gaps make every inter-layer matrix identical
                for _ in 1..geometry.layers {
                    per_layer.push(inter.clone());
                }
            }
            transmissions.push(per_layer);
        }
        Ok(Self {
            geometry: geometry.clone(),
            frequencies: frequencies.to_vec(),
            transmissions,
        })
    }

    /// Stack made of user-supplied matrices; `transmissions[i][0]` is
    /// `M x K`, the rest `M x M`.
    pub fn from_matrices(
        geometry: SimGeometry,
        frequencies: Vec<f64>,
        transmissions: Vec<Vec<CMatrix>>,
    ) -> Result<Self> {
        let (m, k) = (geometry.atoms(), geometry.feeds);
        if transmissions.len() != frequencies.len() {
            return Err(Error::Dimension("one matrix set per subcarrier".into()));
        }
        for set in &transmissions {
            if set.len() != geometry.layers {
                return Err(Error::Dimension("one matrix per layer".into()));
            }
            for (l, w) in set.iter().enumerate() {
                let want = if l == 0 { (m, k) } else { (m, m) };
                if w.shape() != want {
                    return Err(Error::Dimension(format!(
                        "layer {l}: {:?} instead of {want:?}",
                        w.shape()
                    )));
                }
            }
        }
        Ok(Self {
            geometry,
            frequencies,
            transmissions,
        })
    }

    pub fn geometry(&self) -> &SimGeometry {
        &self.geometry
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn subcarriers(&self) -> usize {
        self.frequencies.len()
    }

    pub fn layers(&self) -> usize {
        self.geometry.layers
    }

    pub fn atoms(&self) -> usize {
        self.geometry.atoms()
    }

    pub fn transmission(&self, i: usize, l: usize) -> &CMatrix {
        &self.transmissions[i][l]
    }

    /// `P_i = Phi^{L-1} W^{L-1}_i ... Phi^0 W^0_i`, `M x K`.
    pub fn cascade(&self, phases: &PhaseConfig, i: usize) -> CMatrix {
        let mut p = scale_rows(self.transmission(i, 0), &phases.layer_phasors(0));
        for l in 1..self.layers() {
            p = scale_rows(&(self.transmission(i, l) * p), &phases.layer_phasors(l));
        }
        p
    }

    /// `(P_L, P_R)` with `P_L diag(phi^l) P_R = P_i`.
    ///
    /// `P_L = Phi^{L-1} W^{L-1} ... Phi^{l+1} W^{l+1}` (identity for the last
    /// layer) and `P_R = W^l Phi^{l-1} ... Phi^0 W^0` (`W^0` for layer 0).
    pub fn split_cascade(
        &self,
        phases: &PhaseConfig,
        i: usize,
        l: usize,
    ) -> Result<(CMatrix, CMatrix)> {
        if l >= self.layers() {
            return Err(Error::Dimension(format!(
                "layer {l} of {}",
                self.layers()
            )));
        }
        let m = self.atoms();
        let mut left = CMatrix::identity(m, m);
        for j in l + 1..self.layers() {
            left = scale_rows(&(self.transmission(i, j) * left), &phases.layer_phasors(j));
        }
        let mut right = self.transmission(i, 0).clone();
        for j in 1..=l {
            right = self.transmission(i, j) * scale_rows(&right, &phases.layer_phasors(j - 1));
        }
        Ok((left, right))
    }
}

impl SimStack {
    /// `H_i = G_i P_i` for every subcarrier.
    pub fn effective_channels(&self, g: &[CMatrix], phases: &PhaseConfig) -> Vec<CMatrix> {
        g.iter()
            .enumerate()
            .map(|(i, gi)| gi * self.cascade(phases, i))
            .collect()
    }
}

/// `H_i = G_i P_i`.
pub fn effective_channel(g: &CMatrix, p: &CMatrix) -> Result<CMatrix> {
    crate::linalg::checked_mul(g, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_sq;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && frobenius_sq(&(a - b)) <= tol * tol * frobenius_sq(b).max(1e-300)
    }

    fn desk_geometry(layers: usize, cols: usize, rows: usize) -> SimGeometry {
        let pitch = SPEED_OF_LIGHT / 56e9;
        SimGeometry {
            layers,
            meta_cols: cols,
            meta_rows: rows,
            atom_pitch: pitch,
            atom_area: pitch * pitch,
            thickness: 0.05,
            feeds: 2,
        }
    }

    #[test]
    fn rs_coefficient_reference_value() {
        // 40-digit evaluation at r_T = c/56 GHz, S_T = r_T^2, d_T = t = 0.05/7, f = 28 GHz
        let pitch = SPEED_OF_LIGHT / 56e9;
        let gap = 0.05 / 7.0;
        let w = rs_coefficient(gap, pitch * pitch, gap, 28e9).unwrap();
        assert!((w.re - -0.369_552_546_428_857_8).abs() < 1e-13);
        assert!((w.im - 0.108_875_711_976_449_83).abs() < 1e-13);
        let t = libm::sqrt(gap * gap + pitch * pitch);
        let w2 = rs_coefficient(t, pitch * pitch, gap, 28e9).unwrap();
        assert!((w2.re - -0.184_531_158_573_839_3).abs() < 1e-13);
        assert!((w2.im - -0.160_075_697_202_906_6).abs() < 1e-13);
    }

    #[test]
    fn rs_coefficient_limits_and_modulus() {
        let (s, d, t) = (2e-5, 0.01, 0.013);
        let low = rs_coefficient(t, s, d, 1e-6).unwrap();
        let expect = s * d / (2.0 * PI * t * t * t);
        assert!((low.re - expect).abs() < 1e-9 * expect);
        assert!(low.im.abs() < 1e-9 * expect);
        for f in [1e9, 28e9, 60e9] {
            let w = rs_coefficient(t, s, d, f).unwrap();
            let k = f / SPEED_OF_LIGHT;
            let m = s * d / (t * t) * libm::sqrt(1.0 / (4.0 * PI * PI * t * t) + k * k);
            assert!((w.norm() - m).abs() < 1e-12 * m);
        }
        let mut prev = 0.0;
        for n in 0..50 {
            let w = rs_coefficient(t, s, d, 20e9 + n as f64 * 1e9).unwrap().norm();
            assert!(w > prev);
            prev = w;
        }
        assert!(rs_coefficient(0.0, s, d, 28e9).is_err());
        assert!(rs_coefficient(-1.0, s, d, 28e9).is_err());
    }

    #[test]
    fn stack_entries_match_distance_table() {
        // 2x2 grid, two layers, two feeds
        let g = desk_geometry(2, 2, 2);
        let f = 28e9;
        let stack = SimStack::build(&g, &[f]).unwrap();
        let (p, gap) = (g.atom_pitch, g.layer_gap());
        let atoms = [(-p / 2.0, -p / 2.0), (-p / 2.0, p / 2.0), (p / 2.0, -p / 2.0), (p / 2.0, p / 2.0)];
        let feeds = [(-p / 2.0, 0.0), (p / 2.0, 0.0)];
        for a in 0..4 {
            assert_eq!(g.atom_position(a), atoms[a]);
            for k in 0..2 {
                let (dx, dz) = (atoms[a].0 - feeds[k].0, atoms[a].1 - feeds[k].1);
                let t = (gap * gap + dx * dx + dz * dz).sqrt();
                let w = rs_coefficient(t, g.atom_area, gap, f).unwrap();
                assert!((stack.transmission(0, 0)[(a, k)] - w).norm() < 1e-15);
            }
            for b in 0..4 {
                let (dx, dz) = (atoms[a].0 - atoms[b].0, atoms[a].1 - atoms[b].1);
                let t = (gap * gap + dx * dx + dz * dz).sqrt();
                let w = rs_coefficient(t, g.atom_area, gap, f).unwrap();
                assert!((stack.transmission(0, 1)[(a, b)] - w).norm() < 1e-15);
            }
        }
        let w = stack.transmission(0, 1);
        assert_eq!(w, &w.transpose());
        let diag = rs_coefficient(gap, g.atom_area, gap, f).unwrap();
        for a in 0..4 {
            assert_eq!(w[(a, a)], diag);
        }
    }

    #[test]
    fn single_layer_zero_phase_cascade_is_feed_matrix() {
        let g = desk_geometry(1, 2, 3);
        let stack = SimStack::build(&g, &[28e9]).unwrap();
        let p = stack.cascade(&PhaseConfig::zeros(1, 6), 0);
        assert!(close(&p, stack.transmission(0, 0), 1e-15));
    }

    #[test]
    fn cascade_matches_explicit_product() {
        let g = desk_geometry(3, 2, 2);
        let stack = SimStack::build(&g, &[27.99e9, 28.01e9]).unwrap();
        let phases = PhaseConfig::random(3, 4, 11);
        for i in 0..2 {
            let diag = |l: usize| CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases.layer_phasors(l)));
            let explicit = diag(2)
                * stack.transmission(i, 2)
                * diag(1)
                * stack.transmission(i, 1)
                * diag(0)
                * stack.transmission(i, 0);
            assert!(close(&stack.cascade(&phases, i), &explicit, 1e-12));
        }
    }

    #[test]
    fn global_layer_rotation_scales_cascade() {
        let g = desk_geometry(3, 2, 2);
        let stack = SimStack::build(&g, &[28e9]).unwrap();
        let phases = PhaseConfig::random(3, 4, 2);
        let base = stack.cascade(&phases, 0);
        let mut rotated = phases.clone();
        rotated.rotate_layer(1, 0.77);
        let p = stack.cascade(&rotated, 0);
        let factor = Complex64::new(libm::cos(0.77), libm::sin(0.77));
        assert!(close(&p, &(base.clone() * factor), 1e-12));
        for (a, b) in p.iter().zip(base.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn split_recomposes_for_every_layer() {
        let g = desk_geometry(4, 2, 2);
        let stack = SimStack::build(&g, &[28e9]).unwrap();
        let phases = PhaseConfig::random(4, 4, 3);
        let full = stack.cascade(&phases, 0);
        for l in 0..4 {
            let (left, right) = stack.split_cascade(&phases, 0, l).unwrap();
            let recomposed = left * scale_rows(&right, &phases.layer_phasors(l));
            assert!(close(&recomposed, &full, 1e-12));
        }
        let (left, _) = stack.split_cascade(&phases, 0, 3).unwrap();
        assert_eq!(left, CMatrix::identity(4, 4));
        let (_, right) = stack.split_cascade(&phases, 0, 0).unwrap();
        assert_eq!(&right, stack.transmission(0, 0));
        assert!(stack.split_cascade(&phases, 0, 4).is_err());
    }

    #[test]
    fn effective_channel_products() {
        let g = CMatrix::from_fn(2, 4, |r, c| Complex64::new(r as f64 + 1.0, c as f64 - 1.5));
        let p = CMatrix::from_fn(4, 2, |r, c| Complex64::new(0.3 * r as f64, 1.0 - c as f64));
        let h = effective_channel(&g, &p).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let dot: Complex64 = (0..4).map(|m| g[(r, m)] * p[(m, c)]).sum();
                assert!((h[(r, c)] - dot).norm() < 1e-12);
            }
        }
        assert!(effective_channel(&g, &g).is_err());
        let zero = effective_channel(&CMatrix::zeros(2, 4), &p).unwrap();
        assert!(zero.iter().all(|z| z.norm() == 0.0));
        // wave-domain ZF target: P = G^H (G G^H)^{-1}
        let gh = g.adjoint();
        let pinv = &gh * (&g * &gh).try_inverse().unwrap();
        let eye = effective_channel(&g, &pinv).unwrap();
        assert!(close(&eye, &CMatrix::identity(2, 2), 1e-8));
    }
}
