//! Link-level metrics: fitting NMSE, end-to-end heatmaps, water-filling,
//! sum rate with residual interference, Monte-Carlo BPSK BER and the digital
//! zero-forcing reference.
//!
//! Power allocations are indexed by the active pairs of `Z` in
//! subcarrier-major order, see [`active_pairs`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::allocation::AssignmentMatrix;
use crate::linalg::CMatrix;
use crate::rng::{self, Purpose};
use crate::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    libm::pow(10.0, (dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * libm::log10(w) + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Transmit power, noise and the SNR handicap applied to the pure-OFDMA
/// reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Total transmit power over all subcarriers, dBm.
    pub transmit_power_dbm: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    /// Noise power per subcarrier `sigma^2`, W.
    pub noise_power: f64,
    pub snr_offset_db: f64,
}

impl LinkBudget {
    /// Noise per subcarrier is the PSD integrated over `bandwidth / subcarriers`.
    pub fn new(
        transmit_power_dbm: f64,
        noise_psd_dbm_hz: f64,
        bandwidth: f64,
        subcarriers: usize,
    ) -> Result<Self> {
        if subcarriers == 0 {
            return Err(Error::Config("link budget needs at least one subcarrier".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain { what: "bandwidth", value: bandwidth });
        }
        for (what, v) in [
            ("transmit_power_dbm", transmit_power_dbm),
            ("noise_psd_dbm_hz", noise_psd_dbm_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(Self {
            transmit_power_dbm,
            noise_psd_dbm_hz,
            noise_power: dbm_to_watts(noise_psd_dbm_hz) * bandwidth / subcarriers as f64,
            snr_offset_db: 0.0,
        })
    }

    pub fn with_offset(mut self, offset_db: f64) -> Self {
        self.snr_offset_db = offset_db;
        self
    }

    pub fn transmit_power(&self) -> f64 {
        dbm_to_watts(self.transmit_power_dbm)
    }

    /// `sigma^2` raised by the SNR offset.
    pub fn effective_noise(&self) -> f64 {
        self.noise_power * db_to_linear(self.snr_offset_db)
    }
}

/// `10 log10(K_c / (N_c / K))`: the per-user bandwidth ratio between a
/// scheme using `K_c` subcarriers per user and pure OFDMA.
pub fn ofdma_snr_offset_db(k_c: usize, users: usize, subcarriers: usize) -> f64 {
    10.0 * libm::log10(k_c as f64 * users as f64 / subcarriers as f64)
}

/// `(user, subcarrier)` pairs with `Z(k, i) = 1`, subcarrier-major.
pub fn active_pairs(z: &AssignmentMatrix) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(z.active_pairs());
    for i in 0..z.subcarriers() {
        for k in 0..z.users() {
            if z.get(k, i) {
                pairs.push((k, i));
            }
        }
    }
    pairs
}

/// Fitting cost per active pair.
pub fn nmse(gamma: f64, z: &AssignmentMatrix) -> Result<f64> {
    let n = z.active_pairs();
    if n == 0 {
        return Err(Error::Infeasible("NMSE of an assignment with no active pair".into()));
    }
    Ok(gamma / n as f64)
}

/// `|a T_i H_i T_i|` laid out as `K x (K N_c)`, subcarrier blocks side by side.
pub fn heatmap(h: &[CMatrix], alpha: f64, z: &AssignmentMatrix) -> DMatrix<f64> {
    let k = z.users();
    DMatrix::from_fn(k, k * h.len(), |r, c| {
        let (i, q) = (c / k, c % k);
        if z.get(r, i) && z.get(q, i) {
            (h[i][(r, q)] * alpha).norm()
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    /// Water level `mu`; active entries satisfy `p + noise / g = mu`.
    pub level: f64,
}

/// `p_j = max(0, mu - noise / g_j)` with `sum p = total`.
///
/// The level is found exactly by sorting the floors `noise / g` and growing
/// the active set until the next floor would sit above the water.
pub fn water_filling(gains: &[f64], total: f64, noise: f64) -> Result<PowerAllocation> {
    if let Some(&g) = gains.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        return Err(Error::Domain { what: "channel gain", value: g });
    }
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::Domain { what: "total power", value: total });
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::Domain { what: "noise power", value: noise });
    }
    let mut floors: Vec<f64> = gains
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| noise / g)
        .filter(|f| f.is_finite())
        .collect();
    if floors.is_empty() {
        return Err(Error::DegenerateChannel("all water-filling gains are zero"));
    }
    floors.sort_by(|a, b| a.total_cmp(b));
    let mut level = floors[0] + total;
    let mut acc = 0.0;
    for (n, &f) in floors.iter().enumerate() {
        acc += f;
        let mu = (total + acc) / (n + 1) as f64;
        if n + 1 < floors.len() && mu > floors[n + 1] {
            continue;
        }
        level = mu;
        break;
    }
    let powers = gains
        .iter()
        .map(|&g| if g > 0.0 { (level - noise / g).max(0.0) } else { 0.0 })
        .collect();
    Ok(PowerAllocation { powers, level })
}

/// Interference on pair `(k, i)` from the other active users of subcarrier `i`.
fn interference(h: &CMatrix, alpha: f64, k: usize, users: &[(usize, f64)]) -> f64 {
    users
        .iter()
        .filter(|(q, _)| *q != k)
        .map(|&(q, p)| p * (h[(k, q)] * alpha).norm_sqr())
        .sum()
}

/// Per-subcarrier `(user, power)` lists from a pair-indexed allocation.
fn per_subcarrier(z: &AssignmentMatrix, powers: &[f64]) -> Result<Vec<Vec<(usize, f64)>>> {
    let pairs = active_pairs(z);
    if pairs.len() != powers.len() {
        return Err(Error::Dimension(format!(
            "{} powers for {} active pairs",
            powers.len(),
            pairs.len()
        )));
    }
    let mut out = vec![Vec::new(); z.subcarriers()];
    for (&(k, i), &p) in pairs.iter().zip(powers) {
        out[i].push((k, p));
    }
    Ok(out)
}

fn check_channels(h: &[CMatrix], z: &AssignmentMatrix) -> Result<()> {
    if h.len() != z.subcarriers() || h.iter().any(|m| m.nrows() < z.users() || m.ncols() < z.users()) {
        return Err(Error::Dimension(format!(
            "{} channels for a {}x{} assignment",
            h.len(),
            z.users(),
            z.subcarriers()
        )));
    }
    Ok(())
}

/// Water-filling that treats residual interference as noise: the gain of
/// pair `(k, i)` is `|a H_i(k,k)|^2 noise / (noise + I_{k,i})` with the
/// interference taken from the previous allocation. Stops after
/// `max_outer` rounds or when no power moves by more than `1e-9` relative.
pub fn iterative_water_filling(
    h: &[CMatrix],
    alpha: f64,
    z: &AssignmentMatrix,
    total: f64,
    noise: f64,
    max_outer: usize,
) -> Result<Vec<f64>> {
    check_channels(h, z)?;
    let pairs = active_pairs(z);
    let direct: Vec<f64> = pairs.iter().map(|&(k, i)| (h[i][(k, k)] * alpha).norm_sqr()).collect();
    let mut powers = water_filling(&direct, total, noise)?.powers;
    for _ in 0..max_outer {
        let lists = per_subcarrier(z, &powers)?;
        let gains: Vec<f64> = pairs
            .iter()
            .zip(&direct)
            .map(|(&(k, i), &d)| d * noise / (noise + interference(&h[i], alpha, k, &lists[i])))
            .collect();
        let next = water_filling(&gains, total, noise)?.powers;
        let moved = next
            .iter()
            .zip(&powers)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        powers = next;
        if moved <= 1e-9 * total {
            break;
        }
    }
    Ok(powers)
}

/// SINR of every active pair, in [`active_pairs`] order.
pub fn sinr(h: &[CMatrix], alpha: f64, z: &AssignmentMatrix, powers: &[f64], noise: f64) -> Result<Vec<f64>> {
    check_channels(h, z)?;
    let lists = per_subcarrier(z, powers)?;
    Ok(active_pairs(z)
        .iter()
        .zip(powers)
        .map(|(&(k, i), &p)| {
            p * (h[i][(k, k)] * alpha).norm_sqr() / (interference(&h[i], alpha, k, &lists[i]) + noise)
        })
        .collect())
}

/// `(1 / N_c) sum_i sum_{k in u_i} log2(1 + SINR_{k,i})`, bits/s/Hz.
pub fn sum_rate(h: &[CMatrix], alpha: f64, z: &AssignmentMatrix, powers: &[f64], noise: f64) -> Result<f64> {
    let s = sinr(h, alpha, z, powers, noise)?;
    Ok(s.iter().map(|g| libm::log2(1.0 + g)).sum::<f64>() / z.subcarriers() as f64)
}

/// `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / core::f64::consts::SQRT_2)
}

/// Uncoded BPSK error probability at linear SNR `snr`.
pub fn bpsk_ber(snr: f64) -> f64 {
    q_function(libm::sqrt(2.0 * snr))
}

/// Bit-error counts per user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BerEstimate {
    pub errors: Vec<u64>,
    pub bits: Vec<u64>,
}

impl BerEstimate {
    /// Users that never transmit report zero.
    pub fn per_user(&self) -> Vec<f64> {
        self.errors
            .iter()
            .zip(&self.bits)
            .map(|(&e, &b)| if b == 0 { 0.0 } else { e as f64 / b as f64 })
            .collect()
    }

    pub fn aggregate(&self) -> f64 {
        let bits: u64 = self.bits.iter().sum();
        if bits == 0 {
            0.0
        } else {
            self.errors.iter().sum::<u64>() as f64 / bits as f64
        }
    }

    pub fn merge(&mut self, other: &BerEstimate) {
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a += b;
        }
    }
}

/// BPSK over `y_i = a H_i x_i + n_i`, `x_i(q) = sqrt(p_{q,i}) s_{q,i}` for the
/// active users, circular Gaussian noise of variance `noise`, sign detection
/// on `Re(y_i(k))`. Trial `t` draws from its own stream, so any split of the
/// trial range merges to the same counts.
pub fn ber_monte_carlo(
    h: &[CMatrix],
    alpha: f64,
    z: &AssignmentMatrix,
    powers: &[f64],
    noise: f64,
    trials: core::ops::Range<u64>,
    seed: u64,
) -> Result<BerEstimate> {
    check_channels(h, z)?;
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Domain { what: "noise power", value: noise });
    }
    let lists = per_subcarrier(z, powers)?;
    let amplitude: Vec<Vec<(usize, f64)>> = lists
        .iter()
        .map(|l| l.iter().map(|&(k, p)| (k, libm::sqrt(p.max(0.0)))).collect())
        .collect();
    let std = libm::sqrt(noise / 2.0);
    let mut est = BerEstimate {
        errors: vec![0; z.users()],
        bits: vec![0; z.users()],
    };
    let mut symbols = Vec::new();
    for t in trials {
        let mut rng = rng::stream(seed, Purpose::Ber, t);
        for (i, users) in amplitude.iter().enumerate() {
            symbols.clear();
            symbols.extend(users.iter().map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }));
            for &(k, _) in users {
                let mut y = Complex64::new(0.0, 0.0);
                for (&(q, a), &s) in users.iter().zip(&symbols) {
                    y += h[i][(k, q)] * (alpha * a * s);
                }
                let n: f64 = rng.sample(StandardNormal);
                let sent = symbols[users.iter().position(|&(q, _)| q == k).unwrap_or(0)];
                let decided = if y.re + std * n >= 0.0 { 1.0 } else { -1.0 };
                est.bits[k] += 1;
                if decided != sent {
                    est.errors[k] += 1;
                }
            }
        }
    }
    Ok(est)
}

/// Digital zero-forcing per subcarrier: `F_i = G_i^H (G_i G_i^H)^{-1}` with
/// unit-norm columns. The effective channel `G_i F_i` is diagonal with
/// entries `1 / ||F_i(:, k)||` before normalization; that diagonal is
/// returned as a `K x K` matrix.
pub fn digital_zf_channels(g: &[CMatrix]) -> Result<Vec<CMatrix>> {
    g.iter()
        .enumerate()
        .map(|(i, gi)| {
            let gram = gi * gi.adjoint();
            let scale = (0..gram.nrows()).map(|k| gram[(k, k)].re).fold(0.0, f64::max);
            let chol = gram.cholesky().ok_or(Error::RankDeficient(i))?;
            let l = chol.l();
            if (0..l.nrows()).any(|k| l[(k, k)].norm_sqr() <= 1e-12 * scale) {
                return Err(Error::RankDeficient(i));
            }
            let inv = chol.inverse();
            let f = gi.adjoint() * inv;
            let k = gi.nrows();
            Ok(CMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    Complex64::new(1.0 / f.column(r).norm(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }))
        })
        .collect()
}

/// One row of results for a scheme on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scheme: String,
    pub seed: u64,
    pub config_hash: String,
    pub nmse: f64,
    pub ber_per_user: Vec<f64>,
    pub ber: f64,
    pub sum_rate: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{baseline_assignment, Baseline};
    use crate::rng::derive_seed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::vec::Vec;

    fn identity(k: usize, n: usize) -> Vec<CMatrix> {
        (0..n).map(|_| CMatrix::identity(k, k)).collect()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        })
    }

    #[test]
    fn noise_per_subcarrier() {
        let b = LinkBudget::new(10.0, -112.0, 40e6, 16).unwrap();
        assert!((watts_to_dbm(b.noise_power) - (-112.0 + 10.0 * libm::log10(2.5e6))).abs() < 1e-9);
        assert!((watts_to_dbm(b.noise_power) + 48.0206).abs() < 1e-3);
        assert!((b.transmit_power() - 0.01).abs() < 1e-15);
        let off = b.with_offset(3.0);
        assert!((off.effective_noise() / b.noise_power - db_to_linear(3.0)).abs() < 1e-12);
        assert!(LinkBudget::new(10.0, -112.0, 0.0, 16).is_err());
        assert!((ofdma_snr_offset_db(10, 4, 16) - 10.0 * libm::log10(2.5)).abs() < 1e-12);
        assert_eq!(ofdma_snr_offset_db(4, 4, 16), 0.0);
    }

    #[test]
    fn nmse_normalization() {
        let z = AssignmentMatrix::from_rows(&[&[1, 1, 0], &[0, 1, 1]]).unwrap();
        assert_eq!(nmse(0.0, &z).unwrap(), 0.0);
        // a = 0 leaves ||T_i||^2 per subcarrier.
        let h = identity(2, 3);
        let gamma = crate::allocation::gamma_expanded(&h, 0.0, &z);
        assert_eq!(nmse(gamma, &z).unwrap(), 1.0);
        assert_eq!(nmse(2.0, &z).unwrap(), 0.5);
        assert!(nmse(1.0, &AssignmentMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn heatmap_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let z = AssignmentMatrix::from_rows(&[&[1, 1, 0], &[0, 1, 1]]).unwrap();
        let m = heatmap(&h, 2.0, &z);
        assert_eq!((m.nrows(), m.ncols()), (2, 6));
        assert_eq!(m[(0, 0)], (h[0][(0, 0)] * 2.0).norm());
        assert_eq!(m[(1, 0)], 0.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 3)], (h[1][(1, 1)] * 2.0).norm());
        assert_eq!(m[(0, 3)], (h[1][(0, 1)] * 2.0).norm());
        assert_eq!(m[(0, 4)], 0.0);
        let eye = heatmap(&identity(2, 3), 1.0, &AssignmentMatrix::ones(2, 3));
        for c in 0..6 {
            for r in 0..2 {
                assert_eq!(eye[(r, c)], if r == c % 2 { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn water_filling_cases() {
        let p = water_filling(&[2.0, 2.0, 2.0, 2.0], 1.0, 0.1).unwrap();
        assert!(p.powers.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = water_filling(&[0.0, 3.0, 0.0], 2.0, 1.0).unwrap();
        assert_eq!(p.powers, vec![0.0, 2.0, 0.0]);
        // Weak channel stays dry: floors 0.1 and 10, budget 1.
        let p = water_filling(&[10.0, 0.1], 1.0, 1.0).unwrap();
        assert_eq!(p.powers[1], 0.0);
        assert!((p.powers[0] - 1.0).abs() < 1e-15);
        assert!(water_filling(&[0.0, 0.0], 1.0, 1.0).is_err());
        assert!(water_filling(&[-1.0], 1.0, 1.0).is_err());
        assert!(water_filling(&[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn water_filling_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(1..40);
            let gains: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.1) { 0.0 } else { libm::pow(10.0, rng.random_range(-3.0..3.0)) })
                .collect();
            if gains.iter().all(|&g| g == 0.0) {
                continue;
            }
            let total = libm::pow(10.0, rng.random_range(-2.0..2.0));
            let noise = libm::pow(10.0, rng.random_range(-2.0..1.0));
            let a = water_filling(&gains, total, noise).unwrap();
            let sum: f64 = a.powers.iter().sum();
            assert!((sum - total).abs() <= 1e-9 * total);
            for (&g, &p) in gains.iter().zip(&a.powers) {
                assert!(p >= 0.0);
                if p > 0.0 {
                    assert!((p + noise / g - a.level).abs() <= 1e-6 * a.level);
                } else if g > 0.0 {
                    assert!(noise / g >= a.level * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn iterative_water_filling_without_interference_is_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<CMatrix> = (0..4).map(|_| random_matrix(&mut rng, 3, 3)).collect();
        let z = baseline_assignment(Baseline::Ofdma, 3, 4).unwrap();
        let p = iterative_water_filling(&h, 0.7, &z, 2.0, 0.3, 20).unwrap();
        let gains: Vec<f64> = active_pairs(&z).iter().map(|&(k, i)| (h[i][(k, k)] * 0.7).norm_sqr()).collect();
        let q = water_filling(&gains, 2.0, 0.3).unwrap().powers;
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iterative_water_filling_conserves_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h: Vec<CMatrix> = (0..5).map(|_| random_matrix(&mut rng, 4, 4)).collect();
        let z = AssignmentMatrix::ones(4, 5);
        let p = iterative_water_filling(&h, 1.0, &z, 3.0, 0.5, 20).unwrap();
        assert_eq!(p.len(), 20);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-9 * 3.0);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn sum_rate_identity() {
        let z = AssignmentMatrix::from_rows(&[&[1, 0, 1, 1], &[0, 1, 1, 0]]).unwrap();
        let h = identity(2, 4);
        let p = vec![0.5; z.active_pairs()];
        let r = sum_rate(&h, 1.0, &z, &p, 0.01).unwrap();
        let expect = z.active_pairs() as f64 / 4.0 * libm::log2(1.0 + 50.0);
        assert!((r - expect).abs() < 1e-12);
        assert_eq!(sum_rate(&h, 1.0, &z, &[0.0; 5], 0.01).unwrap(), 0.0);
        assert!(sum_rate(&h, 1.0, &z, &[1.0], 0.01).is_err());
    }

    #[test]
    fn sum_rate_residual_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h: Vec<CMatrix> = (0..2).map(|_| random_matrix(&mut rng, 3, 3)).collect();
        let z = AssignmentMatrix::from_rows(&[&[1, 1], &[1, 0], &[0, 1]]).unwrap();
        let p = [0.3, 0.7, 0.2, 0.9];
        let a = 0.4;
        let s = |i: usize, k: usize, pk: f64, q: usize, pq: f64| {
            pk * (h[i][(k, k)] * a).norm_sqr() / (pq * (h[i][(k, q)] * a).norm_sqr() + 0.05)
        };
        // Pairs in order (0,0), (1,0), (0,1), (2,1).
        let expect = (libm::log2(1.0 + s(0, 0, 0.3, 1, 0.7))
            + libm::log2(1.0 + s(0, 1, 0.7, 0, 0.3))
            + libm::log2(1.0 + s(1, 0, 0.2, 2, 0.9))
            + libm::log2(1.0 + s(1, 2, 0.9, 0, 0.2)))
            / 2.0;
        assert!((sum_rate(&h, a, &z, &p, 0.05).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn sum_rate_grows_with_power_without_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h: Vec<CMatrix> = (0..8).map(|_| random_matrix(&mut rng, 4, 4)).collect();
        let z = baseline_assignment(Baseline::Ofdma, 4, 8).unwrap();
        let mut last = 0.0;
        for dbm in [-20.0, -10.0, 0.0, 10.0, 20.0] {
            let total = dbm_to_watts(dbm);
            let p = iterative_water_filling(&h, 1.0, &z, total, 1e-3, 20).unwrap();
            let r = sum_rate(&h, 1.0, &z, &p, 1e-3).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn ber_noiseless_identity() {
        let z = AssignmentMatrix::ones(3, 4);
        let est = ber_monte_carlo(&identity(3, 4), 1.0, &z, &[1.0; 12], 0.0, 0..50, 1).unwrap();
        assert_eq!(est.aggregate(), 0.0);
        assert_eq!(est.bits, vec![200, 200, 200]);
    }

    #[test]
    fn ber_matches_bpsk_closed_form() {
        let (k, n) = (4, 25);
        let z = AssignmentMatrix::ones(k, n);
        let noise = 1e-3;
        for db in [0.0, 2.0, 4.0, 6.0, 8.0] {
            let p = vec![db_to_linear(db) * noise; k * n];
            let est = ber_monte_carlo(&identity(k, n), 1.0, &z, &p, noise, 0..1000, 42).unwrap();
            let bits = est.bits.iter().sum::<u64>() as f64;
            assert_eq!(bits, 1e5);
            let expect = bpsk_ber(db_to_linear(db));
            let sigma = libm::sqrt(expect * (1.0 - expect) / bits);
            assert!((est.aggregate() - expect).abs() <= 3.0 * sigma, "{db} dB");
        }
    }

    #[test]
    fn ber_is_deterministic_and_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 2, 2)).collect();
        let z = AssignmentMatrix::ones(2, 3);
        let p = [1.0; 6];
        let all = ber_monte_carlo(&h, 1.0, &z, &p, 0.5, 0..300, 7).unwrap();
        assert_eq!(all, ber_monte_carlo(&h, 1.0, &z, &p, 0.5, 0..300, 7).unwrap());
        let mut parts = ber_monte_carlo(&h, 1.0, &z, &p, 0.5, 0..100, 7).unwrap();
        parts.merge(&ber_monte_carlo(&h, 1.0, &z, &p, 0.5, 100..300, 7).unwrap());
        assert_eq!(all, parts);
        assert_ne!(all, ber_monte_carlo(&h, 1.0, &z, &p, 0.5, 0..300, 8).unwrap());
    }

    #[test]
    fn ber_user_swap_permutes() {
        // Users with different SNRs; swapping their channel roles swaps the BER.
        let z = AssignmentMatrix::ones(2, 1);
        let h = vec![CMatrix::identity(2, 2)];
        let a = ber_monte_carlo(&h, 1.0, &z, &[4.0, 1.0], 1.0, 0..20_000, 3).unwrap().per_user();
        let b = ber_monte_carlo(&h, 1.0, &z, &[1.0, 4.0], 1.0, 0..20_000, 3).unwrap().per_user();
        assert!(a[0] < a[1] && b[1] < b[0]);
        assert!((a[0] - b[1]).abs() < 0.01 && (a[1] - b[0]).abs() < 0.01);
    }

    #[test]
    fn zero_forcing_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(4, 0));
        let g: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 4, 16)).collect();
        let d = digital_zf_channels(&g).unwrap();
        for (gi, di) in g.iter().zip(&d) {
            let f = gi.adjoint() * (gi * gi.adjoint()).try_inverse().unwrap();
            let f = CMatrix::from_fn(16, 4, |r, c| f[(r, c)] / f.column(c).norm());
            let e = gi * &f;
            for r in 0..4 {
                for c in 0..4 {
                    assert!((e[(r, c)] - di[(r, c)]).norm() < 1e-10);
                }
            }
        }
        // Interference-free: sum rate is the sum of single-link rates.
        let z = AssignmentMatrix::ones(4, 3);
        let p = vec![0.1; 12];
        let r = sum_rate(&d, 1.0, &z, &p, 0.01).unwrap();
        let expect: f64 = active_pairs(&z)
            .iter()
            .map(|&(k, i)| libm::log2(1.0 + 0.1 * d[i][(k, k)].norm_sqr() / 0.01))
            .sum::<f64>()
            / 3.0;
        assert!((r - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_forcing_ber_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = vec![random_matrix(&mut rng, 2, 6)];
        let d = digital_zf_channels(&g).unwrap();
        let z = AssignmentMatrix::ones(2, 1);
        let noise = 1.0;
        // Pick powers that put both users near 3 dB.
        let p: Vec<f64> = (0..2).map(|k| db_to_linear(3.0) * noise / d[0][(k, k)].norm_sqr()).collect();
        let est = ber_monte_carlo(&d, 1.0, &z, &p, noise, 0..50_000, 9).unwrap();
        let expect = bpsk_ber(db_to_linear(3.0));
        for b in est.per_user() {
            let sigma = libm::sqrt(expect * (1.0 - expect) / 50_000.0);
            assert!((b - expect).abs() <= 3.5 * sigma);
        }
    }

    #[test]
    fn zero_forcing_rejects_rank_deficiency() {
        let row = CMatrix::from_fn(1, 5, |_, c| Complex64::new(c as f64 + 1.0, 0.5));
        let g = CMatrix::from_fn(2, 5, |_, c| row[(0, c)]);
        let ok = CMatrix::from_fn(2, 5, |r, c| Complex64::new((r * 5 + c) as f64, (c * c) as f64 - r as f64));
        assert_eq!(digital_zf_channels(&[ok, g]), Err(Error::RankDeficient(1)));
    }
}
