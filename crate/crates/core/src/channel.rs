//! Scatterer-based frequency-selective channel between the SIM aperture and
//! `K` single-antenna users.
//!
//! Coordinates: the SIM aperture lies in the x-z plane centred at
//! `(0, 0, bs_height)` and radiates towards +y. Users sit on the ground
//! (`z = 0`) along a row at `y = user_range`, centred on `x = 0`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::CMatrix;
use crate::rng::{self, Purpose};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Height of the SIM aperture centre above ground, m.
    pub bs_height: f64,
    /// Perpendicular distance from the base station to the user row, m.
    pub user_range: f64,
    /// Spacing between adjacent users, m.
    pub user_spacing: f64,
    pub users: usize,
    /// Meta-atoms along x.
    pub meta_cols: usize,
    /// Meta-atoms along z.
    pub meta_rows: usize,
    /// Meta-atom pitch `r_T`, m.
    pub atom_pitch: f64,
    pub bs_gain_dbi: f64,
    pub ue_gain_dbi: f64,
    /// Reference frequency for the free-space path amplitude, Hz.
    pub carrier: f64,
    /// Drop the line-of-sight path (p = 0).
    pub los_blocked: bool,
}

/// Axis-aligned box, `min <= p <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::Config("geometry needs at least one user".into()));
        }
        if self.meta_cols == 0 || self.meta_rows == 0 {
            return Err(Error::Config("meta-atom grid must be non-empty".into()));
        }
        let lengths = [
            ("bs_height", self.bs_height),
            ("user_range", self.user_range),
            ("user_spacing", self.user_spacing),
            ("atom_pitch", self.atom_pitch),
            ("carrier", self.carrier),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what: name, value: v });
            }
        }
        if self.user_range <= 20.0 {
            return Err(Error::Config(
                "user_range must exceed 20 m to leave room for scatterers".into(),
            ));
        }
        Ok(())
    }

    pub fn atoms(&self) -> usize {
        self.meta_cols * self.meta_rows
    }

    pub fn aperture_center(&self) -> [f64; 3] {
        [0.0, 0.0, self.bs_height]
    }

    pub fn user_position(&self, k: usize) -> [f64; 3] {
        let offset = k as f64 - (self.users as f64 - 1.0) / 2.0;
        [offset * self.user_spacing, self.user_range, 0.0]
    }

    /// Box between the base station and the user row that hosts scatterers.
    pub fn scattering_region(&self) -> Region {
        let half_span = (self.users as f64 - 1.0) / 2.0 * self.user_spacing;
        Region {
            min: [-half_span, 10.0, 0.0],
            max: [half_span, self.user_range - 10.0, self.bs_height],
        }
    }

    fn antenna_amplitude(&self) -> f64 {
        libm::pow(10.0, (self.bs_gain_dbi + self.ue_gain_dbi) / 20.0)
    }

    fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub position: [f64; 3],
    /// Whether user `k` sees this scatterer.
    pub visible: Vec<bool>,
    /// Unit-modulus random phase applied to the scattered path.
    pub phase: Complex64,
}

/// One propagation path as seen from the SIM aperture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    /// Excess delay after the user's first arrival, s. The receiver's FFT
    /// window and carrier phase lock onto the earliest path.
    pub delay: f64,
    /// Elevation in `[0, pi)`.
    pub elevation: f64,
    /// Azimuth in `[-pi/2, pi/2]`.
    pub azimuth: f64,
}

/// Subcarrier centre frequencies `f0 - B/2 + (i + 1/2) B / N_c`, `i = 0..N_c`.
pub fn subcarrier_frequencies(center: f64, bandwidth: f64, subcarriers: usize) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0) {
        return Err(Error::Config("bandwidth must be positive".into()));
    }
    if subcarriers == 0 {
        return Err(Error::Config("need at least one subcarrier".into()));
    }
    let spacing = bandwidth / subcarriers as f64;
    Ok((0..subcarriers)
        .map(|i| center - bandwidth / 2.0 + (i as f64 + 0.5) * spacing)
        .collect())
}

/// Scatterers drawn uniformly in [`Geometry::scattering_region`], all visible
/// to every user.
pub fn generate_scatterers(geometry: &Geometry, count: usize, seed: u64) -> Vec<Scatterer> {
    let region = geometry.scattering_region();
    let mut rng = rng::stream(seed, Purpose::Scatterers, 0);
    (0..count)
        .map(|_| {
            let mut position = [0.0; 3];
            for (a, p) in position.iter_mut().enumerate() {
                let u: f64 = rng.random();
                *p = region.min[a] + u * (region.max[a] - region.min[a]);
            }
            let psi = 2.0 * PI * rng.random::<f64>();
            Scatterer {
                position,
                visible: vec![true; geometry.users],
                phase: Complex64::new(libm::cos(psi), libm::sin(psi)),
            }
        })
        .collect()
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])
}

/// Elevation (from +z) and azimuth (from +y towards +x) of `to` seen from `from`.
pub fn departure_angles(from: [f64; 3], to: [f64; 3]) -> (f64, f64) {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let r = distance(from, to);
    let elevation = libm::acos((d[2] / r).clamp(-1.0, 1.0));
    let azimuth = libm::atan2(d[0], d[1]);
    (elevation, azimuth)
}

/// Uniform planar array response `alpha_x (x) alpha_z`; entry `m_x * M_z + m_z`.
pub fn steering_vector(
    geometry: &Geometry,
    elevation: f64,
    azimuth: f64,
    frequency: f64,
) -> Result<Vec<Complex64>> {
    if !(0.0..PI).contains(&elevation) {
        return Err(Error::Domain {
            what: "elevation",
            value: elevation,
        });
    }
    if !(-PI / 2.0..=PI / 2.0).contains(&azimuth) {
        return Err(Error::Domain {
            what: "azimuth",
            value: azimuth,
        });
    }
    let k = 2.0 * PI * geometry.atom_pitch * frequency / SPEED_OF_LIGHT;
    let step_x = k * libm::sin(elevation) * libm::sin(azimuth);
    let step_z = k * libm::cos(elevation);
    let mut out = Vec::with_capacity(geometry.atoms());
    for mx in 0..geometry.meta_cols {
        for mz in 0..geometry.meta_rows {
            let phase = step_x * mx as f64 + step_z * mz as f64;
            out.push(Complex64::new(libm::cos(phase), libm::sin(phase)));
        }
    }
    Ok(out)
}

/// Line-of-sight path (unless blocked) followed by one path per visible
/// scatterer, delays referenced to the earliest arrival.
pub fn user_paths(geometry: &Geometry, scatterers: &[Scatterer], user: usize) -> Vec<Path> {
    let center = geometry.aperture_center();
    let ue = geometry.user_position(user);
    let lambda = geometry.wavelength();
    let amp = geometry.antenna_amplitude();
    let path_amplitude = |d: f64| amp * libm::sqrt(lambda / (4.0 * PI * d));

    let mut paths = Vec::with_capacity(scatterers.len() + 1);
    if !geometry.los_blocked {
        let d = distance(center, ue);
        let (elevation, azimuth) = departure_angles(center, ue);
        paths.push(Path {
            gain: Complex64::new(path_amplitude(d), 0.0),
            delay: d / SPEED_OF_LIGHT,
            elevation,
            azimuth,
        });
    }
    for s in scatterers.iter().filter(|s| s.visible[user]) {
        let d = distance(center, s.position) + distance(s.position, ue);
        let (elevation, azimuth) = departure_angles(center, s.position);
        paths.push(Path {
            gain: s.phase * path_amplitude(d),
            delay: d / SPEED_OF_LIGHT,
            elevation,
            azimuth,
        });
    }
    let first = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
    for p in &mut paths {
        p.delay -= first;
    }
    paths
}

/// `sum_p g_p e^{-j 2 pi f tau_p} alpha_p(f)^H` as a length-`M` row.
pub fn channel_vector_from_paths(
    geometry: &Geometry,
    paths: &[Path],
    frequency: f64,
) -> Result<Vec<Complex64>> {
    let mut row = vec![Complex64::new(0.0, 0.0); geometry.atoms()];
    for p in paths {
        let steer = steering_vector(geometry, p.elevation, p.azimuth, frequency)?;
        let arg = -2.0 * PI * frequency * p.delay;
        let coeff = p.gain * Complex64::new(libm::cos(arg), libm::sin(arg));
        for (r, a) in row.iter_mut().zip(&steer) {
            *r += coeff * a.conj();
        }
    }
    Ok(row)
}

pub fn channel_vector(
    scatterers: &[Scatterer],
    user: usize,
    frequency: f64,
    geometry: &Geometry,
) -> Result<Vec<Complex64>> {
    if user >= geometry.users {
        return Err(Error::Dimension(alloc::format!(
            "user {user} of {}",
            geometry.users
        )));
    }
    channel_vector_from_paths(geometry, &user_paths(geometry, scatterers, user), frequency)
}

/// Per-subcarrier `K x M` channels plus the scatterers that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub frequencies: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub scatterers: Vec<Scatterer>,
    pub seed: u64,
}

impl ChannelRealization {
    /// Draws `count` scatterers from `seed` and assembles the channel.
    pub fn generate(
        geometry: &Geometry,
        frequencies: &[f64],
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        let scatterers = generate_scatterers(geometry, count, seed);
        assemble_channel(scatterers, geometry, frequencies, seed)
    }

    pub fn users(&self) -> usize {
        self.matrices.first().map_or(0, |g| g.nrows())
    }

    pub fn subcarriers(&self) -> usize {
        self.matrices.len()
    }
}

pub fn assemble_channel(
    scatterers: Vec<Scatterer>,
    geometry: &Geometry,
    frequencies: &[f64],
    seed: u64,
) -> Result<ChannelRealization> {
    let paths: Vec<Vec<Path>> = (0..geometry.users)
        .map(|k| user_paths(geometry, &scatterers, k))
        .collect();
    let mut matrices = Vec::with_capacity(frequencies.len());
    for &f in frequencies {
        let mut g = CMatrix::zeros(geometry.users, geometry.atoms());
        for (k, p) in paths.iter().enumerate() {
            let row = channel_vector_from_paths(geometry, p, f)?;
            for (m, v) in row.into_iter().enumerate() {
                g[(k, m)] = v;
            }
        }
        matrices.push(g);
    }
    Ok(ChannelRealization {
        frequencies: frequencies.to_vec(),
        matrices,
        scatterers,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry() -> Geometry {
        Geometry {
            bs_height: 10.0,
            user_range: 250.0,
            user_spacing: 30.0,
            users: 4,
            meta_cols: 4,
            meta_rows: 4,
            atom_pitch: SPEED_OF_LIGHT / 56e9,
            bs_gain_dbi: 3.0,
            ue_gain_dbi: 0.0,
            carrier: 28e9,
            los_blocked: false,
        }
    }

    #[test]
    fn frequency_grid() {
        let f = subcarrier_frequencies(28e9, 40e6, 16).unwrap();
        assert_eq!(f.len(), 16);
        assert!((f[0] - 27.98125e9).abs() < 1e-3);
        assert!((f[15] - 28.01875e9).abs() < 1e-3);
        let mean = f.iter().sum::<f64>() / 16.0;
        assert!((mean - 28e9).abs() < 1e-3);
        assert_eq!(subcarrier_frequencies(28e9, 40e6, 1).unwrap(), vec![28e9]);
        assert!(subcarrier_frequencies(28e9, 0.0, 4).is_err());
        assert!(subcarrier_frequencies(28e9, 40e6, 0).is_err());
    }

    #[test]
    fn scatterers_deterministic_and_inside_region() {
        let g = geometry();
        assert!(generate_scatterers(&g, 0, 3).is_empty());
        let a = generate_scatterers(&g, 100, 7);
        let b = generate_scatterers(&g, 100, 7);
        assert_eq!(a, b);
        let region = g.scattering_region();
        assert_eq!(region.min, [-45.0, 10.0, 0.0]);
        assert_eq!(region.max, [45.0, 240.0, 10.0]);
        assert!(a.iter().all(|s| region.contains(s.position)));
        assert!(a.iter().all(|s| (s.phase.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn delays_start_at_first_arrival() {
        let g = geometry();
        let sc = generate_scatterers(&g, 20, 5);
        for user in 0..g.users {
            let paths = user_paths(&g, &sc, user);
            let min = paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
            assert_eq!(min, 0.0);
            assert!(paths.iter().all(|p| p.delay >= 0.0 && p.delay < 2e-6));
        }
    }

    #[test]
    fn steering_vector_basics() {
        let g = geometry();
        let a = steering_vector(&g, 0.7, -0.3, 28e9).unwrap();
        assert_eq!(a[0], Complex64::new(1.0, 0.0));
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        // theta = pi/2: alpha_z is all ones, so entries repeat across m_z
        let b = steering_vector(&g, PI / 2.0, 0.4, 28e9).unwrap();
        for mx in 0..4 {
            for mz in 1..4 {
                assert!((b[mx * 4 + mz] - b[mx * 4]).norm() < 1e-12);
            }
        }
        // r_T = c/(2f) gives a step of pi sin(theta) sin(phi) along x
        let f = 28e9;
        let (th, ph) = (1.1, 0.6);
        let c = steering_vector(&g, th, ph, f).unwrap();
        let step = (c[4] * c[0].conj()).arg();
        assert!((step - PI * libm::sin(th) * libm::sin(ph)).abs() < 1e-12);
        assert!(steering_vector(&g, PI, 0.0, f).is_err());
        assert!(steering_vector(&g, 1.0, 2.0, f).is_err());
    }

    #[test]
    fn blocked_los_without_scatterers_is_zero() {
        let mut g = geometry();
        g.los_blocked = true;
        let v = channel_vector(&[], 1, 28e9, &g).unwrap();
        assert!(v.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_unit_path() {
        let g = geometry();
        let p = Path {
            gain: Complex64::new(1.0, 0.0),
            delay: 0.0,
            elevation: 1.2,
            azimuth: 0.2,
        };
        let v = channel_vector_from_paths(&g, &[p], 28e9).unwrap();
        let a = steering_vector(&g, 1.2, 0.2, 28e9).unwrap();
        for (x, y) in v.iter().zip(&a) {
            assert!((x - y.conj()).norm() < 1e-14);
            assert!((x.norm() - 1.0).abs() < 1e-12);
        }
        // doubling the delay only rotates the single-path channel
        let mut q = p;
        q.delay = 3.3e-7;
        let w1 = channel_vector_from_paths(&g, &[q], 28e9).unwrap();
        q.delay *= 2.0;
        let w2 = channel_vector_from_paths(&g, &[q], 28e9).unwrap();
        for (x, y) in w1.iter().zip(&w2) {
            assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn assembled_rows_match_channel_vector() {
        let g = geometry();
        let f = subcarrier_frequencies(28e9, 40e6, 4).unwrap();
        let real = ChannelRealization::generate(&g, &f, 10, 5).unwrap();
        assert_eq!(real.subcarriers(), 4);
        for (i, &fi) in f.iter().enumerate() {
            for k in 0..4 {
                let v = channel_vector(&real.scatterers, k, fi, &g).unwrap();
                for m in 0..16 {
                    assert_eq!(real.matrices[i][(k, m)], v[m]);
                }
            }
        }
        assert_eq!(real, ChannelRealization::generate(&g, &f, 10, 5).unwrap());
        assert!(channel_vector(&real.scatterers, 4, f[0], &g).is_err());
    }

    #[test]
    fn single_user_channel_is_one_row() {
        let mut g = geometry();
        g.users = 1;
        let f = [28e9];
        let real = ChannelRealization::generate(&g, &f, 5, 1).unwrap();
        assert_eq!(real.matrices[0].shape(), (1, 16));
    }
}
