//! Subcarrier grid, Rayleigh fading and the coupling-aware equivalent channel.
//!
//! The physical channel is the transimpedance `Z_RT` between transmit currents
//! and receive open-circuit voltages. Absorbing the source and load networks
//! gives `H_eq = R_L (R_L + Z_R)^-1 Z_RT (Z_T + R I)^-1`, and normalising by
//! the diagonal noise-colouring matrix `A = R_L (R_L + Z_R)^-1` yields the
//! channel `H~ = A^-1 H_eq` seen with white receiver noise.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::antenna::{receive_gain_factor, SPEED_OF_LIGHT};
use crate::antenna::ChuParams;
use crate::error::{config, domain, numerical, Result};
use crate::numerics::linalg::{frobenius, hermitian_log2_det, inverse, psd_sqrt};
use crate::numerics::{CMatrix, RMatrix, RngStream};

/// Relative tolerance of the `A^-1 H_eq = Z_RT (Z_T + R I)^-1` identity check.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subcarrier {
    pub frequency: f64,
    pub bandwidth: f64,
    pub band: Band,
}

/// Low-band subcarriers followed by high-band subcarriers under one index.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGrid {
    entries: Vec<Subcarrier>,
    low_count: usize,
    high_count: usize,
    low_bandwidth: f64,
    high_bandwidth: f64,
}

impl SubcarrierGrid {
    /// Contiguous subcarriers centred on each band centre:
    /// `f_L + (m - (M_L - 1)/2) B_L`, `m = 0..M_L`, and likewise for the high band.
    pub fn new(
        low_count: usize,
        high_count: usize,
        low_center: f64,
        high_center: f64,
        low_bandwidth: f64,
        high_bandwidth: f64,
    ) -> Result<Self> {
        if low_count + high_count == 0 {
            return Err(config("subcarrier grid needs at least one subcarrier"));
        }
        for (name, v) in [
            ("bands.f_L", low_center),
            ("bands.f_H", high_center),
            ("bands.B_L", low_bandwidth),
            ("bands.B_H", high_bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be positive, got {v}")));
            }
        }
        let place = |count: usize, center: f64, bw: f64, band: Band| {
            (0..count).map(move |m| Subcarrier {
                frequency: center + (m as f64 - (count as f64 - 1.0) / 2.0) * bw,
                bandwidth: bw,
                band,
            })
        };
        let entries: Vec<Subcarrier> = place(low_count, low_center, low_bandwidth, Band::Low)
            .chain(place(high_count, high_center, high_bandwidth, Band::High))
            .collect();
        if let Some(low) = entries.iter().filter(|s| s.band == Band::Low).map(|s| s.frequency).last() {
            if let Some(high) = entries.iter().find(|s| s.band == Band::High) {
                if low >= high.frequency {
                    return Err(config(format!(
                        "low band (up to {low} Hz) overlaps the high band (from {} Hz)",
                        high.frequency
                    )));
                }
            }
        }
        if let Some(first) = entries.first() {
            if first.frequency <= 0.0 {
                return Err(config("subcarrier grid reaches non-positive frequencies"));
            }
        }
        Ok(SubcarrierGrid {
            entries,
            low_count,
            high_count,
            low_bandwidth,
            high_bandwidth,
        })
    }

    pub fn entries(&self) -> &[Subcarrier] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn low_count(&self) -> usize {
        self.low_count
    }

    pub fn high_count(&self) -> usize {
        self.high_count
    }

    pub fn count(&self, band: Band) -> usize {
        match band {
            Band::Low => self.low_count,
            Band::High => self.high_count,
        }
    }

    /// Index range of a band within the common index.
    pub fn band_range(&self, band: Band) -> std::ops::Range<usize> {
        match band {
            Band::Low => 0..self.low_count,
            Band::High => self.low_count..self.low_count + self.high_count,
        }
    }

    pub fn bandwidth(&self, band: Band) -> f64 {
        match band {
            Band::Low => self.low_bandwidth,
            Band::High => self.high_bandwidth,
        }
    }

    /// `B_H / B_L`, the water-level ratio between the bands.
    pub fn bandwidth_ratio(&self) -> f64 {
        self.high_bandwidth / self.low_bandwidth
    }
}

/// One `K x N` Rayleigh matrix per subcarrier plus the user distances.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    pub seed: u64,
    pub matrices: Vec<CMatrix>,
}

/// Stream for the fading seen by `user` on subcarrier `index`.
///
/// Each (subcarrier, user) row has its own stream and antennas are drawn in
/// order, so arrays of different sizes share their leading entries.
pub fn fading_stream(seed: u64, index: usize, user: usize) -> RngStream {
    RngStream::new(seed).fork("fading").fork(index).fork(user)
}

/// Complex Gaussian entries with variance 1/2 per dimension.
pub fn fading_matrix(seed: u64, index: usize, users: usize, antennas: usize) -> CMatrix {
    let mut m = CMatrix::zeros(users, antennas);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..users {
        let mut rng = fading_stream(seed, index, k).rng();
        for n in 0..antennas {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            m[(k, n)] = Complex64::new(s * re, s * im);
        }
    }
    m
}

pub fn draw_fading(seed: u64, users: usize, antennas: usize, grid: &SubcarrierGrid) -> Result<FadingRealization> {
    if users == 0 || antennas == 0 {
        return Err(domain("fading needs at least one user and one antenna"));
    }
    Ok(FadingRealization {
        seed,
        matrices: (0..grid.len()).map(|i| fading_matrix(seed, i, users, antennas)).collect(),
    })
}

/// Transimpedance with a precomputed `Re{Z_T}^(1/2)`:
/// row `k` of `(c / (2 pi f d_k^(gamma/2))) Upsilon F Re{Z_T}^(1/2)`.
pub fn transimpedance_with_root(
    f: f64,
    fading: &CMatrix,
    re_root: &CMatrix,
    distances: &[f64],
    path_loss_exponent: f64,
    params: &ChuParams,
) -> Result<CMatrix> {
    if distances.len() != fading.nrows() {
        return Err(domain(format!(
            "{} distances for {} users",
            distances.len(),
            fading.nrows()
        )));
    }
    if let Some(d) = distances.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(domain(format!("user distance must be positive, got {d}")));
    }
    let upsilon = receive_gain_factor(f, params)?;
    let base = SPEED_OF_LIGHT / (2.0 * PI * f) * upsilon;
    let mut z = fading * re_root;
    for (k, d) in distances.iter().enumerate() {
        let s = base / d.powf(path_loss_exponent / 2.0);
        z.row_mut(k).scale_mut(s);
    }
    Ok(z)
}

/// Transimpedance `Z_RT` from the transmit impedance matrix; the principal
/// square root of `Re{Z_T}` tolerates rounding-level negative eigenvalues.
pub fn transimpedance(
    f: f64,
    fading: &CMatrix,
    zt: &CMatrix,
    distances: &[f64],
    path_loss_exponent: f64,
    params: &ChuParams,
) -> Result<CMatrix> {
    let re: RMatrix = zt.map(|z| z.re);
    let root = psd_sqrt(&re)?.map(|v| Complex64::new(v, 0.0));
    transimpedance_with_root(f, fading, &root, distances, path_loss_exponent, params)
}

/// Matched loads at the users and the transmit source resistance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadModel {
    pub loads: Vec<f64>,
    pub source: f64,
}

impl LoadModel {
    pub fn uniform(users: usize, load: f64, source: f64) -> Result<Self> {
        if !(load > 0.0) || !(source > 0.0) {
            return Err(domain("load and source resistances must be positive"));
        }
        Ok(LoadModel {
            loads: vec![load; users],
            source,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EquivalentChannel {
    pub h_eq: CMatrix,
    /// Diagonal of `A = R_L (R_L + Z_R)^-1`.
    pub coloring: DVector<Complex64>,
    pub h_tilde: CMatrix,
}

/// `H_eq`, `A` and `H~` given `(Z_T + R I)^-1`.
///
/// `H~` is formed as `A^-1 H_eq` and checked against the direct product
/// `Z_RT (Z_T + R I)^-1`.
pub fn equivalent_channel_with_inverse(
    z_rt: &CMatrix,
    source_inverse: &CMatrix,
    z_r: &CMatrix,
    loads: &LoadModel,
) -> Result<EquivalentChannel> {
    let k = z_rt.nrows();
    if z_r.shape() != (k, k) || loads.loads.len() != k {
        return Err(domain("receive impedance and loads must match the user count"));
    }
    let r_l = CMatrix::from_diagonal(&DVector::from_iterator(
        k,
        loads.loads.iter().map(|r| Complex64::new(*r, 0.0)),
    ));
    let a = &r_l * inverse(&(&r_l + z_r), "R_L + Z_R")?;
    let direct = z_rt * source_inverse;
    let h_eq = &a * &direct;
    let h_tilde = inverse(&a, "A = R_L (R_L + Z_R)^-1")? * &h_eq;
    let scale = frobenius(&h_tilde);
    let gap = frobenius(&(&h_tilde - &direct));
    if gap > IDENTITY_TOL * scale {
        return Err(numerical(format!(
            "A^-1 H_eq deviates from Z_RT (Z_T + R I)^-1 by {:.3e} (relative)",
            gap / scale
        )));
    }
    Ok(EquivalentChannel {
        h_eq,
        coloring: a.diagonal(),
        h_tilde,
    })
}

pub fn equivalent_channel(
    z_rt: &CMatrix,
    zt: &CMatrix,
    z_r: &CMatrix,
    loads: &LoadModel,
) -> Result<EquivalentChannel> {
    let n = zt.nrows();
    let driven = zt + CMatrix::identity(n, n) * Complex64::new(loads.source, 0.0);
    let inv = inverse(&driven, "Z_T + R I")?;
    equivalent_channel_with_inverse(z_rt, &inv, z_r, loads)
}

/// Gaussian mutual information `log2 |H W W^H H^H + s A A^H| - log2 |s A A^H|`
/// in bits per channel use; `coloring = None` means white noise (`A = I`).
pub fn mutual_information(
    h: &CMatrix,
    w: &CMatrix,
    noise_variance: f64,
    coloring: Option<&CMatrix>,
) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(domain(format!("noise variance must be positive, got {noise_variance}")));
    }
    let k = h.nrows();
    let noise = match coloring {
        Some(a) => a * a.adjoint() * Complex64::new(noise_variance, 0.0),
        None => CMatrix::identity(k, k) * Complex64::new(noise_variance, 0.0),
    };
    let hw = h * w;
    let signal = &hw * hw.adjoint();
    Ok(hermitian_log2_det(&(signal + &noise))? - hermitian_log2_det(&noise)?)
}

/// Per-band noise variances with `sigma2_H / sigma2_L = B_H / B_L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub low: f64,
    pub high: f64,
}

impl NoiseLevels {
    pub fn for_band(&self, band: Band) -> f64 {
        match band {
            Band::Low => self.low,
            Band::High => self.high,
        }
    }

    pub fn per_subcarrier(&self, grid: &SubcarrierGrid) -> Vec<f64> {
        grid.entries().iter().map(|s| self.for_band(s.band)).collect()
    }
}

/// Noise variances anchoring the average low-band receive SNR.
///
/// `sigma2_L` solves `(P_T / (M_L + M_H)) G_L / sigma2_L = 10^(snr/10)` where
/// `G_L` is the ensemble mean of `||h~_{i,k}||^2` over low-band subcarriers.
pub fn calibrate_noise(
    target_snr_db: f64,
    grid: &SubcarrierGrid,
    ensemble: &[Vec<CMatrix>],
    total_power: f64,
) -> Result<NoiseLevels> {
    if ensemble.is_empty() {
        return Err(config("noise calibration needs a non-empty ensemble"));
    }
    let low = grid.band_range(Band::Low);
    let (mut sum, mut count) = (0.0, 0usize);
    for set in ensemble {
        for h in &set[low.clone()] {
            for row in h.row_iter() {
                sum += row.norm_squared();
                count += 1;
            }
        }
    }
    let mean = if count == 0 { 0.0 } else { sum / count as f64 };
    if !(mean > 0.0) {
        return Err(config("noise calibration: mean low-band channel gain is zero"));
    }
    let per_subcarrier = total_power / grid.len() as f64;
    let low_var = per_subcarrier * mean / 10f64.powf(target_snr_db / 10.0);
    Ok(NoiseLevels {
        low: low_var,
        high: grid.bandwidth_ratio() * low_var,
    })
}

/// White-noise channels `H~_i` (K x N) with their noise variances, the input
/// of the allocation stage.
#[derive(Debug, Clone)]
pub struct EquivalentChannelSet {
    pub grid: SubcarrierGrid,
    pub channels: Vec<CMatrix>,
    pub noise: Vec<f64>,
}

impl EquivalentChannelSet {
    pub fn new(grid: SubcarrierGrid, channels: Vec<CMatrix>, noise: NoiseLevels) -> Result<Self> {
        let noise = noise.per_subcarrier(&grid);
        Self::with_noise(grid, channels, noise)
    }

    pub fn with_noise(grid: SubcarrierGrid, channels: Vec<CMatrix>, noise: Vec<f64>) -> Result<Self> {
        if channels.len() != grid.len() || noise.len() != grid.len() {
            return Err(domain(format!(
                "{} channel matrices and {} noise levels for {} subcarriers",
                channels.len(),
                noise.len(),
                grid.len()
            )));
        }
        let shape = channels[0].shape();
        if shape.0 == 0 || shape.1 == 0 || channels.iter().any(|h| h.shape() != shape) {
            return Err(domain("channel matrices must share a non-empty shape"));
        }
        if let Some(v) = noise.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(domain(format!("noise variance must be positive, got {v}")));
        }
        Ok(EquivalentChannelSet { grid, channels, noise })
    }

    pub fn users(&self) -> usize {
        self.channels[0].nrows()
    }

    pub fn antennas(&self) -> usize {
        self.channels[0].ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{build_zr, build_zt, ArrayGeometry, ArrayKind, Coupling};

    fn reference_grid(ml: usize, mh: usize) -> SubcarrierGrid {
        SubcarrierGrid::new(ml, mh, 3.5e9, 17.5e9, 120e3, 480e3).unwrap()
    }

    #[test]
    fn single_low_subcarrier_sits_on_center() {
        let g = reference_grid(1, 0);
        assert_eq!(g.entries()[0].frequency, 3.5e9);
    }

    #[test]
    fn grid_span_and_pairs() {
        let g = reference_grid(40, 3);
        let low: Vec<f64> = g.entries()[..40].iter().map(|s| s.frequency).collect();
        assert!((low[39] - low[0] - 39.0 * 120e3).abs() < 1e-3);
        // 40 subcarriers of 120 kHz cover 4.8 MHz around the centre
        assert!(((low[39] + 60e3) - (low[0] - 60e3) - 4.8e6).abs() < 1e-3);
        assert!(((low[0] + low[39]) / 2.0 - 3.5e9).abs() < 1e-3);
        assert!(low.windows(2).all(|w| w[1] > w[0]));
        let g = reference_grid(2, 3);
        assert_eq!(g.entries()[0].frequency, 3.5e9 - 60e3);
        assert_eq!(g.entries()[1].frequency, 3.5e9 + 60e3);
        assert_eq!(g.entries()[3].frequency, 17.5e9);
        assert!(g.entries()[2..].iter().all(|s| s.band == Band::High));
        assert_eq!(g.band_range(Band::High), 2..5);
    }

    #[test]
    fn overlapping_bands_are_rejected() {
        assert!(SubcarrierGrid::new(100, 100, 3.5e9, 3.5e9 + 1e6, 120e3, 480e3).is_err());
        assert!(SubcarrierGrid::new(0, 0, 3.5e9, 17.5e9, 120e3, 480e3).is_err());
    }

    #[test]
    fn fading_is_deterministic_and_nested() {
        let g = reference_grid(2, 2);
        let a = draw_fading(5, 3, 4, &g).unwrap();
        let b = draw_fading(5, 3, 4, &g).unwrap();
        assert_eq!(a, b);
        let wide = draw_fading(5, 3, 9, &g).unwrap();
        for i in 0..g.len() {
            assert_eq!(wide.matrices[i].columns(0, 4), a.matrices[i]);
        }
        assert_ne!(draw_fading(6, 3, 4, &g).unwrap(), a);
    }

    #[test]
    fn fading_moments() {
        let n = 10_000;
        let x: Vec<Complex64> = (0..n).map(|s| fading_matrix(s as u64, 0, 1, 1)[(0, 0)]).collect();
        let y: Vec<Complex64> = (0..n).map(|s| fading_matrix(s as u64, 1, 1, 1)[(0, 0)]).collect();
        let var = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        assert!((0.97..=1.03).contains(&var), "{var}");
        let corr = x.iter().zip(&y).map(|(a, b)| a * b.conj()).sum::<Complex64>()
            / (x.iter().map(|z| z.norm_sqr()).sum::<f64>() * y.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        assert!(corr.norm() < 0.05, "{corr}");
    }

    #[test]
    fn transimpedance_scaling() {
        let p = ChuParams::default();
        let f = 3.5e9;
        let fading = CMatrix::from_element(2, 3, Complex64::new(1.0, 0.0));
        let zt = CMatrix::identity(3, 3) * Complex64::new(p.resistance, 0.0);
        let gamma = 2.7;
        let z = transimpedance(f, &fading, &zt, &[100.0, 100.0], gamma, &p).unwrap();
        let ups = receive_gain_factor(f, &p).unwrap();
        let expect = SPEED_OF_LIGHT / (2.0 * PI * f * 100f64.powf(gamma / 2.0)) * ups * p.resistance.sqrt();
        for v in z.iter() {
            assert!((v.re - expect).abs() < 1e-12 * expect && v.im.abs() < 1e-15);
        }
        let far = transimpedance(f, &fading, &zt, &[100.0, 200.0], gamma, &p).unwrap();
        assert_eq!(far.row(0), z.row(0));
        let ratio = far[(1, 0)].re / z[(1, 0)].re;
        assert!((ratio - 2f64.powf(-gamma / 2.0)).abs() < 1e-12);
        assert!(transimpedance(f, &fading, &zt, &[100.0, 0.0], gamma, &p).is_err());
    }

    #[test]
    fn receive_factor_at_high_band() {
        // from tests/oracles/scalar_values.py
        let p = ChuParams::default();
        let r = receive_gain_factor(17.5e9, &p).unwrap() / p.resistance.sqrt();
        assert!((r - 0.6758309700897037).abs() < 1e-12);
    }

    #[test]
    fn transimpedance_rejects_indefinite_real_part() {
        let p = ChuParams::default();
        let mut zt = CMatrix::identity(2, 2);
        zt[(0, 1)] = Complex64::new(3.0, 0.0);
        zt[(1, 0)] = Complex64::new(3.0, 0.0);
        let fading = CMatrix::from_element(1, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            transimpedance(1e9, &fading, &zt, &[50.0], 2.0, &p),
            Err(crate::Error::NumericalDomain(_))
        ));
    }

    #[test]
    fn scalar_equivalent_channel() {
        let z_rt = CMatrix::from_element(1, 1, Complex64::new(2e-5, 1e-5));
        let zt = CMatrix::from_element(1, 1, Complex64::new(1.6, -260.0));
        let zr = CMatrix::from_element(1, 1, Complex64::new(1.6, -260.0));
        let loads = LoadModel::uniform(1, 50.0, 50.0).unwrap();
        let eq = equivalent_channel(&z_rt, &zt, &zr, &loads).unwrap();
        let expect = z_rt[(0, 0)] / (zt[(0, 0)] + 50.0);
        assert!((eq.h_tilde[(0, 0)] - expect).norm() < 1e-12 * expect.norm());
        let a = Complex64::new(50.0, 0.0) / (Complex64::new(50.0, 0.0) + zr[(0, 0)]);
        assert!((eq.coloring[0] - a).norm() < 1e-14);
    }

    #[test]
    fn random_equivalent_channel_identity() {
        let p = ChuParams::default();
        let f = 17.5e9;
        let g = ArrayGeometry::linear(ArrayKind::Colinear, 0.006, 0.012, 0.005).unwrap();
        assert_eq!(g.len(), 3);
        let zt = build_zt(f, &g, &p, Coupling::Coupled).unwrap();
        let zr = build_zr(f, 2, &p).unwrap();
        let fading = fading_matrix(3, 0, 2, 3);
        let z_rt = transimpedance(f, &fading, &zt, &[60.0, 120.0], 2.7, &p).unwrap();
        let loads = LoadModel::uniform(2, 50.0, 50.0).unwrap();
        let eq = equivalent_channel(&z_rt, &zt, &zr, &loads).unwrap();
        // independent route: explicit inverse of (Z_T + R I)
        let n = zt.nrows();
        let inv = (&zt + CMatrix::identity(n, n) * Complex64::new(50.0, 0.0)).try_inverse().unwrap();
        let direct = &z_rt * inv;
        let dev = eq
            .h_tilde
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn mutual_information_trivial_cases() {
        let h = CMatrix::from_element(1, 1, Complex64::new(0.3, 0.4));
        let w = CMatrix::from_element(1, 1, Complex64::new(2.0, 0.0));
        let mi = mutual_information(&h, &w, 0.5, None).unwrap();
        assert!((mi - (1.0 + 0.25 * 4.0 / 0.5f64).log2()).abs() < 1e-14);
        let zero = CMatrix::zeros(1, 1);
        assert_eq!(mutual_information(&h, &zero, 0.5, None).unwrap(), 0.0);
        assert!(mutual_information(&h, &w, 0.0, None).is_err());
    }

    #[test]
    fn noise_calibration() {
        let grid = reference_grid(1, 0);
        let unit = vec![vec![CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))]];
        let n = calibrate_noise(0.0, &grid, &unit, 1.0).unwrap();
        assert!((n.low - 1.0).abs() < 1e-15);
        let grid = reference_grid(1, 1);
        let set = vec![vec![
            CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
        ]];
        let a = calibrate_noise(0.0, &grid, &set, 2.0).unwrap();
        let b = calibrate_noise(10.0, &grid, &set, 2.0).unwrap();
        assert!((a.high / a.low - 4.0).abs() < 1e-15);
        assert!((a.low / b.low - 10.0).abs() < 1e-12);
        let zero = vec![vec![CMatrix::zeros(1, 1), CMatrix::zeros(1, 1)]];
        assert!(calibrate_noise(0.0, &grid, &zero, 2.0).is_err());
        assert!(calibrate_noise(0.0, &grid, &[], 2.0).is_err());
    }
}
