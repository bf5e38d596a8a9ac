//! A complete simulation scenario: array, bands, users, power and the
//! realization machinery that ties them to seeded channel sets.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::{inner_optimize, AllocationState, BandSet, InnerConfig, PowerScheme, UserCapability};
use crate::antenna::{build_zr, build_zt, ArrayGeometry, ArrayKind, ChuParams, Coupling};
use crate::channel::{
    calibrate_noise, equivalent_channel_with_inverse, fading_matrix, transimpedance_with_root,
    EquivalentChannelSet, LoadModel, NoiseLevels, SubcarrierGrid,
};
use crate::error::{config, Result};
use crate::numerics::linalg::{inverse, psd_sqrt};
use crate::numerics::{CMatrix, RMatrix, RngStream};
use num_complex::Complex64;

/// Realizations in the fixed ensemble used to anchor the noise level.
pub const CALIBRATION_ENSEMBLE: usize = 256;

/// Element spacing: one value for linear arrays, (horizontal, vertical) for planar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Linear(f64),
    Planar(f64, f64),
}

impl Spacing {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            [d] => Ok(Spacing::Linear(*d)),
            [d1, d2] => Ok(Spacing::Planar(*d1, *d2)),
            _ => Err(config(format!("spacing needs 1 or 2 values, got {}", x.len()))),
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        match self {
            Spacing::Linear(d) => vec![d],
            Spacing::Planar(a, b) => vec![a, b],
        }
    }
}

/// User capability cases of the carrier-aggregation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capabilities {
    /// 1: every user aggregates both bands.
    /// 2: one band each, 75% of users high-band only, the rest low-band only.
    /// 3: as 2 with 25% high-band users.
    /// 4: 75% of users aggregate both bands, the rest use either band.
    Case(u8),
    /// Explicit per-user capabilities; window sizes are not drawn.
    Explicit(Vec<UserCapability>),
    /// Both bands, no window limit.
    Unconstrained,
}

impl Capabilities {
    pub fn validate(&self, users: usize) -> Result<()> {
        match self {
            Capabilities::Case(c) if !(1..=4).contains(c) => {
                Err(config(format!("capability case must be 1..=4, got {c}")))
            }
            Capabilities::Explicit(v) if v.len() != users => Err(config(format!(
                "{} explicit capabilities for {users} users",
                v.len()
            ))),
            Capabilities::Explicit(v) => v.iter().try_for_each(|c| c.validate()),
            _ => Ok(()),
        }
    }

    /// Capabilities of each user given the drawn window sizes.
    pub fn resolve(&self, windows: &[usize]) -> Vec<UserCapability> {
        let users = windows.len();
        let share = |f: f64| (f * users as f64).round() as usize;
        match self {
            Capabilities::Unconstrained => vec![UserCapability::unconstrained(); users],
            Capabilities::Explicit(v) => v.clone(),
            Capabilities::Case(c) => windows
                .iter()
                .enumerate()
                .map(|(k, &n)| {
                    let (eta, allowed) = match c {
                        1 => (2, BandSet::BOTH),
                        2 | 3 => {
                            let high = share(if *c == 2 { 0.75 } else { 0.25 });
                            (1, if k < high { BandSet::HIGH } else { BandSet::LOW })
                        }
                        _ => (if k < share(0.75) { 2 } else { 1 }, BandSet::BOTH),
                    };
                    UserCapability {
                        eta,
                        n_window: n,
                        allowed,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    /// Maximum dimension `D` (linear) or horizontal extent `D1` (planar), m.
    pub aperture: f64,
    /// Vertical extent `D2` of a planar array, m.
    pub aperture2: Option<f64>,
    /// Smallest admissible spacing; defaults to the element diameter `2a`.
    pub min_spacing: Option<f64>,
    pub coupling: Coupling,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub array: ArraySpec,
    pub element: ChuParams,
    pub source_resistance: f64,
    pub load_resistance: f64,
    pub grid: SubcarrierGrid,
    pub users: usize,
    pub distance_range: (f64, f64),
    pub path_loss_exponent: f64,
    pub capabilities: Capabilities,
    pub total_power: f64,
    pub scheme: PowerScheme,
    pub snr_db: f64,
    pub inner: InnerConfig,
}

/// Large-scale draws of one channel realization; fading is drawn lazily per
/// array size from the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub seed: u64,
    pub distances: Vec<f64>,
    pub window_sizes: Vec<usize>,
}

/// Seed of realization `index` under a master seed.
pub fn realization_seed(master: u64, index: usize) -> u64 {
    RngStream::new(master).fork("realization").fork(index).derive_seed()
}

/// Per-subcarrier quantities that depend on the geometry but not on the
/// realization, computed once per spacing.
#[derive(Debug, Clone)]
pub struct ArrayResponse {
    pub geometry: ArrayGeometry,
    pub impedance: Vec<CMatrix>,
    /// `Re{Z_T}^(1/2)`.
    pub root: Vec<CMatrix>,
    /// `(Z_T + R I)^-1`.
    pub source_inverse: Vec<CMatrix>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(config("users.K must be at least 1"));
        }
        let (lo, hi) = self.distance_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(config(format!("users.distance_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        if !(self.path_loss_exponent > 0.0) {
            return Err(config("users.gamma must be positive"));
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return Err(config("power.P_T must be positive"));
        }
        if !(self.source_resistance > 0.0 && self.load_resistance > 0.0) {
            return Err(config("array.R and the load resistance must be positive"));
        }
        if !self.snr_db.is_finite() {
            return Err(config("snr_db must be finite"));
        }
        self.scheme.validate()?;
        self.inner.validate()?;
        self.capabilities.validate(self.users)?;
        let (lo, hi) = self.spacing_bounds()?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(config(format!(
                "aperture too small for the minimum spacing: bounds {lo:?}..{hi:?}"
            )));
        }
        Ok(())
    }

    pub fn min_spacing(&self) -> f64 {
        self.array.min_spacing.unwrap_or_else(|| self.element.min_spacing())
    }

    /// Box of admissible spacings: `[d_min, D]`, or `[d_min, D1] x [d_min, D2 - a]`.
    pub fn spacing_bounds(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.min_spacing();
        match self.array.kind {
            ArrayKind::Planar => {
                let d2 = self
                    .array
                    .aperture2
                    .ok_or_else(|| config("array.D2 is required for planar arrays"))?;
                Ok((vec![m, m], vec![self.array.aperture, d2 - self.element.radius]))
            }
            _ => Ok((vec![m], vec![self.array.aperture])),
        }
    }

    pub fn geometry(&self, spacing: Spacing) -> Result<ArrayGeometry> {
        match (self.array.kind, spacing) {
            (ArrayKind::Planar, Spacing::Planar(d1, d2)) => {
                let big = self
                    .array
                    .aperture2
                    .ok_or_else(|| config("array.D2 is required for planar arrays"))?;
                ArrayGeometry::planar(d1, d2, self.array.aperture, big, &self.element, self.min_spacing())
            }
            (ArrayKind::Planar, Spacing::Linear(_)) => Err(config("planar arrays need two spacings")),
            (kind, Spacing::Linear(d)) => ArrayGeometry::linear(kind, d, self.array.aperture, self.min_spacing()),
            (_, Spacing::Planar(..)) => Err(config("linear arrays need a single spacing")),
        }
    }

    pub fn response(&self, spacing: Spacing) -> Result<ArrayResponse> {
        self.response_for(self.geometry(spacing)?, self.array.coupling)
    }

    pub fn response_for(&self, geometry: ArrayGeometry, coupling: Coupling) -> Result<ArrayResponse> {
        let freqs: Vec<f64> = self.grid.entries().iter().map(|s| s.frequency).collect();
        self.response_at(geometry, coupling, &freqs)
    }

    /// Array response at arbitrary frequencies.
    pub fn response_at(&self, geometry: ArrayGeometry, coupling: Coupling, frequencies: &[f64]) -> Result<ArrayResponse> {
        let n = geometry.len();
        let mut impedance = Vec::with_capacity(frequencies.len());
        let mut root = Vec::with_capacity(frequencies.len());
        let mut source_inverse = Vec::with_capacity(frequencies.len());
        for &f in frequencies {
            let zt = build_zt(f, &geometry, &self.element, coupling)?;
            let re: RMatrix = zt.map(|z| z.re);
            root.push(psd_sqrt(&re)?.map(|v| Complex64::new(v, 0.0)));
            let driven = &zt + CMatrix::identity(n, n) * Complex64::new(self.source_resistance, 0.0);
            source_inverse.push(inverse(&driven, "Z_T + R I")?);
            impedance.push(zt);
        }
        Ok(ArrayResponse {
            geometry,
            impedance,
            root,
            source_inverse,
        })
    }

    pub fn realization(&self, seed: u64) -> Realization {
        let root = RngStream::new(seed);
        let (lo, hi) = self.distance_range;
        let mut rng = root.fork("distance").rng();
        let distances = (0..self.users)
            .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect();
        let mut rng = root.fork("capability").rng();
        let span = self.grid.len();
        let window_sizes = (0..self.users).map(|_| rng.random_range(1..=span)).collect();
        Realization {
            seed,
            distances,
            window_sizes,
        }
    }

    pub fn capabilities_for(&self, r: &Realization) -> Vec<UserCapability> {
        self.capabilities.resolve(&r.window_sizes)
    }

    /// `H~` at entry `slot` of a response evaluated at frequency `f`, with the
    /// fading of subcarrier `fading_index`. Checks the
    /// `A^-1 H_eq = Z_RT (Z_T + R I)^-1` identity.
    pub fn channel(&self, response: &ArrayResponse, slot: usize, f: f64, fading_index: usize, r: &Realization) -> Result<CMatrix> {
        let n = response.geometry.len();
        let loads = LoadModel::uniform(self.users, self.load_resistance, self.source_resistance)?;
        let fading = fading_matrix(r.seed, fading_index, self.users, n);
        let z_rt = transimpedance_with_root(
            f,
            &fading,
            &response.root[slot],
            &r.distances,
            self.path_loss_exponent,
            &self.element,
        )?;
        let z_r = build_zr(f, self.users, &self.element)?;
        Ok(equivalent_channel_with_inverse(&z_rt, &response.source_inverse[slot], &z_r, &loads)?.h_tilde)
    }

    /// `H~_i` for every subcarrier of the grid.
    pub fn channels(&self, response: &ArrayResponse, r: &Realization) -> Result<Vec<CMatrix>> {
        self.grid
            .entries()
            .iter()
            .enumerate()
            .map(|(i, s)| self.channel(response, i, s.frequency, i, r))
            .collect()
    }

    /// Noise levels anchored on an isolated reference element, so the SNR
    /// does not absorb the array gain that the spacing study measures. The
    /// calibration ensemble is fixed and independent of the run seed.
    pub fn noise_levels(&self) -> Result<NoiseLevels> {
        let reference = self.response_for(ArrayGeometry::single(), Coupling::Uncoupled)?;
        let root = RngStream::new(0).fork("noise-calibration");
        let ensemble = (0..CALIBRATION_ENSEMBLE)
            .map(|j| {
                let seed = root.fork(j).derive_seed();
                self.channels(&reference, &self.realization(seed))
            })
            .collect::<Result<Vec<_>>>()?;
        calibrate_noise(self.snr_db, &self.grid, &ensemble, self.total_power)
    }

    pub fn channel_set(&self, response: &ArrayResponse, r: &Realization, noise: NoiseLevels) -> Result<EquivalentChannelSet> {
        EquivalentChannelSet::new(self.grid.clone(), self.channels(response, r)?, noise)
    }

    /// Inner optimization of one realization at a fixed geometry.
    pub fn allocate(&self, response: &ArrayResponse, r: &Realization, noise: NoiseLevels) -> Result<AllocationState> {
        let set = self.channel_set(response, r, noise)?;
        inner_optimize(&set, self.scheme, &self.capabilities_for(r), self.total_power, &self.inner)
    }
}
