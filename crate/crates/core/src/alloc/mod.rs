//! Joint subcarrier, window, power and precoder allocation.
//!
//! Users have a single antenna, so every dual-uplink precoder is a scalar
//! `sqrt(P) * phase` and the objective depends on the power matrix only.
//! The optimiser alternates window selection and block water-filling against
//! interference-whitened gains.

mod fill;
mod gains;
mod optimize;

pub use fill::{select_user_windows, select_windows, water_fill, PoolLevel, WaterFill};
pub use gains::{
    effective_gains, interference_matrix, sum_rate, whitened_gain, whitened_gain_eig, EffectiveGains,
};
pub use optimize::{inner_optimize, update_precoders, InnerConfig, RateThreshold, Schedule};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::channel::{Band, SubcarrierGrid};
use crate::error::{config, Result};
use crate::numerics::{CMatrix, RMatrix};

/// How the total transmit power is partitioned into budget pools.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerScheme {
    /// One pool over every subcarrier of both bands.
    Joint,
    /// Low band gets `P_T / (1 + beta)`, high band `beta P_T / (1 + beta)`.
    BandWise { beta: f64 },
    /// Each subcarrier gets `P_T / (M_L + M_H)`.
    CarrierWise,
}

impl PowerScheme {
    pub fn name(&self) -> &'static str {
        match self {
            PowerScheme::Joint => "jpa",
            PowerScheme::BandWise { .. } => "bwpa",
            PowerScheme::CarrierWise => "cwpa",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PowerScheme::BandWise { beta } = self {
            if !(*beta >= 0.0 && beta.is_finite()) {
                return Err(config(format!("band-wise power ratio must be >= 0, got {beta}")));
            }
        }
        Ok(())
    }

    /// Budget pools as (budget, subcarrier range).
    pub fn pools(&self, grid: &SubcarrierGrid, total: f64) -> Result<Vec<(f64, Range<usize>)>> {
        self.validate()?;
        if !(total > 0.0 && total.is_finite()) {
            return Err(config(format!("total power must be positive, got {total}")));
        }
        Ok(match *self {
            PowerScheme::Joint => vec![(total, 0..grid.len())],
            PowerScheme::BandWise { beta } => vec![
                (total / (1.0 + beta), grid.band_range(Band::Low)),
                (beta * total / (1.0 + beta), grid.band_range(Band::High)),
            ],
            PowerScheme::CarrierWise => {
                let each = total / grid.len() as f64;
                (0..grid.len()).map(|i| (each, i..i + 1)).collect()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSet {
    pub low: bool,
    pub high: bool,
}

impl BandSet {
    pub const BOTH: BandSet = BandSet { low: true, high: true };
    pub const LOW: BandSet = BandSet { low: true, high: false };
    pub const HIGH: BandSet = BandSet { low: false, high: true };

    pub fn contains(&self, band: Band) -> bool {
        match band {
            Band::Low => self.low,
            Band::High => self.high,
        }
    }

    pub fn count(&self) -> usize {
        self.low as usize + self.high as usize
    }
}

/// What a user terminal can receive: `eta` bands, each through a contiguous
/// window of at most `n_window` subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserCapability {
    pub eta: usize,
    pub n_window: usize,
    pub allowed: BandSet,
}

impl UserCapability {
    pub fn new(eta: usize, n_window: usize, allowed: BandSet) -> Result<Self> {
        let cap = UserCapability { eta, n_window, allowed };
        cap.validate()?;
        Ok(cap)
    }

    /// Both bands, windows as wide as any band.
    pub fn unconstrained() -> Self {
        UserCapability {
            eta: 2,
            n_window: usize::MAX,
            allowed: BandSet::BOTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.eta) {
            return Err(config(format!("band count eta must be 1 or 2, got {}", self.eta)));
        }
        if self.eta > self.allowed.count() {
            return Err(config(format!(
                "eta = {} exceeds the {} allowed band(s)",
                self.eta,
                self.allowed.count()
            )));
        }
        if self.n_window == 0 {
            return Err(config("window size must be at least one subcarrier"));
        }
        Ok(())
    }
}

/// Contiguous subcarriers `start..start + len` (common index) inside one band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub band: Band,
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        self.range().contains(&i)
    }
}

/// Per-user windows; `windows[k]` holds at most one window per band.
pub type Windows = Vec<Vec<Window>>;

/// `mask[(i, k)]` is true when subcarrier `i` lies in a window of user `k`.
pub fn window_mask(windows: &Windows, subcarriers: usize) -> Vec<Vec<bool>> {
    let mut mask = vec![vec![false; windows.len()]; subcarriers];
    for (k, user) in windows.iter().enumerate() {
        for w in user {
            for i in w.range() {
                mask[i][k] = true;
            }
        }
    }
    mask
}

/// Windows covering every subcarrier for every user.
pub fn full_windows(grid: &SubcarrierGrid, users: usize) -> Windows {
    let all: Vec<Window> = [Band::Low, Band::High]
        .into_iter()
        .filter(|b| grid.count(*b) > 0)
        .map(|b| Window {
            band: b,
            start: grid.band_range(b).start,
            len: grid.count(b),
        })
        .collect();
    vec![all; users]
}

#[derive(Debug, Clone)]
pub struct AllocationState {
    /// `(M_L + M_H) x K` transmit powers (W).
    pub power: RMatrix,
    /// Unit phase of each scalar precoder.
    pub phase: CMatrix,
    pub windows: Windows,
    /// Sum rate (bit/s) of `power`.
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sum rate after each iteration, starting from the all-zero state.
    pub history: Vec<f64>,
}

impl AllocationState {
    /// Scalar precoders `sqrt(P) * phase`.
    pub fn precoders(&self) -> CMatrix {
        CMatrix::from_fn(self.power.nrows(), self.power.ncols(), |i, k| {
            self.phase[(i, k)] * self.power[(i, k)].sqrt()
        })
    }

    pub fn total_power(&self) -> f64 {
        self.power.sum()
    }
}
