use std::ops::Range;

use crate::channel::{Band, SubcarrierGrid};
use crate::error::{domain, Result};
use crate::numerics::{water_level, RMatrix, WeightedGain};

use super::{window_mask, EffectiveGains, PowerScheme, UserCapability, Window, Windows};

#[derive(Debug, Clone, PartialEq)]
pub struct PoolLevel {
    pub budget: f64,
    pub subcarriers: Range<usize>,
    /// Entry `(i, k)` of the pool sees water level `B_i * kappa_base`.
    pub kappa_base: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub power: RMatrix,
    pub pools: Vec<PoolLevel>,
}

/// Power maximising `sum B_i log2(1 + L_{i,k} P_{i,k})` for fixed gains and
/// windows, one water level per budget pool of the scheme.
pub fn water_fill(
    gains: &EffectiveGains,
    grid: &SubcarrierGrid,
    scheme: PowerScheme,
    windows: &Windows,
    total_power: f64,
) -> Result<WaterFill> {
    let (m, users) = gains.values.shape();
    if m != grid.len() || windows.len() != users {
        return Err(domain("gains, grid and windows disagree on dimensions"));
    }
    let mask = window_mask(windows, m);
    let mut power = RMatrix::zeros(m, users);
    let mut pools = Vec::new();
    for (budget, range) in scheme.pools(grid, total_power)? {
        let mut slots = Vec::new();
        let mut entries = Vec::new();
        for i in range.clone() {
            for k in 0..users {
                if mask[i][k] {
                    slots.push((i, k));
                    entries.push(WeightedGain {
                        bandwidth: grid.entries()[i].bandwidth,
                        gain: gains.get(i, k),
                    });
                }
            }
        }
        let kappa_base = if budget > 0.0 && !entries.is_empty() {
            let level = water_level(&entries, budget)?;
            for ((i, k), p) in slots.iter().zip(level.powers) {
                power[(*i, *k)] = p;
            }
            level.kappa_base
        } else {
            0.0
        };
        pools.push(PoolLevel {
            budget,
            subcarriers: range,
            kappa_base,
        });
    }
    Ok(WaterFill { power, pools })
}

/// Best window of one user inside one band: length `min(n_window, band size)`,
/// score `sum eps L` with `eps = B_H / B_L` in the high band and 1 in the low band.
fn best_in_band(gains: &EffectiveGains, k: usize, n_window: usize, grid: &SubcarrierGrid, band: Band) -> Option<(f64, Window)> {
    let range = grid.band_range(band);
    if range.is_empty() {
        return None;
    }
    let len = n_window.min(range.len());
    let weight = match band {
        Band::Low => 1.0,
        Band::High => grid.bandwidth_ratio(),
    };
    let mut best: Option<(f64, Window)> = None;
    for start in range.start..=range.end - len {
        let score: f64 = (start..start + len).map(|i| weight * gains.get(i, k)).sum();
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, Window { band, start, len }));
        }
    }
    best
}

pub fn select_user_windows(
    gains: &EffectiveGains,
    k: usize,
    cap: &UserCapability,
    grid: &SubcarrierGrid,
) -> Result<Vec<Window>> {
    cap.validate()?;
    let mut candidates: Vec<(f64, Window)> = [Band::Low, Band::High]
        .into_iter()
        .filter(|b| cap.allowed.contains(*b))
        .filter_map(|b| best_in_band(gains, k, cap.n_window, grid, b))
        .collect();
    // stable sort keeps the low band (lower start index) first on ties
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut chosen: Vec<Window> = candidates.into_iter().take(cap.eta).map(|(_, w)| w).collect();
    chosen.sort_by_key(|w| w.start);
    Ok(chosen)
}

/// Windows of every user for the current gains.
pub fn select_windows(gains: &EffectiveGains, caps: &[UserCapability], grid: &SubcarrierGrid) -> Result<Windows> {
    if caps.len() != gains.users() || gains.subcarriers() != grid.len() {
        return Err(domain("capabilities, gains and grid disagree on dimensions"));
    }
    (0..caps.len())
        .map(|k| select_user_windows(gains, k, &caps[k], grid))
        .collect()
}
