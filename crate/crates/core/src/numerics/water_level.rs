//! Water level for bandwidth-weighted parallel channels.
//!
//! Solves `sum_j [B_j * kappa - 1/L_j]^+ = budget` for the base level `kappa`.
//! Entries with zero gain never receive power.

use crate::error::{domain, Result};

/// Relative tolerance of the bisection stage on the pool power.
pub const LEVEL_TOL: f64 = 1e-10;

/// One parallel channel: bandwidth weight `B_j` and whitened gain `L_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedGain {
    pub bandwidth: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterLevel {
    /// Base level; entry `j` sees level `bandwidth_j * kappa_base`.
    pub kappa_base: f64,
    pub powers: Vec<f64>,
}

fn allocation(entries: &[WeightedGain], kappa: f64) -> impl Iterator<Item = f64> + '_ {
    entries.iter().map(move |e| {
        if e.gain > 0.0 {
            (e.bandwidth * kappa - 1.0 / e.gain).max(0.0)
        } else {
            0.0
        }
    })
}

fn pool_power(entries: &[WeightedGain], kappa: f64) -> f64 {
    allocation(entries, kappa).sum()
}

/// Bisection for the base water level followed by an exact solve on the
/// resulting active set, so the budget is met to rounding.
pub fn water_level(entries: &[WeightedGain], budget: f64) -> Result<WaterLevel> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(domain(format!("water_level: budget must be positive, got {budget}")));
    }
    for e in entries {
        if !(e.bandwidth > 0.0) || !(e.gain >= 0.0) || !e.gain.is_finite() {
            return Err(domain(format!(
                "water_level: invalid entry (bandwidth {}, gain {})",
                e.bandwidth, e.gain
            )));
        }
    }
    if entries.iter().all(|e| e.gain == 0.0) {
        return Ok(WaterLevel {
            kappa_base: 0.0,
            powers: vec![0.0; entries.len()],
        });
    }

    let mut lo = 0.0;
    let mut hi = entries
        .iter()
        .filter(|e| e.gain > 0.0)
        .map(|e| (budget + 1.0 / e.gain) / e.bandwidth)
        .fold(f64::INFINITY, f64::min);
    while pool_power(entries, hi) < budget {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = pool_power(entries, mid);
        if (p - budget).abs() <= LEVEL_TOL * budget {
            lo = mid;
            hi = mid;
            break;
        }
        if p < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut kappa = 0.5 * (lo + hi);

    // Closed form on the active set; repeat while the set keeps changing.
    for _ in 0..entries.len() + 1 {
        let (mut sum_inv, mut sum_b) = (0.0, 0.0);
        for e in entries.iter().filter(|e| e.gain > 0.0 && e.bandwidth * kappa > 1.0 / e.gain) {
            sum_inv += 1.0 / e.gain;
            sum_b += e.bandwidth;
        }
        if sum_b == 0.0 {
            break;
        }
        let exact = (budget + sum_inv) / sum_b;
        if exact == kappa {
            break;
        }
        let same_set = entries.iter().filter(|e| e.gain > 0.0).all(|e| {
            (e.bandwidth * kappa > 1.0 / e.gain) == (e.bandwidth * exact > 1.0 / e.gain)
        });
        kappa = exact;
        if same_set {
            break;
        }
    }

    Ok(WaterLevel {
        kappa_base: kappa,
        powers: allocation(entries, kappa).collect(),
    })
}
