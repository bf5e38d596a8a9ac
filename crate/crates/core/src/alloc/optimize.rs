use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::EquivalentChannelSet;
use crate::error::{config, domain, Result};
use crate::numerics::{CMatrix, RMatrix};

use super::gains::{gains_from_grams, grams, rate_from_grams};
use super::{
    select_user_windows, select_windows, water_fill, AllocationState, EffectiveGains, PowerScheme,
    UserCapability, Windows,
};

/// Stopping rule on the change of sum rate between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RateThreshold {
    /// Fraction of the current sum rate.
    Relative(f64),
    /// bit/s.
    Absolute(f64),
}

impl RateThreshold {
    fn at(&self, rate: f64) -> f64 {
        match *self {
            RateThreshold::Relative(r) => r * rate.abs(),
            RateThreshold::Absolute(a) => a,
        }
    }
}

/// Order in which windows are refreshed within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// All users from the previous iteration's gains, then one joint fill.
    #[default]
    Jacobi,
    /// One user at a time, each followed by a joint fill on fresh gains.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    pub threshold: RateThreshold,
    pub max_iters: usize,
    pub schedule: Schedule,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            threshold: RateThreshold::Relative(1e-4),
            max_iters: 100,
            schedule: Schedule::Jacobi,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        let t = match self.threshold {
            RateThreshold::Relative(v) | RateThreshold::Absolute(v) => v,
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(config(format!("rate threshold must be positive, got {t}")));
        }
        if self.max_iters == 0 {
            return Err(config("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Scalar precoders `sqrt(P) * 1`; the phase of a single-antenna user is arbitrary.
pub fn update_precoders(power: &RMatrix) -> (CMatrix, CMatrix) {
    let phase = CMatrix::from_element(power.nrows(), power.ncols(), Complex64::new(1.0, 0.0));
    let w = power.map(|p| Complex64::new(p.sqrt(), 0.0));
    (w, phase)
}

/// Halvings tried before a fill direction is declared useless.
const MAX_HALVINGS: usize = 40;

struct Problem<'a> {
    set: &'a EquivalentChannelSet,
    grams: Vec<CMatrix>,
    bandwidths: Vec<f64>,
    scheme: PowerScheme,
    total: f64,
}

impl Problem<'_> {
    fn rate(&self, p: &RMatrix) -> Result<f64> {
        rate_from_grams(&self.grams, &self.set.noise, &self.bandwidths, p)
    }

    fn gains(&self, p: &RMatrix) -> Result<EffectiveGains> {
        gains_from_grams(&self.grams, &self.set.noise, p)
    }

    fn fill(&self, gains: &EffectiveGains, windows: &Windows) -> Result<RMatrix> {
        Ok(water_fill(gains, &self.set.grid, self.scheme, windows, self.total)?.power)
    }

    /// Largest step `t = 2^-j` along `target - from` that does not lower the rate.
    ///
    /// The fill solves the concave surrogate whose gradient at `from` equals
    /// the true gradient, so the direction is an ascent direction.
    fn line_search(&self, from: &RMatrix, rate: f64, target: &RMatrix) -> Result<(RMatrix, f64)> {
        let dir = target - from;
        let mut t = 1.0;
        for _ in 0..MAX_HALVINGS {
            let cand = (from + &dir * t).map(|v| v.max(0.0));
            let r = self.rate(&cand)?;
            if r >= rate {
                return Ok((cand, r));
            }
            t *= 0.5;
        }
        Ok((from.clone(), rate))
    }

    /// One window refresh plus fill; new windows are kept only if they do not lower the rate.
    fn step(
        &self,
        power: &RMatrix,
        rate: f64,
        gains: &EffectiveGains,
        windows: &Option<Windows>,
        candidate: Windows,
    ) -> Result<(RMatrix, f64, Windows)> {
        match windows {
            Some(old) if *old == candidate => {
                let target = self.fill(gains, old)?;
                let (p, r) = self.line_search(power, rate, &target)?;
                Ok((p, r, candidate))
            }
            _ => {
                let target = self.fill(gains, &candidate)?;
                let r = self.rate(&target)?;
                match windows {
                    Some(old) if r < rate => {
                        let target = self.fill(gains, old)?;
                        let (p, r) = self.line_search(power, rate, &target)?;
                        Ok((p, r, old.clone()))
                    }
                    _ => Ok((target, r, candidate)),
                }
            }
        }
    }
}

/// Alternating window selection and water-filling from the all-zero state.
pub fn inner_optimize(
    set: &EquivalentChannelSet,
    scheme: PowerScheme,
    caps: &[UserCapability],
    total_power: f64,
    cfg: &InnerConfig,
) -> Result<AllocationState> {
    cfg.validate()?;
    scheme.validate()?;
    if caps.len() != set.users() {
        return Err(domain(format!("{} capabilities for {} users", caps.len(), set.users())));
    }
    for c in caps {
        c.validate()?;
    }
    let problem = Problem {
        set,
        grams: grams(set),
        bandwidths: set.grid.entries().iter().map(|s| s.bandwidth).collect(),
        scheme,
        total: total_power,
    };
    let grid = &set.grid;
    let (m, users) = (grid.len(), set.users());

    let mut power = RMatrix::zeros(m, users);
    let mut rate = 0.0;
    let mut windows: Option<Windows> = None;
    let mut gains = problem.gains(&power)?;
    let mut history = vec![0.0];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let prev = rate;
        match cfg.schedule {
            Schedule::Jacobi => {
                let candidate = select_windows(&gains, caps, grid)?;
                let (p, r, w) = problem.step(&power, rate, &gains, &windows, candidate)?;
                power = p;
                rate = r;
                windows = Some(w);
                gains = problem.gains(&power)?;
            }
            Schedule::GaussSeidel => {
                for k in 0..users {
                    let mut candidate = match &windows {
                        Some(w) => w.clone(),
                        None => select_windows(&gains, caps, grid)?,
                    };
                    candidate[k] = select_user_windows(&gains, k, &caps[k], grid)?;
                    let (p, r, w) = problem.step(&power, rate, &gains, &windows, candidate)?;
                    power = p;
                    rate = r;
                    windows = Some(w);
                    gains = problem.gains(&power)?;
                }
            }
        }
        history.push(rate);

        let current = windows.as_ref().expect("windows set after an iteration");
        let settled = select_windows(&gains, caps, grid)? == *current && {
            // fixed point of the fill: KKT conditions already hold
            let again = problem.fill(&gains, current)?;
            (&again - &power).abs().max() <= 1e-12 * total_power
        };
        if (rate - prev).abs() < cfg.threshold.at(rate) || settled {
            converged = true;
            break;
        }
    }

    let (_, phase) = update_precoders(&power);
    Ok(AllocationState {
        power,
        phase,
        windows: windows.unwrap_or_default(),
        sum_rate: rate,
        iterations,
        converged,
        history,
    })
}
