//! Antenna-spacing search: particle swarm seeding, then bracketing and
//! golden-section refinement (linear arrays) or projected gradient ascent
//! (planar arrays).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::ArrayKind;
use crate::channel::NoiseLevels;
use crate::error::{config, Result};
use crate::numerics::RngStream;
use crate::scenario::{realization_seed, Realization, Scenario, Spacing};

/// `(sqrt(5) - 1) / 2`.
const GOLDEN: f64 = 0.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Particle count.
    pub zeta: usize,
    /// Swarm iterations after the initial evaluation.
    pub pso_iters: usize,
    /// Initial bracketing step; `None` means 5% of the domain width.
    pub delta_tilde: Option<f64>,
    /// Final golden-section interval width (m).
    pub bisection_tol: f64,
    /// Step length along the normalised gradient (m).
    pub ga_step: f64,
    /// Stop once an accepted step gains less than this (bit/s).
    pub ga_min_improvement: f64,
    /// Stop once backtracking shrinks the step below this (m).
    pub ga_min_step: f64,
    pub ga_max_iters: usize,
    /// Central-difference step (m).
    pub fd_step: f64,
    /// Realizations averaged per objective evaluation in offline mode.
    pub ensemble_size: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            c1: 0.8,
            c2: 2.0,
            c3: 2.0,
            zeta: 10,
            pso_iters: 15,
            delta_tilde: None,
            bisection_tol: 1e-4,
            ga_step: 1e-3,
            ga_min_improvement: 1e2,
            ga_min_step: 1e-6,
            ga_max_iters: 100,
            fd_step: 1e-4,
            ensemble_size: 20,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.zeta == 0 {
            return Err(config("search.zeta must be at least 1"));
        }
        if self.ensemble_size == 0 {
            return Err(config("search.ensemble_size must be at least 1"));
        }
        let positive = [
            ("search.bisection_tol", self.bisection_tol),
            ("search.ga_step", self.ga_step),
            ("search.ga_min_improvement", self.ga_min_improvement),
            ("search.ga_min_step", self.ga_min_step),
            ("search.fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(d) = self.delta_tilde {
            if !(d > 0.0 && d.is_finite()) {
                return Err(config(format!("search.delta_tilde must be positive, got {d}")));
            }
        }
        for (name, v) in [("search.c1", self.c1), ("search.c2", self.c2), ("search.c3", self.c3)] {
            if !v.is_finite() {
                return Err(config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Objective wrapper that counts evaluations and records every visited point.
pub struct Objective<'a> {
    f: Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>,
    count: AtomicUsize,
    trace: Mutex<Vec<(Vec<f64>, f64)>>,
}

impl<'a> Objective<'a> {
    pub fn new(f: impl Fn(&[f64]) -> Result<f64> + Sync + 'a) -> Self {
        Objective {
            f: Box::new(f),
            count: AtomicUsize::new(0),
            trace: Mutex::new(Vec::new()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x)?;
        self.count.fetch_add(1, Ordering::SeqCst);
        self.trace.lock().expect("trace lock").push((x.to_vec(), v));
        Ok(v)
    }

    /// Evaluates a batch concurrently; the trace keeps batch order.
    pub fn eval_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let vals: Vec<f64> = xs
            .par_iter()
            .map(|x| (self.f)(x))
            .collect::<Result<Vec<_>>>()?;
        self.count.fetch_add(xs.len(), Ordering::SeqCst);
        let mut t = self.trace.lock().expect("trace lock");
        t.extend(xs.iter().cloned().zip(vals.iter().copied()));
        Ok(vals)
    }

    pub fn evaluations(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn trace(&self) -> Vec<(Vec<f64>, f64)> {
        self.trace.lock().expect("trace lock").clone()
    }
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(config(format!("invalid search domain {lo:?}..{hi:?}")));
        }
        Ok(Domain { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[j], self.hi[j]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(j, v)| *v >= self.lo[j] && *v <= self.hi[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Personal-best values after each round (initial round first).
    pub pbest_history: Vec<Vec<f64>>,
    pub gbest_history: Vec<f64>,
}

/// Particle swarm with `zeta` particles and `pso_iters` velocity updates,
/// `zeta * (1 + pso_iters)` evaluations in total.
pub fn particle_swarm(g: &Objective, domain: &Domain, cfg: &SearchConfig, seed: u64) -> Result<SwarmResult> {
    cfg.validate()?;
    let dim = domain.dim();
    let stream = RngStream::new(seed).fork("pso");
    let mut rng = stream.fork("init").rng();
    let width: Vec<f64> = (0..dim).map(|j| domain.hi[j] - domain.lo[j]).collect();
    let mut x: Vec<Vec<f64>> = (0..cfg.zeta)
        .map(|_| (0..dim).map(|j| domain.lo[j] + rng.random::<f64>() * width[j]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cfg.zeta)
        .map(|_| (0..dim).map(|j| (rng.random::<f64>() - 0.5) * width[j]).collect())
        .collect();
    let vals = g.eval_batch(&x)?;
    let mut pbest = x.clone();
    let mut pval = vals;
    let lead = |pval: &[f64]| {
        let mut b = 0;
        for (j, p) in pval.iter().enumerate() {
            if *p > pval[b] {
                b = j;
            }
        }
        b
    };
    let mut gi = lead(&pval);
    let mut gbest = pbest[gi].clone();
    let mut gval = pval[gi];
    let mut pbest_history = vec![pval.clone()];
    let mut gbest_history = vec![gval];

    for it in 0..cfg.pso_iters {
        let mut rng = stream.fork(it).rng();
        for p in 0..cfg.zeta {
            for j in 0..dim {
                let r: f64 = rng.random();
                let s: f64 = rng.random();
                v[p][j] = cfg.c1 * v[p][j] + cfg.c2 * r * (pbest[p][j] - x[p][j]) + cfg.c3 * s * (gbest[j] - x[p][j]);
                x[p][j] += v[p][j];
            }
            // outliers go to the domain margin
            domain.clip(&mut x[p]);
        }
        let vals = g.eval_batch(&x)?;
        for p in 0..cfg.zeta {
            if vals[p] > pval[p] {
                pval[p] = vals[p];
                pbest[p] = x[p].clone();
            }
        }
        gi = lead(&pval);
        if pval[gi] > gval {
            gval = pval[gi];
            gbest = pbest[gi].clone();
        }
        pbest_history.push(pval.clone());
        gbest_history.push(gval);
    }
    Ok(SwarmResult {
        best: gbest,
        best_value: gval,
        pbest_history,
        gbest_history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Step-doubling evaluations after the two initial probes.
    pub doubling_evals: usize,
}

/// Step-doubling from `x0` (value `g0`) in the ascent direction until the
/// objective stops increasing; always spends two probe evaluations at `x0 +- step`.
pub fn swan_bracket(g: &Objective, x0: f64, g0: f64, step: f64, lo: f64, hi: f64) -> Result<Bracket> {
    if !(step > 0.0) {
        return Err(config(format!("bracketing step must be positive, got {step}")));
    }
    let left = (x0 - step).max(lo);
    let right = (x0 + step).min(hi);
    let gl = g.eval(&[left])?;
    let gr = g.eval(&[right])?;
    if x0 - step < lo && x0 + step > hi {
        return Ok(Bracket { lo, hi, doubling_evals: 0 });
    }
    let dir = if gr > g0 && gr >= gl {
        1.0
    } else if gl > g0 {
        -1.0
    } else {
        return Ok(Bracket {
            lo: left,
            hi: right,
            doubling_evals: 0,
        });
    };
    let (mut prev, mut cur, mut gcur) = if dir > 0.0 { (x0, right, gr) } else { (x0, left, gl) };
    let mut h = step;
    let mut evals = 0;
    loop {
        let edge = if dir > 0.0 { hi } else { lo };
        if cur == edge {
            return Ok(ordered(prev, edge, evals));
        }
        h *= 2.0;
        let next = (cur + dir * h).clamp(lo, hi);
        let gnext = g.eval(&[next])?;
        evals += 1;
        if gnext <= gcur {
            return Ok(ordered(prev, next, evals));
        }
        prev = cur;
        cur = next;
        gcur = gnext;
    }
}

fn ordered(a: f64, b: f64, doubling_evals: usize) -> Bracket {
    Bracket {
        lo: a.min(b),
        hi: a.max(b),
        doubling_evals,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    /// Midpoint of the final interval.
    pub midpoint: f64,
    pub best: f64,
    pub best_value: f64,
    pub evaluations: usize,
    pub final_width: f64,
}

/// Golden-section maximisation on `[lo, hi]` down to width `tol`. Ties keep
/// the left part of the interval.
pub fn golden_section(g: &Objective, lo: f64, hi: f64, tol: f64) -> Result<GoldenResult> {
    if !(lo < hi) {
        return Err(config(format!("golden section needs lo < hi, got [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    if tol >= b - a {
        let m = 0.5 * (a + b);
        return Ok(GoldenResult {
            midpoint: m,
            best: m,
            best_value: f64::NEG_INFINITY,
            evaluations: 0,
            final_width: b - a,
        });
    }
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = g.eval(&[x1])?;
    let mut f2 = g.eval(&[x2])?;
    let mut evals = 2;
    let mut best = if f2 > f1 { (x2, f2) } else { (x1, f1) };
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = g.eval(&[x1])?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = g.eval(&[x2])?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
        evals += 1;
    }
    Ok(GoldenResult {
        midpoint: 0.5 * (a + b),
        best: best.0,
        best_value: best.1,
        evaluations: evals,
        final_width: b - a,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn central_gradient(g: &Objective, x: &[f64], h: f64, domain: &Domain) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; x.len()];
    for j in 0..x.len() {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[j] += h;
        down[j] -= h;
        domain.clip(&mut up);
        domain.clip(&mut down);
        let span = up[j] - down[j];
        if span > 0.0 {
            grad[j] = (g.eval(&up)? - g.eval(&down)?) / span;
        }
    }
    Ok(grad)
}

/// Projected ascent along the normalised central-difference gradient; the
/// step halves whenever a move fails to improve.
pub fn gradient_ascent(g: &Objective, start: &[f64], domain: &Domain, cfg: &SearchConfig) -> Result<AscentResult> {
    cfg.validate()?;
    if start.len() != domain.dim() || !domain.contains(start) {
        return Err(config(format!("gradient ascent start {start:?} lies outside the feasible box")));
    }
    let mut x = start.to_vec();
    let mut fx = g.eval(&x)?;
    let mut step = cfg.ga_step;
    let mut iterations = 0;
    while iterations < cfg.ga_max_iters {
        iterations += 1;
        let grad = central_gradient(g, &x, cfg.fd_step, domain)?;
        let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            break;
        }
        let mut moved = false;
        while step >= cfg.ga_min_step {
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + step * gi / norm).collect();
            domain.clip(&mut cand);
            let fc = g.eval(&cand)?;
            if fc > fx {
                let gain = fc - fx;
                x = cand;
                fx = fc;
                moved = gain >= cfg.ga_min_improvement;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(AscentResult {
        point: x,
        value: fx,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub delta_star: Vec<f64>,
    pub g_star: f64,
    /// Objective evaluations.
    pub evaluations: usize,
    /// Inner optimizations behind those evaluations.
    pub inner_runs: usize,
    pub swarm_evals: usize,
    /// Bracketing evaluations beyond the two probes (linear arrays).
    pub bracket_evals: usize,
    /// Golden-section (linear) or gradient-ascent (planar) evaluations.
    pub refine_evals: usize,
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// Full search chain over an arbitrary objective on the scenario's spacing box.
pub fn search(g: &Objective, domain: &Domain, cfg: &SearchConfig, seed: u64) -> Result<SearchResult> {
    cfg.validate()?;
    let swarm = particle_swarm(g, domain, cfg, seed)?;
    let swarm_evals = g.evaluations();
    let (bracket_evals, refine_evals) = if domain.dim() == 1 {
        let (lo, hi) = (domain.lo[0], domain.hi[0]);
        let step = cfg.delta_tilde.unwrap_or(0.05 * (hi - lo));
        let b = swan_bracket(g, swarm.best[0], swarm.best_value, step, lo, hi)?;
        let gs = golden_section(g, b.lo, b.hi, cfg.bisection_tol)?;
        (b.doubling_evals, gs.evaluations)
    } else {
        let before = g.evaluations();
        gradient_ascent(g, &swarm.best, domain, cfg)?;
        (0, g.evaluations() - before)
    };
    let trace = g.trace();
    let (x, v) = trace
        .iter()
        .fold((None, f64::NEG_INFINITY), |(bx, bv), (x, v)| if *v > bv { (Some(x), *v) } else { (bx, bv) });
    Ok(SearchResult {
        delta_star: x.cloned().unwrap_or_else(|| swarm.best.clone()),
        g_star: v,
        evaluations: g.evaluations(),
        inner_runs: g.evaluations(),
        swarm_evals,
        bracket_evals,
        refine_evals,
        trace,
    })
}

/// Mean inner-optimized sum rate over a fixed set of realizations.
pub fn mean_sum_rate(scenario: &Scenario, spacing: Spacing, realizations: &[Realization], noise: NoiseLevels) -> Result<f64> {
    let response = scenario.response(spacing)?;
    let rates = realizations
        .par_iter()
        .map(|r| scenario.allocate(&response, r, noise).map(|s| s.sum_rate))
        .collect::<Result<Vec<_>>>()?;
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

fn driver(scenario: &Scenario, cfg: &SearchConfig, realizations: &[Realization], seed: u64) -> Result<SearchResult> {
    scenario.validate()?;
    let noise = scenario.noise_levels()?;
    let (lo, hi) = scenario.spacing_bounds()?;
    let domain = Domain::new(lo, hi)?;
    let inner_runs = AtomicUsize::new(0);
    let g = Objective::new(|x: &[f64]| {
        let v = mean_sum_rate(scenario, Spacing::from_slice(x)?, realizations, noise)?;
        inner_runs.fetch_add(realizations.len(), Ordering::SeqCst);
        Ok(v)
    });
    let mut result = search(&g, &domain, cfg, seed)?;
    result.inner_runs = inner_runs.load(Ordering::SeqCst);
    Ok(result)
}

/// Realizations shared by every offline evaluation (common random numbers).
pub fn offline_ensemble(scenario: &Scenario, size: usize, master: u64) -> Vec<Realization> {
    (0..size)
        .map(|j| scenario.realization(realization_seed(master, j)))
        .collect()
}

/// Spacing that maximises the ensemble-mean sum rate.
pub fn offline_optimize(scenario: &Scenario, cfg: &SearchConfig, seed: u64) -> Result<SearchResult> {
    cfg.validate()?;
    let ensemble = offline_ensemble(scenario, cfg.ensemble_size, seed);
    driver(scenario, cfg, &ensemble, seed)
}

/// Elements of a dense `2a`-pitch array switched on to realise a spacing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMask {
    /// Active every `stride`-th element.
    pub stride: usize,
    pub active: Vec<bool>,
}

impl ActivationMask {
    pub fn count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}

/// Snaps `delta` to the nearest multiple of the dense pitch.
pub fn activation_mask(aperture: f64, pitch: f64, delta: f64) -> Result<ActivationMask> {
    if !(pitch > 0.0 && aperture >= pitch && delta > 0.0) {
        return Err(config(format!(
            "activation mask needs 0 < pitch <= aperture and delta > 0 (pitch {pitch}, aperture {aperture}, delta {delta})"
        )));
    }
    let dense = (aperture / pitch + 1e-9).floor() as usize + 1;
    let stride = ((delta / pitch).round() as usize).max(1);
    Ok(ActivationMask {
        stride,
        active: (0..dense).map(|n| n % stride == 0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineResult {
    pub search: SearchResult,
    /// Linear arrays only.
    pub mask: Option<ActivationMask>,
}

/// Search on a single realization, as a reconfigurable dense array would.
pub fn online_optimize(scenario: &Scenario, cfg: &SearchConfig, realization: &Realization) -> Result<OnlineResult> {
    cfg.validate()?;
    let search = driver(scenario, cfg, std::slice::from_ref(realization), realization.seed)?;
    let mask = match scenario.array.kind {
        ArrayKind::Planar => None,
        _ => Some(activation_mask(
            scenario.array.aperture,
            scenario.min_spacing(),
            search.delta_star[0],
        )?),
    };
    Ok(OnlineResult { search, mask })
}
