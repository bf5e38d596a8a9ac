//! Experiment drivers. Each returns typed results plus the tables written to disk.

use anyhow::{anyhow, bail, Result};
use mbmimo_core::alloc::PowerScheme;
use mbmimo_core::antenna::{max_radiation_efficiency, ArrayKind, Coupling};
use mbmimo_core::numerics::RngStream;
use mbmimo_core::scenario::{realization_seed, Capabilities, Realization, Scenario, Spacing};
use mbmimo_core::search::{offline_optimize, online_optimize, SearchResult};
use rayon::prelude::*;

use crate::config::{Config, ExperimentConfig, ExperimentKind, Mode, SchemeName, Series};
use crate::output::{num, Summary, Table};

/// Seed of evaluation realization `j`, independent of the design ensemble.
pub fn evaluation_seed(master: u64, j: usize) -> u64 {
    RngStream::new(master).fork("evaluation").fork(j).derive_seed()
}

fn core(e: mbmimo_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

fn realizations(s: &Scenario, master: u64, n: usize) -> Vec<Realization> {
    (0..n).map(|j| s.realization(realization_seed(master, j))).collect()
}

fn spacing_cells(sp: Spacing) -> [String; 2] {
    match sp {
        Spacing::Linear(d) => [num(d), String::new()],
        Spacing::Planar(a, b) => [num(a), num(b)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub seed: u64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn allocate_all(s: &Scenario, spacing: Spacing, rs: &[Realization]) -> Result<(usize, Vec<Run>)> {
    let noise = s.noise_levels().map_err(core)?;
    let response = s.response(spacing).map_err(core)?;
    let runs = rs
        .par_iter()
        .map(|r| {
            let st = s.allocate(&response, r, noise).map_err(core)?;
            Ok(Run {
                seed: r.seed,
                sum_rate: st.sum_rate,
                iterations: st.iterations,
                converged: st.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((response.geometry.len(), runs))
}

fn summarize(runs: &[Run]) -> Summary {
    Summary::of(&runs.iter().map(|r| r.sum_rate).collect::<Vec<_>>())
}

fn push_runs(t: &mut Table, prefix: &[String], runs: &[Run]) {
    for r in runs {
        let mut row = prefix.to_vec();
        row.extend([
            r.seed.to_string(),
            num(r.sum_rate),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
        t.push(row);
    }
}

// ---------------------------------------------------------------------------
// spacing sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingPoint {
    pub kind: ArrayKind,
    pub spacing: Spacing,
    pub elements: usize,
    pub runs: Vec<Run>,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct SpacingSweep {
    pub points: Vec<SpacingPoint>,
}

impl SpacingSweep {
    pub fn series(&self, kind: ArrayKind) -> Vec<&SpacingPoint> {
        self.points.iter().filter(|p| p.kind == kind).collect()
    }

    pub fn tables(&self, cfg: &Config) -> Vec<Table> {
        let mut t = Table::new(
            "sweep_spacing",
            &["kind", "delta1_m", "delta2_m", "n_elements", "mean_sumrate_bps", "std_bps", "stderr_bps", "n_seeds", "master_seed", "K", "M_L", "M_H", "snr_db", "P_T"],
        );
        let mut runs = Table::new(
            "sweep_spacing_runs",
            &["kind", "delta1_m", "delta2_m", "seed", "sumrate_bps", "iterations", "converged"],
        );
        for p in &self.points {
            let [d1, d2] = spacing_cells(p.spacing);
            t.push(vec![
                p.kind.name().into(),
                d1.clone(),
                d2.clone(),
                p.elements.to_string(),
                num(p.summary.mean),
                num(p.summary.std),
                num(p.summary.stderr()),
                p.summary.n.to_string(),
                cfg.seeds.master.to_string(),
                cfg.users.k.to_string(),
                cfg.bands.m_l.to_string(),
                cfg.bands.m_h.to_string(),
                num(cfg.snr_db),
                num(cfg.total_power()),
            ]);
            push_runs(&mut runs, &[p.kind.name().into(), d1, d2], &p.runs);
        }
        vec![t, runs]
    }
}

fn default_spacings(s: &Scenario, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = s.spacing_bounds().map_err(core)?;
    let top = |h: f64| h.min(0.05).max(lo[0]);
    let v1 = linspace(lo[0], top(hi[0]), n);
    let v2 = if hi.len() > 1 { linspace(lo[1], top(hi[1]), 6) } else { Vec::new() };
    Ok((v1, v2))
}

/// Sum rate against element spacing under joint allocation. Every kind and
/// spacing sees the same realizations.
pub fn sweep_spacing(cfg: &Config, exp: &ExperimentConfig) -> Result<SpacingSweep> {
    let mut base = cfg.scenario()?;
    base.scheme = PowerScheme::Joint;
    let kinds = exp.kinds.clone().unwrap_or_else(|| match cfg.kind() {
        ArrayKind::Planar => vec![ArrayKind::Planar],
        _ => vec![ArrayKind::Colinear, ArrayKind::Parallel],
    });
    let mut jobs = Vec::new();
    for kind in kinds {
        let mut s = base.clone();
        s.array.kind = kind;
        s.validate().map_err(core)?;
        let (d1, d2) = default_spacings(&s, 15)?;
        let v1 = exp.values.clone().unwrap_or(d1);
        if kind == ArrayKind::Planar {
            let v2 = exp.values2.clone().unwrap_or(d2);
            for &a in &v1 {
                for &b in &v2 {
                    jobs.push((s.clone(), Spacing::Planar(a, b)));
                }
            }
        } else {
            jobs.extend(v1.iter().map(|&d| (s.clone(), Spacing::Linear(d))));
        }
    }
    let rs = realizations(&base, cfg.seeds.master, cfg.seeds.repetitions);
    let points = jobs
        .par_iter()
        .map(|(s, sp)| {
            let (elements, runs) = allocate_all(s, *sp, &rs)?;
            Ok(SpacingPoint {
                kind: s.array.kind,
                spacing: *sp,
                elements,
                summary: summarize(&runs),
                runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpacingSweep { points })
}

// ---------------------------------------------------------------------------
// scheme comparisons

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Subcarriers,
    Snr,
    Beta,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::Subcarriers => "subcarriers",
            Variable::Snr => "snr",
            Variable::Beta => "beta",
        }
    }

    fn default_values(self) -> Vec<f64> {
        match self {
            Variable::Subcarriers => vec![1.0, 2.0, 4.0, 8.0, 16.0],
            Variable::Snr => vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            Variable::Beta => vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }

    fn default_series(self) -> Vec<Series> {
        match self {
            Variable::Beta => vec![Series::cwpa(), Series::bwpa(1.0), Series::jpa(1)],
            _ => {
                let mut v = vec![Series::cwpa(), Series::bwpa(1.0)];
                v.extend((1..=4).map(Series::jpa));
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemePoint {
    pub x: f64,
    pub series: Series,
    pub runs: Vec<Run>,
    pub summary: Summary,
}

#[derive(Debug, Clone)]
pub struct SchemeSweep {
    pub variable: Variable,
    pub points: Vec<SchemePoint>,
}

impl SchemeSweep {
    pub fn mean(&self, x: f64, label: &str) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.x == x && p.series.label() == label)
            .map(|p| p.summary.mean)
    }

    pub fn tables(&self, cfg: &Config) -> Vec<Table> {
        let name = format!("sweep_{}", self.variable.name());
        let mut t = Table::new(
            &name,
            &["x", "series", "scheme", "case", "beta", "mean_sumrate_bps", "std_bps", "stderr_bps", "n_seeds", "master_seed", "K"],
        );
        let mut runs = Table::new(
            &format!("{name}_runs"),
            &["x", "series", "seed", "sumrate_bps", "iterations", "converged"],
        );
        for p in &self.points {
            let scheme = p.series.scheme();
            let beta = match scheme {
                PowerScheme::BandWise { beta } => num(beta),
                _ => String::new(),
            };
            t.push(vec![
                num(p.x),
                p.series.label(),
                scheme.name().into(),
                p.series.case().to_string(),
                beta,
                num(p.summary.mean),
                num(p.summary.std),
                num(p.summary.stderr()),
                p.summary.n.to_string(),
                cfg.seeds.master.to_string(),
                cfg.users.k.to_string(),
            ]);
            push_runs(&mut runs, &[num(p.x), p.series.label()], &p.runs);
        }
        vec![t, runs]
    }
}

/// Sum rate of several schemes and capability cases against one variable,
/// all series sharing realizations and the array response at each point.
pub fn sweep_schemes(cfg: &Config, exp: &ExperimentConfig, variable: Variable) -> Result<SchemeSweep> {
    let values = exp.values.clone().unwrap_or_else(|| variable.default_values());
    let series = exp.series.clone().unwrap_or_else(|| variable.default_series());
    let spacing = cfg.spacing()?;
    let per_x = values
        .par_iter()
        .map(|&x| {
            let mut c = cfg.clone();
            match variable {
                Variable::Subcarriers => {
                    if !(x >= 1.0 && x.fract() == 0.0) {
                        bail!("subcarrier counts must be positive integers, got {x}");
                    }
                    c.bands.m_l = x as usize;
                    c.bands.m_h = x as usize;
                }
                Variable::Snr => c.snr_db = x,
                Variable::Beta => {}
            }
            let base = c.scenario()?;
            let noise = base.noise_levels().map_err(core)?;
            let response = base.response(spacing).map_err(core)?;
            let rs = realizations(&base, cfg.seeds.master, cfg.seeds.repetitions);
            let mut jobs = Vec::new();
            for s in &series {
                let mut s = *s;
                if variable == Variable::Beta && s.scheme == SchemeName::Bwpa {
                    s.beta = Some(x);
                }
                let mut sc = base.clone();
                sc.scheme = s.scheme();
                sc.capabilities = Capabilities::Case(s.case());
                sc.validate().map_err(core)?;
                jobs.push((s, sc));
            }
            jobs.par_iter()
                .map(|(s, sc)| {
                    let runs = rs
                        .par_iter()
                        .map(|r| {
                            let st = sc.allocate(&response, r, noise).map_err(core)?;
                            Ok(Run {
                                seed: r.seed,
                                sum_rate: st.sum_rate,
                                iterations: st.iterations,
                                converged: st.converged,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(SchemePoint {
                        x,
                        series: *s,
                        summary: summarize(&runs),
                        runs,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SchemeSweep {
        variable,
        points: per_x.into_iter().flatten().collect(),
    })
}

// ---------------------------------------------------------------------------
// frequency response

#[derive(Debug, Clone, PartialEq)]
pub struct BodePoint {
    pub config: String,
    pub frequency: f64,
    /// Mean of `||H~||_F^2 / (K N)` over realizations.
    pub gain: f64,
    pub gain_db: f64,
    pub efficiency: f64,
    pub elements: usize,
}

#[derive(Debug, Clone)]
pub struct Bode {
    pub points: Vec<BodePoint>,
    pub realizations: usize,
}

impl Bode {
    pub fn curve(&self, config: &str) -> Vec<&BodePoint> {
        self.points.iter().filter(|p| p.config == config).collect()
    }

    /// Mean of the dB gain over the frequency points of a configuration.
    pub fn band_average_db(&self, config: &str) -> f64 {
        let c = self.curve(config);
        c.iter().map(|p| p.gain_db).sum::<f64>() / c.len() as f64
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "bode",
            &["config", "f_hz", "gain_db", "gain_linear", "efficiency", "n_elements", "n_seeds"],
        );
        for p in &self.points {
            t.push(vec![
                p.config.clone(),
                num(p.frequency),
                num(p.gain_db),
                num(p.gain),
                num(p.efficiency),
                p.elements.to_string(),
                self.realizations.to_string(),
            ]);
        }
        vec![t]
    }
}

/// Channel gain and radiation efficiency against frequency for coupled
/// geometries and an uncoupled baseline of the same element count.
pub fn bode(cfg: &Config, exp: &ExperimentConfig) -> Result<Bode> {
    let base = cfg.scenario()?;
    let spacing = cfg.spacing()?;
    let freqs = exp.frequencies.unwrap_or_default().values();
    let kinds = exp.kinds.clone().unwrap_or_else(|| match cfg.kind() {
        ArrayKind::Planar => vec![ArrayKind::Planar],
        _ => vec![ArrayKind::Colinear, ArrayKind::Parallel],
    });
    let mut configs = Vec::new();
    for (j, kind) in kinds.iter().enumerate() {
        let mut s = base.clone();
        s.array.kind = *kind;
        let geometry = s.geometry(spacing).map_err(core)?;
        if j == 0 {
            configs.push(("uncoupled".to_string(), s.clone(), geometry.clone(), Coupling::Uncoupled));
        }
        configs.push((kind.name().to_string(), s, geometry, Coupling::Coupled));
    }
    let rs = realizations(&base, cfg.seeds.master, cfg.seeds.repetitions);
    let users = base.users as f64;
    let curves = configs
        .par_iter()
        .map(|(label, s, geometry, coupling)| {
            let response = s.response_at(geometry.clone(), *coupling, &freqs).map_err(core)?;
            let n = geometry.len();
            freqs
                .par_iter()
                .enumerate()
                .map(|(slot, &f)| {
                    let mut total = 0.0;
                    for r in &rs {
                        let h = s.channel(&response, slot, f, 0, r).map_err(core)?;
                        total += h.norm_squared() / (users * n as f64);
                    }
                    let gain = total / rs.len() as f64;
                    Ok(BodePoint {
                        config: label.clone(),
                        frequency: f,
                        gain,
                        gain_db: 10.0 * gain.log10(),
                        efficiency: max_radiation_efficiency(&response.impedance[slot], s.source_resistance).map_err(core)?,
                        elements: n,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Bode {
        points: curves.into_iter().flatten().collect(),
        realizations: rs.len(),
    })
}

// ---------------------------------------------------------------------------
// spacing optimization

fn search_row(r: &SearchResult) -> Vec<String> {
    let [d1, d2] = spacing_cells(Spacing::from_slice(&r.delta_star).unwrap_or(Spacing::Linear(f64::NAN)));
    vec![
        d1,
        d2,
        num(r.g_star),
        r.evaluations.to_string(),
        r.inner_runs.to_string(),
        r.swarm_evals.to_string(),
        r.bracket_evals.to_string(),
        r.refine_evals.to_string(),
    ]
}

const SEARCH_COLUMNS: [&str; 8] = [
    "delta1_m",
    "delta2_m",
    "g_star_bps",
    "evaluations",
    "inner_runs",
    "swarm_evals",
    "bracket_evals",
    "refine_evals",
];

#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub seed: u64,
    pub result: SearchResult,
    pub stride: Option<usize>,
    pub active: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum Optimized {
    Offline(SearchResult),
    Online(Vec<OnlineRun>),
}

impl Optimized {
    pub fn tables(&self, cfg: &Config) -> Vec<Table> {
        match self {
            Optimized::Offline(r) => {
                let mut header = vec!["kind"];
                header.extend(SEARCH_COLUMNS);
                header.extend(["ensemble_size", "master_seed"]);
                let mut t = Table::new("optimize_offline", &header);
                let mut row = vec![cfg.kind().name().to_string()];
                row.extend(search_row(r));
                row.extend([cfg.search.ensemble_size.to_string(), cfg.seeds.master.to_string()]);
                t.push(row);
                let mut trace = Table::new("optimize_trace", &["step", "delta1_m", "delta2_m", "g_bps"]);
                for (j, (x, g)) in r.trace.iter().enumerate() {
                    let [d1, d2] = spacing_cells(Spacing::from_slice(x).unwrap_or(Spacing::Linear(f64::NAN)));
                    trace.push(vec![j.to_string(), d1, d2, num(*g)]);
                }
                vec![t, trace]
            }
            Optimized::Online(runs) => {
                let mut header = vec!["seed"];
                header.extend(SEARCH_COLUMNS);
                header.extend(["mask_stride", "active_elements"]);
                let mut t = Table::new("optimize_online", &header);
                for o in runs {
                    let mut row = vec![o.seed.to_string()];
                    row.extend(search_row(&o.result));
                    row.push(o.stride.map(|v| v.to_string()).unwrap_or_default());
                    row.push(o.active.map(|v| v.to_string()).unwrap_or_default());
                    t.push(row);
                }
                vec![t]
            }
        }
    }
}

fn online_runs(s: &Scenario, cfg: &Config, n: usize) -> Result<Vec<OnlineRun>> {
    (0..n)
        .into_par_iter()
        .map(|j| {
            let r = s.realization(evaluation_seed(cfg.seeds.master, j));
            let o = online_optimize(s, &cfg.search, &r).map_err(core)?;
            Ok(OnlineRun {
                seed: r.seed,
                stride: o.mask.as_ref().map(|m| m.stride),
                active: o.mask.as_ref().map(|m| m.count()),
                result: o.search,
            })
        })
        .collect()
}

pub fn optimize(cfg: &Config, mode: Mode) -> Result<Optimized> {
    let s = cfg.scenario()?;
    Ok(match mode {
        Mode::Offline => Optimized::Offline(offline_optimize(&s, &cfg.search, cfg.seeds.master).map_err(core)?),
        Mode::Online => Optimized::Online(online_runs(&s, cfg, cfg.seeds.repetitions)?),
    })
}

// ---------------------------------------------------------------------------
// offline versus online

#[derive(Debug, Clone)]
pub struct ModeComparison {
    pub snr_db: f64,
    pub offline: SearchResult,
    /// Rate of each evaluation realization at the offline spacing.
    pub offline_rates: Vec<f64>,
    pub online: Vec<OnlineRun>,
    /// `2 + zeta (1 + I_PS) + I_SB + I_BS` for each online run.
    pub formula: Vec<usize>,
}

impl ModeComparison {
    pub fn offline_summary(&self) -> Summary {
        Summary::of(&self.offline_rates)
    }

    pub fn online_summary(&self) -> Summary {
        Summary::of(&self.online.iter().map(|o| o.result.g_star).collect::<Vec<_>>())
    }

    /// Online inner runs per realization, relative to the one run offline.
    pub fn cost_ratios(&self) -> Vec<f64> {
        self.online.iter().map(|o| 1.0 / o.result.inner_runs as f64).collect()
    }
}

pub fn compare_modes(cfg: &Config, exp: &ExperimentConfig) -> Result<Vec<ModeComparison>> {
    let values = exp.values.clone().unwrap_or_else(|| vec![cfg.snr_db]);
    let zeta = cfg.search.zeta;
    let iters = cfg.search.pso_iters;
    values
        .iter()
        .map(|&snr| {
            let mut c = cfg.clone();
            c.snr_db = snr;
            let s = c.scenario()?;
            let offline = offline_optimize(&s, &c.search, c.seeds.master).map_err(core)?;
            let noise = s.noise_levels().map_err(core)?;
            let response = s
                .response(Spacing::from_slice(&offline.delta_star).map_err(core)?)
                .map_err(core)?;
            let offline_rates = (0..c.seeds.repetitions)
                .into_par_iter()
                .map(|j| {
                    let r = s.realization(evaluation_seed(c.seeds.master, j));
                    Ok(s.allocate(&response, &r, noise).map_err(core)?.sum_rate)
                })
                .collect::<Result<Vec<_>>>()?;
            let online = online_runs(&s, &c, c.seeds.repetitions)?;
            let formula = online
                .iter()
                .map(|o| 2 + zeta * (1 + iters) + o.result.bracket_evals + o.result.refine_evals)
                .collect();
            Ok(ModeComparison {
                snr_db: snr,
                offline,
                offline_rates,
                online,
                formula,
            })
        })
        .collect()
}

pub fn comparison_tables(rows: &[ModeComparison]) -> Vec<Table> {
    let mut t = Table::new(
        "compare_modes",
        &["snr_db", "offline_delta1_m", "offline_delta2_m", "offline_mean_bps", "offline_std_bps", "online_mean_bps", "online_std_bps", "offline_design_runs", "mean_online_runs", "mean_cost_ratio", "n_seeds"],
    );
    let mut runs = Table::new(
        "compare_modes_runs",
        &["snr_db", "seed", "offline_sumrate_bps", "online_sumrate_bps", "online_delta1_m", "online_delta2_m", "online_inner_runs", "formula_runs", "cost_ratio"],
    );
    for m in rows {
        let [o1, o2] = spacing_cells(Spacing::from_slice(&m.offline.delta_star).unwrap_or(Spacing::Linear(f64::NAN)));
        let (off, on) = (m.offline_summary(), m.online_summary());
        let ratios = m.cost_ratios();
        let mean_runs = m.online.iter().map(|o| o.result.inner_runs as f64).sum::<f64>() / m.online.len() as f64;
        t.push(vec![
            num(m.snr_db),
            o1,
            o2,
            num(off.mean),
            num(off.std),
            num(on.mean),
            num(on.std),
            m.offline.inner_runs.to_string(),
            num(mean_runs),
            num(Summary::of(&ratios).mean),
            off.n.to_string(),
        ]);
        for (j, o) in m.online.iter().enumerate() {
            let [d1, d2] = spacing_cells(Spacing::from_slice(&o.result.delta_star).unwrap_or(Spacing::Linear(f64::NAN)));
            runs.push(vec![
                num(m.snr_db),
                o.seed.to_string(),
                num(m.offline_rates[j]),
                num(o.result.g_star),
                d1,
                d2,
                o.result.inner_runs.to_string(),
                m.formula[j].to_string(),
                num(ratios[j]),
            ]);
        }
    }
    vec![t, runs]
}

// ---------------------------------------------------------------------------
// dispatch

/// Files an experiment writes besides `manifest.json`.
pub fn outputs(kind: ExperimentKind, mode: Mode) -> Vec<String> {
    let names: &[&str] = match kind {
        ExperimentKind::SweepSpacing => &["sweep_spacing", "sweep_spacing_runs"],
        ExperimentKind::SweepSubcarriers => &["sweep_subcarriers", "sweep_subcarriers_runs"],
        ExperimentKind::SweepSnr => &["sweep_snr", "sweep_snr_runs"],
        ExperimentKind::SweepBeta => &["sweep_beta", "sweep_beta_runs"],
        ExperimentKind::Bode => &["bode"],
        ExperimentKind::Optimize => match mode {
            Mode::Offline => &["optimize_offline", "optimize_trace"],
            Mode::Online => &["optimize_online"],
        },
        ExperimentKind::CompareModes => &["compare_modes", "compare_modes_runs"],
    };
    names.iter().map(|n| format!("{n}.csv")).collect()
}

pub fn run(kind: ExperimentKind, cfg: &Config, exp: &ExperimentConfig) -> Result<Vec<Table>> {
    let mode = exp.mode.unwrap_or_default();
    Ok(match kind {
        ExperimentKind::SweepSpacing => sweep_spacing(cfg, exp)?.tables(cfg),
        ExperimentKind::SweepSubcarriers => sweep_schemes(cfg, exp, Variable::Subcarriers)?.tables(cfg),
        ExperimentKind::SweepSnr => sweep_schemes(cfg, exp, Variable::Snr)?.tables(cfg),
        ExperimentKind::SweepBeta => sweep_schemes(cfg, exp, Variable::Beta)?.tables(cfg),
        ExperimentKind::Bode => bode(cfg, exp)?.tables(),
        ExperimentKind::Optimize => optimize(cfg, mode)?.tables(cfg),
        ExperimentKind::CompareModes => comparison_tables(&compare_modes(cfg, exp)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Config {
        let mut c = Config::preset();
        c.array.aperture = 0.02;
        c.users.k = 2;
        c.bands.m_l = 2;
        c.bands.m_h = 2;
        c.seeds.repetitions = 2;
        c
    }

    #[test]
    fn spacing_sweep_shares_realizations() {
        let c = tiny();
        let exp = ExperimentConfig {
            values: Some(vec![0.005, 0.01]),
            ..Default::default()
        };
        let sw = sweep_spacing(&c, &exp).unwrap();
        assert_eq!(sw.points.len(), 4);
        let seeds: Vec<u64> = sw.points[0].runs.iter().map(|r| r.seed).collect();
        assert!(sw.points.iter().all(|p| p.runs.iter().map(|r| r.seed).collect::<Vec<_>>() == seeds));
        assert_eq!(sw.series(ArrayKind::Colinear)[0].elements, 5);
        let t = sw.tables(&c);
        assert_eq!(t[0].rows.len(), 4);
        assert_eq!(t[1].rows.len(), 8);
    }

    #[test]
    fn beta_sweep_overrides_band_wise_beta() {
        let c = tiny();
        let exp = ExperimentConfig {
            values: Some(vec![0.5, 2.0]),
            series: Some(vec![Series::bwpa(1.0)]),
            ..Default::default()
        };
        let sw = sweep_schemes(&c, &exp, Variable::Beta).unwrap();
        let labels: Vec<String> = sw.points.iter().map(|p| p.series.label()).collect();
        assert_eq!(labels, vec!["bwpa_beta0.5", "bwpa_beta2"]);
    }

    #[test]
    fn bode_has_baseline_and_both_kinds() {
        let c = tiny();
        let exp = ExperimentConfig {
            frequencies: Some(crate::config::FrequencySweep {
                f_min: 2e9,
                f_max: 4e9,
                points: 3,
            }),
            ..Default::default()
        };
        let b = bode(&c, &exp).unwrap();
        for name in ["uncoupled", "colinear", "parallel"] {
            assert_eq!(b.curve(name).len(), 3);
        }
        assert!(b.points.iter().all(|p| p.efficiency > 0.0 && p.efficiency <= 1.0 + 1e-9));
        assert!(b.band_average_db("uncoupled").is_finite());
    }

    #[test]
    fn evaluation_seeds_differ_from_design_seeds() {
        assert_ne!(evaluation_seed(1, 0), realization_seed(1, 0));
        assert_eq!(evaluation_seed(1, 3), evaluation_seed(1, 3));
    }
}
