//! Random dose-toxicity scenarios: cumulative sums of a Dirichlet vector,
//! subsampled, warped and vetted until the MTD is well defined.

use rand::seq::{index::sample as sample_indices, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DoseGrid, Scenario};

pub const DEFAULT_RETRY_BUDGET: u64 = 100_000;

/// Generator tuning. [`SceneConfig::new`] gives the defaults for `nlev`
/// levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub nlev: usize,
    /// Largest half-width of the padding added around the `nlev` levels.
    pub marg: usize,
    /// Lower end of the uniform base of the Dirichlet parameters.
    pub baseline: f64,
    pub peakmean: f64,
    pub peaksd: f64,
    pub targ: f64,
    pub maxstep: f64,
    pub minstep: f64,
    pub maxerr: f64,
    pub minedge: f64,
    pub protectfac: f64,
    pub warp: bool,
    pub shift: f64,
    #[serde(default = "default_budget")]
    pub retry_budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_RETRY_BUDGET
}

/// Rounds half to even, as R's `round` does.
fn round_half_even(x: f64) -> f64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - x.signum()
    } else {
        r
    }
}

impl SceneConfig {
    pub fn new(nlev: usize) -> Self {
        let l = nlev as f64;
        let maxerr = 0.5 / l;
        SceneConfig {
            nlev,
            marg: round_half_even(l / 2.0) as usize,
            baseline: 0.25,
            peakmean: 3.0,
            peaksd: 4.0,
            targ: 0.3,
            maxstep: 2.5 / l,
            minstep: 0.15 / l,
            maxerr,
            minedge: maxerr,
            protectfac: 1.5,
            warp: true,
            shift: 0.0,
            retry_budget: DEFAULT_RETRY_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.nlev < 2 {
            return Err(Error::TooFewLevels(self.nlev));
        }
        if self.marg < 1 {
            return bad("marg must be at least 1");
        }
        if !(self.targ > 0.0 && self.targ < 1.0) {
            return Err(Error::InvalidTarget(self.targ));
        }
        if !(self.baseline > 0.0 && self.peakmean > 0.0 && self.peaksd > 1.0) {
            return bad("baseline and peakmean must be positive and peaksd above 1");
        }
        if !(self.minstep >= 0.0 && self.maxstep > self.minstep && self.maxerr > 0.0) {
            return bad("step and error bounds are inconsistent");
        }
        if self.shift < 0.0 || self.retry_budget == 0 {
            return bad("shift must be non-negative and the retry budget positive");
        }
        Ok(())
    }
}

/// Outcome of each vetting rule for a candidate curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vetting {
    pub steps_ok: bool,
    pub closest_ok: bool,
    pub runner_up_ok: bool,
}

impl Vetting {
    pub fn passed(&self) -> bool {
        self.steps_ok && self.closest_ok && self.runner_up_ok
    }
}

/// Checks a candidate against the generator's acceptance rules, written
/// independently of the generation loop.
pub fn vet(f: &[f64], cfg: &SceneConfig) -> Vetting {
    let mut dist: Vec<f64> = f.iter().map(|v| (v - cfg.targ).abs()).collect();
    dist.sort_by(f64::total_cmp);
    let steps_ok = f.windows(2).all(|w| {
        let s = w[1] - w[0];
        s <= cfg.maxstep && s >= cfg.minstep
    });
    let closest = dist[0];
    let runner = dist.get(1).copied().unwrap_or(f64::INFINITY);
    Vetting {
        steps_ok,
        closest_ok: closest <= cfg.maxerr,
        runner_up_ok: runner >= (cfg.minedge + closest).max(cfg.protectfac * cfg.maxerr),
    }
}

/// Extra acceptance window applied after generation: the MTD's value must lie
/// in `[lo, hi]` and every other level must be at least `margin` further
/// from target than the MTD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostFilter {
    pub lo: f64,
    pub hi: f64,
    pub margin: f64,
}

impl PostFilter {
    /// Cutoffs used for the 7- and 4-level random ensembles.
    pub fn for_levels(nlev: usize) -> Option<Self> {
        match nlev {
            7 => Some(PostFilter { lo: 0.22, hi: 0.38, margin: 0.06 }),
            4 => Some(PostFilter { lo: 0.18, hi: 0.42, margin: 0.09 }),
            _ => None,
        }
    }

    /// Generator settings whose vetting rules coincide with this filter: the
    /// MTD within half the window of target, the runner-up outside the window
    /// and at least `margin` further away. Other settings are the defaults.
    pub fn scene_config(&self, nlev: usize) -> SceneConfig {
        SceneConfig {
            maxerr: 0.5 * (self.hi - self.lo),
            minedge: self.margin,
            protectfac: 1.0,
            ..SceneConfig::new(nlev)
        }
    }

    pub fn accepts(&self, f: &[f64], target: f64) -> bool {
        let d: Vec<f64> = f.iter().map(|v| (v - target).abs()).collect();
        let best = d.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).map(|(i, _)| i);
        let Some(best) = best else { return false };
        let inside = f[best] >= self.lo && f[best] <= self.hi;
        let alone = f.iter().enumerate().all(|(i, &v)| i == best || !(v >= self.lo && v <= self.hi));
        let separated = d.iter().enumerate().all(|(i, &v)| i == best || v >= d[best] + self.margin);
        inside && alone && separated
    }
}

fn dnorm(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// R's `round`.
fn r_round(x: f64) -> i64 {
    round_half_even(x) as i64
}

/// One pass of the generation pipeline, without vetting.
pub fn candidate<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Vec<f64> {
    let nlev = cfg.nlev as i64;
    let peak = LogNormal::new(cfg.peakmean.ln(), cfg.peaksd.ln()).expect("validated").sample(rng);
    let seedlen = nlev + 2 * rng.random_range(1..=cfg.marg as i64);
    let asym = r_round(2.0 * seedlen as f64 * (cfg.targ - 0.5));

    // Dirichlet parameters: uniform base plus a Gaussian bump whose centre is
    // itself drawn with Gaussian weights
    let centre_w: Vec<f64> =
        (1..=seedlen).map(|i| dnorm(i as f64, (seedlen - asym) as f64 / 2.0, seedlen as f64)).collect();
    let base: Vec<f64> = (0..seedlen).map(|_| rng.random_range(cfg.baseline..2.0 * cfg.baseline)).collect();
    let centre = weighted_pick(&centre_w, rng) as f64 + 1.0;
    let width = cfg.peaksd * rng.random_range(seedlen as f64 / 8.0..seedlen as f64 / 2.0);
    let alpha: Vec<f64> =
        base.iter().enumerate().map(|(i, b)| b + 2.5 * peak * dnorm(i as f64 + 1.0, centre, width)).collect();

    let sampasym = asym.signum() * (asym.abs() - 1).min(seedlen - nlev - 1);
    let gammas: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng)).collect();
    let total: f64 = gammas.iter().sum();
    let mut cum = Vec::with_capacity(gammas.len());
    let mut acc = 0.0;
    for g in &gammas {
        acc += g / total;
        cum.push(acc);
    }
    // positions are one-based in [from, to]
    let from = sampasym.max(1);
    let to = (seedlen - 1).min(seedlen - 1 + sampasym);
    let span = (to - from + 1) as usize;
    let mut picks: Vec<usize> = sample_indices(rng, span, cfg.nlev).into_iter().collect();
    picks.sort_unstable();
    let mut f: Vec<f64> = picks.iter().map(|&k| cum[(from as usize - 1) + k]).collect();

    if cfg.warp {
        let e = rng.random_range(0.1 / cfg.targ..1.0 / cfg.targ);
        for v in f.iter_mut() {
            *v = v.powf(e);
        }
    }
    if cfg.shift > 0.0 {
        let lo = (-cfg.shift).max(-f[0]);
        let hi = (1.0 - f[f.len() - 1]).min(cfg.shift);
        let s = rng.random_range(lo..hi);
        for v in f.iter_mut() {
            *v += s;
        }
    }
    f
}

fn weighted_pick<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

fn accepted(f: &[f64], cfg: &SceneConfig) -> bool {
    let gaps: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    if max_gap > cfg.maxstep || min_gap < cfg.minstep {
        return false;
    }
    let d: Vec<f64> = f.iter().map(|v| (v - cfg.targ).abs()).collect();
    let (best, closest) =
        d.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    if closest > cfg.maxerr {
        return false;
    }
    let second = d.iter().enumerate().filter(|&(i, _)| i != best).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    second >= (cfg.minedge + closest).max(cfg.protectfac * cfg.maxerr)
}

fn into_scenario(f: Vec<f64>, cfg: &SceneConfig) -> Result<Scenario<f64>> {
    Scenario::on_grid(DoseGrid::new(cfg.nlev)?, f, cfg.targ)
}

/// Draws candidates until one passes vetting (and `filter`, if given).
pub fn random_scenario_filtered<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    filter: Option<&PostFilter>,
    rng: &mut R,
) -> Result<Scenario<f64>> {
    cfg.validate()?;
    for _ in 0..cfg.retry_budget {
        let f = candidate(cfg, rng);
        if !accepted(&f, cfg) || filter.is_some_and(|pf| !pf.accepts(&f, cfg.targ)) {
            continue;
        }
        // a candidate whose values leave (0, 1) or tie at the MTD is rejected
        if let Ok(s) = into_scenario(f, cfg) {
            return Ok(s);
        }
    }
    Err(Error::GeneratorStarved { attempts: cfg.retry_budget })
}

pub fn random_scenario<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Result<Scenario<f64>> {
    random_scenario_filtered(cfg, None, rng)
}

/// Ensemble with exactly `quotas[u]` scenarios whose MTD is level `u`.
///
/// A super-ensemble is generated until every stratum holds at least
/// `oversample` times its quota (or its quota, once the draw budget of
/// `retry_budget` scenarios per requested scenario is spent); each stratum
/// is then subsampled without replacement and the result shuffled.
pub fn stratified_ensemble<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    quotas: &[usize],
    filter: Option<&PostFilter>,
    oversample: usize,
    rng: &mut R,
) -> Result<Vec<Scenario<f64>>> {
    cfg.validate()?;
    if quotas.len() != cfg.nlev {
        return Err(Error::LengthMismatch(cfg.nlev, quotas.len()));
    }
    let total: usize = quotas.iter().sum();
    if total == 0 {
        return Ok(Vec::new());
    }
    let oversample = oversample.max(1);
    let wanted: Vec<usize> = quotas.iter().map(|q| q * oversample).collect();
    let mut strata: Vec<Vec<Scenario<f64>>> = vec![Vec::new(); cfg.nlev];
    let budget = cfg.retry_budget.saturating_mul(total as u64);
    let mut draws = 0u64;
    let full = |s: &Vec<Vec<Scenario<f64>>>, w: &[usize]| s.iter().zip(w).all(|(v, &q)| v.len() >= q);
    while !full(&strata, &wanted) {
        if draws >= budget {
            if full(&strata, quotas) {
                break;
            }
            return Err(Error::GeneratorStarved { attempts: draws });
        }
        draws += 1;
        let s = random_scenario_filtered(cfg, filter, rng)?;
        let u = s.true_mtd().index();
        strata[u].push(s);
    }
    let mut out = Vec::with_capacity(total);
    for (u, stratum) in strata.into_iter().enumerate() {
        let idx = sample_indices(rng, stratum.len(), quotas[u]).into_vec();
        let mut idx = idx;
        idx.sort_unstable();
        let mut stratum: Vec<Option<Scenario<f64>>> = stratum.into_iter().map(Some).collect();
        for i in idx {
            out.push(stratum[i].take().expect("distinct indices"));
        }
    }
    out.shuffle(rng);
    Ok(out)
}

/// MTD level counts of an ensemble.
pub fn mtd_counts(scenarios: &[Scenario<f64>], levels: usize) -> Vec<usize> {
    let mut c = vec![0; levels];
    for s in scenarios {
        c[s.true_mtd().index()] += 1;
    }
    c
}
