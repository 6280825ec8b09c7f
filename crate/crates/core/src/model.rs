//! Domain types shared by every design: dose grid, scenario, threshold
//! stream and the chronological trial record.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{closest_index, Real};

/// A dose level. Stored zero-based, displayed and serialized one-based
/// (`d1` is the lowest dose).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "usize", try_from = "usize")]
pub struct Level(usize);

impl Level {
    pub const LOWEST: Level = Level(0);

    pub const fn from_index(index: usize) -> Self {
        Level(index)
    }

    /// One-based constructor; `None` for 0.
    pub fn from_number(number: usize) -> Option<Self> {
        number.checked_sub(1).map(Level)
    }

    pub const fn index(self) -> usize {
        self.0
    }

    pub const fn number(self) -> usize {
        self.0 + 1
    }

    /// One level up, clamped to the top of a `levels`-level grid.
    pub fn up(self, levels: usize) -> Self {
        Level((self.0 + 1).min(levels - 1))
    }

    /// One level down, clamped at `d1`.
    pub fn down(self) -> Self {
        Level(self.0.saturating_sub(1))
    }

    /// Moves by `step` levels, clamped to the grid.
    pub fn shifted(self, step: isize, levels: usize) -> Self {
        let target = self.0 as isize + step;
        Level(target.clamp(0, levels as isize - 1) as usize)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.number())
    }
}

impl From<Level> for usize {
    fn from(level: Level) -> usize {
        level.number()
    }
}

impl TryFrom<usize> for Level {
    type Error = String;

    fn try_from(number: usize) -> std::result::Result<Self, String> {
        Level::from_number(number).ok_or_else(|| "dose levels are numbered from 1".to_string())
    }
}

/// Finite set of ordered dose levels with optional numeric dose values.
#[derive(Clone, Debug, PartialEq)]
pub struct DoseGrid<T> {
    doses: Vec<T>,
    explicit: bool,
}

impl<T: Real> DoseGrid<T> {
    /// Evenly spaced grid with dose values `u / levels`.
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::TooFewLevels(levels));
        }
        let l = T::from_usize(levels).unwrap();
        let doses = (1..=levels).map(|u| T::from_usize(u).unwrap() / l).collect();
        Ok(DoseGrid { doses, explicit: false })
    }

    pub fn with_doses(doses: Vec<T>) -> Result<Self> {
        if doses.len() < 2 {
            return Err(Error::TooFewLevels(doses.len()));
        }
        if doses.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonIncreasingDoses);
        }
        Ok(DoseGrid { doses, explicit: true })
    }

    pub fn levels(&self) -> usize {
        self.doses.len()
    }

    pub fn doses(&self) -> &[T] {
        &self.doses
    }

    pub fn dose(&self, level: Level) -> T {
        self.doses[level.index()]
    }

    pub fn has_explicit_doses(&self) -> bool {
        self.explicit
    }

    pub fn check(&self, level: Level) -> Result<()> {
        if level.index() < self.levels() {
            Ok(())
        } else {
            Err(Error::LevelOutOfRange { level: level.number(), levels: self.levels() })
        }
    }

    pub fn top(&self) -> Level {
        Level(self.levels() - 1)
    }

    pub fn all(&self) -> impl Iterator<Item = Level> {
        (0..self.levels()).map(Level)
    }
}

/// True toxicity probabilities at each level of a grid, with the target
/// rate and the level nearest to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioRecord<T>", into = "ScenarioRecord<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Scenario<T: Real> {
    grid: DoseGrid<T>,
    f: Vec<T>,
    target: T,
    true_mtd: Level,
    name: Option<String>,
}

/// Wire form of a scenario: `{"levels", "target", "f", "true_mtd"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioRecord<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub levels: usize,
    pub target: T,
    pub f: Vec<T>,
    pub true_mtd: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doses: Option<Vec<T>>,
}

impl<T: Real> TryFrom<ScenarioRecord<T>> for Scenario<T> {
    type Error = Error;

    fn try_from(rec: ScenarioRecord<T>) -> Result<Self> {
        if rec.levels != rec.f.len() {
            return Err(Error::LengthMismatch(rec.levels, rec.f.len()));
        }
        let grid = match rec.doses {
            Some(d) => DoseGrid::with_doses(d)?,
            None => DoseGrid::new(rec.levels)?,
        };
        let s = Scenario::on_grid(grid, rec.f, rec.target)?;
        if s.true_mtd != rec.true_mtd {
            return Err(Error::InvalidConfig(format!(
                "declared true_mtd {} but the closest level is {}",
                rec.true_mtd.number(),
                s.true_mtd.number()
            )));
        }
        Ok(s.named_opt(rec.name))
    }
}

impl<T: Real> From<Scenario<T>> for ScenarioRecord<T> {
    fn from(s: Scenario<T>) -> Self {
        ScenarioRecord {
            name: s.name,
            levels: s.grid.levels(),
            target: s.target,
            doses: s.grid.explicit.then(|| s.grid.doses.clone()),
            f: s.f,
            true_mtd: s.true_mtd,
        }
    }
}

/// Builds a scenario on the evenly spaced grid, rejecting non-monotone or
/// out-of-range curves and ambiguous MTDs.
pub fn validate_scenario<T: Real>(f: &[T], target: T) -> Result<Scenario<T>> {
    let grid = DoseGrid::new(f.len())?;
    Scenario::on_grid(grid, f.to_vec(), target)
}

impl<T: Real> Scenario<T> {
    pub fn on_grid(grid: DoseGrid<T>, f: Vec<T>, target: T) -> Result<Self> {
        if grid.levels() != f.len() {
            return Err(Error::LengthMismatch(grid.levels(), f.len()));
        }
        check_target(target)?;
        for (i, &v) in f.iter().enumerate() {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::OutOfRange { position: i + 1, value: v.to_f64_lossy() });
            }
        }
        if let Some(i) = f.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotone(i + 2));
        }
        let best = closest_index(&f, target).expect("non-empty");
        let best_d = (f[best] - target).abs();
        for (i, &v) in f.iter().enumerate() {
            if i != best && ((v - target).abs() - best_d).abs() <= T::tie_tol() {
                return Err(Error::TieForMtd(best.min(i) + 1, best.max(i) + 1));
            }
        }
        Ok(Scenario { grid, f, target, true_mtd: Level(best), name: None })
    }

    pub fn named(self, name: impl Into<String>) -> Self {
        self.named_opt(Some(name.into()))
    }

    fn named_opt(mut self, name: Option<String>) -> Self {
        self.name = name;
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn grid(&self) -> &DoseGrid<T> {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.grid.levels()
    }

    pub fn f(&self) -> &[T] {
        &self.f
    }

    pub fn tox(&self, level: Level) -> T {
        self.f[level.index()]
    }

    pub fn target(&self) -> T {
        self.target
    }

    pub fn true_mtd(&self) -> Level {
        self.true_mtd
    }
}

pub(crate) fn check_target<T: Real>(target: T) -> Result<()> {
    if target > T::zero() && target < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidTarget(target.to_f64_lossy()))
    }
}

/// Toxicity occurs iff the patient's quantile threshold `q` does not exceed
/// the true toxicity probability at the assigned level.
pub fn toxicity_outcome<T: Real>(q: T, level: Level, scenario: &Scenario<T>) -> Result<bool> {
    scenario.grid.check(level)?;
    Ok(q <= scenario.tox(level))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    RandomDraw,
    PermutedFixedSet,
}

/// Per-patient toxicity thresholds on the quantile scale, consumed in
/// patient order.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdStream<T> {
    q: Vec<T>,
    provenance: Provenance,
}

impl<T: Real> ThresholdStream<T> {
    pub fn new(q: Vec<T>, provenance: Provenance) -> Result<Self> {
        if let Some(i) = q.iter().position(|&v| !(v > T::zero() && v < T::one())) {
            return Err(Error::OutOfRange { position: i + 1, value: q[i].to_f64_lossy() });
        }
        Ok(ThresholdStream { q, provenance })
    }

    /// `n` independent uniform thresholds.
    pub fn draw<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        let q = (0..n)
            .map(|_| loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break T::lit(u);
                }
            })
            .collect();
        ThresholdStream { q, provenance: Provenance::RandomDraw }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.q
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        ThresholdStream { q: order.iter().map(|&i| self.q[i]).collect(), provenance: self.provenance }
    }
}

/// One cohort: where it was treated, how many patients, how many DLTs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub level: Level,
    pub size: u32,
    pub dlts: u32,
}

impl CohortRecord {
    pub fn new(level: Level, size: u32, dlts: u32) -> Result<Self> {
        if size == 0 || dlts > size {
            return Err(Error::InvalidCounts { size, dlts });
        }
        Ok(CohortRecord { level, size, dlts })
    }
}

/// Chronological trial record with per-level tallies derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialState<T> {
    grid: DoseGrid<T>,
    target: T,
    cohorts: Vec<CohortRecord>,
    n: Vec<u32>,
    r: Vec<u32>,
}

impl<T: Real> TrialState<T> {
    pub fn new(grid: DoseGrid<T>, target: T) -> Result<Self> {
        check_target(target)?;
        let l = grid.levels();
        Ok(TrialState { grid, target, cohorts: Vec::new(), n: vec![0; l], r: vec![0; l] })
    }

    pub fn from_cohorts(grid: DoseGrid<T>, target: T, cohorts: impl IntoIterator<Item = CohortRecord>) -> Result<Self> {
        let mut s = Self::new(grid, target)?;
        for c in cohorts {
            s.push(c)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, cohort: CohortRecord) -> Result<()> {
        self.grid.check(cohort.level)?;
        if cohort.size == 0 || cohort.dlts > cohort.size {
            return Err(Error::InvalidCounts { size: cohort.size, dlts: cohort.dlts });
        }
        let u = cohort.level.index();
        self.n[u] += cohort.size;
        self.r[u] += cohort.dlts;
        self.cohorts.push(cohort);
        Ok(())
    }

    /// Convenience wrapper around [`TrialState::push`].
    pub fn record(&mut self, level: Level, size: u32, dlts: u32) -> Result<()> {
        self.push(CohortRecord::new(level, size, dlts)?)
    }

    /// The first `k` cohorts only.
    pub fn truncated(&self, k: usize) -> Self {
        let mut s = TrialState {
            grid: self.grid.clone(),
            target: self.target,
            cohorts: Vec::with_capacity(k),
            n: vec![0; self.levels()],
            r: vec![0; self.levels()],
        };
        for c in self.cohorts.iter().take(k) {
            s.push(*c).expect("already validated");
        }
        s
    }

    pub fn grid(&self) -> &DoseGrid<T> {
        &self.grid
    }

    pub fn levels(&self) -> usize {
        self.grid.levels()
    }

    pub fn target(&self) -> T {
        self.target
    }

    pub fn cohorts(&self) -> &[CohortRecord] {
        &self.cohorts
    }

    pub fn last(&self) -> Option<&CohortRecord> {
        self.cohorts.last()
    }

    pub fn current_level(&self) -> Option<Level> {
        self.last().map(|c| c.level)
    }

    pub fn n_at(&self, level: Level) -> u32 {
        self.n[level.index()]
    }

    pub fn dlts_at(&self, level: Level) -> u32 {
        self.r[level.index()]
    }

    pub fn n(&self) -> &[u32] {
        &self.n
    }

    pub fn r(&self) -> &[u32] {
        &self.r
    }

    /// Observed toxicity rate `R_u / n_u`, defined only where `n_u > 0`.
    pub fn rate(&self, level: Level) -> Option<T> {
        let n = self.n_at(level);
        (n > 0).then(|| T::from_u32(self.dlts_at(level)).unwrap() / T::from_u32(n).unwrap())
    }

    pub fn patients(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.r.iter().sum()
    }

    /// Cohorts given at `level` so far.
    pub fn cohorts_at(&self, level: Level) -> usize {
        self.cohorts.iter().filter(|c| c.level == level).count()
    }
}
