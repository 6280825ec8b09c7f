//! Trial sessions: configuration, cohort steps and the event log they
//! replay from. Every number comes from the `dosefind` crate.

use dosefind::designs::{DecisionDetail, FittedCurve};
use dosefind::seed::{stream, StreamKind};
use dosefind::simulator::{compute_metrics, Trajectory};
use dosefind::{CohortRecord, Design, DesignAction, DesignConfig, DoseGrid, Level, TrialState};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// Interpolation points returned with a fitted curve.
pub const CURVE_POINTS: usize = 50;

fn default_target() -> f64 {
    0.3
}

fn default_start() -> usize {
    1
}

fn default_cohort_size() -> u32 {
    2
}

/// Body of `POST /trials`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub design: DesignConfig,
    /// Number of dose levels; implied by `doses` when those are given.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Dose values, strictly increasing. Default `u / levels`.
    #[serde(default)]
    pub doses: Option<Vec<f64>>,
    #[serde(default = "default_target")]
    pub target: f64,
    /// One-based starting level.
    #[serde(default = "default_start")]
    pub start: usize,
    /// Cohort size for designs that do not fix their own.
    #[serde(default = "default_cohort_size")]
    pub cohort_size: u32,
    /// Seed for randomized designs.
    #[serde(default)]
    pub seed: u64,
}

impl TrialConfig {
    fn grid(&self) -> Result<DoseGrid, ApiError> {
        let grid = match (&self.doses, self.levels) {
            (Some(d), Some(l)) if d.len() != l => {
                return Err(ApiError::bad_request(format!("{} doses for {l} levels", d.len())))
            }
            (Some(d), _) => DoseGrid::with_doses(d.clone()),
            (None, Some(l)) => DoseGrid::new(l),
            (None, None) => return Err(ApiError::bad_request("give levels or doses")),
        };
        grid.map_err(ApiError::bad_request)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Stopped,
}

/// What the design says after the data so far.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recommendation {
    /// Next level, absent once the design has stopped.
    pub level: Option<Level>,
    pub action: DesignAction,
    pub cohort_size: u32,
    pub detail: DecisionDetail,
    /// Current MTD estimate; absent before any data.
    pub mtd_estimate: Option<Level>,
}

/// Body of `POST /trials/{id}/cohorts` and `/whatif`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortInput {
    /// One-based level the cohort was treated at.
    pub level: usize,
    pub size: u32,
    pub dlts: u32,
}

/// Outcome of posting one cohort.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    /// One-based cohort number.
    pub cohort_number: usize,
    pub cohort: CohortRecord,
    /// The level had been recommended otherwise.
    pub overridden: bool,
    pub recommended_before: Option<Level>,
    pub recommendation: Recommendation,
    /// The new recommendation escalates after a DLT or de-escalates after
    /// a DLT-free cohort.
    pub coherence_warning: bool,
    /// Five identical consecutive assignments, not counting cohort 1.
    pub settled: bool,
    pub settling_cohort: Option<u32>,
    pub status: Status,
}

/// One line of the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created { id: String, config: TrialConfig, recommendation: serde_json::Value },
    Cohort { input: CohortInput, overridden: bool, recommendation: serde_json::Value },
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub config: TrialConfig,
    design: Design,
    state: TrialState,
    pub status: Status,
    pub recommendation: Recommendation,
    pub steps: Vec<Step>,
}

/// Full snapshot for `GET /trials/{id}`.
#[derive(Clone, Debug, Serialize)]
pub struct SessionView<'a> {
    pub id: &'a str,
    pub config: &'a TrialConfig,
    pub status: Status,
    pub levels: usize,
    pub doses: &'a [f64],
    pub target: f64,
    pub trajectory: &'a [CohortRecord],
    /// Patients and DLTs per level.
    pub n: &'a [u32],
    pub dlts: &'a [u32],
    pub recommendation: &'a Recommendation,
    pub steps: &'a [Step],
    pub fit: Option<FittedCurve<f64>>,
}

impl Session {
    pub fn create(id: String, config: TrialConfig) -> Result<Self, ApiError> {
        let grid = config.grid()?;
        let design = config.design.build::<f64>(grid.levels(), config.target).map_err(ApiError::bad_request)?;
        if config.cohort_size == 0 {
            return Err(ApiError::bad_request("cohort size must be positive"));
        }
        let start = Level::from_number(config.start)
            .filter(|l| grid.check(*l).is_ok())
            .ok_or_else(|| ApiError::bad_request(format!("start level {} is not on the grid", config.start)))?;
        let state = TrialState::new(grid, config.target).map_err(ApiError::bad_request)?;
        let recommendation = Recommendation {
            level: Some(start),
            action: DesignAction::NextDose(start),
            cohort_size: design.cohort_size(config.cohort_size),
            detail: DecisionDetail::Plain,
            mtd_estimate: None,
        };
        Ok(Session { id, config, design, state, status: Status::Active, recommendation, steps: Vec::new() })
    }

    pub fn created_event(&self) -> Event {
        Event::Created {
            id: self.id.clone(),
            config: self.config.clone(),
            recommendation: to_value(&self.recommendation),
        }
    }

    pub fn state(&self) -> &TrialState {
        &self.state
    }

    /// Computes the result of posting `input` without changing the session.
    pub fn preview(&self, input: CohortInput) -> Result<(Step, TrialState), ApiError> {
        if self.status == Status::Stopped {
            return Err(ApiError::conflict("trial has stopped"));
        }
        let level = Level::from_number(input.level)
            .filter(|l| self.state.grid().check(*l).is_ok())
            .ok_or_else(|| ApiError::unprocessable(format!("level {} is not on the grid", input.level)))?;
        let cohort = CohortRecord::new(level, input.size, input.dlts).map_err(ApiError::unprocessable)?;
        let mut state = self.state.clone();
        state.push(cohort).map_err(ApiError::unprocessable)?;
        let k = state.cohorts().len();
        let mut rng = stream(self.config.seed, StreamKind::DesignDraws, k as u64);
        let decision = self.design.decide(&state, &mut rng).map_err(ApiError::from_core)?;
        let mtd_estimate = self.design.select_mtd(&state).map_err(ApiError::from_core)?;
        let (next, status) = match decision.action {
            DesignAction::NextDose(l) => (Some(l), Status::Active),
            DesignAction::Stop(_) => (None, Status::Stopped),
        };
        let coherence_warning = next.is_some_and(|n| (n > level && input.dlts > 0) || (n < level && input.dlts == 0));
        let traj = Trajectory {
            cohorts: state.cohorts().to_vec(),
            selected: None,
            selected_half: None,
            stopped_early: false,
            overrides: 0,
        };
        let settling_cohort = compute_metrics(&traj, level).settling_cohort;
        let recommendation = Recommendation {
            level: next,
            action: decision.action,
            cohort_size: self.design.cohort_size(self.config.cohort_size),
            detail: decision.detail,
            mtd_estimate,
        };
        let step = Step {
            cohort_number: k,
            cohort,
            overridden: self.recommendation.level != Some(level),
            recommended_before: self.recommendation.level,
            recommendation,
            coherence_warning,
            settled: settling_cohort.is_some(),
            settling_cohort,
            status,
        };
        Ok((step, state))
    }

    /// Applies a cohort and returns the step with its log event.
    pub fn commit(&mut self, input: CohortInput) -> Result<(Step, Event), ApiError> {
        let (step, state) = self.preview(input)?;
        let event =
            Event::Cohort { input, overridden: step.overridden, recommendation: to_value(&step.recommendation) };
        self.state = state;
        self.status = step.status;
        self.recommendation = step.recommendation.clone();
        self.steps.push(step.clone());
        Ok((step, event))
    }

    pub fn fit(&self) -> Result<Option<FittedCurve<f64>>, ApiError> {
        self.design.fitted_curve(&self.state, CURVE_POINTS).map_err(ApiError::from_core)
    }

    pub fn view(&self) -> Result<SessionView<'_>, ApiError> {
        Ok(SessionView {
            id: &self.id,
            config: &self.config,
            status: self.status,
            levels: self.state.levels(),
            doses: self.state.grid().doses(),
            target: self.state.target(),
            trajectory: self.state.cohorts(),
            n: self.state.n(),
            dlts: self.state.r(),
            recommendation: &self.recommendation,
            steps: &self.steps,
            fit: self.fit()?,
        })
    }

    /// Rebuilds a session from its log, checking that every logged
    /// recommendation is reproduced exactly.
    pub fn replay(events: impl IntoIterator<Item = Event>) -> Result<Self, ReplayError> {
        let mut events = events.into_iter();
        let Some(Event::Created { id, config, recommendation }) = events.next() else {
            return Err(ReplayError::Malformed("log does not start with a creation event".into()));
        };
        let mut s = Session::create(id, config).map_err(|e| ReplayError::Malformed(e.message))?;
        if to_value(&s.recommendation) != recommendation {
            return Err(ReplayError::Mismatch(0));
        }
        for (i, e) in events.enumerate() {
            let Event::Cohort { input, overridden, recommendation } = e else {
                return Err(ReplayError::Malformed(format!("second creation event at line {}", i + 2)));
            };
            let (step, _) = s.commit(input).map_err(|e| ReplayError::Malformed(e.message))?;
            if step.overridden != overridden || to_value(&step.recommendation) != recommendation {
                return Err(ReplayError::Mismatch(i + 1));
            }
        }
        Ok(s)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReplayError {
    #[error("malformed log: {0}")]
    Malformed(String),
    #[error("recommendation after cohort {0} differs from the log")]
    Mismatch(usize),
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("plain data serializes")
}
