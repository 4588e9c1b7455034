//! Event-sourced operator sessions.
//!
//! A session is an append-only log of [`SessionEvent`]s. [`SessionState`] is
//! rebuilt by folding [`apply_event`] over the log, so the log alone is the
//! source of truth and any prefix can be replayed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decision::{classify_severity, escalating_recommend, forced_shutdown, Recommendation, SeverityLayer};
use crate::distribution::DiscreteDistribution;
use crate::error::{InferenceError, SessionError};
use crate::evolution::{condition_on_no_ignition, project, steps_for, transition_matrix_for_level, LeakBelief};
use crate::inference::{aggregate, bayes_update_probs, posterior, Evidence};
use crate::scenario::{builtin_scenarios, AggregateState, FramingConstraints, ScenarioBundle};
use crate::voi::{build_plan, ContingentPlan, Heuristic};

const ADVANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "kebab-case")]
pub enum EventKind {
    SessionCreated {
        scenario_id: String,
        #[serde(default)]
        status_quo_level: usize,
    },
    Observation { node: String, outcome: String },
    TestResult { test_id: String, outcome: String },
    TimeAdvance { dt: f64 },
    LevelSet { level: usize },
    IgnitionReported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub timestamp: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedTest {
    pub seq: u64,
    pub test_id: String,
    pub outcome: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelChange {
    pub seq: u64,
    pub level: usize,
    pub time: f64,
}

/// One point of the risk profile, taken after each event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub seq: u64,
    pub time: f64,
    pub kind: String,
    /// Probability of ignition within the shortest decision horizon if the
    /// status quo is kept, given no ignition so far.
    pub ignition_prob: f64,
    /// Ignited mass accumulated since the last test result.
    pub ignited_mass: f64,
    pub status_quo_level: usize,
    pub severity: SeverityLayer,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub scenario_id: String,
    pub last_seq: u64,
    pub clock: f64,
    pub status_quo_level: usize,
    pub evidence: Evidence,
    pub test_results: Vec<RecordedTest>,
    pub levels: Vec<LevelChange>,
    pub ignition_evident: bool,
    /// Posterior over the detailed real state given the evidence.
    pub detailed: DiscreteDistribution,
    /// Four-state belief at `clock`, before conditioning on no ignition.
    pub belief: LeakBelief,
    /// Aggregate belief at `clock` given no ignition so far.
    pub diagnosis: DiscreteDistribution,
    pub severity: SeverityLayer,
    pub profile: Vec<ProfilePoint>,
}

impl SessionState {
    pub fn next_seq(&self) -> u64 {
        self.last_seq + 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session state serializes")
    }
}

/// Folds one event into the state. `state` is `None` before the
/// session-created event.
pub fn apply_event(
    state: Option<&SessionState>,
    event: &SessionEvent,
    bundle: &ScenarioBundle,
) -> Result<SessionState, SessionError> {
    let Some(prev) = state else {
        return create(event, bundle);
    };
    if event.seq != prev.next_seq() {
        return Err(SessionError::OutOfOrder {
            expected: prev.next_seq(),
            found: event.seq,
        });
    }
    if !(event.timestamp >= prev.clock) || !event.timestamp.is_finite() {
        return Err(SessionError::TimeRegression {
            clock: prev.clock,
            found: event.timestamp,
        });
    }
    let mut next = prev.clone();
    next.last_seq = event.seq;
    next.clock = event.timestamp;
    match &event.kind {
        EventKind::SessionCreated { .. } => return Err(SessionError::AlreadyCreated),
        EventKind::Observation { node, outcome } => {
            next.evidence.insert(node.clone(), outcome.clone());
            next.evidence.resolve(&bundle.network)?;
        }
        EventKind::TestResult { test_id, outcome } => {
            let test = bundle
                .test(test_id)
                .ok_or_else(|| SessionError::UnknownTest(test_id.clone()))?;
            if test.outcome_index(outcome).is_none() {
                return Err(SessionError::UnknownTestOutcome {
                    test: test_id.clone(),
                    outcome: outcome.clone(),
                });
            }
            next.test_results.push(RecordedTest {
                seq: event.seq,
                test_id: test_id.clone(),
                outcome: outcome.clone(),
                time: event.timestamp,
            });
        }
        EventKind::TimeAdvance { dt } => {
            if !(*dt >= 0.0) || !dt.is_finite() {
                return Err(SessionError::InvalidAdvance(*dt));
            }
            let expected = prev.clock + dt;
            if (event.timestamp - expected).abs() > ADVANCE_TOLERANCE * expected.abs().max(1.0) {
                return Err(SessionError::AdvanceMismatch {
                    expected,
                    found: event.timestamp,
                });
            }
        }
        EventKind::LevelSet { level } => {
            if *level >= bundle.level_count() {
                return Err(SessionError::InvalidLevel(*level));
            }
            next.status_quo_level = *level;
            next.levels.push(LevelChange {
                seq: event.seq,
                level: *level,
                time: event.timestamp,
            });
        }
        EventKind::IgnitionReported => next.ignition_evident = true,
    }
    refresh(&mut next, bundle)?;
    push_profile(&mut next, event, bundle)?;
    Ok(next)
}

fn create(event: &SessionEvent, bundle: &ScenarioBundle) -> Result<SessionState, SessionError> {
    let EventKind::SessionCreated {
        scenario_id,
        status_quo_level,
    } = &event.kind
    else {
        return Err(SessionError::NotCreated);
    };
    if event.seq != 1 {
        return Err(SessionError::OutOfOrder {
            expected: 1,
            found: event.seq,
        });
    }
    if *scenario_id != bundle.id {
        return Err(SessionError::UnknownScenario(scenario_id.clone()));
    }
    if *status_quo_level >= bundle.level_count() {
        return Err(SessionError::InvalidLevel(*status_quo_level));
    }
    if !(event.timestamp >= 0.0) || !event.timestamp.is_finite() {
        return Err(SessionError::TimeRegression {
            clock: 0.0,
            found: event.timestamp,
        });
    }
    let prior = DiscreteDistribution::indicator(["none"], 0).expect("placeholder");
    let mut state = SessionState {
        scenario_id: scenario_id.clone(),
        last_seq: event.seq,
        clock: event.timestamp,
        status_quo_level: *status_quo_level,
        evidence: Evidence::new(),
        test_results: Vec::new(),
        levels: vec![LevelChange {
            seq: event.seq,
            level: *status_quo_level,
            time: event.timestamp,
        }],
        ignition_evident: false,
        detailed: prior.clone(),
        belief: LeakBelief::indicator(crate::evolution::LeakState::None),
        diagnosis: prior,
        severity: SeverityLayer::Normal,
        profile: Vec::new(),
    };
    refresh(&mut state, bundle)?;
    push_profile(&mut state, event, bundle)?;
    Ok(state)
}

enum Mark<'a> {
    Level(usize),
    Test(&'a RecordedTest),
}

/// Recomputes the belief cache from the evidence, the level timeline and
/// the test results.
///
/// The evidence describes the state at session start. The belief is then
/// carried forward step by step under whichever level was in force, and
/// each test result, being observed, rules out ignition before it and
/// updates the leak states at the time it was recorded.
fn refresh(state: &mut SessionState, bundle: &ScenarioBundle) -> Result<(), SessionError> {
    let net = &bundle.network;
    state.detailed = posterior(net, &state.evidence, &net.real_state_node)?;
    let start = aggregate(&state.detailed, &bundle.aggregation)?;
    let mut belief = LeakBelief::from_aggregate(&start)?;

    let mut marks: Vec<(f64, u64, Mark)> = state
        .levels
        .iter()
        .map(|l| (l.time, l.seq, Mark::Level(l.level)))
        .chain(state.test_results.iter().map(|t| (t.time, t.seq, Mark::Test(t))))
        .collect();
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let step = bundle.transitions.step_duration;
    let origin = state.levels.first().map_or(0.0, |l| l.time);
    let mut level = state.levels.first().map_or(0, |l| l.level);
    let mut elapsed_steps = 0u64;
    let mut advance = |belief: &mut LeakBelief, level: usize, time: f64| -> Result<(), SessionError> {
        let target = steps_for(time - origin, step);
        if target > elapsed_steps {
            let matrix = transition_matrix_for_level(&bundle.transitions, level)?;
            *belief = project(belief, &matrix, target - elapsed_steps);
            elapsed_steps = target;
        }
        Ok(())
    };
    for (time, _, mark) in &marks {
        advance(&mut belief, level, *time)?;
        match mark {
            Mark::Level(l) => level = *l,
            Mark::Test(t) => {
                let test = bundle
                    .test(&t.test_id)
                    .ok_or_else(|| SessionError::UnknownTest(t.test_id.clone()))?;
                let column = test.likelihood_column(test.outcome_index(&t.outcome).unwrap_or(0));
                let conditioned = condition_on_no_ignition(&belief)?;
                let updated = bayes_update_probs(&conditioned.leak_part(), &column)
                    .map_err(|e| match e {
                        InferenceError::ZeroProbabilityOutcome => InferenceError::ZeroProbabilityEvidence,
                        other => other,
                    })?;
                belief = LeakBelief([updated[0], updated[1], updated[2], 0.0]);
            }
        }
    }
    advance(&mut belief, level, state.clock)?;

    state.belief = belief;
    state.diagnosis = if belief.ignited() == 0.0 {
        // Already a distribution over the leak states; renormalizing would
        // only perturb the last bits.
        DiscreteDistribution::new(AggregateState::labels(), belief.leak_part().to_vec())
            .map_err(crate::error::EvolutionError::from)?
    } else {
        condition_on_no_ignition(&belief)?.to_aggregate()?
    };
    state.severity = classify_severity(&state.diagnosis, state.ignition_evident, &bundle.value.severity);
    Ok(())
}

fn push_profile(state: &mut SessionState, event: &SessionEvent, bundle: &ScenarioBundle) -> Result<(), SessionError> {
    let ignition_prob = if state.ignition_evident {
        1.0
    } else {
        forward_risk(state, bundle)?
    };
    let kind = serde_json::to_value(&event.kind)?
        .get("kind")
        .and_then(|k| k.as_str())
        .unwrap_or_default()
        .to_owned();
    state.profile.push(ProfilePoint {
        seq: event.seq,
        time: state.clock,
        kind,
        ignition_prob,
        ignited_mass: state.belief.ignited(),
        status_quo_level: state.status_quo_level,
        severity: state.severity,
        response: state.severity.response().to_owned(),
    });
    Ok(())
}

fn forward_risk(state: &SessionState, bundle: &ScenarioBundle) -> Result<f64, SessionError> {
    let matrix = transition_matrix_for_level(&bundle.transitions, state.status_quo_level)?;
    let now = LeakBelief::from_aggregate(&state.diagnosis)?;
    let horizon = bundle.value.horizons.first().copied().unwrap_or(0.0);
    Ok(project(&now, &matrix, matrix.steps_for(horizon)).ignited())
}

/// Folds a whole log, starting from nothing.
pub fn replay(events: &[SessionEvent], bundle: &ScenarioBundle) -> Result<SessionState, SessionError> {
    replay_from(None, events, bundle)?.ok_or(SessionError::NotCreated)
}

/// Folds `events` on top of a snapshot.
pub fn replay_from(
    snapshot: Option<SessionState>,
    events: &[SessionEvent],
    bundle: &ScenarioBundle,
) -> Result<Option<SessionState>, SessionError> {
    let mut state = snapshot;
    for event in events {
        state = Some(apply_event(state.as_ref(), event, bundle)?);
    }
    Ok(state)
}

/// Scenario bundles a session may refer to, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct ScenarioCatalog(BTreeMap<String, Arc<ScenarioBundle>>);

impl ScenarioCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut catalog = Self::new();
        for bundle in builtin_scenarios() {
            catalog.insert(bundle);
        }
        catalog
    }

    pub fn insert(&mut self, bundle: ScenarioBundle) {
        self.0.insert(bundle.id.clone(), Arc::new(bundle));
    }

    pub fn get(&self, id: &str) -> Option<Arc<ScenarioBundle>> {
        self.0.get(id).cloned()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// Diagnosis view of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisView {
    pub seq: u64,
    pub clock: f64,
    pub detailed: DiscreteDistribution,
    pub aggregate: DiscreteDistribution,
    pub belief: LeakBelief,
    pub ignition_evident: bool,
    pub severity: SeverityLayer,
    pub response: String,
}

/// An event checked against a session but not yet appended to it.
#[derive(Debug, Clone)]
pub struct Pending {
    event: SessionEvent,
    state: SessionState,
}

impl Pending {
    pub fn event(&self) -> &SessionEvent {
        &self.event
    }
}

/// A live session: its log, the replayed state and the scenario it runs on.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    bundle: Arc<ScenarioBundle>,
    events: Vec<SessionEvent>,
    state: SessionState,
}

impl Session {
    pub fn create(id: impl Into<String>, bundle: Arc<ScenarioBundle>, status_quo_level: usize) -> Result<Self, SessionError> {
        let event = SessionEvent {
            seq: 1,
            timestamp: 0.0,
            kind: EventKind::SessionCreated {
                scenario_id: bundle.id.clone(),
                status_quo_level,
            },
        };
        let state = apply_event(None, &event, &bundle)?;
        Ok(Self {
            id: id.into(),
            bundle,
            events: vec![event],
            state,
        })
    }

    /// Rebuilds a session from its log.
    pub fn from_events(id: impl Into<String>, events: Vec<SessionEvent>, catalog: &ScenarioCatalog) -> Result<Self, SessionError> {
        let Some(SessionEvent {
            kind: EventKind::SessionCreated { scenario_id, .. },
            ..
        }) = events.first()
        else {
            return Err(SessionError::NotCreated);
        };
        let bundle = catalog
            .get(scenario_id)
            .ok_or_else(|| SessionError::UnknownScenario(scenario_id.clone()))?;
        let state = replay(&events, &bundle)?;
        Ok(Self {
            id: id.into(),
            bundle,
            events,
            state,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn bundle(&self) -> &ScenarioBundle {
        &self.bundle
    }

    /// Builds the next event for `kind` without applying it. Time advances
    /// are stamped at `clock + dt`, everything else at `clock`.
    pub fn next_event(&self, kind: EventKind) -> SessionEvent {
        let timestamp = match &kind {
            EventKind::TimeAdvance { dt } => self.state.clock + dt,
            _ => self.state.clock,
        };
        SessionEvent {
            seq: self.state.next_seq(),
            timestamp,
            kind,
        }
    }

    /// Validates and applies an event; the session is unchanged on error.
    pub fn apply(&mut self, event: SessionEvent) -> Result<&SessionEvent, SessionError> {
        self.state = apply_event(Some(&self.state), &event, &self.bundle)?;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn record(&mut self, kind: EventKind) -> Result<&SessionEvent, SessionError> {
        let event = self.next_event(kind);
        self.apply(event)
    }

    /// Validates the next event without changing the session, so it can be
    /// persisted before [`Session::commit`].
    pub fn prepare(&self, kind: EventKind) -> Result<Pending, SessionError> {
        let event = self.next_event(kind);
        let state = apply_event(Some(&self.state), &event, &self.bundle)?;
        Ok(Pending { event, state })
    }

    pub fn commit(&mut self, pending: Pending) -> Result<&SessionEvent, SessionError> {
        if pending.event.seq != self.state.next_seq() {
            return Err(SessionError::Conflict {
                expected: pending.event.seq - 1,
                current: self.state.last_seq,
            });
        }
        self.state = pending.state;
        self.events.push(pending.event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn diagnosis(&self) -> DiagnosisView {
        let s = &self.state;
        DiagnosisView {
            seq: s.last_seq,
            clock: s.clock,
            detailed: s.detailed.clone(),
            aggregate: s.diagnosis.clone(),
            belief: s.belief,
            ignition_evident: s.ignition_evident,
            severity: s.severity,
            response: s.severity.response().to_owned(),
        }
    }

    /// Escalating recommendation from the current belief, or the forced
    /// shutdown once ignition has been reported.
    pub fn recommendation(&self) -> Result<Recommendation, SessionError> {
        if self.state.ignition_evident {
            return Ok(forced_shutdown(&self.bundle));
        }
        Ok(escalating_recommend(
            &self.state.diagnosis,
            0.0,
            self.state.status_quo_level,
            &self.bundle,
        )?)
    }

    pub fn plan(&self, constraints: Option<&FramingConstraints>, heuristic: Heuristic) -> Result<ContingentPlan, SessionError> {
        if self.state.ignition_evident {
            return Err(SessionError::IgnitionEvident);
        }
        let constraints = constraints.unwrap_or(&self.bundle.constraints_default);
        Ok(build_plan(
            &self.bundle,
            &self.state.diagnosis,
            self.state.status_quo_level,
            constraints,
            heuristic,
        )?)
    }

    pub fn profile(&self) -> &[ProfilePoint] {
        &self.state.profile
    }
}

/// Reads a JSONL event log, skipping blank lines.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<SessionEvent>, SessionError> {
    let mut events = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line)?);
    }
    Ok(events)
}

pub fn write_jsonl<W: Write>(mut writer: W, events: &[SessionEvent]) -> Result<(), SessionError> {
    for event in events {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Directory of `<session-id>.jsonl` logs.
#[derive(Debug, Clone)]
pub struct EventLog {
    dir: PathBuf,
}

impl EventLog {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn append(&self, id: &str, event: &SessionEvent) -> Result<(), SessionError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.path(id))?;
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }

    pub fn read(&self, id: &str) -> Result<Vec<SessionEvent>, SessionError> {
        let file = File::open(self.path(id)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SessionError::UnknownSession(id.to_owned()),
            _ => e.into(),
        })?;
        read_jsonl(BufReader::new(file))
    }

    /// Ids of every stored session, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, SessionError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_desk_alarm, builtin_gas_compressor};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn desk_session() -> Session {
        Session::create("d", Arc::new(builtin_desk_alarm()), 0).unwrap()
    }

    #[test]
    fn created_session_holds_prior() {
        let s = Session::create("g", Arc::new(builtin_gas_compressor()), 0).unwrap();
        assert!(close(s.state().diagnosis.probs(), &[0.90, 0.08, 0.02], 1e-12));
        assert_eq!(s.state().belief.ignited(), 0.0);
        assert_eq!(s.state().severity, SeverityLayer::Intermediate);
    }

    #[test]
    fn alarm_on_desk_network() {
        let mut s = desk_session();
        s.record(EventKind::Observation {
            node: "alarm".into(),
            outcome: "alarm".into(),
        })
        .unwrap();
        let b = s.state().belief.0;
        assert!(close(&b, &[0.375, 0.4667, 0.1583, 0.0], 1e-4), "{b:?}");
    }

    #[test]
    fn event_json_shape() {
        let e = SessionEvent {
            seq: 3,
            timestamp: 5.0,
            kind: EventKind::Observation {
                node: "alarm".into(),
                outcome: "alarm".into(),
            },
        };
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(
            text,
            r#"{"seq":3,"timestamp":5.0,"kind":"observation","payload":{"node":"alarm","outcome":"alarm"}}"#
        );
        assert_eq!(serde_json::from_str::<SessionEvent>(&text).unwrap(), e);
        let ign = SessionEvent {
            seq: 4,
            timestamp: 5.0,
            kind: EventKind::IgnitionReported,
        };
        let text = serde_json::to_string(&ign).unwrap();
        assert_eq!(serde_json::from_str::<SessionEvent>(&text).unwrap(), ign);
    }

    #[test]
    fn rejects_bad_events() {
        let s = desk_session();
        let bundle = builtin_desk_alarm();
        let mut e = s.next_event(EventKind::TimeAdvance { dt: 5.0 });
        e.seq = 7;
        assert!(matches!(
            apply_event(Some(s.state()), &e, &bundle),
            Err(SessionError::OutOfOrder { expected: 2, found: 7 })
        ));

        let mut s2 = s.clone();
        s2.record(EventKind::TimeAdvance { dt: 10.0 }).unwrap();
        let mut back = s2.next_event(EventKind::LevelSet { level: 1 });
        back.timestamp = 3.0;
        assert!(matches!(s2.apply(back), Err(SessionError::TimeRegression { .. })));
        assert_eq!(s2.state().last_seq, 2);

        let mut s3 = s.clone();
        for kind in [
            EventKind::Observation { node: "ghost".into(), outcome: "x".into() },
            EventKind::Observation { node: "alarm".into(), outcome: "loud".into() },
            EventKind::Observation { node: "leak".into(), outcome: "none".into() },
            EventKind::TestResult { test_id: "ghost".into(), outcome: "x".into() },
            EventKind::TestResult { test_id: "walkdown".into(), outcome: "x".into() },
            EventKind::TimeAdvance { dt: -1.0 },
            EventKind::LevelSet { level: 9 },
            EventKind::SessionCreated { scenario_id: "desk-alarm".into(), status_quo_level: 0 },
        ] {
            assert!(s3.record(kind.clone()).is_err(), "{kind:?}");
        }
        assert_eq!(s3.state(), s.state());

        let pending = s3.prepare(EventKind::TimeAdvance { dt: 1.0 }).unwrap();
        assert_eq!(s3.state().last_seq, 1);
        let mut raced = s3.clone();
        raced.record(EventKind::LevelSet { level: 1 }).unwrap();
        assert!(matches!(raced.commit(pending.clone()), Err(SessionError::Conflict { .. })));
        assert_eq!(s3.commit(pending).unwrap().seq, 2);
        let mut s3 = s.clone();

        let mut skewed = s.next_event(EventKind::TimeAdvance { dt: 5.0 });
        skewed.timestamp = 6.0;
        assert!(matches!(s3.apply(skewed), Err(SessionError::AdvanceMismatch { .. })));

        let not_created = SessionEvent { seq: 1, timestamp: 0.0, kind: EventKind::IgnitionReported };
        assert!(matches!(apply_event(None, &not_created, &bundle), Err(SessionError::NotCreated)));
    }

    #[test]
    fn projection_matches_direct_evolution() {
        let bundle = builtin_gas_compressor();
        let mut s = Session::create("g", Arc::new(bundle.clone()), 0).unwrap();
        s.record(EventKind::TimeAdvance { dt: 12.0 }).unwrap();
        s.record(EventKind::LevelSet { level: 2 }).unwrap();
        s.record(EventKind::TimeAdvance { dt: 9.0 }).unwrap();
        // 12 -> 3 steps at level 0; 21 -> 5 steps in total, 2 at level 2.
        let m0 = transition_matrix_for_level(&bundle.transitions, 0).unwrap();
        let m2 = transition_matrix_for_level(&bundle.transitions, 2).unwrap();
        let start = LeakBelief([0.90, 0.08, 0.02, 0.0]);
        let mut expected = start;
        for _ in 0..3 {
            expected = m0.step(&expected);
        }
        for _ in 0..2 {
            expected = m2.step(&expected);
        }
        assert!(s.state().belief.max_abs_diff(&expected) < 1e-15);
        let mass: f64 = expected.leak_part().iter().sum();
        let cond: Vec<f64> = expected.leak_part().iter().map(|p| p / mass).collect();
        assert!(close(s.state().diagnosis.probs(), &cond, 1e-15));
    }

    #[test]
    fn test_result_updates_projected_belief() {
        let bundle = builtin_desk_alarm();
        let mut s = Session::create("d", Arc::new(bundle.clone()), 0).unwrap();
        s.record(EventKind::TimeAdvance { dt: 10.0 }).unwrap();
        s.record(EventKind::TestResult {
            test_id: "walkdown".into(),
            outcome: "leak_found".into(),
        })
        .unwrap();
        let m0 = transition_matrix_for_level(&bundle.transitions, 0).unwrap();
        let projected = m0.step(&m0.step(&LeakBelief([0.9, 0.08, 0.02, 0.0])));
        let alive: f64 = projected.leak_part().iter().sum();
        let row = [0.1, 0.7, 0.95];
        let joint: Vec<f64> = projected.leak_part().iter().zip(row).map(|(b, l)| b / alive * l).collect();
        let z: f64 = joint.iter().sum();
        let expected: Vec<f64> = joint.iter().map(|j| j / z).collect();
        assert!(close(s.state().diagnosis.probs(), &expected, 1e-12));
        assert_eq!(s.state().belief.ignited(), 0.0);
    }

    #[test]
    fn evidence_is_order_free() {
        let bundle = Arc::new(builtin_gas_compressor());
        let obs = [("ld_a", "alarm"), ("pd_b", "low"), ("manual_inspection", "leak_sighted")];
        let mut a = Session::create("a", bundle.clone(), 0).unwrap();
        let mut b = Session::create("b", bundle, 0).unwrap();
        for (n, o) in obs {
            a.record(EventKind::Observation { node: n.into(), outcome: o.into() }).unwrap();
        }
        for (n, o) in obs.iter().rev() {
            b.record(EventKind::Observation { node: n.to_string(), outcome: o.to_string() }).unwrap();
        }
        assert!(close(a.state().diagnosis.probs(), b.state().diagnosis.probs(), 1e-12));
    }

    #[test]
    fn replay_and_snapshot() {
        let catalog = ScenarioCatalog::builtin();
        let mut s = Session::create("g", catalog.get("gas-compressor").unwrap(), 0).unwrap();
        s.record(EventKind::Observation { node: "ld_a".into(), outcome: "alarm".into() }).unwrap();
        s.record(EventKind::TimeAdvance { dt: 7.5 }).unwrap();
        s.record(EventKind::TestResult { test_id: "gas_sniffer_survey".into(), outcome: "gas_detected".into() }).unwrap();
        s.record(EventKind::LevelSet { level: 1 }).unwrap();
        s.record(EventKind::TimeAdvance { dt: 20.0 }).unwrap();
        s.record(EventKind::IgnitionReported).unwrap();

        let again = Session::from_events("g", s.events().to_vec(), &catalog).unwrap();
        assert_eq!(again.state().to_json(), s.state().to_json());

        let bundle = catalog.get("gas-compressor").unwrap();
        for cut in 1..s.events().len() {
            let snap = replay(&s.events()[..cut], &bundle).unwrap();
            let rest = replay_from(Some(snap), &s.events()[cut..], &bundle).unwrap().unwrap();
            assert_eq!(rest.to_json(), s.state().to_json());
        }
        assert_eq!(s.profile().len(), s.events().len());
        assert_eq!(s.profile().last().unwrap().severity, SeverityLayer::High);
        assert!(s.recommendation().unwrap().forced);
        assert!(matches!(s.plan(None, Heuristic::HighestEvPath), Err(SessionError::IgnitionEvident)));
    }

    #[test]
    fn views_match_library_calls() {
        let bundle = builtin_gas_compressor();
        let mut s = Session::create("g", Arc::new(bundle.clone()), 0).unwrap();
        s.record(EventKind::Observation { node: "pd_a".into(), outcome: "low".into() }).unwrap();
        let ev = Evidence::new().with("pd_a", "low");
        let d = aggregate(&posterior(&bundle.network, &ev, "leak_state").unwrap(), &bundle.aggregation).unwrap();
        assert_eq!(s.diagnosis().aggregate, d);
        assert_eq!(s.recommendation().unwrap(), escalating_recommend(&d, 0.0, 0, &bundle).unwrap());
        let c = FramingConstraints { expansion_budget: 1, ..bundle.constraints_default.clone() };
        let direct = build_plan(&bundle, &d, 0, &c, Heuristic::HighestEvPath).unwrap();
        let via = s.plan(Some(&c), Heuristic::HighestEvPath).unwrap();
        assert_eq!(serde_json::to_string(&via).unwrap(), serde_json::to_string(&direct).unwrap());
    }

    #[test]
    fn profile_risk_tracks_level() {
        let mut s = Session::create("g", Arc::new(builtin_gas_compressor()), 0).unwrap();
        s.record(EventKind::Observation { node: "ld_a".into(), outcome: "alarm".into() }).unwrap();
        let before = s.profile().last().unwrap().ignition_prob;
        s.record(EventKind::LevelSet { level: 3 }).unwrap();
        let after = s.profile().last().unwrap().ignition_prob;
        assert!(after < before && after > 0.0);
    }

    #[test]
    fn jsonl_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let log = EventLog::open(dir.path()).unwrap();
        let mut s = desk_session();
        s.record(EventKind::Observation { node: "alarm".into(), outcome: "alarm".into() }).unwrap();
        s.record(EventKind::TimeAdvance { dt: 3.0 }).unwrap();
        for e in s.events() {
            log.append("d", e).unwrap();
        }
        assert_eq!(log.read("d").unwrap(), s.events());
        assert_eq!(log.session_ids().unwrap(), vec!["d".to_owned()]);
        assert!(matches!(log.read("nope"), Err(SessionError::UnknownSession(_))));
        let text = fs::read_to_string(log.path("d")).unwrap();
        assert_eq!(text.lines().count(), 3);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, s.events()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }
}
