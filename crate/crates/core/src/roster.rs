//! Decoded duty lists, the roster output schema, and objective recomputation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Cost, Instance, Minutes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    SignIn,
    Train,
    Rest,
    Meal,
    Idle,
    Deadhead,
    SignOut,
}

/// One action of a duty list, in the roster file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub arc_kind: StepKind,
    pub day: u32,
    pub duty: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub line: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<String>,
    pub t_from: Minutes,
    pub t_to: Minutes,
    pub depot_from: String,
    pub depot_to: String,
}

impl PathStep {
    pub fn duration(&self) -> Minutes {
        self.t_to - self.t_from
    }
}

/// A crew member's plan for the horizon: empty for an off-work member.
pub type DutyList = Vec<PathStep>;

/// Lines a duty list requires, from its train and deadhead steps. Deadhead
/// lines come from the owning lines of the boarding and alighting depots.
pub fn requirement_lines(steps: &DutyList, instance: &Instance) -> BTreeSet<String> {
    let mut lines = BTreeSet::new();
    for step in steps {
        match step.arc_kind {
            StepKind::Train => {
                if let Some(l) = &step.line {
                    lines.insert(l.clone());
                }
            }
            StepKind::Deadhead => {
                for depot in [&step.depot_from, &step.depot_to] {
                    if let Some(l) = instance.depot_line(depot) {
                        lines.insert(l.id.clone());
                    }
                }
            }
            _ => {}
        }
    }
    lines
}

/// Task ids served by the duty list.
pub fn covered_tasks(steps: &DutyList) -> BTreeSet<String> {
    steps
        .iter()
        .filter(|s| s.arc_kind == StepKind::Train)
        .filter_map(|s| s.task.clone())
        .collect()
}

/// Sign-in/out depot events; each event is a separate preference check.
pub fn depot_events(steps: &DutyList) -> Vec<String> {
    steps
        .iter()
        .filter(|s| matches!(s.arc_kind, StepKind::SignIn | StepKind::SignOut))
        .map(|s| match s.arc_kind {
            StepKind::SignIn => s.depot_from.clone(),
            _ => s.depot_to.clone(),
        })
        .collect()
}

/// Labor cost of a duty list: working minutes at c_w, everything else at c_r.
pub fn labor_cost(steps: &DutyList, instance: &Instance) -> Cost {
    let p = &instance.params;
    steps
        .iter()
        .map(|s| match s.arc_kind {
            StepKind::Train => p.c_w * s.duration() as Cost,
            _ => p.c_r * s.duration() as Cost,
        })
        .sum()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub obj: Cost,
    pub labor: Cost,
    pub cancel: Cost,
    pub preference: Cost,
}

/// Assignment of one duty list per crew member.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    pub assignments: BTreeMap<String, DutyList>,
    pub objective: Option<ObjectiveBreakdown>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RosterEntry {
    crew_id: String,
    path: DutyList,
    cost: Cost,
}

impl Roster {
    pub fn covered_task_multiset(&self) -> BTreeMap<String, u32> {
        let mut counts = BTreeMap::new();
        for steps in self.assignments.values() {
            for task in covered_tasks(steps) {
                *counts.entry(task).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Fraction of instance tasks served at least once.
    pub fn coverage(&self, instance: &Instance) -> f64 {
        if instance.tasks.is_empty() {
            return 1.0;
        }
        let covered = self.covered_task_multiset();
        let n = instance
            .tasks
            .iter()
            .filter(|t| covered.contains_key(&t.id))
            .count();
        n as f64 / instance.tasks.len() as f64
    }

    pub fn to_json(&self, instance: &Instance) -> String {
        let entries: Vec<RosterEntry> = self
            .assignments
            .iter()
            .map(|(crew_id, path)| {
                let member = instance.crew.iter().find(|c| &c.id == crew_id);
                let pref = member
                    .map(|m| {
                        depot_events(path)
                            .iter()
                            .filter(|d| !m.preferred_depots.contains(*d))
                            .count() as Cost
                            * instance.params.lambda_o
                    })
                    .unwrap_or(0.0);
                RosterEntry {
                    crew_id: crew_id.clone(),
                    path: path.clone(),
                    cost: labor_cost(path, instance) + pref,
                }
            })
            .collect();
        serde_json::to_string_pretty(&entries).expect("roster serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let entries: Vec<RosterEntry> = serde_json::from_str(text)?;
        Ok(Roster {
            assignments: entries.into_iter().map(|e| (e.crew_id, e.path)).collect(),
            objective: None,
        })
    }
}

/// Recomputes the planning objective from scratch: labor plus uncovered
/// cancel penalties plus depot-preference penalties.
pub fn total_objective(instance: &Instance, roster: &Roster) -> ObjectiveBreakdown {
    let mut labor = 0.0;
    let mut preference = 0.0;
    for (crew_id, steps) in &roster.assignments {
        labor += labor_cost(steps, instance);
        if let Some(member) = instance.crew.iter().find(|c| &c.id == crew_id) {
            for depot in depot_events(steps) {
                if !member.preferred_depots.contains(&depot) {
                    preference += instance.params.lambda_o;
                }
            }
        }
    }
    let covered = roster.covered_task_multiset();
    let cancel: Cost = instance
        .tasks
        .iter()
        .filter(|t| !covered.contains_key(&t.id))
        .map(|t| t.cancel_penalty)
        .sum();
    ObjectiveBreakdown {
        obj: labor + cancel + preference,
        labor,
        cancel,
        preference,
    }
}
