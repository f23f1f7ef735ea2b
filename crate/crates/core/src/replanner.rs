//! Disruption replanning. A passenger surge on one line replaces the
//! timetable inside a window with short-headway urgent tasks carrying
//! raised penalties and multi-crew demand. Affected members are replanned
//! one at a time on a restricted subnetwork that starts at their exact
//! resumption point, longest remaining duty first, with task demands
//! decremented as suffixes claim them.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::htsn::{
    build_network, restrict_to_layer, restrict_to_resumption, ArcKind, HtsnError, NetworkView,
    ResumptionHint,
};
use crate::model::{Cost, Instance, Minutes, TrainTask};
use crate::pulse::{solve_cspp, ResourceLimits};
use crate::roster::{DutyList, ObjectiveBreakdown, PathStep, Roster, StepKind};

#[derive(Debug, Error)]
pub enum ReplanError {
    #[error(transparent)]
    Network(#[from] HtsnError),
    #[error("scenario invalid: {0}")]
    Scenario(String),
}

fn default_headway() -> Minutes {
    2
}
fn default_penalty_mult() -> f64 {
    3.0
}
fn default_theta() -> u32 {
    1
}

/// A surge disruption: from `t_bar` on `day`, scheduled tasks on `line`
/// departing inside `window` are withdrawn and regenerated at `headway`
/// with `penalty_mult` times the cancellation penalty and a per-task crew
/// demand of `theta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisruptionScenario {
    pub day: u32,
    pub t_bar: Minutes,
    pub line: String,
    pub window: (Minutes, Minutes),
    #[serde(default = "default_headway")]
    pub headway: Minutes,
    #[serde(default = "default_penalty_mult")]
    pub penalty_mult: f64,
    #[serde(default = "default_theta")]
    pub theta: u32,
}

/// Crew demand per task id; tasks absent require one member.
pub type DemandMap = BTreeMap<String, u32>;

#[derive(Debug, Clone, Serialize)]
pub struct ReplanMetrics {
    pub obj: Cost,
    pub coverage: f64,
    pub urgent_coverage: f64,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct ReplanOutcome {
    pub roster: Roster,
    pub metrics: ReplanMetrics,
    /// The post-disruption instance the roster is validated against.
    pub instance: Instance,
    pub demands: DemandMap,
    pub urgent: Vec<String>,
}

/// Rewrites the timetable for the scenario and returns the demand map and
/// the urgent task ids.
pub fn apply_disruption(
    instance: &Instance,
    scenario: &DisruptionScenario,
) -> Result<(Instance, DemandMap, Vec<String>), ReplanError> {
    let line = instance
        .line(&scenario.line)
        .ok_or_else(|| ReplanError::Scenario(format!("unknown line {}", scenario.line)))?
        .clone();
    if scenario.day >= instance.days {
        return Err(ReplanError::Scenario(format!("day {} out of range", scenario.day)));
    }
    if scenario.window.0 < scenario.t_bar || scenario.window.1 <= scenario.window.0 {
        return Err(ReplanError::Scenario("window must start at or after t_bar".into()));
    }
    if scenario.headway <= 0 || scenario.theta == 0 {
        return Err(ReplanError::Scenario("headway and theta must be positive".into()));
    }

    let mut rinst = instance.clone();
    rinst.tasks.retain(|t| {
        !(t.line == scenario.line
            && t.day == scenario.day
            && t.dep_time >= scenario.window.0
            && t.dep_time < scenario.window.1)
    });

    let base_penalty = instance.params.lambda_factor * line.run as f64;
    let mut demands = DemandMap::new();
    let mut urgent = Vec::new();
    for (dir, (from, to)) in [("ab", (0usize, 1usize)), ("ba", (1, 0))] {
        let mut dep = scenario.window.0;
        let mut idx = 0;
        while dep < scenario.window.1 {
            let id = format!("u-{}-d{}-{}-{:03}", line.id, scenario.day, dir, idx);
            rinst.tasks.push(TrainTask {
                id: id.clone(),
                line: line.id.clone(),
                day: scenario.day,
                dep_depot: line.depots[from].clone(),
                dep_time: dep,
                arr_depot: line.depots[to].clone(),
                arr_time: dep + line.run,
                cancel_penalty: scenario.penalty_mult * base_penalty,
            });
            demands.insert(id.clone(), scenario.theta);
            urgent.push(id);
            dep += scenario.headway;
            idx += 1;
        }
    }
    rinst
        .validate()
        .map_err(|e| ReplanError::Scenario(format!("disrupted instance invalid: {e}")))?;
    Ok((rinst, demands, urgent))
}

pub(crate) struct Candidate {
    pub(crate) id: String,
    pub(crate) duty: u32,
    pub(crate) frame_start: Minutes,
    /// None for members who sign in after the cut.
    pub(crate) hint: Option<ResumptionHint>,
    pub(crate) prefix: DutyList,
    pub(crate) meal_precharged: bool,
    pub(crate) deadhead_budget: u32,
}

pub(crate) fn classify(
    instance: &Instance,
    original: &Roster,
    scenario: &DisruptionScenario,
) -> Result<(Vec<Candidate>, Vec<Candidate>), ReplanError> {
    let t_bar = scenario.t_bar;
    let mut on_duty = Vec::new();
    let mut later = Vec::new();
    for (id, steps) in &original.assignments {
        let mut day_steps: Vec<&PathStep> =
            steps.iter().filter(|s| s.day == scenario.day).collect();
        if day_steps.is_empty() {
            continue;
        }
        day_steps.sort_by_key(|s| (s.t_from, s.t_to));
        let last = day_steps[day_steps.len() - 1];
        // Sign-out already started: nothing left to replan.
        if last.t_from <= t_bar {
            continue;
        }
        let duty = day_steps[0].duty;
        let frame_start = instance.frame(duty).start;
        let kept_deadheads = steps
            .iter()
            .filter(|s| {
                s.arc_kind == StepKind::Deadhead
                    && !(s.day == scenario.day && s.t_from >= t_bar)
            })
            .count() as u32;
        let deadhead_budget = instance.params.n_tf.saturating_sub(kept_deadheads);

        if day_steps[0].t_from >= t_bar {
            later.push(Candidate {
                id: id.clone(),
                duty,
                frame_start,
                hint: None,
                prefix: Vec::new(),
                meal_precharged: false,
                deadhead_budget,
            });
            continue;
        }
        let prefix: DutyList = day_steps
            .iter()
            .filter(|s| s.t_from < t_bar)
            .map(|s| (*s).clone())
            .collect();
        let active = prefix.last().expect("nonempty prefix");
        let line_id = active.line.clone().ok_or_else(|| {
            ReplanError::Scenario(format!("step without line context for {id}"))
        })?;
        let line_idx = instance
            .lines
            .iter()
            .position(|l| l.id == line_id)
            .ok_or_else(|| ReplanError::Scenario(format!("unknown line {line_id}")))? as u16;
        let depot_side = if instance.lines[line_idx as usize].depots[0] == active.depot_to {
            0u8
        } else {
            1u8
        };
        let after_task = if active.arc_kind == StepKind::Train {
            active.task.clone()
        } else {
            None
        };
        let meal_precharged = prefix_has_meal(&prefix, t_bar);
        let resume_t = active.t_to;
        on_duty.push(Candidate {
            id: id.clone(),
            duty,
            frame_start,
            hint: Some(ResumptionHint {
                day: scenario.day,
                duty,
                line: line_idx,
                t: resume_t,
                depot: depot_side,
                // Task index resolved against the rebuilt network later.
                after_task: after_task.map(|_| u32::MAX),
            }),
            prefix,
            meal_precharged,
            deadhead_budget,
        });
    }
    // Longest remaining duty first for members already on duty.
    let remaining = |c: &Candidate| {
        let resume = c.hint.as_ref().map(|h| h.t).unwrap_or(t_bar);
        c.frame_start + instance.params.duty_len - resume.max(t_bar)
    };
    on_duty.sort_by(|a, b| remaining(b).cmp(&remaining(a)).then(a.id.cmp(&b.id)));
    later.sort_by(|a, b| (a.frame_start, &a.id).cmp(&(b.frame_start, &b.id)));
    Ok((on_duty, later))
}

fn prefix_has_meal(prefix: &DutyList, t_bar: Minutes) -> bool {
    prefix
        .iter()
        .any(|s| s.arc_kind == StepKind::Meal && s.t_from < t_bar)
}

/// Fast path adjustment. With `allow_deadhead` false the restricted
/// searches cannot cross lines, the naive benchmark variant.
pub fn replan(
    instance: &Instance,
    original: &Roster,
    scenario: &DisruptionScenario,
    allow_deadhead: bool,
) -> Result<ReplanOutcome, ReplanError> {
    let started = Instant::now();
    let (rinst, demands, urgent) = apply_disruption(instance, scenario)?;
    let (mut on_duty, later) = classify(instance, original, scenario)?;

    // Resolve after-task markers against the rebuilt task list.
    let task_pos: BTreeMap<&str, u32> = rinst
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i as u32))
        .collect();
    for cand in &mut on_duty {
        let hint = cand.hint.as_mut().expect("on-duty candidate");
        if hint.after_task.is_some() {
            let active = cand.prefix.last().expect("nonempty prefix");
            let task_id = active.task.as_deref().expect("train step has a task");
            let idx = *task_pos.get(task_id).ok_or_else(|| {
                ReplanError::Scenario(format!("in-progress task {task_id} missing"))
            })?;
            hint.after_task = Some(idx);
        }
    }

    let hints: Vec<ResumptionHint> =
        on_duty.iter().map(|c| c.hint.clone().expect("hint")).collect();
    let net = build_network(&rinst, &hints)?;

    // Remaining crew demand per network task index.
    let mut remaining: Vec<u32> = net
        .tasks
        .iter()
        .map(|t| *demands.get(&t.id).unwrap_or(&1))
        .collect();
    let mut exhausted: BTreeSet<usize> = BTreeSet::new();

    let mut roster = Roster::default();
    // Untouched members keep their plans wholesale.
    for (id, steps) in &original.assignments {
        roster.assignments.insert(id.clone(), steps.clone());
    }

    let ordered: Vec<(usize, &Candidate)> = on_duty
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c))
        .chain(later.iter().map(|c| (usize::MAX, c)))
        .collect();
    for (hint_idx, cand) in ordered {
        let member = rinst
            .crew
            .iter()
            .find(|m| m.id == cand.id)
            .ok_or_else(|| ReplanError::Scenario(format!("unknown member {}", cand.id)))?;
        let mut view = NetworkView::for_qualification(&net, &member.qualification);
        for &a in &exhausted {
            view.disable(a);
        }
        if !allow_deadhead {
            for (id, arc) in net.arcs.iter().enumerate() {
                if matches!(arc.kind, ArcKind::Deadhead { .. }) {
                    view.disable(id);
                }
            }
        }
        // Depot preference applies to the replanned sign-out only.
        for (id, arc) in net.arcs.iter().enumerate() {
            if let ArcKind::SignOut { line, depot } = arc.kind {
                let name = &net.lines[line as usize].depots[depot as usize];
                if !member.preferred_depots.contains(name) {
                    view.add_cost(id, rinst.params.lambda_o);
                }
            }
        }
        let skip: BTreeSet<usize>;
        if hint_idx != usize::MAX {
            let entry = &net.hint_entries[hint_idx];
            restrict_to_resumption(&mut view, entry);
            skip = [entry.start_arc, entry.sign_in, entry.filter_arc].into_iter().collect();
        } else {
            restrict_to_layer(&mut view, scenario.day, cand.duty, &member.qualification);
            skip = BTreeSet::new();
        }
        let limits = ResourceLimits {
            max_sign_ins: 1,
            max_deadheads: cand.deadhead_budget,
        };
        let suffix = match solve_cspp(&view, limits, cand.meal_precharged) {
            Some(result) => crate::htsn::decode_path(&net, &result.path, &skip),
            None => {
                log::error!("no feasible suffix for {}; keeping the original duty", cand.id);
                original.assignments[&cand.id]
                    .iter()
                    .filter(|s| s.day == scenario.day && s.t_from >= scenario.t_bar)
                    .cloned()
                    .collect()
            }
        };
        for step in &suffix {
            if step.arc_kind == StepKind::Train {
                if let Some(task_id) = &step.task {
                    if let Some(&idx) = task_pos.get(task_id.as_str()) {
                        let idx = idx as usize;
                        remaining[idx] = remaining[idx].saturating_sub(1);
                        if remaining[idx] == 0 {
                            for &a in &net.task_arcs[idx] {
                                exhausted.insert(a);
                            }
                        }
                    }
                }
            }
        }
        let mut new_steps: DutyList = original.assignments[&cand.id]
            .iter()
            .filter(|s| s.day != scenario.day)
            .cloned()
            .collect();
        new_steps.extend(cand.prefix.iter().cloned());
        new_steps.extend(suffix);
        new_steps.sort_by_key(|s| (s.day, s.t_from, s.t_to));
        roster.assignments.insert(cand.id.clone(), new_steps);
    }

    let breakdown = replan_objective(&rinst, &roster, &demands);
    let coverage = demand_coverage(&rinst, &roster, &demands, |t| {
        t.day == scenario.day && t.dep_time >= scenario.t_bar
    });
    let urgent_set: BTreeSet<&str> = urgent.iter().map(|s| s.as_str()).collect();
    let urgent_coverage =
        demand_coverage(&rinst, &roster, &demands, |t| urgent_set.contains(t.id.as_str()));
    let mut roster = roster;
    roster.objective = Some(breakdown.clone());
    Ok(ReplanOutcome {
        metrics: ReplanMetrics {
            obj: breakdown.obj,
            coverage,
            urgent_coverage,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        roster,
        instance: rinst,
        demands,
        urgent,
    })
}

/// Objective with crew demands: labor plus preference plus cancellation
/// penalties weighted by unmet demand.
pub fn replan_objective(
    instance: &Instance,
    roster: &Roster,
    demands: &DemandMap,
) -> ObjectiveBreakdown {
    let mut breakdown = crate::roster::total_objective(instance, roster);
    let served = roster.covered_task_multiset();
    let cancel: Cost = instance
        .tasks
        .iter()
        .map(|t| {
            let demand = *demands.get(&t.id).unwrap_or(&1);
            let got = *served.get(&t.id).unwrap_or(&0);
            t.cancel_penalty * demand.saturating_sub(got) as Cost
        })
        .sum();
    breakdown.obj = breakdown.obj - breakdown.cancel + cancel;
    breakdown.cancel = cancel;
    breakdown
}

/// Demand-weighted coverage of the tasks selected by `filter`.
pub(crate) fn demand_coverage(
    instance: &Instance,
    roster: &Roster,
    demands: &DemandMap,
    filter: impl Fn(&TrainTask) -> bool,
) -> f64 {
    let served = roster.covered_task_multiset();
    let mut want = 0u64;
    let mut got = 0u64;
    for t in instance.tasks.iter().filter(|t| filter(t)) {
        let demand = *demands.get(&t.id).unwrap_or(&1) as u64;
        want += demand;
        got += demand.min(*served.get(&t.id).unwrap_or(&0) as u64);
    }
    if want == 0 {
        1.0
    } else {
        got as f64 / want as f64
    }
}
