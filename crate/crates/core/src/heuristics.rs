//! Benchmark heuristics: a line-greedy roster builder, a sequential
//! shortest-path planner, and the line-greedy replanning variant.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::htsn::build_network;
use crate::matching::assign_duties;
use crate::model::{DutyFrame, Instance, Line, Minutes, TrainTask};
use crate::planner::{greedy_cover_paths, PlanError, PlanMetrics, PlanResult};
use crate::replanner::{
    apply_disruption, classify, demand_coverage, replan_objective, DisruptionScenario,
    ReplanError, ReplanMetrics, ReplanOutcome,
};
use crate::roster::{total_objective, DutyList, PathStep, Roster, StepKind};

/// Sequential path heuristic: one constrained shortest path per member in
/// id order with already-claimed tasks removed, then the assignment stage.
pub fn sph(instance: &Instance) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    let net = build_network(instance, &[])?;
    let columns = greedy_cover_paths(instance, &net);
    let duties: Vec<DutyList> = columns.into_iter().map(|c| c.steps).collect();
    let (_, mut roster) = assign_duties(instance, &duties)
        .ok_or_else(|| PlanError::Internal("assignment stage infeasible".into()))?;
    let breakdown = total_objective(instance, &roster);
    let coverage = roster.coverage(instance);
    roster.objective = Some(breakdown.clone());
    Ok(PlanResult {
        metrics: PlanMetrics {
            obj: breakdown.obj,
            labor: breakdown.labor,
            cancel: breakdown.cancel,
            preference: breakdown.preference,
            coverage,
            iterations: 1,
            columns: duties.len(),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        roster,
        trace: Vec::new(),
    })
}

/// One day's greedy chain on a single line: serve available tasks from the
/// current position, insert the meal when forced, close with idling and
/// the sign-out. Returns None when the day cannot be closed legally.
#[allow(clippy::too_many_arguments)]
pub(crate) fn greedy_chain(
    instance: &Instance,
    line: &Line,
    frame: &DutyFrame,
    day: u32,
    mut t: Minutes,
    mut side: usize,
    mut meal_taken: bool,
    mut next_dep_min: Minutes,
    available: &dyn Fn(&TrainTask) -> bool,
    prefer_urgent: bool,
) -> Option<(Vec<PathStep>, Vec<String>)> {
    let p = &instance.params;
    let a_u = frame.start;
    let exit_lo = a_u + p.t_min - p.t_so;
    let exit_hi = a_u + p.t_max - p.t_so;
    let meal_lo = a_u + p.t_mb;
    let deadline = a_u + p.t_me - p.t_ml;
    let mut steps: Vec<PathStep> = Vec::new();
    let mut covered: Vec<String> = Vec::new();

    let mk = |kind: StepKind, t_from: Minutes, t_to: Minutes, depot: &str| PathStep {
        arc_kind: kind,
        day,
        duty: frame.index,
        line: Some(line.id.clone()),
        task: None,
        t_from,
        t_to,
        depot_from: depot.to_string(),
        depot_to: depot.to_string(),
    };

    loop {
        let can_eat_after = |task: &TrainTask| task.arr_time <= deadline;
        let can_eat_before = |task: &TrainTask, now: Minutes| {
            let start = now.max(meal_lo);
            start <= deadline && start + p.t_ml <= task.dep_time
        };
        let pick = instance
            .tasks
            .iter()
            .filter(|task| {
                task.line == line.id
                    && task.day == day
                    && task.dep_depot == line.depots[side]
                    && task.dep_time >= t.max(next_dep_min)
                    && task.arr_time <= exit_hi
                    && available(task)
                    && (meal_taken || can_eat_after(task) || can_eat_before(task, t))
            })
            .min_by(|a, b| {
                if prefer_urgent {
                    b.cancel_penalty
                        .partial_cmp(&a.cancel_penalty)
                        .unwrap()
                        .then(a.dep_time.cmp(&b.dep_time))
                        .then(a.id.cmp(&b.id))
                } else {
                    (a.dep_time, &a.id).cmp(&(b.dep_time, &b.id))
                }
            });
        let Some(task) = pick else {
            break;
        };
        if !meal_taken && !can_eat_after(task) {
            let start = t.max(meal_lo);
            if start > t {
                steps.push(mk(StepKind::Idle, t, start, &line.depots[side]));
            }
            steps.push(mk(StepKind::Meal, start, start + p.t_ml, &line.depots[side]));
            t = start + p.t_ml;
            meal_taken = true;
        }
        if task.dep_time > t {
            steps.push(mk(StepKind::Idle, t, task.dep_time, &line.depots[side]));
        }
        steps.push(PathStep {
            arc_kind: StepKind::Train,
            day,
            duty: frame.index,
            line: Some(line.id.clone()),
            task: Some(task.id.clone()),
            t_from: task.dep_time,
            t_to: task.arr_time,
            depot_from: task.dep_depot.clone(),
            depot_to: task.arr_depot.clone(),
        });
        covered.push(task.id.clone());
        t = task.arr_time;
        side = if line.depots[0] == task.arr_depot { 0 } else { 1 };
        next_dep_min = t + p.t_rt;
    }

    if !meal_taken {
        let start = t.max(meal_lo);
        if start > deadline {
            return None;
        }
        if start > t {
            steps.push(mk(StepKind::Idle, t, start, &line.depots[side]));
        }
        steps.push(mk(StepKind::Meal, start, start + p.t_ml, &line.depots[side]));
        t = start + p.t_ml;
    }
    if t > exit_hi {
        return None;
    }
    let out = t.max(exit_lo);
    if out > t {
        steps.push(mk(StepKind::Idle, t, out, &line.depots[side]));
    }
    steps.push(mk(StepKind::SignOut, out, out + p.t_so, &line.depots[side]));
    Some((steps, covered))
}

/// Line-greedy heuristic: each member in turn claims whole single-line
/// days, picking the (day, frame, line, entry depot) that captures the
/// most remaining tasks.
pub fn lgh(instance: &Instance) -> PlanResult {
    let started = Instant::now();
    let frames = instance.duty_frames();
    let mut remaining: BTreeSet<String> = instance.tasks.iter().map(|t| t.id.clone()).collect();
    let mut roster = Roster::default();
    let max_days = instance.days.saturating_sub(instance.params.n_df);

    for member in &instance.crew {
        let mut steps: DutyList = Vec::new();
        let mut worked: BTreeSet<u32> = BTreeSet::new();
        while (worked.len() as u32) < max_days {
            let mut best: Option<(usize, f64, u32, u32, String, usize, Vec<PathStep>, Vec<String>)> =
                None;
            for day in 0..instance.days {
                if worked.contains(&day) {
                    continue;
                }
                for frame in &frames {
                    for line in &instance.lines {
                        if !member.qualification.contains(&line.id) {
                            continue;
                        }
                        for side in 0..2usize {
                            let entry = frame.start + instance.params.t_si;
                            let avail = |task: &TrainTask| remaining.contains(&task.id);
                            let Some((chain, covered)) = greedy_chain(
                                instance, line, frame, day, entry, side, false, entry, &avail,
                                false,
                            ) else {
                                continue;
                            };
                            if covered.is_empty() {
                                continue;
                            }
                            let penalty: f64 = covered
                                .iter()
                                .map(|id| instance.task(id).unwrap().cancel_penalty)
                                .sum();
                            let better = match &best {
                                None => true,
                                Some((n, pen, d, u, lid, s, _, _)) => {
                                    (covered.len(), penalty)
                                        .partial_cmp(&(*n, *pen))
                                        .unwrap()
                                        .then(
                                            (*d, *u, lid.clone(), *s)
                                                .cmp(&(day, frame.index, line.id.clone(), side)),
                                        )
                                        .is_gt()
                                }
                            };
                            if better {
                                best = Some((
                                    covered.len(),
                                    penalty,
                                    day,
                                    frame.index,
                                    line.id.clone(),
                                    side,
                                    chain,
                                    covered,
                                ));
                            }
                        }
                    }
                }
            }
            let Some((_, _, day, duty, line_id, side, chain, covered)) = best else {
                break;
            };
            let line = instance.line(&line_id).unwrap();
            let frame = instance.frame(duty);
            steps.push(PathStep {
                arc_kind: StepKind::SignIn,
                day,
                duty,
                line: Some(line_id.clone()),
                task: None,
                t_from: frame.start,
                t_to: frame.start + instance.params.t_si,
                depot_from: line.depots[side].clone(),
                depot_to: line.depots[side].clone(),
            });
            steps.extend(chain);
            for id in covered {
                remaining.remove(&id);
            }
            worked.insert(day);
        }
        steps.sort_by_key(|s| (s.day, s.t_from, s.t_to));
        roster.assignments.insert(member.id.clone(), steps);
    }

    let breakdown = total_objective(instance, &roster);
    let coverage = roster.coverage(instance);
    roster.objective = Some(breakdown.clone());
    PlanResult {
        metrics: PlanMetrics {
            obj: breakdown.obj,
            labor: breakdown.labor,
            cancel: breakdown.cancel,
            preference: breakdown.preference,
            coverage,
            iterations: 1,
            columns: 0,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        roster,
        trace: Vec::new(),
    }
}

/// Line-greedy replanning: the same member ordering and continuity rules
/// as the path-adjustment replanner, but each suffix is rebuilt by the
/// single-line greedy chain, urgent tasks first and no deadheading.
pub fn lgh_r(
    instance: &Instance,
    original: &Roster,
    scenario: &DisruptionScenario,
) -> Result<ReplanOutcome, ReplanError> {
    let started = Instant::now();
    let (rinst, demands, urgent) = apply_disruption(instance, scenario)?;
    let (on_duty, later) = classify(instance, original, scenario)?;
    let frames = rinst.duty_frames();
    let mut remaining: BTreeMap<String, u32> = rinst
        .tasks
        .iter()
        .map(|t| (t.id.clone(), *demands.get(&t.id).unwrap_or(&1)))
        .collect();

    let mut roster = Roster::default();
    for (id, steps) in &original.assignments {
        roster.assignments.insert(id.clone(), steps.clone());
    }

    for cand in on_duty.iter().chain(later.iter()) {
        let member = rinst.crew.iter().find(|m| m.id == cand.id).expect("known member");
        let frame = &frames[cand.duty as usize];
        let avail = |task: &TrainTask| remaining.get(&task.id).copied().unwrap_or(0) > 0;
        let suffix = match &cand.hint {
            Some(hint) => {
                let line = &rinst.lines[hint.line as usize];
                let next_dep = if hint.after_task.is_some() {
                    hint.t + rinst.params.t_rt
                } else {
                    hint.t
                };
                greedy_chain(
                    &rinst,
                    line,
                    frame,
                    scenario.day,
                    hint.t,
                    hint.depot as usize,
                    cand.meal_precharged,
                    next_dep,
                    &avail,
                    true,
                )
            }
            None => {
                // A member signing in later picks the qualified line and
                // entry depot whose chain claims the most penalty weight.
                let entry = frame.start + rinst.params.t_si;
                let mut best: Option<(f64, usize, &Line, Vec<PathStep>, Vec<String>)> = None;
                for line in &rinst.lines {
                    if !member.qualification.contains(&line.id) {
                        continue;
                    }
                    for side in 0..2usize {
                        if let Some((chain, covered)) = greedy_chain(
                            &rinst, line, frame, scenario.day, entry, side, false, entry, &avail,
                            true,
                        ) {
                            let penalty: f64 = covered
                                .iter()
                                .map(|id| rinst.task(id).unwrap().cancel_penalty)
                                .sum();
                            let better = match &best {
                                None => true,
                                Some((p, s, l, _, _)) => penalty
                                    .partial_cmp(p)
                                    .unwrap()
                                    .then((l.id.clone(), *s).cmp(&(line.id.clone(), side)))
                                    .is_gt(),
                            };
                            if better {
                                best = Some((penalty, side, line, chain, covered));
                            }
                        }
                    }
                }
                best.map(|(_, side, line, chain, covered)| {
                    let mut steps = vec![PathStep {
                        arc_kind: StepKind::SignIn,
                        day: scenario.day,
                        duty: cand.duty,
                        line: Some(line.id.clone()),
                        task: None,
                        t_from: frame.start,
                        t_to: entry,
                        depot_from: line.depots[side].clone(),
                        depot_to: line.depots[side].clone(),
                    }];
                    steps.extend(chain);
                    (steps, covered)
                })
            }
        };
        let (suffix, covered) = match suffix {
            Some(v) => v,
            None => {
                log::error!("greedy replanning failed for {}; keeping the original duty", cand.id);
                let kept: DutyList = original.assignments[&cand.id]
                    .iter()
                    .filter(|s| s.day == scenario.day && s.t_from >= scenario.t_bar)
                    .cloned()
                    .collect();
                (kept, Vec::new())
            }
        };
        for id in &covered {
            if let Some(v) = remaining.get_mut(id) {
                *v = v.saturating_sub(1);
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
