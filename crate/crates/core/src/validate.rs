//! Roster rule checking. Violations are data, not errors: an empty report
//! means the roster is feasible.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{Instance, Minutes};
use crate::roster::{Roster, StepKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DayOff,
    SignInOut,
    TrainService,
    WorkingTime,
    RestBreak,
    MealBreak,
    Qualification,
    Deadhead,
    ReplannedDuty,
    ReplannedTask,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub crew: String,
    pub detail: String,
}

#[derive(Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: Rule, crew: &str, detail: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            crew: crew.to_string(),
            detail: detail.into(),
        });
    }
}

pub enum Mode<'a> {
    Plan,
    Replan {
        day: u32,
        t_bar: Minutes,
        original: &'a Roster,
        /// Crew demand per replanned task; tasks absent default to 1.
        demands: &'a BTreeMap<String, u32>,
    },
}

pub fn validate_roster(instance: &Instance, roster: &Roster, mode: Mode) -> ValidationReport {
    let mut report = ValidationReport::default();
    let replan = matches!(mode, Mode::Replan { .. });

    for (crew_id, steps) in &roster.assignments {
        let member = instance.crew.iter().find(|c| &c.id == crew_id);
        if member.is_none() {
            report.push(Rule::SignInOut, crew_id, "unknown crew member");
            continue;
        }
        let member = member.unwrap();

        let mut days: BTreeMap<u32, Vec<&crate::roster::PathStep>> = BTreeMap::new();
        for step in steps {
            days.entry(step.day).or_default().push(step);
        }

        if !replan {
            let worked = days.len() as u32;
            if instance.days - worked < instance.params.n_df {
                report.push(
                    Rule::DayOff,
                    crew_id,
                    format!("works {worked} of {} days, needs {} off", instance.days, instance.params.n_df),
                );
            }
            let deadheads = steps.iter().filter(|s| s.arc_kind == StepKind::Deadhead).count() as u32;
            if deadheads > instance.params.n_tf {
                report.push(Rule::Deadhead, crew_id, format!("{deadheads} deadheads exceed cap"));
            }
        }

        for (day, day_steps) in &days {
            check_day(instance, crew_id, *day, day_steps, &mut report);
        }

        // Qualification: served and deadheaded lines must be qualified.
        for step in steps {
            match step.arc_kind {
                StepKind::Train => {
                    if let Some(line) = &step.line {
                        if !member.qualification.contains(line) {
                            report.push(
                                Rule::Qualification,
                                crew_id,
                                format!("train task {:?} on unqualified line {line}", step.task),
                            );
                        }
                    }
                }
                StepKind::Deadhead => {
                    for depot in [&step.depot_from, &step.depot_to] {
                        if let Some(line) = instance.depot_line(depot) {
                            if !member.qualification.contains(&line.id) {
                                report.push(
                                    Rule::Qualification,
                                    crew_id,
                                    format!("deadhead touches unqualified line {}", line.id),
                                );
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    check_task_usage(instance, roster, &mode, &mut report);

    if let Mode::Replan { day, t_bar, original, .. } = mode {
        check_replan_continuity(instance, roster, day, t_bar, original, &mut report);
    }

    report
}

fn check_day(
    instance: &Instance,
    crew_id: &str,
    day: u32,
    day_steps: &[&crate::roster::PathStep],
    report: &mut ValidationReport,
) {
    let p = &instance.params;
    let mut steps = day_steps.to_vec();
    steps.sort_by_key(|s| (s.t_from, s.t_to));

    let duty = steps[0].duty;
    let frame = instance.frame(duty);
    if steps.iter().any(|s| s.duty != duty) {
        report.push(Rule::SignInOut, crew_id, format!("day {day}: multiple duty frames"));
        return;
    }

    if steps[0].arc_kind != StepKind::SignIn {
        report.push(Rule::SignInOut, crew_id, format!("day {day}: does not start with sign-in"));
    } else if steps[0].t_from != frame.start {
        report.push(
            Rule::SignInOut,
            crew_id,
            format!("day {day}: sign-in at {} instead of frame start {}", steps[0].t_from, frame.start),
        );
    }
    let last = steps[steps.len() - 1];
    if last.arc_kind != StepKind::SignOut {
        report.push(Rule::SignInOut, crew_id, format!("day {day}: does not end with sign-out"));
    }
    for s in &steps[1..steps.len().saturating_sub(1)] {
        if matches!(s.arc_kind, StepKind::SignIn | StepKind::SignOut) {
            report.push(Rule::SignInOut, crew_id, format!("day {day}: interior sign-in/out"));
        }
    }

    for w in steps.windows(2) {
        if w[1].t_from != w[0].t_to {
            report.push(
                Rule::SignInOut,
                crew_id,
                format!("day {day}: time gap {} -> {}", w[0].t_to, w[1].t_from),
            );
        }
        if w[1].depot_from != w[0].depot_to {
            report.push(
                Rule::SignInOut,
                crew_id,
                format!("day {day}: location jump {} -> {}", w[0].depot_to, w[1].depot_from),
            );
        }
    }
    if steps.iter().any(|s| s.t_from < frame.start || s.t_to > frame.end) {
        report.push(Rule::SignInOut, crew_id, format!("day {day}: activity outside duty frame"));
    }

    let span = last.t_to - steps[0].t_from;
    if span < p.t_min || span > p.t_max {
        report.push(
            Rule::WorkingTime,
            crew_id,
            format!("day {day}: working span {span} outside [{}, {}]", p.t_min, p.t_max),
        );
    }

    let trains: Vec<_> = steps.iter().filter(|s| s.arc_kind == StepKind::Train).collect();
    for w in trains.windows(2) {
        let gap = w[1].t_from - w[0].t_to;
        if gap < p.t_rt {
            report.push(
                Rule::RestBreak,
                crew_id,
                format!("day {day}: gap {gap} < {} between {:?} and {:?}", p.t_rt, w[0].task, w[1].task),
            );
        }
    }

    let meals: Vec<_> = steps.iter().filter(|s| s.arc_kind == StepKind::Meal).collect();
    if meals.len() != 1 {
        report.push(Rule::MealBreak, crew_id, format!("day {day}: {} meals instead of 1", meals.len()));
    }
    for meal in meals {
        if meal.duration() != p.t_ml
            || meal.t_from < frame.start + p.t_mb
            || meal.t_to > frame.start + p.t_me
        {
            report.push(
                Rule::MealBreak,
                crew_id,
                format!("day {day}: meal [{}, {}] violates window/duration", meal.t_from, meal.t_to),
            );
        }
    }
}

fn check_task_usage(instance: &Instance, roster: &Roster, mode: &Mode, report: &mut ValidationReport) {
    let mut usage: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (crew_id, steps) in &roster.assignments {
        for step in steps {
            if step.arc_kind != StepKind::Train {
                continue;
            }
            let Some(task_id) = &step.task else {
                report.push(Rule::TrainService, crew_id, "train step without task id");
                continue;
            };
            match instance.task(task_id) {
                None => {
                    report.push(Rule::TrainService, crew_id, format!("unknown task {task_id}"));
                }
                Some(task) => {
                    if task.dep_time != step.t_from
                        || task.arr_time != step.t_to
                        || task.dep_depot != step.depot_from
                        || task.arr_depot != step.depot_to
                        || task.day != step.day
                    {
                        report.push(
                            Rule::TrainService,
                            crew_id,
                            format!("task {task_id} does not match the timetable"),
                        );
                    }
                    usage.entry(task_id.as_str()).or_default().push(crew_id);
                }
            }
        }
    }
    for (task_id, users) in usage {
        let cap = match mode {
            Mode::Plan => 1,
            Mode::Replan { demands, .. } => *demands.get(task_id).unwrap_or(&1),
        };
        if users.len() as u32 > cap {
            report.push(
                Rule::TrainService,
                users[0],
                format!("task {task_id} served {} times, cap {cap}", users.len()),
            );
        }
    }
}

fn check_replan_continuity(
    instance: &Instance,
    roster: &Roster,
    day: u32,
    t_bar: Minutes,
    original: &Roster,
    report: &mut ValidationReport,
) {
    for (crew_id, orig_steps) in &original.assignments {
        let orig_day: Vec<_> = orig_steps.iter().filter(|s| s.day == day).collect();
        if orig_day.is_empty() {
            continue;
        }
        // Members signed out before the replanning start are left untouched.
        let last_end = orig_day.iter().map(|s| s.t_to).max().unwrap();
        if last_end <= t_bar {
            continue;
        }
        let Some(new_steps) = roster.assignments.get(crew_id) else {
            report.push(Rule::ReplannedDuty, crew_id, "member missing from replanned roster");
            continue;
        };
        let new_day: Vec<_> = new_steps.iter().filter(|s| s.day == day).collect();
        if new_day.is_empty() {
            report.push(Rule::ReplannedDuty, crew_id, format!("no duty on replanned day {day}"));
            continue;
        }
        let orig_duty = orig_day[0].duty;
        if new_day.iter().any(|s| s.duty != orig_duty) {
            report.push(
                Rule::ReplannedDuty,
                crew_id,
                format!("duty frame changed from {orig_duty} on day {day}"),
            );
        }
        // Every original step started before t_bar must be preserved
        // verbatim; an in-progress activity is completed, never truncated.
        for orig in orig_day.iter().filter(|s| s.t_from < t_bar) {
            if !new_day.iter().any(|s| s == orig) {
                report.push(
                    Rule::ReplannedTask,
                    crew_id,
                    format!(
                        "pre-{} activity [{}, {}] {:?} not preserved",
                        t_bar, orig.t_from, orig.t_to, orig.arc_kind
                    ),
                );
            }
        }
    }
    let _ = instance;
}
