//! Domain types: parameters, lines, tasks, crew, and the planning instance,
//! together with timetable/crew generation and the instance file schema.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Minutes = i64;
pub type Cost = f64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error at {path}: {msg}")]
    Validation { path: String, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> ModelError {
    ModelError::Validation {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Operational parameters shared by every instance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Params {
    /// Duty window length H, minutes.
    #[serde(rename = "H")]
    pub duty_len: Minutes,
    /// Duty frame slide interval h, minutes.
    pub h: Minutes,
    /// Minimum daily working span, minutes.
    pub t_min: Minutes,
    /// Maximum daily working span, minutes.
    pub t_max: Minutes,
    /// Rest break after a served train task, minutes.
    pub t_rt: Minutes,
    /// Meal duration, minutes.
    pub t_ml: Minutes,
    /// Meal window start offset from frame start, minutes.
    pub t_mb: Minutes,
    /// Meal window end offset from frame start, minutes.
    pub t_me: Minutes,
    /// Sign-in duration, minutes.
    pub t_si: Minutes,
    /// Sign-out duration, minutes.
    pub t_so: Minutes,
    /// Minimum transfer time between trains at a transfer station, minutes.
    pub t_tf: Minutes,
    /// Minimum days off per planning horizon.
    pub n_df: u32,
    /// Maximum deadheads per planning horizon.
    pub n_tf: u32,
    /// Penalty for signing in/out at an unpreferred depot.
    pub lambda_o: Cost,
    /// Cost per minute of serving a train task.
    pub c_w: Cost,
    /// Cost per minute of non-working actions.
    pub c_r: Cost,
    /// Task-duration-to-cancel-penalty factor.
    #[serde(default = "default_lambda_factor")]
    pub lambda_factor: Cost,
}

fn default_lambda_factor() -> Cost {
    4.0
}

impl Params {
    pub fn validate(&self, horizon_days: u32) -> Result<(), ModelError> {
        let durs = [
            ("H", self.duty_len),
            ("h", self.h),
            ("t_min", self.t_min),
            ("t_max", self.t_max),
            ("t_rt", self.t_rt),
            ("t_ml", self.t_ml),
            ("t_mb", self.t_mb),
            ("t_me", self.t_me),
            ("t_si", self.t_si),
            ("t_so", self.t_so),
            ("t_tf", self.t_tf),
        ];
        for (name, v) in durs {
            if v < 0 {
                return Err(invalid(format!("params.{name}"), "duration must be >= 0"));
            }
        }
        if self.t_min > self.t_max || self.t_max > self.duty_len {
            return Err(invalid("params", "need t_min <= t_max <= H"));
        }
        if self.t_mb + self.t_ml > self.t_me {
            return Err(invalid("params", "meal window too short: t_mb + t_ml > t_me"));
        }
        if self.n_df >= horizon_days {
            return Err(invalid("params.n_df", "days off must be fewer than horizon days"));
        }
        Ok(())
    }
}

/// A double-track metro line with a depot at each terminal.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Line {
    pub id: String,
    /// The two terminal depots, ordered (a, b).
    pub depots: [String; 2],
    /// Terminal-to-terminal run time, minutes.
    pub run: Minutes,
    pub headway: Minutes,
    /// First and last departure minute within the day.
    pub window: (Minutes, Minutes),
}

impl Line {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.depots[0] == self.depots[1] {
            return Err(invalid(format!("lines.{}", self.id), "depots must be distinct"));
        }
        if self.run <= 0 {
            return Err(invalid(format!("lines.{}", self.id), "run must be > 0"));
        }
        if self.headway <= 0 {
            return Err(invalid(format!("lines.{}", self.id), "headway must be > 0"));
        }
        Ok(())
    }
}

/// Station where two lines intersect; positions are fractions of each line's
/// run measured from depot `a` toward depot `b`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransferStation {
    #[serde(rename = "a")]
    pub line_a: String,
    #[serde(rename = "b")]
    pub line_b: String,
    #[serde(default = "default_frac")]
    pub frac_a: f64,
    #[serde(default = "default_frac")]
    pub frac_b: f64,
}

fn default_frac() -> f64 {
    0.5
}

/// One scheduled train run that needs a qualified operator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainTask {
    pub id: String,
    pub line: String,
    pub day: u32,
    pub dep_depot: String,
    pub dep_time: Minutes,
    pub arr_depot: String,
    pub arr_time: Minutes,
    pub cancel_penalty: Cost,
}

impl TrainTask {
    pub fn duration(&self) -> Minutes {
        self.arr_time - self.dep_time
    }
}

/// A candidate daily duty window [start, start + H].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DutyFrame {
    pub index: u32,
    pub start: Minutes,
    pub end: Minutes,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CrewMember {
    pub id: String,
    /// Lines this member may operate.
    pub qualification: BTreeSet<String>,
    /// Depots the member prefers to sign in/out at.
    pub preferred_depots: BTreeSet<String>,
}

/// The complete planning input.
#[derive(Debug, Clone)]
pub struct Instance {
    pub days: u32,
    pub horizon: (Minutes, Minutes),
    pub params: Params,
    pub lines: Vec<Line>,
    pub transfers: Vec<TransferStation>,
    pub tasks: Vec<TrainTask>,
    pub crew: Vec<CrewMember>,
}

impl Instance {
    pub fn line(&self, id: &str) -> Option<&Line> {
        self.lines.iter().find(|l| l.id == id)
    }

    /// The line a depot belongs to. Depots are terminal-exclusive, so the
    /// owner is unique.
    pub fn depot_line(&self, depot: &str) -> Option<&Line> {
        self.lines.iter().find(|l| l.depots.contains(&depot.to_string()))
    }

    pub fn transfer_between(&self, l1: &str, l2: &str) -> Option<&TransferStation> {
        self.transfers.iter().find(|t| {
            (t.line_a == l1 && t.line_b == l2) || (t.line_a == l2 && t.line_b == l1)
        })
    }

    pub fn task(&self, id: &str) -> Option<&TrainTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn duty_frames(&self) -> Vec<DutyFrame> {
        enumerate_duty_frames(&self.params, self.horizon)
    }

    pub fn frame(&self, index: u32) -> DutyFrame {
        let start = self.horizon.0 + index as Minutes * self.params.h;
        DutyFrame {
            index,
            start,
            end: start + self.params.duty_len,
        }
    }

    pub fn total_cancel_penalty(&self) -> Cost {
        self.tasks.iter().map(|t| t.cancel_penalty).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.days == 0 {
            return Err(invalid("days", "need at least one day"));
        }
        if self.horizon.1 <= self.horizon.0 {
            return Err(invalid("horizon", "empty day horizon"));
        }
        self.params.validate(self.days)?;
        if self.params.duty_len > self.horizon.1 - self.horizon.0 {
            return Err(invalid("params.H", "duty window exceeds day horizon"));
        }
        if self.lines.is_empty() {
            return Err(invalid("lines", "need at least one line"));
        }
        let mut depot_owner: BTreeMap<&str, &str> = BTreeMap::new();
        for line in &self.lines {
            line.validate()?;
            for d in &line.depots {
                if let Some(other) = depot_owner.insert(d, &line.id) {
                    return Err(invalid(
                        format!("lines.{}", line.id),
                        format!("depot {d} already belongs to line {other}"),
                    ));
                }
            }
        }
        for tf in &self.transfers {
            if tf.line_a == tf.line_b {
                return Err(invalid("transfers", "transfer must join two distinct lines"));
            }
            for (line, frac) in [(&tf.line_a, tf.frac_a), (&tf.line_b, tf.frac_b)] {
                if self.line(line).is_none() {
                    return Err(invalid("transfers", format!("unknown line {line}")));
                }
                if !(0.0..=1.0).contains(&frac) {
                    return Err(invalid("transfers", "position fraction outside [0,1]"));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for task in &self.tasks {
            let path = format!("tasks.{}", task.id);
            if !ids.insert(task.id.clone()) {
                return Err(invalid(path, "duplicate task id"));
            }
            if task.dep_time >= task.arr_time {
                return Err(invalid(path, "departure must precede arrival"));
            }
            let line = self
                .line(&task.line)
                .ok_or_else(|| invalid(&path, format!("unknown line {}", task.line)))?;
            if !line.depots.contains(&task.dep_depot)
                || !line.depots.contains(&task.arr_depot)
                || task.dep_depot == task.arr_depot
            {
                return Err(invalid(path, "task must run between the line's two depots"));
            }
            if task.day >= self.days {
                return Err(invalid(path, "task day outside horizon"));
            }
            if task.dep_time < self.horizon.0 || task.arr_time > self.horizon.1 {
                return Err(invalid(path, "task times outside day horizon"));
            }
            if task.cancel_penalty <= 0.0 {
                return Err(invalid(path, "cancel penalty must be positive"));
            }
        }
        let mut crew_ids = BTreeSet::new();
        for member in &self.crew {
            let path = format!("crew.{}", member.id);
            if !crew_ids.insert(member.id.clone()) {
                return Err(invalid(path, "duplicate crew id"));
            }
            if member.qualification.is_empty() {
                return Err(invalid(path, "qualification must be nonempty"));
            }
            for l in &member.qualification {
                if self.line(l).is_none() {
                    return Err(invalid(path, format!("unknown qualified line {l}")));
                }
            }
            for d in &member.preferred_depots {
                let owner = self
                    .depot_line(d)
                    .ok_or_else(|| invalid(&path, format!("unknown preferred depot {d}")))?;
                if !member.qualification.contains(&owner.id) {
                    return Err(invalid(path, format!("preferred depot {d} not on a qualified line")));
                }
            }
        }
        Ok(())
    }
}

/// Both-direction departures at fixed headway within the service window.
pub fn generate_tasks(line: &Line, day: u32, params: &Params) -> Vec<TrainTask> {
    let mut tasks = Vec::new();
    let (first, last) = line.window;
    if last < first {
        return tasks;
    }
    for (dir, (from, to)) in [("ab", (0usize, 1usize)), ("ba", (1, 0))] {
        let mut idx = 0u32;
        let mut dep = first;
        while dep <= last {
            tasks.push(TrainTask {
                id: format!("{}-d{}-{}-{:03}", line.id, day, dir, idx),
                line: line.id.clone(),
                day,
                dep_depot: line.depots[from].clone(),
                dep_time: dep,
                arr_depot: line.depots[to].clone(),
                arr_time: dep + line.run,
                cancel_penalty: params.lambda_factor * line.run as Cost,
            });
            dep += line.headway;
            idx += 1;
        }
    }
    tasks
}

/// Shifts each task endpoint by a uniform integer in {-1, 0, 1}. Shifts that
/// would invert a task or leave the day horizon are dropped for that task.
pub fn perturb_timetable(
    tasks: &[TrainTask],
    horizon: (Minutes, Minutes),
    seed: u64,
) -> Vec<TrainTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tasks
        .iter()
        .map(|t| {
            let d_dep: i64 = rng.gen_range(-1..=1);
            let d_arr: i64 = rng.gen_range(-1..=1);
            let dep = t.dep_time + d_dep;
            let arr = t.arr_time + d_arr;
            let mut out = t.clone();
            if dep < arr && dep >= horizon.0 && arr <= horizon.1 {
                out.dep_time = dep;
                out.arr_time = arr;
                out.cancel_penalty = t.cancel_penalty / t.duration() as Cost * (arr - dep) as Cost;
            }
            out
        })
        .collect()
}

/// Random crew mix: 40% qualified on two distinct lines, the rest on one,
/// each with two preferred depots drawn from their qualified lines.
pub fn generate_crew(n_r: usize, instance: &Instance, seed: u64) -> Vec<CrewMember> {
    assert!(n_r >= 1 && !instance.lines.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line_ids: Vec<&str> = instance.lines.iter().map(|l| l.id.as_str()).collect();
    let n_two = ((0.4 * n_r as f64) + 0.5).floor() as usize;
    let mut crew = Vec::with_capacity(n_r);
    for i in 0..n_r {
        let mut qual = BTreeSet::new();
        if i < n_two && line_ids.len() >= 2 {
            let picks: Vec<&&str> = line_ids.choose_multiple(&mut rng, 2).collect();
            for p in picks {
                qual.insert(p.to_string());
            }
        } else {
            qual.insert(line_ids.choose(&mut rng).unwrap().to_string());
        }
        let mut depots: Vec<String> = qual
            .iter()
            .flat_map(|l| instance.line(l).unwrap().depots.iter().cloned())
            .collect();
        depots.sort();
        let preferred: BTreeSet<String> = if depots.len() <= 2 {
            depots.into_iter().collect()
        } else {
            depots
                .choose_multiple(&mut rng, 2)
                .cloned()
                .collect()
        };
        crew.push(CrewMember {
            id: format!("r{:03}", i),
            qualification: qual,
            preferred_depots: preferred,
        });
    }
    crew
}

/// Frame starts T_b, T_b + h, ... while the window still fits the day.
pub fn enumerate_duty_frames(params: &Params, horizon: (Minutes, Minutes)) -> Vec<DutyFrame> {
    let mut frames = Vec::new();
    let mut start = horizon.0;
    let mut index = 0;
    while start + params.duty_len <= horizon.1 {
        frames.push(DutyFrame {
            index,
            start,
            end: start + params.duty_len,
        });
        if params.h == 0 {
            break;
        }
        start += params.h;
        index += 1;
    }
    frames
}

/// Instance file schema. Tasks and crew may be given explicitly or left to
/// the generator.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub days: u32,
    pub horizon: (Minutes, Minutes),
    pub params: Params,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub transfers: Vec<TransferStation>,
    #[serde(default)]
    pub tasks: Option<Vec<TrainTask>>,
    #[serde(default)]
    pub crew: Option<CrewSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CrewSpec {
    Explicit(Vec<CrewMember>),
    Generate { n_r: usize, seed: u64 },
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance, ModelError> {
        let mut instance = Instance {
            days: self.days,
            horizon: self.horizon,
            params: self.params,
            lines: self.lines,
            transfers: self.transfers,
            tasks: Vec::new(),
            crew: Vec::new(),
        };
        instance.tasks = match self.tasks {
            Some(tasks) => tasks,
            None => {
                let mut tasks = Vec::new();
                for day in 0..instance.days {
                    for line in &instance.lines {
                        tasks.extend(generate_tasks(line, day, &instance.params));
                    }
                }
                tasks
            }
        };
        instance.crew = match self.crew {
            Some(CrewSpec::Explicit(crew)) => crew,
            Some(CrewSpec::Generate { n_r, seed }) => generate_crew(n_r, &instance, seed),
            None => Vec::new(),
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn from_instance(instance: &Instance) -> Self {
        InstanceFile {
            days: instance.days,
            horizon: instance.horizon,
            params: instance.params.clone(),
            lines: instance.lines.clone(),
            transfers: instance.transfers.clone(),
            tasks: Some(instance.tasks.clone()),
            crew: Some(CrewSpec::Explicit(instance.crew.clone())),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    file.into_instance()
}

pub fn load_instance(path: &std::path::Path) -> Result<Instance, ModelError> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}
