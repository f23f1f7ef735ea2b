//! The four-tier hierarchical time-space network: line blocks inside duty
//! layers inside daily subnetworks, stitched together by source/sink,
//! shift and off-work arcs. Also the read-only overlay views used by the
//! searches and the restricted entry construction for replanning.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{Cost, Instance, Minutes, Params, TransferStation};
use crate::roster::{DutyList, PathStep, StepKind};

pub type VertexId = usize;
pub type ArcId = usize;

#[derive(Debug, Error)]
pub enum HtsnError {
    #[error("network construction: {0}")]
    Construction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VertexKind {
    Source,
    Sink,
    Start {
        day: u32,
        t: Minutes,
    },
    End {
        day: u32,
        t: Minutes,
    },
    Filter {
        day: u32,
        duty: u32,
    },
    State {
        day: u32,
        duty: u32,
        line: u16,
        t: Minutes,
        depot: u8,
        /// Set on the arrival vertex of a served task; from there only the
        /// mandatory rest or an immediate sign-out may follow.
        after_task: Option<u32>,
    },
}

impl VertexKind {
    pub fn time(&self) -> Option<Minutes> {
        match self {
            VertexKind::Start { t, .. }
            | VertexKind::End { t, .. }
            | VertexKind::State { t, .. } => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Train { task: u32 },
    Rest,
    Meal,
    Idle,
    FilterArc { line: u16, depot: u8 },
    Deadhead { k1: u32, k2: u32 },
    SignIn,
    SignOut { line: u16, depot: u8 },
    Shift,
    StartArc,
    EndArc,
    OffWork,
}

impl ArcKind {
    pub fn sign_in_delta(&self) -> u32 {
        matches!(self, ArcKind::SignIn) as u32
    }
    pub fn deadhead_delta(&self) -> u32 {
        matches!(self, ArcKind::Deadhead { .. }) as u32
    }
    pub fn meal_delta(&self) -> u32 {
        matches!(self, ArcKind::Meal) as u32
    }
}

#[derive(Debug, Clone)]
pub struct Arc {
    pub kind: ArcKind,
    pub from: VertexId,
    pub to: VertexId,
    pub cost: Cost,
}

#[derive(Debug, Clone)]
pub struct LineInfo {
    pub id: String,
    pub depots: [String; 2],
}

#[derive(Debug, Clone)]
pub struct TaskInfo {
    pub id: String,
    pub line: u16,
    pub day: u32,
    pub dep_side: u8,
    pub arr_side: u8,
    pub dep_time: Minutes,
    pub arr_time: Minutes,
    pub penalty: Cost,
}

/// A replanning resumption point: the exact (time, depot) where a member
/// re-enters their duty layer, with a dedicated virtual sign-in chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumptionHint {
    pub day: u32,
    pub duty: u32,
    pub line: u16,
    pub t: Minutes,
    pub depot: u8,
    /// When the member is mid-train at the cut, they resume at the served
    /// task's arrival vertex so the mandatory rest still applies.
    pub after_task: Option<u32>,
}

/// Arcs created for one resumption hint; enabled only in that member's view.
#[derive(Debug, Clone)]
pub struct HintEntry {
    pub start_arc: ArcId,
    pub sign_in: ArcId,
    pub filter_arc: ArcId,
    pub entry_vertex: VertexId,
}

#[derive(Debug)]
pub struct Network {
    pub params: Params,
    pub days: u32,
    pub lines: Vec<LineInfo>,
    pub tasks: Vec<TaskInfo>,
    pub vertices: Vec<VertexKind>,
    pub arcs: Vec<Arc>,
    pub out: Vec<Vec<ArcId>>,
    pub inc: Vec<Vec<ArcId>>,
    pub source: VertexId,
    pub sink: VertexId,
    pub off_work_arc: ArcId,
    /// Topological order over all vertices.
    pub topo: Vec<VertexId>,
    pub task_index: BTreeMap<String, u32>,
    /// Surviving train arcs per task index.
    pub task_arcs: Vec<Vec<ArcId>>,
    pub hint_entries: Vec<HintEntry>,
    frame_base: Minutes,
}

impl Network {
    pub fn frame_start(&self, duty: u32) -> Minutes {
        self.frame_base + duty as Minutes * self.params.h
    }

    pub fn line_index(&self, id: &str) -> Option<u16> {
        self.lines.iter().position(|l| l.id == id).map(|i| i as u16)
    }
}

pub fn arc_cost(kind: &ArcKind, duration: Minutes, params: &Params, task_penalty: Cost) -> Cost {
    match kind {
        ArcKind::Train { .. } => params.c_w * duration as Cost - task_penalty,
        ArcKind::Rest | ArcKind::Meal | ArcKind::Idle | ArcKind::Deadhead { .. } => {
            params.c_r * duration as Cost
        }
        ArcKind::SignIn => params.c_r * params.t_si as Cost,
        ArcKind::SignOut { .. } => params.c_r * params.t_so as Cost,
        _ => 0.0,
    }
}

/// The best deadhead connection per (task on l1, arrival direction on l2):
/// ride k1 to the transfer station, wait at least t_tf, ride k2 onward.
pub fn find_deadhead_pairs(
    instance: &Instance,
    l1: &str,
    l2: &str,
    day: u32,
    duty: u32,
) -> Vec<(String, String)> {
    let Some(transfer) = instance.transfer_between(l1, l2) else {
        return Vec::new();
    };
    let frame = instance.frame(duty);
    let p = &instance.params;
    let in_frame = |t: &crate::model::TrainTask| {
        t.day == day && t.dep_time >= frame.start + p.t_si && t.arr_time <= frame.end - p.t_so
    };
    let pass = |t: &crate::model::TrainTask| -> f64 {
        let line = instance.line(&t.line).unwrap();
        let base = frac_for(transfer, &t.line);
        let frac = if t.dep_depot == line.depots[0] { base } else { 1.0 - base };
        t.dep_time as f64 + frac * t.duration() as f64
    };
    let mut pairs = Vec::new();
    let sources: Vec<_> = instance.tasks.iter().filter(|t| t.line == l1 && in_frame(t)).collect();
    let targets: Vec<_> = instance.tasks.iter().filter(|t| t.line == l2 && in_frame(t)).collect();
    for k1 in &sources {
        let p1 = pass(k1);
        let l2_line = instance.line(l2).unwrap();
        for arr_depot in &l2_line.depots {
            let best = targets
                .iter()
                .filter(|k2| &k2.arr_depot == arr_depot && pass(k2) >= p1 + p.t_tf as f64)
                .min_by(|a, b| (a.arr_time, &a.id).cmp(&(b.arr_time, &b.id)));
            if let Some(k2) = best {
                pairs.push((k1.id.clone(), k2.id.clone()));
            }
        }
    }
    pairs.sort();
    pairs.dedup();
    pairs
}

fn frac_for(transfer: &TransferStation, line: &str) -> f64 {
    if transfer.line_a == line {
        transfer.frac_a
    } else {
        transfer.frac_b
    }
}

struct Builder {
    vertices: Vec<VertexKind>,
    vertex_ids: BTreeMap<VertexKind, VertexId>,
    arcs: Vec<Arc>,
    arc_dedup: BTreeMap<(VertexId, VertexId, u8), ArcId>,
    virtual_starts: BTreeSet<VertexId>,
}

impl Builder {
    fn vertex(&mut self, kind: VertexKind) -> VertexId {
        if let Some(&id) = self.vertex_ids.get(&kind) {
            return id;
        }
        let id = self.vertices.len();
        self.vertices.push(kind);
        self.vertex_ids.insert(kind, id);
        id
    }

    fn arc(&mut self, kind: ArcKind, from: VertexId, to: VertexId, cost: Cost) -> ArcId {
        let tag = match kind {
            ArcKind::Train { task } => (0, task),
            ArcKind::Rest => (1, 0),
            ArcKind::Meal => (2, 0),
            ArcKind::Idle => (3, 0),
            ArcKind::FilterArc { .. } => (4, 0),
            ArcKind::Deadhead { k1, .. } => (5, k1),
            ArcKind::SignIn => (6, 0),
            ArcKind::SignOut { .. } => (7, 0),
            ArcKind::Shift => (8, 0),
            ArcKind::StartArc => (9, 0),
            ArcKind::EndArc => (10, 0),
            ArcKind::OffWork => (11, 0),
        };
        let key = (from, to, tag.0);
        if tag.1 == 0 {
            if let Some(&id) = self.arc_dedup.get(&key) {
                return id;
            }
        }
        let id = self.arcs.len();
        self.arcs.push(Arc { kind, from, to, cost });
        if tag.1 == 0 {
            self.arc_dedup.insert(key, id);
        }
        id
    }
}

pub fn build_network(instance: &Instance, hints: &[ResumptionHint]) -> Result<Network, HtsnError> {
    let p = instance.params.clone();
    let lines: Vec<LineInfo> = instance
        .lines
        .iter()
        .map(|l| LineInfo { id: l.id.clone(), depots: l.depots.clone() })
        .collect();
    let side_of = |line: &LineInfo, depot: &str| -> u8 {
        if line.depots[0] == depot {
            0
        } else {
            1
        }
    };
    let mut tasks = Vec::new();
    let mut task_index = BTreeMap::new();
    for t in &instance.tasks {
        let li = lines.iter().position(|l| l.id == t.line).unwrap() as u16;
        let line = &lines[li as usize];
        let idx = tasks.len() as u32;
        tasks.push(TaskInfo {
            id: t.id.clone(),
            line: li,
            day: t.day,
            dep_side: side_of(line, &t.dep_depot),
            arr_side: side_of(line, &t.arr_depot),
            dep_time: t.dep_time,
            arr_time: t.arr_time,
            penalty: t.cancel_penalty,
        });
        task_index.insert(t.id.clone(), idx);
    }

    let frames = instance.duty_frames();
    if frames.is_empty() {
        return Err(HtsnError::Construction("no duty frame fits the day horizon".into()));
    }

    let mut b = Builder {
        vertices: Vec::new(),
        vertex_ids: BTreeMap::new(),
        arcs: Vec::new(),
        arc_dedup: BTreeMap::new(),
        virtual_starts: BTreeSet::new(),
    };
    let source = b.vertex(VertexKind::Source);
    let sink = b.vertex(VertexKind::Sink);
    let off_work_arc = b.arc(ArcKind::OffWork, source, sink, 0.0);

    let mut hint_raw: Vec<Option<HintEntry>> = vec![None; hints.len()];

    for day in 0..instance.days {
        for frame in &frames {
            let u = frame.index;
            let filter = b.vertex(VertexKind::Filter { day, duty: u });
            let start = b.vertex(VertexKind::Start { day, t: frame.start });
            b.arc(ArcKind::StartArc, source, start, 0.0);
            b.arc(ArcKind::SignIn, start, filter, arc_cost(&ArcKind::SignIn, p.t_si, &p, 0.0));

            let entry_t = frame.start + p.t_si;
            let exit_lo = frame.start + p.t_min - p.t_so;
            let exit_hi = frame.start + p.t_max - p.t_so;

            // Eligible served tasks per line block.
            let eligible: Vec<Vec<u32>> = lines
                .iter()
                .enumerate()
                .map(|(li, _)| {
                    let mut e: Vec<u32> = tasks
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| {
                            t.line == li as u16
                                && t.day == day
                                && t.dep_time >= entry_t
                                && t.arr_time <= frame.end - p.t_so
                        })
                        .map(|(i, _)| i as u32)
                        .collect();
                    e.sort_by_key(|&i| (tasks[i as usize].dep_time, i));
                    e
                })
                .collect();

            // Deadhead pairs between line blocks of this layer.
            let mut deadheads: Vec<(u32, u32)> = Vec::new();
            for l1 in &lines {
                for l2 in &lines {
                    if l1.id == l2.id {
                        continue;
                    }
                    for (a, bid) in find_deadhead_pairs(instance, &l1.id, &l2.id, day, u) {
                        deadheads.push((task_index[&a], task_index[&bid]));
                    }
                }
            }
            deadheads.sort();
            deadheads.dedup();

            // Generic state vertex times per (line, depot side).
            let mut times: Vec<[BTreeSet<Minutes>; 2]> =
                lines.iter().map(|_| [BTreeSet::new(), BTreeSet::new()]).collect();
            for (li, _) in lines.iter().enumerate() {
                for side in 0..2 {
                    times[li][side].insert(entry_t);
                    if exit_lo >= entry_t {
                        times[li][side].insert(exit_lo);
                    }
                }
                for &k in &eligible[li] {
                    let t = &tasks[k as usize];
                    times[li][t.dep_side as usize].insert(t.dep_time);
                    if t.arr_time + p.t_rt <= frame.end {
                        times[li][t.arr_side as usize].insert(t.arr_time + p.t_rt);
                    }
                }
            }
            for &(_, k2) in &deadheads {
                let t2 = &tasks[k2 as usize];
                times[t2.line as usize][t2.arr_side as usize].insert(t2.arr_time);
            }
            for hint in hints.iter() {
                if hint.day == day && hint.duty == u && hint.after_task.is_none() {
                    times[hint.line as usize][hint.depot as usize].insert(hint.t);
                }
            }
            // Meal closure: a meal ending inside the window can be followed
            // by idling or another event; the end time is a state vertex.
            let meal_lo = frame.start + p.t_mb;
            let meal_hi = frame.start + p.t_me;
            for (li, _) in lines.iter().enumerate() {
                for side in 0..2 {
                    let mut queue: Vec<Minutes> = times[li][side].iter().copied().collect();
                    while let Some(t) = queue.pop() {
                        if t >= meal_lo && t + p.t_ml <= meal_hi && t + p.t_ml <= frame.end {
                            if times[li][side].insert(t + p.t_ml) {
                                queue.push(t + p.t_ml);
                            }
                        }
                    }
                }
            }

            // Vertices and block-internal arcs.
            for (li, _) in lines.iter().enumerate() {
                let li16 = li as u16;
                for side in 0..2u8 {
                    let ts: Vec<Minutes> = times[li][side as usize].iter().copied().collect();
                    for &t in &ts {
                        b.vertex(VertexKind::State {
                            day,
                            duty: u,
                            line: li16,
                            t,
                            depot: side,
                            after_task: None,
                        });
                    }
                    for w in ts.windows(2) {
                        let from = b.vertex(state(day, u, li16, w[0], side, None));
                        let to = b.vertex(state(day, u, li16, w[1], side, None));
                        b.arc(ArcKind::Idle, from, to, arc_cost(&ArcKind::Idle, w[1] - w[0], &p, 0.0));
                    }
                    // Meal arcs from every in-window generic state vertex.
                    for &t in &ts {
                        if t >= meal_lo && t + p.t_ml <= meal_hi && t + p.t_ml <= frame.end {
                            let from = b.vertex(state(day, u, li16, t, side, None));
                            let to = b.vertex(state(day, u, li16, t + p.t_ml, side, None));
                            b.arc(ArcKind::Meal, from, to, arc_cost(&ArcKind::Meal, p.t_ml, &p, 0.0));
                        }
                    }
                    // Sign-outs from generic vertices inside the span window.
                    for &t in &ts {
                        if t >= exit_lo && t <= exit_hi {
                            let from = b.vertex(state(day, u, li16, t, side, None));
                            let end = b.vertex(VertexKind::End { day, t: t + p.t_so });
                            b.arc(
                                ArcKind::SignOut { line: li16, depot: side },
                                from,
                                end,
                                arc_cost(&ArcKind::SignOut { line: li16, depot: side }, p.t_so, &p, 0.0),
                            );
                        }
                    }
                    let depot_side = side;
                    let entry = b.vertex(state(day, u, li16, entry_t, depot_side, None));
                    b.arc(ArcKind::FilterArc { line: li16, depot: depot_side }, filter, entry, 0.0);
                }

                // Train, rest and arrival sign-out arcs.
                for &k in &eligible[li] {
                    let t = tasks[k as usize].clone();
                    let dep = b.vertex(state(day, u, li16, t.dep_time, t.dep_side, None));
                    let arr = b.vertex(state(day, u, li16, t.arr_time, t.arr_side, Some(k)));
                    b.arc(
                        ArcKind::Train { task: k },
                        dep,
                        arr,
                        arc_cost(&ArcKind::Train { task: k }, t.arr_time - t.dep_time, &p, t.penalty),
                    );
                    if t.arr_time + p.t_rt <= frame.end {
                        let rested = b.vertex(state(day, u, li16, t.arr_time + p.t_rt, t.arr_side, None));
                        b.arc(ArcKind::Rest, arr, rested, arc_cost(&ArcKind::Rest, p.t_rt, &p, 0.0));
                    }
                    if t.arr_time >= exit_lo && t.arr_time <= exit_hi {
                        let end = b.vertex(VertexKind::End { day, t: t.arr_time + p.t_so });
                        b.arc(
                            ArcKind::SignOut { line: li16, depot: t.arr_side },
                            arr,
                            end,
                            arc_cost(&ArcKind::SignOut { line: li16, depot: t.arr_side }, p.t_so, &p, 0.0),
                        );
                    }
                }
            }

            // Deadhead arcs across line blocks.
            for &(k1, k2) in &deadheads {
                let t1 = tasks[k1 as usize].clone();
                let t2 = tasks[k2 as usize].clone();
                let from = b.vertex(state(day, u, t1.line, t1.dep_time, t1.dep_side, None));
                let to = b.vertex(state(day, u, t2.line, t2.arr_time, t2.arr_side, None));
                b.arc(
                    ArcKind::Deadhead { k1, k2 },
                    from,
                    to,
                    arc_cost(&ArcKind::Deadhead { k1, k2 }, t2.arr_time - t1.dep_time, &p, 0.0),
                );
            }

            // Arrival-vertex resumption hints land on the served task's
            // arrival vertex; generic hints on the matching state vertex.
            for (hi, hint) in hints.iter().enumerate() {
                if hint.day != day || hint.duty != u {
                    continue;
                }
                let entry_vertex =
                    b.vertex(state(day, u, hint.line, hint.t, hint.depot, hint.after_task));
                let vstart = b.vertex(VertexKind::Start { day, t: hint.t - p.t_si });
                // Shift arcs must not land on entries that exist only for
                // resumption, unless they coincide with a real frame start.
                if frames.iter().all(|f| f.start != hint.t - p.t_si) {
                    b.virtual_starts.insert(vstart);
                }
                let start_arc = b.arc(ArcKind::StartArc, source, vstart, 0.0);
                let sign_in = b.arc(ArcKind::SignIn, vstart, filter, arc_cost(&ArcKind::SignIn, p.t_si, &p, 0.0));
                let filter_arc =
                    b.arc(ArcKind::FilterArc { line: hint.line, depot: hint.depot }, filter, entry_vertex, 0.0);
                hint_raw[hi] = Some(HintEntry { start_arc, sign_in, filter_arc, entry_vertex });
            }
        }
    }

    // Shift arcs: every day end to every later (non-virtual) day start.
    let end_vertices: Vec<(u32, VertexId)> = b
        .vertices
        .iter()
        .enumerate()
        .filter_map(|(id, k)| match k {
            VertexKind::End { day, .. } => Some((*day, id)),
            _ => None,
        })
        .collect();
    let start_vertices: Vec<(u32, VertexId)> = b
        .vertices
        .iter()
        .enumerate()
        .filter_map(|(id, k)| match k {
            VertexKind::Start { day, .. } if !b.virtual_starts.contains(&id) => Some((*day, id)),
            _ => None,
        })
        .collect();
    for &(de, ve) in &end_vertices {
        b.arc(ArcKind::EndArc, ve, sink, 0.0);
        for &(ds, vs) in &start_vertices {
            if ds > de {
                b.arc(ArcKind::Shift, ve, vs, 0.0);
            }
        }
    }

    finish(b, instance, lines, tasks, task_index, hint_raw, off_work_arc, source, sink)
}

fn state(day: u32, duty: u32, line: u16, t: Minutes, depot: u8, after_task: Option<u32>) -> VertexKind {
    VertexKind::State { day, duty, line, t, depot, after_task }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    b: Builder,
    instance: &Instance,
    lines: Vec<LineInfo>,
    tasks: Vec<TaskInfo>,
    task_index: BTreeMap<String, u32>,
    hint_raw: Vec<Option<HintEntry>>,
    off_work_arc: ArcId,
    source: VertexId,
    sink: VertexId,
) -> Result<Network, HtsnError> {
    let n = b.vertices.len();
    let mut out: Vec<Vec<ArcId>> = vec![Vec::new(); n];
    let mut inc: Vec<Vec<ArcId>> = vec![Vec::new(); n];
    for (id, arc) in b.arcs.iter().enumerate() {
        out[arc.from].push(id);
        inc[arc.to].push(id);
    }

    // Keep only vertices on some source-to-sink path.
    let fwd = reach(&b.arcs, &out, source, true);
    let bwd = reach(&b.arcs, &inc, sink, false);
    let mut vmap = vec![usize::MAX; n];
    let mut vertices = Vec::new();
    for v in 0..n {
        if fwd[v] && bwd[v] {
            vmap[v] = vertices.len();
            vertices.push(b.vertices[v]);
        }
    }
    let mut amap = vec![usize::MAX; b.arcs.len()];
    let mut arcs = Vec::new();
    for (id, arc) in b.arcs.iter().enumerate() {
        if vmap[arc.from] != usize::MAX && vmap[arc.to] != usize::MAX {
            amap[id] = arcs.len();
            arcs.push(Arc {
                kind: arc.kind,
                from: vmap[arc.from],
                to: vmap[arc.to],
                cost: arc.cost,
            });
        }
    }
    let hint_entries: Vec<HintEntry> = hint_raw
        .into_iter()
        .map(|h| {
            let h = h.ok_or_else(|| {
                HtsnError::Construction("resumption hint outside any duty layer".into())
            })?;
            if amap[h.filter_arc] == usize::MAX {
                return Err(HtsnError::Construction(
                    "resumption point cannot reach a valid sign-out".into(),
                ));
            }
            Ok(HintEntry {
                start_arc: amap[h.start_arc],
                sign_in: amap[h.sign_in],
                filter_arc: amap[h.filter_arc],
                entry_vertex: vmap[h.entry_vertex],
            })
        })
        .collect::<Result<_, HtsnError>>()?;

    let nv = vertices.len();
    let mut out: Vec<Vec<ArcId>> = vec![Vec::new(); nv];
    let mut inc: Vec<Vec<ArcId>> = vec![Vec::new(); nv];
    for (id, arc) in arcs.iter().enumerate() {
        out[arc.from].push(id);
        inc[arc.to].push(id);
    }

    // Kahn's algorithm doubles as the acyclicity check.
    let mut indeg: Vec<usize> = inc.iter().map(|v| v.len()).collect();
    let mut ready: BTreeSet<VertexId> = (0..nv).filter(|&v| indeg[v] == 0).collect();
    let mut topo = Vec::with_capacity(nv);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        topo.push(v);
        for &a in &out[v] {
            let w = arcs[a].to;
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    if topo.len() != nv {
        return Err(HtsnError::Construction("cycle detected".into()));
    }

    // Every day must retain a feasible duty.
    for day in 0..instance.days {
        let ok = vertices.iter().any(|k| matches!(k, VertexKind::End { day: d, .. } if *d == day));
        if !ok {
            return Err(HtsnError::Construction(format!("no feasible duty on day {day}")));
        }
    }

    let mut task_arcs = vec![Vec::new(); tasks.len()];
    for (id, arc) in arcs.iter().enumerate() {
        if let ArcKind::Train { task } = arc.kind {
            task_arcs[task as usize].push(id);
        }
    }

    Ok(Network {
        params: instance.params.clone(),
        days: instance.days,
        lines,
        tasks,
        vertices,
        arcs,
        out,
        inc,
        source,
        sink: vmap[sink],
        off_work_arc: amap[off_work_arc],
        topo,
        task_index,
        task_arcs,
        hint_entries,
        frame_base: instance.horizon.0,
    })
}

fn reach(arcs: &[Arc], adj: &[Vec<ArcId>], from: VertexId, forward: bool) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for &a in &adj[v] {
            let w = if forward { arcs[a].to } else { arcs[a].from };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Read-only overlay over a shared network: per-arc cost replacements and
/// a disabled set. Cheap to clone per search.
#[derive(Clone)]
pub struct NetworkView<'a> {
    pub net: &'a Network,
    disabled: Vec<bool>,
    overlay: HashMap<ArcId, Cost>,
}

impl<'a> NetworkView<'a> {
    pub fn full(net: &'a Network) -> Self {
        NetworkView {
            net,
            disabled: vec![false; net.arcs.len()],
            overlay: HashMap::new(),
        }
    }

    /// Restricts sign-ins, served trains and deadheads to lines in `q`.
    pub fn for_qualification(net: &'a Network, q: &BTreeSet<String>) -> Self {
        let mut view = Self::full(net);
        let allowed: BTreeSet<u16> =
            q.iter().filter_map(|id| net.line_index(id)).collect();
        for (id, arc) in net.arcs.iter().enumerate() {
            let keep = match arc.kind {
                ArcKind::FilterArc { line, .. } => allowed.contains(&line),
                ArcKind::Train { task } => allowed.contains(&net.tasks[task as usize].line),
                ArcKind::Deadhead { k1, k2 } => {
                    allowed.contains(&net.tasks[k1 as usize].line)
                        && allowed.contains(&net.tasks[k2 as usize].line)
                }
                _ => true,
            };
            if !keep {
                view.disable(id);
            }
        }
        view
    }

    pub fn disable(&mut self, arc: ArcId) {
        self.disabled[arc] = true;
    }

    pub fn enabled(&self, arc: ArcId) -> bool {
        !self.disabled[arc]
    }

    pub fn set_cost(&mut self, arc: ArcId, cost: Cost) {
        self.overlay.insert(arc, cost);
    }

    pub fn add_cost(&mut self, arc: ArcId, delta: Cost) {
        let base = self.cost(arc);
        self.overlay.insert(arc, base + delta);
    }

    pub fn cost(&self, arc: ArcId) -> Cost {
        *self.overlay.get(&arc).unwrap_or(&self.net.arcs[arc].cost)
    }
}

/// Restricts a view to one member's replanning entry: only their virtual
/// (or original) sign-in chain stays open, shifts and the off-work bypass
/// close, and the search is pinned to the original duty layer on the
/// replanning day.
pub fn restrict_to_resumption(view: &mut NetworkView<'_>, hint: &HintEntry) {
    let keep = [hint.start_arc, hint.sign_in, hint.filter_arc];
    for (id, arc) in view.net.arcs.iter().enumerate() {
        let close = match arc.kind {
            ArcKind::StartArc | ArcKind::SignIn | ArcKind::FilterArc { .. } => !keep.contains(&id),
            ArcKind::Shift | ArcKind::OffWork => true,
            _ => false,
        };
        if close {
            view.disable(id);
        }
    }
    // The virtual sign-in repeats no real action.
    view.set_cost(hint.start_arc, 0.0);
    view.set_cost(hint.sign_in, 0.0);
    view.set_cost(hint.filter_arc, 0.0);
}

/// Same restriction for a member who signs in after the cut: the original
/// frame's normal entry stays open, restricted to qualified lines.
pub fn restrict_to_layer(
    view: &mut NetworkView<'_>,
    day: u32,
    duty: u32,
    q: &BTreeSet<String>,
) {
    let allowed: BTreeSet<u16> = q.iter().filter_map(|id| view.net.line_index(id)).collect();
    let frame_start = view.net.frame_start(duty);
    for (id, arc) in view.net.arcs.iter().enumerate() {
        let close = match arc.kind {
            ArcKind::StartArc => !matches!(
                view.net.vertices[arc.to],
                VertexKind::Start { day: d, t } if d == day && t == frame_start
            ),
            ArcKind::SignIn => !matches!(
                view.net.vertices[arc.to],
                VertexKind::Filter { day: d, duty: u } if d == day && u == duty
            ) || !matches!(
                view.net.vertices[arc.from],
                VertexKind::Start { day: d, t } if d == day && t == frame_start
            ),
            ArcKind::FilterArc { line, .. } => {
                !matches!(
                    view.net.vertices[arc.from],
                    VertexKind::Filter { day: d, duty: u } if d == day && u == duty
                ) || !allowed.contains(&line)
            }
            ArcKind::Shift | ArcKind::OffWork => true,
            _ => false,
        };
        if close {
            view.disable(id);
        }
    }
}

/// Decodes an arc path into duty-list steps. Arcs in `skip` (the virtual
/// sign-in chain during replanning) produce no steps.
pub fn decode_path(net: &Network, path: &[ArcId], skip: &BTreeSet<ArcId>) -> DutyList {
    let mut steps = Vec::new();
    let p = &net.params;
    for (i, &aid) in path.iter().enumerate() {
        let arc = &net.arcs[aid];
        if skip.contains(&aid) {
            continue;
        }
        match arc.kind {
            ArcKind::SignIn => {
                // The entry depot comes from the following filter arc.
                let mut target = None;
                for &next in path.iter().skip(i + 1) {
                    if let ArcKind::FilterArc { line, depot } = net.arcs[next].kind {
                        if net.arcs[next].from == arc.to {
                            target = Some((line, depot, net.arcs[next].to));
                            break;
                        }
                    }
                }
                let (line, depot, entry) = target.expect("sign-in without filter arc");
                let (day, duty) = match net.vertices[entry] {
                    VertexKind::State { day, duty, .. } => (day, duty),
                    _ => unreachable!(),
                };
                let depot_name = net.lines[line as usize].depots[depot as usize].clone();
                let start = net.frame_start(duty);
                steps.push(PathStep {
                    arc_kind: StepKind::SignIn,
                    day,
                    duty,
                    line: Some(net.lines[line as usize].id.clone()),
                    task: None,
                    t_from: start,
                    t_to: start + p.t_si,
                    depot_from: depot_name.clone(),
                    depot_to: depot_name,
                });
            }
            ArcKind::Train { task } => {
                let t = &net.tasks[task as usize];
                let (day, duty) = state_ctx(net, arc.from);
                let line = &net.lines[t.line as usize];
                steps.push(PathStep {
                    arc_kind: StepKind::Train,
                    day,
                    duty,
                    line: Some(line.id.clone()),
                    task: Some(t.id.clone()),
                    t_from: t.dep_time,
                    t_to: t.arr_time,
                    depot_from: line.depots[t.dep_side as usize].clone(),
                    depot_to: line.depots[t.arr_side as usize].clone(),
                });
            }
            ArcKind::Rest | ArcKind::Meal | ArcKind::Idle => {
                let (day, duty) = state_ctx(net, arc.from);
                let (line, depot, t_from) = state_pos(net, arc.from);
                let t_to = net.vertices[arc.to].time().unwrap();
                let depot_name = net.lines[line as usize].depots[depot as usize].clone();
                steps.push(PathStep {
                    arc_kind: match arc.kind {
                        ArcKind::Rest => StepKind::Rest,
                        ArcKind::Meal => StepKind::Meal,
                        _ => StepKind::Idle,
                    },
                    day,
                    duty,
                    line: Some(net.lines[line as usize].id.clone()),
                    task: None,
                    t_from,
                    t_to,
                    depot_from: depot_name.clone(),
                    depot_to: depot_name,
                });
            }
            ArcKind::Deadhead { k1, k2 } => {
                let (day, duty) = state_ctx(net, arc.from);
                let t1 = &net.tasks[k1 as usize];
                let t2 = &net.tasks[k2 as usize];
                steps.push(PathStep {
                    arc_kind: StepKind::Deadhead,
                    day,
                    duty,
                    line: Some(net.lines[t2.line as usize].id.clone()),
                    task: None,
                    t_from: t1.dep_time,
                    t_to: t2.arr_time,
                    depot_from: net.lines[t1.line as usize].depots[t1.dep_side as usize].clone(),
                    depot_to: net.lines[t2.line as usize].depots[t2.arr_side as usize].clone(),
                });
            }
            ArcKind::SignOut { line, depot } => {
                let (day, duty) = state_ctx(net, arc.from);
                let t_from = net.vertices[arc.from].time().unwrap();
                let depot_name = net.lines[line as usize].depots[depot as usize].clone();
                steps.push(PathStep {
                    arc_kind: StepKind::SignOut,
                    day,
                    duty,
                    line: Some(net.lines[line as usize].id.clone()),
                    task: None,
                    t_from,
                    t_to: t_from + p.t_so,
                    depot_from: depot_name.clone(),
                    depot_to: depot_name,
                });
            }
            _ => {}
        }
    }
    steps
}

fn state_ctx(net: &Network, v: VertexId) -> (u32, u32) {
    match net.vertices[v] {
        VertexKind::State { day, duty, .. } => (day, duty),
        _ => unreachable!("expected state vertex"),
    }
}

fn state_pos(net: &Network, v: VertexId) -> (u16, u8, Minutes) {
    match net.vertices[v] {
        VertexKind::State { line, depot, t, .. } => (line, depot, t),
        _ => unreachable!("expected state vertex"),
    }
}

/// Text edge list for golden-file comparison.
pub fn export_edge_list(net: &Network) -> String {
    let mut lines = Vec::new();
    for arc in &net.arcs {
        lines.push(format!(
            "{:?} -> {:?} [{:?} cost={:.3}]",
            net.vertices[arc.from], net.vertices[arc.to], arc.kind, arc.cost
        ));
    }
    lines.join("\n")
}
