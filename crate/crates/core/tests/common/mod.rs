//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)] // each test binary uses a different subset

use std::collections::{BTreeMap, BTreeSet};

use metrocrew::htsn::{ArcId, ArcKind, Network, NetworkView, VertexId};
use metrocrew::model::{
    generate_crew, generate_tasks, perturb_timetable, CrewMember, Instance, Line, Params,
    TransferStation,
};
use metrocrew::pulse::ResourceLimits;
use metrocrew::replanner::DisruptionScenario;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Planning parameters scaled down so toy instances stay enumerable.
pub fn toy_params() -> Params {
    Params {
        duty_len: 240,
        h: 240,
        t_min: 150,
        t_max: 240,
        t_rt: 10,
        t_ml: 30,
        t_mb: 40,
        t_me: 200,
        t_si: 10,
        t_so: 10,
        t_tf: 5,
        n_df: 0,
        n_tf: 10,
        lambda_o: 50.0,
        c_w: 1.0,
        c_r: 0.2,
        lambda_factor: 4.0,
    }
}

/// Full-scale parameters used by the desk-size benchmark instances.
pub fn bench_params() -> Params {
    Params {
        duty_len: 540,
        h: 120,
        t_min: 530,
        t_max: 540,
        t_rt: 10,
        t_ml: 45,
        t_mb: 120,
        t_me: 420,
        t_si: 20,
        t_so: 20,
        t_tf: 5,
        n_df: 1,
        n_tf: 10,
        lambda_o: 50.0,
        c_w: 1.0,
        c_r: 0.2,
        lambda_factor: 4.0,
    }
}

pub fn line(id: &str, d0: &str, d1: &str, run: i64, headway: i64, window: (i64, i64)) -> Line {
    Line {
        id: id.into(),
        depots: [d0.into(), d1.into()],
        run,
        headway,
        window,
    }
}

/// Two short lines joined by a mid-line transfer, a handful of tasks, and
/// a small mixed crew.
pub fn small_two_line_instance(days: u32, n_crew: usize, seed: u64) -> Instance {
    let params = toy_params();
    let lines = vec![
        line("L1", "A", "B", 40, 60, (20, 140)),
        line("L2", "C", "D", 35, 60, (30, 150)),
    ];
    let mut tasks = Vec::new();
    for d in 0..days {
        for l in &lines {
            tasks.extend(generate_tasks(l, d, &params));
        }
    }
    let mut inst = Instance {
        days,
        horizon: (0, 240),
        params,
        lines,
        transfers: vec![TransferStation {
            line_a: "L1".into(),
            line_b: "L2".into(),
            frac_a: 0.5,
            frac_b: 0.5,
        }],
        tasks,
        crew: Vec::new(),
    };
    inst.crew = generate_crew(n_crew, &inst, seed);
    inst.validate().expect("fixture is valid");
    inst
}

/// Deduplicates and sorts requirement-set fixtures for Hall tests.
pub fn req(lines: &[&str]) -> BTreeSet<String> {
    lines.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Oracle for the counting feasibility check: maximum bipartite matching of
/// requirements to qualified members by augmenting paths.
pub fn matchable(reqs: &[BTreeSet<String>], crew: &[CrewMember]) -> bool {
    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            if !seen[c] {
                seen[c] = true;
                if owner[c].is_none() || augment(owner[c].unwrap(), adj, seen, owner) {
                    owner[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    let adj: Vec<Vec<usize>> = reqs
        .iter()
        .map(|req| {
            crew.iter()
                .enumerate()
                .filter(|(_, m)| req.is_subset(&m.qualification))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let mut owner = vec![None; crew.len()];
    reqs.len()
        == (0..reqs.len())
            .filter(|&r| {
                let mut seen = vec![false; crew.len()];
                augment(r, &adj, &mut seen, &mut owner)
            })
            .count()
}

/// Number of enabled source-to-sink paths, saturating at `cap`.
pub fn count_paths(view: &NetworkView<'_>, cap: u64) -> u64 {
    let net = view.net;
    let mut paths = vec![0u64; net.vertices.len()];
    paths[net.sink] = 1;
    for &v in net.topo.iter().rev() {
        for &a in &net.out[v] {
            if view.enabled(a) {
                paths[v] = paths[v].saturating_add(paths[net.arcs[a].to]).min(cap);
            }
        }
    }
    paths[net.source]
}

/// Sequence feasibility checked directly on the arc kinds, independent of
/// the search's pruning logic.
fn sequence_feasible(
    seq: &[ArcId],
    net: &Network,
    limits: ResourceLimits,
    precharged: bool,
) -> bool {
    let mut n_si = 0;
    let mut n_dh = 0;
    let mut meal = precharged as u32;
    for &a in seq {
        match net.arcs[a].kind {
            ArcKind::SignIn => n_si += 1,
            ArcKind::Deadhead { .. } => n_dh += 1,
            ArcKind::Meal => meal += 1,
            ArcKind::SignOut { .. } => {
                if meal != 1 {
                    return false;
                }
            }
            ArcKind::Shift => meal = 0,
            _ => {}
        }
    }
    n_si <= limits.max_sign_ins && n_dh <= limits.max_deadheads && meal <= 1
}

/// Oracle for the constrained search: enumerate every source-to-sink path by
/// plain depth-first search and keep the cheapest feasible one.
pub fn brute_force_cspp(
    view: &NetworkView<'_>,
    limits: ResourceLimits,
    precharged: bool,
) -> Option<f64> {
    fn go(
        view: &NetworkView<'_>,
        limits: ResourceLimits,
        precharged: bool,
        v: VertexId,
        seq: &mut Vec<ArcId>,
        cost: f64,
        best: &mut Option<f64>,
    ) {
        let net = view.net;
        if v == net.sink {
            if sequence_feasible(seq, net, limits, precharged)
                && best.map(|b| cost < b).unwrap_or(true)
            {
                *best = Some(cost);
            }
            return;
        }
        for &a in &net.out[v] {
            if view.enabled(a) {
                seq.push(a);
                go(view, limits, precharged, net.arcs[a].to, seq, cost + view.cost(a), best);
                seq.pop();
            }
        }
    }
    let mut best = None;
    go(view, limits, precharged, view.net.source, &mut Vec::new(), 0.0, &mut best);
    best
}

/// Cheapest feasible path cost per distinct covered-task set, by exhaustive
/// enumeration. The key is the set of served task ids.
pub fn enumerate_task_set_costs(
    view: &NetworkView<'_>,
    limits: ResourceLimits,
) -> BTreeMap<BTreeSet<String>, f64> {
    fn go(
        view: &NetworkView<'_>,
        limits: ResourceLimits,
        v: VertexId,
        seq: &mut Vec<ArcId>,
        cost: f64,
        out: &mut BTreeMap<BTreeSet<String>, f64>,
    ) {
        let net = view.net;
        if v == net.sink {
            if sequence_feasible(seq, net, limits, false) {
                let tasks: BTreeSet<String> = seq
                    .iter()
                    .filter_map(|&a| match net.arcs[a].kind {
                        ArcKind::Train { task } => Some(net.tasks[task as usize].id.clone()),
                        _ => None,
                    })
                    .collect();
                let entry = out.entry(tasks).or_insert(f64::INFINITY);
                if cost < *entry {
                    *entry = cost;
                }
            }
            return;
        }
        for &a in &net.out[v] {
            if view.enabled(a) {
                seq.push(a);
                go(view, limits, net.arcs[a].to, seq, cost + view.cost(a), out);
                seq.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    go(view, limits, view.net.source, &mut Vec::new(), 0.0, &mut out);
    out
}

// ---------------------------------------------------------------------------
// Randomized fixture generators
// ---------------------------------------------------------------------------

/// Small randomized instance for path-search cross-checks: one or two short
/// lines, sometimes joined by a transfer, one or two days.
pub fn random_tiny_instance(rng: &mut ChaCha8Rng) -> Instance {
    let mut params = toy_params();
    params.n_tf = rng.gen_range(0..=2);
    let days = rng.gen_range(1..=2);
    let two_lines = rng.gen_bool(0.5);
    let mut lines = vec![line(
        "L1",
        "A",
        "B",
        *[30, 40].choose(rng).unwrap(),
        *[60, 120].choose(rng).unwrap(),
        (20, rng.gen_range(60..=140)),
    )];
    let mut transfers = Vec::new();
    if two_lines {
        lines.push(line(
            "L2",
            "C",
            "D",
            *[30, 35].choose(rng).unwrap(),
            *[60, 120].choose(rng).unwrap(),
            (30, rng.gen_range(60..=150)),
        ));
        if rng.gen_bool(0.7) {
            transfers.push(TransferStation {
                line_a: "L1".into(),
                line_b: "L2".into(),
                frac_a: 0.5,
                frac_b: 0.5,
            });
        }
    }
    let mut tasks = Vec::new();
    for d in 0..days {
        for l in &lines {
            tasks.extend(generate_tasks(l, d, &params));
        }
    }
    let inst = Instance {
        days,
        horizon: (0, 240),
        params,
        lines,
        transfers,
        tasks,
        crew: Vec::new(),
    };
    inst.validate().expect("random tiny instance is valid");
    inst
}

/// Tiny one-day instance whose roster space can be enumerated exhaustively.
/// Every member prefers all depots of their qualified lines, so depot
/// penalties vanish and the optimum is a pure path-selection question.
pub fn exhaustive_toy(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = toy_params();
    let two_lines = rng.gen_bool(0.5);
    let mut lines = vec![line(
        "L1",
        "A",
        "B",
        *[30, 40].choose(&mut rng).unwrap(),
        *[60, 120].choose(&mut rng).unwrap(),
        (20, rng.gen_range(80..=140)),
    )];
    if two_lines {
        lines.push(line(
            "L2",
            "C",
            "D",
            35,
            120,
            (30, rng.gen_range(80..=150)),
        ));
    }
    let mut tasks = Vec::new();
    for l in &lines {
        tasks.extend(generate_tasks(l, 0, &params));
    }
    let line_ids: Vec<String> = lines.iter().map(|l| l.id.clone()).collect();
    let n_crew = rng.gen_range(2..=3);
    let crew: Vec<CrewMember> = (0..n_crew)
        .map(|i| {
            let k = rng.gen_range(1..=line_ids.len());
            let mut qual = BTreeSet::new();
            while qual.len() < k {
                qual.insert(line_ids.choose(&mut rng).unwrap().clone());
            }
            let preferred: BTreeSet<String> = lines
                .iter()
                .filter(|l| qual.contains(&l.id))
                .flat_map(|l| l.depots.iter().cloned())
                .collect();
            CrewMember {
                id: format!("r{i:03}"),
                qualification: qual,
                preferred_depots: preferred,
            }
        })
        .collect();
    let inst = Instance {
        days: 1,
        horizon: (0, 240),
        params,
        lines,
        transfers: Vec::new(),
        tasks,
        crew,
    };
    inst.validate().expect("exhaustive toy is valid");
    inst
}

// ---------------------------------------------------------------------------
// Benchmark-scale fixtures
// ---------------------------------------------------------------------------

/// Desk-scale benchmark: two transfer-linked lines, two days, roughly two
/// hundred tasks, forty crew. The timetable gets a seed-specific jitter so
/// paired seeds vary both the schedule and the crew mix.
pub fn bench_instance(seed: u64) -> Instance {
    let params = bench_params();
    let horizon = (0, 1140);
    let lines = vec![
        line("L1", "A", "B", 55, 40, (40, 1060)),
        line("L2", "C", "D", 47, 40, (50, 1050)),
    ];
    let mut tasks = Vec::new();
    for d in 0..2 {
        for l in &lines {
            tasks.extend(generate_tasks(l, d, &params));
        }
    }
    let tasks = perturb_timetable(&tasks, horizon, seed);
    let mut inst = Instance {
        days: 2,
        horizon,
        params,
        lines,
        transfers: vec![TransferStation {
            line_a: "L1".into(),
            line_b: "L2".into(),
            frac_a: 0.5,
            frac_b: 0.5,
        }],
        tasks,
        crew: Vec::new(),
    };
    // Half the crew is dual-qualified so disrupted evenings can borrow
    // drivers across the transfer; the rest split between the lines.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut crew = Vec::new();
    for i in 0..40u32 {
        let qual: BTreeSet<String> = if i % 2 == 0 {
            ["L1", "L2"].iter().map(|s| s.to_string()).collect()
        } else if i % 4 == 1 {
            std::iter::once("L1".to_string()).collect()
        } else {
            std::iter::once("L2".to_string()).collect()
        };
        let depots: Vec<String> = inst
            .lines
            .iter()
            .filter(|l| qual.contains(&l.id))
            .flat_map(|l| l.depots.iter().cloned())
            .collect();
        let preferred: BTreeSet<String> =
            depots.choose_multiple(&mut rng, 2).cloned().collect();
        crew.push(CrewMember {
            id: format!("r{i:03}"),
            qualification: qual,
            preferred_depots: preferred,
        });
    }
    inst.crew = crew;
    inst.validate().expect("bench instance is valid");
    inst
}

/// Evening surge on the second line of the benchmark instances.
pub fn bench_scenario() -> DisruptionScenario {
    DisruptionScenario {
        day: 1,
        t_bar: 690,
        line: "L2".into(),
        window: (700, 1000),
        headway: 25,
        penalty_mult: 3.0,
        theta: 2,
    }
}
