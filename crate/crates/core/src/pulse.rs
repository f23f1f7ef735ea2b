//! Depth-first pulse search for resource-constrained shortest paths on the
//! time-space network. Three prunes keep it fast: infeasibility (resource
//! caps and the meal window), a lower bound from the unconstrained
//! cost-to-sink, and dominance between partial paths at a vertex.

use std::collections::BTreeMap;

use crate::htsn::{ArcId, ArcKind, NetworkView, VertexId, VertexKind};
use crate::model::Cost;

const EPS: Cost = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct ResourceLimits {
    pub max_sign_ins: u32,
    pub max_deadheads: u32,
}

#[derive(Debug, Clone)]
pub struct PulseResult {
    pub cost: Cost,
    pub path: Vec<ArcId>,
}

/// Shortest cost-to-sink per vertex and remaining sign-in allowance, in
/// reverse topological order. `bounds[v][r]` is the cheapest way to reach
/// the sink from `v` using at most `r` further sign-ins; unreachable
/// combinations get +inf. Capping the sign-ins here keeps the bound tight
/// when the allowance is smaller than the number of days.
pub fn compute_bounds(view: &NetworkView<'_>, max_sign_ins: u32) -> Vec<Vec<Cost>> {
    let net = view.net;
    let r_max = max_sign_ins.min(net.days) as usize;
    let mut bound = vec![vec![Cost::INFINITY; r_max + 1]; net.vertices.len()];
    bound[net.sink] = vec![0.0; r_max + 1];
    for &v in net.topo.iter().rev() {
        for &a in &net.out[v] {
            if !view.enabled(a) {
                continue;
            }
            let sign_in = matches!(net.arcs[a].kind, ArcKind::SignIn);
            let cost = view.cost(a);
            let via: Vec<Cost> = (0..=r_max)
                .map(|r| {
                    let to = &bound[net.arcs[a].to];
                    if sign_in {
                        if r == 0 {
                            Cost::INFINITY
                        } else {
                            cost + to[r - 1]
                        }
                    } else {
                        cost + to[r]
                    }
                })
                .collect();
            let row = &mut bound[v];
            for (r, c) in via.into_iter().enumerate() {
                if c < row[r] {
                    row[r] = c;
                }
            }
        }
    }
    // More allowance never hurts: make rows monotone non-increasing in r.
    for row in &mut bound {
        for r in 1..row.len() {
            if row[r - 1] < row[r] {
                row[r] = row[r - 1];
            }
        }
    }
    bound
}

struct Frame {
    cost: Cost,
    n_si: u32,
    n_dh: u32,
    meal: u8,
    via: Option<ArcId>,
    children: Vec<ArcId>,
    next: usize,
}

/// Cheapest feasible source-to-sink path, or None. `meal_precharged` marks
/// the first duty's meal as already taken (a replanning suffix whose prefix
/// ate before the cut).
pub fn solve_cspp(
    view: &NetworkView<'_>,
    limits: ResourceLimits,
    meal_precharged: bool,
) -> Option<PulseResult> {
    let net = view.net;
    let r_max = limits.max_sign_ins.min(net.days) as usize;
    let bound = compute_bounds(view, limits.max_sign_ins);
    if bound[net.source][r_max].is_infinite() {
        return None;
    }

    // Remaining sign-in allowance after traversing `a` with `r` left before.
    let rem_after = |a: ArcId, r: usize| -> Option<usize> {
        if matches!(net.arcs[a].kind, ArcKind::SignIn) {
            r.checked_sub(1)
        } else {
            Some(r)
        }
    };

    // Child order per (vertex, remaining sign-ins): promising arcs first,
    // arc id as tie-break.
    let mut child_cache: Vec<Option<Vec<ArcId>>> = vec![None; net.vertices.len() * (r_max + 1)];
    let children = |v: VertexId, r: usize, cache: &mut Vec<Option<Vec<ArcId>>>| -> Vec<ArcId> {
        let slot = v * (r_max + 1) + r;
        if let Some(c) = &cache[slot] {
            return c.clone();
        }
        let mut arcs: Vec<(Cost, ArcId)> = net.out[v]
            .iter()
            .copied()
            .filter_map(|a| {
                if !view.enabled(a) {
                    return None;
                }
                let rr = rem_after(a, r)?;
                let b = bound[net.arcs[a].to][rr];
                b.is_finite().then_some((view.cost(a) + b, a))
            })
            .collect();
        arcs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let order: Vec<ArcId> = arcs.into_iter().map(|(_, a)| a).collect();
        cache[slot] = Some(order.clone());
        order
    };

    // Non-dominated (cost, n_si, n_dh) labels seen per (vertex, meal flag).
    let mut labels: BTreeMap<(VertexId, u8), Vec<(Cost, u32, u32)>> = BTreeMap::new();

    let init_meal = meal_precharged as u8;
    let mut best: Option<PulseResult> = None;
    let mut stack = vec![Frame {
        cost: 0.0,
        n_si: 0,
        n_dh: 0,
        meal: init_meal,
        via: None,
        children: children(net.source, r_max, &mut child_cache),
        next: 0,
    }];

    while let Some(top) = stack.last_mut() {
        if top.next >= top.children.len() {
            stack.pop();
            continue;
        }
        let arc_id = top.children[top.next];
        top.next += 1;

        let (cost, n_si, n_dh, meal) = (top.cost, top.n_si, top.n_dh, top.meal);
        let arc = &net.arcs[arc_id];

        let mut n_si = n_si;
        let mut n_dh = n_dh;
        let mut meal = meal;
        match arc.kind {
            ArcKind::SignIn => {
                n_si += 1;
                if n_si > limits.max_sign_ins {
                    continue;
                }
            }
            ArcKind::Deadhead { .. } => {
                n_dh += 1;
                if n_dh > limits.max_deadheads {
                    continue;
                }
            }
            ArcKind::Meal => {
                if meal == 1 {
                    continue;
                }
                meal = 1;
            }
            ArcKind::SignOut { .. } => {
                if meal == 0 {
                    continue;
                }
            }
            ArcKind::Shift => {
                meal = 0;
            }
            _ => {}
        }
        let w = arc.to;
        let new_cost = cost + view.cost(arc_id);

        // Lookahead: the meal window must still be open.
        if meal == 0 {
            if let VertexKind::State { duty, t, .. } = net.vertices[w] {
                let p = &net.params;
                let deadline = net.frame_start(duty) + p.t_me - p.t_ml;
                if t > deadline {
                    continue;
                }
            }
        }

        let remaining = r_max.saturating_sub(n_si as usize);
        let incumbent = best.as_ref().map(|b| b.cost).unwrap_or(Cost::INFINITY);
        if new_cost + bound[w][remaining] >= incumbent - EPS {
            continue;
        }

        if w == net.sink {
            let mut path: Vec<ArcId> = stack.iter().filter_map(|f| f.via).collect();
            path.push(arc_id);
            best = Some(PulseResult { cost: new_cost, path });
            continue;
        }

        let entry = labels.entry((w, meal)).or_default();
        if entry
            .iter()
            .any(|&(c, si, dh)| c <= new_cost + EPS && si <= n_si && dh <= n_dh)
        {
            continue;
        }
        entry.retain(|&(c, si, dh)| !(new_cost <= c + EPS && n_si <= si && n_dh <= dh));
        entry.push((new_cost, n_si, n_dh));

        let kids = children(w, remaining, &mut child_cache);
        stack.push(Frame {
            cost: new_cost,
            n_si,
            n_dh,
            meal,
            via: Some(arc_id),
            children: kids,
            next: 0,
        });
    }
    let _ = stack;
    best
}
