//! Two-stage planning. Stage one generates duty-list columns by pricing
//! resource-constrained shortest paths against the relaxed master problem,
//! whose rows are the qualification-group counting constraints and the
//! serve-once task rows; a branch-and-bound pass makes the selection
//! integral. Stage two assigns the selected lists to named crew members.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::htsn::{build_network, ArcId, ArcKind, HtsnError, Network, NetworkView};
use crate::lpsolve::{solve_bip, solve_lp, LpError, LpModel, LpStatus, Sense};
use crate::matching::{assign_duties, QualificationUniverse};
use crate::model::{Cost, Instance};
use crate::pulse::{solve_cspp, ResourceLimits};
use crate::roster::{total_objective, DutyList, Roster};

const SIGMA_TOL: Cost = 1e-9;
const MAX_CG_ITERATIONS: usize = 5000;
const MAX_RIP_NODES: usize = 50;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Network(#[from] HtsnError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("planning failed: {0}")]
    Internal(String),
}

/// One generated duty-list column.
#[derive(Debug, Clone)]
pub struct Column {
    pub path: Vec<ArcId>,
    pub steps: DutyList,
    /// Raw arc cost: labor minus the penalty rebates of covered tasks.
    pub cost: Cost,
    pub tasks: Vec<u32>,
    pub req: BTreeSet<String>,
    pub group: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanMetrics {
    pub obj: Cost,
    pub labor: Cost,
    pub cancel: Cost,
    pub preference: Cost,
    pub coverage: f64,
    pub iterations: usize,
    pub columns: usize,
    pub wall_time_s: f64,
}

/// Relaxed-master state per column-generation round, for convergence and
/// duality checks.
#[derive(Debug, Clone, Serialize)]
pub struct RlmpTrace {
    pub lp_objective: Cost,
    pub dual_objective: Cost,
    pub min_sigma: Cost,
}

#[derive(Debug)]
pub struct PlanResult {
    pub roster: Roster,
    pub metrics: PlanMetrics,
    pub trace: Vec<RlmpTrace>,
}

pub fn column_from_path(net: &Network, path: Vec<ArcId>) -> Column {
    let steps = crate::htsn::decode_path(net, &path, &BTreeSet::new());
    let mut tasks = Vec::new();
    let mut req = BTreeSet::new();
    let mut cost = 0.0;
    for &a in &path {
        let arc = &net.arcs[a];
        cost += arc.cost;
        match arc.kind {
            ArcKind::Train { task } => {
                tasks.push(task);
                req.insert(net.lines[net.tasks[task as usize].line as usize].id.clone());
            }
            ArcKind::Deadhead { k1, k2 } => {
                for k in [k1, k2] {
                    req.insert(net.lines[net.tasks[k as usize].line as usize].id.clone());
                }
            }
            _ => {}
        }
    }
    tasks.sort_unstable();
    Column { path, steps, cost, tasks, req, group: 0 }
}

/// Greedy per-member covering paths: each member in id order searches their
/// qualified subnetwork with already-covered train arcs removed. Doubles as
/// both the column-generation warm start and the sequential heuristic.
pub fn greedy_cover_paths(instance: &Instance, net: &Network) -> Vec<Column> {
    let limits = ResourceLimits {
        max_sign_ins: instance.days.saturating_sub(instance.params.n_df),
        max_deadheads: instance.params.n_tf,
    };
    let mut covered: BTreeSet<ArcId> = BTreeSet::new();
    let mut columns = Vec::new();
    // Narrowly qualified members choose first; the broadly qualified ones
    // can still reroute around whatever is already covered.
    let mut order: Vec<&crate::model::CrewMember> = instance.crew.iter().collect();
    order.sort_by_key(|m| (m.qualification.len(), m.id.clone()));
    for member in order {
        let mut view = NetworkView::for_qualification(net, &member.qualification);
        for &a in &covered {
            view.disable(a);
        }
        let Some(result) = solve_cspp(&view, limits, false) else {
            continue;
        };
        if result.path == vec![net.off_work_arc] {
            continue;
        }
        let column = column_from_path(net, result.path);
        for &t in &column.tasks {
            for &a in &net.task_arcs[t as usize] {
                covered.insert(a);
            }
        }
        columns.push(column);
    }
    columns
}

struct Master {
    model: LpModel,
    universe: QualificationUniverse,
    columns: Vec<Column>,
    known_paths: BTreeSet<Vec<ArcId>>,
}

impl Master {
    fn new(instance: &Instance, net: &Network) -> Self {
        let universe = QualificationUniverse::from_crew(&instance.crew);
        let mut model = LpModel::new();
        for &s in &universe.family {
            model.add_row(Vec::new(), Sense::Le, universe.capacity(s) as f64);
        }
        for _ in 0..net.tasks.len() {
            model.add_row(Vec::new(), Sense::Le, 1.0);
        }
        Master {
            model,
            universe,
            columns: Vec::new(),
            known_paths: BTreeSet::new(),
        }
    }

    fn add_column(&mut self, mut column: Column) -> bool {
        if !self.known_paths.insert(column.path.clone()) {
            return false;
        }
        column.group = self.universe.group(&column.req);
        let mut entries = Vec::new();
        for (si, &s) in self.universe.family.iter().enumerate() {
            if column.group & !s == 0 {
                entries.push((si, 1.0));
            }
        }
        for &t in &column.tasks {
            entries.push((self.universe.family.len() + t as usize, 1.0));
        }
        self.model.add_column(column.cost, &entries);
        self.columns.push(column);
        true
    }

    /// Reduced cost of an already-priced path with requirement group `g`:
    /// the overlay pulse cost minus the group-row duals it belongs to.
    fn sigma(&self, overlay_cost: Cost, g: u64, duals: &[f64]) -> Cost {
        let mut sigma = overlay_cost;
        for (si, &s) in self.universe.family.iter().enumerate() {
            if g & !s == 0 {
                sigma -= duals[si];
            }
        }
        sigma
    }

    fn dual_objective(&self, duals: &[f64]) -> Cost {
        self.model
            .rows
            .iter()
            .zip(duals)
            .map(|(row, y)| row.rhs * y)
            .sum()
    }
}

pub fn plan(instance: &Instance) -> Result<PlanResult, PlanError> {
    let started = Instant::now();
    let net = build_network(instance, &[])?;
    let mut master = Master::new(instance, &net);
    let limits = ResourceLimits {
        max_sign_ins: instance.days.saturating_sub(instance.params.n_df),
        max_deadheads: instance.params.n_tf,
    };

    let mut greedy_n = 0usize;
    for column in greedy_cover_paths(instance, &net) {
        if master.add_column(column) {
            greedy_n += 1;
        }
    }

    // One pristine qualified view per distinct qualification set.
    let qual_views: Vec<NetworkView<'_>> = master
        .universe
        .quals
        .iter()
        .map(|q| {
            let mut view = NetworkView::for_qualification(&net, q);
            view.disable(net.off_work_arc);
            view
        })
        .collect();

    let mut warm: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > MAX_CG_ITERATIONS {
            log::warn!("column generation stopped at the iteration cap");
            break;
        }
        let sol = solve_lp(&master.model, warm.as_deref())?;
        if sol.status != LpStatus::Optimal {
            return Err(PlanError::Internal(format!(
                "relaxed master not optimal: {:?}",
                sol.status
            )));
        }
        warm = Some(sol.basis.clone());

        let n_groups = master.universe.family.len();
        let mut min_sigma: Cost = 0.0;
        let mut fresh = 0;
        for view in &qual_views {
            let mut priced = view.clone();
            for (t, arcs) in net.task_arcs.iter().enumerate() {
                let nu = sol.duals[n_groups + t];
                if nu != 0.0 {
                    for &a in arcs {
                        priced.set_cost(a, net.arcs[a].cost - nu);
                    }
                }
            }
            let Some(result) = solve_cspp(&priced, limits, false) else {
                continue;
            };
            let column = column_from_path(&net, result.path);
            let g = master.universe.group(&column.req);
            let sigma = master.sigma(result.cost, g, &sol.duals);
            if sigma < min_sigma {
                min_sigma = sigma;
            }
            if sigma < -SIGMA_TOL && master.add_column(column) {
                fresh += 1;
            }
        }
        trace.push(RlmpTrace {
            lp_objective: sol.objective,
            dual_objective: master.dual_objective(&sol.duals),
            min_sigma,
        });
        if fresh == 0 {
            if min_sigma < -SIGMA_TOL {
                log::warn!("pricing stalled with min reduced cost {min_sigma:.3e}");
            }
            break;
        }
    }

    // Integral selection over the generated pool, seeded with the greedy
    // covering so a truncated search never falls below it.
    let mut incumbent = vec![0.0; master.columns.len()];
    for x in incumbent.iter_mut().take(greedy_n) {
        *x = 1.0;
    }
    let bip = solve_bip(&master.model, MAX_RIP_NODES, Some(&incumbent))?
        .ok_or_else(|| PlanError::Internal("integer master infeasible".into()))?;
    if !bip.proven_optimal {
        log::warn!("integer master hit the node cap; best found kept");
    }
    let duties: Vec<DutyList> = master
        .columns
        .iter()
        .zip(&bip.x)
        .filter(|(_, &x)| x > 0.5)
        .map(|(c, _)| c.steps.clone())
        .collect();

    let (_, roster) = assign_duties(instance, &duties)
        .ok_or_else(|| PlanError::Internal("stage-two assignment infeasible".into()))?;
    let breakdown = total_objective(instance, &roster);
    let coverage = roster.coverage(instance);
    let mut roster = roster;
    roster.objective = Some(breakdown.clone());

    Ok(PlanResult {
        metrics: PlanMetrics {
            obj: breakdown.obj,
            labor: breakdown.labor,
            cancel: breakdown.cancel,
            preference: breakdown.preference,
            coverage,
            iterations,
            columns: master.columns.len(),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        roster,
        trace,
    })
}

/// Stage-one objective of a column multiset: column costs plus the full
/// cancellation constant.
pub fn stage_one_objective(instance: &Instance, columns: &[&Column]) -> Cost {
    columns.iter().map(|c| c.cost).sum::<Cost>() + instance.total_cancel_penalty()
}
