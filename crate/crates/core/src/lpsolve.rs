//! Self-contained linear programming: a two-phase revised simplex with a
//! dense basis inverse, warm-startable between column-generation rounds,
//! and a best-first branch-and-bound for binary programs on top of it.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

const FEAS_EPS: f64 = 1e-7;
const OPT_EPS: f64 = 1e-9;
const INT_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("branch-and-bound node limit reached")]
    NodeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP over nonnegative variables.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    pub costs: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Appends a variable with entries in existing rows; the layout keeps
    /// earlier warm-start bases valid.
    pub fn add_column(&mut self, cost: f64, entries: &[(usize, f64)]) -> usize {
        let j = self.costs.len();
        self.costs.push(cost);
        for &(row, coef) in entries {
            self.rows[row].coeffs.push((j, coef));
        }
        j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// One dual per row, in the original row orientation.
    pub duals: Vec<f64>,
    /// Standard-form basis for warm starts.
    pub basis: Vec<usize>,
}

struct Standard {
    m: usize,
    cols: Vec<Vec<f64>>,
    costs: Vec<f64>,
    b: Vec<f64>,
    n_aux: usize,
    artificial_from: usize,
    flipped: Vec<bool>,
    structural: usize,
    senses: Vec<Sense>,
}

fn standardize(model: &LpModel) -> Standard {
    let m = model.rows.len();
    let n = model.num_vars();
    let mut flipped = vec![false; m];
    let mut senses = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for (i, row) in model.rows.iter().enumerate() {
        let (sense, rhs) = if row.rhs < 0.0 {
            flipped[i] = true;
            let s = match row.sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            (s, -row.rhs)
        } else {
            (row.sense, row.rhs)
        };
        senses.push(sense);
        b.push(rhs);
    }

    // Layout: slacks/surpluses, then artificials, then structural columns.
    let n_slack = senses.iter().filter(|s| **s != Sense::Eq).count();
    let n_art = senses.iter().filter(|s| **s != Sense::Le).count();
    let n_aux = n_slack + n_art;
    let total = n_aux + n;
    let mut cols = vec![vec![0.0; m]; total];
    let mut costs = vec![0.0; total];
    let mut slack_idx = 0;
    let mut art_idx = n_slack;
    for i in 0..m {
        match senses[i] {
            Sense::Le => {
                cols[slack_idx][i] = 1.0;
                slack_idx += 1;
            }
            Sense::Ge => {
                cols[slack_idx][i] = -1.0;
                slack_idx += 1;
                cols[art_idx][i] = 1.0;
                art_idx += 1;
            }
            Sense::Eq => {
                cols[art_idx][i] = 1.0;
                art_idx += 1;
            }
        }
    }
    for (i, row) in model.rows.iter().enumerate() {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for &(j, coef) in &row.coeffs {
            cols[n_aux + j][i] += sign * coef;
        }
    }
    for j in 0..n {
        costs[n_aux + j] = model.costs[j];
    }
    Standard {
        m,
        cols,
        costs,
        b,
        n_aux,
        artificial_from: n_slack,
        flipped,
        structural: n,
        senses,
    }
}

/// The all-slack/artificial basis that standardize() sets up per row.
fn initial_basis(std: &Standard) -> Vec<usize> {
    let mut basis = Vec::with_capacity(std.m);
    let mut slack_idx = 0;
    let mut art_idx = std.artificial_from;
    for sense in &std.senses {
        match sense {
            Sense::Le => {
                basis.push(slack_idx);
                slack_idx += 1;
            }
            Sense::Ge => {
                slack_idx += 1;
                basis.push(art_idx);
                art_idx += 1;
            }
            Sense::Eq => {
                basis.push(art_idx);
                art_idx += 1;
            }
        }
    }
    basis
}

fn invert(basis: &[usize], std: &Standard) -> Option<Vec<Vec<f64>>> {
    let m = std.m;
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = basis.iter().map(|&j| std.cols[j][i]).collect();
            let mut id = vec![0.0; m];
            id[i] = 1.0;
            row.extend(id);
            row
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, pivot);
        let pv = a[col][col];
        for v in a[col].iter_mut() {
            *v /= pv;
        }
        for r in 0..m {
            if r != col && a[r][col].abs() > 0.0 {
                let f = a[r][col];
                for c in 0..2 * m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[m..].to_vec()).collect())
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

/// One simplex phase over the given cost vector; `banned` columns never
/// enter. Dantzig pricing with a permanent switch to Bland's rule.
#[allow(clippy::too_many_arguments)]
fn run_phase(
    std: &Standard,
    costs: &[f64],
    basis: &mut Vec<usize>,
    binv: &mut Vec<Vec<f64>>,
    xb: &mut Vec<f64>,
    banned: &[bool],
    iter_budget: &mut usize,
) -> Result<PhaseOutcome, LpError> {
    let m = std.m;
    let total = std.cols.len();
    let bland_after = 20 * (m + total);
    let mut iters = 0usize;
    loop {
        if *iter_budget == 0 {
            return Err(LpError::IterationLimit);
        }
        *iter_budget -= 1;
        iters += 1;
        if iters % 500 == 0 {
            if let Some(fresh) = invert(basis, std) {
                *binv = fresh;
                *xb = mat_vec(binv, &std.b);
            }
        }
        // y = c_B^T B^-1
        let mut y = vec![0.0; m];
        for (i, &bi) in basis.iter().enumerate() {
            let cb = costs[bi];
            if cb != 0.0 {
                for r in 0..m {
                    y[r] += cb * binv[i][r];
                }
            }
        }
        let bland = iters > bland_after;
        let mut entering: Option<(f64, usize)> = None;
        for j in 0..total {
            if banned[j] || basis.contains(&j) {
                continue;
            }
            let mut d = costs[j];
            for r in 0..m {
                if std.cols[j][r] != 0.0 {
                    d -= y[r] * std.cols[j][r];
                }
            }
            if d < -OPT_EPS {
                if bland {
                    entering = Some((d, j));
                    break;
                }
                match entering {
                    Some((bd, bj)) if (bd, bj) <= (d, j) => {}
                    _ => entering = Some((d, j)),
                }
            }
        }
        let Some((_, j)) = entering else {
            return Ok(PhaseOutcome::Optimal);
        };
        let dir = mat_vec(binv, &std.cols[j]);
        let mut leave: Option<(f64, usize)> = None;
        for i in 0..m {
            if dir[i] > 1e-9 {
                let ratio = xb[i] / dir[i];
                match leave {
                    Some((br, bi)) => {
                        if ratio < br - 1e-12
                            || (ratio < br + 1e-12 && basis[i] < basis[bi])
                        {
                            leave = Some((ratio, i));
                        }
                    }
                    None => leave = Some((ratio, i)),
                }
            }
        }
        let Some((ratio, r)) = leave else {
            return Ok(PhaseOutcome::Unbounded);
        };
        // Pivot: basis row r takes column j.
        basis[r] = j;
        let pivot = dir[r];
        for c in 0..m {
            binv[r][c] /= pivot;
        }
        xb[r] = ratio;
        for i in 0..m {
            if i != r && dir[i].abs() > 0.0 {
                let f = dir[i];
                for c in 0..m {
                    binv[i][c] -= f * binv[r][c];
                }
                xb[i] -= f * xb[r];
            }
        }
    }
}

fn mat_vec(mat: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    mat.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Solves the LP; an optional warm-start basis (from a previous solve of
/// the same rows with fewer columns) skips phase one.
pub fn solve_lp(model: &LpModel, warm: Option<&[usize]>) -> Result<LpSolution, LpError> {
    let std = standardize(model);
    let m = std.m;
    let total = std.cols.len();
    let mut iter_budget = 400 * (m + total) + 20_000;

    let is_artificial = |j: usize| j >= std.artificial_from && j < std.n_aux;

    let mut basis;
    let mut binv;
    let mut xb;
    if let Some(w) = warm {
        if w.len() == m && w.iter().all(|&j| j < total) {
            if let Some(inv) = invert(w, &std) {
                let x = mat_vec(&inv, &std.b);
                if x.iter().all(|&v| v >= -FEAS_EPS) {
                    basis = w.to_vec();
                    binv = inv;
                    xb = x;
                    let banned: Vec<bool> = (0..total).map(is_artificial).collect();
                    match run_phase(&std, &std.costs, &mut basis, &mut binv, &mut xb, &banned, &mut iter_budget)? {
                        PhaseOutcome::Optimal => {
                            return Ok(extract(model, &std, &basis, &binv, &xb));
                        }
                        PhaseOutcome::Unbounded => {
                            return Ok(unbounded(model, m));
                        }
                    }
                }
            }
        }
    }

    // Phase one from the all-slack/artificial basis.
    basis = initial_basis(&std);
    binv = invert(&basis, &std).expect("identity basis");
    xb = mat_vec(&binv, &std.b);
    let phase1_costs: Vec<f64> = (0..total).map(|j| if is_artificial(j) { 1.0 } else { 0.0 }).collect();
    let banned_none = vec![false; total];
    match run_phase(&std, &phase1_costs, &mut basis, &mut binv, &mut xb, &banned_none, &mut iter_budget)? {
        PhaseOutcome::Unbounded => unreachable!("phase one is bounded below by zero"),
        PhaseOutcome::Optimal => {}
    }
    let art_value: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| is_artificial(j))
        .map(|(i, _)| xb[i])
        .sum();
    if art_value > FEAS_EPS {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            x: vec![0.0; model.num_vars()],
            duals: vec![0.0; m],
            basis,
        });
    }
    // Drive lingering zero-valued artificials out where possible.
    for i in 0..m {
        if is_artificial(basis[i]) {
            let replacement = (0..total).find(|&j| {
                !is_artificial(j) && !basis.contains(&j) && {
                    let dir = mat_vec(&binv, &std.cols[j]);
                    dir[i].abs() > 1e-7
                }
            });
            if let Some(j) = replacement {
                let previous = basis[i];
                basis[i] = j;
                match invert(&basis, &std) {
                    Some(inv) => {
                        binv = inv;
                        xb = mat_vec(&binv, &std.b);
                    }
                    None => {
                        basis[i] = previous;
                    }
                }
            }
        }
    }

    let banned: Vec<bool> = (0..total).map(is_artificial).collect();
    match run_phase(&std, &std.costs, &mut basis, &mut binv, &mut xb, &banned, &mut iter_budget)? {
        PhaseOutcome::Optimal => Ok(extract(model, &std, &basis, &binv, &xb)),
        PhaseOutcome::Unbounded => Ok(unbounded(model, m)),
    }
}

fn unbounded(model: &LpModel, m: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Unbounded,
        objective: f64::NEG_INFINITY,
        x: vec![0.0; model.num_vars()],
        duals: vec![0.0; m],
        basis: Vec::new(),
    }
}

fn extract(model: &LpModel, std: &Standard, basis: &[usize], binv: &[Vec<f64>], xb: &[f64]) -> LpSolution {
    let m = std.m;
    let mut x = vec![0.0; std.structural];
    for (i, &j) in basis.iter().enumerate() {
        if j >= std.n_aux {
            x[j - std.n_aux] = xb[i].max(0.0);
        }
    }
    let mut y = vec![0.0; m];
    for (i, &bi) in basis.iter().enumerate() {
        let cb = std.costs[bi];
        if cb != 0.0 {
            for r in 0..m {
                y[r] += cb * binv[i][r];
            }
        }
    }
    for (r, f) in std.flipped.iter().enumerate() {
        if *f {
            y[r] = -y[r];
        }
    }
    let objective = x.iter().zip(&model.costs).map(|(a, c)| a * c).sum();
    LpSolution {
        status: LpStatus::Optimal,
        objective,
        x,
        duals: y,
        basis: basis.to_vec(),
    }
}

#[derive(Debug, Clone)]
pub struct BipSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// False when the node limit cut the search short of a proof.
    pub proven_optimal: bool,
}

struct Node {
    bound: f64,
    seq: u64,
    fixes: BTreeMap<usize, u8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap()
            .then(self.seq.cmp(&other.seq))
    }
}

/// Cost used to shut a variable out of a subproblem without adding a row;
/// keeping the row set unchanged lets those nodes warm-start.
const FIX_ZERO_COST: f64 = 1e9;

/// Rounds a fractional point greedily into a feasible 0/1 point of a pure
/// packing model (all rows <=, nonnegative data). Forced-one variables go
/// first; failure to place one of them means no rounding exists here.
fn round_packing(
    model: &LpModel,
    x: &[f64],
    fixes: &BTreeMap<usize, u8>,
) -> Option<(f64, Vec<f64>)> {
    let n = model.num_vars();
    let mut usage = vec![0.0f64; model.rows.len()];
    let mut chosen = vec![0.0f64; n];
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, c) in &row.coeffs {
            entries[j].push((i, c));
        }
    }
    let fits = |j: usize, usage: &mut Vec<f64>, chosen: &mut Vec<f64>| -> bool {
        if entries[j]
            .iter()
            .any(|&(i, c)| usage[i] + c > model.rows[i].rhs + FEAS_EPS)
        {
            return false;
        }
        for &(i, c) in &entries[j] {
            usage[i] += c;
        }
        chosen[j] = 1.0;
        true
    };
    for (&j, &v) in fixes {
        if v == 1 && !fits(j, &mut usage, &mut chosen) {
            return None;
        }
    }
    let mut order: Vec<usize> = (0..n)
        .filter(|j| !fixes.contains_key(j) && x[*j] > INT_EPS)
        .collect();
    order.sort_by(|&a, &b| (x[b], model.costs[a]).partial_cmp(&(x[a], model.costs[b])).unwrap());
    for j in order {
        fits(j, &mut usage, &mut chosen);
    }
    let obj = chosen.iter().zip(&model.costs).map(|(a, c)| a * c).sum();
    Some((obj, chosen))
}

/// Feasibility of a candidate 0/1 vector against every row.
fn binary_feasible(model: &LpModel, x: &[f64]) -> bool {
    if x.len() != model.num_vars() {
        return false;
    }
    if x.iter().any(|&v| (v - v.round()).abs() > INT_EPS || !(0.0..=1.0).contains(&v.round())) {
        return false;
    }
    model.rows.iter().all(|row| {
        let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
        match row.sense {
            Sense::Le => lhs <= row.rhs + INT_EPS,
            Sense::Ge => lhs >= row.rhs - INT_EPS,
            Sense::Eq => (lhs - row.rhs).abs() <= INT_EPS,
        }
    })
}

/// Best-first branch and bound over the 0/1 relaxation. `initial`, when
/// feasible, seeds the incumbent so a node-capped search never returns
/// anything worse.
pub fn solve_bip(
    model: &LpModel,
    max_nodes: usize,
    initial: Option<&[f64]>,
) -> Result<Option<BipSolution>, LpError> {
    let n = model.num_vars();
    let packing = model.rows.iter().all(|r| {
        r.sense == Sense::Le && r.rhs >= 0.0 && r.coeffs.iter().all(|&(_, c)| c >= 0.0)
    });

    let root = solve_lp(model, None)?;
    if root.status != LpStatus::Optimal {
        return Ok(None);
    }
    let root_basis = root.basis.clone();

    // Subproblem: zero-fixes by prohibitive cost (row set unchanged, so the
    // root basis stays warm-startable), one-fixes by equality rows.
    let relax = |fixes: &BTreeMap<usize, u8>| -> Result<LpSolution, LpError> {
        let mut sub = model.clone();
        let mut any_one = false;
        for (&j, &v) in fixes {
            if v == 0 {
                sub.costs[j] = FIX_ZERO_COST;
            } else {
                sub.add_row(vec![(j, 1.0)], Sense::Eq, 1.0);
                any_one = true;
            }
        }
        let warm = if any_one { None } else { Some(root_basis.as_slice()) };
        solve_lp(&sub, warm)
    };

    let mut best: Option<BipSolution> = None;
    if let Some(x0) = initial {
        if binary_feasible(model, x0) {
            let x: Vec<f64> = x0.iter().map(|v| v.round()).collect();
            let obj = x.iter().zip(&model.costs).map(|(a, c)| a * c).sum();
            best = Some(BipSolution { objective: obj, x, proven_optimal: false });
        }
    }
    let consider = |obj: f64, x: Vec<f64>, best: &mut Option<BipSolution>| {
        if best.as_ref().map(|b| obj < b.objective - INT_EPS).unwrap_or(true) {
            *best = Some(BipSolution { objective: obj, x, proven_optimal: false });
        }
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Reverse(Node { bound: root.objective, seq, fixes: BTreeMap::new() }));
    let mut nodes = 0usize;
    let mut exhausted = true;

    while let Some(Reverse(node)) = heap.pop() {
        if let Some(b) = &best {
            if node.bound >= b.objective - INT_EPS {
                continue;
            }
        }
        nodes += 1;
        if nodes > max_nodes {
            exhausted = false;
            break;
        }
        let sol = if node.fixes.is_empty() { root.clone() } else { relax(&node.fixes)? };
        if sol.status != LpStatus::Optimal {
            continue;
        }
        // A zero-fixed variable stuck above zero means the branch is
        // (near-)infeasible; the inflated objective prunes it anyway.
        if sol.objective >= FIX_ZERO_COST * 0.5 {
            continue;
        }
        if let Some(b) = &best {
            if sol.objective >= b.objective - INT_EPS {
                continue;
            }
        }
        let frac = (0..n).find(|&j| {
            let v = sol.x[j];
            (v - v.round()).abs() > INT_EPS
        });
        match frac {
            None => {
                let x: Vec<f64> = sol.x.iter().map(|v| v.round()).collect();
                let obj = x.iter().zip(&model.costs).map(|(a, c)| a * c).sum();
                consider(obj, x, &mut best);
            }
            Some(j) => {
                if packing {
                    if let Some((obj, x)) = round_packing(model, &sol.x, &node.fixes) {
                        consider(obj, x, &mut best);
                    }
                }
                for v in [0u8, 1u8] {
                    let mut fixes = node.fixes.clone();
                    fixes.insert(j, v);
                    seq += 1;
                    heap.push(Reverse(Node { bound: sol.objective, seq, fixes }));
                }
            }
        }
    }
    Ok(best.map(|mut b| {
        b.proven_optimal = exhausted;
        b
    }))
}
