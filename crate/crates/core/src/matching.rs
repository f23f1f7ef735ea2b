//! Qualification-aware assignability: the union-closed family of
//! qualification groups whose counting constraints are equivalent to
//! Hall's condition, plus the stage-two assignment of duty lists to crew.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Cost, CrewMember, Instance};
use crate::roster::{depot_events, requirement_lines, DutyList, Roster};

const BIG: f64 = 1e13;

/// Distinct crew qualification sets with multiplicities, and the family
/// 𝐒 of qualification-group unions whose counting constraints certify
/// assignability.
#[derive(Debug, Clone)]
pub struct QualificationUniverse {
    pub quals: Vec<BTreeSet<String>>,
    pub counts: Vec<u32>,
    /// Each member of 𝐒 is a bitmask over `quals`.
    pub family: Vec<u64>,
}

impl QualificationUniverse {
    pub fn from_crew(crew: &[CrewMember]) -> Self {
        let mut counts_map: BTreeMap<BTreeSet<String>, u32> = BTreeMap::new();
        for member in crew {
            *counts_map.entry(member.qualification.clone()).or_insert(0) += 1;
        }
        let quals: Vec<BTreeSet<String>> = counts_map.keys().cloned().collect();
        let counts: Vec<u32> = counts_map.values().copied().collect();
        assert!(quals.len() <= 64, "more than 64 distinct qualification sets");

        // Requirement sets are the nonempty subsets of qualifications; the
        // groups E(req) they induce generate 𝐒 under union.
        let mut groups: BTreeSet<u64> = BTreeSet::new();
        let mut reqs: BTreeSet<BTreeSet<String>> = BTreeSet::new();
        for q in &quals {
            let lines: Vec<&String> = q.iter().collect();
            for mask in 1u32..(1 << lines.len()) {
                let req: BTreeSet<String> = lines
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, l)| (*l).clone())
                    .collect();
                reqs.insert(req);
            }
        }
        for req in &reqs {
            groups.insert(group_mask(&quals, req));
        }
        // Union closure, deduplicated.
        let mut family: BTreeSet<u64> = groups.clone();
        loop {
            let mut added = false;
            let current: Vec<u64> = family.iter().copied().collect();
            for &a in &current {
                for &g in &groups {
                    if family.insert(a | g) {
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        QualificationUniverse {
            quals,
            counts,
            family: family.into_iter().collect(),
        }
    }

    /// Bitmask of qualifications able to serve `req`.
    pub fn group(&self, req: &BTreeSet<String>) -> u64 {
        group_mask(&self.quals, req)
    }

    /// Number of crew members whose qualification lies in the group set.
    pub fn capacity(&self, mask: u64) -> u32 {
        (0..self.quals.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| self.counts[i])
            .sum()
    }

    /// Hall feasibility of a multiset of requirement sets: some injective
    /// assignment of the requirements to distinct qualified members exists.
    pub fn check_hall(&self, reqs: &[BTreeSet<String>]) -> bool {
        let masks: Vec<u64> = reqs.iter().map(|r| self.group(r)).collect();
        if masks.iter().any(|&m| m == 0) {
            return false;
        }
        for &s in &self.family {
            let demand = masks.iter().filter(|&&m| m & !s == 0).count() as u32;
            if demand > self.capacity(s) {
                return false;
            }
        }
        true
    }
}

fn group_mask(quals: &[BTreeSet<String>], req: &BTreeSet<String>) -> u64 {
    let mut mask = 0u64;
    for (i, q) in quals.iter().enumerate() {
        if req.is_subset(q) {
            mask |= 1 << i;
        }
    }
    mask
}

/// Minimum-cost perfect assignment on a square matrix; entries may be
/// infinite. Returns (total cost, column per row) or None when no finite
/// perfect assignment exists.
pub fn solve_assignment(cost: &[Vec<Cost>]) -> Option<(Cost, Vec<usize>)> {
    let n = cost.len();
    if n == 0 {
        return Some((0.0, Vec::new()));
    }
    debug_assert!(cost.iter().all(|row| row.len() == n));
    let a = |i: usize, j: usize| {
        let v = cost[i - 1][j - 1];
        if v.is_finite() {
            v
        } else {
            BIG
        }
    };
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if !cost[i - 1][j - 1].is_finite() {
            return None;
        }
        assignment[i - 1] = j - 1;
        total += cost[i - 1][j - 1];
    }
    Some((total, assignment))
}

/// Stage-two cost matrix: rows follow `instance.crew` order, columns are
/// the duty lists padded with off-work columns to a square. An entry is
/// infinite when the member lacks a required line, otherwise the depot
/// preference penalty over the list's sign-in/out events.
pub fn build_cost_matrix(instance: &Instance, duties: &[DutyList]) -> Vec<Vec<Cost>> {
    let n = instance.crew.len();
    assert!(duties.len() <= n, "more duty lists than crew members");
    let mut matrix = vec![vec![0.0; n]; n];
    for (i, member) in instance.crew.iter().enumerate() {
        for (j, duty) in duties.iter().enumerate() {
            let req = requirement_lines(duty, instance);
            matrix[i][j] = if !req.is_subset(&member.qualification) {
                Cost::INFINITY
            } else {
                depot_events(duty)
                    .iter()
                    .filter(|d| !member.preferred_depots.contains(*d))
                    .count() as Cost
                    * instance.params.lambda_o
            };
        }
    }
    matrix
}

/// Assigns duty lists to crew members with minimum depot-preference cost.
pub fn assign_duties(instance: &Instance, duties: &[DutyList]) -> Option<(Cost, Roster)> {
    let matrix = build_cost_matrix(instance, duties);
    let (cost, cols) = solve_assignment(&matrix)?;
    let mut roster = Roster::default();
    for (i, member) in instance.crew.iter().enumerate() {
        let duty = duties.get(cols[i]).cloned().unwrap_or_default();
        roster.assignments.insert(member.id.clone(), duty);
    }
    Some((cost, roster))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn member(id: &str, quals: &[&str]) -> CrewMember {
        CrewMember {
            id: id.into(),
            qualification: set(quals),
            preferred_depots: BTreeSet::new(),
        }
    }

    /// Independent oracle: maximum bipartite matching by augmenting paths.
    fn matchable(reqs: &[BTreeSet<String>], crew: &[CrewMember]) -> bool {
        fn augment(
            r: usize,
            adj: &[Vec<usize>],
            seen: &mut [bool],
            owner: &mut [Option<usize>],
        ) -> bool {
            for &c in &adj[r] {
                if !seen[c] {
                    seen[c] = true;
                    if owner[c].is_none()
                        || augment(owner[c].unwrap(), adj, seen, owner)
                    {
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
        let mut matched = 0;
        for r in 0..reqs.len() {
            let mut seen = vec![false; crew.len()];
            if augment(r, &adj, &mut seen, &mut owner) {
                matched += 1;
            }
        }
        matched == reqs.len()
    }

    #[test]
    fn hall_agrees_with_matching_oracle() {
        let lines = ["L1", "L2", "L3"];
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..600 {
            let n_crew = rng.gen_range(1..8);
            let crew: Vec<CrewMember> = (0..n_crew)
                .map(|i| {
                    let k = rng.gen_range(1..=2);
                    let mut q = BTreeSet::new();
                    while q.len() < k {
                        q.insert(lines[rng.gen_range(0..lines.len())].to_string());
                    }
                    member(&format!("r{i}"), &q.iter().map(|s| s.as_str()).collect::<Vec<_>>())
                })
                .collect();
            let universe = QualificationUniverse::from_crew(&crew);
            let n_req = rng.gen_range(0..=n_crew + 1);
            let reqs: Vec<BTreeSet<String>> = (0..n_req)
                .map(|_| {
                    let k = rng.gen_range(1..=2);
                    let mut r = BTreeSet::new();
                    while r.len() < k {
                        r.insert(lines[rng.gen_range(0..lines.len())].to_string());
                    }
                    r
                })
                .collect();
            assert_eq!(
                universe.check_hall(&reqs),
                matchable(&reqs, &crew),
                "reqs {reqs:?} crew {crew:?}"
            );
        }
    }

    #[test]
    fn hall_counting_example() {
        // Two single-line members and one requirement per line is fine;
        // three requirements on one line overload its two qualified members.
        let crew = vec![
            member("a", &["L1"]),
            member("b", &["L1"]),
            member("c", &["L2"]),
        ];
        let universe = QualificationUniverse::from_crew(&crew);
        assert!(universe.check_hall(&[set(&["L1"]), set(&["L1"]), set(&["L2"])]));
        assert!(!universe.check_hall(&[set(&["L1"]), set(&["L1"]), set(&["L1"])]));
        assert!(!universe.check_hall(&[set(&["L1", "L2"])]));
    }

    #[test]
    fn assignment_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let n = rng.gen_range(1..6);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen_bool(0.15) {
                                f64::INFINITY
                            } else {
                                rng.gen_range(0.0..20.0)
                            }
                        })
                        .collect()
                })
                .collect();
            // Exhaustive oracle over all permutations.
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best: Option<f64> = None;
            permute(&mut perm, 0, &mut |p| {
                let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                if total.is_finite() && best.map(|b| total < b).unwrap_or(true) {
                    best = Some(total);
                }
            });
            let got = solve_assignment(&cost);
            match best {
                None => assert!(got.is_none()),
                Some(b) => {
                    let (c, cols) = got.expect("feasible");
                    assert!((c - b).abs() < 1e-9, "hungarian {c} vs oracle {b}");
                    let mut seen = vec![false; n];
                    for &j in &cols {
                        assert!(!seen[j]);
                        seen[j] = true;
                    }
                }
            }
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }
}
