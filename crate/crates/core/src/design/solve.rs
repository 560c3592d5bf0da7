use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::{evaluate_links, DesignInput, LinkId, NetworkDesign};
use crate::{par, Error, Result};

/// Largest candidate set handed to the exact solver.
pub const EXACT_GUARD: usize = 25;
/// Bound on improving swaps in the large-instance local search.
pub const LOCAL_SEARCH_MAX_SWAPS: usize = 1000;
const CANDIDATE_INFLATION: f64 = 2.0;
const IMPROVE_TOL: f64 = 1e-12;

/// All-pairs latency-equivalent distances over the current link set.
#[derive(Debug, Clone)]
struct Dist {
    n: usize,
    d: Vec<f64>,
}

impl Dist {
    /// Shortest paths over fiber alone.
    fn fiber(input: &DesignInput) -> Self {
        let n = input.n();
        let mut d = input.fiber_km_equiv.as_slice().to_vec();
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        for k in 0..n {
            for i in 0..n {
                let dik = d[i * n + k];
                for j in 0..n {
                    let via = dik + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        Self { n, d }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    fn col(&self, i: usize) -> Vec<f64> {
        self.d[i * self.n..(i + 1) * self.n].to_vec()
    }

    fn add_link(&mut self, i: usize, j: usize, w: f64) {
        if w >= self.get(i, j) {
            return;
        }
        let (di, dj) = (self.col(i), self.col(j));
        let n = self.n;
        for s in 0..n {
            for t in 0..n {
                let via = (di[s] + w + dj[t]).min(dj[s] + w + di[t]);
                let cell = &mut self.d[s * n + t];
                if via < *cell {
                    *cell = via;
                }
            }
        }
    }
}

/// Pairs with demand and their objective coefficient `h / d`.
struct Weights(Vec<(usize, usize, f64)>);

impl Weights {
    fn new(input: &DesignInput) -> Self {
        Self(
            input
                .traffic
                .pairs()
                .filter(|&(_, _, h)| h > 0.0)
                .map(|(s, t, h)| (s, t, h / input.geodesic_km[(s, t)]))
                .collect(),
        )
    }

    fn objective(&self, d: &Dist) -> f64 {
        self.0.iter().map(|&(s, t, w)| w * d.get(s, t)).sum()
    }

    /// Objective after adding one link, without mutating `d`.
    fn objective_with(&self, d: &Dist, i: usize, j: usize, w: f64) -> f64 {
        if w >= d.get(i, j) {
            return self.objective(d);
        }
        self.0
            .iter()
            .map(|&(s, t, h)| {
                let via = (d.get(s, i) + w + d.get(j, t)).min(d.get(s, j) + w + d.get(i, t));
                h * d.get(s, t).min(via)
            })
            .sum()
    }
}

fn improves(new: f64, old: f64) -> bool {
    new < old - IMPROVE_TOL * old.abs()
}

fn mw(input: &DesignInput, l: LinkId) -> f64 {
    input.mw_km[(l.a, l.b)].expect("candidate links have microwave routes")
}

fn dist_with(input: &DesignInput, base: &Dist, links: &[LinkId]) -> Dist {
    let mut d = base.clone();
    for &l in links {
        d.add_link(l.a, l.b, mw(input, l));
    }
    d
}

/// Result of the dominated-link reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedCandidates {
    /// Links that may carry flow in some optimum and fit the budget.
    pub candidates: Vec<LinkId>,
    /// Links no shorter than the best fiber route between their ends.
    pub dominated: Vec<LinkId>,
    /// Links costing more than the whole budget.
    pub unaffordable: Vec<LinkId>,
    /// Per-pair, per-link flow variables over pairs with demand.
    pub flow_vars_total: usize,
    /// Flow variables whose link cannot shorten the pair's fiber route.
    pub flow_vars_eliminated: usize,
}

/// Drops microwave links that never beat fiber and counts the per-pair
/// variables that a link cannot serve.
pub fn eliminate_dominated(input: &DesignInput) -> Result<ReducedCandidates> {
    input.validate()?;
    let base = Dist::fiber(input);
    let weights = Weights::new(input);
    let mut out = ReducedCandidates {
        candidates: Vec::new(),
        dominated: Vec::new(),
        unaffordable: Vec::new(),
        flow_vars_total: 0,
        flow_vars_eliminated: 0,
    };
    for l in input.mw_links() {
        let m = mw(input, l);
        if m >= base.get(l.a, l.b) {
            out.dominated.push(l);
            continue;
        }
        if input.link_cost(l) > input.budget {
            out.unaffordable.push(l);
            continue;
        }
        out.candidates.push(l);
    }
    let d = &input.geodesic_km;
    let counts = par::map_slice(&out.candidates, |&l| {
        let m = mw(input, l);
        let mut elim = 0usize;
        for &(s, t, _) in &weights.0 {
            let lower = (d[(s, l.a)] + m + d[(l.b, t)]).min(d[(s, l.b)] + m + d[(l.a, t)]);
            if lower >= base.get(s, t) {
                elim += 1;
            }
        }
        elim
    });
    out.flow_vars_total = weights.0.len() * out.candidates.len();
    out.flow_vars_eliminated = counts.into_iter().sum();
    debug!(
        "reduction: {} candidates, {} dominated, {} unaffordable, {}/{} flow variables eliminated",
        out.candidates.len(),
        out.dominated.len(),
        out.unaffordable.len(),
        out.flow_vars_eliminated,
        out.flow_vars_total
    );
    Ok(out)
}

/// Greedy selection under `inflation` times the budget. Links are returned
/// in the order they were picked.
pub fn greedy_candidates(input: &DesignInput, reduced: &ReducedCandidates, inflation: f64) -> Result<Vec<LinkId>> {
    if !(inflation >= 1.0) {
        return Err(Error::param("candidate inflation must be at least 1"));
    }
    let weights = Weights::new(input);
    let mut dist = Dist::fiber(input);
    Ok(greedy_from(input, &weights, &mut dist, &reduced.candidates, &[], inflation * input.budget, false))
}

/// Candidate pool for the exact stage: the objective greedy and the
/// gain-per-tower greedy under the inflated budget, padded up to
/// [`EXACT_GUARD`] with the links of largest standalone gain per tower.
pub fn candidate_pool(input: &DesignInput, reduced: &ReducedCandidates, inflation: f64) -> Result<Vec<LinkId>> {
    let mut pool = greedy_candidates(input, reduced, inflation)?;
    let weights = Weights::new(input);
    let mut dist = Dist::fiber(input);
    for l in greedy_from(input, &weights, &mut dist, &reduced.candidates, &[], inflation * input.budget, true) {
        if !pool.contains(&l) {
            pool.push(l);
        }
    }
    if pool.len() < EXACT_GUARD {
        let base = Dist::fiber(input);
        let current = weights.objective(&base);
        let rest: Vec<LinkId> = reduced.candidates.iter().copied().filter(|l| !pool.contains(l)).collect();
        let mut scored: Vec<(f64, LinkId)> = par::map_slice(&rest, |&l| {
            let gain = current - weights.objective_with(&base, l.a, l.b, mw(input, l));
            (gain / input.link_cost(l), l)
        })
        .into_iter()
        .filter(|(g, _)| *g > 0.0)
        .collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        pool.extend(scored.into_iter().take(EXACT_GUARD - pool.len()).map(|(_, l)| l));
    }
    Ok(pool)
}

fn greedy_from(
    input: &DesignInput,
    weights: &Weights,
    dist: &mut Dist,
    pool: &[LinkId],
    start: &[LinkId],
    limit: f64,
    per_tower: bool,
) -> Vec<LinkId> {
    let mut chosen = start.to_vec();
    let mut spent = input.links_cost(&chosen);
    let mut current = weights.objective(dist);
    let mut remaining: Vec<LinkId> = pool.iter().copied().filter(|l| !chosen.contains(l)).collect();
    remaining.sort();
    loop {
        let affordable: Vec<LinkId> = remaining
            .iter()
            .copied()
            .filter(|&l| spent + input.link_cost(l) <= limit * (1.0 + 1e-12))
            .collect();
        let scored = par::map_slice(&affordable, |&l| {
            let obj = weights.objective_with(dist, l.a, l.b, mw(input, l));
            let key = if per_tower {
                -(current - obj) / input.link_cost(l)
            } else {
                obj
            };
            (key, obj, l)
        });
        let best = scored
            .into_iter()
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
        match best {
            Some((_, obj, l)) if improves(obj, current) => {
                dist.add_link(l.a, l.b, mw(input, l));
                current = obj;
                spent += input.link_cost(l);
                chosen.push(l);
                remaining.retain(|&r| r != l);
            }
            _ => break,
        }
    }
    chosen
}

struct Search<'a> {
    input: &'a DesignInput,
    weights: Weights,
    cands: Vec<LinkId>,
    best_obj: f64,
    best: Vec<LinkId>,
    nodes: u64,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, dist: &Dist, spent: f64, chosen: &mut Vec<LinkId>) {
        self.nodes += 1;
        let obj = self.weights.objective(dist);
        if improves(obj, self.best_obj) {
            self.best_obj = obj;
            self.best = chosen.clone();
        }
        if k == self.cands.len() {
            return;
        }
        let room = self.input.budget - spent;
        let mut optimistic = dist.clone();
        for &l in &self.cands[k..] {
            if self.input.link_cost(l) <= room * (1.0 + 1e-12) {
                optimistic.add_link(l.a, l.b, mw(self.input, l));
            }
        }
        if !improves(self.weights.objective(&optimistic), self.best_obj) {
            return;
        }
        let l = self.cands[k];
        let c = self.input.link_cost(l);
        if c <= room * (1.0 + 1e-12) {
            let mut next = dist.clone();
            next.add_link(l.a, l.b, mw(self.input, l));
            chosen.push(l);
            self.dfs(k + 1, &next, spent + c, chosen);
            chosen.pop();
        }
        self.dfs(k + 1, dist, spent, chosen);
    }
}

/// Optimal design restricted to `candidates`, by branch and bound.
pub fn solve_exact(input: &DesignInput, candidates: &[LinkId]) -> Result<NetworkDesign> {
    input.validate()?;
    let set = exact_links(input, candidates, None)?;
    evaluate_links(input, &set, true)
}

fn exact_links(input: &DesignInput, candidates: &[LinkId], incumbent: Option<&[LinkId]>) -> Result<Vec<LinkId>> {
    let mut cands: Vec<LinkId> = Vec::new();
    for l in candidates.iter().map(|l| LinkId::new(l.a, l.b)) {
        if input.mw_km[(l.a, l.b)].is_none() {
            return Err(Error::param(format!("link {}-{} has no microwave route", l.a, l.b)));
        }
        if !cands.contains(&l) {
            cands.push(l);
        }
    }
    if cands.len() > EXACT_GUARD {
        return Err(Error::GuardExceeded {
            count: cands.len(),
            guard: EXACT_GUARD,
        });
    }
    let base = Dist::fiber(input);
    cands.retain(|&l| mw(input, l) < base.get(l.a, l.b) && input.link_cost(l) <= input.budget * (1.0 + 1e-12));
    let weights = Weights::new(input);
    let mut search = Search {
        input,
        best_obj: weights.objective(&base),
        weights,
        cands,
        best: Vec::new(),
        nodes: 0,
    };
    if let Some(inc) = incumbent {
        let obj = search.weights.objective(&dist_with(input, &base, inc));
        if improves(obj, search.best_obj) {
            search.best_obj = obj;
            search.best = inc.to_vec();
        }
    }
    search.dfs(0, &base, 0.0, &mut Vec::new());
    debug!("branch and bound visited {} nodes", search.nodes);
    Ok(search.best)
}

fn local_search(input: &DesignInput, pool: &[LinkId], start: Vec<LinkId>) -> Vec<LinkId> {
    let base = Dist::fiber(input);
    let weights = Weights::new(input);
    let eval = |set: &[LinkId]| weights.objective(&dist_with(input, &base, set));
    let mut set = start;
    let mut current = eval(&set);
    let mut swaps = 0;
    while swaps < LOCAL_SEARCH_MAX_SWAPS {
        let spent = input.links_cost(&set);
        let mut moves: Vec<(Option<usize>, LinkId)> = Vec::new();
        for &u in pool.iter().filter(|u| !set.contains(u)) {
            if spent + input.link_cost(u) <= input.budget * (1.0 + 1e-12) {
                moves.push((None, u));
            }
            for (bi, &b) in set.iter().enumerate() {
                if spent - input.link_cost(b) + input.link_cost(u) <= input.budget * (1.0 + 1e-12) {
                    moves.push((Some(bi), u));
                }
            }
        }
        let scored = par::map_slice(&moves, |&(drop, add)| {
            let mut next = set.clone();
            if let Some(bi) = drop {
                next.remove(bi);
            }
            next.push(add);
            eval(&next)
        });
        let best = scored
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(&y.0)));
        match best {
            Some((mi, &obj)) if improves(obj, current) => {
                let (drop, add) = moves[mi];
                if let Some(bi) = drop {
                    set.remove(bi);
                }
                set.push(add);
                current = obj;
                swaps += 1;
            }
            _ => break,
        }
    }
    debug!("local search applied {swaps} moves");
    set
}

fn heuristic_links(input: &DesignInput, incumbent: Option<&[LinkId]>) -> Result<Vec<LinkId>> {
    let reduced = eliminate_dominated(input)?;
    let cands = candidate_pool(input, &reduced, CANDIDATE_INFLATION)?;
    let incumbent: Option<Vec<LinkId>> = incumbent.map(|inc| {
        inc.iter()
            .map(|l| LinkId::new(l.a, l.b))
            .filter(|l| input.mw_km[(l.a, l.b)].is_some())
            .collect()
    });
    let incumbent = incumbent.filter(|inc| input.links_cost(inc) <= input.budget * (1.0 + 1e-12));
    if cands.len() <= EXACT_GUARD {
        info!("solving exactly over {} greedy candidates", cands.len());
        return exact_links(input, &cands, incumbent.as_deref());
    }
    info!("{} candidates exceed the exact guard; using greedy with local search", cands.len());
    let weights = Weights::new(input);
    let base = Dist::fiber(input);
    let mut dist = base.clone();
    let greedy = greedy_from(input, &weights, &mut dist, &cands, &[], input.budget, false);
    let mut start = greedy;
    if let Some(inc) = incumbent {
        if improves(weights.objective(&dist_with(input, &base, &inc)), weights.objective(&dist_with(input, &base, &start))) {
            start = inc;
        }
    }
    Ok(local_search(input, &cands, start))
}

/// Heuristic design: dominated-link reduction, greedy candidate selection
/// under twice the budget, then branch and bound over the candidate pool, or
/// greedy plus local search when the greedy picks alone exceed the guard.
pub fn solve_heuristic(input: &DesignInput) -> Result<NetworkDesign> {
    input.validate()?;
    let set = heuristic_links(input, None)?;
    evaluate_links(input, &set, true)
}

/// Solves a budget sweep, warm-starting each budget with the design of the
/// next smaller one. Results are returned in the order of `budgets`.
pub fn solve_ladder(input: &DesignInput, budgets: &[f64]) -> Result<Vec<NetworkDesign>> {
    input.validate()?;
    let mut order: Vec<usize> = (0..budgets.len()).collect();
    order.sort_by(|&a, &b| budgets[a].total_cmp(&budgets[b]));
    let mut out: Vec<Option<NetworkDesign>> = vec![None; budgets.len()];
    let mut prev: Option<Vec<LinkId>> = None;
    for i in order {
        let inst = input.with_budget(budgets[i]);
        inst.validate()?;
        let set = heuristic_links(&inst, prev.as_deref())?;
        let design = evaluate_links(&inst, &set, true)?;
        prev = Some(design.built.clone());
        out[i] = Some(design);
    }
    Ok(out.into_iter().map(|d| d.expect("every budget solved")).collect())
}
