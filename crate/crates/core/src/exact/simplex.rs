//! Primal network simplex for the balanced transportation problem.
//!
//! The spanning-tree basis is stored with parent/thread/successor-count arrays
//! in the style of LEMON's implementation. An artificial root joins every node;
//! the initial basis uses only artificial arcs and is strongly feasible, and the
//! leaving-arc rule below keeps it so, which rules out cycling on degenerate
//! pivots.

use crate::error::{Error, Result};

const UP: i8 = 1;
const DOWN: i8 = -1;

/// Entering-arc selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// First arc with negative reduced cost, scanning cyclically from the last
    /// entering arc.
    #[default]
    FirstEligible,
    /// Most negative reduced cost within blocks of about `sqrt(arcs)` arcs.
    BlockSearch,
}

/// Optimal basic solution of a transportation problem.
#[derive(Debug, Clone)]
pub struct SimplexSolution {
    /// `(i, j, amount)` for every basic real arc carrying positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

struct Simplex<'a> {
    n: usize,
    m: usize,
    costs: &'a [f64],
    art_cost: f64,
    root: usize,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    node_flow: Vec<f64>,
    pi: Vec<f64>,
    in_tree: Vec<bool>,
    dirty_revs: Vec<usize>,
    next_arc: usize,
    block_size: usize,
    tol: f64,
    // Pivot state.
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;
const REFRESH_ROUNDS: usize = 64;
const FLOW_CRUMB: f64 = 1e-14;

impl<'a> Simplex<'a> {
    fn new(a: &[f64], b: &[f64], costs: &'a [f64]) -> Self {
        let (n, m) = (a.len(), b.len());
        let node_num = n + m;
        let arc_num = n * m;
        let max_cost = costs.iter().fold(0.0f64, |acc, &c| acc.max(c.abs()));
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let root = node_num;
        let mut s = Simplex {
            n,
            m,
            costs,
            art_cost,
            root,
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![0; node_num + 1],
            last_succ: vec![0; node_num + 1],
            node_flow: vec![0.0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            in_tree: vec![false; arc_num + node_num],
            dirty_revs: Vec::new(),
            next_arc: 0,
            block_size: ((arc_num as f64).sqrt() as usize).max(10),
            // Potentials carry offsets of order art_cost, so rounding in a
            // reduced cost scales with it.
            tol: 1e-14 * art_cost,
            in_arc: 0,
            join: 0,
            u_in: 0,
            v_in: 0,
            u_out: 0,
            delta: 0.0,
        };
        s.thread[root] = 0;
        s.rev_thread[0] = root;
        s.succ_num[root] = node_num + 1;
        s.last_succ[root] = root - 1;
        for u in 0..node_num {
            let e = arc_num + u;
            s.parent[u] = root;
            s.pred[u] = e;
            s.thread[u] = u + 1;
            s.rev_thread[u + 1] = u;
            s.succ_num[u] = 1;
            s.last_succ[u] = u;
            s.in_tree[e] = true;
            if u < n {
                s.pred_dir[u] = UP;
                s.pi[u] = 0.0;
                s.node_flow[u] = a[u];
            } else {
                s.pred_dir[u] = DOWN;
                s.pi[u] = art_cost;
                s.node_flow[u] = b[u - n];
            }
        }
        s
    }

    #[inline]
    fn arc_num(&self) -> usize {
        self.n * self.m
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        let arc_num = self.arc_num();
        if e < arc_num {
            e / self.m
        } else {
            let u = e - arc_num;
            if u < self.n {
                u
            } else {
                self.root
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        let arc_num = self.arc_num();
        if e < arc_num {
            self.n + e % self.m
        } else {
            let u = e - arc_num;
            if u < self.n {
                self.root
            } else {
                u
            }
        }
    }

    #[inline]
    fn cost(&self, e: usize) -> f64 {
        let arc_num = self.arc_num();
        if e < arc_num {
            self.costs[e]
        } else if e - arc_num < self.n {
            0.0
        } else {
            self.art_cost
        }
    }

    #[inline]
    fn reduced_cost(&self, e: usize) -> f64 {
        // Real arcs only: source row i, target column j.
        let i = e / self.m;
        let j = e - i * self.m;
        self.costs[e] + self.pi[i] - self.pi[self.n + j]
    }

    fn find_entering_first(&mut self) -> bool {
        let arc_num = self.arc_num();
        let tol = self.tol;
        for e in (self.next_arc..arc_num).chain(0..self.next_arc) {
            if !self.in_tree[e] && self.reduced_cost(e) < -tol {
                self.in_arc = e;
                self.next_arc = if e + 1 == arc_num { 0 } else { e + 1 };
                return true;
            }
        }
        false
    }

    fn find_entering_block(&mut self) -> bool {
        let arc_num = self.arc_num();
        let mut min = -self.tol;
        let mut found = NONE;
        let mut cnt = self.block_size;
        for e in (self.next_arc..arc_num).chain(0..self.next_arc) {
            if !self.in_tree[e] {
                let c = self.reduced_cost(e);
                if c < min {
                    min = c;
                    found = e;
                }
            }
            cnt -= 1;
            if cnt == 0 {
                if found != NONE {
                    self.in_arc = found;
                    self.next_arc = if e + 1 == arc_num { 0 } else { e + 1 };
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found != NONE {
            self.in_arc = found;
            return true;
        }
        false
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Strongly feasible leaving-arc rule: strict on the source side, non-strict
    /// on the target side, so ties pick the last blocking arc along the cycle.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == UP && self.node_flow[u] < delta {
                delta = self.node_flow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DOWN && self.node_flow[u] <= delta {
                delta = self.node_flow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    fn change_flow(&mut self) {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.node_flow[u] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.node_flow[u] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        // The blocking arc now carries exactly zero flow.
        self.node_flow[self.u_out] = 0.0;
        self.in_tree[self.in_arc] = true;
        let out_arc = self.pred[self.u_out];
        self.in_tree[out_arc] = false;
    }

    fn update_tree_structure(&mut self) {
        let (u_in, v_in, u_out, join, in_arc) = (self.u_in, self.v_in, self.u_out, self.join, self.in_arc);
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(in_arc) { UP } else { DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.node_flow[u_in] = self.delta;

            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue = if old_rev_thread == v_in {
                self.thread[old_last_succ]
            } else {
                self.thread[v_in]
            };

            // Re-hang the stem between u_in and u_out, reversing parent links.
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);

                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;

                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;

                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            // Shift pred arcs (and their flows) one step down the stem.
            let mut tmp_sc = 0isize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.node_flow[u] = self.node_flow[p];
                tmp_sc += self.succ_num[u] as isize - self.succ_num[p] as isize;
                self.succ_num[u] = tmp_sc as usize;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.node_flow[u_in] = self.delta;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let sigma = self.pi[self.v_in] - self.pi[self.u_in] - self.pred_dir[self.u_in] as f64 * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[self.u_in]];
        let mut u = self.u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    /// Recomputes potentials from the tree, discarding accumulated rounding.
    fn refresh_potentials(&mut self) {
        self.pi[self.root] = 0.0;
        let mut u = self.thread[self.root];
        while u != self.root {
            let p = self.parent[u];
            self.pi[u] = self.pi[p] - self.pred_dir[u] as f64 * self.cost(self.pred[u]);
            u = self.thread[u];
        }
    }

    fn run(&mut self, rule: PivotRule) -> usize {
        let mut pivots = 0;
        for _ in 0..REFRESH_ROUNDS {
            loop {
                let found = match rule {
                    PivotRule::FirstEligible => self.find_entering_first(),
                    PivotRule::BlockSearch => self.find_entering_block(),
                };
                if !found {
                    break;
                }
                self.find_join_node();
                let ok = self.find_leaving_arc();
                debug_assert!(ok, "uncapacitated problem with nonnegative costs is bounded");
                self.change_flow();
                self.update_tree_structure();
                self.update_potential();
                pivots += 1;
            }
            // Confirm optimality against exactly recomputed potentials.
            self.refresh_potentials();
            let still = match rule {
                PivotRule::FirstEligible => self.find_entering_first(),
                PivotRule::BlockSearch => self.find_entering_block(),
            };
            if !still {
                return pivots;
            }
            // Undo the side effect of the probe; the outer loop re-finds it.
            self.next_arc = self.in_arc;
        }
        pivots
    }
}

/// Solves `min sum C_ij P_ij` over couplings of `a` and `b`; `costs` is
/// row-major `n x m`.
pub fn solve_transport(a: &[f64], b: &[f64], costs: &[f64], rule: PivotRule) -> Result<SimplexSolution> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 || costs.len() != n * m {
        return Err(Error::InvalidArgument(format!(
            "cost array of length {} does not match {n} x {m}",
            costs.len()
        )));
    }
    let mut s = Simplex::new(a, b, costs);
    let pivots = s.run(rule);

    let arc_num = n * m;
    let mut flows = Vec::with_capacity(n + m);
    let mut row = vec![0.0; n];
    let mut col = vec![0.0; m];
    let mut cost = 0.0;
    for u in 0..n + m {
        let e = s.pred[u];
        // Flows below FLOW_CRUMB are residue of cancelling subtractions.
        if e < arc_num && s.node_flow[u] > FLOW_CRUMB {
            let (i, j) = (e / m, e % m);
            let x = s.node_flow[u];
            flows.push((i, j, x));
            row[i] += x;
            col[j] += x;
            cost += x * costs[e];
        }
    }
    let residual = row
        .iter()
        .zip(a)
        .chain(col.iter().zip(b))
        .map(|(x, w)| (x - w).abs())
        .fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(Error::InfeasibleNumerics { residual });
    }
    flows.sort_by_key(|&(i, j, _)| (i, j));

    let mut f: Vec<f64> = s.pi[..n].iter().map(|p| -p).collect();
    let mut g: Vec<f64> = s.pi[n..n + m].to_vec();
    let shift = g[0];
    f.iter_mut().for_each(|x| *x += shift);
    g.iter_mut().for_each(|x| *x -= shift);

    Ok(SimplexSolution {
        flows,
        f,
        g,
        cost,
        pivots,
    })
}
