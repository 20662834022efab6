//! Primal network simplex for the dense transportation problem.
//!
//! Sources with positive supply connect to every sink with positive demand
//! through uncapacitated arcs. An artificial root joined to every node gives
//! the initial feasible spanning tree; its arcs are priced above any real
//! path so optimal solutions route no flow through it. The leaving arc is
//! chosen by the strongly-feasible rule, which rules out cycling on
//! degenerate pivots. Entering arcs come from block search.

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

struct Tree {
    // arc endpoints and costs; real arcs first, then one artificial arc per node
    tail: Vec<usize>,
    head: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    potential: Vec<f64>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    subtree_size: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    last: Vec<usize>,
}

impl Tree {
    fn reduced_cost(&self, arc: usize) -> f64 {
        self.cost[arc] - self.potential[self.tail[arc]] + self.potential[self.head[arc]]
    }

    fn apex(&self, mut u: usize, mut v: usize) -> usize {
        let mut size_u = self.subtree_size[u];
        let mut size_v = self.subtree_size[v];
        loop {
            while size_u < size_v {
                u = self.parent[u];
                size_u = self.subtree_size[u];
            }
            while size_u > size_v {
                v = self.parent[v];
                size_v = self.subtree_size[v];
            }
            if u == v {
                return u;
            }
            if size_u == size_v {
                u = self.parent[u];
                size_u = self.subtree_size[u];
                v = self.parent[v];
                size_v = self.subtree_size[v];
            }
        }
    }

    /// Cycle closed by `arc` oriented p -> q: (nodes, arcs, position of `arc`).
    /// `nodes[k]` is the node from which `arcs[k]` is traversed.
    fn cycle(&self, arc: usize, p: usize, q: usize) -> (Vec<usize>, Vec<usize>, usize) {
        let w = self.apex(p, q);
        let mut nodes = Vec::new();
        let mut arcs = Vec::new();
        let mut u = p;
        while u != w {
            nodes.push(self.parent[u]);
            arcs.push(self.parent_arc[u]);
            u = self.parent[u];
        }
        nodes.reverse();
        arcs.reverse();
        let pos = arcs.len();
        nodes.push(p);
        arcs.push(arc);
        let mut u = q;
        while u != w {
            nodes.push(u);
            arcs.push(self.parent_arc[u]);
            u = self.parent[u];
        }
        (nodes, arcs, pos)
    }

    fn remove_subtree(&mut self, s: usize, t: usize) {
        let size_t = self.subtree_size[t];
        let prev_t = self.prev[t];
        let last_t = self.last[t];
        let next_last_t = self.next[last_t];
        self.parent[t] = NONE;
        self.parent_arc[t] = NONE;
        self.next[prev_t] = next_last_t;
        self.prev[next_last_t] = prev_t;
        self.next[last_t] = t;
        self.prev[t] = last_t;
        let mut u = s;
        while u != NONE {
            self.subtree_size[u] -= size_t;
            if self.last[u] == last_t {
                self.last[u] = prev_t;
            }
            u = self.parent[u];
        }
    }

    fn reroot(&mut self, q: usize) {
        let mut ancestors = Vec::new();
        let mut u = q;
        while u != NONE {
            ancestors.push(u);
            u = self.parent[u];
        }
        ancestors.reverse();
        for pair in ancestors.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            let size_p = self.subtree_size[p];
            let mut last_p = self.last[p];
            let prev_q = self.prev[q];
            let last_q = self.last[q];
            let next_last_q = self.next[last_q];

            self.parent[p] = q;
            self.parent[q] = NONE;
            self.parent_arc[p] = self.parent_arc[q];
            self.parent_arc[q] = NONE;
            self.subtree_size[p] = size_p - self.subtree_size[q];
            self.subtree_size[q] = size_p;

            self.next[prev_q] = next_last_q;
            self.prev[next_last_q] = prev_q;
            self.next[last_q] = q;
            self.prev[q] = last_q;
            if last_p == last_q {
                self.last[p] = prev_q;
                last_p = prev_q;
            }
            self.prev[p] = last_q;
            self.next[last_q] = p;
            self.next[last_p] = q;
            self.prev[q] = last_p;
            self.last[q] = last_p;
        }
    }

    fn attach(&mut self, arc: usize, p: usize, q: usize) {
        let last_p = self.last[p];
        let next_last_p = self.next[last_p];
        let size_q = self.subtree_size[q];
        let last_q = self.last[q];
        self.parent[q] = p;
        self.parent_arc[q] = arc;
        self.next[last_p] = q;
        self.prev[q] = last_p;
        self.prev[next_last_p] = last_q;
        self.next[last_q] = next_last_p;
        let mut u = p;
        while u != NONE {
            self.subtree_size[u] += size_q;
            if self.last[u] == last_p {
                self.last[u] = last_q;
            }
            u = self.parent[u];
        }
    }

    fn shift_potentials(&mut self, arc: usize, p: usize, q: usize) {
        let delta = if q == self.head[arc] {
            self.potential[p] - self.cost[arc] - self.potential[q]
        } else {
            self.potential[p] + self.cost[arc] - self.potential[q]
        };
        let stop = self.last[q];
        let mut u = q;
        loop {
            self.potential[u] += delta;
            if u == stop {
                break;
            }
            u = self.next[u];
        }
    }
}

/// Solves `min <flow, cost>` subject to row sums `supply` and column sums
/// `demand`. `cost` is row-major `supply.len() x demand.len()`, nonnegative.
/// Entries with zero mass are left out of the network; their rows/columns
/// of the returned flow are zero.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), rows * cols);

    let sources: Vec<usize> = (0..rows).filter(|&i| supply[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..cols).filter(|&j| demand[j] > 0.0).collect();
    let mut out = vec![0.0; rows * cols];
    if sources.is_empty() || sinks.is_empty() {
        return Ok(out);
    }

    let (m, k) = (sources.len(), sinks.len());
    let node_count = m + k;
    let root = node_count;
    let real_arcs = m * k;

    let mut max_cost: f64 = 0.0;
    for &i in &sources {
        for &j in &sinks {
            max_cost = max_cost.max(cost[i * cols + j]);
        }
    }
    // any real path is cheaper than one artificial arc
    let art_cost = (max_cost + 1.0) * (node_count as f64 + 1.0);
    let eps = 1e-12 * art_cost;

    let total_arcs = real_arcs + node_count;
    let mut tail = Vec::with_capacity(total_arcs);
    let mut head = Vec::with_capacity(total_arcs);
    let mut arc_cost = Vec::with_capacity(total_arcs);
    for (a, &i) in sources.iter().enumerate() {
        for (b, &j) in sinks.iter().enumerate() {
            tail.push(a);
            head.push(m + b);
            arc_cost.push(cost[i * cols + j]);
        }
    }
    let mut flow = vec![0.0; total_arcs];
    let mut potential = vec![0.0; node_count + 1];
    for a in 0..m {
        tail.push(a);
        head.push(root);
        arc_cost.push(art_cost);
        flow[real_arcs + a] = supply[sources[a]];
        potential[a] = art_cost;
    }
    for b in 0..k {
        tail.push(root);
        head.push(m + b);
        arc_cost.push(art_cost);
        flow[real_arcs + m + b] = demand[sinks[b]];
        potential[m + b] = -art_cost;
    }

    let mut next: Vec<usize> = (1..=node_count).collect();
    next.push(0);
    let mut prev = vec![root];
    prev.extend(0..node_count);
    let mut last: Vec<usize> = (0..node_count).collect();
    last.push(node_count - 1);
    let mut parent = vec![root; node_count];
    parent.push(NONE);
    let mut parent_arc: Vec<usize> = (real_arcs..total_arcs).collect();
    parent_arc.push(NONE);
    let mut subtree_size = vec![1; node_count];
    subtree_size.push(node_count + 1);

    let mut tree = Tree {
        tail,
        head,
        cost: arc_cost,
        flow,
        potential,
        parent,
        parent_arc,
        subtree_size,
        next,
        prev,
        last,
    };

    let block = ((total_arcs as f64).sqrt().ceil() as usize).max(1);
    let blocks = total_arcs.div_ceil(block);
    let max_pivots = 50 * total_arcs + 10_000;
    let mut pivots = 0usize;
    let mut cursor = 0usize;
    let mut idle = 0usize;

    while idle < blocks {
        // block search for the most negative reduced cost
        let mut best = NONE;
        let mut best_rc = -eps;
        for step in 0..block {
            let arc = (cursor + step) % total_arcs;
            let rc = tree.reduced_cost(arc);
            if rc < best_rc {
                best_rc = rc;
                best = arc;
            }
        }
        cursor = (cursor + block) % total_arcs;
        if best == NONE {
            idle += 1;
            continue;
        }
        idle = 0;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::PivotLimit(max_pivots));
        }

        // uncapacitated: non-tree arcs sit at zero flow, so the entering arc
        // is always traversed tail -> head
        let (p, q) = (tree.tail[best], tree.head[best]);
        let (nodes, arcs, entering_pos) = tree.cycle(best, p, q);

        // strongly feasible rule: last arc (in cycle order) of minimum residual
        let mut leave_pos = NONE;
        let mut delta = f64::INFINITY;
        for pos in (0..arcs.len()).rev() {
            let arc = arcs[pos];
            if tree.tail[arc] != nodes[pos] {
                let residual = tree.flow[arc];
                if residual < delta {
                    delta = residual;
                    leave_pos = pos;
                }
            }
        }
        if leave_pos == NONE {
            // a negative cycle of unbounded capacity cannot occur with nonnegative costs
            return Err(Error::InvalidConfig(
                "transport problem is unbounded".into(),
            ));
        }
        let delta = delta.max(0.0);
        for (pos, &arc) in arcs.iter().enumerate() {
            if tree.tail[arc] == nodes[pos] {
                tree.flow[arc] += delta;
            } else {
                tree.flow[arc] -= delta;
            }
        }
        let leaving = arcs[leave_pos];
        tree.flow[leaving] = 0.0;

        let mut s = nodes[leave_pos];
        let mut t = if tree.tail[leaving] == s {
            tree.head[leaving]
        } else {
            tree.tail[leaving]
        };
        if tree.parent[t] != s {
            std::mem::swap(&mut s, &mut t);
        }
        let (p, q) = if entering_pos > leave_pos {
            (q, p)
        } else {
            (p, q)
        };
        tree.remove_subtree(s, t);
        tree.reroot(q);
        tree.attach(best, p, q);
        tree.shift_potentials(best, p, q);
    }

    for (a, &i) in sources.iter().enumerate() {
        for (b, &j) in sinks.iter().enumerate() {
            out[i * cols + j] = tree.flow[a * k + b].max(0.0);
        }
    }
    Ok(out)
}
