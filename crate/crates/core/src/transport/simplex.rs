//! Network simplex on the complete bipartite transportation graph.
//!
//! Nodes `0..m` are sources, `m..m+n` are sinks. A basis is a spanning tree
//! of `m + n - 1` cells (degenerate zero-flow cells included). Entering and
//! leaving arcs follow Bland's rule: the lowest-index improving cell enters,
//! the lowest-index cell among those reaching the ratio-test minimum leaves.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub(crate) struct Problem<'a> {
    pub supply: &'a [f64],
    pub demand: &'a [f64],
    /// Row-major `m × n`.
    pub cost: &'a [f64],
}

pub(crate) struct Solution {
    /// Row-major `m × n`, in the units of `supply`/`demand`.
    pub flow: Vec<f64>,
    pub basis: Vec<(usize, usize)>,
    pub iterations: usize,
}

/// Iteration cap `50 (m + n)^2`.
pub(crate) fn iteration_cap(m: usize, n: usize) -> usize {
    50 * (m + n) * (m + n)
}

/// Node potentials for a basis: `u_i + v_j = c_ij` on every basic cell,
/// anchored at `u_0 = 0`.
pub(crate) fn potentials(m: usize, n: usize, cost: &[f64], basis: &[(usize, usize)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let tree = Tree::build(m, n, basis)?;
    let mut pot = vec![0.0; m + n];
    for &node in &tree.order[1..] {
        let parent = tree.parent[node];
        let (i, j) = basis[tree.parent_arc[node]];
        let c = cost[i * n + j];
        // Sink potentials are stored as v_j so that u_i + v_j = c_ij.
        pot[node] = c - pot[parent];
    }
    let v = pot.split_off(m);
    Ok((pot, v))
}

struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    order: Vec<usize>,
}

impl Tree {
    fn build(m: usize, n: usize, basis: &[(usize, usize)]) -> Result<Self> {
        let nodes = m + n;
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes];
        for (k, &(i, j)) in basis.iter().enumerate() {
            adjacency[i].push((m + j, k));
            adjacency[m + j].push((i, k));
        }
        let mut parent = vec![usize::MAX; nodes];
        let mut parent_arc = vec![usize::MAX; nodes];
        let mut depth = vec![0; nodes];
        let mut order = Vec::with_capacity(nodes);
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            order.push(node);
            for &(next, arc) in &adjacency[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = node;
                    parent_arc[next] = arc;
                    depth[next] = depth[node] + 1;
                    queue.push_back(next);
                }
            }
        }
        if order.len() != nodes {
            return Err(Error::SolverFailure("basis is not a spanning tree".into()));
        }
        Ok(Tree { parent, parent_arc, depth, order })
    }

    /// Basis arcs on the tree path from `from` to `to`, in path order.
    fn path(&self, mut from: usize, mut to: usize) -> Vec<usize> {
        let mut head = Vec::new();
        let mut tail = Vec::new();
        while self.depth[from] > self.depth[to] {
            head.push(self.parent_arc[from]);
            from = self.parent[from];
        }
        while self.depth[to] > self.depth[from] {
            tail.push(self.parent_arc[to]);
            to = self.parent[to];
        }
        while from != to {
            head.push(self.parent_arc[from]);
            from = self.parent[from];
            tail.push(self.parent_arc[to]);
            to = self.parent[to];
        }
        head.extend(tail.into_iter().rev());
        head
    }
}

/// North-west corner rule: a staircase spanning tree with `m + n - 1` cells.
fn northwest_corner(supply: &[f64], demand: &[f64], flow: &mut [f64]) -> Vec<(usize, usize)> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    let (mut left_i, mut left_j) = (supply[0], demand[0]);
    loop {
        let x = left_i.min(left_j).max(0.0);
        flow[i * n + j] = x;
        basis.push((i, j));
        left_i -= x;
        left_j -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && left_i <= left_j) {
            i += 1;
            left_i = supply[i];
        } else {
            j += 1;
            left_j = demand[j];
        }
    }
    basis
}

pub(crate) fn solve(problem: &Problem<'_>) -> Result<Solution> {
    let (m, n) = (problem.supply.len(), problem.demand.len());
    debug_assert_eq!(problem.cost.len(), m * n);
    let cost = problem.cost;
    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let tolerance = 1e-12 * scale;

    let mut flow = vec![0.0; m * n];
    let mut basis = northwest_corner(problem.supply, problem.demand, &mut flow);
    let mut is_basic = vec![false; m * n];
    for &(i, j) in &basis {
        is_basic[i * n + j] = true;
    }

    let cap = iteration_cap(m, n);
    let mut iterations = 0;
    loop {
        let tree = Tree::build(m, n, &basis)?;
        let mut u = vec![0.0; m + n];
        for &node in &tree.order[1..] {
            let (i, j) = basis[tree.parent_arc[node]];
            u[node] = cost[i * n + j] - u[tree.parent[node]];
        }
        let (row_pot, col_pot) = u.split_at(m);

        let entering = (0..m * n).find(|&cell| {
            !is_basic[cell] && cost[cell] - row_pot[cell / n] - col_pot[cell % n] < -tolerance
        });
        let Some(cell) = entering else {
            return Ok(Solution { flow, basis, iterations });
        };
        if iterations >= cap {
            return Err(Error::SolverFailure(format!(
                "network simplex did not converge within {cap} pivots ({m}x{n})"
            )));
        }
        iterations += 1;

        let (ei, ej) = (cell / n, cell % n);
        // The cycle is the entering cell plus the tree path from its sink
        // back to its source; path arcs alternate -θ, +θ starting at the sink.
        let path = tree.path(m + ej, ei);
        let mut leaving: Option<(f64, usize, usize)> = None;
        for &arc in path.iter().step_by(2) {
            let (i, j) = basis[arc];
            let idx = i * n + j;
            let x = flow[idx];
            let better = match leaving {
                None => true,
                Some((best, best_idx, _)) => x < best || (x == best && idx < best_idx),
            };
            if better {
                leaving = Some((x, idx, arc));
            }
        }
        let (theta, leave_idx, leave_arc) = leaving.expect("cycle has a backward arc");
        for (k, &arc) in path.iter().enumerate() {
            let (i, j) = basis[arc];
            let idx = i * n + j;
            if k % 2 == 0 {
                flow[idx] -= theta;
            } else {
                flow[idx] += theta;
            }
        }
        flow[leave_idx] = 0.0;
        flow[cell] = theta;
        is_basic[leave_idx] = false;
        is_basic[cell] = true;
        basis[leave_arc] = (ei, ej);
    }
}
