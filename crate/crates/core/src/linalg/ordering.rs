//! Fill-reducing orderings.

use std::collections::BTreeSet;

/// Ordering strategy for sparse factorisation.
#[derive(Debug, Clone, Default)]
pub enum Ordering {
    /// Geometric nested dissection from node coordinates.
    NestedDissection(Vec<[f64; 2]>),
    /// Minimum degree on the symmetrised pattern.
    #[default]
    MinimumDegree,
    /// Keep the natural order.
    Natural,
}

const LEAF_SIZE: usize = 64;

/// Nested dissection driven by node coordinates.
///
/// Each step sorts the current node set along the longer bounding-box axis,
/// splits it at the median, and takes as separator the nodes of the first
/// half that have a neighbour in the second half. Separators are numbered
/// after both halves. Returns `perm` with `perm[k]` the node eliminated at step `k`.
pub fn nested_dissection(adj: &[Vec<usize>], coords: &[[f64; 2]]) -> Vec<usize> {
    let n = adj.len();
    assert_eq!(coords.len(), n, "one coordinate per node");
    let mut order = Vec::with_capacity(n);
    let mut side = vec![0u8; n];
    let mut active = vec![false; n];
    let mut stack: Vec<(Vec<usize>, Option<Vec<usize>>)> = vec![((0..n).collect(), None)];
    // Explicit stack: (set to split, separator to emit after it is finished).
    while let Some((set, sep)) = stack.pop() {
        if let Some(sep) = sep {
            order.extend(sep);
            continue;
        }
        if set.len() <= LEAF_SIZE {
            order.extend(set);
            continue;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &i in &set {
            for d in 0..2 {
                lo[d] = lo[d].min(coords[i][d]);
                hi[d] = hi[d].max(coords[i][d]);
            }
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let mut sorted = set;
        sorted.sort_by(|&a, &b| {
            coords[a][axis]
                .total_cmp(&coords[b][axis])
                .then(coords[a][1 - axis].total_cmp(&coords[b][1 - axis]))
                .then(a.cmp(&b))
        });
        let half = sorted.len() / 2;
        for &i in &sorted {
            active[i] = true;
        }
        for (k, &i) in sorted.iter().enumerate() {
            side[i] = if k < half { 1 } else { 2 };
        }
        let mut left = Vec::new();
        let mut sep = Vec::new();
        for &i in &sorted[..half] {
            if adj[i].iter().any(|&j| active[j] && side[j] == 2) {
                sep.push(i);
            } else {
                left.push(i);
            }
        }
        let right = sorted[half..].to_vec();
        for &i in &sorted {
            active[i] = false;
            side[i] = 0;
        }
        if left.is_empty() {
            // Degenerate split (e.g. a clique); stop dissecting.
            order.extend(sep);
            order.extend(right);
            continue;
        }
        stack.push((Vec::new(), Some(sep)));
        stack.push((right, None));
        stack.push((left, None));
    }
    order
}

/// Minimum-degree ordering on the explicit elimination graph.
pub fn minimum_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut graph: Vec<BTreeSet<usize>> = adj.iter().map(|a| a.iter().copied().collect()).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (graph[i].len(), i)).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut graph[v]).into_iter().collect();
        for &a in &nbrs {
            queue.remove(&(graph[a].len(), a));
            graph[a].remove(&v);
        }
        for (x, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[x + 1..] {
                graph[a].insert(b);
                graph[b].insert(a);
            }
        }
        for &a in &nbrs {
            queue.insert((graph[a].len(), a));
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> (Vec<Vec<usize>>, Vec<[f64; 2]>) {
        let id = |i: usize, j: usize| j * n + i;
        let mut adj = vec![Vec::new(); n * n];
        let mut xy = Vec::new();
        for j in 0..n {
            for i in 0..n {
                xy.push([i as f64, j as f64]);
                if i + 1 < n {
                    adj[id(i, j)].push(id(i + 1, j));
                    adj[id(i + 1, j)].push(id(i, j));
                }
                if j + 1 < n {
                    adj[id(i, j)].push(id(i, j + 1));
                    adj[id(i, j + 1)].push(id(i, j));
                }
            }
        }
        (adj, xy)
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n
            && p.iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }

    #[test]
    fn orderings_are_permutations() {
        let (adj, xy) = grid(23);
        assert!(is_permutation(&nested_dissection(&adj, &xy), adj.len()));
        assert!(is_permutation(&minimum_degree(&adj), adj.len()));
    }

    #[test]
    fn first_separator_is_last() {
        let (adj, xy) = grid(20);
        let p = nested_dissection(&adj, &xy);
        // top-level separator is one grid column, numbered last
        let tail = &p[p.len() - 20..];
        let x = xy[tail[0]][0];
        assert!(tail.iter().all(|&i| xy[i][0] == x));
    }
}
