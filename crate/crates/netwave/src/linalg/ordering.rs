//! Fill-reducing orderings for symmetric sparsity graphs.
//!
//! Network matrices come from quasi-planar embedded graphs, where nested
//! dissection gives near-optimal fill. The dissection here levelizes a BFS
//! from a pseudo-peripheral vertex and takes the middle level as separator;
//! small blocks fall back to a plain minimum-degree elimination.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    MinDegree,
    NestedDissection,
}

const ND_BASE_CASE: usize = 96;

/// Minimum-degree ordering on an adjacency structure. Ties break toward the
/// smallest vertex index, which keeps the ordering deterministic.
pub fn min_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut neighbors: Vec<std::collections::BTreeSet<usize>> = adj
        .iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if !eliminated[v] && neighbors[v].len() < best_deg {
                best = v;
                best_deg = neighbors[v].len();
            }
        }
        let v = best;
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = neighbors[v].iter().copied().collect();
        for &a in &nbrs {
            neighbors[a].remove(&v);
        }
        // Fill: eliminate v by forming a clique over its remaining neighbors.
        for i in 0..nbrs.len() {
            for j in (i + 1)..nbrs.len() {
                let (a, b) = (nbrs[i], nbrs[j]);
                if !eliminated[a] && !eliminated[b] {
                    neighbors[a].insert(b);
                    neighbors[b].insert(a);
                }
            }
        }
    }
    order
}

/// Nested dissection ordering. Returns a permutation `perm` where `perm[k]`
/// is the original index eliminated at step `k`.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let vertices: Vec<usize> = (0..n).collect();
    dissect(adj, &vertices, &mut order);
    debug_assert_eq!(order.len(), n);
    order
}

fn dissect(adj: &[Vec<usize>], vertices: &[usize], order: &mut Vec<usize>) {
    if vertices.len() <= ND_BASE_CASE {
        let local = induced(adj, vertices);
        for k in min_degree(&local) {
            order.push(vertices[k]);
        }
        return;
    }

    let local = induced(adj, vertices);
    let n = local.len();
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        component[start] = n_components;
        while let Some(v) = queue.pop_front() {
            for &w in &local[v] {
                if component[w] == usize::MAX {
                    component[w] = n_components;
                    queue.push_back(w);
                }
            }
        }
        n_components += 1;
    }
    if n_components > 1 {
        for comp in 0..n_components {
            let part: Vec<usize> = (0..n)
                .filter(|&v| component[v] == comp)
                .map(|v| vertices[v])
                .collect();
            dissect(adj, &part, order);
        }
        return;
    }

    let root = pseudo_peripheral(&local);
    let levels = bfs_levels(&local, root);
    let max_level = *levels.iter().max().unwrap();
    if max_level < 2 {
        let local_order = min_degree(&local);
        for k in local_order {
            order.push(vertices[k]);
        }
        return;
    }
    let mid = max_level / 2;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut separator = Vec::new();
    for v in 0..n {
        match levels[v].cmp(&mid) {
            std::cmp::Ordering::Less => left.push(vertices[v]),
            std::cmp::Ordering::Greater => right.push(vertices[v]),
            std::cmp::Ordering::Equal => separator.push(vertices[v]),
        }
    }
    dissect(adj, &left, order);
    dissect(adj, &right, order);
    order.extend_from_slice(&separator);
}

fn induced(adj: &[Vec<usize>], vertices: &[usize]) -> Vec<Vec<usize>> {
    let mut local_of = std::collections::HashMap::with_capacity(vertices.len());
    for (li, &gi) in vertices.iter().enumerate() {
        local_of.insert(gi, li);
    }
    vertices
        .iter()
        .map(|&gi| {
            adj[gi]
                .iter()
                .filter_map(|w| local_of.get(w).copied())
                .collect()
        })
        .collect()
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    for l in level.iter_mut() {
        if *l == usize::MAX {
            *l = 0;
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>]) -> usize {
    let mut root = 0;
    let mut ecc = 0;
    for _ in 0..3 {
        let levels = bfs_levels(adj, root);
        let (far, far_level) = levels
            .iter()
            .enumerate()
            .max_by_key(|&(i, l)| (*l, std::cmp::Reverse(i)))
            .map(|(i, l)| (i, *l))
            .unwrap();
        if far_level <= ecc {
            break;
        }
        ecc = far_level;
        root = far;
    }
    root
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| {
                let mut nb = Vec::new();
                if i > 0 {
                    nb.push(i - 1);
                }
                if i + 1 < n {
                    nb.push(i + 1);
                }
                nb
            })
            .collect()
    }

    fn is_permutation(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        for &v in p {
            if v >= p.len() || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        true
    }

    #[test]
    fn min_degree_is_permutation() {
        let order = min_degree(&path_graph(17));
        assert!(is_permutation(&order));
    }

    #[test]
    fn nested_dissection_is_permutation() {
        let order = nested_dissection(&path_graph(500));
        assert!(is_permutation(&order));
    }

    #[test]
    fn nested_dissection_handles_disconnected() {
        let mut adj = path_graph(200);
        adj[99] = vec![98];
        adj[100] = vec![101];
        let order = nested_dissection(&adj);
        assert!(is_permutation(&order));
    }
}
