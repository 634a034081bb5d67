//! Maximum matching and minimum vertex cover on bipartite graphs.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("matching is not maximum: an augmenting path starts at left vertex {0}")]
    NotMaximum(usize),
    #[error("matching is inconsistent with the graph")]
    InvalidMatching,
}

/// Bipartite graph with weighted edges; vertices are `0..n_left` and
/// `0..n_right`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_left: usize,
    n_right: usize,
    /// Sorted neighbour lists of the left vertices.
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize, f64)>,
}

impl BipartiteGraph {
    /// Repeated `(left, right)` pairs have their weights summed.
    pub fn new(n_left: usize, n_right: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut merged: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for (l, r, w) in edges {
            assert!(l < n_left && r < n_right, "edge ({l},{r}) out of range");
            *merged.entry((l, r)).or_insert(0.0) += w;
        }
        let mut adj = vec![Vec::new(); n_left];
        let edges: Vec<(usize, usize, f64)> = merged.into_iter().map(|((l, r), w)| (l, r, w)).collect();
        for &(l, r, _) in &edges {
            adj[l].push(r);
        }
        Self {
            n_left,
            n_right,
            adj,
            edges,
        }
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbours(&self, left: usize) -> &[usize] {
        &self.adj[left]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub left_to_right: Vec<Option<usize>>,
    pub right_to_left: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.left_to_right.iter().filter(|m| m.is_some()).count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.left_to_right
            .iter()
            .enumerate()
            .filter_map(|(l, r)| r.map(|r| (l, r)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VertexCover {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl VertexCover {
    pub fn size(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

const INF: usize = usize::MAX;

/// Hopcroft-Karp maximum matching. Vertices are visited in index order, so
/// the result depends only on the graph.
pub fn hopcroft_karp(g: &BipartiteGraph) -> Matching {
    let mut ml: Vec<Option<usize>> = vec![None; g.n_left];
    let mut mr: Vec<Option<usize>> = vec![None; g.n_right];
    let mut dist = vec![INF; g.n_left];
    loop {
        // Layer the graph from the free left vertices.
        let mut queue = VecDeque::new();
        for l in 0..g.n_left {
            if ml[l].is_none() {
                dist[l] = 0;
                queue.push_back(l);
            } else {
                dist[l] = INF;
            }
        }
        let mut found = false;
        while let Some(l) = queue.pop_front() {
            for &r in &g.adj[l] {
                match mr[r] {
                    None => found = true,
                    Some(l2) if dist[l2] == INF => {
                        dist[l2] = dist[l] + 1;
                        queue.push_back(l2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut it = vec![0usize; g.n_left];
        for l in 0..g.n_left {
            if ml[l].is_none() {
                augment(g, l, &mut ml, &mut mr, &mut dist, &mut it);
            }
        }
    }
    Matching {
        left_to_right: ml,
        right_to_left: mr,
    }
}

/// Depth-first search along the layered graph, iterative to keep deep
/// alternating paths off the call stack.
fn augment(
    g: &BipartiteGraph,
    root: usize,
    ml: &mut [Option<usize>],
    mr: &mut [Option<usize>],
    dist: &mut [usize],
    it: &mut [usize],
) -> bool {
    let mut stack: Vec<usize> = vec![root];
    while let Some(&l) = stack.last() {
        if it[l] == g.adj[l].len() {
            dist[l] = INF;
            stack.pop();
            continue;
        }
        let r = g.adj[l][it[l]];
        it[l] += 1;
        match mr[r] {
            None => {
                // Flip the path: every left vertex on the stack takes the
                // right vertex it last tried.
                for &lv in stack.iter().rev() {
                    let rv = g.adj[lv][it[lv] - 1];
                    ml[lv] = Some(rv);
                    mr[rv] = Some(lv);
                }
                return true;
            }
            Some(l2) if dist[l2] == dist[l] + 1 => stack.push(l2),
            _ => {}
        }
    }
    false
}

/// König's construction: with `Z` the vertices reachable from free left
/// vertices by alternating paths, the cover is `(L \ Z) ∪ (R ∩ Z)`.
pub fn min_vertex_cover(g: &BipartiteGraph, m: &Matching) -> Result<VertexCover, GraphError> {
    if m.left_to_right.len() != g.n_left || m.right_to_left.len() != g.n_right {
        return Err(GraphError::InvalidMatching);
    }
    for (l, r) in m.pairs() {
        if m.right_to_left[r] != Some(l) || g.adj[l].binary_search(&r).is_err() {
            return Err(GraphError::InvalidMatching);
        }
    }
    let mut zl = vec![false; g.n_left];
    let mut zr = vec![false; g.n_right];
    let mut queue = VecDeque::new();
    for l in 0..g.n_left {
        if m.left_to_right[l].is_none() {
            zl[l] = true;
            queue.push_back((l, l));
        }
    }
    while let Some((l, root)) = queue.pop_front() {
        for &r in &g.adj[l] {
            if zr[r] || m.left_to_right[l] == Some(r) {
                continue;
            }
            zr[r] = true;
            match m.right_to_left[r] {
                None => return Err(GraphError::NotMaximum(root)),
                Some(l2) => {
                    if !zl[l2] {
                        zl[l2] = true;
                        queue.push_back((l2, root));
                    }
                }
            }
        }
    }
    Ok(VertexCover {
        left: (0..g.n_left).filter(|&l| !zl[l]).collect(),
        right: (0..g.n_right).filter(|&r| zr[r]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(nl: usize, nr: usize, e: &[(usize, usize)]) -> BipartiteGraph {
        BipartiteGraph::new(nl, nr, e.iter().map(|&(l, r)| (l, r, 1.0)))
    }

    /// The example graph with left vertices a..d and right vertices e..h.
    fn example_graph() -> BipartiteGraph {
        // a1e1, a1f2, a1g3, b2f2, c3f2, d4g3, d4h4
        graph(4, 4, &[(0, 0), (0, 1), (0, 2), (1, 1), (2, 1), (3, 2), (3, 3)])
    }

    fn covers(g: &BipartiteGraph, c: &VertexCover) -> bool {
        g.edges().iter().all(|&(l, r, _)| c.left.contains(&l) || c.right.contains(&r))
    }

    fn brute_matching(g: &BipartiteGraph) -> usize {
        fn go(g: &BipartiteGraph, l: usize, used: &mut Vec<bool>) -> usize {
            if l == g.n_left() {
                return 0;
            }
            let mut best = go(g, l + 1, used);
            for &r in g.neighbours(l) {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(g, l + 1, used));
                    used[r] = false;
                }
            }
            best
        }
        go(g, 0, &mut vec![false; g.n_right()])
    }

    fn brute_cover(g: &BipartiteGraph) -> usize {
        let n = g.n_left() + g.n_right();
        (0u32..(1 << n))
            .filter(|mask| {
                g.edges().iter().all(|&(l, r, _)| mask >> l & 1 == 1 || mask >> (g.n_left() + r) & 1 == 1)
            })
            .map(|m| m.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn example_matching_and_cover() {
        let g = example_graph();
        let m = hopcroft_karp(&g);
        assert_eq!(m.size(), 3);
        assert_eq!(brute_matching(&g), 3);
        let c = min_vertex_cover(&g, &m).unwrap();
        assert_eq!(c.size(), 3);
        assert!(covers(&g, &c));
        // {a, f, d} covers all seven edges and nothing smaller does.
        let afd = VertexCover { left: vec![0, 3], right: vec![1] };
        assert!(covers(&g, &afd));
        assert_eq!(brute_cover(&g), 3);
    }

    #[test]
    fn small_cases() {
        let k22 = graph(2, 2, &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(hopcroft_karp(&k22).size(), 2);
        let empty = graph(3, 2, &[]);
        let m = hopcroft_karp(&empty);
        assert_eq!(m.size(), 0);
        assert_eq!(min_vertex_cover(&empty, &m).unwrap().size(), 0);
        let single = graph(1, 1, &[(0, 0)]);
        assert_eq!(min_vertex_cover(&single, &hopcroft_karp(&single)).unwrap().size(), 1);
        let star = graph(1, 4, &[(0, 0), (0, 1), (0, 2), (0, 3)]);
        let c = min_vertex_cover(&star, &hopcroft_karp(&star)).unwrap();
        assert_eq!(c, VertexCover { left: vec![0], right: vec![] });
    }

    #[test]
    fn rejects_non_maximum_matching() {
        let g = graph(2, 2, &[(0, 0), (1, 1)]);
        let m = Matching {
            left_to_right: vec![Some(0), None],
            right_to_left: vec![Some(0), None],
        };
        assert_eq!(min_vertex_cover(&g, &m), Err(GraphError::NotMaximum(1)));
    }

    #[test]
    fn weights_of_repeated_edges_add() {
        let g = BipartiteGraph::new(1, 1, [(0, 0, 0.5), (0, 0, 0.25)]);
        assert_eq!(g.edges(), &[(0, 0, 0.75)]);
    }

    fn arb_graph(max: usize) -> impl Strategy<Value = BipartiteGraph> {
        (1..=max, 1..=max)
            .prop_flat_map(|(nl, nr)| {
                (Just(nl), Just(nr), prop::collection::vec(any::<bool>(), nl * nr))
            })
            .prop_map(|(nl, nr, bits)| {
                let e: Vec<(usize, usize)> = (0..nl * nr).filter(|&k| bits[k]).map(|k| (k / nr, k % nr)).collect();
                graph(nl, nr, &e)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn matches_brute_force_up_to_8x8(g in arb_graph(8)) {
            let m = hopcroft_karp(&g);
            let c = min_vertex_cover(&g, &m).unwrap();
            prop_assert_eq!(m.size(), brute_matching(&g));
            prop_assert_eq!(c.size(), m.size());
            prop_assert_eq!(c.size(), brute_cover(&g));
            prop_assert!(covers(&g, &c));
        }

        #[test]
        fn koenig_up_to_12x12(g in arb_graph(12)) {
            let m = hopcroft_karp(&g);
            let c = min_vertex_cover(&g, &m).unwrap();
            prop_assert_eq!(c.size(), m.size());
            prop_assert!(covers(&g, &c));
            prop_assert_eq!(hopcroft_karp(&g), m);
        }
    }
}
