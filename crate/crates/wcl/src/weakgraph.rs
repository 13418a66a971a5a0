//! Weak-label generation: 1-NN adjacency from a similarity matrix,
//! connected-components labeling via union-find, and the resulting
//! symmetric weak-label matrix plus component statistics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::WclError;
use crate::matkernel::Matrix;

/// Symmetric boolean adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    edges: Vec<bool>,
}

impl AdjacencyMatrix {
    pub fn new(n: usize) -> Self {
        AdjacencyMatrix {
            n,
            edges: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.n + j]
    }

    /// Sets the undirected edge i-j. Self loops are ignored.
    pub fn set_edge(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.edges[i * self.n + j] = true;
        self.edges[j * self.n + i] = true;
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.edge(i, j)).count()
    }
}

/// Disjoint-set with union by rank and path compression.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    /// makeSet for each of `n` elements.
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]]; // path halving
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns true if they were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// One component id per vertex, ids contiguous from 0 in order of first
/// vertex appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabels {
    labels: Vec<usize>,
}

impl ComponentLabels {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Symmetric boolean weak-label matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelMatrix {
    n: usize,
    y: Vec<bool>,
}

impl WeakLabelMatrix {
    /// Builds a label matrix from undirected pairs; each pair is mirrored
    /// and self pairs are ignored.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut y = vec![false; n * n];
        for &(i, j) in pairs {
            if i != j {
                y[i * n + j] = true;
                y[j * n + i] = true;
            }
        }
        WeakLabelMatrix { n, y }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.y[i * self.n + j]
    }

    /// Indices j with y[i][j] set.
    pub fn positives(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.get(i, j)).collect()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComponentStats {
    pub component_count: usize,
    /// Component sizes, sorted descending.
    pub sizes: Vec<usize>,
    /// size → number of components of that size.
    pub histogram: BTreeMap<usize, usize>,
}

/// Builds the 1-NN adjacency: i-j linked iff one is the other's most
/// similar sample. The diagonal is excluded from the argmax and ties go to
/// the lowest index.
pub fn build_one_nn_adjacency(sim: &Matrix) -> Result<AdjacencyMatrix, WclError> {
    if sim.rows() != sim.cols() {
        return Err(WclError::NotSquare {
            rows: sim.rows(),
            cols: sim.cols(),
        });
    }
    let n = sim.rows();
    if n < 2 {
        return Err(WclError::TooSmall { min: 2, got: n });
    }
    let mut adj = AdjacencyMatrix::new(n);
    for i in 0..n {
        let row = sim.row(i);
        let mut best = usize::MAX;
        let mut best_sim = f64::NEG_INFINITY;
        for (k, &s) in row.iter().enumerate() {
            if k != i && s > best_sim {
                best_sim = s;
                best = k;
            }
        }
        adj.set_edge(i, best);
    }
    Ok(adj)
}

/// Labels connected components: makeSet per vertex, union over every edge
/// whose endpoints have distinct roots, then find per vertex. Ids are
/// renumbered by first appearance so vertex 0 always gets id 0.
pub fn connected_components(adj: &AdjacencyMatrix) -> ComponentLabels {
    let n = adj.n();
    let mut ds = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if adj.edge(i, j) && ds.find(i) != ds.find(j) {
                ds.union(i, j);
            }
        }
    }
    canonical_labels(&mut ds, n)
}

fn canonical_labels(ds: &mut DisjointSet, n: usize) -> ComponentLabels {
    let mut remap: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let root = ds.find(v);
        let id = *remap[root].get_or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
        labels.push(id);
    }
    ComponentLabels { labels }
}

/// y[i][j] = same component and i ≠ j.
pub fn weak_labels(comp: &ComponentLabels) -> WeakLabelMatrix {
    let n = comp.len();
    let mut y = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            y[i * n + j] = i != j && comp.labels[i] == comp.labels[j];
        }
    }
    WeakLabelMatrix { n, y }
}

/// Component count, sizes (descending) and size histogram.
pub fn component_stats(comp: &ComponentLabels) -> ComponentStats {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in comp.labels() {
        *counts.entry(l).or_insert(0) += 1;
    }
    let mut sizes: Vec<usize> = counts.values().copied().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let mut histogram = BTreeMap::new();
    for &s in &sizes {
        *histogram.entry(s).or_insert(0) += 1;
    }
    ComponentStats {
        component_count: counts.len(),
        sizes,
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sim3() -> Matrix {
        Matrix::from_rows(&[
            vec![0.0, 0.9, 0.5],
            vec![0.9, 0.0, 0.1],
            vec![0.5, 0.1, 0.0],
        ])
    }

    #[test]
    fn one_nn_three_points() {
        let adj = build_one_nn_adjacency(&sim3()).unwrap();
        assert!(adj.edge(0, 1) && adj.edge(1, 0));
        assert!(adj.edge(0, 2) && adj.edge(2, 0));
        assert!(!adj.edge(1, 2));
        for i in 0..3 {
            assert!(!adj.edge(i, i));
        }
    }

    #[test]
    fn one_nn_two_points() {
        let sim = Matrix::from_rows(&[vec![0.0, -0.7], vec![-0.7, 0.0]]);
        let adj = build_one_nn_adjacency(&sim).unwrap();
        assert!(adj.edge(0, 1));
    }

    #[test]
    fn one_nn_tie_breaks_low_index() {
        // rows 0 and 1 are duplicates; row 2 equidistant to both
        let sim = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.5],
            vec![1.0, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ]);
        let adj = build_one_nn_adjacency(&sim).unwrap();
        assert!(adj.edge(2, 0));
        assert!(!adj.edge(2, 1));
    }

    #[test]
    fn one_nn_rejects_bad_shapes() {
        let rect = Matrix::zeros(2, 3);
        assert!(matches!(
            build_one_nn_adjacency(&rect),
            Err(WclError::NotSquare { .. })
        ));
        let tiny = Matrix::zeros(1, 1);
        assert!(matches!(
            build_one_nn_adjacency(&tiny),
            Err(WclError::TooSmall { .. })
        ));
    }

    #[test]
    fn components_path_graph() {
        let mut adj = AdjacencyMatrix::new(3);
        adj.set_edge(0, 1);
        adj.set_edge(1, 2);
        let comp = connected_components(&adj);
        assert_eq!(comp.labels(), &[0, 0, 0]);
    }

    #[test]
    fn components_edgeless() {
        let adj = AdjacencyMatrix::new(4);
        let comp = connected_components(&adj);
        assert_eq!(comp.labels(), &[0, 1, 2, 3]);
    }

    #[test]
    fn disjoint_set_find_union() {
        let mut ds = DisjointSet::new(4);
        assert!(ds.union(0, 1));
        assert!(!ds.union(1, 0));
        assert_eq!(ds.find(0), ds.find(1));
        assert_ne!(ds.find(0), ds.find(2));
        let r = ds.find(3);
        assert_eq!(ds.find(3), r);
    }

    #[test]
    fn weak_labels_from_labels() {
        let comp = ComponentLabels {
            labels: vec![0, 0, 1],
        };
        let y = weak_labels(&comp);
        assert!(y.get(0, 1) && y.get(1, 0));
        assert!(!y.get(0, 0) && !y.get(2, 2));
        assert!(!y.get(0, 2) && !y.get(1, 2));
    }

    #[test]
    fn weak_labels_single_component() {
        let comp = ComponentLabels {
            labels: vec![0, 0, 0],
        };
        let y = weak_labels(&comp);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(y.get(i, j), i != j);
            }
        }
    }

    #[test]
    fn pipeline_three_points_all_linked() {
        let adj = build_one_nn_adjacency(&sim3()).unwrap();
        let comp = connected_components(&adj);
        let y = weak_labels(&comp);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(y.get(i, j), i != j);
            }
        }
    }

    #[test]
    fn stats_basic() {
        let comp = ComponentLabels {
            labels: vec![0, 0, 1, 1, 1],
        };
        let s = component_stats(&comp);
        assert_eq!(s.component_count, 2);
        assert_eq!(s.sizes, vec![3, 2]);
        assert_eq!(s.histogram.get(&3), Some(&1));
        assert_eq!(s.histogram.get(&2), Some(&1));

        let singles = ComponentLabels {
            labels: vec![0, 1, 2],
        };
        let s = component_stats(&singles);
        assert_eq!(s.component_count, 3);
        assert_eq!(s.sizes, vec![1, 1, 1]);
    }

    /// BFS flood fill, independent of the union-find path.
    pub(crate) fn bfs_components(adj: &AdjacencyMatrix) -> Vec<usize> {
        let n = adj.n();
        let mut labels = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if labels[start] != usize::MAX {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([start]);
            labels[start] = next;
            while let Some(v) = queue.pop_front() {
                for u in 0..n {
                    if adj.edge(v, u) && labels[u] == usize::MAX {
                        labels[u] = next;
                        queue.push_back(u);
                    }
                }
            }
            next += 1;
        }
        labels
    }

    proptest! {
        #[test]
        fn adjacency_symmetric_zero_diag(
            vals in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let sim = Matrix::from_vec(4, 4, vals).unwrap();
            let adj = build_one_nn_adjacency(&sim).unwrap();
            for i in 0..4 {
                prop_assert!(!adj.edge(i, i));
                prop_assert!(adj.degree(i) >= 1);
                for j in 0..4 {
                    prop_assert_eq!(adj.edge(i, j), adj.edge(j, i));
                }
            }
        }

        #[test]
        fn components_match_bfs(
            bits in prop::collection::vec(any::<bool>(), 10 * 9 / 2),
        ) {
            let n = 10;
            let mut adj = AdjacencyMatrix::new(n);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if bits[k] {
                        adj.set_edge(i, j);
                    }
                    k += 1;
                }
            }
            let uf = connected_components(&adj);
            // first-appearance canonical numbering makes labels directly comparable
            let oracle = bfs_components(&adj);
            prop_assert_eq!(uf.labels(), oracle.as_slice());
        }

        #[test]
        fn weak_labels_monotone_transform_invariant(
            vals in prop::collection::vec(-0.99f64..0.99, 25),
        ) {
            let sim = Matrix::from_vec(5, 5, vals.clone()).unwrap();
            // strictly monotone entrywise transform preserves every argmax
            let warped = Matrix::from_vec(
                5, 5, vals.iter().map(|v| (2.0 * v).tanh() + 3.0).collect(),
            ).unwrap();
            let y1 = weak_labels(&connected_components(&build_one_nn_adjacency(&sim).unwrap()));
            let y2 = weak_labels(&connected_components(&build_one_nn_adjacency(&warped).unwrap()));
            prop_assert_eq!(y1, y2);
        }
    }
}
