//! Splitting tree over the controller input domain.
//!
//! Leaves are the active cells of the partition; internal nodes remember the
//! dimensions and cut points of each split. Cells own their faces half-open:
//! a point on a shared face belongs to the cell whose low bound equals the
//! coordinate, except at the domain's upper face, which is closed.

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::verifier::ActionSet;

/// Stable identifier of a cell. Ids are never reused; a split retires the
/// parent's id and mints fresh ids for the children.
pub type CellId = u64;

/// One cell of the partition, annotated with verification and checking state.
///
/// `action_set` is empty until the cell has been verified; children of a
/// split inherit the parent's set as their candidate mask. `prob` is the
/// current overapproximated reach probability estimate.
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: CellId,
    pub rect: Rect,
    pub action_set: ActionSet,
    pub prob: f64,
    pub in_unsafe: bool,
    /// Pinned at probability zero (absorbing safe region).
    pub pinned_safe: bool,
    pub per_action_prob: Option<Vec<(usize, f64)>>,
}

impl Cell {
    fn new(id: CellId, rect: Rect) -> Self {
        Cell {
            id,
            rect,
            action_set: ActionSet::empty(),
            prob: 0.0,
            in_unsafe: false,
            pinned_safe: false,
            per_action_prob: None,
        }
    }

    pub fn pinned(&self) -> bool {
        self.in_unsafe || self.pinned_safe
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Cell),
    Internal {
        rect: Rect,
        /// Split dimensions, ascending.
        dims: Vec<usize>,
        /// Cut coordinate per split dimension.
        cuts: Vec<f64>,
        /// `2^dims.len()` children; bit `b` of the child index selects the
        /// high side of `dims[b]`.
        children: Vec<usize>,
    },
}

impl Node {
    fn rect(&self) -> &Rect {
        match self {
            Node::Leaf(c) => &c.rect,
            Node::Internal { rect, .. } => rect,
        }
    }
}

/// The partition: a tree of axis-aligned cells tiling the root domain.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    nodes: Vec<Node>,
}

impl PartitionTree {
    pub fn new(domain: Rect) -> Self {
        assert!(
            (0..domain.dim()).all(|d| domain.lows[d] < domain.highs[d]),
            "domain must have positive width in every dimension"
        );
        PartitionTree {
            nodes: vec![Node::Leaf(Cell::new(0, domain))],
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].rect().dim()
    }

    pub fn domain(&self) -> &Rect {
        self.nodes[0].rect()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    /// All leaf cells in id order.
    pub fn leaves(&self) -> impl Iterator<Item = &Cell> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf(c) => Some(c),
            _ => None,
        })
    }

    pub fn leaf_ids(&self) -> Vec<CellId> {
        self.leaves().map(|c| c.id).collect()
    }

    pub fn leaf(&self, id: CellId) -> Result<&Cell> {
        match self.nodes.get(id as usize) {
            Some(Node::Leaf(c)) => Ok(c),
            _ => Err(Error::NotALeaf(id)),
        }
    }

    pub fn leaf_mut(&mut self, id: CellId) -> Result<&mut Cell> {
        match self.nodes.get_mut(id as usize) {
            Some(Node::Leaf(c)) => Ok(c),
            _ => Err(Error::NotALeaf(id)),
        }
    }

    /// Bisect a leaf at the midpoints of `dims`, replacing it with
    /// `2^|dims|` children. Children inherit the parent's action set as
    /// their candidate mask and the parent's probability as their initial
    /// estimate, so value iteration resumes warm after online splits.
    pub fn split(&mut self, id: CellId, dims: &[usize]) -> Result<Vec<CellId>> {
        let cell = self.leaf(id)?;
        let cuts: Vec<f64> = {
            let mut ds: Vec<usize> = dims.to_vec();
            ds.sort_unstable();
            ds.dedup();
            ds.iter().map(|&d| cell.rect.midpoint(d)).collect()
        };
        self.split_at(id, dims, &cuts)
    }

    /// Like `split` but cutting at explicit coordinates instead of
    /// midpoints. Used to impose structured cuts (for example unit time
    /// slices) that bisection cannot produce.
    pub fn split_at(&mut self, id: CellId, dims: &[usize], cuts: &[f64]) -> Result<Vec<CellId>> {
        let mut dims: Vec<usize> = dims.to_vec();
        dims.sort_unstable();
        dims.dedup();
        if dims.is_empty() {
            return Err(Error::EmptySplitDims);
        }
        if dims.len() != cuts.len() {
            return Err(Error::InvalidConfig(format!(
                "{} cut points for {} dimensions",
                cuts.len(),
                dims.len()
            )));
        }
        let cell = self.leaf(id)?.clone();
        for (&d, &cut) in dims.iter().zip(cuts) {
            if d >= cell.rect.dim() {
                return Err(Error::InvalidConfig(format!(
                    "split dimension {d} out of range for dimension {}",
                    cell.rect.dim()
                )));
            }
            if cut <= cell.rect.lows[d] || cut >= cell.rect.highs[d] {
                return Err(Error::DegenerateSplit { dim: d, cut });
            }
        }

        let mut child_ids = Vec::with_capacity(1 << dims.len());
        let mut children = Vec::with_capacity(1 << dims.len());
        for mask in 0..1usize << dims.len() {
            let mut rect = cell.rect.clone();
            for (b, (&d, &cut)) in dims.iter().zip(cuts).enumerate() {
                if mask >> b & 1 == 0 {
                    rect.highs[d] = cut;
                } else {
                    rect.lows[d] = cut;
                }
            }
            let child_id = self.nodes.len() as CellId;
            let mut child = Cell::new(child_id, rect);
            child.action_set = cell.action_set;
            child.prob = cell.prob;
            child_ids.push(child_id);
            children.push(child_id as usize);
            self.nodes.push(Node::Leaf(child));
        }
        self.nodes[id as usize] = Node::Internal {
            rect: cell.rect,
            dims,
            cuts: cuts.to_vec(),
            children,
        };
        Ok(child_ids)
    }

    /// The unique leaf containing `x` under the half-open convention.
    pub fn locate(&self, x: &[f64]) -> Result<CellId> {
        if !self.domain().contains_point(x) {
            return Err(Error::OutOfDomain);
        }
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf(c) => return Ok(c.id),
                Node::Internal {
                    dims, cuts, children, ..
                } => {
                    let mut idx = 0usize;
                    for (b, (&d, &cut)) in dims.iter().zip(cuts).enumerate() {
                        if x[d] >= cut {
                            idx |= 1 << b;
                        }
                    }
                    node = children[idx];
                }
            }
        }
    }

    /// Ids of every leaf intersecting `query` with positive measure, or
    /// sharing a face in dimensions where `query` is degenerate. No
    /// duplicates; errors when the box misses the domain entirely.
    pub fn overlapping(&self, query: &Rect) -> Result<Vec<CellId>> {
        if query.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: query.dim(),
            });
        }
        if !self.domain().overlaps_query(query) {
            return Err(Error::DisjointFromDomain);
        }
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                Node::Leaf(c) => out.push(c.id),
                Node::Internal { children, .. } => {
                    // Visit in reverse so ids come out roughly ascending.
                    for &ch in children.iter().rev() {
                        if self.nodes[ch].rect().overlaps_query(query) {
                            stack.push(ch);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Max and min of leaf probabilities over `overlapping(query)`, without
    /// materializing the id list. Errors like `overlapping`.
    pub fn prob_range_over(&self, query: &Rect) -> Result<(f64, f64)> {
        if !self.domain().overlaps_query(query) {
            return Err(Error::DisjointFromDomain);
        }
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                Node::Leaf(c) => {
                    max = max.max(c.prob);
                    min = min.min(c.prob);
                }
                Node::Internal { children, .. } => {
                    for &ch in children.iter() {
                        if self.nodes[ch].rect().overlaps_query(query) {
                            stack.push(ch);
                        }
                    }
                }
            }
        }
        Ok((max, min))
    }
}
