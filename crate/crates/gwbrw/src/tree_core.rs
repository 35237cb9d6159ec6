//! Finite rooted ordered trees, their codings (height, contour, Łukasiewicz),
//! lexicographic traversal, pointed-tree windows, and the right-successor map.
//!
//! Vertices are dense indices in depth-first (lexicographic) order; words are
//! never materialized. Index 0 is always the root and `parent[v] < v` for
//! every non-root vertex.

use thiserror::Error;

pub const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    /// The Łukasiewicz partial sums hit -1 before the last step, or fail to
    /// end at -1.
    #[error("invalid Lukasiewicz path at step {0}")]
    InvalidPath(usize),
    #[error("empty offspring sequence")]
    Empty,
    #[error("cannot parse offspring sequence: {0}")]
    Parse(String),
}

/// Finite rooted ordered tree stored as DFS offspring counts with derived
/// parent / first-child / next-sibling links.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrderedTree {
    offspring: Vec<u32>,
    parent: Vec<u32>,
    first_child: Vec<u32>,
    next_sibling: Vec<u32>,
}

impl OrderedTree {
    /// Builds a tree from its DFS offspring sequence, validating the
    /// Łukasiewicz invariant (partial sums of `k_i - 1` stay >= 0 before the
    /// end and finish at -1).
    pub fn from_offspring(offspring: Vec<u32>) -> Result<Self, TreeError> {
        if offspring.is_empty() {
            return Err(TreeError::Empty);
        }
        let n = offspring.len();
        let mut sum: i64 = 0;
        for (k, &c) in offspring.iter().enumerate() {
            sum += c as i64 - 1;
            if sum < 0 && k + 1 < n {
                return Err(TreeError::InvalidPath(k));
            }
        }
        if sum != -1 {
            return Err(TreeError::InvalidPath(n - 1));
        }

        // DFS order means the next unseen vertex is a child of the deepest
        // vertex that still has children to attach.
        let mut parent = vec![NONE; n];
        let mut stack: Vec<(u32, u32)> = vec![(0, offspring[0])];
        for v in 1..n as u32 {
            let top = loop {
                let top = stack.last_mut().expect("valid path has pending parent");
                if top.1 > 0 {
                    break top;
                }
                stack.pop();
            };
            top.1 -= 1;
            parent[v as usize] = top.0;
            stack.push((v, offspring[v as usize]));
        }

        let mut first_child = vec![NONE; n];
        let mut next_sibling = vec![NONE; n];
        let mut last_child = vec![NONE; n];
        for v in 1..n as u32 {
            let p = parent[v as usize] as usize;
            if last_child[p] == NONE {
                first_child[p] = v;
            } else {
                next_sibling[last_child[p] as usize] = v;
            }
            last_child[p] = v;
        }
        Ok(OrderedTree {
            offspring,
            parent,
            first_child,
            next_sibling,
        })
    }

    pub fn len(&self) -> usize {
        self.offspring.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offspring(&self, v: usize) -> u32 {
        self.offspring[v]
    }

    pub fn offspring_seq(&self) -> &[u32] {
        &self.offspring
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        match self.parent[v] {
            NONE => None,
            p => Some(p as usize),
        }
    }

    pub fn first_child(&self, v: usize) -> Option<usize> {
        match self.first_child[v] {
            NONE => None,
            c => Some(c as usize),
        }
    }

    pub fn next_sibling(&self, v: usize) -> Option<usize> {
        match self.next_sibling[v] {
            NONE => None,
            s => Some(s as usize),
        }
    }

    pub fn children(&self, v: usize) -> ChildIter<'_> {
        ChildIter {
            tree: self,
            cur: self.first_child[v],
        }
    }

    /// Depth of every vertex, in DFS order, in one pass.
    pub fn depths(&self) -> Vec<u32> {
        let n = self.len();
        let mut d = vec![0u32; n];
        for v in 1..n {
            d[v] = d[self.parent[v] as usize] + 1;
        }
        d
    }

    pub fn depth(&self, v: usize) -> u32 {
        let mut d = 0;
        let mut u = v;
        while let Some(p) = self.parent(u) {
            d += 1;
            u = p;
        }
        d
    }

    /// Łukasiewicz steps `k_v - 1` in DFS order.
    pub fn lukasiewicz_steps(&self) -> Vec<i64> {
        self.offspring.iter().map(|&k| k as i64 - 1).collect()
    }

    /// The DFS (= lexicographic) successor of `v`, if any: first child when
    /// present, otherwise the next sibling of the nearest ancestor that has
    /// one.
    pub fn lex_successor(&self, v: usize) -> Option<usize> {
        if self.first_child[v] != NONE {
            return Some(self.first_child[v] as usize);
        }
        let mut u = v;
        loop {
            if self.next_sibling[u] != NONE {
                return Some(self.next_sibling[u] as usize);
            }
            u = self.parent(u)?;
        }
    }

    /// Space-separated decimal offspring counts (one tree per line in fixture
    /// files).
    pub fn to_line(&self) -> String {
        let mut s = String::with_capacity(self.len() * 2);
        for (i, k) in self.offspring.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&k.to_string());
        }
        s
    }

    pub fn from_line(line: &str) -> Result<Self, TreeError> {
        let offspring: Result<Vec<u32>, _> = line
            .split_whitespace()
            .map(|tok| tok.parse::<u32>())
            .collect();
        let offspring = offspring.map_err(|e| TreeError::Parse(e.to_string()))?;
        Self::from_offspring(offspring)
    }
}

pub struct ChildIter<'a> {
    tree: &'a OrderedTree,
    cur: u32,
}

impl<'a> Iterator for ChildIter<'a> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.cur == NONE {
            return None;
        }
        let v = self.cur as usize;
        self.cur = self.tree.next_sibling[v];
        Some(v)
    }
}

/// Discrete height values H_0..H_n, with the convention H_n = 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeightSeq {
    pub values: Vec<u32>,
}

impl HeightSeq {
    pub fn validate(&self) -> bool {
        let v = &self.values;
        !v.is_empty()
            && v[0] == 0
            && *v.last().unwrap() == 0
            && v.windows(2).all(|w| w[1] as i64 - w[0] as i64 <= 1)
    }
}

/// Contour values C_0..C_{2n} at integer times; the exploration proper ends
/// at time 2n-2 and the convention C_{2n-1} = C_{2n} = 0 pads the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContourSeq {
    pub values: Vec<u32>,
}

impl ContourSeq {
    pub fn validate(&self) -> bool {
        let v = &self.values;
        v.len() >= 3
            && v.len() % 2 == 1
            && v[0] == 0
            && v[v.len() - 1] == 0
            && v[v.len() - 2] == 0
            && v.windows(2).all(|w| (w[1] as i64 - w[0] as i64).abs() <= 1)
    }

    /// Linear interpolation at a fractional time in [0, 2n].
    pub fn at(&self, s: f64) -> f64 {
        let last = (self.values.len() - 1) as f64;
        let s = s.clamp(0.0, last);
        let k = s.floor() as usize;
        if k + 1 >= self.values.len() {
            return self.values[self.values.len() - 1] as f64;
        }
        let frac = s - k as f64;
        self.values[k] as f64 * (1.0 - frac) + self.values[k + 1] as f64 * frac
    }
}

/// H_k = depth of the k-th DFS vertex, plus the terminal 0.
pub fn height_process(tree: &OrderedTree) -> HeightSeq {
    let mut values = tree.depths();
    values.push(0);
    HeightSeq { values }
}

/// Contour (depth-first exploration at unit speed): the particle crosses
/// every edge twice, visiting v(0), ..., v(2n-2); two zero values pad the
/// sequence up to time 2n.
pub fn contour_process(tree: &OrderedTree) -> ContourSeq {
    let vs = contour_vertices(tree);
    let depths = tree.depths();
    let mut values: Vec<u32> = vs.iter().map(|&v| depths[v as usize]).collect();
    values.push(0);
    values.push(0);
    ContourSeq { values }
}

/// The vertex v(k) visited at integer contour time k, for k = 0..=2n-2.
pub fn contour_vertices(tree: &OrderedTree) -> Vec<u32> {
    let n = tree.len();
    let mut out = Vec::with_capacity(2 * n - 1);
    // Stack of (vertex, most recently visited child or NONE).
    let mut stack: Vec<(u32, u32)> = vec![(0, NONE)];
    out.push(0u32);
    while let Some(&mut (v, ref mut last)) = stack.last_mut() {
        let next = if *last == NONE {
            tree.first_child[v as usize]
        } else {
            tree.next_sibling[*last as usize]
        };
        match next {
            NONE => {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    out.push(p);
                }
            }
            c => {
                *last = c;
                out.push(c);
                stack.push((c, NONE));
            }
        }
    }
    debug_assert_eq!(out.len(), 2 * n - 1);
    out
}

/// Rebuilds a tree from Łukasiewicz steps (`offspring - 1` per vertex in DFS
/// order).
pub fn tree_from_lukasiewicz(steps: &[i64]) -> Result<OrderedTree, TreeError> {
    if steps.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut offspring = Vec::with_capacity(steps.len());
    for (k, &s) in steps.iter().enumerate() {
        if s < -1 || s + 1 > u32::MAX as i64 {
            return Err(TreeError::InvalidPath(k));
        }
        offspring.push((s + 1) as u32);
    }
    OrderedTree::from_offspring(offspring)
}

/// A finite window of a (possibly infinite-spined) pointed tree. The stored
/// root sits at height `root_height`; every other vertex adds its depth. A
/// plain pointed tree has `root_height = 0`; centered objects carry the point
/// at height 0 and the root at minus the spine depth.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointedTree {
    pub tree: OrderedTree,
    pub point: usize,
    pub root_height: i64,
}

impl PointedTree {
    pub fn new(tree: OrderedTree, point: usize) -> Self {
        assert!(point < tree.len());
        PointedTree {
            tree,
            point,
            root_height: 0,
        }
    }

    /// Depth of the point below the stored root (length of the recorded
    /// ancestor spine).
    pub fn spine_depth(&self) -> u32 {
        self.tree.depth(self.point)
    }

    pub fn point_height(&self) -> i64 {
        self.root_height + self.spine_depth() as i64
    }

    /// Shifts heights so that the point sits at height 0.
    pub fn centered(&self) -> PointedTree {
        PointedTree {
            tree: self.tree.clone(),
            point: self.point,
            root_height: -(self.spine_depth() as i64),
        }
    }
}

/// The window [t]_p^q around the distinguished point's lineage: the new root
/// is the point's ancestor at height max(p, root height), vertices are cut at
/// height q (deeper ones collapse onto their height-q ancestors, so boundary
/// vertices become leaves), and the point moves to its height-q ancestor if
/// it sat deeper. Returns `None` (the cemetery) when (p, q] misses the
/// point's height interval. `q = None` encodes an unbounded window above.
pub fn truncate_pointed(pt: &PointedTree, p: i64, q: Option<i64>) -> Option<PointedTree> {
    if let Some(qv) = q {
        assert!(p < qv, "window requires p < q");
    }
    let rh = pt.root_height;
    let ph = pt.point_height();
    // The point's word spans heights (rh, ph]; empty intersection with (p, q]
    // sends the window to the cemetery.
    let lo = p.max(rh);
    let hi = q.map_or(ph, |qv| qv.min(ph));
    if lo >= hi {
        return None;
    }

    // New root: the point's ancestor at height lo.
    let mut anchor = pt.point;
    for _ in 0..(ph - lo) as u32 {
        anchor = pt.tree.parent(anchor).expect("climb stays within the tree");
    }
    let max_depth = q.map(|qv| (qv - lo) as u32);

    // The point's image: its height-q ancestor when it sits deeper than q.
    let mut point_image = pt.point;
    for _ in 0..(ph - hi) as u32 {
        point_image = pt.tree.parent(point_image).expect("ancestor exists");
    }

    // Extract the subtree of `anchor` cut at depth `max_depth`; DFS order is
    // inherited, so one pass rebuilds the offspring sequence.
    let tree = &pt.tree;
    let mut offspring = Vec::new();
    let mut new_point = usize::MAX;
    let mut stack: Vec<(usize, u32)> = vec![(anchor, 0)];
    while let Some((v, d)) = stack.pop() {
        if v == point_image {
            new_point = offspring.len();
        }
        if max_depth.map_or(true, |md| d < md) {
            offspring.push(tree.offspring(v));
            let kids: Vec<usize> = tree.children(v).collect();
            for &c in kids.iter().rev() {
                stack.push((c, d + 1));
            }
        } else {
            offspring.push(0);
        }
    }
    let new_tree = OrderedTree::from_offspring(offspring).expect("window is a valid tree");
    debug_assert!(new_point != usize::MAX, "point image lies inside the window");
    Some(PointedTree {
        tree: new_tree,
        point: new_point,
        root_height: lo,
    })
}

/// The right part of a pointed tree: keeps the point's ancestor line together
/// with every lexicographically-later vertex, renumbers children
/// contiguously, and re-centers heights at the point.
pub fn right_part(pt: &PointedTree) -> PointedTree {
    let tree = &pt.tree;
    let rho = pt.point;

    // Ancestor line root..=rho; DFS indices increase along it.
    let mut line = Vec::new();
    let mut u = rho;
    loop {
        line.push(u);
        match tree.parent(u) {
            Some(p) => u = p,
            None => break,
        }
    }
    line.reverse();

    // Keep v iff v is on the line or v >= rho in DFS order: descendants of
    // rho follow it in DFS order and everything left of the line precedes
    // rho, so this keep set is exactly line + lexicographically-later
    // vertices.
    let mut offspring = Vec::new();
    let mut new_point = usize::MAX;
    let mut stack: Vec<usize> = vec![line[0]];
    while let Some(v) = stack.pop() {
        if v == rho {
            new_point = offspring.len();
        }
        let kids: Vec<usize> = if v >= rho {
            tree.children(v).collect()
        } else {
            // Strictly above the point on the line: drop children left of
            // the line child (their whole subtrees precede rho).
            let next_on_line = line[line.binary_search(&v).unwrap() + 1];
            tree.children(v).filter(|&c| c >= next_on_line).collect()
        };
        offspring.push(kids.len() as u32);
        for &c in kids.iter().rev() {
            stack.push(c);
        }
    }
    let new_tree = OrderedTree::from_offspring(offspring).expect("right part is a valid tree");
    debug_assert!(new_point != usize::MAX);
    PointedTree {
        tree: new_tree,
        point: new_point,
        root_height: 0,
    }
    .centered()
}

/// The right-successor: moves the point to its lexicographic successor, takes
/// the right part, and re-centers heights at the new point. When the point is
/// already the last vertex the input is returned unchanged with
/// `moved = false` (the convention that the successor of the last point is
/// the point itself).
pub fn scc_plus(pt: &PointedTree) -> (PointedTree, bool) {
    match pt.tree.lex_successor(pt.point) {
        None => (pt.clone(), false),
        Some(succ) => {
            let shifted = PointedTree {
                tree: pt.tree.clone(),
                point: succ,
                root_height: pt.root_height,
            };
            (right_part(&shifted), true)
        }
    }
}

/// All ordered trees with exactly n vertices (Catalan(n-1) of them), in
/// lexicographic order of their offspring sequences. Exhaustive oracle
/// helper; keep n small.
pub fn enumerate_trees(n: usize) -> Vec<OrderedTree> {
    fn rec(prefix: &mut Vec<u32>, sum: i64, n: usize, out: &mut Vec<OrderedTree>) {
        let k = prefix.len();
        if k == n {
            debug_assert_eq!(sum, -1);
            out.push(OrderedTree::from_offspring(prefix.clone()).unwrap());
            return;
        }
        let remaining = (n - k - 1) as i64;
        for c in 0..=(n - k) as u32 {
            let s2 = sum + c as i64 - 1;
            // Feasible iff the path can still end at -1 without dying early:
            // nonnegative before the last step and small enough that the
            // remaining >= -1 steps reach -1.
            let ok = if remaining == 0 {
                s2 == -1
            } else {
                s2 >= 0 && s2 <= remaining - 1
            };
            if ok {
                prefix.push(c);
                rec(prefix, s2, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), 0, n, &mut out);
    out
}
