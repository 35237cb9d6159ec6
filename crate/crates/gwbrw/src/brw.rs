//! Branching random walks indexed by a finite ordered tree, with positions in
//! the b-ary tree or its continuum analogue: height processes with +-1 edge
//! increments (reflected at 0 or free), the visited-position trie, the
//! b-contraction that collapses continuum labels onto b letters, distances,
//! range profiles and occupation measures.
//!
//! Positions are never stored as words: a vertex only remembers its trie
//! node, and the trie holds one node per distinct visited position.

use rand::Rng;
use smallvec::SmallVec;

use crate::tree_core::{OrderedTree, NONE};

/// Heights of a tree-indexed +-1 random walk: h at the root is 0 and every
/// edge changes h by exactly one, except that the reflected variant forces an
/// up-step out of height 0.
#[derive(Clone, Debug)]
pub struct HeightBRW {
    pub tree: OrderedTree,
    pub heights: Vec<i64>,
    pub reflected: bool,
}

impl HeightBRW {
    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_height(&self) -> i64 {
        *self.heights.iter().max().expect("nonempty")
    }

    pub fn min_height(&self) -> i64 {
        *self.heights.iter().min().expect("nonempty")
    }

    /// I_v = min height along the lineage from the root to v (inclusive).
    pub fn lineage_minima(&self) -> Vec<i64> {
        let n = self.len();
        let mut inf = vec![0i64; n];
        inf[0] = self.heights[0];
        for v in 1..n {
            let p = self.tree.parent(v).expect("non-root");
            inf[v] = inf[p].min(self.heights[v]);
        }
        inf
    }
}

/// Draws the height process: i.i.d. uniform +-1 increments along edges; with
/// `reflected`, an edge out of a height-0 vertex always steps up.
pub fn sample_heights<R: Rng + ?Sized>(tree: OrderedTree, reflected: bool, rng: &mut R) -> HeightBRW {
    let n = tree.len();
    let mut heights = vec![0i64; n];
    for v in 1..n {
        let p = tree.parent(v).expect("non-root");
        let hp = heights[p];
        heights[v] = if reflected && hp == 0 {
            1
        } else if rng.gen::<bool>() {
            hp + 1
        } else {
            hp - 1
        };
    }
    HeightBRW {
        tree,
        heights,
        reflected,
    }
}

#[derive(Clone, Debug)]
struct TrieNode {
    parent: u32,
    depth: u32,
    /// Fresh 64-bit label in the free trie; the letter (1..=b) after
    /// contraction.
    label: u64,
    children: SmallVec<[u32; 4]>,
}

/// The set of visited positions, one node per position, plus the map from
/// genealogical vertices to their position's node. `letters` is None for the
/// free (continuum-labelled) range and Some(b) once positions live in the
/// b-ary tree.
#[derive(Clone, Debug)]
pub struct RangeTrie {
    nodes: Vec<TrieNode>,
    vertex_node: Vec<u32>,
    pub letters: Option<u32>,
}

impl RangeTrie {
    fn with_root(n_vertices: usize, letters: Option<u32>) -> Self {
        let mut nodes = Vec::with_capacity(n_vertices / 2 + 1);
        nodes.push(TrieNode {
            parent: NONE,
            depth: 0,
            label: 0,
            children: SmallVec::new(),
        });
        RangeTrie {
            nodes,
            vertex_node: Vec::with_capacity(n_vertices),
            letters,
        }
    }

    fn push_node(&mut self, parent: u32, label: u64) -> u32 {
        let id = self.nodes.len() as u32;
        let depth = self.nodes[parent as usize].depth + 1;
        self.nodes.push(TrieNode {
            parent,
            depth,
            label,
            children: SmallVec::new(),
        });
        self.nodes[parent as usize].children.push(id);
        id
    }

    /// Number of distinct visited positions.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of genealogical vertices mapped into the trie.
    pub fn vertex_count(&self) -> usize {
        self.vertex_node.len()
    }

    pub fn node_of(&self, vertex: usize) -> u32 {
        self.vertex_node[vertex]
    }

    pub fn parent(&self, node: u32) -> Option<u32> {
        match self.nodes[node as usize].parent {
            NONE => None,
            p => Some(p),
        }
    }

    pub fn depth(&self, node: u32) -> u32 {
        self.nodes[node as usize].depth
    }

    pub fn label(&self, node: u32) -> u64 {
        self.nodes[node as usize].label
    }

    pub fn children(&self, node: u32) -> &[u32] {
        &self.nodes[node as usize].children
    }

    /// Lowest common ancestor of two position nodes.
    pub fn lca(&self, a: u32, b: u32) -> u32 {
        let (mut a, mut b) = (a, b);
        while self.depth(a) > self.depth(b) {
            a = self.nodes[a as usize].parent;
        }
        while self.depth(b) > self.depth(a) {
            b = self.nodes[b as usize].parent;
        }
        while a != b {
            a = self.nodes[a as usize].parent;
            b = self.nodes[b as usize].parent;
        }
        a
    }

    /// Graph distance between two position nodes in the (free or b-ary)
    /// position tree.
    pub fn node_distance(&self, a: u32, b: u32) -> u64 {
        let l = self.lca(a, b);
        (self.depth(a) + self.depth(b) - 2 * self.depth(l)) as u64
    }
}

/// Realizes the positions of the free reflected walk: an up-step appends a
/// fresh uniform label (fresh labels never collide, so every up-step opens a
/// new position), a down-step drops the last letter and lands on the parent
/// position. Positions repeat exactly when a lineage comes back down to an
/// ancestral stack state.
pub fn free_range<R: Rng + ?Sized>(hbrw: &HeightBRW, rng: &mut R) -> RangeTrie {
    assert!(hbrw.reflected, "free range is built over reflected heights");
    let n = hbrw.len();
    let mut trie = RangeTrie::with_root(n, None);
    trie.vertex_node.push(0);
    for v in 1..n {
        let p = hbrw.tree.parent(v).expect("non-root");
        let pn = trie.vertex_node[p];
        let node = if hbrw.heights[v] == hbrw.heights[p] + 1 {
            trie.push_node(pn, rng.gen::<u64>())
        } else {
            trie.nodes[pn as usize].parent
        };
        debug_assert_eq!(trie.depth(node) as i64, hbrw.heights[v]);
        trie.vertex_node.push(node);
    }
    trie
}

/// Maps every free label to an independent uniform letter in {1..b} and
/// merges sibling positions that receive the same letter (merging cascades
/// to their subtrees since children re-resolve under the merged parent). The
/// result has the law of the range of the W_b-valued reflected walk.
pub fn contract_to_b<R: Rng + ?Sized>(free: &RangeTrie, b: u32, rng: &mut R) -> RangeTrie {
    assert!(b >= 2, "contraction needs at least two letters");
    assert!(free.letters.is_none(), "input must be a free trie");
    let mut out = RangeTrie::with_root(free.vertex_count(), Some(b));
    // Free nodes are created parents-first, so one forward pass suffices.
    let mut new_id = vec![0u32; free.len()];
    for x in 1..free.len() {
        let letter = rng.gen_range(1..=b) as u64;
        let cp = new_id[free.nodes[x].parent as usize];
        let found = out.nodes[cp as usize]
            .children
            .iter()
            .copied()
            .find(|&c| out.nodes[c as usize].label == letter);
        new_id[x] = match found {
            Some(c) => c,
            None => out.push_node(cp, letter),
        };
    }
    out.vertex_node = free
        .vertex_node
        .iter()
        .map(|&fnode| new_id[fnode as usize])
        .collect();
    out
}

/// Direct simulation of the W_b-valued reflected walk along the tree: from a
/// root-position vertex the walk picks a uniform child letter; elsewhere it
/// steps to the parent with probability 1/2 and to each of the b children
/// with probability 1/(2b). Returns the range trie; heights are the node
/// depths.
pub fn direct_range_b<R: Rng + ?Sized>(tree: &OrderedTree, b: u32, rng: &mut R) -> RangeTrie {
    assert!(b >= 2);
    let n = tree.len();
    let mut trie = RangeTrie::with_root(n, Some(b));
    trie.vertex_node.push(0);
    for v in 1..n {
        let p = tree.parent(v).expect("non-root");
        let pn = trie.vertex_node[p];
        let up = trie.depth(pn) == 0 || rng.gen::<bool>();
        let node = if up {
            let letter = rng.gen_range(1..=b) as u64;
            let found = trie.nodes[pn as usize]
                .children
                .iter()
                .copied()
                .find(|&c| trie.nodes[c as usize].label == letter);
            match found {
                Some(c) => c,
                None => trie.push_node(pn, letter),
            }
        } else {
            trie.nodes[pn as usize].parent
        };
        trie.vertex_node.push(node);
    }
    trie
}

/// Distance between the positions of genealogical vertices v and w, via the
/// trie (lowest common ancestor of their position nodes).
pub fn graph_distance_trie(trie: &RangeTrie, v: usize, w: usize) -> u64 {
    trie.node_distance(trie.node_of(v), trie.node_of(w))
}

/// The same distance from heights alone: |Y_v| + |Y_w| - 2 min over the
/// genealogical path between v and w. Exact for the free range; an upper
/// bound (with even gap) after contraction, since merged positions can only
/// shorten distances.
pub fn graph_distance_heights(hbrw: &HeightBRW, v: usize, w: usize) -> i64 {
    let h = &hbrw.heights;
    let t = &hbrw.tree;
    let (mut a, mut b) = (v, w);
    let mut min = h[a].min(h[b]);
    let (mut da, mut db) = (t.depth(a), t.depth(b));
    while da > db {
        a = t.parent(a).expect("deeper vertex has a parent");
        min = min.min(h[a]);
        da -= 1;
    }
    while db > da {
        b = t.parent(b).expect("deeper vertex has a parent");
        min = min.min(h[b]);
        db -= 1;
    }
    while a != b {
        a = t.parent(a).expect("lca exists");
        b = t.parent(b).expect("lca exists");
        min = min.min(h[a].min(h[b]));
    }
    h[v] + h[w] - 2 * min
}

/// R_k = number of distinct positions among the first k DFS vertices,
/// k = 1..n.
#[derive(Clone, Debug)]
pub struct RangeProfile {
    pub r: Vec<u32>,
}

impl RangeProfile {
    pub fn validate(&self) -> bool {
        !self.r.is_empty()
            && self.r[0] == 1
            && self
                .r
                .windows(2)
                .all(|w| w[1] == w[0] || w[1] == w[0] + 1)
    }
}

pub fn range_profile(trie: &RangeTrie) -> RangeProfile {
    let mut seen = vec![false; trie.len()];
    let mut r = Vec::with_capacity(trie.vertex_count());
    let mut count = 0u32;
    for &node in &trie.vertex_node {
        if !seen[node as usize] {
            seen[node as usize] = true;
            count += 1;
        }
        r.push(count);
    }
    RangeProfile { r }
}

/// Occupation measure (visits per position) and counting measure (one atom
/// per visited position), both indexed by trie node.
#[derive(Clone, Debug)]
pub struct Measures {
    pub occupation: Vec<u64>,
    pub counting: Vec<u64>,
}

pub fn measures(trie: &RangeTrie) -> Measures {
    let mut occupation = vec![0u64; trie.len()];
    for &node in &trie.vertex_node {
        occupation[node as usize] += 1;
    }
    Measures {
        occupation,
        counting: vec![1u64; trie.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw_sampler::{sample_gw_conditioned, OffspringDistribution};
    use crate::stats::{chi_square_gof, replicate_rng};
    use crate::tree_core::OrderedTree;

    fn path_tree(n: usize) -> OrderedTree {
        let mut seq = vec![1u32; n - 1];
        seq.push(0);
        OrderedTree::from_offspring(seq).unwrap()
    }

    fn path_brw(heights: &[i64]) -> HeightBRW {
        HeightBRW {
            tree: path_tree(heights.len()),
            heights: heights.to_vec(),
            reflected: true,
        }
    }

    #[test]
    fn heights_respect_kernels() {
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(51, 0);
        let tree = sample_gw_conditioned(&mu, 4000, &mut rng, 1000).unwrap();
        let reflected = sample_heights(tree.clone(), true, &mut rng);
        assert_eq!(reflected.heights[0], 0);
        assert!(reflected.min_height() >= 0);
        for v in 1..reflected.len() {
            let p = reflected.tree.parent(v).unwrap();
            let (hv, hp) = (reflected.heights[v], reflected.heights[p]);
            assert_eq!((hv - hp).abs(), 1);
            if hp == 0 {
                assert_eq!(hv, 1, "reflected walk steps up from 0");
            }
        }
        let free = sample_heights(tree, false, &mut rng);
        assert_eq!(free.heights[0], 0);
        for v in 1..free.len() {
            let p = free.tree.parent(v).unwrap();
            assert_eq!((free.heights[v] - free.heights[p]).abs(), 1);
        }
    }

    #[test]
    fn unreflected_increments_are_fair() {
        let mut rng = replicate_rng(52, 0);
        let n = 100_001;
        let hbrw = sample_heights(path_tree(n), false, &mut rng);
        let ups = hbrw
            .heights
            .windows(2)
            .filter(|w| w[1] == w[0] + 1)
            .count() as u64;
        let edges = (n - 1) as u64;
        let expected = [edges as f64 / 2.0, edges as f64 / 2.0];
        let r = chi_square_gof(&[ups, edges - ups], &expected, 5.0);
        assert!(r.p_value > 0.001, "up/down balance: p = {}", r.p_value);
    }

    #[test]
    fn free_range_hand_examples() {
        let mut rng = replicate_rng(53, 0);
        let up2 = free_range(&path_brw(&[0, 1, 2]), &mut rng);
        assert_eq!(up2.len(), 3);
        assert_eq!(up2.depth(up2.node_of(2)), 2);

        let updown = free_range(&path_brw(&[0, 1, 0]), &mut rng);
        assert_eq!(updown.len(), 2);
        assert_eq!(updown.node_of(2), updown.node_of(0), "returns to the root position");

        let two_excursions = free_range(&path_brw(&[0, 1, 0, 1]), &mut rng);
        assert_eq!(two_excursions.len(), 3, "two up-excursions get distinct labels");
        assert_ne!(two_excursions.node_of(1), two_excursions.node_of(3));
        assert_ne!(
            two_excursions.label(two_excursions.node_of(1)),
            two_excursions.label(two_excursions.node_of(3))
        );
    }

    #[test]
    fn free_trie_depth_tracks_height() {
        let mu = OffspringDistribution::poisson();
        let mut rng = replicate_rng(54, 0);
        let tree = sample_gw_conditioned(&mu, 2000, &mut rng, 1000).unwrap();
        let hbrw = sample_heights(tree, true, &mut rng);
        let trie = free_range(&hbrw, &mut rng);
        for v in 0..hbrw.len() {
            assert_eq!(trie.depth(trie.node_of(v)) as i64, hbrw.heights[v]);
        }
    }

    #[test]
    fn contraction_letter_is_uniform() {
        let b = 5u32;
        let mut counts = vec![0u64; b as usize];
        for rep in 0..20_000u64 {
            let mut rng = replicate_rng(55, rep);
            let free = free_range(&path_brw(&[0, 1]), &mut rng);
            let tb = contract_to_b(&free, b, &mut rng);
            let letter = tb.label(tb.node_of(1));
            counts[(letter - 1) as usize] += 1;
        }
        let expected = vec![20_000.0 / b as f64; b as usize];
        let r = chi_square_gof(&counts, &expected, 5.0);
        assert!(r.p_value > 0.001, "letter uniformity: p = {}", r.p_value);
    }

    #[test]
    fn sibling_collision_probability_is_one_over_b() {
        // Cherry with both children up: the two free positions collide after
        // contraction iff their letters agree.
        let b = 4u32;
        let n_reps = 20_000u64;
        let mut collisions = 0u64;
        for rep in 0..n_reps {
            let mut rng = replicate_rng(56, rep);
            let hbrw = HeightBRW {
                tree: OrderedTree::from_offspring(vec![2, 0, 0]).unwrap(),
                heights: vec![0, 1, 1],
                reflected: true,
            };
            let free = free_range(&hbrw, &mut rng);
            assert_eq!(free.len(), 3);
            let tb = contract_to_b(&free, b, &mut rng);
            if tb.node_of(1) == tb.node_of(2) {
                collisions += 1;
            }
        }
        let p_hat = collisions as f64 / n_reps as f64;
        let p = 1.0 / b as f64;
        let se = (p * (1.0 - p) / n_reps as f64).sqrt();
        assert!(
            (p_hat - p).abs() <= 3.0 * se,
            "collision rate {p_hat} vs {p} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn depth_gain_tail_bounded_by_b_power() {
        // Half the even gap between free and contracted distances: its tail
        // is dominated by b^-k.
        let mu = OffspringDistribution::geometric();
        let b = 2u32;
        let mut tail_counts = [0u64; 4]; // G >= 1..=4
        let mut pairs = 0u64;
        for rep in 0..60u64 {
            let mut rng = replicate_rng(57, rep);
            let tree = sample_gw_conditioned(&mu, 300, &mut rng, 1000).unwrap();
            let hbrw = sample_heights(tree, true, &mut rng);
            let free = free_range(&hbrw, &mut rng);
            let tb = contract_to_b(&free, b, &mut rng);
            for v in (0..hbrw.len()).step_by(7) {
                for w in (v + 1..hbrw.len()).step_by(11) {
                    let df = graph_distance_trie(&free, v, w);
                    let db = graph_distance_trie(&tb, v, w);
                    assert!(db <= df);
                    assert_eq!((df - db) % 2, 0);
                    let g = (df - db) / 2;
                    pairs += 1;
                    for k in 1..=4u64 {
                        if g >= k {
                            tail_counts[(k - 1) as usize] += 1;
                        }
                    }
                }
            }
        }
        for k in 1..=4u64 {
            let p_hat = tail_counts[(k - 1) as usize] as f64 / pairs as f64;
            let bound = (b as f64).powi(-(k as i32));
            let se = (bound * (1.0 - bound) / pairs as f64).sqrt();
            assert!(
                p_hat <= bound + 3.0 * se,
                "P(G >= {k}) = {p_hat} exceeds {bound}"
            );
        }
    }

    #[test]
    fn free_distance_formula_matches_trie() {
        let mu = OffspringDistribution::geometric();
        for rep in 0..20u64 {
            let mut rng = replicate_rng(58, rep);
            let tree = sample_gw_conditioned(&mu, 200, &mut rng, 1000).unwrap();
            let hbrw = sample_heights(tree, true, &mut rng);
            let trie = free_range(&hbrw, &mut rng);
            for v in 0..hbrw.len() {
                assert_eq!(graph_distance_trie(&trie, v, v), 0);
                for w in v + 1..hbrw.len() {
                    let via_trie = graph_distance_trie(&trie, v, w) as i64;
                    let via_heights = graph_distance_heights(&hbrw, v, w);
                    assert_eq!(via_trie, via_heights, "pair ({v},{w})");
                }
            }
        }
    }

    #[test]
    fn contract_after_free_matches_direct_law() {
        // (range size, max height) under contract(free(.)) and under the
        // direct b-ary walk: same law, checked by a two-sample chi-square.
        let mu = OffspringDistribution::geometric();
        let b = 3u32;
        let n = 500usize;
        let reps = 10_000u64;
        let key = |trie: &RangeTrie| {
            let size_bin = (trie.len() / 25).min(11);
            let maxh = (0..trie.vertex_count())
                .map(|v| trie.depth(trie.node_of(v)))
                .max()
                .unwrap();
            let h_bin = (maxh / 8).min(7) as usize;
            size_bin * 8 + h_bin
        };
        let mut counts_a = vec![0u64; 96];
        let mut counts_b = vec![0u64; 96];
        for rep in 0..reps {
            let mut rng = replicate_rng(59, rep);
            let tree = sample_gw_conditioned(&mu, n, &mut rng, 1000).unwrap();
            let hbrw = sample_heights(tree.clone(), true, &mut rng);
            let free = free_range(&hbrw, &mut rng);
            counts_a[key(&contract_to_b(&free, b, &mut rng))] += 1;
            counts_b[key(&direct_range_b(&tree, b, &mut rng))] += 1;
        }
        let r = crate::stats::chi_square_two_sample(&counts_a, &counts_b, 5.0);
        assert!(
            r.p_value > 0.01,
            "law equality (range size, max height): p = {}",
            r.p_value
        );
    }

    #[test]
    fn profile_counts_distinct_positions() {
        let mu = OffspringDistribution::poisson();
        let mut rng = replicate_rng(60, 0);
        let tree = sample_gw_conditioned(&mu, 3000, &mut rng, 1000).unwrap();
        let trie = direct_range_b(&tree, 2, &mut rng);
        let profile = range_profile(&trie);
        assert!(profile.validate());
        assert_eq!(profile.r[0], 1);
        assert_eq!(*profile.r.last().unwrap() as usize, trie.len());
        let ratio = trie.len() as f64 / tree.len() as f64;
        assert!(ratio > 0.0 && ratio <= 1.0);
    }

    #[test]
    fn measures_have_expected_masses() {
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(61, 0);
        let tree = sample_gw_conditioned(&mu, 2000, &mut rng, 1000).unwrap();
        let trie = direct_range_b(&tree, 4, &mut rng);
        let m = measures(&trie);
        assert_eq!(m.occupation.iter().sum::<u64>() as usize, tree.len());
        assert_eq!(m.counting.iter().sum::<u64>() as usize, trie.len());
        for node in 0..trie.len() {
            assert!(m.occupation[node] >= m.counting[node]);
        }
    }
}
