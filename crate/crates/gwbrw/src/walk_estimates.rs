//! Exact formulas and Monte Carlo estimators for the single random walk on
//! the b-ary tree extended by an infinite line of ancestors, the distance
//! tail bound for biased walks, and the two estimators of the range density
//! constant c (the almost-sure limit of range size over tree size).
//!
//! The walk is never represented as an explicit infinite word. Its state is
//! kept relative to the reference ray (the ancestor line of the starting
//! position): the height k of the deepest ray point below the walker that is
//! still an ancestor of it, plus the finite word climbing from there. Ray
//! letters are integrated out: the walker rejoins the ray from a ray point
//! with probability exactly 1/b per up-step, and those comparison events are
//! mutually independent, so every statistic of heights and ray visits keeps
//! its exact law.

use rand::Rng;
use smallvec::SmallVec;

use crate::brw::{direct_range_b, range_profile};
use crate::gw_sampler::OffspringDistribution;
use crate::stats::{replicate_rng, Welford};
use crate::tree_core::NONE;

/// Walker state relative to the reference ray: the position is the ray point
/// at height `k` extended by `suffix`. The suffix is empty exactly when the
/// walker sits on the ray.
#[derive(Clone, Debug, Default)]
pub struct SpineWalkState {
    pub k: i64,
    pub suffix: Vec<u32>,
    pub time: u64,
}

/// How a step leaving a ray point relates to the ray: one level deeper along
/// the ray, back up onto the ray, or out into a finite excursion (which
/// comes back to the same ray point with probability one).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayDeparture {
    Deeper,
    Rejoin,
    Excursion,
}

impl SpineWalkState {
    pub fn new() -> Self {
        SpineWalkState::default()
    }

    pub fn height(&self) -> i64 {
        self.k + self.suffix.len() as i64
    }

    pub fn on_ray(&self) -> bool {
        self.suffix.is_empty()
    }

    /// One step of the walk: to the parent with probability 1/2, otherwise
    /// to a uniform child. Returns the departure type when the pre-step
    /// position was a ray point.
    pub fn step<R: Rng + ?Sized>(&mut self, b: u32, rng: &mut R) -> Option<RayDeparture> {
        self.time += 1;
        if self.suffix.is_empty() {
            if rng.gen::<bool>() {
                self.k -= 1;
                Some(RayDeparture::Deeper)
            } else if self.k < 0 && rng.gen_range(0..b) == 0 {
                self.k += 1;
                Some(RayDeparture::Rejoin)
            } else {
                self.suffix.push(rng.gen_range(1..=b));
                Some(RayDeparture::Excursion)
            }
        } else {
            if rng.gen::<bool>() {
                self.suffix.pop();
            } else {
                self.suffix.push(rng.gen_range(1..=b));
            }
            None
        }
    }
}

/// One transition of the walk watched only at its ray visits: from ray depth
/// z it moves one deeper with probability 1/2, one shallower with
/// probability 1/(2b), and returns to the same depth otherwise (an off-ray
/// excursion, which ends at its launch point almost surely). Excursions
/// never visit ray points, so visit counts of ray points under this embedded
/// chain agree in law with the full walk.
fn ray_visit_step<R: Rng + ?Sized>(b: u32, z: u64, rng: &mut R) -> u64 {
    if z == 0 {
        if rng.gen::<bool>() {
            1
        } else {
            0
        }
    } else {
        let u = rng.gen_range(0..2 * b);
        if u < b {
            z + 1
        } else if u == b {
            z - 1
        } else {
            z
        }
    }
}

/// Expected number of visits to a fixed word p letters above the start:
/// (2b/(b-1)) b^-p.
pub fn green_exact(b: u32, p: u32) -> f64 {
    assert!(b >= 2);
    let b = b as f64;
    2.0 * b / (b - 1.0) * b.powi(-(p as i32))
}

/// Monte Carlo mean visit count to a fixed word p letters above the start.
/// The walk is watched on the target's ancestor line (the start sits on it,
/// p levels below the target), where its depth is the birth-death chain of
/// `ray_visit_step` and visits to depth 0 are exactly visits to the target.
/// A replicate stops once the depth exceeds p + escape_margin; the visits
/// forfeited that way have expected mass below b^-(p + escape_margin).
pub fn green_mc<R: Rng + ?Sized>(
    b: u32,
    p: u32,
    n_reps: u64,
    escape_margin: u32,
    rng: &mut R,
) -> (f64, f64) {
    assert!(b >= 2);
    let stop = (p + escape_margin) as u64;
    let mut w = Welford::new();
    for _ in 0..n_reps {
        let mut z = p as u64;
        let mut visits = u64::from(p == 0);
        loop {
            z = ray_visit_step(b, z, rng);
            if z == 0 {
                visits += 1;
            }
            if z > stop {
                break;
            }
        }
        w.push(visits as f64);
    }
    (w.mean(), w.std_err())
}

/// Probability of ever hitting a fixed word ell letters above the start:
/// b^-ell.
pub fn ruin_exact(b: u32, ell: u32) -> f64 {
    (b as f64).powi(-(ell as i32))
}

/// Empirical hitting probability, watched on the target's ancestor line
/// starting at depth ell; a replicate that drifts past ell + escape_margin
/// counts as a miss (the residual hitting chance from there is below
/// b^-(ell + escape_margin)).
pub fn ruin_mc<R: Rng + ?Sized>(
    b: u32,
    ell: u32,
    escape_margin: u32,
    n_reps: u64,
    rng: &mut R,
) -> (f64, f64) {
    if ell == 0 {
        return (1.0, 0.0);
    }
    let stop = (ell + escape_margin) as u64;
    let mut w = Welford::new();
    for _ in 0..n_reps {
        let mut z = ell as u64;
        let hit = loop {
            z = ray_visit_step(b, z, rng);
            if z == 0 {
                break 1.0;
            }
            if z > stop {
                break 0.0;
            }
        };
        w.push(hit);
    }
    (w.mean(), w.std_err())
}

/// Probability of never returning to the starting position: (b-1)/(2b).
pub fn no_return_exact(b: u32) -> f64 {
    (b as f64 - 1.0) / (2.0 * b as f64)
}

pub fn no_return_mc<R: Rng + ?Sized>(
    b: u32,
    escape_margin: u32,
    n_reps: u64,
    rng: &mut R,
) -> (f64, f64) {
    let stop = escape_margin as u64;
    let mut w = Welford::new();
    for _ in 0..n_reps {
        let mut z = 0u64;
        let no_return = loop {
            z = ray_visit_step(b, z, rng);
            if z == 0 {
                break 0.0;
            }
            if z > stop {
                break 1.0;
            }
        };
        w.push(no_return);
    }
    (w.mean(), w.std_err())
}

/// Transition probabilities of the embedded ray-visit chain.
#[derive(Clone, Copy, Debug)]
pub struct BirthDeathTable {
    /// From depth p >= 1 to p + 1.
    pub deeper: f64,
    /// From depth p >= 1 to p - 1.
    pub rejoin: f64,
    /// From depth p >= 1 back to p.
    pub hold: f64,
    /// From depth 0 to 1.
    pub root_deeper: f64,
    /// From depth 0 back to 0.
    pub root_hold: f64,
}

pub fn birth_death_table(b: u32) -> BirthDeathTable {
    assert!(b >= 2);
    let b = b as f64;
    BirthDeathTable {
        deeper: 0.5,
        rejoin: 1.0 / (2.0 * b),
        hold: (b - 1.0) / (2.0 * b),
        root_deeper: 0.5,
        root_hold: 0.5,
    }
}

/// Counts departures from ray points in full walks (capped at `walk_cap`
/// steps each) until at least `target` departures from depths >= 1 have been
/// seen. The departure type is decided at the departure step itself, so
/// capping a walk mid-excursion censors no counted transition. Returns
/// ([deeper, rejoin, excursion] from depths >= 1, [deeper, excursion] from
/// depth 0).
pub fn birth_death_empirical<R: Rng + ?Sized>(
    b: u32,
    target: u64,
    walk_cap: u64,
    rng: &mut R,
) -> ([u64; 3], [u64; 2]) {
    let mut deep = [0u64; 3];
    let mut root = [0u64; 2];
    while deep.iter().sum::<u64>() < target {
        let mut state = SpineWalkState::new();
        for _ in 0..walk_cap {
            let at_depth = if state.on_ray() { Some(-state.k) } else { None };
            let departure = state.step(b, rng);
            if let (Some(p), Some(d)) = (at_depth, departure) {
                if p >= 1 {
                    match d {
                        RayDeparture::Deeper => deep[0] += 1,
                        RayDeparture::Rejoin => deep[1] += 1,
                        RayDeparture::Excursion => deep[2] += 1,
                    }
                } else {
                    match d {
                        RayDeparture::Deeper => root[0] += 1,
                        RayDeparture::Rejoin => unreachable!("cannot rejoin from depth 0"),
                        RayDeparture::Excursion => root[1] += 1,
                    }
                }
            }
        }
    }
    (deep, root)
}

/// Laplace exponent of 1 + (first passage time of the height walk to one
/// level below its start): E[e^{-s(1+H)}] = e^{-g(s)}.
pub fn first_passage_log_laplace(s: f64) -> f64 {
    assert!(s > 0.0, "the exponent is defined for s > 0");
    -(1.0 - (1.0 - (-2.0 * s).exp()).sqrt()).ln()
}

pub fn hitting_laplace_exact(s: f64) -> f64 {
    (-first_passage_log_laplace(s)).exp()
}

/// Monte Carlo E[e^{-s(1+H)}] over first passages of the height walk from 0
/// to -1. Passages still unfinished after `step_cap` steps contribute 0,
/// which biases the mean down by at most e^{-s step_cap}.
pub fn hitting_laplace_mc<R: Rng + ?Sized>(
    s: f64,
    n_reps: u64,
    step_cap: u64,
    rng: &mut R,
) -> (f64, f64) {
    assert!(s > 0.0);
    let mut w = Welford::new();
    for _ in 0..n_reps {
        let mut h = 0i64;
        let mut t = 0u64;
        while h > -1 && t < step_cap {
            h += if rng.gen::<bool>() { 1 } else { -1 };
            t += 1;
        }
        w.push(if h == -1 { (-s * (1.0 + t as f64)).exp() } else { 0.0 });
    }
    (w.mean(), w.std_err())
}

/// Tail bound for a recurrent lambda-biased walk segment: the excess of the
/// height-based distance over the graph distance between the positions at
/// times n1 < n2 exceeds 2*ell with probability at most
/// (n2-n1)(lambda-1)/(lambda^ell - 1).
pub fn biased_tail_bound(lambda: f64, ell: u32, n1: u64, n2: u64) -> f64 {
    assert!(lambda > 1.0, "the walk must be biased toward the root");
    assert!(n1 < n2);
    if ell == 0 {
        return f64::INFINITY;
    }
    (n2 - n1) as f64 * (lambda - 1.0) / (lambda.powi(ell as i32) - 1.0)
}

/// Empirical probability of the event bounded by `biased_tail_bound`, for
/// the lambda-biased walk on the infinite b-ary tree (from a vertex the walk
/// steps to the parent with probability lambda/(lambda+b) and to each child
/// with probability 1/(lambda+b); from the root, to a uniform child).
pub fn biased_tail_mc<R: Rng + ?Sized>(
    b: u32,
    lambda: f64,
    ell: u32,
    n1: u64,
    n2: u64,
    n_reps: u64,
    rng: &mut R,
) -> f64 {
    assert!(lambda > 1.0);
    assert!(n1 < n2);
    let p_parent = lambda / (lambda + b as f64);
    let mut hits = 0u64;
    for _ in 0..n_reps {
        let mut word: Vec<u32> = Vec::new();
        let mut pos1: Vec<u32> = Vec::new();
        let mut window_min = u64::MAX;
        for t in 1..=n2 {
            if word.is_empty() || rng.gen::<f64>() >= p_parent {
                word.push(rng.gen_range(1..=b));
            } else {
                word.pop();
            }
            if t == n1 {
                pos1 = word.clone();
                window_min = word.len() as u64;
            } else if t > n1 {
                window_min = window_min.min(word.len() as u64);
            }
        }
        let shared = pos1
            .iter()
            .zip(&word)
            .take_while(|(a, c)| a == c)
            .count() as u64;
        // The height excess over graph distance is twice (meet height minus
        // the window minimum).
        if shared >= window_min + ell as u64 {
            hits += 1;
        }
    }
    hits as f64 / n_reps as f64
}

#[derive(Clone, Debug)]
struct DeepNode {
    parent: u32,
    depth: i64,
    /// Letter on the edge from the parent; 0 while not yet revealed (only
    /// the exploration root and nodes created by descending below it carry
    /// an unrevealed letter, and such a node is always an only child at the
    /// moment a sibling would be created).
    letter: u32,
    children: SmallVec<[u32; 4]>,
}

/// Trie of positions for walks that may descend below their starting
/// height: descending below all known structure creates a fresh ancestor
/// node, and the letter joining it to the abandoned child stays unrevealed
/// until the first up-step from the new ancestor forces the comparison, at
/// which point it is drawn uniformly. Every later up-step then resolves
/// against fully revealed siblings, so equal words always map to one node.
#[derive(Clone, Debug)]
pub struct DeepTrie {
    nodes: Vec<DeepNode>,
}

impl DeepTrie {
    pub fn new() -> Self {
        DeepTrie {
            nodes: vec![DeepNode {
                parent: NONE,
                depth: 0,
                letter: 0,
                children: SmallVec::new(),
            }],
        }
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self, node: u32) -> i64 {
        self.nodes[node as usize].depth
    }

    /// Moves to the child selected by `letter`, merging with an existing
    /// sibling of the same letter.
    pub fn ascend<R: Rng + ?Sized>(
        &mut self,
        node: u32,
        letter: u32,
        b: u32,
        rng: &mut R,
    ) -> u32 {
        debug_assert!((1..=b).contains(&letter));
        let found = self.nodes[node as usize]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c as usize].letter == letter);
        if let Some(c) = found {
            return c;
        }
        let unrevealed = self.nodes[node as usize]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c as usize].letter == 0);
        if let Some(c) = unrevealed {
            debug_assert_eq!(self.nodes[node as usize].children.len(), 1);
            let revealed = rng.gen_range(1..=b);
            self.nodes[c as usize].letter = revealed;
            if revealed == letter {
                return c;
            }
        }
        let id = self.nodes.len() as u32;
        let depth = self.nodes[node as usize].depth + 1;
        self.nodes.push(DeepNode {
            parent: node,
            depth,
            letter,
            children: SmallVec::new(),
        });
        self.nodes[node as usize].children.push(id);
        id
    }

    /// Moves to the parent, creating it when the walk descends below all
    /// positions seen so far.
    pub fn descend(&mut self, node: u32) -> u32 {
        let p = self.nodes[node as usize].parent;
        if p != NONE {
            return p;
        }
        let id = self.nodes.len() as u32;
        let depth = self.nodes[node as usize].depth - 1;
        let mut children = SmallVec::new();
        children.push(node);
        self.nodes.push(DeepNode {
            parent: NONE,
            depth,
            letter: 0,
            children,
        });
        self.nodes[node as usize].parent = id;
        id
    }

    /// Position of a child vertex in a tree-indexed walk: one step down to
    /// the parent word or up by a uniform letter, each edge independently.
    pub fn brw_child<R: Rng + ?Sized>(&mut self, parent_node: u32, b: u32, rng: &mut R) -> u32 {
        if rng.gen::<bool>() {
            let letter = rng.gen_range(1..=b);
            self.ascend(parent_node, letter, b, rng)
        } else {
            self.descend(parent_node)
        }
    }
}

impl Default for DeepTrie {
    fn default() -> Self {
        DeepTrie::new()
    }
}

/// Which estimator produced a CEstimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CMethod {
    /// Revisit probability on a size-biased tree with an ancestor line,
    /// truncated at the given spine depth (subtrees hanging off the line are
    /// explored to the same generation).
    Ipgw { spine_depth: u32 },
    /// Mean range fraction over conditioned trees of the given size.
    Lln { tree_size: usize },
}

/// Point estimate of the range density constant.
#[derive(Clone, Copy, Debug)]
pub struct CEstimate {
    pub c_hat: f64,
    pub stderr: f64,
    pub replicates: u64,
    pub method: CMethod,
}

/// Smallest scale S at which the origin's position gets revisited by a
/// vertex other than the point and its ancestors, when the ancestor line is
/// truncated at depth S and every subtree hanging off it (the point's own
/// included) is explored to generation S. None when no revisit occurs at any
/// scale up to s_max. Restricting one run to the vertices of scale <= S
/// reproduces the scale-S model exactly, so estimates read off at several
/// scales from shared replicates are coupled and monotone.
fn ipgw_min_revisit_scale<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    b: u32,
    s_max: u32,
    rng: &mut R,
) -> Option<u32> {
    let mut trie = DeepTrie::new();
    let mut spine_node = trie.root();
    // Ancestor line from depth s_max up to the point; vertices on it carry
    // the size-biased offspring law, the first child continues the line and
    // the extra children root ordinary subtrees.
    let mut side_roots: Vec<(u32, u32, u32)> = Vec::new();
    for p in (1..=s_max).rev() {
        let count = mu.sample_spine(rng);
        let child = trie.brw_child(spine_node, b, rng);
        if count > 1 {
            side_roots.push((p, spine_node, count - 1));
        }
        spine_node = child;
    }
    let o_node = spine_node;

    let mut best: Option<u32> = None;
    let point_offspring = mu.sample(rng);
    for _ in 0..point_offspring {
        let child = trie.brw_child(o_node, b, rng);
        revisit_dfs(&mut trie, mu, b, child, 1, 0, s_max, o_node, &mut best, rng);
    }
    for &(level, anchor, extra) in side_roots.iter().rev() {
        if best.is_some_and(|s| level >= s) {
            continue;
        }
        for _ in 0..extra {
            let root = trie.brw_child(anchor, b, rng);
            revisit_dfs(&mut trie, mu, b, root, 0, level, s_max, o_node, &mut best, rng);
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn revisit_dfs<R: Rng + ?Sized>(
    trie: &mut DeepTrie,
    mu: &OffspringDistribution,
    b: u32,
    node: u32,
    generation: u32,
    level: u32,
    gen_cap: u32,
    o_node: u32,
    best: &mut Option<u32>,
    rng: &mut R,
) {
    if node == o_node {
        let scale = level.max(generation);
        if best.map_or(true, |s| scale < s) {
            *best = Some(scale);
        }
    }
    if generation >= gen_cap {
        return;
    }
    // Deeper vertices revisit at scale >= max(level, generation + 1); their
    // subtree cannot improve on a known smaller scale.
    if best.is_some_and(|s| level.max(generation + 1) >= s) {
        return;
    }
    let offspring = mu.sample(rng);
    for _ in 0..offspring {
        let child = trie.brw_child(node, b, rng);
        revisit_dfs(trie, mu, b, child, generation + 1, level, gen_cap, o_node, best, rng);
    }
}

/// Coupled estimates of the range density constant at several truncation
/// scales (strictly increasing). All scales share replicates, so the
/// estimates are nonincreasing in the scale by construction.
pub fn estimate_c_ipgw_scales(
    mu: &OffspringDistribution,
    b: u32,
    scales: &[u32],
    n_reps: u64,
    master_seed: u64,
) -> Vec<CEstimate> {
    assert!(!scales.is_empty());
    assert!(scales.windows(2).all(|w| w[0] < w[1]), "scales must increase");
    let s_max = *scales.last().unwrap();
    let mut no_revisit = vec![0u64; scales.len()];
    for rep in 0..n_reps {
        let mut rng = replicate_rng(master_seed, rep);
        let s_min = ipgw_min_revisit_scale(mu, b, s_max, &mut rng);
        for (slot, &scale) in no_revisit.iter_mut().zip(scales) {
            if s_min.map_or(true, |s| s > scale) {
                *slot += 1;
            }
        }
    }
    scales
        .iter()
        .zip(&no_revisit)
        .map(|(&scale, &count)| {
            let c_hat = count as f64 / n_reps as f64;
            CEstimate {
                c_hat,
                stderr: (c_hat * (1.0 - c_hat) / n_reps as f64).sqrt(),
                replicates: n_reps,
                method: CMethod::Ipgw { spine_depth: scale },
            }
        })
        .collect()
}

/// Estimate at the requested spine depth together with the estimate at twice
/// the depth and the drift between them (an empirical proxy for the
/// truncation error).
#[derive(Clone, Copy, Debug)]
pub struct CIpgwReport {
    pub estimate: CEstimate,
    pub deep_estimate: CEstimate,
    pub drift: f64,
}

pub fn estimate_c_ipgw(
    mu: &OffspringDistribution,
    b: u32,
    spine_depth: u32,
    n_reps: u64,
    master_seed: u64,
) -> CIpgwReport {
    assert!(spine_depth >= 1);
    let scales = [spine_depth, 2 * spine_depth];
    let estimates = estimate_c_ipgw_scales(mu, b, &scales, n_reps, master_seed);
    CIpgwReport {
        estimate: estimates[0],
        deep_estimate: estimates[1],
        drift: (estimates[0].c_hat - estimates[1].c_hat).abs(),
    }
}

/// Range-fraction estimate with per-replicate uniform deviations.
#[derive(Clone, Debug)]
pub struct CLlnReport {
    pub estimate: CEstimate,
    /// max_k |R_k - c_hat k| / n per replicate, against the pooled c_hat.
    pub deviations: Vec<f64>,
}

/// Mean of (range size / n) for the b-ary walk over conditioned trees of
/// size n. Replicates are replayed from their seeds for the deviation pass,
/// so both passes see identical trees and walks.
pub fn estimate_c_lln(
    mu: &OffspringDistribution,
    b: u32,
    n: usize,
    n_reps: u64,
    master_seed: u64,
) -> CLlnReport {
    let mut w = Welford::new();
    for rep in 0..n_reps {
        let mut rng = replicate_rng(master_seed, rep);
        let tree = crate::gw_sampler::sample_gw_conditioned(mu, n, &mut rng, 100_000)
            .expect("conditioned sampling within budget");
        let trie = direct_range_b(&tree, b, &mut rng);
        w.push(trie.len() as f64 / n as f64);
    }
    let c_hat = w.mean();
    let mut deviations = Vec::with_capacity(n_reps as usize);
    for rep in 0..n_reps {
        let mut rng = replicate_rng(master_seed, rep);
        let tree = crate::gw_sampler::sample_gw_conditioned(mu, n, &mut rng, 100_000)
            .expect("same replicate stream as the first pass");
        let trie = direct_range_b(&tree, b, &mut rng);
        let profile = range_profile(&trie);
        let dev = profile
            .r
            .iter()
            .enumerate()
            .map(|(i, &rk)| (rk as f64 - c_hat * (i + 1) as f64).abs())
            .fold(0.0f64, f64::max)
            / n as f64;
        deviations.push(dev);
    }
    CLlnReport {
        estimate: CEstimate {
            c_hat,
            stderr: w.std_err(),
            replicates: n_reps,
            method: CMethod::Lln { tree_size: n },
        },
        deviations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;

    #[test]
    fn green_exact_reference_values() {
        assert_eq!(green_exact(2, 0), 4.0);
        assert!((green_exact(3, 1) - 1.0).abs() < 1e-12);
        for p in 0..60 {
            assert!(green_exact(2, p + 1) < green_exact(2, p));
        }
        assert!(green_exact(2, 60) < 1e-15);
    }

    #[test]
    fn green_mc_matches_exact() {
        let mut rng = replicate_rng(70, 0);
        for &(b, p) in &[(2u32, 0u32), (2, 2), (3, 1)] {
            let (mean, se) = green_mc(b, p, 100_000, 40, &mut rng);
            let exact = green_exact(b, p);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "green b={b} p={p}: {mean} vs {exact} +- {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn ruin_probabilities_match() {
        let mut rng = replicate_rng(71, 0);
        assert_eq!(ruin_mc(2, 0, 40, 10, &mut rng), (1.0, 0.0));
        for &(b, ell) in &[(2u32, 1u32), (2, 2), (3, 1)] {
            let (mean, se) = ruin_mc(b, ell, 40, 100_000, &mut rng);
            let exact = ruin_exact(b, ell);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "ruin b={b} ell={ell}: {mean} vs {exact}"
            );
        }
    }

    #[test]
    fn no_return_probability_matches() {
        let mut rng = replicate_rng(72, 0);
        for &b in &[2u32, 3] {
            let (mean, se) = no_return_mc(b, 40, 100_000, &mut rng);
            let exact = no_return_exact(b);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "no-return b={b}: {mean} vs {exact}"
            );
        }
        assert_eq!(no_return_exact(2), 0.25);
    }

    #[test]
    fn birth_death_table_is_stochastic() {
        for &b in &[2u32, 3, 5] {
            let t = birth_death_table(b);
            assert!((t.deeper + t.rejoin + t.hold - 1.0).abs() < 1e-12);
            assert!((t.root_deeper + t.root_hold - 1.0).abs() < 1e-12);
        }
        let t2 = birth_death_table(2);
        assert_eq!((t2.deeper, t2.rejoin, t2.hold), (0.5, 0.25, 0.25));
    }

    #[test]
    fn birth_death_frequencies_match_table() {
        let b = 2u32;
        let mut rng = replicate_rng(73, 0);
        let (deep, root) = birth_death_empirical(b, 100_000, 20_000, &mut rng);
        let total = deep.iter().sum::<u64>() as f64;
        let t = birth_death_table(b);
        let expected = [total * t.deeper, total * t.rejoin, total * t.hold];
        let r = chi_square_gof(&deep, &expected, 5.0);
        assert!(r.p_value > 0.001, "ray-depth transitions: p = {}", r.p_value);

        let n_root = (root[0] + root[1]) as f64;
        let p_hat = root[0] as f64 / n_root;
        let se = (0.5 * 0.5 / n_root).sqrt();
        assert!((p_hat - 0.5).abs() <= 3.0 * se, "root departures: {p_hat}");
    }

    #[test]
    fn spine_walk_keeps_its_invariants() {
        let mut rng = replicate_rng(74, 0);
        let mut state = SpineWalkState::new();
        let mut prev_height = state.height();
        for _ in 0..50_000 {
            state.step(3, &mut rng);
            assert!(state.k <= 0);
            assert_eq!(state.on_ray(), state.suffix.is_empty());
            let h = state.height();
            assert_eq!((h - prev_height).abs(), 1);
            prev_height = h;
        }
    }

    #[test]
    fn ray_depth_chain_is_transient() {
        for seed in 0..3u64 {
            let mut rng = replicate_rng(75, seed);
            let mut z = 0u64;
            for _ in 0..20_000 {
                z = ray_visit_step(2, z, &mut rng);
            }
            assert!(z > 2_000, "ray depth after 20k embedded steps: {z}");
        }
    }

    #[test]
    fn laplace_exponent_and_mc_agree() {
        assert!(hitting_laplace_exact(1e-12) > 1.0 - 1e-5);
        let mut rng = replicate_rng(76, 0);
        let s = 0.5;
        let (mean, se) = hitting_laplace_mc(s, 100_000, 100_000, &mut rng);
        let exact = hitting_laplace_exact(s);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "laplace at {s}: {mean} vs {exact}"
        );
        // g grows like a multiple of sqrt(s) near zero and stays below 3
        // sqrt(s) on (0, 1].
        for i in 0..=60 {
            let s = 10f64.powf(-6.0 + 0.1 * i as f64);
            assert!(first_passage_log_laplace(s) <= 3.0 * s.sqrt(), "s = {s}");
        }
    }

    #[test]
    fn tree_indexed_revisits_are_bounded_by_green() {
        // For a walk indexed by a critical tree, the chance that any nonroot
        // vertex lands on a fixed word d letters above the start is at most
        // the single walk's expected visit count of that word.
        let mu = OffspringDistribution::geometric();
        let b = 3u32;
        let n_reps = 4_000u64;
        for d in [2u32, 3] {
            let mut revisits = 0u64;
            for rep in 0..n_reps {
                let mut rng = replicate_rng(77 + d as u64, rep);
                let mut trie = DeepTrie::new();
                let start = trie.root();
                let mut target = start;
                for _ in 0..d {
                    target = trie.ascend(target, 1, b, &mut rng);
                }
                let mut hit = false;
                let offspring = mu.sample(&mut rng);
                for _ in 0..offspring {
                    let child = trie.brw_child(start, b, &mut rng);
                    mark_dfs(&mut trie, &mu, b, child, 1, 30, target, &mut hit, &mut rng);
                }
                if hit {
                    revisits += 1;
                }
            }
            let p_hat = revisits as f64 / n_reps as f64;
            let bound = green_exact(b, d);
            let se = (p_hat * (1.0 - p_hat) / n_reps as f64).sqrt();
            assert!(
                p_hat <= bound + 3.0 * se.max(0.005),
                "revisit probability {p_hat} at distance {d} exceeds {bound}"
            );
        }
    }

    fn mark_dfs<R: rand::Rng + ?Sized>(
        trie: &mut DeepTrie,
        mu: &OffspringDistribution,
        b: u32,
        node: u32,
        generation: u32,
        gen_cap: u32,
        target: u32,
        hit: &mut bool,
        rng: &mut R,
    ) {
        if node == target {
            *hit = true;
        }
        if generation >= gen_cap || *hit {
            return;
        }
        let offspring = mu.sample(rng);
        for _ in 0..offspring {
            let child = trie.brw_child(node, b, rng);
            mark_dfs(trie, mu, b, child, generation + 1, gen_cap, target, hit, rng);
        }
    }

    #[test]
    fn biased_tail_bound_values_and_mc() {
        let bound = biased_tail_bound(2.0, 10, 20, 120);
        assert!((bound - 100.0 / 1023.0).abs() < 1e-12);
        assert!(biased_tail_bound(2.0, 20, 20, 120) < bound);
        assert!(biased_tail_bound(1.5, 0, 0, 10).is_infinite());

        let mut rng = replicate_rng(78, 0);
        let empirical = biased_tail_mc(2, 2.0, 10, 20, 120, 20_000, &mut rng);
        assert!(
            empirical <= bound,
            "empirical {empirical} exceeds bound {bound}"
        );
    }

    #[test]
    fn ipgw_estimates_decrease_with_scale() {
        let mu = OffspringDistribution::geometric();
        let estimates = estimate_c_ipgw_scales(&mu, 2, &[5, 10, 20, 40], 400, 79);
        for w in estimates.windows(2) {
            assert!(w[0].c_hat >= w[1].c_hat, "coupled scales must not increase");
        }
        for e in &estimates {
            assert!(e.c_hat > 0.0 && e.c_hat <= 1.0);
            assert!(e.stderr > 0.0);
        }
    }

    #[test]
    fn c_estimators_agree_across_methods() {
        let mu = OffspringDistribution::geometric();
        let b = 2u32;
        let ipgw = estimate_c_ipgw(&mu, b, 25, 1_500, 80);
        let lln = estimate_c_lln(&mu, b, 20_000, 300, 81);
        let joint_se = (ipgw.estimate.stderr.powi(2) + lln.estimate.stderr.powi(2)).sqrt();
        let gap = (ipgw.estimate.c_hat - lln.estimate.c_hat).abs();
        assert!(
            gap <= 3.0 * joint_se + ipgw.drift,
            "ipgw {} vs lln {}: gap {gap}, band {}",
            ipgw.estimate.c_hat,
            lln.estimate.c_hat,
            3.0 * joint_se + ipgw.drift
        );
    }

    #[test]
    fn lln_estimates_stabilize_in_n() {
        // The range fraction carries a boundary bias that shrinks like
        // n^{-1/2}, so consecutive size-quadruplings drift less and less.
        let mu = OffspringDistribution::geometric();
        let c_5k = estimate_c_lln(&mu, 2, 5_000, 150, 82).estimate;
        let c_20k = estimate_c_lln(&mu, 2, 20_000, 150, 83).estimate;
        let c_80k = estimate_c_lln(&mu, 2, 80_000, 80, 84).estimate;
        for e in [&c_5k, &c_20k, &c_80k] {
            assert!(e.c_hat > 0.0 && e.c_hat < 1.0);
            assert!(e.c_hat - 3.0 * e.stderr > 0.0, "positivity must be clear");
        }
        let first_drift = (c_5k.c_hat - c_20k.c_hat).abs();
        let second_drift = (c_20k.c_hat - c_80k.c_hat).abs();
        assert!(
            second_drift < first_drift,
            "drift must shrink: {first_drift} then {second_drift}"
        );
        assert!(second_drift < 0.01, "late drift {second_drift}");
    }

    #[test]
    fn lln_uniform_deviation_shrinks() {
        let mu = OffspringDistribution::geometric();
        let median = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let d_small = median(estimate_c_lln(&mu, 2, 2_000, 60, 86).deviations);
        let d_large = median(estimate_c_lln(&mu, 2, 32_000, 60, 87).deviations);
        assert!(
            d_large < d_small,
            "median uniform deviation: {d_large} at 32k vs {d_small} at 2k"
        );
    }
}
