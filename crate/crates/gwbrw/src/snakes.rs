//! Discrete snakes over contour explorations and their grid-level continuum
//! counterparts.
//!
//! A branching walk indexed by a finite ordered tree, read along the contour
//! exploration, is a path-valued process: at contour time s the walk's
//! positions along the lineage of the current vertex form a path of length
//! C_s, and the tip of that path is the endpoint process. [`DiscreteSnake`]
//! holds exactly the data needed to rebuild those paths on demand (the tree,
//! one spatial height per vertex, the visit order) without ever storing
//! them. On top of it the module verifies the identity between endpoint
//! distances in the range and the snake metric, compares the occupation
//! measures carried by the exploration against the counting measure on the
//! range, and quantifies how evenly the exploration reveals new positions.
//!
//! The continuum side provides the rotated-bridge construction of the
//! normalized Brownian excursion, conditioned Galton-Watson contour grids as
//! the lifetime source for the stable mechanisms, the layered Gaussian
//! construction of a Brownian snake over a fixed grid lifetime
//! ([`GridSnake`]), and the induced cactus metric.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::brw::{graph_distance_trie, measures, HeightBRW, RangeTrie};
use crate::gw_sampler::{
    sample_gw_conditioned, scaling_a_n, OffspringDistribution, SamplerError,
};
use crate::metrics::{
    prokhorov_bruteforce, snake_metric_grid, FiniteMeasuredSpace, GridPseudoMetric, MetricError,
    PROKHOROV_MAX_POINTS,
};
use crate::tree_core::{contour_process, contour_vertices, ContourSeq, OrderedTree};

/// A branching walk read along the contour of its tree: integer spatial
/// heights per vertex, the visit sequence v(0), ..., v(2n) with the root
/// repeated at the two final padding slots, and the contour lifetime.
///
/// Paths are never stored; [`DiscreteSnake::path`] and
/// [`DiscreteSnake::value`] rebuild them from parent pointers when asked.
#[derive(Clone, Debug)]
pub struct DiscreteSnake {
    tree: OrderedTree,
    spatial: Vec<i64>,
    visits: Vec<u32>,
    lifetime: ContourSeq,
}

/// Reads a reflected height process along the contour of its tree. The
/// endpoint at integer time k is the spatial height of the k-th visited
/// vertex and the lifetime is the contour process itself.
pub fn spatial_contour(hbrw: &HeightBRW) -> DiscreteSnake {
    assert!(
        hbrw.reflected,
        "spatial contours are built over reflected heights"
    );
    DiscreteSnake::assemble(hbrw.tree.clone(), hbrw.heights.clone())
}

impl DiscreteSnake {
    fn assemble(tree: OrderedTree, spatial: Vec<i64>) -> DiscreteSnake {
        assert_eq!(spatial.len(), tree.len(), "one height per vertex");
        let mut visits = contour_vertices(&tree);
        visits.push(0);
        visits.push(0);
        let lifetime = contour_process(&tree);
        DiscreteSnake {
            tree,
            spatial,
            visits,
            lifetime,
        }
    }

    /// Positions taken from a range trie: the spatial height of a vertex is
    /// the depth of its position node.
    pub fn from_trie(tree: &OrderedTree, trie: &RangeTrie) -> DiscreteSnake {
        assert_eq!(trie.vertex_count(), tree.len(), "one position per vertex");
        let spatial = (0..tree.len())
            .map(|v| trie.depth(trie.node_of(v)) as i64)
            .collect();
        DiscreteSnake::assemble(tree.clone(), spatial)
    }

    pub fn tree(&self) -> &OrderedTree {
        &self.tree
    }

    /// Contour horizon 2n.
    pub fn duration(&self) -> usize {
        self.visits.len() - 1
    }

    pub fn lifetime(&self) -> &ContourSeq {
        &self.lifetime
    }

    /// Vertex visited at integer contour time k, for k in 0..=2n.
    pub fn visit(&self, k: usize) -> usize {
        self.visits[k] as usize
    }

    pub fn spatial_height(&self, v: usize) -> i64 {
        self.spatial[v]
    }

    /// Endpoint at an integer contour time.
    pub fn endpoint(&self, k: usize) -> i64 {
        self.spatial[self.visits[k] as usize]
    }

    pub fn endpoints(&self) -> Vec<i64> {
        self.visits
            .iter()
            .map(|&v| self.spatial[v as usize])
            .collect()
    }

    /// Endpoint at a fractional time. Consecutive endpoints sit one spatial
    /// step apart, so linear interpolation traces the moving tip exactly.
    pub fn endpoint_at(&self, s: f64) -> f64 {
        let last = self.duration() as f64;
        let s = s.clamp(0.0, last);
        let k = s.floor() as usize;
        if k + 1 >= self.visits.len() {
            return self.endpoint(k) as f64;
        }
        let frac = s - k as f64;
        self.endpoint(k) as f64 * (1.0 - frac) + self.endpoint(k + 1) as f64 * frac
    }

    /// The path at integer time k: spatial heights along the lineage from
    /// the root to v(k), one entry per generation, root first.
    pub fn path(&self, k: usize) -> Vec<i64> {
        let mut out = Vec::new();
        let mut v = self.visits[k] as usize;
        loop {
            out.push(self.spatial[v]);
            match self.tree.parent(v) {
                Some(p) => v = p,
                None => break,
            }
        }
        out.reverse();
        out
    }

    fn ancestor_height(&self, v: usize, level: u32) -> i64 {
        let mut u = v;
        let mut d = self.tree.depth(u);
        while d > level {
            u = self.tree.parent(u).expect("positive depth");
            d -= 1;
        }
        self.spatial[u]
    }

    /// W_s(r) for fractional s and r. Between integer times the path is the
    /// lineage of the deeper of the two visited vertices truncated at the
    /// interpolated lifetime; adjacent generations sit one spatial step
    /// apart, so levels also interpolate linearly. r is clamped to
    /// [0, C_s], which makes the value constant past the lifetime.
    pub fn value(&self, s: f64, r: f64) -> f64 {
        let last = self.duration() as f64;
        let s = s.clamp(0.0, last);
        let k = (s.floor() as usize).min(self.duration() - 1);
        let (a, b) = (self.visits[k] as usize, self.visits[k + 1] as usize);
        let deeper = if self.lifetime.values[k + 1] > self.lifetime.values[k] {
            b
        } else {
            a
        };
        let cs = self.lifetime.at(s);
        let r = r.clamp(0.0, cs);
        let lo = r.floor() as u32;
        let vlo = self.ancestor_height(deeper, lo) as f64;
        let frac = r - lo as f64;
        if frac == 0.0 {
            return vlo;
        }
        let vhi = self.ancestor_height(deeper, lo + 1) as f64;
        vlo * (1.0 - frac) + vhi * frac
    }

    /// Snake distance between two integer times: the endpoint heights minus
    /// twice the minimum height along the genealogical path between the two
    /// visited vertices.
    pub fn endpoint_distance(&self, k1: usize, k2: usize) -> i64 {
        let (mut a, mut b) = (self.visits[k1] as usize, self.visits[k2] as usize);
        let (ha, hb) = (self.spatial[a], self.spatial[b]);
        let mut min = ha.min(hb);
        let (mut da, mut db) = (self.tree.depth(a), self.tree.depth(b));
        while da > db {
            a = self.tree.parent(a).expect("positive depth");
            min = min.min(self.spatial[a]);
            da -= 1;
        }
        while db > da {
            b = self.tree.parent(b).expect("positive depth");
            min = min.min(self.spatial[b]);
            db -= 1;
        }
        while a != b {
            a = self.tree.parent(a).expect("distinct vertices below the root");
            b = self.tree.parent(b).expect("distinct vertices below the root");
            min = min.min(self.spatial[a]).min(self.spatial[b]);
        }
        ha + hb - 2 * min
    }
}

/// Largest gap, over all pairs of integer contour times, between the range
/// distance of the two visited positions and the snake distance of the two
/// times. Zero whenever positions never merge, because then the position
/// trie reproduces lineage minima exactly; merged (b-ary) positions can only
/// shorten range distances, so there the gap is checked by
/// [`contraction_gap_check`] instead.
pub fn contour_identity_check(snake: &DiscreteSnake, trie: &RangeTrie) -> u64 {
    assert_eq!(trie.vertex_count(), snake.tree.len(), "trie built on the same walk");
    let m = snake.duration();
    let mut worst = 0u64;
    for k1 in 0..=m {
        for k2 in k1 + 1..=m {
            let td = graph_distance_trie(trie, snake.visit(k1), snake.visit(k2)) as i64;
            let sd = snake.endpoint_distance(k1, k2);
            worst = worst.max((td - sd).unsigned_abs());
        }
    }
    worst
}

/// Outcome of comparing merged-position distances with snake distances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContractionGap {
    /// Largest amount by which merging shortened a distance.
    pub max_gap: u64,
    /// Every gap was nonnegative and even. Both distances are a height sum
    /// minus twice a meeting level, so they always share a parity.
    pub consistent: bool,
}

/// Compares, over all pairs of integer contour times, the distance in a
/// merged (letter-contracted) position trie against the snake distance of
/// the underlying walk.
pub fn contraction_gap_check(snake: &DiscreteSnake, contracted: &RangeTrie) -> ContractionGap {
    assert_eq!(contracted.vertex_count(), snake.tree.len());
    let m = snake.duration();
    let mut max_gap = 0u64;
    let mut consistent = true;
    for k1 in 0..=m {
        for k2 in k1 + 1..=m {
            let td = graph_distance_trie(contracted, snake.visit(k1), snake.visit(k2)) as i64;
            let sd = snake.endpoint_distance(k1, k2);
            let gap = sd - td;
            if gap < 0 || gap % 2 != 0 {
                consistent = false;
            } else {
                max_gap = max_gap.max(gap as u64);
            }
        }
    }
    ContractionGap { max_gap, consistent }
}

/// How the occupation measures carried by the contour relate to the range.
///
/// The `step_*` fields are displacements realized by explicit transports:
/// reading the contour at integer instead of continuous times moves each
/// unit of mass along at most one edge, and collapsing the two contour
/// slots of every vertex onto the vertex itself moves it by at most one
/// step. On small ranges the same comparisons are also made with the exact
/// subset-enumeration Prokhorov distance; there the continuously-read
/// occupation is represented by one atom at the midpoint of each traversed
/// edge, which sits within half an edge of the segment of mass it stands
/// for, and the reported values already include that half-step allowance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureReport {
    /// Hausdorff gap between the visited positions and the segments joining
    /// them: half an edge when any edge was traversed.
    pub hausdorff_gap: f64,
    /// Largest displacement when matching continuous with integer reading.
    pub step_bound_interp: f64,
    /// Largest displacement when matching contour slots with vertices.
    pub step_bound_occ: f64,
    /// The slot-to-vertex map hit every vertex exactly twice.
    pub double_count_ok: bool,
    /// Exact distance between contour occupation and twice the vertex
    /// occupation, when the range is small enough to enumerate subsets.
    pub exact_cont_vs_occ: Option<f64>,
    /// Exact midpoint-surrogate distance to contour occupation, plus the
    /// half-step allowance.
    pub exact_interp_vs_cont: Option<f64>,
    /// Exact midpoint-surrogate distance to twice the vertex occupation,
    /// plus the half-step allowance.
    pub exact_interp_vs_occ: Option<f64>,
}

impl MeasureReport {
    /// All comparisons land within the guaranteed constants: one edge for
    /// the single-transport pairs, two for the combined one.
    pub fn within_bounds(&self) -> bool {
        const EPS: f64 = 1e-9;
        self.hausdorff_gap <= 1.0 + EPS
            && self.step_bound_interp <= 1.0 + EPS
            && self.step_bound_occ <= 1.0 + EPS
            && self.double_count_ok
            && self.exact_cont_vs_occ.map_or(true, |x| x <= 1.0 + EPS)
            && self.exact_interp_vs_cont.map_or(true, |x| x <= 1.0 + EPS)
            && self.exact_interp_vs_occ.map_or(true, |x| x <= 2.0 + EPS)
    }
}

/// Compares the three occupation measures attached to a walk: one atom per
/// contour slot, the continuous contour reading, and two atoms per vertex.
pub fn measure_comparisons(snake: &DiscreteSnake, trie: &RangeTrie) -> MeasureReport {
    assert_eq!(trie.vertex_count(), snake.tree.len());
    let two_n = snake.duration();
    let node_at: Vec<u32> = (0..=two_n)
        .map(|k| trie.node_of(snake.visit(k)))
        .collect();

    // Each contour step either crosses one edge or, in the final padding,
    // stays put at the root.
    let mut any_edge = false;
    let mut max_step = 0u64;
    for k in 0..two_n {
        let d = trie.node_distance(node_at[k], node_at[k + 1]);
        debug_assert!(d <= 1, "one step per contour slot");
        any_edge |= d == 1;
        max_step = max_step.max(d);
    }
    let hausdorff_gap = if any_edge { 0.5 } else { 0.0 };

    // Slot k is assigned to the deeper endpoint of its step, the padding
    // slots to the root; that map covers every vertex exactly twice.
    let n = snake.tree.len();
    let depths = snake.tree.depths();
    let mut slot_counts = vec![0u32; n];
    let mut occ_disp = 0u64;
    for k in 0..two_n {
        let rv = if k + 3 <= two_n {
            let (a, b) = (snake.visit(k), snake.visit(k + 1));
            if depths[a] > depths[b] {
                a
            } else {
                b
            }
        } else {
            0
        };
        slot_counts[rv] += 1;
        occ_disp = occ_disp.max(trie.node_distance(trie.node_of(rv), node_at[k]));
    }
    let double_count_ok = slot_counts.iter().all(|&c| c == 2);

    let ln = trie.len();
    let ground = 2 * ln - 1;
    let mut exact = (None, None, None);
    if ground <= PROKHOROV_MAX_POINTS {
        // Ground points: node x at index x, and for x >= 1 the midpoint of
        // the edge from x up to its parent at index ln + x - 1. Distances
        // follow the tree: a path leaves an edge through one of its ends.
        let up = |x: usize| trie.parent(x as u32).expect("non-root") as usize;
        let pair = |p: usize, q: usize| -> f64 {
            let node_d = |u: usize, v: usize| trie.node_distance(u as u32, v as u32) as f64;
            match (p < ln, q < ln) {
                (true, true) => node_d(p, q),
                (true, false) => {
                    let x = q - ln + 1;
                    node_d(p, x).min(node_d(p, up(x))) + 0.5
                }
                (false, true) => {
                    let x = p - ln + 1;
                    node_d(q, x).min(node_d(q, up(x))) + 0.5
                }
                (false, false) => {
                    let (x, y) = (p - ln + 1, q - ln + 1);
                    if x == y {
                        0.0
                    } else {
                        node_d(x, y)
                            .min(node_d(x, up(y)))
                            .min(node_d(up(x), y))
                            .min(node_d(up(x), up(y)))
                            + 1.0
                    }
                }
            }
        };
        let mut d = vec![0.0; ground * ground];
        for p in 0..ground {
            for q in 0..p {
                let v = pair(p, q);
                d[p * ground + q] = v;
                d[q * ground + p] = v;
            }
        }

        let mut w_cont = vec![0.0; ground];
        let mut w_mid = vec![0.0; ground];
        for k in 0..two_n {
            w_cont[node_at[k] as usize] += 1.0;
            let (a, b) = (node_at[k] as usize, node_at[k + 1] as usize);
            if a == b {
                w_mid[a] += 1.0;
            } else {
                let child = if trie.parent(a as u32) == Some(b as u32) {
                    a
                } else {
                    b
                };
                w_mid[ln + child - 1] += 1.0;
            }
        }
        let mut w_occ2 = vec![0.0; ground];
        for (x, visits) in measures(trie).occupation.iter().enumerate() {
            w_occ2[x] = 2.0 * *visits as f64;
        }

        // The surrogate equals the continuous reading exactly when every
        // step is stationary; otherwise it sits within half an edge of it.
        let allow = if any_edge { 0.5 } else { 0.0 };
        let cont = FiniteMeasuredSpace::new(d, w_cont).expect("valid ground space");
        let occ2 = cont.reweight(w_occ2).expect("same ground");
        let mid = cont.reweight(w_mid).expect("same ground");
        let a = prokhorov_bruteforce(&cont, &occ2).expect("small ground");
        let b = prokhorov_bruteforce(&mid, &cont).expect("small ground") + allow;
        let c = prokhorov_bruteforce(&mid, &occ2).expect("small ground") + allow;
        exact = (Some(a), Some(b), Some(c));
    }

    MeasureReport {
        hausdorff_gap,
        step_bound_interp: max_step as f64,
        step_bound_occ: occ_disp as f64,
        double_count_ok,
        exact_cont_vs_occ: exact.0,
        exact_interp_vs_cont: exact.1,
        exact_interp_vs_occ: exact.2,
    }
}

/// Deviations of range growth read in two different orders, the modulus
/// bound they induce on the gap between vertex occupation and the rescaled
/// counting measure on the range, and its verification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeDeviationReport {
    pub c: f64,
    /// max over i of |distinct positions among the first i vertices in
    /// depth-first order - 2ci|.
    pub alpha: f64,
    /// sup over s in (0, 2n] of |distinct endpoint positions before time
    /// ceil(s) - cs|.
    pub beta: f64,
    pub max_contour: u32,
    /// beta stayed within alpha + 3c + c * max_contour.
    pub deviation_ok: bool,
    /// Largest endpoint distance across integer times at most
    /// (4 beta + 1)/c apart.
    pub modulus: u64,
    /// Largest displacement of the transport that pairs each time with the
    /// first-visit position of proportional index.
    pub coupling_disp: u64,
    /// coupling_disp stayed within twice the modulus.
    pub coupling_ok: bool,
    /// Exact distance between vertex occupation and the counting measure
    /// rescaled to the same mass, when the range is small enough.
    pub exact_prokhorov: Option<f64>,
    /// exact_prokhorov stayed within 1 + twice the modulus.
    pub exact_ok: Option<bool>,
}

/// Measures how evenly the exploration reveals new positions at rate c per
/// contour slot (2c per vertex), and checks the resulting comparison between
/// the vertex occupation measure and the counting measure on the range.
pub fn range_deviation_check(
    snake: &DiscreteSnake,
    trie: &RangeTrie,
    c: f64,
) -> RangeDeviationReport {
    assert!(c.is_finite() && c > 0.0, "rate must be positive");
    assert_eq!(trie.vertex_count(), snake.tree.len());
    let n = snake.tree.len();
    let two_n = snake.duration();

    let mut seen = vec![false; trie.len()];
    let mut distinct = 0usize;
    let mut alpha = 0.0f64;
    for j in 0..n {
        let node = trie.node_of(j) as usize;
        if !seen[node] {
            seen[node] = true;
            distinct += 1;
        }
        alpha = alpha.max((distinct as f64 - 2.0 * c * (j + 1) as f64).abs());
    }

    // The count is constant between integer times, so the supremum over
    // s in (k-1, k] is attained at one of the two ends.
    seen.fill(false);
    distinct = 0;
    let mut beta = 0.0f64;
    let mut first_seen: Vec<u32> = Vec::with_capacity(trie.len());
    let node_at: Vec<u32> = (0..=two_n)
        .map(|k| trie.node_of(snake.visit(k)))
        .collect();
    for k in 1..=two_n {
        let node = node_at[k - 1];
        if !seen[node as usize] {
            seen[node as usize] = true;
            distinct += 1;
            first_seen.push(node);
        }
        let j = distinct as f64;
        beta = beta
            .max((j - c * (k - 1) as f64).abs())
            .max((j - c * k as f64).abs());
    }
    let n_prime = first_seen.len();
    debug_assert_eq!(n_prime, trie.len(), "every position is an endpoint");

    let max_contour = self_max_contour(snake);
    let deviation_ok = beta <= alpha + 3.0 * c + c * max_contour as f64 + 1e-9;

    let span = (((4.0 * beta + 1.0) / c).floor() as usize).min(two_n);
    let mut modulus = 0u64;
    for k in 0..=two_n {
        for k2 in k + 1..=(k + span).min(two_n) {
            modulus = modulus.max(trie.node_distance(node_at[k], node_at[k2]));
        }
    }

    // Transport between the contour occupation and the rescaled counting
    // measure: time s rides with the slot below it on one side and with the
    // first-visit position of index ceil(n' s / 2n) on the other. Only
    // pairings holding for a positive length of time matter, which after
    // clearing denominators is an open interval condition on integers.
    let mut disp = 0u64;
    let (np, tn) = (n_prime as u64, two_n as u64);
    for ip in 1..=np {
        let (a2, b2) = ((ip - 1) * tn, ip * tn);
        let k_hi = (b2 / np + 1).min(tn.saturating_sub(1));
        for k in (a2 / np)..=k_hi {
            let (a1, b1) = (k * np, (k + 1) * np);
            if a1.max(a2) < b1.min(b2) {
                disp = disp.max(trie.node_distance(
                    node_at[k as usize],
                    first_seen[(ip - 1) as usize],
                ));
            }
        }
    }
    let coupling_ok = disp <= 2 * modulus;

    let mut exact_prokhorov = None;
    let mut exact_ok = None;
    if n_prime <= PROKHOROV_MAX_POINTS {
        let mut d = vec![0.0; n_prime * n_prime];
        for p in 0..n_prime {
            for q in 0..p {
                let v = trie.node_distance(p as u32, q as u32) as f64;
                d[p * n_prime + q] = v;
                d[q * n_prime + p] = v;
            }
        }
        let occ: Vec<f64> = measures(trie)
            .occupation
            .iter()
            .map(|&x| x as f64)
            .collect();
        let per_node = n as f64 / n_prime as f64;
        let mu = FiniteMeasuredSpace::new(d, occ).expect("valid ground space");
        let nu = mu.reweight(vec![per_node; n_prime]).expect("same ground");
        let val = prokhorov_bruteforce(&mu, &nu).expect("small ground");
        exact_ok = Some(val <= 1.0 + 2.0 * modulus as f64 + 1e-9);
        exact_prokhorov = Some(val);
    }

    RangeDeviationReport {
        c,
        alpha,
        beta,
        max_contour,
        deviation_ok,
        modulus,
        coupling_disp: disp,
        coupling_ok,
        exact_prokhorov,
        exact_ok,
    }
}

fn self_max_contour(snake: &DiscreteSnake) -> u32 {
    snake.lifetime.values.iter().copied().max().unwrap_or(0)
}

/// Normalized excursion lifetime on m+1 equally spaced grid points: the
/// distributional limit of conditioned contour grids under the scaling
/// sequence, realized as a Gaussian bridge rotated at its minimum. The
/// bridge carries variance 2s at time s, which is what the height process
/// of the quadratic branching mechanism accumulates; endpoints are exactly
/// zero and the interior is almost surely positive.
pub fn brownian_excursion<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    assert!(m >= 2, "need at least two steps");
    let sd = (2.0 / m as f64).sqrt();
    let mut w = Vec::with_capacity(m + 1);
    w.push(0.0);
    for j in 1..=m {
        let z: f64 = rng.sample(StandardNormal);
        w.push(w[j - 1] + sd * z);
    }
    let last = w[m];
    for (j, x) in w.iter_mut().enumerate() {
        *x -= last * j as f64 / m as f64;
    }
    let mut rho = 0usize;
    for j in 1..m {
        if w[j] < w[rho] {
            rho = j;
        }
    }
    // The bridge has period m once its endpoints are identified, so the
    // rotation reads it cyclically starting at the minimum.
    let base = w[rho];
    (0..=m)
        .map(|j| {
            let idx = if rho + j < m { rho + j } else { rho + j - m };
            w[idx] - base
        })
        .collect()
}

/// Contour excursion of a tree on an m+1 point grid over [0, 1], rescaled
/// by a_n: value i is C(2n i / m) / a_n.
pub fn lifetime_grid(tree: &OrderedTree, a_n: f64, m: usize) -> Vec<f64> {
    assert!(m >= 1, "need at least one step");
    assert!(a_n.is_finite() && a_n > 0.0, "scaling must be positive");
    let contour = contour_process(tree);
    let two_n = (2 * tree.len()) as f64;
    (0..=m)
        .map(|i| contour.at(two_n * i as f64 / m as f64) / a_n)
        .collect()
}

/// Lifetime grid of a size-conditioned Galton-Watson tree. This is the only
/// route to excursions of the stable mechanisms; they are never simulated
/// directly.
pub fn gw_excursion_grid<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    n: usize,
    m: usize,
    max_tries: u64,
    rng: &mut R,
) -> Result<Vec<f64>, SamplerError> {
    let tree = sample_gw_conditioned(mu, n, rng, max_tries)?;
    Ok(lifetime_grid(&tree, scaling_a_n(mu, n), m))
}

/// A snake over a grid lifetime: one stored path per grid time, sampled
/// every `dr` levels, the last stored sample standing for the endpoint.
/// Stored paths agree exactly below running lifetime minima because later
/// paths copy earlier prefixes.
#[derive(Clone, Debug)]
pub struct GridSnake {
    zeta: f64,
    dr: f64,
    h: Vec<f64>,
    paths: Vec<Vec<f64>>,
}

impl GridSnake {
    /// Number of grid steps m; times are i * zeta / m.
    pub fn grid_size(&self) -> usize {
        self.h.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.h.len()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn time(&self, i: usize) -> f64 {
        self.zeta * i as f64 / self.grid_size() as f64
    }

    pub fn lifetimes(&self) -> &[f64] {
        &self.h
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.paths[i]
    }

    pub fn endpoint(&self, i: usize) -> f64 {
        *self.paths[i].last().expect("paths are nonempty")
    }

    pub fn endpoints(&self) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| *p.last().expect("paths are nonempty"))
            .collect()
    }

    /// One cactus entry without building the full matrix: the two paths are
    /// compared above the lowest stored level of any lifetime between the
    /// grid times. Agrees with [`cactus_metric`] entrywise.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        let lev = self.paths[i..=j]
            .iter()
            .map(|p| p.len() - 1)
            .min()
            .expect("nonempty window");
        let a = self.paths[i][lev..]
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x));
        let b = self.paths[j][lev..]
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x));
        let mm = a.min(b);
        (self.endpoint(i) - mm) + (self.endpoint(j) - mm)
    }

    /// Pathwise absolute value. Prefix agreements survive, so the result is
    /// again a snake over the same lifetime.
    pub fn reflected(&self) -> GridSnake {
        GridSnake {
            zeta: self.zeta,
            dr: self.dr,
            h: self.h.clone(),
            paths: self
                .paths
                .iter()
                .map(|p| p.iter().map(|x| x.abs()).collect())
                .collect(),
        }
    }

    /// Largest jump between consecutive stored levels across all paths. The
    /// level discretization can misjudge a pairwise path minimum by at most
    /// this much per endpoint, so cactus entries carry an error of at most
    /// twice this value.
    pub fn max_level_step(&self) -> f64 {
        self.paths
            .iter()
            .flat_map(|p| p.windows(2))
            .fold(0.0f64, |acc, w| acc.max((w[1] - w[0]).abs()))
    }

    /// Keeps every `factor`-th stored level. The result is the same snake
    /// read at resolution `factor * dr`: kept indices k*factor run up to
    /// floor(h/dr), which is exactly floor(h / (factor dr)) values, so the
    /// coarse path lengths match a direct construction and prefix sharing
    /// survives.
    pub fn coarsen_levels(&self, factor: usize) -> GridSnake {
        assert!(factor >= 1, "factor must be positive");
        GridSnake {
            zeta: self.zeta,
            dr: self.dr * factor as f64,
            h: self.h.clone(),
            paths: self
                .paths
                .iter()
                .map(|p| p.iter().copied().step_by(factor).collect())
                .collect(),
        }
    }

    /// Dilates values by `a` (stored levels follow, so `dr` scales along)
    /// and times by `alpha`. Dyadic factors keep the stored level counts
    /// bit-exact; arbitrary factors can shift floor(h/dr) by one at a
    /// boundary.
    pub fn rescale(&self, alpha: f64, a: f64) -> GridSnake {
        assert!(alpha.is_finite() && alpha > 0.0, "time factor must be positive");
        assert!(a.is_finite() && a > 0.0, "value factor must be positive");
        GridSnake {
            zeta: alpha * self.zeta,
            dr: a * self.dr,
            h: self.h.iter().map(|&x| a * x).collect(),
            paths: self
                .paths
                .iter()
                .map(|p| p.iter().map(|&x| a * x).collect())
                .collect(),
        }
    }

    /// One row per grid time; the first line is `# snake m=…, zeta=…, dr=…`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# snake m={}, zeta={}, dr={}\n",
            self.grid_size(),
            self.zeta,
            self.dr
        );
        out.push_str("s,h,w_hat\n");
        for i in 0..self.n_points() {
            let _ = writeln!(out, "{},{},{}", self.time(i), self.h[i], self.endpoint(i));
        }
        out
    }
}

/// Layered Gaussian construction over a fixed lifetime grid: each path
/// copies its predecessor up to the shared lifetime floor and continues with
/// independent centered Gaussian increments of variance `dr` per level. The
/// first path starts from zero, so level zero carries the value zero
/// everywhere. Endpoint covariances come out exactly as dr * (shared stored
/// levels - 1), the grid version of the lifetime minimum.
pub fn brownian_snake_given_h<R: Rng + ?Sized>(
    h: &[f64],
    zeta: f64,
    dr: f64,
    rng: &mut R,
) -> GridSnake {
    assert!(h.len() >= 2, "need at least two grid points");
    assert!(
        h.iter().all(|x| x.is_finite() && *x >= 0.0),
        "lifetimes must be finite and nonnegative"
    );
    assert!(zeta.is_finite() && zeta > 0.0, "horizon must be positive");
    assert!(dr.is_finite() && dr > 0.0, "level resolution must be positive");
    let sd = dr.sqrt();
    let mut paths: Vec<Vec<f64>> = Vec::with_capacity(h.len());
    for (i, &hi) in h.iter().enumerate() {
        let len = (hi / dr).floor() as usize + 1;
        let mut p = Vec::with_capacity(len);
        if i == 0 {
            p.push(0.0);
        } else {
            let prev = &paths[i - 1];
            let shared = prev.len().min(len);
            p.extend_from_slice(&prev[..shared]);
        }
        while p.len() < len {
            let z: f64 = rng.sample(StandardNormal);
            let last = *p.last().expect("paths are nonempty");
            p.push(last + sd * z);
        }
        paths.push(p);
    }
    GridSnake {
        zeta,
        dr,
        h: h.to_vec(),
        paths,
    }
}

/// Default level resolution, one order finer than the time grid.
pub fn default_dr(zeta: f64, m: usize) -> f64 {
    zeta / (m * m) as f64
}

/// Snake distance matrix of the stored grid: endpoint sums minus twice the
/// pairwise path minima above the shared lifetime floor. Feed the reflected
/// snake to get the reflected cactus.
pub fn cactus_metric(snake: &GridSnake) -> Result<GridPseudoMetric, MetricError> {
    snake_metric_grid(&snake.h, &snake.paths, snake.dr, snake.zeta, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brw::{contract_to_b, direct_range_b, free_range, sample_heights};
    use crate::metrics::four_point_check;
    use crate::stats::{ks_two_sample, replicate_rng};
    use crate::tree_core::enumerate_trees;

    fn geometric_tree(n: usize, rng: &mut impl Rng) -> OrderedTree {
        sample_gw_conditioned(&OffspringDistribution::geometric(), n, rng, 10_000)
            .expect("rejection-free for the geometric family")
    }

    #[test]
    fn endpoint_process_follows_the_contour() {
        let mut rng = replicate_rng(131, 0);
        let tree = geometric_tree(40, &mut rng);
        let hbrw = sample_heights(tree.clone(), true, &mut rng);
        let snake = spatial_contour(&hbrw);
        let two_n = snake.duration();
        assert_eq!(two_n, 2 * tree.len());
        assert_eq!(snake.lifetime().values, contour_process(&tree).values);
        assert_eq!(snake.visit(two_n - 1), 0);
        assert_eq!(snake.visit(two_n), 0);
        assert_eq!(snake.endpoint(0), 0);

        for k in 0..=two_n {
            assert_eq!(snake.endpoint(k), snake.spatial_height(snake.visit(k)));
            assert_eq!(snake.endpoint_at(k as f64), snake.endpoint(k) as f64);

            let path = snake.path(k);
            assert_eq!(path.len(), snake.lifetime().values[k] as usize + 1);
            assert_eq!(path[0], snake.spatial_height(0));
            assert_eq!(*path.last().unwrap(), snake.endpoint(k));
            for (j, &v) in path.iter().enumerate() {
                assert_eq!(snake.value(k as f64, j as f64), v as f64);
            }
            if path.len() >= 2 {
                let mid = snake.value(k as f64, path.len() as f64 - 1.5);
                let want = 0.5 * (path[path.len() - 2] + path[path.len() - 1]) as f64;
                assert_eq!(mid, want);
            }
        }
        for k in 0..two_n {
            let (a, b) = (snake.path(k), snake.path(k + 1));
            let shared = a.len().min(b.len());
            assert_eq!(&a[..shared], &b[..shared], "paths branch only at the tip");
            assert!(a.len().abs_diff(b.len()) <= 1);
        }
        for k in 0..two_n {
            for &frac in &[0.25f64, 0.5] {
                let s = k as f64 + frac;
                let e = snake.endpoint(k) as f64 * (1.0 - frac)
                    + snake.endpoint(k + 1) as f64 * frac;
                assert_eq!(snake.endpoint_at(s), e);
                let cs = snake.lifetime().at(s);
                assert!((snake.value(s, cs) - e).abs() < 1e-12);
                assert_eq!(snake.value(s, cs + 5.0), snake.value(s, cs));
            }
        }
    }

    #[test]
    fn free_walk_trie_distance_matches_the_snake_metric() {
        let mut rng = replicate_rng(132, 0);
        for &n in &[1usize, 2, 3, 8, 40, 120, 200] {
            let tree = if n == 1 {
                enumerate_trees(1).pop().unwrap()
            } else {
                geometric_tree(n, &mut rng)
            };
            let hbrw = sample_heights(tree, true, &mut rng);
            let trie = free_range(&hbrw, &mut rng);
            let snake = spatial_contour(&hbrw);
            assert_eq!(contour_identity_check(&snake, &trie), 0, "n = {}", n);
            let relabeled = DiscreteSnake::from_trie(snake.tree(), &trie);
            assert_eq!(relabeled.endpoints(), snake.endpoints());
        }
    }

    #[test]
    fn contracted_distances_drop_by_even_amounts() {
        let mut rng = replicate_rng(133, 0);
        let tree = geometric_tree(250, &mut rng);
        let hbrw = sample_heights(tree, true, &mut rng);
        let free = free_range(&hbrw, &mut rng);
        let snake = spatial_contour(&hbrw);
        for &b in &[2u32, 3] {
            let contracted = contract_to_b(&free, b, &mut rng);
            let gap = contraction_gap_check(&snake, &contracted);
            assert!(gap.consistent, "b = {}", b);
            if b == 2 {
                assert!(gap.max_gap > 0, "two letters must merge something here");
            }
        }
    }

    #[test]
    fn measure_report_is_degenerate_on_a_single_vertex() {
        let mut rng = replicate_rng(134, 0);
        let tree = enumerate_trees(1).pop().unwrap();
        let hbrw = sample_heights(tree, true, &mut rng);
        let trie = free_range(&hbrw, &mut rng);
        let snake = spatial_contour(&hbrw);
        let r = measure_comparisons(&snake, &trie);
        assert_eq!(r.hausdorff_gap, 0.0);
        assert_eq!(r.step_bound_interp, 0.0);
        assert_eq!(r.step_bound_occ, 0.0);
        assert!(r.double_count_ok);
        assert_eq!(r.exact_cont_vs_occ, Some(0.0));
        assert_eq!(r.exact_interp_vs_cont, Some(0.0));
        assert_eq!(r.exact_interp_vs_occ, Some(0.0));
        assert!(r.within_bounds());
    }

    #[test]
    fn occupation_bounds_hold_exactly_on_tiny_trees() {
        let mut rng = replicate_rng(135, 0);
        let mut checked = 0usize;
        for n in 2..=6usize {
            for tree in enumerate_trees(n) {
                let trie = direct_range_b(&tree, 2, &mut rng);
                let snake = DiscreteSnake::from_trie(&tree, &trie);
                let r = measure_comparisons(&snake, &trie);
                assert!(r.exact_cont_vs_occ.is_some(), "n = {} fits the cap", n);
                assert!(r.within_bounds(), "n = {}: {:?}", n, r);
                checked += 1;
            }
        }
        assert_eq!(checked, 1 + 2 + 5 + 14 + 42);
        for &n in &[7usize, 8] {
            let tree = geometric_tree(n, &mut rng);
            let trie = direct_range_b(&tree, 2, &mut rng);
            let snake = DiscreteSnake::from_trie(&tree, &trie);
            let r = measure_comparisons(&snake, &trie);
            assert!(r.exact_cont_vs_occ.is_some());
            assert!(r.within_bounds(), "n = {}: {:?}", n, r);
        }
        let tree = geometric_tree(7, &mut rng);
        let hbrw = sample_heights(tree, true, &mut rng);
        let trie = free_range(&hbrw, &mut rng);
        let snake = spatial_contour(&hbrw);
        let r = measure_comparisons(&snake, &trie);
        assert!(r.exact_cont_vs_occ.is_some());
        assert!(r.within_bounds(), "{:?}", r);
    }

    #[test]
    fn occupation_couplings_scale_to_larger_trees() {
        let mut rng = replicate_rng(136, 0);
        let tree = geometric_tree(1000, &mut rng);
        let hbrw = sample_heights(tree.clone(), true, &mut rng);
        let free = free_range(&hbrw, &mut rng);
        let direct = direct_range_b(&tree, 3, &mut rng);
        for trie in [&free, &direct] {
            let snake = DiscreteSnake::from_trie(&tree, trie);
            let r = measure_comparisons(&snake, trie);
            assert!(r.exact_cont_vs_occ.is_none(), "too many positions to enumerate");
            assert_eq!(r.hausdorff_gap, 0.5);
            assert!(r.double_count_ok);
            assert!(r.within_bounds(), "{:?}", r);
        }
    }

    #[test]
    fn range_growth_deviation_inequality_holds_on_samples() {
        let mut rng = replicate_rng(137, 0);
        for &n in &[50usize, 300] {
            let tree = geometric_tree(n, &mut rng);
            let hbrw = sample_heights(tree.clone(), true, &mut rng);
            let free = free_range(&hbrw, &mut rng);
            let direct = direct_range_b(&tree, 2, &mut rng);
            for trie in [&free, &direct] {
                let snake = DiscreteSnake::from_trie(&tree, trie);
                for &c in &[0.1f64, 0.3, 0.7] {
                    let r = range_deviation_check(&snake, trie, c);
                    assert!(r.deviation_ok, "n = {}, c = {}: {:?}", n, c, r);
                    assert!(r.coupling_ok, "n = {}, c = {}: {:?}", n, c, r);
                    assert!(r.beta >= 1.0, "the first slot always deviates by one");
                }
            }
        }
    }

    #[test]
    fn range_growth_exact_prokhorov_on_tiny_trees() {
        let mut rng = replicate_rng(138, 0);
        for n in 2..=6usize {
            for tree in enumerate_trees(n) {
                let trie = direct_range_b(&tree, 2, &mut rng);
                let snake = DiscreteSnake::from_trie(&tree, &trie);
                let r = range_deviation_check(&snake, &trie, 0.4);
                assert_eq!(r.exact_ok, Some(true), "n = {}: {:?}", n, r);
                assert!(r.exact_prokhorov.unwrap() >= 0.0);
            }
        }

        let tree = enumerate_trees(1).pop().unwrap();
        let trie = direct_range_b(&tree, 2, &mut rng);
        let snake = DiscreteSnake::from_trie(&tree, &trie);
        for &c in &[0.2f64, 1.0] {
            let r = range_deviation_check(&snake, &trie, c);
            assert_eq!(r.alpha, (1.0 - 2.0 * c).abs());
            let beta = 1.0f64.max((1.0 - c).abs()).max((1.0 - 2.0 * c).abs());
            assert_eq!(r.beta, beta);
            assert!(r.deviation_ok);
            assert_eq!(r.coupling_disp, 0);
            assert_eq!(r.exact_prokhorov, Some(0.0));
        }
    }

    #[test]
    fn rotated_bridge_is_a_nonnegative_excursion() {
        let mut rng = replicate_rng(139, 0);
        for &m in &[2usize, 5, 200] {
            for _ in 0..20 {
                let e = brownian_excursion(m, &mut rng);
                assert_eq!(e.len(), m + 1);
                assert_eq!(e[0], 0.0);
                assert_eq!(e[m], 0.0);
                assert!(e[1..m].iter().all(|&x| x > 0.0));
            }
        }
    }

    #[test]
    fn excursion_marginal_matches_the_conditioned_gw_oracle() {
        let mut rng = replicate_rng(140, 0);
        let reps = 2000usize;
        let mu = OffspringDistribution::poisson();
        let mut bridge = Vec::with_capacity(reps);
        let mut gw = Vec::with_capacity(reps);
        for _ in 0..reps {
            bridge.push(brownian_excursion(1000, &mut rng)[500]);
            let grid = gw_excursion_grid(&mu, 8000, 2, 10_000, &mut rng).unwrap();
            gw.push(grid[1]);
        }
        let ks = ks_two_sample(&bridge, &gw);
        assert!(
            ks.p_value > 0.01,
            "midpoint marginal: D = {}, p = {}",
            ks.statistic,
            ks.p_value
        );
    }

    #[test]
    fn excursion_is_time_reversal_symmetric() {
        let mut rng = replicate_rng(141, 0);
        let reps = 1800usize;
        let early: Vec<f64> = (0..reps)
            .map(|_| brownian_excursion(400, &mut rng)[100])
            .collect();
        let late: Vec<f64> = (0..reps)
            .map(|_| brownian_excursion(400, &mut rng)[300])
            .collect();
        let ks = ks_two_sample(&early, &late);
        assert!(
            ks.p_value > 0.01,
            "s = 0.25 vs s = 0.75: D = {}, p = {}",
            ks.statistic,
            ks.p_value
        );
    }

    #[test]
    fn snake_endpoints_have_the_tree_covariance() {
        let mut rng = replicate_rng(142, 0);
        let h = vec![
            0.0, 0.12, 0.3, 0.42, 0.2, 0.34, 0.5, 0.44, 0.26, 0.1, 0.22, 0.38, 0.46, 0.3,
            0.18, 0.32, 0.4, 0.24, 0.36, 0.14, 0.0,
        ];
        let dr: f64 = 1.0 / 400.0;
        let idx = [2usize, 6, 10, 13, 18];
        let reps = 10_000usize;

        let len = |i: usize| (h[i] / dr).floor() as usize + 1;
        let theory = |i: usize, j: usize| -> f64 {
            let (lo, hi) = (idx[i].min(idx[j]), idx[i].max(idx[j]));
            let shared = (lo..=hi).map(len).min().unwrap();
            dr * (shared - 1) as f64
        };

        let mut prod = [[0.0f64; 5]; 5];
        let mut sq_gap = 0.0f64;
        for _ in 0..reps {
            let snake = brownian_snake_given_h(&h, 1.0, dr, &mut rng);
            assert_eq!(snake.endpoint(0), 0.0);
            let w: Vec<f64> = idx.iter().map(|&i| snake.endpoint(i)).collect();
            for a in 0..5 {
                for b in a..5 {
                    prod[a][b] += w[a] * w[b];
                }
            }
            sq_gap += (w[1] - w[3]) * (w[1] - w[3]);
        }

        for a in 0..5 {
            for b in a..5 {
                let emp = prod[a][b] / reps as f64;
                let want = theory(a, b);
                let var = theory(a, a) * theory(b, b) + want * want;
                let se = (var / reps as f64).sqrt();
                assert!(
                    (emp - want).abs() <= 4.0 * se,
                    "cov({}, {}): emp {} vs {} (se {})",
                    idx[a],
                    idx[b],
                    emp,
                    want,
                    se
                );
            }
        }

        let d = theory(1, 1) + theory(3, 3) - 2.0 * theory(1, 3);
        let emp = sq_gap / reps as f64;
        let se = d * (2.0 / reps as f64).sqrt();
        assert!(
            (emp - d).abs() <= 4.0 * se,
            "squared increment: emp {} vs {} (se {})",
            emp,
            d,
            se
        );
    }

    #[test]
    fn snake_construction_is_exact_and_reflected_cactus_is_rooted() {
        let mut rng = replicate_rng(143, 0);
        let h = brownian_excursion(24, &mut rng);
        let dr = default_dr(1.0, 24);
        let snake = brownian_snake_given_h(&h, 1.0, dr, &mut rng);
        assert_eq!(snake.endpoint(0), 0.0);
        assert_eq!(snake.grid_size(), 24);
        assert!(snake.max_level_step().is_finite() && snake.max_level_step() > 0.0);

        let cact = cactus_metric(&snake).expect("construction satisfies the snake property");
        assert!(four_point_check(&cact, 1e-9).is_empty());
        for i in 0..=24 {
            for j in i..=24 {
                assert_eq!(snake.pair_distance(i, j), cact.at(i, j));
            }
        }

        let refl = snake.reflected();
        for i in 0..=24 {
            let (p, q) = (snake.path(i), refl.path(i));
            assert!(p.iter().zip(q).all(|(&a, &b)| b == a.abs()));
        }
        let rcact = cactus_metric(&refl).expect("reflection keeps shared prefixes");
        assert!(four_point_check(&rcact, 1e-9).is_empty());
        for i in 0..=24 {
            assert_eq!(rcact.at(0, i), refl.endpoint(i), "rooted at time zero");
        }
    }

    #[test]
    fn rescaling_the_snake_rescales_the_cactus() {
        let mut rng = replicate_rng(144, 0);
        let h = brownian_excursion(16, &mut rng);
        let snake = brownian_snake_given_h(&h, 1.0, default_dr(1.0, 16), &mut rng);
        let base = cactus_metric(&snake).unwrap();
        for &(alpha, a) in &[(0.5f64, 2.0f64), (4.0, 0.5)] {
            let scaled = cactus_metric(&snake.rescale(alpha, a)).unwrap();
            let pushed = base.rescale(a, alpha);
            assert_eq!(scaled.sup_distance(&pushed).unwrap(), 0.0);
        }
    }

    #[test]
    fn path_oscillation_is_controlled_by_time_separation() {
        let mut rng = replicate_rng(145, 0);
        let m = 64usize;
        let h: Vec<f64> = (0..=m).map(|i| i.min(m - i) as f64 / m as f64).collect();
        let dr = 1.0 / 512.0;
        let reps = 1500usize;
        let pairs = [(16usize, 18usize), (16, 24), (16, 48)];
        let mut sup_sq = [0.0f64; 3];
        for _ in 0..reps {
            let snake = brownian_snake_given_h(&h, 1.0, dr, &mut rng);
            for (slot, &(i, j)) in pairs.iter().enumerate() {
                let (p, q) = (snake.path(i), snake.path(j));
                let mut worst = 0.0f64;
                for l in 0..p.len().max(q.len()) {
                    let a = p[l.min(p.len() - 1)];
                    let b = q[l.min(q.len() - 1)];
                    worst = worst.max((a - b) * (a - b));
                }
                sup_sq[slot] += worst;
            }
        }
        for (slot, &(i, j)) in pairs.iter().enumerate() {
            let gap = (j - i) as f64 / m as f64;
            let mean = sup_sq[slot] / reps as f64;
            assert!(
                mean <= 16.0 * gap,
                "|s - s'| = {}: mean sup^2 = {}",
                gap,
                mean
            );
        }
    }

    #[test]
    fn lifetime_grids_follow_the_contour() {
        let mut rng = replicate_rng(146, 0);
        let tree = geometric_tree(500, &mut rng);
        let a_n = scaling_a_n(&OffspringDistribution::geometric(), 500);
        let g = lifetime_grid(&tree, a_n, 100);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 0.0);
        assert!(g.iter().all(|&x| x >= 0.0));
        let contour = contour_process(&tree);
        for &i in &[1usize, 37, 50, 99] {
            assert_eq!(g[i], contour.at(1000.0 * i as f64 / 100.0) / a_n);
        }

        let grid = gw_excursion_grid(
            &OffspringDistribution::poisson(),
            200,
            40,
            10_000,
            &mut rng,
        )
        .unwrap();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[40], 0.0);
    }

    #[test]
    fn csv_serialization_of_grid_snakes() {
        let mut rng = replicate_rng(147, 0);
        let h = vec![0.0, 0.5, 0.25, 0.0];
        let snake = brownian_snake_given_h(&h, 1.5, 0.1, &mut rng);
        let csv = snake.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2 + 4);
        assert_eq!(lines[0], "# snake m=3, zeta=1.5, dr=0.1");
        assert_eq!(lines[1], "s,h,w_hat");
        let fields: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.5);
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.5);
        assert_eq!(fields[2].parse::<f64>().unwrap(), snake.endpoint(1));
    }
}
