//! Coupling between the two labelled walks of [`brw`](crate::brw): the same
//! +-1 height increments drive an unreflected walk, whose words extend an
//! infinite ancestor word below the root, and its reflection at 0. Inside
//! every excursion above the running lineage minimum the two label processes
//! spend the same letters, so they trace identical relative word trees and
//! differ only in where each excursion is anchored: the unreflected walk
//! hangs it on the ancestor word at the current record depth, the reflected
//! walk restarts from the empty word, one fresh letter above it when the
//! record depth is odd. The visited-position counts of the two walks then
//! stay within the number of low reflected positions of each other, except
//! on an event whose probability decays geometrically in the cutoff.

use rand::Rng;

use crate::brw::{sample_heights, HeightBRW, RangeProfile};
use crate::tree_core::OrderedTree;
use crate::walk_estimates::DeepTrie;

/// The shift that turns a running minimum into a reflection offset: 0 at 0,
/// otherwise the smallest even integer >= m.
pub fn reflection_shift(m: i64) -> i64 {
    assert!(m >= 0, "reflection shift of a negative argument");
    m + (m & 1)
}

/// Reflects a +-1 path started at 0: h+_n = h_n + shift(-I_n) with I_n the
/// running minimum, which collapses to h_n - I_n + 1 when I_n is odd and
/// h_n - I_n when it is even. The result is a path of a walk reflected at 0:
/// nonnegative, and every step out of 0 goes up.
pub fn reflect_path(h: &[i64]) -> Vec<i64> {
    assert!(!h.is_empty() && h[0] == 0, "path must start at 0");
    assert!(
        h.windows(2).all(|w| (w[1] - w[0]).abs() == 1),
        "path increments must be +-1"
    );
    let mut inf = 0i64;
    h.iter()
        .map(|&x| {
            inf = inf.min(x);
            x + reflection_shift(-inf)
        })
        .collect()
}

/// Vertexwise reflection of a height process: I_u is the minimum of h along
/// the ancestor path down to u, and h+_u = h_u + shift(-I_u). When the input
/// heights came from the unreflected kernel the output is distributed as a
/// directly sampled reflected height process.
pub fn reflect_brw(hbrw: &HeightBRW) -> HeightBRW {
    let minima = hbrw.lineage_minima();
    let heights = hbrw
        .heights
        .iter()
        .zip(&minima)
        .map(|(&h, &i)| h + reflection_shift(-i))
        .collect();
    HeightBRW {
        tree: hbrw.tree.clone(),
        heights,
        reflected: true,
    }
}

/// One realization of the coupled pair of labelled walks on a common tree:
/// the unreflected heights, their reflection, the lineage minima, the record
/// vertices grouped by depth, and both visited-position profiles.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub tree: OrderedTree,
    /// Unreflected heights h_u, root at 0.
    pub heights: Vec<i64>,
    /// Reflected heights h+_u = h_u + shift(-I_u).
    pub reflected_heights: Vec<i64>,
    /// I_u, the minimum of h along the ancestor path.
    pub lineage_minima: Vec<i64>,
    /// `cut_sets[p]` lists the vertices where the lineage minimum first
    /// reaches -p (the excursion roots); `cut_sets[0]` is the tree root
    /// alone, and since records descend one level at a time no set below
    /// the deepest one is empty.
    pub cut_sets: Vec<Vec<u32>>,
    /// Distinct positions of the unreflected walk among the first k
    /// vertices, k = 1..n.
    pub free_profile: RangeProfile,
    /// The same count for the reflected walk.
    pub reflected_profile: RangeProfile,
}

impl CoupledPair {
    /// Checks every stored relation: +-1 increments, minima, the vertexwise
    /// reflection identity, nonnegativity, the record structure of the cut
    /// sets and the validity of both profiles.
    pub fn validate(&self) -> bool {
        let n = self.tree.len();
        if self.heights.len() != n
            || self.reflected_heights.len() != n
            || self.lineage_minima.len() != n
            || self.heights[0] != 0
        {
            return false;
        }
        for v in 0..n {
            let (h, i, hp) = (
                self.heights[v],
                self.lineage_minima[v],
                self.reflected_heights[v],
            );
            if i > 0 || hp != h + reflection_shift(-i) || hp < 0 {
                return false;
            }
            if let Some(p) = self.tree.parent(v) {
                if (h - self.heights[p]).abs() != 1
                    || i != self.lineage_minima[p].min(h)
                {
                    return false;
                }
            }
        }
        let deepest = self.lineage_minima.iter().min().copied().unwrap_or(0);
        if self.cut_sets.len() as i64 != 1 - deepest || self.cut_sets[0] != [0] {
            return false;
        }
        let mut listed = 0usize;
        for (p, set) in self.cut_sets.iter().enumerate() {
            if set.is_empty() {
                return false;
            }
            for &u in set {
                let u = u as usize;
                if self.heights[u] != -(p as i64) || self.lineage_minima[u] != -(p as i64) {
                    return false;
                }
                match self.tree.parent(u) {
                    Some(par) => {
                        if self.lineage_minima[par] != 1 - p as i64 {
                            return false;
                        }
                    }
                    None => {
                        if p != 0 {
                            return false;
                        }
                    }
                }
                listed += 1;
            }
        }
        let records = (0..n)
            .filter(|&v| match self.tree.parent(v) {
                Some(p) => self.lineage_minima[v] < self.lineage_minima[p],
                None => true,
            })
            .count();
        listed == records
            && self.free_profile.r.len() == n
            && self.reflected_profile.r.len() == n
            && self.free_profile.validate()
            && self.reflected_profile.validate()
    }
}

/// How far apart the two visited-position counts got, against the count the
/// coupling promises to stay under.
#[derive(Clone, Copy, Debug)]
pub struct CouplingReport {
    pub cutoff: u32,
    /// max over k of |#{positions of the first k vertices, unreflected} -
    /// #{same, reflected}|.
    pub max_discrepancy: u32,
    /// #{v : reflected height of v <= cutoff + 1}.
    pub comparison_count: u32,
    /// Whether the discrepancy exceeded the comparison count somewhere.
    pub violated: bool,
    /// 2 b^-cutoff (#t)^3, capped at 1: violations are rarer than this.
    pub probability_bound: f64,
}

struct CoupledTries {
    free: DeepTrie,
    reflected: DeepTrie,
    free_nodes: Vec<u32>,
    reflected_nodes: Vec<u32>,
}

/// Walks both label processes in one pass. Up edges spend one shared letter
/// on both words. Down edges pop both words, except when the lineage
/// minimum sets a new record: the unreflected word then pops into the
/// ancestor word (the trie grows a fresh ancestor the first time each
/// record depth is reached, and the letter joining it stays unrevealed
/// until an up-step forces the comparison), while the reflected word
/// restarts at the root, one fresh letter above it on odd record depths.
fn build_coupled<R: Rng + ?Sized>(
    hbrw: &HeightBRW,
    minima: &[i64],
    b: u32,
    rng: &mut R,
) -> CoupledTries {
    let n = hbrw.len();
    let h = &hbrw.heights;
    let mut free = DeepTrie::new();
    let mut reflected = DeepTrie::new();
    let mut free_nodes = vec![free.root(); n];
    let mut reflected_nodes = vec![reflected.root(); n];
    for v in 1..n {
        let p = hbrw.tree.parent(v).expect("non-root");
        if h[v] == h[p] + 1 {
            let letter = rng.gen_range(1..=b);
            free_nodes[v] = free.ascend(free_nodes[p], letter, b, rng);
            reflected_nodes[v] = reflected.ascend(reflected_nodes[p], letter, b, rng);
        } else {
            free_nodes[v] = free.descend(free_nodes[p]);
            reflected_nodes[v] = if minima[v] < minima[p] && minima[v] % 2 != 0 {
                debug_assert_eq!(reflected.depth(reflected_nodes[p]), 0);
                let fresh = rng.gen_range(1..=b);
                reflected.ascend(reflected_nodes[p], fresh, b, rng)
            } else {
                debug_assert!(reflected.depth(reflected_nodes[p]) >= 1);
                reflected.descend(reflected_nodes[p])
            };
        }
        debug_assert_eq!(free.depth(free_nodes[v]), h[v]);
        debug_assert_eq!(
            reflected.depth(reflected_nodes[v]),
            h[v] + reflection_shift(-minima[v])
        );
    }
    CoupledTries {
        free,
        reflected,
        free_nodes,
        reflected_nodes,
    }
}

fn visit_profile(nodes: &[u32], n_positions: usize) -> RangeProfile {
    let mut seen = vec![false; n_positions];
    let mut count = 0u32;
    let mut r = Vec::with_capacity(nodes.len());
    for &x in nodes {
        if !seen[x as usize] {
            seen[x as usize] = true;
            count += 1;
        }
        r.push(count);
    }
    RangeProfile { r }
}

/// Runs the coupling over given unreflected heights and reports how the two
/// range profiles compare. The bound reported is against the count of
/// vertices whose reflected position sits at height <= cutoff + 1.
pub fn coupled_ranges_with_heights<R: Rng + ?Sized>(
    hbrw: &HeightBRW,
    b: u32,
    cutoff: u32,
    rng: &mut R,
) -> (CoupledPair, CouplingReport) {
    assert!(b >= 2, "at least two letters");
    assert!(cutoff >= 1, "cutoff must be positive");
    assert!(!hbrw.reflected, "the coupling starts from unreflected heights");
    let n = hbrw.len();
    assert_eq!(hbrw.heights[0], 0, "root height must be 0");
    for v in 1..n {
        let p = hbrw.tree.parent(v).expect("non-root");
        assert_eq!(
            (hbrw.heights[v] - hbrw.heights[p]).abs(),
            1,
            "heights must move by one per edge"
        );
    }
    let minima = hbrw.lineage_minima();
    let tries = build_coupled(hbrw, &minima, b, rng);

    let reflected_heights: Vec<i64> = hbrw
        .heights
        .iter()
        .zip(&minima)
        .map(|(&h, &i)| h + reflection_shift(-i))
        .collect();
    let deepest = minima.iter().min().copied().unwrap_or(0);
    let mut cut_sets = vec![Vec::new(); (1 - deepest) as usize];
    cut_sets[0].push(0u32);
    for v in 1..n {
        let p = hbrw.tree.parent(v).expect("non-root");
        if minima[v] < minima[p] {
            cut_sets[(-minima[v]) as usize].push(v as u32);
        }
    }
    let free_profile = visit_profile(&tries.free_nodes, tries.free.len());
    let reflected_profile = visit_profile(&tries.reflected_nodes, tries.reflected.len());

    let max_discrepancy = free_profile
        .r
        .iter()
        .zip(&reflected_profile.r)
        .map(|(&a, &b)| a.abs_diff(b))
        .max()
        .unwrap_or(0);
    let comparison_count = reflected_heights
        .iter()
        .filter(|&&x| x <= i64::from(cutoff) + 1)
        .count() as u32;
    let probability_bound =
        (2.0 * (b as f64).powi(-(cutoff as i32)) * (n as f64).powi(3)).min(1.0);
    let report = CouplingReport {
        cutoff,
        max_discrepancy,
        comparison_count,
        violated: max_discrepancy > comparison_count,
        probability_bound,
    };
    let pair = CoupledPair {
        tree: hbrw.tree.clone(),
        heights: hbrw.heights.clone(),
        reflected_heights,
        lineage_minima: minima,
        cut_sets,
        free_profile,
        reflected_profile,
    };
    (pair, report)
}

/// Samples unreflected heights on the tree and runs the coupling.
pub fn coupled_ranges<R: Rng + ?Sized>(
    tree: &OrderedTree,
    b: u32,
    cutoff: u32,
    rng: &mut R,
) -> (CoupledPair, CouplingReport) {
    let hbrw = sample_heights(tree.clone(), false, rng);
    coupled_ranges_with_heights(&hbrw, b, cutoff, rng)
}
