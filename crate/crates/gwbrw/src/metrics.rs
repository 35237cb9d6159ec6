//! Pseudo-metrics sampled on uniform time grids: tree metrics coded by a
//! nonnegative function, snake metrics built from per-vertex values or from
//! stored paths, four-point scans, moduli of continuity, a sup-norm upper
//! bound on the pointed Gromov-Hausdorff-Prokhorov distance, brute-force
//! Prokhorov distance on small measured spaces, and quotient-graph
//! extraction.
//!
//! A [`GridPseudoMetric`] holds the full (m+1) x (m+1) distance matrix for
//! the grid times s_i = zeta * i / m. Every row only reads the shared
//! range-minimum table, so builders can fill rows independently; matrices
//! are immutable once constructed.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tree_core::{contour_vertices, OrderedTree};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("invalid metric data: {0}")]
    Invalid(&'static str),
    #[error("grid mismatch: m={0}, zeta={1} vs m={2}, zeta={3}")]
    GridMismatch(usize, f64, usize, f64),
    #[error("brute-force Prokhorov is limited to {max} points, got {got}")]
    TooManyPoints { got: usize, max: usize },
    #[error("the two measures live on different ground spaces")]
    GroundMismatch,
    #[error("snake property fails between grid points {left} and {right}: paths differ by {gap:e} at level index {level}")]
    SnakeProperty {
        left: usize,
        right: usize,
        level: usize,
        gap: f64,
    },
}

/// rows[k][i] = min of xs[i .. i + 2^k]; queries overlap two blocks, which is
/// harmless because min is idempotent.
struct SparseTable {
    rows: Vec<Vec<f64>>,
}

impl SparseTable {
    fn new(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 1, "range minima need at least one value");
        let mut rows = vec![xs.to_vec()];
        let mut width = 1;
        while 2 * width <= n {
            let prev = rows.last().unwrap();
            let row: Vec<f64> = (0..=n - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            rows.push(row);
            width *= 2;
        }
        SparseTable { rows }
    }

    /// Minimum of xs[i..=j].
    fn min(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j && j < self.rows[0].len());
        let k = (usize::BITS - 1 - (j - i + 1).leading_zeros()) as usize;
        let w = 1usize << k;
        self.rows[k][i].min(self.rows[k][j + 1 - w])
    }
}

/// Distances between the m+1 grid times s_i = zeta * i / m, stored as a full
/// symmetric matrix with zero diagonal. The triangle inequality is not part
/// of the construction contract; callers that need it can measure the worst
/// defect with [`GridPseudoMetric::max_triangle_violation`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridPseudoMetric {
    zeta: f64,
    m: usize,
    d: Vec<f64>,
}

impl GridPseudoMetric {
    /// Wraps an externally produced row-major matrix. Symmetry and the zero
    /// diagonal are required exactly; symmetrize before calling if the
    /// source rounds the two triangles differently.
    pub fn from_matrix(zeta: f64, m: usize, d: Vec<f64>) -> Result<Self, MetricError> {
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(MetricError::Invalid("horizon must be positive and finite"));
        }
        if m == 0 {
            return Err(MetricError::Invalid("need at least two grid points"));
        }
        let n = m + 1;
        if d.len() != n * n {
            return Err(MetricError::Invalid("matrix length is not (m+1)^2"));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(MetricError::Invalid("nonzero diagonal"));
            }
            for j in 0..i {
                let x = d[i * n + j];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(MetricError::Invalid(
                        "entries must be finite and nonnegative",
                    ));
                }
                if x != d[j * n + i] {
                    return Err(MetricError::Invalid("matrix is not symmetric"));
                }
            }
        }
        Ok(GridPseudoMetric { zeta, m, d })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// Number of grid steps m; the matrix has m+1 rows.
    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub fn n_points(&self) -> usize {
        self.m + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.zeta * i as f64 / self.m as f64
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * (self.m + 1) + j]
    }

    /// Row-major backing storage.
    pub fn matrix(&self) -> &[f64] {
        &self.d
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().fold(0.0f64, |a, &x| a.max(x))
    }

    fn check_same_grid(&self, other: &Self) -> Result<(), MetricError> {
        if self.m != other.m || self.zeta != other.zeta {
            return Err(MetricError::GridMismatch(
                self.m, self.zeta, other.m, other.zeta,
            ));
        }
        Ok(())
    }

    /// Uniform distance max |d - d'| over the shared grid.
    pub fn sup_distance(&self, other: &Self) -> Result<f64, MetricError> {
        self.check_same_grid(other)?;
        Ok(self
            .d
            .iter()
            .zip(&other.d)
            .fold(0.0f64, |a, (&x, &y)| a.max((x - y).abs())))
    }

    /// Worst triangle defect max(0, d(i,k) - d(i,j) - d(j,k)) over all
    /// triples. Cubic in the point count, so meant for validation, not for
    /// hot paths.
    pub fn max_triangle_violation(&self) -> f64 {
        let n = self.n_points();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dij = self.at(i, j);
                for k in 0..n {
                    worst = worst.max(self.at(i, k) - dij - self.at(j, k));
                }
            }
        }
        worst.max(0.0)
    }

    /// Scales distances by `a` and the horizon by `b`. On quotient spaces
    /// this is the time reparametrization s -> s/b composed with a metric
    /// dilation: the induced space carries a*d with mass b*zeta.
    pub fn rescale(&self, a: f64, b: f64) -> GridPseudoMetric {
        assert!(
            a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0,
            "scale factors must be positive"
        );
        GridPseudoMetric {
            zeta: b * self.zeta,
            m: self.m,
            d: self.d.iter().map(|&x| a * x).collect(),
        }
    }

    /// Row-major CSV; the first line is `# grid m=…, zeta=…`.
    pub fn to_csv(&self) -> String {
        let n = self.n_points();
        let mut out = format!("# grid m={}, zeta={}\n", self.m, self.zeta);
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.at(i, j));
            }
            out.push('\n');
        }
        out
    }
}

/// Pseudo-metric coded by a nonnegative grid function:
/// d(s_i, s_j) = h_i + h_j - 2 min(h_i, ..., h_j).
///
/// The matrix costs O(m^2) after the O(m log m) range-minimum table.
pub fn tree_metric(h: &[f64], zeta: f64) -> GridPseudoMetric {
    assert!(h.len() >= 2, "need at least two grid samples");
    assert!(zeta.is_finite() && zeta > 0.0, "horizon must be positive");
    assert!(
        h.iter().all(|x| x.is_finite() && *x >= 0.0),
        "coding function must be finite and nonnegative"
    );
    let n = h.len();
    let st = SparseTable::new(h);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mn = st.min(i, j);
            // Written as a sum of two nonnegative gaps so rounding can never
            // produce a negative distance.
            let v = (h[i] - mn) + (h[j] - mn);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    GridPseudoMetric { zeta, m: n - 1, d }
}

/// Jump tables over a tree: lowest common ancestors and minima of a vertex
/// value along ancestor chains, both in O(log depth) per query.
struct AncestorMinima {
    depth: Vec<u32>,
    /// up[k][v] = 2^k-th ancestor of v; the root points to itself.
    up: Vec<Vec<u32>>,
    /// mn[k][v] = min of the value over v and its next 2^k - 1 ancestors.
    mn: Vec<Vec<f64>>,
}

impl AncestorMinima {
    fn new(tree: &OrderedTree, value: &[f64]) -> Self {
        let n = tree.len();
        let depth = tree.depths();
        let mut up0 = vec![0u32; n];
        for v in 1..n {
            up0[v] = tree.parent(v).unwrap() as u32;
        }
        let mut up = vec![up0];
        let mut mn = vec![value.to_vec()];
        let maxd = *depth.iter().max().unwrap() as usize;
        let mut span = 1;
        while span <= maxd {
            let pu = up.last().unwrap();
            let pm = mn.last().unwrap();
            let mut nu = vec![0u32; n];
            let mut nm = vec![0.0f64; n];
            for v in 0..n {
                let mid = pu[v] as usize;
                nu[v] = pu[mid];
                nm[v] = pm[v].min(pm[mid]);
            }
            up.push(nu);
            mn.push(nm);
            span *= 2;
        }
        AncestorMinima { depth, up, mn }
    }

    fn lca(&self, mut u: usize, mut v: usize) -> usize {
        if self.depth[u] < self.depth[v] {
            std::mem::swap(&mut u, &mut v);
        }
        let mut diff = (self.depth[u] - self.depth[v]) as usize;
        let mut k = 0;
        while diff > 0 {
            if diff & 1 == 1 {
                u = self.up[k][u] as usize;
            }
            diff >>= 1;
            k += 1;
        }
        if u == v {
            return u;
        }
        for k in (0..self.up.len()).rev() {
            if self.up[k][u] != self.up[k][v] {
                u = self.up[k][u] as usize;
                v = self.up[k][v] as usize;
            }
        }
        self.up[0][u] as usize
    }

    /// Minimum of the value over the chain from v up to its ancestor at
    /// depth `da`, both endpoints included.
    fn chain_min(&self, v: usize, da: u32) -> f64 {
        debug_assert!(da <= self.depth[v]);
        let mut count = (self.depth[v] - da) as usize + 1;
        let mut cur = v;
        let mut acc = f64::INFINITY;
        let mut k = 0;
        while count > 0 {
            if count & 1 == 1 {
                acc = acc.min(self.mn[k][cur]);
                cur = self.up[k][cur] as usize;
            }
            count >>= 1;
            k += 1;
        }
        acc
    }
}

/// Snake metric on contour times for per-vertex endpoint values:
/// d(k1, k2) = w[v(k1)] + w[v(k2)] - 2 min of w over the tree geodesic
/// between the two visited vertices.
///
/// The grid covers the padded contour times 0..=2n (the exploration proper
/// ends at 2n-2 and the last two slots sit at the root), so the result lines
/// up index-for-index with `tree_core::contour_process`.
pub fn snake_metric_discrete(tree: &OrderedTree, w_hat: &[f64]) -> GridPseudoMetric {
    let n = tree.len();
    assert_eq!(w_hat.len(), n, "one endpoint value per vertex");
    assert!(
        w_hat.iter().all(|x| x.is_finite()),
        "endpoint values must be finite"
    );
    let mut visits = contour_vertices(tree);
    visits.push(0);
    visits.push(0);
    let anc = AncestorMinima::new(tree, w_hat);
    let g = visits.len();
    let mut d = vec![0.0; g * g];
    for i in 0..g {
        for j in i + 1..g {
            let (u, v) = (visits[i] as usize, visits[j] as usize);
            let val = if u == v {
                0.0
            } else {
                let a = anc.lca(u, v);
                let da = anc.depth[a];
                let mm = anc.chain_min(u, da).min(anc.chain_min(v, da));
                (w_hat[u] - mm) + (w_hat[v] - mm)
            };
            d[i * g + j] = val;
            d[j * g + i] = val;
        }
    }
    GridPseudoMetric {
        zeta: (g - 1) as f64,
        m: g - 1,
        d,
    }
}

/// Snake metric from stored paths: paths[i][j] = w_{s_i}(j * dr), with the
/// last sample as the endpoint, so paths[i].len() must be floor(h_i/dr) + 1.
///
/// For each pair the running lifetime minimum is taken over the grid
/// interval, then the distance is endpoint_1 + endpoint_2 - 2M with M the
/// smaller of the two path minima above that level. Agreement of the stored
/// paths below pairwise lifetime minima is checked on adjacent grid points
/// only; agreement for every pair follows by chaining through the points in
/// between.
pub fn snake_metric_grid(
    h: &[f64],
    paths: &[Vec<f64>],
    dr: f64,
    zeta: f64,
    tol: f64,
) -> Result<GridPseudoMetric, MetricError> {
    let n = h.len();
    assert!(n >= 2, "need at least two grid points");
    assert_eq!(paths.len(), n, "one stored path per grid point");
    assert!(dr.is_finite() && dr > 0.0, "level resolution must be positive");
    assert!(zeta.is_finite() && zeta > 0.0, "horizon must be positive");
    assert!(tol >= 0.0, "tolerance must be nonnegative");
    for (i, p) in paths.iter().enumerate() {
        assert!(
            h[i].is_finite() && h[i] >= 0.0,
            "lifetimes must be finite and nonnegative"
        );
        let want = (h[i] / dr).floor() as usize + 1;
        assert_eq!(
            p.len(),
            want,
            "path {i} must hold floor(h/dr)+1 = {want} samples"
        );
        assert!(
            p.iter().all(|x| x.is_finite()),
            "path samples must be finite"
        );
    }
    for i in 0..n - 1 {
        let shared = paths[i].len().min(paths[i + 1].len());
        for j in 0..shared {
            let gap = (paths[i][j] - paths[i + 1][j]).abs();
            if gap > tol {
                return Err(MetricError::SnakeProperty {
                    left: i,
                    right: i + 1,
                    level: j,
                    gap,
                });
            }
        }
    }
    // tails[i][j] = min of paths[i][j..]; lets every pair query in O(1).
    let tails: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| {
            let mut t = p.clone();
            for j in (0..p.len() - 1).rev() {
                t[j] = t[j].min(t[j + 1]);
            }
            t
        })
        .collect();
    let lev: Vec<f64> = paths.iter().map(|p| (p.len() - 1) as f64).collect();
    let st = SparseTable::new(&lev);
    let wh: Vec<f64> = paths.iter().map(|p| *p.last().unwrap()).collect();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let jm = st.min(i, j) as usize;
            let mm = tails[i][jm].min(tails[j][jm]);
            let val = (wh[i] - mm) + (wh[j] - mm);
            d[i * n + j] = val;
            d[j * n + i] = val;
        }
    }
    Ok(GridPseudoMetric { zeta, m: n - 1, d })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourPointViolation {
    pub quad: [usize; 4],
    /// Largest pairing sum minus the second largest; a tree-like matrix
    /// keeps this at zero for every quadruple.
    pub excess: f64,
}

/// Grid sizes up to this many points get the exhaustive quadruple scan.
const FOUR_POINT_EXHAUSTIVE: usize = 101;
const FOUR_POINT_SAMPLES: usize = 200_000;
const FOUR_POINT_MAX_REPORTED: usize = 10_000;

fn quad_excess(d: &GridPseudoMetric, q: [usize; 4]) -> f64 {
    let p1 = d.at(q[0], q[1]) + d.at(q[2], q[3]);
    let p2 = d.at(q[0], q[2]) + d.at(q[1], q[3]);
    let p3 = d.at(q[0], q[3]) + d.at(q[1], q[2]);
    let (mut top, mut second) = if p1 >= p2 { (p1, p2) } else { (p2, p1) };
    if p3 > top {
        second = top;
        top = p3;
    } else if p3 > second {
        second = p3;
    }
    top - second
}

/// Four-point scan: among the three ways to pair a quadruple off, the two
/// largest sums must tie (within tol). Exhaustive over all index quadruples
/// for grids of at most 101 points, a fixed-seed random sample of 200 000
/// quadruples otherwise; at most 10 000 violations are reported.
pub fn four_point_check(d: &GridPseudoMetric, tol: f64) -> Vec<FourPointViolation> {
    let n = d.n_points();
    let mut out = Vec::new();
    let record = |q: [usize; 4], out: &mut Vec<FourPointViolation>| {
        let excess = quad_excess(d, q);
        if excess > tol && out.len() < FOUR_POINT_MAX_REPORTED {
            out.push(FourPointViolation { quad: q, excess });
        }
    };
    if n <= FOUR_POINT_EXHAUSTIVE {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        record([i, j, k, l], &mut out);
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4650_4348);
        for _ in 0..FOUR_POINT_SAMPLES {
            let q = loop {
                let q = [
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                ];
                if q[0] != q[1]
                    && q[0] != q[2]
                    && q[0] != q[3]
                    && q[1] != q[2]
                    && q[1] != q[3]
                    && q[2] != q[3]
                {
                    break q;
                }
            };
            record(q, &mut out);
        }
    }
    out
}

/// q_eta: the largest distance between grid times at most eta apart.
/// Nondecreasing in eta and equal to the diameter once eta >= zeta.
pub fn modulus_q(d: &GridPseudoMetric, eta: f64) -> f64 {
    assert!(eta.is_finite() && eta > 0.0, "eta must be positive");
    let n = d.n_points();
    let m = d.grid_size();
    let span = if eta >= d.zeta() {
        m
    } else {
        ((eta * m as f64 / d.zeta()) + 1e-9).floor() as usize
    };
    let mut best = 0.0f64;
    for i in 0..n {
        let hi = (i + span).min(n - 1);
        for j in i + 1..=hi {
            best = best.max(d.at(i, j));
        }
    }
    best
}

/// Upper bound on the pointed Gromov-Hausdorff-Prokhorov distance between
/// the quotient spaces of two pseudo-metrics on the same grid: 3/2 times the
/// uniform distance, realized by the correspondence that pairs the two
/// projections of each grid time and the coupling of the induced measures
/// through the grid.
pub fn ghp_upper(d: &GridPseudoMetric, d2: &GridPseudoMetric) -> Result<f64, MetricError> {
    Ok(1.5 * d.sup_distance(d2)?)
}

/// Finitely many points carrying a symmetric zero-diagonal ground metric and
/// nonnegative masses. Total mass is arbitrary; comparisons such as
/// [`prokhorov_bruteforce`] require bitwise-equal ground matrices, so derive
/// related measures with [`FiniteMeasuredSpace::reweight`] or
/// [`FiniteMeasuredSpace::rescale`] instead of rebuilding from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasuredSpace {
    k: usize,
    d: Vec<f64>,
    weights: Vec<f64>,
}

impl FiniteMeasuredSpace {
    pub fn new(d: Vec<f64>, weights: Vec<f64>) -> Result<Self, MetricError> {
        let k = weights.len();
        if k == 0 {
            return Err(MetricError::Invalid("need at least one point"));
        }
        if d.len() != k * k {
            return Err(MetricError::Invalid("matrix length is not k^2"));
        }
        for i in 0..k {
            if d[i * k + i] != 0.0 {
                return Err(MetricError::Invalid("nonzero diagonal"));
            }
            for j in 0..i {
                let x = d[i * k + j];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(MetricError::Invalid(
                        "entries must be finite and nonnegative",
                    ));
                }
                if x != d[j * k + i] {
                    return Err(MetricError::Invalid("matrix is not symmetric"));
                }
            }
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(MetricError::Invalid(
                "weights must be finite and nonnegative",
            ));
        }
        Ok(FiniteMeasuredSpace { k, d, weights })
    }

    /// Euclidean helper: points in the plane with the given masses.
    pub fn from_points(points: &[[f64; 2]], weights: Vec<f64>) -> Result<Self, MetricError> {
        if points.len() != weights.len() {
            return Err(MetricError::Invalid("one weight per point"));
        }
        let k = points.len();
        let mut d = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..i {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                let v = (dx * dx + dy * dy).sqrt();
                d[i * k + j] = v;
                d[j * k + i] = v;
            }
        }
        FiniteMeasuredSpace::new(d, weights)
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.k + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.d.iter().fold(0.0f64, |a, &x| a.max(x))
    }

    /// Same ground points, new masses.
    pub fn reweight(&self, weights: Vec<f64>) -> Result<Self, MetricError> {
        if weights.len() != self.k {
            return Err(MetricError::Invalid("one weight per point"));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(MetricError::Invalid(
                "weights must be finite and nonnegative",
            ));
        }
        Ok(FiniteMeasuredSpace {
            k: self.k,
            d: self.d.clone(),
            weights,
        })
    }

    /// Dilates the metric by `a` and the masses by `b`.
    pub fn rescale(&self, a: f64, b: f64) -> FiniteMeasuredSpace {
        assert!(
            a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0,
            "scale factors must be positive"
        );
        FiniteMeasuredSpace {
            k: self.k,
            d: self.d.iter().map(|&x| a * x).collect(),
            weights: self.weights.iter().map(|&w| b * w).collect(),
        }
    }
}

pub const PROKHOROV_MAX_POINTS: usize = 15;

fn subset_sums(w: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << w.len()];
    for s in 1..sums.len() {
        let low = s.trailing_zeros() as usize;
        sums[s] = sums[s & (s - 1)] + w[low];
    }
    sums
}

/// Prokhorov distance between two mass assignments on the same ground
/// points: the least eps such that mu(K) <= nu(K^eps) + eps and
/// nu(K) <= mu(K^eps) + eps for every subset K, where K^eps is the closed
/// eps-enlargement. All 2^k subsets are checked at each step of a bisection
/// on eps, so the result is exact up to 1e-12. Limited to 15 points.
pub fn prokhorov_bruteforce(
    mu: &FiniteMeasuredSpace,
    nu: &FiniteMeasuredSpace,
) -> Result<f64, MetricError> {
    if mu.k != nu.k || mu.d != nu.d {
        return Err(MetricError::GroundMismatch);
    }
    let k = mu.k;
    if k > PROKHOROV_MAX_POINTS {
        return Err(MetricError::TooManyPoints {
            got: k,
            max: PROKHOROV_MAX_POINTS,
        });
    }
    let full = 1usize << k;
    let msums = subset_sums(&mu.weights);
    let nsums = subset_sums(&nu.weights);
    let ok = |eps: f64| -> bool {
        let ball: Vec<u32> = (0..k)
            .map(|i| {
                let mut mask = 0u32;
                for j in 0..k {
                    if mu.d[i * k + j] <= eps {
                        mask |= 1 << j;
                    }
                }
                mask
            })
            .collect();
        // enl[S] = union of closed balls around the points of S.
        let mut enl = vec![0u32; full];
        for s in 1..full {
            let low = s.trailing_zeros() as usize;
            enl[s] = enl[s & (s - 1)] | ball[low];
        }
        for s in 1..full {
            let e = enl[s] as usize;
            if msums[s] > nsums[e] + eps || nsums[s] > msums[e] + eps {
                return false;
            }
        }
        true
    };
    if ok(0.0) {
        return Ok(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = mu.diameter() + (msums[full - 1] - nsums[full - 1]).abs() + 1.0;
    debug_assert!(ok(hi));
    for _ in 0..100 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Grid points glued at pseudo-distance <= tol, with the chain adjacency
/// inherited from consecutive grid times. Classes are numbered by first
/// appearance along the grid, so time 0 always lands in class 0.
#[derive(Clone, Debug)]
pub struct QuotientGraph {
    pub class_of: Vec<u32>,
    /// Sorted, deduplicated neighbour classes per class.
    pub neighbours: Vec<Vec<u32>>,
}

impl QuotientGraph {
    pub fn class_count(&self) -> usize {
        self.neighbours.len()
    }

    /// Counts of classes by degree; entry d holds how many classes have
    /// exactly d distinct neighbours.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let maxdeg = self.neighbours.iter().map(Vec::len).max().unwrap_or(0);
        let mut hist = vec![0usize; maxdeg + 1];
        for nb in &self.neighbours {
            hist[nb.len()] += 1;
        }
        hist
    }

    pub fn max_degree(&self) -> usize {
        self.neighbours.iter().map(Vec::len).max().unwrap_or(0)
    }
}

fn uf_find(uf: &mut [u32], mut x: u32) -> u32 {
    while uf[x as usize] != x {
        let g = uf[uf[x as usize] as usize];
        uf[x as usize] = g;
        x = g;
    }
    x
}

/// Union-find pass over all grid pairs with d <= tol, then the surviving
/// chain adjacency. Degrees of the result approximate branch degrees of the
/// quotient space; they depend on the grid and the tolerance, so treat them
/// as exploratory statistics rather than identified quantities.
pub fn quotient_graph(d: &GridPseudoMetric, tol: f64) -> QuotientGraph {
    assert!(tol >= 0.0, "tolerance must be nonnegative");
    let n = d.n_points();
    let mut uf: Vec<u32> = (0..n as u32).collect();
    for i in 0..n {
        for j in i + 1..n {
            if d.at(i, j) <= tol {
                let (ri, rj) = (uf_find(&mut uf, i as u32), uf_find(&mut uf, j as u32));
                if ri != rj {
                    uf[rj as usize] = ri;
                }
            }
        }
    }
    let mut label = vec![u32::MAX; n];
    let mut class_of = vec![0u32; n];
    let mut count = 0u32;
    for i in 0..n {
        let r = uf_find(&mut uf, i as u32) as usize;
        if label[r] == u32::MAX {
            label[r] = count;
            count += 1;
        }
        class_of[i] = label[r];
    }
    let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); count as usize];
    for i in 0..n - 1 {
        let (a, b) = (class_of[i], class_of[i + 1]);
        if a != b {
            neighbours[a as usize].push(b);
            neighbours[b as usize].push(a);
        }
    }
    for nb in &mut neighbours {
        nb.sort_unstable();
        nb.dedup();
    }
    QuotientGraph {
        class_of,
        neighbours,
    }
}

/// Default gluing tolerance for [`quotient_graph`]: twice the one-step grid
/// modulus, so that genuine identifications survive discretization noise.
pub fn default_quotient_tol(d: &GridPseudoMetric) -> f64 {
    2.0 * modulus_q(d, d.zeta() / d.grid_size() as f64)
}
