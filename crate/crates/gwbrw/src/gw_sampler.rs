//! Critical offspring distributions, exact sampling of Galton-Watson trees
//! (free and conditioned on total size), spine trees with truncated infinite
//! ancestor line, and the height-scaling sequence a_n.
//!
//! Criticality (mean exactly 1) and aperiodicity are enforced at
//! construction; every sampler is exact in law, no truncation or
//! renormalization anywhere.

use std::sync::{Arc, RwLock};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree_core::{OrderedTree, PointedTree};

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("gamma must lie strictly inside (1, 2), got {0}")]
    GammaOutOfRange(f64),
    #[error("table pmf does not sum to 1 (off by {0:e})")]
    NotNormalized(f64),
    #[error("table pmf is not critical (mean off by {0:e})")]
    NotCritical(f64),
    #[error("offspring support is periodic (gcd of support gaps = {0})")]
    Periodic(u32),
    #[error("table pmf has a negative or non-finite entry at {0}")]
    BadEntry(usize),
    #[error("unknown distribution kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("tree draw exceeded the size cap of {cap} vertices")]
    SizeCap { cap: usize },
    #[error("conditioned draw exceeded the rejection budget of {tries} tries")]
    RejectionBudgetExceeded { tries: u64 },
}

/// Grows the pmf/cdf tables of the stable family on demand. Entries follow
/// the exact coefficient recurrence, so partial sums approach 1 from below
/// without any renormalization.
#[derive(Debug)]
struct StableCache {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

/// Hard ceiling on cached stable entries; draws beyond it (probability
/// ~ ceiling^-gamma) fall back to an uncached tail walk.
const STABLE_CACHE_CEILING: usize = 1 << 21;

impl StableCache {
    fn new(gamma: f64) -> Self {
        let mut c = StableCache {
            pmf: Vec::with_capacity(64),
            cdf: Vec::with_capacity(64),
        };
        c.pmf.push(1.0 / gamma);
        c.cdf.push(1.0 / gamma);
        c.pmf.push(0.0);
        c.cdf.push(1.0 / gamma);
        c.grow(gamma, 64);
        c
    }

    /// Extends the tables up to `len` entries (k = 0..len).
    fn grow(&mut self, gamma: f64, len: usize) {
        let len = len.min(STABLE_CACHE_CEILING);
        while self.pmf.len() < len {
            let k = self.pmf.len();
            let p = if k == 2 {
                (gamma - 1.0) / 2.0
            } else {
                // mu(k) = mu(k-1) * (k - 1 - gamma) / k for k >= 3.
                self.pmf[k - 1] * ((k - 1) as f64 - gamma) / k as f64
            };
            self.pmf.push(p);
            self.cdf.push(self.cdf[k - 1] + p);
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Geometric,
    Poisson(rand_distr::Poisson<f64>),
    Stable {
        gamma: f64,
        cache: Arc<RwLock<StableCache>>,
    },
    Table {
        pmf: Vec<f64>,
        cdf: Vec<f64>,
        variance: f64,
    },
}

/// A critical aperiodic offspring distribution: Geometric(1/2), Poisson(1),
/// the stable family with generating function s + (1-s)^gamma / gamma, or an
/// explicit finite table.
#[derive(Clone, Debug)]
pub struct OffspringDistribution {
    kind: Kind,
}

impl OffspringDistribution {
    /// Geometric(1/2) on {0, 1, 2, ...}: pmf(k) = 2^-(k+1). Critical with
    /// variance 2.
    pub fn geometric() -> Self {
        OffspringDistribution {
            kind: Kind::Geometric,
        }
    }

    /// Poisson with mean 1. Critical with variance 1.
    pub fn poisson() -> Self {
        OffspringDistribution {
            kind: Kind::Poisson(rand_distr::Poisson::new(1.0).expect("mean 1 is valid")),
        }
    }

    /// The heavy-tailed family with pmf(k) the k-th coefficient of
    /// s + (1-s)^gamma / gamma. Critical, infinite variance, tail index
    /// gamma. gamma = 2 is refused: that member is supported on {0, 2} and
    /// violates aperiodicity.
    pub fn stable(gamma: f64) -> Result<Self, DistributionError> {
        if !(gamma > 1.0 && gamma < 2.0) || !gamma.is_finite() {
            return Err(DistributionError::GammaOutOfRange(gamma));
        }
        Ok(OffspringDistribution {
            kind: Kind::Stable {
                gamma,
                cache: Arc::new(RwLock::new(StableCache::new(gamma))),
            },
        })
    }

    /// An explicit finite pmf. Must sum to 1 (within 1e-12), have mean 1
    /// (within 1e-10) and aperiodic support.
    pub fn table(pmf: Vec<f64>) -> Result<Self, DistributionError> {
        for (k, &p) in pmf.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(DistributionError::BadEntry(k));
            }
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistributionError::NotNormalized(total - 1.0));
        }
        let mean: f64 = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
        if (mean - 1.0).abs() > 1e-10 {
            return Err(DistributionError::NotCritical(mean - 1.0));
        }
        let support: Vec<u32> = pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, _)| k as u32)
            .collect();
        let mut g = 0u32;
        for w in support.windows(2) {
            g = gcd(g, w[1] - w[0]);
        }
        if g != 1 {
            return Err(DistributionError::Periodic(g));
        }
        let variance: f64 = pmf
            .iter()
            .enumerate()
            .map(|(k, &p)| (k * k) as f64 * p)
            .sum::<f64>()
            - mean * mean;
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(OffspringDistribution {
            kind: Kind::Table { pmf, cdf, variance },
        })
    }

    pub fn pmf(&self, k: u32) -> f64 {
        match &self.kind {
            Kind::Geometric => 0.5f64.powi(k as i32 + 1),
            Kind::Poisson(_) => poisson1_pmf(k),
            Kind::Stable { gamma, .. } => stable_pmf(*gamma, k),
            Kind::Table { pmf, .. } => pmf.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    pub fn cdf(&self, k: u32) -> f64 {
        match &self.kind {
            Kind::Geometric => 1.0 - 0.5f64.powi(k as i32 + 1),
            Kind::Poisson(_) => (0..=k).map(poisson1_pmf).sum(),
            Kind::Stable { gamma, cache } => {
                {
                    let c = cache.read().expect("cache lock");
                    if (k as usize) < c.cdf.len() {
                        return c.cdf[k as usize];
                    }
                }
                if (k as usize) < STABLE_CACHE_CEILING {
                    let mut c = cache.write().expect("cache lock");
                    c.grow(*gamma, k as usize + 1);
                    c.cdf[k as usize]
                } else {
                    // Rare huge k: closed-form tail, exact.
                    1.0 - stable_tail(*gamma, k)
                }
            }
            Kind::Table { cdf, .. } => {
                if (k as usize) < cdf.len() {
                    cdf[k as usize]
                } else {
                    1.0
                }
            }
        }
    }

    /// Tail weight of the size-biased ancestor law: bar(k) = sum_{l >= k}
    /// pmf(l). By criticality these weights form a pmf on k >= 1.
    pub fn tail_ge(&self, k: u32) -> f64 {
        match &self.kind {
            Kind::Geometric => 0.5f64.powi(k as i32),
            Kind::Stable { gamma, .. } => {
                if k == 0 {
                    1.0
                } else {
                    stable_tail(*gamma, k - 1)
                }
            }
            _ => {
                if k == 0 {
                    1.0
                } else {
                    1.0 - self.cdf(k - 1)
                }
            }
        }
    }

    /// Exactly 1 for every constructible instance (criticality).
    pub fn mean(&self) -> f64 {
        1.0
    }

    /// None encodes infinite variance (the stable family).
    pub fn variance(&self) -> Option<f64> {
        match &self.kind {
            Kind::Geometric => Some(2.0),
            Kind::Poisson(_) => Some(1.0),
            Kind::Stable { .. } => None,
            Kind::Table { variance, .. } => Some(*variance),
        }
    }

    /// Tail index: 2 whenever the variance is finite, gamma for the stable
    /// family.
    pub fn gamma(&self) -> f64 {
        match &self.kind {
            Kind::Stable { gamma, .. } => *gamma,
            _ => 2.0,
        }
    }

    /// One offspring draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.kind {
            Kind::Geometric => {
                // Trailing zeros of a uniform word are Geometric(1/2)
                // exactly: P(tz = k) = 2^-(k+1).
                let mut base = 0;
                loop {
                    let x: u64 = rng.gen();
                    if x != 0 {
                        return base + x.trailing_zeros();
                    }
                    base += 64;
                }
            }
            Kind::Poisson(p) => rng.sample(*p) as u32,
            Kind::Stable { gamma, cache } => sample_stable(*gamma, cache, rng),
            Kind::Table { cdf, .. } => {
                let u: f64 = rng.gen();
                cdf.partition_point(|&c| c < u).min(cdf.len() - 1) as u32
            }
        }
    }

    /// One draw from the spine offspring law bar(k) on k >= 1.
    pub fn sample_spine<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match &self.kind {
            Kind::Geometric => {
                // bar(k) = 2^-k on k >= 1.
                let mut base = 1;
                loop {
                    let x: u64 = rng.gen();
                    if x != 0 {
                        return base + x.trailing_zeros();
                    }
                    base += 64;
                }
            }
            Kind::Stable { gamma, .. } => {
                // bar(k) = |binom(gamma-1, k-1)| / gamma for k >= 2 and
                // (gamma-1)/gamma for k = 1; running-product walk.
                let u: f64 = rng.gen();
                let mut k = 1u32;
                let mut term = (*gamma - 1.0) / *gamma;
                let mut acc = term;
                while acc < u && k < u32::MAX {
                    k += 1;
                    // bar(k) = |binom(g-1, k-1)| / g, so the step ratio is
                    // (k-1-g)/(k-1) for k >= 3; bar(2) = bar(1) since
                    // pmf(1) = 0.
                    if k > 2 {
                        term *= ((k - 1) as f64 - *gamma) / (k - 1) as f64;
                    }
                    acc += term;
                }
                k
            }
            _ => {
                let u: f64 = rng.gen();
                let mut k = 1u32;
                let mut acc = self.tail_ge(1);
                while acc < u && k < u32::MAX {
                    k += 1;
                    acc += self.tail_ge(k);
                }
                k
            }
        }
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn poisson1_pmf(k: u32) -> f64 {
    let mut p = (-1.0f64).exp();
    for j in 1..=k {
        p /= j as f64;
    }
    p
}

/// k-th coefficient of s + (1-s)^gamma / gamma: 1/gamma at k = 0, zero at
/// k = 1, then the alternating binomial series, evaluated by an exact
/// running-product recurrence (never truncated or renormalized).
pub fn stable_pmf(gamma: f64, k: u32) -> f64 {
    assert!(
        gamma > 1.0 && gamma < 2.0,
        "stable family needs gamma in (1, 2), got {gamma}"
    );
    match k {
        0 => 1.0 / gamma,
        1 => 0.0,
        _ => {
            let mut p = (gamma - 1.0) / 2.0;
            for j in 3..=k {
                p *= ((j - 1) as f64 - gamma) / j as f64;
            }
            p
        }
    }
}

/// Closed-form tail of the stable family: P(L > k) = |binom(gamma-1, k)| /
/// gamma for k >= 1 (and 1 - 1/gamma at k = 0), by telescoping the binomial
/// series. Lets tests certify normalization and criticality without summing
/// an infinite series.
pub fn stable_tail(gamma: f64, k: u32) -> f64 {
    assert!(gamma > 1.0 && gamma < 2.0);
    if k == 0 {
        return 1.0 - 1.0 / gamma;
    }
    let mut b = gamma - 1.0; // |binom(gamma-1, 1)|
    for j in 2..=k {
        b *= (j as f64 - gamma).abs() / j as f64;
    }
    b / gamma
}

fn sample_stable<R: Rng + ?Sized>(
    gamma: f64,
    cache: &Arc<RwLock<StableCache>>,
    rng: &mut R,
) -> u32 {
    let u: f64 = rng.gen();
    loop {
        let len = {
            let c = cache.read().expect("cache lock");
            let idx = c.cdf.partition_point(|&x| x < u);
            if idx < c.cdf.len() {
                return idx as u32;
            }
            c.cdf.len()
        };
        if len >= STABLE_CACHE_CEILING {
            // Uncached tail walk; hit with probability ~ ceiling^-gamma.
            let (mut k, mut p, mut acc) = {
                let c = cache.read().expect("cache lock");
                (
                    (c.pmf.len() - 1) as u64,
                    *c.pmf.last().unwrap(),
                    *c.cdf.last().unwrap(),
                )
            };
            while acc < u && k < u32::MAX as u64 {
                k += 1;
                p *= ((k - 1) as f64 - gamma) / k as f64;
                acc += p;
            }
            return k as u32;
        }
        let mut c = cache.write().expect("cache lock");
        let target = (len * 2).min(STABLE_CACHE_CEILING);
        c.grow(gamma, target);
    }
}

/// Draws an unconditioned Galton-Watson tree by running the Łukasiewicz walk
/// until its first passage to -1. Errs with `SizeCap` when the draw grows
/// past `cap` vertices.
pub fn sample_gw<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    rng: &mut R,
    cap: usize,
) -> Result<OrderedTree, SamplerError> {
    sample_gw_with(|rng| mu.sample(rng), rng, cap)
}

fn sample_gw_with<R: Rng + ?Sized>(
    mut draw: impl FnMut(&mut R) -> u32,
    rng: &mut R,
    cap: usize,
) -> Result<OrderedTree, SamplerError> {
    let mut offspring = Vec::new();
    let mut pending: u64 = 1;
    while pending > 0 {
        if offspring.len() >= cap {
            return Err(SamplerError::SizeCap { cap });
        }
        let k = draw(rng);
        offspring.push(k);
        pending = pending + k as u64 - 1;
    }
    Ok(OrderedTree::from_offspring(offspring).expect("stopped walk is a valid path"))
}

/// Appends one unconditioned GW(mu) offspring sequence to `seq`, respecting
/// the total cap shared with whatever is already in the buffer.
fn extend_with_gw<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    rng: &mut R,
    seq: &mut Vec<u32>,
    cap: usize,
) -> Result<(), SamplerError> {
    let mut pending: u64 = 1;
    while pending > 0 {
        if seq.len() >= cap {
            return Err(SamplerError::SizeCap { cap });
        }
        let k = mu.sample(rng);
        seq.push(k);
        pending = pending + k as u64 - 1;
    }
    Ok(())
}

/// Exact draw of GW(mu) conditioned on having exactly n vertices.
///
/// Conditioned on their sum, n i.i.d. offspring values have the law of the
/// multiset read along the tree in DFS order, up to the unique rotation that
/// makes the Łukasiewicz path valid (the one starting right after the
/// leftmost minimum of the cyclic walk). Geometric and Poisson condition in
/// closed form (uniform composition, resp. multinomial occupancy), so those
/// draws cost O(n) with no rejection; other kinds reject until the sum comes
/// out right, with expected tries of order n/a_n.
pub fn sample_gw_conditioned<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    n: usize,
    rng: &mut R,
    max_tries: u64,
) -> Result<OrderedTree, SamplerError> {
    assert!(n >= 1, "a tree has at least one vertex");
    let values = match &mu.kind {
        Kind::Geometric => {
            // Geometric i.i.d. given sum are a uniform weak composition of
            // n-1 into n parts: shuffle n-1 stars among n-1 bars and read
            // run lengths.
            let mut slots = vec![1u8; n - 1];
            slots.extend(std::iter::repeat(0u8).take(n - 1));
            slots.shuffle(rng);
            let mut vals = Vec::with_capacity(n);
            let mut run = 0u32;
            for s in slots {
                if s == 1 {
                    run += 1;
                } else {
                    vals.push(run);
                    run = 0;
                }
            }
            vals.push(run);
            vals
        }
        Kind::Poisson(_) => {
            // Poisson i.i.d. given sum are multinomial: n-1 balls into n
            // equally likely boxes.
            let mut vals = vec![0u32; n];
            for _ in 0..n - 1 {
                vals[rng.gen_range(0..n)] += 1;
            }
            vals
        }
        _ => {
            let target = (n - 1) as u64;
            let mut vals = Vec::with_capacity(n);
            let mut accepted = false;
            for _ in 0..max_tries {
                vals.clear();
                let mut sum: u64 = 0;
                for _ in 0..n {
                    let k = mu.sample(rng);
                    sum += k as u64;
                    if sum > target {
                        break;
                    }
                    vals.push(k);
                }
                if vals.len() == n && sum == target {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Err(SamplerError::RejectionBudgetExceeded { tries: max_tries });
            }
            vals
        }
    };
    Ok(rotate_to_tree(values))
}

/// Rotates an offspring multiset with sum n-1 to the unique cyclic shift
/// whose Łukasiewicz path stays nonnegative until the final step: the shift
/// starting right after the leftmost minimum of the prefix sums.
fn rotate_to_tree(values: Vec<u32>) -> OrderedTree {
    let n = values.len();
    let mut sum: i64 = 0;
    let mut min = i64::MAX;
    let mut argmin = 0usize;
    for (i, &v) in values.iter().enumerate() {
        sum += v as i64 - 1;
        if sum < min {
            min = sum;
            argmin = i;
        }
    }
    debug_assert_eq!(sum, -1, "rotation needs total sum n - 1");
    let cut = (argmin + 1) % n;
    let mut rotated = Vec::with_capacity(n);
    rotated.extend_from_slice(&values[cut..]);
    rotated.extend_from_slice(&values[..cut]);
    OrderedTree::from_offspring(rotated).expect("cycle lemma guarantees validity")
}

/// Draws the right part of an infinite-spined GW tree, truncated to spine
/// depth P: ancestors of the point at heights -P..-1 each draw their
/// offspring count from bar(k) and continue the spine through their first
/// child; the remaining children and the point itself root independent
/// GW(mu) trees. The result is centered: the point sits at height 0 and at
/// DFS index P.
pub fn sample_ipgw_plus<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    spine_depth: u32,
    rng: &mut R,
    cap: usize,
) -> Result<PointedTree, SamplerError> {
    let p = spine_depth as usize;
    let mut seq = Vec::with_capacity(p + 16);
    let mut spine_counts = Vec::with_capacity(p);
    for _ in 0..p {
        if seq.len() >= cap {
            return Err(SamplerError::SizeCap { cap });
        }
        let k = mu.sample_spine(rng);
        spine_counts.push(k);
        seq.push(k);
    }
    // DFS order: spine prefix, then the point's subtree, then each spine
    // vertex's non-spine children from the deepest spine vertex up.
    let point = seq.len();
    extend_with_gw(mu, rng, &mut seq, cap)?;
    for d in (0..p).rev() {
        for _ in 1..spine_counts[d] {
            extend_with_gw(mu, rng, &mut seq, cap)?;
        }
    }
    let tree = OrderedTree::from_offspring(seq).expect("spine construction is a valid path");
    Ok(PointedTree {
        tree,
        point,
        root_height: -(spine_depth as i64),
    })
}

/// The height normalization a_n. Finite-variance offspring give
/// a_n = sqrt(2n / sigma^2); the stable family gives
/// a_n = gamma^(1/gamma) n^((gamma-1)/gamma). Both make the centered
/// Łukasiewicz walk, normalized by n/a_n, converge to the spectrally
/// positive law with Laplace exponent lambda^gamma.
#[derive(Clone, Copy, Debug)]
pub struct ScalingSeq {
    gamma: f64,
    coeff: f64,
}

impl ScalingSeq {
    pub fn for_distribution(mu: &OffspringDistribution) -> Self {
        match mu.variance() {
            Some(var) => ScalingSeq {
                gamma: 2.0,
                coeff: (2.0 / var).sqrt(),
            },
            None => {
                let gamma = mu.gamma();
                ScalingSeq {
                    gamma,
                    coeff: gamma.powf(1.0 / gamma),
                }
            }
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a(&self, n: usize) -> f64 {
        self.coeff * (n as f64).powf((self.gamma - 1.0) / self.gamma)
    }
}

/// a_n for mu at size n; see [`ScalingSeq`].
pub fn scaling_a_n(mu: &OffspringDistribution, n: usize) -> f64 {
    ScalingSeq::for_distribution(mu).a(n)
}

/// Declarative distribution choice for experiment configs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DistributionSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
}

impl DistributionSpec {
    pub fn geometric() -> Self {
        DistributionSpec {
            kind: "geometric".into(),
            gamma: None,
            table: None,
        }
    }

    pub fn build(&self) -> Result<OffspringDistribution, DistributionError> {
        match self.kind.as_str() {
            "geometric" => Ok(OffspringDistribution::geometric()),
            "poisson" => Ok(OffspringDistribution::poisson()),
            "stable" => {
                let gamma = self
                    .gamma
                    .ok_or(DistributionError::GammaOutOfRange(f64::NAN))?;
                OffspringDistribution::stable(gamma)
            }
            "table" => {
                let pmf = self
                    .table
                    .clone()
                    .ok_or_else(|| DistributionError::UnknownKind("table without pmf".into()))?;
                OffspringDistribution::table(pmf)
            }
            other => Err(DistributionError::UnknownKind(other.to_string())),
        }
    }

    /// Short label for report rows.
    pub fn label(&self) -> String {
        match self.kind.as_str() {
            "stable" => format!("stable({})", self.gamma.unwrap_or(f64::NAN)),
            k => k.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::replicate_rng;
    use crate::tree_core::enumerate_trees;

    #[test]
    fn stable_pmf_low_order_coefficients() {
        for &gamma in &[1.1, 1.5, 1.9] {
            assert!((stable_pmf(gamma, 0) - 1.0 / gamma).abs() < 1e-15);
            assert_eq!(stable_pmf(gamma, 1), 0.0);
            assert!((stable_pmf(gamma, 2) - (gamma - 1.0) / 2.0).abs() < 1e-15);
            // All later coefficients are positive probabilities.
            for k in 3..50 {
                let p = stable_pmf(gamma, k);
                assert!(p > 0.0 && p < 1.0, "pmf({k}) = {p}");
            }
        }
    }

    #[test]
    fn stable_normalization_certified_by_closed_tail() {
        // Partial sum + closed-form tail reconstructs 1 exactly, so the
        // distribution is normalized without any renormalization step.
        for &gamma in &[1.2, 1.5, 1.8] {
            let mu = OffspringDistribution::stable(gamma).unwrap();
            for &k in &[1u32, 10, 100, 1000] {
                let total = mu.cdf(k) + stable_tail(gamma, k);
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "gamma {gamma} k {k}: {total}"
                );
            }
        }
    }

    #[test]
    fn stable_criticality_certified_by_closed_remainder() {
        // sum_{l<=K} l pmf(l) + |binom(gamma-2, K-1)| = 1: the mean-series
        // remainder also telescopes.
        for &gamma in &[1.2, 1.5, 1.8] {
            for &big_k in &[10u32, 100, 1000] {
                let partial: f64 = (0..=big_k)
                    .map(|k| k as f64 * stable_pmf(gamma, k))
                    .sum();
                // Remainder |binom(gamma-2, K-1)| with step ratio
                // (j+1-gamma)/j.
                let mut rem = 1.0f64;
                for j in 1..big_k {
                    rem *= (j as f64 + 1.0 - gamma) / j as f64;
                }
                assert!(
                    (partial + rem - 1.0).abs() < 1e-10,
                    "gamma {gamma} K {big_k}: partial {partial} + rem {rem}"
                );
            }
        }
    }

    #[test]
    fn stable_partial_sums_monotone_toward_one() {
        let mu = OffspringDistribution::stable(1.5).unwrap();
        let checkpoints = [10u32, 100, 1000, 10000];
        let mut prev_gap = 1.0;
        for &k in &checkpoints {
            let gap = 1.0 - mu.cdf(k);
            assert!(gap > 0.0 && gap < prev_gap, "cdf strictly increases");
            prev_gap = gap;
        }
        // Tail decays at the predicted k^-gamma rate: ratio over one decade
        // close to 10^-1.5.
        let r = stable_tail(1.5, 10000) / stable_tail(1.5, 1000);
        assert!((r - 10f64.powf(-1.5)).abs() < 0.01, "decade ratio {r}");
    }

    #[test]
    fn geometric_and_poisson_normalized_and_critical() {
        for mu in [
            OffspringDistribution::geometric(),
            OffspringDistribution::poisson(),
        ] {
            let total: f64 = (0..200).map(|k| mu.pmf(k)).sum();
            let mean: f64 = (0..200).map(|k| k as f64 * mu.pmf(k)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!((mean - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn table_validation_catches_bad_inputs() {
        // Critical aperiodic table: accepted.
        let ok = OffspringDistribution::table(vec![0.25, 0.5, 0.25]);
        assert!(ok.is_ok());
        // Mean 1 but support {0, 2}: periodic, refused.
        let periodic = OffspringDistribution::table(vec![0.5, 0.0, 0.5]);
        assert_eq!(periodic.unwrap_err(), DistributionError::Periodic(2));
        // Subcritical table refused.
        let sub = OffspringDistribution::table(vec![0.5, 0.5]);
        assert!(matches!(sub, Err(DistributionError::NotCritical(_))));
        // Unnormalized refused.
        let bad = OffspringDistribution::table(vec![0.5, 0.6]);
        assert!(matches!(bad, Err(DistributionError::NotNormalized(_))));
    }

    #[test]
    fn stable_gamma_two_refused() {
        assert!(OffspringDistribution::stable(2.0).is_err());
        assert!(OffspringDistribution::stable(1.0).is_err());
        assert!(OffspringDistribution::stable(2.5).is_err());
    }

    #[test]
    fn spine_law_sums_to_one() {
        // Geometric: bar(k) = 2^-k exactly.
        let geo = OffspringDistribution::geometric();
        for k in 1..20 {
            assert!((geo.tail_ge(k) - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        // Poisson: partial sums of bar approach 1 (criticality).
        let poi = OffspringDistribution::poisson();
        let s: f64 = (1..60).map(|k| poi.tail_ge(k)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        // Stable: partial sum + telescoped remainder |binom(g-2, K-1)|/g.
        let gamma = 1.5;
        let stable = OffspringDistribution::stable(gamma).unwrap();
        let k_max = 4000u32;
        let s: f64 = (1..=k_max).map(|k| stable.tail_ge(k)).sum();
        let mut rem = 1.0f64;
        for j in 1..k_max {
            rem *= (j as f64 + 1.0 - gamma) / j as f64;
        }
        assert!((s + rem / gamma - 1.0).abs() < 1e-10, "sum {s} rem {rem}");
    }

    #[test]
    fn sampled_offspring_match_pmf() {
        // Chi-square against the pmf for each kind.
        let kinds = [
            OffspringDistribution::geometric(),
            OffspringDistribution::poisson(),
            OffspringDistribution::stable(1.5).unwrap(),
            OffspringDistribution::table(vec![0.3, 0.45, 0.2, 0.05]).unwrap(),
        ];
        for (i, mu) in kinds.iter().enumerate() {
            let mut rng = replicate_rng(11, i as u64);
            let n_draws = 40_000usize;
            let k_bins = 12u32;
            let mut counts = vec![0u64; k_bins as usize + 1];
            for _ in 0..n_draws {
                let k = mu.sample(&mut rng);
                counts[(k.min(k_bins)) as usize] += 1;
            }
            let mut expected: Vec<f64> = (0..k_bins)
                .map(|k| mu.pmf(k) * n_draws as f64)
                .collect();
            expected.push(mu.tail_ge(k_bins) * n_draws as f64);
            let r = crate::stats::chi_square_gof(&counts, &expected, 5.0);
            assert!(r.p_value > 0.001, "kind {i}: chi2 p = {}", r.p_value);
        }
    }

    #[test]
    fn spine_draws_match_tail_law() {
        let kinds = [
            OffspringDistribution::geometric(),
            OffspringDistribution::poisson(),
            OffspringDistribution::stable(1.5).unwrap(),
        ];
        for (i, mu) in kinds.iter().enumerate() {
            let mut rng = replicate_rng(13, i as u64);
            let n_draws = 40_000usize;
            let k_bins = 12u32;
            let mut counts = vec![0u64; k_bins as usize];
            for _ in 0..n_draws {
                let k = mu.sample_spine(&mut rng);
                assert!(k >= 1);
                counts[(k.min(k_bins) - 1) as usize] += 1;
            }
            let mut expected: Vec<f64> = (1..k_bins)
                .map(|k| mu.tail_ge(k) * n_draws as f64)
                .collect();
            let head: f64 = (1..k_bins).map(|k| mu.tail_ge(k)).sum();
            expected.push((1.0 - head) * n_draws as f64);
            let r = crate::stats::chi_square_gof(&counts, &expected, 5.0);
            assert!(r.p_value > 0.001, "kind {i}: chi2 p = {}", r.p_value);
        }
    }

    #[test]
    fn forced_zero_draw_gives_single_node() {
        let mut rng = replicate_rng(0, 0);
        let t = sample_gw_with(|_| 0, &mut rng, 10).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn gw_singleton_probability_is_mu_zero() {
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(17, 0);
        let n_draws = 100_000;
        let mut singles = 0u64;
        for _ in 0..n_draws {
            // A capped-out draw is certainly not a singleton.
            match sample_gw(&mu, &mut rng, 1 << 22) {
                Ok(t) if t.len() == 1 => singles += 1,
                _ => {}
            }
        }
        let p_hat = singles as f64 / n_draws as f64;
        let se = (0.5 * 0.5 / n_draws as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() <= 3.0 * se,
            "P(single) = {p_hat} vs 1/2 +- {}",
            3.0 * se
        );
    }

    #[test]
    fn size_cap_trips() {
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(19, 0);
        let mut seen_cap = false;
        for _ in 0..20_000 {
            if let Err(SamplerError::SizeCap { cap }) = sample_gw(&mu, &mut rng, 50) {
                assert_eq!(cap, 50);
                seen_cap = true;
                break;
            }
        }
        assert!(seen_cap, "a 50-vertex cap must trip within 20k critical draws");
    }

    #[test]
    fn conditioned_small_sizes_exact_shapes() {
        // n = 1 and n = 2 are deterministic.
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(23, 0);
        for _ in 0..50 {
            assert_eq!(sample_gw_conditioned(&mu, 1, &mut rng, 100).unwrap().len(), 1);
            let t = sample_gw_conditioned(&mu, 2, &mut rng, 100).unwrap();
            assert_eq!(t.offspring_seq(), &[1, 0]);
        }
    }

    #[test]
    fn conditioned_n3_geometric_is_fair_coin() {
        // Both 3-vertex shapes carry conditional probability 1/2.
        let mu = OffspringDistribution::geometric();
        let mut rng = replicate_rng(29, 0);
        let n_draws = 40_000;
        let mut cherries = 0u64;
        for _ in 0..n_draws {
            let t = sample_gw_conditioned(&mu, 3, &mut rng, 100).unwrap();
            match t.offspring_seq() {
                [2, 0, 0] => cherries += 1,
                [1, 1, 0] => {}
                other => panic!("impossible 3-vertex shape {other:?}"),
            }
        }
        let p_hat = cherries as f64 / n_draws as f64;
        let se = (0.25 / n_draws as f64).sqrt();
        assert!(
            (p_hat - 0.5).abs() <= 4.0 * se,
            "P(cherry) = {p_hat} vs 1/2"
        );
    }

    #[test]
    fn conditioned_sampler_returns_exact_size() {
        let kinds = [
            OffspringDistribution::geometric(),
            OffspringDistribution::poisson(),
            OffspringDistribution::stable(1.5).unwrap(),
            OffspringDistribution::table(vec![0.25, 0.5, 0.25]).unwrap(),
        ];
        for (i, mu) in kinds.iter().enumerate() {
            let mut rng = replicate_rng(31, i as u64);
            for &n in &[1usize, 2, 3, 17, 100] {
                if n == 2 && mu.pmf(1) == 0.0 {
                    // No 2-vertex tree exists when pmf(1) = 0 (the stable
                    // family); the precondition P(#tree = n) > 0 fails.
                    continue;
                }
                let t = sample_gw_conditioned(mu, n, &mut rng, 1_000_000).unwrap();
                assert_eq!(t.len(), n, "kind {i}, n {n}");
            }
        }
    }

    #[test]
    fn rejection_budget_error_surfaces() {
        // Table with support {0, 1, 3}: sum 1 from 2 draws is possible, but
        // an absurd budget of 0 tries must fail cleanly.
        let mu = OffspringDistribution::table(vec![0.5, 0.25, 0.0, 0.25]).unwrap();
        let mut rng = replicate_rng(37, 0);
        let r = sample_gw_conditioned(&mu, 5, &mut rng, 0);
        assert_eq!(
            r.unwrap_err(),
            SamplerError::RejectionBudgetExceeded { tries: 0 }
        );
    }

    #[test]
    fn rotation_picks_the_unique_valid_shift() {
        // Exhaustive: every cyclic class of offspring multisets with sum
        // n - 1 contains exactly one valid tree, and rotate_to_tree finds it
        // from any starting rotation.
        for n in 1..=6usize {
            for tree in enumerate_trees(n) {
                let seq = tree.offspring_seq().to_vec();
                for shift in 0..n {
                    let mut rotated = Vec::with_capacity(n);
                    rotated.extend_from_slice(&seq[shift..]);
                    rotated.extend_from_slice(&seq[..shift]);
                    assert_eq!(rotate_to_tree(rotated), tree);
                }
            }
        }
    }

    #[test]
    fn ipgw_spine_structure() {
        let kinds = [
            OffspringDistribution::geometric(),
            OffspringDistribution::poisson(),
        ];
        for (i, mu) in kinds.iter().enumerate() {
            let mut rng = replicate_rng(41, i as u64);
            for &p in &[1u32, 2, 7, 40] {
                let pt = sample_ipgw_plus(mu, p, &mut rng, 1 << 22).unwrap();
                assert_eq!(pt.point, p as usize);
                assert_eq!(pt.root_height, -(p as i64));
                assert_eq!(pt.point_height(), 0);
                // The spine runs through first children: ancestor at depth d
                // has the next spine vertex as its first child.
                let mut v = pt.point;
                while let Some(parent) = pt.tree.parent(v) {
                    assert_eq!(pt.tree.first_child(parent), Some(v), "spine child is first");
                    assert!(pt.tree.offspring(parent) >= 1);
                    v = parent;
                }
                assert_eq!(pt.spine_depth(), p);
            }
        }
    }

    #[test]
    fn scaling_matches_finite_variance_formulas() {
        let geo = OffspringDistribution::geometric();
        let poi = OffspringDistribution::poisson();
        for &n in &[100usize, 10_000, 1_000_000] {
            assert!((scaling_a_n(&geo, n) - (n as f64).sqrt()).abs() < 1e-9);
            assert!((scaling_a_n(&poi, n) - (2.0 * n as f64).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_nondecreasing_and_sublinear() {
        let kinds = [
            OffspringDistribution::geometric(),
            OffspringDistribution::stable(1.3).unwrap(),
            OffspringDistribution::stable(1.7).unwrap(),
        ];
        for mu in &kinds {
            let s = ScalingSeq::for_distribution(mu);
            let mut prev = 0.0;
            for e in 2..7 {
                let n = 10usize.pow(e);
                let a = s.a(n);
                assert!(a > prev);
                assert!(a / (n as f64) < 1.0);
                prev = a;
            }
            // a_n / n shrinks by at least the regular-variation factor.
            assert!(s.a(1_000_000) / 1_000_000.0 < 0.5 * s.a(10_000) / 10_000.0);
        }
    }

    #[test]
    fn distribution_spec_roundtrip() {
        let spec = DistributionSpec {
            kind: "stable".into(),
            gamma: Some(1.5),
            table: None,
        };
        let js = serde_json::to_string(&spec).unwrap();
        let back: DistributionSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
        assert!(back.build().is_ok());
        assert_eq!(back.label(), "stable(1.5)");

        let bad = DistributionSpec {
            kind: "zeta".into(),
            gamma: None,
            table: None,
        };
        assert!(bad.build().is_err());
    }
}
