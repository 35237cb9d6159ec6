//! Shared statistical plumbing: streaming moments, two-sample
//! Kolmogorov-Smirnov and chi-square goodness-of-fit tests, deterministic
//! per-replicate RNG streams, and a stable config hash.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Streaming mean / variance accumulator (Welford's update).
#[derive(Clone, Debug, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n - 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.m2 / (self.n - 1) as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Kolmogorov's limiting tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1}
/// exp(-2 j^2 lambda^2), clamped to [0, 1].
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..101 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Two-sample Kolmogorov-Smirnov test. The p-value uses the asymptotic
/// Kolmogorov distribution with the effective sample size n1 n2 / (n1 + n2)
/// and the small-sample correction sqrt(ne) + 0.12 + 0.11/sqrt(ne).
pub fn ks_two_sample(sample1: &[f64], sample2: &[f64]) -> KsResult {
    assert!(!sample1.is_empty() && !sample2.is_empty());
    let mut a = sample1.to_vec();
    let mut b = sample2.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in KS samples"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("no NaN in KS samples"));
    let (n1, n2) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(diff);
    }
    let ne = (n1 as f64 * n2 as f64) / ((n1 + n2) as f64);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        n1,
        n2,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of observed counts against expected
/// counts. Cells with expected count below `min_expected` are pooled into
/// their right neighbor (the last cell pools leftward) so the chi-square
/// approximation stays honest.
pub fn chi_square_gof(observed: &[u64], expected: &[f64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let mut obs = Vec::with_capacity(observed.len());
    let mut exp = Vec::with_capacity(expected.len());
    let mut acc_o = 0u64;
    let mut acc_e = 0.0f64;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o;
        acc_e += e;
        if acc_e >= min_expected {
            obs.push(acc_o);
            exp.push(acc_e);
            acc_o = 0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0 {
        match exp.last_mut() {
            Some(last_e) => {
                *last_e += acc_e;
                *obs.last_mut().unwrap() += acc_o;
            }
            None => {
                exp.push(acc_e);
                obs.push(acc_o);
            }
        }
    }
    let statistic: f64 = obs
        .iter()
        .zip(&exp)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = exp.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).expect("dof >= 1");
    ChiSquareResult {
        statistic,
        dof,
        p_value: 1.0 - chi.cdf(statistic),
    }
}

/// Two-sample chi-square test of homogeneity: both count vectors are
/// compared against the pooled law. Cells whose pooled expected counts fall
/// below `min_expected` (in either sample) are merged rightward first.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_expected: f64) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    let total = (total_a + total_b) as f64;
    let (frac_a, frac_b) = (total_a as f64 / total, total_b as f64 / total);

    // Pool bins until the smaller sample's expected count clears the floor.
    let frac_min = frac_a.min(frac_b);
    let mut obs_a = Vec::new();
    let mut obs_b = Vec::new();
    let (mut acc_a, mut acc_b) = (0u64, 0u64);
    for (&oa, &ob) in a.iter().zip(b) {
        acc_a += oa;
        acc_b += ob;
        if (acc_a + acc_b) as f64 * frac_min >= min_expected {
            obs_a.push(acc_a);
            obs_b.push(acc_b);
            acc_a = 0;
            acc_b = 0;
        }
    }
    if acc_a + acc_b > 0 {
        match obs_a.last_mut() {
            Some(last) => {
                *last += acc_a;
                *obs_b.last_mut().unwrap() += acc_b;
            }
            None => {
                obs_a.push(acc_a);
                obs_b.push(acc_b);
            }
        }
    }

    let statistic: f64 = obs_a
        .iter()
        .zip(&obs_b)
        .map(|(&oa, &ob)| {
            let pooled = (oa + ob) as f64;
            let (ea, eb) = (pooled * frac_a, pooled * frac_b);
            let (da, db) = (oa as f64 - ea, ob as f64 - eb);
            da * da / ea + db * db / eb
        })
        .sum();
    let dof = obs_a.len().saturating_sub(1).max(1);
    let chi = ChiSquared::new(dof as f64).expect("dof >= 1");
    ChiSquareResult {
        statistic,
        dof,
        p_value: 1.0 - chi.cdf(statistic),
    }
}

/// Deterministic RNG for one replicate: the master seed fixes the key, the
/// replicate index selects an independent ChaCha stream. Results are
/// reproducible regardless of how replicates are scheduled across workers.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// FNV-1a over bytes; used to fingerprint configs in report metadata.
pub fn fnv1a_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Empirical CDF evaluated at x (proportion of the sorted sample <= x).
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    let mut lo = 0;
    let mut hi = sorted.len();
    while lo < hi {
        let mid = (lo + hi) / 2;
        if sorted[mid] <= x {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo as f64 / sorted.len() as f64
}
