//! LFR-style benchmark networks with planted clusters and cluster-correlated
//! binary attributes.
//!
//! Generation runs in five steps, all drawing from one seeded stream:
//! power-law degrees, power-law cluster sizes, membership assignment,
//! stub matching for internal and external edges, and attribute synthesis.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::AttributedNetwork;
use crate::linalg::{DenseMatrix, SparseMatrix};

const MAX_RETRIES: usize = 200;
const REWIRE_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LfrSpec {
    pub n: usize,
    /// Fraction of each node's edges that leave its cluster.
    pub mu: f64,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub min_cluster: usize,
    pub max_cluster: usize,
    pub degree_exponent: f64,
    pub size_exponent: f64,
    pub attr_dim: usize,
    pub attrs_per_cluster: usize,
    pub noise_ratio: f64,
    pub seed: u64,
}

impl LfrSpec {
    /// The benchmark rows used for evaluation: `mu` of 0.6 and 0.7 use cluster
    /// sizes 20..=100, 0.8 uses 10..=50. All use n=1000, ⟨k⟩=20, k_max=50,
    /// exponents 2 and 1, and 100-dimensional attributes with 10 per cluster.
    pub fn benchmark(mu: f64, noise_ratio: f64, seed: u64) -> Self {
        let (min_cluster, max_cluster) = if mu >= 0.75 { (10, 50) } else { (20, 100) };
        Self {
            n: 1000,
            mu,
            avg_degree: 20.0,
            max_degree: 50,
            min_cluster,
            max_cluster,
            degree_exponent: 2.0,
            size_exponent: 1.0,
            attr_dim: 100,
            attrs_per_cluster: 10,
            noise_ratio,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n < 2 {
            return bad(format!("n = {} too small", self.n));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("mu = {} outside [0, 1]", self.mu));
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return bad(format!("noise ratio {} outside [0, 1]", self.noise_ratio));
        }
        if self.max_degree == 0 || self.max_degree > self.n - 1 {
            return bad(format!("k_max = {} outside [1, n-1]", self.max_degree));
        }
        if !(self.avg_degree >= 1.0 && self.avg_degree <= self.max_degree as f64) {
            return bad(format!(
                "<k> = {} outside [1, k_max = {}]",
                self.avg_degree, self.max_degree
            ));
        }
        if self.min_cluster == 0 || self.min_cluster > self.max_cluster || self.max_cluster > self.n {
            return bad(format!(
                "cluster bounds [{}, {}] invalid for n = {}",
                self.min_cluster, self.max_cluster, self.n
            ));
        }
        if self.attrs_per_cluster > self.attr_dim {
            return bad(format!(
                "D = {} exceeds m = {}",
                self.attrs_per_cluster, self.attr_dim
            ));
        }
        Ok(())
    }

    /// `key=value` lines describing every parameter.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "mu={}", self.mu);
        let _ = writeln!(s, "avg_degree={}", self.avg_degree);
        let _ = writeln!(s, "max_degree={}", self.max_degree);
        let _ = writeln!(s, "min_cluster={}", self.min_cluster);
        let _ = writeln!(s, "max_cluster={}", self.max_cluster);
        let _ = writeln!(s, "degree_exponent={}", self.degree_exponent);
        let _ = writeln!(s, "size_exponent={}", self.size_exponent);
        let _ = writeln!(s, "attr_dim={}", self.attr_dim);
        let _ = writeln!(s, "attrs_per_cluster={}", self.attrs_per_cluster);
        let _ = writeln!(s, "noise_ratio={}", self.noise_ratio);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}

/// Truncated discrete power law `p(k) ∝ k^(-exponent)` on `[lo, hi]`,
/// sampled by inverse CDF.
#[derive(Debug, Clone)]
pub struct DiscretePowerLaw {
    lo: usize,
    cdf: Vec<f64>,
}

impl DiscretePowerLaw {
    pub fn new(lo: usize, hi: usize, exponent: f64) -> Self {
        assert!(lo >= 1 && lo <= hi, "power law support [{lo}, {hi}]");
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (lo..=hi)
            .map(|k| {
                acc += (k as f64).powf(-exponent);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        Self { lo, cdf }
    }

    pub fn mean(&self) -> f64 {
        let mut prev = 0.0;
        let mut m = 0.0;
        for (i, &c) in self.cdf.iter().enumerate() {
            m += (self.lo + i) as f64 * (c - prev);
            prev = c;
        }
        m
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c < u);
        self.lo + idx.min(self.cdf.len() - 1)
    }
}

/// Mean of the truncated power law `p(k) ∝ k^(-exponent)` on `[lo, hi]`.
pub fn truncated_powerlaw_mean(lo: usize, hi: usize, exponent: f64) -> f64 {
    let (num, den) = (lo..=hi).fold((0.0, 0.0), |(n, d), k| {
        let w = (k as f64).powf(-exponent);
        (n + k as f64 * w, d + w)
    });
    num / den
}

/// Degree law hitting a target mean exactly in expectation: a mixture of the
/// power laws starting at `k_min` and `k_min + 1`, with weight `low_weight`
/// on the first.
#[derive(Debug, Clone)]
pub struct DegreeLaw {
    pub k_min: usize,
    pub low_weight: f64,
    low: DiscretePowerLaw,
    high: Option<DiscretePowerLaw>,
}

impl DegreeLaw {
    pub fn solve(avg: f64, k_max: usize, exponent: f64) -> Result<Self> {
        let means: Vec<f64> = (1..=k_max)
            .map(|k| truncated_powerlaw_mean(k, k_max, exponent))
            .collect();
        if avg > means[k_max - 1] + 1e-12 || avg < means[0] - 1e-12 {
            return Err(Error::Parameter(format!(
                "average degree {avg} unattainable with k_max = {k_max} (range {:.3}..={k_max})",
                means[0]
            )));
        }
        // Means increase with k_min; find the bracketing pair.
        let k_min = (1..=k_max)
            .rev()
            .find(|&k| means[k - 1] <= avg)
            .unwrap_or(1);
        let low_mean = means[k_min - 1];
        let (high, low_weight) = if k_min < k_max && avg > low_mean {
            let high_mean = means[k_min];
            (
                Some(DiscretePowerLaw::new(k_min + 1, k_max, exponent)),
                (high_mean - avg) / (high_mean - low_mean),
            )
        } else {
            (None, 1.0)
        };
        Ok(Self {
            k_min,
            low_weight,
            low: DiscretePowerLaw::new(k_min, k_max, exponent),
            high,
        })
    }

    pub fn mean(&self) -> f64 {
        let high = self.high.as_ref().map_or(0.0, DiscretePowerLaw::mean);
        self.low_weight * self.low.mean() + (1.0 - self.low_weight) * high
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.high {
            Some(h) if rng.random::<f64>() >= self.low_weight => h.sample(rng),
            _ => self.low.sample(rng),
        }
    }
}

/// Degree sequence with realized mean within 5% of `avg_degree` and even sum.
pub fn sample_powerlaw_degrees<R: Rng + ?Sized>(spec: &LfrSpec, rng: &mut R) -> Result<Vec<usize>> {
    let law = DegreeLaw::solve(spec.avg_degree, spec.max_degree, spec.degree_exponent)?;
    for _ in 0..MAX_RETRIES {
        let mut deg: Vec<usize> = (0..spec.n).map(|_| law.sample(rng)).collect();
        let mean = deg.iter().sum::<usize>() as f64 / spec.n as f64;
        if (mean - spec.avg_degree).abs() > 0.05 * spec.avg_degree {
            continue;
        }
        if deg.iter().sum::<usize>() % 2 == 1 {
            let below: Vec<usize> = (0..spec.n).filter(|&i| deg[i] < spec.max_degree).collect();
            match below.choose(rng) {
                Some(&i) => deg[i] += 1,
                None => continue,
            }
        }
        return Ok(deg);
    }
    Err(Error::Generation(format!(
        "degree sequence mean never landed within 5% of {}",
        spec.avg_degree
    )))
}

/// Cluster sizes in `[min_cluster, max_cluster]` summing to `n`.
pub fn sample_cluster_sizes<R: Rng + ?Sized>(spec: &LfrSpec, rng: &mut R) -> Result<Vec<usize>> {
    let law = DiscretePowerLaw::new(spec.min_cluster, spec.max_cluster, spec.size_exponent);
    'attempt: for _ in 0..MAX_RETRIES {
        let mut sizes = Vec::new();
        let mut total = 0;
        while total < spec.n {
            let s = law.sample(rng);
            if total + s <= spec.n {
                sizes.push(s);
                total += s;
                continue;
            }
            let rest = spec.n - total;
            if rest >= spec.min_cluster {
                sizes.push(rest);
                total += rest;
                continue;
            }
            // Spread the remainder over clusters that still have room.
            for _ in 0..rest {
                let open: Vec<usize> = (0..sizes.len())
                    .filter(|&c| sizes[c] < spec.max_cluster)
                    .collect();
                match open.choose(rng) {
                    Some(&c) => sizes[c] += 1,
                    None => continue 'attempt,
                }
            }
            total = spec.n;
        }
        return Ok(sizes);
    }
    Err(Error::Generation(format!(
        "cannot partition {} nodes into sizes within [{}, {}]",
        spec.n, spec.min_cluster, spec.max_cluster
    )))
}

/// Internal degree of a node: `(1 - mu)·d` rounded to the nearest integer.
pub fn internal_degree(mu: f64, degree: usize) -> usize {
    ((1.0 - mu) * degree as f64).round() as usize
}

/// Places nodes into clusters so that each cluster can host its members'
/// internal degrees (`size > internal degree`). Nodes with the largest
/// internal degree go first; each picks among feasible clusters with free
/// slots, weighted by free slots.
pub fn assign_memberships<R: Rng + ?Sized>(
    internal: &[usize],
    sizes: &[usize],
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = internal.len();
    let mut order: Vec<usize> = (0..n).collect();
    'attempt: for _ in 0..MAX_RETRIES {
        order.shuffle(rng);
        order.sort_by_key(|&i| std::cmp::Reverse(internal[i]));
        let mut free = sizes.to_vec();
        let mut member = vec![usize::MAX; n];
        for &i in &order {
            let weights: Vec<(usize, usize)> = (0..sizes.len())
                .filter(|&c| free[c] > 0 && sizes[c] > internal[i])
                .map(|c| (c, free[c]))
                .collect();
            let total: usize = weights.iter().map(|w| w.1).sum();
            if total == 0 {
                continue 'attempt;
            }
            let mut pick = rng.random_range(0..total);
            let c = weights
                .iter()
                .find(|&&(_, w)| {
                    if pick < w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .map(|w| w.0)
                .expect("pick < total");
            member[i] = c;
            free[c] -= 1;
        }
        return Ok(member);
    }
    Err(Error::Generation(
        "no feasible membership assignment for the internal degrees".into(),
    ))
}

/// Pairs shuffled stubs into edges accepted by `valid`, then rewires the
/// rejected pairs against accepted edges. Returns the edges and the number of
/// stubs that could not be placed.
fn match_stubs<R: Rng + ?Sized>(
    mut stubs: Vec<usize>,
    valid: impl Fn(usize, usize) -> bool,
    rng: &mut R,
) -> (Vec<(usize, usize)>, usize) {
    let key = |u: usize, v: usize| (u.min(v), u.max(v));
    stubs.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(stubs.len() / 2);
    let mut position: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pending = Vec::new();
    let mut dropped = stubs.len() % 2;
    for pair in stubs.chunks_exact(2) {
        let (u, v) = (pair[0], pair[1]);
        if valid(u, v) && !position.contains_key(&key(u, v)) {
            position.insert(key(u, v), edges.len());
            edges.push(key(u, v));
        } else {
            pending.push((u, v));
        }
    }
    for (u, v) in pending {
        let mut placed = false;
        for _ in 0..REWIRE_ATTEMPTS {
            if edges.is_empty() {
                break;
            }
            let idx = rng.random_range(0..edges.len());
            let (mut x, mut y) = edges[idx];
            if rng.random_bool(0.5) {
                std::mem::swap(&mut x, &mut y);
            }
            // (u,v) + (x,y) -> (u,x) + (v,y)
            let (e1, e2) = (key(u, x), key(v, y));
            if !valid(u, x) || !valid(v, y) || e1 == e2 {
                continue;
            }
            if position.contains_key(&e1) || position.contains_key(&e2) {
                continue;
            }
            position.remove(&edges[idx]);
            let last = edges.len() - 1;
            edges.swap(idx, last);
            edges.pop();
            if idx < edges.len() {
                position.insert(edges[idx], idx);
            }
            for e in [e1, e2] {
                position.insert(e, edges.len());
                edges.push(e);
            }
            placed = true;
            break;
        }
        if !placed {
            dropped += 2;
        }
    }
    (edges, dropped)
}

/// Wires a simple undirected graph where each node sends about `1 - mu` of
/// its stubs inside its cluster. Fails if more than 1% of stubs cannot be
/// placed.
pub fn wire_edges<R: Rng + ?Sized>(
    degrees: &[usize],
    memberships: &[usize],
    mu: f64,
    rng: &mut R,
) -> Result<SparseMatrix> {
    let n = degrees.len();
    let k = memberships.iter().max().map_or(0, |m| m + 1);
    let mut internal: Vec<usize> = degrees.iter().map(|&d| internal_degree(mu, d)).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &c) in memberships.iter().enumerate() {
        members[c].push(i);
    }
    for (c, nodes) in members.iter().enumerate() {
        if let Some(&i) = nodes.iter().find(|&&i| internal[i] + 1 > nodes.len()) {
            return Err(Error::Generation(format!(
                "cluster {c} of size {} cannot host internal degree {}",
                nodes.len(),
                internal[i]
            )));
        }
        // Each cluster needs an even number of internal stubs.
        if nodes.iter().map(|&i| internal[i]).sum::<usize>() % 2 == 1 {
            let movable: Vec<usize> = nodes.iter().copied().filter(|&i| internal[i] > 0).collect();
            if let Some(&i) = movable.choose(rng) {
                internal[i] -= 1;
            }
        }
    }
    let total_stubs: usize = degrees.iter().sum();
    let mut pairs = Vec::with_capacity(total_stubs / 2);
    let mut dropped = 0;
    for nodes in &members {
        let stubs: Vec<usize> = nodes
            .iter()
            .flat_map(|&i| std::iter::repeat_n(i, internal[i]))
            .collect();
        let (e, d) = match_stubs(stubs, |u, v| u != v, rng);
        pairs.extend(e);
        dropped += d;
    }
    let external: Vec<usize> = (0..n)
        .flat_map(|i| std::iter::repeat_n(i, degrees[i] - internal[i]))
        .collect();
    let (e, d) = match_stubs(
        external,
        |u, v| u != v && memberships[u] != memberships[v],
        rng,
    );
    pairs.extend(e);
    dropped += d;
    if dropped * 100 > total_stubs.max(1) {
        return Err(Error::Generation(format!(
            "{dropped} of {total_stubs} stubs left unmatched"
        )));
    }
    SparseMatrix::adjacency_from_pairs(n, pairs)
}

/// Whether clusters get disjoint attribute supports (`K·D ≤ m`).
pub fn disjoint_prototypes(num_clusters: usize, attr_dim: usize, attrs_per_cluster: usize) -> bool {
    num_clusters * attrs_per_cluster <= attr_dim
}

/// Per-cluster prototype index sets.
pub fn attribute_prototypes<R: Rng + ?Sized>(
    num_clusters: usize,
    attr_dim: usize,
    attrs_per_cluster: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    if disjoint_prototypes(num_clusters, attr_dim, attrs_per_cluster) {
        let perm = index::sample(rng, attr_dim, attr_dim).into_vec();
        perm.chunks(attrs_per_cluster.max(1))
            .take(num_clusters)
            .map(<[usize]>::to_vec)
            .chain(std::iter::repeat_with(Vec::new))
            .take(num_clusters)
            .collect()
    } else {
        (0..num_clusters)
            .map(|_| index::sample(rng, attr_dim, attrs_per_cluster).into_vec())
            .collect()
    }
}

/// Binary attributes: each node starts from its cluster prototype (D ones)
/// and then has exactly `round(noise_ratio · m)` distinct coordinates flipped.
pub fn generate_attributes<R: Rng + ?Sized>(
    memberships: &[usize],
    attr_dim: usize,
    attrs_per_cluster: usize,
    noise_ratio: f64,
    rng: &mut R,
) -> DenseMatrix {
    let k = memberships.iter().max().map_or(0, |m| m + 1);
    let protos = attribute_prototypes(k, attr_dim, attrs_per_cluster, rng);
    let flips = (noise_ratio * attr_dim as f64).round() as usize;
    let mut x = DenseMatrix::zeros(memberships.len(), attr_dim);
    for (i, &c) in memberships.iter().enumerate() {
        let row = x.row_mut(i);
        for &j in &protos[c] {
            row[j] = 1.0;
        }
        for j in index::sample(rng, attr_dim, flips.min(attr_dim)) {
            row[j] = 1.0 - row[j];
        }
    }
    x
}

/// Full generation, deterministic in `spec.seed`.
pub fn generate(spec: &LfrSpec) -> Result<AttributedNetwork> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last_err = None;
    for _ in 0..10 {
        let attempt = (|| {
            let degrees = sample_powerlaw_degrees(spec, &mut rng)?;
            let sizes = sample_cluster_sizes(spec, &mut rng)?;
            let internal: Vec<usize> = degrees.iter().map(|&d| internal_degree(spec.mu, d)).collect();
            let member = assign_memberships(&internal, &sizes, &mut rng)?;
            let adjacency = wire_edges(&degrees, &member, spec.mu, &mut rng)?;
            Ok::<_, Error>((member, adjacency))
        })();
        match attempt {
            Ok((member, adjacency)) => {
                let x = generate_attributes(
                    &member,
                    spec.attr_dim,
                    spec.attrs_per_cluster,
                    spec.noise_ratio,
                    &mut rng,
                );
                return AttributedNetwork::new(adjacency, x, Some(member));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Generation("exhausted retries".into())))
}

/// Assigns each row to the cluster whose prototype is nearest in Hamming
/// distance; used to check attribute separability.
pub fn nearest_prototype_labels(x: &DenseMatrix, prototypes: &DenseMatrix) -> Vec<usize> {
    x.iter_rows()
        .map(|r| {
            (0..prototypes.rows())
                .min_by_key(|&c| {
                    r.iter()
                        .zip(prototypes.row(c))
                        .filter(|(a, b)| a != b)
                        .count()
                })
                .unwrap_or(0)
        })
        .collect()
}

/// Number of distinct rows in `x`.
pub fn distinct_rows(x: &DenseMatrix) -> usize {
    let set: HashSet<Vec<u64>> = x
        .iter_rows()
        .map(|r| r.iter().map(|v| v.to_bits()).collect())
        .collect();
    set.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn degree_law_brackets_target_by_brute_force() {
        // Brute-force scan of integer lower cutoffs over 1..=50.
        let means: Vec<(usize, f64)> = (1..=50)
            .map(|k| {
                let num: f64 = (k..=50).map(|j| j as f64 * (j as f64).powi(-2)).sum();
                let den: f64 = (k..=50).map(|j| (j as f64).powi(-2)).sum();
                (k, num / den)
            })
            .collect();
        let (lo, lo_mean) = means.iter().rev().find(|m| m.1 <= 20.0).copied().unwrap();
        assert_eq!(lo, 10);
        assert!(lo_mean > 19.0 && lo_mean < 20.0, "{lo_mean}");
        assert!(means[lo].1 > 20.0);
        let law = DegreeLaw::solve(20.0, 50, 2.0).unwrap();
        assert_eq!(law.k_min, lo);
        assert!((law.mean() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn degrees_hit_mean_bound_and_parity() {
        let spec = LfrSpec::benchmark(0.6, 0.1, 0);
        for seed in 0..5 {
            let d = sample_powerlaw_degrees(&spec, &mut rng(seed)).unwrap();
            let mean = d.iter().sum::<usize>() as f64 / d.len() as f64;
            assert!((19.0..=21.0).contains(&mean), "{mean}");
            assert!(d.iter().all(|&k| k <= 50));
            assert_eq!(d.iter().sum::<usize>() % 2, 0);
        }
    }

    #[test]
    fn infeasible_average_degree_is_rejected() {
        let mut spec = LfrSpec::benchmark(0.6, 0.1, 0);
        spec.avg_degree = 60.0;
        assert!(matches!(
            sample_powerlaw_degrees(&spec, &mut rng(0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn forced_cluster_sizes() {
        let mut spec = LfrSpec::benchmark(0.6, 0.1, 0);
        spec.min_cluster = 100;
        spec.max_cluster = 100;
        assert_eq!(sample_cluster_sizes(&spec, &mut rng(1)).unwrap(), vec![100; 10]);
    }

    #[test]
    fn cluster_sizes_within_bounds() {
        let spec = LfrSpec::benchmark(0.6, 0.1, 0);
        for seed in 0..10 {
            let s = sample_cluster_sizes(&spec, &mut rng(seed)).unwrap();
            assert_eq!(s.iter().sum::<usize>(), 1000);
            assert!(s.iter().all(|&c| (20..=100).contains(&c)), "{s:?}");
        }
    }

    #[test]
    fn size_exponent_fattens_small_sizes() {
        // With exponent 1 small sizes dominate relative to the uniform law.
        let count_small = |exp: f64| {
            let law = DiscretePowerLaw::new(20, 100, exp);
            let mut r = rng(5);
            (0..100).map(|_| law.sample(&mut r)).filter(|&s| s < 60).count()
        };
        assert!(count_small(1.0) > count_small(0.0));
    }

    #[test]
    fn single_cluster_zero_mixing_is_all_internal() {
        let degrees = vec![3; 10];
        let member = vec![0; 10];
        let a = wire_edges(&degrees, &member, 0.0, &mut rng(3)).unwrap();
        assert!(a.is_symmetric());
        assert_eq!(a.nnz() % 2, 0);
        assert!(a.nnz() >= 28);
    }

    #[test]
    fn attributes_without_noise_follow_prototypes() {
        let member: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let x = generate_attributes(&member, 100, 10, 0.0, &mut rng(8));
        for r in x.iter_rows() {
            assert_eq!(r.iter().sum::<f64>(), 10.0);
        }
        for i in 0..40 {
            for j in 0..40 {
                let ham = x.row(i).iter().zip(x.row(j)).filter(|(a, b)| a != b).count();
                if member[i] == member[j] {
                    assert_eq!(ham, 0);
                } else {
                    assert_eq!(ham, 20);
                }
            }
        }
        assert_eq!(distinct_rows(&x), 4);
    }

    #[test]
    fn noise_flips_exact_count() {
        let member: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let clean = generate_attributes(&member, 100, 10, 0.0, &mut rng(2));
        let noisy = generate_attributes(&member, 100, 10, 0.4, &mut rng(2));
        for i in 0..30 {
            let ham = clean.row(i).iter().zip(noisy.row(i)).filter(|(a, b)| a != b).count();
            assert_eq!(ham, 40);
        }
    }

    #[test]
    fn overlapping_prototypes_when_too_many_clusters() {
        assert!(!disjoint_prototypes(20, 100, 10));
        let p = attribute_prototypes(20, 100, 10, &mut rng(0));
        assert!(p.iter().all(|s| s.len() == 10));
    }

    #[test]
    fn generated_network_meets_contract() {
        for mu in [0.6, 0.7, 0.8] {
            let spec = LfrSpec::benchmark(mu, 0.1, 11);
            let net = generate(&spec).unwrap();
            let a = net.adjacency();
            assert!(a.is_symmetric());
            assert!((0..a.rows()).all(|i| a.get(i, i) == 0.0));
            let frac = net.external_edge_fraction().unwrap();
            assert!((frac - mu).abs() <= 0.05, "mu={mu} realized {frac}");
            let k = net.num_clusters().unwrap();
            assert!(k >= 1000 / spec.max_cluster && k <= 1000 / spec.min_cluster, "{k}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = LfrSpec::benchmark(0.6, 0.1, 4);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(generate(&spec).unwrap(), generate(&spec.with_seed(5)).unwrap());
    }
}
