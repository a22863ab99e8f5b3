//! From temporal correlations back to spatial ones.
//!
//! For a pointer tuple of length `n` the temporal correlation decomposes as
//! `T_n(t) = Σ_A ∏_{i∉A} β_{t_i} ∏_{i∈A} (1-β_{t_i}) L_A(t_A)` where
//! `L_A = (2π)^{-|A|d} Σ_k ∏_{i∈A} γ̂_{t_i}(k_i) Ŝ_{|A|}(-k)`. Once the lower
//! orders are known, `T_n` at times `(j_1 α_1 t_0, …)` yields moment sums
//! `Σ_k z_k^m Ŝ_n(-k)` of the generators `z_k = ∏ γ̂_{α_i t_0}(k_i)`, and a
//! truncated Vandermonde solve returns the table `Ŝ_n`.
//!
//! Two solves are offered. The diagonal one follows the construction
//! literally: one power `m` shared by all coordinates, so the generators are
//! the products and must be pairwise distinct. The separable one lets every
//! coordinate carry its own power, which turns the system into a tensor
//! product of one-dimensional Vandermonde systems that are far better
//! conditioned.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{
    estimate_temporal, exact_temporal_fourier, CorrelationEstimate, IndicatorTransform,
};
use crate::error::{Error, Result};
use crate::step_law::{distinctness_report, index_box, IndexDomain, StepLaw};
use crate::torus::{Scenery, TAU};
use crate::vandermonde::{vandermonde_solve, GeneratorSet, TRUST_CONDITION};

/// `Ŝ_n(k)` on the box `|k_i| <= K`, `k` flattened to `n·d` integers.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialFourierTable {
    pub n: usize,
    pub dim: usize,
    pub cutoff: usize,
    entries: BTreeMap<Vec<i64>, Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TableEntryJson {
    k: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TableJson {
    n: usize,
    #[serde(rename = "K")]
    cutoff: usize,
    #[serde(default = "default_dim")]
    dim: usize,
    entries: Vec<TableEntryJson>,
}

fn default_dim() -> usize {
    1
}

impl SpatialFourierTable {
    pub fn empty(n: usize, dim: usize, cutoff: usize) -> Self {
        SpatialFourierTable {
            n,
            dim,
            cutoff,
            entries: BTreeMap::new(),
        }
    }

    /// Closed-form table of a known scenery.
    pub fn exact(s: &Scenery, n: usize, cutoff: usize) -> Self {
        let ft = IndicatorTransform::new(s, 2 * cutoff);
        let mut table = Self::empty(n, s.dim(), cutoff);
        for k in index_box(n * s.dim(), cutoff) {
            let v = ft.spatial_fourier(&k);
            table.entries.insert(k, v);
        }
        table
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        self.entries.get(k).copied()
    }

    pub fn insert(&mut self, k: Vec<i64>, v: Complex64) {
        self.entries.insert(k, v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Replace every entry by `(Ŝ(k) + conj Ŝ(-k)) / 2`.
    pub fn enforce_conjugate_symmetry(&mut self) {
        let snapshot = self.entries.clone();
        for (k, v) in self.entries.iter_mut() {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            if let Some(w) = snapshot.get(&neg) {
                *v = 0.5 * (*v + w.conj());
            }
        }
    }

    /// `max_k |Ŝ(-k) - conj Ŝ(k)|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|(k, v)| {
                let neg: Vec<i64> = k.iter().map(|x| -x).collect();
                self.entries.get(&neg).map(|w| (*w - v.conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// `‖self - reference‖₂ / ‖reference‖₂` over the reference's entries.
    pub fn relative_error(&self, reference: &SpatialFourierTable) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, r) in reference.entries() {
            let v = self.get(k).unwrap_or_default();
            num += (v - r).norm_sqr();
            den += r.norm_sqr();
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Truncated series `(2π)^{-nd} Σ_k Ŝ_n(k) e^{ik·y}`.
    pub fn spatial_value(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.n * self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.n * self.dim,
                got: y.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in &self.entries {
            let phase: f64 = k.iter().zip(y).map(|(a, b)| *a as f64 * b).sum();
            acc += v * Complex64::from_polar(1.0, phase);
        }
        Ok(acc.re / TAU.powi((self.n * self.dim) as i32))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("table json")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let json = TableJson {
            n: self.n,
            cutoff: self.cutoff,
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| TableEntryJson {
                    k: k.clone(),
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        };
        serde_json::to_value(json).expect("table json")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: TableJson = serde_json::from_str(s)?;
        let mut table = Self::empty(json.n, json.dim, json.cutoff);
        for e in json.entries {
            if e.k.len() != json.n * json.dim {
                return Err(Error::InvalidArgument(format!(
                    "table entry {:?} has the wrong length",
                    e.k
                )));
            }
            table.entries.insert(e.k, Complex64::new(e.re, e.im));
        }
        Ok(table)
    }
}

/// Binomial coefficient as a float.
fn binomial(m: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Coefficients `c'_1..c'_m` with `γ̂_{t0}^m = Σ_j c'_j γ̂_{j t0}`.
///
/// From `(β + (1-β)γ̂_{t})^j = D̂_{jt} = β^j + (1-β^j) γ̂_{jt}` and the binomial
/// expansion of `((D̂_t - β)/(1-β))^m`, whose pure-`β` terms sum to
/// `(β - β)^m = 0`:
/// `c'_j = C(m, j) (-β)^{m-j} (1 - β^j) / (1 - β)^m`, `β = β_{t0}`.
pub fn power_reduction(law: &StepLaw, t0: f64, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("power must be at least 1".into()));
    }
    let beta = law.beta(t0)?;
    if beta >= 1.0 {
        return Err(Error::InvalidArgument(
            "beta_t0 = 1: no continuous part".into(),
        ));
    }
    let norm = (1.0 - beta).powi(m as i32);
    Ok((1..=m)
        .map(|j| {
            let sign_pow = if m == j {
                1.0
            } else {
                (-beta).powi((m - j) as i32)
            };
            binomial(m, j) * sign_pow * (1.0 - beta.powi(j as i32)) / norm
        })
        .collect())
}

/// Multipliers `α_i` and the generator table `z_k = ∏_i γ̂_{α_i t0}(k_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub t0: f64,
    pub alphas: Vec<f64>,
    pub dim: usize,
    pub cutoff: usize,
    /// Flattened `n·d` indices in lexicographic order.
    pub indices: Vec<Vec<i64>>,
    pub generators: Vec<Complex64>,
    pub min_distance: f64,
    pub min_modulus: f64,
}

impl MultiplierSet {
    /// Build the generator table for given multipliers without any checks
    /// on its margins.
    pub fn with_alphas(law: &StepLaw, t0: f64, alphas: Vec<f64>, cutoff: usize) -> Result<Self> {
        let d = law.dim();
        let n = alphas.len();
        let single = index_box(d, cutoff);
        let coeffs: Vec<Vec<Complex64>> = alphas
            .iter()
            .map(|a| {
                single
                    .iter()
                    .map(|k| law.gamma_hat(a * t0, k))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let indices = index_box(n * d, cutoff);
        let side = single.len();
        let generators: Vec<Complex64> = (0..indices.len())
            .map(|flat| {
                let mut rem = flat;
                let mut prod = Complex64::new(1.0, 0.0);
                for i in (0..n).rev() {
                    prod *= coeffs[i][rem % side];
                    rem /= side;
                }
                prod
            })
            .collect();
        let min_modulus = generators
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        let mut min_distance = f64::INFINITY;
        for i in 0..generators.len() {
            for j in i + 1..generators.len() {
                min_distance = min_distance.min((generators[i] - generators[j]).norm());
            }
        }
        Ok(MultiplierSet {
            t0,
            alphas,
            dim: d,
            cutoff,
            indices,
            generators,
            min_distance,
            min_modulus,
        })
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    fn meets(&self, margin: f64) -> bool {
        self.min_distance >= margin && self.min_modulus >= margin
    }
}

/// Draw `α_i` uniformly from `[0.5, 2]` until the product table has every
/// pairwise distance and every modulus at least `margin`. For `n = 1` the
/// draw `α = 1` is tried first.
pub fn choose_multipliers<R: Rng + ?Sized>(
    law: &StepLaw,
    t0: f64,
    n: usize,
    cutoff: usize,
    margin: f64,
    rng: &mut R,
    budget: usize,
) -> Result<MultiplierSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let base = distinctness_report(law, t0, cutoff, margin, IndexDomain::Full)?;
    if !base.passed {
        return Err(Error::Distinctness(format!(
            "coefficients at t0 = {t0}, K = {cutoff}: min distance {:.3e}, min modulus {:.3e}, margin {margin:.1e}",
            base.min_distance, base.min_modulus
        )));
    }
    if n == 1 {
        let set = MultiplierSet::with_alphas(law, t0, vec![1.0], cutoff)?;
        if set.meets(margin) {
            return Ok(set);
        }
    }
    let mut best = (0.0f64, 0.0f64);
    for _ in 0..budget {
        let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
        let set = MultiplierSet::with_alphas(law, t0, alphas, cutoff)?;
        if set.meets(margin) {
            return Ok(set);
        }
        if set.min_distance.min(set.min_modulus) > best.0.min(best.1) {
            best = (set.min_distance, set.min_modulus);
        }
    }
    Err(Error::MultipliersExhausted {
        attempts: budget,
        best_distance: best.0,
        best_modulus: best.1,
    })
}

/// Source of temporal correlations `T_n(t)`; an empty tuple asks for `S_0`.
pub trait TemporalOracle: Sync {
    fn temporal(&self, t: &[f64]) -> Result<CorrelationEstimate>;
}

/// Fourier-series oracle; `stderr` carries the truncation estimate.
pub struct ExactTemporal<'a> {
    pub law: &'a StepLaw,
    pub scenery: &'a Scenery,
    pub cutoff: usize,
}

impl TemporalOracle for ExactTemporal<'_> {
    fn temporal(&self, t: &[f64]) -> Result<CorrelationEstimate> {
        let r = exact_temporal_fourier(self.law, self.scenery, t, self.cutoff)?;
        Ok(CorrelationEstimate {
            value: r.value,
            stderr: r.truncation,
            samples: 0,
        })
    }
}

/// Mix the bits of a time tuple into a seed so each query key has its own
/// reproducible stream.
pub fn query_seed(seed: u64, t: &[f64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    t.iter().fold(splitmix(seed ^ t.len() as u64), |h, v| {
        splitmix(h ^ v.to_bits())
    })
}

/// Monte Carlo oracle seeded per query key.
pub struct MonteCarloTemporal<'a> {
    pub law: &'a StepLaw,
    pub scenery: &'a Scenery,
    pub samples: u64,
    pub gap: Option<f64>,
    pub seed: u64,
}

impl TemporalOracle for MonteCarloTemporal<'_> {
    fn temporal(&self, t: &[f64]) -> Result<CorrelationEstimate> {
        estimate_temporal(
            self.law,
            self.scenery,
            t,
            self.samples,
            self.gap,
            query_seed(self.seed, t),
        )
    }
}

/// Wraps an oracle and adds Gaussian noise of a fixed standard deviation,
/// seeded per query key. Used to study how noise propagates.
pub struct NoisyTemporal<O> {
    pub inner: O,
    pub sd: f64,
    pub seed: u64,
}

impl<O: TemporalOracle> TemporalOracle for NoisyTemporal<O> {
    fn temporal(&self, t: &[f64]) -> Result<CorrelationEstimate> {
        let mut e = self.inner.temporal(t)?;
        let mut rng = ChaCha8Rng::seed_from_u64(query_seed(self.seed, t));
        let z: f64 = rng.sample(StandardNormal);
        e.value += self.sd * z;
        e.stderr = e.stderr.hypot(self.sd);
        Ok(e)
    }
}

/// Oracle reading an observed trace sampled every `dt`. Times are snapped
/// to the sampling grid; the standard error comes from batch means.
pub struct TraceTemporal {
    values: Vec<f64>,
    dt: f64,
}

/// Number of batches behind the [`TraceTemporal`] standard error.
pub const TRACE_BATCHES: usize = 20;

impl TraceTemporal {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "trace step must be positive, got {dt}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument("trace is too short".into()));
        }
        Ok(TraceTemporal { values, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

impl TemporalOracle for TraceTemporal {
    fn temporal(&self, t: &[f64]) -> Result<CorrelationEstimate> {
        let mut offsets = Vec::with_capacity(t.len());
        let mut acc = 0usize;
        for &ti in t {
            let steps = (ti / self.dt).round();
            if steps.is_nan() || steps < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "gap {ti} is below the trace step {}",
                    self.dt
                )));
            }
            acc += steps as usize;
            offsets.push(acc);
        }
        if acc + TRACE_BATCHES >= self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "trace of {} samples too short for total gap {acc}",
                self.values.len()
            )));
        }
        let count = self.values.len() - acc;
        let product = |i: usize| {
            offsets
                .iter()
                .fold(self.values[i], |p, &o| p * self.values[i + o])
        };
        let per = count / TRACE_BATCHES;
        let means: Vec<f64> = (0..TRACE_BATCHES)
            .map(|b| (b * per..(b + 1) * per).map(product).sum::<f64>() / per as f64)
            .collect();
        let value = (0..count).map(product).sum::<f64>() / count as f64;
        let bm = means.iter().sum::<f64>() / TRACE_BATCHES as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (TRACE_BATCHES - 1) as f64;
        Ok(CorrelationEstimate {
            value,
            stderr: (var / TRACE_BATCHES as f64).sqrt(),
            samples: count as u64,
        })
    }
}

/// Memoising front for an oracle; queries run in parallel.
struct QueryCache<'a> {
    oracle: &'a dyn TemporalOracle,
    cache: Mutex<HashMap<Vec<u64>, CorrelationEstimate>>,
}

impl<'a> QueryCache<'a> {
    fn new(oracle: &'a dyn TemporalOracle) -> Self {
        QueryCache {
            oracle,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn key(t: &[f64]) -> Vec<u64> {
        t.iter().map(|v| v.to_bits()).collect()
    }

    fn prefetch(&self, tuples: &[Vec<f64>]) -> Result<()> {
        let missing: Vec<&Vec<f64>> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            tuples
                .iter()
                .filter(|t| !cache.contains_key(&Self::key(t)) && seen.insert(Self::key(t)))
                .collect()
        };
        let results: Vec<Result<CorrelationEstimate>> = missing
            .par_iter()
            .map(|t| self.oracle.temporal(t))
            .collect();
        let mut cache = self.cache.lock().expect("cache lock");
        for (t, r) in missing.into_iter().zip(results) {
            cache.insert(Self::key(t), r?);
        }
        Ok(())
    }

    fn get(&self, t: &[f64]) -> Result<CorrelationEstimate> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&Self::key(t)) {
            return Ok(*v);
        }
        let v = self.oracle.temporal(t)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(Self::key(t), v);
        Ok(v)
    }

    fn len(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

/// Evaluates `L_{[n]}(t)` from `T_n(t)` by removing the lower-order
/// subsets, which are computed from the known tables.
struct ContinuousPart<'a> {
    law: &'a StepLaw,
    lower: &'a [SpatialFourierTable],
    s0: f64,
}

impl ContinuousPart<'_> {
    fn lower_term(&self, times: &[f64]) -> Result<f64> {
        let a = times.len();
        if a == 0 {
            return Ok(self.s0);
        }
        let table = self
            .lower
            .iter()
            .find(|tb| tb.n == a && tb.dim == self.law.dim())
            .ok_or(Error::MissingLowerOrder(a))?;
        let d = self.law.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in table.entries() {
            let mut prod = Complex64::new(1.0, 0.0);
            for (i, &ti) in times.iter().enumerate() {
                let ki: Vec<i64> = k[i * d..(i + 1) * d].iter().map(|x| -x).collect();
                prod *= self.law.gamma_hat(ti, &ki)?;
            }
            acc += prod * v;
        }
        Ok(acc.re / TAU.powi((a * d) as i32))
    }

    /// `(value, stderr)` of `L_{[n]}(t)` given an estimate of `T_n(t)`.
    fn evaluate(&self, t: &[f64], est: CorrelationEstimate) -> Result<(f64, f64)> {
        let n = t.len();
        let betas: Vec<f64> = t
            .iter()
            .map(|&ti| self.law.beta(ti))
            .collect::<Result<_>>()?;
        let full: f64 = betas.iter().map(|b| 1.0 - b).product();
        if full <= 0.0 {
            return Err(Error::InvalidArgument(
                "no continuous part at these times".into(),
            ));
        }
        let mut rest = est.value;
        if betas.iter().any(|&b| b > 0.0) {
            for mask in 0u32..((1 << n) - 1) {
                let weight: f64 = (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            1.0 - betas[i]
                        } else {
                            betas[i]
                        }
                    })
                    .product();
                if weight == 0.0 {
                    continue;
                }
                let sub: Vec<f64> = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| t[i])
                    .collect();
                rest -= weight * self.lower_term(&sub)?;
            }
        }
        Ok((rest / full, est.stderr / full))
    }
}

/// Moment sums `μ_m`, `m = 1..M`, with propagated standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSums {
    pub values: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub queries: usize,
}

/// Per-coordinate expansion of `γ̂_{α t0}^m` as `(coefficient, j)` pairs.
fn reduction_terms(law: &StepLaw, base: f64, m: usize) -> Result<Vec<(f64, usize)>> {
    Ok(power_reduction(law, base, m)?
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != 0.0)
        .map(|(j, c)| (c, j + 1))
        .collect())
}

/// Cartesian product of per-coordinate expansions: every combination
/// yields a coefficient and a time tuple.
fn expand_terms(per_coord: &[Vec<(f64, usize)>], bases: &[f64]) -> Vec<(f64, Vec<f64>)> {
    let mut out = vec![(1.0, Vec::new())];
    for (terms, base) in per_coord.iter().zip(bases) {
        out = out
            .into_iter()
            .flat_map(|(c, times)| {
                terms.iter().map(move |(cj, j)| {
                    let mut t = times.clone();
                    t.push(*j as f64 * base);
                    (c * cj, t)
                })
            })
            .collect();
    }
    out
}

/// `μ_m = Σ_k z_k^m Ŝ_n(-k)` for `m = 1..m_max`, one shared power for all
/// coordinates. `lower` must hold the tables of orders `1..n-1` when the
/// law has an atom.
pub fn moment_sums(
    oracle: &dyn TemporalOracle,
    law: &StepLaw,
    mset: &MultiplierSet,
    m_max: usize,
    lower: &[SpatialFourierTable],
) -> Result<MomentSums> {
    let n = mset.order();
    let d = law.dim();
    let bases: Vec<f64> = mset.alphas.iter().map(|a| a * mset.t0).collect();
    let cache = QueryCache::new(oracle);
    let s0 = cache.get(&[])?.value;
    let part = ContinuousPart { law, lower, s0 };
    let scale = TAU.powi((n * d) as i32);

    let mut plans = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let per: Vec<Vec<(f64, usize)>> = bases
            .iter()
            .map(|&b| reduction_terms(law, b, m))
            .collect::<Result<_>>()?;
        plans.push(expand_terms(&per, &bases));
    }
    let all: Vec<Vec<f64>> = plans.iter().flatten().map(|(_, t)| t.clone()).collect();
    cache.prefetch(&all)?;

    let mut values = Vec::with_capacity(m_max);
    let mut stderr = Vec::with_capacity(m_max);
    for plan in &plans {
        let mut v = 0.0;
        let mut var = 0.0;
        for (c, t) in plan {
            let (l, se) = part.evaluate(t, cache.get(t)?)?;
            v += c * l;
            var += (c * se).powi(2);
        }
        values.push(Complex64::new(v * scale, 0.0));
        stderr.push(var.sqrt() * scale);
    }
    Ok(MomentSums {
        values,
        stderr,
        queries: cache.len(),
    })
}

/// A recovered table with solver diagnostics.
#[derive(Clone, Debug)]
pub struct Recovery {
    pub table: SpatialFourierTable,
    pub residual_norm: f64,
    pub condition: f64,
    pub trusted: bool,
}

/// Solve the diagonal Vandermonde system for `Ŝ_n` and enforce conjugate
/// symmetry.
pub fn recover_spatial_fourier(
    moments: &MomentSums,
    mset: &MultiplierSet,
    cutoff: usize,
) -> Result<Recovery> {
    if cutoff != mset.cutoff {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} does not match the multiplier table ({})",
            mset.cutoff
        )));
    }
    if moments.values.len() < mset.generators.len() {
        return Err(Error::InvalidArgument(format!(
            "need {} moments, got {}",
            mset.generators.len(),
            moments.values.len()
        )));
    }
    let gens = GeneratorSet::new(mset.generators.clone())?;
    let sol = vandermonde_solve(&gens, &moments.values)?;
    let x = gens.to_input_order(&sol.x);
    let mut table = SpatialFourierTable::empty(mset.order(), mset.dim, cutoff);
    for (k, v) in mset.indices.iter().zip(x) {
        table.insert(k.iter().map(|v| -v).collect(), v);
    }
    table.enforce_conjugate_symmetry();
    Ok(Recovery {
        table,
        residual_norm: sol.residual_norm,
        condition: sol.condition,
        trusted: sol.trusted,
    })
}

/// Moment grid `μ_{m_1..m_n} = Σ_k ∏_i γ̂_{α_i t0}(k_i)^{m_i} Ŝ_n(-k)` for
/// `1 <= m_i <= m_max`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentGrid {
    pub order: usize,
    pub m_max: usize,
    pub values: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub queries: usize,
}

pub fn moment_grid(
    oracle: &dyn TemporalOracle,
    law: &StepLaw,
    t0: f64,
    alphas: &[f64],
    m_max: usize,
    lower: &[SpatialFourierTable],
) -> Result<MomentGrid> {
    let n = alphas.len();
    if n == 0 || m_max == 0 {
        return Err(Error::InvalidArgument("empty moment grid".into()));
    }
    let d = law.dim();
    let bases: Vec<f64> = alphas.iter().map(|a| a * t0).collect();
    let cache = QueryCache::new(oracle);
    let s0 = cache.get(&[])?.value;
    let part = ContinuousPart { law, lower, s0 };
    let scale = TAU.powi((n * d) as i32);
    let per_power: Vec<Vec<Vec<(f64, usize)>>> = bases
        .iter()
        .map(|&b| {
            (1..=m_max)
                .map(|m| reduction_terms(law, b, m))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let total = m_max.pow(n as u32);
    let plans: Vec<Vec<(f64, Vec<f64>)>> = (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut idx = vec![0usize; n];
            for i in (0..n).rev() {
                idx[i] = rem % m_max;
                rem /= m_max;
            }
            let per: Vec<Vec<(f64, usize)>> =
                (0..n).map(|i| per_power[i][idx[i]].clone()).collect();
            expand_terms(&per, &bases)
        })
        .collect();
    let all: Vec<Vec<f64>> = plans.iter().flatten().map(|(_, t)| t.clone()).collect();
    cache.prefetch(&all)?;
    let mut values = Vec::with_capacity(total);
    let mut stderr = Vec::with_capacity(total);
    for plan in &plans {
        let mut v = 0.0;
        let mut var = 0.0;
        for (c, t) in plan {
            let (l, se) = part.evaluate(t, cache.get(t)?)?;
            v += c * l;
            var += (c * se).powi(2);
        }
        values.push(Complex64::new(v * scale, 0.0));
        stderr.push(var.sqrt() * scale);
    }
    Ok(MomentGrid {
        order: n,
        m_max,
        values,
        stderr,
        queries: cache.len(),
    })
}

/// Mode-by-mode solve of the tensor Vandermonde system behind a
/// [`MomentGrid`]. Unknowns live on `|k_i| <= solve_cutoff`; only entries
/// with `|k_i| <= cutoff` are reported, the outer shell absorbing the
/// truncation tail.
pub fn recover_spatial_fourier_separable(
    grid: &MomentGrid,
    law: &StepLaw,
    t0: f64,
    alphas: &[f64],
    cutoff: usize,
    solve_cutoff: usize,
) -> Result<Recovery> {
    let n = grid.order;
    if alphas.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: alphas.len(),
        });
    }
    if solve_cutoff < cutoff {
        return Err(Error::InvalidArgument(
            "solve cutoff below report cutoff".into(),
        ));
    }
    let d = law.dim();
    let single = index_box(d, solve_cutoff);
    let l = single.len();
    if grid.m_max < l {
        return Err(Error::InvalidArgument(format!(
            "need at least {l} powers per coordinate, got {}",
            grid.m_max
        )));
    }
    let mut shape = vec![grid.m_max; n];
    let mut data = grid.values.clone();
    let mut condition = 1.0;
    let mut residual2 = 0.0;
    for (axis, alpha) in alphas.iter().enumerate() {
        let gens = GeneratorSet::new(
            single
                .iter()
                .map(|k| law.gamma_hat(alpha * t0, k))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let mut next_shape = shape.clone();
        next_shape[axis] = l;
        let mut next = vec![Complex64::new(0.0, 0.0); outer * l * stride];
        let mut mode_cond: f64 = 0.0;
        for o in 0..outer {
            for s in 0..stride {
                let fiber: Vec<Complex64> =
                    (0..len).map(|i| data[(o * len + i) * stride + s]).collect();
                let sol = vandermonde_solve(&gens, &fiber)?;
                mode_cond = mode_cond.max(sol.condition);
                residual2 += sol.residual_norm.powi(2);
                for (i, v) in gens.to_input_order(&sol.x).into_iter().enumerate() {
                    next[(o * l + i) * stride + s] = v;
                }
            }
        }
        condition *= mode_cond;
        shape = next_shape;
        data = next;
    }
    let mut table = SpatialFourierTable::empty(n, d, cutoff);
    let keep = cutoff as i64;
    for (flat, v) in data.into_iter().enumerate() {
        let mut rem = flat;
        let mut k = vec![0i64; n * d];
        for i in (0..n).rev() {
            let idx = &single[rem % l];
            rem /= l;
            for c in 0..d {
                k[i * d + c] = -idx[c];
            }
        }
        if k.iter().all(|x| x.abs() <= keep) {
            table.insert(k, v);
        }
    }
    table.enforce_conjugate_symmetry();
    Ok(Recovery {
        table,
        residual_norm: residual2.sqrt(),
        condition,
        trusted: condition <= TRUST_CONDITION,
    })
}

/// Forward pointer tuple visiting the same set as `k`, up to translation:
/// consecutive gaps of the sorted distinct partial sums `0, k_1, k_1+k_2, …`.
pub fn reduce_pointer(k: &[i64]) -> Vec<u64> {
    let mut sums = Vec::with_capacity(k.len() + 1);
    let mut acc = 0i64;
    sums.push(0);
    for v in k {
        acc += v;
        sums.push(acc);
    }
    sums.sort_unstable();
    sums.dedup();
    sums.windows(2).map(|w| (w[1] - w[0]) as u64).collect()
}

/// Table of `R(k) = S_n(kδ) + S_n(-kδ)` on non-negative integer tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTable {
    pub delta: f64,
    pub entries: BTreeMap<Vec<u64>, f64>,
}

/// Memoised evaluation of `R(k) = S_n(kδ) + S_n(-kδ)` from `σ_n`.
pub struct SymmetricRecursion<F> {
    sigma: F,
    delta: f64,
    memo: HashMap<Vec<u64>, f64>,
}

impl<F: Fn(&[f64]) -> Result<f64>> SymmetricRecursion<F> {
    /// `δ` must be `2π/q` for a positive integer `q`.
    pub fn new(sigma: F, delta: f64) -> Result<Self> {
        let q = TAU / delta;
        if !(delta > 0.0 && q.is_finite() && (q - q.round()).abs() < 1e-9 && q.round() >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid step {delta} does not divide 2pi"
            )));
        }
        Ok(SymmetricRecursion {
            sigma,
            delta,
            memo: HashMap::new(),
        })
    }

    pub fn value(&mut self, k: &[u64]) -> Result<f64> {
        if let Some(v) = self.memo.get(k) {
            return Ok(*v);
        }
        let n = k.len();
        let y: Vec<f64> = k.iter().map(|&v| v as f64 * self.delta).collect();
        let sigma = (self.sigma)(&y)?;
        let nonzero: Vec<usize> = (0..n).filter(|&i| k[i] != 0).collect();
        let zeros = n - nonzero.len();
        let value = if nonzero.is_empty() {
            // σ_n(0) = 2^n S_n(0) and R = 2 S_n(0)
            2.0 * sigma / f64::powi(2.0, n as i32)
        } else {
            let mut v = sigma / f64::powi(2.0, zeros as i32);
            let p = nonzero.len();
            // sign patterns on the nonzero entries, one per ± pair; mixed
            // ones reduce to a shorter total index
            for mask in 1u32..(1 << (p - 1)) {
                let mut signed: Vec<i64> = k.iter().map(|&v| v as i64).collect();
                for (q, &i) in nonzero.iter().enumerate() {
                    if mask >> q & 1 == 1 {
                        signed[i] = -signed[i];
                    }
                }
                let reduced = reduce_pointer(&signed);
                v -= self.value(&reduced)?;
            }
            v
        };
        self.memo.insert(k.to_vec(), value);
        Ok(value)
    }
}

/// Recover `S_n(kδ) + S_n(-kδ)` for all `k ∈ Z_{>=0}^n`, `n <= n_max`,
/// `Σ k_i <= bound`, from the symmetrised correlations
/// `σ_n(y) = Σ_ε S_n(ε_1 y_1, …, ε_n y_n)`.
///
/// Writing `σ_n(kδ) = 2^z Σ_{ε on nonzero entries} S_n(εkδ)` (z zero entries),
/// the two constant sign patterns give `R(k)`, and each mixed pair `±ε`
/// visits the same set as a forward tuple `k'` with `Σ k' < Σ k`, so it
/// contributes `R(k')`. Hence `R(k) = σ_n(kδ)/2^z - Σ_{mixed pairs} R(k')`.
pub fn symmetric_recover(
    sigma: &dyn Fn(&[f64]) -> Result<f64>,
    delta: f64,
    n_max: usize,
    bound: u64,
) -> Result<SymmetricTable> {
    let mut solver = SymmetricRecursion::new(sigma, delta)?;
    let mut entries = BTreeMap::new();
    for n in 0..=n_max {
        for k in bounded_tuples(n, bound) {
            let v = solver.value(&k)?;
            entries.insert(k, v);
        }
    }
    Ok(SymmetricTable { delta, entries })
}

/// All `k ∈ Z_{>=0}^n` with `Σ k_i <= bound`.
pub fn bounded_tuples(n: usize, bound: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u64>| {
                let used: u64 = prefix.iter().sum();
                (0..=bound - used).map(move |v| {
                    let mut k = prefix.clone();
                    k.push(v);
                    k
                })
            })
            .collect();
    }
    out
}

/// Gaver–Stehfest weights for an even node count.
fn stehfest_weights(nodes: usize) -> Vec<f64> {
    let half = nodes / 2;
    let fact = |n: usize| (1..=n).fold(1.0f64, |a, i| a * i as f64);
    (1..=nodes)
        .map(|k| {
            let mut sum = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                sum += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half).is_multiple_of(2) {
                sum
            } else {
                -sum
            }
        })
        .collect()
}

fn stehfest_invert(f: &dyn Fn(f64) -> f64, y: f64, nodes: usize) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    let w = stehfest_weights(nodes);
    ln2 / y
        * w.iter()
            .enumerate()
            .map(|(i, wk)| wk * f((i + 1) as f64 * ln2 / y))
            .sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplacePoint {
    pub y: f64,
    pub sigma: f64,
    pub error: f64,
}

/// Recover `σ_1(y) = S_1(y) + S_1(-y)` from samples of `T_1` for a
/// driftless one-dimensional Brownian law.
///
/// With unit diffusion `T_1(t) = ∫_0^∞ φ_t(y) σ_1(y) dy`, and the Laplace
/// transform of the heat kernel gives `s·L{T_1}(s²/2) = L{σ_1}(s)`. A
/// diffusion `σ²` rescales time. `L{T_1}` is a trapezoid sum over the
/// samples (with `T_1(0) = S_0` prepended) plus the tail `S_0² e^{-p t_max}/p`;
/// the inversion is Gaver–Stehfest with `nodes` terms, and the error
/// estimate is the change from `nodes - 2` terms.
pub fn laplace_invert_sigma1(
    law: &StepLaw,
    times: &[f64],
    t1: &[f64],
    s0: f64,
    y_grid: &[f64],
    nodes: usize,
) -> Result<Vec<LaplacePoint>> {
    let b = match (law.dim(), law.brownian_part(), law.jump_part()) {
        (1, Some(b), None) if b.drift[0] == 0.0 => b,
        _ => {
            return Err(Error::Unsupported(
                "Laplace route needs a driftless one-dimensional Brownian law".into(),
            ))
        }
    };
    if times.len() != t1.len() || times.is_empty() {
        return Err(Error::InvalidArgument(
            "time grid and samples differ in length".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] <= 0.0 {
        return Err(Error::InvalidArgument(
            "time grid must be positive and increasing".into(),
        ));
    }
    if nodes < 4 || !nodes.is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "node count must be even and >= 4".into(),
        ));
    }
    let sigma2 = b.sigma2[0];
    let mut ts = Vec::with_capacity(times.len() + 1);
    let mut vs = Vec::with_capacity(times.len() + 1);
    ts.push(0.0);
    vs.push(s0);
    ts.extend_from_slice(times);
    vs.extend_from_slice(t1);
    let t_max = *ts.last().expect("non-empty");
    let tail = s0 * s0;
    let transform = |p: f64| -> f64 {
        let mut acc = 0.0;
        for i in 1..ts.len() {
            let h = ts[i] - ts[i - 1];
            acc += 0.5 * h * ((-p * ts[i - 1]).exp() * vs[i - 1] + (-p * ts[i]).exp() * vs[i]);
        }
        acc + tail * (-p * t_max).exp() / p
    };
    // time rescaled by σ²: s · σ² · L{T_1}(σ² s² / 2)
    let image = |s: f64| s * sigma2 * transform(sigma2 * s * s / 2.0);
    Ok(y_grid
        .iter()
        .map(|&y| {
            let fine = stehfest_invert(&image, y, nodes);
            let coarse = stehfest_invert(&image, y, nodes - 2);
            LaplacePoint {
                y,
                sigma: fine,
                error: (fine - coarse).abs(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::sigma_n;
    use crate::step_law::MixtureComponent;
    use std::f64::consts::PI;

    fn three_arcs() -> Scenery {
        Scenery::from_intervals(&[(0.3, 1.1), (2.0, 3.4), (4.2, 5.0)]).unwrap()
    }

    fn atom_law() -> StepLaw {
        StepLaw::jump(
            1,
            1.0,
            vec![MixtureComponent {
                weight: 1.0,
                mean: vec![0.9],
                var: vec![0.3],
            }],
        )
        .unwrap()
    }

    /// The recursion that defines the reduction coefficients one power at
    /// a time, independent of the closed form.
    fn power_reduction_recursive(beta: f64, m: usize) -> Vec<f64> {
        // P_j = γ̂^j expressed in the basis γ̂_{t}, …, γ̂_{jt}
        let mut p: Vec<Vec<f64>> = vec![vec![]];
        for j in 1..=m {
            let mut row = vec![0.0; j];
            row[j - 1] = 1.0 - beta.powi(j as i32);
            for (i, prev) in p.iter().enumerate().skip(1).take(j - 1) {
                let c = binomial(j, i) * beta.powi((j - i) as i32) * (1.0 - beta).powi(i as i32);
                for (r, v) in prev.iter().enumerate() {
                    row[r] -= c * v;
                }
            }
            let norm = (1.0 - beta).powi(j as i32);
            for v in row.iter_mut() {
                *v /= norm;
            }
            p.push(row);
        }
        p.pop().unwrap()
    }

    #[test]
    fn power_reduction_examples() {
        let b = StepLaw::brownian_1d(0.5, 1.0);
        assert_eq!(power_reduction(&b, 1.0, 1).unwrap(), vec![1.0]);
        let c = power_reduction(&b, 1.0, 3).unwrap();
        assert_eq!(c, vec![0.0, 0.0, 1.0]);
        let law = atom_law();
        let beta = law.beta(1.0).unwrap();
        let c = power_reduction(&law, 1.0, 2).unwrap();
        let expect = [
            -2.0 * beta * (1.0 - beta) / (1.0 - beta).powi(2),
            (1.0 - beta * beta) / (1.0 - beta).powi(2),
        ];
        assert!((c[0] - expect[0]).abs() < 1e-14 && (c[1] - expect[1]).abs() < 1e-14);
        for k in 1..=5 {
            let g = law.gamma_hat(1.0, &[k]).unwrap();
            let rhs = c[0] * g + c[1] * law.gamma_hat(2.0, &[k]).unwrap();
            assert!((g * g - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn power_reduction_matches_recursion() {
        let law = atom_law();
        for &t0 in &[0.3, 1.0, 2.0] {
            let beta = law.beta(t0).unwrap();
            for m in 1..=6 {
                let a = power_reduction(&law, t0, m).unwrap();
                let b = power_reduction_recursive(beta, m);
                for (x, y) in a.iter().zip(&b) {
                    assert!(
                        (x - y).abs() < 1e-9 * (1.0 + y.abs()),
                        "m={m}: {a:?} vs {b:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn table_json_round_trip() {
        let t = SpatialFourierTable::exact(&three_arcs(), 1, 2);
        let back = SpatialFourierTable::from_json_str(&t.to_json_string()).unwrap();
        assert_eq!(t, back);
        let v: serde_json::Value = serde_json::from_str(&t.to_json_string()).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["entries"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn exact_table_is_conjugate_symmetric() {
        let t = SpatialFourierTable::exact(&three_arcs(), 2, 2);
        assert!(t.conjugate_asymmetry() < 1e-14);
        let zero = SpatialFourierTable::exact(&three_arcs(), 0, 3);
        assert_eq!(zero.len(), 1);
        assert!((zero.get(&[]).unwrap().re - 3.0 / TAU).abs() < 1e-15);
    }

    #[test]
    fn multiplier_choice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let one = choose_multipliers(&law, 1.0, 1, 3, 1e-6, &mut rng, 10).unwrap();
        assert_eq!(one.alphas, vec![1.0]);
        let two = choose_multipliers(&law, 1.0, 2, 2, 1e-6, &mut rng, 10).unwrap();
        assert_eq!(two.generators.len(), 25);
        assert!(two.min_distance >= 1e-6);
        let sym = StepLaw::brownian_1d(0.0, 1.0);
        assert!(matches!(
            choose_multipliers(&sym, 1.0, 1, 2, 1e-6, &mut rng, 10),
            Err(Error::Distinctness(_))
        ));
    }

    #[test]
    fn first_moment_is_scaled_temporal_correlation() {
        let s = three_arcs();
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let mset = MultiplierSet::with_alphas(&law, 0.7, vec![1.0], 8).unwrap();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &s,
            cutoff: 60,
        };
        let mu = moment_sums(&oracle, &law, &mset, 1, &[]).unwrap();
        let direct: Complex64 = mset
            .indices
            .iter()
            .zip(&mset.generators)
            .map(|(k, z)| z * crate::correlations::spatial_fourier(&s, &[-k[0]]).unwrap())
            .sum();
        assert!((mu.values[0] - direct).norm() < 1e-8);
    }

    #[test]
    fn degenerate_sceneries() {
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let empty = Scenery::empty(1);
        let mset = MultiplierSet::with_alphas(&law, 0.5, vec![1.0], 2).unwrap();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &empty,
            cutoff: 10,
        };
        let mu = moment_sums(&oracle, &law, &mset, 5, &[]).unwrap();
        assert!(mu.values.iter().all(|v| v.norm() == 0.0));

        let full = Scenery::from_intervals(&[(0.0, TAU)]).unwrap();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &full,
            cutoff: 10,
        };
        let mu = moment_sums(&oracle, &law, &mset, 4, &[]).unwrap();
        // only k = 0 survives, with z_0 = 1 and Ŝ_1(0) = 2π
        for v in &mu.values {
            assert!((v.re - TAU).abs() < 1e-10);
        }
    }

    #[test]
    fn synthetic_round_trip() {
        let s = three_arcs();
        let law = StepLaw::brownian_1d(1.0, 0.3);
        let mset = MultiplierSet::with_alphas(&law, 1.0, vec![1.0], 3).unwrap();
        let truth = SpatialFourierTable::exact(&s, 1, 3);
        let m_max = 2 * mset.generators.len();
        let values: Vec<Complex64> = (1..=m_max)
            .map(|m| {
                mset.indices
                    .iter()
                    .zip(&mset.generators)
                    .map(|(k, z)| z.powu(m as u32) * truth.get(&[-k[0]]).unwrap())
                    .sum()
            })
            .collect();
        let moments = MomentSums {
            values,
            stderr: vec![0.0; m_max],
            queries: 0,
        };
        let rec = recover_spatial_fourier(&moments, &mset, 3).unwrap();
        assert!(
            rec.table.relative_error(&truth) < 1e-6,
            "{}",
            rec.table.relative_error(&truth)
        );
    }

    #[test]
    fn diagonal_recovery_of_half_circle_zero_mode() {
        let s = Scenery::from_intervals(&[(0.0, PI)]).unwrap();
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let mset = MultiplierSet::with_alphas(&law, 0.6, vec![1.0], 1).unwrap();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &s,
            cutoff: 200,
        };
        let mu = moment_sums(&oracle, &law, &mset, 6, &[]).unwrap();
        let rec = recover_spatial_fourier(&mu, &mset, 1).unwrap();
        // Ŝ_1(0) = ∫ S_1 = μ(Ω)² / 2π
        let zero = rec.table.get(&[0]).unwrap();
        assert!((zero.re - PI / 2.0).abs() < 1e-3, "{zero}");
    }

    #[test]
    fn atom_law_needs_lower_tables() {
        let s = three_arcs();
        let law = atom_law();
        let mset = MultiplierSet::with_alphas(&law, 0.5, vec![1.0, 1.3], 1).unwrap();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &s,
            cutoff: 30,
        };
        assert!(matches!(
            moment_sums(&oracle, &law, &mset, 2, &[]),
            Err(Error::MissingLowerOrder(1))
        ));
    }

    #[test]
    fn separable_recovery_n1_atom_law() {
        let s = three_arcs();
        let law = atom_law();
        let oracle = ExactTemporal {
            law: &law,
            scenery: &s,
            cutoff: 40,
        };
        let grid = moment_grid(&oracle, &law, 0.8, &[1.0], 14, &[]).unwrap();
        let rec = recover_spatial_fourier_separable(&grid, &law, 0.8, &[1.0], 1, 5).unwrap();
        let truth = SpatialFourierTable::exact(&s, 1, 1);
        let err = rec.table.relative_error(&truth);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn separable_recovery_matches_synthetic_n2() {
        let s = three_arcs();
        let law = StepLaw::brownian_1d(1.0, 0.3);
        let truth_wide = SpatialFourierTable::exact(&s, 2, 2);
        let (t0, m_max) = (1.0, 10);
        let g: Vec<Complex64> = (-2..=2).map(|k| law.gamma_hat(t0, &[k]).unwrap()).collect();
        let mut values = Vec::new();
        for m1 in 1..=m_max {
            for m2 in 1..=m_max {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, k1) in (-2i64..=2).enumerate() {
                    for (j, k2) in (-2i64..=2).enumerate() {
                        acc += g[i].powu(m1 as u32)
                            * g[j].powu(m2 as u32)
                            * truth_wide.get(&[-k1, -k2]).unwrap();
                    }
                }
                values.push(acc);
            }
        }
        let grid = MomentGrid {
            order: 2,
            m_max,
            values,
            stderr: vec![0.0; m_max * m_max],
            queries: 0,
        };
        let rec = recover_spatial_fourier_separable(&grid, &law, t0, &[1.0, 1.0], 2, 2).unwrap();
        assert!(rec.table.relative_error(&truth_wide) < 1e-8);
    }

    #[test]
    fn symmetric_recursion_examples() {
        let s = Scenery::from_intervals(&[(0.0, PI)]).unwrap();
        let sigma = |y: &[f64]| sigma_n(&s, y);
        let delta = PI / 2.0;
        let table = symmetric_recover(&sigma, delta, 2, 4).unwrap();
        let direct = |k: &[u64]| {
            let y: Vec<f64> = k.iter().map(|&v| v as f64 * delta).collect();
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            crate::correlations::spatial_correlation_flat(&s, &y).unwrap()
                + crate::correlations::spatial_correlation_flat(&s, &neg).unwrap()
        };
        assert!((table.entries[&vec![1u64]] - sigma_n(&s, &[delta]).unwrap()).abs() < 1e-15);
        assert!((table.entries[&vec![1u64, 1]] - direct(&[1, 1])).abs() < 1e-12);
        assert!((table.entries[&vec![0u64, 0]] - 1.0).abs() < 1e-15);
        assert!((table.entries[&vec![]] - 1.0).abs() < 1e-15);
        assert!(symmetric_recover(&sigma, 0.7, 1, 2).is_err());
    }

    #[test]
    fn reduce_pointer_examples() {
        assert_eq!(reduce_pointer(&[1, -1]), vec![1]);
        assert_eq!(reduce_pointer(&[2, -3, 4]), vec![1, 2, 1]);
        assert_eq!(reduce_pointer(&[0, 0]), Vec::<u64>::new());
        assert_eq!(reduce_pointer(&[3, 2]), vec![3, 2]);
    }

    #[test]
    fn stehfest_inverts_known_transforms() {
        // L{e^{-y}} = 1/(s+1)
        let f = |s: f64| 1.0 / (s + 1.0);
        for &y in &[0.5, 1.0, 2.0] {
            let v = stehfest_invert(&f, y, 14);
            assert!((v - (-y).exp()).abs() < 5e-5);
        }
    }

    #[test]
    fn laplace_rejects_non_brownian() {
        let law = atom_law();
        assert!(laplace_invert_sigma1(&law, &[1.0], &[0.2], 0.5, &[1.0], 14).is_err());
        let drift = StepLaw::brownian_1d(1.0, 1.0);
        assert!(laplace_invert_sigma1(&drift, &[1.0], &[0.2], 0.5, &[1.0], 14).is_err());
    }

    #[test]
    fn noisy_oracle_is_reproducible() {
        let s = three_arcs();
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let noisy = NoisyTemporal {
            inner: ExactTemporal {
                law: &law,
                scenery: &s,
                cutoff: 20,
            },
            sd: 1e-3,
            seed: 9,
        };
        let a = noisy.temporal(&[0.5]).unwrap();
        let b = noisy.temporal(&[0.5]).unwrap();
        assert_eq!(a, b);
        assert_ne!(query_seed(1, &[0.5]), query_seed(1, &[0.25]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reduction_identity(t0 in 0.1..2.0f64, m in 1usize..=4, k in -5i64..=5) {
                let law = atom_law();
                let c = power_reduction(&law, t0, m).unwrap();
                let g = law.gamma_hat(t0, &[k]).unwrap();
                let rhs: Complex64 = c.iter().enumerate()
                    .map(|(j, cj)| *cj * law.gamma_hat((j + 1) as f64 * t0, &[k]).unwrap())
                    .sum();
                prop_assert!((g.powu(m as u32) - rhs).norm() < 1e-10);
            }

            #[test]
            fn reduced_pointer_visits_same_set(k in prop::collection::vec(-4i64..=4, 0..5)) {
                let r = reduce_pointer(&k);
                let span: u64 = r.iter().sum();
                let mut sums = vec![0i64];
                let mut acc = 0;
                for v in &k { acc += v; sums.push(acc); }
                let lo = *sums.iter().min().unwrap();
                let hi = *sums.iter().max().unwrap();
                prop_assert_eq!(span as i64, hi - lo);
            }
        }
    }
}
