//! Grid reconstruction: positivity of `S_n` on grid pointer tuples decides
//! which point sets fit inside a translate of the hidden set; a maximal such
//! set, thickened by cubes of the grid step, approximates it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{sigma_n, spatial_correlation_flat};
use crate::error::{Error, Result};
use crate::inversion::{
    moment_grid, recover_spatial_fourier_separable, ExactTemporal, MonteCarloTemporal,
    SpatialFourierTable, SymmetricRecursion, TemporalOracle, TraceTemporal,
};
use crate::step_law::{distinctness_report, DistinctnessReport, IndexDomain, StepLaw, StepLawJson};
use crate::torus::{aligned_distance, wrap_scalar, Scenery, SceneryJson, TAU};

/// Threshold for strict positivity with exact oracles.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Grid subset of `{0..m-1}^d`, points sorted lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSubset {
    pub m: usize,
    pub dim: usize,
    pub points: Vec<Vec<usize>>,
}

impl GridSubset {
    pub fn new(m: usize, dim: usize, mut points: Vec<Vec<usize>>) -> Result<Self> {
        if m < 2 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "need m >= 2 and d >= 1, got m = {m}, d = {dim}"
            )));
        }
        if let Some(p) = points
            .iter()
            .find(|p| p.len() != dim || p.iter().any(|&c| c >= m))
        {
            return Err(Error::InvalidArgument(format!(
                "grid point {p:?} out of range"
            )));
        }
        points.sort();
        points.dedup();
        Ok(GridSubset { m, dim, points })
    }

    pub fn empty(m: usize, dim: usize) -> Self {
        GridSubset {
            m,
            dim,
            points: Vec::new(),
        }
    }

    fn from_flat(m: usize, dim: usize, flat: &[usize]) -> Self {
        let mut points: Vec<Vec<usize>> = flat.iter().map(|&f| unflatten(f, m, dim)).collect();
        points.sort();
        GridSubset { m, dim, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> f64 {
        TAU / self.m as f64
    }

    /// Forward pointer vectors between consecutive points, in grid units
    /// modulo `m`. Their partial sums from the first point enumerate the set.
    pub fn witness(&self) -> Vec<Vec<u64>> {
        self.points
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| ((b + self.m - a) % self.m) as u64)
                    .collect()
            })
            .collect()
    }

    /// The witness scaled by `δ_m` and flattened.
    pub fn witness_y(&self) -> Vec<f64> {
        let delta = self.delta();
        self.witness()
            .into_iter()
            .flatten()
            .map(|v| v as f64 * delta)
            .collect()
    }
}

fn unflatten(mut f: usize, m: usize, dim: usize) -> Vec<usize> {
    let mut p = vec![0; dim];
    for c in p.iter_mut().rev() {
        *c = f % m;
        f /= m;
    }
    p
}

fn flatten(p: &[usize], m: usize) -> usize {
    p.iter().fold(0, |acc, &c| acc * m + c)
}

/// Coordinate-wise difference `b - a` modulo `m` of flat indices.
fn flat_diff(a: usize, b: usize, m: usize, dim: usize) -> usize {
    let pa = unflatten(a, m, dim);
    let pb = unflatten(b, m, dim);
    let d: Vec<usize> = pa.iter().zip(&pb).map(|(x, y)| (y + m - x) % m).collect();
    flatten(&d, m)
}

/// Source of spatial correlations at pointer tuples.
pub trait SOracle: Sync {
    fn dim(&self) -> usize;

    /// `S_n` (or its surrogate) at a flattened pointer tuple of `n·d` entries.
    fn query(&self, y: &[f64]) -> Result<f64>;

    /// Positivity threshold for a tuple of `n` pointers.
    fn tolerance(&self, n: usize) -> f64;

    /// Largest `n` answered directly. Larger sets are decided through all
    /// their subsets of size `max_order + 1`.
    fn max_order(&self) -> Option<usize> {
        None
    }
}

/// `S_n` of a known scenery.
pub struct ExactS<'a> {
    pub scenery: &'a Scenery,
}

impl SOracle for ExactS<'_> {
    fn dim(&self) -> usize {
        self.scenery.dim()
    }

    fn query(&self, y: &[f64]) -> Result<f64> {
        spatial_correlation_flat(self.scenery, y)
    }

    fn tolerance(&self, _n: usize) -> f64 {
        EXACT_TOLERANCE
    }
}

/// `R(y) = S_n(y) + S_n(-y)` of a known scenery. Positive exactly when the
/// set or its reflection fits.
pub struct SymmetricDirect<'a> {
    pub scenery: &'a Scenery,
}

impl SOracle for SymmetricDirect<'_> {
    fn dim(&self) -> usize {
        self.scenery.dim()
    }

    fn query(&self, y: &[f64]) -> Result<f64> {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        Ok(spatial_correlation_flat(self.scenery, y)?
            + spatial_correlation_flat(self.scenery, &neg)?)
    }

    fn tolerance(&self, _n: usize) -> f64 {
        EXACT_TOLERANCE
    }
}

/// `R` computed from the symmetrised correlations `σ_n` alone, through the
/// recursion over mixed sign patterns. Work grows like `2^n`, so this is
/// meant for small sets.
pub struct SymmetricRecursive<'a> {
    inner: Mutex<SymmetricRecursion<SigmaFn<'a>>>,
    delta: f64,
}

type SigmaFn<'a> = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync + 'a>;

impl<'a> SymmetricRecursive<'a> {
    pub fn new(sigma: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'a, m: usize) -> Result<Self> {
        let delta = TAU / m as f64;
        let boxed: SigmaFn<'a> = Box::new(sigma);
        Ok(SymmetricRecursive {
            inner: Mutex::new(SymmetricRecursion::new(boxed, delta)?),
            delta,
        })
    }

    /// From a known one-dimensional scenery.
    pub fn from_scenery(s: &'a Scenery, m: usize) -> Result<Self> {
        Self::new(move |y: &[f64]| sigma_n(s, y), m)
    }
}

impl SOracle for SymmetricRecursive<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn query(&self, y: &[f64]) -> Result<f64> {
        let k: Vec<u64> = y
            .iter()
            .map(|v| {
                let q = v / self.delta;
                if (q - q.round()).abs() > 1e-9 || q.round() < 0.0 {
                    Err(Error::InvalidArgument(format!(
                        "{v} is not a forward grid step"
                    )))
                } else {
                    Ok(q.round() as u64)
                }
            })
            .collect::<Result<_>>()?;
        self.inner.lock().expect("recursion lock").value(&k)
    }

    fn tolerance(&self, _n: usize) -> f64 {
        EXACT_TOLERANCE
    }
}

/// Truncated Fourier series of recovered tables `Ŝ_1, …, Ŝ_r`.
pub struct FourierInverted {
    dim: usize,
    s0: f64,
    tables: Vec<SpatialFourierTable>,
    errors: Vec<f64>,
}

impl FourierInverted {
    /// `tables[i]` must hold order `i + 1`. `extra[i]` is added to the
    /// truncation estimate of order `i` (index 0 for `S_0`).
    pub fn new(s0: f64, tables: Vec<SpatialFourierTable>, extra: &[f64]) -> Result<Self> {
        let dim = tables.first().map_or(1, |t| t.dim);
        for (i, t) in tables.iter().enumerate() {
            if t.n != i + 1 || t.dim != dim {
                return Err(Error::InvalidArgument(format!(
                    "table {i} has order {} and dimension {}",
                    t.n, t.dim
                )));
            }
        }
        let mut errors = vec![extra.first().copied().unwrap_or(0.0)];
        for (i, t) in tables.iter().enumerate() {
            errors.push(series_tail(t) + extra.get(i + 1).copied().unwrap_or(0.0));
        }
        Ok(FourierInverted {
            dim,
            s0,
            tables,
            errors,
        })
    }

    pub fn error_estimates(&self) -> &[f64] {
        &self.errors
    }
}

/// Tail estimate of a truncated series: coefficients decaying like `1/k²`
/// leave a tail of about `K` times a shell. The two outermost shells are
/// averaged because one of them can vanish by symmetry.
fn series_tail(t: &SpatialFourierTable) -> f64 {
    let k = t.cutoff as i64;
    let shell = |j: i64| -> f64 {
        t.entries()
            .filter(|(idx, _)| idx.iter().map(|v| v.abs()).max() == Some(j))
            .map(|(_, v)| v.norm())
            .sum()
    };
    let outer = if k >= 2 {
        0.5 * (shell(k) + shell(k - 1))
    } else {
        shell(k)
    };
    outer * (k.max(1) as f64) / TAU.powi((t.n * t.dim) as i32)
}

impl SOracle for FourierInverted {
    fn dim(&self) -> usize {
        self.dim
    }

    fn query(&self, y: &[f64]) -> Result<f64> {
        let n = y.len() / self.dim;
        if n == 0 {
            return Ok(self.s0);
        }
        match self.tables.get(n - 1) {
            Some(t) => t.spatial_value(y),
            None => Err(Error::Unsupported(format!("no table of order {n}"))),
        }
    }

    fn tolerance(&self, n: usize) -> f64 {
        3.0 * self.errors.get(n).copied().unwrap_or(f64::INFINITY)
    }

    fn max_order(&self) -> Option<usize> {
        Some(self.tables.len())
    }
}

/// True when the oracle reports `S_n` above its threshold at the witness
/// tuple of `g`. The empty set is feasible.
pub fn grid_feasible(oracle: &dyn SOracle, g: &GridSubset) -> Result<bool> {
    if g.dim != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: g.dim,
        });
    }
    let flat: Vec<usize> = g.points.iter().map(|p| flatten(p, g.m)).collect();
    let mut search = Search::new(oracle, g.m, g.dim, usize::MAX);
    search.feasible(&flat)
}

/// Diagnostics of a [`maximal_grid`] run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub subset: GridSubset,
    pub exhaustive: bool,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Sets larger than the oracle's order were decided through subsets.
    pub approximate: bool,
}

struct Search<'a> {
    oracle: &'a dyn SOracle,
    m: usize,
    dim: usize,
    cache: HashMap<Vec<usize>, bool>,
    evaluations: usize,
    budget: usize,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn new(oracle: &'a dyn SOracle, m: usize, dim: usize, budget: usize) -> Self {
        Search {
            oracle,
            m,
            dim,
            cache: HashMap::new(),
            evaluations: 0,
            budget,
            exhausted: false,
        }
    }

    fn direct(&mut self, pts: &[usize]) -> Result<bool> {
        let mut key = pts.to_vec();
        key.sort_unstable();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        self.evaluations += 1;
        let g = GridSubset::from_flat(self.m, self.dim, &key);
        let n = key.len().saturating_sub(1);
        let v = self.oracle.query(&g.witness_y())? > self.oracle.tolerance(n);
        self.cache.insert(key, v);
        Ok(v)
    }

    fn feasible(&mut self, pts: &[usize]) -> Result<bool> {
        if pts.is_empty() {
            return Ok(true);
        }
        match self.oracle.max_order() {
            Some(r) if pts.len() > r + 1 => {
                for sub in combinations(pts, r + 1) {
                    if !self.direct(&sub)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => self.direct(pts),
        }
    }

    /// Pair feasibility `{0, p}` for every `p ≠ 0`, evaluated in parallel.
    fn pair_candidates(&mut self) -> Result<Vec<usize>> {
        let total = self.m.pow(self.dim as u32);
        let (m, dim, oracle) = (self.m, self.dim, self.oracle);
        let results: Vec<Result<bool>> = (1..total)
            .into_par_iter()
            .map(|p| {
                let g = GridSubset::from_flat(m, dim, &[0, p]);
                Ok(oracle.query(&g.witness_y())? > oracle.tolerance(1))
            })
            .collect();
        let mut out = Vec::new();
        for (p, r) in (1..total).zip(results) {
            let ok = r?;
            self.evaluations += 1;
            self.cache.insert(vec![0, p], ok);
            if ok {
                out.push(p);
            }
        }
        Ok(out)
    }

    fn dfs(
        &mut self,
        cur: &mut Vec<usize>,
        cand: &[usize],
        pairs: &HashSet<usize>,
        best: &mut Vec<usize>,
        best_len: &mut usize,
    ) -> Result<()> {
        if cur.len() > *best_len {
            *best = cur.clone();
            *best_len = cur.len();
        }
        for (i, &c) in cand.iter().enumerate() {
            if cur.len() + cand.len() - i <= *best_len {
                return Ok(());
            }
            if self.evaluations >= self.budget {
                self.exhausted = true;
                return Ok(());
            }
            // every candidate already extends `cur` feasibly
            cur.push(c);
            let mut next = Vec::new();
            for &c2 in &cand[i + 1..] {
                if !pairs.contains(&flat_diff(c, c2, self.m, self.dim)) {
                    continue;
                }
                cur.push(c2);
                let ok = self.feasible(cur)?;
                cur.pop();
                if ok {
                    next.push(c2);
                }
            }
            self.dfs(cur, &next, pairs, best, best_len)?;
            cur.pop();
        }
        Ok(())
    }
}

/// All `k`-subsets in lexicographic order.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut j = k;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if idx[j] < items.len() - k + j {
                break;
            }
            if j == 0 {
                return out;
            }
        }
        idx[j] += 1;
        for l in j + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
}

/// Largest grid subset feasible under the oracle; ties go to the
/// lexicographically smallest point list.
///
/// Grids with at most 16 points are searched exhaustively, level by level,
/// extending only sets whose every one-point-smaller subset is feasible.
/// Larger grids use branch-and-bound: by shift invariance the optimum may
/// be assumed to contain the origin, two points are compatible when their
/// difference passes the pair test, and a greedy pass seeds the bound.
/// `budget` caps the number of feasibility evaluations; when it runs out
/// the best set found so far is returned and flagged.
pub fn maximal_grid(
    oracle: &dyn SOracle,
    m: usize,
    dim: usize,
    budget: usize,
) -> Result<SearchReport> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {m}"
        )));
    }
    if dim != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: dim,
        });
    }
    let total = m
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::InvalidArgument("grid too large".into()))?;
    if total <= 16 {
        exhaustive(oracle, m, dim)
    } else {
        branch_and_bound(oracle, m, dim, budget)
    }
}

fn finish(search: &Search<'_>, best: &[usize], exhaustive: bool) -> SearchReport {
    let approximate = search
        .oracle
        .max_order()
        .is_some_and(|r| best.len() > r + 1);
    SearchReport {
        subset: GridSubset::from_flat(search.m, search.dim, best),
        exhaustive,
        evaluations: search.evaluations,
        budget_exhausted: search.exhausted,
        approximate,
    }
}

fn exhaustive(oracle: &dyn SOracle, m: usize, dim: usize) -> Result<SearchReport> {
    let total = m.pow(dim as u32);
    let mut search = Search::new(oracle, m, dim, usize::MAX);
    let mut level: Vec<Vec<usize>> = Vec::new();
    for p in 0..total {
        if search.feasible(&[p])? {
            level.push(vec![p]);
        }
    }
    let mut best = level.first().cloned().unwrap_or_default();
    while !level.is_empty() {
        let known: HashSet<Vec<usize>> = level.iter().cloned().collect();
        let mut next = Vec::new();
        for set in &level {
            let last = *set.last().expect("non-empty");
            for c in last + 1..total {
                let mut bigger = set.clone();
                bigger.push(c);
                let closed = (0..bigger.len()).all(|skip| {
                    let sub: Vec<usize> = bigger
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect();
                    known.contains(&sub)
                });
                if closed && search.feasible(&bigger)? {
                    next.push(bigger);
                }
            }
        }
        next.sort();
        if let Some(first) = next.first() {
            best = first.clone();
        }
        level = next;
    }
    Ok(finish(&search, &best, true))
}

/// Branch-and-bound without the small-grid shortcut; exposed so the two
/// searches can be compared.
pub fn branch_and_bound(
    oracle: &dyn SOracle,
    m: usize,
    dim: usize,
    budget: usize,
) -> Result<SearchReport> {
    let mut search = Search::new(oracle, m, dim, budget);
    if !search.feasible(&[0])? {
        return Ok(finish(&search, &[], false));
    }
    let cand = search.pair_candidates()?;
    let pairs: HashSet<usize> = cand.iter().copied().collect();

    let mut greedy = vec![0usize];
    for &c in &cand {
        if greedy
            .iter()
            .all(|&g| pairs.contains(&flat_diff(g, c, m, dim)))
        {
            greedy.push(c);
            if !search.feasible(&greedy)? {
                greedy.pop();
            }
        }
    }
    let mut best = greedy.clone();
    let mut best_len = greedy.len() - 1;
    let mut cur = vec![0usize];
    search.dfs(&mut cur, &cand, &pairs, &mut best, &mut best_len)?;
    Ok(finish(&search, &best, false))
}

/// Arc of length `len` starting at `lo`, split at the seam.
fn arc(lo: f64, len: f64) -> Vec<(f64, f64)> {
    if len >= TAU {
        return vec![(0.0, TAU)];
    }
    let start = wrap_scalar(lo);
    let end = start + len;
    if end <= TAU {
        vec![(start, end)]
    } else {
        vec![(start, TAU), (0.0, end - TAU)]
    }
}

/// `Ω_m = G + δ_m C_d`: cubes of side `δ_m` centred at the grid points,
/// with runs of neighbours merged into single arcs when `d = 1`.
pub fn assemble_omega(g: &GridSubset) -> Result<Scenery> {
    let delta = g.delta();
    if g.is_empty() {
        return Ok(Scenery::empty(g.dim));
    }
    if g.dim == 1 {
        let pts: HashSet<usize> = g.points.iter().map(|p| p[0]).collect();
        if pts.len() == g.m {
            return Scenery::from_intervals(&[(0.0, TAU)]);
        }
        let mut boxes = Vec::new();
        let mut starts: Vec<usize> = pts
            .iter()
            .copied()
            .filter(|p| !pts.contains(&((p + g.m - 1) % g.m)))
            .collect();
        starts.sort_unstable();
        for s in starts {
            let mut len = 1;
            while pts.contains(&((s + len) % g.m)) {
                len += 1;
            }
            for iv in arc((s as f64 - 0.5) * delta, len as f64 * delta) {
                boxes.push(vec![iv]);
            }
        }
        return Scenery::new(1, boxes);
    }
    let mut boxes = Vec::new();
    for p in &g.points {
        let pieces: Vec<Vec<(f64, f64)>> = p
            .iter()
            .map(|&c| arc((c as f64 - 0.5) * delta, delta))
            .collect();
        let mut acc: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for side in pieces {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    side.iter().map(move |iv| {
                        let mut b = prefix.clone();
                        b.push(*iv);
                        b
                    })
                })
                .collect();
        }
        boxes.extend(acc);
    }
    Scenery::new(g.dim, boxes)
}

/// True when some translate of the grid points lies inside the scenery,
/// checked by intersecting translated copies of the set.
pub fn shift_fits(s: &Scenery, g: &GridSubset) -> bool {
    let delta = g.delta();
    let mut cur = s.cells().clone();
    for p in &g.points {
        let shift: Vec<f64> = p.iter().map(|&c| -(c as f64) * delta).collect();
        cur = cur.intersect(&s.cells().translate(&shift));
        if cur.is_empty() {
            return false;
        }
    }
    cur.measure() > 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Exact,
    Inverted,
    Symmetric,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetricRoute {
    /// `R = S_n(y) + S_n(-y)` straight from the scenery.
    #[default]
    Direct,
    /// `R` rebuilt from `σ_n` through the sign-pattern recursion.
    Recursive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalSource {
    #[default]
    Exact,
    Mc,
}

/// Settings of the temporal-to-spatial stage in inverted mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionSettings {
    pub t0: f64,
    #[serde(rename = "K")]
    pub cutoff: usize,
    /// Solve band; defaults to `K + 1`.
    pub solve_cutoff: Option<usize>,
    /// Powers per coordinate; defaults to twice the band size.
    pub moments: Option<usize>,
    pub oracle: TemporalSource,
    pub samples: u64,
    /// Truncation of the exact temporal series.
    pub fourier_cutoff: usize,
    /// Highest order inverted (1 or 2).
    pub max_order: usize,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            t0: 0.25,
            cutoff: 4,
            solve_cutoff: None,
            moments: None,
            oracle: TemporalSource::Exact,
            samples: 100_000,
            fourier_cutoff: 200,
            max_order: 2,
        }
    }
}

/// Distinctness check run before anything else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    pub t0: f64,
    #[serde(rename = "K")]
    pub cutoff: usize,
    pub margin: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            t0: 1.0,
            cutoff: 3,
            margin: 1e-6,
        }
    }
}

fn default_budget() -> usize {
    1_000_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub law: StepLawJson,
    #[serde(default)]
    pub scenery: Option<SceneryJson>,
    #[serde(default)]
    pub trace_file: Option<PathBuf>,
    pub m: usize,
    pub mode: PipelineMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub inversion: InversionSettings,
    #[serde(default)]
    pub check: CheckSettings,
    #[serde(default)]
    pub symmetric_route: SymmetricRoute,
    /// Shift-grid resolution for alignment; defaults to `64·m`.
    #[serde(default)]
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    pub mode: PipelineMode,
    pub m: usize,
    pub delta: f64,
    pub distinctness: DistinctnessReport,
    pub search: SearchReport,
    pub witness: Vec<Vec<u64>>,
    /// Distance of each candidate to the ground truth, unreflected.
    pub candidate_distances: Vec<f64>,
    /// Whether the chosen set was re-checked to fit the ground truth.
    pub soundness: Option<bool>,
    pub tolerances: BTreeMap<usize, f64>,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub estimate: SceneryJson,
    pub candidates: Vec<SceneryJson>,
    pub aligned_distance: Option<f64>,
    pub diagnostics: PipelineDiagnostics,
}

/// Read a `time,value` CSV trace; `#` lines are skipped. Returns the values
/// and the sampling step.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, f64)> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("time") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidArgument(format!("bad trace line: {line}")))
        };
        times.push(parse(parts.next())?);
        values.push(parse(parts.next())?);
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument(
            "trace has fewer than two samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    Ok((values, dt))
}

fn inverted_oracle(
    cfg: &PipelineConfig,
    law: &StepLaw,
    temporal: &dyn TemporalOracle,
) -> Result<FourierInverted> {
    let inv = &cfg.inversion;
    if !(1..=2).contains(&inv.max_order) {
        return Err(Error::InvalidArgument(
            "inversion order must be 1 or 2".into(),
        ));
    }
    let solve = inv.solve_cutoff.unwrap_or(inv.cutoff + 1);
    let band = (2 * solve + 1).pow(law.dim() as u32);
    let moments = inv.moments.unwrap_or(2 * band);
    let s0 = temporal.temporal(&[])?;
    let mut tables: Vec<SpatialFourierTable> = Vec::new();
    let mut extra = vec![s0.stderr];
    for n in 1..=inv.max_order {
        let alphas = vec![1.0; n];
        let grid = moment_grid(temporal, law, inv.t0, &alphas, moments, &tables)?;
        let rec =
            recover_spatial_fourier_separable(&grid, law, inv.t0, &alphas, inv.cutoff, solve)?;
        let noise =
            grid.stderr.iter().fold(0.0f64, |a, &b| a.max(b)) / TAU.powi((n * law.dim()) as i32);
        extra.push(noise);
        tables.push(rec.table);
    }
    FourierInverted::new(s0.value, tables, &extra)
}

/// Run the chain from a configuration. Relative trace paths resolve
/// against `base`.
pub fn reconstruct_pipeline(cfg: &PipelineConfig, base: Option<&Path>) -> Result<PipelineOutput> {
    let law = StepLaw::from_json(&cfg.law)?;
    let truth = cfg.scenery.as_ref().map(Scenery::from_json).transpose()?;
    if let Some(s) = &truth {
        if s.dim() != law.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                got: law.dim(),
            });
        }
    }
    if cfg.m < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 2, got {}",
            cfg.m
        )));
    }
    let domain = match cfg.mode {
        PipelineMode::Symmetric => IndexDomain::Cone,
        _ => IndexDomain::Full,
    };
    let report = distinctness_report(
        &law,
        cfg.check.t0,
        cfg.check.cutoff,
        cfg.check.margin,
        domain,
    )?;
    if !report.passed {
        return Err(Error::Distinctness(format!(
            "{:?} domain at t = {}, K = {}: min distance {:.3e}, min modulus {:.3e}",
            domain, report.t, report.cutoff, report.min_distance, report.min_modulus
        )));
    }
    let dim = law.dim();
    let need_truth = || {
        truth
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("this mode needs a scenery".into()))
    };
    let holder: Box<dyn SOracle + '_> = match cfg.mode {
        PipelineMode::Exact => Box::new(ExactS {
            scenery: need_truth()?,
        }),
        PipelineMode::Symmetric => {
            let s = need_truth()?;
            if dim != 1 {
                return Err(Error::Unsupported(
                    "symmetric mode is one-dimensional".into(),
                ));
            }
            if !law.is_symmetric() {
                return Err(Error::InvalidArgument(
                    "symmetric mode needs a symmetric step law".into(),
                ));
            }
            match cfg.symmetric_route {
                SymmetricRoute::Direct => Box::new(SymmetricDirect { scenery: s }),
                SymmetricRoute::Recursive => Box::new(SymmetricRecursive::from_scenery(s, cfg.m)?),
            }
        }
        PipelineMode::Inverted => {
            let oracle = match (&cfg.trace_file, &truth) {
                (Some(path), _) => {
                    let full = match base {
                        Some(b) if path.is_relative() => b.join(path),
                        _ => path.clone(),
                    };
                    let (values, dt) = read_trace(&full)?;
                    let temporal = TraceTemporal::new(values, dt)?;
                    inverted_oracle(cfg, &law, &temporal)?
                }
                (None, Some(s)) => match cfg.inversion.oracle {
                    TemporalSource::Exact => {
                        let temporal = ExactTemporal {
                            law: &law,
                            scenery: s,
                            cutoff: cfg.inversion.fourier_cutoff,
                        };
                        inverted_oracle(cfg, &law, &temporal)?
                    }
                    TemporalSource::Mc => {
                        let temporal = MonteCarloTemporal {
                            law: &law,
                            scenery: s,
                            samples: cfg.inversion.samples,
                            gap: None,
                            seed: cfg.seed,
                        };
                        inverted_oracle(cfg, &law, &temporal)?
                    }
                },
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "need a scenery or a trace file".into(),
                    ));
                }
            };
            Box::new(oracle)
        }
    };
    if cfg.trace_file.is_some() && cfg.mode != PipelineMode::Inverted {
        return Err(Error::InvalidArgument(
            "trace input supports inverted mode only".into(),
        ));
    }
    let oracle: &dyn SOracle = holder.as_ref();
    let search = maximal_grid(oracle, cfg.m, dim, cfg.budget)?;
    let estimate = assemble_omega(&search.subset)?;
    let mut candidates = vec![estimate.clone()];
    if cfg.mode == PipelineMode::Symmetric {
        candidates.push(estimate.reflect());
    }
    let resolution = cfg.resolution.unwrap_or(64 * cfg.m);
    let mut candidate_distances = Vec::new();
    let mut aligned = None;
    let mut soundness = None;
    if let Some(s) = &truth {
        for c in &candidates {
            candidate_distances.push(aligned_distance(c, s, resolution, false)?.distance);
        }
        aligned = candidate_distances.iter().copied().reduce(f64::min);
        if cfg.mode == PipelineMode::Exact {
            soundness = Some(search.subset.is_empty() || shift_fits(s, &search.subset));
        }
    }
    let n_max = search.subset.len().saturating_sub(1);
    let tolerances = (0..=n_max.min(4))
        .map(|n| (n, oracle.tolerance(n)))
        .collect();
    Ok(PipelineOutput {
        estimate: estimate.to_json(),
        candidates: candidates.iter().map(Scenery::to_json).collect(),
        aligned_distance: aligned,
        diagnostics: PipelineDiagnostics {
            mode: cfg.mode,
            m: cfg.m,
            delta: TAU / cfg.m as f64,
            distinctness: report,
            witness: search.subset.witness(),
            search,
            candidate_distances,
            soundness,
            tolerances,
            resolution,
        },
    })
}
