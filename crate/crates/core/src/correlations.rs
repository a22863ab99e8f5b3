//! Spatial and temporal correlations of a scenery.
//!
//! `S_n(y) = (2π)^{-d} ∫ f(x) ∏_k f(x + y_1 + … + y_k) dx` is computed exactly
//! from box arithmetic. The temporal correlation
//! `T_n(t) = E[f(X_0) ∏_k f(X_{t_1 + … + t_k})]` under the stationary start has
//! three independent evaluations: a Monte Carlo estimate from one simulated
//! trajectory, the Fourier series in the spatial correlation coefficients,
//! and direct quadrature against the increment densities.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step_law::{index_box, mixture_density, StepLaw};
use crate::torus::{wrap_scalar, BoxSet, Scenery, TorusPoint, TAU};

/// Number of independent trajectory segments in [`estimate_temporal`].
/// Fixed so that results do not depend on the worker count.
pub const SEGMENTS: u64 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

fn volume_normaliser(dim: usize) -> f64 {
    TAU.powi(dim as i32)
}

/// `S_n` from the partial sums `P_1..P_n` of the pointer tuple.
fn correlation_of_partial_sums(s: &Scenery, sums: &[Vec<f64>]) -> f64 {
    let cells = s.cells();
    let mut cur = cells.clone();
    for p in sums {
        if cur.is_empty() {
            return 0.0;
        }
        let shift: Vec<f64> = p.iter().map(|v| -v).collect();
        cur = cur.intersect(&cells.translate(&shift));
    }
    cur.measure() / volume_normaliser(s.dim())
}

fn partial_sums(dim: usize, y: &[f64]) -> Vec<Vec<f64>> {
    let mut acc = vec![0.0; dim];
    y.chunks(dim)
        .map(|step| {
            for (a, v) in acc.iter_mut().zip(step) {
                *a = wrap_scalar(*a + v);
            }
            acc.clone()
        })
        .collect()
}

/// `S_n(y)` for a pointer tuple of torus points; `n = 0` gives `S_0 = μ(Ω)/(2π)^d`.
pub fn spatial_correlation(s: &Scenery, y: &[TorusPoint]) -> Result<f64> {
    let mut flat = Vec::with_capacity(y.len() * s.dim());
    for p in y {
        if p.dim() != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                got: p.dim(),
            });
        }
        flat.extend_from_slice(p.coords());
    }
    spatial_correlation_flat(s, &flat)
}

/// `S_n(y)` with the pointer tuple flattened to `n·d` reals.
pub fn spatial_correlation_flat(s: &Scenery, y: &[f64]) -> Result<f64> {
    let d = s.dim();
    if !y.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: y.len() % d,
        });
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }
    Ok(correlation_of_partial_sums(s, &partial_sums(d, y)))
}

/// `σ_n(y) = Σ_ε S_n(ε_1 y_1, …, ε_n y_n)` over all sign patterns.
pub fn sigma_n(s: &Scenery, y: &[f64]) -> Result<f64> {
    if s.dim() != 1 {
        return Err(Error::Unsupported("sigma_n is defined for d = 1".into()));
    }
    let n = y.len();
    let mut total = 0.0;
    let mut signed = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (i, v) in y.iter().enumerate() {
            signed[i] = if mask >> i & 1 == 1 { -v } else { *v };
        }
        total += spatial_correlation_flat(s, &signed)?;
    }
    Ok(total)
}

/// `∫_a^b e^{-ikx} dx`.
fn interval_hat(k: i64, a: f64, b: f64) -> Complex64 {
    if k == 0 {
        return Complex64::new(b - a, 0.0);
    }
    let kf = k as f64;
    (Complex64::from_polar(1.0, -kf * a) - Complex64::from_polar(1.0, -kf * b))
        / Complex64::new(0.0, kf)
}

/// `f̂(k)` for the indicator of a scenery.
pub fn indicator_hat(s: &Scenery, k: &[i64]) -> Complex64 {
    cells_hat(s.cells(), k)
}

fn cells_hat(cells: &BoxSet, k: &[i64]) -> Complex64 {
    cells
        .boxes()
        .iter()
        .map(|b| {
            b.sides
                .iter()
                .zip(k)
                .map(|(iv, &kj)| interval_hat(kj, iv.lo, iv.hi))
                .product::<Complex64>()
        })
        .sum()
}

/// Cached `f̂` on the box `|k_i| <= cutoff`.
#[derive(Clone, Debug)]
pub struct IndicatorTransform {
    dim: usize,
    cutoff: i64,
    s0: f64,
    values: Vec<Complex64>,
}

impl IndicatorTransform {
    pub fn new(s: &Scenery, cutoff: usize) -> Self {
        let values = index_box(s.dim(), cutoff)
            .iter()
            .map(|k| indicator_hat(s, k))
            .collect();
        IndicatorTransform {
            dim: s.dim(),
            cutoff: cutoff as i64,
            s0: s.measure() / volume_normaliser(s.dim()),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn get(&self, k: &[i64]) -> Complex64 {
        let side = 2 * self.cutoff + 1;
        let mut idx = 0i64;
        for &kj in k {
            debug_assert!(kj.abs() <= self.cutoff);
            idx = idx * side + kj + self.cutoff;
        }
        self.values[idx as usize]
    }

    /// `Ŝ_n(k) = (2π)^{-d} f̂(-k_1) ∏_{j=1}^n f̂(k_j - k_{j+1})` with `k_{n+1} = 0`,
    /// for `k` flattened to `n·d` integers. Each `|k_j|` must be at most half
    /// the cutoff.
    pub fn spatial_fourier(&self, k: &[i64]) -> Complex64 {
        let d = self.dim;
        let n = k.len() / d;
        if n == 0 {
            return Complex64::new(self.s0, 0.0);
        }
        let neg: Vec<i64> = k[..d].iter().map(|v| -v).collect();
        let mut prod = self.get(&neg);
        let mut diff = vec![0i64; d];
        for j in 0..n {
            for c in 0..d {
                let next = if j + 1 < n { k[(j + 1) * d + c] } else { 0 };
                diff[c] = k[j * d + c] - next;
            }
            prod *= self.get(&diff);
        }
        prod / volume_normaliser(d)
    }
}

/// Closed-form `Ŝ_n(k) = ∫ S_n(y) e^{-ik·y} dy` over `T^{nd}`.
pub fn spatial_fourier(s: &Scenery, k: &[i64]) -> Result<Complex64> {
    let d = s.dim();
    if !k.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: k.len() % d,
        });
    }
    let n = k.len() / d;
    if n == 0 {
        return Ok(Complex64::new(s.measure() / volume_normaliser(d), 0.0));
    }
    let neg: Vec<i64> = k[..d].iter().map(|v| -v).collect();
    let mut prod = indicator_hat(s, &neg);
    for j in 0..n {
        let diff: Vec<i64> = (0..d)
            .map(|c| k[j * d + c] - if j + 1 < n { k[(j + 1) * d + c] } else { 0 })
            .collect();
        prod *= indicator_hat(s, &diff);
    }
    Ok(prod / volume_normaliser(d))
}

fn check_times(t: &[f64]) -> Result<()> {
    match t.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(bad) => Err(Error::InvalidArgument(format!(
            "time gaps must be positive, got {bad}"
        ))),
        None => Ok(()),
    }
}

/// Monte Carlo estimate of `T_n(t)` from blocks of one long trajectory per
/// segment. Block starts are separated by `gap + Σ t_i`; every segment
/// burns in for `gap` first. `gap` defaults to [`StepLaw::default_gap`].
/// Segment `i` uses seed `seed + i`.
pub fn estimate_temporal(
    law: &StepLaw,
    s: &Scenery,
    t: &[f64],
    samples: u64,
    gap: Option<f64>,
    seed: u64,
) -> Result<CorrelationEstimate> {
    check_times(t)?;
    if law.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: law.dim(),
        });
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let gap = gap.unwrap_or_else(|| law.default_gap());
    if !(gap.is_finite() && gap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gap must be positive, got {gap}"
        )));
    }
    let per = samples / SEGMENTS;
    let extra = samples % SEGMENTS;
    let hits: Vec<u64> = (0..SEGMENTS)
        .into_par_iter()
        .map(|seg| {
            let blocks = per + u64::from(seg < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(seg));
            let mut x = vec![0.0; law.dim()];
            let mut hits = 0u64;
            for _ in 0..blocks {
                law.add_increment(gap, &mut rng, &mut x);
                let mut all = s.contains(&x);
                for &ti in t {
                    law.add_increment(ti, &mut rng, &mut x);
                    all &= s.contains(&x);
                }
                hits += u64::from(all);
            }
            hits
        })
        .collect();
    let total: u64 = hits.iter().sum();
    let n = samples as f64;
    let mean = total as f64 / n;
    let stderr = if samples > 1 {
        // products are 0/1, so Σ(x - mean)² = total - n·mean²
        let ss = (total as f64 - n * mean * mean).max(0.0);
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(CorrelationEstimate {
        value: mean,
        stderr,
        samples,
    })
}

/// Value of [`exact_temporal_fourier`] with its truncation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTemporal {
    pub value: f64,
    pub truncation: f64,
}

/// Sum over the coefficients of `|γ̂_t|` on `|k_i| <= cutoff`.
fn abs_coefficient_sum(law: &StepLaw, t: f64, cutoff: usize) -> Result<f64> {
    let mut total = 0.0;
    for k in index_box(law.dim(), cutoff) {
        total += law.gamma_hat_unchecked(t, &k)?.norm();
    }
    Ok(total)
}

/// `T_n(t)` from the Fourier series
/// `Σ_A ∏_{i∉A} β_{t_i} ∏_{i∈A} (1-β_{t_i}) L_A` with
/// `L_A = (2π)^{-|A|d} Σ_k ∏_{i∈A} γ̂_{t_i}(k_i) Ŝ_{|A|}(-k)` and `L_∅ = S_0`,
/// truncated to `|k_i| <= cutoff`.
pub fn exact_temporal_fourier(
    law: &StepLaw,
    s: &Scenery,
    t: &[f64],
    cutoff: usize,
) -> Result<FourierTemporal> {
    check_times(t)?;
    if law.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: law.dim(),
        });
    }
    let n = t.len();
    if n > 4 {
        return Err(Error::Unsupported(
            "Fourier oracle limited to n <= 4".into(),
        ));
    }
    let fhat = IndicatorTransform::new(s, 2 * cutoff);
    let s0 = s.measure() / volume_normaliser(s.dim());
    if n == 0 {
        return Ok(FourierTemporal {
            value: s0,
            truncation: 0.0,
        });
    }
    let d = s.dim();
    let indices = index_box(d, cutoff);
    let betas: Vec<f64> = t.iter().map(|&ti| law.beta_unchecked(ti)).collect();
    let coeffs: Vec<Vec<Complex64>> = t
        .iter()
        .map(|&ti| {
            indices
                .iter()
                .map(|k| law.gamma_hat_unchecked(ti, k))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let coef_bound = s.measure().powi(2) / volume_normaliser(d);
    let wide = 4 * cutoff + 10;
    let mut inside = Vec::with_capacity(n);
    let mut total = Vec::with_capacity(n);
    for &ti in t {
        inside.push(abs_coefficient_sum(law, ti, cutoff)?);
        total.push(abs_coefficient_sum(law, ti, wide)?);
    }

    let mut value = 0.0;
    let mut truncation = 0.0;
    for mask in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
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
        if members.is_empty() {
            value += weight * s0;
            continue;
        }
        let a = members.len();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; a];
        let mut k = vec![0i64; a * d];
        'outer: loop {
            let mut prod = Complex64::new(1.0, 0.0);
            for (slot, &i) in members.iter().enumerate() {
                prod *= coeffs[i][idx[slot]];
                for c in 0..d {
                    k[slot * d + c] = -indices[idx[slot]][c];
                }
            }
            acc += prod * fhat.spatial_fourier(&k);
            let mut slot = a;
            loop {
                if slot == 0 {
                    break 'outer;
                }
                slot -= 1;
                idx[slot] += 1;
                if idx[slot] < indices.len() {
                    break;
                }
                idx[slot] = 0;
            }
        }
        let scale = volume_normaliser(d).powi(a as i32);
        value += weight * acc.re / scale;
        let full: f64 = members.iter().map(|&i| total[i]).product();
        let kept: f64 = members.iter().map(|&i| inside[i]).product();
        // |Ŝ_a(k)| <= (2π)^{-d} μ^{a+1} <= (2π)^{-d} μ² (2π)^{(a-1)d}
        let bound = coef_bound * volume_normaliser(d).powi(a as i32 - 1);
        truncation += weight * (full - kept).max(0.0) * bound / scale;
    }
    Ok(FourierTemporal { value, truncation })
}

const GL_DEGREE: usize = 20;
const MAX_PIECE: f64 = 0.25;

fn breakpoints(mut pts: Vec<f64>) -> Vec<f64> {
    pts.push(0.0);
    pts.push(TAU);
    for p in pts.iter_mut() {
        if *p != TAU {
            *p = wrap_scalar(*p);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        let pieces = (len / MAX_PIECE).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            out.push(w[0] + len * i as f64 / pieces as f64);
        }
    }
    out
}

fn integrate_pieces(gl: &GaussLegendre, cuts: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    cuts.windows(2)
        .map(|w| gl.integrate(w[0], w[1], &mut f))
        .sum()
}

fn endpoints_1d(cells: &BoxSet) -> Vec<f64> {
    cells
        .boxes()
        .iter()
        .flat_map(|b| [b.sides[0].lo, b.sides[0].hi])
        .collect()
}

fn pairwise_differences(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x - y))
        .collect()
}

/// `T_n(t) = ∫ ∏ D_{t_i}(y_i) S_n(y) dy` by piecewise Gauss–Legendre
/// quadrature with breakpoints at the kinks of `S_n`; the atom of `D_t` is
/// expanded over subsets. One-dimensional sceneries with `n <= 2` only.
pub fn exact_temporal_quadrature(law: &StepLaw, s: &Scenery, t: &[f64]) -> Result<f64> {
    check_times(t)?;
    if s.dim() != 1 || law.dim() != 1 {
        return Err(Error::Unsupported("quadrature oracle needs d = 1".into()));
    }
    if t.len() > 2 {
        return Err(Error::Unsupported("quadrature oracle needs n <= 2".into()));
    }
    let s0 = s.measure() / TAU;
    if t.is_empty() {
        return Ok(s0);
    }
    let gl = GaussLegendre::new(NonZeroUsize::new(GL_DEGREE).expect("nonzero"));
    let cells = s.cells();
    let ends = endpoints_1d(cells);
    let outer_cuts = breakpoints(pairwise_differences(&ends, &ends));
    let s1 = |y: f64| cells.intersection_measure(&cells.translate(&[-y])) / TAU;
    let single = |ti: f64| -> Result<f64> {
        let terms = law.gamma_mixture(ti)?;
        Ok(integrate_pieces(&gl, &outer_cuts, |y| {
            mixture_density(&terms, &[y]) * s1(y)
        }))
    };
    let betas: Vec<f64> = t.iter().map(|&ti| law.beta_unchecked(ti)).collect();
    if t.len() == 1 {
        let mut value = betas[0] * s0;
        if betas[0] < 1.0 {
            value += (1.0 - betas[0]) * single(t[0])?;
        }
        return Ok(value);
    }

    let (b1, b2) = (betas[0], betas[1]);
    let mut value = b1 * b2 * s0;
    if b1 > 0.0 && b2 < 1.0 {
        value += b1 * (1.0 - b2) * single(t[1])?;
    }
    if b2 > 0.0 && b1 < 1.0 {
        value += (1.0 - b1) * b2 * single(t[0])?;
    }
    if b1 < 1.0 && b2 < 1.0 {
        let outer = law.gamma_mixture(t[0])?;
        let inner = law.gamma_mixture(t[1])?;
        let double = integrate_pieces(&gl, &outer_cuts, |y1| {
            let g1 = mixture_density(&outer, &[y1]);
            if g1 == 0.0 {
                return 0.0;
            }
            let b = cells.intersect(&cells.translate(&[-y1]));
            if b.is_empty() {
                return 0.0;
            }
            let bends = endpoints_1d(&b);
            let mut kinks = pairwise_differences(&ends, &bends);
            for k in kinks.iter_mut() {
                *k -= y1;
            }
            let inner_cuts = breakpoints(kinks);
            let g2 = integrate_pieces(&gl, &inner_cuts, |y2| {
                mixture_density(&inner, &[y2])
                    * b.intersection_measure(&cells.translate(&[-(y1 + y2)]))
            });
            g1 * g2 / TAU
        });
        value += (1.0 - b1) * (1.0 - b2) * double;
    }
    Ok(value)
}

/// Trace `f(X_{i·dt})`, `i = 0..=horizon/dt`, with `X_0` uniform on the torus.
pub fn simulate_trace(
    law: &StepLaw,
    s: &Scenery,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<(f64, u8)>> {
    if law.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: law.dim(),
        });
    }
    if !(dt.is_finite() && dt > 0.0 && horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and horizon >= 0, got dt = {dt}, horizon = {horizon}"
        )));
    }
    let steps = (horizon / dt + 1e-9).floor() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..law.dim()).map(|_| rng.random_range(0.0..TAU)).collect();
    let mut out = Vec::with_capacity(steps as usize + 1);
    for i in 0..=steps {
        if i > 0 {
            law.add_increment(dt, &mut rng, &mut x);
        }
        out.push((i as f64 * dt, u8::from(s.contains(&x))));
    }
    Ok(out)
}

/// One row of a correlation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub times: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub method: String,
}

/// CSV with columns `n, t_1..t_N, value, stderr, samples, method`, `N` the
/// largest order present. `header` lines are written first as `# ` comments.
pub fn correlation_csv(rows: &[CorrelationRow], header: &[String]) -> String {
    let width = rows.iter().map(|r| r.times.len()).max().unwrap_or(0);
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push('n');
    for i in 1..=width {
        out.push_str(&format!(",t_{i}"));
    }
    out.push_str(",value,stderr,samples,method\n");
    for r in rows {
        out.push_str(&r.times.len().to_string());
        for i in 0..width {
            out.push(',');
            if let Some(t) = r.times.get(i) {
                out.push_str(&format!("{t}"));
            }
        }
        out.push_str(&format!(
            ",{:.17e},{:.17e},{},{}\n",
            r.value, r.stderr, r.samples, r.method
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step_law::{MixtureComponent, StepLaw};
    use crate::torus::wrap;
    use std::f64::consts::PI;

    fn half() -> Scenery {
        Scenery::from_intervals(&[(0.0, PI)]).unwrap()
    }

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

    #[test]
    fn spatial_examples() {
        let s = half();
        assert!((spatial_correlation(&s, &[]).unwrap() - 0.5).abs() < 1e-15);
        let y = wrap(&[PI / 2.0]).unwrap();
        assert!((spatial_correlation(&s, &[y]).unwrap() - 0.25).abs() < 1e-15);
        assert!((sigma_n(&s, &[PI / 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            spatial_correlation(&s, &[TorusPoint::origin(2)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn revisiting_zero_drops_a_step() {
        let s = three_arcs();
        let long = spatial_correlation_flat(&s, &[0.7, -0.7, 1.9]).unwrap();
        let short = spatial_correlation_flat(&s, &[0.7, 1.2]).unwrap();
        assert!((long - short).abs() < 1e-14);
        let zero = spatial_correlation_flat(&s, &[0.0, 0.4]).unwrap();
        assert!((zero - spatial_correlation_flat(&s, &[0.4]).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn sigma_at_zero() {
        let s = three_arcs();
        for n in 1..4 {
            let zeros = vec![0.0; n];
            let lhs = sigma_n(&s, &zeros).unwrap();
            let rhs = (1 << n) as f64 * spatial_correlation_flat(&s, &zeros).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
        let s2 = Scenery::new(2, vec![vec![(0.0, 1.0), (0.0, 1.0)]]).unwrap();
        assert!(sigma_n(&s2, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn fourier_closed_form_matches_quadrature() {
        let s = three_arcs();
        // S_1 is piecewise linear; high-order trapezoid on a fine grid
        let n = 1 << 14;
        let h = TAU / n as f64;
        let samples: Vec<f64> = (0..n)
            .map(|i| spatial_correlation_flat(&s, &[i as f64 * h]).unwrap())
            .collect();
        for k in -3i64..=3 {
            let quad: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(i, v)| Complex64::from_polar(*v, -(k as f64) * i as f64 * h))
                .sum::<Complex64>()
                * h;
            let closed = spatial_fourier(&s, &[k]).unwrap();
            assert!((quad - closed).norm() < 1e-6, "k={k}");
        }
        let zero = spatial_fourier(&half(), &[0]).unwrap();
        assert!((zero.re - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn fourier_transform_cache_matches_direct() {
        let s = three_arcs();
        let ft = IndicatorTransform::new(&s, 6);
        for k in index_box(2, 3) {
            let a = ft.spatial_fourier(&k);
            let b = spatial_fourier(&s, &k).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn temporal_oracles_agree_brownian() {
        let s = half();
        let law = StepLaw::brownian_1d(0.0, 1.0);
        let f = exact_temporal_fourier(&law, &s, &[1.0], 40).unwrap();
        let q = exact_temporal_quadrature(&law, &s, &[1.0]).unwrap();
        assert!((f.value - q).abs() < 1e-6, "{} vs {q}", f.value);
        assert!(f.truncation < 1e-10);
    }

    #[test]
    fn temporal_oracles_agree_with_atom_and_n2() {
        let s = three_arcs();
        let law = atom_law();
        for t in [vec![0.6], vec![0.5, 1.3]] {
            let f = exact_temporal_fourier(&law, &s, &t, 30).unwrap();
            let q = exact_temporal_quadrature(&law, &s, &t).unwrap();
            assert!((f.value - q).abs() < 1e-6, "{t:?}: {} vs {q}", f.value);
        }
        let b = StepLaw::brownian_1d(1.0, 0.8);
        let f = exact_temporal_fourier(&b, &s, &[0.4, 0.9], 25).unwrap();
        let q = exact_temporal_quadrature(&b, &s, &[0.4, 0.9]).unwrap();
        assert!((f.value - q).abs() < 1e-6);
    }

    #[test]
    fn temporal_limits() {
        let s = half();
        let b = StepLaw::brownian_1d(0.0, 1.0);
        let far = exact_temporal_fourier(&b, &s, &[80.0], 10).unwrap();
        assert!((far.value - 0.25).abs() < 1e-12);
        let law = atom_law();
        let near = exact_temporal_fourier(&law, &s, &[1e-4], 30).unwrap();
        assert!((near.value - 0.5).abs() < 1e-3);
        assert_eq!(exact_temporal_quadrature(&b, &s, &[]).unwrap(), 0.5);
        assert!(exact_temporal_fourier(&b, &s, &[1.0; 5], 2).is_err());
        assert!(exact_temporal_quadrature(&b, &s, &[1.0; 3]).is_err());
    }

    #[test]
    fn symmetric_integral_relation() {
        // T_1 = ½ ∫ D_t(y) σ_1(y) dy for a symmetric law
        let s = three_arcs();
        let law = StepLaw::brownian_1d(0.0, 0.7);
        let t = 0.8;
        let terms = law.gamma_mixture(t).unwrap();
        let gl = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
        let ends = endpoints_1d(s.cells());
        let cuts = breakpoints(pairwise_differences(&ends, &ends));
        let rhs = 0.5
            * integrate_pieces(&gl, &cuts, |y| {
                mixture_density(&terms, &[y]) * sigma_n(&s, &[y]).unwrap()
            });
        let lhs = exact_temporal_fourier(&law, &s, &[t], 40).unwrap().value;
        assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn monte_carlo_edge_cases() {
        let law = StepLaw::brownian_1d(1.0, 0.5);
        let full = Scenery::from_intervals(&[(0.0, TAU - 1e-9)]).unwrap();
        let e = estimate_temporal(&law, &full, &[0.5], 2000, None, 1).unwrap();
        assert!(e.value > 0.99);
        let empty = Scenery::empty(1);
        let e = estimate_temporal(&law, &empty, &[0.5], 2000, None, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.stderr, 0.0);
        assert!(estimate_temporal(&law, &empty, &[0.0], 10, None, 1).is_err());
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let s = half();
        let law = StepLaw::brownian_1d(1.0, 1.0);
        let e = estimate_temporal(&law, &s, &[1.0], 100_000, None, 42).unwrap();
        let x = exact_temporal_fourier(&law, &s, &[1.0], 40).unwrap().value;
        assert!((e.value - x).abs() < 4.0 * e.stderr, "{} vs {x}", e.value);
        let e = estimate_temporal(&law, &s, &[30.0], 100_000, None, 43).unwrap();
        assert!((e.value - 0.25).abs() < 4.0 * e.stderr);
        let again = estimate_temporal(&law, &s, &[30.0], 100_000, None, 43).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            CorrelationRow {
                times: vec![1.0],
                value: 0.25,
                stderr: 0.0,
                samples: 0,
                method: "exact".into(),
            },
            CorrelationRow {
                times: vec![1.0, 2.0],
                value: 0.125,
                stderr: 0.01,
                samples: 100,
                method: "mc".into(),
            },
        ];
        let csv = correlation_csv(&rows, &["seed=1".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed=1");
        assert_eq!(lines[1], "n,t_1,t_2,value,stderr,samples,method");
        assert!(lines[2].starts_with("1,1,,"));
        assert!(lines[3].ends_with(",100,mc"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scenery_1d() -> impl Strategy<Value = Scenery> {
            prop::collection::vec((0.0..6.0f64, 0.05..1.5f64), 1..4).prop_map(|v| {
                let ivs: Vec<(f64, f64)> = v
                    .into_iter()
                    .map(|(lo, len)| (lo, (lo + len).min(TAU)))
                    .collect();
                Scenery::from_intervals(&ivs).unwrap()
            })
        }

        proptest! {
            #[test]
            fn shift_invariance(s in scenery_1d(), th in 0.0..TAU,
                                y in prop::collection::vec(0.0..TAU, 0..4)) {
                let a = spatial_correlation_flat(&s, &y).unwrap();
                let b = spatial_correlation_flat(&s.translate(&[th]), &y).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn bounded_by_s0(s in scenery_1d(), y in prop::collection::vec(0.0..TAU, 0..4)) {
                let v = spatial_correlation_flat(&s, &y).unwrap();
                let s0 = spatial_correlation_flat(&s, &[]).unwrap();
                prop_assert!(v >= 0.0 && v <= s0 + 1e-14);
            }

            #[test]
            fn reflection_pairing(s in scenery_1d(), y in prop::collection::vec(0.0..TAU, 1..4)) {
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                let a = spatial_correlation_flat(&s.reflect(), &y).unwrap();
                let b = spatial_correlation_flat(&s, &neg).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn path_order_only_matters_through_visited_set(
                s in scenery_1d(), a in 0.1..3.0f64, b in 0.1..3.0f64
            ) {
                // (a, b) visits {0, a, a+b}; (-b, -a) visits the same set shifted by -(a+b)
                let fwd = spatial_correlation_flat(&s, &[a, b]).unwrap();
                let rev = spatial_correlation_flat(&s, &[-b, -a]).unwrap();
                prop_assert!((fwd - rev).abs() < 1e-12);
            }
        }
    }
}
