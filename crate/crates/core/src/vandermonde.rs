//! Finite Vandermonde systems `V_{ij} = z_j^i`, rows `i = 1..M`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solutions whose equilibrated condition number exceeds this are flagged.
pub const TRUST_CONDITION: f64 = 1e12;

/// Largest system handled by the explicit inverse.
pub const EXPLICIT_INVERSE_MAX: usize = 8;

/// Distinct nonzero generators stored by non-increasing modulus.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSet {
    z: Vec<Complex64>,
    original: Vec<usize>,
    min_distance: f64,
    min_modulus: f64,
}

impl GeneratorSet {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("no generators".into()));
        }
        if let Some(i) = values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite(if values[i].re.is_finite() {
                values[i].im
            } else {
                values[i].re
            }));
        }
        if let Some(i) = values.iter().position(|z| z.norm() == 0.0) {
            return Err(Error::InvalidArgument(format!("generator {i} is zero")));
        }
        let mut min_distance = f64::INFINITY;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let d = (values[i] - values[j]).norm();
                if d == 0.0 {
                    return Err(Error::DuplicateGenerators(i, j));
                }
                min_distance = min_distance.min(d);
            }
        }
        let mut original: Vec<usize> = (0..values.len()).collect();
        original.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
        let z: Vec<Complex64> = original.iter().map(|&i| values[i]).collect();
        let min_modulus = z.last().map(|v| v.norm()).unwrap_or(0.0);
        Ok(GeneratorSet {
            z,
            original,
            min_distance,
            min_modulus,
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Generators in stored (non-increasing modulus) order.
    pub fn values(&self) -> &[Complex64] {
        &self.z
    }

    /// Position in the constructor's input of the `j`-th stored generator.
    pub fn original_index(&self, j: usize) -> usize {
        self.original[j]
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn min_modulus(&self) -> f64 {
        self.min_modulus
    }

    /// `M × ℓ` matrix with rows `i = 1..M`.
    pub fn matrix(&self, rows: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, self.len(), |i, j| self.z[j].powu(i as u32 + 1))
    }

    /// Reorder a vector indexed in stored order back to input order.
    pub fn to_input_order(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        for (j, v) in x.iter().enumerate() {
            out[self.original[j]] = *v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VandermondeSolution {
    /// Unknowns in the generator set's stored order.
    pub x: Vec<Complex64>,
    pub residual_norm: f64,
    /// 2-norm condition number of the column-equilibrated matrix.
    pub condition: f64,
    pub trusted: bool,
}

/// Least-squares solve of `V x = b` with `M = b.len() >= ℓ` rows. Columns
/// are scaled to unit max modulus first and the scaling undone afterwards.
pub fn vandermonde_solve(z: &GeneratorSet, b: &[Complex64]) -> Result<VandermondeSolution> {
    let rows = b.len();
    let l = z.len();
    if rows < l {
        return Err(Error::InvalidArgument(format!(
            "need at least {l} equations, got {rows}"
        )));
    }
    let scale: Vec<f64> = z
        .values()
        .iter()
        .map(|v| {
            let r = v.norm();
            if r <= 1.0 {
                r
            } else {
                r.powi(rows as i32)
            }
        })
        .collect();
    let v = z.matrix(rows);
    let scaled = DMatrix::from_fn(rows, l, |i, j| v[(i, j)] / scale[j]);
    let rhs = DVector::from_column_slice(b);
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let y = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidArgument(format!("SVD solve failed: {e}")))?;
    let x: Vec<Complex64> = y.iter().zip(&scale).map(|(v, s)| v / *s).collect();
    let residual = &scaled * &y - &rhs;
    let residual_norm = residual.norm();
    Ok(VandermondeSolution {
        x,
        residual_norm,
        condition,
        trusted: condition.is_finite() && condition <= TRUST_CONDITION,
    })
}

/// Elementary symmetric polynomials `e_0..e_n` of `values`.
pub fn elementary_symmetric(values: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); values.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (count, &v) in values.iter().enumerate() {
        for j in (1..=count + 1).rev() {
            let prev = e[j - 1];
            e[j] += v * prev;
        }
    }
    e
}

/// Entry `(i, j)`, 1-based, of the inverse of the square `ℓ × ℓ` matrix
/// `V_{ij} = z_j^i`:
/// `(V⁻¹)_{ij} = (-1)^{ℓ-j} e_{ℓ-j}({z_k}_{k≠i}) / (z_i ∏_{k≠i} (z_i - z_k))`.
pub fn vandermonde_inverse_entry(z: &GeneratorSet, i: usize, j: usize) -> Result<Complex64> {
    let l = z.len();
    if l > EXPLICIT_INVERSE_MAX {
        return Err(Error::Unsupported(format!(
            "explicit inverse limited to {EXPLICIT_INVERSE_MAX} generators"
        )));
    }
    if !(1..=l).contains(&i) || !(1..=l).contains(&j) {
        return Err(Error::InvalidArgument(format!(
            "index ({i}, {j}) outside 1..={l}"
        )));
    }
    let zi = z.values()[i - 1];
    let others: Vec<Complex64> = z
        .values()
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i - 1)
        .map(|(_, v)| *v)
        .collect();
    let e = elementary_symmetric(&others);
    let denom: Complex64 = others.iter().map(|zk| zi - zk).product::<Complex64>() * zi;
    let sign = if (l - j).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * e[l - j] / denom)
}

/// Full inverse via [`vandermonde_inverse_entry`].
pub fn vandermonde_inverse(z: &GeneratorSet) -> Result<DMatrix<Complex64>> {
    let l = z.len();
    let mut out = DMatrix::zeros(l, l);
    for i in 1..=l {
        for j in 1..=l {
            out[(i - 1, j - 1)] = vandermonde_inverse_entry(z, i, j)?;
        }
    }
    Ok(out)
}

/// `r_i = Σ_j z_j^i x_j` for `i = 1..M`, `x` in stored order.
pub fn truncation_residuals(
    z: &GeneratorSet,
    x: &[Complex64],
    rows: usize,
) -> Result<Vec<Complex64>> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: x.len(),
        });
    }
    if rows == 0 {
        return Err(Error::InvalidArgument("need at least one row".into()));
    }
    let mut powers: Vec<Complex64> = z.values().to_vec();
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        out.push(powers.iter().zip(x).map(|(p, v)| p * v).sum());
        for (p, g) in powers.iter_mut().zip(z.values()) {
            *p *= g;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMethod {
    Constructive,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub m: u64,
    /// `max_s (1/π) |arg(ω_s^m)|`.
    pub max_error: f64,
    pub method: RotationMethod,
}

/// Brute-force scan limit for [`recurrent_rotation`].
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Scan budget for the constructive search.
const CONSTRUCTIVE_BUDGET: u64 = 10_000_000;

/// Angle of `ω` as a fraction of a full turn in 64-bit fixed point, so
/// powers reduce mod one turn exactly by wrapping multiplication.
fn turn_fraction(w: Complex64) -> u64 {
    let turns = (w.arg() / std::f64::consts::TAU).rem_euclid(1.0);
    // turns < 1, the product stays below 2^64 except for the rounding edge
    ((turns * 18_446_744_073_709_551_616.0) as u128 & u64::MAX as u128) as u64
}

/// `(1/π)|arg|` for a fixed-point turn fraction.
fn phase_error(p: u64) -> f64 {
    2.0 * ((p as i64) as f64 / 18_446_744_073_709_551_616.0).abs()
}

/// `max_s (1/π)|arg(ω_s^m)|`, exact up to the rounding of each `arg ω_s`.
pub fn rotation_error(omega: &[Complex64], m: u64) -> f64 {
    omega
        .iter()
        .map(|w| phase_error(turn_fraction(*w).wrapping_mul(m)))
        .fold(0.0, f64::max)
}

fn constructive_rotation(phases: &[u64], eps: f64) -> Option<u64> {
    let l = phases.len();
    // ε_s = ε / ∏_{r>s} N_r with N_r = ⌈2/ε_r⌉: later factors multiply the
    // error left on earlier points by at most N_r each
    let mut tol = vec![0.0; l];
    let mut steps = vec![0u64; l];
    let mut acc = eps;
    let mut work = 0u64;
    for s in (0..l).rev() {
        tol[s] = acc;
        let n = (2.0 / acc).ceil();
        if !n.is_finite() || n > CONSTRUCTIVE_BUDGET as f64 {
            return None;
        }
        steps[s] = n as u64;
        work = work.checked_add(steps[s])?;
        acc /= n;
    }
    if work > CONSTRUCTIVE_BUDGET {
        return None;
    }
    let mut m = 1u64;
    for s in 0..l {
        let base = phases[s].wrapping_mul(m);
        // pigeonhole over w^0..w^N guarantees some j <= N within 2/N
        let j = (1..=steps[s]).find(|&j| phase_error(base.wrapping_mul(j)) <= tol[s])?;
        m = m.checked_mul(j)?;
    }
    Some(m)
}

/// Find `m >= 1` with `(1/π)|arg(ω_s^m)| <= ε` for every `s`.
///
/// The constructive search composes one pigeonhole step per point with
/// tolerances refined so later steps cannot undo earlier ones. Its `m` is
/// returned when it lies within `1..=10⁶`; otherwise the first `m` in that
/// range meeting the bound is preferred, and the constructive `m` is kept
/// only when the scan finds nothing. The bound is re-checked on every
/// returned `m`.
pub fn recurrent_rotation(omega: &[Complex64], eps: f64) -> Result<Rotation> {
    if omega.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be in (0, 1), got {eps}"
        )));
    }
    if let Some(w) = omega.iter().find(|w| (w.norm() - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "{w} is not on the unit circle"
        )));
    }
    let phases: Vec<u64> = omega.iter().map(|w| turn_fraction(*w)).collect();
    let error_at = |m: u64| {
        phases
            .iter()
            .map(|p| phase_error(p.wrapping_mul(m)))
            .fold(0.0, f64::max)
    };
    let constructive = constructive_rotation(&phases, eps)
        .map(|m| (m, error_at(m)))
        .filter(|&(_, err)| err <= eps);
    if let Some((m, err)) = constructive {
        if m <= BRUTE_FORCE_LIMIT {
            return Ok(Rotation {
                m,
                max_error: err,
                method: RotationMethod::Constructive,
            });
        }
    }
    let mut best = (0u64, f64::INFINITY);
    for m in 1..=BRUTE_FORCE_LIMIT {
        let err = error_at(m);
        if err <= eps {
            return Ok(Rotation {
                m,
                max_error: err,
                method: RotationMethod::BruteForce,
            });
        }
        if err < best.1 {
            best = (m, err);
        }
    }
    if let Some((m, err)) = constructive {
        return Ok(Rotation {
            m,
            max_error: err,
            method: RotationMethod::Constructive,
        });
    }
    Err(Error::RotationNotFound(format!(
        "no m <= {BRUTE_FORCE_LIMIT} within {eps}; best m = {} with error {:.3e}",
        best.0, best.1
    )))
}
