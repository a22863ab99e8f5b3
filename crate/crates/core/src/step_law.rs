//! Infinitely divisible step laws on `T^d`.
//!
//! A law is Brownian motion with drift, a compound Poisson process whose
//! jumps follow a finite Gaussian mixture, or the sum of both. The increment
//! over time `t` has distribution `D_t = β_t δ_0 + (1 - β_t) γ_t`, where the
//! atom weight is `β_t = e^{-λt}` for a pure jump law and `0` as soon as a
//! diffusion is present.
//!
//! Fourier convention: `ĝ(k) = ∫ g(x) e^{-ik·x} dx` over one period.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{wrap_scalar, TorusPoint, TAU};

/// Drift and per-coordinate diffusion coefficient (radians² per unit time).
#[derive(Clone, Debug, PartialEq)]
pub struct Brownian {
    pub drift: Vec<f64>,
    pub sigma2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Compound Poisson part: jumps at `rate`, each drawn from a wrapped
/// Gaussian mixture with diagonal covariances.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub rate: f64,
    pub mixture: Vec<MixtureComponent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw {
    dim: usize,
    brownian: Option<Brownian>,
    jump: Option<Jump>,
}

/// One unwrapped Gaussian in the mixture representation of `γ_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTerm {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl StepLaw {
    pub fn new(dim: usize, brownian: Option<Brownian>, jump: Option<Jump>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLaw("dimension must be positive".into()));
        }
        if brownian.is_none() && jump.is_none() {
            return Err(Error::InvalidLaw(
                "a law needs a Brownian part, a jump part, or both".into(),
            ));
        }
        if let Some(b) = &brownian {
            if b.drift.len() != dim || b.sigma2.len() != dim {
                return Err(Error::InvalidLaw(format!(
                    "brownian drift/sigma2 must have length {dim}"
                )));
            }
            if b.drift.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLaw("drift must be finite".into()));
            }
            // zero diffusion would leave a moving atom, which is not in L²
            if b.sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::InvalidLaw("sigma2 must be positive".into()));
            }
        }
        let jump = match jump {
            None => None,
            Some(mut j) => {
                if !(j.rate.is_finite() && j.rate > 0.0) {
                    return Err(Error::InvalidLaw("jump rate must be positive".into()));
                }
                if j.mixture.is_empty() {
                    return Err(Error::InvalidLaw("jump mixture is empty".into()));
                }
                let mut total = 0.0;
                for c in &j.mixture {
                    if c.mean.len() != dim || c.var.len() != dim {
                        return Err(Error::InvalidLaw(format!(
                            "mixture mean/var must have length {dim}"
                        )));
                    }
                    if !(c.weight.is_finite() && c.weight > 0.0) {
                        return Err(Error::InvalidLaw("mixture weights must be positive".into()));
                    }
                    if c.mean.iter().any(|m| !m.is_finite())
                        || c.var.iter().any(|v| !(v.is_finite() && *v > 0.0))
                    {
                        return Err(Error::InvalidLaw(
                            "mixture means must be finite and variances positive".into(),
                        ));
                    }
                    total += c.weight;
                }
                for c in &mut j.mixture {
                    c.weight /= total;
                }
                Some(j)
            }
        };
        Ok(StepLaw {
            dim,
            brownian,
            jump,
        })
    }

    /// Brownian motion with the given drift and diffusion in every coordinate.
    pub fn brownian(drift: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        let dim = drift.len();
        Self::new(dim, Some(Brownian { drift, sigma2 }), None)
    }

    /// One-dimensional Brownian law.
    pub fn brownian_1d(drift: f64, sigma2: f64) -> Self {
        Self::brownian(vec![drift], vec![sigma2]).expect("valid 1d brownian")
    }

    /// Pure compound Poisson law.
    pub fn jump(dim: usize, rate: f64, mixture: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(dim, None, Some(Jump { rate, mixture }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn brownian_part(&self) -> Option<&Brownian> {
        self.brownian.as_ref()
    }

    pub fn jump_part(&self) -> Option<&Jump> {
        self.jump.as_ref()
    }

    /// Decay rate `c` of the atom, `β_t = e^{-ct}`. Infinite when a
    /// diffusion is present, meaning there is no atom at all.
    pub fn atom_rate(&self) -> f64 {
        match (&self.brownian, &self.jump) {
            (Some(_), _) => f64::INFINITY,
            (None, Some(j)) => j.rate,
            (None, None) => unreachable!("validated on construction"),
        }
    }

    pub fn has_atom(&self) -> bool {
        self.brownian.is_none()
    }

    fn check_time(t: f64) -> Result<()> {
        if t.is_finite() && t > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "time must be positive, got {t}"
            )))
        }
    }

    fn check_index(&self, k: &[i64]) -> Result<()> {
        if k.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: k.len(),
            })
        }
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.beta_unchecked(t))
    }

    pub(crate) fn beta_unchecked(&self, t: f64) -> f64 {
        if self.has_atom() {
            (-self.atom_rate() * t).exp()
        } else {
            0.0
        }
    }

    /// Fourier coefficient of one jump, `ĥ(k)`.
    pub fn jump_hat(&self, k: &[i64]) -> Complex64 {
        match &self.jump {
            None => Complex64::new(1.0, 0.0),
            Some(j) => j
                .mixture
                .iter()
                .map(|c| gaussian_hat(c.weight, &c.mean, &c.var, k))
                .sum(),
        }
    }

    /// Lévy exponent `ψ(k)` with `D̂_t(k) = e^{tψ(k)}`.
    pub fn levy_exponent(&self, k: &[i64]) -> Complex64 {
        let mut psi = Complex64::new(0.0, 0.0);
        if let Some(b) = &self.brownian {
            for ((&kj, v), s2) in k.iter().zip(&b.drift).zip(&b.sigma2) {
                let kf = kj as f64;
                psi += Complex64::new(-0.5 * s2 * kf * kf, -v * kf);
            }
        }
        if let Some(j) = &self.jump {
            psi += j.rate * (self.jump_hat(k) - 1.0);
        }
        psi
    }

    pub fn d_hat(&self, t: f64, k: &[i64]) -> Result<Complex64> {
        Self::check_time(t)?;
        self.check_index(k)?;
        Ok((t * self.levy_exponent(k)).exp())
    }

    /// `γ̂_t(k) = (D̂_t(k) - β_t) / (1 - β_t)`.
    pub fn gamma_hat(&self, t: f64, k: &[i64]) -> Result<Complex64> {
        Self::check_time(t)?;
        self.check_index(k)?;
        self.gamma_hat_unchecked(t, k)
    }

    pub(crate) fn gamma_hat_unchecked(&self, t: f64, k: &[i64]) -> Result<Complex64> {
        let psi = self.levy_exponent(k);
        if !self.has_atom() {
            return Ok((t * psi).exp());
        }
        // pure jump: D̂ - β = e^{-λt}(e^{λtĥ} - 1); written with expm1 so
        // small λt does not cancel
        let lt = self.atom_rate() * t;
        let denom = -(-lt).exp_m1();
        if denom <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "beta_t = 1 at t = {t}: no continuous part"
            )));
        }
        let h = self.jump_hat(k);
        Ok((-lt).exp() * complex_exp_m1(lt * h) / denom)
    }

    /// `γ̂_{αt0}` via the rearranged power formula
    /// `((β + (1-β)γ̂)^α - β^α) / (1 - β^α)`.
    ///
    /// The power is taken on the branch continuous in time, whose argument
    /// is `t0 Im ψ(k)`; `branch_warning` reports that the principal branch
    /// would have given a different value.
    pub fn gamma_hat_scaled(&self, t0: f64, alpha: f64, k: &[i64]) -> Result<ScaledCoefficient> {
        Self::check_time(t0)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        self.check_index(k)?;
        let beta = self.beta_unchecked(t0);
        let g = self.gamma_hat_unchecked(t0, k)?;
        let base = beta + (1.0 - beta) * g;
        let principal = base.arg();
        let target = t0 * self.levy_exponent(k).im;
        let turns = ((target - principal) / TAU).round();
        let arg = principal + turns * TAU;
        let beta_a = beta.powf(alpha);
        let value = if base.norm() == 0.0 {
            Complex64::new(-beta_a / (1.0 - beta_a), 0.0)
        } else {
            let power = Complex64::from_polar(base.norm().powf(alpha), alpha * arg);
            (power - beta_a) / (1.0 - beta_a)
        };
        let principal_value = Complex64::from_polar(1.0, alpha * principal);
        let continuous_value = Complex64::from_polar(1.0, alpha * arg);
        Ok(ScaledCoefficient {
            value,
            base_arg: arg,
            branch_warning: (principal_value - continuous_value).norm() > 1e-12,
        })
    }

    /// `γ_t` as a finite mixture of unwrapped Gaussians, tail weight below
    /// `1e-16` discarded. Weights sum to one up to that truncation.
    pub fn gamma_mixture(&self, t: f64) -> Result<Vec<GaussianTerm>> {
        Self::check_time(t)?;
        let (base_mean, base_var) = match &self.brownian {
            Some(b) => (
                b.drift.iter().map(|v| v * t).collect::<Vec<_>>(),
                b.sigma2.iter().map(|s| s * t).collect::<Vec<_>>(),
            ),
            None => (vec![0.0; self.dim], vec![0.0; self.dim]),
        };
        let Some(jump) = &self.jump else {
            return Ok(vec![GaussianTerm {
                weight: 1.0,
                mean: base_mean,
                var: base_var,
            }]);
        };
        let lt = jump.rate * t;
        let beta = self.beta_unchecked(t);
        let norm = 1.0 - beta;
        if norm <= 0.0 {
            return Err(Error::InvalidArgument(format!("beta_t = 1 at t = {t}")));
        }
        let first = if self.has_atom() { 1 } else { 0 };
        let mut terms = Vec::new();
        let mut p = (-lt).exp();
        let mut n = 0usize;
        loop {
            if n >= first {
                for (coef, counts) in multisets(jump.mixture.len(), n) {
                    let mut w = p * coef;
                    let mut mean = base_mean.clone();
                    let mut var = base_var.clone();
                    for (c, &cnt) in jump.mixture.iter().zip(&counts) {
                        w *= c.weight.powi(cnt as i32);
                        for j in 0..self.dim {
                            mean[j] += cnt as f64 * c.mean[j];
                            var[j] += cnt as f64 * c.var[j];
                        }
                    }
                    if w > 0.0 {
                        terms.push(GaussianTerm {
                            weight: w / norm,
                            mean,
                            var,
                        });
                    }
                }
            }
            n += 1;
            p *= lt / n as f64;
            // past the mode the Poisson tail is bounded by a geometric series
            let ratio = lt / (n + 1) as f64;
            if ratio < 0.5 && p / (1.0 - ratio) < 1e-16 * norm {
                break;
            }
        }
        Ok(terms)
    }

    /// Oracle for `γ̂_t(k)`: trapezoid quadrature of the wrapped density,
    /// refined by doubling until two successive values agree to `tol`.
    pub fn quadrature_gamma_hat(&self, t: f64, k: &[i64], tol: f64) -> Result<Complex64> {
        if self.dim > 3 {
            return Err(Error::Unsupported(
                "quadrature oracle is limited to d <= 3".into(),
            ));
        }
        self.check_index(k)?;
        let terms = self.gamma_mixture(t)?;
        let tol = tol.max(1e-15);
        // each term has a diagonal covariance, so its integral factorises
        let mut total = Complex64::new(0.0, 0.0);
        for term in &terms {
            let mut prod = Complex64::new(term.weight, 0.0);
            for ((&mean, &var), &kj) in term.mean.iter().zip(&term.var).zip(k) {
                prod *= periodic_fourier_1d(mean, var, kj, tol)?;
            }
            total += prod;
        }
        Ok(total)
    }

    /// Density of `γ_t` at a wrapped point.
    pub fn gamma_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let terms = self.gamma_mixture(t)?;
        Ok(mixture_density(&terms, x))
    }

    /// Draw an increment `X_{s+t} - X_s`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> TorusPoint {
        let mut x = vec![0.0; self.dim];
        self.add_increment(t, rng, &mut x);
        crate::torus::wrap(&x).expect("finite increment")
    }

    /// Add an increment in place and wrap the result.
    pub fn add_increment<R: Rng + ?Sized>(&self, t: f64, rng: &mut R, x: &mut [f64]) {
        if let Some(b) = &self.brownian {
            for (j, xj) in x.iter_mut().enumerate() {
                let sd = (b.sigma2[j] * t).sqrt();
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                *xj += b.drift[j] * t + sd * n;
            }
        }
        if let Some(jump) = &self.jump {
            let lt = jump.rate * t;
            let count = if lt > 0.0 {
                Poisson::new(lt).map(|p| p.sample(rng) as u64).unwrap_or(0)
            } else {
                0
            };
            for _ in 0..count {
                let c = pick_component(&jump.mixture, rng.random::<f64>());
                for (j, xj) in x.iter_mut().enumerate() {
                    let normal =
                        Normal::new(c.mean[j], c.var[j].sqrt()).expect("positive variance");
                    *xj += normal.sample(rng);
                }
            }
        }
        for xj in x.iter_mut() {
            *xj = wrap_scalar(*xj);
        }
    }

    /// True when every `γ̂_t(k)` is real, i.e. the law is invariant under `x ↦ -x`.
    pub fn is_symmetric(&self) -> bool {
        let drift_free = self
            .brownian
            .as_ref()
            .is_none_or(|b| b.drift.iter().all(|v| *v == 0.0));
        let jumps_centred = self.jump.as_ref().is_none_or(|j| {
            j.mixture
                .iter()
                .all(|c| c.mean.iter().all(|m| wrap_scalar(*m) == 0.0))
        });
        drift_free && jumps_centred
    }

    /// Smallest decay rate `-Re ψ(k)` over nonzero `k` with `|k_i| <= 8`.
    pub fn slowest_decay_rate(&self) -> f64 {
        index_box(self.dim, 8)
            .into_iter()
            .filter(|k| k.iter().any(|&v| v != 0))
            .map(|k| -self.levy_exponent(&k).re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Default gap between Monte Carlo blocks: `2 / λ_min`.
    pub fn default_gap(&self) -> f64 {
        2.0 / self.slowest_decay_rate()
    }

    pub fn to_json(&self) -> StepLawJson {
        StepLawJson {
            dim: self.dim,
            brownian: self.brownian.as_ref().map(|b| BrownianJson {
                drift: b.drift.clone(),
                sigma2: b.sigma2.clone(),
            }),
            jump: self.jump.as_ref().map(|j| JumpJson {
                rate: j.rate,
                mixture: j
                    .mixture
                    .iter()
                    .map(|c| ComponentJson {
                        w: c.weight,
                        mean: ScalarOrVec::Vec(c.mean.clone()),
                        var: ScalarOrVec::Vec(c.var.clone()),
                    })
                    .collect(),
            }),
        }
    }

    pub fn from_json(json: &StepLawJson) -> Result<Self> {
        let dim = json.dim;
        let brownian = json.brownian.as_ref().map(|b| Brownian {
            drift: b.drift.clone(),
            sigma2: b.sigma2.clone(),
        });
        let jump = json.jump.as_ref().map(|j| Jump {
            rate: j.rate,
            mixture: j
                .mixture
                .iter()
                .map(|c| MixtureComponent {
                    weight: c.w,
                    mean: c.mean.expand(dim),
                    var: c.var.expand(dim),
                })
                .collect(),
        });
        Self::new(dim, brownian, jump)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: StepLawJson = serde_json::from_str(s)?;
        Self::from_json(&json)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("law json")
    }
}

/// Result of [`StepLaw::gamma_hat_scaled`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledCoefficient {
    pub value: Complex64,
    pub base_arg: f64,
    /// Set when `|arg(base)| >= π/2`, where the principal branch may
    /// disagree with the continuous-time coefficient.
    pub branch_warning: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepLawJson {
    pub dim: usize,
    #[serde(default)]
    pub brownian: Option<BrownianJson>,
    #[serde(default)]
    pub jump: Option<JumpJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BrownianJson {
    pub drift: Vec<f64>,
    pub sigma2: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct JumpJson {
    pub rate: f64,
    pub mixture: Vec<ComponentJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentJson {
    pub w: f64,
    pub mean: ScalarOrVec,
    pub var: ScalarOrVec,
}

/// A number applied to every coordinate, or one value per coordinate.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    fn expand(&self, dim: usize) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v; dim],
            ScalarOrVec::Vec(v) => v.clone(),
        }
    }
}

/// Which indices [`distinctness_report`] compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexDomain {
    /// Every `k` with `|k_i| <= K`.
    Full,
    /// `k >= 0` for `d = 1`, lexicographically non-negative `k` otherwise.
    Cone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessReport {
    pub t: f64,
    pub cutoff: usize,
    pub domain: IndexDomain,
    pub count: usize,
    pub min_distance: f64,
    pub min_modulus: f64,
    pub closest_pair: Option<(Vec<i64>, Vec<i64>)>,
    pub margin: f64,
    pub passed: bool,
}

/// Enumerate `γ̂_t(k)` on the chosen domain and check that the values are
/// pairwise at least `margin` apart and at least `margin` in modulus.
pub fn distinctness_report(
    law: &StepLaw,
    t: f64,
    cutoff: usize,
    margin: f64,
    domain: IndexDomain,
) -> Result<DistinctnessReport> {
    if cutoff == 0 {
        return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
    }
    let indices: Vec<Vec<i64>> = index_box(law.dim(), cutoff)
        .into_iter()
        .filter(|k| domain == IndexDomain::Full || lex_nonnegative(k))
        .collect();
    let values = indices
        .iter()
        .map(|k| law.gamma_hat(t, k))
        .collect::<Result<Vec<_>>>()?;
    let min_modulus = values
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    let mut min_distance = f64::INFINITY;
    let mut closest_pair = None;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[i] - values[j]).norm();
            if d < min_distance {
                min_distance = d;
                closest_pair = Some((indices[i].clone(), indices[j].clone()));
            }
        }
    }
    Ok(DistinctnessReport {
        t,
        cutoff,
        domain,
        count: values.len(),
        min_distance,
        min_modulus,
        closest_pair,
        margin,
        passed: min_distance >= margin && min_modulus >= margin,
    })
}

fn lex_nonnegative(k: &[i64]) -> bool {
    match k.iter().find(|&&v| v != 0) {
        None => true,
        Some(&v) => v > 0,
    }
}

/// All `k ∈ Z^dim` with `|k_i| <= cutoff`, in lexicographic order.
pub fn index_box(dim: usize, cutoff: usize) -> Vec<Vec<i64>> {
    let c = cutoff as i64;
    let mut out = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-c..=c).map(move |v| {
                    let mut k = prefix.clone();
                    k.push(v);
                    k
                })
            })
            .collect();
    }
    out
}

fn gaussian_hat(weight: f64, mean: &[f64], var: &[f64], k: &[i64]) -> Complex64 {
    let mut phase = 0.0;
    let mut decay = 0.0;
    for ((&kj, m), v) in k.iter().zip(mean).zip(var) {
        let kf = kj as f64;
        phase += kf * m;
        decay += 0.5 * v * kf * kf;
    }
    Complex64::from_polar(weight * (-decay).exp(), -phase)
}

/// `e^z - 1` without cancellation for small `|z|`.
fn complex_exp_m1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = z;
        let mut sum = z;
        for n in 2..40 {
            term *= z / n as f64;
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        z.exp() - 1.0
    }
}

fn pick_component(mixture: &[MixtureComponent], u: f64) -> &MixtureComponent {
    let mut acc = 0.0;
    for c in mixture {
        acc += c.weight;
        if u < acc {
            return c;
        }
    }
    mixture.last().expect("non-empty mixture")
}

/// Multisets of size `n` over `m` labels with their multinomial coefficients.
fn multisets(m: usize, n: usize) -> Vec<(f64, Vec<usize>)> {
    fn rec(m: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(m, left - c, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    rec(m, n, &mut Vec::new(), &mut all);
    all.into_iter()
        .map(|counts| {
            let mut coef = 1.0;
            let mut placed = 0usize;
            for &c in &counts {
                for i in 1..=c {
                    placed += 1;
                    coef *= placed as f64 / i as f64;
                }
            }
            (coef, counts)
        })
        .collect()
}

/// Wrapped Gaussian density `Σ_n φ(x + 2πn)` on the circle.
pub fn wrapped_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let centre = wrap_scalar(x - mean);
    let norm = 1.0 / (sd * TAU.sqrt());
    let term = |n: i64| {
        let y = centre + n as f64 * TAU;
        (norm * (-0.5 * y * y / var).exp(), y.abs())
    };
    let mut sum = term(0).0;
    // walk outwards in both directions until past the mode and negligible
    for dir in [1i64, -1] {
        let mut n = dir;
        loop {
            let (v, dist) = term(n);
            sum += v;
            if dist > sd && v <= 1e-17 * sum {
                break;
            }
            n += dir;
        }
    }
    sum
}

pub(crate) fn mixture_density(terms: &[GaussianTerm], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| {
            t.weight
                * x.iter()
                    .enumerate()
                    .map(|(j, &xj)| wrapped_normal_density(xj, t.mean[j], t.var[j]))
                    .product::<f64>()
        })
        .sum()
}

/// `∫_0^{2π} e^{-ikx} w(x) dx` for a wrapped normal `w`, periodic trapezoid
/// rule with doubling until converged.
fn periodic_fourier_1d(mean: f64, var: f64, k: i64, tol: f64) -> Result<Complex64> {
    let eval = |n: usize| -> Complex64 {
        let h = TAU / n as f64;
        (0..n)
            .map(|i| {
                let x = i as f64 * h;
                Complex64::from_polar(wrapped_normal_density(x, mean, var), -(k as f64) * x)
            })
            .sum::<Complex64>()
            * h
    };
    let mut n = 32usize;
    let mut prev = eval(n);
    while n < (1 << 22) {
        n *= 2;
        let cur = eval(n);
        if (cur - prev).norm() <= tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::InvalidArgument(format!(
        "quadrature did not converge for variance {var}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn jump_law() -> StepLaw {
        StepLaw::jump(
            1,
            1.0,
            vec![
                MixtureComponent {
                    weight: 0.7,
                    mean: vec![0.8],
                    var: vec![0.2],
                },
                MixtureComponent {
                    weight: 0.3,
                    mean: vec![-1.5],
                    var: vec![0.5],
                },
            ],
        )
        .unwrap()
    }

    fn mixed_law() -> StepLaw {
        StepLaw::new(
            1,
            Some(Brownian {
                drift: vec![0.4],
                sigma2: vec![0.3],
            }),
            Some(Jump {
                rate: 0.8,
                mixture: vec![MixtureComponent {
                    weight: 1.0,
                    mean: vec![1.0],
                    var: vec![0.1],
                }],
            }),
        )
        .unwrap()
    }

    #[test]
    fn beta_examples() {
        let law = StepLaw::jump(
            1,
            1.0,
            vec![MixtureComponent {
                weight: 1.0,
                mean: vec![0.5],
                var: vec![0.1],
            }],
        )
        .unwrap();
        assert!((law.beta(2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!((law.beta(1.0).unwrap().powi(2) - law.beta(2.0).unwrap()).abs() < 1e-15);
        assert_eq!(StepLaw::brownian_1d(0.0, 1.0).beta(3.0).unwrap(), 0.0);
        assert!(law.beta(0.0).is_err());
        assert!(law.beta(-1.0).is_err());
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(StepLaw::new(1, None, None).is_err());
        assert!(StepLaw::brownian(vec![0.0], vec![0.0]).is_err());
        assert!(StepLaw::jump(1, 0.0, vec![]).is_err());
        assert!(StepLaw::jump(
            1,
            1.0,
            vec![MixtureComponent {
                weight: 1.0,
                mean: vec![0.0, 1.0],
                var: vec![1.0],
            }]
        )
        .is_err());
    }

    #[test]
    fn d_hat_basics() {
        let law = StepLaw::brownian_1d(0.0, 1.0);
        assert_eq!(law.d_hat(1.3, &[0]).unwrap(), Complex64::new(1.0, 0.0));
        let vals: Vec<Complex64> = (0..5).map(|k| law.d_hat(0.7, &[k]).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[0].im == 0.0 && w[1].im == 0.0);
            assert!(w[1].re > 0.0 && w[1].re < w[0].re);
        }
        let j = mixed_law();
        for k in -4..=4 {
            let a = j.d_hat(1.2, &[k]).unwrap();
            let b = j.d_hat(0.6, &[k]).unwrap();
            assert!((a - b * b).norm() < 1e-15);
        }
        assert!(law.d_hat(0.0, &[1]).is_err());
    }

    #[test]
    fn drift_only_changes_phase() {
        let a = StepLaw::brownian_1d(2.0, 1.0);
        let b = StepLaw::brownian_1d(0.0, 1.0);
        for k in -4..=4 {
            let ga = a.gamma_hat(0.8, &[k]).unwrap();
            let gb = b.gamma_hat(0.8, &[k]).unwrap();
            assert!((ga.norm() - gb.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn brownian_decay_matches_quadrature() {
        let law = StepLaw::brownian_1d(0.0, 1.0);
        let closed = law.gamma_hat(1.0, &[1]).unwrap();
        let quad = law.quadrature_gamma_hat(1.0, &[1], 1e-13).unwrap();
        assert!((closed - quad).norm() < 1e-10);
        assert!((closed.re - (-0.5f64).exp()).abs() < 1e-15);
        // the e^{-2π²tk²} variant is far off
        assert!((quad.re - (-2.0 * std::f64::consts::PI.powi(2)).exp()).abs() > 0.5);
    }

    #[test]
    fn quadrature_limits() {
        let law = StepLaw::brownian_1d(0.0, 100.0);
        let z = law.quadrature_gamma_hat(1.0, &[0], 1e-12).unwrap();
        assert!((z - 1.0).norm() < 1e-12);
        let z = law.quadrature_gamma_hat(1.0, &[1], 1e-12).unwrap();
        assert!(z.norm() < 1e-8);
        let law4 = StepLaw::brownian(vec![0.0; 4], vec![1.0; 4]).unwrap();
        assert!(law4.quadrature_gamma_hat(1.0, &[0, 0, 0, 0], 1e-9).is_err());
    }

    #[test]
    fn quadrature_agrees_for_jump_and_mixed_laws() {
        for law in [jump_law(), mixed_law()] {
            for &t in &[0.1, 1.0, 3.0] {
                for k in -3..=3 {
                    let a = law.gamma_hat(t, &[k]).unwrap();
                    let b = law.quadrature_gamma_hat(t, &[k], 1e-13).unwrap();
                    assert!((a - b).norm() < 1e-9, "t={t} k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn quadrature_two_dimensional() {
        let law = StepLaw::brownian(vec![0.5, -1.0], vec![0.4, 1.1]).unwrap();
        for k in index_box(2, 2) {
            let a = law.gamma_hat(0.7, &k).unwrap();
            let b = law.quadrature_gamma_hat(0.7, &k, 1e-13).unwrap();
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn small_time_jump_law_looks_like_one_jump() {
        let law = jump_law();
        for k in 1..=3 {
            let g = law.quadrature_gamma_hat(1e-4, &[k], 1e-13).unwrap();
            let h = law.jump_hat(&[k]);
            assert!((g - h).norm() < 1e-3);
        }
    }

    #[test]
    fn scaled_coefficient_identities() {
        let law = jump_law();
        for k in -3..=3 {
            let s = law.gamma_hat_scaled(1.0, 1.0, &[k]).unwrap();
            assert!((s.value - law.gamma_hat(1.0, &[k]).unwrap()).norm() < 1e-14);
        }
        let s = law.gamma_hat_scaled(1.0, 1.7, &[2]).unwrap();
        assert!((s.value - law.gamma_hat(1.7, &[2]).unwrap()).norm() < 1e-12);
        let b = StepLaw::brownian_1d(0.3, 0.5);
        for k in -3..=3 {
            let s = b.gamma_hat_scaled(0.4, 2.0, &[k]).unwrap();
            let g = b.gamma_hat(0.4, &[k]).unwrap();
            assert!((s.value - g * g).norm() < 1e-14);
        }
    }

    #[test]
    fn branch_warning_flags_wrapped_arguments() {
        // t0·v·k = 4 rad lies past the principal branch
        let law = StepLaw::brownian_1d(4.0, 0.01);
        let s = law.gamma_hat_scaled(1.0, 1.5, &[1]).unwrap();
        assert!(s.branch_warning);
        assert!((s.base_arg + 4.0).abs() < 1e-12);
        assert!((s.value - law.gamma_hat(1.5, &[1]).unwrap()).norm() < 1e-12);
        let s = law.gamma_hat_scaled(0.1, 1.5, &[1]).unwrap();
        assert!(!s.branch_warning);
    }

    #[test]
    fn tiny_time_increment_concentrates() {
        let law = StepLaw::brownian_1d(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let near = (0..10_000)
            .filter(|_| {
                let x = law.sample_increment(1e-8, &mut rng).coords()[0];
                x.min(TAU - x) < 1e-3
            })
            .count();
        assert!(near as f64 / 10_000.0 > 0.99);
    }

    #[test]
    fn zero_jump_fraction_matches_atom() {
        let law = StepLaw::jump(
            1,
            0.01,
            vec![MixtureComponent {
                weight: 1.0,
                mean: vec![1.0],
                var: vec![0.1],
            }],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let zeros = (0..n)
            .filter(|_| law.sample_increment(1.0, &mut rng).coords()[0] == 0.0)
            .count();
        let p = (-0.01f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn empirical_characteristic_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for law in [StepLaw::brownian_1d(1.0, 0.5), jump_law(), mixed_law()] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| law.sample_increment(0.9, &mut rng).coords()[0])
                .collect();
            for k in -3i64..=3 {
                let mean: Complex64 = draws
                    .iter()
                    .map(|&x| Complex64::from_polar(1.0, -(k as f64) * x))
                    .sum::<Complex64>()
                    / n as f64;
                let expect = law.d_hat(0.9, &[k]).unwrap();
                // each of re/im has variance at most 1/n
                let se = (1.0 / n as f64).sqrt();
                assert!((mean - expect).norm() < 4.0 * se * 2f64.sqrt(), "k={k}");
            }
        }
    }

    #[test]
    fn distinctness_examples() {
        let sym = StepLaw::brownian_1d(0.0, 1.0);
        let full = distinctness_report(&sym, 1.0, 3, 1e-6, IndexDomain::Full).unwrap();
        assert!(!full.passed);
        let cone = distinctness_report(&sym, 1.0, 3, 1e-6, IndexDomain::Cone).unwrap();
        assert!(cone.passed);
        assert_eq!(cone.count, 4);

        let drift = StepLaw::brownian_1d(1.0, 1.0);
        let r = distinctness_report(&drift, 1.0, 3, 1e-6, IndexDomain::Full).unwrap();
        assert_eq!(r.count, 7);
        assert!(r.passed && r.min_distance > 1e-6);

        let dep = StepLaw::brownian(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let r = distinctness_report(&dep, 1.0, 1, 1e-9, IndexDomain::Full).unwrap();
        assert!(!r.passed);
        let a = dep.gamma_hat(1.0, &[1, 0]).unwrap();
        let b = dep.gamma_hat(1.0, &[0, 1]).unwrap();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn symmetric_detection() {
        assert!(StepLaw::brownian_1d(0.0, 1.0).is_symmetric());
        assert!(!StepLaw::brownian_1d(0.5, 1.0).is_symmetric());
        assert!(!jump_law().is_symmetric());
    }

    #[test]
    fn json_round_trip_and_scalar_fields() {
        let law = mixed_law();
        let back = StepLaw::from_json_str(&law.to_json_string()).unwrap();
        assert_eq!(law, back);
        let parsed = StepLaw::from_json_str(
            r#"{"dim":2,"brownian":null,"jump":{"rate":1.5,"mixture":[{"w":1,"mean":0.5,"var":0.2}]}}"#,
        )
        .unwrap();
        assert_eq!(parsed.jump_part().unwrap().mixture[0].mean, vec![0.5, 0.5]);
    }

    #[test]
    fn mixture_weights_sum_to_one() {
        for law in [jump_law(), mixed_law(), StepLaw::brownian_1d(0.0, 1.0)] {
            for &t in &[0.01, 0.5, 5.0] {
                let w: f64 = law.gamma_mixture(t).unwrap().iter().map(|g| g.weight).sum();
                assert!((w - 1.0).abs() < 1e-13, "t={t} w={w}");
            }
        }
    }

    #[test]
    fn wrapped_density_integrates_to_one() {
        let n = 4096;
        let h = TAU / n as f64;
        for &var in &[0.01, 1.0, 30.0] {
            let s: f64 = (0..n)
                .map(|i| wrapped_normal_density(i as f64 * h, 0.3, var))
                .sum();
            assert!((s * h - 1.0).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn semigroup(t in 0.01..3.0f64, s in 0.01..3.0f64, k in -6i64..6) {
                for law in [jump_law(), mixed_law(), StepLaw::brownian_1d(1.0, 0.7)] {
                    let lhs = law.d_hat(t + s, &[k]).unwrap();
                    let rhs = law.d_hat(t, &[k]).unwrap() * law.d_hat(s, &[k]).unwrap();
                    prop_assert!((lhs - rhs).norm() < 1e-12);
                }
            }

            #[test]
            fn scaling_consistency(t0 in 0.05..4.0f64, alpha in 0.5..2.0f64, k in -3i64..3) {
                for law in [jump_law(), StepLaw::brownian_1d(0.2, 0.6)] {
                    let s = law.gamma_hat_scaled(t0, alpha, &[k]).unwrap();
                    let g = law.gamma_hat(alpha * t0, &[k]).unwrap();
                    prop_assert!((s.value - g).norm() < 1e-10);
                }
            }

            #[test]
            fn gamma_hat_bounded(t in 0.01..5.0f64, k in -8i64..8) {
                for law in [jump_law(), mixed_law()] {
                    prop_assert!(law.gamma_hat(t, &[k]).unwrap().norm() <= 1.0 + 1e-12);
                }
            }
        }
    }
}
