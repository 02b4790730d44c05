//! Explicit covariance families with prescribed PFA behaviour.
//!
//! All four families share one spectrum: `k = m/2` eigenvalues `1 + ε_j`
//! above `k` eigenvalues `1 − ε_j`, with `0 < ε_1 < … < ε_k < 1`, so the
//! spectrum sums to `m`. They differ in the eigenvector matrix `T`:
//!
//! | family         | `T`                                   | regime at `k = m/2`              |
//! |----------------|---------------------------------------|----------------------------------|
//! | block-diagonal | `diag{Q_1, Q_2}`, random orthogonal   | `a_i = ∞` (i ≤ k), `a_i = 1`     |
//! | dense          | reflection `I − 2uuᵀ`, no zero entry   | `1 < a_i < ∞`                    |
//! | bounded-tail   | reflection with `u_m = u_0` small      | `a_m` bounded in `m`             |
//! | mixed          | reflection with zeros in `u`           | `a_1 → ∞`, `a_{k+1}` bounded     |
//!
//! The family matrices are `Σ = T·D·Tᵀ`; their diagonals are not one, so the
//! PFA layer works with standardized statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{
    block_diag_orthogonal, eigendecompose, householder_reflection, random_orthogonal,
    CovarianceMatrix, Matrix,
};
use crate::pfa::{self, PfaModel};
use crate::seed::derive_seed;
use crate::sum::compensated_sum;

/// `u_0` used by the bounded-tail family unless overridden.
pub const DEFAULT_U0: f64 = 1e-5;
/// `ε_k` pinned across a family sweep.
pub const DEFAULT_EPS0: f64 = 0.4;
/// `ũ_0` used by the mixed family unless overridden.
pub const DEFAULT_U_TILDE0: f64 = 0.1;

const BLOCK_RETRIES: u64 = 8;

/// How `ε_1 < … < ε_k` are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum EpsilonRule {
    /// `ε_j = 0.1 + 0.8·(j − 1)/k`.
    Default,
    /// Linear from `ε_0/4` to `ε_k = ε_0`; keeps `λ_m = 1 − ε_0` fixed in `m`.
    Pinned { eps0: f64 },
    /// Linear from `first` to `last`.
    Linear { first: f64, last: f64 },
    Explicit { values: Vec<f64> },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        Self::pinned()
    }
}

impl EpsilonRule {
    pub fn pinned() -> Self {
        EpsilonRule::Pinned { eps0: DEFAULT_EPS0 }
    }

    fn epsilons(&self, k: usize) -> Vec<f64> {
        let step = |j: usize| (j as f64) / ((k - 1).max(1) as f64);
        match self {
            EpsilonRule::Default => (0..k).map(|j| 0.1 + 0.8 * j as f64 / k as f64).collect(),
            EpsilonRule::Pinned { eps0 } => (0..k).map(|j| eps0 * (0.25 + 0.75 * step(j))).collect(),
            EpsilonRule::Linear { first, last } => {
                (0..k).map(|j| first + (last - first) * step(j)).collect()
            }
            EpsilonRule::Explicit { values } => values.clone(),
        }
    }
}

/// `m` even, `k = m/2` and the `ε` sequence defining the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSpectrumPlan {
    pub m: usize,
    pub k: usize,
    pub epsilons: Vec<f64>,
}

impl EigenSpectrumPlan {
    pub fn new(m: usize, epsilons: Vec<f64>) -> Result<Self> {
        if m < 4 || !m.is_multiple_of(2) {
            return Err(Error::invalid(format!("m must be even and at least 4, got {m}")));
        }
        let k = m / 2;
        if epsilons.len() != k {
            return Err(Error::invalid(format!(
                "expected {k} epsilons for m = {m}, got {}",
                epsilons.len()
            )));
        }
        if epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::invalid("epsilons must lie in (0, 1)"));
        }
        if epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("epsilons must be strictly increasing"));
        }
        Ok(Self { m, k, epsilons })
    }

    /// Descending: `1 + ε_k, …, 1 + ε_1, 1 − ε_1, …, 1 − ε_k`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let upper = self.epsilons.iter().rev().map(|e| 1.0 + e);
        let lower = self.epsilons.iter().map(|e| 1.0 - e);
        upper.chain(lower).collect()
    }

    /// `ε_k`, which fixes the smallest eigenvalue `λ_m = 1 − ε_k`.
    pub fn eps_last(&self) -> f64 {
        *self.epsilons.last().expect("plan has k ≥ 2")
    }
}

pub fn make_spectrum(m: usize, rule: &EpsilonRule) -> Result<EigenSpectrumPlan> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::invalid(format!("m must be even and at least 4, got {m}")));
    }
    EigenSpectrumPlan::new(m, rule.epsilons(m / 2))
}

/// Which constraint set a reflection vector must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum ReflectionProfile {
    /// `0 < min|u_i| < max|u_i| < 1`, `2u_i² ≠ 1`.
    Dense,
    /// Dense constraints and `u_m = u_0`.
    BoundedTail { u0: f64 },
    /// `u_{k+1} = ũ_0 ∈ (0, 1/8)`, `u_m = √2/2`, `u_i = 0` for
    /// `k+2 ≤ i ≤ m−1`, `u_i > 0` for `i ≤ k`.
    Mixed { u_tilde0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionPlan {
    pub u: Vec<f64>,
    pub profile: ReflectionProfile,
}

const UNIT_TOL: f64 = 1e-12;
const HALF_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl ReflectionPlan {
    pub fn new(u: Vec<f64>, profile: ReflectionProfile) -> Result<Self> {
        let plan = Self { u, profile };
        plan.validate()?;
        Ok(plan)
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.u.len();
        if m < 2 {
            return Err(Error::invalid("reflection vector needs m ≥ 2"));
        }
        let norm = self.u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("u must have unit norm, got {norm}")));
        }
        match self.profile {
            ReflectionProfile::Dense => validate_dense(&self.u),
            ReflectionProfile::BoundedTail { u0 } => {
                if !(u0 > 0.0 && u0 < 1.0) {
                    return Err(Error::invalid(format!("u_0 must lie in (0, 1), got {u0}")));
                }
                validate_dense(&self.u)?;
                if self.u[m - 1] != u0 {
                    return Err(Error::invalid("bounded-tail profile requires u_m = u_0"));
                }
                Ok(())
            }
            ReflectionProfile::Mixed { u_tilde0 } => {
                if m < 8 || !m.is_multiple_of(2) {
                    return Err(Error::invalid(format!(
                        "mixed profile needs even m ≥ 8, got {m}"
                    )));
                }
                if !(u_tilde0 > 0.0 && u_tilde0 < 0.125) {
                    return Err(Error::invalid(format!(
                        "ũ_0 must lie in (0, 1/8), got {u_tilde0}"
                    )));
                }
                let k = m / 2;
                let u = &self.u;
                if u[k] != u_tilde0 {
                    return Err(Error::invalid("mixed profile requires u_{k+1} = ũ_0"));
                }
                if (u[m - 1] - HALF_SQRT2).abs() > UNIT_TOL {
                    return Err(Error::invalid("mixed profile requires u_m = √2/2"));
                }
                if u[k + 1..m - 1].iter().any(|&x| x != 0.0) {
                    return Err(Error::invalid("mixed profile requires u_i = 0 for k+2 ≤ i ≤ m−1"));
                }
                if u[..k].iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::invalid("mixed profile requires u_i > 0 for i ≤ k"));
                }
                Ok(())
            }
        }
    }
}

fn validate_dense(u: &[f64]) -> Result<()> {
    let lo = u.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    let hi = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if !(lo > 0.0) {
        return Err(Error::invalid("dense profile requires every u_i ≠ 0"));
    }
    if !(lo < hi && hi < 1.0) {
        return Err(Error::invalid(
            "dense profile requires min|u_i| < max|u_i| < 1",
        ));
    }
    if let Some(i) = u.iter().position(|x| (2.0 * x * x - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::invalid(format!(
            "dense profile requires 2u_i² ≠ 1 (violated at i = {})",
            i + 1
        )));
    }
    Ok(())
}

fn normalize_into(weights: &[f64], mass: f64) -> Vec<f64> {
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    weights.iter().map(|w| w * mass.sqrt() / norm).collect()
}

/// `u_i ∝ 1 + i/m`: distinct, nonzero, well away from `±√2/2`.
pub fn dense_reflection(m: usize) -> Result<ReflectionPlan> {
    let weights: Vec<f64> = (1..=m).map(|i| 1.0 + i as f64 / m as f64).collect();
    ReflectionPlan::new(normalize_into(&weights, 1.0), ReflectionProfile::Dense)
}

/// Dense weights on `u_1..u_{m−1}`, `u_m = u_0`.
pub fn bounded_tail_reflection(m: usize, u0: f64) -> Result<ReflectionPlan> {
    if m < 2 {
        return Err(Error::invalid("reflection vector needs m ≥ 2"));
    }
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::invalid(format!("u_0 must lie in (0, 1), got {u0}")));
    }
    let weights: Vec<f64> = (1..m).map(|i| 1.0 + i as f64 / m as f64).collect();
    let mut u = normalize_into(&weights, 1.0 - u0 * u0);
    u.push(u0);
    ReflectionPlan::new(u, ReflectionProfile::BoundedTail { u0 })
}

/// `u_1 = m^{-1/2}`, `u_2 = … = u_k` equal and positive, `u_{k+1} = ũ_0`,
/// zeros up to `u_m = √2/2`.
pub fn mixed_reflection(m: usize, u_tilde0: f64) -> Result<ReflectionPlan> {
    mixed_reflection_with(m, u_tilde0, (m as f64).powf(-0.5))
}

pub fn mixed_reflection_with(m: usize, u_tilde0: f64, u1: f64) -> Result<ReflectionPlan> {
    if m < 8 || !m.is_multiple_of(2) {
        return Err(Error::invalid(format!("mixed profile needs even m ≥ 8, got {m}")));
    }
    if !(u_tilde0 > 0.0 && u_tilde0 < 0.125) {
        return Err(Error::invalid(format!(
            "ũ_0 must lie in (0, 1/8), got {u_tilde0}"
        )));
    }
    let k = m / 2;
    let rest = 0.5 - u_tilde0 * u_tilde0 - u1 * u1;
    if !(u1 > 0.0) || !(rest > 0.0) {
        return Err(Error::invalid(format!(
            "u_1 = {u1} leaves no mass for u_2..u_k"
        )));
    }
    let mid = (rest / (k - 1) as f64).sqrt();
    let mut u = vec![0.0; m];
    u[0] = u1;
    for x in &mut u[1..k] {
        *x = mid;
    }
    u[k] = u_tilde0;
    // √(1 − Σ_{i<m} u_i²) lands within an ulp of √2/2; store the exact constant
    u[m - 1] = HALF_SQRT2;
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::Construction(format!("mixed u has norm {norm}")));
    }
    ReflectionPlan::new(u, ReflectionProfile::Mixed { u_tilde0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    #[serde(alias = "block-diag")]
    BlockDiagonal,
    Dense,
    BoundedTail,
    Mixed,
    /// `(1 − r)I + r·11ᵀ`; a strongly dependent control, not a PFA family.
    Equicorrelated,
}

/// Family kind plus its free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    #[serde(default = "EpsilonRule::pinned")]
    pub epsilon: EpsilonRule,
    #[serde(default = "default_u0")]
    pub u0: f64,
    #[serde(default = "default_u_tilde0")]
    pub u_tilde0: f64,
    /// Common correlation of the equicorrelated control.
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_u0() -> f64 {
    DEFAULT_U0
}
fn default_u_tilde0() -> f64 {
    DEFAULT_U_TILDE0
}
fn default_rho() -> f64 {
    0.5
}

impl FamilySpec {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            epsilon: EpsilonRule::pinned(),
            u0: DEFAULT_U0,
            u_tilde0: DEFAULT_U_TILDE0,
            rho: default_rho(),
        }
    }

    pub fn build(&self, m: usize, seed: u64) -> Result<Construction> {
        if self.kind == FamilyKind::Equicorrelated {
            return build_equicorrelated(m, self.rho);
        }
        let plan = make_spectrum(m, &self.epsilon)?;
        match self.kind {
            FamilyKind::BlockDiagonal => build_block_diag_family(&plan, seed),
            FamilyKind::Dense => build_dense_family(&plan, &dense_reflection(m)?),
            FamilyKind::BoundedTail => {
                build_bounded_tail_family(&plan, &bounded_tail_reflection(m, self.u0)?)
            }
            FamilyKind::Mixed => build_mixed_family(&plan, &mixed_reflection(m, self.u_tilde0)?),
            FamilyKind::Equicorrelated => unreachable!(),
        }
    }
}

/// A generated matrix with the spectral data it was built from.
#[derive(Debug, Clone)]
pub struct Construction {
    pub kind: FamilyKind,
    pub m: usize,
    /// Factor count the family's claims refer to.
    pub k: usize,
    pub plan: Option<EigenSpectrumPlan>,
    pub reflection: Option<ReflectionPlan>,
    /// Planned eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Planned `T`; column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: Matrix,
    pub sigma: CovarianceMatrix,
}

impl Construction {
    fn from_plan(
        kind: FamilyKind,
        plan: &EigenSpectrumPlan,
        reflection: Option<ReflectionPlan>,
        t: Matrix,
    ) -> Result<Self> {
        let eigenvalues = plan.eigenvalues();
        let sigma = CovarianceMatrix::from_spectrum(&t, &eigenvalues)?;
        Ok(Self {
            kind,
            m: plan.m,
            k: plan.k,
            plan: Some(plan.clone()),
            reflection,
            eigenvalues,
            eigenvectors: t,
            sigma,
        })
    }

    /// `Σ_{j>k} λ_j T_ij²`, the residual variances of the unstandardized
    /// statistics computed from the planned factors.
    pub fn raw_residual_variances(&self, k: usize) -> Vec<f64> {
        residual_variances(&self.eigenvectors, &self.eigenvalues, k)
    }
}

/// `Σ_{j>k} λ_j T_ij²` for each row `i`.
pub fn residual_variances(t: &Matrix, eigenvalues: &[f64], k: usize) -> Vec<f64> {
    (0..t.rows())
        .map(|i| {
            let row = t.row(i);
            compensated_sum((k..eigenvalues.len()).map(|j| eigenvalues[j] * row[j] * row[j]))
        })
        .collect()
}

/// Block-diagonal `Σ = diag{Q_1, Q_2}·D·diag{Q_1, Q_2}ᵀ` with random blocks.
/// Draws that leave a diagonal block of `Σ` diagonal are redrawn.
pub fn build_block_diag_family(plan: &EigenSpectrumPlan, seed: u64) -> Result<Construction> {
    for attempt in 0..BLOCK_RETRIES {
        let q1 = random_orthogonal(plan.k, derive_seed(seed, &[1, plan.m as u64, attempt]))?;
        let q2 = random_orthogonal(plan.m - plan.k, derive_seed(seed, &[2, plan.m as u64, attempt]))?;
        match build_block_diag_from_blocks(plan, &q1, &q2) {
            Err(Error::Construction(_)) => continue,
            other => return other,
        }
    }
    Err(Error::Construction(format!(
        "no non-diagonal block pair after {BLOCK_RETRIES} draws"
    )))
}

/// As [`build_block_diag_family`] with caller-supplied blocks.
pub fn build_block_diag_from_blocks(
    plan: &EigenSpectrumPlan,
    q1: &Matrix,
    q2: &Matrix,
) -> Result<Construction> {
    if q1.rows() != plan.k || q2.rows() != plan.m - plan.k {
        return Err(Error::invalid("block sizes do not match the plan"));
    }
    let t = block_diag_orthogonal(q1, q2)?;
    let c = Construction::from_plan(FamilyKind::BlockDiagonal, plan, None, t)?;
    let k = plan.k;
    let s = c.sigma.entries();
    let coupled = |range: std::ops::Range<usize>| {
        range
            .clone()
            .any(|i| range.clone().any(|j| i != j && s[(i, j)].abs() > 1e-8))
    };
    if !coupled(0..k) || !coupled(k..plan.m) {
        return Err(Error::Construction(
            "a diagonal block of Σ is diagonal; blocks must mix coordinates".into(),
        ));
    }
    Ok(c)
}

fn require_matching(plan: &EigenSpectrumPlan, reflection: &ReflectionPlan) -> Result<()> {
    if reflection.m() != plan.m {
        return Err(Error::invalid(format!(
            "reflection has dimension {}, plan has {}",
            reflection.m(),
            plan.m
        )));
    }
    Ok(())
}

pub fn build_dense_family(plan: &EigenSpectrumPlan, reflection: &ReflectionPlan) -> Result<Construction> {
    require_matching(plan, reflection)?;
    if reflection.profile != ReflectionProfile::Dense {
        return Err(Error::invalid("dense family needs a dense reflection profile"));
    }
    let t = householder_reflection(&reflection.u)?;
    Construction::from_plan(FamilyKind::Dense, plan, Some(reflection.clone()), t)
}

pub fn build_bounded_tail_family(
    plan: &EigenSpectrumPlan,
    reflection: &ReflectionPlan,
) -> Result<Construction> {
    require_matching(plan, reflection)?;
    if !matches!(reflection.profile, ReflectionProfile::BoundedTail { .. }) {
        return Err(Error::invalid("bounded-tail family needs a bounded-tail reflection"));
    }
    let t = householder_reflection(&reflection.u)?;
    Construction::from_plan(FamilyKind::BoundedTail, plan, Some(reflection.clone()), t)
}

pub fn build_mixed_family(plan: &EigenSpectrumPlan, reflection: &ReflectionPlan) -> Result<Construction> {
    require_matching(plan, reflection)?;
    if !matches!(reflection.profile, ReflectionProfile::Mixed { .. }) {
        return Err(Error::invalid("mixed family needs a mixed reflection profile"));
    }
    let t = householder_reflection(&reflection.u)?;
    Construction::from_plan(FamilyKind::Mixed, plan, Some(reflection.clone()), t)
}

pub fn build_equicorrelated(m: usize, rho: f64) -> Result<Construction> {
    if m < 2 {
        return Err(Error::invalid("equicorrelated family needs m ≥ 2"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    let sigma = CovarianceMatrix::correlation(Matrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            rho
        }
    }))?;
    let spectrum = eigendecompose(&sigma)?;
    Ok(Construction {
        kind: FamilyKind::Equicorrelated,
        m,
        k: 0,
        plan: None,
        reflection: None,
        eigenvalues: spectrum.eigenvalues,
        eigenvectors: spectrum.eigenvectors,
        sigma,
    })
}

/// Closed form for the first residual variance of the mixed family,
/// `Σ_{j>k} λ_j T_1j² = u_1²·(4λ_{k+1}ũ_0² + 2λ_m)`.
pub fn mixed_sigma_first(eigenvalues: &[f64], u1: f64, u_tilde0: f64) -> f64 {
    let m = eigenvalues.len();
    let k = m / 2;
    u1 * u1 * (4.0 * eigenvalues[k] * u_tilde0 * u_tilde0 + 2.0 * eigenvalues[m - 1])
}

/// Alternative closed form for the first residual variance:
/// `4λ_{k+1}u_1²ũ_0² + λ_m u_1²/2`. Kept for comparison with
/// [`mixed_sigma_first`]; the two differ in the `λ_m` coefficient.
pub fn mixed_sigma_first_printed(eigenvalues: &[f64], u1: f64, u_tilde0: f64) -> f64 {
    let m = eigenvalues.len();
    let k = m / 2;
    4.0 * eigenvalues[k] * u1 * u1 * u_tilde0 * u_tilde0 + 0.5 * eigenvalues[m - 1] * u1 * u1
}

/// Closed form for the last residual variance of the mixed family,
/// `Σ_{j>k} λ_j T_mj² = 2λ_{k+1}ũ_0²` (the `j = m` term vanishes).
pub fn mixed_sigma_last(eigenvalues: &[f64], u_tilde0: f64) -> f64 {
    let k = eigenvalues.len() / 2;
    2.0 * eigenvalues[k] * u_tilde0 * u_tilde0
}

/// `((1 − 2u_0²)·√(1 − ε_0))^{-1}`.
pub fn bounded_tail_bound(u0: f64, eps0: f64) -> f64 {
    1.0 / ((1.0 - 2.0 * u0 * u0) * (1.0 - eps0).sqrt())
}

/// `(1 − ε_0)·[(1 − 2ũ_0²)² + 2ũ_0²]`.
pub fn mixed_after_half_lower_bound(u_tilde0: f64, eps0: f64) -> f64 {
    let u2 = u_tilde0 * u_tilde0;
    (1.0 - eps0) * ((1.0 - 2.0 * u2).powi(2) + 2.0 * u2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub kind: FamilyKind,
    pub m: usize,
    pub k: usize,
    pub theta_m: f64,
    pub sigma: Vec<f64>,
    /// `None` marks an infinite `a_i`.
    pub a: Vec<Option<f64>>,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Re-decomposes the family matrix and checks every property the family is
/// constructed to have. `delta` is the exponent for `ϑ_m ≤ m^{-δ}` (C = 1).
pub fn verify(c: &Construction, delta: f64) -> Result<(VerificationReport, PfaModel)> {
    let spectrum = eigendecompose(&c.sigma)?;
    let model = pfa::from_spectrum(&spectrum, c.k)?;
    let m = c.m;
    let k = c.k;
    let mut checks = Vec::new();

    let mut planned = c.eigenvalues.clone();
    planned.sort_by(|x, y| y.total_cmp(x));
    let recovery = planned
        .iter()
        .zip(&spectrum.eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "eigenvalues-recovered",
        recovery <= 1e-8,
        format!("max |λ_planned − λ_computed| = {recovery:.3e}"),
    ));
    let recon = spectrum.reconstruct().max_abs_diff(c.sigma.entries());
    checks.push(Check::new(
        "reconstruction",
        recon <= 1e-8,
        format!("‖T D Tᵀ − Σ‖_max = {recon:.3e}"),
    ));
    let theta_planned = pfa::theta(&planned, k)?;
    let theta_m = model.theta();
    checks.push(Check::new(
        "theta-consistent",
        (theta_planned - theta_m).abs() <= 1e-8,
        format!("ϑ planned {theta_planned:.12} vs decomposed {theta_m:.12}"),
    ));

    if c.kind != FamilyKind::Equicorrelated {
        let bound = (m as f64).powf(-delta);
        checks.push(Check::new(
            "theta-bound",
            theta_m <= bound,
            format!("ϑ_m = {theta_m:.6} vs m^-δ = {bound:.6} (δ = {delta})"),
        ));
    }

    match c.kind {
        FamilyKind::BlockDiagonal => {
            let t = &c.eigenvectors;
            let cross = (0..m)
                .flat_map(|i| (0..m).map(move |j| (i, j)))
                .filter(|&(i, j)| (i < k) != (j < k))
                .all(|(i, j)| t[(i, j)] == 0.0 && c.sigma.get(i, j) == 0.0);
            checks.push(Check::new(
                "block-structure",
                cross,
                "T and Σ vanish exactly off the diagonal blocks".into(),
            ));
            let worst_head = model.sigma[..k].iter().copied().fold(0.0, f64::max);
            checks.push(Check::new(
                "head-degenerate",
                worst_head <= 1e-12 && model.a[..k].iter().all(|a| a.is_infinite()),
                format!("max σ_i (i ≤ k) = {worst_head:.3e}"),
            ));
            let worst_tail = model.a[k..]
                .iter()
                .map(|a| a.finite().map_or(f64::INFINITY, |v| (v - 1.0).abs()))
                .fold(0.0, f64::max);
            checks.push(Check::new(
                "tail-unit-scale",
                worst_tail <= 1e-10,
                format!("max |a_i − 1| (i > k) = {worst_tail:.3e}"),
            ));
        }
        FamilyKind::Dense => {
            let min_t = c
                .eigenvectors
                .as_slice()
                .iter()
                .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
            checks.push(Check::new(
                "no-zero-loading",
                min_t > 1e-12,
                format!("min |T_ij| = {min_t:.3e}"),
            ));
            let tol = 1e-6;
            let (lo, hi) = min_max(&model.sigma);
            checks.push(Check::new(
                "finite-nontrivial-scale",
                lo > tol && hi < 1.0 - tol,
                format!("σ_i ∈ [{lo:.3e}, {hi:.6}]"),
            ));
        }
        FamilyKind::BoundedTail => {
            let u = c.reflection.as_ref().expect("reflection family").u[m - 1];
            let eps0 = c.plan.as_ref().expect("planned family").eps_last();
            let lambda_m = c.eigenvalues[m - 1];
            let raw = c.raw_residual_variances(k);
            let floor = lambda_m * (1.0 - 2.0 * u * u).powi(2);
            checks.push(Check::new(
                "last-variance-floor",
                raw[m - 1] >= floor,
                format!("Σ_j>k λ_j T_mj² = {:.12} vs λ_m(1 − 2u_0²)² = {floor:.12}", raw[m - 1]),
            ));
            let bound = bounded_tail_bound(u, eps0);
            let raw_a = raw[m - 1].powf(-0.5);
            let a_m = model.a[m - 1].finite();
            let ok = raw_a <= bound + 1e-6 && a_m.is_some_and(|a| a <= bound + 1e-6);
            checks.push(Check::new(
                "last-scale-bounded",
                ok,
                format!(
                    "a_m = {} (standardized), {raw_a:.9} (raw) vs bound {bound:.9}",
                    fmt_opt(a_m)
                ),
            ));
        }
        FamilyKind::Mixed => {
            let reflection = c.reflection.as_ref().expect("reflection family");
            let ReflectionProfile::Mixed { u_tilde0 } = reflection.profile else {
                unreachable!("mixed family carries a mixed profile")
            };
            let u1 = reflection.u[0];
            let eps0 = c.plan.as_ref().expect("planned family").eps_last();
            let raw = c.raw_residual_variances(k);
            let printed = mixed_sigma_first_printed(&c.eigenvalues, u1, u_tilde0);
            checks.push(Check::new(
                "first-variance-printed-form",
                (raw[0] - printed).abs() <= 1e-10,
                format!(
                    "σ_1 = {:.12} vs 4λ_(k+1)u_1²ũ_0² + λ_m u_1²/2 = {printed:.12}",
                    raw[0]
                ),
            ));
            let derived = mixed_sigma_first(&c.eigenvalues, u1, u_tilde0);
            checks.push(Check::new(
                "first-variance-derived-form",
                (raw[0] - derived).abs() <= 1e-10,
                format!(
                    "σ_1 = {:.12} vs u_1²(4λ_(k+1)ũ_0² + 2λ_m) = {derived:.12}",
                    raw[0]
                ),
            ));
            checks.push(Check::new(
                "last-degenerate",
                raw[m - 1] <= 1e-12,
                format!(
                    "σ_m = {:.12} (derived 2λ_(k+1)ũ_0² = {:.12})",
                    raw[m - 1],
                    mixed_sigma_last(&c.eigenvalues, u_tilde0)
                ),
            ));
            let floor = mixed_after_half_lower_bound(u_tilde0, eps0);
            checks.push(Check::new(
                "after-half-variance-floor",
                raw[k] >= floor - 1e-12,
                format!("σ_(k+1) = {:.12} vs {floor:.12}", raw[k]),
            ));
        }
        FamilyKind::Equicorrelated => {}
    }

    let report = VerificationReport {
        kind: c.kind,
        m,
        k,
        theta_m,
        sigma: model.sigma.clone(),
        a: model.a.iter().map(|a| a.finite()).collect(),
        checks,
    };
    Ok((report, model))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |x| format!("{x:.9}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plan8() -> EigenSpectrumPlan {
        EigenSpectrumPlan::new(8, vec![0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn spectrum_examples() {
        let l = plan8().eigenvalues();
        let expected = [1.4, 1.3, 1.2, 1.1, 0.9, 0.8, 0.7, 0.6];
        for (a, b) in l.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(l.iter().sum::<f64>(), 8.0, epsilon = 1e-12);

        let l = EigenSpectrumPlan::new(4, vec![0.2, 0.5]).unwrap().eigenvalues();
        for (a, b) in l.iter().zip([1.5, 1.2, 0.8, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn spectrum_pairs_sum_to_two() {
        for rule in [EpsilonRule::Default, EpsilonRule::pinned()] {
            for m in [4, 8, 64, 100] {
                let plan = make_spectrum(m, &rule).unwrap();
                let l = plan.eigenvalues();
                for j in 0..m / 2 {
                    assert_abs_diff_eq!(l[j] + l[m - 1 - j], 2.0, epsilon = 1e-15);
                }
                assert_abs_diff_eq!(l.iter().sum::<f64>(), m as f64, epsilon = 1e-12);
            }
        }
        let pinned8 = make_spectrum(8, &EpsilonRule::pinned()).unwrap();
        for (a, b) in pinned8.epsilons.iter().zip(&plan8().epsilons) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        let pinned = make_spectrum(64, &EpsilonRule::pinned()).unwrap();
        assert_abs_diff_eq!(pinned.eps_last(), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_rejects_bad_plans() {
        assert!(make_spectrum(7, &EpsilonRule::Default).is_err());
        assert!(make_spectrum(2, &EpsilonRule::Default).is_err());
        assert!(EigenSpectrumPlan::new(4, vec![0.3, 0.3]).is_err());
        assert!(EigenSpectrumPlan::new(4, vec![0.3, 1.0]).is_err());
        assert!(EigenSpectrumPlan::new(4, vec![0.3]).is_err());
    }

    #[test]
    fn block_diag_regimes_at_m8() {
        let c = build_block_diag_family(&plan8(), 42).unwrap();
        let (report, model) = verify(&c, 0.4).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
        assert!(model.sigma[..4].iter().all(|&s| s <= 1e-12));
        for a in &model.a[4..] {
            assert_abs_diff_eq!(a.finite().unwrap(), 1.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(report.theta_m, 0.18957, epsilon = 1e-5);
        assert!(report.theta_m <= 8f64.powf(-0.4));
        assert_abs_diff_eq!(8f64.powf(-0.4), 0.4353, epsilon = 1e-4);
    }

    #[test]
    fn identity_blocks_are_rejected() {
        let i4 = Matrix::identity(4);
        assert!(matches!(
            build_block_diag_from_blocks(&plan8(), &i4, &i4),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn dense_family_has_no_zero_loading() {
        let raw = [0.1, 0.3, 0.5, (1.0f64 - 0.35).sqrt()];
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = raw.iter().map(|x| x / n).collect();
        let r = ReflectionPlan::new(u.clone(), ReflectionProfile::Dense).unwrap();
        let plan = EigenSpectrumPlan::new(4, vec![0.2, 0.5]).unwrap();
        let c = build_dense_family(&plan, &r).unwrap();
        let t = &c.eigenvectors;
        for i in 0..4 {
            for j in 0..4 {
                let delta = if i == j { 1.0 } else { 0.0 };
                assert_eq!(t[(i, j)], delta - 2.0 * u[i] * u[j]);
                assert!(t[(i, j)].abs() > 1e-12);
            }
        }

        let mut bad = u.clone();
        bad[1] = 0.0;
        let n = bad.iter().map(|x| x * x).sum::<f64>().sqrt();
        bad.iter_mut().for_each(|x| *x /= n);
        assert!(ReflectionPlan::new(bad, ReflectionProfile::Dense).is_err());

        let c = build_dense_family(&plan8(), &dense_reflection(8).unwrap()).unwrap();
        let (report, _) = verify(&c, 0.4).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
    }

    #[test]
    fn bounded_tail_examples() {
        assert_abs_diff_eq!(bounded_tail_bound(1e-5, 0.4), 1.2910, epsilon = 1e-4);
        assert!(bounded_tail_reflection(8, HALF_SQRT2).is_err());
        let c = build_bounded_tail_family(&plan8(), &bounded_tail_reflection(8, 1e-5).unwrap()).unwrap();
        let (report, _) = verify(&c, 0.4).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
    }

    #[test]
    fn mixed_reflection_guards() {
        assert!(mixed_reflection(8, 0.2).is_err());
        assert!(mixed_reflection(6, 0.1).is_err());
        let r = mixed_reflection(8, 0.1).unwrap();
        assert_abs_diff_eq!(r.u[0], 8f64.powf(-0.5), epsilon = 1e-15);
        assert_eq!(&r.u[5..7], &[0.0, 0.0]);
    }

    #[test]
    fn mixed_closed_forms_match_numerics() {
        let plan = plan8();
        let c = build_mixed_family(&plan, &mixed_reflection(8, 0.1).unwrap()).unwrap();
        let raw = c.raw_residual_variances(4);
        let l = &c.eigenvalues;
        // u_1² = 1/8: 4·0.9·0.01/8 + 2·0.6/8
        assert_abs_diff_eq!(raw[0], 0.0045 + 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(raw[0], mixed_sigma_first(l, 8f64.powf(-0.5), 0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(
            mixed_sigma_first_printed(l, 8f64.powf(-0.5), 0.1),
            0.0420,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(raw[7], 2.0 * 0.9 * 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(raw[7], mixed_sigma_last(l, 0.1), epsilon = 1e-12);
        assert!(raw[4] >= mixed_after_half_lower_bound(0.1, 0.4));
    }

    #[test]
    fn equicorrelated_spectrum() {
        let c = build_equicorrelated(10, 0.5).unwrap();
        assert_abs_diff_eq!(c.eigenvalues[0], 1.0 + 9.0 * 0.5, epsilon = 1e-10);
        assert!(c.eigenvalues[1..].iter().all(|l| (l - 0.5).abs() < 1e-10));
    }

    #[test]
    fn family_spec_builds_every_kind() {
        for kind in [
            FamilyKind::BlockDiagonal,
            FamilyKind::Dense,
            FamilyKind::BoundedTail,
            FamilyKind::Mixed,
            FamilyKind::Equicorrelated,
        ] {
            let c = FamilySpec::new(kind).build(16, 7).unwrap();
            assert_eq!(c.m, 16);
            assert_eq!(c.kind, kind);
        }
    }
}
