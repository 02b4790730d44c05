//! Principal factor approximation.
//!
//! Given `Σ = T·D·Tᵀ` with descending eigenvalues, the first `k` spectral
//! components form the common factor `η` and the rest form the residual
//! `v`. Each statistic is standardized by its variance `s_i² = Σ_ii`, so the
//! quantities below are those of `Z_i / s_i`:
//!
//! ```text
//! ω_i = Σ_{j≤k} λ_j T_ij² / s_i²      σ_i = 1 − ω_i      a_i = σ_i^{-1/2}
//! ```
//!
//! For a correlation matrix `s_i = 1` and these reduce to the plain
//! definitions. Components with `σ_i ≤ 1e-12` are fully explained by the
//! factors and carry an infinite `a_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{eigendecompose, CovarianceMatrix, Matrix, SpectralDecomposition};
use crate::sum::{compensated_sum, NeumaierSum};

/// Residual variances at or below this are treated as exact degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Growth factor of `a_i` across a grid that marks an index as diverging.
pub const DEFAULT_GROWTH_RATIO: f64 = 4.0;

/// `a_i = σ_i^{-1/2}`, or the infinite sentinel for a degenerate component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ScaleFactor {
    Finite(f64),
    Infinite,
}

impl ScaleFactor {
    pub fn from_residual_variance(sigma: f64) -> Self {
        if sigma <= DEGENERACY_TOL {
            ScaleFactor::Infinite
        } else {
            ScaleFactor::Finite(sigma.powf(-0.5))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ScaleFactor::Finite(a) => Some(a),
            ScaleFactor::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ScaleFactor::Infinite)
    }
}

#[derive(Debug, Clone)]
pub struct PfaModel {
    pub m: usize,
    pub k: usize,
    /// Eigenvalues of `Σ`, descending.
    pub eigenvalues: Vec<f64>,
    /// `s_i`, the standard deviation of statistic `i`.
    pub scales: Vec<f64>,
    /// `m × k`, entry `√λ_j T_ij / s_i`.
    pub loadings: Matrix,
    /// `m × (m − k)`, entry `√λ_{k+j} T_{i,k+j} / s_i`; `v = tail · w_{>k}`.
    pub tail: Matrix,
    pub omega: Vec<f64>,
    pub sigma: Vec<f64>,
    pub a: Vec<ScaleFactor>,
    /// `cov(v_i, v_j)` in standardized units; diagonal equals `sigma`.
    pub resid_cov: Matrix,
    /// `ρ_ij`, zero whenever either index is degenerate.
    pub resid_corr: Matrix,
}

impl PfaModel {
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.a[i].is_infinite()
    }

    pub fn degenerate_count(&self) -> usize {
        self.a.iter().filter(|a| a.is_infinite()).count()
    }

    /// `ϑ_m` at this model's `k`.
    pub fn theta(&self) -> f64 {
        theta_unchecked(&self.eigenvalues, self.k)
    }

    /// Residual covariance in the units of the unstandardized statistics,
    /// `cov(v_i, v_j)` for `Σ` itself.
    #[inline]
    pub fn raw_resid_cov(&self, i: usize, j: usize) -> f64 {
        self.resid_cov[(i, j)] * self.scales[i] * self.scales[j]
    }

    /// `L·Lᵀ + A`, which reproduces the standardized `Σ`.
    pub fn reconstruct_standardized(&self) -> Matrix {
        let mut out = self.loadings.gram_rows();
        for i in 0..self.m {
            for j in 0..self.m {
                out[(i, j)] += self.resid_cov[(i, j)];
            }
        }
        out
    }

    /// `η = L·w̃_k`.
    pub fn factor_mean(&self, factors: &[f64]) -> Vec<f64> {
        assert_eq!(factors.len(), self.k, "factor draw has wrong length");
        self.loadings.mat_vec(factors)
    }

    /// `v = tail·w_{>k}`.
    pub fn residual(&self, tail_draw: &[f64]) -> Vec<f64> {
        assert_eq!(tail_draw.len(), self.m - self.k, "residual draw has wrong length");
        self.tail.mat_vec(tail_draw)
    }
}

fn check_descending(eigenvalues: &[f64]) -> Result<()> {
    for (i, w) in eigenvalues.windows(2).enumerate() {
        if w[0] + 1e-12 < w[1] {
            return Err(Error::invalid(format!(
                "eigenvalues must be sorted descending (λ_{} = {} < λ_{} = {})",
                i + 1,
                w[0],
                i + 2,
                w[1]
            )));
        }
    }
    Ok(())
}

fn theta_unchecked(eigenvalues: &[f64], k: usize) -> f64 {
    let m = eigenvalues.len() as f64;
    compensated_sum(eigenvalues[k..].iter().map(|l| l * l)).sqrt() / m
}

/// `ϑ_m = m^{-1} √(λ_{k+1}² + … + λ_m²)`.
pub fn theta(eigenvalues: &[f64], k: usize) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if k > eigenvalues.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds dimension {}",
            eigenvalues.len()
        )));
    }
    check_descending(eigenvalues)?;
    Ok(theta_unchecked(eigenvalues, k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSelection {
    pub k: usize,
    pub theta: f64,
    pub bound: f64,
    /// `ϑ_m` for every `k = 0..=m`.
    pub frontier: Vec<f64>,
}

/// Smallest `k` with `ϑ_m ≤ C·m^{-δ}`; `k = m` always qualifies.
pub fn select_k(eigenvalues: &[f64], c: f64, delta: f64) -> Result<KSelection> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    check_descending(eigenvalues)?;
    let m = eigenvalues.len();
    let bound = c * (m as f64).powf(-delta);
    let frontier: Vec<f64> = (0..=m).map(|k| theta_unchecked(eigenvalues, k)).collect();
    let k = frontier.iter().position(|&t| t <= bound).unwrap_or(m);
    Ok(KSelection {
        k,
        theta: frontier[k],
        bound,
        frontier,
    })
}

/// Eigendecomposes `sigma` and splits off the first `k` factors.
pub fn decompose(sigma: &CovarianceMatrix, k: usize) -> Result<PfaModel> {
    let spectrum = eigendecompose(sigma)?;
    from_spectrum(&spectrum, k)
}

/// PFA model from an existing spectral decomposition.
pub fn from_spectrum(spectrum: &SpectralDecomposition, k: usize) -> Result<PfaModel> {
    let m = spectrum.dim();
    if m == 0 {
        return Err(Error::invalid("empty spectrum"));
    }
    if k > m {
        return Err(Error::invalid(format!("k = {k} exceeds dimension {m}")));
    }
    check_descending(&spectrum.eigenvalues)?;
    let t = &spectrum.eigenvectors;
    let roots: Vec<f64> = spectrum.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();

    let scales: Vec<f64> = (0..m)
        .map(|i| {
            let row = t.row(i);
            compensated_sum((0..m).map(|j| spectrum.eigenvalues[j].max(0.0) * row[j] * row[j]))
                .sqrt()
        })
        .collect();
    if let Some(i) = scales.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::invalid(format!("statistic {i} has zero variance")));
    }

    let loadings = Matrix::from_fn(m, k, |i, j| roots[j] * t[(i, j)] / scales[i]);
    let tail = Matrix::from_fn(m, m - k, |i, j| roots[k + j] * t[(i, k + j)] / scales[i]);
    let mut resid_cov = tail.gram_rows();

    let sigma: Vec<f64> = (0..m).map(|i| resid_cov[(i, i)].clamp(0.0, 1.0)).collect();
    for (i, &s) in sigma.iter().enumerate() {
        resid_cov[(i, i)] = s;
    }
    let omega: Vec<f64> = sigma.iter().map(|s| 1.0 - s).collect();
    let a: Vec<ScaleFactor> = sigma
        .iter()
        .map(|&s| ScaleFactor::from_residual_variance(s))
        .collect();

    let inv_sd: Vec<Option<f64>> = a
        .iter()
        .zip(&sigma)
        .map(|(a, s)| (!a.is_infinite()).then(|| 1.0 / s.sqrt()))
        .collect();
    let mut resid_corr = Matrix::zeros(m, m);
    for i in 0..m {
        let Some(di) = inv_sd[i] else { continue };
        for j in 0..m {
            if let Some(dj) = inv_sd[j] {
                resid_corr[(i, j)] = if i == j {
                    1.0
                } else {
                    (resid_cov[(i, j)] * di * dj).clamp(-1.0, 1.0)
                };
            }
        }
    }

    Ok(PfaModel {
        m,
        k,
        eigenvalues: spectrum.eigenvalues.clone(),
        scales,
        loadings,
        tail,
        omega,
        sigma,
        a,
        resid_cov,
        resid_corr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SEpsilon {
    pub count: usize,
    /// At most [`S_EPSILON_REPORT_CAP`] pairs, 0-based, in row-major order.
    pub pairs: Vec<(usize, usize)>,
}

pub const S_EPSILON_REPORT_CAP: usize = 100;

/// `S_{ε,m} = {(i, j) : i < j, |ρ_ij| > 1 − ε}` over non-degenerate pairs.
pub fn s_epsilon(model: &PfaModel, eps: f64) -> Result<SEpsilon> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let cut = 1.0 - eps;
    let m = model.m;
    let per_row: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            if model.is_degenerate(i) {
                return Vec::new();
            }
            let row = model.resid_corr.row(i);
            ((i + 1)..m)
                .filter(|&j| !model.is_degenerate(j) && row[j].abs() > cut)
                .collect()
        })
        .collect();
    let count = per_row.iter().map(Vec::len).sum();
    let pairs = per_row
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
        .take(S_EPSILON_REPORT_CAP)
        .collect();
    Ok(SEpsilon { count, pairs })
}

/// `m^{-2} Σ_{i≤j} |q_ij|^β` over the residual covariance of `Σ`, diagonal
/// included.
pub fn weak_dependence_sum(model: &PfaModel, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 2], got {beta}")));
    }
    let m = model.m;
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = NeumaierSum::new();
            for j in i..m {
                let q = model.raw_resid_cov(i, j).abs();
                if q > 0.0 {
                    acc.add(q.powf(beta));
                }
            }
            acc.value()
        })
        .collect();
    Ok(compensated_sum(rows) / (m as f64 * m as f64))
}

/// Position of an index whose meaning is stable as `m` changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackedIndex {
    /// Index 1.
    First,
    /// Index `m/2 + 1`, the first residual-block index when `k = m/2`.
    AfterHalf,
    /// Index `m`.
    Last,
    /// A fixed 1-based index.
    Index(usize),
}

impl TrackedIndex {
    /// 0-based position at dimension `m`, if it exists.
    pub fn resolve(self, m: usize) -> Option<usize> {
        let idx = match self {
            TrackedIndex::First => 0,
            TrackedIndex::AfterHalf => m / 2,
            TrackedIndex::Last => m.checked_sub(1)?,
            TrackedIndex::Index(i) => i.checked_sub(1)?,
        };
        (idx < m).then_some(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `a_i` stays within the growth threshold across the grid.
    Bounded,
    /// Finite at every grid point but grows by at least the threshold.
    Diverging,
    /// `σ_i ≤ 1e-12` at some grid point.
    DegenerateAtFiniteM,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeLabel {
    pub index: TrackedIndex,
    pub regime: Regime,
    /// `(m, a_i)` along the grid; `None` marks an infinite value.
    pub trace: Vec<(usize, Option<f64>)>,
}

/// Empirical stand-in for the asymptotic index sets: labels each tracked
/// index from its `a` values along an increasing grid.
pub fn classify_regimes(
    grid: &[(usize, Vec<ScaleFactor>)],
    tracked: &[TrackedIndex],
    growth_ratio: f64,
) -> Vec<RegimeLabel> {
    tracked
        .iter()
        .map(|&index| {
            let trace: Vec<(usize, Option<f64>)> = grid
                .iter()
                .filter_map(|(m, a)| index.resolve(*m).map(|i| (*m, a[i].finite())))
                .collect();
            let regime = if trace.iter().any(|(_, a)| a.is_none()) {
                Regime::DegenerateAtFiniteM
            } else {
                match (trace.first(), trace.last()) {
                    (Some((_, Some(first))), Some((_, Some(last)))) if last / first >= growth_ratio => {
                        Regime::Diverging
                    }
                    _ => Regime::Bounded,
                }
            };
            RegimeLabel {
                index,
                regime,
                trace,
            }
        })
        .collect()
}

/// Builds a model per grid point and classifies the tracked indices.
pub fn classify_family<F>(
    grid: &[usize],
    tracked: &[TrackedIndex],
    growth_ratio: f64,
    mut model_at: F,
) -> Result<Vec<RegimeLabel>>
where
    F: FnMut(usize) -> Result<PfaModel>,
{
    let mut points = Vec::with_capacity(grid.len());
    for &m in grid {
        let model = model_at(m).map_err(|e| Error::AtDimension {
            m,
            source: Box::new(e),
        })?;
        points.push((m, model.a));
    }
    Ok(classify_regimes(&points, tracked, growth_ratio))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RatioCondition {
    NotApplicable {
        reason: String,
    },
    Estimate {
        /// `(m, log a_(m) / log a_(1))`.
        per_m: Vec<(usize, f64)>,
        /// Ratio at the largest grid point.
        q_estimate: f64,
        /// Max/min ratio across the grid is at most 2.
        stable: bool,
    },
}

/// Estimates `q` in `a_(m) ≍ a_(1)^q` from the finite `a` values of the
/// diverging-classified indices at each grid point.
pub fn ratio_condition(grid: &[(usize, Vec<f64>)]) -> Result<RatioCondition> {
    if grid.iter().all(|(_, a)| a.is_empty()) {
        return Ok(RatioCondition::NotApplicable {
            reason: "no diverging indices".into(),
        });
    }
    if grid.len() < 3 {
        return Err(Error::invalid("ratio condition needs at least 3 grid points"));
    }
    let mut per_m = Vec::with_capacity(grid.len());
    for (m, a) in grid {
        if a.len() < 2 {
            return Ok(RatioCondition::NotApplicable {
                reason: format!("fewer than 2 diverging indices at m = {m}"),
            });
        }
        let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo > 1.0) || !hi.is_finite() {
            return Ok(RatioCondition::NotApplicable {
                reason: format!("a_(1) = {lo} at m = {m} has no usable logarithm"),
            });
        }
        per_m.push((*m, hi.ln() / lo.ln()));
    }
    let lo = per_m.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = per_m.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let q_estimate = per_m.last().map(|p| p.1).unwrap_or(f64::NAN);
    Ok(RatioCondition::Estimate {
        per_m,
        q_estimate,
        stable: hi / lo <= 2.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub theta_m: f64,
    pub k_used: usize,
    pub delta: f64,
    pub c: f64,
    pub s_eps: f64,
    pub s_eps_count: usize,
    /// `m^{-2+δ}·|S_{ε,m}|`.
    pub s_eps_normalized: f64,
    pub ratio_q_estimate: Option<f64>,
    /// `(β, m^{-2} Σ_{i≤j} |q_ij|^β)`.
    pub weak_dep_sums: Vec<(f64, f64)>,
}

pub const DEFAULT_BETA_GRID: [f64; 3] = [0.5, 1.0, 2.0];

pub fn condition_report(
    model: &PfaModel,
    c: f64,
    delta: f64,
    s_eps: f64,
    betas: &[f64],
    ratio_q_estimate: Option<f64>,
) -> Result<ConditionReport> {
    let s = s_epsilon(model, s_eps)?;
    let weak_dep_sums = betas
        .iter()
        .map(|&b| weak_dependence_sum(model, b).map(|v| (b, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport {
        theta_m: model.theta(),
        k_used: model.k,
        delta,
        c,
        s_eps,
        s_eps_count: s.count,
        s_eps_normalized: (model.m as f64).powf(-2.0 + delta) * s.count as f64,
        ratio_q_estimate,
        weak_dep_sums,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn corr(rows: &[Vec<f64>]) -> CovarianceMatrix {
        CovarianceMatrix::correlation(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    const SAMPLE_SPECTRUM: [f64; 8] = [1.4, 1.3, 1.2, 1.1, 0.9, 0.8, 0.7, 0.6];

    #[test]
    fn theta_examples() {
        let t = theta(&SAMPLE_SPECTRUM, 4).unwrap();
        assert_abs_diff_eq!(t, (0.81f64 + 0.64 + 0.49 + 0.36).sqrt() / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t, 0.18957, epsilon = 1e-5);
        assert_eq!(theta(&SAMPLE_SPECTRUM, 8).unwrap(), 0.0);
        assert_abs_diff_eq!(theta(&[1.0; 100], 0).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn theta_rejects_bad_input() {
        assert!(theta(&[0.5, 1.5], 0).is_err());
        assert!(theta(&SAMPLE_SPECTRUM, 9).is_err());
    }

    /// Linear-scan oracle independent of the frontier computation.
    fn min_k_oracle(l: &[f64], c: f64, delta: f64) -> usize {
        let m = l.len() as f64;
        (0..=l.len())
            .find(|&k| {
                let ss: f64 = l[k..].iter().map(|x| x * x).sum();
                ss.sqrt() / m <= c * m.powf(-delta)
            })
            .unwrap()
    }

    #[test]
    fn select_k_examples() {
        let sel = select_k(&SAMPLE_SPECTRUM, 1.0, 0.4).unwrap();
        assert_eq!(sel.k, min_k_oracle(&SAMPLE_SPECTRUM, 1.0, 0.4));
        assert!(sel.k <= 4);
        assert!(sel.theta <= 8f64.powf(-0.4));

        // √(100 − k)/100 ≤ 100^{-0.6} ⟺ 100 − k ≤ 39.8
        let ones = [1.0; 100];
        let sel = select_k(&ones, 1.0, 0.6).unwrap();
        assert_eq!(sel.k, 61);
        assert_eq!(sel.k, min_k_oracle(&ones, 1.0, 0.6));

        assert_eq!(select_k(&SAMPLE_SPECTRUM, 1e6, 0.4).unwrap().k, 0);
        assert!(select_k(&SAMPLE_SPECTRUM, 1.0, 0.0).is_err());
        assert!(select_k(&SAMPLE_SPECTRUM, 0.0, 0.4).is_err());
    }

    #[test]
    fn decompose_extremes() {
        let sigma = corr(&[
            vec![1.0, 0.3, 0.1],
            vec![0.3, 1.0, -0.2],
            vec![0.1, -0.2, 1.0],
        ]);
        let zero = decompose(&sigma, 0).unwrap();
        assert!(zero.omega.iter().all(|&w| w.abs() < 1e-12));
        assert!(zero.a.iter().all(|a| (a.finite().unwrap() - 1.0).abs() < 1e-10));
        assert!(zero.resid_cov.max_abs_diff(sigma.entries()) < 1e-10);

        let full = decompose(&sigma, 3).unwrap();
        assert!(full.a.iter().all(|a| a.is_infinite()));
        assert!(full.resid_cov.as_slice().iter().all(|&q| q == 0.0));
        assert!(full.resid_corr.as_slice().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn decompose_invariants() {
        let sigma = corr(&[
            vec![1.0, 0.6, 0.5, 0.1],
            vec![0.6, 1.0, 0.4, 0.2],
            vec![0.5, 0.4, 1.0, 0.3],
            vec![0.1, 0.2, 0.3, 1.0],
        ]);
        for k in 0..=4 {
            let model = decompose(&sigma, k).unwrap();
            assert!(model.reconstruct_standardized().max_abs_diff(sigma.entries()) < 1e-8);
            for i in 0..4 {
                assert!((0.0..=1.0 + 1e-10).contains(&model.omega[i]));
                assert_abs_diff_eq!(model.resid_cov[(i, i)], model.sigma[i], epsilon = 1e-10);
                for j in 0..4 {
                    assert!(model.resid_corr[(i, j)].abs() <= 1.0 + 1e-10);
                }
            }
            assert!(weak_dependence_sum(&model, 1.0).unwrap() <= model.theta() + 1e-10);
        }
    }

    #[test]
    fn unequal_variances_are_standardized() {
        let cov = CovarianceMatrix::new(
            Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let model = decompose(&cov, 0).unwrap();
        assert_abs_diff_eq!(model.scales[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.resid_corr[(0, 1)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(model.raw_resid_cov(0, 1), 1.0, epsilon = 1e-12);
        assert!(model.a.iter().all(|a| (a.finite().unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn s_epsilon_examples() {
        let diag = decompose(&CovarianceMatrix::identity(5), 0).unwrap();
        assert_eq!(s_epsilon(&diag, 0.1).unwrap().count, 0);

        let pair = decompose(&corr(&[vec![1.0, 0.95], vec![0.95, 1.0]]), 0).unwrap();
        let s = s_epsilon(&pair, 0.1).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.pairs, vec![(0, 1)]);
        assert!(s_epsilon(&pair, 0.0).is_err());
        assert!(s_epsilon(&pair, 1.0).is_err());
    }

    #[test]
    fn weak_dependence_examples() {
        let sigma = corr(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let full = decompose(&sigma, 2).unwrap();
        assert_eq!(weak_dependence_sum(&full, 1.0).unwrap(), 0.0);
        let none = decompose(&sigma, 0).unwrap();
        // (1 + 0.5 + 1) / 4
        assert_abs_diff_eq!(weak_dependence_sum(&none, 1.0).unwrap(), 0.625, epsilon = 1e-12);
        assert!(weak_dependence_sum(&none, 0.0).is_err());
        assert!(weak_dependence_sum(&none, 2.5).is_err());
    }

    #[test]
    fn ratio_condition_examples() {
        let equal: Vec<(usize, Vec<f64>)> =
            [8, 16, 32].iter().map(|&m| (m, vec![3.0, 3.0, 3.0])).collect();
        match ratio_condition(&equal).unwrap() {
            RatioCondition::Estimate { q_estimate, stable, .. } => {
                assert_abs_diff_eq!(q_estimate, 1.0, epsilon = 1e-15);
                assert!(stable);
            }
            other => panic!("unexpected {other:?}"),
        }

        let grid: Vec<(usize, Vec<f64>)> = [1usize << 6, 1 << 10, 1 << 14, 1 << 20]
            .iter()
            .map(|&m| (m, vec![(m as f64).sqrt(), 1.5 * (m as f64).sqrt(), m as f64]))
            .collect();
        match ratio_condition(&grid).unwrap() {
            RatioCondition::Estimate { q_estimate, per_m, .. } => {
                assert_abs_diff_eq!(q_estimate, 2.0, epsilon = 1e-12);
                assert!(per_m.iter().all(|(_, r)| (r - 2.0).abs() < 1e-12));
            }
            other => panic!("unexpected {other:?}"),
        }

        let empty: Vec<(usize, Vec<f64>)> = [8, 16, 32].iter().map(|&m| (m, vec![])).collect();
        assert!(matches!(
            ratio_condition(&empty).unwrap(),
            RatioCondition::NotApplicable { .. }
        ));
    }

    #[test]
    fn classify_synthetic_traces() {
        let grid: Vec<(usize, Vec<ScaleFactor>)> = [8usize, 32, 128]
            .iter()
            .map(|&m| {
                let mut a = vec![ScaleFactor::Finite(1.2); m];
                a[0] = ScaleFactor::Finite((m as f64).sqrt());
                a[m - 1] = ScaleFactor::Infinite;
                (m, a)
            })
            .collect();
        let labels = classify_regimes(
            &grid,
            &[TrackedIndex::First, TrackedIndex::AfterHalf, TrackedIndex::Last],
            DEFAULT_GROWTH_RATIO,
        );
        let regimes: Vec<Regime> = labels.iter().map(|l| l.regime).collect();
        assert_eq!(
            regimes,
            vec![Regime::Diverging, Regime::Bounded, Regime::DegenerateAtFiniteM]
        );
    }

    #[test]
    fn tracked_index_resolution() {
        assert_eq!(TrackedIndex::AfterHalf.resolve(8), Some(4));
        assert_eq!(TrackedIndex::Last.resolve(8), Some(7));
        assert_eq!(TrackedIndex::Index(9).resolve(8), None);
        assert_eq!(TrackedIndex::Index(0).resolve(8), None);
    }
}
