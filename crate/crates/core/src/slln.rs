//! Dimension sweeps of the conditional rejection proportion.
//!
//! For each `m` on the grid a family matrix is built and decomposed, one
//! factor draw `w̃_k` fixes the conditional experiment, and the residual is
//! resampled to measure `R̃(t) = m^{-1}·#{i : p_i ≤ t}` around its exact
//! conditional mean. The exact conditional variance comes from pairwise
//! indicator covariances.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::FamilySpec;
use crate::error::{Error, Result};
use crate::gaussian::{pair_covariance, std_normal_cdf, CovarianceMethod, ThresholdProfile};
use crate::matlin::eigendecompose;
use crate::pfa::{
    self, classify_regimes, condition_report, ratio_condition, ConditionReport, PfaModel,
    RatioCondition, Regime, RegimeLabel, TrackedIndex, DEFAULT_BETA_GRID, DEFAULT_GROWTH_RATIO,
};
use crate::seed::{derive_seed, rng_for, LabRng};
use crate::sum::{compensated_sum, NeumaierSum};

pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;
/// Exponent margin below `−1` required by [`lyons_check`].
pub const LYONS_MARGIN: f64 = 0.05;

const STREAM_FAMILY: u64 = 1;
const STREAM_FACTORS: u64 = 2;
const STREAM_REPLICATION: u64 = 3;

/// Nonzero means of a common magnitude on an evenly spread index subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MuRule {
    #[serde(default)]
    pub fraction: f64,
    #[serde(default)]
    pub magnitude: f64,
}

impl MuRule {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn vector(&self, m: usize) -> Vec<f64> {
        let mut mu = vec![0.0; m];
        let count = (self.fraction * m as f64).round() as usize;
        for l in 0..count.min(m) {
            mu[l * m / count] = self.magnitude;
        }
        mu
    }
}

/// How many principal factors to keep at each `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KPolicy {
    /// Smallest `k` with `ϑ_m ≤ C·m^{-δ}`.
    #[default]
    Minimal,
    /// `k = m/2`, the split the explicit families are built around.
    Half,
    Fixed(usize),
}

impl KPolicy {
    pub fn choose(&self, eigenvalues: &[f64], c: f64, delta: f64) -> Result<usize> {
        let m = eigenvalues.len();
        match *self {
            KPolicy::Minimal => Ok(pfa::select_k(eigenvalues, c, delta)?.k),
            KPolicy::Half => Ok(m / 2),
            KPolicy::Fixed(k) if k <= m => Ok(k),
            KPolicy::Fixed(k) => Err(Error::invalid(format!("fixed k = {k} exceeds m = {m}"))),
        }
    }
}

fn default_c() -> f64 {
    1.0
}
fn default_replications() -> usize {
    200
}
fn default_pair_budget() -> usize {
    DEFAULT_PAIR_BUDGET
}
fn default_eps() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub m_grid: Vec<usize>,
    pub t: f64,
    #[serde(default)]
    pub mu: MuRule,
    #[serde(default = "default_c")]
    pub c: f64,
    pub delta: f64,
    #[serde(default)]
    pub k_policy: KPolicy,
    #[serde(default = "default_eps")]
    pub eps_g: f64,
    #[serde(default = "default_eps")]
    pub eps_s: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pair_budget")]
    pub pair_budget: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() {
            return Err(Error::invalid("m_grid must not be empty"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("m_grid must be strictly increasing"));
        }
        if self.m_grid[0] < 2 {
            return Err(Error::invalid("every grid dimension must be at least 2"));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::invalid(format!("t must lie in (0, 1), got {}", self.t)));
        }
        if !(self.c > 0.0) || !(self.delta > 0.0) {
            return Err(Error::invalid("C and δ must be positive"));
        }
        if !(self.eps_g > 0.0) {
            return Err(Error::invalid("eps_g must be positive"));
        }
        if !(self.eps_s > 0.0 && self.eps_s < 1.0) {
            return Err(Error::invalid("eps_s must lie in (0, 1)"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mu.fraction) || !self.mu.magnitude.is_finite() {
            return Err(Error::invalid("mu.fraction must lie in [0, 1] with a finite magnitude"));
        }
        Ok(())
    }
}

/// One realization `z = μ + η + v` together with its factor part.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDraw {
    pub z: Vec<f64>,
    /// `w̃_k`.
    pub factors: Vec<f64>,
    /// `η = L·w̃_k`.
    pub eta: Vec<f64>,
}

fn normals(rng: &mut LabRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws the standardized statistics of `model` with mean `mu`.
pub fn sample_z(model: &PfaModel, mu: &[f64], rng: &mut LabRng) -> Result<ZDraw> {
    check_len(mu, model.m)?;
    let factors = normals(rng, model.k);
    let eta = model.factor_mean(&factors);
    let z = resample_z(model, mu, &eta, rng)?;
    Ok(ZDraw { z, factors, eta })
}

/// Draws a fresh residual and returns `μ + η + v` for a fixed `η`.
pub fn resample_z(model: &PfaModel, mu: &[f64], eta: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
    check_len(mu, model.m)?;
    check_len(eta, model.m)?;
    let v = model.residual(&normals(rng, model.m - model.k));
    Ok((0..model.m).map(|i| mu[i] + eta[i] + v[i]).collect())
}

fn check_len(v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::invalid(format!("vector has length {}, expected {m}", v.len())));
    }
    Ok(())
}

/// `#{i : 2Φ(−|z_i|) ≤ t}`.
pub fn rejection_count(z: &[f64], t: f64) -> usize {
    z.iter().filter(|x| 2.0 * std_normal_cdf(-x.abs()) <= t).count()
}

/// `E[R̃(t) | w̃_k] = m^{-1} Σ P(p_i ≤ t | w̃_k)`.
pub fn conditional_mean(profile: &ThresholdProfile) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    compensated_sum(profile.marginal.iter().copied()) / profile.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactVariance {
    /// `V[R̃(t) | w̃_k]`.
    pub value: f64,
    /// `Σ p_i(1 − p_i)`.
    pub indicator_variance_sum: f64,
    /// `Σ_{i<j} cov(X_i, X_j)`.
    pub covariance_sum: f64,
    /// Pairs of non-degenerate indices, each needing a quadrature.
    pub pairs_evaluated: usize,
    /// Pairs with `|ρ|` beyond the kernel cutoff, entered at their
    /// `|ρ| = 1` limit.
    pub near_unit_pairs: usize,
    /// `V_m` with every near-unit pair entered at its Cauchy–Schwarz bound
    /// instead; an upper bound on `value`.
    pub near_unit_bounded_value: f64,
}

/// Exact conditional variance of `R̃(t)`. Pairs are summed per row in
/// parallel and the row totals in index order, so the result does not
/// depend on the worker count.
pub fn conditional_variance_exact(
    model: &PfaModel,
    profile: &ThresholdProfile,
    pair_budget: usize,
) -> Result<ExactVariance> {
    let m = model.m;
    if profile.len() != m {
        return Err(Error::invalid("profile and model dimensions differ"));
    }
    let active: Vec<usize> = (0..m).filter(|&i| !profile.is_degenerate(i)).collect();
    let n = active.len();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs > pair_budget {
        return Err(Error::BudgetExceeded {
            needed: pairs,
            limit: pair_budget,
        });
    }
    let rows: Vec<(f64, usize, f64)> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut acc = NeumaierSum::new();
            let mut gap = NeumaierSum::new();
            let mut near_unit = 0;
            for b in a + 1..n {
                let pc = pair_covariance(model, profile, active[a], active[b])?;
                if pc.method == CovarianceMethod::NearUnitLimit {
                    near_unit += 1;
                    gap.add(pc.cauchy_schwarz_bound - pc.cov);
                }
                acc.add(pc.cov);
            }
            Ok((acc.value(), near_unit, gap.value()))
        })
        .collect::<Result<_>>()?;

    let covariance_sum = compensated_sum(rows.iter().map(|r| r.0));
    let near_unit_pairs = rows.iter().map(|r| r.1).sum();
    let bound_gap = compensated_sum(rows.iter().map(|r| r.2));
    let indicator_variance_sum = compensated_sum((0..m).map(|i| profile.indicator_variance(i)));
    let scale = (m * m) as f64;
    let value = ((indicator_variance_sum + 2.0 * covariance_sum) / scale).max(0.0);
    Ok(ExactVariance {
        value,
        indicator_variance_sum,
        covariance_sum,
        pairs_evaluated: pairs,
        near_unit_pairs,
        near_unit_bounded_value: value + 2.0 * bound_gap / scale,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GEvent {
    pub hit: bool,
    /// 0-based indices within `eps_g` of an acceptance boundary.
    pub offending: Vec<usize>,
}

/// Flags tracked indices whose conditional mean lies within `eps_g` of
/// `±z_{t/2}`.
pub fn g_event_check(profile: &ThresholdProfile, eps_g: f64, tracked: &[usize]) -> Result<GEvent> {
    if !(eps_g > 0.0) {
        return Err(Error::invalid("eps_g must be positive"));
    }
    let mut offending: Vec<usize> = tracked
        .iter()
        .copied()
        .filter(|&i| i < profile.len() && profile.r1[i].abs().min(profile.r2[i].abs()) < eps_g)
        .collect();
    offending.sort_unstable();
    offending.dedup();
    Ok(GEvent {
        hit: !offending.is_empty(),
        offending,
    })
}

/// Empirical quantiles by linear interpolation on the sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl DeviationSummary {
    fn from_sample(mut d: Vec<f64>) -> Self {
        d.sort_by(f64::total_cmp);
        Self {
            q05: quantile(&d, 0.05),
            q25: quantile(&d, 0.25),
            median: quantile(&d, 0.5),
            q75: quantile(&d, 0.75),
            q95: quantile(&d, 0.95),
            max: *d.last().expect("at least one replication"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub m: usize,
    pub k: usize,
    pub theta: f64,
    /// `C·m^{-δ}`.
    pub theta_bound: f64,
    pub degenerate_count: usize,
    pub conditional_mean: f64,
    pub variance: ExactVariance,
    /// `V_m ≤ 4m^{-1} + 2m^{-2}|Σ_{i<j} cov| + 1e-9`.
    pub variance_bound_holds: bool,
    pub mc_mean: f64,
    /// Sample variance of `R̃(t)`; absent with a single replication.
    pub mc_variance: Option<f64>,
    pub deviation: DeviationSummary,
    pub g_event: GEvent,
    /// Non-degenerate indices of any regime within `eps_g` of a boundary.
    pub boundary_near_misses: usize,
    pub conditions: ConditionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    /// Fewer than two usable points.
    Undefined,
    /// Exactly two points.
    LowConfidence,
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub status: FitStatus,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Grid dimensions entering the fit.
    pub used: Vec<usize>,
}

/// Least-squares fit of `ln y` against `ln m` over points with `y > 0`.
pub fn fit_log_log(points: &[(usize, f64)]) -> SlopeFit {
    let usable: Vec<(usize, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    let used = usable.iter().map(|p| p.0).collect();
    if usable.len() < 2 {
        return SlopeFit {
            status: FitStatus::Undefined,
            slope: None,
            intercept: None,
            used,
        };
    }
    let n = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    SlopeFit {
        status: if usable.len() == 2 {
            FitStatus::LowConfidence
        } else {
            FitStatus::Fitted
        },
        slope: Some(slope),
        intercept: Some(my - slope * mx),
        used,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyonsReport {
    /// `(m, Σ_{m' ≤ m} m'^{-1} V_{m'})` along the grid.
    pub partial_sums: Vec<(usize, f64)>,
    pub increments: Vec<f64>,
    /// Fitted exponent of `m^{-1} V_m`.
    pub exponent: Option<f64>,
    /// `exponent < −1 − LYONS_MARGIN`; absent with fewer than 3 points.
    pub converges: Option<bool>,
}

/// Partial sums of `m^{-1} V_m` with a tail-decay verdict.
pub fn lyons_check(curve: &[(usize, f64)]) -> LyonsReport {
    let increments: Vec<f64> = curve.iter().map(|&(m, v)| v / m as f64).collect();
    let mut acc = NeumaierSum::new();
    let partial_sums = curve
        .iter()
        .zip(&increments)
        .map(|(&(m, _), &inc)| {
            acc.add(inc);
            (m, acc.value())
        })
        .collect();
    let scaled: Vec<(usize, f64)> = curve.iter().map(|&(m, _)| m).zip(increments.iter().copied()).collect();
    let fit = fit_log_log(&scaled);
    let enough = curve.len() >= 3 && fit.status == FitStatus::Fitted;
    LyonsReport {
        partial_sums,
        increments,
        exponent: fit.slope,
        converges: enough.then(|| fit.slope.is_some_and(|s| s < -1.0 - LYONS_MARGIN)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SllnReport {
    pub points: Vec<GridPoint>,
    pub regimes: Vec<RegimeLabel>,
    pub ratio_condition: RatioCondition,
    /// Fit of `ln V_m` on `ln m` over points without a G-event hit.
    pub slope: SlopeFit,
    /// `slope ≤ −δ`; absent when the fit is undefined.
    pub slope_meets_delta: Option<bool>,
    /// `slope ≤ −2δ`, reported only.
    pub slope_meets_two_delta: Option<bool>,
    pub lyons: LyonsReport,
    /// Deviation medians are nonincreasing in `m` up to one inversion.
    pub medians_nonincreasing: bool,
    pub g_event_hits: usize,
}

const TRACKED: [TrackedIndex; 3] = [TrackedIndex::First, TrackedIndex::AfterHalf, TrackedIndex::Last];

fn at_dimension<T>(m: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::AtDimension { .. } => e,
        e => Error::AtDimension {
            m,
            source: Box::new(e),
        },
    })
}

/// Runs the configured sweep.
pub fn sweep(config: &ExperimentConfig) -> Result<SllnReport> {
    config.validate()?;
    let mut models = Vec::with_capacity(config.m_grid.len());
    for &m in &config.m_grid {
        let model = at_dimension(m, build_model(config, m))?;
        models.push(model);
    }

    let scale_grid: Vec<(usize, Vec<pfa::ScaleFactor>)> =
        models.iter().map(|md| (md.m, md.a.clone())).collect();
    let regimes = classify_regimes(&scale_grid, &TRACKED, DEFAULT_GROWTH_RATIO);
    let diverging: Vec<TrackedIndex> = regimes
        .iter()
        .filter(|r| r.regime == Regime::Diverging)
        .map(|r| r.index)
        .collect();
    let ratio_grid: Vec<(usize, Vec<f64>)> = models
        .iter()
        .map(|md| {
            let a = diverging
                .iter()
                .filter_map(|ix| ix.resolve(md.m))
                .filter_map(|i| md.a[i].finite())
                .collect();
            (md.m, a)
        })
        .collect();
    let ratio = if ratio_grid.len() >= 3 {
        ratio_condition(&ratio_grid)?
    } else {
        RatioCondition::NotApplicable {
            reason: "fewer than 3 grid points".into(),
        }
    };
    let q_estimate = match &ratio {
        RatioCondition::Estimate { q_estimate, .. } => Some(*q_estimate),
        RatioCondition::NotApplicable { .. } => None,
    };

    let mut points = Vec::with_capacity(models.len());
    for model in &models {
        let tracked: Vec<usize> = diverging.iter().filter_map(|ix| ix.resolve(model.m)).collect();
        points.push(at_dimension(model.m, grid_point(config, model, &tracked, q_estimate))?);
    }

    let clean: Vec<(usize, f64)> = points
        .iter()
        .filter(|p| !p.g_event.hit)
        .map(|p| (p.m, p.variance.value))
        .collect();
    let slope = fit_log_log(&clean);
    let slope_meets_delta = slope.slope.map(|s| s <= -config.delta);
    let slope_meets_two_delta = slope.slope.map(|s| s <= -2.0 * config.delta);
    let curve: Vec<(usize, f64)> = points.iter().map(|p| (p.m, p.variance.value)).collect();
    let inversions = points
        .windows(2)
        .filter(|w| w[1].deviation.median > w[0].deviation.median)
        .count();
    Ok(SllnReport {
        g_event_hits: points.iter().filter(|p| p.g_event.hit).count(),
        points,
        regimes,
        ratio_condition: ratio,
        slope,
        slope_meets_delta,
        slope_meets_two_delta,
        lyons: lyons_check(&curve),
        medians_nonincreasing: inversions <= 1,
    })
}

fn build_model(config: &ExperimentConfig, m: usize) -> Result<PfaModel> {
    let construction = config
        .family
        .build(m, derive_seed(config.seed, &[STREAM_FAMILY, m as u64]))?;
    let spectrum = eigendecompose(&construction.sigma)?;
    let k = config.k_policy.choose(&spectrum.eigenvalues, config.c, config.delta)?;
    pfa::from_spectrum(&spectrum, k)
}

fn grid_point(
    config: &ExperimentConfig,
    model: &PfaModel,
    tracked: &[usize],
    q_estimate: Option<f64>,
) -> Result<GridPoint> {
    let m = model.m;
    let mu = config.mu.vector(m);
    let mut rng = rng_for(config.seed, &[STREAM_FACTORS, m as u64]);
    let factors = normals(&mut rng, model.k);
    let eta = model.factor_mean(&factors);
    let profile = ThresholdProfile::new(model, config.t, &mu, &eta)?;
    let mean = conditional_mean(&profile);
    let variance = conditional_variance_exact(model, &profile, config.pair_budget)?;
    let g_event = g_event_check(&profile, config.eps_g, tracked)?;
    let all_active: Vec<usize> = (0..m).filter(|&i| !profile.is_degenerate(i)).collect();
    let boundary_near_misses = g_event_check(&profile, config.eps_g, &all_active)?.offending.len();

    let proportions: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for(config.seed, &[STREAM_REPLICATION, m as u64, r as u64]);
            let z = resample_z(model, &mu, &eta, &mut rng)?;
            Ok(rejection_count(&z, config.t) as f64 / m as f64)
        })
        .collect::<Result<_>>()?;
    let n = proportions.len() as f64;
    let mc_mean = compensated_sum(proportions.iter().copied()) / n;
    let mc_variance = (proportions.len() > 1).then(|| {
        compensated_sum(proportions.iter().map(|x| (x - mc_mean).powi(2))) / (n - 1.0)
    });
    let deviation =
        DeviationSummary::from_sample(proportions.iter().map(|x| (x - mean).abs()).collect());

    let mf = m as f64;
    let variance_bound_holds =
        variance.value <= 4.0 / mf + 2.0 * variance.covariance_sum.abs() / (mf * mf) + 1e-9;
    let conditions = condition_report(
        model,
        config.c,
        config.delta,
        config.eps_s,
        &DEFAULT_BETA_GRID,
        q_estimate,
    )?;
    Ok(GridPoint {
        m,
        k: model.k,
        theta: model.theta(),
        theta_bound: config.c * mf.powf(-config.delta),
        degenerate_count: model.degenerate_count(),
        conditional_mean: mean,
        variance,
        variance_bound_holds,
        mc_mean,
        mc_variance,
        deviation,
        g_event,
        boundary_near_misses,
        conditions,
    })
}
