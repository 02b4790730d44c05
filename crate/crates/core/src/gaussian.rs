//! Gaussian special functions and the conditional rejection probabilities of
//! the one-factor residual model.
//!
//! Given the factor draw, statistic `i` is rejected at threshold `t` unless
//! its residual falls in `[r2_i, r1_i]`, with
//! `r1_i = −z_{t/2} − η_i − μ_i` and `r2_i = z_{t/2} − η_i − μ_i`. In
//! standardized units the acceptance rectangle is `[c2_i, c1_i] = a_i·[r2_i, r1_i]`.
//!
//! Pairs of standardized residuals with correlation `ρ ≥ 0` are written as
//! `√ρ·z + √(1 − ρ)·e_i`, which turns the joint acceptance probability into a
//! one-dimensional integral over `z`.

use libm::erfc;
use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::pfa::{PfaModel, ScaleFactor};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `|ρ|` at or above this is outside the kernel's domain.
pub const RHO_CUTOFF: f64 = 1.0 - 1e-9;
/// Integration range; the normal density is below `1e-16` outside it.
pub const Z_LIMIT: f64 = 8.5;
/// Absolute error target for [`joint_survival`].
pub const QUADRATURE_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 40;
const BASE_PANELS: usize = 8;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `1 − Φ(x)`, accurate in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// `Φ^{-1}(p)`; `0 ↦ −∞`, `1 ↦ +∞`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // work in the lower tail where the residual Φ(x) − p keeps its precision
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..3 {
        let density = std_normal_pdf(x);
        if density <= 0.0 {
            break;
        }
        let step = (std_normal_cdf(x) - q) / density;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * x)
}

/// `Φ(hi) − Φ(lo)` for `lo ≤ hi`, evaluated on the side of zero that avoids
/// cancellation.
pub fn normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    }
}

/// `P(p_i ≤ t)` for a single statistic with mean shift `μ_i + η_i` and
/// residual scale `a_i`.
pub fn marginal_rejection_prob(t: f64, mu: f64, eta: f64, a: ScaleFactor) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold t must lie in [0, 1], got {t}")));
    }
    let z_half = std_normal_quantile(t / 2.0)?;
    let shift = mu + eta;
    Ok(match a {
        ScaleFactor::Infinite => degenerate_indicator(t, shift),
        ScaleFactor::Finite(a) => {
            let (r1, r2) = (-z_half - shift, z_half - shift);
            rejection_from_rectangle(a * r1, a * r2)
        }
    })
}

fn degenerate_indicator(t: f64, shift: f64) -> f64 {
    if 2.0 * std_normal_cdf(-shift.abs()) <= t {
        1.0
    } else {
        0.0
    }
}

fn rejection_from_rectangle(c1: f64, c2: f64) -> f64 {
    (1.0 - normal_interval(c2, c1)).clamp(0.0, 1.0)
}

/// Per-index acceptance rectangles at threshold `t` for one factor draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdProfile {
    pub t: f64,
    /// `z_{t/2} = Φ^{-1}(t/2) ≤ 0`.
    pub z_half: f64,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    /// `a_i·r1_i`; `None` for degenerate indices.
    pub c1: Vec<Option<f64>>,
    pub c2: Vec<Option<f64>>,
    /// `P(p_i ≤ t | w̃_k)`.
    pub marginal: Vec<f64>,
}

impl ThresholdProfile {
    pub fn new(model: &PfaModel, t: f64, mu: &[f64], eta: &[f64]) -> Result<Self> {
        let m = model.m;
        if mu.len() != m || eta.len() != m {
            return Err(Error::invalid(format!(
                "mean vectors must have length {m} (got μ: {}, η: {})",
                mu.len(),
                eta.len()
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("threshold t must lie in [0, 1], got {t}")));
        }
        let z_half = std_normal_quantile(t / 2.0)?;
        let mut profile = Self {
            t,
            z_half,
            r1: Vec::with_capacity(m),
            r2: Vec::with_capacity(m),
            c1: Vec::with_capacity(m),
            c2: Vec::with_capacity(m),
            marginal: Vec::with_capacity(m),
        };
        for i in 0..m {
            let shift = mu[i] + eta[i];
            let (r1, r2) = (-z_half - shift, z_half - shift);
            profile.r1.push(r1);
            profile.r2.push(r2);
            match model.a[i] {
                ScaleFactor::Infinite => {
                    profile.c1.push(None);
                    profile.c2.push(None);
                    profile.marginal.push(degenerate_indicator(t, shift));
                }
                ScaleFactor::Finite(a) => {
                    // t = 1 gives r1 = r2; keep the rectangle exactly empty
                    let (c1, c2) = if r1 == r2 { (a * r1, a * r1) } else { (a * r1, a * r2) };
                    profile.c1.push(Some(c1));
                    profile.c2.push(Some(c2));
                    profile.marginal.push(rejection_from_rectangle(c1, c2));
                }
            }
        }
        Ok(profile)
    }

    pub fn len(&self) -> usize {
        self.marginal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginal.is_empty()
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.c1[i].is_none()
    }

    /// `p_i(1 − p_i)`, the variance of the rejection indicator.
    pub fn indicator_variance(&self, i: usize) -> f64 {
        let p = self.marginal[i];
        p * (1.0 - p)
    }
}

/// Gauss–Kronrod 7/15 abscissae on `[−1, 1]` (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth >= MAX_DEPTH || b - a <= 1e-12 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth + 1) + adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// `∫ f(z) dz` over `[−Z_LIMIT, Z_LIMIT]`, split at `breaks`.
fn integrate(f: impl Fn(f64) -> f64, breaks: &[f64], tol: f64) -> f64 {
    let mut nodes: Vec<f64> = (0..=BASE_PANELS)
        .map(|p| -Z_LIMIT + 2.0 * Z_LIMIT * p as f64 / BASE_PANELS as f64)
        .collect();
    nodes.extend(breaks.iter().copied().filter(|b| b.abs() < Z_LIMIT));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let panel_tol = tol / (nodes.len() - 1) as f64;
    nodes
        .windows(2)
        .map(|w| adaptive(&f, w[0], w[1], panel_tol, 0))
        .sum()
}

/// `E[1{c2_i ≤ u_i ≤ c1_i}·1{c2_j ≤ u_j ≤ c1_j}] − P_i·P_j` for standard
/// normals with correlation `rho ≥ 0`.
fn rectangle_covariance(rho: f64, ci: (f64, f64), cj: (f64, f64)) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let root = rho.sqrt();
    let spread = (1.0 - rho).sqrt();
    let pi = normal_interval(ci.1, ci.0);
    let pj = normal_interval(cj.1, cj.0);
    let conditional = |c: (f64, f64), z: f64| {
        normal_interval((c.1 - root * z) / spread, (c.0 - root * z) / spread)
    };
    let integrand = |z: f64| (conditional(ci, z) - pi) * (conditional(cj, z) - pj) * std_normal_pdf(z);
    let breaks: Vec<f64> = [ci.0, ci.1, cj.0, cj.1]
        .iter()
        .filter(|c| c.is_finite())
        .map(|c| c / root)
        .collect();
    integrate(integrand, &breaks, QUADRATURE_TOL)
}

fn check_rectangle(c1: f64, c2: f64, label: &str) -> Result<()> {
    if c1.is_nan() || c2.is_nan() || c1 < c2 {
        return Err(Error::invalid(format!(
            "rectangle for index {label} needs c1 ≥ c2, got c1 = {c1}, c2 = {c2}"
        )));
    }
    Ok(())
}

/// Reflects index `j` for negative correlation: `u_j ↦ −u_j` maps the
/// rectangle `[c2, c1]` to `[−c1, −c2]`.
fn oriented(rho: f64, cj: (f64, f64)) -> (f64, (f64, f64)) {
    if rho < 0.0 {
        (-rho, (-cj.1, -cj.0))
    } else {
        (rho, cj)
    }
}

/// `P(c2_i ≤ u_i ≤ c1_i, c2_j ≤ u_j ≤ c1_j)` for standard normals with
/// correlation `rho`.
pub fn joint_survival(rho: f64, c1_i: f64, c2_i: f64, c1_j: f64, c2_j: f64) -> Result<f64> {
    check_rectangle(c1_i, c2_i, "i")?;
    check_rectangle(c1_j, c2_j, "j")?;
    if rho.is_nan() || rho.abs() >= RHO_CUTOFF {
        return Err(Error::OutOfDomain(format!(
            "|ρ| = {} is at or beyond the cutoff {RHO_CUTOFF}",
            rho.abs()
        )));
    }
    let (rho, cj) = oriented(rho, (c1_j, c2_j));
    let ci = (c1_i, c2_i);
    let pi = normal_interval(ci.1, ci.0);
    let pj = normal_interval(cj.1, cj.0);
    if pi == 0.0 || pj == 0.0 {
        return Ok(0.0);
    }
    Ok((pi * pj + rectangle_covariance(rho, ci, cj)).clamp(0.0, pi.min(pj)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMethod {
    Quadrature,
    ReflectionQuadrature,
    /// Either index has no residual variance; its indicator is constant.
    Degenerate,
    /// `ρ = 0` exactly.
    Independent,
    /// `|ρ|` beyond the kernel cutoff; the residuals are treated as equal
    /// (or opposite) and the rectangles intersected.
    NearUnitLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCovariance {
    pub i: usize,
    pub j: usize,
    pub rho: f64,
    /// `P(p_i > t, p_j > t | w̃_k)`.
    pub joint_survival: f64,
    pub cov: f64,
    pub method: CovarianceMethod,
    /// `√(p_i(1 − p_i)·p_j(1 − p_j))`.
    pub cauchy_schwarz_bound: f64,
}

/// `cov(X_i, X_j)` for the rejection indicators of statistics `i` and `j`.
pub fn pair_covariance(
    model: &PfaModel,
    profile: &ThresholdProfile,
    i: usize,
    j: usize,
) -> Result<PairCovariance> {
    let m = model.m;
    if i >= m || j >= m || profile.len() != m {
        return Err(Error::invalid(format!(
            "pair ({i}, {j}) out of range for dimension {m}"
        )));
    }
    if i == j {
        return Err(Error::invalid("pair covariance needs i ≠ j"));
    }
    let rho = model.resid_corr[(i, j)];
    let survive_i = 1.0 - profile.marginal[i];
    let survive_j = 1.0 - profile.marginal[j];
    let independent = survive_i * survive_j;
    let cauchy_schwarz_bound = (profile.indicator_variance(i) * profile.indicator_variance(j)).sqrt();
    let out = |joint_survival, cov, method| PairCovariance {
        i,
        j,
        rho,
        joint_survival,
        cov,
        method,
        cauchy_schwarz_bound,
    };

    let (Some(c1_i), Some(c2_i), Some(c1_j), Some(c2_j)) =
        (profile.c1[i], profile.c2[i], profile.c1[j], profile.c2[j])
    else {
        return Ok(out(independent, 0.0, CovarianceMethod::Degenerate));
    };
    if rho == 0.0 {
        return Ok(out(independent, 0.0, CovarianceMethod::Independent));
    }
    let (abs_rho, cj) = oriented(rho, (c1_j, c2_j));
    if abs_rho >= RHO_CUTOFF {
        let joint = normal_interval(c2_i.max(cj.1), c1_i.min(cj.0));
        return Ok(out(joint, joint - independent, CovarianceMethod::NearUnitLimit));
    }
    let cov = rectangle_covariance(abs_rho, (c1_i, c2_i), cj);
    // reflecting u_j turns the acceptance indicator of j into that of −u_j;
    // acceptance events are unchanged, so the covariance carries over as is
    let method = if rho < 0.0 {
        CovarianceMethod::ReflectionQuadrature
    } else {
        CovarianceMethod::Quadrature
    };
    Ok(out(independent + cov, cov, method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::{CovarianceMatrix, Matrix};
    use crate::pfa;
    use crate::seed::rng_for;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_cdf(1.96), 0.975_002_104_851_779_5, epsilon = 1e-12);
        for x in [0.1, 0.7, 1.3, 2.5, 4.0, 7.5] {
            assert_abs_diff_eq!(std_normal_cdf(x) + std_normal_cdf(-x), 1.0, epsilon = 1e-15);
        }
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(
            std_normal_quantile(0.025).unwrap(),
            -1.959_963_984_540_054,
            epsilon = 1e-10
        );
        for step in 0..=120 {
            let x = -6.0 + 0.1 * step as f64;
            let lower = -x.abs();
            assert_abs_diff_eq!(std_normal_quantile(std_normal_cdf(lower)).unwrap(), lower, epsilon = 1e-10);
            // Φ(x) near 1 is only known to an ulp of 1, so the direct round
            // trip is limited by 2^-53/φ(x)
            let limit = 1e-10_f64.max(2.0 * f64::EPSILON / std_normal_pdf(x));
            assert!((std_normal_quantile(std_normal_cdf(x)).unwrap() - x).abs() <= limit);
        }
        for p in [1e-300, 1e-12, 0.001, 0.3, 0.77, 0.999_999] {
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-12);
        }
        assert_eq!(std_normal_quantile(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(std_normal_quantile(1.0).unwrap(), f64::INFINITY);
        assert!(std_normal_quantile(1.5).is_err());
        assert!(std_normal_quantile(-0.1).is_err());
    }

    #[test]
    fn marginal_examples() {
        let a = ScaleFactor::Finite(1.0);
        assert_eq!(marginal_rejection_prob(1.0, 0.3, -1.2, a).unwrap(), 1.0);
        assert_eq!(marginal_rejection_prob(0.0, 0.3, -1.2, a).unwrap(), 0.0);
        assert_abs_diff_eq!(marginal_rejection_prob(0.05, 0.0, 0.0, a).unwrap(), 0.05, epsilon = 1e-14);
        // degenerate: p = 2Φ(−2) ≈ 0.0455
        assert_eq!(marginal_rejection_prob(0.05, 2.0, 0.0, ScaleFactor::Infinite).unwrap(), 1.0);
        assert_eq!(marginal_rejection_prob(0.04, 2.0, 0.0, ScaleFactor::Infinite).unwrap(), 0.0);
        let tie = 2.0 * std_normal_cdf(-1.5);
        assert_eq!(marginal_rejection_prob(tie, 1.0, 0.5, ScaleFactor::Infinite).unwrap(), 1.0);
    }

    #[test]
    fn marginal_matches_sampling() {
        let a = 2.0;
        let p = marginal_rejection_prob(0.05, 1.0, 0.0, ScaleFactor::Finite(a)).unwrap();
        let z = 1.959_963_984_540_054;
        let closed = 1.0 - (std_normal_cdf(a * (z - 1.0)) - std_normal_cdf(a * (-z - 1.0)));
        assert_abs_diff_eq!(p, closed, epsilon = 1e-14);

        let n = 1_000_000;
        let mut rng = rng_for(11, &[1]);
        let hits = (0..n)
            .filter(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                let stat = 1.0 + v / a;
                2.0 * std_normal_cdf(-stat.abs()) <= 0.05
            })
            .count();
        let est = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - p).abs() <= 3.0 * se, "est {est} vs {p} (se {se})");
    }

    #[test]
    fn marginal_is_monotone_in_t() {
        let a = ScaleFactor::Finite(1.7);
        let mut prev = 0.0;
        for step in 0..=100 {
            let p = marginal_rejection_prob(step as f64 / 100.0, 0.4, -0.9, a).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn joint_survival_factorizes_at_zero() {
        let j = joint_survival(0.0, 1.2, -0.4, 2.5, 0.3).unwrap();
        let f = normal_interval(-0.4, 1.2) * normal_interval(0.3, 2.5);
        assert_abs_diff_eq!(j, f, epsilon = 1e-15);
    }

    #[test]
    fn joint_survival_edge_cases() {
        assert_eq!(joint_survival(0.4, 1.0, 1.0, 2.0, -2.0).unwrap(), 0.0);
        assert!(matches!(
            joint_survival(1.0 - 1e-10, 1.0, -1.0, 1.0, -1.0),
            Err(Error::OutOfDomain(_))
        ));
        assert!(joint_survival(0.2, -1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn joint_survival_matches_sampling() {
        let n = 2_000_000;
        let cases = [
            (0.5, (1.96, -1.96), (1.96, -1.96)),
            (0.8, (0.7, -2.1), (1.4, 0.2)),
            (-0.6, (1.1, -0.3), (2.0, -0.5)),
        ];
        for (case, &(rho, ci, cj)) in cases.iter().enumerate() {
            let exact = joint_survival(rho, ci.0, ci.1, cj.0, cj.1).unwrap();
            let mut rng = rng_for(23, &[case as u64]);
            let spread = (1.0f64 - rho * rho).sqrt();
            let hits = (0..n)
                .filter(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let y = rho * x + spread * e;
                    ci.1 <= x && x <= ci.0 && cj.1 <= y && y <= cj.0
                })
                .count();
            let est = hits as f64 / n as f64;
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((est - exact).abs() <= 3.0 * se, "ρ = {rho}: {est} vs {exact}");
        }
    }

    #[test]
    fn comonotone_limit() {
        let (c1, c2) = (1.3, -1.3);
        let target = normal_interval(c2, c1);
        let mut prev = 0.0;
        for rho in [0.0, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999, 1.0 - 1e-6] {
            let j = joint_survival(rho, c1, c2, c1, c2).unwrap();
            assert!(j >= prev - 1e-12);
            prev = j;
        }
        assert!((target - prev).abs() < 1e-3, "{prev} vs {target}");
    }

    fn two_dim_model(rho: f64) -> pfa::PfaModel {
        let sigma = CovarianceMatrix::correlation(
            Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap(),
        )
        .unwrap();
        pfa::decompose(&sigma, 0).unwrap()
    }

    #[test]
    fn pair_covariance_branches() {
        let model = two_dim_model(0.0);
        let profile = ThresholdProfile::new(&model, 0.05, &[0.5, 1.0], &[0.0, 0.0]).unwrap();
        let pc = pair_covariance(&model, &profile, 0, 1).unwrap();
        assert_eq!(pc.method, CovarianceMethod::Independent);
        assert_eq!(pc.cov, 0.0);

        let model = two_dim_model(-0.4);
        let profile = ThresholdProfile::new(&model, 0.05, &[0.5, 1.0], &[0.0, 0.0]).unwrap();
        let pc = pair_covariance(&model, &profile, 0, 1).unwrap();
        assert_eq!(pc.method, CovarianceMethod::ReflectionQuadrature);
        let bound = (profile.indicator_variance(0) * profile.indicator_variance(1)).sqrt();
        assert!(pc.cov.abs() <= bound + 1e-9);
        assert!(pair_covariance(&model, &profile, 1, 1).is_err());
    }

    #[test]
    fn degenerate_index_has_zero_covariance() {
        // rank-one Σ: both statistics fully explained by one factor
        let sigma = CovarianceMatrix::correlation(
            Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let model = pfa::decompose(&sigma, 1).unwrap();
        assert!(model.is_degenerate(0));
        let profile = ThresholdProfile::new(&model, 0.1, &[0.0, 0.0], &[0.3, 0.3]).unwrap();
        let pc = pair_covariance(&model, &profile, 0, 1).unwrap();
        assert_eq!(pc.method, CovarianceMethod::Degenerate);
        assert_eq!(pc.cov, 0.0);
    }

    #[test]
    fn covariance_vanishes_linearly() {
        let ci = (1.2, -2.0);
        let cj = (0.9, -1.7);
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&rho| rectangle_covariance(rho, ci, cj).abs() / rho)
            .collect();
        let base = *ratios.last().unwrap();
        assert!(base > 0.0);
        for r in ratios {
            assert!(r <= 3.0 * base && r >= base / 3.0, "{r} vs {base}");
        }
    }

    #[test]
    fn profile_invariants() {
        let model = two_dim_model(0.3);
        let profile = ThresholdProfile::new(&model, 0.1, &[0.0, 2.0], &[0.4, -0.1]).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(profile.r1[i] - profile.r2[i], -2.0 * profile.z_half, epsilon = 1e-14);
            assert!(profile.c1[i].unwrap() >= profile.c2[i].unwrap());
            assert!((0.0..=1.0).contains(&profile.marginal[i]));
        }
    }
}
