//! Likelihood-ratio tests, power-law fits, attachment kernels and accuracy.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::clogit::{LogitFit, NonparametricFit, DEGREE_COLUMN, REFERENCE_DEGREE};
use crate::error::{Error, Result};
use crate::featurize::ChoiceData;
use crate::graph::{NodeId, TemporalGraph};
use crate::optim::golden_max;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrTestResult {
    /// `-2 log λ = 2 (ll_alt - ll_null)`.
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn chi2_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}

/// Test from raw log-likelihoods, without a nesting check. A negative
/// statistic (the alternative fits worse) gets p = 1.
pub fn lr_test_values(ll_null: f64, ll_alt: f64, df: usize) -> Result<LrTestResult> {
    if df == 0 {
        return Err(Error::config(
            "likelihood-ratio test needs at least one degree of freedom",
        ));
    }
    let statistic = 2.0 * (ll_alt - ll_null);
    Ok(LrTestResult {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
    })
}

/// Nested-model test. `df` defaults to the difference in free coefficients.
pub fn lr_test(null: &LogitFit, alt: &LogitFit, df: Option<usize>) -> Result<LrTestResult> {
    if let Some(extra) = null.names.iter().find(|n| !alt.names.contains(n)) {
        return Err(Error::NotNested(format!(
            "null feature `{extra}` is absent from the alternative"
        )));
    }
    if null.n_events != alt.n_events {
        return Err(Error::data(
            "fits were computed on different numbers of events",
        ));
    }
    let free = |f: &LogitFit| f.fixed.iter().filter(|x| !**x).count();
    let k = df.unwrap_or(free(alt).saturating_sub(free(null)));
    let mut statistic = 2.0 * (alt.loglik - null.loglik);
    let slack = 1e-6 * null.loglik.abs().max(1.0);
    if statistic < 0.0 {
        assert!(
            statistic > -slack,
            "nested alternative fits worse than the null: statistic {statistic}"
        );
        statistic = 0.0;
    }
    if k == 0 {
        return Ok(LrTestResult {
            statistic,
            df: 0,
            p_value: 1.0,
        });
    }
    lr_test_values(null.loglik, null.loglik + statistic / 2.0, k)
}

// B_2, B_4, ... B_16
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `Σ_{n≥0} (n + q)^{-s}` for `s > 1`, `q > 0`, by
/// Euler-Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1, q > 0");
    const N: usize = 12;
    let mut sum = 0.0;
    for n in 0..N {
        sum += (n as f64 + q).powf(-s);
    }
    let a = N as f64 + q;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // Σ B_2j / (2j)! * s (s+1) ... (s+2j-2) * a^{-s-2j+1}
    let mut rising = s; // s (s+1) ... (s+2j-2)
    let mut fact = 2.0; // (2j)!
    let mut pow = a.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / fact * rising * pow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        pow /= a * a;
    }
    sum
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub x_min: u64,
    pub n_tail: usize,
    pub loglik: f64,
    /// Kolmogorov-Smirnov distance between the tail and the fitted law.
    pub ks_distance: f64,
    pub warnings: Vec<String>,
}

const GAMMA_RANGE: (f64, f64) = (1.000_001, 30.0);

/// Discrete power-law MLE `p(x) = x^{-γ} / ζ(γ, x_min)` over `x >= x_min`.
pub fn powerlaw_mle(degrees: &[u64], x_min: u64) -> Result<PowerLawFit> {
    if x_min == 0 {
        return Err(Error::config("x_min must be at least 1"));
    }
    let tail: Vec<u64> = degrees.iter().copied().filter(|&d| d >= x_min).collect();
    if tail.is_empty() {
        return Err(Error::data(format!(
            "no observations at or above x_min = {x_min}"
        )));
    }
    let n = tail.len() as f64;
    let sum_log: f64 = tail.iter().map(|&d| (d as f64).ln()).sum();
    let q = x_min as f64;
    let loglik = |g: f64| -n * hurwitz_zeta(g, q).ln() - g * sum_log;
    let (gamma, ll) = golden_max(loglik, GAMMA_RANGE.0, GAMMA_RANGE.1, 1e-10);
    let mut warnings = Vec::new();
    if tail.len() < 50 {
        warnings.push(format!("only {} observations in the tail", tail.len()));
    }
    Ok(PowerLawFit {
        gamma,
        x_min,
        n_tail: tail.len(),
        loglik: ll,
        ks_distance: ks_distance_discrete(&tail, gamma, x_min),
        warnings,
    })
}

fn ks_distance_discrete(tail: &[u64], gamma: f64, x_min: u64) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for &d in tail {
        *counts.entry(d).or_default() += 1;
    }
    let n = tail.len() as f64;
    let z = hurwitz_zeta(gamma, x_min as f64);
    let mut seen = 0usize;
    let mut dist = 0.0_f64;
    for (&x, &c) in &counts {
        let model_below = 1.0 - hurwitz_zeta(gamma, x as f64) / z;
        dist = dist.max((seen as f64 / n - model_below).abs());
        seen += c;
        let model_upto = 1.0 - hurwitz_zeta(gamma, x as f64 + 1.0) / z;
        dist = dist.max((seen as f64 / n - model_upto).abs());
    }
    dist
}

/// Choose `x_min` by minimizing the KS distance over observed values that
/// leave at least `min_tail` observations.
pub fn powerlaw_mle_ks_scan(degrees: &[u64], min_tail: usize) -> Result<PowerLawFit> {
    let mut values: Vec<u64> = degrees.iter().copied().filter(|&d| d >= 1).collect();
    values.sort_unstable();
    let candidates: Vec<u64> = {
        let mut c = values.clone();
        c.dedup();
        c
    };
    let mut best: Option<PowerLawFit> = None;
    for &x in &candidates {
        let tail = values.len() - values.partition_point(|&v| v < x);
        if tail < min_tail.max(2) {
            break;
        }
        let fit = powerlaw_mle(&values, x)?;
        if best
            .as_ref()
            .is_none_or(|b| fit.ks_distance < b.ks_distance)
        {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::data("no x_min leaves enough tail observations"))
}

/// Final attachment degrees of every node.
pub fn degree_sequence(g: &TemporalGraph) -> Vec<u64> {
    (0..g.node_count())
        .map(|v| g.degree(NodeId::from(v), u64::MAX) as u64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelEstimator {
    Newman,
    NonparametricLogit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub degree: usize,
    /// Relative propensity, 1 at degree 1; `None` when undefined.
    pub propensity: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub estimator: KernelEstimator,
    pub points: Vec<KernelPoint>,
    pub alpha_mle: Option<f64>,
    pub alpha_pham_ls: Option<f64>,
}

impl KernelEstimate {
    pub fn at(&self, degree: usize) -> Option<f64> {
        self.points.get(degree).and_then(|p| p.propensity)
    }

    /// `degree,propensity,lo,hi,estimator`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "degree,propensity,lo,hi,estimator")?;
        let tag = match self.estimator {
            KernelEstimator::Newman => "newman",
            KernelEstimator::NonparametricLogit => "nonparametric-logit",
        };
        let cell = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.degree,
                cell(p.propensity),
                cell(p.lo),
                cell(p.hi),
                tag
            )?;
        }
        Ok(())
    }
}

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: f64, n: f64, z: f64) -> (f64, f64) {
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Per-degree exposure and choice counts: `(exposures, choices)` indexed by degree.
pub fn degree_counts(data: &ChoiceData) -> Result<(Vec<f64>, Vec<f64>)> {
    let col = data.require_column(DEGREE_COLUMN)?;
    let mut exposures: Vec<f64> = Vec::new();
    let mut choices: Vec<f64> = Vec::new();
    let grow = |v: &mut Vec<f64>, k: usize| {
        if v.len() <= k {
            v.resize(k + 1, 0.0);
        }
    };
    for e in &data.events {
        let w = e.weight.unwrap_or(1.0);
        for a in 0..e.n_alternatives() {
            let k = e.row(a)[col] as usize;
            grow(&mut exposures, k);
            exposures[k] += w * e.count(a);
        }
        let k = e.row(e.chosen)[col] as usize;
        grow(&mut choices, k);
        choices[k] += w;
    }
    let len = exposures.len().max(REFERENCE_DEGREE + 1);
    exposures.resize(len, 0.0);
    choices.resize(len, 0.0);
    Ok((exposures, choices))
}

/// Ratio of choices to exposures per degree, relative to degree 1. Intervals
/// are Wilson intervals of the degree-k rate divided by the degree-1 rate.
pub fn newman_kernel(data: &ChoiceData) -> Result<KernelEstimate> {
    let (exposures, choices) = degree_counts(data)?;
    let base = choices[REFERENCE_DEGREE] / exposures[REFERENCE_DEGREE];
    if !(base > 0.0) {
        return Err(Error::data(
            "degree-1 nodes are never chosen; kernel cannot be normalized",
        ));
    }
    let points = (0..exposures.len())
        .map(|k| {
            if exposures[k] == 0.0 {
                return KernelPoint {
                    degree: k,
                    propensity: None,
                    lo: None,
                    hi: None,
                };
            }
            let (lo, hi) = wilson_interval(choices[k], exposures[k], Z95);
            KernelPoint {
                degree: k,
                propensity: Some(choices[k] / exposures[k] / base),
                lo: Some(lo / base),
                hi: Some(hi / base),
            }
        })
        .collect();
    Ok(KernelEstimate {
        estimator: KernelEstimator::Newman,
        points,
        alpha_mle: None,
        alpha_pham_ls: None,
    })
}

/// `exp(θ_k)` with 95% intervals `exp(θ_k ± 1.96 SE)`.
pub fn nonparametric_kernel(fit: &NonparametricFit) -> KernelEstimate {
    let points = (0..fit.theta.len())
        .map(|k| {
            let t = fit.theta[k];
            let se = fit.std_errors[k];
            KernelPoint {
                degree: k,
                propensity: t.map(f64::exp),
                lo: t.zip(se).map(|(t, s)| (t - Z95 * s).exp()),
                hi: t.zip(se).map(|(t, s)| (t + Z95 * s).exp()),
            }
        })
        .collect();
    KernelEstimate {
        estimator: KernelEstimator::NonparametricLogit,
        points,
        alpha_mle: None,
        alpha_pham_ls: pham_ls_alpha(fit).ok().map(|p| p.slope),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n: usize,
}

/// Weighted least squares of `y` on `x` with an intercept.
pub fn weighted_least_squares(x: &[f64], y: &[f64], w: &[f64]) -> Result<WlsFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return Err(Error::data(
            "weighted least squares needs at least two points",
        ));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::data("regressor has no spread"));
    }
    let slope = sxy / sxx;
    Ok(WlsFit {
        slope,
        intercept: my - slope * mx,
        // inverse-variance weights: Var(slope) = 1 / Sxx
        slope_se: (1.0 / sxx).sqrt(),
        n,
    })
}

/// Slope of `θ_k` on `log k` over estimated degrees `k >= 1`, weighted by
/// `1 / SE²`. The pinned reference level and a top-coded last level are left out.
pub fn pham_ls_alpha(fit: &NonparametricFit) -> Result<WlsFit> {
    let top = fit.max_degree();
    let levels: Vec<(usize, f64, f64)> = fit
        .estimated_levels()
        .into_iter()
        .filter(|&(k, _, se)| k >= 1 && se > 0.0 && !(fit.top_coded && k == top))
        .collect();
    if levels.len() < 2 {
        return Err(Error::data("fewer than two usable degree coefficients"));
    }
    let x: Vec<f64> = levels.iter().map(|l| (l.0 as f64).ln()).collect();
    let y: Vec<f64> = levels.iter().map(|l| l.1).collect();
    let w: Vec<f64> = levels.iter().map(|l| 1.0 / (l.2 * l.2)).collect();
    weighted_least_squares(&x, &y, &w)
}

/// Share of events whose highest-utility alternative is the chosen one.
///
/// Ties go to the lowest alternative position. When the winning row merges
/// `c` identical alternatives, a correct prediction counts `1/c`.
pub fn accuracy(theta: &[f64], data: &ChoiceData) -> Result<f64> {
    if theta.len() != data.feature_names.len() {
        return Err(Error::Dimension {
            expected: data.feature_names.len(),
            got: theta.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::data("no test events"));
    }
    let mut hits = 0.0;
    for e in &data.events {
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..e.n_alternatives() {
            let u: f64 = e.row(a).iter().zip(theta).map(|(x, t)| x * t).sum();
            if u > best.0 {
                best = (u, a);
            }
        }
        if best.1 == e.chosen {
            hits += 1.0 / e.count(e.chosen);
        }
    }
    Ok(hits / data.len() as f64)
}

/// Accuracy of a fitted model, matching its coefficients to columns by name.
pub fn holdout_accuracy(fit: &LogitFit, test: &ChoiceData) -> Result<f64> {
    let names: Vec<&str> = fit.names.iter().map(String::as_str).collect();
    accuracy(&fit.coefficients, &test.select(&names)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov distribution tail `P(K > λ)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::data("KS test on an empty sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    })
}

/// KS test against `χ²_df`.
pub fn ks_test_chi2(sample: &[f64], df: usize) -> Result<KsResult> {
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::config(e.to_string()))?;
    ks_test(sample, |x| if x <= 0.0 { 0.0 } else { dist.cdf(x) })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::data(
            "spearman needs two equal-length samples of size >= 2",
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    Ok(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clogit::{fit_nonparametric_pa, FitOptions};
    use crate::featurize::{
        extract_choices, ChoiceEvent, ChoiceFilters, ChoiceSetRule, FeatureSpec,
    };
    use crate::genmodels::{generate, GrowthConfig, Model};
    use crate::optim::BfgsOptions;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit_with(names: &[&str], loglik: f64, n_events: usize) -> LogitFit {
        LogitFit {
            names: names.iter().map(|s| s.to_string()).collect(),
            coefficients: vec![0.0; names.len()],
            std_errors: vec![None; names.len()],
            fixed: vec![false; names.len()],
            loglik,
            grad_norm: 0.0,
            iterations: 0,
            converged: true,
            stop_reason: crate::optim::StopReason::Gradient,
            n_events,
            ridge: 0.0,
            degenerate_direction: None,
            diagnostics: vec![],
        }
    }

    #[test]
    fn lr_examples() {
        let a = fit_with(&["x"], -100.0, 10);
        let r = lr_test(&a, &a, Some(1)).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let b = fit_with(&["x", "y"], -98.0, 10);
        let r = lr_test(&a, &b, None).unwrap();
        assert_eq!(r.df, 1);
        assert_relative_eq!(r.p_value, 0.045_500_263_896_358_42, epsilon = 1e-10);
        let c = fit_with(&["z"], -90.0, 10);
        assert!(matches!(lr_test(&c, &b, None), Err(Error::NotNested(_))));
        assert!(lr_test_values(-1000.0, -900.0, 1).unwrap().p_value < 1e-16);
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        assert_relative_eq!(
            hurwitz_zeta(2.0, 1.0),
            std::f64::consts::PI.powi(2) / 6.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            hurwitz_zeta(4.0, 1.0),
            std::f64::consts::PI.powi(4) / 90.0,
            epsilon = 1e-14
        );
        // ζ(3, 2) = ζ(3) - 1
        assert_relative_eq!(
            hurwitz_zeta(3.0, 2.0),
            1.202_056_903_159_594_3 - 1.0,
            epsilon = 1e-14
        );
        // direct summation near s = 1
        let s = 1.5;
        let direct: f64 = (0..2_000_000)
            .map(|n| (n as f64 + 3.0).powf(-s))
            .sum::<f64>()
            + (2_000_003f64).powf(1.0 - s) / (s - 1.0);
        assert_relative_eq!(hurwitz_zeta(s, 3.0), direct, epsilon = 1e-9);
    }

    /// Inverse-CDF sampling from the discrete power law.
    fn sample_powerlaw(gamma: f64, x_min: u64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = hurwitz_zeta(gamma, x_min as f64);
        // tabulate the CDF far enough out, then use a continuous tail bound
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for x in x_min..x_min + 100_000 {
            acc += (x as f64).powf(-gamma) / z;
            cdf.push(acc);
        }
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c < u);
                x_min + i as u64
            })
            .collect()
    }

    #[test]
    fn powerlaw_recovers_exponent() {
        let xs = sample_powerlaw(2.5, 1, 10_000, 3);
        let f = powerlaw_mle(&xs, 1).unwrap();
        assert!((f.gamma - 2.5).abs() < 0.1, "{}", f.gamma);
        assert!(f.warnings.is_empty());
        let xs = sample_powerlaw(3.0, 4, 10_000, 4);
        let f = powerlaw_mle(&xs, 4).unwrap();
        assert!((f.gamma - 3.0).abs() < 0.1, "{}", f.gamma);
        assert!(powerlaw_mle(&[1, 2], 5).is_err());
        let scan = powerlaw_mle_ks_scan(&xs, 100).unwrap();
        assert!(scan.x_min >= 4 && (scan.gamma - 3.0).abs() < 0.3);
    }

    #[test]
    fn copy_model_exponents() {
        // p -> 0 is linear PA: γ = 3 undirected; (2 - p)/(1 - p) directed
        let g = generate(&GrowthConfig::new(Model::Copy { p: 0.0 }, 20_000, 4, 1))
            .unwrap()
            .graph;
        let f = powerlaw_mle_ks_scan(&degree_sequence(&g), 200).unwrap();
        assert!((f.gamma - 3.0).abs() < 0.3, "undirected {}", f.gamma);
        let p = 0.2;
        let g = generate(&GrowthConfig::new(Model::Copy { p }, 20_000, 2, 1).directed(true))
            .unwrap()
            .graph;
        let f = powerlaw_mle_ks_scan(&degree_sequence(&g), 200).unwrap();
        let expect = (2.0 - p) / (1.0 - p);
        assert!(
            (f.gamma - expect).abs() < 0.3,
            "directed {} vs {expect}",
            f.gamma
        );
    }

    fn degree_events(rows: &[(&[f64], usize)]) -> ChoiceData {
        ChoiceData {
            feature_names: vec![DEGREE_COLUMN.into()],
            events: rows
                .iter()
                .enumerate()
                .map(|(k, (degs, chosen))| ChoiceEvent {
                    event: k as u64,
                    chooser: NodeId(99),
                    chosen: *chosen,
                    alternatives: (0..degs.len() as u32).map(NodeId).collect(),
                    features: degs.to_vec(),
                    n_features: 1,
                    weight: None,
                    counts: None,
                })
                .collect(),
        }
    }

    #[test]
    fn newman_two_event_toy() {
        // event 1: degrees {1, 1, 2}, picks a degree-1 node
        // event 2: degrees {1, 2, 2, 3}, picks a degree-2 node
        let d = degree_events(&[(&[1.0, 1.0, 2.0], 0), (&[1.0, 2.0, 2.0, 3.0], 1)]);
        let k = newman_kernel(&d).unwrap();
        // rates: deg1 1/3, deg2 1/3, deg3 0/1
        assert_eq!(k.at(1), Some(1.0));
        assert_relative_eq!(k.at(2).unwrap(), 1.0);
        assert_eq!(k.at(3), Some(0.0));
        assert_eq!(k.at(0), None);
    }

    #[test]
    fn wilson_interval_reference() {
        // 3 of 10 at 95%: (0.1078, 0.6032)
        let (lo, hi) = wilson_interval(3.0, 10.0, Z95);
        assert!((lo - 0.1078).abs() < 1e-4 && (hi - 0.6032).abs() < 1e-4);
    }

    #[test]
    fn pham_noiseless_slope() {
        let theta: Vec<Option<f64>> = (0..12)
            .map(|k| {
                if k == 0 {
                    None
                } else {
                    Some(0.7 * (k as f64).ln())
                }
            })
            .collect();
        let se: Vec<Option<f64>> = (0..12)
            .map(|k| if k < 2 { None } else { Some(0.1 * k as f64) })
            .collect();
        let fit = NonparametricFit {
            theta,
            std_errors: se,
            exposures: vec![1.0; 12],
            chosen: vec![1.0; 12],
            missing: vec![],
            top_coded: false,
            loglik: 0.0,
            iterations: 0,
            converged: true,
            grad_norm: 0.0,
        };
        assert_relative_eq!(pham_ls_alpha(&fit).unwrap().slope, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn pa_kernels_and_pham() {
        let g = generate(&GrowthConfig::new(Model::Pa { alpha: 1.0 }, 2000, 1, 5))
            .unwrap()
            .graph;
        let spec = FeatureSpec::parse("degree,logdeg").unwrap();
        let (d, _) = extract_choices(
            &g,
            &spec,
            ChoiceSetRule::AllNodes,
            &ChoiceFilters {
                compress: true,
                ..Default::default()
            },
        )
        .unwrap();
        let np = fit_nonparametric_pa(&d, None, &BfgsOptions::default()).unwrap();
        let pham = pham_ls_alpha(&np).unwrap();
        let mle = crate::clogit::fit_columns(&d, &["log_degree"], &FitOptions::default()).unwrap();
        assert!((pham.slope - 1.0).abs() < 0.15, "pham {}", pham.slope);
        assert!((pham.slope - mle.coefficients[0]).abs() < 0.1);
        let newman = newman_kernel(&d).unwrap();
        let logit = nonparametric_kernel(&np);
        for k in 2..=5 {
            let (a, b) = (newman.at(k).unwrap(), logit.at(k).unwrap());
            let se = np.std_errors[k].unwrap();
            assert!(
                (a.ln() - b.ln()).abs() < 2.0 * se + 0.05,
                "k={k}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn uniform_graph_kernel_is_flat() {
        let g = generate(&GrowthConfig::new(Model::Uniform, 2000, 1, 8))
            .unwrap()
            .graph;
        let spec = FeatureSpec::parse("degree").unwrap();
        let f = ChoiceFilters {
            compress: true,
            ..Default::default()
        };
        let (d, _) = extract_choices(&g, &spec, ChoiceSetRule::AllNodes, &f).unwrap();
        let np = fit_nonparametric_pa(&d, None, &BfgsOptions::default()).unwrap();
        let mut outside = 0;
        let mut total = 0;
        for (k, t, se) in np.estimated_levels() {
            if k == REFERENCE_DEGREE {
                continue;
            }
            total += 1;
            if t.abs() > 2.0 * se {
                outside += 1;
            }
        }
        // about 5% of levels may fall outside by chance
        assert!(
            outside as f64 <= 0.15 * total as f64 + 1.0,
            "{outside}/{total}"
        );
        let k = newman_kernel(&d).unwrap();
        for p in k.points.iter().skip(1).take(4) {
            let (lo, hi) = (p.lo.unwrap(), p.hi.unwrap());
            assert!(lo <= 1.3 && hi >= 0.7, "degree {}: [{lo}, {hi}]", p.degree);
        }
    }

    #[test]
    fn accuracy_examples() {
        // uniform model: ties go to position 0
        let rows: Vec<(Vec<f64>, usize)> = (0..25).map(|k| (vec![0.0; 25], k)).collect();
        let refs: Vec<(&[f64], usize)> = rows.iter().map(|(v, k)| (v.as_slice(), *k)).collect();
        let d = degree_events(&refs);
        assert_relative_eq!(accuracy(&[1.0], &d).unwrap(), 1.0 / 25.0);
        let d = degree_events(&[(&[5.0, 1.0], 0), (&[0.0, 2.0, 1.0], 1)]);
        assert_eq!(accuracy(&[1.0], &d).unwrap(), 1.0);
        let c = d.compressed();
        assert_eq!(accuracy(&[1.0], &c).unwrap(), 1.0);
    }

    #[test]
    fn ks_and_spearman() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.statistic < 1e-3 && r.p_value > 0.99);
        let r = ks_test(&u, |x| x.clamp(0.0, 1.0).powi(2)).unwrap();
        assert!(r.p_value < 1e-10);
        assert_relative_eq!(kolmogorov_sf(1.358), 0.05, epsilon = 1e-3);
        assert_relative_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]).unwrap(), -1.0);
        assert_relative_eq!(
            spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.866_025_403_784_438_6,
            epsilon = 1e-12
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn powerlaw_invariant_to_duplication(seed in any::<u64>()) {
            let xs = sample_powerlaw(2.2, 1, 300, seed);
            let doubled: Vec<u64> = xs.iter().chain(&xs).copied().collect();
            let (a, b) = (powerlaw_mle(&xs, 1).unwrap(), powerlaw_mle(&doubled, 1).unwrap());
            prop_assert!((a.gamma - b.gamma).abs() < 1e-7);
        }

        #[test]
        fn wls_recovers_exact_lines(slope in -3.0..3.0f64, icpt in -2.0..2.0f64) {
            let x: Vec<f64> = (1..10).map(|k| (k as f64).ln()).collect();
            let y: Vec<f64> = x.iter().map(|v| icpt + slope * v).collect();
            let w: Vec<f64> = (1..10).map(|k| k as f64).collect();
            let f = weighted_least_squares(&x, &y, &w).unwrap();
            prop_assert!((f.slope - slope).abs() < 1e-10);
        }
    }
}
