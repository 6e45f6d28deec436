//! Conditional multinomial logit.
//!
//! `P(j | C) = exp(θ·x_j) / Σ_{a ∈ C} c_a exp(θ·x_a)`, where `c_a` is the
//! multiplicity of a merged feature row (1 for plain events).

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{ChoiceData, ChoiceEvent};
use crate::optim::{self, BfgsOptions, StopReason};
use crate::par;

/// Which alternatives and weights enter a likelihood evaluation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Design<'a> {
    pub events: &'a [ChoiceEvent],
    /// Coefficient `f` multiplies data column `columns[f]`.
    pub columns: &'a [usize],
    /// Restrict each choice set to alternatives with a nonzero value here.
    pub subset: Option<usize>,
    /// Per-event weights, multiplied with each event's own weight.
    pub weights: Option<&'a [f64]>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Eval {
    pub loglik: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub zero_events: Vec<u64>,
}

impl Eval {
    fn zeros(dim: usize, hess: bool) -> Self {
        Eval {
            loglik: 0.0,
            grad: vec![0.0; dim],
            hess: if hess {
                vec![0.0; dim * dim]
            } else {
                Vec::new()
            },
            zero_events: Vec::new(),
        }
    }

    fn merge(mut self, other: Eval) -> Eval {
        self.loglik += other.loglik;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += b;
        }
        self.zero_events.extend(other.zero_events);
        self
    }
}

impl<'a> Design<'a> {
    pub fn new(events: &'a [ChoiceEvent], columns: &'a [usize]) -> Self {
        Design {
            events,
            columns,
            subset: None,
            weights: None,
        }
    }

    fn weight(&self, k: usize) -> f64 {
        self.events[k].weight.unwrap_or(1.0) * self.weights.map_or(1.0, |w| w[k])
    }

    #[inline]
    fn included(&self, e: &ChoiceEvent, a: usize) -> bool {
        self.subset.is_none_or(|c| e.row(a)[c] != 0.0)
    }

    #[inline]
    fn utility(&self, theta: &[f64], e: &ChoiceEvent, a: usize) -> f64 {
        let row = e.row(a);
        self.columns
            .iter()
            .zip(theta)
            .map(|(&c, t)| t * row[c])
            .sum()
    }

    /// Log-probability of the chosen alternative; -inf when it is excluded.
    pub fn event_loglik(&self, theta: &[f64], e: &ChoiceEvent) -> f64 {
        if !self.included(e, e.chosen) {
            return f64::NEG_INFINITY;
        }
        let mut m = f64::NEG_INFINITY;
        for a in 0..e.n_alternatives() {
            if self.included(e, a) {
                m = m.max(self.utility(theta, e, a));
            }
        }
        let mut z = 0.0;
        for a in 0..e.n_alternatives() {
            if self.included(e, a) {
                z += e.count(a) * (self.utility(theta, e, a) - m).exp();
            }
        }
        self.utility(theta, e, e.chosen) - m - z.ln()
    }

    fn accumulate(
        &self,
        theta: &[f64],
        k: usize,
        acc: &mut Eval,
        want_grad: bool,
        want_hess: bool,
    ) {
        let e = &self.events[k];
        let w = self.weight(k);
        if w == 0.0 {
            return;
        }
        if !self.included(e, e.chosen) {
            acc.loglik = f64::NEG_INFINITY;
            acc.zero_events.push(e.event);
            return;
        }
        let dim = self.columns.len();
        let n = e.n_alternatives();
        let mut u = vec![f64::NEG_INFINITY; n];
        let mut m = f64::NEG_INFINITY;
        for (a, ua) in u.iter_mut().enumerate() {
            if self.included(e, a) {
                *ua = self.utility(theta, e, a);
                m = m.max(*ua);
            }
        }
        let mut z = 0.0;
        for (a, ua) in u.iter_mut().enumerate() {
            if ua.is_finite() {
                *ua = e.count(a) * (*ua - m).exp();
                z += *ua;
            } else {
                *ua = 0.0;
            }
        }
        // u now holds unnormalized masses c_a exp(u_a - m)
        let uj = self.utility(theta, e, e.chosen);
        acc.loglik += w * (uj - m - z.ln());
        if !want_grad {
            return;
        }
        let mut mean = vec![0.0; dim];
        for (a, &mass) in u.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let p = mass / z;
            let row = e.row(a);
            for (f, &c) in self.columns.iter().enumerate() {
                mean[f] += p * row[c];
            }
        }
        let chosen = e.row(e.chosen);
        for (f, &c) in self.columns.iter().enumerate() {
            acc.grad[f] += w * (chosen[c] - mean[f]);
        }
        if !want_hess {
            return;
        }
        // -(E[x x'] - mean mean') accumulated as centered second moments
        for (a, &mass) in u.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let p = w * mass / z;
            let row = e.row(a);
            for f in 0..dim {
                let df = row[self.columns[f]] - mean[f];
                if df == 0.0 {
                    continue;
                }
                for g in 0..=f {
                    let dg = row[self.columns[g]] - mean[g];
                    acc.hess[f * dim + g] -= p * df * dg;
                }
            }
        }
    }

    pub fn evaluate(&self, theta: &[f64], want_grad: bool, want_hess: bool) -> Eval {
        let dim = self.columns.len();
        let mut out = par::map_reduce(
            self.events.len(),
            par::CHUNK,
            Eval::zeros(dim, want_hess),
            |range| {
                let mut acc = Eval::zeros(dim, want_hess);
                for k in range {
                    self.accumulate(theta, k, &mut acc, want_grad, want_hess);
                }
                acc
            },
            Eval::merge,
        );
        if want_hess {
            for f in 0..dim {
                for g in 0..f {
                    out.hess[g * dim + f] = out.hess[f * dim + g];
                }
            }
        }
        out
    }

    /// Per-event log-likelihoods (unweighted), -inf for excluded choices.
    pub fn event_logliks(&self, theta: &[f64]) -> Vec<f64> {
        par::map_chunks(self.events.len(), par::CHUNK, |range| {
            range
                .map(|k| self.event_loglik(theta, &self.events[k]))
                .collect::<Vec<_>>()
        })
        .concat()
    }
}

fn all_columns(data: &ChoiceData) -> Vec<usize> {
    (0..data.feature_names.len()).collect()
}

fn check_dims(theta: &[f64], data: &ChoiceData) -> Result<()> {
    if theta.len() != data.feature_names.len() {
        return Err(Error::Dimension {
            expected: data.feature_names.len(),
            got: theta.len(),
        });
    }
    Ok(())
}

fn check_event(theta: &[f64], e: &ChoiceEvent) -> Result<()> {
    if theta.len() != e.n_features {
        return Err(Error::Dimension {
            expected: e.n_features,
            got: theta.len(),
        });
    }
    e.validate()
}

/// Probability of each alternative (per representative, for merged rows).
pub fn choice_prob(theta: &[f64], event: &ChoiceEvent) -> Result<Vec<f64>> {
    check_event(theta, event)?;
    let u: Vec<f64> = (0..event.n_alternatives())
        .map(|a| event.row(a).iter().zip(theta).map(|(x, t)| x * t).sum())
        .collect();
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = u
        .iter()
        .enumerate()
        .map(|(a, ua)| event.count(a) * (ua - m).exp())
        .sum();
    Ok(u.iter().map(|ua| (ua - m).exp() / z).collect())
}

/// Total log-likelihood; -inf when a chosen alternative has probability 0.
pub fn log_likelihood(theta: &[f64], data: &ChoiceData) -> Result<f64> {
    check_dims(theta, data)?;
    data.validate()?;
    let cols = all_columns(data);
    Ok(Design::new(&data.events, &cols)
        .evaluate(theta, false, false)
        .loglik)
}

pub fn gradient(theta: &[f64], data: &ChoiceData) -> Result<Vec<f64>> {
    check_dims(theta, data)?;
    data.validate()?;
    let cols = all_columns(data);
    Ok(Design::new(&data.events, &cols)
        .evaluate(theta, true, false)
        .grad)
}

pub fn hessian(theta: &[f64], data: &ChoiceData) -> Result<DMatrix<f64>> {
    check_dims(theta, data)?;
    data.validate()?;
    let cols = all_columns(data);
    let d = cols.len();
    let ev = Design::new(&data.events, &cols).evaluate(theta, true, true);
    Ok(DMatrix::from_row_slice(d, d, &ev.hess))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(flatten)]
    pub bfgs: BfgsOptions,
    /// L2 penalty `ridge/2 * |θ|²` on free coefficients; 0 disables it.
    pub ridge: f64,
    /// Starting point; zeros when absent.
    pub start: Option<Vec<f64>>,
    /// Coefficients held at a given value, by feature name.
    pub fixed: BTreeMap<String, f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bfgs: BfgsOptions::default(),
            ridge: 0.0,
            start: None,
            fixed: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub fixed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `None` where the information matrix is singular or the coefficient is fixed.
    pub std_errors: Vec<Option<f64>>,
    pub fixed: Vec<bool>,
    pub loglik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub n_events: usize,
    pub ridge: f64,
    /// Unit vector along which the likelihood is (nearly) flat, if any.
    pub degenerate_direction: Option<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

impl LogitFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.std_errors[i])
    }

    pub fn table(&self) -> Vec<CoefRow> {
        (0..self.names.len())
            .map(|i| CoefRow {
                name: self.names[i].clone(),
                estimate: self.coefficients[i],
                se: self.std_errors[i],
                z: self.std_errors[i].map(|s| self.coefficients[i] / s),
                fixed: self.fixed[i],
            })
            .collect()
    }

    /// `name,estimate,se,z` with empty cells for undefined values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,estimate,se,z")?;
        let cell = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
        for r in self.table() {
            writeln!(w, "{},{},{},{}", r.name, r.estimate, cell(r.se), cell(r.z))?;
        }
        Ok(())
    }
}

/// Standard errors from the negative Hessian over the free coordinates, plus
/// the flattest direction when the information matrix is (near) singular.
pub(crate) fn standard_errors(
    hess: &DMatrix<f64>,
    free: &[usize],
) -> (Vec<Option<f64>>, Option<Vec<f64>>) {
    let d = hess.nrows();
    let mut se = vec![None; d];
    if free.is_empty() {
        return (se, None);
    }
    let info = DMatrix::from_fn(free.len(), free.len(), |a, b| -hess[(free[a], free[b])]);
    let eig = info.clone().symmetric_eigen();
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let lmax = eig.eigenvalues.amax();
    if !(lmin > 1e-10 * lmax.max(1e-300)) || !lmin.is_finite() {
        let mut dir = vec![0.0; d];
        for (a, &f) in free.iter().enumerate() {
            dir[f] = eig.eigenvectors[(a, imin)];
        }
        return (se, Some(dir));
    }
    if let Some(chol) = info.cholesky() {
        let inv = chol.inverse();
        for (a, &f) in free.iter().enumerate() {
            let v = inv[(a, a)];
            if v > 0.0 {
                se[f] = Some(v.sqrt());
            }
        }
    }
    (se, None)
}

/// Fit on an explicit design; `names` labels the coefficients.
pub(crate) fn fit_design(design: &Design, names: &[String], opts: &FitOptions) -> Result<LogitFit> {
    let dim = design.columns.len();
    let mut theta = match &opts.start {
        Some(s) if s.len() != dim => {
            return Err(Error::Dimension {
                expected: dim,
                got: s.len(),
            })
        }
        Some(s) => s.clone(),
        None => vec![0.0; dim],
    };
    let mut fixed = vec![false; dim];
    for (name, &v) in &opts.fixed {
        let i = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("fixed coefficient `{name}` is not a feature")))?;
        fixed[i] = true;
        theta[i] = v;
    }
    let free: Vec<usize> = (0..dim).filter(|&i| !fixed[i]).collect();
    let n_events = design.events.len();
    if n_events == 0 {
        return Err(Error::data("no choice events to fit"));
    }
    let start = design.evaluate(&theta, false, false);
    if !start.zero_events.is_empty() {
        return Err(Error::ZeroLikelihood(start.zero_events));
    }
    let ridge = opts.ridge;
    let base = theta.clone();
    let expand = |x: &[f64]| {
        let mut t = base.clone();
        for (a, &f) in free.iter().enumerate() {
            t[f] = x[a];
        }
        t
    };
    let x0: Vec<f64> = free.iter().map(|&f| theta[f]).collect();
    let result = optim::maximize(
        |x| {
            let t = expand(x);
            let ev = design.evaluate(&t, true, false);
            let pen: f64 = x.iter().map(|v| v * v).sum::<f64>() * ridge / 2.0;
            let g = free
                .iter()
                .enumerate()
                .map(|(a, &f)| ev.grad[f] - ridge * x[a])
                .collect();
            (ev.loglik - pen, g)
        },
        &x0,
        &opts.bfgs,
    );
    theta = expand(&result.x);
    let ev = design.evaluate(&theta, true, true);
    let hess = DMatrix::from_row_slice(dim, dim, &ev.hess);
    let (std_errors, degenerate_direction) = standard_errors(&hess, &free);
    let mut diagnostics = Vec::new();
    if ridge > 0.0 {
        diagnostics.push(format!(
            "ridge penalty {ridge} active; standard errors use the unpenalized Hessian"
        ));
    }
    if let Some(dir) = &degenerate_direction {
        diagnostics.push(format!(
            "information matrix is singular (collinear features or separation) along {dir:?}; standard errors undefined"
        ));
    }
    if !result.converged() {
        diagnostics.push(format!("optimizer stopped: {:?}", result.reason));
        let big = theta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if big > 25.0 {
            let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            diagnostics.push(format!(
                "coefficients diverging (possible separation) along {:?}",
                theta.iter().map(|v| v / norm).collect::<Vec<_>>()
            ));
        }
    }
    Ok(LogitFit {
        names: names.to_vec(),
        coefficients: theta,
        std_errors,
        fixed,
        loglik: ev.loglik,
        grad_norm: free.iter().fold(0.0_f64, |m, &f| m.max(ev.grad[f].abs())),
        iterations: result.iterations,
        converged: result.converged(),
        stop_reason: result.reason,
        n_events,
        ridge,
        degenerate_direction,
        diagnostics,
    })
}

/// Maximum-likelihood conditional logit over all columns of `data`.
pub fn fit(data: &ChoiceData, opts: &FitOptions) -> Result<LogitFit> {
    data.validate()?;
    let cols = all_columns(data);
    fit_design(&Design::new(&data.events, &cols), &data.feature_names, opts)
}

/// Fit only the named columns.
pub fn fit_columns(data: &ChoiceData, names: &[&str], opts: &FitOptions) -> Result<LogitFit> {
    data.validate()?;
    let cols = names
        .iter()
        .map(|n| data.require_column(n))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    fit_design(&Design::new(&data.events, &cols), &labels, opts)
}

/// Column holding raw attachment degrees for the per-degree model.
pub const DEGREE_COLUMN: &str = "degree";
/// Level whose coefficient is pinned to zero.
pub const REFERENCE_DEGREE: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingLevel {
    pub degree: usize,
    pub exposures: f64,
    pub reason: String,
}

/// Per-degree attachment coefficients relative to degree 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonparametricFit {
    /// Coefficient per degree `0..=max_degree`; `None` when undefined.
    pub theta: Vec<Option<f64>>,
    pub std_errors: Vec<Option<f64>>,
    /// Weighted count of alternatives exposed at each degree.
    pub exposures: Vec<f64>,
    /// Weighted count of choices of each degree.
    pub chosen: Vec<f64>,
    pub missing: Vec<MissingLevel>,
    /// The last level also holds every degree above it.
    pub top_coded: bool,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl NonparametricFit {
    pub fn max_degree(&self) -> usize {
        self.theta.len() - 1
    }

    /// `(degree, θ_k, SE)` for every level with a finite estimate and SE.
    pub fn estimated_levels(&self) -> Vec<(usize, f64, f64)> {
        (0..self.theta.len())
            .filter_map(|k| Some((k, self.theta[k]?, self.std_errors[k]?)))
            .collect()
    }
}

struct SparseEvent {
    chosen: usize,
    weight: f64,
    /// (level, multiplicity)
    levels: Vec<(usize, f64)>,
}

pub fn fit_nonparametric_pa(
    data: &ChoiceData,
    max_degree: Option<usize>,
    opts: &BfgsOptions,
) -> Result<NonparametricFit> {
    data.validate()?;
    let col = data.require_column(DEGREE_COLUMN)?;
    if data.is_empty() {
        return Err(Error::data("no choice events to fit"));
    }
    let observed_max = data
        .events
        .iter()
        .flat_map(|e| (0..e.n_alternatives()).map(move |a| e.row(a)[col]))
        .fold(0.0_f64, f64::max) as usize;
    let top = max_degree.unwrap_or(observed_max).max(REFERENCE_DEGREE);
    let levels = top + 1;
    let bin = |x: f64| {
        if x < 0.0 || x.fract() != 0.0 {
            None
        } else {
            Some((x as usize).min(top))
        }
    };
    let mut exposures = vec![0.0; levels];
    let mut chosen = vec![0.0; levels];
    let mut events = Vec::with_capacity(data.len());
    for e in &data.events {
        let w = e.weight.unwrap_or(1.0);
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for a in 0..e.n_alternatives() {
            let b = bin(e.row(a)[col])
                .ok_or_else(|| Error::data(format!("event {}: degree is not a count", e.event)))?;
            *counts.entry(b).or_default() += e.count(a);
        }
        let c = bin(e.row(e.chosen)[col]).unwrap();
        for (&b, &n) in &counts {
            exposures[b] += w * n;
        }
        chosen[c] += w;
        events.push(SparseEvent {
            chosen: c,
            weight: w,
            levels: counts.into_iter().collect(),
        });
    }
    if chosen[REFERENCE_DEGREE] == 0.0 {
        return Err(Error::data(format!(
            "reference degree {REFERENCE_DEGREE} is never chosen; cannot pin the scale"
        )));
    }
    let mut missing = Vec::new();
    // parameter index per level; None = pinned or excluded
    let mut param = vec![None; levels];
    let mut n_free = 0;
    for k in 0..levels {
        if k == REFERENCE_DEGREE {
            continue;
        }
        if exposures[k] == 0.0 {
            missing.push(MissingLevel {
                degree: k,
                exposures: 0.0,
                reason: "never in a choice set".into(),
            });
        } else if chosen[k] == 0.0 {
            missing.push(MissingLevel {
                degree: k,
                exposures: exposures[k],
                reason: "never chosen; estimate diverges to -inf".into(),
            });
        } else {
            param[k] = Some(n_free);
            n_free += 1;
        }
    }
    let usable = |k: usize| k == REFERENCE_DEGREE || param[k].is_some();
    let theta_of = |x: &[f64], k: usize| param[k].map_or(0.0, |p| x[p]);
    let evaluate = |x: &[f64], want_hess: bool| {
        let init = || {
            (
                0.0,
                vec![0.0; n_free],
                vec![0.0; if want_hess { n_free * n_free } else { 0 }],
            )
        };
        par::map_reduce(
            events.len(),
            par::CHUNK,
            init(),
            |range| {
                let (mut ll, mut g, mut h) = init();
                let mut mass = Vec::new();
                for e in &events[range] {
                    let m = e
                        .levels
                        .iter()
                        .filter(|(k, _)| usable(*k))
                        .map(|&(k, _)| theta_of(x, k))
                        .fold(f64::NEG_INFINITY, f64::max);
                    mass.clear();
                    let mut z = 0.0;
                    for &(k, n) in &e.levels {
                        if usable(k) {
                            let v = n * (theta_of(x, k) - m).exp();
                            z += v;
                            mass.push((k, v));
                        }
                    }
                    ll += e.weight * (theta_of(x, e.chosen) - m - z.ln());
                    if let Some(p) = param[e.chosen] {
                        g[p] += e.weight;
                    }
                    for &(k, v) in &mass {
                        if let Some(p) = param[k] {
                            g[p] -= e.weight * v / z;
                        }
                    }
                    if want_hess {
                        for &(k, v) in &mass {
                            let Some(p) = param[k] else { continue };
                            let pk = v / z;
                            h[p * n_free + p] -= e.weight * pk;
                            for &(l, u) in &mass {
                                if let Some(q) = param[l] {
                                    h[p * n_free + q] += e.weight * pk * u / z;
                                }
                            }
                        }
                    }
                }
                (ll, g, h)
            },
            |mut a, b| {
                a.0 += b.0;
                a.1.iter_mut().zip(&b.1).for_each(|(x, y)| *x += y);
                a.2.iter_mut().zip(&b.2).for_each(|(x, y)| *x += y);
                a
            },
        )
    };
    let result = optim::maximize(
        |x| {
            let (ll, g, _) = evaluate(x, false);
            (ll, g)
        },
        &vec![0.0; n_free],
        opts,
    );
    let (loglik, grad, h) = evaluate(&result.x, true);
    let hess = DMatrix::from_row_slice(n_free, n_free, &h);
    let free: Vec<usize> = (0..n_free).collect();
    let (se, _) = standard_errors(&hess, &free);
    let mut theta = vec![None; levels];
    let mut std_errors = vec![None; levels];
    theta[REFERENCE_DEGREE] = Some(0.0);
    for k in 0..levels {
        if let Some(p) = param[k] {
            theta[k] = Some(result.x[p]);
            std_errors[k] = se[p];
        }
    }
    Ok(NonparametricFit {
        theta,
        std_errors,
        exposures,
        chosen,
        missing,
        top_coded: observed_max > top,
        loglik,
        iterations: result.iterations,
        converged: result.converged(),
        grad_norm: grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    })
}
