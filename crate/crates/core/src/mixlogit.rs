//! Latent-class mixtures of conditional logits, fitted by EM.
//!
//! Each mode scores the stored choice set with its own features and may
//! restrict it to friends of friends, renormalizing over that subset.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::clogit::{fit_design, Design, FitOptions};
use crate::error::{Error, Result};
use crate::featurize::ChoiceData;
use crate::optim::golden_max;
use crate::par;

/// Column flagging friend-of-friend alternatives.
pub const FOF_COLUMN: &str = "is_fof";
/// Column used as the attachment utility of PA modes.
pub const LOG_DEGREE_COLUMN: &str = "log_degree";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeFilter {
    #[default]
    All,
    FofOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub name: String,
    /// Data columns scored by this mode; empty means uniform.
    pub features: Vec<String>,
    #[serde(default)]
    pub filter: ModeFilter,
    pub theta: Vec<f64>,
    /// Coefficients held fixed during fitting.
    pub frozen: Vec<bool>,
}

impl Mode {
    pub fn uniform(name: &str, filter: ModeFilter) -> Self {
        Mode {
            name: name.into(),
            features: Vec::new(),
            filter,
            theta: Vec::new(),
            frozen: Vec::new(),
        }
    }

    pub fn logit(name: &str, features: &[&str], theta: &[f64], filter: ModeFilter) -> Self {
        Mode {
            name: name.into(),
            features: features.iter().map(|s| s.to_string()).collect(),
            filter,
            theta: theta.to_vec(),
            frozen: vec![false; theta.len()],
        }
    }

    /// Linear preferential attachment (`θ = 1` on log-degree, frozen).
    pub fn linear_pa(name: &str, filter: ModeFilter) -> Self {
        Mode {
            frozen: vec![true],
            ..Mode::logit(name, &[LOG_DEGREE_COLUMN], &[1.0], filter)
        }
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = vec![true; self.theta.len()];
        self
    }

    pub fn is_fixed(&self) -> bool {
        self.frozen.iter().all(|&f| f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub modes: Vec<Mode>,
    pub pi: Vec<f64>,
}

impl MixtureModel {
    /// Equal class probabilities.
    pub fn new(modes: Vec<Mode>) -> Self {
        let m = modes.len().max(1);
        MixtureModel {
            pi: vec![1.0 / m as f64; modes.len()],
            modes,
        }
    }

    /// Uniform over all nodes (weight `p`) and linear PA (weight `1 - p`).
    pub fn copy_model(p: f64) -> Self {
        MixtureModel {
            modes: vec![
                Mode::uniform("uniform", ModeFilter::All),
                Mode::linear_pa("pa", ModeFilter::All),
            ],
            pi: vec![p, 1.0 - p],
        }
    }

    /// PA with a free exponent (weight `pi1`) against uniform attachment.
    pub fn free_pa_model(alpha: f64, pi1: f64) -> Self {
        MixtureModel {
            modes: vec![
                Mode::logit("pa", &[LOG_DEGREE_COLUMN], &[alpha], ModeFilter::All),
                Mode::uniform("uniform", ModeFilter::All),
            ],
            pi: vec![pi1, 1.0 - pi1],
        }
    }

    /// Uniform over all nodes (weight `r`) and uniform over FoFs (`1 - r`).
    pub fn local_search(r: f64) -> Self {
        MixtureModel {
            modes: vec![
                Mode::uniform("uniform-all", ModeFilter::All),
                Mode::uniform("uniform-fof", ModeFilter::FofOnly),
            ],
            pi: vec![r, 1.0 - r],
        }
    }

    /// {uniform, PA} x {all nodes, FoF only} with weights from `(r, p)`.
    pub fn rp(r: f64, p: f64) -> Self {
        MixtureModel {
            modes: vec![
                Mode::uniform("uniform-all", ModeFilter::All),
                Mode::linear_pa("pa-all", ModeFilter::All),
                Mode::uniform("uniform-fof", ModeFilter::FofOnly),
                Mode::linear_pa("pa-fof", ModeFilter::FofOnly),
            ],
            pi: vec![r * p, r * (1.0 - p), (1.0 - r) * p, (1.0 - r) * (1.0 - p)],
        }
    }

    /// `(r, p)` implied by the class probabilities of [`MixtureModel::rp`].
    pub fn rp_parameters(&self) -> Option<(f64, f64)> {
        (self.modes.len() == 4).then(|| (self.pi[0] + self.pi[1], self.pi[0] + self.pi[2]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::config("mixture needs at least one mode"));
        }
        if self.pi.len() != self.modes.len() {
            return Err(Error::Dimension {
                expected: self.modes.len(),
                got: self.pi.len(),
            });
        }
        let sum: f64 = self.pi.iter().sum();
        if self.pi.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "class probabilities {:?} do not form a distribution",
                self.pi
            )));
        }
        for m in &self.modes {
            if m.theta.len() != m.features.len() || m.frozen.len() != m.features.len() {
                return Err(Error::config(format!(
                    "mode `{}`: coefficient and feature counts differ",
                    m.name
                )));
            }
        }
        Ok(())
    }
}

struct Resolved {
    columns: Vec<usize>,
    subset: Option<usize>,
}

fn resolve(model: &MixtureModel, data: &ChoiceData) -> Result<Vec<Resolved>> {
    model.validate()?;
    model
        .modes
        .iter()
        .map(|m| {
            let columns = m
                .features
                .iter()
                .map(|f| data.require_column(f))
                .collect::<Result<Vec<_>>>()?;
            let subset = match m.filter {
                ModeFilter::All => None,
                ModeFilter::FofOnly => Some(data.require_column(FOF_COLUMN)?),
            };
            Ok(Resolved { columns, subset })
        })
        .collect()
}

fn design<'a>(data: &'a ChoiceData, r: &'a Resolved) -> Design<'a> {
    Design {
        subset: r.subset,
        ..Design::new(&data.events, &r.columns)
    }
}

fn event_weights(data: &ChoiceData) -> Vec<f64> {
    data.events
        .iter()
        .map(|e| e.weight.unwrap_or(1.0))
        .collect()
}

/// `log Σ_m π_m exp(l_m)` for one event.
fn log_mix(pi: &[f64], logl: &[Vec<f64>], k: usize) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for (p, l) in pi.iter().zip(logl) {
        if *p > 0.0 {
            m = m.max(p.ln() + l[k]);
        }
    }
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = pi
        .iter()
        .zip(logl)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| (p.ln() + l[k] - m).exp())
        .sum();
    m + s.ln()
}

fn total_loglik(pi: &[f64], logl: &[Vec<f64>], w: &[f64]) -> f64 {
    par::map_reduce(
        w.len(),
        par::CHUNK,
        0.0,
        |range| range.map(|k| w[k] * log_mix(pi, logl, k)).sum::<f64>(),
        |a, b| a + b,
    )
}

fn zero_events(data: &ChoiceData, logl: &[Vec<f64>]) -> Vec<u64> {
    (0..data.len())
        .filter(|&k| logl.iter().all(|l| l[k] == f64::NEG_INFINITY))
        .map(|k| data.events[k].event)
        .collect()
}

/// Per-event posterior class probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    pub n_modes: usize,
    /// Row-major `events x modes`.
    pub gamma: Vec<f64>,
}

impl Responsibilities {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.gamma[k * self.n_modes..(k + 1) * self.n_modes]
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.gamma
            .iter()
            .skip(m)
            .step_by(self.n_modes)
            .copied()
            .collect()
    }

    /// Weighted column means.
    pub fn class_means(&self, w: &[f64]) -> Vec<f64> {
        let total: f64 = w.iter().sum();
        (0..self.n_modes)
            .map(|m| {
                w.iter()
                    .enumerate()
                    .map(|(k, wk)| wk * self.gamma[k * self.n_modes + m])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }
}

fn responsibilities(pi: &[f64], logl: &[Vec<f64>], n: usize) -> Responsibilities {
    let modes = pi.len();
    let rows = par::map_chunks(n, par::CHUNK, |range| {
        let mut out = Vec::with_capacity(range.len() * modes);
        for k in range {
            let lse = log_mix(pi, logl, k);
            for m in 0..modes {
                out.push(if pi[m] > 0.0 {
                    (pi[m].ln() + logl[m][k] - lse).exp()
                } else {
                    0.0
                });
            }
        }
        out
    });
    Responsibilities {
        n_modes: modes,
        gamma: rows.concat(),
    }
}

fn mode_logliks(data: &ChoiceData, model: &MixtureModel, res: &[Resolved]) -> Vec<Vec<f64>> {
    model
        .modes
        .iter()
        .zip(res)
        .map(|(m, r)| design(data, r).event_logliks(&m.theta))
        .collect()
}

/// `Σ_k log Σ_m π_m L^m_k`; -inf if some event is impossible under every mode.
pub fn mixture_loglik(model: &MixtureModel, data: &ChoiceData) -> Result<f64> {
    data.validate()?;
    let res = resolve(model, data)?;
    let logl = mode_logliks(data, model, &res);
    Ok(total_loglik(&model.pi, &logl, &event_weights(data)))
}

/// Posterior mode memberships under `model`.
pub fn e_step(model: &MixtureModel, data: &ChoiceData) -> Result<Responsibilities> {
    let res = resolve(model, data)?;
    let logl = mode_logliks(data, model, &res);
    Ok(responsibilities(&model.pi, &logl, data.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Stop when the total log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of starts; the first uses the supplied model as given, later
    /// ones draw random initial responsibilities.
    pub starts: usize,
    pub seed: u64,
    /// Class probability below which a mode is reported as degenerate.
    pub degenerate_pi: f64,
    pub fit: FitOptions,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-7,
            max_iter: 1000,
            starts: 5,
            seed: 0,
            degenerate_pi: 1e-6,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmStep {
    pub pi: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    pub loglik: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub model: MixtureModel,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Iterates of the winning start, starting with the initial point.
    pub trajectory: Vec<EmStep>,
    pub degenerate_modes: Vec<usize>,
    pub start_logliks: Vec<f64>,
    pub best_start: usize,
}

impl EmFit {
    /// `iteration,loglik,pi_0..,theta_<mode>_<feature>..`
    pub fn write_trajectory_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["iteration".to_string(), "loglik".to_string()];
        header.extend((0..self.model.modes.len()).map(|m| format!("pi_{m}")));
        for m in &self.model.modes {
            header.extend(m.features.iter().map(|f| format!("theta_{}_{}", m.name, f)));
        }
        writeln!(w, "{}", header.join(","))?;
        for (i, s) in self.trajectory.iter().enumerate() {
            let mut row = vec![i.to_string(), s.loglik.to_string()];
            row.extend(s.pi.iter().map(f64::to_string));
            row.extend(s.thetas.iter().flatten().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn m_step_mode(
    data: &ChoiceData,
    res: &Resolved,
    mode: &mut Mode,
    gamma: &[f64],
    opts: &FitOptions,
) -> Result<()> {
    if mode.is_fixed() {
        return Ok(());
    }
    let mut fit_opts = opts.clone();
    fit_opts.start = Some(mode.theta.clone());
    fit_opts.fixed = mode
        .features
        .iter()
        .zip(&mode.theta)
        .zip(&mode.frozen)
        .filter(|(_, &f)| f)
        .map(|((n, &t), _)| (n.clone(), t))
        .collect();
    let d = Design {
        weights: Some(gamma),
        ..design(data, res)
    };
    let fit = fit_design(&d, &mode.features, &fit_opts)?;
    mode.theta = fit.coefficients;
    Ok(())
}

fn run_em(
    data: &ChoiceData,
    res: &[Resolved],
    mut model: MixtureModel,
    initial_gamma: Option<Responsibilities>,
    opts: &EmOptions,
) -> Result<EmFit> {
    let w = event_weights(data);
    let n_modes = model.modes.len();
    let mut logl = mode_logliks(data, &model, res);
    if let Some(gamma) = initial_gamma {
        model.pi = gamma.class_means(&w);
        for m in 0..n_modes {
            m_step_mode(
                data,
                &res[m],
                &mut model.modes[m],
                &gamma.column(m),
                &opts.fit,
            )?;
            logl[m] = design(data, &res[m]).event_logliks(&model.modes[m].theta);
        }
    }
    let snapshot = |model: &MixtureModel, loglik| EmStep {
        pi: model.pi.clone(),
        thetas: model.modes.iter().map(|m| m.theta.clone()).collect(),
        loglik,
    };
    let mut ll = total_loglik(&model.pi, &logl, &w);
    let mut trajectory = vec![snapshot(&model, ll)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let gamma = responsibilities(&model.pi, &logl, data.len());
        model.pi = gamma.class_means(&w);
        for m in 0..n_modes {
            if model.pi[m] < opts.degenerate_pi || model.modes[m].is_fixed() {
                continue;
            }
            m_step_mode(
                data,
                &res[m],
                &mut model.modes[m],
                &gamma.column(m),
                &opts.fit,
            )?;
            logl[m] = design(data, &res[m]).event_logliks(&model.modes[m].theta);
        }
        let next = total_loglik(&model.pi, &logl, &w);
        assert!(
            next >= ll - 1e-9 * ll.abs().max(1.0),
            "EM decreased the log-likelihood: {ll} -> {next}"
        );
        trajectory.push(snapshot(&model, next));
        let delta = (next - ll).abs();
        ll = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let degenerate_modes = (0..n_modes)
        .filter(|&m| model.pi[m] < opts.degenerate_pi)
        .collect();
    Ok(EmFit {
        model,
        loglik: ll,
        iterations,
        converged,
        trajectory,
        degenerate_modes,
        start_logliks: Vec::new(),
        best_start: 0,
    })
}

fn random_responsibilities(n: usize, modes: usize, seed: u64, start: u64) -> Responsibilities {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start);
    let mut gamma = Vec::with_capacity(n * modes);
    for _ in 0..n {
        let row: Vec<f64> = (0..modes).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = row.iter().sum();
        gamma.extend(row.iter().map(|x| x / s));
    }
    Responsibilities {
        n_modes: modes,
        gamma,
    }
}

/// EM with multiple starts; returns the best-likelihood run.
pub fn em_fit(data: &ChoiceData, model: &MixtureModel, opts: &EmOptions) -> Result<EmFit> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::data("no choice events to fit"));
    }
    let res = resolve(model, data)?;
    let logl = mode_logliks(data, model, &res);
    let zero = zero_events(data, &logl);
    if !zero.is_empty() {
        return Err(Error::ZeroLikelihood(zero));
    }
    let mut best: Option<EmFit> = None;
    let mut start_logliks = Vec::new();
    for s in 0..opts.starts.max(1) {
        let init = (s > 0)
            .then(|| random_responsibilities(data.len(), model.modes.len(), opts.seed, s as u64));
        let run = run_em(data, &res, model.clone(), init, opts)?;
        start_logliks.push(run.loglik);
        if best.as_ref().is_none_or(|b| run.loglik > b.loglik) {
            best = Some(EmFit {
                best_start: s,
                ..run
            });
        }
    }
    let mut best = best.unwrap();
    best.start_logliks = start_logliks;
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub pi1: f64,
    pub loglik: f64,
}

/// Exact log-likelihood over a grid of (coefficient `coef` of mode 0, π of
/// mode 0) for a two-mode model; mode 1 gets `1 - π`.
pub fn likelihood_surface(
    data: &ChoiceData,
    model: &MixtureModel,
    coef: usize,
    alphas: &[f64],
    pis: &[f64],
) -> Result<Vec<SurfacePoint>> {
    data.validate()?;
    if model.modes.len() != 2 {
        return Err(Error::config("likelihood surface needs a two-mode model"));
    }
    if coef >= model.modes[0].theta.len() {
        return Err(Error::config("surface coefficient index out of range"));
    }
    if pis.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::config("class probabilities must lie in [0, 1]"));
    }
    let res = resolve(model, data)?;
    let w = event_weights(data);
    let other = design(data, &res[1]).event_logliks(&model.modes[1].theta);
    let rows = par::map_indexed(alphas.len(), |i| {
        let mut theta = model.modes[0].theta.clone();
        theta[coef] = alphas[i];
        let mine = design(data, &res[0]).event_logliks(&theta);
        let logl = [mine, other.clone()];
        pis.iter()
            .map(|&p| SurfacePoint {
                alpha: alphas[i],
                pi1: p,
                loglik: total_loglik(&[p, 1.0 - p], &logl, &w),
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.concat())
}

pub fn write_surface_csv<W: Write>(points: &[SurfacePoint], mut w: W) -> Result<()> {
    writeln!(w, "alpha,pi1,loglik")?;
    for p in points {
        writeln!(w, "{},{},{}", p.alpha, p.pi1, p.loglik)?;
    }
    Ok(())
}

/// One-dimensional profile over a class probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    pub estimate: f64,
    pub loglik: f64,
    /// `(probability, log-likelihood)` on an even grid over `[0, 1]`.
    pub profile: Vec<(f64, f64)>,
    pub model: MixtureModel,
}

const PROFILE_POINTS: usize = 101;

/// Maximize over the weight of mode 0 in a two-mode model with fixed modes.
pub fn profile_fit(data: &ChoiceData, model: &MixtureModel) -> Result<ProfileFit> {
    data.validate()?;
    if model.modes.len() != 2 {
        return Err(Error::config("profile fit needs a two-mode model"));
    }
    let res = resolve(model, data)?;
    let logl = mode_logliks(data, model, &res);
    let zero = zero_events(data, &logl);
    if !zero.is_empty() {
        return Err(Error::ZeroLikelihood(zero));
    }
    let w = event_weights(data);
    let at = |p: f64| total_loglik(&[p, 1.0 - p], &logl, &w);
    // the profile is concave in p
    let (estimate, loglik) = golden_max(at, 0.0, 1.0, 1e-9);
    let profile = (0..PROFILE_POINTS)
        .map(|i| {
            let p = i as f64 / (PROFILE_POINTS - 1) as f64;
            (p, at(p))
        })
        .collect();
    let mut fitted = model.clone();
    fitted.pi = vec![estimate, 1.0 - estimate];
    Ok(ProfileFit {
        estimate,
        loglik,
        profile,
        model: fitted,
    })
}

/// Local-search model: returns `r̂`, the weight of uniform-over-all-nodes.
pub fn fit_local_search(data: &ChoiceData) -> Result<ProfileFit> {
    profile_fit(data, &MixtureModel::local_search(0.5))
}

/// Copy model: returns `p̂`, the weight of the uniform mode against linear PA.
pub fn fit_copy(data: &ChoiceData) -> Result<ProfileFit> {
    profile_fit(data, &MixtureModel::copy_model(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clogit::{self, FitOptions};
    use crate::featurize::ChoiceEvent;
    use crate::graph::NodeId;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_data(seed: u64, events: usize) -> ChoiceData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let evs = (0..events)
            .map(|k| {
                let n = rng.random_range(2..7);
                let mut features = Vec::new();
                for a in 0..n {
                    let fof = if a == 0 {
                        1.0
                    } else {
                        rng.random_range(0..2) as f64
                    };
                    features.extend([rng.random_range(0.0..3.0), fof]);
                }
                ChoiceEvent {
                    event: k as u64,
                    chooser: NodeId(100),
                    chosen: rng.random_range(0..n),
                    alternatives: (0..n as u32).map(NodeId).collect(),
                    features,
                    n_features: 2,
                    weight: None,
                    counts: None,
                }
            })
            .collect();
        ChoiceData {
            feature_names: vec![LOG_DEGREE_COLUMN.into(), FOF_COLUMN.into()],
            events: evs,
        }
    }

    /// Naive per-event mixture likelihood.
    fn naive(model: &MixtureModel, d: &ChoiceData) -> f64 {
        d.events
            .iter()
            .map(|e| {
                let mut total = 0.0;
                for (mode, p) in model.modes.iter().zip(&model.pi) {
                    let keep = |a: usize| mode.filter == ModeFilter::All || e.row(a)[1] != 0.0;
                    if !keep(e.chosen) {
                        continue;
                    }
                    let u = |a: usize| {
                        mode.features
                            .iter()
                            .zip(&mode.theta)
                            .map(|(f, t)| t * e.row(a)[if f == LOG_DEGREE_COLUMN { 0 } else { 1 }])
                            .sum::<f64>()
                            .exp()
                    };
                    let z: f64 = (0..e.n_alternatives()).filter(|&a| keep(a)).map(u).sum();
                    total += p * u(e.chosen) / z;
                }
                total.ln()
            })
            .sum()
    }

    #[test]
    fn matches_naive_summation() {
        let d = random_data(1, 30);
        let mut model = MixtureModel::rp(0.3, 0.6);
        model.modes[1].theta = vec![0.7];
        model.modes[3].theta = vec![1.4];
        // chosen alternative may fall outside the FoF subset in some events
        assert_relative_eq!(
            mixture_loglik(&model, &d).unwrap(),
            naive(&model, &d),
            epsilon = 1e-10
        );
    }

    #[test]
    fn degenerate_weights_and_identical_modes() {
        let d = random_data(2, 25);
        let model = MixtureModel {
            pi: vec![1.0, 0.0],
            ..MixtureModel::free_pa_model(0.8, 0.5)
        };
        let single = clogit::log_likelihood(&[0.8, 0.0], &d).unwrap();
        assert_relative_eq!(mixture_loglik(&model, &d).unwrap(), single, epsilon = 1e-10);
        let uu = MixtureModel {
            modes: vec![
                Mode::uniform("a", ModeFilter::All),
                Mode::uniform("b", ModeFilter::All),
            ],
            pi: vec![0.37, 0.63],
        };
        let uniform = -d
            .events
            .iter()
            .map(|e| (e.n_alternatives() as f64).ln())
            .sum::<f64>();
        assert_relative_eq!(mixture_loglik(&uu, &d).unwrap(), uniform, epsilon = 1e-10);
    }

    #[test]
    fn single_mode_em_equals_clogit_fit() {
        let d = random_data(3, 60).select(&[LOG_DEGREE_COLUMN]).unwrap();
        let model = MixtureModel::new(vec![Mode::logit(
            "pa",
            &[LOG_DEGREE_COLUMN],
            &[0.0],
            ModeFilter::All,
        )]);
        let em = em_fit(
            &d,
            &model,
            &EmOptions {
                starts: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let direct = clogit::fit(&d, &FitOptions::default()).unwrap();
        assert_relative_eq!(
            em.model.modes[0].theta[0],
            direct.coefficients[0],
            epsilon = 1e-6
        );
        assert_relative_eq!(em.loglik, direct.loglik, epsilon = 1e-9);
    }

    #[test]
    fn em_fixed_point_matches_grid_on_toy() {
        let d = random_data(4, 3);
        let model = MixtureModel::free_pa_model(0.5, 0.5);
        let em = em_fit(&d, &model, &EmOptions::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        for i in 0..=300 {
            for j in 0..=100 {
                let m = MixtureModel {
                    pi: vec![j as f64 / 100.0, 1.0 - j as f64 / 100.0],
                    ..MixtureModel::free_pa_model(-10.0 + i as f64 / 15.0, 0.5)
                };
                best = best.max(naive(&m, &d));
            }
        }
        assert!(em.loglik >= best - 1e-3, "em {} grid {}", em.loglik, best);
    }

    #[test]
    fn rejects_events_impossible_under_every_mode() {
        let mut d = random_data(5, 10);
        // chosen alternative outside the FoF subset
        let e = &mut d.events[3];
        e.chosen = 1;
        e.features[3] = 0.0;
        let model = MixtureModel::new(vec![Mode::uniform("fof", ModeFilter::FofOnly)]);
        match em_fit(&d, &model, &EmOptions::default()) {
            Err(Error::ZeroLikelihood(ev)) => assert!(ev.contains(&3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn responsibilities_and_pi_identity() {
        let d = random_data(6, 40);
        let model = MixtureModel::rp(0.4, 0.5);
        let g = e_step(&model, &d).unwrap();
        for k in 0..d.len() {
            assert_relative_eq!(g.row(k).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert!(g.row(k).iter().all(|x| (0.0..=1.0).contains(x)));
        }
        let em = em_fit(
            &d,
            &model,
            &EmOptions {
                starts: 1,
                max_iter: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let means = g.class_means(&vec![1.0; d.len()]);
        for (a, b) in em.trajectory[1].pi.iter().zip(&means) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn frozen_coefficients_never_move() {
        let d = random_data(7, 40);
        let mut model = MixtureModel::free_pa_model(0.3, 0.5);
        model.modes[0].frozen = vec![true];
        let em = em_fit(&d, &model, &EmOptions::default()).unwrap();
        assert!(em.trajectory.iter().all(|s| s.thetas[0] == vec![0.3]));
    }

    #[test]
    fn surface_point_equals_mixture_loglik() {
        let d = random_data(8, 20);
        let model = MixtureModel::free_pa_model(0.0, 0.5);
        let s = likelihood_surface(&d, &model, 0, &[0.9], &[0.35]).unwrap();
        let m = MixtureModel {
            pi: vec![0.35, 0.65],
            ..MixtureModel::free_pa_model(0.9, 0.5)
        };
        assert_relative_eq!(
            s[0].loglik,
            mixture_loglik(&m, &d).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn profile_matches_em_for_fixed_modes() {
        let d = random_data(9, 80);
        let p = fit_copy(&d).unwrap();
        let em = em_fit(
            &d,
            &MixtureModel::copy_model(0.5),
            &EmOptions {
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((p.estimate - em.model.pi[0]).abs() < 1e-4);
        assert!(p.loglik >= em.loglik - 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn em_is_monotone_and_permutation_symmetric(seed in any::<u64>()) {
            let d = random_data(seed, 30);
            let a = MixtureModel {
                modes: vec![
                    Mode::logit("pa", &[LOG_DEGREE_COLUMN], &[0.5], ModeFilter::All),
                    Mode::uniform("fof", ModeFilter::FofOnly),
                ],
                pi: vec![0.5, 0.5],
            };
            let b = MixtureModel { modes: vec![a.modes[1].clone(), a.modes[0].clone()], pi: vec![0.5, 0.5] };
            let opts = EmOptions { starts: 1, tol: 1e-10, ..Default::default() };
            let fa = em_fit(&d, &a, &opts).unwrap();
            let fb = em_fit(&d, &b, &opts).unwrap();
            for w in fa.trajectory.windows(2) {
                prop_assert!(w[1].loglik >= w[0].loglik - 1e-9 * w[0].loglik.abs().max(1.0));
            }
            prop_assert!((fa.model.pi[0] - fb.model.pi[1]).abs() < 1e-6);
            prop_assert!((fa.model.modes[0].theta[0] - fb.model.modes[1].theta[0]).abs() < 1e-4);
        }

        #[test]
        fn shared_unrestricted_spec_is_degenerate(seed in any::<u64>(), p in 0.0..1.0f64) {
            let d = random_data(seed, 15);
            let mode = Mode::logit("pa", &[LOG_DEGREE_COLUMN], &[0.6], ModeFilter::All);
            let mix = MixtureModel { modes: vec![mode.clone(), Mode { name: "b".into(), ..mode.clone() }], pi: vec![p, 1.0 - p] };
            let one = MixtureModel::new(vec![mode]);
            prop_assert!((mixture_loglik(&mix, &d).unwrap() - mixture_loglik(&one, &d).unwrap()).abs() < 1e-9);
        }
    }
}
