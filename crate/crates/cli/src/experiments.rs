//! Named experiments. Each writes one CSV per plot panel plus a manifest.

use std::io::Write;

use serde_json::json;

use netchoice::clogit::{self, FitOptions};
use netchoice::evalstats::{
    degree_sequence, lr_test_values, newman_kernel, nonparametric_kernel, pham_ls_alpha,
    powerlaw_mle, powerlaw_mle_ks_scan, KernelEstimate,
};
use netchoice::featurize::{
    extract_choices, negative_sample, ChoiceData, ChoiceFilters, ChoiceSetRule, FeatureSpec,
};
use netchoice::genmodels::{generate, replica_seed, GrowthConfig, Model};
use netchoice::graph::TemporalGraph;
use netchoice::mixlogit::{
    em_fit, fit_copy, fit_local_search, likelihood_surface, write_surface_csv, EmOptions,
    MixtureModel,
};
use netchoice::optim::BfgsOptions;
use netchoice::par;

use crate::artifacts::{Artifacts, ExperimentConfig};
use crate::commands::{write_rows, Context};
use crate::failure::Failure;
use crate::inputs;
use crate::{ExperimentArgs, ExperimentName, GraphArgs};

/// Smallest tail the KS scan may settle on.
const MIN_TAIL: usize = 50;
/// Degrees above this share one coefficient in per-degree fits.
const MAX_DEGREE_LEVELS: usize = 200;

fn synthetic(growth: &GrowthConfig) -> Result<TemporalGraph, Failure> {
    Ok(generate(growth)?.graph)
}

fn choices(
    g: &TemporalGraph,
    features: &str,
    filters: &ChoiceFilters,
) -> Result<ChoiceData, Failure> {
    let spec = FeatureSpec::parse(features)?;
    Ok(extract_choices(g, &spec, ChoiceSetRule::AllNodes, filters)?.0)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `n` evenly spaced points `0, hi/(n-1), .., hi`.
fn steps(n: usize, hi: f64) -> Vec<f64> {
    (0..n).map(|i| hi * i as f64 / (n - 1) as f64).collect()
}

pub fn run(ctx: &Context, a: &ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("experiment");
    cfg.param("experiment", a);
    match a.name {
        ExperimentName::Surface => surface(ctx, cfg, a),
        ExperimentName::Kernel => kernel(ctx, cfg),
        ExperimentName::GammaGrid => gamma_grid(ctx, cfg, a),
        ExperimentName::ModelCompare => model_compare(ctx, cfg),
        ExperimentName::DegreeCurve => degree_curve(ctx, cfg, a),
    }
}

/// Copy-model likelihood over (α, π₁) with the EM path on top.
fn surface(ctx: &Context, mut cfg: ExperimentConfig, a: &ExperimentArgs) -> Result<(), Failure> {
    if a.sample == 0 {
        return Err(Failure::config("--sample must be at least 1"));
    }
    let growth = GrowthConfig::new(Model::Copy { p: 0.5 }, ctx.scaled(10_000, 10), 4, ctx.seed);
    cfg.param("growth", &growth);
    let out = Artifacts::new(&ctx.out, cfg)?;
    let full = choices(&synthetic(&growth)?, "logdeg", &ChoiceFilters::default())?;
    let data = negative_sample(&full, a.sample, ctx.seed)?;
    let start = MixtureModel::free_pa_model(0.5, 0.5);
    let opts = EmOptions {
        starts: a.starts.max(1),
        seed: ctx.seed,
        ..EmOptions::default()
    };
    let em = em_fit(&data, &start, &opts)?;
    let grid = likelihood_surface(&data, &start, 0, &steps(41, 2.0), &steps(41, 1.0))?;
    let best = grid
        .iter()
        .max_by(|x, y| x.loglik.total_cmp(&y.loglik))
        .copied()
        .expect("grid is non-empty");
    out.csv("surface.csv", |w| Ok(write_surface_csv(&grid, w)?))?;
    out.csv("trajectory.csv", |w| Ok(em.write_trajectory_csv(w)?))?;
    out.finish(json!({
        "events": data.len(),
        "em": {
            "alpha": em.model.modes[0].theta[0],
            "pi1": em.model.pi[0],
            "loglik": em.loglik,
            "iterations": em.iterations,
            "converged": em.converged,
        },
        "grid_best": best,
        "truth": { "alpha": 1.0, "pi1": 0.5 },
    }))
}

/// Newman and per-degree logit kernels on linear PA data, with the MLE line.
fn kernel(ctx: &Context, mut cfg: ExperimentConfig) -> Result<(), Failure> {
    let growth = GrowthConfig::new(Model::Pa { alpha: 1.0 }, ctx.scaled(2000, 10), 1, ctx.seed);
    cfg.param("growth", &growth);
    let out = Artifacts::new(&ctx.out, cfg)?;
    let filters = ChoiceFilters {
        compress: true,
        ..ChoiceFilters::default()
    };
    let data = choices(&synthetic(&growth)?, "logdeg,degree", &filters)?;
    let mle = clogit::fit_columns(&data, &["log_degree"], &FitOptions::default())?;
    let alpha = mle.coefficients[0];
    let np = clogit::fit_nonparametric_pa(&data, None, &BfgsOptions::default())?;
    let pham = pham_ls_alpha(&np).ok();
    let newman = KernelEstimate {
        alpha_mle: Some(alpha),
        ..newman_kernel(&data)?
    };
    let logit = KernelEstimate {
        alpha_mle: Some(alpha),
        ..nonparametric_kernel(&np)
    };
    let levels = newman.points.len().max(logit.points.len());
    let rows: Vec<Vec<String>> = (0..levels)
        .map(|k| {
            let nw = newman.points.get(k);
            let lg = logit.points.get(k);
            vec![
                k.to_string(),
                cell(nw.and_then(|p| p.propensity)),
                cell(nw.and_then(|p| p.lo)),
                cell(nw.and_then(|p| p.hi)),
                cell(lg.and_then(|p| p.propensity)),
                cell(lg.and_then(|p| p.lo)),
                cell(lg.and_then(|p| p.hi)),
                cell((k >= 1).then(|| (k as f64).powf(alpha))),
            ]
        })
        .collect();
    out.csv("kernel.csv", |w| {
        write_rows(
            w,
            "degree,newman,newman_lo,newman_hi,nonparametric,np_lo,np_hi,mle_line",
            &rows,
        )
    })?;
    out.csv("kernel_table.csv", |w| {
        newman.write_csv(&mut *w)?;
        let mut buf = Vec::new();
        logit.write_csv(&mut buf)?;
        // second table without its header
        let text = String::from_utf8(buf).expect("utf-8 csv");
        for line in text.lines().skip(1) {
            writeln!(w, "{line}").map_err(crate::artifacts::io_failure)?;
        }
        Ok(())
    })?;
    out.finish(json!({
        "alpha_mle": alpha,
        "alpha_mle_se": mle.std_errors[0],
        "alpha_pham_ls": pham.map(|p| p.slope),
        "alpha_pham_ls_se": pham.map(|p| p.slope_se),
        "converged": mle.converged && np.converged,
    }))
}

/// Power-law exponent of the degree distribution over the (r, p) lattice.
fn gamma_grid(ctx: &Context, mut cfg: ExperimentConfig, a: &ExperimentArgs) -> Result<(), Failure> {
    let n = ctx.scaled(20_000, 10);
    let m = 4;
    let replicas = ((10.0 * ctx.scale).round() as usize).max(1);
    let lattice: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    cfg.param("n", n);
    cfg.param("m", m);
    cfg.param("replicas", replicas);
    cfg.param("lattice", &lattice);
    let out = Artifacts::new(&ctx.out, cfg)?;
    let cells: Vec<(f64, f64)> = lattice
        .iter()
        .flat_map(|&r| lattice.iter().map(move |&p| (r, p)))
        .collect();
    let jobs = cells.len() * replicas;
    let results = par::map_indexed(jobs, |j| {
        let (r, p) = cells[j / replicas];
        let seed = replica_seed(ctx.seed, j as u64);
        let g = generate(&GrowthConfig::new(Model::Rp { r, p }, n, m, seed)).map(|x| x.graph);
        let fit = g.and_then(|g| {
            let deg = degree_sequence(&g);
            if a.xmin == "m" {
                powerlaw_mle(&deg, m as u64)
            } else {
                powerlaw_mle_ks_scan(&deg, MIN_TAIL)
            }
        });
        (r, p, j % replicas, seed, fit.ok())
    });
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(r, p, k, seed, fit)| {
            vec![
                r.to_string(),
                p.to_string(),
                k.to_string(),
                seed.to_string(),
                cell(fit.as_ref().map(|f| f.gamma)),
                fit.as_ref()
                    .map(|f| f.x_min.to_string())
                    .unwrap_or_default(),
                fit.as_ref()
                    .map(|f| f.n_tail.to_string())
                    .unwrap_or_default(),
            ]
        })
        .collect();
    out.csv("gamma.csv", |w| {
        write_rows(w, "r,p,replica,seed,gamma,x_min,n_tail", &rows)
    })?;
    let means: Vec<Vec<String>> = results
        .chunks(replicas)
        .map(|c| {
            let g: Vec<f64> = c
                .iter()
                .filter_map(|x| x.4.as_ref().map(|f| f.gamma))
                .collect();
            let mean = (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64);
            vec![
                c[0].0.to_string(),
                c[0].1.to_string(),
                cell(mean),
                g.len().to_string(),
            ]
        })
        .collect();
    out.csv("gamma_mean.csv", |w| {
        write_rows(w, "r,p,gamma,replicas", &means)
    })?;
    let failed = results.iter().filter(|x| x.4.is_none()).count();
    out.finish(json!({ "cells": cells.len(), "replicas": replicas, "failed_fits": failed }))
}

/// Local-search vs copy model profiles on data from each model.
fn model_compare(ctx: &Context, mut cfg: ExperimentConfig) -> Result<(), Failure> {
    let n = ctx.scaled(20_000, 10);
    let sets = [("r0.5_p1", 0.5, 1.0), ("r1_p0.5", 1.0, 0.5)];
    cfg.param("n", n);
    cfg.param("m", 4);
    let out = Artifacts::new(&ctx.out, cfg)?;
    let filters = ChoiceFilters {
        exclude_first_seen: true,
        compress: true,
        ..ChoiceFilters::default()
    };
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, (name, r, p)) in sets.into_iter().enumerate() {
        let growth = GrowthConfig::new(Model::Rp { r, p }, n, 4, replica_seed(ctx.seed, i as u64));
        let data = choices(&synthetic(&growth)?, "logdeg,fof", &filters)?;
        let ls = fit_local_search(&data)?;
        let cp = fit_copy(&data)?;
        for (model, fit) in [("local-search", &ls), ("copy", &cp)] {
            for &(wt, ll) in &fit.profile {
                rows.push(vec![
                    name.to_string(),
                    model.to_string(),
                    wt.to_string(),
                    ll.to_string(),
                ]);
            }
        }
        let (winner, null, alt) = if ls.loglik >= cp.loglik {
            ("local-search", cp.loglik, ls.loglik)
        } else {
            ("copy", ls.loglik, cp.loglik)
        };
        summary.push(json!({
            "data": name,
            "growth": growth,
            "events": data.len(),
            "local_search": { "r": ls.estimate, "loglik": ls.loglik },
            "copy": { "p": cp.estimate, "loglik": cp.loglik },
            "winner": winner,
            "lr": lr_test_values(null, alt, 1)?,
        }));
    }
    out.csv("profile.csv", |w| {
        write_rows(w, "data,model,weight,loglik", &rows)
    })?;
    out.finish(summary)
}

/// Chance of being chosen by degree: per-degree fit against the
/// log-degree plus has-degree model and a linear reference.
fn degree_curve(
    ctx: &Context,
    mut cfg: ExperimentConfig,
    a: &ExperimentArgs,
) -> Result<(), Failure> {
    let g = match &a.edges {
        Some(edges) => {
            let args = GraphArgs {
                edges: edges.clone(),
                nodes: a.nodes.clone(),
                directed: None,
                skip_malformed: false,
            };
            inputs::load_graph(&mut cfg, &args)?.graph
        }
        None => {
            let growth =
                GrowthConfig::new(Model::Copy { p: 0.5 }, ctx.scaled(2000, 10), 2, ctx.seed)
                    .directed(true);
            cfg.param("growth", &growth);
            synthetic(&growth)?
        }
    };
    let out = Artifacts::new(&ctx.out, cfg)?;
    let filters = ChoiceFilters {
        compress: true,
        ..ChoiceFilters::default()
    };
    let data = choices(&g, "logdeg,hasdeg,degree", &filters)?;
    let fit = clogit::fit_columns(&data, &["log_degree", "has_degree"], &FitOptions::default())?;
    let (alpha, has) = (fit.coefficients[0], fit.coefficients[1]);
    let np = clogit::fit_nonparametric_pa(&data, Some(MAX_DEGREE_LEVELS), &BfgsOptions::default())?;
    let kernel = nonparametric_kernel(&np);
    let rows: Vec<Vec<String>> = kernel
        .points
        .iter()
        .map(|p| {
            let k = p.degree as f64;
            let parametric = if p.degree == 0 {
                (-has).exp()
            } else {
                k.powf(alpha)
            };
            vec![
                p.degree.to_string(),
                cell(p.propensity),
                cell(p.lo),
                cell(p.hi),
                parametric.to_string(),
                k.to_string(),
            ]
        })
        .collect();
    out.csv("curve.csv", |w| {
        write_rows(w, "degree,nonparametric,lo,hi,parametric,linear", &rows)
    })?;
    out.json("fit.json", &fit)?;
    out.finish(json!({
        "events": data.len(),
        "alpha": alpha,
        "has_degree": has,
        "top_coded": np.top_coded,
        "converged": fit.converged && np.converged,
    }))
}
