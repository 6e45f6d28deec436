use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use netchoice::clogit::{self, FitOptions, LogitFit};
use netchoice::evalstats::{self, nonparametric_kernel};
use netchoice::featurize::ChoiceData;
use netchoice::genmodels::{generate, FitnessDist, GrowthConfig, LatentSpace, Model};
use netchoice::io::{write_choices, write_edge_list, write_node_meta, ChoiceHeader};
use netchoice::mixlogit::{em_fit, EmOptions, MixtureModel};
use netchoice::optim::BfgsOptions;

use crate::artifacts::{io_failure, Artifacts, ExperimentConfig};
use crate::failure::Failure;
use crate::inputs::{self, open};
use crate::{DataArgs, EmArgs, ExtractArgs, FitArgs, GraphArgs, MixtureName, ModelName, SynthArgs};

pub struct Context {
    pub seed: u64,
    pub scale: f64,
    pub out: PathBuf,
}

impl Context {
    pub fn config(&self, command: &str) -> ExperimentConfig {
        ExperimentConfig::new(command, self.seed, self.scale)
    }

    /// `n` shrunk by `--scale`, never below `floor`.
    pub fn scaled(&self, n: usize, floor: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(floor)
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, model: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::config(format!("--{flag} is required for model {model}")))
}

fn parse_space(s: &str) -> Result<LatentSpace, Failure> {
    let bad = || Failure::config(format!("--space expects `circle` or `tree:B:D`, got {s:?}"));
    match s.split(':').collect::<Vec<_>>().as_slice() {
        ["circle"] => Ok(LatentSpace::Circle),
        ["tree", b, d] => Ok(LatentSpace::Tree {
            branching: b.parse().map_err(|_| bad())?,
            depth: d.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn parse_fitness(s: &str) -> Result<FitnessDist, Failure> {
    let bad = || {
        Failure::config(format!(
            "--fitness expects `exp:RATE` or `normal:MEAN:SD`, got {s:?}"
        ))
    };
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    match s.split(':').collect::<Vec<_>>().as_slice() {
        ["exp", rate] => Ok(FitnessDist::Exponential { rate: num(rate)? }),
        ["normal", mean, sd] => Ok(FitnessDist::Normal {
            mean: num(mean)?,
            sd: num(sd)?,
        }),
        _ => Err(bad()),
    }
}

pub fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("--{flag}: bad number {x:?}")))
        })
        .collect()
}

fn synth_model(a: &SynthArgs) -> Result<Model, Failure> {
    let name = format!("{:?}", a.model).to_lowercase();
    Ok(match a.model {
        ModelName::Uniform => Model::Uniform,
        ModelName::Pa => Model::Pa {
            alpha: a.alpha.unwrap_or(1.0),
        },
        ModelName::NonparametricPa => Model::NonparametricPa {
            theta: parse_list(
                a.theta.as_deref().ok_or_else(|| {
                    Failure::config("--theta is required for model nonparametric-pa")
                })?,
                "theta",
            )?,
        },
        ModelName::Fitness => Model::Fitness {
            dist: a
                .fitness
                .as_deref()
                .map(parse_fitness)
                .transpose()?
                .unwrap_or_default(),
        },
        ModelName::Copy => Model::Copy {
            p: need(a.p, "p", &name)?,
        },
        ModelName::LocalSearch => Model::LocalSearch {
            r: need(a.r, "r", &name)?,
        },
        ModelName::Rp => Model::Rp {
            r: need(a.r, "r", &name)?,
            p: need(a.p, "p", &name)?,
        },
        ModelName::Homophily => Model::Homophily {
            h: need(a.h, "h", &name)?,
            groups: a.groups.unwrap_or(2),
        },
        ModelName::Latent => Model::Latent {
            space: a
                .space
                .as_deref()
                .map(parse_space)
                .transpose()?
                .unwrap_or(LatentSpace::Circle),
            c: need(a.c, "c", &name)?,
        },
    })
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<(), Failure> {
    let model = synth_model(a)?;
    let n = ctx.scaled(a.n, a.m + 1);
    let growth = GrowthConfig::new(model, n, a.m, ctx.seed).directed(a.directed);
    let mut cfg = ctx.config("synth");
    cfg.param("growth", &growth);
    let out = Artifacts::new(&ctx.out, cfg)?;
    let generated = generate(&growth)?;
    let g = &generated.graph;
    out.raw("edges.csv", |w| {
        Ok(write_edge_list(g, None, &out.directives(), w)?)
    })?;
    out.csv("nodes.csv", |w| Ok(write_node_meta(g, None, w)?))?;
    out.finish(json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "directed": g.is_directed(),
        "stats": generated.stats,
    }))
}

pub fn ingest(ctx: &Context, g: &GraphArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("ingest");
    let ds = inputs::load_graph(&mut cfg, g)?;
    let out = Artifacts::new(&ctx.out, cfg)?;
    out.raw("edges.csv", |w| {
        Ok(write_edge_list(
            &ds.graph,
            Some(&ds.symbols),
            &out.directives(),
            w,
        )?)
    })?;
    out.csv("nodes.csv", |w| {
        Ok(write_node_meta(&ds.graph, Some(&ds.symbols), w)?)
    })?;
    out.json(
        "ingest.json",
        json!({ "report": ds.report, "warnings": ds.report.warnings() }),
    )?;
    out.finish(&ds.report)
}

fn choice_header(out: &Artifacts, data: &ChoiceData) -> ChoiceHeader {
    ChoiceHeader {
        config_hash: Some(out.hash().to_string()),
        seed: Some(out.seed()),
        config: Some(out.config().to_value()),
        ..ChoiceHeader::new(data.feature_names.clone())
    }
}

pub fn extract(ctx: &Context, g: &GraphArgs, a: &ExtractArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("extract");
    let ds = inputs::load_graph(&mut cfg, g)?;
    let (data, report) = inputs::extract(&mut cfg, &ds, a)?;
    let out = Artifacts::new(&ctx.out, cfg)?;
    out.raw("choices.jsonl", |w| {
        Ok(write_choices(&data, &choice_header(&out, &data), w)?)
    })?;
    out.json("extract.json", &report)?;
    out.finish(json!({
        "events": data.len(),
        "features": data.feature_names,
    }))
}

fn bfgs(max_iter: usize) -> BfgsOptions {
    BfgsOptions {
        max_iter,
        ..BfgsOptions::default()
    }
}

fn fit_options(a: &FitArgs) -> Result<FitOptions, Failure> {
    let mut opts = FitOptions {
        bfgs: bfgs(a.max_iter),
        ridge: a.ridge,
        ..FitOptions::default()
    };
    for f in &a.fix {
        let (name, v) = f
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("--fix expects NAME=VALUE, got {f:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("--fix {name}: bad value {v:?}")))?;
        opts.fixed.insert(name.trim().to_string(), v);
    }
    Ok(opts)
}

fn not_converged(what: &str, iterations: usize) -> Failure {
    Failure::NotConverged(format!("{what} stopped after {iterations} iterations"))
}

pub fn fit(ctx: &Context, d: &DataArgs, a: &FitArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("fit");
    cfg.param("fit", a);
    let (data, report) = inputs::load_data(&mut cfg, d)?;
    let out = Artifacts::new(&ctx.out, cfg)?;
    if let Some(r) = &report {
        out.json("extract.json", r)?;
    }
    if a.nonparametric {
        let np = clogit::fit_nonparametric_pa(&data, a.max_degree, &bfgs(a.max_iter))?;
        let kernel = nonparametric_kernel(&np);
        let pham = evalstats::pham_ls_alpha(&np).ok();
        out.json("fit.json", json!({ "nonparametric": np, "pham_ls": pham }))?;
        out.csv("kernel.csv", |w| Ok(kernel.write_csv(w)?))?;
        out.finish(json!({
            "loglik": np.loglik,
            "converged": np.converged,
            "alpha_pham_ls": pham.map(|p| p.slope),
        }))?;
        return if np.converged {
            Ok(())
        } else {
            Err(not_converged("fit", np.iterations))
        };
    }
    let opts = fit_options(a)?;
    let fit = match &a.columns {
        Some(cols) => {
            let names: Vec<&str> = cols.split(',').map(str::trim).collect();
            clogit::fit_columns(&data, &names, &opts)?
        }
        None => clogit::fit(&data, &opts)?,
    };
    out.json("fit.json", &fit)?;
    out.csv("coefficients.csv", |w| Ok(fit.write_csv(w)?))?;
    out.finish(json!({
        "loglik": fit.loglik,
        "n_events": fit.n_events,
        "converged": fit.converged,
        "coefficients": fit.table(),
    }))?;
    if !fit.diagnostics.is_empty() {
        for m in &fit.diagnostics {
            eprintln!("warning: {m}");
        }
    }
    if fit.converged {
        Ok(())
    } else {
        Err(not_converged("fit", fit.iterations))
    }
}

fn mixture(cfg: &mut ExperimentConfig, a: &EmArgs) -> Result<MixtureModel, Failure> {
    if let Some(path) = &a.spec {
        cfg.input("spec", path)?;
        let model: MixtureModel = serde_json::from_reader(open(path)?)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        return Ok(model);
    }
    Ok(match a.model.expect("clap requires --model or --spec") {
        MixtureName::Copy => MixtureModel::copy_model(a.p),
        MixtureName::LocalSearch => MixtureModel::local_search(a.r),
        MixtureName::Rp => MixtureModel::rp(a.r, a.p),
        MixtureName::FreePa => MixtureModel::free_pa_model(a.alpha, a.pi),
    })
}

pub fn emfit(ctx: &Context, d: &DataArgs, a: &EmArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("emfit");
    cfg.param("em", a);
    let model = mixture(&mut cfg, a)?;
    model.validate()?;
    let (data, report) = inputs::load_data(&mut cfg, d)?;
    let opts = EmOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        starts: a.starts.max(1),
        seed: ctx.seed,
        ..EmOptions::default()
    };
    let out = Artifacts::new(&ctx.out, cfg)?;
    if let Some(r) = &report {
        out.json("extract.json", r)?;
    }
    let em = em_fit(&data, &model, &opts)?;
    out.json("emfit.json", &em)?;
    out.csv("trajectory.csv", |w| Ok(em.write_trajectory_csv(w)?))?;
    out.finish(json!({
        "loglik": em.loglik,
        "iterations": em.iterations,
        "converged": em.converged,
        "pi": em.model.pi,
        "rp": em.model.rp_parameters(),
        "degenerate_modes": em.degenerate_modes,
    }))?;
    if em.converged {
        Ok(())
    } else {
        Err(not_converged("EM", em.iterations))
    }
}

/// The `result` field of a JSON artifact.
fn read_result(path: &Path) -> Result<Value, Failure> {
    let doc: Value = serde_json::from_reader(open(path)?)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut doc = doc;
    match doc.get_mut("result") {
        Some(v) => Ok(v.take()),
        None => Err(Failure::data(format!(
            "{}: no `result` field",
            path.display()
        ))),
    }
}

fn as_logit(v: &Value) -> Option<LogitFit> {
    serde_json::from_value(v.clone()).ok()
}

fn loglik_of(v: &Value, path: &Path) -> Result<f64, Failure> {
    v.get("loglik")
        .or_else(|| v.get("nonparametric").and_then(|n| n.get("loglik")))
        .and_then(Value::as_f64)
        .ok_or_else(|| Failure::data(format!("{}: no log-likelihood", path.display())))
}

pub fn lrtest(ctx: &Context, null: &Path, alt: &Path, df: Option<usize>) -> Result<(), Failure> {
    let mut cfg = ctx.config("lrtest");
    cfg.input("null", null)?;
    cfg.input("alt", alt)?;
    cfg.param("df", df);
    let (rn, ra) = (read_result(null)?, read_result(alt)?);
    let test = match (as_logit(&rn), as_logit(&ra)) {
        (Some(n), Some(a)) => evalstats::lr_test(&n, &a, df)?,
        _ => {
            let df = df.ok_or_else(|| {
                Failure::config("--df is required unless both reports are logit fits")
            })?;
            evalstats::lr_test_values(loglik_of(&rn, null)?, loglik_of(&ra, alt)?, df)?
        }
    };
    let out = Artifacts::new(&ctx.out, cfg)?;
    out.json("lrtest.json", test)?;
    println!(
        "statistic={} df={} p={}",
        test.statistic, test.df, test.p_value
    );
    out.finish(test)
}

#[derive(Serialize)]
struct AccuracyReport {
    accuracy: f64,
    /// Expected accuracy of a random guess.
    chance: f64,
    n_events: usize,
}

pub fn accuracy(ctx: &Context, fit_path: &Path, d: &DataArgs) -> Result<(), Failure> {
    let mut cfg = ctx.config("accuracy");
    cfg.input("fit", fit_path)?;
    let fit = as_logit(&read_result(fit_path)?)
        .ok_or_else(|| Failure::data(format!("{}: not a logit fit report", fit_path.display())))?;
    let (data, _) = inputs::load_data(&mut cfg, d)?;
    let acc = evalstats::holdout_accuracy(&fit, &data)?;
    let chance = data
        .events
        .iter()
        .map(|e| 1.0 / e.choice_set_size() as f64)
        .sum::<f64>()
        / data.len() as f64;
    let report = AccuracyReport {
        accuracy: acc,
        chance,
        n_events: data.len(),
    };
    let out = Artifacts::new(&ctx.out, cfg)?;
    out.json("accuracy.json", &report)?;
    println!("accuracy={acc} chance={chance}");
    out.finish(&report)
}

/// Write `rows` of already-formatted cells under a header.
pub fn write_rows<W: std::io::Write>(
    w: &mut W,
    header: &str,
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    writeln!(w, "{header}").map_err(io_failure)?;
    for r in rows {
        writeln!(w, "{}", r.join(",")).map_err(io_failure)?;
    }
    Ok(())
}
