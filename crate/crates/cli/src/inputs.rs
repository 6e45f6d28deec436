//! Loading graphs and choice data from the command line.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use netchoice::featurize::{
    extract_choices, negative_sample, ChoiceData, ChoiceFilters, ChoiceSetRule, ExtractReport,
    FeatureSpec,
};
use netchoice::graph::Traversal;
use netchoice::io::{
    apply_node_meta, ingest, read_choices, read_edge_list, Dataset, IngestOptions,
};

use crate::artifacts::ExperimentConfig;
use crate::failure::Failure;
use crate::{DataArgs, ExtractArgs, GraphArgs};

pub fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: netchoice::error::Error) -> Failure {
    match Failure::from(e) {
        Failure::Data(m) => Failure::data(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn load_graph(cfg: &mut ExperimentConfig, g: &GraphArgs) -> Result<Dataset, Failure> {
    cfg.input("edges", &g.edges)?;
    cfg.param("directed", g.directed);
    cfg.param("skip_malformed", g.skip_malformed);
    let list = read_edge_list(open(&g.edges)?).map_err(|e| located(&g.edges, e))?;
    let opts = IngestOptions {
        directed: g.directed,
        skip_malformed: g.skip_malformed,
    };
    let mut ds = ingest(&list, &opts).map_err(|e| located(&g.edges, e))?;
    if ds.graph.edge_count() == 0 {
        return Err(Failure::data(format!("{}: no edges", g.edges.display())));
    }
    if let Some(nodes) = &g.nodes {
        cfg.input("nodes", nodes)?;
        apply_node_meta(&mut ds, open(nodes)?).map_err(|e| located(nodes, e))?;
    }
    for w in ds.report.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn parse_window(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::config(format!("--window expects START:END, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    );
    if !(a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

pub fn extraction(
    args: &ExtractArgs,
    seed: u64,
) -> Result<(FeatureSpec, ChoiceSetRule, ChoiceFilters), Failure> {
    let mut spec = FeatureSpec::parse(&args.features)?;
    if let Some(t) = &args.traversal {
        let t = if t == "directed" {
            Traversal::Directed
        } else {
            Traversal::Undirected
        };
        spec = spec.with_traversal(t);
    }
    let rule: ChoiceSetRule = args.choice_set.parse()?;
    if args.keep_prob.is_some_and(|q| !(q > 0.0 && q <= 1.0)) {
        return Err(Failure::config("--keep-prob must lie in (0, 1]"));
    }
    if args.sample == Some(0) {
        return Err(Failure::config("--sample must be at least 1"));
    }
    let filters = ChoiceFilters {
        skip_bootstrap: !args.include_bootstrap,
        exclude_first_seen: args.exclude_first_seen,
        from_event: args.from_event,
        to_event: args.to_event,
        time_window: args.window.as_deref().map(parse_window).transpose()?,
        keep_prob: args.keep_prob,
        max_events: args.max_events,
        seed,
        compress: args.compress,
    };
    Ok((spec, rule, filters))
}

pub fn extract(
    cfg: &mut ExperimentConfig,
    ds: &Dataset,
    args: &ExtractArgs,
) -> Result<(ChoiceData, ExtractReport), Failure> {
    cfg.param("extract", args);
    let (spec, rule, filters) = extraction(args, cfg.seed)?;
    spec.validate(ds.graph.node_count())?;
    let (mut data, report) = extract_choices(&ds.graph, &spec, rule, &filters)?;
    if let Some(s) = args.sample {
        data = negative_sample(&data, s, cfg.seed)?;
    }
    if !report.outside_choice_set.is_empty() {
        eprintln!(
            "warning: {} edges chose outside their choice set and were dropped",
            report.outside_choice_set.len()
        );
    }
    Ok((data, report))
}

/// Choice data from `--choices` or extracted from `--edges`.
pub fn load_data(
    cfg: &mut ExperimentConfig,
    d: &DataArgs,
) -> Result<(ChoiceData, Option<ExtractReport>), Failure> {
    let data = match (&d.choices, &d.edges) {
        (Some(path), _) => {
            cfg.input("choices", path)?;
            let (mut data, _) = read_choices(open(path)?).map_err(|e| located(path, e))?;
            if let Some(s) = d.extract.sample {
                cfg.param("sample", s);
                data = negative_sample(&data, s, cfg.seed)?;
            }
            (data, None)
        }
        (None, Some(edges)) => {
            let g = GraphArgs {
                edges: edges.clone(),
                nodes: d.nodes.clone(),
                directed: d.directed,
                skip_malformed: d.skip_malformed,
            };
            let ds = load_graph(cfg, &g)?;
            let (data, report) = extract(cfg, &ds, &d.extract)?;
            (data, Some(report))
        }
        (None, None) => return Err(Failure::config("give --choices or --edges")),
    };
    if data.0.is_empty() {
        return Err(Failure::data("no choice events"));
    }
    Ok(data)
}
