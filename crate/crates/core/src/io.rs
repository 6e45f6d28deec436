//! Text formats: edge lists, node sidecars and choice-data JSON lines.
//!
//! Edge lists hold one `source,target[,timestamp]` record per line. Fields
//! may be separated by commas, tabs or spaces. Lines starting with `#` are
//! comments, except `#! key=value`, which carries a directive
//! (`directed`, `bootstrap_edges`, plus free-form provenance keys).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{ChoiceData, ChoiceEvent};
use crate::graph::{NodeId, TemporalGraph};

/// Schema tag written in the first line of every choice file.
pub const CHOICE_SCHEMA: &str = "netchoice.choices/1";

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub timestamp: Option<f64>,
    /// 1-based line number in the input.
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    pub records: Vec<EdgeRecord>,
    pub directives: BTreeMap<String, String>,
    /// Lines that failed to parse, with the reason.
    pub malformed: Vec<(usize, String)>,
}

impl EdgeList {
    pub fn directive<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.directives
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::data(format!("bad value for directive {key}: {v:?}")))
            })
            .transpose()
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn parse_edge_line(line: &str, no: usize) -> std::result::Result<EdgeRecord, String> {
    let f = split_fields(line);
    if !(2..=3).contains(&f.len()) {
        return Err(format!("expected 2 or 3 fields, found {}", f.len()));
    }
    if f[0].is_empty() || f[1].is_empty() {
        return Err("empty node label".into());
    }
    let timestamp = match f.get(2) {
        None | Some(&"") => None,
        Some(s) => {
            let t: f64 = s.parse().map_err(|_| format!("bad timestamp {s:?}"))?;
            if !t.is_finite() {
                return Err(format!("non-finite timestamp {s:?}"));
            }
            Some(t)
        }
    };
    Ok(EdgeRecord {
        source: f[0].to_string(),
        target: f[1].to_string(),
        timestamp,
        line: no,
    })
}

/// Read an edge list. Malformed lines are collected, not fatal.
pub fn read_edge_list<R: BufRead>(r: R) -> Result<EdgeList> {
    let mut out = EdgeList::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(d) = s.strip_prefix("#!") {
            match d.trim().split_once('=') {
                Some((k, v)) => {
                    out.directives
                        .insert(k.trim().to_string(), v.trim().to_string());
                }
                None => out.malformed.push((no, format!("bad directive {d:?}"))),
            }
            continue;
        }
        if s.starts_with('#') {
            continue;
        }
        // a header row is tolerated on the first record line
        if out.records.is_empty() && out.malformed.is_empty() && is_header(s) {
            continue;
        }
        match parse_edge_line(s, no) {
            Ok(rec) => out.records.push(rec),
            Err(msg) => out.malformed.push((no, msg)),
        }
    }
    Ok(out)
}

fn is_header(line: &str) -> bool {
    let f = split_fields(line);
    f.len() >= 2 && f[0].eq_ignore_ascii_case("source") && f[1].eq_ignore_ascii_case("target")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Overrides the file's `directed` directive.
    pub directed: Option<bool>,
    /// Drop malformed lines instead of failing.
    pub skip_malformed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub nodes: usize,
    pub edges: usize,
    pub malformed: usize,
    /// First few malformed line numbers.
    pub malformed_lines: Vec<usize>,
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
    /// Input timestamps were not in order and had to be sorted.
    pub reordered: bool,
    pub first_timestamp: Option<f64>,
    pub last_timestamp: Option<f64>,
    pub directed: bool,
    pub bootstrap_edges: usize,
}

impl IngestReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.reordered {
            w.push("timestamps were not monotone; edges sorted by time".to_string());
        }
        if self.duplicates_dropped > 0 {
            w.push(format!(
                "dropped {} duplicate edges",
                self.duplicates_dropped
            ));
        }
        if self.self_loops_dropped > 0 {
            w.push(format!("dropped {} self-loops", self.self_loops_dropped));
        }
        if self.malformed > 0 {
            w.push(format!(
                "skipped {} malformed lines (first: {:?})",
                self.malformed, self.malformed_lines
            ));
        }
        w
    }
}

/// Canonical graph plus the label of every dense node id.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: TemporalGraph,
    pub symbols: Vec<String>,
    pub report: IngestReport,
}

impl Dataset {
    pub fn lookup(&self) -> HashMap<&str, NodeId> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), NodeId::from(i)))
            .collect()
    }
}

/// Canonicalize an edge list into a temporal graph.
///
/// Timestamped input is stably ordered by `(timestamp, source, target)`, so
/// any shuffle of the same records yields the same graph. Untimed input keeps
/// file order. Node ids are assigned at first appearance in canonical order.
pub fn ingest<'a>(list: &'a EdgeList, opts: &IngestOptions) -> Result<Dataset> {
    if !list.malformed.is_empty() && !opts.skip_malformed {
        let (line, msg) = &list.malformed[0];
        return Err(Error::Parse {
            line: *line,
            msg: format!("{msg} ({} malformed lines in total)", list.malformed.len()),
        });
    }
    let directed = match opts.directed {
        Some(d) => d,
        None => list.directive::<bool>("directed")?.unwrap_or(false),
    };
    let timed = list
        .records
        .iter()
        .filter(|r| r.timestamp.is_some())
        .count();
    if timed != 0 && timed != list.records.len() {
        let bad = list.records.iter().find(|r| r.timestamp.is_none()).unwrap();
        return Err(Error::Parse {
            line: bad.line,
            msg: "missing timestamp; either every edge has one or none does".into(),
        });
    }
    let mut order: Vec<usize> = (0..list.records.len()).collect();
    let mut reordered = false;
    if timed > 0 {
        let ts = |i: usize| list.records[i].timestamp.unwrap();
        reordered = order.windows(2).any(|w| ts(w[1]) < ts(w[0]));
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&list.records[a], &list.records[b]);
            ts(a)
                .total_cmp(&ts(b))
                .then_with(|| ra.source.cmp(&rb.source))
                .then_with(|| ra.target.cmp(&rb.target))
        });
    }
    let bootstrap: usize = list.directive("bootstrap_edges")?.unwrap_or(0);

    let mut g = TemporalGraph::new(directed);
    let mut ids: HashMap<&'a str, NodeId> = HashMap::new();
    let mut symbols = Vec::new();
    let mut seen: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut report = IngestReport {
        lines_read: list.records.len() + list.malformed.len(),
        malformed: list.malformed.len(),
        malformed_lines: list.malformed.iter().take(10).map(|m| m.0).collect(),
        reordered,
        directed,
        ..Default::default()
    };
    let mut kept_bootstrap = 0;
    for (pos, &k) in order.iter().enumerate() {
        let rec: &'a EdgeRecord = &list.records[k];
        if rec.source == rec.target {
            report.self_loops_dropped += 1;
            continue;
        }
        let t = g.end_time();
        let mut id = |label: &'a str| -> NodeId {
            *ids.entry(label).or_insert_with(|| {
                symbols.push(label.to_string());
                NodeId::from(symbols.len() - 1)
            })
        };
        let (i, j) = (id(&rec.source), id(&rec.target));
        let key = if directed || i < j { (i, j) } else { (j, i) };
        if !seen.insert(key) {
            report.duplicates_dropped += 1;
            continue;
        }
        g.add_timed_edge(i, j, t, rec.timestamp)?;
        if pos < bootstrap {
            kept_bootstrap += 1;
        }
    }
    g.set_bootstrap_edges(kept_bootstrap);
    report.nodes = g.node_count();
    report.edges = g.edge_count();
    report.bootstrap_edges = kept_bootstrap;
    report.first_timestamp = g.edges().first().and_then(|e| e.timestamp);
    report.last_timestamp = g.edges().last().and_then(|e| e.timestamp);
    Ok(Dataset {
        graph: g,
        symbols,
        report,
    })
}

/// Write `g` as an edge list. Labels default to the dense ids.
pub fn write_edge_list<W: Write>(
    g: &TemporalGraph,
    symbols: Option<&[String]>,
    directives: &[(&str, String)],
    mut w: W,
) -> Result<()> {
    let label = |v: NodeId| match symbols {
        Some(s) => s[v.index()].clone(),
        None => v.to_string(),
    };
    writeln!(w, "#! directed={}", g.is_directed())?;
    writeln!(w, "#! bootstrap_edges={}", g.bootstrap_edges())?;
    for (k, v) in directives {
        writeln!(w, "#! {k}={v}")?;
    }
    for e in g.edges() {
        match e.timestamp {
            Some(t) => writeln!(w, "{},{},{}", label(e.source), label(e.target), t)?,
            None => writeln!(w, "{},{}", label(e.source), label(e.target))?,
        }
    }
    Ok(())
}

/// Apply a node sidecar `node,arrival[,group][,fitness][,covariate...]`.
///
/// Columns after `arrival` are matched by header name; `group`, `fitness` and
/// `arrival_time` are special, anything else is a numeric covariate. Empty
/// cells leave the field unset. Nodes absent from the edge list are added as
/// isolated nodes.
pub fn apply_node_meta<R: BufRead>(ds: &mut Dataset, r: R) -> Result<()> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#') => None,
        other => Some((i + 1, other)),
    });
    let Some((hline, header)) = lines.next() else {
        return Ok(());
    };
    let header = header?;
    let cols: Vec<String> = split_fields(&header)
        .iter()
        .map(|s| s.to_string())
        .collect();
    if cols.len() < 2 || cols[0] != "node" || cols[1] != "arrival" {
        return Err(Error::Parse {
            line: hline,
            msg: "node file header must start with node,arrival".into(),
        });
    }
    let mut ids: HashMap<String, NodeId> = ds
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), NodeId::from(i)))
        .collect();
    let first_edge = first_incident_edge(&ds.graph);
    for (no, line) in lines {
        let line = line?;
        let f = split_fields(line.trim());
        if f.len() > cols.len() || f.is_empty() {
            return Err(Error::Parse {
                line: no,
                msg: format!("expected at most {} fields, found {}", cols.len(), f.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: no,
                    msg: format!("bad {what} {s:?}"),
                })
        };
        let v = match ids.get(f[0]) {
            Some(&v) => v,
            None => {
                let v = ds.graph.add_node(Default::default());
                ds.symbols.push(f[0].to_string());
                ids.insert(f[0].to_string(), v);
                ds.graph.meta_mut(v).arrival = ds.graph.end_time();
                v
            }
        };
        let mut meta = ds.graph.meta(v).clone();
        for (c, cell) in cols.iter().zip(&f).skip(1) {
            if cell.is_empty() {
                continue;
            }
            match c.as_str() {
                "arrival" => {
                    let a: u64 = cell.parse().map_err(|_| Error::Parse {
                        line: no,
                        msg: format!("bad arrival {cell:?}"),
                    })?;
                    if let Some(&first) = first_edge.get(v.index()).and_then(|x| x.as_ref()) {
                        if a > first {
                            return Err(Error::Parse {
                                line: no,
                                msg: format!(
                                    "arrival {a} is after the node's first edge at event {first}"
                                ),
                            });
                        }
                    }
                    meta.arrival = a;
                }
                "arrival_time" => meta.arrival_time = Some(num(cell, "arrival_time")?),
                "group" => {
                    meta.group = Some(cell.parse().map_err(|_| Error::Parse {
                        line: no,
                        msg: format!("bad group {cell:?}"),
                    })?)
                }
                "fitness" => meta.fitness = Some(num(cell, "fitness")?),
                name => {
                    meta.covariates.insert(name.to_string(), num(cell, name)?);
                }
            }
        }
        *ds.graph.meta_mut(v) = meta;
    }
    ds.report.nodes = ds.graph.node_count();
    Ok(())
}

fn first_incident_edge(g: &TemporalGraph) -> Vec<Option<u64>> {
    let mut first = vec![None; g.node_count()];
    for e in g.edges() {
        for v in [e.source, e.target] {
            first[v.index()].get_or_insert(e.event);
        }
    }
    first
}

/// Write node metadata in the sidecar format. Covariate columns are the
/// sorted union of all covariate names.
pub fn write_node_meta<W: Write>(
    g: &TemporalGraph,
    symbols: Option<&[String]>,
    mut w: W,
) -> Result<()> {
    let metas: Vec<_> = (0..g.node_count())
        .map(|v| g.meta(NodeId::from(v)))
        .collect();
    let covs: std::collections::BTreeSet<&str> = metas
        .iter()
        .flat_map(|m| m.covariates.keys().map(String::as_str))
        .collect();
    let has_time = metas.iter().any(|m| m.arrival_time.is_some());
    let mut header = vec!["node", "arrival"];
    if has_time {
        header.push("arrival_time");
    }
    header.extend(["group", "fitness"]);
    header.extend(covs.iter().copied());
    writeln!(w, "{}", header.join(","))?;
    let opt = |x: Option<String>| x.unwrap_or_default();
    for (v, m) in metas.iter().enumerate() {
        let mut row = vec![
            symbols.map_or_else(|| v.to_string(), |s| s[v].clone()),
            m.arrival.to_string(),
        ];
        if has_time {
            row.push(opt(m.arrival_time.map(|t| t.to_string())));
        }
        row.push(opt(m.group.map(|x| x.to_string())));
        row.push(opt(m.fitness.map(|x| x.to_string())));
        for c in &covs {
            row.push(opt(m.covariates.get(*c).map(|x| x.to_string())));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// First line of a choice file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceHeader {
    pub schema: String,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Free-form provenance, e.g. the producing configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ChoiceHeader {
    pub fn new(feature_names: Vec<String>) -> Self {
        ChoiceHeader {
            schema: CHOICE_SCHEMA.to_string(),
            feature_names,
            config_hash: None,
            seed: None,
            config: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ChoiceRecord {
    event: u64,
    chooser: NodeId,
    chosen: usize,
    alternatives: Vec<NodeId>,
    features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// Write choice data as JSON lines: a header, then one record per event.
/// `chosen` is the position of the chosen alternative.
pub fn write_choices<W: Write>(data: &ChoiceData, header: &ChoiceHeader, mut w: W) -> Result<()> {
    data.validate()?;
    if header.feature_names != data.feature_names {
        return Err(Error::config("header feature names differ from the data"));
    }
    serde_json::to_writer(&mut w, header)?;
    writeln!(w)?;
    for e in &data.events {
        let rec = ChoiceRecord {
            event: e.event,
            chooser: e.chooser,
            chosen: e.chosen,
            alternatives: e.alternatives.clone(),
            features: e
                .features
                .chunks(e.n_features.max(1))
                .map(<[f64]>::to_vec)
                .collect(),
            counts: e.counts.clone(),
            weight: e.weight,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_choices<R: BufRead>(r: R) -> Result<(ChoiceData, ChoiceHeader)> {
    let mut lines = r
        .lines()
        .enumerate()
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
    let parse = |line: usize, e: serde_json::Error| Error::Parse {
        line,
        msg: e.to_string(),
    };
    let Some((i, first)) = lines.next() else {
        return Err(Error::data("empty choice file"));
    };
    let header: ChoiceHeader = serde_json::from_str(&first?).map_err(|e| parse(i + 1, e))?;
    if header.schema != CHOICE_SCHEMA {
        return Err(Error::Parse {
            line: i + 1,
            msg: format!("unsupported schema {:?}", header.schema),
        });
    }
    let k = header.feature_names.len();
    let mut events = Vec::new();
    for (i, line) in lines {
        let rec: ChoiceRecord = serde_json::from_str(&line?).map_err(|e| parse(i + 1, e))?;
        if rec.features.iter().any(|row| row.len() != k) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("feature rows must have {k} entries"),
            });
        }
        let e = ChoiceEvent {
            event: rec.event,
            chooser: rec.chooser,
            chosen: rec.chosen,
            alternatives: rec.alternatives,
            features: rec.features.concat(),
            n_features: k,
            weight: rec.weight,
            counts: rec.counts,
        };
        e.validate().map_err(|err| Error::Parse {
            line: i + 1,
            msg: err.to_string(),
        })?;
        events.push(e);
    }
    let data = ChoiceData {
        feature_names: header.feature_names.clone(),
        events,
    };
    Ok((data, header))
}
