//! Recast an ordered edge sequence as choice data.
//!
//! Each retained edge `(i, j)` at event `t` becomes one [`ChoiceEvent`]: the
//! chooser `i`, the alternatives eligible at `t`, and one feature row per
//! alternative computed on the graph strictly before `t`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodels::{LatentSpace, LATENT_COVARIATE};
use crate::graph::{NodeId, TemporalGraph, Traversal};
use crate::par;

const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// `ln x` for positive `x`, 0 at 0.
#[inline]
pub fn zero_safe_log(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeUnit {
    /// Event-index units.
    #[default]
    Events,
    /// Years from timestamps, floored at one.
    Years,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extractor {
    /// Zero-safe log of the attachment degree.
    LogDegree,
    HasDegree,
    /// Raw attachment degree (for kernel estimation).
    Degree,
    DegreeIndicator {
        k: usize,
    },
    LogCommonNeighbors,
    IsFof,
    /// The alternative already links to the chooser.
    Reciprocal,
    /// One-hot shortest-path categories `2 .. cap-1` and `>= cap`, with
    /// "unreachable" as the reference level. A path of length 1 (possible
    /// only through a reverse arc under undirected traversal) counts as 2.
    HopCategory {
        cap: u32,
    },
    LogAge {
        unit: AgeUnit,
    },
    /// One indicator per node, node 0 pinned as reference.
    NodeFixedEffect,
    SameGroup,
    LatentDistance {
        space: LatentSpace,
    },
    /// Named node covariate; `fitness` falls back to the node's fitness score.
    Covariate {
        name: String,
    },
}

impl Extractor {
    fn column_names(&self, nodes: usize) -> Vec<String> {
        match self {
            Extractor::LogDegree => vec!["log_degree".into()],
            Extractor::HasDegree => vec!["has_degree".into()],
            Extractor::Degree => vec!["degree".into()],
            Extractor::DegreeIndicator { k } => vec![format!("degree_eq_{k}")],
            Extractor::LogCommonNeighbors => vec!["log_common_neighbors".into()],
            Extractor::IsFof => vec!["is_fof".into()],
            Extractor::Reciprocal => vec!["reciprocal".into()],
            Extractor::HopCategory { cap } => {
                let mut v: Vec<String> = (2..*cap).map(|h| format!("hops_{h}")).collect();
                v.push(format!("hops_ge_{cap}"));
                v
            }
            Extractor::LogAge { .. } => vec!["log_age".into()],
            Extractor::NodeFixedEffect => (1..nodes).map(|v| format!("node_{v}")).collect(),
            Extractor::SameGroup => vec!["same_group".into()],
            Extractor::LatentDistance { .. } => vec!["latent_distance".into()],
            Extractor::Covariate { name } => vec![name.clone()],
        }
    }
}

impl FromStr for Extractor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::config(format!("unknown feature `{s}`"));
        Ok(match parts.as_slice() {
            ["logdeg" | "log_degree"] => Extractor::LogDegree,
            ["hasdeg" | "has_degree"] => Extractor::HasDegree,
            ["degree"] => Extractor::Degree,
            ["logcn" | "log_common_neighbors"] => Extractor::LogCommonNeighbors,
            ["fof" | "is_fof"] => Extractor::IsFof,
            ["recip" | "reciprocal"] => Extractor::Reciprocal,
            ["hops"] => Extractor::HopCategory { cap: 6 },
            ["hops", cap] => Extractor::HopCategory {
                cap: cap.parse().ok().filter(|&c| c >= 3).ok_or_else(bad)?,
            },
            ["logage" | "log_age"] => Extractor::LogAge {
                unit: AgeUnit::Events,
            },
            ["logage" | "log_age", "years"] => Extractor::LogAge {
                unit: AgeUnit::Years,
            },
            ["fe" | "node_fe"] => Extractor::NodeFixedEffect,
            ["samegroup" | "same_group"] => Extractor::SameGroup,
            ["latent", "circle"] => Extractor::LatentDistance {
                space: LatentSpace::Circle,
            },
            ["latent", "tree", b, d] => Extractor::LatentDistance {
                space: LatentSpace::Tree {
                    branching: b.parse().map_err(|_| bad())?,
                    depth: d.parse().map_err(|_| bad())?,
                },
            },
            ["cov", name] if !name.is_empty() => Extractor::Covariate {
                name: name.to_string(),
            },
            [single] => match single.strip_prefix("deg=") {
                Some(k) => Extractor::DegreeIndicator {
                    k: k.parse().map_err(|_| bad())?,
                },
                None => return Err(bad()),
            },
            _ => return Err(bad()),
        })
    }
}

/// Which nodes the chooser can never pick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    /// The chooser and every node it is already linked to.
    #[default]
    Linked,
    /// Only the chooser itself.
    ChooserOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub extractors: Vec<Extractor>,
    #[serde(default)]
    pub traversal: Traversal,
    #[serde(default)]
    pub exclusion: Exclusion,
}

impl FeatureSpec {
    pub fn new(extractors: Vec<Extractor>) -> Self {
        FeatureSpec {
            extractors,
            traversal: Traversal::default(),
            exclusion: Exclusion::default(),
        }
    }

    pub fn with_traversal(mut self, traversal: Traversal) -> Self {
        self.traversal = traversal;
        self
    }

    /// Parse a comma-separated list such as `logdeg,hasdeg,recip,fof`.
    pub fn parse(list: &str) -> Result<Self> {
        let extractors = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        let spec = FeatureSpec::new(extractors);
        spec.validate(0)?;
        Ok(spec)
    }

    pub fn column_names(&self, nodes: usize) -> Vec<String> {
        self.extractors
            .iter()
            .flat_map(|e| e.column_names(nodes))
            .collect()
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.extractors.is_empty() {
            return Err(Error::config("feature spec is empty"));
        }
        let names = self.column_names(nodes);
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(Error::config(format!("duplicate feature `{n}`")));
            }
        }
        Ok(())
    }
}

/// One edge-formation decision.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceEvent {
    pub event: u64,
    pub chooser: NodeId,
    /// Position of the chosen alternative.
    pub chosen: usize,
    pub alternatives: Vec<NodeId>,
    /// Row-major `alternatives.len() x n_features`.
    pub features: Vec<f64>,
    pub n_features: usize,
    pub weight: Option<f64>,
    /// When present, row `a` stands for `counts[a]` alternatives with an
    /// identical feature row, represented by `alternatives[a]`.
    pub counts: Option<Vec<u32>>,
}

impl ChoiceEvent {
    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.features[a * self.n_features..(a + 1) * self.n_features]
    }

    #[inline]
    pub fn count(&self, a: usize) -> f64 {
        self.counts.as_ref().map_or(1.0, |c| c[a] as f64)
    }

    /// Size of the (expanded) choice set.
    pub fn choice_set_size(&self) -> u64 {
        self.counts
            .as_ref()
            .map_or(self.alternatives.len() as u64, |c| {
                c.iter().map(|&x| x as u64).sum()
            })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.alternatives.len();
        if self.chosen >= k {
            return Err(Error::data(format!(
                "event {}: chosen position out of range",
                self.event
            )));
        }
        if self.features.len() != k * self.n_features {
            return Err(Error::Dimension {
                expected: k * self.n_features,
                got: self.features.len(),
            });
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { event: self.event });
        }
        if self.alternatives.contains(&self.chooser) {
            return Err(Error::data(format!(
                "event {}: chooser among alternatives",
                self.event
            )));
        }
        if let Some(c) = &self.counts {
            if c.len() != k || c.contains(&0) {
                return Err(Error::data(format!(
                    "event {}: bad multiplicities",
                    self.event
                )));
            }
        }
        Ok(())
    }

    /// Merge alternatives with bit-identical feature rows, keeping the first
    /// occurrence of each row in place.
    pub fn compressed(&self) -> ChoiceEvent {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut alternatives = Vec::new();
        let mut features = Vec::new();
        let mut counts: Vec<u32> = Vec::new();
        let mut chosen = 0;
        for a in 0..self.n_alternatives() {
            let key: Vec<u64> = self.row(a).iter().map(|x| x.to_bits()).collect();
            let c = self.count(a) as u32;
            let slot = *index.entry(key).or_insert_with(|| {
                alternatives.push(self.alternatives[a]);
                features.extend_from_slice(self.row(a));
                counts.push(0);
                counts.len() - 1
            });
            counts[slot] += c;
            if a == self.chosen {
                chosen = slot;
                alternatives[slot] = self.alternatives[a];
            }
        }
        ChoiceEvent {
            event: self.event,
            chooser: self.chooser,
            chosen,
            alternatives,
            features,
            n_features: self.n_features,
            weight: self.weight,
            counts: Some(counts),
        }
    }
}

/// Events together with their column names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChoiceData {
    pub feature_names: Vec<String>,
    pub events: Vec<ChoiceEvent>,
}

impl ChoiceData {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::config(format!("feature `{name}` not present in choice data")))
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.events {
            if e.n_features != self.feature_names.len() {
                return Err(Error::Dimension {
                    expected: self.feature_names.len(),
                    got: e.n_features,
                });
            }
            e.validate()?;
        }
        Ok(())
    }

    /// Keep only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<ChoiceData> {
        let cols = names
            .iter()
            .map(|n| self.require_column(n))
            .collect::<Result<Vec<_>>>()?;
        let events = self
            .events
            .iter()
            .map(|e| {
                let mut features = Vec::with_capacity(e.n_alternatives() * cols.len());
                for a in 0..e.n_alternatives() {
                    let row = e.row(a);
                    features.extend(cols.iter().map(|&c| row[c]));
                }
                ChoiceEvent {
                    features,
                    n_features: cols.len(),
                    ..e.clone()
                }
            })
            .collect();
        Ok(ChoiceData {
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            events,
        })
    }

    pub fn compressed(&self) -> ChoiceData {
        ChoiceData {
            feature_names: self.feature_names.clone(),
            events: par::map_indexed(self.events.len(), |k| self.events[k].compressed()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceSetRule {
    #[default]
    AllNodes,
    FofOnly,
}

/// Which edges become choice events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceFilters {
    /// Drop the graph's seeding edges.
    pub skip_bootstrap: bool,
    /// Drop events whose chooser has no incident edge before the event.
    pub exclude_first_seen: bool,
    pub from_event: Option<u64>,
    pub to_event: Option<u64>,
    /// Keep only edges with a timestamp in `[start, end)`.
    pub time_window: Option<(f64, f64)>,
    /// Scan in order and keep each candidate edge with this probability ...
    pub keep_prob: Option<f64>,
    /// ... stopping once this many events are kept.
    pub max_events: Option<usize>,
    pub seed: u64,
    /// Merge identical feature rows into counted alternatives.
    pub compress: bool,
}

impl Default for ChoiceFilters {
    fn default() -> Self {
        ChoiceFilters {
            skip_bootstrap: true,
            exclude_first_seen: false,
            from_event: None,
            to_event: None,
            time_window: None,
            keep_prob: None,
            max_events: None,
            seed: 0,
            compress: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub edges_considered: usize,
    pub events_kept: usize,
    pub skipped_bootstrap: usize,
    pub skipped_first_seen: usize,
    pub skipped_window: usize,
    pub skipped_sampling: usize,
    pub empty_choice_set: usize,
    /// Events whose chosen node lies outside the rule's choice set.
    pub outside_choice_set: Vec<u64>,
}

enum Built {
    Event(ChoiceEvent),
    Empty,
    Outside(u64),
}

struct Scratch {
    fof: Vec<bool>,
    linked: Vec<bool>,
}

fn node_age(g: &TemporalGraph, v: NodeId, t: u64, event_time: Option<f64>, unit: AgeUnit) -> f64 {
    let meta = g.meta(v);
    let age = match unit {
        AgeUnit::Events => t.saturating_sub(meta.arrival) as f64,
        AgeUnit::Years => {
            let arrival_time = meta.arrival_time.or_else(|| {
                let edges = g.edges();
                let k = edges.partition_point(|e| e.event < meta.arrival);
                edges.get(k).and_then(|e| e.timestamp)
            });
            match (event_time, arrival_time) {
                (Some(now), Some(then)) => (now - then) / SECONDS_PER_YEAR,
                _ => t.saturating_sub(meta.arrival) as f64,
            }
        }
    };
    age.max(1.0).ln()
}

fn build_event(
    g: &TemporalGraph,
    spec: &FeatureSpec,
    n_features: usize,
    rule: ChoiceSetRule,
    edge_idx: usize,
    scratch: &mut Scratch,
) -> Result<Built> {
    let edge = g.edges()[edge_idx];
    let (i, j, t) = (edge.source, edge.target, edge.event);
    let tr = spec.traversal;
    let needs_fof = rule == ChoiceSetRule::FofOnly
        || spec
            .extractors
            .iter()
            .any(|e| matches!(e, Extractor::IsFof));
    let fof = if needs_fof {
        g.fof_marks(i, t, tr, &mut scratch.fof)
    } else {
        Vec::new()
    };
    let alternatives: Vec<NodeId> = match rule {
        ChoiceSetRule::FofOnly => fof.clone(),
        ChoiceSetRule::AllNodes => {
            let linked: Vec<NodeId> = match spec.exclusion {
                Exclusion::ChooserOnly => Vec::new(),
                Exclusion::Linked if g.is_directed() => g.out_neighbors(i, t).collect(),
                Exclusion::Linked => g.neighbors(i, t, Traversal::Undirected).collect(),
            };
            for &v in &linked {
                scratch.linked[v.index()] = true;
            }
            let all = (0..g.node_count())
                .map(NodeId::from)
                .filter(|&v| v != i && !scratch.linked[v.index()] && g.exists_at(v, t))
                .collect();
            for &v in &linked {
                scratch.linked[v.index()] = false;
            }
            all
        }
    };
    if alternatives.is_empty() {
        return Ok(Built::Empty);
    }
    let Some(chosen) = alternatives.iter().position(|&v| v == j) else {
        return Ok(Built::Outside(t));
    };
    for &v in &fof {
        scratch.fof[v.index()] = true;
    }
    let hops = spec.extractors.iter().find_map(|e| match e {
        Extractor::HopCategory { cap } => Some((*cap, g.hop_distances_from(i, t, u32::MAX, tr))),
        _ => None,
    });
    let mut features = Vec::with_capacity(alternatives.len() * n_features);
    let chooser_meta = g.meta(i);
    let mut err = None;
    for &v in &alternatives {
        for ex in &spec.extractors {
            match ex {
                Extractor::LogDegree => features.push(zero_safe_log(g.degree(v, t) as f64)),
                Extractor::HasDegree => features.push((g.degree(v, t) > 0) as u8 as f64),
                Extractor::Degree => features.push(g.degree(v, t) as f64),
                Extractor::DegreeIndicator { k } => {
                    features.push((g.degree(v, t) == *k) as u8 as f64)
                }
                Extractor::LogCommonNeighbors => {
                    features.push(zero_safe_log(g.common_neighbors(i, v, t, tr) as f64))
                }
                Extractor::IsFof => features.push(scratch.fof[v.index()] as u8 as f64),
                Extractor::Reciprocal => features.push(g.has_arc(v, i, t) as u8 as f64),
                Extractor::HopCategory { cap } => {
                    let (_, dist) = hops.as_ref().expect("computed above");
                    let d = dist.get(&v).copied().map(|d| d.max(2));
                    for h in 2..=*cap {
                        let hit = match d {
                            Some(d) if h == *cap => d >= *cap,
                            Some(d) => d == h,
                            None => false,
                        };
                        features.push(hit as u8 as f64);
                    }
                }
                Extractor::LogAge { unit } => {
                    features.push(node_age(g, v, t, edge.timestamp, *unit))
                }
                Extractor::NodeFixedEffect => {
                    let start = features.len();
                    features.resize(start + g.node_count().saturating_sub(1), 0.0);
                    if v.index() > 0 {
                        features[start + v.index() - 1] = 1.0;
                    }
                }
                Extractor::SameGroup => {
                    let same =
                        chooser_meta.group.is_some() && chooser_meta.group == g.meta(v).group;
                    features.push(same as u8 as f64)
                }
                Extractor::LatentDistance { space } => {
                    let pos = |u: NodeId| g.meta(u).covariates.get(LATENT_COVARIATE).copied();
                    match (pos(i), pos(v)) {
                        (Some(a), Some(b)) => features.push(space.distance(a, b)),
                        _ => {
                            err.get_or_insert(Error::data(format!(
                                "node {v} or {i} lacks a latent position"
                            )));
                            features.push(0.0)
                        }
                    }
                }
                Extractor::Covariate { name } => {
                    let m = g.meta(v);
                    let value = m.covariates.get(name).copied().or(if name == "fitness" {
                        m.fitness
                    } else {
                        None
                    });
                    match value {
                        Some(x) => features.push(x),
                        None => {
                            err.get_or_insert(Error::data(format!(
                                "node {v} lacks covariate `{name}`"
                            )));
                            features.push(0.0)
                        }
                    }
                }
            }
        }
    }
    for &v in &fof {
        scratch.fof[v.index()] = false;
    }
    if let Some(e) = err {
        return Err(e);
    }
    debug_assert_eq!(features.len(), alternatives.len() * n_features);
    Ok(Built::Event(ChoiceEvent {
        event: t,
        chooser: i,
        chosen,
        alternatives,
        features,
        n_features,
        weight: None,
        counts: None,
    }))
}

/// Select the edges that become events (sequential: sampling depends on order).
fn select_edges(
    g: &TemporalGraph,
    filters: &ChoiceFilters,
    report: &mut ExtractReport,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(filters.seed);
    let mut keep = Vec::new();
    for (k, e) in g.edges().iter().enumerate() {
        if filters.max_events.is_some_and(|n| keep.len() >= n) {
            break;
        }
        report.edges_considered += 1;
        if filters.skip_bootstrap && k < g.bootstrap_edges() {
            report.skipped_bootstrap += 1;
            continue;
        }
        let in_window = filters.from_event.is_none_or(|a| e.event >= a)
            && filters.to_event.is_none_or(|b| e.event < b)
            && filters
                .time_window
                .is_none_or(|(a, b)| e.timestamp.is_some_and(|ts| ts >= a && ts < b));
        if !in_window {
            report.skipped_window += 1;
            continue;
        }
        if filters.exclude_first_seen
            && g.in_degree(e.source, e.event) + g.out_degree(e.source, e.event) == 0
        {
            report.skipped_first_seen += 1;
            continue;
        }
        if let Some(q) = filters.keep_prob {
            if rng.random::<f64>() >= q {
                report.skipped_sampling += 1;
                continue;
            }
        }
        keep.push(k);
    }
    keep
}

/// Turn the graph's edge sequence into choice events.
pub fn extract_choices(
    g: &TemporalGraph,
    spec: &FeatureSpec,
    rule: ChoiceSetRule,
    filters: &ChoiceFilters,
) -> Result<(ChoiceData, ExtractReport)> {
    spec.validate(g.node_count())?;
    if g.edge_count() == 0 {
        return Err(Error::data("graph has no edges"));
    }
    let mut report = ExtractReport::default();
    let selected = select_edges(g, filters, &mut report);
    let names = spec.column_names(g.node_count());
    let n_features = names.len();
    let built = par::map_chunks(selected.len(), 16, |range| {
        let mut scratch = Scratch {
            fof: vec![false; g.node_count()],
            linked: vec![false; g.node_count()],
        };
        range
            .map(|k| {
                let b = build_event(g, spec, n_features, rule, selected[k], &mut scratch)?;
                Ok(match b {
                    Built::Event(e) if filters.compress => Built::Event(e.compressed()),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
    });
    let mut events = Vec::with_capacity(selected.len());
    for chunk in built {
        for b in chunk? {
            match b {
                Built::Event(e) => events.push(e),
                Built::Empty => report.empty_choice_set += 1,
                Built::Outside(t) => report.outside_choice_set.push(t),
            }
        }
    }
    report.events_kept = events.len();
    Ok((
        ChoiceData {
            feature_names: names,
            events,
        },
        report,
    ))
}

fn sample_event(e: &ChoiceEvent, s: usize, rng: &mut ChaCha8Rng) -> ChoiceEvent {
    match &e.counts {
        None => {
            let others = e.n_alternatives() - 1;
            if s >= others {
                return e.clone();
            }
            let mut picked: Vec<usize> = index::sample(rng, others, s)
                .into_iter()
                .map(|k| if k >= e.chosen { k + 1 } else { k })
                .collect();
            picked.push(e.chosen);
            picked.sort_unstable();
            let mut out = ChoiceEvent {
                chosen: picked.iter().position(|&a| a == e.chosen).unwrap(),
                alternatives: picked.iter().map(|&a| e.alternatives[a]).collect(),
                features: Vec::with_capacity(picked.len() * e.n_features),
                ..e.clone()
            };
            for &a in &picked {
                out.features.extend_from_slice(e.row(a));
            }
            out
        }
        Some(counts) => {
            // positions 0..total-1 over the expanded non-chosen multiset
            let mut rest: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
            rest[e.chosen] -= 1;
            let total: u64 = rest.iter().sum();
            if s as u64 >= total {
                return e.clone();
            }
            let mut bounds = Vec::with_capacity(rest.len());
            let mut acc = 0;
            for &c in &rest {
                acc += c;
                bounds.push(acc);
            }
            let mut hits = vec![0u32; rest.len()];
            for k in index::sample(rng, total as usize, s) {
                let row = bounds.partition_point(|&b| b <= k as u64);
                hits[row] += 1;
            }
            hits[e.chosen] += 1;
            let mut out = ChoiceEvent {
                alternatives: Vec::new(),
                features: Vec::new(),
                counts: Some(Vec::new()),
                ..e.clone()
            };
            for (a, &h) in hits.iter().enumerate() {
                if h == 0 {
                    continue;
                }
                if a == e.chosen {
                    out.chosen = out.alternatives.len();
                }
                out.alternatives.push(e.alternatives[a]);
                out.features.extend_from_slice(e.row(a));
                out.counts.as_mut().unwrap().push(h);
            }
            out
        }
    }
}

/// Keep the chosen alternative plus `s` uniformly sampled non-chosen ones.
///
/// Each event draws from its own stream keyed by the event index, so results
/// do not depend on event order or thread count.
pub fn negative_sample(data: &ChoiceData, s: usize, seed: u64) -> Result<ChoiceData> {
    if s == 0 {
        return Err(Error::config("negative sample size must be at least 1"));
    }
    let events = par::map_indexed(data.events.len(), |k| {
        let e = &data.events[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(e.event);
        sample_event(e, s, &mut rng)
    });
    Ok(ChoiceData {
        feature_names: data.feature_names.clone(),
        events,
    })
}

impl fmt::Display for ChoiceSetRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChoiceSetRule::AllNodes => "all",
            ChoiceSetRule::FofOnly => "fof",
        })
    }
}

impl FromStr for ChoiceSetRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all-nodes" => Ok(ChoiceSetRule::AllNodes),
            "fof" | "fof-only" => Ok(ChoiceSetRule::FofOnly),
            _ => Err(Error::config(format!("unknown choice-set rule `{s}`"))),
        }
    }
}
