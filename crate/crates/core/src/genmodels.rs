//! Synthetic growth-graph generators.
//!
//! Nodes arrive one at a time and each forms `m` edges to distinct existing
//! nodes. Every edge first draws two mode coins (choice set and utility), even
//! for single-mode processes, so that processes which coincide in law (e.g.
//! `pa(0)` and `uniform`, `rp(1, p)` and `copy(p)`) also coincide path-wise
//! for the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeMeta, TemporalGraph, Traversal};
use crate::par;

/// Node covariate holding the latent-space position.
pub const LATENT_COVARIATE: &str = "latent";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FitnessDist {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Default for FitnessDist {
    fn default() -> Self {
        FitnessDist::Exponential { rate: 1.0 }
    }
}

/// A known latent space; positions are stored as the `latent` covariate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LatentSpace {
    /// Positions uniform on a circle of circumference 1; distance is arc length.
    Circle,
    /// Leaves of a complete `branching`-ary tree of the given depth; distance
    /// is the height of the lowest common ancestor.
    Tree { branching: u32, depth: u32 },
}

impl LatentSpace {
    pub fn sample_position<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            LatentSpace::Circle => rng.random::<f64>(),
            LatentSpace::Tree { branching, depth } => {
                let leaves = (branching as u64).pow(depth);
                rng.random_range(0..leaves) as f64
            }
        }
    }

    pub fn distance(&self, a: f64, b: f64) -> f64 {
        match *self {
            LatentSpace::Circle => {
                let d = (a - b).abs().rem_euclid(1.0);
                d.min(1.0 - d)
            }
            LatentSpace::Tree { branching, depth } => {
                let (mut x, mut y) = (a as u64, b as u64);
                let b = branching.max(2) as u64;
                let mut h = 0;
                while x != y && h < depth {
                    x /= b;
                    y /= b;
                    h += 1;
                }
                h as f64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Model {
    Uniform,
    /// Attachment proportional to `degree^alpha`.
    Pa {
        alpha: f64,
    },
    /// Attachment proportional to `exp(theta[degree])`; degrees past the end
    /// of the table use its last entry.
    NonparametricPa {
        theta: Vec<f64>,
    },
    /// Attachment proportional to `exp(fitness)`.
    Fitness {
        dist: FitnessDist,
    },
    /// Uniform with probability `p`, linear PA otherwise.
    Copy {
        p: f64,
    },
    /// All-node choice set with probability `r`, friends of friends otherwise.
    LocalSearch {
        r: f64,
    },
    /// `r` picks the choice set (all nodes vs FoF), `p` picks the utility
    /// (uniform vs linear PA), independently per edge.
    Rp {
        r: f64,
        p: f64,
    },
    /// Attachment proportional to `exp(h * 1{same group})`.
    Homophily {
        h: f64,
        groups: u32,
    },
    /// Attachment proportional to `c^(-distance)`.
    Latent {
        space: LatentSpace,
        c: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub n: usize,
    pub m: usize,
    #[serde(flatten)]
    pub model: Model,
    pub directed: bool,
    pub seed: u64,
}

impl GrowthConfig {
    pub fn new(model: Model, n: usize, m: usize, seed: u64) -> Self {
        GrowthConfig {
            n,
            m,
            model,
            directed: false,
            seed,
        }
    }

    pub fn directed(mut self, yes: bool) -> Self {
        self.directed = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("m must be at least 1"));
        }
        if self.n < self.m + 1 {
            return Err(Error::config(format!(
                "n = {} must be at least m + 1 = {}",
                self.n,
                self.m + 1
            )));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::config("n exceeds the node id range"));
        }
        // directed growth needs some uniform/all-node mass or new nodes are never chosen
        let directed = self.directed;
        let unit = |name: &str, v: f64| {
            if directed && v > 0.0 && v <= 1.0 || !directed && (0.0..=1.0).contains(&v) {
                Ok(())
            } else if directed {
                Err(Error::config(format!(
                    "{name} = {v} must lie in (0, 1] for directed growth"
                )))
            } else {
                Err(Error::config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        match &self.model {
            Model::Uniform => {}
            Model::Pa { alpha } if !alpha.is_finite() => {
                return Err(Error::config("alpha must be finite"))
            }
            Model::Pa { .. } => {}
            Model::NonparametricPa { theta } => {
                if theta.is_empty() || theta.iter().any(|t| !t.is_finite()) {
                    return Err(Error::config("theta table must be non-empty and finite"));
                }
            }
            Model::Fitness { dist } => match *dist {
                FitnessDist::Exponential { rate } if rate <= 0.0 => {
                    return Err(Error::config("fitness rate must be positive"))
                }
                FitnessDist::Normal { sd, .. } if sd < 0.0 => {
                    return Err(Error::config("fitness sd must be non-negative"))
                }
                _ => {}
            },
            Model::Copy { p } => unit("p", *p)?,
            Model::LocalSearch { r } => unit("r", *r)?,
            Model::Rp { r, p } => {
                unit("r", *r)?;
                unit("p", *p)?;
            }
            Model::Homophily { h, groups } => {
                if !h.is_finite() || *groups == 0 {
                    return Err(Error::config("homophily needs finite h and groups >= 1"));
                }
            }
            Model::Latent { space, c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::config("latent base c must be positive"));
                }
                if let LatentSpace::Tree { branching, depth } = space {
                    if *branching < 2
                        || *depth == 0
                        || (*branching as f64).powi(*depth as i32) > 1e15
                    {
                        return Err(Error::config(
                            "latent tree needs branching >= 2, depth >= 1",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub bootstrap_edges: usize,
    /// FoF-mode edges that found no friends of friends and fell back to
    /// uniform attachment over all nodes.
    pub fof_fallbacks: usize,
    /// Edges whose eligible weights were all zero and fell back to uniform.
    pub zero_weight_fallbacks: usize,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub graph: TemporalGraph,
    pub stats: GrowthStats,
}

/// Draw an index with probability proportional to `weights`.
///
/// Consumes exactly one uniform variate. When every weight is zero the draw
/// falls back to a uniform index. Returns `None` only for an empty slice.
pub fn sample_target<R: Rng>(weights: &[f64], rng: &mut R) -> Option<usize> {
    if weights.is_empty() {
        return None;
    }
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random();
    if !(total > 0.0) {
        return Some(((u * weights.len() as f64) as usize).min(weights.len() - 1));
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = k;
            if target < acc {
                return Some(k);
            }
        }
    }
    Some(last_positive)
}

/// Random-utility draw: argmax of `utility + Gumbel noise`.
pub fn sample_gumbel_max<R: Rng>(utilities: &[f64], rng: &mut R) -> Option<usize> {
    utilities
        .iter()
        .map(|&u| {
            let e: f64 = rng.random::<f64>();
            u - (-(e.max(f64::MIN_POSITIVE)).ln()).ln()
        })
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

/// Fenwick tree over non-negative weights for O(log n) proportional draws.
#[derive(Clone, Debug)]
struct WeightTree {
    tree: Vec<f64>,
    w: Vec<f64>,
}

impl WeightTree {
    fn new(n: usize) -> Self {
        WeightTree {
            tree: vec![0.0; n + 1],
            w: vec![0.0; n],
        }
    }

    fn set(&mut self, i: usize, w: f64) {
        let delta = w - self.w[i];
        self.w[i] = w;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.w.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k &= k - 1;
        }
        s
    }

    /// Index whose cumulative weight interval contains `u * total`.
    fn sample(&self, u: f64) -> Option<usize> {
        let total = self.total();
        if !(total > 0.0) {
            return None;
        }
        let mut rem = u * total;
        let n = self.w.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            if pos + step <= n && self.tree[pos + step] <= rem {
                pos += step;
                rem -= self.tree[pos];
            }
            step >>= 1;
        }
        // Rounding can land on a zero-weight slot or past the end.
        if pos < n && self.w[pos] > 0.0 {
            return Some(pos);
        }
        (0..pos.min(n))
            .rev()
            .find(|&k| self.w[k] > 0.0)
            .or_else(|| (pos..n).find(|&k| self.w[k] > 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ChoiceSet {
    All,
    Fof,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Utility {
    Uniform,
    Degree(f64),
    /// Chooser-dependent or table-driven weights evaluated by a full scan.
    Scan,
}

struct Grower<'a> {
    cfg: &'a GrowthConfig,
    g: TemporalGraph,
    rng: ChaCha8Rng,
    uniform: WeightTree,
    degree: Option<(WeightTree, f64)>,
    mark: Vec<bool>,
    t: u64,
    stats: GrowthStats,
    traversal: Traversal,
}

impl<'a> Grower<'a> {
    fn new(cfg: &'a GrowthConfig) -> Self {
        let alpha = match cfg.model {
            Model::Pa { alpha } => Some(alpha),
            Model::Copy { .. } | Model::Rp { .. } => Some(1.0),
            _ => None,
        };
        Grower {
            cfg,
            g: TemporalGraph::new(cfg.directed),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            uniform: WeightTree::new(cfg.n),
            degree: alpha.map(|a| (WeightTree::new(cfg.n), a)),
            mark: vec![false; cfg.n],
            t: 0,
            stats: GrowthStats::default(),
            traversal: if cfg.directed {
                Traversal::Directed
            } else {
                Traversal::Undirected
            },
        }
    }

    fn mode(&self, set_coin: f64, util_coin: f64) -> (ChoiceSet, Utility) {
        let fof_if = |r: f64| {
            if set_coin < r {
                ChoiceSet::All
            } else {
                ChoiceSet::Fof
            }
        };
        let pa_if = |p: f64| {
            if util_coin < p {
                Utility::Uniform
            } else {
                Utility::Degree(1.0)
            }
        };
        match self.cfg.model {
            Model::Uniform => (ChoiceSet::All, Utility::Uniform),
            Model::Pa { alpha } => (ChoiceSet::All, Utility::Degree(alpha)),
            Model::Copy { p } => (ChoiceSet::All, pa_if(p)),
            Model::LocalSearch { r } => (fof_if(r), Utility::Uniform),
            Model::Rp { r, p } => (fof_if(r), pa_if(p)),
            _ => (ChoiceSet::All, Utility::Scan),
        }
    }

    fn sample_attributes(&mut self, v: NodeId) {
        let meta = self.g.meta_mut(v);
        match &self.cfg.model {
            Model::Fitness { dist } => {
                let f = match *dist {
                    FitnessDist::Exponential { rate } => Exp::new(rate)
                        .expect("validated rate")
                        .sample(&mut self.rng),
                    FitnessDist::Normal { mean, sd } => Normal::new(mean, sd)
                        .expect("validated sd")
                        .sample(&mut self.rng),
                };
                meta.fitness = Some(f);
            }
            Model::Homophily { groups, .. } => {
                meta.group = Some(self.rng.random_range(0..*groups));
            }
            Model::Latent { space, .. } => {
                let pos = space.sample_position(&mut self.rng);
                meta.covariates.insert(LATENT_COVARIATE.to_string(), pos);
            }
            _ => {}
        }
    }

    fn degree_weight(&self, v: NodeId, alpha: f64) -> f64 {
        let d = self.g.degree(v, self.t) as f64;
        if alpha == 0.0 {
            1.0
        } else {
            d.powf(alpha)
        }
    }

    fn refresh(&mut self, v: NodeId) {
        self.uniform.set(v.index(), 1.0);
        if let Some((_, alpha)) = self.degree {
            let w = self.degree_weight(v, alpha);
            self.degree.as_mut().unwrap().0.set(v.index(), w);
        }
    }

    fn exclude(&mut self, v: NodeId) {
        self.uniform.set(v.index(), 0.0);
        if let Some((tree, _)) = self.degree.as_mut() {
            tree.set(v.index(), 0.0);
        }
    }

    fn scan_weight(&self, i: NodeId, j: NodeId) -> f64 {
        let (mi, mj) = (self.g.meta(i), self.g.meta(j));
        match &self.cfg.model {
            Model::NonparametricPa { theta } => {
                let d = self.g.degree(j, self.t).min(theta.len() - 1);
                theta[d].exp()
            }
            Model::Fitness { .. } => mj.fitness.unwrap_or(0.0).exp(),
            Model::Homophily { h, .. } => {
                if mi.group == mj.group {
                    h.exp()
                } else {
                    1.0
                }
            }
            Model::Latent { space, c } => {
                let d = space.distance(
                    mi.covariates[LATENT_COVARIATE],
                    mj.covariates[LATENT_COVARIATE],
                );
                c.powf(-d)
            }
            _ => 1.0,
        }
    }

    fn draw_uniform(&mut self, u: f64) -> NodeId {
        NodeId::from(self.uniform.sample(u).expect("at least one eligible node"))
    }

    fn pick(&mut self, i: NodeId, set: ChoiceSet, util: Utility) -> NodeId {
        let u: f64 = self.rng.random();
        match (set, util) {
            (ChoiceSet::All, Utility::Uniform) => self.draw_uniform(u),
            (ChoiceSet::All, Utility::Degree(_)) => {
                match self.degree.as_ref().and_then(|(tree, _)| tree.sample(u)) {
                    Some(k) => NodeId::from(k),
                    None => {
                        self.stats.zero_weight_fallbacks += 1;
                        self.draw_uniform(u)
                    }
                }
            }
            (ChoiceSet::All, Utility::Scan) => {
                let cands: Vec<NodeId> = (0..i.index())
                    .map(NodeId::from)
                    .filter(|&j| self.uniform.w[j.index()] > 0.0)
                    .collect();
                let weights: Vec<f64> = cands.iter().map(|&j| self.scan_weight(i, j)).collect();
                if !(weights.iter().sum::<f64>() > 0.0) {
                    self.stats.zero_weight_fallbacks += 1;
                }
                cands[pick_with(&weights, u)]
            }
            (ChoiceSet::Fof, util) => {
                let fof = self.g.fof_marks(i, self.t, self.traversal, &mut self.mark);
                if fof.is_empty() {
                    self.stats.fof_fallbacks += 1;
                    return self.draw_uniform(u);
                }
                let weights: Vec<f64> = match util {
                    Utility::Degree(alpha) => {
                        fof.iter().map(|&j| self.degree_weight(j, alpha)).collect()
                    }
                    _ => vec![1.0; fof.len()],
                };
                if !(weights.iter().sum::<f64>() > 0.0) {
                    self.stats.zero_weight_fallbacks += 1;
                }
                fof[pick_with(&weights, u)]
            }
        }
    }

    fn bootstrap(&mut self) -> Result<()> {
        let k = self.cfg.m + 1;
        for _ in 0..k {
            let v = self.g.add_node(NodeMeta::default());
            self.sample_attributes(v);
        }
        // each bootstrap node links to its predecessor; node 0 closes the ring
        for v in (1..=k).map(|v| v % k) {
            let (a, b) = (NodeId::from(v), NodeId::from((v + k - 1) % k));
            if !self.cfg.directed && k == 2 && v == 0 {
                continue;
            }
            self.g.add_edge(a, b, self.t)?;
            self.t += 1;
        }
        self.stats.bootstrap_edges = self.g.edge_count();
        self.g.set_bootstrap_edges(self.g.edge_count());
        for v in 0..k {
            self.refresh(NodeId::from(v));
        }
        Ok(())
    }

    fn run(mut self) -> Result<Generated> {
        self.bootstrap()?;
        for v in self.cfg.m + 1..self.cfg.n {
            let i = self.g.add_node(NodeMeta {
                arrival: self.t,
                ..NodeMeta::default()
            });
            debug_assert_eq!(i.index(), v);
            self.sample_attributes(i);
            let mut chosen = Vec::with_capacity(self.cfg.m);
            for _ in 0..self.cfg.m {
                let set_coin: f64 = self.rng.random();
                let util_coin: f64 = self.rng.random();
                let (set, util) = self.mode(set_coin, util_coin);
                let j = self.pick(i, set, util);
                self.g.add_edge(i, j, self.t)?;
                self.t += 1;
                self.exclude(j);
                chosen.push(j);
            }
            for j in chosen {
                self.refresh(j);
            }
            self.refresh(i);
        }
        Ok(Generated {
            graph: self.g,
            stats: self.stats,
        })
    }
}

fn pick_with(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return ((u * weights.len() as f64) as usize).min(weights.len() - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if target < acc {
                return k;
            }
        }
    }
    last
}

/// Grow a graph according to `config`.
pub fn generate(config: &GrowthConfig) -> Result<Generated> {
    config.validate()?;
    Grower::new(config).run()
}

/// Seed of replica `k` derived from a base seed.
pub fn replica_seed(seed: u64, k: u64) -> u64 {
    // splitmix64 finalizer over the (seed, k) pair
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent replicas with derived seeds, generated in parallel.
pub fn generate_replicas(config: &GrowthConfig, count: usize) -> Result<Vec<Generated>> {
    config.validate()?;
    par::map_indexed(count, |k| {
        let mut c = config.clone();
        c.seed = replica_seed(config.seed, k as u64);
        generate(&c)
    })
    .into_iter()
    .collect()
}
