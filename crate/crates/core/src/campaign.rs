//! Test campaigns: generation strategies, deduplication, coverage metrics,
//! requirement tagging and export.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::canon::{g17, Node};
use crate::error::{Error, Result};
use crate::exact::{joint_distribution, JointDistribution};
use crate::io::serialize_model;
use crate::model::{Configuration, Model};
use crate::sampler::{AlphaVector, GibbsChain, SamplerKind, DEFAULT_BURN_IN_RSGS};

/// Consecutive duplicates tolerated per requested case before a profile
/// campaign gives up.
pub const STALL_FACTOR: usize = 10;

const FORMAT_TAG: &str = "usage-testgen-campaign";
const FORMAT_VERSION: i128 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Random-scan Gibbs samples, deduplicated on the fly.
    Profile,
    /// Greedy class coverage over the enumerated support.
    Coverage,
    /// The most probable configurations.
    Topk,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Profile => "profile",
            Strategy::Coverage => "coverage",
            Strategy::Topk => "topk",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "profile" => Ok(Strategy::Profile),
            "coverage" => Ok(Strategy::Coverage),
            "topk" => Ok(Strategy::Topk),
            other => Err(Error::Campaign(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    /// 1-based position in the campaign.
    pub id: usize,
    pub config: Configuration,
    /// Exact `π(config)`, absent when the model is not enumerable.
    pub probability: Option<f64>,
    pub strategy: Strategy,
    /// Requirements whose predicate `config` satisfies, in declaration order.
    pub requirement_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCampaign {
    pub model_name: String,
    /// Hex SHA-256 of the canonical model serialization.
    pub digest: String,
    pub seed: u64,
    pub strategy: Strategy,
    pub cases: Vec<TestCase>,
    pub duplicates_eliminated: usize,
}

/// Hex SHA-256 of the canonical serialization of `model`.
pub fn model_digest(model: &Model) -> String {
    hex::encode(Sha256::digest(serialize_model(model.source()).as_bytes()))
}

fn enumerate(model: &Model, limit: usize) -> Result<Option<JointDistribution>> {
    match joint_distribution(model, limit) {
        Ok(d) => Ok(Some(d)),
        Err(Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn make_case(model: &Model, dist: Option<&JointDistribution>, strategy: Strategy, id: usize, config: Configuration) -> TestCase {
    TestCase {
        id,
        probability: dist.map(|d| d.probability(&config)),
        strategy,
        requirement_ids: model.covered_requirements(&config),
        config,
    }
}

/// Builds a campaign of at most `size` distinct cases.
///
/// `limit` caps enumeration. Top-k and coverage need the full support; a
/// profile campaign only loses its probabilities when the model is too big.
pub fn generate_campaign(model: &Model, strategy: Strategy, size: usize, seed: u64, limit: usize) -> Result<TestCampaign> {
    let mut campaign = TestCampaign {
        model_name: model.name().to_string(),
        digest: model_digest(model),
        seed,
        strategy,
        cases: Vec::new(),
        duplicates_eliminated: 0,
    };
    if size == 0 {
        return Ok(campaign);
    }
    let (configs, dist) = match strategy {
        Strategy::Profile => {
            let dist = enumerate(model, limit)?;
            let (configs, dups) = profile_configs(model, size, seed)?;
            campaign.duplicates_eliminated = dups;
            campaign.cases = configs
                .into_iter()
                .enumerate()
                .map(|(i, x)| make_case(model, dist.as_ref(), strategy, i + 1, x))
                .collect();
            return Ok(campaign);
        }
        Strategy::Topk => {
            let dist = joint_distribution(model, limit)?;
            (dist.top_k(size).into_iter().map(|(x, _)| x).collect(), dist)
        }
        Strategy::Coverage => {
            let dist = joint_distribution(model, limit)?;
            (greedy_cover(&dist, size), dist)
        }
    };
    campaign.cases = configs
        .into_iter()
        .enumerate()
        .map(|(i, x)| make_case(model, Some(&dist), strategy, i + 1, x))
        .collect();
    Ok(campaign)
}

fn profile_chain(model: &Model, seed: u64) -> Result<GibbsChain<'_>> {
    let kind = SamplerKind::Rsgs {
        alpha: AlphaVector::uniform(model.len()),
    };
    let mut chain = GibbsChain::new(model, kind, seed)?;
    for _ in 0..DEFAULT_BURN_IN_RSGS {
        chain.step()?;
    }
    Ok(chain)
}

/// Distinct samples in order of first appearance and the duplicate count.
fn profile_configs(model: &Model, size: usize, seed: u64) -> Result<(Vec<Configuration>, usize)> {
    let mut chain = profile_chain(model, seed)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(size);
    let (mut dups, mut consecutive) = (0, 0);
    while out.len() < size {
        chain.step()?;
        let x = chain.state();
        if seen.insert(x.clone()) {
            out.push(x);
            consecutive = 0;
        } else {
            dups += 1;
            consecutive += 1;
            if consecutive >= STALL_FACTOR * size {
                return Err(Error::Stall {
                    consecutive,
                    found: out.len(),
                    wanted: size,
                });
            }
        }
    }
    Ok((out, dups))
}

/// Greedy: repeatedly take the support configuration covering the most
/// uncovered classes, ties by higher probability then configuration order.
fn greedy_cover(dist: &JointDistribution, size: usize) -> Vec<Configuration> {
    let mut uncovered: Vec<Vec<bool>> = (0..dist.cardinalities().len())
        .map(|s| dist.marginal(s).into_iter().map(|p| p > 0.0).collect())
        .collect();
    let mut remaining: usize = uncovered.iter().flatten().filter(|b| **b).count();
    let mut out = Vec::new();
    while remaining > 0 && out.len() < size {
        let gain = |x: &Configuration| x.classes().iter().enumerate().filter(|(s, c)| uncovered[*s][**c]).count();
        let mut best: Option<(usize, usize)> = None;
        for (i, x) in dist.configs().iter().enumerate() {
            let g = gain(x);
            let better = match best {
                None => true,
                Some((bg, bi)) => g > bg || (g == bg && dist.probs()[i] > dist.probs()[bi]),
            };
            if better {
                best = Some((g, i));
            }
        }
        let Some((g, i)) = best else { break };
        if g == 0 {
            break;
        }
        let x = dist.configs()[i].clone();
        for (s, &c) in x.classes().iter().enumerate() {
            uncovered[s][c] = false;
        }
        remaining -= g;
        out.push(x);
    }
    out
}

/// Number of distinct profile cases (seeded RSGS, default burn-in) needed
/// before every class with positive mass has appeared.
pub fn profile_cases_to_full_coverage(model: &Model, seed: u64, limit: usize) -> Result<usize> {
    let dist = joint_distribution(model, limit)?;
    let mut uncovered: Vec<Vec<bool>> = (0..model.len())
        .map(|s| dist.marginal(s).into_iter().map(|p| p > 0.0).collect())
        .collect();
    let mut remaining: usize = uncovered.iter().flatten().filter(|b| **b).count();
    let mut chain = profile_chain(model, seed)?;
    let mut seen = HashSet::new();
    let mut consecutive = 0;
    while remaining > 0 {
        chain.step()?;
        let x = chain.state();
        if !seen.insert(x.clone()) {
            consecutive += 1;
            if consecutive >= STALL_FACTOR * dist.len() {
                return Err(Error::Stall {
                    consecutive,
                    found: seen.len(),
                    wanted: dist.len(),
                });
            }
            continue;
        }
        consecutive = 0;
        for (s, &c) in x.classes().iter().enumerate() {
            if std::mem::replace(&mut uncovered[s][c], false) {
                remaining -= 1;
            }
        }
    }
    Ok(seen.len())
}

/// Keeps the first occurrence of every configuration and renumbers ids.
pub fn dedupe(campaign: &TestCampaign) -> TestCampaign {
    let mut seen = HashSet::new();
    let cases: Vec<TestCase> = campaign
        .cases
        .iter()
        .filter(|c| seen.insert(c.config.clone()))
        .cloned()
        .enumerate()
        .map(|(i, c)| TestCase { id: i + 1, ..c })
        .collect();
    TestCampaign {
        duplicates_eliminated: campaign.duplicates_eliminated + campaign.cases.len() - cases.len(),
        cases,
        ..campaign.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassItem {
    pub param: String,
    pub class: String,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairItem {
    pub first: (String, String),
    pub second: (String, String),
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequirementItem {
    pub id: String,
    pub cases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub class_coverage: f64,
    pub pair_coverage: f64,
    pub requirement_coverage: f64,
    /// Whether denominators come from the exact support or, for models
    /// too large to enumerate, from the structure alone.
    pub exact: bool,
    pub classes: Vec<ClassItem>,
    pub pairs: Vec<PairItem>,
    pub requirements: Vec<RequirementItem>,
}

fn fraction<T>(items: &[T], hit: impl Fn(&T) -> bool) -> f64 {
    if items.is_empty() {
        1.0
    } else {
        items.iter().filter(|i| hit(i)).count() as f64 / items.len() as f64
    }
}

/// Coverage of `campaign` against `model`. Classes, pairs and requirements
/// with zero mass are left out of the denominators.
pub fn coverage_report(campaign: &TestCampaign, model: &Model, limit: usize) -> CoverageReport {
    let dist = joint_distribution(model, limit).ok();
    let v = model.len();
    let cards = model.cardinalities();

    // Reachable items as indices: (site, class), (site, class, site, class)
    // and requirement positions.
    type Pair = (usize, usize, usize, usize);
    let (classes, pairs, reqs): (Vec<(usize, usize)>, Vec<Pair>, Vec<usize>) = match &dist {
        Some(d) => {
            let mut class_set = BTreeSet::new();
            let mut pair_set = BTreeSet::new();
            let mut req_set = BTreeSet::new();
            let req_ids: Vec<&str> = model.requirement_ids().collect();
            for x in d.configs() {
                let c = x.classes();
                for s in 0..v {
                    class_set.insert((s, c[s]));
                    for t in s + 1..v {
                        pair_set.insert((s, c[s], t, c[t]));
                    }
                }
                for r in model.covered_requirements(x) {
                    req_set.insert(req_ids.iter().position(|id| *id == r).unwrap());
                }
            }
            (
                class_set.into_iter().collect(),
                pair_set.into_iter().collect(),
                req_set.into_iter().collect(),
            )
        }
        None => {
            let binary: HashSet<Pair> = model
                .forbidden_items()
                .iter()
                .filter(|f| f.len() == 2)
                .map(|f| (f[0].0, f[0].1, f[1].0, f[1].1))
                .collect();
            let classes = (0..v).flat_map(|s| (0..cards[s]).map(move |c| (s, c))).collect();
            let mut pairs = Vec::new();
            for s in 0..v {
                for t in s + 1..v {
                    for a in 0..cards[s] {
                        for b in 0..cards[t] {
                            if !binary.contains(&(s, a, t, b)) {
                                pairs.push((s, a, t, b));
                            }
                        }
                    }
                }
            }
            (classes, pairs, (0..model.requirement_ids().count()).collect())
        }
    };

    let configs: Vec<&[usize]> = campaign.cases.iter().map(|c| c.config.classes()).collect();
    let req_ids: Vec<&str> = model.requirement_ids().collect();
    let class_items: Vec<ClassItem> = classes
        .iter()
        .map(|&(s, c)| ClassItem {
            param: model.site_id(s).to_string(),
            class: model.class_id(s, c).to_string(),
            cases: configs.iter().filter(|x| x[s] == c).count(),
        })
        .collect();
    let pair_items: Vec<PairItem> = pairs
        .iter()
        .map(|&(s, a, t, b)| PairItem {
            first: (model.site_id(s).to_string(), model.class_id(s, a).to_string()),
            second: (model.site_id(t).to_string(), model.class_id(t, b).to_string()),
            cases: configs.iter().filter(|x| x[s] == a && x[t] == b).count(),
        })
        .collect();
    let req_items: Vec<RequirementItem> = reqs
        .iter()
        .map(|&r| RequirementItem {
            id: req_ids[r].to_string(),
            cases: campaign
                .cases
                .iter()
                .filter(|c| c.requirement_ids.iter().any(|id| id == req_ids[r]))
                .count(),
        })
        .collect();
    CoverageReport {
        class_coverage: fraction(&class_items, |i| i.cases > 0),
        pair_coverage: fraction(&pair_items, |i| i.cases > 0),
        requirement_coverage: fraction(&req_items, |i| i.cases > 0),
        exact: dist.is_some(),
        classes: class_items,
        pairs: pair_items,
        requirements: req_items,
    }
}

impl CoverageReport {
    pub fn to_node(&self) -> Node {
        let classes = self
            .classes
            .iter()
            .map(|i| {
                Node::obj()
                    .field("param", Node::str(&i.param))
                    .field("class", Node::str(&i.class))
                    .field("cases", Node::Int(i.cases as i128))
                    .build()
            })
            .collect();
        let pairs = self
            .pairs
            .iter()
            .map(|i| {
                Node::obj()
                    .field("first", Node::strs([&i.first.0, &i.first.1]))
                    .field("second", Node::strs([&i.second.0, &i.second.1]))
                    .field("cases", Node::Int(i.cases as i128))
                    .build()
            })
            .collect();
        let reqs = self
            .requirements
            .iter()
            .map(|i| {
                Node::obj()
                    .field("id", Node::str(&i.id))
                    .field("cases", Node::Int(i.cases as i128))
                    .build()
            })
            .collect();
        Node::obj()
            .field("class_coverage", Node::float(self.class_coverage))
            .field("pair_coverage", Node::float(self.pair_coverage))
            .field("requirement_coverage", Node::float(self.requirement_coverage))
            .field("exact", Node::Bool(self.exact))
            .field("classes", Node::Arr(classes))
            .field("pairs", Node::Arr(pairs))
            .field("requirements", Node::Arr(reqs))
            .build()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Structured,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" | "json" => Ok(ExportFormat::Structured),
            "csv" => Ok(ExportFormat::Csv),
            other => Err(Error::Campaign(format!("unknown format `{other}`"))),
        }
    }
}

pub fn export_campaign(campaign: &TestCampaign, model: &Model, format: ExportFormat) -> String {
    match format {
        ExportFormat::Structured => to_structured(campaign, model),
        ExportFormat::Csv => to_csv(campaign, model),
    }
}

fn to_structured(campaign: &TestCampaign, model: &Model) -> String {
    let cases = campaign
        .cases
        .iter()
        .map(|c| {
            Node::obj()
                .field("id", Node::Int(c.id as i128))
                .field("classes", Node::strs(model.class_ids(&c.config)))
                .opt("probability", c.probability.map(Node::float))
                .field("strategy", Node::str(c.strategy.as_str()))
                .field("requirements", Node::strs(&c.requirement_ids))
                .build()
        })
        .collect();
    Node::obj()
        .field("format", Node::str(FORMAT_TAG))
        .field("version", Node::Int(FORMAT_VERSION))
        .field("model", Node::str(&campaign.model_name))
        .field("digest", Node::str(&campaign.digest))
        .field("seed", Node::Int(campaign.seed as i128))
        .field("strategy", Node::str(campaign.strategy.as_str()))
        .field("duplicates_eliminated", Node::Int(campaign.duplicates_eliminated as i128))
        .field("parameters", Node::strs(model.site_ids()))
        .field("cases", Node::Arr(cases))
        .build()
        .render()
}

fn to_csv(campaign: &TestCampaign, model: &Model) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["case_id".to_string()];
    header.extend(model.site_ids().map(str::to_string));
    header.extend(["probability", "strategy", "requirements"].map(String::from));
    w.write_record(&header).expect("writing to memory");
    for c in &campaign.cases {
        let mut row = vec![c.id.to_string()];
        row.extend(model.class_ids(&c.config).into_iter().map(str::to_string));
        row.push(c.probability.map(g17).unwrap_or_default());
        row.push(c.strategy.to_string());
        row.push(c.requirement_ids.join(";"));
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Campaign(format!("missing field `{key}`")))
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    field(v, key)?
        .as_str()
        .ok_or_else(|| Error::Campaign(format!("`{key}` must be a string")))
}

fn as_u64(v: &Value, key: &str) -> Result<u64> {
    field(v, key)?
        .as_u64()
        .ok_or_else(|| Error::Campaign(format!("`{key}` must be a non-negative integer")))
}

fn as_strs(v: &Value, key: &str) -> Result<Vec<String>> {
    field(v, key)?
        .as_array()
        .and_then(|a| a.iter().map(|x| x.as_str().map(String::from)).collect())
        .ok_or_else(|| Error::Campaign(format!("`{key}` must be an array of strings")))
}

/// Reads a structured export back, checking it was made from `model`.
pub fn import_campaign(text: &str, model: &Model) -> Result<TestCampaign> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Campaign(e.to_string()))?;
    if as_str(&v, "format")? != FORMAT_TAG {
        return Err(Error::Campaign("not a campaign document".into()));
    }
    let digest = as_str(&v, "digest")?.to_string();
    if digest != model_digest(model) {
        return Err(Error::Campaign("campaign was generated from a different model".into()));
    }
    let params = as_strs(&v, "parameters")?;
    if !params.iter().map(String::as_str).eq(model.site_ids()) {
        return Err(Error::Campaign("parameter list does not match the model".into()));
    }
    let cases = field(&v, "cases")?
        .as_array()
        .ok_or_else(|| Error::Campaign("`cases` must be an array".into()))?
        .iter()
        .map(|c| {
            let classes = as_strs(c, "classes")?;
            if classes.len() != model.len() {
                return Err(Error::Campaign("case has the wrong number of classes".into()));
            }
            let config = classes
                .iter()
                .enumerate()
                .map(|(s, id)| {
                    model
                        .class_index(s, id)
                        .ok_or_else(|| Error::Campaign(format!("unknown class `{id}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let probability = match c.get("probability") {
                None | Some(Value::Null) => None,
                Some(p) => Some(p.as_f64().ok_or_else(|| Error::Campaign("bad probability".into()))?),
            };
            Ok(TestCase {
                id: as_u64(c, "id")? as usize,
                config: Configuration(config),
                probability,
                strategy: as_str(c, "strategy")?.parse()?,
                requirement_ids: as_strs(c, "requirements")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TestCampaign {
        model_name: as_str(&v, "model")?.to_string(),
        digest,
        seed: as_u64(&v, "seed")?,
        strategy: as_str(&v, "strategy")?.parse()?,
        cases,
        duplicates_eliminated: as_u64(&v, "duplicates_eliminated")? as usize,
    })
}
