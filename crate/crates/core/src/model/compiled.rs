use std::collections::HashMap;
use std::fmt;

use super::{validate_model, Assignment, UsageModel};
use crate::error::{Error, Result};

/// One class index per site, indexed by chain position.
///
/// The derived ordering is the lexicographic order over chain order and
/// class declaration order used everywhere for ties and enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<usize>);

impl Configuration {
    pub fn new(classes: Vec<usize>) -> Self {
        Self(classes)
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, site: usize) -> usize {
        self.0[site]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, site: usize, class: usize) -> Configuration {
        let mut next = self.clone();
        next.0[site] = class;
        next
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Site {
    pub id: String,
    pub classes: Vec<String>,
    pub class_index: HashMap<String, usize>,
}

/// A conditional table over parent sites; rows laid out in mixed radix
/// (first parent most significant), `card` entries per row.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub parents: Vec<usize>,
    pub strides: Vec<usize>,
    pub card: usize,
    pub probs: Vec<f64>,
}

impl Factor {
    #[inline]
    pub fn row_offset(&self, state: &[usize]) -> usize {
        let mut row = 0;
        for (p, s) in self.parents.iter().zip(&self.strides) {
            row += state[*p] * s;
        }
        row * self.card
    }

    #[inline]
    pub fn entry(&self, site: usize, state: &[usize]) -> f64 {
        self.probs[self.row_offset(state) + state[site]]
    }

    pub fn row(&self, state: &[usize]) -> &[f64] {
        let off = self.row_offset(state);
        &self.probs[off..off + self.card]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledRequirement {
    pub id: String,
    /// (site, allowed[class])
    pub predicate: Vec<(usize, Vec<bool>)>,
}

/// Compiled, index-based usage model. Sites are numbered by their position
/// in `chain_order`.
#[derive(Debug, Clone)]
pub struct Model {
    source: UsageModel,
    pub(crate) sites: Vec<Site>,
    pub(crate) site_index: HashMap<String, usize>,
    pub(crate) factors: Vec<Factor>,
    pub(crate) children: Vec<Vec<usize>>,
    /// Forbidden items as (site, class) lists sorted by site.
    pub(crate) forbidden: Vec<Vec<(usize, usize)>>,
    /// Indices into `forbidden` of items touching each site.
    pub(crate) forbidden_at: Vec<Vec<usize>>,
    /// Indices into `forbidden` of items whose last site is this one.
    pub(crate) forbidden_closing_at: Vec<Vec<usize>>,
    pub(crate) requirements: Vec<CompiledRequirement>,
}

impl Model {
    /// Validates and compiles a usage model.
    pub fn compile(usage: &UsageModel) -> Result<Model> {
        let report = validate_model(usage);
        if !report.is_ok() {
            return Err(Error::Invalid(report.diagnostics));
        }
        let source = usage.canonical();

        let sites: Vec<Site> = source
            .chain_order
            .iter()
            .map(|id| {
                let p = source.parameter(id).expect("validated");
                let classes: Vec<String> = p.classes.iter().map(|c| c.id.clone()).collect();
                let class_index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
                Site {
                    id: id.clone(),
                    classes,
                    class_index,
                }
            })
            .collect();
        let site_index: HashMap<String, usize> =
            sites.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let v = sites.len();

        let mut factors: Vec<Option<Factor>> = vec![None; v];
        let mut children = vec![Vec::new(); v];
        for cpt in &source.cpts {
            let site = site_index[&cpt.param];
            let parents: Vec<usize> = cpt.given.iter().map(|g| site_index[g]).collect();
            let mut strides = vec![1; parents.len()];
            for k in (0..parents.len().saturating_sub(1)).rev() {
                strides[k] = strides[k + 1] * sites[parents[k + 1]].classes.len();
            }
            let card = sites[site].classes.len();
            let rows: usize = parents.iter().map(|&p| sites[p].classes.len()).product();
            let mut probs = vec![0.0; rows * card];
            for row in &cpt.rows {
                let r: usize = cpt
                    .given
                    .iter()
                    .zip(&strides)
                    .map(|(g, s)| sites[site_index[g]].class_index[&row.when[g]] * s)
                    .sum();
                for (class, &p) in &row.probs {
                    probs[r * card + sites[site].class_index[class]] = p;
                }
            }
            for &p in &parents {
                children[p].push(site);
            }
            factors[site] = Some(Factor {
                parents,
                strides,
                card,
                probs,
            });
        }
        let factors: Vec<Factor> = factors.into_iter().map(|f| f.expect("validated")).collect();

        let mut forbidden = Vec::new();
        let mut forbidden_at = vec![Vec::new(); v];
        let mut forbidden_closing_at = vec![Vec::new(); v];
        for item in &source.constraints.forbidden {
            let mut entries: Vec<(usize, usize)> = item
                .iter()
                .map(|(p, c)| {
                    let s = site_index[p];
                    (s, sites[s].class_index[c])
                })
                .collect();
            entries.sort_unstable();
            let k = forbidden.len();
            for &(s, _) in &entries {
                forbidden_at[s].push(k);
            }
            forbidden_closing_at[entries.last().expect("arity >= 2").0].push(k);
            forbidden.push(entries);
        }

        let requirements = source
            .requirements
            .iter()
            .map(|r| CompiledRequirement {
                id: r.id.clone(),
                predicate: r
                    .predicate
                    .iter()
                    .map(|(p, allowed)| {
                        let s = site_index[p];
                        let mut mask = vec![false; sites[s].classes.len()];
                        for c in allowed {
                            mask[sites[s].class_index[c]] = true;
                        }
                        (s, mask)
                    })
                    .collect(),
            })
            .collect();

        Ok(Model {
            source,
            sites,
            site_index,
            factors,
            children,
            forbidden,
            forbidden_at,
            forbidden_closing_at,
            requirements,
        })
    }

    /// The canonicalized model this was compiled from.
    pub fn source(&self) -> &UsageModel {
        &self.source
    }

    pub fn name(&self) -> &str {
        &self.source.name
    }

    pub fn temperature(&self) -> f64 {
        self.source.temperature
    }

    /// Number of sites (parameters).
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Parameter ids in chain order.
    pub fn site_ids(&self) -> impl Iterator<Item = &str> {
        self.sites.iter().map(|s| s.id.as_str())
    }

    pub fn site_id(&self, site: usize) -> &str {
        &self.sites[site].id
    }

    pub fn site(&self, id: &str) -> Option<usize> {
        self.site_index.get(id).copied()
    }

    pub fn cardinality(&self, site: usize) -> usize {
        self.sites[site].classes.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.classes.len()).collect()
    }

    pub fn class_id(&self, site: usize, class: usize) -> &str {
        &self.sites[site].classes[class]
    }

    pub fn class_index(&self, site: usize, class: &str) -> Option<usize> {
        self.sites[site].class_index.get(class).copied()
    }

    /// Parent sites of `site` in its probability table.
    pub fn parents(&self, site: usize) -> &[usize] {
        &self.factors[site].parents
    }

    pub fn children(&self, site: usize) -> &[usize] {
        &self.children[site]
    }

    /// Forbidden items as (site, class) lists.
    pub fn forbidden_items(&self) -> &[Vec<(usize, usize)>] {
        &self.forbidden
    }

    pub fn requirement_ids(&self) -> impl Iterator<Item = &str> {
        self.requirements.iter().map(|r| r.id.as_str())
    }

    /// Size of the full product space, saturating at `u128::MAX`.
    pub fn product_space_size(&self) -> u128 {
        self.sites
            .iter()
            .fold(1u128, |acc, s| acc.saturating_mul(s.classes.len() as u128))
    }

    /// Builds a configuration from (parameter id, class id) pairs covering
    /// every parameter.
    pub fn configuration(&self, pairs: &[(&str, &str)]) -> Result<Configuration> {
        let mut classes = vec![usize::MAX; self.len()];
        for (p, c) in pairs {
            let s = self.site(p).ok_or_else(|| Error::UnknownRef(p.to_string()))?;
            classes[s] = self
                .class_index(s, c)
                .ok_or_else(|| Error::UnknownRef(format!("{p}={c}")))?;
        }
        if let Some(s) = classes.iter().position(|&c| c == usize::MAX) {
            return Err(Error::UnknownRef(format!(
                "configuration does not assign `{}`",
                self.site_id(s)
            )));
        }
        Ok(Configuration(classes))
    }

    pub fn configuration_from_assignment(&self, assignment: &Assignment) -> Result<Configuration> {
        let pairs: Vec<(&str, &str)> =
            assignment.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        self.configuration(&pairs)
    }

    pub fn assignment(&self, config: &Configuration) -> Assignment {
        config
            .0
            .iter()
            .enumerate()
            .map(|(s, &c)| (self.site_id(s).to_string(), self.class_id(s, c).to_string()))
            .collect()
    }

    /// Class ids in chain order.
    pub fn class_ids(&self, config: &Configuration) -> Vec<&str> {
        config.0.iter().enumerate().map(|(s, &c)| self.class_id(s, c)).collect()
    }

    pub fn display<'a>(&'a self, config: &'a Configuration) -> impl fmt::Display + 'a {
        DisplayConfig { model: self, config }
    }

    pub fn is_feasible(&self, config: &Configuration) -> bool {
        !self
            .forbidden
            .iter()
            .any(|item| item.iter().all(|&(s, c)| config.0[s] == c))
    }

    /// Product of the table entries selected by `config` along chain order.
    pub fn chain_weight(&self, config: &Configuration) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(s, f)| f.entry(s, &config.0))
            .product()
    }

    /// Unnormalized probability: chain weight on feasible configurations,
    /// zero otherwise.
    pub fn weight(&self, config: &Configuration) -> f64 {
        if self.is_feasible(config) {
            self.chain_weight(config)
        } else {
            0.0
        }
    }

    /// Unnormalized full-conditional weights of `site` given the rest of
    /// `state`, written into `out` (one entry per class). Only the site's
    /// own table, its children's tables and constraints touching the site
    /// are read. `state[site]` is restored before returning.
    pub fn local_weights(&self, site: usize, state: &mut [usize], out: &mut [f64]) -> f64 {
        let saved = state[site];
        let own = &self.factors[site];
        let own_row = own.row(state);
        out.copy_from_slice(own_row);
        for (c, w) in out.iter_mut().enumerate() {
            if *w == 0.0 {
                continue;
            }
            state[site] = c;
            for &child in &self.children[site] {
                *w *= self.factors[child].entry(child, state);
            }
            for &k in &self.forbidden_at[site] {
                if self.forbidden[k].iter().all(|&(s, cls)| state[s] == cls) {
                    *w = 0.0;
                    break;
                }
            }
        }
        state[site] = saved;
        out.iter().sum()
    }

    /// Forward-sampling weights for `site` given sites `0..site` of
    /// `prefix`: the table row with classes closing a forbidden item zeroed.
    pub(crate) fn forward_weights(&self, site: usize, prefix: &mut [usize], out: &mut [f64]) -> f64 {
        let saved = prefix[site];
        out.copy_from_slice(self.factors[site].row(prefix));
        for (c, w) in out.iter_mut().enumerate() {
            if *w == 0.0 {
                continue;
            }
            prefix[site] = c;
            for &k in &self.forbidden_closing_at[site] {
                if self.forbidden[k].iter().all(|&(s, cls)| prefix[s] == cls) {
                    *w = 0.0;
                    break;
                }
            }
        }
        prefix[site] = saved;
        out.iter().sum()
    }

    /// Whether a partial assignment of sites `0..=site` already completes a
    /// forbidden item.
    pub(crate) fn closes_forbidden(&self, site: usize, prefix: &[usize]) -> bool {
        self.forbidden_closing_at[site]
            .iter()
            .any(|&k| self.forbidden[k].iter().all(|&(s, c)| prefix[s] == c))
    }

    /// Ids of the requirements `config` satisfies, in declaration order.
    pub fn covered_requirements(&self, config: &Configuration) -> Vec<String> {
        self.requirements
            .iter()
            .filter(|r| r.predicate.iter().all(|(s, mask)| mask[config.0[*s]]))
            .map(|r| r.id.clone())
            .collect()
    }
}

struct DisplayConfig<'a> {
    model: &'a Model,
    config: &'a Configuration,
}

impl fmt::Display for DisplayConfig<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (s, &c) in self.config.0.iter().enumerate() {
            if s > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={}", self.model.site_id(s), self.model.class_id(s, c))?;
        }
        f.write_str(")")
    }
}
