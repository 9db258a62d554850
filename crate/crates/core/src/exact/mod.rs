//! Brute-force enumeration of the joint distribution and everything that
//! can be read off it exactly.

mod merge;

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Configuration, Model, NeighborhoodSystem};

pub use merge::{macro_class_id, macro_id, merge_parameters};

/// Default cap on the number of feasible configurations enumerated.
pub const DEFAULT_LIMIT: usize = 200_000;

/// Exact probability of every feasible configuration with positive mass.
///
/// Configurations are in lexicographic order (chain order, then class
/// order). Feasible configurations whose chain weight is zero are not in
/// the support; they are counted in [`zero_mass_feasible`].
///
/// [`zero_mass_feasible`]: JointDistribution::zero_mass_feasible
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    sites: Vec<String>,
    cards: Vec<usize>,
    configs: Vec<Configuration>,
    probs: Vec<f64>,
    z_raw: f64,
    temperature: f64,
    zero_mass: usize,
}

/// Renormalized chain factorization over feasible configurations.
pub fn joint_distribution(model: &Model, limit: usize) -> Result<JointDistribution> {
    let v = model.len();
    let mut walk = Walk {
        model,
        limit,
        state: vec![0; v],
        leaves: 0,
        configs: Vec::new(),
        weights: Vec::new(),
        zero_mass: 0,
    };
    walk.visit(0, 1.0)?;
    if walk.configs.is_empty() {
        return Err(Error::Infeasible(format!(
            "no feasible configuration of `{}` has positive probability",
            model.name()
        )));
    }
    let z_raw: f64 = walk.weights.iter().sum();
    let probs = walk.weights.iter().map(|w| w / z_raw).collect();
    Ok(JointDistribution {
        sites: model.site_ids().map(str::to_string).collect(),
        cards: model.cardinalities(),
        configs: walk.configs,
        probs,
        z_raw,
        temperature: model.temperature(),
        zero_mass: walk.zero_mass,
    })
}

struct Walk<'m> {
    model: &'m Model,
    limit: usize,
    state: Vec<usize>,
    leaves: usize,
    configs: Vec<Configuration>,
    weights: Vec<f64>,
    zero_mass: usize,
}

impl Walk<'_> {
    fn visit(&mut self, depth: usize, weight: f64) -> Result<()> {
        if depth == self.state.len() {
            self.leaves += 1;
            if self.leaves > self.limit {
                return Err(Error::TooLarge {
                    limit: self.limit,
                    reached: self.leaves as u128,
                });
            }
            if weight > 0.0 {
                self.configs.push(Configuration(self.state.clone()));
                self.weights.push(weight);
            } else {
                self.zero_mass += 1;
            }
            return Ok(());
        }
        for c in 0..self.model.cardinality(depth) {
            self.state[depth] = c;
            if self.model.closes_forbidden(depth, &self.state) {
                continue;
            }
            let w = weight * self.model.factors[depth].entry(depth, &self.state);
            self.visit(depth + 1, w)?;
        }
        Ok(())
    }
}

impl JointDistribution {
    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Feasible mass before renormalization.
    pub fn z_raw(&self) -> f64 {
        self.z_raw
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn zero_mass_feasible(&self) -> usize {
        self.zero_mass
    }

    pub fn site_ids(&self) -> &[String] {
        &self.sites
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn site(&self, id: &str) -> Option<usize> {
        self.sites.iter().position(|s| s == id)
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.configs.binary_search(config).ok()
    }

    /// π(x); zero outside the support.
    pub fn probability(&self, config: &Configuration) -> f64 {
        self.index_of(config).map(|i| self.probs[i]).unwrap_or(0.0)
    }

    pub fn marginal(&self, site: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.cards[site]];
        for (x, p) in self.configs.iter().zip(&self.probs) {
            m[x.0[site]] += p;
        }
        m
    }

    /// π(x_site = · | all other sites as in `context`).
    pub fn full_conditional(&self, site: usize, context: &Configuration) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = (0..self.cards[site])
            .map(|c| self.probability(&context.with(site, c)))
            .collect();
        let total: f64 = out.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroContext {
                site: self.sites[site].clone(),
            });
        }
        out.iter_mut().for_each(|p| *p /= total);
        Ok(out)
    }

    /// U(x) = -T ln π(x), `+∞` outside the support.
    pub fn energy_of(&self, config: &Configuration) -> f64 {
        let p = self.probability(config);
        if p > 0.0 {
            -self.temperature * p.ln()
        } else {
            f64::INFINITY
        }
    }

    pub fn energy_view(&self) -> EnergyView {
        let energies: Vec<f64> = self.probs.iter().map(|p| -self.temperature * p.ln()).collect();
        let z_t = energies.iter().map(|u| (-u / self.temperature).exp()).sum();
        EnergyView {
            temperature: self.temperature,
            energies,
            z_t,
        }
    }

    /// Largest L∞ gap, over sites and positive-mass contexts, between the
    /// conditional given every other site and the conditional given only
    /// the site's neighbors.
    pub fn markov_locality_residual(&self, nbhd: &NeighborhoodSystem) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.sites.len() {
            let card = self.cards[s];
            let nb: Vec<usize> = nbhd.of(s).iter().copied().collect();
            let mut given_rest: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
            let mut given_nb: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
            for (x, &p) in self.configs.iter().zip(&self.probs) {
                let mut rest = x.0.clone();
                rest[s] = usize::MAX;
                given_rest.entry(rest).or_insert_with(|| vec![0.0; card])[x.0[s]] += p;
                let key: Vec<usize> = nb.iter().map(|&t| x.0[t]).collect();
                given_nb.entry(key).or_insert_with(|| vec![0.0; card])[x.0[s]] += p;
            }
            for (rest, w) in &given_rest {
                let key: Vec<usize> = nb.iter().map(|&t| rest[t]).collect();
                let local = &given_nb[&key];
                let (za, zb): (f64, f64) = (w.iter().sum(), local.iter().sum());
                for (a, b) in w.iter().zip(local) {
                    worst = worst.max((a / za - b / zb).abs());
                }
            }
        }
        worst
    }

    /// The `k` most probable configurations, ties broken by configuration
    /// order.
    pub fn top_k(&self, k: usize) -> Vec<(Configuration, f64)> {
        let mut idx: Vec<usize> = (0..self.configs.len()).collect();
        idx.sort_by(|&a, &b| {
            self.probs[b]
                .partial_cmp(&self.probs[a])
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.configs[a].cmp(&self.configs[b]))
        });
        idx.into_iter()
            .take(k)
            .map(|i| (self.configs[i].clone(), self.probs[i]))
            .collect()
    }
}

/// Free-function forms of the [`JointDistribution`] queries.
pub fn marginal(dist: &JointDistribution, site: usize) -> Vec<f64> {
    dist.marginal(site)
}

pub fn full_conditional(dist: &JointDistribution, site: usize, context: &Configuration) -> Result<Vec<f64>> {
    dist.full_conditional(site, context)
}

pub fn energy_of(dist: &JointDistribution, config: &Configuration) -> f64 {
    dist.energy_of(config)
}

pub fn verify_markov_locality(dist: &JointDistribution, nbhd: &NeighborhoodSystem) -> f64 {
    dist.markov_locality_residual(nbhd)
}

pub fn top_k(dist: &JointDistribution, k: usize) -> Vec<(Configuration, f64)> {
    dist.top_k(k)
}

/// Gibbs form of a joint distribution over its support.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyView {
    pub temperature: f64,
    /// Energies parallel to the distribution's configurations.
    pub energies: Vec<f64>,
    /// Σ exp(-U/T) over the support.
    pub z_t: f64,
}

impl EnergyView {
    /// exp(-U/T) / Z_T for each configuration of the support.
    pub fn probabilities(&self) -> Vec<f64> {
        self.energies
            .iter()
            .map(|u| (-u / self.temperature).exp() / self.z_t)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Positivity {
    pub holds: bool,
    /// Configurations of the full product space with π(x) = 0.
    pub zero_count: u128,
}

/// Whether π(x) > 0 on the whole product space.
pub fn check_positivity(dist: &JointDistribution, model: &Model, limit: usize) -> Result<Positivity> {
    let total = model.product_space_size();
    if total > limit as u128 {
        return Err(Error::TooLarge {
            limit,
            reached: total,
        });
    }
    let zero_count = total - dist.len() as u128;
    Ok(Positivity {
        holds: zero_count == 0,
        zero_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{neighborhoods, ConditionalProbabilityTable as Cpt, Parameter, UsageModel};
    use crate::reference;

    const EPS: f64 = 1e-12;

    fn independent_2x2() -> Model {
        let mut m = UsageModel::new("ind");
        m.parameters = vec![
            Parameter::with_classes("a", &["a0", "a1"]),
            Parameter::with_classes("b", &["b0", "b1"]),
        ];
        m.chain_order = vec!["a".into(), "b".into()];
        m.cpts = vec![
            Cpt::unconditioned("a", &[("a0", 0.5), ("a1", 0.5)]),
            Cpt::unconditioned("b", &[("b0", 0.5), ("b1", 0.5)]),
        ];
        Model::compile(&m).unwrap()
    }

    /// Oracle: multiply table rows along the chain, drop the forbidden
    /// cell, renormalize.
    fn tiny_oracle() -> Vec<((&'static str, &'static str), f64)> {
        let time = [("day", 0.7), ("night", 0.3)];
        let weather = |t: &str| match t {
            "day" => [("sunny", 0.5), ("rain", 0.3), ("fog", 0.2)],
            _ => [("sunny", 0.2), ("rain", 0.5), ("fog", 0.3)],
        };
        let mut cells = Vec::new();
        for (t, pt) in time {
            for (w, pw) in weather(t) {
                if (t, w) != ("night", "sunny") {
                    cells.push(((t, w), pt * pw));
                }
            }
        }
        let z: f64 = cells.iter().map(|(_, p)| p).sum();
        cells.into_iter().map(|(k, p)| (k, p / z)).collect()
    }

    #[test]
    fn tiny_joint_matches_oracle() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        assert_eq!(d.len(), 5);
        assert!((d.z_raw() - 0.94).abs() < EPS);
        for ((t, w), p) in tiny_oracle() {
            let x = m.configuration(&[("time", t), ("weather", w)]).unwrap();
            assert!((d.probability(&x) - p).abs() < EPS, "{t},{w}");
        }
        let ds = m.configuration(&[("time", "day"), ("weather", "sunny")]).unwrap();
        assert!((d.probability(&ds) - 0.35 / 0.94).abs() < EPS);
        let nr = m.configuration(&[("time", "night"), ("weather", "rain")]).unwrap();
        assert!((d.probability(&nr) - 0.15 / 0.94).abs() < EPS);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < EPS);
    }

    #[test]
    fn uniform_product() {
        let d = joint_distribution(&independent_2x2(), DEFAULT_LIMIT).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.probs().iter().all(|p| (p - 0.25).abs() < EPS));
        for x in d.configs() {
            assert!((d.energy_of(x) - 4f64.ln()).abs() < EPS);
        }
    }

    #[test]
    fn over_the_limit() {
        let m = reference::load(reference::BIG).unwrap();
        match joint_distribution(&m, DEFAULT_LIMIT) {
            Err(Error::TooLarge { limit, reached }) => {
                assert_eq!(limit, DEFAULT_LIMIT);
                assert_eq!(reached, DEFAULT_LIMIT as u128 + 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn everything_forbidden_is_infeasible() {
        let mut u = reference::m_tiny().source().clone();
        for w in ["rain", "fog"] {
            u.constraints = u.constraints.forbid(&[("time", "night"), ("weather", w)]);
            u.constraints = u.constraints.forbid(&[("time", "day"), ("weather", w)]);
        }
        u.constraints = u.constraints.forbid(&[("time", "day"), ("weather", "sunny")]);
        let m = Model::compile(&u).unwrap();
        assert!(matches!(joint_distribution(&m, DEFAULT_LIMIT), Err(Error::Infeasible(_))));
    }

    #[test]
    fn tiny_marginals_and_conditionals() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let time = d.marginal(0);
        assert!((time[0] - 0.7 / 0.94).abs() < EPS);
        assert!((time[1] - 0.24 / 0.94).abs() < EPS);
        let ctx = m.configuration(&[("time", "night"), ("weather", "rain")]).unwrap();
        let cond = d.full_conditional(1, &ctx).unwrap();
        assert_eq!(cond[0], 0.0);
        assert!((cond[1] - 0.5 / 0.8).abs() < EPS);
        assert!((cond[2] - 0.3 / 0.8).abs() < EPS);
    }

    #[test]
    fn independent_conditional_is_marginal() {
        let ind = independent_2x2();
        let d = joint_distribution(&ind, DEFAULT_LIMIT).unwrap();
        for x in d.configs() {
            for s in 0..2 {
                let c = d.full_conditional(s, x).unwrap();
                let mg = d.marginal(s);
                assert!(c.iter().zip(&mg).all(|(a, b)| (a - b).abs() < EPS));
            }
        }
    }

    #[test]
    fn zero_context_is_reported() {
        let m = reference::load(reference::FROZEN).unwrap();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let x = m.configuration(&[("time", "day"), ("light", "dark")]).unwrap();
        assert!(d.full_conditional(0, &x).is_ok());
        let single = {
            let mut u = m.source().clone();
            u.constraints = u.constraints.forbid(&[("time", "night"), ("light", "dark")]);
            Model::compile(&u).unwrap()
        };
        let d = joint_distribution(&single, DEFAULT_LIMIT).unwrap();
        assert_eq!(d.len(), 1);
        assert!(matches!(d.full_conditional(0, &x), Err(Error::ZeroContext { .. })));
        assert_eq!(d.marginal(0), vec![1.0, 0.0]);
    }

    #[test]
    fn energies() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let ds = m.configuration(&[("time", "day"), ("weather", "sunny")]).unwrap();
        assert!((d.energy_of(&ds) + (0.35f64 / 0.94).ln()).abs() < EPS);
        let ns = Configuration(vec![1, 0]);
        assert_eq!(d.energy_of(&ns), f64::INFINITY);
        let view = d.energy_view();
        assert!((view.z_t - 1.0).abs() < EPS);
        for (a, b) in view.probabilities().iter().zip(d.probs()) {
            assert!((a - b).abs() < EPS);
        }
    }

    #[test]
    fn locality() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        assert!(d.markov_locality_residual(&neighborhoods(&m)) <= EPS);
        let empty = NeighborhoodSystem::empty(d.site_ids().to_vec());
        assert!(d.markov_locality_residual(&empty) > 0.01);
        let ind = independent_2x2();
        let d = joint_distribution(&ind, DEFAULT_LIMIT).unwrap();
        let n = neighborhoods(&ind);
        assert!(n.of(0).is_empty() && n.of(1).is_empty());
        assert!(d.markov_locality_residual(&n) <= EPS);
    }

    #[test]
    fn top_k_order() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let top = d.top_k(1);
        assert_eq!(m.class_ids(&top[0].0), vec!["day", "sunny"]);
        assert!((top[0].1 - 0.35 / 0.94).abs() < EPS);
        let all = d.top_k(10);
        assert_eq!(all.len(), 5);
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));

        let ind = joint_distribution(&independent_2x2(), DEFAULT_LIMIT).unwrap();
        let order: Vec<_> = ind.top_k(4).into_iter().map(|(x, _)| x).collect();
        assert_eq!(order, ind.configs().to_vec());
    }

    #[test]
    fn positivity() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        assert_eq!(
            check_positivity(&d, &m, DEFAULT_LIMIT).unwrap(),
            Positivity {
                holds: false,
                zero_count: 1
            }
        );
        let ind = independent_2x2();
        let d = joint_distribution(&ind, DEFAULT_LIMIT).unwrap();
        assert!(check_positivity(&d, &ind, DEFAULT_LIMIT).unwrap().holds);

        let db = reference::load(reference::DAYNIGHT_BRIGHTNESS).unwrap();
        let d = joint_distribution(&db, DEFAULT_LIMIT).unwrap();
        let pos = check_positivity(&d, &db, DEFAULT_LIMIT).unwrap();
        assert!(!pos.holds && pos.zero_count >= 1);
        assert_eq!(d.zero_mass_feasible(), 1);
    }
}
