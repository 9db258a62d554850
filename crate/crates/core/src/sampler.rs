//! Random-scan and periodic Gibbs samplers.
//!
//! A chain owns one [`Stream`]. The initial state is drawn from it first
//! (forward sampling along chain order), then every step consumes one
//! uniform for the site (random scan only) and one per site update.

use std::fmt::Write as _;

use crate::canon::g17;
use crate::error::{Error, Result};
use crate::model::{Configuration, Model};
use crate::rng::{child_seed, Stream};

pub const DEFAULT_BURN_IN_RSGS: u64 = 1000;
pub const DEFAULT_BURN_IN_PERIODIC: u64 = 100;

/// Forward-sampling restarts tolerated before giving up on a model.
const MAX_FORWARD_ATTEMPTS: usize = 1000;

/// Site-visiting probabilities, indexed by chain position.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector(Vec<f64>);

impl AlphaVector {
    pub fn uniform(sites: usize) -> Self {
        Self(vec![1.0 / sites as f64; sites])
    }

    /// Requires `0 < α_s < 1` (or `α = (1)` for one site) and `Σ α = 1`
    /// within 1e-12.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Alpha("empty".into()));
        }
        if alpha.len() == 1 {
            return if alpha[0] == 1.0 {
                Ok(Self(alpha))
            } else {
                Err(Error::Alpha("a single site must have alpha = 1".into()))
            };
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(Error::Alpha(format!("entry {a} is not in (0, 1)")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Alpha(format!("entries sum to {sum}")));
        }
        Ok(Self(alpha))
    }

    /// Parses a comma-separated list given in chain order.
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Alpha(format!("`{text}`: {e}")))?;
        Self::new(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    /// Random scan: pick site `s` with probability `α_s`, then update it.
    Rsgs { alpha: AlphaVector },
    /// Periodic: one step is a full sweep through `sweep_order`.
    Periodic { sweep_order: Vec<usize> },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Rsgs { .. } => "rsgs",
            SamplerKind::Periodic { .. } => "periodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Discarded steps (random scan) or sweeps (periodic).
    pub burn_in: u64,
    /// Steps between retained samples; at least 1.
    pub thinning: u64,
    pub n_samples: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Random scan with uniform α and default burn-in.
    pub fn rsgs(model: &Model, n_samples: usize, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Rsgs {
                alpha: AlphaVector::uniform(model.len()),
            },
            burn_in: DEFAULT_BURN_IN_RSGS,
            thinning: 1,
            n_samples,
            seed,
        }
    }

    /// Periodic sweep in chain order with default burn-in.
    pub fn periodic(model: &Model, n_samples: usize, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Periodic {
                sweep_order: (0..model.len()).collect(),
            },
            burn_in: DEFAULT_BURN_IN_PERIODIC,
            thinning: 1,
            n_samples,
            seed,
        }
    }

    pub fn burn_in(mut self, steps: u64) -> Self {
        self.burn_in = steps;
        self
    }

    pub fn thinning(mut self, stride: u64) -> Self {
        self.thinning = stride;
        self
    }

    pub fn alpha(mut self, alpha: AlphaVector) -> Self {
        self.kind = SamplerKind::Rsgs { alpha };
        self
    }

    pub fn sweep_order(mut self, order: Vec<usize>) -> Self {
        self.kind = SamplerKind::Periodic { sweep_order: order };
        self
    }

    fn check(&self, model: &Model) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::Shape("thinning must be positive".into()));
        }
        match &self.kind {
            SamplerKind::Rsgs { alpha } if alpha.len() != model.len() => Err(Error::Shape(format!(
                "alpha has {} entries for {} parameters",
                alpha.len(),
                model.len()
            ))),
            SamplerKind::Periodic { sweep_order } => {
                let mut seen = vec![false; model.len()];
                for &s in sweep_order {
                    if s >= model.len() || std::mem::replace(&mut seen[s], true) {
                        return Err(Error::Shape("sweep order is not a permutation".into()));
                    }
                }
                if seen.iter().all(|&b| b) {
                    Ok(())
                } else {
                    Err(Error::Shape("sweep order is not a permutation".into()))
                }
            }
            _ => Ok(()),
        }
    }
}

/// Draws a feasible configuration by forward sampling along chain order,
/// renormalizing each table row over the classes not forbidden by choices
/// made so far. Dead ends restart the walk on the same stream.
fn forward_sample(model: &Model, stream: &mut Stream) -> Result<Configuration> {
    let v = model.len();
    let max_card = model.cardinalities().into_iter().max().unwrap_or(0);
    let mut weights = vec![0.0; max_card];
    let mut state = vec![0usize; v];
    'attempt: for _ in 0..MAX_FORWARD_ATTEMPTS {
        for s in 0..v {
            let w = &mut weights[..model.cardinality(s)];
            let total = model.forward_weights(s, &mut state, w);
            if total <= 0.0 {
                continue 'attempt;
            }
            state[s] = stream.categorical(w, total);
        }
        return Ok(Configuration(state));
    }
    Err(Error::Infeasible(format!(
        "forward sampling of `{}` hit a dead end {MAX_FORWARD_ATTEMPTS} times",
        model.name()
    )))
}

/// The chain's starting state for `seed`.
pub fn initial_state(model: &Model, seed: u64) -> Result<Configuration> {
    forward_sample(model, &mut Stream::new(seed))
}

/// A running Gibbs chain.
#[derive(Debug, Clone)]
pub struct GibbsChain<'m> {
    model: &'m Model,
    kind: SamplerKind,
    state: Vec<usize>,
    stream: Stream,
    scratch: Vec<f64>,
    steps: u64,
}

impl<'m> GibbsChain<'m> {
    /// Starts at [`initial_state`]`(model, seed)`, continuing the same stream.
    pub fn new(model: &'m Model, kind: SamplerKind, seed: u64) -> Result<Self> {
        let mut stream = Stream::new(seed);
        let start = forward_sample(model, &mut stream)?;
        Ok(Self::assemble(model, kind, start, stream))
    }

    /// Starts at a given state with a fresh stream for `seed`.
    pub fn from_state(model: &'m Model, kind: SamplerKind, start: Configuration, seed: u64) -> Self {
        Self::assemble(model, kind, start, Stream::new(seed))
    }

    fn assemble(model: &'m Model, kind: SamplerKind, start: Configuration, stream: Stream) -> Self {
        let max_card = model.cardinalities().into_iter().max().unwrap_or(0);
        Self {
            model,
            kind,
            state: start.0,
            stream,
            scratch: vec![0.0; max_card],
            steps: 0,
        }
    }

    pub fn state(&self) -> Configuration {
        Configuration(self.state.clone())
    }

    pub fn state_slice(&self) -> &[usize] {
        &self.state
    }

    /// Moves the chain to `state`; the stream carries on where it was.
    pub fn set_state(&mut self, state: &Configuration) {
        self.state.clone_from(&state.0);
    }

    /// Steps (or sweeps) taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn update(&mut self, site: usize) -> Result<()> {
        let w = &mut self.scratch[..self.model.cardinality(site)];
        let total = self.model.local_weights(site, &mut self.state, w);
        if total <= 0.0 {
            return Err(Error::Stuck {
                step: self.steps,
                site: self.model.site_id(site).to_string(),
            });
        }
        self.state[site] = self.stream.categorical(w, total);
        Ok(())
    }

    fn sweep_site(&self, k: usize) -> usize {
        match &self.kind {
            SamplerKind::Periodic { sweep_order } => sweep_order[k],
            SamplerKind::Rsgs { .. } => unreachable!("only periodic chains sweep"),
        }
    }

    /// One random-scan step or one periodic sweep.
    pub fn step(&mut self) -> Result<()> {
        match &self.kind {
            SamplerKind::Rsgs { alpha } => {
                let site = self.stream.categorical(alpha.as_slice(), alpha.as_slice().iter().sum());
                self.update(site)?;
            }
            SamplerKind::Periodic { sweep_order } => {
                for k in 0..sweep_order.len() {
                    self.update(self.sweep_site(k))?;
                }
            }
        }
        self.steps += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub config: SamplerConfig,
    pub initial: Configuration,
    /// Steps (random scan) or sweeps (periodic) taken, burn-in included.
    pub raw_steps: u64,
}

/// Retained samples of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<Configuration>,
    pub meta: TraceMeta,
}

/// Runs one chain: `burn_in` discarded steps, then `n_samples` samples each
/// taken after `thinning` further steps.
pub fn run(model: &Model, cfg: &SamplerConfig) -> Result<Trace> {
    cfg.check(model)?;
    let mut chain = GibbsChain::new(model, cfg.kind.clone(), cfg.seed)?;
    let initial = chain.state();
    for _ in 0..cfg.burn_in {
        chain.step()?;
    }
    let mut samples = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        for _ in 0..cfg.thinning {
            chain.step()?;
        }
        samples.push(chain.state());
    }
    Ok(Trace {
        samples,
        meta: TraceMeta {
            config: cfg.clone(),
            initial,
            raw_steps: chain.steps(),
        },
    })
}

pub fn rsgs_run(model: &Model, cfg: &SamplerConfig) -> Result<Trace> {
    match cfg.kind {
        SamplerKind::Rsgs { .. } => run(model, cfg),
        SamplerKind::Periodic { .. } => Err(Error::Shape("rsgs_run needs a random-scan config".into())),
    }
}

pub fn periodic_run(model: &Model, cfg: &SamplerConfig) -> Result<Trace> {
    match cfg.kind {
        SamplerKind::Periodic { .. } => run(model, cfg),
        SamplerKind::Rsgs { .. } => Err(Error::Shape("periodic_run needs a periodic config".into())),
    }
}

/// Runs `chains` independent chains in parallel; chain `i` uses seed
/// `child_seed(cfg.seed, i)`. Output order follows `i`.
pub fn run_chains(model: &Model, cfg: &SamplerConfig, chains: u64) -> Result<Vec<Trace>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|i| {
                let mut c = cfg.clone();
                c.seed = child_seed(cfg.seed, i);
                scope.spawn(move || run(model, &c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    })
}

impl Trace {
    /// Tab-separated export: `#` metadata lines, a header of parameter ids
    /// in chain order, then one line of class ids per sample.
    pub fn to_tsv(&self, model: &Model) -> String {
        let cfg = &self.meta.config;
        let mut out = String::new();
        writeln!(out, "# usage-testgen trace").unwrap();
        writeln!(out, "# model: {}", model.name()).unwrap();
        writeln!(out, "# sampler: {}", cfg.kind.name()).unwrap();
        match &cfg.kind {
            SamplerKind::Rsgs { alpha } => {
                let a: Vec<String> = alpha.as_slice().iter().map(|x| g17(*x)).collect();
                writeln!(out, "# alpha: {}", a.join(",")).unwrap();
            }
            SamplerKind::Periodic { sweep_order } => {
                let ids: Vec<&str> = sweep_order.iter().map(|&s| model.site_id(s)).collect();
                writeln!(out, "# sweep_order: {}", ids.join(",")).unwrap();
            }
        }
        writeln!(out, "# burn_in: {}", cfg.burn_in).unwrap();
        writeln!(out, "# thinning: {}", cfg.thinning).unwrap();
        writeln!(out, "# n_samples: {}", cfg.n_samples).unwrap();
        writeln!(out, "# seed: {}", cfg.seed).unwrap();
        writeln!(out, "# initial: {}", model.class_ids(&self.meta.initial).join("\t")).unwrap();
        writeln!(out, "# raw_steps: {}", self.meta.raw_steps).unwrap();
        writeln!(out, "{}", model.site_ids().collect::<Vec<_>>().join("\t")).unwrap();
        for x in &self.samples {
            writeln!(out, "{}", model.class_ids(x).join("\t")).unwrap();
        }
        out
    }

    /// Per-site empirical class frequencies.
    pub fn marginals(&self, model: &Model) -> Vec<Vec<f64>> {
        let mut counts: Vec<Vec<f64>> = model.cardinalities().into_iter().map(|c| vec![0.0; c]).collect();
        for x in &self.samples {
            for (s, &c) in x.0.iter().enumerate() {
                counts[s][c] += 1.0;
            }
        }
        let n = self.samples.len().max(1) as f64;
        counts
            .into_iter()
            .map(|row| row.into_iter().map(|c| c / n).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::tv_distance;
    use crate::exact::{joint_distribution, DEFAULT_LIMIT};
    use crate::model::UsageModel;
    use crate::reference;

    fn single_site() -> Model {
        let mut u = UsageModel::new("single");
        u.parameters = vec![crate::model::Parameter::with_classes("w", &["a", "b", "c"])];
        u.chain_order = vec!["w".into()];
        u.cpts = vec![crate::model::ConditionalProbabilityTable::unconditioned(
            "w",
            &[("a", 0.2), ("b", 0.5), ("c", 0.3)],
        )];
        Model::compile(&u).unwrap()
    }

    #[test]
    fn alpha_validation() {
        assert!(AlphaVector::new(vec![0.5, 0.5]).is_ok());
        assert!(AlphaVector::new(vec![1.0]).is_ok());
        assert!(AlphaVector::new(vec![1.0, 0.0]).is_err());
        assert!(AlphaVector::new(vec![0.6, 0.6]).is_err());
        assert!(AlphaVector::new(vec![0.9]).is_err());
        assert!(AlphaVector::parse("0.25, 0.75").is_ok());
        assert!(AlphaVector::parse("0.25,x").is_err());
    }

    #[test]
    fn forced_initial_state() {
        let mut u = reference::m_tiny().source().clone();
        u.constraints = u.constraints.forbid(&[("time", "day"), ("weather", "rain")]);
        u.constraints = u.constraints.forbid(&[("time", "day"), ("weather", "fog")]);
        u.constraints = u.constraints.forbid(&[("time", "day"), ("weather", "sunny")]);
        u.constraints = u.constraints.forbid(&[("time", "night"), ("weather", "fog")]);
        let m = Model::compile(&u).unwrap();
        for seed in 0..20 {
            let x = initial_state(&m, seed).unwrap();
            assert_eq!(m.class_ids(&x), vec!["night", "rain"]);
        }
    }

    #[test]
    fn dead_end_is_infeasible() {
        let mut u = reference::m_tiny().source().clone();
        u.cpts[0] = crate::model::ConditionalProbabilityTable::unconditioned("time", &[("day", 0.0), ("night", 1.0)]);
        for w in ["rain", "fog"] {
            u.constraints = u.constraints.forbid(&[("time", "night"), ("weather", w)]);
        }
        let m = Model::compile(&u).unwrap();
        assert!(matches!(initial_state(&m, 1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn empty_trace_keeps_meta() {
        let m = reference::m_tiny();
        let cfg = SamplerConfig::rsgs(&m, 0, 5);
        let t = rsgs_run(&m, &cfg).unwrap();
        assert!(t.samples.is_empty());
        assert_eq!(t.meta.raw_steps, DEFAULT_BURN_IN_RSGS);
        assert_eq!(t.meta.initial, initial_state(&m, 5).unwrap());
    }

    #[test]
    fn single_site_draws_are_iid_from_the_table() {
        let m = single_site();
        let exact = [0.2, 0.5, 0.3];
        for cfg in [SamplerConfig::rsgs(&m, 100_000, 7), SamplerConfig::periodic(&m, 100_000, 7)] {
            let t = run(&m, &cfg).unwrap();
            let tv = tv_distance(&t.marginals(&m)[0], &exact).unwrap();
            assert!(tv <= 0.01, "{} tv {tv}", cfg.kind.name());
        }
    }

    #[test]
    fn tiny_marginals_with_thinning() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let cfg = SamplerConfig::rsgs(&m, 200_000, 1).burn_in(1000).thinning(5);
        let t = rsgs_run(&m, &cfg).unwrap();
        assert_eq!(t.meta.raw_steps, 1000 + 5 * 200_000);
        for (s, emp) in t.marginals(&m).iter().enumerate() {
            assert!(tv_distance(emp, &d.marginal(s)).unwrap() <= 0.01);
        }
    }

    #[test]
    fn sweep_direction_does_not_matter_for_marginals() {
        let m = reference::load(reference::REF4).unwrap();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let fwd = SamplerConfig::periodic(&m, 100_000, 3);
        let rev = fwd.clone().sweep_order((0..m.len()).rev().collect());
        let a = periodic_run(&m, &fwd).unwrap();
        let b = periodic_run(&m, &rev).unwrap();
        assert_ne!(a.samples, b.samples);
        for t in [&a, &b] {
            for (s, emp) in t.marginals(&m).iter().enumerate() {
                assert!(tv_distance(emp, &d.marginal(s)).unwrap() <= 0.01);
            }
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let m = reference::load(reference::REF6).unwrap();
        let cfg = SamplerConfig::rsgs(&m, 500, 99).thinning(3);
        assert_eq!(run(&m, &cfg).unwrap(), run(&m, &cfg).unwrap());
        let chains = run_chains(&m, &cfg, 3).unwrap();
        assert_eq!(chains, run_chains(&m, &cfg, 3).unwrap());
        assert_ne!(chains[0].samples, chains[1].samples);
        let mut c1 = cfg.clone();
        c1.seed = child_seed(99, 1);
        assert_eq!(chains[1], run(&m, &c1).unwrap());
    }

    #[test]
    fn wrong_kind_and_bad_config() {
        let m = reference::m_tiny();
        assert!(periodic_run(&m, &SamplerConfig::rsgs(&m, 1, 1)).is_err());
        assert!(rsgs_run(&m, &SamplerConfig::periodic(&m, 1, 1)).is_err());
        assert!(run(&m, &SamplerConfig::rsgs(&m, 1, 1).thinning(0)).is_err());
        assert!(run(&m, &SamplerConfig::periodic(&m, 1, 1).sweep_order(vec![0, 0])).is_err());
        let bad_alpha = SamplerConfig::rsgs(&m, 1, 1).alpha(AlphaVector::uniform(3));
        assert!(run(&m, &bad_alpha).is_err());
    }

    #[test]
    fn stuck_state_is_reported() {
        // (day, dark) has zero weight and night is forbidden with dark,
        // so updating `time` finds no mass.
        let mut u = reference::load(reference::FROZEN).unwrap().source().clone();
        u.constraints = u.constraints.forbid(&[("time", "night"), ("light", "dark")]);
        let g = Model::compile(&u).unwrap();
        let bad = g.configuration(&[("time", "day"), ("light", "dark")]).unwrap();
        let kind = SamplerKind::Periodic { sweep_order: vec![0, 1] };
        let mut chain = GibbsChain::from_state(&g, kind, bad, 0);
        assert!(matches!(chain.step(), Err(Error::Stuck { .. })));
    }

    #[test]
    fn tsv_layout() {
        let m = reference::m_tiny();
        let t = run(&m, &SamplerConfig::rsgs(&m, 3, 11)).unwrap();
        let tsv = t.to_tsv(&m);
        let lines: Vec<&str> = tsv.lines().collect();
        let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert_eq!(lines[header], "time\tweather");
        assert_eq!(lines.len() - header - 1, 3);
        assert!(tsv.contains("# alpha: 0.5,0.5\n"));
    }
}
