//! Exact transition kernels of the samplers on enumerable models, and the
//! quantities derived from them: stationarity, detailed balance, Dobrushin's
//! coefficient, ergodicity and the contraction table.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::canon::Node;
use crate::error::{Error, Result};
use crate::exact::JointDistribution;
use crate::model::{Configuration, Model};
use crate::sampler::{AlphaVector, SamplerKind};

/// Largest state space for which dense kernels are assembled.
pub const KERNEL_LIMIT: usize = 2048;

/// Tolerance used when checking contraction rows and kernel stochasticity.
pub const TOLERANCE: f64 = 1e-12;

pub const DEFAULT_ALPHA_BUDGET: usize = 2000;

/// Dense row-stochastic matrix over the support of a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    states: Vec<Configuration>,
    n: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit rows; states are left empty.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::Shape(format!("row {i} has a negative or NaN entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(Error::Shape(format!("row {i} sums to {sum}")));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self {
            states: Vec::new(),
            n,
            entries,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            states: Vec::new(),
            n,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n.max(1))
    }

    /// `μP`.
    pub fn apply(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, row) in mu.iter().zip(self.rows()) {
            if *m != 0.0 {
                for (o, p) in out.iter_mut().zip(row) {
                    *o += m * p;
                }
            }
        }
        out
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_residual(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Sparse single-site update kernel `P_s`: row `i` lists `(j, p_ij)`.
type SiteKernel = Vec<Vec<(usize, f64)>>;

fn site_kernel(model: &Model, dist: &JointDistribution, site: usize) -> Result<SiteKernel> {
    let card = model.cardinality(site);
    let mut w = vec![0.0; card];
    dist.configs()
        .iter()
        .map(|x| {
            let mut state = x.classes().to_vec();
            let total = model.local_weights(site, &mut state, &mut w);
            if total <= 0.0 {
                return Err(Error::Stuck {
                    step: 0,
                    site: model.site_id(site).to_string(),
                });
            }
            let mut row = Vec::new();
            for (c, wc) in w.iter().enumerate() {
                if *wc > 0.0 {
                    let j = dist
                        .index_of(&x.with(site, c))
                        .expect("positive local weight outside the support");
                    row.push((j, wc / total));
                }
            }
            Ok(row)
        })
        .collect()
}

fn check_size(dist: &JointDistribution) -> Result<()> {
    if dist.len() > KERNEL_LIMIT {
        return Err(Error::TooLarge {
            limit: KERNEL_LIMIT,
            reached: dist.len() as u128,
        });
    }
    Ok(())
}

fn site_kernels(model: &Model, dist: &JointDistribution) -> Result<Vec<SiteKernel>> {
    check_size(dist)?;
    (0..model.len()).map(|s| site_kernel(model, dist, s)).collect()
}

fn rsgs_from_site_kernels(dist: &JointDistribution, kernels: &[SiteKernel], alpha: &[f64]) -> TransitionMatrix {
    let n = dist.len();
    let mut entries = vec![0.0; n * n];
    for (k, a) in kernels.iter().zip(alpha) {
        for (i, row) in k.iter().enumerate() {
            for &(j, p) in row {
                entries[i * n + j] += a * p;
            }
        }
    }
    TransitionMatrix {
        states: dist.configs().to_vec(),
        n,
        entries,
    }
}

/// The one-step kernel of the given sampler over the support of `dist`,
/// which must be the joint distribution of `model`.
pub fn build_kernel(model: &Model, dist: &JointDistribution, kind: &SamplerKind) -> Result<TransitionMatrix> {
    let kernels = site_kernels(model, dist)?;
    match kind {
        SamplerKind::Rsgs { alpha } => {
            if alpha.len() != model.len() {
                return Err(Error::Shape(format!(
                    "alpha has {} entries for {} parameters",
                    alpha.len(),
                    model.len()
                )));
            }
            Ok(rsgs_from_site_kernels(dist, &kernels, alpha.as_slice()))
        }
        SamplerKind::Periodic { sweep_order } => {
            let n = dist.len();
            let mut entries = Vec::with_capacity(n * n);
            let mut next = vec![0.0; n];
            for i in 0..n {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                for &s in sweep_order {
                    next.iter_mut().for_each(|x| *x = 0.0);
                    for (j, m) in v.iter().enumerate() {
                        if *m != 0.0 {
                            for &(k, p) in &kernels[s][j] {
                                next[k] += m * p;
                            }
                        }
                    }
                    std::mem::swap(&mut v, &mut next);
                }
                entries.extend_from_slice(&v);
            }
            Ok(TransitionMatrix {
                states: dist.configs().to_vec(),
                n,
                entries,
            })
        }
    }
}

/// Dobrushin's coefficient `1 − min_{i,j} Σ_k min(p_ik, p_jk)`.
pub fn dobrushin(p: &TransitionMatrix) -> f64 {
    let mut min_overlap = 1.0f64;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let overlap: f64 = p.row(i).iter().zip(p.row(j)).map(|(a, b)| a.min(*b)).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    (1.0 - min_overlap).clamp(0.0, 1.0)
}

/// Total variation distance, `½ Σ |μ_k − ν_k|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::Shape(format!("lengths {} and {} differ", mu.len(), nu.len())));
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `max_k |(πP)_k − π_k|`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    p.apply(pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `max_{i,j} |π_i p_ij − π_j p_ji|`.
pub fn detailed_balance_residual(p: &TransitionMatrix, pi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            worst = worst.max((pi[i] * p.get(i, j) - pi[j] * p.get(j, i)).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ergodicity {
    pub irreducible: bool,
    /// Period of the chain; only meaningful when irreducible.
    pub period: Option<u64>,
}

impl Ergodicity {
    pub fn is_ergodic(&self) -> bool {
        self.irreducible && self.period == Some(1)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility by forward and backward reachability from state 0;
/// period as the gcd of `level(u) + 1 − level(v)` over all edges.
pub fn ergodicity(p: &TransitionMatrix) -> Ergodicity {
    let n = p.len();
    if n == 0 {
        return Ergodicity {
            irreducible: false,
            period: None,
        };
    }
    let edges = |u: usize| (0..n).filter(move |&v| p.get(u, v) > 0.0);
    let reach = |forward: bool| {
        let mut level = vec![None; n];
        level[0] = Some(0u64);
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            let d = level[u].unwrap();
            for v in 0..n {
                let edge = if forward { p.get(u, v) } else { p.get(v, u) };
                if edge > 0.0 && level[v].is_none() {
                    level[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let fwd = reach(true);
    let irreducible = fwd.iter().all(Option::is_some) && reach(false).iter().all(Option::is_some);
    if !irreducible {
        return Ergodicity {
            irreducible,
            period: None,
        };
    }
    let level: Vec<u64> = fwd.into_iter().map(Option::unwrap).collect();
    let period = (0..n)
        .flat_map(|u| edges(u).map(move |v| (u, v)))
        .fold(0, |g, (u, v)| gcd(g, (level[u] + 1).abs_diff(level[v])));
    Ergodicity {
        irreducible,
        period: Some(period),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    /// `TV(μ₀Pⁿ, π)`.
    pub measured: f64,
    /// `δⁿ · TV(μ₀, π)`.
    pub bound: f64,
    /// `½ · δⁿ · TV(μ₀, π)`, reported only.
    pub half_bound: f64,
}

impl ContractionRow {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound + TOLERANCE
    }

    pub fn margin(&self) -> f64 {
        self.bound + TOLERANCE - self.measured
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub model: String,
    pub sampler: SamplerKind,
    pub states: usize,
    pub row_sum_residual: f64,
    pub stationarity_residual: f64,
    /// Random scan only.
    pub detailed_balance_residual: Option<f64>,
    pub dobrushin: f64,
    pub ergodicity: Ergodicity,
    pub initial_tv: f64,
    pub contraction_table: Vec<ContractionRow>,
}

/// Contraction table `n = 1..=n_max` of `μ₀` under `p` towards `pi`.
pub fn contraction_table(p: &TransitionMatrix, pi: &[f64], mu0: &[f64], n_max: usize) -> Result<Vec<ContractionRow>> {
    let delta = dobrushin(p);
    let tv0 = tv_distance(mu0, pi)?;
    let mut mu = mu0.to_vec();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        mu = p.apply(&mu);
        let bound = delta.powi(n as i32) * tv0;
        out.push(ContractionRow {
            n,
            measured: tv_distance(&mu, pi)?,
            bound,
            half_bound: 0.5 * bound,
        });
    }
    Ok(out)
}

/// Assembles the kernel for `kind` and evaluates every diagnostic, with
/// `mu0` over the support of `dist` in its order.
pub fn diagnostics(
    model: &Model,
    dist: &JointDistribution,
    kind: &SamplerKind,
    mu0: &[f64],
    n_max: usize,
) -> Result<DiagnosticsReport> {
    if mu0.len() != dist.len() {
        return Err(Error::Shape(format!(
            "initial distribution has {} entries for {} states",
            mu0.len(),
            dist.len()
        )));
    }
    let p = build_kernel(model, dist, kind)?;
    let pi = dist.probs();
    Ok(DiagnosticsReport {
        model: model.name().to_string(),
        sampler: kind.clone(),
        states: p.len(),
        row_sum_residual: p.row_sum_residual(),
        stationarity_residual: stationarity_residual(&p, pi),
        detailed_balance_residual: match kind {
            SamplerKind::Rsgs { .. } => Some(detailed_balance_residual(&p, pi)),
            SamplerKind::Periodic { .. } => None,
        },
        dobrushin: dobrushin(&p),
        ergodicity: ergodicity(&p),
        initial_tv: tv_distance(mu0, pi)?,
        contraction_table: contraction_table(&p, pi, mu0, n_max)?,
    })
}

/// Point mass on `state` over the support of `dist`.
pub fn point_mass(dist: &JointDistribution, state: &Configuration) -> Result<Vec<f64>> {
    let i = dist
        .index_of(state)
        .ok_or_else(|| Error::Shape("initial state is outside the support".into()))?;
    let mut mu = vec![0.0; dist.len()];
    mu[i] = 1.0;
    Ok(mu)
}

impl DiagnosticsReport {
    pub fn contraction_holds(&self) -> bool {
        self.contraction_table.iter().all(ContractionRow::holds)
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodicity.is_ergodic()
    }

    pub fn to_node(&self, model: &Model) -> Node {
        let sampler = match &self.sampler {
            SamplerKind::Rsgs { alpha } => Node::obj()
                .field("kind", Node::str("rsgs"))
                .field("alpha", Node::Arr(alpha.as_slice().iter().map(|a| Node::float(*a)).collect())),
            SamplerKind::Periodic { sweep_order } => Node::obj()
                .field("kind", Node::str("periodic"))
                .field("sweep_order", Node::strs(sweep_order.iter().map(|&s| model.site_id(s)))),
        };
        let rows = self
            .contraction_table
            .iter()
            .map(|r| {
                Node::obj()
                    .field("n", Node::Int(r.n as i128))
                    .field("measured_tv", Node::float(r.measured))
                    .field("bound", Node::float(r.bound))
                    .field("half_bound", Node::float(r.half_bound))
                    .field("holds", Node::Bool(r.holds()))
                    .build()
            })
            .collect();
        Node::obj()
            .field("model", Node::str(&self.model))
            .field("sampler", sampler.build())
            .field("states", Node::Int(self.states as i128))
            .field("row_sum_residual", Node::float(self.row_sum_residual))
            .field("stationarity_residual", Node::float(self.stationarity_residual))
            .opt("detailed_balance_residual", self.detailed_balance_residual.map(Node::float))
            .field("dobrushin", Node::float(self.dobrushin))
            .field("irreducible", Node::Bool(self.ergodicity.irreducible))
            .opt("period", self.ergodicity.period.map(|p| Node::Int(p as i128)))
            .field("ergodic", Node::Bool(self.is_ergodic()))
            .field("initial_tv", Node::float(self.initial_tv))
            .field("contraction_holds", Node::Bool(self.contraction_holds()))
            .field("contraction_table", Node::Arr(rows))
            .build()
    }

    /// Plain-text summary with the contraction table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model            {}", self.model);
        let _ = writeln!(out, "sampler          {}", self.sampler.name());
        let _ = writeln!(out, "states           {}", self.states);
        let _ = writeln!(out, "stationarity     {:.3e}", self.stationarity_residual);
        if let Some(db) = self.detailed_balance_residual {
            let _ = writeln!(out, "detailed balance {db:.3e}");
        }
        let _ = writeln!(out, "dobrushin        {}", self.dobrushin);
        let ergodic = match (self.ergodicity.irreducible, self.ergodicity.period) {
            (false, _) => "no (reducible)".to_string(),
            (true, Some(1)) => "yes".to_string(),
            (true, p) => format!("no (period {})", p.unwrap_or(0)),
        };
        let _ = writeln!(out, "ergodic          {ergodic}");
        let _ = writeln!(out, "{:>5}  {:>12}  {:>12}  {:>12}", "n", "tv", "bound", "half bound");
        for r in &self.contraction_table {
            let _ = writeln!(
                out,
                "{:>5}  {:>12.4e}  {:>12.4e}  {:>12.4e}{}",
                r.n,
                r.measured,
                r.bound,
                r.half_bound,
                if r.holds() { "" } else { "  VIOLATED" }
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSearchResult {
    pub alpha: AlphaVector,
    pub dobrushin: f64,
    /// `δ` at uniform α, the starting point.
    pub uniform_dobrushin: f64,
    pub evaluations: usize,
}

/// Lower bound kept on every α entry during the search.
const ALPHA_FLOOR: f64 = 1e-6;

/// Euclidean projection onto `{x : x_i ≥ floor, Σ x = 1}`.
fn project(v: &[f64], floor: f64) -> Vec<f64> {
    let budget = 1.0 - floor * v.len() as f64;
    let shifted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - budget) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = shifted.iter().map(|u| (u - theta).max(0.0) + floor).collect();
    let sum: f64 = x.iter().sum();
    x.iter_mut().for_each(|a| *a /= sum);
    x
}

/// Projected coordinate search minimizing `δ(P(α))` for the random-scan
/// kernel, starting from uniform α with step halving. Stops after `budget`
/// evaluations or once the step drops below 1e-4.
pub fn optimize_alpha(model: &Model, dist: &JointDistribution, budget: usize) -> Result<AlphaSearchResult> {
    let v = model.len();
    let kernels = site_kernels(model, dist)?;
    let eval = |a: &[f64]| dobrushin(&rsgs_from_site_kernels(dist, &kernels, a));
    let mut best = vec![1.0 / v as f64; v];
    let mut best_delta = eval(&best);
    let uniform_dobrushin = best_delta;
    let mut evaluations = 1;
    if v >= 2 {
        let mut step = 0.5 / v as f64;
        'search: while step >= 1e-4 {
            let mut improved = false;
            for s in 0..v {
                for dir in [1.0, -1.0] {
                    if evaluations >= budget {
                        break 'search;
                    }
                    let spill = step / (v - 1) as f64;
                    let moved: Vec<f64> = best
                        .iter()
                        .enumerate()
                        .map(|(t, a)| if t == s { a + dir * step } else { a - dir * spill })
                        .collect();
                    let candidate = project(&moved, ALPHA_FLOOR);
                    let delta = eval(&candidate);
                    evaluations += 1;
                    if delta < best_delta - 1e-15 {
                        best = candidate;
                        best_delta = delta;
                        improved = true;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
    }
    let alpha = if v == 1 {
        AlphaVector::new(vec![1.0])?
    } else {
        AlphaVector::new(best)?
    };
    Ok(AlphaSearchResult {
        alpha,
        dobrushin: best_delta,
        uniform_dobrushin,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{joint_distribution, DEFAULT_LIMIT};
    use crate::reference;

    fn uniform(m: &Model) -> SamplerKind {
        SamplerKind::Rsgs {
            alpha: AlphaVector::uniform(m.len()),
        }
    }

    #[test]
    fn dobrushin_reference_values() {
        assert_eq!(dobrushin(&TransitionMatrix::identity(2)), 1.0);
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::from_rows(&vec![vec![1.0]; 2]).is_err());
        let rank1 = TransitionMatrix::from_rows(&vec![vec![0.2, 0.3, 0.5]; 3]).unwrap();
        assert_eq!(dobrushin(&rank1), 0.0);
        let p = TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        assert!((dobrushin(&p) - 0.7).abs() <= 1e-12);
    }

    #[test]
    fn tv_reference_values() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.7, 0.3], &[0.5, 0.5]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(tv_distance(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
    }

    #[test]
    fn single_site_kernel_is_rank_one() {
        let m = reference::load(reference::SYMMETRIC2).unwrap();
        let u = crate::exact::merge_parameters(&m, &["x", "y"], DEFAULT_LIMIT).unwrap();
        let m1 = Model::compile(&u).unwrap();
        let d = joint_distribution(&m1, DEFAULT_LIMIT).unwrap();
        let p = build_kernel(&m1, &d, &uniform(&m1)).unwrap();
        for row in p.rows() {
            for (a, b) in row.iter().zip(d.probs()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert!(dobrushin(&p) < 1e-15);
    }

    #[test]
    fn tiny_kernel_by_hand() {
        // Support in lexicographic order:
        // 0 (day,sunny) .35  1 (day,rain) .21  2 (day,fog) .14
        // 3 (night,rain) .15  4 (night,fog) .09   (z = .94)
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let p = build_kernel(&m, &d, &uniform(&m)).unwrap();
        let w = [0.35, 0.21, 0.14, 0.15, 0.09];
        let mut oracle = [[0.0f64; 5]; 5];
        let time_blocks: [&[usize]; 3] = [&[0], &[1, 3], &[2, 4]];
        let weather_blocks: [&[usize]; 2] = [&[0, 1, 2], &[3, 4]];
        for blocks in [&time_blocks[..], &weather_blocks[..]] {
            for b in blocks {
                let z: f64 = b.iter().map(|&k| w[k]).sum();
                for &i in *b {
                    for &j in *b {
                        oracle[i][j] += 0.5 * w[j] / z;
                    }
                }
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                assert!((p.get(i, j) - oracle[i][j]).abs() < 1e-15, "{i} {j}");
            }
        }
    }

    #[test]
    fn stationarity_and_balance_on_reference_models() {
        for text in reference::CONSTRAINED {
            let m = reference::load(text).unwrap();
            let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
            let periodic = SamplerKind::Periodic {
                sweep_order: (0..m.len()).collect(),
            };
            for kind in [uniform(&m), periodic] {
                let p = build_kernel(&m, &d, &kind).unwrap();
                assert!(p.row_sum_residual() <= 1e-12);
                assert!(stationarity_residual(&p, d.probs()) <= 1e-12);
                if matches!(kind, SamplerKind::Rsgs { .. }) {
                    assert!(detailed_balance_residual(&p, d.probs()) <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn frozen_model_is_reducible() {
        let m = reference::load(reference::FROZEN).unwrap();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let p = build_kernel(&m, &d, &uniform(&m)).unwrap();
        assert_eq!(p, TransitionMatrix { states: d.configs().to_vec(), ..TransitionMatrix::identity(2) });
        let e = ergodicity(&p);
        assert!(!e.irreducible && !e.is_ergodic());
        assert_eq!(dobrushin(&p), 1.0);
    }

    #[test]
    fn periodicity_is_detected() {
        let flip = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = ergodicity(&flip);
        assert!(e.irreducible);
        assert_eq!(e.period, Some(2));
        let lazy = TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!(ergodicity(&lazy).is_ergodic());
    }

    #[test]
    fn contraction_on_tiny() {
        let m = reference::m_tiny();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let mu0 = point_mass(&d, &m.configuration(&[("time", "night"), ("weather", "fog")]).unwrap()).unwrap();
        let r = diagnostics(&m, &d, &uniform(&m), &mu0, 50).unwrap();
        assert!(r.is_ergodic());
        assert!(r.contraction_holds());
        assert!(r.contraction_table.windows(2).all(|w| w[1].bound <= w[0].bound));
        assert!(r.to_node(&m).render().contains("\"contraction_holds\": true"));
    }

    #[test]
    fn projection_stays_on_the_simplex() {
        let x = project(&[0.9, 0.3, -0.2], 1e-6);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(x.iter().all(|a| *a >= 1e-6 * 0.999));
        let y = project(&[0.2, 0.3, 0.5], 1e-6);
        for (a, b) in y.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn grid_oracle(m: &Model, d: &JointDistribution) -> f64 {
        let kernels = site_kernels(m, d).unwrap();
        (1..20)
            .map(|k| {
                let a = k as f64 * 0.05;
                dobrushin(&rsgs_from_site_kernels(d, &kernels, &[a, 1.0 - a]))
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn alpha_search_beats_uniform_and_matches_grid() {
        let m = reference::load(reference::ASYM2).unwrap();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let r = optimize_alpha(&m, &d, DEFAULT_ALPHA_BUDGET).unwrap();
        assert!(r.dobrushin <= r.uniform_dobrushin + 1e-12);
        assert!((r.dobrushin - grid_oracle(&m, &d)).abs() <= 0.05);
    }

    #[test]
    fn symmetric_model_keeps_uniform_alpha() {
        let m = reference::load(reference::SYMMETRIC2).unwrap();
        let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
        let r = optimize_alpha(&m, &d, DEFAULT_ALPHA_BUDGET).unwrap();
        assert!(r.alpha.as_slice().iter().all(|a| (a - 0.5).abs() <= 0.05), "{:?}", r.alpha);
        assert!(r.dobrushin <= grid_oracle(&m, &d) + 1e-12);
    }
}
