//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use usage_testgen::campaign::{
    coverage_report, dedupe, export_campaign, generate_campaign, profile_cases_to_full_coverage, ExportFormat,
    Strategy, TestCampaign,
};
use usage_testgen::convergence::{
    build_kernel, contraction_table, detailed_balance_residual, diagnostics, dobrushin, optimize_alpha,
    stationarity_residual, tv_distance, TransitionMatrix, DEFAULT_ALPHA_BUDGET,
};
use usage_testgen::exact::{joint_distribution, macro_class_id, merge_parameters, JointDistribution, DEFAULT_LIMIT};
use usage_testgen::model::{is_feasible, neighborhoods};
use usage_testgen::reference::{self, load};
use usage_testgen::rng::Stream;
use usage_testgen::sampler::{run, AlphaVector, GibbsChain, SamplerConfig, SamplerKind};
use usage_testgen::{Model, Result};

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn named_models() -> Vec<(&'static str, &'static str)> {
    vec![
        ("m_tiny", reference::M_TINY),
        ("ref4", reference::REF4),
        ("ref6", reference::REF6),
        ("daynight_brightness", reference::DAYNIGHT_BRIGHTNESS),
        ("asym2", reference::ASYM2),
        ("symmetric2", reference::SYMMETRIC2),
        ("frozen", reference::FROZEN),
        ("big", reference::BIG),
    ]
}

/// Enough to enumerate every checked-in model, including `big`.
const FULL_LIMIT: usize = 1_100_000;

fn constrained() -> Vec<(&'static str, Model)> {
    [("m_tiny", reference::M_TINY), ("ref4", reference::REF4), ("ref6", reference::REF6)]
        .into_iter()
        .map(|(n, t)| (n, load(t).unwrap()))
        .collect()
}

fn uniform(m: &Model) -> SamplerKind {
    SamplerKind::Rsgs {
        alpha: AlphaVector::uniform(m.len()),
    }
}

fn forward(m: &Model) -> SamplerKind {
    SamplerKind::Periodic {
        sweep_order: (0..m.len()).collect(),
    }
}

fn stationarity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (_, m) in constrained() {
        let d = joint_distribution(&m, DEFAULT_LIMIT).map_err(|e| e.to_string())?;
        for kind in [uniform(&m), forward(&m)] {
            let p = build_kernel(&m, &d, &kind).map_err(|e| e.to_string())?;
            worst = worst.max(stationarity_residual(&p, d.probs()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && secs < 5.0,
        format!("max |piP - pi| = {worst:.2e} over 3 models x 2 kernels in {secs:.3} s"),
    )
}

fn reversibility() -> Outcome {
    let mut worst = 0.0f64;
    for (_, m) in constrained() {
        let d = joint_distribution(&m, DEFAULT_LIMIT).map_err(|e| e.to_string())?;
        let p = build_kernel(&m, &d, &uniform(&m)).map_err(|e| e.to_string())?;
        worst = worst.max(detailed_balance_residual(&p, d.probs()));
    }
    check(worst <= 1e-12, format!("max detailed-balance residual {worst:.2e}"))
}

fn locality() -> Outcome {
    let mut worst = 0.0f64;
    let mut names = Vec::new();
    for (name, text) in named_models() {
        let m = load(text).unwrap();
        let d = joint_distribution(&m, FULL_LIMIT).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(d.markov_locality_residual(&neighborhoods(&m)));
        names.push(name);
    }
    check(worst <= 1e-12, format!("max residual {worst:.2e} on {}", names.join(", ")))
}

fn dobrushin_sanity() -> Outcome {
    let id = dobrushin(&TransitionMatrix::identity(2));
    let rank1 = dobrushin(&TransitionMatrix::from_rows(&vec![vec![0.1, 0.6, 0.3]; 3]).unwrap());
    let two = dobrushin(&TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap());
    let m = reference::m_tiny();
    let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
    let p = build_kernel(&m, &d, &uniform(&m)).unwrap();
    let mut min_margin = f64::INFINITY;
    for i in 0..d.len() {
        let mut mu0 = vec![0.0; d.len()];
        mu0[i] = 1.0;
        for row in contraction_table(&p, d.probs(), &mu0, 50).unwrap() {
            min_margin = min_margin.min(row.bound - row.measured);
        }
    }
    check(
        id == 1.0 && rank1 == 0.0 && (two - 0.7).abs() <= 1e-12 && min_margin >= 0.0,
        format!(
            "delta(I)={id}, delta(rank-1)={rank1}, delta([[.9,.1],[.2,.8]])={two:.15}, min contraction margin {min_margin:.3e} (n=1..50, every start state)"
        ),
    )
}

fn marginal_tv(m: &Model, d: &JointDistribution, cfg: &SamplerConfig) -> Result<f64> {
    let t = run(m, cfg)?;
    let mut worst = 0.0f64;
    for (s, emp) in t.marginals(m).iter().enumerate() {
        worst = worst.max(tv_distance(emp, &d.marginal(s))?);
    }
    Ok(worst)
}

fn sampler_fidelity() -> Outcome {
    let m = reference::m_tiny();
    let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
    let rsgs = marginal_tv(&m, &d, &SamplerConfig::rsgs(&m, 200_000, 1).burn_in(1000)).map_err(|e| e.to_string())?;
    let periodic =
        marginal_tv(&m, &d, &SamplerConfig::periodic(&m, 200_000, 1).burn_in(1000)).map_err(|e| e.to_string())?;
    // one macro-parameter carrying the whole joint of M_tiny
    let single = Model::compile(&merge_parameters(&m, &["time", "weather"], DEFAULT_LIMIT).unwrap()).unwrap();
    let ds = joint_distribution(&single, DEFAULT_LIMIT).unwrap();
    let iid = marginal_tv(&single, &ds, &SamplerConfig::rsgs(&single, 100_000, 7)).map_err(|e| e.to_string())?;
    check(
        rsgs <= 0.01 && periodic <= 0.01 && iid <= 0.01,
        format!("marginal TV: rsgs {rsgs:.4}, periodic {periodic:.4}, single-site {iid:.4}"),
    )
}

fn kernel_agreement() -> Outcome {
    let m = reference::m_tiny();
    let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
    let mut worst = 0.0f64;
    for (k, kind) in [uniform(&m), forward(&m)].into_iter().enumerate() {
        let p = build_kernel(&m, &d, &kind).unwrap();
        for (i, x) in d.configs().iter().enumerate() {
            let mut chain = GibbsChain::from_state(&m, kind.clone(), x.clone(), 1000 + 10 * k as u64 + i as u64);
            let mut counts = vec![0.0; d.len()];
            for _ in 0..100_000 {
                chain.set_state(x);
                chain.step().unwrap();
                counts[d.index_of(&chain.state()).unwrap()] += 1.0;
            }
            let freq: Vec<f64> = counts.iter().map(|c| c / 100_000.0).collect();
            worst = worst.max(tv_distance(&freq, p.row(i)).unwrap());
        }
    }
    check(worst <= 0.01, format!("max row TV {worst:.4} over 5 states x 2 kernels"))
}

fn constraint_safety() -> Outcome {
    let models = constrained();
    let per_run = 1_000_000 / (models.len() * 4) + 1;
    let (mut total, mut violations) = (0usize, 0usize);
    for (_, m) in &models {
        let u = m.source();
        for (k, kind) in [uniform(m), forward(m)].into_iter().enumerate() {
            for seed in [11u64, 12] {
                let cfg = SamplerConfig {
                    kind: kind.clone(),
                    burn_in: 100,
                    thinning: 1,
                    n_samples: per_run,
                    seed: seed + 100 * k as u64,
                };
                let t = run(m, &cfg).map_err(|e| e.to_string())?;
                for x in &t.samples {
                    total += 1;
                    if !is_feasible(&m.assignment(x), &u.constraints, &u.parameters).unwrap() {
                        violations += 1;
                    }
                }
            }
        }
    }
    check(
        total >= 1_000_000 && violations == 0,
        format!("{violations} forbidden combinations in {total} samples"),
    )
}

fn merged_joint_gap(m: &Model, ids: &[&str]) -> Result<(f64, usize, usize)> {
    let u = merge_parameters(m, ids, DEFAULT_LIMIT)?;
    let merged = Model::compile(&u)?;
    let d = joint_distribution(m, DEFAULT_LIMIT)?;
    let dm = joint_distribution(&merged, DEFAULT_LIMIT)?;
    let mut gap = 0.0f64;
    for (x, p) in d.configs().iter().zip(d.probs()) {
        let classes = m.class_ids(x);
        let macro_class = macro_class_id(&classes);
        let y = merged.configuration(&[(merged.site_id(0), macro_class.as_str())])?;
        gap = gap.max((dm.probability(&y) - p).abs());
    }
    gap = gap.max((dm.probs().iter().sum::<f64>() - 1.0).abs());
    Ok((gap, m.len(), merged.len()))
}

fn merge_preservation() -> Outcome {
    let dn = load(reference::DAYNIGHT_BRIGHTNESS).unwrap();
    let tiny = reference::m_tiny();
    let (g1, a1, b1) = merged_joint_gap(&dn, &["time", "brightness"]).map_err(|e| e.to_string())?;
    let (g2, a2, b2) = merged_joint_gap(&tiny, &["time", "weather"]).map_err(|e| e.to_string())?;
    check(
        g1 <= 1e-12 && g2 <= 1e-12 && b1 + 1 == a1 && b2 + 1 == a2,
        format!("day/night x brightness: gap {g1:.2e}, {a1} -> {b1} params; M_tiny: gap {g2:.2e}, {a2} -> {b2} params"),
    )
}

fn alpha_optimization() -> Outcome {
    let m = load(reference::ASYM2).unwrap();
    let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
    let r = optimize_alpha(&m, &d, DEFAULT_ALPHA_BUDGET).map_err(|e| e.to_string())?;
    let uniform_delta = dobrushin(&build_kernel(&m, &d, &uniform(&m)).unwrap());
    let (grid_a, grid_delta) = (1..20)
        .map(|k| {
            let a = k as f64 * 0.05;
            let kind = SamplerKind::Rsgs {
                alpha: AlphaVector::new(vec![a, 1.0 - a]).unwrap(),
            };
            (a, dobrushin(&build_kernel(&m, &d, &kind).unwrap()))
        })
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    check(
        r.dobrushin <= uniform_delta + 1e-12 && (r.dobrushin - grid_delta).abs() <= 0.05,
        format!(
            "alpha {:?}: delta {:.6} vs uniform {uniform_delta:.6}, grid optimum {grid_delta:.6} at alpha_0 = {grid_a:.2}",
            r.alpha.as_slice(),
            r.dobrushin
        ),
    )
}

fn campaign_determinism() -> Outcome {
    let mut exports = 0;
    for (name, m) in constrained() {
        for (strategy, size) in [(Strategy::Profile, 5), (Strategy::Topk, 5), (Strategy::Coverage, 20)] {
            for format in [ExportFormat::Csv, ExportFormat::Structured] {
                let a = export_campaign(&generate_campaign(&m, strategy, size, 42, DEFAULT_LIMIT).unwrap(), &m, format);
                let b = export_campaign(&generate_campaign(&m, strategy, size, 42, DEFAULT_LIMIT).unwrap(), &m, format);
                if a != b {
                    return Err(format!("{name} {strategy} export differs between runs"));
                }
                exports += 1;
            }
        }
    }
    let m = load(reference::REF6).unwrap();
    let pool = generate_campaign(&m, Strategy::Topk, 40, 0, DEFAULT_LIMIT).unwrap();
    let mut rng = Stream::new(2024);
    for trial in 0..1000 {
        let len = (rng.uniform() * 60.0) as usize;
        let c = TestCampaign {
            cases: (0..len)
                .map(|_| pool.cases[(rng.uniform() * 40.0) as usize].clone())
                .collect(),
            ..pool.clone()
        };
        let once = dedupe(&c);
        let unique: HashSet<_> = once.cases.iter().map(|k| &k.config).collect();
        if dedupe(&once) != once || unique.len() != once.cases.len() || once.duplicates_eliminated != pool.duplicates_eliminated + len - unique.len() {
            return Err(format!("dedupe property broken on trial {trial}"));
        }
    }
    Ok(format!("{exports} exports byte-identical across two runs; dedupe idempotent and unique on 1000 random trials"))
}

fn coverage() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, text) in named_models() {
        let m = load(text).unwrap();
        let c = generate_campaign(&m, Strategy::Coverage, usize::MAX, 42, FULL_LIMIT).map_err(|e| format!("{name}: {e}"))?;
        let full = coverage_report(&c, &m, FULL_LIMIT).class_coverage == 1.0;
        let greedy = c.cases.len();
        let profile = match profile_cases_to_full_coverage(&m, 42, FULL_LIMIT) {
            Ok(n) => n.to_string(),
            Err(usage_testgen::Error::Stall { .. }) => "never (chain cannot leave its start)".into(),
            Err(e) => return Err(format!("{name}: {e}")),
        };
        let not_worse = profile.parse::<usize>().map_or(true, |p| greedy <= p);
        ok &= full && not_worse;
        lines.push(format!("{name} greedy {greedy} / profile {profile}"));
    }
    check(ok, format!("cases to 100% class coverage at seed 42: {}", lines.join("; ")))
}

fn ergodicity_guard() -> Outcome {
    let m = load(reference::FROZEN).unwrap();
    let d = joint_distribution(&m, DEFAULT_LIMIT).unwrap();
    let mu0 = vec![1.0, 0.0];
    let r = diagnostics(&m, &d, &uniform(&m), &mu0, 5).unwrap();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/frozen.usage.json");
    let out = Command::new(env!("CARGO_BIN_EXE_usage-testgen"))
        .args(["analyze", path])
        .output()
        .unwrap();
    let code = out.status.code();
    let stderr = String::from_utf8_lossy(&out.stderr);
    let message = stderr.lines().last().unwrap_or("").to_string();
    check(
        !r.is_ergodic() && code == Some(2) && stderr.contains("reducible"),
        format!("diagnostics ergodic={}, analyze exit {code:?}: {message}", r.is_ergodic()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("stationarity", stationarity),
        ("reversibility", reversibility),
        ("mrf-locality", locality),
        ("dobrushin-sanity", dobrushin_sanity),
        ("sampler-fidelity", sampler_fidelity),
        ("kernel-sampler-agreement", kernel_agreement),
        ("constraint-safety", constraint_safety),
        ("merge-preservation", merge_preservation),
        ("alpha-optimization", alpha_optimization),
        ("campaign-determinism-dedupe", campaign_determinism),
        ("coverage", coverage),
        ("ergodicity-guard", ergodicity_guard),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
