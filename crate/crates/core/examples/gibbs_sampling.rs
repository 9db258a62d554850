//! Draw configurations with the random-scan and periodic Gibbs samplers
//! and compare their marginals with the exact ones.

use usage_testgen::convergence::tv_distance;
use usage_testgen::exact::{joint_distribution, DEFAULT_LIMIT};
use usage_testgen::reference;
use usage_testgen::sampler::{initial_state, run, run_chains, AlphaVector, SamplerConfig};

fn main() -> usage_testgen::Result<()> {
    let model = reference::load(reference::REF4)?;
    let dist = joint_distribution(&model, DEFAULT_LIMIT)?;
    println!("initial state for seed 7: {}", model.display(&initial_state(&model, 7)?));

    let rsgs = SamplerConfig::rsgs(&model, 50_000, 7).alpha(AlphaVector::parse("0.4,0.2,0.2,0.2")?);
    let periodic = SamplerConfig::periodic(&model, 50_000, 7).thinning(2);
    for cfg in [rsgs, periodic] {
        let trace = run(&model, &cfg)?;
        let worst = trace
            .marginals(&model)
            .iter()
            .enumerate()
            .map(|(s, emp)| tv_distance(emp, &dist.marginal(s)).unwrap())
            .fold(0.0, f64::max);
        println!("{:<8} {} raw steps, worst marginal TV {worst:.4}", cfg.kind.name(), trace.meta.raw_steps);
    }

    // independent chains, seeded from one master seed
    let short = SamplerConfig::rsgs(&model, 3, 7).burn_in(50);
    for (i, t) in run_chains(&model, &short, 2)?.iter().enumerate() {
        println!("chain {i}:");
        print!("{}", t.to_tsv(&model).lines().filter(|l| !l.starts_with('#')).map(|l| format!("  {l}\n")).collect::<String>());
    }
    Ok(())
}
