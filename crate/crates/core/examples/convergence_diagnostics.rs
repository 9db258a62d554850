//! Assemble the samplers' exact kernels and check stationarity, detailed
//! balance, ergodicity and Dobrushin contraction.

use usage_testgen::convergence::{build_kernel, diagnostics, dobrushin, point_mass};
use usage_testgen::exact::{joint_distribution, DEFAULT_LIMIT};
use usage_testgen::reference;
use usage_testgen::sampler::{initial_state, AlphaVector, SamplerKind};

fn main() -> usage_testgen::Result<()> {
    let model = reference::m_tiny();
    let dist = joint_distribution(&model, DEFAULT_LIMIT)?;
    let rsgs = SamplerKind::Rsgs { alpha: AlphaVector::uniform(model.len()) };

    let p = build_kernel(&model, &dist, &rsgs)?;
    for (x, row) in dist.configs().iter().zip(p.rows()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("{:<32} {}", model.display(x).to_string(), cells.join(" "));
    }
    println!("dobrushin {:.4}", dobrushin(&p));

    let mu0 = point_mass(&dist, &initial_state(&model, 0)?)?;
    let periodic = SamplerKind::Periodic { sweep_order: vec![1, 0] };
    for kind in [rsgs, periodic] {
        let report = diagnostics(&model, &dist, &kind, &mu0, 8)?;
        println!();
        print!("{}", report.table());
    }

    // a deterministic dependency freezes the chain
    let frozen = reference::load(reference::FROZEN)?;
    let fd = joint_distribution(&frozen, DEFAULT_LIMIT)?;
    let kind = SamplerKind::Rsgs { alpha: AlphaVector::uniform(2) };
    let report = diagnostics(&frozen, &fd, &kind, &[0.5, 0.5], 1)?;
    println!("\nfrozen model ergodic: {}", report.is_ergodic());
    Ok(())
}
