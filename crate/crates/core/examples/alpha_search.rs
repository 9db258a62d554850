//! Tune the random-scan site probabilities to minimize Dobrushin's
//! coefficient of the kernel.

use usage_testgen::convergence::{optimize_alpha, DEFAULT_ALPHA_BUDGET};
use usage_testgen::exact::{joint_distribution, DEFAULT_LIMIT};
use usage_testgen::reference;

fn main() -> usage_testgen::Result<()> {
    for text in [reference::ASYM2, reference::SYMMETRIC2, reference::M_TINY] {
        let model = reference::load(text)?;
        let dist = joint_distribution(&model, DEFAULT_LIMIT)?;
        let r = optimize_alpha(&model, &dist, DEFAULT_ALPHA_BUDGET)?;
        let alpha: Vec<String> = model
            .site_ids()
            .zip(r.alpha.as_slice())
            .map(|(id, a)| format!("{id}={a:.4}"))
            .collect();
        println!(
            "{:<12} {}  delta {:.6} (uniform {:.6}, {} evaluations)",
            model.name(),
            alpha.join(" "),
            r.dobrushin,
            r.uniform_dobrushin,
            r.evaluations
        );
    }
    Ok(())
}
