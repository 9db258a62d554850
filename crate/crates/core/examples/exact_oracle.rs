//! Enumerate the joint distribution and query it: marginals, full
//! conditionals, energies, Markov locality and positivity.

use usage_testgen::exact::{check_positivity, joint_distribution, DEFAULT_LIMIT};
use usage_testgen::model::neighborhoods;
use usage_testgen::reference;

fn main() -> usage_testgen::Result<()> {
    let model = reference::m_tiny();
    let dist = joint_distribution(&model, DEFAULT_LIMIT)?;

    println!("support {} (raw mass {:.2})", dist.len(), dist.z_raw());
    for (x, p) in dist.configs().iter().zip(dist.probs()) {
        println!("  {:<32} p = {p:.6}  U = {:.4}", model.display(x).to_string(), dist.energy_of(x));
    }

    for site in 0..model.len() {
        println!("marginal {}: {:?}", model.site_id(site), dist.marginal(site));
    }

    let night_rain = model.configuration(&[("time", "night"), ("weather", "rain")])?;
    println!("P(time | weather=rain) = {:?}", dist.full_conditional(0, &night_rain)?);

    let nbhd = neighborhoods(&model);
    println!("neighbors of weather: {:?}", nbhd.of_id("weather").unwrap());
    println!("locality residual {:.1e}", dist.markov_locality_residual(&nbhd));

    let pos = check_positivity(&dist, &model, DEFAULT_LIMIT)?;
    println!("positivity holds: {} ({} zero-probability configurations)", pos.holds, pos.zero_count);
    Ok(())
}
