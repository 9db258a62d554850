//! Fuse dependent parameters into one macro-parameter without changing
//! the joint distribution.

use usage_testgen::exact::{joint_distribution, merge_parameters, DEFAULT_LIMIT};
use usage_testgen::{reference, Model};

fn main() -> usage_testgen::Result<()> {
    let model = reference::load(reference::DAYNIGHT_BRIGHTNESS)?;
    let merged = Model::compile(&merge_parameters(&model, &["time", "brightness"], DEFAULT_LIMIT)?)?;
    println!("{} -> {} parameters", model.len(), merged.len());

    let before = joint_distribution(&model, DEFAULT_LIMIT)?;
    let after = joint_distribution(&merged, DEFAULT_LIMIT)?;
    for ((x, p), (y, q)) in before.configs().iter().zip(before.probs()).zip(after.configs().iter().zip(after.probs())) {
        println!("{:<40} {p:.6}   {:<28} {q:.6}", model.display(x).to_string(), merged.display(y).to_string());
    }

    // merging across an unrelated parameter that depends on the pair is refused
    let ref6 = reference::load(reference::REF6)?;
    if let Err(e) = merge_parameters(&ref6, &["time", "road"], DEFAULT_LIMIT) {
        println!("{e}");
    }
    Ok(())
}
