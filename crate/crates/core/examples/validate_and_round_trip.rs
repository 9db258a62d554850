//! Parse a model file, list its diagnostics, and write it back canonically.
//!
//! ```text
//! cargo run --example validate_and_round_trip -- path/to/model.usage.json
//! ```

use usage_testgen::{parse_model, reference, serialize_model, validate_model, Error};

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable model file"),
        None => reference::REF6.to_string(),
    };
    match parse_model(&text) {
        Ok(model) => {
            let report = validate_model(&model);
            for d in &report.diagnostics {
                println!("{d}");
            }
            println!("{} errors, {} warnings", report.error_count(), report.warning_count());
            let canonical = serialize_model(&model);
            let again = serialize_model(&parse_model(&canonical).unwrap());
            println!("canonical form is a fixed point: {}", canonical == again);
        }
        Err(Error::Invalid(diags)) => {
            for d in &diags {
                println!("{d}");
            }
        }
        Err(e) => println!("{e}"),
    }

    // a broken table: rows must sum to 1
    let broken = reference::M_TINY.replace("0.7", "0.8");
    if let Err(Error::Invalid(diags)) = parse_model(&broken) {
        println!("broken copy: {}", diags[0]);
    }
}
