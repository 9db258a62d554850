//! Drive the command line from code, capturing its streams.

use usage_testgen::cli;

fn main() {
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/models/m_tiny.usage.json");
    for args in [
        vec!["usage-testgen", "validate", model],
        vec!["usage-testgen", "campaign", model, "--strategy", "topk", "--size", "3", "--format", "csv"],
        vec!["usage-testgen", "exact", model, "--limit", "2"],
    ] {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli::run(&args, None, &mut out, &mut err);
        println!("$ {}  -> exit {code}", args[1..].join(" "));
        print!("{}{}", String::from_utf8_lossy(&out), String::from_utf8_lossy(&err));
    }
}
