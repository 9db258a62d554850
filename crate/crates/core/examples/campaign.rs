//! Generate test campaigns with each strategy, measure their coverage and
//! export them.

use usage_testgen::campaign::{coverage_report, export_campaign, generate_campaign, ExportFormat, Strategy};
use usage_testgen::exact::DEFAULT_LIMIT;
use usage_testgen::reference;

fn main() -> usage_testgen::Result<()> {
    let model = reference::load(reference::REF6)?;
    for (strategy, size) in [(Strategy::Profile, 12), (Strategy::Topk, 12), (Strategy::Coverage, 12)] {
        let c = generate_campaign(&model, strategy, size, 42, DEFAULT_LIMIT)?;
        let cov = coverage_report(&c, &model, DEFAULT_LIMIT);
        println!(
            "{strategy:<8} {:>2} cases, {:>2} duplicates dropped; class {:.3} pair {:.3} requirement {:.3}",
            c.cases.len(),
            c.duplicates_eliminated,
            cov.class_coverage,
            cov.pair_coverage,
            cov.requirement_coverage
        );
    }

    let c = generate_campaign(&model, Strategy::Coverage, 12, 42, DEFAULT_LIMIT)?;
    print!("\n{}", export_campaign(&c, &model, ExportFormat::Csv));
    println!("\ndigest {}", c.digest);
    Ok(())
}
