//! Build a usage model in code, check it, and print its canonical form.

use usage_testgen::model::{ConditionalProbabilityTable, ConstraintSet, Parameter, Requirement};
use usage_testgen::{serialize_model, validate_model, Model, UsageModel};

fn main() -> usage_testgen::Result<()> {
    let mut u = UsageModel::new("M_tiny");
    u.parameters = vec![
        Parameter::with_classes("time", &["day", "night"]),
        Parameter::with_classes("weather", &["sunny", "rain", "fog"]),
    ];
    u.chain_order = vec!["time".into(), "weather".into()];
    u.cpts = vec![
        ConditionalProbabilityTable::unconditioned("time", &[("day", 0.7), ("night", 0.3)]),
        ConditionalProbabilityTable::conditioned(
            "weather",
            &["time"],
            vec![
                (vec![("time", "day")], vec![("sunny", 0.5), ("rain", 0.3), ("fog", 0.2)]),
                (vec![("time", "night")], vec![("sunny", 0.2), ("rain", 0.5), ("fog", 0.3)]),
            ],
        ),
    ];
    u.constraints = ConstraintSet::new().forbid(&[("time", "night"), ("weather", "sunny")]);
    u.requirements = vec![Requirement::new("REQ-LOW-VIS", &[("weather", &["fog"])])];

    let report = validate_model(&u);
    println!("{} errors, {} warnings", report.error_count(), report.warning_count());

    let model = Model::compile(&u)?;
    println!("{} configurations in the product space", model.product_space_size());
    print!("{}", serialize_model(model.source()));
    Ok(())
}
