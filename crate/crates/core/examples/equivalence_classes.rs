//! Map raw parameter values to equivalence classes through their ranges.

use usage_testgen::reference;

fn main() -> usage_testgen::Result<()> {
    let model = reference::load(reference::REF4)?;
    let speed = model.source().parameter("speed").expect("ref4 has a speed parameter");
    for class in &speed.classes {
        let r = class.range.expect("speed classes carry ranges");
        println!("{:<6} [{}, {})", class.id, r.lo, r.hi);
    }
    for kmh in [0.0, 59.9, 60.0, 130.0, 250.0] {
        match speed.class_of(kmh) {
            Ok(class) => println!("{kmh:>6} km/h -> {class}"),
            Err(e) => println!("{kmh:>6} km/h -> {e}"),
        }
    }
    // classes without ranges cannot classify raw values
    let time = model.source().parameter("time").unwrap();
    if let Err(e) = time.class_of(12.0) {
        println!("time: {e}");
    }
    Ok(())
}
