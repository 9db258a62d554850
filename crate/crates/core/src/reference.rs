//! Reference models shipped with the crate (the files under `models/`).

use crate::error::Result;
use crate::io::parse_model;
use crate::model::Model;

/// Two parameters (`time`, `weather`), night/sunny forbidden.
pub const M_TINY: &str = include_str!("../models/m_tiny.usage.json");
/// Four three-class parameters with two constraints.
pub const REF4: &str = include_str!("../models/ref4.usage.json");
/// Six parameters, including a ternary constraint and a zero table entry.
pub const REF6: &str = include_str!("../models/ref6.usage.json");
/// Time of day and the brightness it drives.
pub const DAYNIGHT_BRIGHTNESS: &str = include_str!("../models/daynight_brightness.usage.json");
/// Two sites: a noisy one and a nearly deterministic one.
pub const ASYM2: &str = include_str!("../models/asym2.usage.json");
/// Two exchangeable sites.
pub const SYMMETRIC2: &str = include_str!("../models/symmetric2.usage.json");
/// A dependent site fully determined by its parent; Gibbs kernels freeze.
pub const FROZEN: &str = include_str!("../models/frozen.usage.json");
/// Six ten-class parameters: 10^6 configurations.
pub const BIG: &str = include_str!("../models/big.usage.json");

pub const ALL: [&str; 8] = [M_TINY, REF4, REF6, DAYNIGHT_BRIGHTNESS, ASYM2, SYMMETRIC2, FROZEN, BIG];

/// The models with forbidden combinations.
pub const CONSTRAINED: [&str; 3] = [M_TINY, REF4, REF6];

pub fn load(text: &str) -> Result<Model> {
    Model::compile(&parse_model(text)?)
}

pub fn m_tiny() -> Model {
    load(M_TINY).expect("bundled model is valid")
}
