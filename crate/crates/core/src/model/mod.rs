//! Usage-model domain types.
//!
//! [`UsageModel`] mirrors the model document one-to-one and may hold
//! anything, including dangling ids; [`validate_model`] reports what is
//! wrong with it. [`Model`] is the compiled, index-based form every engine
//! works on, and can only be built from a model that validates.

mod compiled;
mod neighborhood;
pub(crate) mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

pub use compiled::{Configuration, Model};
pub use neighborhood::{neighborhoods, NeighborhoodSystem};
pub use validate::{validate_model, ValidationReport};

/// Row-sum tolerance for conditional probability tables.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Half-open interval `[lo, hi)` in parameter units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRange {
    pub lo: f64,
    pub hi: f64,
}

impl ClassRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value < self.hi
    }

    pub fn overlaps(&self, other: &ClassRange) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClass {
    pub id: String,
    pub description: Option<String>,
    pub range: Option<ClassRange>,
}

impl EquivalenceClass {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: None,
            range: None,
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some(ClassRange::new(lo, hi));
        self
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }
}

/// An influential parameter and its ordered phase space of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub id: String,
    pub category: Option<String>,
    pub classes: Vec<EquivalenceClass>,
}

impl Parameter {
    pub fn new(id: impl Into<String>, classes: impl IntoIterator<Item = EquivalenceClass>) -> Self {
        Self {
            id: id.into(),
            category: None,
            classes: classes.into_iter().collect(),
        }
    }

    /// Shorthand for a parameter whose classes carry only ids.
    pub fn with_classes<S: AsRef<str>>(id: impl Into<String>, classes: &[S]) -> Self {
        Self::new(id, classes.iter().map(|c| EquivalenceClass::new(c.as_ref())))
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.id == class)
    }

    /// Maps a raw value to the class whose range contains it.
    pub fn class_of(&self, raw: f64) -> Result<&str> {
        let mut hit = None;
        for class in &self.classes {
            let range = class
                .range
                .as_ref()
                .ok_or_else(|| Error::NoRanges(self.id.clone()))?;
            if hit.is_none() && range.contains(raw) {
                hit = Some(class.id.as_str());
            }
        }
        hit.ok_or(Error::OutOfRange {
            param: self.id.clone(),
            value: raw,
        })
    }
}

/// Free-function form of [`Parameter::class_of`].
pub fn class_of(parameter: &Parameter, raw: f64) -> Result<&str> {
    parameter.class_of(raw)
}

/// Partial or total assignment of class ids to parameter ids.
pub type Assignment = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct CptRow {
    pub when: Assignment,
    pub probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalProbabilityTable {
    pub param: String,
    pub given: Vec<String>,
    pub rows: Vec<CptRow>,
}

impl ConditionalProbabilityTable {
    /// An unconditioned table with a single row.
    pub fn unconditioned<S: AsRef<str>>(param: impl Into<String>, probs: &[(S, f64)]) -> Self {
        Self {
            param: param.into(),
            given: Vec::new(),
            rows: vec![CptRow {
                when: Assignment::new(),
                probs: probs.iter().map(|(c, p)| (c.as_ref().to_string(), *p)).collect(),
            }],
        }
    }

    pub fn conditioned<S: AsRef<str>>(
        param: impl Into<String>,
        given: &[S],
        rows: Vec<(Vec<(&str, &str)>, Vec<(&str, f64)>)>,
    ) -> Self {
        Self {
            param: param.into(),
            given: given.iter().map(|g| g.as_ref().to_string()).collect(),
            rows: rows
                .into_iter()
                .map(|(when, probs)| CptRow {
                    when: when.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                    probs: probs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                })
                .collect(),
        }
    }
}

/// Forbidden partial assignments ("incompatibility matrix").
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    pub forbidden: Vec<Assignment>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forbid(mut self, item: &[(&str, &str)]) -> Self {
        self.forbidden
            .push(item.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }
}

/// Checks a total assignment against the forbidden items.
///
/// Returns `false` iff some forbidden item is matched entry for entry.
pub fn is_feasible(
    config: &Assignment,
    constraints: &ConstraintSet,
    parameters: &[Parameter],
) -> Result<bool> {
    for item in &constraints.forbidden {
        for (param, class) in item {
            let known = parameters
                .iter()
                .find(|p| &p.id == param)
                .map(|p| p.class_index(class).is_some())
                .unwrap_or(false);
            if !known {
                return Err(Error::UnknownRef(format!("{param}={class}")));
            }
        }
    }
    Ok(!constraints
        .forbidden
        .iter()
        .any(|item| item.iter().all(|(p, c)| config.get(p) == Some(c))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub id: String,
    /// Parameter id to the set of class ids that satisfy the requirement.
    pub predicate: BTreeMap<String, BTreeSet<String>>,
}

impl Requirement {
    pub fn new(id: impl Into<String>, predicate: &[(&str, &[&str])]) -> Self {
        Self {
            id: id.into(),
            predicate: predicate
                .iter()
                .map(|(p, cs)| (p.to_string(), cs.iter().map(|c| c.to_string()).collect()))
                .collect(),
        }
    }

    pub fn is_covered_by(&self, config: &Assignment) -> bool {
        self.predicate
            .iter()
            .all(|(p, allowed)| config.get(p).is_some_and(|c| allowed.contains(c)))
    }
}

/// A usage model exactly as written in a model document.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageModel {
    pub name: String,
    pub temperature: f64,
    pub parameters: Vec<Parameter>,
    pub chain_order: Vec<String>,
    pub cpts: Vec<ConditionalProbabilityTable>,
    pub constraints: ConstraintSet,
    pub requirements: Vec<Requirement>,
}

impl UsageModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            temperature: 1.0,
            parameters: Vec::new(),
            chain_order: Vec::new(),
            cpts: Vec::new(),
            constraints: ConstraintSet::default(),
            requirements: Vec::new(),
        }
    }

    pub fn parameter(&self, id: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.id == id)
    }

    /// Canonical form: CPTs in parameter order, rows in parent-combination
    /// order, every class listed in every row, constraint entries and
    /// requirement sets in class order. Only meaningful for valid models;
    /// entries that do not resolve are kept in their original position.
    pub fn canonical(&self) -> UsageModel {
        let mut out = self.clone();
        let param_pos = |id: &str| {
            self.parameters
                .iter()
                .position(|p| p.id == id)
                .unwrap_or(usize::MAX)
        };
        let class_pos = |param: &str, class: &str| {
            self.parameter(param)
                .and_then(|p| p.class_index(class))
                .unwrap_or(usize::MAX)
        };
        out.cpts.sort_by_key(|cpt| param_pos(&cpt.param));
        for cpt in &mut out.cpts {
            let given = cpt.given.clone();
            cpt.rows.sort_by_key(|row| {
                given
                    .iter()
                    .map(|g| row.when.get(g).map(|c| class_pos(g, c)).unwrap_or(usize::MAX))
                    .collect::<Vec<_>>()
            });
            if let Some(param) = self.parameter(&cpt.param) {
                for row in &mut cpt.rows {
                    for class in &param.classes {
                        row.probs.entry(class.id.clone()).or_insert(0.0);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// A path-addressed finding about a model document.
///
/// `path` is a JSON pointer into the source document.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: &'static str, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            path: path.into(),
            code,
            message: message.into(),
        }
    }

    pub fn warning(code: &'static str, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            path: path.into(),
            code,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} at {}: {}", self.severity, self.code, self.path, self.message)
    }
}

/// Escapes one JSON-pointer reference token.
pub(crate) fn pointer_token(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn speed() -> Parameter {
        Parameter::new(
            "speed",
            [
                EquivalenceClass::new("low").with_range(0.0, 60.0),
                EquivalenceClass::new("mid").with_range(60.0, 110.0),
                EquivalenceClass::new("high").with_range(110.0, 200.0),
            ],
        )
    }

    #[test]
    fn nearby_speeds_share_a_class() {
        let p = speed();
        assert_eq!(class_of(&p, 130.0).unwrap(), "high");
        assert_eq!(class_of(&p, 131.0).unwrap(), "high");
        assert_eq!(class_of(&p, 20.0).unwrap(), "low");
        assert_ne!(class_of(&p, 20.0).unwrap(), class_of(&p, 130.0).unwrap());
    }

    #[test]
    fn lower_bound_is_inclusive() {
        let p = speed();
        assert_eq!(p.class_of(60.0).unwrap(), "mid");
        assert_eq!(p.class_of(59.999).unwrap(), "low");
        assert_eq!(p.class_of(0.0).unwrap(), "low");
    }

    #[test]
    fn class_of_errors() {
        let p = speed();
        assert!(matches!(p.class_of(200.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.class_of(-1.0), Err(Error::OutOfRange { .. })));
        let mut q = speed();
        q.classes[1].range = None;
        assert!(matches!(q.class_of(20.0), Err(Error::NoRanges(_))));
    }

    fn time_weather() -> Vec<Parameter> {
        vec![
            Parameter::with_classes("time", &["day", "night"]),
            Parameter::with_classes("weather", &["sunny", "rain", "fog"]),
        ]
    }

    fn assign(pairs: &[(&str, &str)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn night_and_sunny_are_incompatible() {
        let params = time_weather();
        let cs = ConstraintSet::new().forbid(&[("time", "night"), ("weather", "sunny")]);
        let night_sunny = assign(&[("time", "night"), ("weather", "sunny")]);
        let day_sunny = assign(&[("time", "day"), ("weather", "sunny")]);
        assert!(!is_feasible(&night_sunny, &cs, &params).unwrap());
        assert!(is_feasible(&day_sunny, &cs, &params).unwrap());
        assert!(is_feasible(&night_sunny, &ConstraintSet::new(), &params).unwrap());
    }

    #[test]
    fn dangling_constraint_is_reported() {
        let params = time_weather();
        let cs = ConstraintSet::new().forbid(&[("time", "night"), ("weather", "snow")]);
        let cfg = assign(&[("time", "day"), ("weather", "fog")]);
        assert!(matches!(is_feasible(&cfg, &cs, &params), Err(Error::UnknownRef(_))));
    }

    #[test]
    fn pointer_tokens_are_escaped() {
        assert_eq!(pointer_token("a/b~c"), "a~1b~0c");
    }
}
