//! Model document format.
//!
//! A model is a UTF-8 JSON document (`schema_version` 1). See
//! `docs/model-format.md` for the schema and an annotated example.
//! Diagnostics carry JSON-pointer paths into the document.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{Map, Value};

use crate::canon::Node;
use crate::error::{Error, Result};
use crate::model::{
    pointer_token as tok, validate_model, Assignment, ClassRange, ConditionalProbabilityTable,
    ConstraintSet, CptRow, Diagnostic, EquivalenceClass, Parameter, Requirement, UsageModel,
};

pub const SCHEMA_VERSION: i64 = 1;

/// Parses a model document.
///
/// Structural (`E_SCHEMA`) problems are collected over the whole document
/// first; if there are none, semantic validation runs and all of its errors
/// are returned together. On success the model is in canonical form.
pub fn parse_model(text: &str) -> Result<UsageModel> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        Error::Invalid(vec![Diagnostic::error(
            "E_SCHEMA",
            "",
            format!("not a JSON document: {e}"),
        )])
    })?;
    let mut r = Reader { diags: Vec::new() };
    let model = r.model(&root);
    if !r.diags.is_empty() {
        return Err(Error::Invalid(r.diags));
    }
    let report = validate_model(&model);
    if !report.is_ok() {
        return Err(Error::Invalid(report.errors().cloned().collect()));
    }
    Ok(model.canonical())
}

struct Reader {
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic::error("E_SCHEMA", path, message));
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(m) => {
                for key in m.keys() {
                    if !allowed.contains(&key.as_str()) {
                        self.fail(&format!("{path}/{}", tok(key)), format!("unexpected field `{key}`"));
                    }
                }
                Some(m)
            }
            None => {
                self.fail(path, "expected an object");
                None
            }
        }
    }

    fn array<'v>(&mut self, v: Option<&'v Value>, path: &str, required: bool) -> &'v [Value] {
        match v {
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.fail(path, "expected an array");
                &[]
            }
            None => {
                if required {
                    self.fail(path, "missing required field");
                }
                &[]
            }
        }
    }

    fn string(&mut self, v: Option<&Value>, path: &str) -> String {
        match v {
            Some(Value::String(s)) => s.clone(),
            Some(_) => {
                self.fail(path, "expected a string");
                String::new()
            }
            None => {
                self.fail(path, "missing required field");
                String::new()
            }
        }
    }

    fn number(&mut self, v: &Value, path: &str) -> f64 {
        match v.as_f64() {
            Some(x) => x,
            None => {
                self.fail(path, "expected a number");
                f64::NAN
            }
        }
    }

    fn string_list(&mut self, v: Option<&Value>, path: &str, required: bool) -> Vec<String> {
        let items = self.array(v, path, required);
        items
            .iter()
            .enumerate()
            .map(|(i, x)| self.string(Some(x), &format!("{path}/{i}")))
            .collect()
    }

    fn string_map(&mut self, v: Option<&Value>, path: &str) -> Assignment {
        let Some(v) = v else {
            return Assignment::new();
        };
        let Some(m) = v.as_object() else {
            self.fail(path, "expected an object of parameter -> class");
            return Assignment::new();
        };
        m.iter()
            .map(|(k, x)| (k.clone(), self.string(Some(x), &format!("{path}/{}", tok(k)))))
            .collect()
    }

    fn model(&mut self, root: &Value) -> UsageModel {
        let mut model = UsageModel::new("");
        let Some(m) = self.object(
            root,
            "",
            &[
                "schema_version",
                "name",
                "temperature",
                "parameters",
                "chain_order",
                "cpts",
                "constraints",
                "requirements",
            ],
        ) else {
            return model;
        };
        match m.get("schema_version").and_then(Value::as_i64) {
            Some(SCHEMA_VERSION) => {}
            Some(other) => self.fail("/schema_version", format!("unsupported schema_version {other}")),
            None => self.fail("/schema_version", "missing or non-integer schema_version"),
        }
        model.name = self.string(m.get("name"), "/name");
        if let Some(t) = m.get("temperature") {
            model.temperature = self.number(t, "/temperature");
        }
        model.parameters = self
            .array(m.get("parameters"), "/parameters", true)
            .iter()
            .enumerate()
            .map(|(i, p)| self.parameter(p, &format!("/parameters/{i}")))
            .collect();
        model.chain_order = self.string_list(m.get("chain_order"), "/chain_order", true);
        model.cpts = self
            .array(m.get("cpts"), "/cpts", true)
            .iter()
            .enumerate()
            .map(|(i, c)| self.cpt(c, &format!("/cpts/{i}")))
            .collect();
        model.constraints = ConstraintSet {
            forbidden: self
                .array(m.get("constraints"), "/constraints", false)
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let path = format!("/constraints/{i}");
                    match self.object(c, &path, &["forbid"]) {
                        Some(obj) => match obj.get("forbid") {
                            Some(f) => self.string_map(Some(f), &format!("{path}/forbid")),
                            None => {
                                self.fail(&format!("{path}/forbid"), "missing required field");
                                Assignment::new()
                            }
                        },
                        None => Assignment::new(),
                    }
                })
                .collect(),
        };
        model.requirements = self
            .array(m.get("requirements"), "/requirements", false)
            .iter()
            .enumerate()
            .map(|(i, r)| self.requirement(r, &format!("/requirements/{i}")))
            .collect();
        model
    }

    fn parameter(&mut self, v: &Value, path: &str) -> Parameter {
        let Some(m) = self.object(v, path, &["id", "category", "classes"]) else {
            return Parameter::new("", []);
        };
        let id = self.string(m.get("id"), &format!("{path}/id"));
        let category = m
            .get("category")
            .map(|c| self.string(Some(c), &format!("{path}/category")));
        let classes = self
            .array(m.get("classes"), &format!("{path}/classes"), true)
            .iter()
            .enumerate()
            .map(|(j, c)| self.class(c, &format!("{path}/classes/{j}")))
            .collect();
        Parameter {
            id,
            category,
            classes,
        }
    }

    fn class(&mut self, v: &Value, path: &str) -> EquivalenceClass {
        if let Value::String(id) = v {
            return EquivalenceClass::new(id.clone());
        }
        let Some(m) = self.object(v, path, &["id", "description", "range"]) else {
            return EquivalenceClass::new("");
        };
        let mut class = EquivalenceClass::new(self.string(m.get("id"), &format!("{path}/id")));
        class.description = m
            .get("description")
            .map(|d| self.string(Some(d), &format!("{path}/description")));
        if let Some(r) = m.get("range") {
            let rpath = format!("{path}/range");
            match r.as_array().map(Vec::as_slice) {
                Some([lo, hi]) => {
                    let lo = self.number(lo, &format!("{rpath}/0"));
                    let hi = self.number(hi, &format!("{rpath}/1"));
                    class.range = Some(ClassRange::new(lo, hi));
                }
                _ => self.fail(&rpath, "expected [lo, hi]"),
            }
        }
        class
    }

    fn cpt(&mut self, v: &Value, path: &str) -> ConditionalProbabilityTable {
        let mut cpt = ConditionalProbabilityTable {
            param: String::new(),
            given: Vec::new(),
            rows: Vec::new(),
        };
        let Some(m) = self.object(v, path, &["param", "given", "rows"]) else {
            return cpt;
        };
        cpt.param = self.string(m.get("param"), &format!("{path}/param"));
        cpt.given = self.string_list(m.get("given"), &format!("{path}/given"), false);
        let rows = self.array(m.get("rows"), &format!("{path}/rows"), true);
        for (r, row) in rows.iter().enumerate() {
            let rpath = format!("{path}/rows/{r}");
            let Some(obj) = self.object(row, &rpath, &["when", "probs"]) else {
                continue;
            };
            let when = self.string_map(obj.get("when"), &format!("{rpath}/when"));
            let mut probs = BTreeMap::new();
            match obj.get("probs").map(|p| p.as_object()) {
                Some(Some(pm)) => {
                    for (class, p) in pm {
                        let x = self.number(p, &format!("{rpath}/probs/{}", tok(class)));
                        probs.insert(class.clone(), x);
                    }
                }
                Some(None) => self.fail(&format!("{rpath}/probs"), "expected an object of class -> probability"),
                None => self.fail(&format!("{rpath}/probs"), "missing required field"),
            }
            cpt.rows.push(CptRow { when, probs });
        }
        cpt
    }

    fn requirement(&mut self, v: &Value, path: &str) -> Requirement {
        let Some(m) = self.object(v, path, &["id", "predicate"]) else {
            return Requirement {
                id: String::new(),
                predicate: BTreeMap::new(),
            };
        };
        let id = self.string(m.get("id"), &format!("{path}/id"));
        let mut predicate = BTreeMap::new();
        match m.get("predicate").map(|p| p.as_object()) {
            Some(Some(pm)) => {
                for (param, classes) in pm {
                    let list = self.string_list(Some(classes), &format!("{path}/predicate/{}", tok(param)), true);
                    predicate.insert(param.clone(), list.into_iter().collect::<BTreeSet<_>>());
                }
            }
            Some(None) => self.fail(&format!("{path}/predicate"), "expected an object"),
            None => self.fail(&format!("{path}/predicate"), "missing required field"),
        }
        Requirement { id, predicate }
    }
}

/// Canonical model document.
///
/// Key order is `schema_version, name, temperature, parameters,
/// chain_order, cpts, constraints, requirements`; tables follow parameter
/// order, rows follow parent-combination order, classes and probabilities
/// follow class declaration order, and probabilities use 17 significant
/// digits. Classes with neither description nor range are written as bare
/// strings. Equal models give identical bytes.
pub fn serialize_model(model: &UsageModel) -> String {
    let model = model.canonical();
    let class_order = |param: &str| -> Vec<String> {
        model
            .parameter(param)
            .map(|p| p.classes.iter().map(|c| c.id.clone()).collect())
            .unwrap_or_default()
    };
    let in_class_order = |param: &str, ids: &mut Vec<String>| {
        let order = class_order(param);
        ids.sort_by_key(|c| order.iter().position(|o| o == c).unwrap_or(usize::MAX));
    };
    let in_chain_order = |keys: &mut Vec<String>| {
        keys.sort_by_key(|k| model.chain_order.iter().position(|o| o == k).unwrap_or(usize::MAX));
    };

    let parameters = model
        .parameters
        .iter()
        .map(|p| {
            let classes = p
                .classes
                .iter()
                .map(|c| {
                    if c.description.is_none() && c.range.is_none() {
                        Node::str(&c.id)
                    } else {
                        Node::obj()
                            .field("id", Node::str(&c.id))
                            .opt("description", c.description.as_ref().map(Node::str))
                            .opt(
                                "range",
                                c.range
                                    .map(|r| Node::Arr(vec![Node::float(r.lo), Node::float(r.hi)])),
                            )
                            .build()
                    }
                })
                .collect();
            Node::obj()
                .field("id", Node::str(&p.id))
                .opt("category", p.category.as_ref().map(Node::str))
                .field("classes", Node::Arr(classes))
                .build()
        })
        .collect();

    let cpts = model
        .cpts
        .iter()
        .map(|cpt| {
            let rows = cpt
                .rows
                .iter()
                .map(|row| {
                    let when = cpt
                        .given
                        .iter()
                        .filter_map(|g| row.when.get(g).map(|c| (g.clone(), Node::str(c))))
                        .collect();
                    let mut classes: Vec<String> = row.probs.keys().cloned().collect();
                    in_class_order(&cpt.param, &mut classes);
                    let probs = classes
                        .into_iter()
                        .map(|c| {
                            let p = row.probs[&c];
                            (c, Node::float(p))
                        })
                        .collect();
                    Node::obj()
                        .field("when", Node::Obj(when))
                        .field("probs", Node::Obj(probs))
                        .build()
                })
                .collect();
            Node::obj()
                .field("param", Node::str(&cpt.param))
                .field("given", Node::strs(&cpt.given))
                .field("rows", Node::Arr(rows))
                .build()
        })
        .collect();

    let constraints = model
        .constraints
        .forbidden
        .iter()
        .map(|item| {
            let mut keys: Vec<String> = item.keys().cloned().collect();
            in_chain_order(&mut keys);
            let forbid = keys.into_iter().map(|k| {
                let c = Node::str(&item[&k]);
                (k, c)
            });
            Node::obj().field("forbid", Node::Obj(forbid.collect())).build()
        })
        .collect();

    let requirements = model
        .requirements
        .iter()
        .map(|req| {
            let mut keys: Vec<String> = req.predicate.keys().cloned().collect();
            in_chain_order(&mut keys);
            let predicate = keys
                .into_iter()
                .map(|k| {
                    let mut classes: Vec<String> = req.predicate[&k].iter().cloned().collect();
                    in_class_order(&k, &mut classes);
                    (k, Node::strs(classes))
                })
                .collect();
            Node::obj()
                .field("id", Node::str(&req.id))
                .field("predicate", Node::Obj(predicate))
                .build()
        })
        .collect();

    Node::obj()
        .field("schema_version", Node::Int(SCHEMA_VERSION as i128))
        .field("name", Node::str(&model.name))
        .field("temperature", Node::float(model.temperature))
        .field("parameters", Node::Arr(parameters))
        .field("chain_order", Node::strs(&model.chain_order))
        .field("cpts", Node::Arr(cpts))
        .field("constraints", Node::Arr(constraints))
        .field("requirements", Node::Arr(requirements))
        .build()
        .render()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn diags(text: &str) -> Vec<Diagnostic> {
        match parse_model(text) {
            Err(Error::Invalid(d)) => d,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn tiny_fixture_parses() {
        let m = parse_model(reference::M_TINY).unwrap();
        assert_eq!(m.name, "M_tiny");
        assert_eq!(m.parameters.len(), 2);
        assert_eq!(m.chain_order, vec!["time", "weather"]);
        assert_eq!(m.constraints.forbidden.len(), 1);
    }

    #[test]
    fn missing_row_is_located() {
        let mut v: Value = serde_json::from_str(reference::M_TINY).unwrap();
        let rows = v["cpts"][1]["rows"].as_array_mut().unwrap();
        rows.retain(|r| r["when"]["time"] != "night");
        let d = diags(&v.to_string());
        assert!(d.iter().any(|d| d.code == "E_MISSING_ROW" && d.path == "/cpts/1/rows"), "{d:?}");
    }

    #[test]
    fn short_row_is_rowsum() {
        let mut v: Value = serde_json::from_str(reference::M_TINY).unwrap();
        v["cpts"][0]["rows"][0]["probs"]["night"] = serde_json::json!(0.29);
        let d = diags(&v.to_string());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "E_ROWSUM");
        assert_eq!(d[0].path, "/cpts/0/rows/0/probs");
    }

    #[test]
    fn schema_errors_are_collected_in_one_pass() {
        let text = r#"{
            "schema_version": 2,
            "name": 7,
            "parameters": [{"id": "a", "classes": [{"id": "x", "range": [1]}], "color": "red"}],
            "chain_order": "a",
            "cpts": [{"param": "a", "rows": [{"when": {}}]}]
        }"#;
        let d = diags(text);
        let paths: Vec<&str> = d.iter().map(|d| d.path.as_str()).collect();
        for want in [
            "/schema_version",
            "/name",
            "/parameters/0/color",
            "/parameters/0/classes/0/range",
            "/chain_order",
            "/cpts/0/rows/0/probs",
        ] {
            assert!(paths.contains(&want), "missing {want} in {paths:?}");
        }
        assert!(d.iter().all(|d| d.code == "E_SCHEMA"));
    }

    #[test]
    fn garbage_is_schema_error() {
        let d = diags("{ not json");
        assert_eq!(d[0].code, "E_SCHEMA");
    }

    #[test]
    fn round_trip_is_identity() {
        for text in reference::ALL {
            let m = parse_model(text).unwrap();
            let doc = serialize_model(&m);
            let back = parse_model(&doc).unwrap();
            assert_eq!(back, m);
            assert_eq!(serialize_model(&back), doc);
        }
    }

    #[test]
    fn temperature_is_always_written() {
        let mut v: Value = serde_json::from_str(reference::M_TINY).unwrap();
        v.as_object_mut().unwrap().remove("temperature");
        let m = parse_model(&v.to_string()).unwrap();
        assert_eq!(m.temperature, 1.0);
        assert!(serialize_model(&m).contains("\"temperature\": 1,"));
    }

    #[test]
    fn serialization_ignores_input_order() {
        let m = parse_model(reference::M_TINY).unwrap();
        let mut shuffled = m.clone();
        shuffled.cpts.reverse();
        shuffled.cpts[0].rows.reverse();
        assert_eq!(serialize_model(&shuffled), serialize_model(&m));
    }
}
