use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::{pointer_token as tok, Diagnostic, UsageModel, ROW_SUM_TOLERANCE};

/// Errors and warnings found in a model. Validation never fails; callers
/// decide what to do with the findings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| !d.is_error())
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn warning_count(&self) -> usize {
        self.warnings().count()
    }

    pub fn is_ok(&self) -> bool {
        self.error_count() == 0
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }
}

struct Index<'a> {
    /// parameter id -> (declaration index, class id -> class index)
    params: HashMap<&'a str, (usize, HashMap<&'a str, usize>)>,
    chain_pos: HashMap<&'a str, usize>,
}

impl Index<'_> {
    fn class(&self, param: &str, class: &str) -> Option<usize> {
        self.params.get(param).and_then(|(_, cs)| cs.get(class).copied())
    }

    fn card(&self, param: &str) -> usize {
        self.params.get(param).map(|(_, cs)| cs.len()).unwrap_or(0)
    }
}

pub fn validate_model(model: &UsageModel) -> ValidationReport {
    let mut out = Vec::new();

    if !(model.temperature.is_finite() && model.temperature > 0.0) {
        out.push(Diagnostic::error(
            "E_SCHEMA",
            "/temperature",
            format!("temperature must be a positive real, got {}", model.temperature),
        ));
    }
    if model.parameters.is_empty() {
        out.push(Diagnostic::error("E_SCHEMA", "/parameters", "model has no parameters"));
    }

    let mut index = Index {
        params: HashMap::new(),
        chain_pos: HashMap::new(),
    };
    for (i, p) in model.parameters.iter().enumerate() {
        let path = format!("/parameters/{i}");
        if p.id.is_empty() {
            out.push(Diagnostic::error("E_SCHEMA", format!("{path}/id"), "empty parameter id"));
        }
        if index.params.contains_key(p.id.as_str()) {
            out.push(Diagnostic::error(
                "E_DUP_ID",
                format!("{path}/id"),
                format!("duplicate parameter id `{}`", p.id),
            ));
            continue;
        }
        if p.classes.is_empty() {
            out.push(Diagnostic::error(
                "E_SCHEMA",
                format!("{path}/classes"),
                format!("parameter `{}` has no classes", p.id),
            ));
        }
        let mut classes = HashMap::new();
        for (j, c) in p.classes.iter().enumerate() {
            let cpath = format!("{path}/classes/{j}");
            if c.id.is_empty() {
                out.push(Diagnostic::error("E_SCHEMA", format!("{cpath}/id"), "empty class id"));
            }
            if classes.insert(c.id.as_str(), j).is_some() {
                out.push(Diagnostic::error(
                    "E_DUP_ID",
                    format!("{cpath}/id"),
                    format!("duplicate class id `{}` in parameter `{}`", c.id, p.id),
                ));
            }
            if let Some(r) = &c.range {
                if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                    out.push(Diagnostic::error(
                        "E_RANGE",
                        format!("{cpath}/range"),
                        format!("range [{}, {}) is empty or not finite", r.lo, r.hi),
                    ));
                }
                for (k, other) in p.classes[..j].iter().enumerate() {
                    if other.range.as_ref().is_some_and(|o| o.overlaps(r)) {
                        out.push(Diagnostic::error(
                            "E_RANGE",
                            format!("{cpath}/range"),
                            format!("range of `{}` overlaps class #{k} `{}`", c.id, other.id),
                        ));
                    }
                }
            }
        }
        index.params.insert(p.id.as_str(), (i, classes));
    }

    for (k, id) in model.chain_order.iter().enumerate() {
        let path = format!("/chain_order/{k}");
        if !index.params.contains_key(id.as_str()) {
            out.push(Diagnostic::error(
                "E_UNKNOWN_REF",
                path,
                format!("unknown parameter `{id}` in chain_order"),
            ));
        } else if index.chain_pos.insert(id.as_str(), k).is_some() {
            out.push(Diagnostic::error("E_ORDER", path, format!("`{id}` repeated in chain_order")));
        }
    }
    for p in &model.parameters {
        if !index.chain_pos.contains_key(p.id.as_str()) && !p.id.is_empty() {
            out.push(Diagnostic::error(
                "E_ORDER",
                "/chain_order",
                format!("parameter `{}` missing from chain_order", p.id),
            ));
        }
    }

    let mut cpt_seen: HashSet<&str> = HashSet::new();
    for (k, cpt) in model.cpts.iter().enumerate() {
        check_cpt(k, cpt, &index, &mut cpt_seen, &mut out);
    }
    for p in &model.parameters {
        if index.params.contains_key(p.id.as_str()) && !cpt_seen.contains(p.id.as_str()) {
            out.push(Diagnostic::error(
                "E_MISSING_CPT",
                "/cpts",
                format!("no probability table for parameter `{}`", p.id),
            ));
        }
    }

    let mut forbid_seen = HashSet::new();
    for (i, item) in model.constraints.forbidden.iter().enumerate() {
        let path = format!("/constraints/{i}/forbid");
        if item.len() < 2 {
            out.push(Diagnostic::error(
                "E_SCHEMA",
                path.clone(),
                "a forbidden item needs at least two entries",
            ));
        }
        for (param, class) in item {
            if index.class(param, class).is_none() {
                out.push(Diagnostic::error(
                    "E_UNKNOWN_REF",
                    format!("{path}/{}", tok(param)),
                    format!("unknown reference `{param}={class}`"),
                ));
            }
        }
        if !forbid_seen.insert(item) {
            out.push(Diagnostic::error(
                "E_DUP_FORBID",
                format!("/constraints/{i}"),
                "duplicate forbidden item",
            ));
        }
    }

    let mut req_seen = HashSet::new();
    for (i, req) in model.requirements.iter().enumerate() {
        let path = format!("/requirements/{i}");
        if req.id.is_empty() {
            out.push(Diagnostic::error("E_SCHEMA", format!("{path}/id"), "empty requirement id"));
        }
        if !req_seen.insert(req.id.as_str()) {
            out.push(Diagnostic::error(
                "E_DUP_ID",
                format!("{path}/id"),
                format!("duplicate requirement id `{}`", req.id),
            ));
        }
        for (param, classes) in &req.predicate {
            let ppath = format!("{path}/predicate/{}", tok(param));
            if !index.params.contains_key(param.as_str()) {
                out.push(Diagnostic::error(
                    "E_UNKNOWN_REF",
                    ppath,
                    format!("unknown parameter `{param}`"),
                ));
                continue;
            }
            if classes.is_empty() {
                out.push(Diagnostic::error("E_SCHEMA", ppath.clone(), "empty class set"));
            }
            for class in classes {
                if index.class(param, class).is_none() {
                    out.push(Diagnostic::error(
                        "E_UNKNOWN_REF",
                        ppath.clone(),
                        format!("unknown class `{class}` of `{param}`"),
                    ));
                }
            }
        }
    }

    if out.iter().all(|d| !d.is_error()) {
        warn_dead_classes(model, &index, &mut out);
        warn_unsatisfiable_requirements(model, &index, &mut out);
    }
    ValidationReport { diagnostics: out }
}

fn check_cpt<'a>(
    k: usize,
    cpt: &'a super::ConditionalProbabilityTable,
    index: &Index<'a>,
    seen: &mut HashSet<&'a str>,
    out: &mut Vec<Diagnostic>,
) {
    let path = format!("/cpts/{k}");
    let Some(&child_pos) = index.chain_pos.get(cpt.param.as_str()) else {
        if !index.params.contains_key(cpt.param.as_str()) {
            out.push(Diagnostic::error(
                "E_UNKNOWN_REF",
                format!("{path}/param"),
                format!("unknown parameter `{}`", cpt.param),
            ));
        }
        return;
    };
    if !seen.insert(cpt.param.as_str()) {
        out.push(Diagnostic::error(
            "E_DUP_CPT",
            format!("{path}/param"),
            format!("second probability table for `{}`", cpt.param),
        ));
        return;
    }

    let mut parents_ok = true;
    let mut given_seen = HashSet::new();
    for (g, parent) in cpt.given.iter().enumerate() {
        let gpath = format!("{path}/given/{g}");
        match index.chain_pos.get(parent.as_str()) {
            None => {
                parents_ok = false;
                out.push(Diagnostic::error(
                    "E_UNKNOWN_REF",
                    gpath,
                    format!("unknown parent `{parent}`"),
                ));
            }
            Some(&pos) => {
                if !given_seen.insert(parent.as_str()) || parent == &cpt.param {
                    parents_ok = false;
                    out.push(Diagnostic::error(
                        "E_SCHEMA",
                        gpath,
                        format!("parent `{parent}` repeated or self-referencing"),
                    ));
                } else if pos >= child_pos {
                    out.push(Diagnostic::error(
                        "E_ORDER",
                        gpath,
                        format!("parent `{parent}` does not precede `{}` in chain_order", cpt.param),
                    ));
                }
            }
        }
    }

    let mut combos: BTreeSet<Vec<usize>> = BTreeSet::new();
    for (r, row) in cpt.rows.iter().enumerate() {
        let rpath = format!("{path}/rows/{r}");
        let mut key = Vec::with_capacity(cpt.given.len());
        let mut row_ok = parents_ok;
        if parents_ok {
            for parent in &cpt.given {
                match row.when.get(parent) {
                    None => {
                        row_ok = false;
                        out.push(Diagnostic::error(
                            "E_SCHEMA",
                            format!("{rpath}/when"),
                            format!("row does not fix parent `{parent}`"),
                        ));
                    }
                    Some(class) => match index.class(parent, class) {
                        Some(ci) => key.push(ci),
                        None => {
                            row_ok = false;
                            out.push(Diagnostic::error(
                                "E_UNKNOWN_REF",
                                format!("{rpath}/when/{}", tok(parent)),
                                format!("unknown class `{class}` of `{parent}`"),
                            ));
                        }
                    },
                }
            }
            for extra in row.when.keys().filter(|k| !cpt.given.contains(k)) {
                row_ok = false;
                out.push(Diagnostic::error(
                    "E_SCHEMA",
                    format!("{rpath}/when/{}", tok(extra)),
                    format!("`{extra}` is not a declared parent"),
                ));
            }
        }
        if row_ok && !combos.insert(key) {
            out.push(Diagnostic::error("E_DUP_ROW", rpath.clone(), "duplicate row for this parent combination"));
        }

        let mut sum = 0.0;
        let mut sum_ok = true;
        for (class, &p) in &row.probs {
            let ppath = format!("{rpath}/probs/{}", tok(class));
            if index.class(&cpt.param, class).is_none() {
                out.push(Diagnostic::error(
                    "E_UNKNOWN_REF",
                    ppath.clone(),
                    format!("unknown class `{class}` of `{}`", cpt.param),
                ));
            }
            if p.is_nan() {
                sum_ok = false;
                out.push(Diagnostic::error("E_SCHEMA", ppath, "probability is not a number"));
            } else if p < 0.0 {
                sum_ok = false;
                out.push(Diagnostic::error("E_NEG_PROB", ppath, format!("negative probability {p}")));
            } else {
                sum += p;
            }
        }
        if sum_ok && (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            out.push(Diagnostic::error(
                "E_ROWSUM",
                format!("{rpath}/probs"),
                format!("row sums to {sum}, not 1"),
            ));
        }
    }

    if parents_ok {
        let cards: Vec<usize> = cpt.given.iter().map(|g| index.card(g)).collect();
        let expected: u128 = cards.iter().map(|&c| c as u128).product();
        if (combos.len() as u128) < expected {
            let missing = expected - combos.len() as u128;
            let mut listed = Vec::new();
            if expected <= 100_000 {
                for key in MixedRadix::new(&cards) {
                    if !combos.contains(&key) && listed.len() < 8 {
                        let when: BTreeMap<&str, &str> = cpt
                            .given
                            .iter()
                            .zip(&key)
                            .map(|(g, &ci)| (g.as_str(), class_name(index, g, ci)))
                            .collect();
                        listed.push(format!("{when:?}"));
                    }
                }
            }
            out.push(Diagnostic::error(
                "E_MISSING_ROW",
                format!("{path}/rows"),
                format!("{missing} parent combination(s) without a row {}", listed.join(", ")),
            ));
        }
    }
}

fn class_name<'a>(index: &Index<'a>, param: &str, ci: usize) -> &'a str {
    index.params[param]
        .1
        .iter()
        .find(|(_, &i)| i == ci)
        .map(|(c, _)| *c)
        .unwrap_or("?")
}

/// Enumerates all digit vectors for the given radices, most significant first.
pub(crate) struct MixedRadix {
    cards: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MixedRadix {
    pub(crate) fn new(cards: &[usize]) -> Self {
        let next = if cards.contains(&0) {
            None
        } else {
            Some(vec![0; cards.len()])
        };
        Self {
            cards: cards.to_vec(),
            next,
        }
    }
}

impl Iterator for MixedRadix {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.cards[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

fn warn_dead_classes(model: &UsageModel, index: &Index<'_>, out: &mut Vec<Diagnostic>) {
    for cpt in &model.cpts {
        let Some((pi, _)) = index.params.get(cpt.param.as_str()) else {
            continue;
        };
        for (j, class) in model.parameters[*pi].classes.iter().enumerate() {
            let dead = cpt
                .rows
                .iter()
                .all(|row| row.probs.get(&class.id).copied().unwrap_or(0.0) == 0.0);
            if dead {
                out.push(Diagnostic::warning(
                    "W_DEAD_CLASS",
                    format!("/parameters/{pi}/classes/{j}"),
                    format!("class `{}` of `{}` has probability 0 in every row", class.id, cpt.param),
                ));
            }
        }
    }
}

fn warn_unsatisfiable_requirements(model: &UsageModel, index: &Index<'_>, out: &mut Vec<Diagnostic>) {
    // Only parameters touched by a constraint or the predicate matter; the
    // rest can take any class.
    let items: Vec<Vec<(&str, usize)>> = model
        .constraints
        .forbidden
        .iter()
        .map(|item| {
            item.iter()
                .map(|(p, c)| (p.as_str(), index.class(p, c).unwrap_or(usize::MAX)))
                .collect()
        })
        .collect();
    for (i, req) in model.requirements.iter().enumerate() {
        let mut vars: Vec<&str> = req.predicate.keys().map(|s| s.as_str()).collect();
        for item in &items {
            for (p, _) in item {
                if !vars.contains(p) {
                    vars.push(p);
                }
            }
        }
        let domains: Vec<Vec<usize>> = vars
            .iter()
            .map(|v| match req.predicate.get(*v) {
                Some(allowed) => allowed.iter().filter_map(|c| index.class(v, c)).collect(),
                None => (0..index.card(v)).collect(),
            })
            .collect();
        let mut assignment: Vec<Option<usize>> = vec![None; vars.len()];
        if !satisfiable(0, &vars, &domains, &items, &mut assignment) {
            out.push(Diagnostic::warning(
                "W_UNSAT_REQ",
                format!("/requirements/{i}"),
                format!("requirement `{}` cannot be met by any feasible configuration", req.id),
            ));
        }
    }
}

fn satisfiable(
    depth: usize,
    vars: &[&str],
    domains: &[Vec<usize>],
    items: &[Vec<(&str, usize)>],
    assignment: &mut Vec<Option<usize>>,
) -> bool {
    let violated = items.iter().any(|item| {
        item.iter().all(|(p, c)| {
            vars.iter()
                .position(|v| v == p)
                .and_then(|k| assignment[k])
                .is_some_and(|a| a == *c)
        })
    });
    if violated {
        return false;
    }
    if depth == vars.len() {
        return true;
    }
    for &c in &domains[depth] {
        assignment[depth] = Some(c);
        if satisfiable(depth + 1, vars, domains, items, assignment) {
            assignment[depth] = None;
            return true;
        }
    }
    assignment[depth] = None;
    false
}
