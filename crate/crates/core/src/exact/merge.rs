use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::model::{
    Assignment, ConditionalProbabilityTable, ConstraintSet, CptRow, EquivalenceClass, Model,
    Parameter, Requirement, UsageModel,
};

const MACRO_SEP: &str = "×";

/// Id of the macro-parameter replacing `ids` (given in chain order).
pub fn macro_id<S: AsRef<str>>(ids: &[S]) -> String {
    ids.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(MACRO_SEP)
}

/// Class id of the macro class for a tuple of class ids (chain order).
pub fn macro_class_id<S: AsRef<str>>(classes: &[S]) -> String {
    macro_id(classes)
}

/// Replaces the parameters `ids` by one macro-parameter whose classes are
/// the class tuples allowed by the constraints among `ids`.
///
/// The macro's table is conditioned on the union of the merged parameters'
/// outside parents and holds the chain-rule product of their tables (their
/// joint given those parents), so the joint distribution is unchanged under
/// the tuple identification. Tables of other parameters that depended on a
/// merged parameter are re-indexed by the macro; constraints and
/// requirements are translated.
///
/// Fails with `E_MERGE_SCOPE` when a parameter outside `ids` that depends
/// on one of them sits between them in chain order, or when constraints
/// among `ids` remove different mass for different parent contexts (no
/// locally normalized table can then preserve the joint).
pub fn merge_parameters<S: AsRef<str>>(model: &Model, ids: &[S], limit: usize) -> Result<UsageModel> {
    let mut sites = Vec::new();
    for id in ids {
        let s = model
            .site(id.as_ref())
            .ok_or_else(|| Error::MergeScope(format!("unknown parameter `{}`", id.as_ref())))?;
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    if sites.is_empty() {
        return Err(Error::MergeScope("nothing to merge".into()));
    }
    sites.sort_unstable();
    let merged: BTreeSet<usize> = sites.iter().copied().collect();
    let (first, last) = (sites[0], *sites.last().unwrap());
    let source = model.source();

    for j in first + 1..last {
        if !merged.contains(&j) && model.parents(j).iter().any(|p| merged.contains(p)) {
            return Err(Error::MergeScope(format!(
                "`{}` depends on a merged parameter but precedes `{}` in chain order",
                model.site_id(j),
                model.site_id(last)
            )));
        }
    }

    let outside_parents: Vec<usize> = sites
        .iter()
        .flat_map(|&s| model.parents(s).iter().copied())
        .filter(|p| !merged.contains(p))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let tuple_count: u128 = sites.iter().map(|&s| model.cardinality(s) as u128).product();
    let context_count: u128 = outside_parents
        .iter()
        .map(|&s| model.cardinality(s) as u128)
        .product();
    if tuple_count.saturating_mul(context_count) > limit as u128 {
        return Err(Error::TooLarge {
            limit,
            reached: tuple_count.saturating_mul(context_count),
        });
    }

    let internal: Vec<&Vec<(usize, usize)>> = model
        .forbidden_items()
        .iter()
        .filter(|item| item.iter().all(|(s, _)| merged.contains(s)))
        .collect();
    let cards: Vec<usize> = sites.iter().map(|&s| model.cardinality(s)).collect();
    let tuples: Vec<Vec<usize>> = crate::model::validate::MixedRadix::new(&cards)
        .filter(|t| {
            !internal.iter().any(|item| {
                item.iter()
                    .all(|&(s, c)| t[sites.iter().position(|&x| x == s).unwrap()] == c)
            })
        })
        .collect();
    if tuples.is_empty() {
        return Err(Error::Infeasible("constraints forbid every class tuple".into()));
    }

    let site_names: Vec<&str> = sites.iter().map(|&s| model.site_id(s)).collect();
    let mid = macro_id(&site_names);
    if sites.len() > 1 && model.site(&mid).is_some() {
        return Err(Error::MergeScope(format!("macro id `{mid}` is already taken")));
    }
    let tuple_names: Vec<String> = tuples
        .iter()
        .map(|t| {
            let names: Vec<&str> = t
                .iter()
                .zip(&sites)
                .map(|(&c, &s)| model.class_id(s, c))
                .collect();
            macro_class_id(&names)
        })
        .collect();

    // Macro table: product of the merged tables given each outside context,
    // renormalized by the constant mass the internal constraints leave.
    let ctx_cards: Vec<usize> = outside_parents.iter().map(|&s| model.cardinality(s)).collect();
    let mut state = vec![0usize; model.len()];
    let mut rows = Vec::new();
    let mut kept_mass: Option<f64> = None;
    for ctx in crate::model::validate::MixedRadix::new(&ctx_cards) {
        for (&s, &c) in outside_parents.iter().zip(&ctx) {
            state[s] = c;
        }
        let weights: Vec<f64> = tuples
            .iter()
            .map(|t| {
                for (&s, &c) in sites.iter().zip(t) {
                    state[s] = c;
                }
                sites
                    .iter()
                    .map(|&s| model.factors[s].entry(s, &state))
                    .product()
            })
            .collect();
        let mass: f64 = weights.iter().sum();
        match kept_mass {
            None => kept_mass = Some(mass),
            Some(m0) if (mass - m0).abs() > 1e-12 => {
                return Err(Error::MergeScope(format!(
                    "constraints among the merged parameters keep mass {m0} in one parent context and {mass} in another"
                )))
            }
            Some(_) => {}
        }
        let when: Assignment = outside_parents
            .iter()
            .zip(&ctx)
            .map(|(&s, &c)| (model.site_id(s).to_string(), model.class_id(s, c).to_string()))
            .collect();
        rows.push((when, weights));
    }
    let kept_mass = kept_mass.unwrap_or(0.0);
    if kept_mass <= 0.0 {
        return Err(Error::Infeasible("merged parameters have no probability mass".into()));
    }
    let macro_cpt = ConditionalProbabilityTable {
        param: mid.clone(),
        given: outside_parents.iter().map(|&s| model.site_id(s).to_string()).collect(),
        rows: rows
            .into_iter()
            .map(|(when, weights)| CptRow {
                when,
                probs: tuple_names
                    .iter()
                    .cloned()
                    .zip(weights.into_iter().map(|w| w / kept_mass))
                    .collect(),
            })
            .collect(),
    };

    let merged_ids: HashSet<&str> = site_names.iter().copied().collect();
    // class tuple lookups by merged parameter
    let tuple_class = |tuple: usize, param: &str| -> &str {
        let k = site_names.iter().position(|n| *n == param).unwrap();
        model.class_id(sites[k], tuples[tuple][k])
    };

    let mut out = UsageModel::new(source.name.clone());
    out.temperature = source.temperature;

    let categories: BTreeSet<Option<&String>> = site_names
        .iter()
        .map(|n| source.parameter(n).unwrap().category.as_ref())
        .collect();
    let macro_param = Parameter {
        id: mid.clone(),
        category: match categories.into_iter().collect::<Vec<_>>().as_slice() {
            [Some(c)] => Some((*c).clone()),
            _ => None,
        },
        classes: if sites.len() == 1 {
            source.parameter(&mid).unwrap().classes.clone()
        } else {
            tuple_names.iter().map(EquivalenceClass::new).collect()
        },
    };
    let mut placed = false;
    for p in &source.parameters {
        if merged_ids.contains(p.id.as_str()) {
            if !placed {
                out.parameters.push(macro_param.clone());
                placed = true;
            }
        } else {
            out.parameters.push(p.clone());
        }
    }
    for id in &source.chain_order {
        if id == site_names.last().unwrap() {
            out.chain_order.push(mid.clone());
        } else if !merged_ids.contains(id.as_str()) {
            out.chain_order.push(id.clone());
        }
    }

    for cpt in &source.cpts {
        if merged_ids.contains(cpt.param.as_str()) {
            if cpt.param == site_names[0] {
                out.cpts.push(macro_cpt.clone());
            }
            continue;
        }
        if !cpt.given.iter().any(|g| merged_ids.contains(g.as_str())) {
            out.cpts.push(cpt.clone());
            continue;
        }
        let mut given = Vec::new();
        for g in &cpt.given {
            let g = if merged_ids.contains(g.as_str()) { &mid } else { g };
            if !given.contains(g) {
                given.push(g.clone());
            }
        }
        let mut rows = Vec::new();
        for row in &cpt.rows {
            // Expand each original row into the macro classes consistent
            // with its merged-parameter entries.
            for t in 0..tuples.len() {
                let consistent = row
                    .when
                    .iter()
                    .filter(|(k, _)| merged_ids.contains(k.as_str()))
                    .all(|(k, v)| tuple_class(t, k) == v);
                if !consistent {
                    continue;
                }
                let mut when: Assignment = row
                    .when
                    .iter()
                    .filter(|(k, _)| !merged_ids.contains(k.as_str()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                when.insert(mid.clone(), tuple_names[t].clone());
                rows.push(CptRow {
                    when,
                    probs: row.probs.clone(),
                });
            }
        }
        out.cpts.push(ConditionalProbabilityTable {
            param: cpt.param.clone(),
            given,
            rows,
        });
    }

    let mut forbidden: Vec<Assignment> = Vec::new();
    for item in &source.constraints.forbidden {
        let touched: Vec<(&String, &String)> =
            item.iter().filter(|(k, _)| merged_ids.contains(k.as_str())).collect();
        if touched.is_empty() {
            forbidden.push(item.clone());
            continue;
        }
        if touched.len() == item.len() {
            continue; // absorbed into the missing tuples
        }
        for t in 0..tuples.len() {
            if touched.iter().all(|(k, v)| tuple_class(t, k) == v.as_str()) {
                let mut translated: Assignment = item
                    .iter()
                    .filter(|(k, _)| !merged_ids.contains(k.as_str()))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                translated.insert(mid.clone(), tuple_names[t].clone());
                if !forbidden.contains(&translated) {
                    forbidden.push(translated);
                }
            }
        }
    }
    out.constraints = ConstraintSet { forbidden };

    for req in &source.requirements {
        let touched: Vec<(&String, &BTreeSet<String>)> = req
            .predicate
            .iter()
            .filter(|(k, _)| merged_ids.contains(k.as_str()))
            .collect();
        if touched.is_empty() {
            out.requirements.push(req.clone());
            continue;
        }
        let allowed: BTreeSet<String> = (0..tuples.len())
            .filter(|&t| touched.iter().all(|(k, cs)| cs.contains(tuple_class(t, k))))
            .map(|t| tuple_names[t].clone())
            .collect();
        if allowed.is_empty() {
            return Err(Error::MergeScope(format!(
                "requirement `{}` matches no macro class",
                req.id
            )));
        }
        let mut predicate: BTreeMap<String, BTreeSet<String>> = req
            .predicate
            .iter()
            .filter(|(k, _)| !merged_ids.contains(k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        predicate.insert(mid.clone(), allowed);
        out.requirements.push(Requirement {
            id: req.id.clone(),
            predicate,
        });
    }

    Ok(out.canonical())
}
