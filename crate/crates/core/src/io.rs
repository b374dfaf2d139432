//! JSON formats for instances, assignments, languages, Prague instances and vectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{require_witness, OperationTable};
use crate::error::{Error, Result};
use crate::instance::{Assignment, Constraint, ConstraintLanguage, Domain, Instance, Relation, Witness};
use crate::prague::PragueInstance;
use crate::sdp::SdpVectors;

#[derive(Serialize, Deserialize)]
struct ConstraintFile {
    scope: Vec<usize>,
    relation: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    num_variables: usize,
    domain_size: usize,
    constraints: Vec<ConstraintFile>,
}

#[derive(Serialize, Deserialize)]
struct AssignmentFile {
    values: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PragueFile {
    num_variables: usize,
    domain_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variables: Option<Vec<usize>>,
    constraints: Vec<ConstraintFile>,
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let domain = Domain::new(file.domain_size)?;
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for (index, c) in file.constraints.into_iter().enumerate() {
        let arity = c.scope.len();
        let relation = Relation::new(domain, arity, c.relation).map_err(|e| Error::InvalidConstraint {
            index,
            reason: e.to_string(),
        })?;
        constraints.push(Constraint::new(c.scope, relation));
    }
    Instance::new(file.num_variables, domain, constraints)
}

pub fn instance_to_json(instance: &Instance) -> String {
    let file = InstanceFile {
        num_variables: instance.num_variables(),
        domain_size: instance.domain().size(),
        constraints: instance
            .constraints()
            .iter()
            .map(|c| ConstraintFile {
                scope: c.scope.clone(),
                relation: c.relation.tuples().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

pub fn parse_assignment(text: &str) -> Result<Assignment> {
    let file: AssignmentFile = serde_json::from_str(text)?;
    Ok(Assignment::new(file.values))
}

pub fn assignment_to_json(assignment: &Assignment) -> String {
    serde_json::to_string(&AssignmentFile {
        values: assignment.values().to_vec(),
    })
    .expect("serializable")
}

fn flatten(value: &Value, depth: usize, out: &mut Vec<usize>) -> Result<()> {
    match value {
        Value::Array(items) if depth > 0 => {
            for v in items {
                flatten(v, depth - 1, out)?;
            }
            Ok(())
        }
        Value::Number(n) if depth == 0 => {
            let v = n
                .as_u64()
                .ok_or_else(|| Error::Parse(format!("table entry {n} is not a value")))?;
            out.push(v as usize);
            Ok(())
        }
        other => Err(Error::Parse(format!("unexpected table entry {other}"))),
    }
}

/// Accepts a flat row-major array or an `arity`-deep nested array.
pub fn parse_table(value: &Value, domain: Domain, arity: usize) -> Result<OperationTable> {
    let nested = matches!(value, Value::Array(items) if items.first().is_some_and(Value::is_array));
    let mut flat = Vec::new();
    if nested {
        flatten(value, arity, &mut flat)?;
    } else {
        flatten(value, 1, &mut flat)?;
    }
    OperationTable::new(domain, arity, flat)
}

pub fn table_to_nested(table: &OperationTable) -> Value {
    fn build(t: &[usize], d: usize, depth: usize) -> Value {
        if depth == 0 {
            return Value::from(t[0]);
        }
        let chunk = t.len() / d;
        Value::Array(
            (0..d)
                .map(|i| build(&t[i * chunk..(i + 1) * chunk], d, depth - 1))
                .collect(),
        )
    }
    build(table.table(), table.domain().size(), table.arity())
}

pub fn table_to_flat(table: &OperationTable) -> Value {
    Value::from(table.table().to_vec())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RelationSpec {
    Tuples(Vec<Vec<usize>>),
    Explicit { arity: usize, tuples: Vec<Vec<usize>> },
}

#[derive(Deserialize)]
struct LanguageFile {
    domain_size: usize,
    relations: BTreeMap<String, RelationSpec>,
    #[serde(default)]
    f1: Option<Value>,
    #[serde(default)]
    f2: Option<Value>,
}

/// Parses a language; a supplied witness must pass verification.
pub fn parse_language(text: &str) -> Result<ConstraintLanguage> {
    let file: LanguageFile = serde_json::from_str(text)?;
    let domain = Domain::new(file.domain_size)?;
    let mut relations = Vec::new();
    for (name, spec) in file.relations {
        let (arity, tuples) = match spec {
            RelationSpec::Explicit { arity, tuples } => (arity, tuples),
            RelationSpec::Tuples(t) => {
                let arity = t
                    .first()
                    .map(Vec::len)
                    .ok_or_else(|| Error::Parse(format!("relation {name} is empty; give {{\"arity\", \"tuples\"}}")))?;
                (arity, t)
            }
        };
        let r = Relation::new(domain, arity, tuples).map_err(|e| Error::Parse(format!("relation {name}: {e}")))?;
        relations.push((name, r));
    }
    let language = ConstraintLanguage::new(domain, relations)?;
    match (file.f1, file.f2) {
        (Some(f1), Some(f2)) if !f1.is_null() && !f2.is_null() => {
            let witness = Witness {
                f1: parse_table(&f1, domain, 3)?,
                f2: parse_table(&f2, domain, 4)?,
            };
            let language = language.with_witness(witness)?;
            require_witness(&language)?;
            Ok(language)
        }
        (Some(f), None) | (None, Some(f)) if !f.is_null() => Err(Error::Parse("a witness needs both f1 and f2".into())),
        _ => Ok(language),
    }
}

pub fn language_to_json(language: &ConstraintLanguage) -> String {
    let mut relations = serde_json::Map::new();
    for (name, r) in language.relations() {
        let v = if r.is_empty() {
            serde_json::json!({"arity": r.arity(), "tuples": []})
        } else {
            serde_json::to_value(r.tuples()).expect("serializable")
        };
        relations.insert(name.clone(), v);
    }
    let (f1, f2) = match language.witness() {
        Some(w) => (table_to_nested(&w.f1), table_to_nested(&w.f2)),
        None => (Value::Null, Value::Null),
    };
    serde_json::to_string_pretty(&serde_json::json!({
        "domain_size": language.domain().size(),
        "relations": relations,
        "f1": f1,
        "f2": f2,
    }))
    .expect("serializable")
}

/// Scopes given in one orientation get their transpose; scopes given in both are
/// stored as given so asymmetry is reported by the verifier.
pub fn parse_prague(text: &str) -> Result<PragueInstance> {
    let file: PragueFile = serde_json::from_str(text)?;
    let domain = Domain::new(file.domain_size)?;
    let mut p = PragueInstance::new(file.num_variables, domain)?;
    let mut given: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (index, c) in file.constraints.into_iter().enumerate() {
        let [x, y] = c.scope[..] else {
            return Err(Error::InvalidConstraint {
                index,
                reason: format!("Prague scopes are pairs, got {:?}", c.scope),
            });
        };
        let mut pairs = Vec::with_capacity(c.relation.len());
        for t in c.relation {
            let [a, b] = t[..] else {
                return Err(Error::InvalidConstraint {
                    index,
                    reason: format!("tuple {t:?} is not a pair"),
                });
            };
            pairs.push((a, b));
        }
        if given.insert((x, y), pairs).is_some() {
            return Err(Error::InvalidConstraint {
                index,
                reason: format!("scope ({x}, {y}) appears twice"),
            });
        }
    }
    for (&(x, y), pairs) in &given {
        if given.contains_key(&(y, x)) {
            p.set_directed(x, y, pairs)?;
        } else {
            p.set_relation(x, y, pairs)?;
        }
    }
    if let Some(vars) = file.variables {
        let listed: BTreeSet<usize> = vars.into_iter().collect();
        for v in listed {
            p.add_variable(v)?;
        }
    }
    Ok(p)
}

/// Writes each unordered scope once, in its `x < y` orientation.
pub fn prague_to_json(p: &PragueInstance) -> String {
    let constraints = p
        .scopes()
        .filter(|&(x, y)| x < y)
        .map(|(x, y)| ConstraintFile {
            scope: vec![x, y],
            relation: p.pairs(x, y).into_iter().map(|(a, b)| vec![a, b]).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&PragueFile {
        num_variables: p.num_variables(),
        domain_size: p.domain().size(),
        variables: Some(p.variables().collect()),
        constraints,
    })
    .expect("serializable")
}

#[derive(Deserialize)]
struct VectorsFile {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    num_variables: Option<usize>,
    #[serde(default)]
    domain_size: Option<usize>,
}

fn parse_key(key: &str) -> Result<(usize, usize)> {
    let (x, a) = key
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("vector key {key:?} is not of the form x:a")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("vector key {key:?} is not of the form x:a")))
    };
    Ok((parse(x)?, parse(a)?))
}

/// Missing `(x, a)` keys are zero vectors; the shape is inferred from the largest keys
/// unless `num_variables` / `domain_size` are given.
pub fn parse_vectors(text: &str) -> Result<SdpVectors> {
    let file: VectorsFile = serde_json::from_str(text)?;
    let mut entries = Vec::with_capacity(file.vectors.len());
    let (mut n, mut d) = (0, 0);
    for (key, v) in file.vectors {
        let (x, a) = parse_key(&key)?;
        if v.len() != file.dimension {
            return Err(Error::Parse(format!(
                "vector {key} has {} coordinates, dimension is {}",
                v.len(),
                file.dimension
            )));
        }
        n = n.max(x + 1);
        d = d.max(a + 1);
        entries.push((x, a, v));
    }
    let n = file.num_variables.unwrap_or(n);
    let d = file.domain_size.unwrap_or(d);
    let domain = Domain::new(d)?;
    let mut out = SdpVectors::new(n, domain, file.dimension, vec![0.0; n * d * file.dimension])?;
    for (x, a, v) in entries {
        if x >= n || a >= d {
            return Err(Error::Parse(format!("vector {x}:{a} outside the declared shape")));
        }
        out.vector_mut(x, a).copy_from_slice(&v);
    }
    Ok(out)
}

/// Reals are written with 17 significant digits.
pub fn vectors_to_json(v: &SdpVectors) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{{");
    let _ = writeln!(s, "  \"dimension\": {},", v.dimension());
    let _ = writeln!(s, "  \"num_variables\": {},", v.num_variables());
    let _ = writeln!(s, "  \"domain_size\": {},", v.domain().size());
    let _ = writeln!(s, "  \"vectors\": {{");
    let d = v.domain().size();
    let total = v.num_variables() * d;
    for i in 0..total {
        let (x, a) = (i / d, i % d);
        let coords: Vec<String> = v.vector(x, a).iter().map(|c| format!("{c:.16e}")).collect();
        let sep = if i + 1 < total { "," } else { "" };
        let _ = writeln!(s, "    \"{x}:{a}\": [{}]{sep}", coords.join(", "));
    }
    let _ = writeln!(s, "  }}");
    s.push('}');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::two_sat;

    #[test]
    fn instance_round_trip() {
        let text = r#"{"num_variables": 2, "domain_size": 2,
            "constraints": [{"scope": [0, 1], "relation": [[0,1],[1,0],[1,1]]}]}"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.num_constraints(), 1);
        assert_eq!(parse_instance(&instance_to_json(&inst)).unwrap(), inst);
    }

    #[test]
    fn out_of_range_scope_names_constraint() {
        let text = r#"{"num_variables": 2, "domain_size": 2,
            "constraints": [{"scope": [0, 5], "relation": [[0,1]]}]}"#;
        let err = parse_instance(text).unwrap_err().to_string();
        assert!(
            err.contains("constraint 0") && err.contains("variable out of range"),
            "{err}"
        );
    }

    #[test]
    fn arity_mismatch_names_constraint() {
        let text = r#"{"num_variables": 2, "domain_size": 2,
            "constraints": [{"scope": [0], "relation": [[0,1]]}]}"#;
        let err = parse_instance(text).unwrap_err().to_string();
        assert!(err.contains("constraint 0"), "{err}");
    }

    #[test]
    fn language_round_trip_with_nested_tables() {
        let lang = two_sat();
        let back = parse_language(&language_to_json(&lang)).unwrap();
        assert_eq!(back.witness(), lang.witness());
        assert_eq!(back.relations().len(), 4);
    }

    #[test]
    fn flat_tables_parse() {
        let text = r#"{"domain_size": 2, "relations": {"imp": [[0,0],[0,1],[1,1]]},
            "f1": [0,0,0,0,0,0,0,1], "f2": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1]}"#;
        assert!(parse_language(text).unwrap().witness().is_some());
    }

    #[test]
    fn rejected_witness_is_an_error() {
        let text = r#"{"domain_size": 2, "relations": {"ne": [[0,1],[1,0]]},
            "f1": [0,0,0,0,0,0,0,1], "f2": [0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,1]}"#;
        assert!(matches!(parse_language(text), Err(Error::InvalidWitness(_))));
    }

    #[test]
    fn vectors_round_trip_exactly() {
        let mut v = SdpVectors::new(1, Domain::new(2).unwrap(), 2, vec![0.1, 1.0 / 3.0, -2.5e-17, 0.7]).unwrap();
        v.objective = None;
        let back = parse_vectors(&vectors_to_json(&v)).unwrap();
        assert_eq!(back, v);
    }
}
