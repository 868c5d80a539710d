//! JSON documents for networks, evidence and cutsets.
//!
//! A network file looks like
//!
//! ```json
//! {
//!   "variables": [{"name": "A", "values": ["no", "yes"]}, {"name": "B", "values": ["no", "yes"]}],
//!   "cpts": [
//!     {"child": "A", "parents": [], "rows": [[0.7, 0.3]]},
//!     {"child": "B", "parents": ["A"], "rows": [[0.9, 0.1], [0.2, 0.8]]}
//!   ]
//! }
//! ```
//!
//! Variable ids follow the order of `variables`; CPTs may appear in any
//! order and refer to variables by name. Rows are listed row-major over the
//! parent domains with the last parent varying fastest. Evidence is an object
//! mapping variable names to value labels, a cutset an array of names.

use std::collections::HashMap;
use std::fmt;

use lwlc_core::graphops::Cutset;
use lwlc_core::{BayesNet, Cpt, Evidence, ModelError, VarId, Variable};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("CPT of `{child}` names unknown parent `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error("variable `{var}` has no value `{label}`")]
    UnknownValue { var: String, label: String },
    #[error("variable `{0}` has more than one CPT")]
    DuplicateCpt(String),
    #[error("variable `{0}` has no CPT")]
    MissingCpt(String),
    #[error("`{0}` is listed twice")]
    DuplicateEntry(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl FormatError {
    /// Malformed JSON or a document of the wrong shape, as opposed to a
    /// well-formed document describing an invalid network.
    pub fn is_syntax(&self) -> bool {
        matches!(self, FormatError::Syntax { .. })
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep only the reason
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    variables: Vec<VariableDoc>,
    cpts: Vec<CptDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    child: String,
    parents: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn name_index(net: &BayesNet) -> HashMap<&str, VarId> {
    net.variables().iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect()
}

pub fn parse_network(text: &str) -> Result<BayesNet, FormatError> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    let mut ids = HashMap::with_capacity(doc.variables.len());
    for (i, v) in doc.variables.iter().enumerate() {
        if ids.insert(v.name.as_str(), i).is_some() {
            return Err(ModelError::DuplicateName(v.name.clone()).into());
        }
    }
    let mut cpts: Vec<Option<Cpt>> = vec![None; doc.variables.len()];
    for c in doc.cpts {
        let child = *ids.get(c.child.as_str()).ok_or_else(|| FormatError::UnknownVariable(c.child.clone()))?;
        let parents = c
            .parents
            .iter()
            .map(|p| {
                ids.get(p.as_str()).copied().ok_or_else(|| FormatError::UnknownParent {
                    child: c.child.clone(),
                    parent: p.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if cpts[child].is_some() {
            return Err(FormatError::DuplicateCpt(c.child));
        }
        cpts[child] = Some(Cpt::new(child, parents, c.rows));
    }
    let cpts = cpts
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| FormatError::MissingCpt(doc.variables[i].name.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let variables = doc.variables.into_iter().map(|v| Variable::new(v.name, v.values)).collect();
    Ok(BayesNet::new(variables, cpts)?)
}

/// Pretty-printed network document. Probabilities are written in shortest
/// round-trip form, so parsing the result gives back the same numbers.
pub fn serialize_network(net: &BayesNet) -> String {
    let name = |v: VarId| net.variable(v).name.clone();
    let doc = NetworkDoc {
        variables: net
            .variables()
            .iter()
            .map(|v| VariableDoc {
                name: v.name.clone(),
                values: v.values.clone(),
            })
            .collect(),
        cpts: net
            .cpts()
            .iter()
            .enumerate()
            .map(|(v, c)| CptDoc {
                child: name(v),
                parents: c.parents.iter().map(|&p| name(p)).collect(),
                rows: c.rows().map(<[f64]>::to_vec).collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

/// A JSON object read as its key/value pairs in document order, so that
/// repeated keys can be reported instead of silently overwritten.
struct Pairs(Vec<(String, String)>);

impl<'de> Deserialize<'de> for Pairs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PairsVisitor;
        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = Pairs;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping variable names to value labels")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Pairs, A::Error> {
                let mut out = Vec::new();
                while let Some(kv) = map.next_entry()? {
                    out.push(kv);
                }
                Ok(Pairs(out))
            }
        }
        d.deserialize_map(PairsVisitor)
    }
}

pub fn parse_evidence(text: &str, net: &BayesNet) -> Result<Evidence, FormatError> {
    let Pairs(pairs) = serde_json::from_str(text)?;
    let ids = name_index(net);
    let mut ev = Evidence::new();
    for (name, label) in pairs {
        let v = *ids.get(name.as_str()).ok_or_else(|| FormatError::UnknownVariable(name.clone()))?;
        let x = net.variable(v).value_index(&label).ok_or_else(|| FormatError::UnknownValue {
            var: name.clone(),
            label,
        })?;
        if ev.insert(v, x).is_some() {
            return Err(FormatError::DuplicateEntry(name));
        }
    }
    Ok(ev)
}

pub fn serialize_evidence(ev: &Evidence, net: &BayesNet) -> String {
    let mut m = serde_json::Map::new();
    for (v, x) in ev.iter() {
        let var = net.variable(v);
        m.insert(var.name.clone(), var.values[x].clone().into());
    }
    let mut s = serde_json::to_string_pretty(&m).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn parse_cutset(text: &str, net: &BayesNet) -> Result<Cutset, FormatError> {
    let names: Vec<String> = serde_json::from_str(text)?;
    let ids = name_index(net);
    let mut members = Vec::with_capacity(names.len());
    for name in names {
        let v = *ids.get(name.as_str()).ok_or_else(|| FormatError::UnknownVariable(name.clone()))?;
        if members.contains(&v) {
            return Err(FormatError::DuplicateEntry(name));
        }
        members.push(v);
    }
    Ok(Cutset::new(members))
}

pub fn cutset_names(cutset: &Cutset, net: &BayesNet) -> Vec<String> {
    cutset.members().iter().map(|&v| net.variable(v).name.clone()).collect()
}

pub fn serialize_cutset(cutset: &Cutset, net: &BayesNet) -> String {
    let mut s = serde_json::to_string(&cutset_names(cutset, net)).expect("plain data serializes");
    s.push('\n');
    s
}
