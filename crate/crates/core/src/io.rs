//! JSON documents for instances, bid profiles, rankings and allocations.
//!
//! ```json
//! {"agents": 2, "goods": ["a", "b", "c"], "valuations": [[6, 5, 4], [4, 6, "11/2"]]}
//! {"bids": [[5, 6, 4], [4, 6, 5]]}
//! {"rankings": [["b", "a", "c"], [1, 2, 0]]}
//! {"bundles": [["a", "b"], ["c"]]}
//! ```
//!
//! Matrix entries are integers, decimal strings or `"p/q"` strings; decimals
//! are converted exactly. Goods in bundles and rankings may be given by name or
//! by zero-based index.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{default_good_names, Allocation, BidProfile, BidVector, GoodSet, Instance, Ranking};
use crate::rational::Rational;

fn object<'a>(doc: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    doc.as_object()
        .ok_or_else(|| Error::parse("$", format!("{what} document must be a JSON object")))
}

fn parse_entry(v: &Value, field: &str) -> Result<Rational> {
    let r = match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Rational::from_integer(i)
            } else {
                n.to_string()
                    .parse()
                    .map_err(|e| Error::parse(field, format!("{e}")))?
            }
        }
        Value::String(s) => s.parse().map_err(|e| Error::parse(field, format!("{e}")))?,
        _ => return Err(Error::parse(field, "expected a number or a rational string")),
    };
    if r.is_negative() {
        return Err(Error::parse(field, format!("negative value {r}")));
    }
    Ok(r)
}

fn parse_matrix(v: &Value, key: &str, rows: Option<usize>, cols: usize) -> Result<Vec<Vec<Rational>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(key, "expected an array of rows"))?;
    if let Some(n) = rows {
        if arr.len() != n {
            return Err(Error::parse(key, format!("expected {n} rows, found {}", arr.len())));
        }
    }
    arr.iter()
        .enumerate()
        .map(|(i, row)| {
            let field = format!("{key}[{i}]");
            let row = row
                .as_array()
                .ok_or_else(|| Error::parse(&field, "expected an array"))?;
            if row.len() != cols {
                return Err(Error::parse(&field, format!("expected {cols} entries, found {}", row.len())));
            }
            row.iter()
                .enumerate()
                .map(|(j, e)| parse_entry(e, &format!("{field}[{j}]")))
                .collect()
        })
        .collect()
}

/// Parses an instance document.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let obj = object(&doc, "instance")?;
    let vals = obj
        .get("valuations")
        .ok_or_else(|| Error::parse("valuations", "missing field"))?;
    let first_len = vals
        .as_array()
        .and_then(|a| a.first())
        .and_then(Value::as_array)
        .map(Vec::len);
    let goods = match obj.get("goods") {
        None => default_good_names(first_len.unwrap_or(0)),
        Some(Value::Number(n)) => {
            let m = n
                .as_u64()
                .ok_or_else(|| Error::parse("goods", "expected a count or a list of names"))?;
            default_good_names(m as usize)
        }
        Some(Value::Array(names)) => {
            let mut out = Vec::with_capacity(names.len());
            for (j, g) in names.iter().enumerate() {
                let name = g
                    .as_str()
                    .ok_or_else(|| Error::parse(format!("goods[{j}]"), "expected a string"))?;
                if out.iter().any(|x: &String| x == name) {
                    return Err(Error::parse(format!("goods[{j}]"), format!("duplicate good name {name:?}")));
                }
                out.push(name.to_string());
            }
            out
        }
        Some(_) => return Err(Error::parse("goods", "expected a count or a list of names")),
    };
    let agents = match obj.get("agents") {
        None => None,
        Some(a) => Some(
            a.as_u64()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::parse("agents", "expected a positive integer"))? as usize,
        ),
    };
    let values = parse_matrix(vals, "valuations", agents, goods.len())?;
    if values.is_empty() {
        return Err(Error::parse("valuations", "an instance needs at least one agent"));
    }
    Instance::new(values, goods).map_err(|e| Error::parse("valuations", e.to_string()))
}

fn matrix_json(rows: &[Vec<Rational>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| serde_json::to_value(r).expect("rationals serialize"))
            .collect(),
    )
}

pub fn instance_to_json(inst: &Instance) -> Value {
    json!({
        "agents": inst.n(),
        "goods": inst.good_names(),
        "valuations": matrix_json(inst.values()),
    })
}

/// Serializes an instance; `parse_instance` inverts this exactly.
pub fn serialize_instance(inst: &Instance) -> String {
    to_pretty(&instance_to_json(inst))
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Parses `{"bids": [[...], ...]}` against the instance's shape.
pub fn parse_bids(text: &str, inst: &Instance) -> Result<BidProfile> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let obj = object(&doc, "bids")?;
    let bids = obj.get("bids").ok_or_else(|| Error::parse("bids", "missing field"))?;
    let rows = parse_matrix(bids, "bids", Some(inst.n()), inst.m())?;
    Ok(BidProfile(rows.into_iter().map(BidVector).collect()))
}

pub fn bids_to_json(profile: &BidProfile) -> Value {
    let rows: Vec<Vec<Rational>> = profile.0.iter().map(|b| b.0.clone()).collect();
    json!({ "bids": matrix_json(&rows) })
}

fn parse_good(v: &Value, inst: &Instance, field: &str) -> Result<usize> {
    let g = match v {
        Value::String(name) => inst
            .good_index(name)
            .ok_or_else(|| Error::parse(field, format!("unknown good {name:?}")))?,
        Value::Number(n) => n
            .as_u64()
            .map(|g| g as usize)
            .filter(|&g| g < inst.m())
            .ok_or_else(|| Error::parse(field, format!("good index {n} out of range")))?,
        _ => return Err(Error::parse(field, "expected a good name or index")),
    };
    Ok(g)
}

fn parse_good_lists(v: &Value, key: &str, inst: &Instance) -> Result<Vec<Vec<usize>>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::parse(key, "expected an array"))?;
    if arr.len() != inst.n() {
        return Err(Error::parse(key, format!("expected {} entries, found {}", inst.n(), arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, row)| {
            let field = format!("{key}[{i}]");
            row.as_array()
                .ok_or_else(|| Error::parse(&field, "expected an array of goods"))?
                .iter()
                .enumerate()
                .map(|(j, g)| parse_good(g, inst, &format!("{field}[{j}]")))
                .collect()
        })
        .collect()
}

/// Parses `{"bundles": [...]}` and checks that it is a complete allocation.
pub fn parse_allocation(text: &str, inst: &Instance) -> Result<Allocation> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let obj = object(&doc, "allocation")?;
    let bundles = obj
        .get("bundles")
        .ok_or_else(|| Error::parse("bundles", "missing field"))?;
    let lists = parse_good_lists(bundles, "bundles", inst)?;
    let alloc = Allocation::new(lists.into_iter().map(|l| l.into_iter().collect()).collect());
    alloc
        .check(inst)
        .map_err(|e| Error::parse("bundles", e.to_string()))?;
    Ok(alloc)
}

pub fn goods_json(inst: &Instance, set: GoodSet) -> Value {
    Value::Array(
        set.iter()
            .map(|g| Value::String(inst.good_names()[g].clone()))
            .collect(),
    )
}

pub fn allocation_to_json(inst: &Instance, alloc: &Allocation) -> Value {
    json!({
        "bundles": alloc.bundles.iter().map(|&b| goods_json(inst, b)).collect::<Vec<_>>(),
    })
}

/// Parses `{"rankings": [...]}`; each row must be a permutation of the goods.
pub fn parse_rankings(text: &str, inst: &Instance) -> Result<Vec<Ranking>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let obj = object(&doc, "rankings")?;
    let rows = obj
        .get("rankings")
        .ok_or_else(|| Error::parse("rankings", "missing field"))?;
    let lists = parse_good_lists(rows, "rankings", inst)?;
    lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let r = Ranking(l);
            if r.len() != inst.m() || !r.is_permutation() {
                return Err(Error::parse(format!("rankings[{i}]"), "not a permutation of the goods"));
            }
            Ok(r)
        })
        .collect()
}

pub fn ranking_json(inst: &Instance, r: &Ranking) -> Value {
    Value::Array(
        r.0.iter()
            .map(|&g| Value::String(inst.good_names()[g].clone()))
            .collect(),
    )
}

pub fn rankings_to_json(inst: &Instance, rankings: &[Ranking]) -> Value {
    json!({ "rankings": rankings.iter().map(|r| ranking_json(inst, r)).collect::<Vec<_>>() })
}
