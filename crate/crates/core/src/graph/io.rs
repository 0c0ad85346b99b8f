//! Graph JSON: `{"n", "directed": true, "edges": [[src, dst, "cap"], ...], "meta"}`.
//! Capacities are written as decimal strings (shortest round-trip form).

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{Digraph, GraphMeta};
use crate::error::{Error, Result};

pub fn to_json(g: &Digraph) -> Value {
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .map(|e| json!([e.src, e.dst, format!("{}", e.cap)]))
        .collect();
    let mut v = json!({
        "n": g.n(),
        "directed": true,
        "edges": edges,
        "meta": g.meta(),
    });
    if let Some(labels) = g.labels() {
        v["labels"] = json!(labels);
    }
    v
}

fn parse_err(msg: String) -> Error {
    Error::Parse(msg)
}

fn parse_cap(v: &Value, k: usize) -> Result<f64> {
    let c = match v {
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(format!("edge #{k}: capacity `{s}` is not a decimal")))?,
        Value::Number(x) => x.as_f64().unwrap_or(f64::NAN),
        _ => return Err(parse_err(format!("edge #{k}: capacity must be a decimal string or number"))),
    };
    if !(c.is_finite() && c >= 0.0) {
        return Err(parse_err(format!("edge #{k}: capacity {c} must be finite and >= 0")));
    }
    Ok(c)
}

pub fn from_json(v: &Value) -> Result<Digraph> {
    let n = v
        .get("n")
        .and_then(Value::as_u64)
        .ok_or_else(|| parse_err("missing or non-integer field `n`".into()))? as usize;
    if v.get("directed").and_then(Value::as_bool) == Some(false) {
        return Err(parse_err("only directed graphs are supported (\"directed\": true)".into()));
    }
    let raw = v
        .get("edges")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing array field `edges`".into()))?;
    let mut edges = Vec::with_capacity(raw.len());
    for (k, e) in raw.iter().enumerate() {
        let a = e
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| parse_err(format!("edge #{k} must be [src, dst, capacity]")))?;
        let idx = |x: &Value, what: &str| -> Result<usize> {
            let i = x
                .as_u64()
                .ok_or_else(|| parse_err(format!("edge #{k}: {what} must be a non-negative integer")))?
                as usize;
            if i >= n {
                return Err(parse_err(format!("edge #{k}: {what} {i} out of range for n={n}")));
            }
            Ok(i)
        };
        edges.push((idx(&a[0], "src")?, idx(&a[1], "dst")?, parse_cap(&a[2], k)?));
    }
    let mut g = Digraph::from_edges(n, edges)?;
    if let Some(m) = v.get("meta") {
        let meta: GraphMeta = serde_json::from_value(m.clone())
            .map_err(|e| parse_err(format!("bad `meta`: {e}")))?;
        g = g.with_meta(meta);
    }
    if let Some(l) = v.get("labels") {
        let labels: Vec<String> =
            serde_json::from_value(l.clone()).map_err(|e| parse_err(format!("bad `labels`: {e}")))?;
        g = g.with_labels(labels)?;
    }
    Ok(g)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Digraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
    from_json(&v).map_err(|e| match e {
        Error::Parse(m) => parse_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_graph(g: &Digraph, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&to_json(g))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    #[test]
    fn round_trip() {
        let g = gen::gen_random_regular(12, 3, 4).unwrap().scaled(1.0 / 3.0).unwrap();
        let back = from_json(&to_json(&g)).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn out_of_range_edge_is_named() {
        let v = json!({"n": 2, "directed": true, "edges": [[0, 1, "1"], [1, 2, "1"]]});
        let msg = from_json(&v).unwrap_err().to_string();
        assert!(msg.contains("edge #1") && msg.contains("dst 2"), "{msg}");
    }

    #[test]
    fn trivial_graph() {
        let g = from_json(&json!({"n": 1, "directed": true, "edges": []})).unwrap();
        assert_eq!((g.n(), g.num_edges()), (1, 0));
    }
}
