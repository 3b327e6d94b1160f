//! JSON file formats for matrices, measures, and partitions.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lattice::IntMatrix;
use crate::measure::{parse_rational, IncrementMeasure, Weights};
use crate::symbolic::{MarkovPartition, Rectangle};

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    d: usize,
    rows: Vec<Vec<i64>>,
}

/// Reads `{"d": 2, "rows": [[1, 1], [1, 0]]}`.
pub fn parse_matrix(text: &str) -> Result<IntMatrix> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("matrix file: {e}")))?;
    if file.rows.len() != file.d {
        return Err(Error::Parse(format!("matrix file declares d = {} but has {} rows", file.d, file.rows.len())));
    }
    if let Some(row) = file.rows.iter().find(|r| r.len() != file.d) {
        return Err(Error::Parse(format!("row of length {} in a {}×{} matrix", row.len(), file.d, file.d)));
    }
    if file.d == 0 {
        return Err(Error::Parse("matrix must have d ≥ 1".into()));
    }
    IntMatrix::from_rows(&file.rows)
}

pub fn matrix_to_json(a: &IntMatrix) -> Result<String> {
    let rows = a.to_i64_rows().ok_or_else(|| Error::Domain("matrix entries exceed i64".into()))?;
    Ok(serde_json::to_string(&MatrixFile { d: a.rows(), rows }).expect("matrix serializes"))
}

#[derive(Debug, Deserialize)]
struct MeasureEntry {
    point: Vec<i64>,
    prob: Value,
}

/// Reads `[{"point": [1, 0], "prob": "1/3"}, ...]`. String probabilities
/// are exact rationals; if any probability is a JSON number the whole
/// measure is in floating point.
pub fn parse_measure(text: &str) -> Result<IncrementMeasure> {
    let entries: Vec<MeasureEntry> = serde_json::from_str(text).map_err(|e| Error::Parse(format!("measure file: {e}")))?;
    let support: Vec<Vec<i64>> = entries.iter().map(|e| e.point.clone()).collect();
    if entries.iter().any(|e| e.prob.is_number()) {
        let weights = entries
            .iter()
            .map(|e| match &e.prob {
                Value::Number(x) => x.as_f64().ok_or_else(|| Error::Parse(format!("bad probability {x}"))),
                Value::String(s) => {
                    let r = parse_rational(s)?;
                    Ok(num_traits::ToPrimitive::to_f64(&r).unwrap_or(f64::NAN))
                }
                other => Err(Error::Parse(format!("probability must be a string or number, got {other}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        return IncrementMeasure::float(support, weights);
    }
    let weights = entries
        .iter()
        .map(|e| match &e.prob {
            Value::String(s) => parse_rational(s),
            other => Err(Error::Parse(format!("probability must be a string or number, got {other}"))),
        })
        .collect::<Result<Vec<BigRational>>>()?;
    IncrementMeasure::exact(support, weights)
}

pub fn measure_to_json(mu: &IncrementMeasure) -> String {
    let entries: Vec<Value> = match mu.weights() {
        Weights::Exact(w) => {
            mu.support().iter().zip(w).map(|(p, x)| json!({ "point": p, "prob": x.to_string() })).collect()
        }
        Weights::Float(w) => mu.support().iter().zip(w).map(|(p, x)| json!({ "point": p, "prob": x })).collect(),
    };
    Value::Array(entries).to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct RectangleEntry {
    id: usize,
    anchor: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stable_edge: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unstable_edge: Option<Vec<f64>>,
    /// The corners `anchor + edge_j`, one per edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionFile {
    rectangles: Vec<RectangleEntry>,
    adjacency: Vec<Vec<u8>>,
}

/// Rectangles and adjacency from the partition exchange format. Rectangles
/// are renumbered by position after checking the ids are `0..m`.
pub fn parse_partition(text: &str) -> Result<(Vec<Rectangle>, Vec<Vec<u8>>)> {
    let file: PartitionFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("partition file: {e}")))?;
    let mut rects = Vec::with_capacity(file.rectangles.len());
    for (pos, r) in file.rectangles.into_iter().enumerate() {
        if r.id != pos {
            return Err(Error::Parse(format!("rectangle ids must be 0..m in order, found {} at {pos}", r.id)));
        }
        let edges = match (r.stable_edge, r.unstable_edge, r.vertices) {
            (Some(s), Some(u), None) => vec![s, u],
            (None, None, Some(vs)) => vs.iter().map(|v| v.iter().zip(&r.anchor).map(|(a, b)| a - b).collect()).collect(),
            _ => return Err(Error::Parse(format!("rectangle {pos} needs stable_edge and unstable_edge, or vertices"))),
        };
        if edges.len() != r.anchor.len() || edges.iter().any(|e| e.len() != r.anchor.len()) {
            return Err(Error::Parse(format!("rectangle {pos} has edges of the wrong dimension")));
        }
        rects.push(Rectangle { id: pos, anchor: r.anchor, edges });
    }
    let m = rects.len();
    if file.adjacency.len() != m || file.adjacency.iter().any(|row| row.len() != m || row.iter().any(|&x| x > 1)) {
        return Err(Error::Parse(format!("adjacency must be an {m}×{m} 0/1 matrix")));
    }
    Ok((rects, file.adjacency))
}

pub fn partition_to_json(p: &MarkovPartition) -> String {
    let rectangles = p
        .rectangles
        .iter()
        .map(|r| {
            if r.dim() == 2 && r.edges.len() == 2 {
                RectangleEntry {
                    id: r.id,
                    anchor: r.anchor.clone(),
                    stable_edge: Some(r.edges[0].clone()),
                    unstable_edge: Some(r.edges[1].clone()),
                    vertices: None,
                }
            } else {
                let vertices = r.edges.iter().map(|e| e.iter().zip(&r.anchor).map(|(a, b)| a + b).collect()).collect();
                RectangleEntry { id: r.id, anchor: r.anchor.clone(), stable_edge: None, unstable_edge: None, vertices: Some(vertices) }
            }
        })
        .collect();
    serde_json::to_string(&PartitionFile { rectangles, adjacency: p.adjacency.clone() }).expect("partition serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::HyperbolicSystem;
    use crate::symbolic::build_partition_2d;

    #[test]
    fn matrix_files() {
        let a = parse_matrix(r#"{"d": 2, "rows": [[1, 1], [1, 0]]}"#).unwrap();
        assert_eq!(a, IntMatrix::from_slice(2, 2, &[1, 1, 1, 0]));
        assert_eq!(parse_matrix(&matrix_to_json(&a).unwrap()).unwrap(), a);
        assert!(matches!(parse_matrix(r#"{"d": 3, "rows": [[1, 1], [1, 0]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix(r#"{"d": 2, "rows": [[1, 1], [1]]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix("not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn measure_files_keep_exactness() {
        let exact = parse_measure(r#"[{"point": [0, 0], "prob": "1/3"}, {"point": [1, 0], "prob": "2/3"}]"#).unwrap();
        assert!(exact.is_exact());
        assert_eq!(exact.weight_strings(), vec!["1/3", "2/3"]);
        let float = parse_measure(r#"[{"point": [0, 0], "prob": 0.25}, {"point": [1, 0], "prob": "3/4"}]"#).unwrap();
        assert!(!float.is_exact());
        assert_eq!(float.probabilities(), &[0.25, 0.75]);
        assert_eq!(parse_measure(&measure_to_json(&exact)).unwrap(), exact);
        assert!(parse_measure(r#"[{"point": [0], "prob": "1/2"}]"#).is_err());
        assert!(parse_measure(r#"[{"point": [0], "prob": true}]"#).is_err());
    }

    #[test]
    fn partition_files() {
        let a = IntMatrix::from_slice(2, 2, &[2, 1, 1, 1]);
        let sys = HyperbolicSystem::new(&a).unwrap();
        let p = build_partition_2d(&a, sys.expansiveness_constant()).unwrap();
        let (rects, adj) = parse_partition(&partition_to_json(&p)).unwrap();
        let q = MarkovPartition::from_parts(rects, adj, &sys).unwrap();
        assert_eq!(q.adjacency, p.adjacency);
        assert!(q.frame().is_some());
        assert!((q.diameter - p.diameter).abs() < 1e-12);
        let vertex_form = r#"{"rectangles": [{"id": 0, "anchor": [0, 0, 0], "vertices": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}], "adjacency": [[1]]}"#;
        let (rects, _) = parse_partition(vertex_form).unwrap();
        assert_eq!(rects[0].edges[2], vec![0.0, 0.0, 1.0]);
        let bad_ids = r#"{"rectangles": [{"id": 3, "anchor": [0, 0], "stable_edge": [1, 0], "unstable_edge": [0, 1]}], "adjacency": [[1]]}"#;
        assert!(parse_partition(bad_ids).is_err());
    }
}
