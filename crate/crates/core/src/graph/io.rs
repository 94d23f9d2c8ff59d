use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Graph, GraphError, VertexId};

/// Parses the plain-text edge-list format.
///
/// ```text
/// n m d
/// u v        (m lines)
/// f_1 .. f_d (n lines, only when d > 0)
/// ```
///
/// Blank lines are ignored. Features are returned when `d > 0`.
pub fn parse_edge_list(text: &str) -> Result<(Graph, Option<FeatureMatrix>), GraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| GraphError::MalformedHeader("empty input".into()))?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| GraphError::MalformedHeader(format!("{header:?}: {e}")))?;
    let [n, m, d] = fields[..] else {
        return Err(GraphError::MalformedHeader(format!(
            "expected \"n m d\", got {header:?}"
        )));
    };

    let mut edges = Vec::with_capacity(m);
    let mut rows = Vec::new();
    for (line, content) in lines {
        if edges.len() < m {
            let ids: Vec<usize> = content
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| GraphError::MalformedLine {
                    line,
                    reason: format!("bad vertex id: {e}"),
                })?;
            let [u, v] = ids[..] else {
                return Err(GraphError::MalformedLine {
                    line,
                    reason: "expected \"u v\"".into(),
                });
            };
            edges.push((u, v));
        } else if rows.len() < n && d > 0 {
            let row: Vec<f32> = content
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| GraphError::MalformedLine {
                    line,
                    reason: format!("bad feature: {e}"),
                })?;
            if row.len() != d {
                return Err(GraphError::MalformedLine {
                    line,
                    reason: format!("expected {d} features, got {}", row.len()),
                });
            }
            rows.push(row);
        } else {
            return Err(GraphError::MalformedLine {
                line,
                reason: "unexpected trailing content".into(),
            });
        }
    }
    if edges.len() != m {
        return Err(GraphError::EdgeCountMismatch {
            declared: m,
            found: edges.len(),
        });
    }
    let graph = Graph::from_edges(n, &edges)?;
    if d == 0 {
        return Ok((graph, None));
    }
    if rows.len() != n {
        return Err(GraphError::FeatureShape {
            rows: rows.len(),
            dim: d,
            expected_rows: n,
        });
    }
    let feats = FeatureMatrix::new(n, d, rows.concat())?;
    Ok((graph, Some(feats)))
}

/// Inverse of [`parse_edge_list`]. Floats are written in shortest
/// round-trip form, so parsing the output reproduces the exact bits.
pub fn to_edge_list(g: &Graph, feats: Option<&FeatureMatrix>) -> String {
    let d = feats.map_or(0, FeatureMatrix::dim);
    let mut out = format!("{} {} {}\n", g.num_vertices(), g.num_edges(), d);
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    if let Some(f) = feats {
        for r in 0..f.rows() {
            let row: Vec<String> = f.row(r).iter().map(f32::to_string).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

/// JSON interchange form of a graph with optional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub edges: Vec<[VertexId; 2]>,
    #[serde(default)]
    pub features: Vec<Vec<f32>>,
}

impl GraphDocument {
    pub fn new(g: &Graph, feats: Option<&FeatureMatrix>) -> Self {
        GraphDocument {
            n: g.num_vertices(),
            m: g.num_edges(),
            d: feats.map_or(0, FeatureMatrix::dim),
            edges: g.edges().map(|(u, v)| [u, v]).collect(),
            features: feats.map(FeatureMatrix::to_rows).unwrap_or_default(),
        }
    }

    pub fn to_graph(&self) -> Result<(Graph, Option<FeatureMatrix>), GraphError> {
        if self.edges.len() != self.m {
            return Err(GraphError::EdgeCountMismatch {
                declared: self.m,
                found: self.edges.len(),
            });
        }
        let edges: Vec<_> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        let g = Graph::from_edges(self.n, &edges)?;
        if self.d == 0 {
            if !self.features.is_empty() {
                return Err(GraphError::FeatureShape {
                    rows: self.features.len(),
                    dim: 0,
                    expected_rows: 0,
                });
            }
            return Ok((g, None));
        }
        if self.features.len() != self.n || self.features.iter().any(|r| r.len() != self.d) {
            return Err(GraphError::FeatureShape {
                rows: self.features.len(),
                dim: self.d,
                expected_rows: self.n,
            });
        }
        let feats = FeatureMatrix::new(self.n, self.d, self.features.concat())?;
        Ok((g, Some(feats)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{attach_random_features, gen_er_connected};

    #[test]
    fn parses_path() {
        let (g, f) = parse_edge_list("3 2 0\n0 1\n1 2").unwrap();
        assert!(f.is_none());
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn parses_isolated_vertex() {
        let (g, _) = parse_edge_list("1 0 0").unwrap();
        assert_eq!((g.num_vertices(), g.num_edges()), (1, 0));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_edge_list("2 1 0\n0 2").unwrap_err(),
            GraphError::VertexOutOfRange { vertex: 2, n: 2 }
        );
        assert!(matches!(
            parse_edge_list("").unwrap_err(),
            GraphError::MalformedHeader(_)
        ));
        assert!(matches!(
            parse_edge_list("3 x 0").unwrap_err(),
            GraphError::MalformedHeader(_)
        ));
        assert!(matches!(
            parse_edge_list("3 1").unwrap_err(),
            GraphError::MalformedHeader(_)
        ));
        assert_eq!(
            parse_edge_list("2 1 0\n1 1").unwrap_err(),
            GraphError::SelfLoop(1)
        );
        assert_eq!(
            parse_edge_list("2 2 0\n0 1\n1 0").unwrap_err(),
            GraphError::DuplicateEdge(1, 0)
        );
        assert_eq!(
            parse_edge_list("3 2 0\n0 1").unwrap_err(),
            GraphError::EdgeCountMismatch {
                declared: 2,
                found: 1
            }
        );
        assert!(matches!(
            parse_edge_list("2 1 2\n0 1\n1 2\n3").unwrap_err(),
            GraphError::MalformedLine { line: 4, .. }
        ));
        assert!(matches!(
            parse_edge_list("2 1 0\n0 1\n0 1").unwrap_err(),
            GraphError::MalformedLine { line: 3, .. }
        ));
    }

    #[test]
    fn text_round_trip_keeps_feature_bits() {
        let g = gen_er_connected(12, 0.3, 5).unwrap();
        let f = attach_random_features(&g, 3, 9).unwrap();
        let (g2, f2) = parse_edge_list(&to_edge_list(&g, Some(&f))).unwrap();
        assert_eq!(g, g2);
        let f2 = f2.unwrap();
        let bits = |m: &FeatureMatrix| m.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&f), bits(&f2));
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let g = gen_er_connected(9, 0.4, 2).unwrap();
        let f = attach_random_features(&g, 2, 3).unwrap();
        let doc = GraphDocument::new(&g, Some(&f));
        let back = GraphDocument::from_json(&doc.to_json()).unwrap();
        let (g2, f2) = back.to_graph().unwrap();
        assert_eq!(g, g2);
        assert_eq!(Some(f), f2);
        let bad = r#"{"n":1,"m":0,"d":0,"edges":[],"colour":"red"}"#;
        assert!(matches!(
            GraphDocument::from_json(bad),
            Err(GraphError::Json(_))
        ));
    }
}
