//! Node embedding matrices and the word2vec-style text format.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::skipgram::{train_skipgram, SkipGramConfig};
use crate::walk::{generate_walks, WalkConfig};

/// One row per node plus the row-to-label map.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    vectors: Array2<f64>,
    labels: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        if vectors.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.nrows(),
                found: labels.len(),
            });
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("embedding contains non-finite values".into()));
        }
        Ok(Self { vectors, labels })
    }

    /// Rows labelled by their decimal index.
    pub fn from_rows(vectors: Array2<f64>) -> Self {
        let labels = (0..vectors.nrows()).map(|i| i.to_string()).collect();
        Self::new(vectors, labels).expect("row count matches")
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        Self::new(self.vectors, labels)
    }

    /// Rows reordered so that row `perm[i]` of the result is row `i` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: perm.len(),
            });
        }
        let mut vectors = Array2::zeros(self.vectors.raw_dim());
        let mut labels = vec![String::new(); self.len()];
        for (old, &new) in perm.iter().enumerate() {
            vectors.row_mut(new).assign(&self.vectors.row(old));
            labels[new] = self.labels[old].clone();
        }
        Self::new(vectors, labels)
    }

    /// Zero-mean, unit-variance columns; constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let mean = self.vectors.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(self.dim()));
        let std = self.vectors.std_axis(Axis(0), 0.0);
        let mut v = &self.vectors - &mean;
        for (mut col, s) in v.columns_mut().into_iter().zip(std.iter()) {
            if *s > 0.0 {
                col /= *s;
            }
        }
        Self {
            vectors: v,
            labels: self.labels.clone(),
        }
    }

    /// Text form: header `n d`, then `label v1 ... vd` per row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dim());
        for (label, row) in self.labels.iter().zip(self.vectors.rows()) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Empty("embedding file".into()))?;
        let parse_usize = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
                line: 1,
                message: "header must be `n d`".into(),
            })
        };
        let mut h = header.split_whitespace();
        let n = parse_usize(h.next())?;
        let d = parse_usize(h.next())?;
        let mut vectors = Array2::zeros((n, d));
        let mut labels = Vec::with_capacity(n);
        for (row, (lineno, line)) in lines.enumerate() {
            if row >= n {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("more than {n} rows"),
                });
            }
            let mut toks = line.split_whitespace();
            labels.push(toks.next().unwrap_or_default().to_owned());
            let mut count = 0;
            for (k, tok) in toks.enumerate() {
                if k >= d {
                    count = k + 1;
                    break;
                }
                vectors[[row, k]] = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("`{tok}` is not a number"),
                })?;
                count = k + 1;
            }
            if count != d {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {d} values"),
                });
            }
        }
        if labels.len() != n {
            return Err(Error::Parse {
                line: labels.len() + 1,
                message: format!("expected {n} rows, found {}", labels.len()),
            });
        }
        Self::new(vectors, labels)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
}

/// Walks followed by skip-gram; isolated nodes get the zero vector.
pub fn embed_graph(g: &Graph, cfg: &EmbedConfig) -> Result<EmbeddingMatrix> {
    let walks = generate_walks(g, &cfg.walk)?;
    if walks.skipped > 0 {
        log::warn!("{} isolated node(s) receive zero embeddings", walks.skipped);
    }
    let mut emb = train_skipgram(&walks.walks, g.num_nodes(), &cfg.skipgram)?;
    for i in (0..g.num_nodes()).filter(|&i| g.degree(i) == 0) {
        emb.vectors.row_mut(i).fill(0.0);
    }
    emb.with_labels(g.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_edge_list, watts_strogatz};
    use ndarray::array;

    fn small_cfg(dim: usize) -> EmbedConfig {
        EmbedConfig {
            walk: WalkConfig { walks_per_node: 5, walk_length: 20, ..Default::default() },
            skipgram: SkipGramConfig { dim, epochs: 2, ..Default::default() },
        }
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let m = EmbeddingMatrix::new(
            array![[0.1, -2.5e-17], [1.0 / 3.0, 12345.678]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let text = m.to_text();
        assert!(text.starts_with("2 2\n"));
        assert_eq!(EmbeddingMatrix::parse(&text).unwrap(), m);
    }

    #[test]
    fn malformed_text() {
        assert!(EmbeddingMatrix::parse("").is_err());
        assert!(EmbeddingMatrix::parse("2 2\na 1 2\n").is_err());
        assert!(EmbeddingMatrix::parse("1 2\na 1\n").is_err());
        assert!(EmbeddingMatrix::parse("1 2\na 1 x\n").is_err());
        assert!(EmbeddingMatrix::parse("1 2\na 1 2 3\n").is_err());
    }

    #[test]
    fn shape_and_determinism() {
        let g = watts_strogatz(100, 4, 0.1, 5).unwrap();
        let cfg = small_cfg(64);
        let a = embed_graph(&g, &cfg).unwrap();
        assert_eq!((a.len(), a.dim()), (100, 64));
        assert_eq!(a.labels(), g.labels());
        assert_eq!(a, embed_graph(&g, &cfg).unwrap());
    }

    #[test]
    fn isolated_row_is_zero() {
        let g = parse_edge_list("a b\nb c\nc a\nalone", false).unwrap();
        let e = embed_graph(&g, &small_cfg(8)).unwrap();
        let alone = g.index_of("alone").unwrap();
        assert!(e.vectors().row(alone).iter().all(|&v| v == 0.0));
        assert!(e.vectors().row(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn standardize_columns() {
        let m = EmbeddingMatrix::from_rows(array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]]);
        let s = m.standardized();
        let v = s.vectors();
        assert!((v.column(0).sum()).abs() < 1e-12);
        assert!((v.column(0).std(0.0) - 1.0).abs() < 1e-12);
        assert!(v.column(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn permuted_rows() {
        let m = EmbeddingMatrix::from_rows(array![[1.0], [2.0], [3.0]]);
        let p = m.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.vectors(), &array![[2.0], [3.0], [1.0]]);
        assert_eq!(p.labels(), ["1", "2", "0"]);
    }
}
