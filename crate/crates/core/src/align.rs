//! Node-to-node matching in the shared embedding space.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::nn::MapperParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "1to2")]
    OneToTwo,
    #[serde(rename = "2to1")]
    TwoToOne,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::OneToTwo => "1to2",
            Direction::TwoToOne => "2to1",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1to2" => Ok(Direction::OneToTwo),
            "2to1" => Ok(Direction::TwoToOne),
            other => Err(Error::Format(format!("unknown direction `{other}`"))),
        }
    }
}

/// One matched target per source node. Targets may repeat.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    /// `(source label, target label)`, in source row order.
    pub pairs: Vec<(String, String)>,
    pub direction: Direction,
    pub mean_nn_distance: f64,
    pub per_pair_distance: Vec<f64>,
}

impl AlignmentResult {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# direction={} mean_nn_distance={}\n",
            self.direction, self.mean_nn_distance
        );
        for ((s, t), d) in self.pairs.iter().zip(&self.per_pair_distance) {
            let _ = writeln!(out, "{s}\t{t}\t{d}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Empty("alignment file".into()))?;
        let header_err = || Error::Parse {
            line: 1,
            message: "expected `# direction=<1to2|2to1> mean_nn_distance=<float>`".into(),
        };
        let rest = header.strip_prefix('#').ok_or_else(header_err)?;
        let mut direction = None;
        let mut mean = None;
        for tok in rest.split_whitespace() {
            match tok.split_once('=') {
                Some(("direction", v)) => direction = Some(v.parse::<Direction>().map_err(|_| header_err())?),
                Some(("mean_nn_distance", v)) => mean = Some(v.parse::<f64>().map_err(|_| header_err())?),
                _ => {}
            }
        }
        let (direction, mean_nn_distance) = direction.zip(mean).ok_or_else(header_err)?;
        let mut pairs = Vec::new();
        let mut per_pair_distance = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |message: String| Error::Parse { line: i + 1, message };
            if cols.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
            }
            let d: f64 = cols[2].parse().map_err(|_| bad(format!("`{}` is not a distance", cols[2])))?;
            pairs.push((cols[0].to_owned(), cols[1].to_owned()));
            per_pair_distance.push(d);
        }
        Ok(Self {
            pairs,
            direction,
            mean_nn_distance,
            per_pair_distance,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Nearest stored point for every row of `queries`.
pub fn nearest_rows(tree: &KdTree, queries: &Array2<f64>) -> Result<Vec<(usize, f64)>> {
    if queries.nrows() == 0 {
        return Err(Error::Empty("query set".into()));
    }
    queries
        .rows()
        .into_iter()
        .map(|q| match q.as_slice() {
            Some(s) => tree.nearest(s),
            None => tree.nearest(&q.to_vec()),
        })
        .collect()
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Mean distance from each mapped row to its nearest row of a prebuilt tree.
pub fn mean_nn_distance_in(tree: &KdTree, mapped: &Array2<f64>) -> Result<f64> {
    let hits = nearest_rows(tree, mapped)?;
    Ok(mean(hits.iter().map(|h| h.1)))
}

pub fn mean_nn_distance(mapped: &Array2<f64>, target: &EmbeddingMatrix) -> Result<f64> {
    let tree = KdTree::build(target.vectors())?;
    mean_nn_distance_in(&tree, mapped)
}

/// Maps every source row and pairs it with its nearest target row.
/// The result is labelled [`Direction::OneToTwo`]; callers aligning the other
/// way relabel it.
pub fn align_direction(
    mapper: &MapperParams,
    source: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
) -> Result<AlignmentResult> {
    if source.is_empty() {
        return Err(Error::Empty("source embedding".into()));
    }
    let tree = KdTree::build(target.vectors())?;
    let mapped = mapper.forward_batch(source.vectors())?;
    let hits = nearest_rows(&tree, &mapped)?;
    let pairs = hits
        .iter()
        .enumerate()
        .map(|(i, &(j, _))| (source.label(i).to_owned(), target.label(j).to_owned()))
        .collect();
    let per_pair_distance: Vec<f64> = hits.iter().map(|h| h.1).collect();
    Ok(AlignmentResult {
        pairs,
        direction: Direction::OneToTwo,
        mean_nn_distance: mean(per_pair_distance.iter().copied()),
        per_pair_distance,
    })
}

/// Both directional alignments, `(1 -> 2, 2 -> 1)`.
pub fn align_both(
    g12: &MapperParams,
    g21: &MapperParams,
    x1: &EmbeddingMatrix,
    x2: &EmbeddingMatrix,
) -> Result<(AlignmentResult, AlignmentResult)> {
    let a1 = align_direction(g12, x1, x2)?;
    let mut a2 = align_direction(g21, x2, x1)?;
    a2.direction = Direction::TwoToOne;
    Ok((a1, a2))
}

/// The directional alignment with the strictly smaller mean distance; ties go to 1 -> 2.
pub fn align_bidirectional(
    g12: &MapperParams,
    g21: &MapperParams,
    x1: &EmbeddingMatrix,
    x2: &EmbeddingMatrix,
) -> Result<AlignmentResult> {
    let (a1, a2) = align_both(g12, g21, x1, x2)?;
    Ok(if a2.mean_nn_distance < a1.mean_nn_distance { a2 } else { a1 })
}
