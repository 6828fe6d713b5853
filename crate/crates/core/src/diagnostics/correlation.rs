//! Column correlations with pairwise deletion, and seeded scatter samples.

use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, DiagError};
use crate::stats::{pearson, spearman};
use crate::store::{Column, ReadingTable};

pub const DEFAULT_SCATTER_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

impl FromStr for CorrelationMethod {
    type Err = DiagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Self::Pearson),
            "spearman" => Ok(Self::Spearman),
            _ => Err(DiagError::BadParameter(format!(
                "unknown correlation method '{s}' (expected pearson or spearman)"
            ))),
        }
    }
}

/// Symmetric matrix over the table's columns. Cells are absent when a pair
/// has fewer than two complete rows or no variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub method: CorrelationMethod,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Rows where both cells are non-null.
    pub pair_counts: Vec<Vec<u64>>,
}

pub fn correlation_matrix(table: &ReadingTable, method: CorrelationMethod) -> CorrelationMatrix {
    let cols = table.columns();
    let k = cols.len();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let results: Vec<(Option<f64>, u64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xs, ys) = complete_pairs(&cols[i], &cols[j]);
            let r = if i == j {
                // diagonal: 1 where the column varies at all
                pearson(&xs, &ys).expect("equal lengths").map(|_| 1.0)
            } else {
                match method {
                    CorrelationMethod::Pearson => pearson(&xs, &ys),
                    CorrelationMethod::Spearman => spearman(&xs, &ys),
                }
                .expect("equal lengths")
            };
            (r, xs.len() as u64)
        })
        .collect();
    let mut values = vec![vec![None; k]; k];
    let mut pair_counts = vec![vec![0; k]; k];
    for (&(i, j), &(r, n)) in pairs.iter().zip(&results) {
        values[i][j] = r;
        values[j][i] = r;
        pair_counts[i][j] = n;
        pair_counts[j][i] = n;
    }
    CorrelationMatrix {
        method,
        columns: cols.iter().map(|c| c.name().to_owned()).collect(),
        values,
        pair_counts,
    }
}

fn complete_pairs(x: &Column, y: &Column) -> (Vec<f64>, Vec<f64>) {
    (0..x.len())
        .filter_map(|r| Some((x.get(r)?, y.get(r)?)))
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSample {
    pub x_column: String,
    pub y_column: String,
    pub max_points: usize,
    pub seed: u64,
    /// Complete pairs available before sampling.
    pub total_pairs: usize,
    pub sampled: bool,
    /// `[x, y]` in row order.
    pub points: Vec<[f64; 2]>,
}

/// Complete `(x, y)` pairs, thinned to `max_points` by uniform sampling
/// without replacement when there are more. Deterministic per seed.
pub fn scatter_sample(
    table: &ReadingTable,
    x_column: &str,
    y_column: &str,
    max_points: usize,
    seed: u64,
) -> Result<ScatterSample, DiagError> {
    let column = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| DiagError::UnknownColumn(name.to_owned()))
    };
    let (x, y) = (column(x_column)?, column(y_column)?);
    let rows: Vec<usize> = (0..x.len())
        .filter(|&r| !x.is_null(r) && !y.is_null(r))
        .collect();
    let total_pairs = rows.len();
    let sampled = total_pairs > max_points;
    let chosen: Vec<usize> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, total_pairs, max_points).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| rows[i]).collect()
    } else {
        rows
    };
    let points = chosen
        .into_iter()
        .map(|r| [x.get(r).unwrap(), y.get(r).unwrap()])
        .collect();
    Ok(ScatterSample {
        x_column: x_column.to_owned(),
        y_column: y_column.to_owned(),
        max_points,
        seed,
        total_pairs,
        sampled,
        points,
    })
}

impl Dataset {
    pub fn correlation(&self, method: CorrelationMethod) -> Arc<CorrelationMatrix> {
        self.correlations
            .get_or_compute(&method, || correlation_matrix(&self.table, method))
    }

    pub fn scatter(
        &self,
        x: &str,
        y: &str,
        max_points: usize,
        seed: u64,
    ) -> Result<ScatterSample, DiagError> {
        scatter_sample(&self.table, x, y, max_points, seed)
    }
}
