//! Minimum-angle benchmark over the classic `(d, n)` grid for all four
//! Tammes losses, compared against the best known spherical codes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::optimizer::{solve, OptimizerConfig};
use crate::rng::mix64;

/// Best known minimum angles in degrees, as `(d, n, optimal)`.
pub const OPTIMA: [(usize, usize, f64); 10] = [
    (3, 4, 109.5),
    (3, 30, 38.6),
    (3, 130, 18.5),
    (4, 5, 104.5),
    (4, 30, 54.3),
    (4, 130, 33.4),
    (4, 600, 19.8),
    (5, 6, 101.5),
    (5, 30, 65.6),
    (5, 130, 43.8),
];

/// Rows with more points than this only run when explicitly enabled.
pub const LARGE_ROW_POINTS: usize = 600;

pub fn optimal_deg(d: usize, n: usize) -> Option<f64> {
    OPTIMA.iter().find(|r| r.0 == d && r.1 == n).map(|r| r.2)
}

/// The losses compared by the benchmark, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchLoss {
    Mma,
    Cosine,
    Rf,
    Log,
}

impl BenchLoss {
    pub const ALL: [BenchLoss; 4] = [BenchLoss::Mma, BenchLoss::Cosine, BenchLoss::Rf, BenchLoss::Log];

    /// Riesz-Fisher runs with `s = 2`.
    pub fn kind(self) -> LossKind {
        match self {
            BenchLoss::Mma => LossKind::Mma,
            BenchLoss::Cosine => LossKind::Cosine,
            BenchLoss::Rf => LossKind::RieszFisher { s: 2.0 },
            BenchLoss::Log => LossKind::Logarithmic,
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        self.kind().short_name()
    }
}

/// Outcome of one (row, loss) cell across all replicas.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BenchCell {
    Done {
        best_min_angle_deg: f64,
        per_seed_deg: Vec<f64>,
        seeds: Vec<u64>,
    },
    Failed {
        error: String,
    },
}

impl BenchCell {
    pub fn best(&self) -> Option<f64> {
        match self {
            BenchCell::Done {
                best_min_angle_deg, ..
            } => Some(*best_min_angle_deg),
            BenchCell::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub d: usize,
    pub n: usize,
    pub optimal_deg: Option<f64>,
    pub results: BTreeMap<BenchLoss, BenchCell>,
}

impl BenchRow {
    pub fn best(&self, loss: BenchLoss) -> Option<f64> {
        self.results.get(&loss).and_then(BenchCell::best)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowSelector {
    All,
    Pairs(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seeds: usize,
    pub base_seed: u64,
    pub rows: RowSelector,
    pub include_large: bool,
    pub iterations: Option<usize>,
    pub losses: Vec<BenchLoss>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: 3,
            base_seed: 0,
            rows: RowSelector::All,
            include_large: false,
            iterations: None,
            losses: BenchLoss::ALL.to_vec(),
        }
    }
}

/// Seed of one replica:
/// `base ^ mix64((d << 48) ^ (n << 16) ^ (loss_index << 8) ^ replica)`,
/// with `mix64` the SplitMix64 finalizer. Any cell can be rerun alone.
pub fn replica_seed(base: u64, d: usize, n: usize, loss: BenchLoss, replica: usize) -> u64 {
    let key = ((d as u64) << 48) ^ ((n as u64) << 16) ^ (loss.index() << 8) ^ replica as u64;
    base ^ mix64(key)
}

fn selected_rows(config: &BenchConfig) -> Result<Vec<(usize, usize)>> {
    let mut rows: Vec<(usize, usize)> = match &config.rows {
        RowSelector::All => OPTIMA
            .iter()
            .filter(|r| config.include_large || r.1 < LARGE_ROW_POINTS)
            .map(|r| (r.0, r.1))
            .collect(),
        RowSelector::Pairs(pairs) => {
            for &(d, n) in pairs {
                if d == 0 || n < 2 {
                    return Err(Error::InvalidConfig(format!("invalid row d={d}, n={n}")));
                }
                if n >= LARGE_ROW_POINTS && !config.include_large {
                    return Err(Error::InvalidConfig(format!(
                        "row d={d}, n={n} needs the large-row flag"
                    )));
                }
            }
            pairs.clone()
        }
    };
    rows.sort_unstable();
    rows.dedup();
    Ok(rows)
}

/// Runs every selected row for every configured loss, `seeds` replicas each.
///
/// Replicas run in parallel; a failing replica marks its cell as failed
/// without stopping the others.
pub fn run_table1(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let rows = selected_rows(config)?;

    let jobs: Vec<(usize, usize, BenchLoss, usize)> = rows
        .iter()
        .flat_map(|&(d, n)| {
            config
                .losses
                .iter()
                .flat_map(move |&loss| (0..config.seeds).map(move |r| (d, n, loss, r)))
        })
        .collect();

    let outcomes: Vec<(u64, Result<f64>)> = jobs
        .par_iter()
        .map(|&(d, n, loss, r)| {
            let seed = replica_seed(config.base_seed, d, n, loss, r);
            let mut opt = OptimizerConfig::new(loss.kind(), n, d, seed);
            if let Some(it) = config.iterations {
                opt.iterations = it;
            }
            (seed, solve(&opt).map(|s| s.final_min_angle.to_degrees()))
        })
        .collect();

    let mut out: Vec<BenchRow> = rows
        .iter()
        .map(|&(d, n)| BenchRow {
            d,
            n,
            optimal_deg: optimal_deg(d, n),
            results: BTreeMap::new(),
        })
        .collect();

    let per_cell = config.seeds;
    for (cell, chunk) in jobs.chunks(per_cell).zip(outcomes.chunks(per_cell)) {
        let (d, n, loss, _) = cell[0];
        let mut per_seed_deg = Vec::with_capacity(per_cell);
        let mut seeds = Vec::with_capacity(per_cell);
        let mut failure = None;
        for (seed, outcome) in chunk {
            match outcome {
                Ok(deg) => {
                    per_seed_deg.push(*deg);
                    seeds.push(*seed);
                }
                Err(e) => {
                    failure.get_or_insert_with(|| format!("seed {seed}: {e}"));
                }
            }
        }
        let result = match failure {
            Some(error) => BenchCell::Failed { error },
            None => BenchCell::Done {
                best_min_angle_deg: per_seed_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                per_seed_deg,
                seeds,
            },
        };
        let row = out.iter_mut().find(|r| r.d == d && r.n == n).expect("row exists");
        row.results.insert(loss, result);
    }
    Ok(out)
}

pub fn has_failures(rows: &[BenchRow]) -> bool {
    rows.iter()
        .flat_map(|r| r.results.values())
        .any(|c| matches!(c, BenchCell::Failed { .. }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn cell_text(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "NA".to_string())
}

/// Renders best-of-seeds angles, one line per row ordered by `(d, n)`.
pub fn compare_report(rows: &[BenchRow], format: ReportFormat) -> String {
    let mut sorted: Vec<&BenchRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.d, r.n));

    let header = ["d", "n", "optimal", "mma", "cosine", "rf", "log"];
    let table: Vec<Vec<String>> = sorted
        .iter()
        .map(|r| {
            let mut line = vec![r.d.to_string(), r.n.to_string(), cell_text(r.optimal_deg)];
            line.extend(BenchLoss::ALL.iter().map(|&l| cell_text(r.best(l))));
            line
        })
        .collect();

    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for line in &table {
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| {
                    table
                        .iter()
                        .map(|l| l[c].len())
                        .chain(std::iter::once(header[c].len()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let render = |cells: &mut dyn Iterator<Item = &str>| {
                let mut s = String::from("|");
                for (cell, w) in cells.zip(&widths) {
                    let _ = write!(s, " {cell:>w$} |");
                }
                s.push('\n');
                s
            };
            out.push_str(&render(&mut header.iter().copied()));
            out.push('|');
            for w in &widths {
                out.push_str(&"-".repeat(w + 1));
                out.push_str(":|");
            }
            out.push('\n');
            for line in &table {
                out.push_str(&render(&mut line.iter().map(String::as_str)));
            }
        }
    }
    out
}
