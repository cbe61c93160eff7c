//! Pairwise-angle statistics for weight matrices whose rows are neurons or
//! filters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_matrix, cosine_matrix, min_pairwise_angle, require_pairs, PointSet};

pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    PointSetJson,
}

/// One histogram bin over cosine values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Statistics over the `n(n-1)/2` unordered pairs of distinct rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub n: usize,
    pub d: usize,
    pub min_angle_deg: f64,
    pub mean_abs_cosine: f64,
    /// Pairs whose cosine is strictly above the threshold.
    pub count_above_threshold: usize,
    pub histogram: Vec<HistogramBin>,
}

impl AngleStats {
    pub fn pair_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for b in &self.histogram {
            out.push_str(&format!("{},{},{}\n", b.bin_lo, b.bin_hi, b.count));
        }
        out
    }
}

/// Parses a weight matrix. CSV holds one vector per line; a first line
/// that does not parse as numbers is treated as a header.
pub fn load_weight_matrix(source: &str, format: InputFormat) -> Result<PointSet> {
    let points = match format {
        InputFormat::PointSetJson => serde_json::from_str::<PointSet>(source).map_err(|e| Error::ParseError {
            line: e.line() as u64,
            column: e.column(),
            message: e.to_string(),
        })?,
        InputFormat::Csv => parse_csv(source)?,
    };
    require_pairs(points.n())?;
    Ok(points)
}

fn parse_csv(source: &str) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source.as_bytes());

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::ParseError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(index as u64 + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(c, field)| field.parse::<f64>().map_err(|_| c + 1))
            .collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if index == 0 => continue,
            Err(column) => {
                return Err(Error::ParseError {
                    line,
                    column,
                    message: format!("not a number: {:?}", &record[column - 1]),
                })
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::RaggedRows {
                    line,
                    expected: w,
                    found: values.len(),
                })
            }
            _ => {}
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::TooFewPoints(0));
    }
    PointSet::from_rows(&rows)
}

/// One row per line, comma separated, in the format [`load_weight_matrix`] reads.
pub fn points_to_csv(points: &PointSet) -> String {
    let mut out = String::new();
    for row in points.rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn bin_index(c: f64, bins: usize) -> usize {
    // Values on an interior edge belong to the lower bin.
    let width = 2.0 / bins as f64;
    let k = ((c + 1.0) / width).ceil() as isize - 1;
    k.clamp(0, bins as isize - 1) as usize
}

/// Angle statistics with cosines binned uniformly over `[-1, 1]`.
pub fn angle_stats(points: &PointSet, threshold: f64, bins: usize) -> Result<AngleStats> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let cos = cosine_matrix(points)?;
    let angles = angle_matrix(&cos);
    let n = points.n();

    let width = 2.0 / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            bin_lo: -1.0 + k as f64 * width,
            bin_hi: if k + 1 == bins { 1.0 } else { -1.0 + (k + 1) as f64 * width },
            count: 0,
        })
        .collect();

    let mut abs_sum = 0.0;
    let mut above = 0;
    for i in 0..n {
        for &c in &cos.row(i)[i + 1..] {
            abs_sum += c.abs();
            if c > threshold {
                above += 1;
            }
            histogram[bin_index(c, bins)].count += 1;
        }
    }
    let pairs = n * (n - 1) / 2;

    Ok(AngleStats {
        n,
        d: points.d(),
        min_angle_deg: min_pairwise_angle(&angles)?.to_degrees(),
        mean_abs_cosine: abs_sum / pairs as f64,
        count_above_threshold: above,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_identity() {
        let p = load_weight_matrix("1,0\n0,1\n", InputFormat::Csv).unwrap();
        assert_eq!(p.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn csv_header_is_skipped() {
        let p = load_weight_matrix("w0,w1\n1,0\n0.5,-2e-1\n", InputFormat::Csv).unwrap();
        assert_eq!(p.to_rows(), vec![vec![1.0, 0.0], vec![0.5, -0.2]]);
    }

    #[test]
    fn csv_ragged() {
        assert_eq!(
            load_weight_matrix("1,0\n0,1,2\n", InputFormat::Csv),
            Err(Error::RaggedRows {
                line: 2,
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn csv_bad_number() {
        match load_weight_matrix("1,0\n0,x\n", InputFormat::Csv) {
            Err(Error::ParseError { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_needs_two_rows() {
        assert_eq!(load_weight_matrix("1,0\n", InputFormat::Csv), Err(Error::TooFewPoints(1)));
        assert_eq!(load_weight_matrix("", InputFormat::Csv), Err(Error::TooFewPoints(0)));
    }

    #[test]
    fn json_round_trip() {
        let p = PointSet::from_rows(&[[0.1, -3.25, 7.0], [1e-9, 2.0, 0.333]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(load_weight_matrix(&s, InputFormat::PointSetJson).unwrap(), p);
        assert!(matches!(
            load_weight_matrix("{\"d\":2", InputFormat::PointSetJson),
            Err(Error::ParseError { .. })
        ));
    }

    #[test]
    fn csv_writer_round_trip() {
        let p = PointSet::from_rows(&[[0.1, -2.5e-12], [3.0, 1.0 / 3.0]]).unwrap();
        assert_eq!(load_weight_matrix(&points_to_csv(&p), InputFormat::Csv).unwrap(), p);
    }

    #[test]
    fn orthonormal_stats() {
        let p = PointSet::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let s = angle_stats(&p, 0.2, 40).unwrap();
        assert_eq!(s.min_angle_deg, 90.0);
        assert_eq!(s.count_above_threshold, 0);
        assert_eq!(s.mean_abs_cosine, 0.0);
        // 0 sits on the edge between bins 19 and 20 and goes to the lower one.
        assert_eq!(s.histogram[19].count, 3);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn one_duplicated_pair() {
        // Rows 0 and 1 coincide; everything else is mutually orthogonal.
        let p = PointSet::from_rows(&[
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let s = angle_stats(&p, 0.2, 40).unwrap();
        assert_eq!(s.count_above_threshold, 1);
        assert!(s.min_angle_deg < 0.1);
        assert_eq!(s.histogram[39].count, 1);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 10);
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(-1.0, 4), 0);
        assert_eq!(bin_index(-0.5, 4), 0);
        assert_eq!(bin_index(-0.49, 4), 1);
        assert_eq!(bin_index(0.5, 4), 2);
        assert_eq!(bin_index(1.0, 4), 3);
    }

    #[test]
    fn histogram_csv_layout() {
        let p = PointSet::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let s = angle_stats(&p, 0.2, 2).unwrap();
        assert_eq!(s.histogram_csv(), "bin_lo,bin_hi,count\n-1,0,1\n0,1,0\n");
        assert!(angle_stats(&p, 0.2, 0).is_err());
    }
}
