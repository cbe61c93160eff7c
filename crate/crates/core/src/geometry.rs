//! Point sets and the pairwise cosine / angle matrices built from them.
//!
//! Angles are radians everywhere in this module. Conversion to degrees
//! happens only where results are reported.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Off-diagonal cosines are clamped into `[-1 + COS_CLAMP, 1 - COS_CLAMP]`.
pub const COS_CLAMP: f64 = 1e-7;

/// Rows with a Euclidean norm at or below this are rejected by normalization.
pub const MIN_ROW_NORM: f64 = 1e-30;

/// `n` vectors in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Shape(format!("n and d must be positive (n={n}, d={d})")));
        }
        if data.len() != n * d {
            return Err(Error::Shape(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                data.len()
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    /// Builds a point set from nested rows; all rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(norm).collect()
    }

    /// Copy with every row padded by zeros up to dimension `d`.
    pub fn zero_padded(&self, d: usize) -> Result<Self> {
        if d < self.d {
            return Err(Error::Shape(format!("cannot pad dimension {} down to {d}", self.d)));
        }
        let mut out = Self::zeros(self.n, d);
        for i in 0..self.n {
            out.row_mut(i)[..self.d].copy_from_slice(self.row(i));
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct PointSetJson {
    d: usize,
    n: usize,
    points: Vec<Vec<f64>>,
}

impl Serialize for PointSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PointSetJson {
            d: self.d,
            n: self.n,
            points: self.to_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PointSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = PointSetJson::deserialize(deserializer)?;
        if raw.points.len() != raw.n {
            return Err(D::Error::custom(format!(
                "\"n\" is {} but {} points were given",
                raw.n,
                raw.points.len()
            )));
        }
        if let Some((i, row)) = raw.points.iter().enumerate().find(|(_, r)| r.len() != raw.d) {
            return Err(D::Error::custom(format!(
                "point {i} has {} coordinates, \"d\" is {}",
                row.len(),
                raw.d
            )));
        }
        PointSet::from_rows(&raw.points).map_err(D::Error::custom)
    }
}

/// Symmetric matrix of pairwise cosines with a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CosineMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Symmetric matrix of pairwise angles in radians with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix {
    n: usize,
    values: Vec<f64>,
}

impl AngleMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Clamps an off-diagonal cosine away from +-1.
pub fn clamp_cosine(c: f64) -> f64 {
    c.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP)
}

/// Scales every row to unit Euclidean norm.
pub fn normalize_rows(points: &PointSet) -> Result<PointSet> {
    let mut out = points.clone();
    for i in 0..out.n {
        let row = out.row_mut(i);
        let r = norm(row);
        if !(r > MIN_ROW_NORM) {
            return Err(Error::ZeroNormRow(i));
        }
        row.iter_mut().for_each(|x| *x /= r);
    }
    Ok(out)
}

pub(crate) fn require_pairs(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::TooFewPoints(n))
    } else {
        Ok(())
    }
}

/// Cosines of the normalized rows. Each entry is computed once for `i < j`
/// and mirrored.
pub fn cosine_matrix(points: &PointSet) -> Result<CosineMatrix> {
    require_pairs(points.n())?;
    let unit = normalize_rows(points)?;
    let n = unit.n();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let c = clamp_cosine(dot(unit.row(i), unit.row(j)));
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    Ok(CosineMatrix { n, values })
}

/// Elementwise arccos of a cosine matrix, diagonal forced to zero.
pub fn angle_matrix(cosines: &CosineMatrix) -> AngleMatrix {
    let n = cosines.n;
    let mut values: Vec<f64> = cosines.values.iter().map(|c| c.acos()).collect();
    for i in 0..n {
        values[i * n + i] = 0.0;
    }
    AngleMatrix { n, values }
}

/// Per-row minimum off-diagonal angle and the lowest index attaining it.
pub fn row_min_angles(angles: &AngleMatrix) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = angles.n;
    require_pairs(n)?;
    let mut mins = Vec::with_capacity(n);
    let mut argmins = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for (j, &a) in angles.row(i).iter().enumerate() {
            if j != i && a < best {
                best = a;
                best_j = j;
            }
        }
        mins.push(best);
        argmins.push(best_j);
    }
    Ok((mins, argmins))
}

/// Smallest pairwise angle in radians.
pub fn min_pairwise_angle(angles: &AngleMatrix) -> Result<f64> {
    let (mins, _) = row_min_angles(angles)?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Shorthand for `min_pairwise_angle(angle_matrix(cosine_matrix(points)))`.
pub fn point_set_min_angle(points: &PointSet) -> Result<f64> {
    min_pairwise_angle(&angle_matrix(&cosine_matrix(points)?))
}
