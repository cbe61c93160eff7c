//! The regular simplex: `n` unit vectors whose pairwise cosines all equal
//! `-1/(n-1)`. It is the exact optimum whenever `d >= n - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, normalize_rows, PointSet};
use crate::rng::{seeded, standard_normal};

/// Residuals of a point set against the regular-simplex Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexReport {
    /// `max_{i<j} |cos_ij + 1/(n-1)|`.
    pub max_cosine_deviation: f64,
    /// Norm of the sum of the normalized rows.
    pub sum_norm: f64,
    /// `max_x |C x - n/(n-1) x|` over random unit `x` orthogonal to the
    /// all-ones vector.
    pub rank_check_residual: f64,
}

/// Builds the regular simplex with `n` vertices in `R^d`.
///
/// The vertices are `e_i - (1/n) 1` in `R^n`, normalized and written in an
/// orthonormal basis of the zero-sum hyperplane obtained by Gram-Schmidt on
/// `e_k - e_n`. Coordinates past `n - 1` are zero.
pub fn regular_simplex(n: usize, d: usize) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if d + 1 < n {
        return Err(Error::DimensionTooSmall { n, d });
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v[n - 1] = -1.0;
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let r = norm(&v);
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }

    let inv_n = 1.0 / n as f64;
    let mut out = PointSet::zeros(n, d);
    for i in 0..n {
        let mut vertex = vec![-inv_n; n];
        vertex[i] += 1.0;
        let r = norm(&vertex);
        vertex.iter_mut().for_each(|x| *x /= r);
        let row = out.row_mut(i);
        for (k, b) in basis.iter().enumerate() {
            row[k] = dot(&vertex, b);
        }
    }
    Ok(out)
}

const PROBE_VECTORS: usize = 5;
const PROBE_SEED: u64 = 0x5eed_51e7;

/// Measures how far a point set is from a regular simplex.
pub fn verify_simplex(points: &PointSet) -> SimplexReport {
    let n = points.n();
    let unit = match normalize_rows(points) {
        Ok(u) => u,
        Err(_) => {
            return SimplexReport {
                max_cosine_deviation: f64::INFINITY,
                sum_norm: f64::INFINITY,
                rank_check_residual: f64::INFINITY,
            }
        }
    };

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let c = dot(unit.row(i), unit.row(j));
            gram[i * n + j] = c;
            gram[j * n + i] = c;
        }
    }

    let mut sum = vec![0.0; points.d()];
    for row in unit.rows() {
        sum.iter_mut().zip(row).for_each(|(s, x)| *s += x);
    }
    let sum_norm = norm(&sum);

    if n < 2 {
        return SimplexReport {
            max_cosine_deviation: 0.0,
            sum_norm,
            rank_check_residual: 0.0,
        };
    }

    let target = -1.0 / (n - 1) as f64;
    let mut max_cosine_deviation: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_cosine_deviation = max_cosine_deviation.max((gram[i * n + j] - target).abs());
        }
    }

    let eigenvalue = n as f64 / (n - 1) as f64;
    let mut rng = seeded(PROBE_SEED);
    let mut rank_check_residual: f64 = 0.0;
    for _ in 0..PROBE_VECTORS {
        let mut x: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let r = norm(&x);
        if r == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= r);
        let residual = (0..n)
            .map(|i| {
                let cx = dot(&gram[i * n..(i + 1) * n], &x);
                (cx - eigenvalue * x[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        rank_check_residual = rank_check_residual.max(residual);
    }

    SimplexReport {
        max_cosine_deviation,
        sum_norm,
        rank_check_residual,
    }
}
