//! Losses over the directions of a point set, each with its analytic
//! gradient with respect to the unnormalized rows.
//!
//! Every loss here depends on the rows only through the pairwise inner
//! products `c_ij = u_i . u_j` of the unit vectors `u_i = w_i / |w_i|`. The
//! gradient is therefore assembled pair by pair from the scalar
//! `dL/dc_ij` and the tangential derivative
//!
//! ```text
//! dc_ij / dw_i = (u_j - c_ij u_i) / |w_i|
//! ```
//!
//! which is orthogonal to `w_i` by construction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_cosine, dot, normalize_rows, require_pairs, PointSet};

/// Chordal distances below this are floored in the potential-energy losses.
pub const DISTANCE_FLOOR: f64 = 1e-7;

/// A loss value and its gradient, shaped like the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub gradient: PointSet,
}

/// The losses this crate knows how to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Negative mean of each row's minimum angle.
    Mma,
    /// Mean of each row's maximum cosine.
    Cosine,
    /// Mean inverse-power chordal potential with exponent `s > 0`.
    RieszFisher { s: f64 },
    /// Mean negative log chordal distance.
    Logarithmic,
    /// Half the squared Frobenius distance of the Gram matrix from identity.
    Orthogonal,
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::RieszFisher { s } if !(s > 0.0 && s.is_finite()) => Err(Error::InvalidConfig(
                format!("Riesz-Fisher exponent must be positive, got {s}"),
            )),
            _ => Ok(()),
        }
    }

    /// Short name used in reports and on the command line.
    pub fn short_name(&self) -> &'static str {
        match self {
            LossKind::Mma => "mma",
            LossKind::Cosine => "cosine",
            LossKind::RieszFisher { .. } => "rf",
            LossKind::Logarithmic => "log",
            LossKind::Orthogonal => "orthogonal",
        }
    }

    /// Evaluates the loss with unit coefficient.
    pub fn evaluate(&self, points: &PointSet) -> Result<LossEval> {
        match *self {
            LossKind::Mma => mma_loss_grad(points),
            LossKind::Cosine => cosine_loss_grad(points),
            LossKind::RieszFisher { s } => riesz_fisher_loss_grad(points, s),
            LossKind::Logarithmic => log_loss_grad(points),
            LossKind::Orthogonal => orthogonal_loss_grad(points, 1.0),
        }
    }
}

/// Unit rows plus the original norms, shared by every loss.
struct Directions {
    unit: PointSet,
    norms: Vec<f64>,
}

impl Directions {
    fn new(points: &PointSet) -> Result<Self> {
        require_pairs(points.n())?;
        let norms = points.row_norms();
        let unit = normalize_rows(points)?;
        Ok(Self { unit, norms })
    }

    fn dot(&self, i: usize, j: usize) -> f64 {
        dot(self.unit.row(i), self.unit.row(j))
    }

    /// Adds `coef * dc_ij/dw_i` to row `i` and `coef * dc_ij/dw_j` to row `j`.
    fn push_pair(&self, grad: &mut PointSet, i: usize, j: usize, c: f64, coef: f64) {
        let ui = self.unit.row(i);
        let uj = self.unit.row(j);
        let ki = coef / self.norms[i];
        let kj = coef / self.norms[j];
        for (g, (a, b)) in grad.row_mut(i).iter_mut().zip(ui.iter().zip(uj)) {
            *g += ki * (b - c * a);
        }
        for (g, (a, b)) in grad.row_mut(j).iter_mut().zip(ui.iter().zip(uj)) {
            *g += kj * (a - c * b);
        }
    }

    /// Per-row maximum clamped cosine, the lowest index attaining it, and the
    /// raw inner product of that pair.
    fn nearest_neighbours(&self) -> Vec<(f64, usize, f64)> {
        let n = self.unit.n();
        let mut best = vec![(f64::NEG_INFINITY, usize::MAX, 0.0); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let raw = self.dot(i, j);
                let c = clamp_cosine(raw);
                // j arrives in increasing order for row i, and i in increasing
                // order for row j, so strict comparison keeps the lowest index.
                if c > best[i].0 {
                    best[i] = (c, j, raw);
                }
                if c > best[j].0 {
                    best[j] = (c, i, raw);
                }
            }
        }
        best
    }
}

fn sin_from_cos(c: f64) -> f64 {
    (1.0 - c * c).sqrt()
}

/// `-(1/n) sum_i min_{j != i} theta_ij`.
///
/// Only the selected pair of each row carries gradient, and both of its
/// endpoints receive it.
pub fn mma_loss_grad(points: &PointSet) -> Result<LossEval> {
    let dirs = Directions::new(points)?;
    let n = points.n();
    let inv_n = 1.0 / n as f64;
    let mut grad = PointSet::zeros(n, points.d());
    let mut sum = 0.0;
    for (i, (c, j, raw)) in dirs.nearest_neighbours().into_iter().enumerate() {
        sum += c.acos();
        // d(-theta/n)/dc = 1 / (n sin theta)
        dirs.push_pair(&mut grad, i, j, raw, inv_n / sin_from_cos(c));
    }
    Ok(LossEval {
        value: -sum * inv_n,
        gradient: grad,
    })
}

/// `(1/n) sum_i max_{j != i} cos_ij`.
pub fn cosine_loss_grad(points: &PointSet) -> Result<LossEval> {
    let dirs = Directions::new(points)?;
    let n = points.n();
    let inv_n = 1.0 / n as f64;
    let mut grad = PointSet::zeros(n, points.d());
    let mut sum = 0.0;
    for (i, (c, j, raw)) in dirs.nearest_neighbours().into_iter().enumerate() {
        sum += c;
        dirs.push_pair(&mut grad, i, j, raw, inv_n);
    }
    Ok(LossEval {
        value: sum * inv_n,
        gradient: grad,
    })
}

/// Sums a chordal-distance kernel over all ordered pairs, scaled by
/// `1 / (n (n - 1))`. `kernel` receives the squared distance
/// `q = |u_i - u_j|^2 = 2 - 2 c_ij` and returns the term value and its
/// derivative with respect to `c_ij`.
fn pair_potential(points: &PointSet, kernel: impl Fn(f64) -> (f64, f64)) -> Result<LossEval> {
    let dirs = Directions::new(points)?;
    let n = points.n();
    let d = points.d();
    // Each unordered pair appears twice in the ordered sum.
    let weight = 2.0 / (n as f64 * (n - 1) as f64);
    let floor_sq = DISTANCE_FLOOR * DISTANCE_FLOOR;
    let mut grad = PointSet::zeros(n, d);
    let mut sum = 0.0;
    for i in 0..n {
        let ui = dirs.unit.row(i);
        for j in (i + 1)..n {
            let uj = dirs.unit.row(j);
            let q: f64 = ui.iter().zip(uj).map(|(a, b)| (a - b) * (a - b)).sum();
            if q < floor_sq {
                sum += kernel(floor_sq).0;
                continue;
            }
            let (value, d_c) = kernel(q);
            sum += value;
            dirs.push_pair(&mut grad, i, j, 1.0 - 0.5 * q, weight * d_c);
        }
    }
    Ok(LossEval {
        value: weight * sum,
        gradient: grad,
    })
}

/// `(1/(n(n-1))) sum_{i != j} |u_i - u_j|^-s`.
pub fn riesz_fisher_loss_grad(points: &PointSet, s: f64) -> Result<LossEval> {
    LossKind::RieszFisher { s }.validate()?;
    let half = 0.5 * s;
    if half.fract() == 0.0 && half <= i32::MAX as f64 {
        let k = half as i32;
        pair_potential(points, |q| {
            let v = q.powi(-k);
            (v, s * v / q)
        })
    } else {
        pair_potential(points, |q| {
            let v = q.powf(-half);
            (v, s * v / q)
        })
    }
}

/// `-(1/(n(n-1))) sum_{i != j} log |u_i - u_j|`.
pub fn log_loss_grad(points: &PointSet) -> Result<LossEval> {
    pair_potential(points, |q| (-0.5 * q.ln(), 1.0 / q))
}

/// `(lambda/2) |U U^T - I|_F^2` over the unit rows `U`.
pub fn orthogonal_loss_grad(points: &PointSet, lambda: f64) -> Result<LossEval> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    let dirs = Directions::new(points)?;
    let n = points.n();
    let mut grad = PointSet::zeros(n, points.d());
    let mut sum = 0.0;
    for i in 0..n {
        // The diagonal of U U^T is identically one.
        for j in (i + 1)..n {
            let c = dirs.dot(i, j);
            sum += c * c;
            dirs.push_pair(&mut grad, i, j, c, 2.0 * lambda * c);
        }
    }
    Ok(LossEval {
        value: lambda * sum,
        gradient: grad,
    })
}

/// Weight matrices of a network, one row per neuron, with a shared coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSet {
    pub layers: Vec<PointSet>,
    pub lambda: f64,
}

impl LayerSet {
    pub fn new(layers: Vec<PointSet>, lambda: f64) -> Self {
        Self { layers, lambda }
    }

    /// Indices of layers with a single row.
    pub fn single_row_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, w)| w.n() < 2)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Summed regularizer over a [`LayerSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationEval {
    pub value: f64,
    /// One gradient per layer, shaped like that layer.
    pub gradients: Vec<PointSet>,
    /// Layers that contributed nothing because they have fewer than two rows.
    pub skipped: Vec<usize>,
}

/// `lambda * sum_l loss(W_l)`. For [`LossKind::Orthogonal`] the per-layer
/// term already carries the factor one half.
pub fn regularization(kind: LossKind, layers: &LayerSet) -> Result<RegularizationEval> {
    kind.validate()?;
    let lambda = layers.lambda;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(layers.layers.len());
    let mut skipped = Vec::new();
    for (l, w) in layers.layers.iter().enumerate() {
        if w.n() < 2 {
            log::warn!("layer {l} has a single row and contributes nothing to the regularizer");
            skipped.push(l);
            gradients.push(PointSet::zeros(w.n(), w.d()));
            continue;
        }
        let eval = kind.evaluate(w).map_err(|e| match e {
            Error::ZeroNormRow(row) => Error::ZeroNormLayerRow { layer: l, row },
            other => other,
        })?;
        value += lambda * eval.value;
        let mut g = eval.gradient;
        g.as_mut_slice().iter_mut().for_each(|x| *x *= lambda);
        gradients.push(g);
    }
    Ok(RegularizationEval {
        value,
        gradients,
        skipped,
    })
}

/// `lambda * sum_l l_MMA(W_l)`.
pub fn mma_regularization(layers: &LayerSet) -> Result<RegularizationEval> {
    regularization(LossKind::Mma, layers)
}

/// Closed-form norm of one pair term's gradient with respect to `w_i` when
/// the pair subtends angle `theta` and `|w_i| = w_norm`.
pub fn pair_gradient_norm(kind: LossKind, theta: f64, w_norm: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::DomainError(format!("angle {theta} rad is outside (0, pi)")));
    }
    if !(w_norm > 0.0) {
        return Err(Error::DomainError(format!("weight norm must be positive, got {w_norm}")));
    }
    kind.validate()?;
    let half = theta / 2.0;
    let chord = 2.0 * half.sin();
    let norm = match kind {
        LossKind::Cosine => theta.sin() / w_norm,
        LossKind::Mma => 1.0 / w_norm,
        LossKind::RieszFisher { s } => s / w_norm * half.cos() / chord.powf(s + 1.0),
        LossKind::Logarithmic => half.cos() / (w_norm * chord),
        LossKind::Orthogonal => {
            return Err(Error::DomainError(
                "no per-pair gradient-norm curve for the orthogonal loss".into(),
            ))
        }
    };
    Ok(norm)
}

/// Gradient-norm curve over a list of angles.
pub fn gradient_norm_curve(kind: LossKind, theta_samples: &[f64], w_norm: f64) -> Result<Vec<(f64, f64)>> {
    theta_samples
        .iter()
        .map(|&t| pair_gradient_norm(kind, t, w_norm).map(|g| (t, g)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point_set_min_angle;

    fn pts(rows: &[&[f64]]) -> PointSet {
        PointSet::from_rows(rows).unwrap()
    }

    fn tetrahedron() -> PointSet {
        pts(&[
            &[1.0, 1.0, 1.0],
            &[1.0, -1.0, -1.0],
            &[-1.0, 1.0, -1.0],
            &[-1.0, -1.0, 1.0],
        ])
    }

    #[test]
    fn mma_values() {
        let orth = pts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((mma_loss_grad(&orth).unwrap().value + PI / 2.0).abs() < 1e-12);
        let tet = mma_loss_grad(&tetrahedron()).unwrap();
        assert!((tet.value + (-1.0f64 / 3.0).acos()).abs() < 1e-12);
    }

    #[test]
    fn cosine_values() {
        let same = pts(&[&[0.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(cosine_loss_grad(&same).unwrap().value, 1.0 - 1e-7);
        let orth = pts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cosine_loss_grad(&orth).unwrap().value, 0.0);
    }

    #[test]
    fn riesz_fisher_values() {
        let anti = pts(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert!((riesz_fisher_loss_grad(&anti, 1.0).unwrap().value - 0.5).abs() < 1e-15);
        let orth = pts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((riesz_fisher_loss_grad(&orth, 2.0).unwrap().value - 0.5).abs() < 1e-15);
        assert!(matches!(
            riesz_fisher_loss_grad(&orth, 0.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn log_values() {
        let anti = pts(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        assert!((log_loss_grad(&anti).unwrap().value + 2f64.ln()).abs() < 1e-15);
        let orth = pts(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!((log_loss_grad(&orth).unwrap().value + 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_hit_the_floor() {
        let same = pts(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let rf = riesz_fisher_loss_grad(&same, 2.0).unwrap();
        assert!((rf.value - 1e14).abs() / 1e14 < 1e-9);
        assert!(rf.gradient.as_slice().iter().all(|g| *g == 0.0));
        let lg = log_loss_grad(&same).unwrap();
        assert!((lg.value + 1e-7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_values() {
        let eye = pts(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let e = orthogonal_loss_grad(&eye, 0.3).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.gradient.as_slice().iter().all(|g| g.abs() < 1e-15));

        let same = pts(&[&[0.6, 0.8], &[0.6, 0.8]]);
        assert!((orthogonal_loss_grad(&same, 1.0).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn losses_reject_single_point() {
        let one = pts(&[&[1.0, 0.0]]);
        for kind in [
            LossKind::Mma,
            LossKind::Cosine,
            LossKind::RieszFisher { s: 1.0 },
            LossKind::Logarithmic,
            LossKind::Orthogonal,
        ] {
            assert_eq!(kind.evaluate(&one), Err(Error::TooFewPoints(1)));
        }
    }

    #[test]
    fn antipodal_mma_gradient_is_tangential() {
        let anti = pts(&[&[2.0, 0.0], &[-1.0, 0.0]]);
        let g = mma_loss_grad(&anti).unwrap().gradient;
        assert!(g.as_slice().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn regularization_examples() {
        let tet = tetrahedron();
        let single = mma_regularization(&LayerSet::new(vec![tet.clone()], 1.0)).unwrap();
        assert!((single.value + (-1.0f64 / 3.0).acos()).abs() < 1e-12);

        let off = mma_regularization(&LayerSet::new(vec![tet.clone(), pts(&[&[1.0, 0.0], &[0.3, 0.2]])], 0.0))
            .unwrap();
        assert_eq!(off.value, 0.0);
        assert!(off.gradients.iter().all(|g| g.as_slice().iter().all(|x| *x == 0.0)));

        let w = pts(&[&[1.0, 0.2, 0.0], &[0.1, 1.0, 0.3], &[0.0, -0.5, 1.0]]);
        let l_mma = mma_loss_grad(&w).unwrap().value;
        let twice = mma_regularization(&LayerSet::new(vec![w.clone(), w], 0.07)).unwrap();
        assert!((twice.value - 2.0 * 0.07 * l_mma).abs() < 1e-14);
    }

    #[test]
    fn single_row_layer_is_skipped() {
        let layers = LayerSet::new(vec![pts(&[&[1.0, 0.0]]), tetrahedron()], 1.0);
        assert_eq!(layers.single_row_layers(), vec![0]);
        let r = mma_regularization(&layers).unwrap();
        assert_eq!(r.skipped, vec![0]);
        assert_eq!(r.gradients[0].n(), 1);
        assert!((r.value + (-1.0f64 / 3.0).acos()).abs() < 1e-12);
    }

    #[test]
    fn zero_row_reports_its_layer() {
        let layers = LayerSet::new(vec![tetrahedron(), pts(&[&[1.0, 0.0], &[0.0, 0.0]])], 1.0);
        assert_eq!(
            mma_regularization(&layers),
            Err(Error::ZeroNormLayerRow { layer: 1, row: 1 })
        );
    }

    #[test]
    fn curve_points() {
        let half_pi = PI / 2.0;
        assert!((pair_gradient_norm(LossKind::Mma, half_pi, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((pair_gradient_norm(LossKind::Cosine, half_pi, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(pair_gradient_norm(LossKind::Cosine, 1e-6, 1.0).unwrap() < 1e-5);
        // cos(pi/4) / (2 sin(pi/4))^2, evaluated by hand: (sqrt(2)/2) / 2
        let rf = pair_gradient_norm(LossKind::RieszFisher { s: 1.0 }, half_pi, 1.0).unwrap();
        assert!((rf - 0.353_553_390_593_273_8).abs() < 1e-12);
        // cos(pi/4) / (2 sin(pi/4)) = (sqrt(2)/2) / sqrt(2)
        let lg = pair_gradient_norm(LossKind::Logarithmic, half_pi, 1.0).unwrap();
        assert!((lg - 0.5).abs() < 1e-15);
        assert!((pair_gradient_norm(LossKind::Mma, 1.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn curve_domain() {
        for bad in [0.0, PI, -0.1, 4.0, f64::NAN] {
            assert!(matches!(
                gradient_norm_curve(LossKind::Mma, &[1.0, bad], 1.0),
                Err(Error::DomainError(_))
            ));
        }
        assert!(pair_gradient_norm(LossKind::Mma, 1.0, 0.0).is_err());
        assert!(pair_gradient_norm(LossKind::Orthogonal, 1.0, 1.0).is_err());
    }

    #[test]
    fn one_mma_step_does_not_shrink_min_angle() {
        let mut p = pts(&[
            &[1.0, 0.1, 0.0],
            &[0.9, 0.3, 0.2],
            &[-0.2, 1.0, 0.1],
            &[0.1, -0.3, 1.0],
            &[-1.0, -0.4, -0.2],
        ]);
        let before = point_set_min_angle(&p).unwrap();
        let g = mma_loss_grad(&p).unwrap().gradient;
        for (w, gi) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *w -= 1e-4 * gi;
        }
        assert!(point_set_min_angle(&p).unwrap() >= before);
    }
}
