#![allow(dead_code)]

use tammes::demo::{make_dataset, objective_grad, Dataset, Mlp, Regularizer};
use tammes::losses::{
    cosine_loss_grad, pair_gradient_norm, log_loss_grad, mma_loss_grad, orthogonal_loss_grad, riesz_fisher_loss_grad,
};
use tammes::rng::{seeded, uniform};
use tammes::{init_points, DemoConfig, LossEval, LossKind, PointSet};

/// Central differences of `f` at `x` for the listed coordinates.
pub fn central_diff<F>(f: F, x: &[f64], coords: &[usize], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    coords
        .iter()
        .map(|&k| {
            probe[k] = x[k] + h;
            let plus = f(&probe);
            probe[k] = x[k] - h;
            let minus = f(&probe);
            probe[k] = x[k];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Smallest gap, over rows, between the closest and second-closest angle.
/// Selection-based losses have a kink wherever this is zero.
pub fn selection_margin(points: &PointSet) -> f64 {
    let n = points.n();
    let norms = points.row_norms();
    let mut margin = f64::INFINITY;
    for i in 0..n {
        let mut angles: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let c: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| a * b).sum();
                (c / (norms[i] * norms[j])).clamp(-1.0, 1.0).acos()
            })
            .collect();
        angles.sort_by(f64::total_cmp);
        if angles.len() >= 2 {
            margin = margin.min(angles[1] - angles[0]);
        }
    }
    margin
}

pub fn with_data(points: &PointSet, data: &[f64]) -> PointSet {
    PointSet::new(points.n(), points.d(), data.to_vec()).unwrap()
}

const STEP: f64 = 1e-6;
const KINK_MARGIN: f64 = 1e-3;

/// Gaussian rows rescaled by factors in `[0.5, 2)`.
pub fn random_instance(n: usize, d: usize, seed: u64) -> PointSet {
    let mut p = init_points(n, d, seed);
    let mut rng = seeded(seed.wrapping_mul(31).wrapping_add(7));
    for i in 0..n {
        let scale = 0.5 + 1.5 * uniform(&mut rng);
        p.row_mut(i).iter_mut().for_each(|x| *x *= scale);
    }
    p
}

pub fn eval(kind: LossKind, p: &PointSet) -> LossEval {
    match kind {
        LossKind::Mma => mma_loss_grad(p),
        LossKind::Cosine => cosine_loss_grad(p),
        LossKind::RieszFisher { s } => riesz_fisher_loss_grad(p, s),
        LossKind::Logarithmic => log_loss_grad(p),
        LossKind::Orthogonal => orthogonal_loss_grad(p, 0.5),
    }
    .unwrap()
}

fn selection_based(kind: LossKind) -> bool {
    matches!(kind, LossKind::Mma | LossKind::Cosine)
}

/// Runs the finite-difference comparison on `count` accepted instances and
/// returns the worst relative error seen.
pub fn worst_fd_error(kind: LossKind, count: usize) -> f64 {
    let shapes = [(2, 2), (3, 3), (5, 3), (8, 4), (12, 3), (20, 5), (30, 8), (6, 10)];
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut seed = 1000;
    while accepted < count {
        let (n, d) = shapes[accepted % shapes.len()];
        seed += 1;
        let p = random_instance(n, d, seed);
        if selection_based(kind) && selection_margin(&p) < KINK_MARGIN {
            continue;
        }
        let analytic = eval(kind, &p).gradient;
        let coords: Vec<usize> = (0..n * d).collect();
        let numeric = central_diff(|x| eval(kind, &with_data(&p, x)).value, p.as_slice(), &coords, STEP);
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
        accepted += 1;
    }
    worst
}

pub fn arms() -> [Regularizer; 5] {
    [
        Regularizer::None,
        Regularizer::Mma,
        Regularizer::Orthogonal,
        Regularizer::RieszFisher { s: 2.0 },
        Regularizer::Logarithmic,
    ]
}

/// Smallest |pre-activation| of the hidden layer over the batch.
fn relu_margin(net: &Mlp, data: &Dataset, indices: &[usize]) -> f64 {
    let hidden = &net.layers[0];
    indices
        .iter()
        .flat_map(|&i| {
            let x = data.inputs[i];
            hidden
                .weights
                .rows()
                .zip(&hidden.bias)
                .map(move |(w, b)| (b + w[0] * x[0] + w[1] * x[1]).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// A 2-4-3 net on 8 samples, away from ReLU and min-selection kinks.
fn micro_problem() -> (Mlp, Dataset, Vec<usize>) {
    let (data, _) = make_dataset(11);
    let indices: Vec<usize> = (0..8).collect();
    for seed in 0.. {
        let net = Mlp::new(&[2, 4, 3], seed);
        if relu_margin(&net, &data, &indices) > 1e-3
            && net.layers.iter().all(|l| selection_margin(&l.weights) > 1e-3)
        {
            return (net, data, indices);
        }
    }
    unreachable!()
}

pub fn micro_gradient_error(reg: Regularizer) -> f64 {
    let (net, data, indices) = micro_problem();
    let mut config = DemoConfig::new(reg, 0);
    config.hidden = vec![4];
    if reg != Regularizer::None {
        config.lambda = 0.1;
    }
    let (_, _, grads) = objective_grad(&net, &config, &data, &indices).unwrap();
    let x = net.flat_params();
    let coords: Vec<usize> = (0..x.len()).collect();
    let numeric = central_diff(
        |p| {
            let mut probe = net.clone();
            probe.set_flat_params(p);
            let (task, reg, _) = objective_grad(&probe, &config, &data, &indices).unwrap();
            task + reg
        },
        &x,
        &coords,
        1e-6,
    );
    relative_error(&grads.flatten(), &numeric)
}

/// Worst relative gap between two-point gradient row norms and the closed
/// forms, over 30, 60, 90 and 150 degrees and unequal norms.
pub fn two_point_norm_error() -> f64 {
    let kinds = [
        LossKind::Mma,
        LossKind::Cosine,
        LossKind::RieszFisher { s: 1.0 },
        LossKind::RieszFisher { s: 2.0 },
        LossKind::Logarithmic,
    ];
    let mut worst: f64 = 0.0;
    for deg in [30.0f64, 60.0, 90.0, 150.0] {
        let theta = deg.to_radians();
        for (r0, r1) in [(1.0, 1.0), (1.7, 0.6)] {
            let p = PointSet::from_rows(&[[r0, 0.0, 0.0], [r1 * theta.cos(), r1 * theta.sin(), 0.0]]).unwrap();
            for kind in kinds {
                let g = eval(kind, &p).gradient;
                for (i, r) in [(0, r0), (1, r1)] {
                    let expected = pair_gradient_norm(kind, theta, r).unwrap();
                    let got = g.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                    worst = worst.max(((got - expected) / expected).abs());
                }
            }
        }
    }
    worst
}
