//! Full-batch heavy-ball gradient descent with plateau learning-rate decay.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{point_set_min_angle, PointSet};
use crate::losses::LossKind;
use crate::rng::{seeded, standard_normal};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub loss: LossKind,
    pub n: usize,
    pub d: usize,
    pub iterations: usize,
    pub lr0: f64,
    pub momentum: f64,
    /// Iterations without sufficient improvement before the rate decays.
    pub plateau_patience: usize,
    /// Multiplier applied on each decay.
    pub plateau_factor: f64,
    /// Minimum absolute improvement of the best loss that resets patience.
    pub plateau_threshold: f64,
    pub lr_floor: f64,
    pub seed: u64,
    /// Loss is recorded every this many iterations (and on the last one).
    pub trace_every: usize,
}

impl OptimizerConfig {
    pub fn new(loss: LossKind, n: usize, d: usize, seed: u64) -> Self {
        Self {
            loss,
            n,
            d,
            iterations: 10_000,
            lr0: 0.1,
            momentum: 0.9,
            plateau_patience: 1000,
            plateau_factor: 0.2,
            plateau_threshold: 1e-6,
            lr_floor: 1e-5,
            seed,
            trace_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.loss.validate()?;
        if self.n < 2 {
            return Err(Error::TooFewPoints(self.n));
        }
        if self.d < 1 {
            return bad("dimension must be positive".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.plateau_patience == 0 {
            return bad("plateau patience must be positive".into());
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad(format!("plateau factor must lie in (0, 1), got {}", self.plateau_factor));
        }
        if !(self.plateau_threshold >= 0.0) {
            return bad(format!("plateau threshold must be nonnegative, got {}", self.plateau_threshold));
        }
        if !(self.lr_floor > 0.0) {
            return bad(format!("learning-rate floor must be positive, got {}", self.lr_floor));
        }
        if self.trace_every == 0 {
            return bad("trace interval must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub final_points: PointSet,
    /// Radians.
    pub final_min_angle: f64,
    pub loss_trace: Vec<(usize, f64)>,
    pub lr_trace: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Serialize for SolveResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(7))?;
        map.serialize_entry("d", &self.final_points.d())?;
        map.serialize_entry("n", &self.final_points.n())?;
        map.serialize_entry("points", &self.final_points.to_rows())?;
        map.serialize_entry("min_angle_deg", &self.final_min_angle.to_degrees())?;
        map.serialize_entry("loss_trace", &self.loss_trace)?;
        map.serialize_entry("lr_trace", &self.lr_trace)?;
        map.serialize_entry("seed", &self.seed)?;
        map.end()
    }
}

/// `n x d` i.i.d. standard normal entries, row by row from one seeded stream.
pub fn init_points(n: usize, d: usize, seed: u64) -> PointSet {
    let mut rng = seeded(seed);
    let data = (0..n * d).map(|_| standard_normal(&mut rng)).collect();
    PointSet::new(n, d, data).expect("n and d are positive")
}

/// Weights, velocity and the hyperparameters of one heavy-ball step.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub points: PointSet,
    pub velocity: PointSet,
    pub lr: f64,
    pub momentum: f64,
}

impl SgdState {
    pub fn new(points: PointSet, lr: f64, momentum: f64) -> Self {
        let velocity = PointSet::zeros(points.n(), points.d());
        Self {
            points,
            velocity,
            lr,
            momentum,
        }
    }
}

/// `v <- momentum v - lr g; w <- w + v`.
pub fn sgd_step(mut state: SgdState, gradient: &PointSet) -> SgdState {
    let (lr, mu) = (state.lr, state.momentum);
    for ((w, v), g) in state
        .points
        .as_mut_slice()
        .iter_mut()
        .zip(state.velocity.as_mut_slice())
        .zip(gradient.as_slice())
    {
        *v = mu * *v - lr * g;
        *w += *v;
    }
    state
}

/// Runs the configured number of iterations from [`init_points`].
pub fn solve(config: &OptimizerConfig) -> Result<SolveResult> {
    config.validate()?;
    let start = init_points(config.n, config.d, config.seed);
    solve_from(config, start)
}

/// Like [`solve`] but from caller-supplied starting points.
pub fn solve_from(config: &OptimizerConfig, start: PointSet) -> Result<SolveResult> {
    config.validate()?;
    if start.n() != config.n || start.d() != config.d {
        return Err(Error::Shape(format!(
            "start is {}x{}, config asks for {}x{}",
            start.n(),
            start.d(),
            config.n,
            config.d
        )));
    }

    let mut state = SgdState::new(start, config.lr0, config.momentum);
    let mut loss_trace = Vec::with_capacity(config.iterations / config.trace_every + 2);
    let mut lr_trace = vec![(0, config.lr0)];
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let last = config.iterations - 1;

    for it in 0..config.iterations {
        if state.points.as_slice().iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                loss_trace,
            });
        }
        let eval = config.loss.evaluate(&state.points)?;
        if !eval.value.is_finite() || eval.gradient.as_slice().iter().any(|g| !g.is_finite()) {
            loss_trace.push((it, eval.value));
            return Err(Error::NonFiniteLoss {
                iteration: it,
                loss_trace,
            });
        }
        if it % config.trace_every == 0 || it == last {
            loss_trace.push((it, eval.value));
        }

        if eval.value < best - config.plateau_threshold {
            best = eval.value;
            stale = 0;
        } else {
            best = best.min(eval.value);
            stale += 1;
            if stale >= config.plateau_patience {
                stale = 0;
                let next = (state.lr * config.plateau_factor).max(config.lr_floor);
                if next < state.lr {
                    state.lr = next;
                    lr_trace.push((it, next));
                }
            }
        }

        state = sgd_step(state, &eval.gradient);
    }

    let final_min_angle = point_set_min_angle(&state.points)?;
    Ok(SolveResult {
        final_points: state.points,
        final_min_angle,
        loss_trace,
        lr_trace,
        seed: config.seed,
    })
}
