//! Spreading unit vectors on hyperspheres.
//!
//! The crate solves the Tammes problem numerically with four competing
//! losses, builds the exact regular-simplex solution when `d >= n - 1`,
//! measures angular statistics of weight matrices and applies the
//! minimum-angle loss as a regularizer on a small neural network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyzer;
pub mod bench;
pub mod demo;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod optimizer;
pub mod rng;
pub mod simplex;

pub use error::{Error, Result};
pub use geometry::{
    angle_matrix, cosine_matrix, min_pairwise_angle, normalize_rows, point_set_min_angle,
    row_min_angles, AngleMatrix, CosineMatrix, PointSet,
};
pub use losses::{LayerSet, LossEval, LossKind};
pub use optimizer::{init_points, solve, OptimizerConfig, SolveResult};
pub use simplex::{regular_simplex, verify_simplex, SimplexReport};
pub use analyzer::{angle_stats, load_weight_matrix, AngleStats};
pub use bench::{compare_report, run_table1, BenchConfig, BenchRow};
pub use demo::{train_mlp, DemoConfig, DemoReport};
