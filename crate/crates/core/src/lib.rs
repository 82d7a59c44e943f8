//! Finite inner approximations of the trajectory set, attainable sets and
//! integral funnel of `x' = f(t, x, u)` under an `L_p` budget `||u||_p <= r`.
//!
//! The pipeline: a constant chain and a discretization plan ([`params`]), a
//! σ-net on the control sphere ([`sphere`]), the finite set of
//! budget-feasible piecewise-constant controls ([`control`]), Euler broken
//! lines and reference trajectories ([`trajectory`]), bundles, slices and
//! funnel clouds ([`funnel`]), and Hausdorff distances between them
//! ([`metrics`]).

pub mod control;
pub mod error;
pub mod expr;
pub mod funnel;
pub mod io;
pub mod metrics;
pub mod modulus;
pub mod nearest;
pub mod params;
pub mod sphere;
pub mod study;
pub mod system;
pub mod trajectory;
mod vecmath;

pub use control::{
    average_control, count_words, enumerate_words, feasible, random_word, word_lp_norm, Budget,
    ControlWord, PiecewiseControl, WordStream, DEFAULT_WORD_CAP,
};
pub use error::{CapacityError, Error, Result};
pub use expr::{parse_expr, DynamicsExpr, Expr, ParseError, ParseErrorKind};
pub use funnel::{
    attainable_slice, build_bundle, build_funnel, stream_slices, BundleMode, FunnelCloud,
    TrajectoryBundle,
};
pub use metrics::{hausdorff_funnel, hausdorff_points, hausdorff_uniform, DistanceReport};
pub use modulus::{build_omega, estimate_omega, OmegaModel, OmegaSettings};
pub use params::{
    alpha_star, derive_constants, epsilon_schedule, ConstantsChain, DiscretizationPlan,
    EpsilonTargets, ScheduleCaps,
};
pub use sphere::{build_sigma_net, covering_check, CoveringReport, SigmaNet, DEFAULT_NET_CAP};
pub use system::{
    eval_dynamics, validate_growth, validate_lipschitz, Catalog, Constants, DynamicsSpec,
    ProblemInstance, Rhs, SamplingBox,
};
pub use trajectory::{
    euler_broken_line, integrate_trajectory, modulus_check, EulerPolyline, SampledTrajectory,
};
