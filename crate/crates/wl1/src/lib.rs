//! Recovery thresholds for weighted ℓ1 minimization when the sparsity prior and the
//! weights vary continuously along the signal.
//!
//! The bound side computes exponents of face counts and Grassmann angles of the
//! weighted cross-polytope and searches for the largest sparsity at which their sum
//! is certified negative. The experiment side samples signals, solves the weighted
//! ℓ1 program as a linear program and counts failures.
//!
//! The numeric core is generic over `T: Real` (f32 or f64). The aliases below fix
//! `T = f64`, which is what the experiments and the command-line tool use.

pub mod error;
pub mod exponents;
pub mod optimizer;
pub mod quadrature;
pub mod real;
pub mod recovery;
pub mod shapes;
pub mod specfn;

pub use error::{Error, Result};
pub use exponents::{
    combinatorial_exponent, external_angle_oracle, external_angle_oracle_log, external_exponent,
    internal_angle_oracle, internal_exponent, optimized_external_exponent,
    optimized_internal_exponent, ExponentBreakdown, ExternalOptimum, FaceClass,
    InternalAngleEstimate, InternalOptimum, OvercountProfile,
};
pub use optimizer::{
    delta_range, guaranteed_delta_bound, optimal_rho, total_exponent, total_exponent_for_face,
    BoundMode, BoundOptions, BoundQuery, BoundResult, DeltaBound, DeltaFamily, RhoCurve,
    ThresholdRule,
};
pub use real::Real;
pub use recovery::{
    judge_recovery, leading_face_signal, run_trials, sample_signal, solve_weighted_l1,
    wilson_interval, MeasurementEnsemble, SignalInstance, SignalModel, SolveReport, SolveStatus,
    SolverOptions, TrialConfig, TrialRecord, TrialSummary,
};
pub use shapes::{FaceProfile, IntervalGrid, Role, ShapeFunction, ShapeKind};

pub type Shape = ShapeFunction<f64>;
pub type Face = FaceClass<f64>;
pub type Overcount = OvercountProfile<f64>;
pub type Breakdown = ExponentBreakdown<f64>;
pub type Query = BoundQuery<f64>;
pub type Bound = BoundResult<f64>;
pub type Threshold = DeltaBound<f64>;
pub type RhoSearch = RhoCurve<f64>;
pub type DenseMatrix = Matrix<f64>;
pub type Report = SolveReport<f64>;

pub use recovery::Matrix;
