//! Optimal dividend and capital injection barriers for spectrally positive
//! Lévy and Markov additive surplus models.
//!
//! * [`levy`]: process specifications and the Laplace exponent.
//! * [`scale`]: exact q-scale functions `W_q`, `Z_q`, `Z̄_q`.
//! * [`payoff`]: concave piecewise-linear terminal payoffs.
//! * [`aux`]: the single-regime problem with a payoff at an exponential time.
//! * [`regime`]: the regime-switching fixed point and optimal barrier vector.
//!
//! Everything is generic over the floating point type through [`Real`]; the
//! `*64` aliases below fix it to `f64`.

pub mod aux;
pub mod levy;
pub mod payoff;
pub mod quadrature;
pub mod regime;
mod roots;
pub mod scalar;
pub mod scale;

pub use aux::{AuxContext, AuxError, AuxProblem, AuxSolution, BarrierValue};
pub use levy::{JumpComponent, LevyError, LevySpec};
pub use payoff::{ConcavePayoff, Concavified, PayoffError, PiecewiseLinear};
pub use regime::{rho_metric, IterationRecord, RegimeError, RegimeModel, RegimeSolution, SolverOptions, SwitchJump, ValueField};
pub use scalar::Real;
pub use scale::{ScaleError, ScaleEvaluator};

pub type LevySpec64 = LevySpec<f64>;
pub type ScaleEvaluator64 = ScaleEvaluator<f64>;
pub type ConcavePayoff64 = ConcavePayoff<f64>;
pub type PiecewiseLinear64 = PiecewiseLinear<f64>;
pub type AuxProblem64 = AuxProblem<f64>;
pub type AuxSolution64 = AuxSolution<f64>;
pub type RegimeModel64 = RegimeModel<f64>;
pub type RegimeSolution64 = RegimeSolution<f64>;
pub type ValueField64 = ValueField<f64>;

pub type LevySpec32 = LevySpec<f32>;
pub type ScaleEvaluator32 = ScaleEvaluator<f32>;
pub type AuxProblem32 = AuxProblem<f32>;
