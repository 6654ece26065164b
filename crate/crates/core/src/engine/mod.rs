//! The parallel algorithm `x_{n+1} = t_n·x_n + (1 − t_n)·A_n x_n` with
//! `A_n = Σ_i λ_i^(n)·T_i`, its traces, and step-by-step checks of every
//! inequality the rates rest on.

mod checks;
mod reduce;
mod trace;

pub use checks::{
    check_chain_inequalities, check_fejer, check_preti, check_preti_trace, check_psi, check_rate_a, check_rate_t,
    check_recurrence, check_step_inequality, check_summed_inequality, check_three_b_bound, liminf_witness,
    psi_partial_sum,
};
pub use reduce::{check_trace_agreement, reduce_instance, residual_relation};
pub use trace::{iterate, Trace, TraceCsv, TraceRecord};

use serde::Serialize;
use thiserror::Error;

use crate::operators::{Operator, OperatorError};
use crate::rates::{RateError, RateInputs};
use crate::schedules::{MixSchedule, ScheduleError, StepSchedule};
use crate::vector::{DimensionMismatch, Vector};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("iterate left the finite range at step {n}")]
    Overflow { n: u64 },
    #[error("check only applies to nonexpansive families (k = {k}); reduce the instance first")]
    RequiresNonexpansive { k: f64 },
    #[error("trace has {len} entries but index {needed} is required")]
    TraceTooShort { needed: u64, len: u64 },
    #[error("no index N in [{m}, {delta}] with residual <= {eps}")]
    WitnessNotFound { eps: f64, m: u64, delta: u64 },
    #[error("trace csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A family sharing the fixed point `p`, a start point, and the schedules
/// driving the parallel algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    family: Vec<Operator>,
    k: f64,
    x0: Vector,
    p: Vector,
    b: f64,
    steps: StepSchedule,
    mix: MixSchedule,
}

/// `max(‖x0‖, ‖x0 − p‖)` rounded up to the next double.
pub fn minimal_b(x0: &Vector, p: &Vector) -> Result<f64, DimensionMismatch> {
    Ok(x0.norm().max(x0.distance(p)?).next_up())
}

impl ProblemInstance {
    pub fn new(
        family: Vec<Operator>,
        k: f64,
        x0: Vector,
        b: f64,
        steps: StepSchedule,
        mix: MixSchedule,
    ) -> Result<Self, EngineError> {
        let invalid = |msg: String| Err(EngineError::InvalidInstance(msg));
        let Some(first) = family.first() else {
            return invalid("empty family".into());
        };
        if !(0.0..1.0).contains(&k) {
            return invalid(format!("k = {k} outside [0, 1)"));
        }
        let p = first.fixed_point().clone();
        for (i, op) in family.iter().enumerate() {
            x0.check_dim(op.fixed_point())?;
            let gap = op.fixed_point().distance(&p)?;
            if gap > 1e-9 * (1.0 + p.norm()) {
                return invalid(format!("operator {i} does not share the fixed point (gap {gap})"));
            }
            if op.k() > k {
                return invalid(format!("operator {i} has k = {} above the family constant {k}", op.k()));
            }
        }
        if mix.n_maps() != family.len() {
            return invalid(format!("{} weights for {} operators", mix.n_maps(), family.len()));
        }
        if steps.k_floor() != k {
            return invalid(format!("step schedule floor {} differs from k = {k}", steps.k_floor()));
        }
        if !(b > 0.0 && b.is_finite()) {
            return invalid(format!("b = {b} must be positive"));
        }
        if x0.norm() > b || x0.distance(&p)? > b {
            return invalid(format!(
                "b = {b} does not bound ‖x0‖ = {} and ‖x0 − p‖ = {}",
                x0.norm(),
                x0.distance(&p)?
            ));
        }
        Ok(ProblemInstance {
            family,
            k,
            x0,
            p,
            b,
            steps,
            mix,
        })
    }

    /// Like [`ProblemInstance::new`] with `b` set by [`minimal_b`].
    pub fn with_minimal_b(
        family: Vec<Operator>,
        k: f64,
        x0: Vector,
        steps: StepSchedule,
        mix: MixSchedule,
    ) -> Result<Self, EngineError> {
        let p = family
            .first()
            .ok_or_else(|| EngineError::InvalidInstance("empty family".into()))?
            .fixed_point()
            .clone();
        let b = minimal_b(&x0, &p)?;
        ProblemInstance::new(family, k, x0, b, steps, mix)
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn n_maps(&self) -> usize {
        self.family.len()
    }

    pub fn family(&self) -> &[Operator] {
        &self.family
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn fixed_point(&self) -> &Vector {
        &self.p
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn steps(&self) -> &StepSchedule {
        &self.steps
    }

    pub fn mix(&self) -> &MixSchedule {
        &self.mix
    }

    pub fn rate_inputs(&self) -> Result<RateInputs, RateError> {
        RateInputs::new(
            self.mix.a(),
            self.b,
            self.k,
            self.steps.theta().clone(),
            self.mix.gamma().clone(),
        )
    }

    /// `T_i x` for every member.
    pub(crate) fn images(&self, x: &Vector) -> Vec<Vector> {
        self.family.iter().map(|op| op.eval(x)).collect()
    }

    /// `A_n x` given the member images `T_i x`.
    pub(crate) fn combine(&self, n: u64, images: &[Vector]) -> Vector {
        combine(&self.mix.weights(n), images)
    }

    pub fn apply_a(&self, n: u64, x: &Vector) -> Result<Vector, DimensionMismatch> {
        self.x0.check_dim(x)?;
        Ok(self.combine(n, &self.images(x)))
    }

    fn require_nonexpansive(&self) -> Result<(), EngineError> {
        if self.k == 0.0 {
            Ok(())
        } else {
            Err(EngineError::RequiresNonexpansive { k: self.k })
        }
    }
}

pub(crate) fn combine(weights: &[f64], images: &[Vector]) -> Vector {
    let mut acc = vec![0.0; images[0].dim()];
    for (w, y) in weights.iter().zip(images) {
        for (a, yi) in acc.iter_mut().zip(y.coords()) {
            *a += w * yi;
        }
    }
    Vector::from_raw(acc)
}
