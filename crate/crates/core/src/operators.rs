//! Nonexpansive maps and k-strict pseudocontractions of `ℝ^d` with a known
//! fixed point.
//!
//! A map `T` is a k-strict pseudocontraction when for all `x, y`
//!
//! ```text
//! ‖Tx − Ty‖² ≤ ‖x − y‖² + k‖(x − Tx) − (y − Ty)‖²
//! ```
//!
//! Every [`Operator`] is built from a construction descriptor
//! ([`OperatorKind`]) whose strictness constant is derived structurally, and
//! carries one point of its fixed-point set. The empirical checks
//! ([`check_kpsc`], [`check_nonexpansive`], [`check_lipschitz`]) verify the
//! claimed constant on sampled pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::CheckReport;
use crate::vector::{DimensionMismatch, Vector};

/// Tolerance for weights summing to one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Relative tolerance for two family members sharing a fixed point.
const FIXED_POINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("{count} operators but {weights} weights")]
    WeightCount { count: usize, weights: usize },
    #[error("empty operator list")]
    Empty,
    #[error("operators do not share a fixed point (distance {distance})")]
    FixedPointMismatch { distance: f64 },
    #[error("operator is not nonexpansive (claimed k = {k})")]
    NotNonexpansive { k: f64 },
    #[error("scaling by {factor} is not a strict pseudocontraction")]
    NotPseudocontractive { factor: f64 },
    #[error("matrix must be {dim}x{dim}")]
    MatrixShape { dim: usize },
}

/// Construction descriptor of an [`Operator`]. This is also the JSON form.
///
/// All point-centred constructions fix `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    Identity {
        dim: usize,
    },
    /// `x ↦ p + c(x − p)`. Covers contractions (`|c| ≤ 1`) and the
    /// pseudocontractive dilations `c < −1`.
    Scaling {
        center: Vector,
        factor: f64,
    },
    /// `x ↦ p + M(x − p)` with a caller-claimed strictness constant.
    Linear {
        center: Vector,
        matrix: Vec<Vec<f64>>,
        k: f64,
    },
    /// Rotation by `angle` in the coordinate plane `(plane[0], plane[1])`.
    Rotation {
        center: Vector,
        plane: [usize; 2],
        angle: f64,
    },
    /// Reflection in the hyperplane through `center` orthogonal to `normal`.
    Reflection {
        center: Vector,
        normal: Vector,
    },
    /// Metric projection onto the closed ball `B(center, radius)`.
    ProjectionBall {
        center: Vector,
        radius: f64,
    },
    /// `x ↦ t·x + (1 − t)·Tx`.
    Averaged {
        inner: Box<Operator>,
        t: f64,
    },
    /// `x ↦ Σ wᵢ·Tᵢx`.
    ConvexCombination {
        ops: Vec<Operator>,
        weights: Vec<f64>,
    },
    /// `ops[n−1] ∘ … ∘ ops[0]`; nonexpansive members only.
    Composition {
        ops: Vec<Operator>,
    },
    /// `x ↦ (Ux − k·x)/(1 − k)`, the map whose `k`-average is `U`.
    PscFromNonexpansive {
        base: Box<Operator>,
        k: f64,
    },
}

/// An evaluable self-map of `ℝ^d` with a certified strictness constant and a
/// known fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorKind", into = "OperatorKind")]
pub struct Operator {
    kind: OperatorKind,
    k: f64,
    fixed_point: Vector,
}

impl From<Operator> for OperatorKind {
    fn from(op: Operator) -> Self {
        op.kind
    }
}

impl TryFrom<OperatorKind> for Operator {
    type Error = OperatorError;

    fn try_from(kind: OperatorKind) -> Result<Self, Self::Error> {
        Operator::from_kind(kind)
    }
}

fn check_unit_interval(name: &'static str, value: f64, closed_right: bool) -> Result<(), OperatorError> {
    let ok = value >= 0.0 && if closed_right { value <= 1.0 } else { value < 1.0 };
    if ok {
        Ok(())
    } else {
        Err(OperatorError::InvalidParameter {
            name,
            value,
            reason: if closed_right {
                "must lie in [0, 1]"
            } else {
                "must lie in [0, 1)"
            },
        })
    }
}

fn shared_fixed_point(ops: &[Operator]) -> Result<Vector, OperatorError> {
    let first = ops.first().ok_or(OperatorError::Empty)?;
    let p = first.fixed_point.clone();
    for op in &ops[1..] {
        p.check_dim(&op.fixed_point)?;
        let distance = p.distance(&op.fixed_point)?;
        if distance > FIXED_POINT_TOLERANCE * (1.0 + p.norm()) {
            return Err(OperatorError::FixedPointMismatch { distance });
        }
    }
    Ok(p)
}

/// Validates convex weights: nonnegative, summing to one within
/// [`WEIGHT_SUM_TOLERANCE`].
pub fn check_convex_weights(weights: &[f64]) -> Result<(), OperatorError> {
    if weights.is_empty() {
        return Err(OperatorError::Empty);
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
    {
        return Err(OperatorError::NegativeWeight { index, value });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(OperatorError::WeightSum { sum });
    }
    Ok(())
}

/// Strictness constant of `x ↦ p + c(x − p)`: the least `k ≥ 0` with
/// `c² ≤ 1 + k(1 − c)²`.
fn scaling_constant(factor: f64) -> Result<f64, OperatorError> {
    if !factor.is_finite() || factor > 1.0 {
        return Err(OperatorError::NotPseudocontractive { factor });
    }
    if factor >= -1.0 {
        Ok(0.0)
    } else {
        Ok((-1.0 - factor) / (1.0 - factor))
    }
}

impl Operator {
    /// Validates a descriptor and derives its strictness constant and fixed point.
    pub fn from_kind(kind: OperatorKind) -> Result<Self, OperatorError> {
        let (k, fixed_point) = match &kind {
            OperatorKind::Identity { dim } => {
                if *dim == 0 {
                    return Err(OperatorError::InvalidParameter {
                        name: "dim",
                        value: 0.0,
                        reason: "must be at least 1",
                    });
                }
                (0.0, Vector::zeros(*dim))
            }
            OperatorKind::Scaling { center, factor } => (scaling_constant(*factor)?, center.clone()),
            OperatorKind::Linear { center, matrix, k } => {
                let dim = center.dim();
                if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                    return Err(OperatorError::MatrixShape { dim });
                }
                if matrix.iter().flatten().any(|m| !m.is_finite()) {
                    return Err(OperatorError::InvalidParameter {
                        name: "matrix entry",
                        value: f64::NAN,
                        reason: "must be finite",
                    });
                }
                check_unit_interval("k", *k, false)?;
                (*k, center.clone())
            }
            OperatorKind::Rotation { center, plane, angle } => {
                let dim = center.dim();
                if plane[0] == plane[1] || plane[0] >= dim || plane[1] >= dim {
                    return Err(OperatorError::InvalidParameter {
                        name: "plane",
                        value: plane[0].max(plane[1]) as f64,
                        reason: "needs two distinct coordinate axes below the dimension",
                    });
                }
                if !angle.is_finite() {
                    return Err(OperatorError::InvalidParameter {
                        name: "angle",
                        value: *angle,
                        reason: "must be finite",
                    });
                }
                (0.0, center.clone())
            }
            OperatorKind::Reflection { center, normal } => {
                center.check_dim(normal)?;
                if normal.norm() == 0.0 {
                    return Err(OperatorError::InvalidParameter {
                        name: "normal",
                        value: 0.0,
                        reason: "must be nonzero",
                    });
                }
                (0.0, center.clone())
            }
            OperatorKind::ProjectionBall { center, radius } => {
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(OperatorError::InvalidParameter {
                        name: "radius",
                        value: *radius,
                        reason: "must be finite and nonnegative",
                    });
                }
                (0.0, center.clone())
            }
            OperatorKind::Averaged { inner, t } => {
                check_unit_interval("t", *t, true)?;
                // I − T_t = (1 − t)(I − T), so T_t is ((k − t)/(1 − t))⁺-strict
                let k = if *t >= inner.k { 0.0 } else { (inner.k - t) / (1.0 - t) };
                (k, inner.fixed_point.clone())
            }
            OperatorKind::ConvexCombination { ops, weights } => {
                if ops.len() != weights.len() {
                    return Err(OperatorError::WeightCount {
                        count: ops.len(),
                        weights: weights.len(),
                    });
                }
                check_convex_weights(weights)?;
                let p = shared_fixed_point(ops)?;
                let k = ops.iter().map(|op| op.k).fold(0.0, f64::max);
                (k, p)
            }
            OperatorKind::Composition { ops } => {
                let p = shared_fixed_point(ops)?;
                if let Some(op) = ops.iter().find(|op| op.k != 0.0) {
                    return Err(OperatorError::NotNonexpansive { k: op.k });
                }
                (0.0, p)
            }
            OperatorKind::PscFromNonexpansive { base, k } => {
                check_unit_interval("k", *k, false)?;
                if base.k != 0.0 {
                    return Err(OperatorError::NotNonexpansive { k: base.k });
                }
                (*k, base.fixed_point.clone())
            }
        };
        Ok(Operator { kind, k, fixed_point })
    }

    pub fn identity(dim: usize) -> Self {
        Operator::from_kind(OperatorKind::Identity { dim }).expect("dim must be positive")
    }

    /// `x ↦ p + c(x − p)`; `c = −1` is the point reflection through `p`.
    pub fn scaling(center: Vector, factor: f64) -> Result<Self, OperatorError> {
        Operator::from_kind(OperatorKind::Scaling { center, factor })
    }

    /// Contraction about `center` with factor `c ∈ [0, 1]`.
    pub fn contraction(center: Vector, factor: f64) -> Result<Self, OperatorError> {
        check_unit_interval("factor", factor, true)?;
        Operator::scaling(center, factor)
    }

    pub fn linear(center: Vector, matrix: Vec<Vec<f64>>, k: f64) -> Result<Self, OperatorError> {
        Operator::from_kind(OperatorKind::Linear { center, matrix, k })
    }

    pub fn rotation(center: Vector, plane: [usize; 2], angle: f64) -> Result<Self, OperatorError> {
        Operator::from_kind(OperatorKind::Rotation { center, plane, angle })
    }

    pub fn reflection(center: Vector, normal: Vector) -> Result<Self, OperatorError> {
        let n = normal.norm();
        let normal = if n > 0.0 { normal.scale(1.0 / n) } else { normal };
        Operator::from_kind(OperatorKind::Reflection { center, normal })
    }

    pub fn projection_ball(center: Vector, radius: f64) -> Result<Self, OperatorError> {
        Operator::from_kind(OperatorKind::ProjectionBall { center, radius })
    }

    pub fn composition(ops: Vec<Operator>) -> Result<Self, OperatorError> {
        Operator::from_kind(OperatorKind::Composition { ops })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// The certified strictness constant (0 for nonexpansive maps).
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn fixed_point(&self) -> &Vector {
        &self.fixed_point
    }

    pub fn dim(&self) -> usize {
        self.fixed_point.dim()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector, DimensionMismatch> {
        self.fixed_point.check_dim(x)?;
        Ok(self.eval(x))
    }

    /// Evaluation without the dimension check; `x` must have `self.dim()`
    /// coordinates.
    pub(crate) fn eval(&self, x: &Vector) -> Vector {
        let c = x.coords();
        match &self.kind {
            OperatorKind::Identity { .. } => x.clone(),
            OperatorKind::Scaling { center, factor } => Vector::from_raw(
                c.iter()
                    .zip(center.coords())
                    .map(|(xi, pi)| pi + factor * (xi - pi))
                    .collect(),
            ),
            OperatorKind::Linear { center, matrix, .. } => {
                let p = center.coords();
                Vector::from_raw(
                    matrix
                        .iter()
                        .zip(p)
                        .map(|(row, pi)| {
                            pi + row
                                .iter()
                                .zip(c.iter().zip(p))
                                .map(|(m, (xj, pj))| m * (xj - pj))
                                .sum::<f64>()
                        })
                        .collect(),
                )
            }
            OperatorKind::Rotation { center, plane, angle } => {
                let (s, co) = angle.sin_cos();
                let [i, j] = *plane;
                let p = center.coords();
                let (u, v) = (c[i] - p[i], c[j] - p[j]);
                let mut out = c.to_vec();
                out[i] = p[i] + co * u - s * v;
                out[j] = p[j] + s * u + co * v;
                Vector::from_raw(out)
            }
            OperatorKind::Reflection { center, normal } => {
                let n = normal.coords();
                let along: f64 = c
                    .iter()
                    .zip(center.coords())
                    .zip(n)
                    .map(|((xi, pi), ni)| (xi - pi) * ni)
                    .sum::<f64>()
                    / normal.norm_sq();
                Vector::from_raw(c.iter().zip(n).map(|(xi, ni)| xi - 2.0 * along * ni).collect())
            }
            OperatorKind::ProjectionBall { center, radius } => {
                let dist = x.distance(center).unwrap_or(f64::NAN);
                if dist <= *radius {
                    x.clone()
                } else {
                    let s = radius / dist;
                    Vector::from_raw(
                        c.iter()
                            .zip(center.coords())
                            .map(|(xi, pi)| pi + s * (xi - pi))
                            .collect(),
                    )
                }
            }
            OperatorKind::Averaged { inner, t } => blend(*t, x, &inner.eval(x)),
            OperatorKind::ConvexCombination { ops, weights } => {
                let mut acc = vec![0.0; c.len()];
                for (op, w) in ops.iter().zip(weights) {
                    for (a, y) in acc.iter_mut().zip(op.eval(x).coords()) {
                        *a += w * y;
                    }
                }
                Vector::from_raw(acc)
            }
            OperatorKind::Composition { ops } => ops.iter().fold(x.clone(), |y, op| op.eval(&y)),
            OperatorKind::PscFromNonexpansive { base, k } => {
                let u = base.eval(x);
                Vector::from_raw(
                    u.coords()
                        .iter()
                        .zip(c)
                        .map(|(ui, xi)| (ui - k * xi) / (1.0 - k))
                        .collect(),
                )
            }
        }
    }
}

fn blend(t: f64, x: &Vector, y: &Vector) -> Vector {
    Vector::from_raw(
        x.coords()
            .iter()
            .zip(y.coords())
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect(),
    )
}

/// The averaged map `T_t x = t·x + (1 − t)·Tx`.
///
/// Fixed points are preserved, and `(T_{t1})_{t2}` agrees with
/// `T_{1 − (1 − t1)(1 − t2)}`.
pub fn averaged(op: &Operator, t: f64) -> Result<Operator, OperatorError> {
    Operator::from_kind(OperatorKind::Averaged {
        inner: Box::new(op.clone()),
        t,
    })
}

/// The `k`-strict pseudocontraction `T = (U − k·I)/(1 − k)` whose `k`-average
/// is the nonexpansive map `U`. Returns `U` itself when `k = 0`.
pub fn psc_from_nonexpansive(base: &Operator, k: f64) -> Result<Operator, OperatorError> {
    check_unit_interval("k", k, false)?;
    if base.k != 0.0 {
        return Err(OperatorError::NotNonexpansive { k: base.k });
    }
    if k == 0.0 {
        return Ok(base.clone());
    }
    Operator::from_kind(OperatorKind::PscFromNonexpansive {
        base: Box::new(base.clone()),
        k,
    })
}

/// `x ↦ Σ wᵢ·Tᵢx` for operators sharing a fixed point.
pub fn convex_combination(ops: &[Operator], weights: &[f64]) -> Result<Operator, OperatorError> {
    if let Some(first) = ops.first() {
        for op in &ops[1..] {
            first.fixed_point.check_dim(&op.fixed_point)?;
        }
    }
    Operator::from_kind(OperatorKind::ConvexCombination {
        ops: ops.to_vec(),
        weights: weights.to_vec(),
    })
}

/// `(1 + k)/(1 − k)`, a Lipschitz constant of every k-strict pseudocontraction.
pub fn lipschitz_bound(k: f64) -> Result<f64, OperatorError> {
    check_unit_interval("k", k, false)?;
    Ok((1.0 + k) / (1.0 - k))
}

/// Checks the k-strict pseudocontraction inequality on every pair.
pub fn check_kpsc(
    op: &Operator,
    k: f64,
    pairs: &[(Vector, Vector)],
    slack: f64,
) -> Result<CheckReport, DimensionMismatch> {
    check_kpsc_named(op, k, pairs, slack, "k_strict_pseudocontraction")
}

/// The `k = 0` case of [`check_kpsc`].
pub fn check_nonexpansive(
    op: &Operator,
    pairs: &[(Vector, Vector)],
    slack: f64,
) -> Result<CheckReport, DimensionMismatch> {
    check_kpsc_named(op, 0.0, pairs, slack, "nonexpansive")
}

fn check_kpsc_named(
    op: &Operator,
    k: f64,
    pairs: &[(Vector, Vector)],
    slack: f64,
    name: &str,
) -> Result<CheckReport, DimensionMismatch> {
    let mut report = CheckReport::new(name, slack);
    for (n, (x, y)) in pairs.iter().enumerate() {
        let tx = op.apply(x)?;
        let ty = op.apply(y)?;
        let lhs = tx.distance_sq(&ty)?;
        let rx = x.sub(&tx)?;
        let ry = y.sub(&ty)?;
        let rhs = x.distance_sq(y)? + k * rx.distance_sq(&ry)?;
        report.record(n as u64, lhs, rhs);
    }
    Ok(report)
}

/// Checks `‖Tx − Ty‖ ≤ ((1 + k)/(1 − k))·‖x − y‖` on every pair.
pub fn check_lipschitz(
    op: &Operator,
    pairs: &[(Vector, Vector)],
    slack: f64,
) -> Result<CheckReport, DimensionMismatch> {
    let bound = lipschitz_bound(op.k).expect("certified k lies in [0, 1)");
    let mut report = CheckReport::new("lipschitz", slack);
    for (n, (x, y)) in pairs.iter().enumerate() {
        let lhs = op.apply(x)?.distance(&op.apply(y)?)?;
        report.record(n as u64, lhs, bound * x.distance(y)?);
    }
    Ok(report)
}
