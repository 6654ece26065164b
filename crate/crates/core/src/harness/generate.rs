use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StepSpec;
use crate::engine::{EngineError, ProblemInstance};
use crate::operators::{psc_from_nonexpansive, Operator};
use crate::rng::{keyed_rng, point_in_ball, unit_vector};
use crate::schedules::{constant_mix, constant_step, geometric_mix, MixSchedule};
use crate::vector::Vector;

/// Nonexpansive building blocks, all fixing the instance's `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Plane rotation; the point reflection `−(x − p)` in dimension 1.
    Rotation,
    Contraction,
    Reflection,
    ProjectionBall,
    /// Two simple blocks composed.
    Composition,
}

impl BlockKind {
    pub fn all() -> Vec<BlockKind> {
        vec![
            BlockKind::Rotation,
            BlockKind::Contraction,
            BlockKind::Reflection,
            BlockKind::ProjectionBall,
            BlockKind::Composition,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixKind {
    Constant,
    Geometric,
}

/// Everything about a generated instance except its size and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedShape {
    pub mix: MixKind,
    pub step: StepSpec,
    pub blocks: Vec<BlockKind>,
}

/// Radius of the ball `p` is drawn from, before scaling.
const P_RADIUS: f64 = 0.4;
/// Radius of the ball `x0` is drawn from, before scaling.
const X0_RADIUS: f64 = 0.5;

/// Builds `n` maps sharing a random fixed point in dimension `d`. Each map is
/// a random nonexpansive block turned into a strict pseudocontraction: the
/// first with constant exactly `k`, the rest with constants drawn from
/// `[0, k]`. All lengths (`p`, `x0`, ball radii) are multiplied by `scale`.
/// The result depends only on the arguments.
pub fn generate_instance(
    seed: u64,
    index: u64,
    d: usize,
    n: usize,
    k: f64,
    shape: &GeneratedShape,
    scale: f64,
) -> Result<ProblemInstance, EngineError> {
    if d == 0 || n == 0 || shape.blocks.is_empty() || !(scale > 0.0 && scale.is_finite()) {
        return Err(EngineError::InvalidInstance(format!(
            "cannot generate d = {d}, N = {n}, scale = {scale}"
        )));
    }
    let p = point_in_ball(&mut keyed_rng(seed, index, "fixed_point"), d, P_RADIUS).scale(scale);
    let x0 = point_in_ball(&mut keyed_rng(seed, index, "start"), d, X0_RADIUS).scale(scale);

    let mut strict_rng = keyed_rng(seed, index, "strictness");
    let mut family = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = keyed_rng(seed, index, &format!("block/{i}"));
        let kind = *shape.blocks.choose(&mut rng).expect("nonempty");
        let base = draw_block(&mut rng, kind, &p, scale)?;
        let ki = if i == 0 { k } else { k * strict_rng.gen::<f64>() };
        family.push(psc_from_nonexpansive(&base, ki)?);
    }

    let mix = draw_mix(&mut keyed_rng(seed, index, "mix"), shape.mix, n)?;
    let steps = constant_step(shape.step.t(k), k)?;
    ProblemInstance::with_minimal_b(family, k, x0, steps, mix)
}

fn draw_block<R: Rng>(rng: &mut R, kind: BlockKind, p: &Vector, scale: f64) -> Result<Operator, EngineError> {
    let d = p.dim();
    let op = match kind {
        BlockKind::Rotation if d == 1 => Operator::scaling(p.clone(), -1.0)?,
        BlockKind::Rotation => {
            let i = rng.gen_range(0..d);
            let j = (i + rng.gen_range(1..d)) % d;
            let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            Operator::rotation(p.clone(), [i, j], angle)?
        }
        BlockKind::Contraction => Operator::contraction(p.clone(), rng.gen_range(0.0..=1.0))?,
        BlockKind::Reflection => Operator::reflection(p.clone(), unit_vector(rng, d))?,
        BlockKind::ProjectionBall => Operator::projection_ball(p.clone(), scale * rng.gen_range(0.05..0.5))?,
        BlockKind::Composition => {
            let simple = [
                BlockKind::Rotation,
                BlockKind::Contraction,
                BlockKind::Reflection,
                BlockKind::ProjectionBall,
            ];
            let (a, b) = (
                *simple.choose(rng).expect("nonempty"),
                *simple.choose(rng).expect("nonempty"),
            );
            let first = draw_block(rng, a, p, scale)?;
            let second = draw_block(rng, b, p, scale)?;
            Operator::composition(vec![first, second])?
        }
    };
    Ok(op)
}

/// Weights bounded away from zero: every entry of the limit is at least a
/// third of the largest, and geometric offsets move each weight by at most
/// half its limit.
fn draw_mix<R: Rng>(rng: &mut R, kind: MixKind, n: usize) -> Result<MixSchedule, EngineError> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let mut limit: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // put the rounding error on the last entry so the sum is 1 to the ulp
    let head: f64 = limit[..n - 1].iter().sum();
    limit[n - 1] = 1.0 - head;
    match kind {
        MixKind::Constant => Ok(constant_mix(&limit)?),
        MixKind::Geometric => {
            let r = rng.gen_range(0.5..0.9);
            if n == 1 {
                return Ok(geometric_mix(&limit, &[0.0], r)?);
            }
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = u.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = u.iter().map(|x| x - mean).collect();
            let room = limit
                .iter()
                .zip(&centered)
                .filter(|(_, c)| **c != 0.0)
                .map(|(l, c)| 0.5 * l / c.abs())
                .fold(f64::INFINITY, f64::min);
            let factor = if room.is_finite() { room } else { 0.0 };
            let mut c: Vec<f64> = centered.iter().map(|x| x * factor).collect();
            let head: f64 = c[..n - 1].iter().sum();
            c[n - 1] = -head;
            Ok(geometric_mix(&limit, &c, r)?)
        }
    }
}
