//! Step sequences `(t_n)` with a rate of divergence `θ`, and convex mixing
//! weights `(λ_i^(n))` with a Cauchy modulus `γ` and a uniform lower bound `a`.
//!
//! `θ` and `γ` are carried alongside the sequences as explicit total
//! functions. The validators check them against the sequences empirically:
//!
//! ```text
//! Σ_{n=0}^{θ(N)} (t_n − k)(1 − t_n) ≥ N
//! Σ_{j=γ(ε)+1}^{γ(ε)+n} Σ_i |λ_i^(j+1) − λ_i^(j)| ≤ ε
//! ```

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::check::CheckReport;
use crate::exact;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("step size {t} must satisfy {k} < t < 1")]
    StepOutOfRange { t: f64, k: f64 },
    #[error("strictness constant {k} must lie in [0, 1)")]
    InvalidK { k: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("ratio {r} must lie in (0, 1)")]
    InvalidRatio { r: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(String),
    #[error("schedule is built for k = {schedule}, not {requested}")]
    KFloorMismatch { schedule: f64, requested: f64 },
    #[error("modulus value overflows u64")]
    Overflow,
    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },
}

/// An exact nonnegative rational, serialized as `"p/q"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactRatio(pub BigRational);

impl ExactRatio {
    pub fn from_f64(x: f64) -> Option<Self> {
        exact::rational(x).map(ExactRatio)
    }
}

impl fmt::Display for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for ExactRatio {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScheduleError::Parse {
            what: "ratio",
            input: s.to_string(),
        };
        let s = s.trim();
        if let Ok(r) = BigRational::from_str(s) {
            return Ok(ExactRatio(r));
        }
        let x: f64 = s.parse().map_err(|_| err())?;
        ExactRatio::from_f64(x).ok_or_else(err)
    }
}

impl Serialize for ExactRatio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ExactRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A rate of divergence `θ: ℕ → ℕ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Theta {
    Identity,
    Constant {
        value: u64,
    },
    /// `θ(N) = ⌈ratio·N⌉`, evaluated exactly.
    Linear {
        ratio: ExactRatio,
    },
}

impl Theta {
    pub fn linear(ratio: BigRational) -> Self {
        Theta::Linear {
            ratio: ExactRatio(ratio),
        }
    }

    pub fn eval(&self, n: u64) -> Result<u64, ScheduleError> {
        match self {
            Theta::Identity => Ok(n),
            Theta::Constant { value } => Ok(*value),
            Theta::Linear { ratio } => exact::ceil_u64(&(&ratio.0 * exact::integer(n))).ok_or(ScheduleError::Overflow),
        }
    }
}

/// Accepts `identity`, `const:M`, `linear:P/Q` (or a decimal).
impl FromStr for Theta {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScheduleError::Parse {
            what: "theta",
            input: s.to_string(),
        };
        let s = s.trim();
        match s.split_once(':') {
            None if s == "identity" => Ok(Theta::Identity),
            Some(("const", v)) => Ok(Theta::Constant {
                value: v.trim().parse().map_err(|_| err())?,
            }),
            Some(("linear", v)) => {
                let ratio: ExactRatio = v.parse().map_err(|_| err())?;
                if ratio.0.is_negative() {
                    return Err(err());
                }
                Ok(Theta::Linear { ratio })
            }
            _ => Err(err()),
        }
    }
}

/// A Cauchy modulus `γ: (0, ∞) → ℕ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gamma {
    Constant {
        value: u64,
    },
    /// Least `m ≥ 0` with `total·r^(m+1) ≤ ε`: the exact tail of a series whose
    /// `j`-th term is `total·(1 − r)·r^j`.
    Geometric {
        total: ExactRatio,
        r: ExactRatio,
    },
}

impl Gamma {
    pub fn zero() -> Self {
        Gamma::Constant { value: 0 }
    }

    pub fn eval_f64(&self, eps: f64) -> Result<u64, ScheduleError> {
        let e = exact::rational(eps).ok_or_else(|| ScheduleError::NonPositiveEpsilon(eps.to_string()))?;
        self.eval(&e)
    }

    pub fn eval(&self, eps: &BigRational) -> Result<u64, ScheduleError> {
        if !exact::is_positive(eps) {
            return Err(ScheduleError::NonPositiveEpsilon(eps.to_string()));
        }
        match self {
            Gamma::Constant { value } => Ok(*value),
            Gamma::Geometric { total, r } => Ok(geometric_tail_index(&total.0, &r.0, eps)),
        }
    }
}

fn geometric_tail_index(total: &BigRational, r: &BigRational, eps: &BigRational) -> u64 {
    if total.is_zero() || total <= eps {
        return 0;
    }
    let fits = |m: u64| -> bool {
        let exp = i32::try_from(m + 1).unwrap_or(i32::MAX);
        total * r.pow(exp) <= *eps
    };
    // float estimate, then exact correction in both directions
    let (t, rf, e) = (
        total.to_f64().unwrap_or(f64::MAX),
        r.to_f64().unwrap_or(0.5),
        eps.to_f64().unwrap_or(0.0),
    );
    let guess = ((e / t).ln() / rf.ln() - 1.0).ceil();
    let mut m = if guess.is_finite() && guess > 0.0 {
        guess.min(1e9) as u64
    } else {
        0
    };
    while m > 0 && fits(m - 1) {
        m -= 1;
    }
    while !fits(m) {
        m += 1;
    }
    m
}

/// Accepts `zero`, `const:M`, `geometric:TOTAL,R`.
impl FromStr for Gamma {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ScheduleError::Parse {
            what: "gamma",
            input: s.to_string(),
        };
        let s = s.trim();
        match s.split_once(':') {
            None if s == "zero" => Ok(Gamma::zero()),
            Some(("const", v)) => Ok(Gamma::Constant {
                value: v.trim().parse().map_err(|_| err())?,
            }),
            Some(("geometric", v)) => {
                let (total, r) = v.split_once(',').ok_or_else(err)?;
                let total: ExactRatio = total.parse()?;
                let r: ExactRatio = r.parse()?;
                if total.0.is_negative() || !exact::is_positive(&r.0) || r.0 >= exact::one() {
                    return Err(err());
                }
                Ok(Gamma::Geometric { total, r })
            }
            _ => Err(err()),
        }
    }
}

/// How the step sizes `t_n` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepRule {
    Constant {
        t: f64,
    },
    /// `t′_n = 1 − (1 − t_n)/(1 − k)` for the base schedule's `t_n`.
    Reduced {
        base: Box<StepRule>,
        k: f64,
    },
}

impl StepRule {
    pub fn t(&self, n: u64) -> f64 {
        match self {
            StepRule::Constant { t } => *t,
            StepRule::Reduced { base, k } => 1.0 - (1.0 - base.t(n)) / (1.0 - k),
        }
    }
}

/// The step sequence `(t_n)`, the floor `k` it is measured against, and `θ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSchedule {
    rule: StepRule,
    k_floor: f64,
    theta: Theta,
}

impl StepSchedule {
    pub fn new(rule: StepRule, k_floor: f64, theta: Theta) -> Result<Self, ScheduleError> {
        if !(0.0..1.0).contains(&k_floor) {
            return Err(ScheduleError::InvalidK { k: k_floor });
        }
        Ok(StepSchedule { rule, k_floor, theta })
    }

    pub fn t(&self, n: u64) -> f64 {
        self.rule.t(n)
    }

    pub fn rule(&self) -> &StepRule {
        &self.rule
    }

    pub fn k_floor(&self) -> f64 {
        self.k_floor
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn theta_at(&self, n: u64) -> Result<u64, ScheduleError> {
        self.theta.eval(n)
    }

    /// Replaces `θ`; used to exercise the validators with a wrong modulus.
    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.theta = theta;
        self
    }

    /// `(t_n − k)(1 − t_n)`, the `n`-th term of the divergent series.
    pub fn term(&self, n: u64) -> f64 {
        let t = self.t(n);
        (t - self.k_floor) * (1.0 - t)
    }
}

/// `t_n ≡ t` with `θ(N) = ⌈N/((t − k)(1 − t))⌉`, computed on the exact
/// rational values of `t` and `k`.
pub fn constant_step(t: f64, k: f64) -> Result<StepSchedule, ScheduleError> {
    if !(0.0..1.0).contains(&k) {
        return Err(ScheduleError::InvalidK { k });
    }
    if !(t > k && t < 1.0) {
        return Err(ScheduleError::StepOutOfRange { t, k });
    }
    let (tr, kr) = (exact::rational(t).unwrap(), exact::rational(k).unwrap());
    let term = (&tr - &kr) * (exact::one() - &tr);
    let theta = Theta::linear(exact::one() / term);
    StepSchedule::new(StepRule::Constant { t }, k, theta)
}

/// `t′_n := 1 − (1 − t_n)/(1 − k)` with `θ` unchanged and floor 0. Since
/// `t′_n(1 − t′_n) = (t_n − k)(1 − t_n)/(1 − k)²`, the old `θ` stays valid.
pub fn reduce_step_schedule(s: &StepSchedule, k: f64) -> Result<StepSchedule, ScheduleError> {
    if !(0.0..1.0).contains(&k) {
        return Err(ScheduleError::InvalidK { k });
    }
    if s.k_floor != k {
        return Err(ScheduleError::KFloorMismatch {
            schedule: s.k_floor,
            requested: k,
        });
    }
    if k == 0.0 {
        return Ok(s.clone());
    }
    StepSchedule::new(
        StepRule::Reduced {
            base: Box::new(s.rule.clone()),
            k,
        },
        0.0,
        s.theta.clone(),
    )
}

/// How the weights `λ^(n)` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MixRule {
    Constant {
        weights: Vec<f64>,
    },
    /// `λ_i^(n) = limit[i] + c[i]·rⁿ`.
    Geometric {
        limit: Vec<f64>,
        c: Vec<f64>,
        r: f64,
    },
}

/// Mixing weights with lower bound `a` and Cauchy modulus `γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixSchedule {
    rule: MixRule,
    a: f64,
    gamma: Gamma,
}

impl MixSchedule {
    pub fn n_maps(&self) -> usize {
        match &self.rule {
            MixRule::Constant { weights } => weights.len(),
            MixRule::Geometric { limit, .. } => limit.len(),
        }
    }

    pub fn rule(&self) -> &MixRule {
        &self.rule
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn with_gamma(mut self, gamma: Gamma) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn lambda(&self, i: usize, n: u64) -> f64 {
        match &self.rule {
            MixRule::Constant { weights } => weights[i],
            MixRule::Geometric { limit, c, r } => limit[i] + c[i] * geometric_power(*r, n),
        }
    }

    pub fn weights(&self, n: u64) -> Vec<f64> {
        (0..self.n_maps()).map(|i| self.lambda(i, n)).collect()
    }

    /// `Σ_i |λ_i^(j+1) − λ_i^(j)|`.
    pub fn variation(&self, j: u64) -> f64 {
        (0..self.n_maps())
            .map(|i| (self.lambda(i, j + 1) - self.lambda(i, j)).abs())
            .sum()
    }
}

fn geometric_power(r: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(e) => r.powi(e),
        Err(_) => 0.0,
    }
}

fn check_weight_vector(weights: &[f64], what: &str) -> Result<(), ScheduleError> {
    if weights.is_empty() {
        return Err(ScheduleError::InvalidWeights(format!("{what} is empty")));
    }
    if weights.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
        return Err(ScheduleError::InvalidWeights(format!(
            "{what} has an entry outside (0, 1]"
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > crate::operators::WEIGHT_SUM_TOLERANCE {
        return Err(ScheduleError::InvalidWeights(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Constant weights: `γ ≡ 0` and `a = min(weights)`.
pub fn constant_mix(weights: &[f64]) -> Result<MixSchedule, ScheduleError> {
    check_weight_vector(weights, "weights")?;
    let a = weights.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MixSchedule {
        rule: MixRule::Constant {
            weights: weights.to_vec(),
        },
        a,
        gamma: Gamma::zero(),
    })
}

/// `λ_i^(n) = limit[i] + c[i]·rⁿ` with `Σ c = 0`. The increments sum to
/// `(Σ|c_i|)(1 − r)r^j`, so the tail past `m` is `(Σ|c_i|)·r^(m+1)`.
pub fn geometric_mix(limit: &[f64], c: &[f64], r: f64) -> Result<MixSchedule, ScheduleError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ScheduleError::InvalidRatio { r });
    }
    if limit.len() != c.len() {
        return Err(ScheduleError::InvalidWeights(format!(
            "{} limits but {} offsets",
            limit.len(),
            c.len()
        )));
    }
    check_weight_vector(limit, "limit")?;
    let c_sum: f64 = c.iter().sum();
    if c_sum.abs() > crate::operators::WEIGHT_SUM_TOLERANCE || c.iter().any(|x| !x.is_finite()) {
        return Err(ScheduleError::InvalidWeights(format!(
            "offsets sum to {c_sum}, expected 0"
        )));
    }
    let start: Vec<f64> = limit.iter().zip(c).map(|(l, ci)| l + ci).collect();
    if start.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
        return Err(ScheduleError::InvalidWeights("initial weights leave (0, 1]".into()));
    }
    // λ_i^(n) moves monotonically from limit+c to limit
    let a = limit
        .iter()
        .zip(&start)
        .map(|(l, s)| l.min(*s))
        .fold(f64::INFINITY, f64::min);
    let total = c
        .iter()
        .map(|x| exact::rational(x.abs()).unwrap())
        .fold(BigRational::zero(), |acc, x| acc + x);
    Ok(MixSchedule {
        rule: MixRule::Geometric {
            limit: limit.to_vec(),
            c: c.to_vec(),
            r,
        },
        a,
        gamma: Gamma::Geometric {
            total: ExactRatio(total),
            r: ExactRatio::from_f64(r).unwrap(),
        },
    })
}

/// Checks `Σ_{n=0}^{θ(N)} (t_n − k)(1 − t_n) ≥ N` for `N = 0..=n_max`.
pub fn validate_theta(s: &StepSchedule, n_max: u64, slack: f64) -> CheckReport {
    let mut report = CheckReport::new("theta_divergence", slack);
    let mut prefix: Vec<f64> = Vec::new();
    let mut running = 0.0;
    for target in 0..=n_max {
        let end = match s.theta_at(target) {
            Ok(end) => end,
            Err(e) => {
                report.record_failure(target, target as f64, f64::NAN, e.to_string());
                continue;
            }
        };
        while prefix.len() as u64 <= end {
            running += s.term(prefix.len() as u64);
            prefix.push(running);
        }
        let sum = prefix[end as usize];
        report.record_with(target, target as f64, sum, || Some(format!("theta({target}) = {end}")));
    }
    report
}

/// Checks `k_floor ≤ t_n ≤ 1` for `n < n_max`.
pub fn validate_step_range(s: &StepSchedule, n_max: u64) -> CheckReport {
    let mut report = CheckReport::new("step_range", 0.0);
    for n in 0..n_max {
        let t = s.t(n);
        report.record(n, s.k_floor - t, 0.0);
        report.record(n, t, 1.0);
    }
    report
}

/// Checks the Cauchy-modulus windows for each `ε` and every window length
/// `1..=n_max`.
pub fn validate_gamma(m: &MixSchedule, eps_list: &[f64], n_max: u64, slack: f64) -> CheckReport {
    let mut report = CheckReport::new("gamma_cauchy", slack);
    for &eps in eps_list {
        let start = match m.gamma.eval_f64(eps) {
            Ok(g) => g,
            Err(e) => {
                report.record_failure(0, f64::NAN, eps, e.to_string());
                continue;
            }
        };
        let mut window = 0.0;
        for len in 1..=n_max {
            window += m.variation(start + len);
            report.record_with(start + len, window, eps, || {
                Some(format!("eps = {eps}, gamma = {start}, window length {len}"))
            });
        }
    }
    report
}

/// Checks that every `λ^(n)`, `n < n_max`, sums to one and stays `≥ a`.
pub fn validate_mix_weights(m: &MixSchedule, n_max: u64) -> CheckReport {
    let mut report = CheckReport::new("mix_weights", crate::operators::WEIGHT_SUM_TOLERANCE);
    for n in 0..n_max {
        let w = m.weights(n);
        let sum: f64 = w.iter().sum();
        report.record(n, (sum - 1.0).abs(), 0.0);
        for x in w {
            report.record(n, m.a, x);
        }
    }
    report
}
