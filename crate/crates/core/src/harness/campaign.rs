use std::path::Path;

use rayon::prelude::*;

use super::generate::{generate_instance, GeneratedShape};
use super::report::{CertificationReport, IndividualRecord, InstanceReport, LiminfRecord, RateRecord, Status};
use super::{ConfigError, ExperimentConfig, ExplicitInstance, GeneratedGroup, InstanceSpec};
use crate::check::CheckReport;
use crate::engine::{self, EngineError, ProblemInstance, Trace};
use crate::operators::check_kpsc;
use crate::rates::{self, RateError, RateInputs};
use crate::rng::{keyed_rng, PairSample};
use crate::schedules::{
    constant_mix, constant_step, geometric_mix, validate_gamma, validate_mix_weights, validate_step_range,
    validate_theta, MixRule, MixSchedule,
};
use crate::vector::Vector;

/// Tolerance for the reduction and recurrence comparisons.
const REPRODUCTION_TOL: f64 = 1e-12;
/// Steps over which original and reduced iterates are compared.
const AGREEMENT_STEPS: u64 = 100;
/// Halvings tried when fitting a generated instance into the step budget.
const MAX_HALVINGS: u32 = 64;

/// An instance ready for certification, with the grids it is certified on.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltInstance {
    pub index: usize,
    pub label: String,
    pub scale: f64,
    pub instance: ProblemInstance,
    pub eps_grid: Vec<f64>,
    pub individual_eps_grid: Vec<f64>,
    pub n_max: u64,
}

enum Plan<'a> {
    Explicit(usize, &'a ExplicitInstance),
    Generated(usize, usize, &'a GeneratedGroup),
}

fn plans(config: &ExperimentConfig) -> Vec<Plan<'_>> {
    let mut out = Vec::new();
    for spec in &config.instances {
        match spec {
            InstanceSpec::Explicit(e) => out.push(Plan::Explicit(out.len(), e)),
            InstanceSpec::Generated(g) => {
                for j in 0..g.count {
                    out.push(Plan::Generated(out.len(), j, g));
                }
            }
        }
    }
    out
}

/// Largest index any certificate needs: `Φ`, `Δ` on the tolerance grid,
/// and `Φ′`, `Φ″` on the individual grid.
pub fn required_steps(
    inst: &ProblemInstance,
    eps_grid: &[f64],
    individual_eps_grid: &[f64],
    m_grid: &[u64],
) -> Result<u64, RateError> {
    let r = inst.rate_inputs()?;
    let mut need = 0;
    for &eps in eps_grid {
        need = need.max(r.phi(eps)?);
        for &m in m_grid {
            need = need.max(r.delta(eps, m)?);
        }
    }
    for &eps in individual_eps_grid {
        need = need.max(r.phi_prime(eps)?).max(r.phi_double_prime(eps)?);
    }
    Ok(need)
}

fn n_max_for(config: &ExperimentConfig, need: u64) -> u64 {
    need.saturating_add(config.n_max_margin)
}

fn build_explicit(config: &ExperimentConfig, index: usize, e: &ExplicitInstance) -> Result<BuiltInstance, ConfigError> {
    let wrap = |source: EngineError| ConfigError::Instance { index, source };
    let x0 = Vector::new(e.x0.clone()).map_err(|err| ConfigError::Invalid(format!("instance {index}: x0: {err}")))?;
    let mut steps = constant_step(e.step.t(e.k), e.k).map_err(|s| wrap(s.into()))?;
    if let Some(theta) = &e.theta {
        steps = steps.with_theta(theta.clone());
    }
    let mut mix: MixSchedule = match &e.mix {
        MixRule::Constant { weights } => constant_mix(weights),
        MixRule::Geometric { limit, c, r } => geometric_mix(limit, c, *r),
    }
    .map_err(|s| wrap(s.into()))?;
    if let Some(gamma) = &e.gamma {
        mix = mix.with_gamma(gamma.clone());
    }
    let instance = match e.b {
        Some(b) => ProblemInstance::new(e.family.clone(), e.k, x0, b, steps, mix),
        None => ProblemInstance::with_minimal_b(e.family.clone(), e.k, x0, steps, mix),
    }
    .map_err(wrap)?;
    let eps_grid = e.eps_grid.clone().unwrap_or_else(|| config.eps_grid.clone());
    let individual_eps_grid = e
        .individual_eps_grid
        .clone()
        .unwrap_or_else(|| config.individual_eps_grid.clone());
    let need = required_steps(&instance, &eps_grid, &individual_eps_grid, &config.liminf_m_grid)
        .map_err(|source| ConfigError::Rate { index, source })?;
    let n_max = n_max_for(config, need);
    if n_max > config.max_steps {
        return Err(ConfigError::Invalid(format!(
            "instance {index}: certificates need {n_max} steps, above max_steps = {}",
            config.max_steps
        )));
    }
    Ok(BuiltInstance {
        index,
        label: e.label.clone().unwrap_or_else(|| format!("explicit-{index}")),
        scale: 1.0,
        instance,
        eps_grid,
        individual_eps_grid,
        n_max,
    })
}

/// Generates instance `j` of a group, halving its scale until every bound
/// plus the margin fits in `max_steps`.
fn build_generated(
    config: &ExperimentConfig,
    index: usize,
    j: usize,
    g: &GeneratedGroup,
) -> Result<BuiltInstance, ConfigError> {
    let mut rng = keyed_rng(config.seed, index as u64, "shape");
    use rand::seq::SliceRandom;
    let d = *g.dimensions.choose(&mut rng).expect("validated");
    let n = *g.family_sizes.choose(&mut rng).expect("validated");
    let k = g.k_values[j % g.k_values.len()].resolve()?;
    let shape = GeneratedShape {
        mix: g.mixes[j % g.mixes.len()],
        step: g.step,
        blocks: g.blocks.clone(),
    };
    let eps_grid = g.eps_grid.clone().unwrap_or_else(|| config.eps_grid.clone());
    let individual_eps_grid = g
        .individual_eps_grid
        .clone()
        .unwrap_or_else(|| config.individual_eps_grid.clone());
    let mut last = String::new();
    for halvings in 0..MAX_HALVINGS {
        let scale = 0.5f64.powi(halvings as i32);
        let instance = generate_instance(config.seed, index as u64, d, n, k, &shape, scale)
            .map_err(|source| ConfigError::Instance { index, source })?;
        match required_steps(&instance, &eps_grid, &individual_eps_grid, &config.liminf_m_grid) {
            Ok(need) if n_max_for(config, need) <= config.max_steps => {
                let prefix = g.label.as_deref().unwrap_or("generated");
                return Ok(BuiltInstance {
                    index,
                    label: format!("{prefix}-{j}"),
                    scale,
                    instance,
                    eps_grid,
                    individual_eps_grid,
                    n_max: n_max_for(config, need),
                });
            }
            Ok(need) => last = format!("{need} steps at scale {scale}"),
            Err(e) => last = e.to_string(),
        }
    }
    Err(ConfigError::Invalid(format!(
        "instance {index}: no scale fits max_steps = {} ({last})",
        config.max_steps
    )))
}

/// Builds every instance of the config in order.
pub fn build_instances(config: &ExperimentConfig) -> Result<Vec<BuiltInstance>, ConfigError> {
    plans(config)
        .par_iter()
        .map(|plan| match plan {
            Plan::Explicit(index, e) => build_explicit(config, *index, e),
            Plan::Generated(index, j, g) => build_generated(config, *index, *j, g),
        })
        .collect()
}

/// Builds and certifies every instance. Instances run in parallel; the
/// report lists them in config order.
pub fn run_campaign(config: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<CertificationReport, ConfigError> {
    config.validate()?;
    let built = build_instances(config)?;
    let reports = built
        .par_iter()
        .map(|b| certify_instance(b, config, trace_dir))
        .collect();
    Ok(CertificationReport::aggregate(config.seed, reports))
}

fn ratio(hit: Option<u64>, bound: u64) -> Option<f64> {
    match hit {
        Some(h) if bound > 0 => Some(h as f64 / bound as f64),
        _ => None,
    }
}

struct Certification {
    checks: Vec<CheckReport>,
    rates: Vec<RateRecord>,
    individual: Vec<IndividualRecord>,
    liminf: Vec<LiminfRecord>,
    final_distance: Option<f64>,
}

/// Runs every validator and check on one instance. Checks of the nonexpansive
/// theory run on the reduced instance when `k > 0`.
pub fn certify_instance(built: &BuiltInstance, config: &ExperimentConfig, trace_dir: Option<&Path>) -> InstanceReport {
    let inst = &built.instance;
    let mut report = InstanceReport {
        index: built.index,
        label: built.label.clone(),
        status: Status::Fail,
        error: None,
        scale: built.scale,
        dim: inst.dim(),
        n_maps: inst.n_maps(),
        k: inst.k(),
        a: inst.mix().a(),
        b: inst.b(),
        k_ceiling: rates::k_ceiling(inst.steps().theta()).ok(),
        n_max: built.n_max,
        final_distance: None,
        instance: serde_json::to_value(inst).ok(),
        rates: Vec::new(),
        individual_rates: Vec::new(),
        liminf: Vec::new(),
        checks: Vec::new(),
    };
    match certify(built, config, trace_dir) {
        Ok(c) => {
            report.checks = c.checks;
            report.rates = c.rates;
            report.individual_rates = c.individual;
            report.liminf = c.liminf;
            report.final_distance = c.final_distance;
            if report.violations() == 0 {
                report.status = Status::Pass;
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

fn certify(
    built: &BuiltInstance,
    config: &ExperimentConfig,
    trace_dir: Option<&Path>,
) -> Result<Certification, EngineError> {
    let inst = &built.instance;
    let slack = config.slack;
    let n_max = built.n_max;
    let rates = inst.rate_inputs()?;
    let mut checks = Vec::new();

    let mut ceiling = CheckReport::new("k_ceiling", 0.0);
    ceiling.record(0, inst.k(), rates.k_ceiling()? + 1e-12);
    checks.push(ceiling);

    let pairs = PairSample::draw(
        config.seed ^ built.index as u64,
        inst.dim(),
        2.0 * inst.b(),
        config.operator_pairs,
    );
    for (i, op) in inst.family().iter().enumerate() {
        let mut r = check_kpsc(op, op.k(), &pairs.pairs, slack)?;
        r.check = format!("kpsc_member_{}", i + 1);
        checks.push(r);
    }

    checks.extend(schedule_checks(built, &rates, slack));

    let trace = engine::iterate(inst, n_max)?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
        let file = std::fs::File::create(dir.join(format!("trace_{:04}.csv", built.index)))?;
        trace.to_csv().write(std::io::BufWriter::new(file))?;
    }
    checks.push(engine::check_recurrence(&trace, inst, REPRODUCTION_TOL));

    let reduced;
    let reduced_trace;
    let (lemma_inst, lemma_trace): (&ProblemInstance, &Trace) = if inst.k() > 0.0 {
        reduced = engine::reduce_instance(inst)?;
        reduced_trace = engine::iterate(&reduced, n_max)?;
        checks.push(engine::check_trace_agreement(
            &trace,
            &reduced_trace,
            AGREEMENT_STEPS.min(n_max),
            REPRODUCTION_TOL,
        ));
        checks.push(engine::residual_relation(
            &trace,
            &reduced_trace,
            inst.k(),
            REPRODUCTION_TOL,
        ));
        (&reduced, &reduced_trace)
    } else {
        (inst, &trace)
    };

    checks.push(engine::check_step_inequality(lemma_trace, lemma_inst, slack)?);
    checks.push(engine::check_fejer(lemma_trace, lemma_inst, slack)?);
    checks.extend(engine::check_chain_inequalities(lemma_trace, lemma_inst, slack)?);
    checks.push(engine::check_summed_inequality(lemma_trace, lemma_inst, slack)?);
    checks.push(engine::check_three_b_bound(lemma_trace, lemma_inst, slack)?);
    checks.push(engine::check_psi(lemma_trace, lemma_inst, slack)?);
    checks.push(engine::check_preti_trace(lemma_trace, lemma_inst, slack)?);

    let mut liminf = Vec::new();
    let mut witness_report = CheckReport::new("liminf_witness", slack);
    for &eps in &built.eps_grid {
        for &m in &config.liminf_m_grid {
            let delta = rates.delta(eps, m)?;
            let witness = match engine::liminf_witness(lemma_trace, eps, m, lemma_inst, slack) {
                Ok(n) => {
                    witness_report.record(n, lemma_trace.res_a()[n as usize], eps);
                    Some(n)
                }
                Err(e) => {
                    witness_report.record_failure(m, f64::NAN, eps, e.to_string());
                    None
                }
            };
            liminf.push(LiminfRecord { eps, m, delta, witness });
        }
    }
    checks.push(witness_report);

    let mut rate_records = Vec::new();
    for &eps in &built.eps_grid {
        let phi = rates.phi(eps)?;
        checks.push(engine::check_rate_a(lemma_trace, eps, phi, slack));
        let first_hit = lemma_trace.first_hit_a(eps);
        rate_records.push(RateRecord {
            eps,
            phi,
            first_hit,
            tightness: ratio(first_hit, phi),
            vacuous: first_hit == Some(0),
        });
    }

    let mut individual = Vec::new();
    for &eps in &built.individual_eps_grid {
        let phi_prime = rates.phi_prime(eps)?;
        let phi_double_prime = rates.phi_double_prime(eps)?;
        checks.push(engine::check_rate_t(
            lemma_trace,
            eps,
            phi_prime,
            "rate_phi_prime",
            slack,
        ));
        checks.push(engine::check_rate_t(
            &trace,
            eps,
            phi_double_prime,
            "rate_phi_double_prime",
            slack,
        ));
        let first_hit = trace.first_hit_t(eps);
        individual.push(IndividualRecord {
            eps,
            p_threshold: rates::p_threshold(rates.a, rates.b, eps)?,
            phi_prime,
            phi_double_prime,
            first_hit,
            tightness: ratio(first_hit, phi_double_prime),
            vacuous: first_hit == Some(0),
        });
    }

    Ok(Certification {
        checks,
        rates: rate_records,
        individual,
        liminf,
        final_distance: trace.dist_p().last().copied(),
    })
}

/// Validators of `θ`, `t_n`, `γ` and `λ^(n)` over the iterated range.
fn schedule_checks(built: &BuiltInstance, rates: &RateInputs, slack: f64) -> Vec<CheckReport> {
    let inst = &built.instance;
    let n_max = built.n_max;
    // every θ argument whose value lies inside the trace
    let mut targets = 0;
    while targets < n_max && matches!(inst.steps().theta_at(targets + 1), Ok(v) if v <= n_max) {
        targets += 1;
    }
    let mut gamma_args: Vec<f64> = built.eps_grid.iter().map(|e| e / (6.0 * rates.b)).collect();
    for &eps in &built.individual_eps_grid {
        for e in [eps, (1.0 - rates.k) * eps] {
            if let Ok(p) = rates::p_threshold(rates.a, rates.b, e) {
                gamma_args.push(p / (6.0 * rates.b));
            }
        }
    }
    vec![
        validate_theta(inst.steps(), targets, slack),
        validate_step_range(inst.steps(), n_max),
        validate_gamma(inst.mix(), &gamma_args, n_max, slack),
        validate_mix_weights(inst.mix(), n_max),
    ]
}

#[cfg(test)]
mod tests {
    use super::super::ExperimentConfig;
    use super::*;

    fn closed_form(theta: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
                "seed": 1,
                "eps_grid": [1.0, 0.5, 0.1],
                "individual_eps_grid": [1.0, 0.5],
                "instances": [{{
                    "source": "explicit",
                    "label": "negation",
                    "family": [{{"kind": "scaling", "center": [0.0], "factor": -1.0}}],
                    "x0": [1.0],
                    "b": 1.0,
                    "step": {{"type": "constant", "t": 0.75}},
                    "mix": {{"type": "constant", "weights": [1.0]}}
                    {theta}
                }}]
            }}"#
        );
        ExperimentConfig::from_json(&text).unwrap()
    }

    #[test]
    fn closed_form_instance_passes() {
        let report = run_campaign(&closed_form(""), None).unwrap();
        assert_eq!(report.status, Status::Pass, "{}", report.to_json());
        let inst = &report.instances[0];
        let half = inst.rates.iter().find(|r| r.eps == 0.5).unwrap();
        assert_eq!((half.phi, half.first_hit), (91, Some(2)));
        assert_eq!(inst.liminf[0].witness, Some(1));
    }

    #[test]
    fn corrupted_theta_fails_validation() {
        let config = closed_form(r#", "theta": {"type": "constant", "value": 0}"#);
        let report = run_campaign(&config, None).unwrap();
        assert_eq!(report.status, Status::Fail);
        let theta = report.instances[0].check("theta_divergence").unwrap();
        assert!(theta.violations > 0);
        assert_eq!(theta.examples[0].n, 1);
    }

    #[test]
    fn empty_campaign_passes() {
        let report = run_campaign(&ExperimentConfig::new(3), None).unwrap();
        assert_eq!(report.status, Status::Pass);
        assert_eq!(report.instance_count, 0);
        assert!(report.to_json().contains("\"status\": \"pass\""));
    }

    #[test]
    fn oversized_explicit_instance_is_a_config_error() {
        let mut config = closed_form("");
        config.max_steps = 50;
        assert!(matches!(run_campaign(&config, None), Err(ConfigError::Invalid(_))));
    }
}
