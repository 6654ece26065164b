//! Step-by-step checks of the inequalities behind the rates. Those that only
//! hold for nonexpansive families refuse instances with `k > 0`; run them on
//! [`super::reduce_instance`] instead.

use super::{EngineError, ProblemInstance, Trace};
use crate::check::CheckReport;
use crate::rates;
use crate::vector::Vector;

/// Recomputes `x_{n+1} = t_n x_n + (1 − t_n) A_n x_n` from each record.
pub fn check_recurrence(trace: &Trace, inst: &ProblemInstance, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("recurrence", tol);
    for n in 0..trace.len().saturating_sub(1) {
        let x = trace.x(n);
        let ax = inst.combine(n, &inst.images(&x));
        let next = x.blend(trace.record(n).t, &ax).expect("trace dimension");
        let gap = next.distance(&trace.x(n + 1)).expect("trace dimension");
        report.record(n, gap, 0.0);
    }
    report
}

/// `t_n(1 − t_n)‖x_n − A_n x_n‖² ≤ ‖x_n − p‖² − ‖x_{n+1} − p‖²`.
pub fn check_step_inequality(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    inst.require_nonexpansive()?;
    let mut report = CheckReport::new("step_inequality", slack);
    let p = inst.fixed_point();
    let mut dist_sq = trace.x(0).distance_sq(p)?;
    for n in 0..trace.len().saturating_sub(1) {
        let r = trace.record(n);
        let next_sq = trace.x(n + 1).distance_sq(p)?;
        report.record(n, r.t * (1.0 - r.t) * r.res_a * r.res_a, dist_sq - next_sq);
        dist_sq = next_sq;
    }
    Ok(report)
}

/// `‖x_n − p‖` is nonincreasing and bounded by `b`.
pub fn check_fejer(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    inst.require_nonexpansive()?;
    let mut report = CheckReport::new("fejer_monotone", slack);
    let d = trace.dist_p();
    for (n, &dn) in d.iter().enumerate() {
        report.record_with(n as u64, dn, inst.b(), || Some("distance exceeds b".into()));
        if let Some(&next) = d.get(n + 1) {
            report.record_with(n as u64, next, dn, || Some("distance increased".into()));
        }
    }
    Ok(report)
}

/// The four chain inequalities relating consecutive residuals through the
/// cross term `‖A_{n+1}x_{n+1} − A_n x_{n+1}‖`. One report per item.
pub fn check_chain_inequalities(
    trace: &Trace,
    inst: &ProblemInstance,
    slack: f64,
) -> Result<Vec<CheckReport>, EngineError> {
    inst.require_nonexpansive()?;
    let mut reports: Vec<CheckReport> = (1..=4)
        .map(|i| CheckReport::new(format!("chain_item_{i}"), slack))
        .collect();
    if trace.is_empty() {
        return Ok(reports);
    }
    let mut x = trace.x(0);
    let mut images = inst.images(&x);
    for n in 0..trace.len() - 1 {
        let (cur, next) = (trace.record(n), trace.record(n + 1));
        let t = cur.t;
        let ax = inst.combine(n, &images);
        let x1 = trace.x(n + 1);
        let images1 = inst.images(&x1);
        let a1x1 = inst.combine(n + 1, &images1);
        let a0x1 = inst.combine(n, &images1);
        let cross = a1x1.distance(&a0x1)?;
        let (r0, r1) = (cur.res_a, next.res_a);

        reports[0].record(n, x.distance(&a1x1)?, (1.0 - t) * r0 + r1);
        reports[1].record(n, ax.distance(&a1x1)?, (1.0 - t) * r0 + cross);
        reports[2].record(n, r1, (1.0 - t) * r0 + t * r1 + (1.0 - t) * cross);
        reports[3].record(n, r1, r0 + cross);

        x = x1;
        images = images1;
    }
    Ok(reports)
}

/// `res_A(n + m) ≤ res_A(n) + 3b·Σ_{j=n}^{n+m−1} Σ_i |λ_i^(j+1) − λ_i^(j)|`
/// for every pair in the trace.
///
/// With `V(n)` the prefix sum of the variations and `g(n) = res_A(n) − 3b·V(n)`,
/// all pairs ending at `e` hold iff `g(e) ≤ min_{s ≤ e} g(s)`, so one pass with
/// a running minimum covers them; each end index is one evaluation against
/// its worst start.
pub fn check_summed_inequality(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    inst.require_nonexpansive()?;
    let mut report = CheckReport::new("summed_inequality", slack)
        .with_note("all (n, m) pairs; evaluations count end indices against their tightest start");
    let three_b = 3.0 * inst.b();
    let res = trace.res_a();
    let mut v = 0.0;
    let mut best_start = 0u64;
    let mut best_g = f64::INFINITY;
    let mut v_at_best = 0.0;
    for (e, &r) in res.iter().enumerate() {
        let g = r - three_b * v;
        if g < best_g {
            best_g = g;
            best_start = e as u64;
            v_at_best = v;
        }
        let rhs = res[best_start as usize] + three_b * (v - v_at_best);
        report.record_with(e as u64, r, rhs, || Some(format!("start n = {best_start}")));
        v += inst.mix().variation(e as u64);
    }
    Ok(report)
}

/// `‖T_i x_n‖ ≤ 3b` for every member and step.
pub fn check_three_b_bound(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    inst.require_nonexpansive()?;
    let mut report = CheckReport::new("three_b_bound", slack);
    let bound = 3.0 * inst.b();
    for n in 0..trace.len() {
        for (i, img) in inst.images(&trace.x(n)).iter().enumerate() {
            report.record_with(n, img.norm(), bound, || Some(format!("member {}", i + 1)));
        }
    }
    Ok(report)
}

/// `Ψ = Σ_{n=m}^{M} t_n(1 − t_n)·res_A(n)²`; zero for an empty range.
pub fn psi_partial_sum(trace: &Trace, m: u64, last: u64) -> Result<f64, EngineError> {
    if m > last {
        return Ok(0.0);
    }
    if last >= trace.len() {
        return Err(EngineError::TraceTooShort {
            needed: last,
            len: trace.len(),
        });
    }
    Ok((m..=last)
        .map(|n| {
            let r = trace.record(n);
            r.t * (1.0 - r.t) * r.res_a * r.res_a
        })
        .sum())
}

/// `Ψ ≤ b²` over the whole trace.
pub fn check_psi(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    inst.require_nonexpansive()?;
    let mut report = CheckReport::new("psi_bound", slack);
    if !trace.is_empty() {
        let psi = psi_partial_sum(trace, 0, trace.len() - 1)?;
        report.record(trace.len() - 1, psi, inst.b() * inst.b());
    }
    Ok(report)
}

/// Least `N ∈ [m, Δ(ε, m)]` with `res_A(N) ≤ ε + slack`.
pub fn liminf_witness(trace: &Trace, eps: f64, m: u64, inst: &ProblemInstance, slack: f64) -> Result<u64, EngineError> {
    let delta = rates::delta(inst.b(), inst.steps().theta(), eps, m)?;
    if delta >= trace.len() {
        return Err(EngineError::TraceTooShort {
            needed: delta,
            len: trace.len(),
        });
    }
    (m..=delta)
        .find(|&n| trace.res_a()[n as usize] <= eps + slack)
        .ok_or(EngineError::WitnessNotFound { eps, m, delta })
}

/// If `‖z − p‖ ≤ b` and `‖z − A_n z‖ ≤ ε`, every member satisfies
/// `‖z − T_i z‖ ≤ h_{a,b}(ε)`. Unmet preconditions are counted as skipped.
pub fn check_preti(
    inst: &ProblemInstance,
    z: &Vector,
    n: u64,
    eps: f64,
    slack: f64,
) -> Result<CheckReport, EngineError> {
    let mut report = CheckReport::new("individual_residual", slack);
    preti_into(&mut report, inst, z, n, eps)?;
    Ok(report)
}

fn preti_into(
    report: &mut CheckReport,
    inst: &ProblemInstance,
    z: &Vector,
    n: u64,
    eps: f64,
) -> Result<(), EngineError> {
    inst.require_nonexpansive()?;
    let images = inst.images(z);
    let az = inst.combine(n, &images);
    if z.distance(inst.fixed_point())? > inst.b() || z.distance(&az)? > eps {
        report.skip();
        return Ok(());
    }
    let bound = rates::h(inst.mix().a(), inst.b(), eps)?;
    for (i, img) in images.iter().enumerate() {
        report.record_with(n, z.distance(img)?, bound, || Some(format!("member {}", i + 1)));
    }
    Ok(())
}

/// [`check_preti`] at every trace point with `ε = res_A(n)`.
pub fn check_preti_trace(trace: &Trace, inst: &ProblemInstance, slack: f64) -> Result<CheckReport, EngineError> {
    let mut report = CheckReport::new("individual_residual", slack);
    for n in 0..trace.len() {
        preti_into(&mut report, inst, &trace.x(n), n, trace.record(n).res_a)?;
    }
    Ok(report)
}

/// `res_A(n) ≤ ε` for every `n ∈ [from, end of trace]`.
pub fn check_rate_a(trace: &Trace, eps: f64, from: u64, slack: f64) -> CheckReport {
    let mut report = CheckReport::new(format!("rate_phi(eps={eps})"), slack);
    if from >= trace.len() {
        report.record_failure(
            from,
            f64::NAN,
            eps,
            format!("trace of length {} ends before the bound", trace.len()),
        );
    }
    for n in from..trace.len() {
        report.record(n, trace.res_a()[n as usize], eps);
    }
    report
}

/// `res_T[i](n) ≤ ε` for every member and every `n ∈ [from, end of trace]`.
pub fn check_rate_t(trace: &Trace, eps: f64, from: u64, name: &str, slack: f64) -> CheckReport {
    let mut report = CheckReport::new(format!("{name}(eps={eps})"), slack);
    if from >= trace.len() {
        report.record_failure(
            from,
            f64::NAN,
            eps,
            format!("trace of length {} ends before the bound", trace.len()),
        );
    }
    for n in from..trace.len() {
        for (i, r) in trace.record(n).res_t.iter().enumerate() {
            report.record_with(n, *r, eps, || Some(format!("member {}", i + 1)));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::iterate;
    use super::*;
    use crate::check::DEFAULT_SLACK;
    use crate::operators::Operator;
    use crate::schedules::{constant_mix, constant_step};

    #[test]
    fn recurrence_reproduces() {
        let inst = mixed(0.0);
        let tr = iterate(&inst, 300).unwrap();
        assert!(check_recurrence(&tr, &inst, 1e-12).passed());
    }

    #[test]
    fn step_inequality_is_equality_for_negation() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 40).unwrap();
        let r = check_step_inequality(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert!(r.passed());
        for n in 0..40u64 {
            let rec = tr.record(n);
            let lhs = 0.75 * 0.25 * rec.res_a * rec.res_a;
            let rhs = 0.75 * 4f64.powi(-(n as i32));
            assert!((lhs - rhs).abs() < 1e-14);
        }
        assert!(r.max_excess.unwrap().abs() < 1e-14);
    }

    #[test]
    fn checks_at_a_fixed_point_are_trivial() {
        let inst = ProblemInstance::new(
            vec![Operator::scaling(scalar(0.0), -1.0).unwrap()],
            0.0,
            scalar(0.0),
            1.0,
            constant_step(0.5, 0.0).unwrap(),
            constant_mix(&[1.0]).unwrap(),
        )
        .unwrap();
        let tr = iterate(&inst, 20).unwrap();
        assert!(tr.res_a().iter().all(|r| *r == 0.0));
        assert!(check_step_inequality(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
        assert!(check_fejer(&tr, &inst, 1e-12).unwrap().passed());
        for r in check_chain_inequalities(&tr, &inst, DEFAULT_SLACK).unwrap() {
            assert!(r.passed());
            assert_eq!(r.max_excess, Some(0.0));
        }
        assert_eq!(psi_partial_sum(&tr, 0, 20).unwrap(), 0.0);
        let pre = check_preti(&inst, &scalar(0.0), 0, 0.0, DEFAULT_SLACK).unwrap();
        assert_eq!(pre.max_excess, Some(0.0));
    }

    #[test]
    fn fejer_distances_halve() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 30).unwrap();
        assert!(check_fejer(&tr, &inst, 1e-12).unwrap().passed());
        for (n, d) in tr.dist_p().iter().enumerate() {
            assert_eq!(*d, 0.5f64.powi(n as i32));
        }
    }

    #[test]
    fn lemma_checks_refuse_strict_families() {
        let inst = minus_three();
        let tr = iterate(&inst, 5).unwrap();
        assert!(matches!(
            check_step_inequality(&tr, &inst, DEFAULT_SLACK),
            Err(EngineError::RequiresNonexpansive { .. })
        ));
        assert!(check_summed_inequality(&tr, &inst, DEFAULT_SLACK).is_err());
    }

    #[test]
    fn lemma_checks_hold_on_geometric_mix() {
        let inst = mixed(0.0);
        let tr = iterate(&inst, 500).unwrap();
        assert!(check_step_inequality(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
        assert!(check_fejer(&tr, &inst, 1e-12).unwrap().passed());
        for r in check_chain_inequalities(&tr, &inst, DEFAULT_SLACK).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
        assert!(check_summed_inequality(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
        assert!(check_three_b_bound(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
        assert!(check_psi(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
        let pre = check_preti_trace(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert!(pre.passed());
        assert_eq!(pre.evaluated, 501 * 3);
    }

    /// Brute force over all (n, m) pairs with n + m ≤ 200.
    #[test]
    fn summed_inequality_matches_brute_force() {
        let inst = mixed(0.0);
        let tr = iterate(&inst, 200).unwrap();
        let three_b = 3.0 * inst.b();
        let mut worst = f64::NEG_INFINITY;
        for n in 0..=200u64 {
            for m in 0..=(200 - n) {
                let var: f64 = (n..n + m).map(|j| inst.mix().variation(j)).sum();
                let excess = tr.res_a()[(n + m) as usize] - tr.res_a()[n as usize] - three_b * var;
                worst = worst.max(excess);
            }
        }
        let r = check_summed_inequality(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert!(worst <= DEFAULT_SLACK);
        assert!((r.max_excess.unwrap() - worst).abs() < 1e-12);
    }

    #[test]
    fn summed_inequality_detects_a_violation() {
        // residuals that increase with constant weights cannot pass
        let inst = negation(0.75);
        let mut tr = iterate(&inst, 10).unwrap();
        tr.corrupt_res_a(5, 10.0);
        let r = check_summed_inequality(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert_eq!(r.violations, 1);
        assert_eq!(r.examples[0].n, 5);
    }

    #[test]
    fn three_b_bound_on_negation() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 10).unwrap();
        let r = check_three_b_bound(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert!(r.passed());
        assert!(r.max_excess.unwrap() <= 1.0 - 3.0);
    }

    #[test]
    fn constant_mix_chain_item_four_is_monotonicity() {
        let inst = negation(0.3);
        let tr = iterate(&inst, 50).unwrap();
        let reports = check_chain_inequalities(&tr, &inst, DEFAULT_SLACK).unwrap();
        assert!(reports.iter().all(|r| r.passed()));
        assert!(tr.res_a().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn psi_examples() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 60).unwrap();
        assert_eq!(psi_partial_sum(&tr, 5, 4).unwrap(), 0.0);
        let psi = psi_partial_sum(&tr, 0, 60).unwrap();
        // geometric series (3/4)·Σ 4^{-n} → 1 from below
        assert!(psi <= 1.0 && 1.0 - psi < 1e-15);
        assert!(psi_partial_sum(&tr, 0, 61).is_err());
        assert!(check_psi(&tr, &inst, DEFAULT_SLACK).unwrap().passed());
    }

    #[test]
    fn liminf_witness_examples() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 30_000).unwrap();
        assert_eq!(rates::delta(1.0, inst.steps().theta(), 1.0, 0).unwrap(), 6);
        assert_eq!(liminf_witness(&tr, 1.0, 0, &inst, DEFAULT_SLACK).unwrap(), 1);
        assert_eq!(liminf_witness(&tr, 0.5, 0, &inst, DEFAULT_SLACK).unwrap(), 2);
        for m in [0, 3, 7] {
            let eps = tr.res_a()[m as usize];
            assert_eq!(liminf_witness(&tr, eps, m, &inst, DEFAULT_SLACK).unwrap(), m);
        }
        let short = iterate(&inst, 3).unwrap();
        assert!(matches!(
            liminf_witness(&short, 1.0, 0, &inst, DEFAULT_SLACK),
            Err(EngineError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn liminf_witness_reports_missing_witness() {
        let inst = negation(0.75);
        let mut tr = iterate(&inst, 100).unwrap();
        for n in 0..=6 {
            tr.corrupt_res_a(n, 5.0);
        }
        assert!(matches!(
            liminf_witness(&tr, 1.0, 0, &inst, DEFAULT_SLACK),
            Err(EngineError::WitnessNotFound { delta: 6, .. })
        ));
    }

    #[test]
    fn preti_single_map_is_identity_bound() {
        let inst = negation(0.75);
        let z = scalar(0.3);
        let r = check_preti(&inst, &z, 0, 0.6, DEFAULT_SLACK).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_excess, Some(0.0));
        let skipped = check_preti(&inst, &z, 0, 0.1, DEFAULT_SLACK).unwrap();
        assert_eq!((skipped.evaluated, skipped.skipped), (0, Some(1)));
    }

    #[test]
    fn rate_checks() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 200).unwrap();
        let phi = inst.rate_inputs().unwrap().phi(0.5).unwrap();
        assert_eq!(phi, 91);
        assert!(check_rate_a(&tr, 0.5, phi, DEFAULT_SLACK).passed());
        assert!(!check_rate_a(&tr, 0.5, 0, DEFAULT_SLACK).passed());
        assert!(!check_rate_a(&tr, 0.5, 500, DEFAULT_SLACK).passed());
        assert!(check_rate_t(&tr, 0.5, phi, "rate_phi_prime", DEFAULT_SLACK).passed());
    }
}
