//! Reduction of a `k`-strict family to a nonexpansive one that drives the
//! same iterates.

use super::{EngineError, ProblemInstance, Trace};
use crate::check::CheckReport;
use crate::operators::averaged;
use crate::schedules::reduce_step_schedule;

/// Replaces every `T_i` by `(T_i)_k` and `t_n` by `1 − (1 − t_n)/(1 − k)`.
/// The iterates are unchanged and the reduced instance has `k = 0`.
pub fn reduce_instance(inst: &ProblemInstance) -> Result<ProblemInstance, EngineError> {
    let k = inst.k();
    if k == 0.0 {
        return Ok(inst.clone());
    }
    let family = inst
        .family()
        .iter()
        .map(|op| averaged(op, k))
        .collect::<Result<Vec<_>, _>>()?;
    let steps = reduce_step_schedule(inst.steps(), k)?;
    ProblemInstance::new(family, 0.0, inst.x0().clone(), inst.b(), steps, inst.mix().clone())
}

/// `res_T′[i](n) = (1 − k)·res_T[i](n)` and `res_A′(n) = (1 − k)·res_A(n)`,
/// compared with relative tolerance `tol`.
pub fn residual_relation(orig: &Trace, reduced: &Trace, k: f64, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("reduction_residuals", 0.0);
    if orig.len() != reduced.len() || orig.n_maps() != reduced.n_maps() {
        report.record_failure(0, orig.len() as f64, reduced.len() as f64, "trace shapes differ".into());
        return report;
    }
    for n in 0..orig.len() {
        let (a, b) = (orig.record(n), reduced.record(n));
        let pairs = std::iter::once((a.res_a, b.res_a)).chain(a.res_t.iter().copied().zip(b.res_t.iter().copied()));
        for (j, (r, r_red)) in pairs.enumerate() {
            let expected = (1.0 - k) * r;
            let gap = (r_red - expected).abs();
            report.record_with(n, gap, tol * (1.0 + expected.abs()), || {
                Some(if j == 0 { "res_A".into() } else { format!("member {j}") })
            });
        }
    }
    report
}

/// `‖x_n − y_n‖ ≤ tol·(1 + ‖x_n‖)` for the first `steps + 1` iterates.
pub fn check_trace_agreement(a: &Trace, b: &Trace, steps: u64, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("trace_agreement", 0.0);
    let len = a.len().min(b.len());
    if len <= steps || a.dim() != b.dim() {
        report.record_failure(
            len,
            a.len() as f64,
            b.len() as f64,
            "traces too short or of different dimension".into(),
        );
        return report;
    }
    for n in 0..=steps {
        let (x, y) = (a.x(n), b.x(n));
        let gap = x.distance(&y).expect("same dimension");
        report.record(n, gap, tol * (1.0 + x.norm()));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::iterate;
    use super::*;

    #[test]
    fn minus_three_reduces_to_negation() {
        let inst = minus_three();
        let red = reduce_instance(&inst).unwrap();
        assert_eq!(red.k(), 0.0);
        assert_eq!(red.steps().t(0), 0.5);
        let c = 0.7;
        let image = red.family()[0].apply(&scalar(c)).unwrap();
        assert!((image[0] + c).abs() < 1e-15);
        let (tr, tr_red) = (iterate(&inst, 3).unwrap(), iterate(&red, 3).unwrap());
        assert_eq!(tr.x(1), scalar(0.0));
        assert_eq!(tr_red.x(1), scalar(0.0));
        // res_T = 4|c| before and 2|c| after reduction
        assert_eq!(tr.record(0).res_t, &[4.0]);
        assert_eq!(tr_red.record(0).res_t, &[2.0]);
        assert!(residual_relation(&tr, &tr_red, 0.5, 1e-12).passed());
        assert!(check_trace_agreement(&tr, &tr_red, 3, 1e-12).passed());
    }

    #[test]
    fn nonexpansive_instances_reduce_to_themselves() {
        let inst = mixed(0.0);
        assert_eq!(reduce_instance(&inst).unwrap(), inst);
    }

    #[test]
    fn reduction_preserves_iterates() {
        for k in [0.3, 0.5, 0.72] {
            let inst = mixed(k);
            let red = reduce_instance(&inst).unwrap();
            let (tr, tr_red) = (iterate(&inst, 400).unwrap(), iterate(&red, 400).unwrap());
            assert!(check_trace_agreement(&tr, &tr_red, 400, 1e-10).passed(), "k = {k}");
            assert!(residual_relation(&tr, &tr_red, k, 1e-10).passed(), "k = {k}");
        }
    }

    #[test]
    fn agreement_flags_short_traces() {
        let inst = negation(0.75);
        let tr = iterate(&inst, 3).unwrap();
        assert!(!check_trace_agreement(&tr, &tr, 10, 1e-12).passed());
    }
}
