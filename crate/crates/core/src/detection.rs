//! Threshold detection on the per-origin suspicion metric.

use crate::model::{EdgeServerId, OriginServerId, Step};
use crate::protocol::AlertLedger;

/// An edge server suspects `origin` is under attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub detector: EdgeServerId,
    pub origin: OriginServerId,
    pub step: Step,
    pub metric_value: f64,
}

/// Distinct in-window alerts divided by the number of edge servers: an estimate
/// of erroneous query strings received per edge during the window.
pub fn suspicion_metric(distinct_alerts: usize, edge_count: u32) -> f64 {
    debug_assert!(edge_count >= 1);
    distinct_alerts as f64 / f64::from(edge_count)
}

/// True iff `metric` strictly exceeds `threshold`.
pub fn check(metric: f64, threshold: f64) -> bool {
    metric > threshold
}

/// Evaluates the detector of `ledger`'s owner for `origin` at step `now`.
pub fn evaluate(
    ledger: &AlertLedger,
    origin: OriginServerId,
    now: Step,
    window: Step,
    edge_count: u32,
    threshold: f64,
) -> Option<DetectionEvent> {
    let count = ledger.count_in_window(origin, now, window);
    let metric = suspicion_metric(count, edge_count);
    check(metric, threshold).then_some(DetectionEvent {
        detector: ledger.owner(),
        origin,
        step: now,
        metric_value: metric,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::Alert;

    const OS: OriginServerId = OriginServerId(0);

    fn ledger_with(count: u32, step: Step) -> AlertLedger {
        let mut ledger = AlertLedger::new(EdgeServerId(0));
        for i in 0..count {
            ledger.record_alert(Alert::new(OS, EdgeServerId(i % 10), step, i));
        }
        ledger
    }

    #[test]
    fn metric_values() {
        assert_eq!(suspicion_metric(0, 75), 0.0);
        assert_eq!(suspicion_metric(75, 75), 1.0);
        assert_eq!(suspicion_metric(38, 75), 38.0 / 75.0);
        assert!((suspicion_metric(38, 75) - 0.506_666_666_666_666_7).abs() < 1e-15);
    }

    #[test]
    fn check_is_strict() {
        assert!(check(0.51, 0.5));
        assert!(!check(0.5, 0.5));
        assert!(!check(1.2, 1.5));
    }

    #[test]
    fn empty_window_raises_nothing() {
        let ledger = AlertLedger::new(EdgeServerId(0));
        assert_eq!(evaluate(&ledger, OS, 10, 10, 10, 0.25), None);
    }

    #[test]
    fn small_cdn_low_threshold_fires() {
        let ledger = ledger_with(3, 4);
        let ev = evaluate(&ledger, OS, 4, 10, 10, 0.25).unwrap();
        assert_eq!(ev.metric_value, 0.3);
        assert_eq!(ev.detector, EdgeServerId(0));
        assert_eq!(ev.step, 4);
    }

    #[test]
    fn just_below_high_threshold_stays_quiet() {
        // 112 / 75 ≈ 1.4933
        let ledger = ledger_with(112, 4);
        assert_eq!(evaluate(&ledger, OS, 4, 10, 75, 1.5), None);
        let ledger = ledger_with(113, 4);
        assert!(evaluate(&ledger, OS, 4, 10, 75, 1.5).is_some());
    }

    #[test]
    fn alerts_outside_window_do_not_count() {
        let ledger = ledger_with(50, 0);
        assert!(evaluate(&ledger, OS, 9, 10, 10, 0.25).is_some());
        assert_eq!(evaluate(&ledger, OS, 10, 10, 10, 0.25), None);
    }

    proptest! {
        #[test]
        fn detection_is_monotone_in_count(c1 in 0usize..500, extra in 0usize..500, s in 1u32..200, theta in 0.01f64..3.0) {
            let c2 = c1 + extra;
            if check(suspicion_metric(c1, s), theta) {
                prop_assert!(check(suspicion_metric(c2, s), theta));
            }
        }

        #[test]
        fn metric_is_scale_invariant(c in 0usize..1000, s in 1u32..200, k in 1u32..50) {
            prop_assert_eq!(
                suspicion_metric(c * k as usize, s * k),
                suspicion_metric(c, s)
            );
        }
    }
}
