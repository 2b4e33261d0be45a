//! Innate internal appraisal: four slow fatigue accumulators that rise with
//! every effortful action and relax when the agent performs one of two
//! recovery behaviours. Their saturating sum is the internal-appraisal
//! scalar folded into interoception.

use crate::config::AppraisalSection;
use crate::env::Expression;

pub const UNITS: usize = 4;

/// Largest f64 strictly below 4.0.
const BELOW_SATURATION: f64 = f64::next_down(4.0);

/// What an action does to the accumulators. Exactly one class applies per
/// step; recovery classes reset toward their own offset, everything else
/// accumulates the action's cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionClass {
    ClosingEyelids,
    ShowingSadness,
    Other,
}

/// Eyelids-closed takes precedence: a face with shut eyes is not read as a
/// sad face even when the other controls would classify it that way.
pub fn classify_action(expression: Expression, eyes_closed: bool) -> ActionClass {
    if eyes_closed {
        ActionClass::ClosingEyelids
    } else if expression == Expression::Sadness {
        ActionClass::ShowingSadness
    } else {
        ActionClass::Other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fatigue {
    a: [f64; UNITS],
}

impl Default for Fatigue {
    fn default() -> Fatigue {
        Fatigue { a: [0.0; UNITS] }
    }
}

impl Fatigue {
    pub fn new() -> Fatigue {
        Fatigue::default()
    }

    pub fn accumulators(&self) -> &[f64; UNITS] {
        &self.a
    }

    pub fn set_accumulators(&mut self, a: [f64; UNITS]) {
        self.a = a;
    }

    /// Applies one step. All units share the branch: recovery folds each
    /// accumulator toward the class offset (|A - d|), anything else adds the
    /// action cost plus a small constant drift.
    pub fn update(&mut self, class: ActionClass, action_cost: f64, cfg: &AppraisalSection) {
        match class {
            ActionClass::ClosingEyelids => {
                for a in &mut self.a {
                    *a = (*a - cfg.d_eyelid).abs();
                }
            }
            ActionClass::ShowingSadness => {
                for a in &mut self.a {
                    *a = (*a - cfg.d_sad).abs();
                }
            }
            ActionClass::Other => {
                for a in &mut self.a {
                    *a += action_cost + cfg.eta;
                }
            }
        }
    }

    /// Internal-appraisal scalar: sum of saturating unit responses. Each term
    /// lies in [0, 1) because accumulators never go negative, so the sum is
    /// confined to [0, 4). exp underflows to zero once an accumulator passes
    /// roughly 745 time constants, which would round the sum up to exactly
    /// 4.0; the clamp keeps the bound strict there.
    pub fn internal_appraisal(&self, tau: f64) -> f64 {
        let sum: f64 = self.a.iter().map(|&a| 1.0 - (-a / tau).exp()).sum();
        sum.min(BELOW_SATURATION)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AppraisalSection {
        crate::config::Config::default().appraisal
    }

    #[test]
    fn appraisal_matches_closed_form() {
        let mut f = Fatigue::new();
        assert_eq!(f.internal_appraisal(50.0), 0.0);
        f.set_accumulators([50.0; 4]);
        assert!((f.internal_appraisal(50.0) - 2.5284822353142307).abs() < 1e-15);
        f.set_accumulators([10.0, 60.0, 0.0, 49.99]);
        assert!((f.internal_appraisal(50.0) - 1.5121220105920599).abs() < 1e-15);
    }

    #[test]
    fn appraisal_stays_strictly_below_saturation() {
        let mut f = Fatigue::new();
        f.set_accumulators([1e12; 4]);
        let ia = f.internal_appraisal(50.0);
        assert!(ia < 4.0, "{ia}");
        assert_eq!(ia, f64::next_down(4.0));
    }

    #[test]
    fn effortful_actions_accumulate_cost_plus_drift() {
        let mut f = Fatigue::new();
        f.set_accumulators([10.0, 60.0, 0.0, 49.99]);
        f.update(ActionClass::Other, 0.5, &cfg());
        let got = f.accumulators();
        let want = [10.51, 60.51, 0.51, 50.5];
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn recovery_folds_toward_the_class_offset() {
        let mut f = Fatigue::new();
        f.set_accumulators([10.0, 60.0, 0.0, 49.99]);
        f.update(ActionClass::ClosingEyelids, 0.3, &cfg());
        let want = [40.0, 10.0, 50.0, 0.00999999999999801];
        for (g, w) in f.accumulators().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        f.set_accumulators([10.0, 60.0, 0.0, 49.99]);
        f.update(ActionClass::ShowingSadness, 0.3, &cfg());
        let want = [65.0, 15.0, 75.0, 25.009999999999998];
        for (g, w) in f.accumulators().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn appraisal_stays_in_range_under_random_walks() {
        use rand::RngExt;
        let mut rng = crate::rng::derive_stream(7, "appraisal-range");
        let c = cfg();
        let mut f = Fatigue::new();
        for _ in 0..100_000 {
            let class = match rng.random_range(0..10u32) {
                0 => ActionClass::ClosingEyelids,
                1 => ActionClass::ShowingSadness,
                _ => ActionClass::Other,
            };
            f.update(class, rng.random_range(0.0..2.0), &c);
            let ia = f.internal_appraisal(c.tau);
            assert!((0.0..4.0).contains(&ia), "ia {ia} out of range");
            assert!(f.accumulators().iter().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn repeated_sleep_oscillates_rather_than_resting() {
        // |A - 50| applied twice maps A to itself, so pure sleeping bounces
        // between two fatigue levels instead of settling at zero.
        let mut f = Fatigue::new();
        f.set_accumulators([20.0; 4]);
        let c = cfg();
        f.update(ActionClass::ClosingEyelids, 0.0, &c);
        assert_eq!(f.accumulators()[0], 30.0);
        f.update(ActionClass::ClosingEyelids, 0.0, &c);
        assert_eq!(f.accumulators()[0], 20.0);
    }

    #[test]
    fn action_classification_precedence() {
        assert_eq!(classify_action(Expression::Sadness, true), ActionClass::ClosingEyelids);
        assert_eq!(classify_action(Expression::Sadness, false), ActionClass::ShowingSadness);
        assert_eq!(classify_action(Expression::Pleasure, false), ActionClass::Other);
        assert_eq!(classify_action(Expression::Neutral, false), ActionClass::Other);
    }
}
