//! Homeostatic reward and slow mood. Reward is highest when interoception
//! sits on the mood set-point; mood itself drifts as the midpoint between an
//! innate resting point and the recent interoceptive average.

use std::collections::VecDeque;

use crate::config::HomeostasisSection;

pub const RESTING_POINT: [f64; 2] = [5.0, 5.0];

/// R = C - ||m - a||^2 with the squared euclidean distance.
pub fn reward(mood: [f64; 2], intero: [f64; 2], c: f64) -> f64 {
    let dv = mood[0] - intero[0];
    let da = mood[1] - intero[1];
    c - (dv * dv + da * da)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mood {
    current: [f64; 2],
    recent: VecDeque<[f64; 2]>,
    window: usize,
}

impl Mood {
    pub fn new(window: usize) -> Mood {
        Mood { current: RESTING_POINT, recent: VecDeque::with_capacity(window), window }
    }

    pub fn current(&self) -> [f64; 2] {
        self.current
    }

    pub fn set_current(&mut self, m: [f64; 2]) {
        self.current = m;
    }

    pub fn recent(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.recent.iter()
    }

    pub fn push_recent(&mut self, a: [f64; 2]) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(a);
    }

    /// Observes one interoceptive state into the running window.
    pub fn observe(&mut self, intero: [f64; 2]) {
        self.push_recent(intero);
    }

    /// m = (resting + mean of the recent window) / 2. With an empty window
    /// the mood stays where it is.
    pub fn update(&mut self) {
        if self.recent.is_empty() {
            return;
        }
        let n = self.recent.len() as f64;
        let (sv, sa) = self
            .recent
            .iter()
            .fold((0.0, 0.0), |(v, a), x| (v + x[0], a + x[1]));
        self.current = [
            0.5 * (RESTING_POINT[0] + sv / n),
            0.5 * (RESTING_POINT[1] + sa / n),
        ];
    }

    pub fn reward_for(&self, intero: [f64; 2], cfg: &HomeostasisSection) -> f64 {
        reward(self.current, intero, cfg.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_matches_hand_case() {
        // C = 40, m = (5,5), a = (7,6): 40 - (4 + 1) = 35.
        assert_eq!(reward([5.0, 5.0], [7.0, 6.0], 40.0), 35.0);
        assert_eq!(reward([5.0, 5.0], [5.0, 5.0], 40.0), 40.0);
    }

    #[test]
    fn reward_is_maximal_at_the_set_point() {
        let m = [3.2, 6.1];
        let best = reward(m, m, 40.0);
        for d in [0.01, 0.5, 2.0] {
            assert!(reward(m, [m[0] + d, m[1]], 40.0) < best);
            assert!(reward(m, [m[0], m[1] - d], 40.0) < best);
        }
    }

    #[test]
    fn mood_update_is_midpoint_of_resting_and_recent_mean() {
        let mut mood = Mood::new(1000);
        for _ in 0..10 {
            mood.observe([7.0, 7.0]);
        }
        mood.update();
        assert_eq!(mood.current(), [6.0, 6.0]);
    }

    #[test]
    fn window_keeps_only_the_last_n_states() {
        let mut mood = Mood::new(4);
        for i in 0..8 {
            mood.observe([i as f64, 0.0]);
        }
        // Only 4..=7 remain; mean valence 5.5, so m_v = (5 + 5.5)/2.
        mood.update();
        assert_eq!(mood.current(), [5.25, 2.5]);
    }

    #[test]
    fn empty_window_leaves_mood_at_resting_point() {
        let mut mood = Mood::new(10);
        mood.update();
        assert_eq!(mood.current(), RESTING_POINT);
    }
}
