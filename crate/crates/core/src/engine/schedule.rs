use serde::{Deserialize, Serialize};

/// Per-cell evaluation period in rounds. Two consecutive gated evaluations
/// double it; a proceeding evaluation resets it to the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTimer {
    base: u32,
    max: u32,
    interval: u32,
    next_due: u64,
    gated_streak: u32,
}

impl EvalTimer {
    pub const MIN_INTERVAL: u32 = 1;
    pub const MAX_INTERVAL: u32 = 8;

    pub fn new(base_rounds: u32) -> Self {
        let base = base_rounds.clamp(Self::MIN_INTERVAL, Self::MAX_INTERVAL);
        Self {
            base,
            max: Self::MAX_INTERVAL,
            interval: base,
            next_due: 1,
            gated_streak: 0,
        }
    }

    pub fn interval(&self) -> u32 {
        self.interval
    }

    /// Rounds are numbered from 1.
    pub fn is_due(&self, round: u64) -> bool {
        round >= self.next_due
    }

    pub fn record(&mut self, round: u64, gated: bool) {
        if gated {
            self.gated_streak += 1;
            if self.gated_streak >= 2 {
                self.interval = (self.interval * 2).min(self.max);
                self.gated_streak = 0;
            }
        } else {
            self.gated_streak = 0;
            self.interval = self.base;
        }
        self.next_due = round + u64::from(self.interval);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubles_after_two_gated_and_resets() {
        let mut t = EvalTimer::new(1);
        let mut due = Vec::new();
        for round in 1..=20 {
            if t.is_due(round) {
                due.push(round);
                t.record(round, round < 10);
            }
        }
        assert_eq!(due, vec![1, 2, 4, 6, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]);
        assert_eq!(t.interval(), 1);
    }

    #[test]
    fn interval_is_bounded() {
        let mut t = EvalTimer::new(1);
        let mut round = 1;
        for _ in 0..40 {
            t.record(round, true);
            round += u64::from(t.interval());
            assert!((1..=8).contains(&t.interval()));
        }
        assert_eq!(t.interval(), 8);
        assert_eq!(EvalTimer::new(50).interval(), 8);
    }
}
