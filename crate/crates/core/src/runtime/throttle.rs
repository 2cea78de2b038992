use crate::clock::Micros;

const WINDOW: Micros = Micros::from_secs(60);

/// Invocation counter over tumbling one-minute windows.
#[derive(Debug, Clone)]
pub struct Throttle {
    limit: u64,
    window: u64,
    count: u64,
}

impl Throttle {
    pub fn new(limit: u64) -> Self {
        Self { limit, window: 0, count: 0 }
    }

    /// Counts one invocation at `now`; false when the window is exhausted.
    pub fn admit(&mut self, now: Micros) -> bool {
        let w = now.0 / WINDOW.0;
        if w != self.window {
            self.window = w;
            self.count = 0;
        }
        if self.count >= self.limit {
            return false;
        }
        self.count += 1;
        true
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_then_reset_on_next_minute() {
        let mut t = Throttle::new(3);
        let base = Micros::from_secs(120);
        assert!((0..3).all(|i| t.admit(base + Micros(i))));
        assert!(!t.admit(base + Micros::from_secs(59)));
        assert!(t.admit(base + Micros::from_secs(60)));
    }
}
