use super::config::CoordinatorMode;

/// Central activation control. In time-division mode at most
/// `permits_per_tick` agents may switch on per tick, granted round-robin by
/// agent id starting at the cursor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coordinator {
    mode: CoordinatorMode,
    permits_per_tick: usize,
    cursor: usize,
}

impl Coordinator {
    pub fn new(mode: CoordinatorMode, permits_per_tick: usize) -> Self {
        Self {
            mode,
            permits_per_tick,
            cursor: 0,
        }
    }

    pub fn mode(&self) -> CoordinatorMode {
        self.mode
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn with_cursor(mut self, cursor: usize) -> Self {
        self.cursor = cursor;
        self
    }

    /// Filters activation requests; every request passes unless in
    /// time-division mode.
    pub fn filter(&mut self, requests: &[usize]) -> Vec<usize> {
        match self.mode {
            CoordinatorMode::TimeDivision => self.assign_permits(requests),
            _ => {
                let mut all = requests.to_vec();
                all.sort_unstable();
                all
            }
        }
    }

    /// Grants up to `permits_per_tick` of `requests`, taking ids at or after
    /// the cursor first and wrapping around. The cursor moves one past the
    /// last grantee. Returns the granted ids in ascending order.
    pub fn assign_permits(&mut self, requests: &[usize]) -> Vec<usize> {
        let mut sorted = requests.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let split = sorted.partition_point(|&id| id < self.cursor);
        let order = sorted[split..].iter().chain(&sorted[..split]);
        let granted: Vec<usize> = order.take(self.permits_per_tick).copied().collect();
        if let Some(&last) = granted.last() {
            self.cursor = last + 1;
        }
        let mut granted = granted;
        granted.sort_unstable();
        granted
    }
}
