use std::collections::VecDeque;

pub const DEFAULT_SCORE_WINDOW: usize = 50;

/// Trailing mean of 0/1 classification outcomes over the most recent
/// `capacity` points. Before the window fills, the mean is over what has been
/// seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTracker {
    capacity: usize,
    window: VecDeque<bool>,
    hits: usize,
}

impl Default for ScoreTracker {
    fn default() -> Self {
        Self::new(DEFAULT_SCORE_WINDOW)
    }
}

impl ScoreTracker {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "score window must be positive");
        Self {
            capacity,
            window: VecDeque::with_capacity(capacity),
            hits: 0,
        }
    }

    /// Scores one prediction; an abstention (`None`) counts as a miss.
    /// Returns the updated running average.
    pub fn update(&mut self, predicted: Option<usize>, actual: usize) -> f64 {
        self.record(predicted == Some(actual))
    }

    pub fn record(&mut self, correct: bool) -> f64 {
        if self.window.len() == self.capacity {
            if let Some(true) = self.window.pop_front() {
                self.hits -= 1;
            }
        }
        self.window.push_back(correct);
        if correct {
            self.hits += 1;
        }
        self.average()
    }

    pub fn average(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.hits as f64 / self.window.len() as f64
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}
