use std::collections::VecDeque;

use crate::streams::LabeledPoint;

/// Fixed-capacity FIFO training window. Pushing into a full frame evicts the
/// oldest point.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingFrame {
    capacity: usize,
    buffer: VecDeque<LabeledPoint>,
}

impl MovingFrame {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "moving frame capacity must be positive");
        Self {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_points<I: IntoIterator<Item = LabeledPoint>>(capacity: usize, points: I) -> Self {
        let mut frame = Self::new(capacity);
        for p in points {
            frame.push(p);
        }
        frame
    }

    /// Inserts `point`, returning the evicted point if the frame was full.
    pub fn push(&mut self, point: LabeledPoint) -> Option<LabeledPoint> {
        let evicted = if self.buffer.len() == self.capacity {
            self.buffer.pop_front()
        } else {
            None
        };
        self.buffer.push_back(point);
        evicted
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.capacity
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &LabeledPoint> + '_ {
        self.buffer.iter()
    }

    pub fn newest(&self) -> Option<&LabeledPoint> {
        self.buffer.back()
    }

    pub fn oldest(&self) -> Option<&LabeledPoint> {
        self.buffer.front()
    }
}
