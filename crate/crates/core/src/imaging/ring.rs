use super::{Frame, ImagingError};

/// Default video frame rate of the simulated camera stream.
pub const DEFAULT_FPS: f64 = 25.0;
/// Length of video kept in memory.
pub const DEFAULT_RING_SECONDS: f64 = 1.5;

/// Number of frames needed to hold `seconds` of video at `fps`, rounded up.
pub fn ring_capacity(fps: f64, seconds: f64) -> Result<usize, ImagingError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(ImagingError::NonPositive { name: "fps", value: fps });
    }
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(ImagingError::NonPositive { name: "seconds", value: seconds });
    }
    let frames = fps * seconds;
    // absorb representation error such as 10 × 0.3 = 3.0000000000000004
    let frames = (frames - frames * 1e-12).ceil();
    Ok((frames as usize).max(1))
}

/// Fixed-capacity circular frame store; the oldest frame is overwritten first.
#[derive(Debug, Clone)]
pub struct FrameRing {
    capacity: usize,
    width: usize,
    height: usize,
    slots: Vec<Option<Frame>>,
    head: usize,
    filled: usize,
    pushed: u64,
}

impl FrameRing {
    pub fn new(capacity: usize, width: usize, height: usize) -> Self {
        assert!(capacity >= 1, "ring capacity must be at least 1");
        Self {
            capacity,
            width,
            height,
            slots: vec![None; capacity],
            head: 0,
            filled: 0,
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity
    }

    /// Total number of frames ever pushed; the stream index of the next frame.
    pub fn total_pushed(&self) -> u64 {
        self.pushed
    }

    /// Stores `frame` at the head, returning the evicted frame when the ring was full.
    pub fn push(&mut self, frame: Frame) -> Result<Option<Frame>, ImagingError> {
        if frame.width() != self.width || frame.height() != self.height {
            return Err(ImagingError::DimensionMismatch {
                want_w: self.width,
                want_h: self.height,
                got_w: frame.width(),
                got_h: frame.height(),
            });
        }
        let evicted = self.slots[self.head].replace(frame);
        self.head = (self.head + 1) % self.capacity;
        if self.filled < self.capacity {
            self.filled += 1;
        }
        self.pushed += 1;
        Ok(evicted)
    }

    /// Frames from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Frame> + '_ {
        let start = (self.head + self.capacity - self.filled) % self.capacity;
        (0..self.filled).filter_map(move |k| self.slots[(start + k) % self.capacity].as_ref())
    }

    /// Looks up a frame by its stream index, if it is still held.
    pub fn get_by_stream_index(&self, index: u64) -> Option<&Frame> {
        if index >= self.pushed || self.pushed - index > self.filled as u64 {
            return None;
        }
        let back = (self.pushed - index) as usize; // 1 = newest
        let slot = (self.head + self.capacity - back) % self.capacity;
        self.slots[slot].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn frame(t: f64) -> Frame {
        Frame::filled(2, 2, [0, 0, 0], t).unwrap()
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(ring_capacity(25.0, 1.5).unwrap(), 38);
        assert_eq!(ring_capacity(30.0, 1.5).unwrap(), 45);
        assert_eq!(ring_capacity(1.0, 1.0).unwrap(), 1);
        assert_eq!(ring_capacity(10.0, 0.3).unwrap(), 3);
        assert!(ring_capacity(0.0, 1.5).is_err());
        assert!(ring_capacity(25.0, -1.0).is_err());
    }

    #[test]
    fn push_and_evict() {
        let mut ring = FrameRing::new(2, 2, 2);
        assert_eq!(ring.push(frame(0.0)).unwrap(), None);
        assert_eq!(ring.len(), 1);
        assert_eq!(ring.push(frame(1.0)).unwrap(), None);
        let evicted = ring.push(frame(2.0)).unwrap().unwrap();
        assert_eq!(evicted.timestamp, 0.0);
        assert_eq!(ring.len(), 2);
    }

    #[test]
    fn holds_latest_in_order() {
        let mut ring = FrameRing::new(4, 2, 2);
        for i in 0..11 {
            ring.push(frame(i as f64)).unwrap();
        }
        let ts: Vec<f64> = ring.iter().map(|f| f.timestamp).collect();
        assert_eq!(ts, vec![7.0, 8.0, 9.0, 10.0]);
        assert_eq!(ring.get_by_stream_index(7).unwrap().timestamp, 7.0);
        assert_eq!(ring.get_by_stream_index(10).unwrap().timestamp, 10.0);
        assert!(ring.get_by_stream_index(6).is_none());
        assert!(ring.get_by_stream_index(11).is_none());
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let mut ring = FrameRing::new(2, 2, 2);
        let f = Frame::filled(3, 2, [0, 0, 0], 0.0).unwrap();
        assert!(matches!(ring.push(f), Err(ImagingError::DimensionMismatch { .. })));
    }

    #[test]
    fn never_exceeds_capacity() {
        let mut rng = crate::rng::rng(5);
        for _ in 0..20 {
            let cap = rng.random_range(1..12);
            let mut ring = FrameRing::new(cap, 2, 2);
            for i in 0..10 * cap {
                let evicted = ring.push(frame(i as f64)).unwrap();
                assert!(ring.len() <= cap);
                assert_eq!(evicted.is_some(), i >= cap);
            }
        }
    }
}
