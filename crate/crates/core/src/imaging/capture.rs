use std::collections::VecDeque;
use std::sync::mpsc::sync_channel;

use super::ring::FrameRing;
use super::trigger::{CaptureEvent, TriggerConfig};
use super::{mean_luminance, Frame, ImagingError};

/// Frames extracted for one trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub event: CaptureEvent,
    pub frames: Vec<Frame>,
}

/// Streaming trigger and extractor over a [`FrameRing`].
///
/// Produces the same events as [`super::detect_triggers`] run on the full luminance
/// series. Extraction happens once the last follow-up frame has arrived, reading the
/// selected frames back out of the ring, so the ring must span at least
/// `followup_count · followup_stride + 1` frames for captures to be complete.
#[derive(Debug)]
pub struct CaptureUnit {
    cfg: TriggerConfig,
    ring: FrameRing,
    history: VecDeque<f64>,
    luma: Vec<f64>,
    last_trigger: Option<usize>,
    pending: VecDeque<CaptureEvent>,
}

impl CaptureUnit {
    pub fn new(cfg: TriggerConfig, ring: FrameRing) -> Result<Self, ImagingError> {
        cfg.validate()?;
        Ok(Self {
            history: VecDeque::with_capacity(cfg.baseline_window + 1),
            cfg,
            ring,
            luma: Vec::new(),
            last_trigger: None,
            pending: VecDeque::new(),
        })
    }

    /// Luminance of every frame seen so far.
    pub fn luminance_series(&self) -> &[f64] {
        &self.luma
    }

    pub fn ring(&self) -> &FrameRing {
        &self.ring
    }

    /// Feeds one frame; returns any capture completed by it.
    pub fn push(&mut self, frame: Frame) -> Result<Vec<Capture>, ImagingError> {
        let index = self.luma.len();
        let value = mean_luminance(&frame);
        self.ring.push(frame)?;
        self.luma.push(value);

        let w = self.cfg.baseline_window;
        if self.history.len() == w {
            let cooled = self.last_trigger.is_none_or(|prev| index - prev >= self.cfg.cooldown);
            let sum: f64 = self.history.iter().sum();
            if cooled && self.cfg.fires(value, sum) {
                let selected = self.cfg.selected_indices(index, usize::MAX);
                self.pending.push_back(CaptureEvent { trigger_index: index, selected_indices: selected });
                self.last_trigger = Some(index);
            }
        }
        self.history.push_back(value);
        if self.history.len() > w {
            self.history.pop_front();
        }

        let mut done = Vec::new();
        while let Some(ev) = self.pending.front() {
            if *ev.selected_indices.last().expect("non-empty") > index {
                break;
            }
            let ev = self.pending.pop_front().expect("front exists");
            done.push(self.extract(ev));
        }
        Ok(done)
    }

    /// Ends the stream, truncating follow-ups of any pending trigger.
    pub fn finish(mut self) -> Vec<Capture> {
        let len = self.luma.len();
        let pending: Vec<CaptureEvent> = self.pending.drain(..).collect();
        pending
            .into_iter()
            .map(|mut ev| {
                ev.selected_indices.retain(|&i| i < len);
                self.extract(ev)
            })
            .collect()
    }

    fn extract(&self, event: CaptureEvent) -> Capture {
        let frames = event
            .selected_indices
            .iter()
            .filter_map(|&i| self.ring.get_by_stream_index(i as u64).cloned())
            .collect();
        Capture { event, frames }
    }
}

/// Runs `unit` on a frame source fed from a producer thread through a bounded channel.
pub fn spawn_capture<I>(source: I, mut unit: CaptureUnit, bound: usize) -> Result<Vec<Capture>, ImagingError>
where
    I: IntoIterator<Item = Frame>,
    I::IntoIter: Send,
{
    let (tx, rx) = sync_channel::<Frame>(bound.max(1));
    let frames = source.into_iter();
    std::thread::scope(|scope| {
        scope.spawn(move || {
            for f in frames {
                if tx.send(f).is_err() {
                    break;
                }
            }
        });
        let mut captures = Vec::new();
        for f in rx {
            captures.extend(unit.push(f)?);
        }
        captures.extend(unit.finish());
        Ok(captures)
    })
}
