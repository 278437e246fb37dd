use serde::{Deserialize, Serialize};

use super::ring::{ring_capacity, DEFAULT_FPS, DEFAULT_RING_SECONDS};
use super::ImagingError;

/// Brightness-spike trigger parameters.
///
/// Frame `i` fires when its luminance is at least `ratio_threshold` times the mean of
/// the preceding `baseline_window` frames (and strictly above that mean), and it is at
/// least `cooldown` frames after the previous trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriggerConfig {
    pub baseline_window: usize,
    pub ratio_threshold: f64,
    pub cooldown: usize,
    pub followup_count: usize,
    pub followup_stride: usize,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            baseline_window: 8,
            ratio_threshold: 1.5,
            cooldown: ring_capacity(DEFAULT_FPS, DEFAULT_RING_SECONDS).expect("positive defaults"),
            followup_count: 2,
            followup_stride: 1,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.baseline_window < 1 {
            return Err(ImagingError::InvalidTrigger("baseline_window must be >= 1".into()));
        }
        if !(self.ratio_threshold > 1.0 && self.ratio_threshold.is_finite()) {
            return Err(ImagingError::InvalidTrigger(format!(
                "ratio_threshold must be > 1, got {}",
                self.ratio_threshold
            )));
        }
        if self.followup_stride < 1 {
            return Err(ImagingError::InvalidTrigger("followup_stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether `value` fires against a baseline window summing to `window_sum`.
    pub(crate) fn fires(&self, value: f64, window_sum: f64) -> bool {
        let mean = window_sum / self.baseline_window as f64;
        value >= self.ratio_threshold * mean && value > mean
    }

    pub(crate) fn selected_indices(&self, trigger: usize, len: usize) -> Vec<usize> {
        (0..=self.followup_count)
            .map(|k| trigger + k * self.followup_stride)
            .take_while(|&i| i < len)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureEvent {
    pub trigger_index: usize,
    /// Trigger frame first, then the follow-ups, strictly increasing.
    pub selected_indices: Vec<usize>,
}

/// Scans a luminance series for brightness spikes.
pub fn detect_triggers(luma: &[f64], cfg: &TriggerConfig) -> Result<Vec<CaptureEvent>, ImagingError> {
    cfg.validate()?;
    let w = cfg.baseline_window;
    if luma.len() < w + 1 {
        return Err(ImagingError::SeriesTooShort { len: luma.len(), needed: w + 1 });
    }
    let mut events = Vec::new();
    let mut last: Option<usize> = None;
    for i in w..luma.len() {
        if let Some(prev) = last {
            if i - prev < cfg.cooldown {
                continue;
            }
        }
        // fixed left-to-right summation so streaming and batch agree bit for bit
        let sum: f64 = luma[i - w..i].iter().sum();
        if cfg.fires(luma[i], sum) {
            events.push(CaptureEvent {
                trigger_index: i,
                selected_indices: cfg.selected_indices(i, luma.len()),
            });
            last = Some(i);
        }
    }
    Ok(events)
}
