//! Streams a synthetic transit through the capture unit and shows which frames are kept.

use insect_vision::imaging::{mean_luminance, ring_capacity, synth_transit, CaptureUnit, FrameRing, TriggerConfig, DEFAULT_FPS, DEFAULT_RING_SECONDS};

fn main() {
    let (w, h) = (128, 96);
    let frames = synth_transit(2, 7, 30, w, h).expect("valid transit");
    for (i, f) in frames.iter().enumerate() {
        println!("frame {i:>2}  luminance {:>6.1}", mean_luminance(f));
    }
    let capacity = ring_capacity(DEFAULT_FPS, DEFAULT_RING_SECONDS).expect("positive");
    let mut unit = CaptureUnit::new(TriggerConfig::default(), FrameRing::new(capacity, w, h)).expect("valid unit");
    let mut captures = Vec::new();
    for f in frames {
        captures.extend(unit.push(f).expect("frame size matches"));
    }
    captures.extend(unit.finish());
    for c in &captures {
        println!("trigger at frame {}, kept {:?}", c.event.trigger_index, c.event.selected_indices);
    }
}
