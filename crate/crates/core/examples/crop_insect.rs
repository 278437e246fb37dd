//! Crops a rendered insect from a noisy mask and writes the crop as `crop.ppm`.

use insect_vision::detect::{bbox_iou, crop_insect, square_expand, write_ppm, CropConfig};
use insect_vision::evalkit::synth::{perturb_mask, synth_scene};

fn main() {
    let scene = synth_scene(3, 42, 256, 192).expect("valid scene");
    let cfg = CropConfig { min_area: 24, target_size: 64, ..CropConfig::default() };
    let mask = perturb_mask(&scene.mask, cfg.min_area, 5, 43);
    let (bbox, crop) = crop_insect(&scene.frame, &mask, &cfg).expect("insect found");
    let truth = square_expand(scene.true_box, cfg.margin, 256, 192);
    println!("true box {:?}", scene.true_box);
    println!("crop box {bbox:?}, IoU with truth {:.3}", bbox_iou(&bbox, &truth));
    write_ppm("crop.ppm".as_ref(), &crop).expect("writable");
    println!("wrote crop.ppm");
}
