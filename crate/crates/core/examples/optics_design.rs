//! Prints the imaging design numbers for the default camera and a few f-numbers.

use insect_vision::optics::{design_report, OpticalConfig, DEFAULT_INSECT_SPEED_MPS};

fn main() {
    println!("f-number  airy µm  DoF mm  blur px  blur/airy");
    for n in [4.0, 5.6, 8.0, 11.0, 16.0] {
        let cfg = OpticalConfig { aperture_number: n, ..OpticalConfig::default() };
        let r = design_report(&cfg, DEFAULT_INSECT_SPEED_MPS).expect("valid optics");
        println!(
            "{n:>8}  {:>7.2}  {:>6.1}  {:>7.1}  {:>9.2}",
            r.airy_diameter_chip, r.depth_of_field, r.blur_pixels, r.blur_to_diffraction_ratio
        );
    }
}
