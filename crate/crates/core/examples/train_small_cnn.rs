//! Trains the desk reference CNN on synthetic crops of 8 insect classes.
//!
//! `cargo run --release --example train_small_cnn`

use insect_vision::evalkit::{stratified_split_labels, synth_dataset, RunMetrics, Split, SplitRatios, SynthConfig, SynthDataset};
use insect_vision::nnet::{frames_to_tensor, grad_check, predict_classes, train, LabeledData, NetSpec, TrainConfig};

fn subset(data: &SynthDataset, idx: &[usize]) -> LabeledData {
    let frames: Vec<_> = idx.iter().map(|&i| data.items[i].cropped.clone()).collect();
    let labels = idx.iter().map(|&i| data.items[i].class_id).collect();
    LabeledData::new(frames_to_tensor(&frames).unwrap(), labels).unwrap()
}

fn main() {
    let err = grad_check(&NetSpec::grad_check_reference(), 0, 1e-4).unwrap();
    println!("gradient check: max relative error {err:.2e}");

    let classes = 8;
    let data = synth_dataset(&SynthConfig::balanced(classes, 48, 1)).unwrap();
    let split = stratified_split_labels(&data.labels(), classes, SplitRatios::default(), 1).unwrap();
    let (tr, va, te) = (subset(&data, &split.indices(Split::Train)), subset(&data, &split.indices(Split::Val)), subset(&data, &split.indices(Split::Test)));

    let spec = NetSpec::desk_reference(classes);
    let cfg = TrainConfig { epochs: 15, seed: 1, ..TrainConfig::default() };
    let (params, history) = train(&spec, &tr, Some(&va), &cfg).unwrap();
    for m in &history {
        println!("epoch {:>2}  loss {:.4}  train {:.3}  val {:.3}", m.epoch, m.train_loss, m.train_accuracy, m.val_accuracy.unwrap_or(f64::NAN));
    }
    let preds = predict_classes(&spec, &params, &te.inputs).unwrap();
    let names: Vec<String> = (0..classes).map(|c| format!("class {c}")).collect();
    let m = RunMetrics::new(&preds, &te.labels, &names).unwrap();
    println!("test top-1 {:.3}", m.top1);
    print!("{}", m.confusion.to_csv(&names));
}
