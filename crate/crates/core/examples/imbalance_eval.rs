//! Long-tailed class counts: histogram, loss weights, oversampling and the
//! never-predicted flag on a skewed classifier.

use insect_vision::evalkit::{class_histogram, class_weights, oversample, RunMetrics, LONG_TAIL_PROFILE};

fn main() {
    let labels: Vec<usize> = LONG_TAIL_PROFILE.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let hist = class_histogram(&labels, LONG_TAIL_PROFILE.len()).unwrap();
    println!("{} samples, imbalance ratio {:.1}", labels.len(), hist.imbalance_ratio.unwrap());
    let weights = class_weights(&hist.counts).unwrap();
    for (c, (n, w)) in hist.counts.iter().zip(&weights).enumerate() {
        println!("class {c:>2}  n {n:>3}  weight {w:.3}");
    }
    let balanced = oversample(&labels, 5).unwrap();
    let after = class_histogram(&balanced.iter().map(|&i| labels[i]).collect::<Vec<_>>(), LONG_TAIL_PROFILE.len()).unwrap();
    println!("after oversampling: {:?}", after.counts);

    // A classifier that only ever answers one of the four most common classes.
    let preds: Vec<usize> = labels.iter().map(|&l| l.min(3)).collect();
    let names: Vec<String> = (0..LONG_TAIL_PROFILE.len()).map(|c| format!("class {c}")).collect();
    let m = RunMetrics::new(&preds, &labels, &names).unwrap();
    let never: Vec<&str> = m.per_class.iter().filter(|c| c.never_predicted).map(|c| c.name.as_str()).collect();
    println!("top-1 {:.3}; never predicted: {}", m.top1, never.join(", "));
}
