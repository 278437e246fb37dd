//! Rolls a species distribution up the bundled taxonomy at several thresholds.

use insect_vision::taxonomy::{decide, rollup, ProbVector, Rank, TaxonomyTree};

fn main() {
    let tree = TaxonomyTree::table1();
    let (s, g, f, o) = tree.counts();
    println!("{s} species, {g} genera, {f} families, {o} orders");
    let mut v = vec![0.0; tree.species_count()];
    v[tree.species_index("Bombus lapidarius").unwrap()] = 0.40;
    v[tree.species_index("Bombus terrestris").unwrap()] = 0.35;
    v[tree.species_index("Apis mellifica").unwrap()] = 0.10;
    v[tree.species_index("Eristalis tenax").unwrap()] = 0.15;
    let rolled = rollup(&ProbVector::new(v).unwrap(), &tree).unwrap();
    for rank in Rank::ALL {
        let top = rolled.rank(rank).iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).unwrap();
        println!("{rank:<8} top {} ({:.2})", top.taxon, top.probability);
    }
    for tau in [0.3, 0.7, 0.8, 0.95] {
        let d = decide(&rolled, tau);
        println!("τ = {tau}: {} {} ({:.2})", d.rank, d.taxon, d.confidence);
    }
}
