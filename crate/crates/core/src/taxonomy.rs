//! Order → family → genus → species tree, species-probability rollup, and the rule
//! that reports the deepest rank the classifier is confident about.
//!
//! Taxonomy files are UTF-8 text with one species per line and four tab-separated
//! columns `order<TAB>family<TAB>genus<TAB>species`. The species column holds either
//! the epithet (`mellifica`) or a full binomial (`Apis mellifica`); epithets are
//! prefixed with the genus. Line order defines the species index used by classifier
//! outputs. Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The bundled table of 16 species.
pub const TABLE1_TSV: &str = include_str!("../data/taxonomy_table1.tsv");

pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rank {
    Order,
    Family,
    Genus,
    Species,
}

impl Rank {
    pub const ALL: [Rank; 4] = [Rank::Order, Rank::Family, Rank::Genus, Rank::Species];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rank::Order => "order",
            Rank::Family => "family",
            Rank::Genus => "genus",
            Rank::Species => "species",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("line {line}: expected 4 tab-separated columns, found {found}")]
    Columns { line: usize, found: usize },
    #[error("line {line}: {rank} column is empty, node has no parent chain")]
    Orphan { line: usize, rank: Rank },
    #[error("line {line}: duplicate species {name}")]
    DuplicateSpecies { line: usize, name: String },
    #[error("line {line}: {rank} {name} already placed under {existing}, now under {conflicting}")]
    ParentConflict { line: usize, rank: Rank, name: String, existing: String, conflicting: String },
    #[error("line {line}: {name} is used as {rank} but was already declared as {existing}")]
    RankViolation { line: usize, name: String, rank: Rank, existing: Rank },
    #[error("taxonomy contains no species")]
    Empty,
    #[error("probability vector has {got} entries, taxonomy has {want} species")]
    Misaligned { got: usize, want: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbs(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxon {
    pub id: usize,
    pub name: String,
    pub rank: Rank,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyTree {
    taxa: Vec<Taxon>,
    species: Vec<usize>,
    by_name: HashMap<String, usize>,
}

impl TaxonomyTree {
    /// The bundled 16-species table.
    pub fn table1() -> Self {
        parse_taxonomy(TABLE1_TSV).expect("bundled taxonomy is valid")
    }

    pub fn taxa(&self) -> &[Taxon] {
        &self.taxa
    }

    pub fn taxon(&self, id: usize) -> &Taxon {
        &self.taxa[id]
    }

    pub fn find(&self, name: &str) -> Option<&Taxon> {
        self.by_name.get(name).map(|&id| &self.taxa[id])
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    /// Species names in classifier index order.
    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|&id| self.taxa[id].name.as_str()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        let id = *self.by_name.get(name)?;
        self.species.iter().position(|&s| s == id)
    }

    pub fn count(&self, rank: Rank) -> usize {
        self.taxa.iter().filter(|t| t.rank == rank).count()
    }

    /// `(species, genera, families, orders)`.
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (self.count(Rank::Species), self.count(Rank::Genus), self.count(Rank::Family), self.count(Rank::Order))
    }

    /// Taxon ids from the species up to its order.
    pub fn lineage(&self, species_index: usize) -> Vec<usize> {
        let mut chain = vec![self.species[species_index]];
        while let Some(p) = self.taxa[*chain.last().expect("non-empty")].parent {
            chain.push(p);
        }
        chain
    }

    /// Writes the tree back in the file format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.species.len() {
            let names: Vec<&str> = self.lineage(i).iter().rev().map(|&id| self.taxa[id].name.as_str()).collect();
            out.push_str(&names.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Parses and validates a taxonomy file.
pub fn parse_taxonomy(text: &str) -> Result<TaxonomyTree, TaxonomyError> {
    let mut tree = TaxonomyTree { taxa: Vec::new(), species: Vec::new(), by_name: HashMap::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(TaxonomyError::Columns { line, found: cols.len() });
        }
        for (rank, col) in Rank::ALL.iter().zip(&cols) {
            if col.is_empty() {
                return Err(TaxonomyError::Orphan { line, rank: *rank });
            }
        }
        let species_name = if cols[3].contains(' ') { cols[3].to_string() } else { format!("{} {}", cols[2], cols[3]) };
        let names = [cols[0].to_string(), cols[1].to_string(), cols[2].to_string(), species_name];

        let mut parent: Option<usize> = None;
        for rank in Rank::ALL {
            let name = &names[rank.index()];
            let id = match tree.by_name.get(name) {
                Some(&id) => {
                    let existing = &tree.taxa[id];
                    if existing.rank != rank {
                        return Err(TaxonomyError::RankViolation {
                            line,
                            name: name.clone(),
                            rank,
                            existing: existing.rank,
                        });
                    }
                    if existing.parent != parent {
                        let label = |p: Option<usize>| p.map_or_else(|| "(root)".to_string(), |p| tree.taxa[p].name.clone());
                        return Err(TaxonomyError::ParentConflict {
                            line,
                            rank,
                            name: name.clone(),
                            existing: label(existing.parent),
                            conflicting: label(parent),
                        });
                    }
                    if rank == Rank::Species {
                        return Err(TaxonomyError::DuplicateSpecies { line, name: name.clone() });
                    }
                    id
                }
                None => {
                    let id = tree.taxa.len();
                    tree.taxa.push(Taxon { id, name: name.clone(), rank, parent });
                    tree.by_name.insert(name.clone(), id);
                    if rank == Rank::Species {
                        tree.species.push(id);
                    }
                    id
                }
            };
            parent = Some(id);
        }
    }
    if tree.species.is_empty() {
        return Err(TaxonomyError::Empty);
    }
    Ok(tree)
}

/// Species-level probability distribution, index-aligned with a taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(values: Vec<f64>) -> Result<Self, TaxonomyError> {
        if values.is_empty() {
            return Err(TaxonomyError::InvalidProbs("empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(TaxonomyError::InvalidProbs(format!("entry {v} is negative or not finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(TaxonomyError::InvalidProbs(format!("entries sum to {sum}")));
        }
        Ok(Self(values))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = TaxonomyError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonProb {
    pub taxon: String,
    #[serde(skip)]
    pub id: usize,
    pub probability: f64,
}

/// One distribution per rank, each listing the rank's taxa in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollup {
    pub order: Vec<TaxonProb>,
    pub family: Vec<TaxonProb>,
    pub genus: Vec<TaxonProb>,
    pub species: Vec<TaxonProb>,
}

impl Rollup {
    pub fn rank(&self, rank: Rank) -> &[TaxonProb] {
        match rank {
            Rank::Order => &self.order,
            Rank::Family => &self.family,
            Rank::Genus => &self.genus,
            Rank::Species => &self.species,
        }
    }

    pub fn probability(&self, name: &str) -> Option<f64> {
        Rank::ALL.iter().flat_map(|&r| self.rank(r)).find(|t| t.taxon == name).map(|t| t.probability)
    }
}

/// Sums species probabilities into every ancestor taxon.
pub fn rollup(probs: &ProbVector, tree: &TaxonomyTree) -> Result<Rollup, TaxonomyError> {
    if probs.len() != tree.species_count() {
        return Err(TaxonomyError::Misaligned { got: probs.len(), want: tree.species_count() });
    }
    let mut mass = vec![0.0f64; tree.taxa.len()];
    for (i, &p) in probs.values().iter().enumerate() {
        for id in tree.lineage(i) {
            mass[id] += p;
        }
    }
    let collect = |rank: Rank| -> Vec<TaxonProb> {
        tree.taxa
            .iter()
            .filter(|t| t.rank == rank)
            .map(|t| TaxonProb { taxon: t.name.clone(), id: t.id, probability: mass[t.id] })
            .collect()
    };
    Ok(Rollup {
        order: collect(Rank::Order),
        family: collect(Rank::Family),
        genus: collect(Rank::Genus),
        species: collect(Rank::Species),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub taxon: String,
    pub rank: Rank,
    pub confidence: f64,
    /// Set when not even the best order reached the threshold.
    pub below_threshold: bool,
}

/// Picks the deepest rank whose most probable taxon reaches `threshold`.
///
/// Ranks are scanned species → genus → family → order; equal maxima resolve to the
/// alphabetically first name. When no rank qualifies the best order is returned with
/// `below_threshold` set.
pub fn decide(rolled: &Rollup, threshold: f64) -> Decision {
    let best = |rank: Rank| -> &TaxonProb {
        rolled
            .rank(rank)
            .iter()
            .reduce(|a, b| match b.probability.partial_cmp(&a.probability) {
                Some(std::cmp::Ordering::Greater) => b,
                Some(std::cmp::Ordering::Equal) if b.taxon < a.taxon => b,
                _ => a,
            })
            .expect("every rank has at least one taxon")
    };
    for rank in Rank::ALL.iter().rev() {
        let top = best(*rank);
        if top.probability >= threshold {
            return Decision { taxon: top.taxon.clone(), rank: *rank, confidence: top.probability, below_threshold: false };
        }
    }
    let top = best(Rank::Order);
    Decision { taxon: top.taxon.clone(), rank: Rank::Order, confidence: top.probability, below_threshold: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng as _;

    fn random_probs(rng: &mut crate::rng::Rng, k: usize) -> ProbVector {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(3)).collect();
        let s: f64 = raw.iter().sum();
        ProbVector::new(raw.into_iter().map(|v| v / s).collect()).unwrap()
    }

    fn bombus_example(tree: &TaxonomyTree) -> ProbVector {
        let mut v = vec![0.0; 16];
        v[tree.species_index("Bombus lapidarius").unwrap()] = 0.40;
        v[tree.species_index("Bombus terrestris").unwrap()] = 0.35;
        v[tree.species_index("Apis mellifica").unwrap()] = 0.10;
        v[tree.species_index("Eristalis tenax").unwrap()] = 0.15;
        ProbVector::new(v).unwrap()
    }

    #[test]
    fn bundled_counts() {
        let t = TaxonomyTree::table1();
        assert_eq!(t.counts(), (16, 15, 8, 5));
        assert_eq!(t.species_names()[0], "Apis mellifica");
        assert_eq!(t.species_names()[15], "Graphosoma lineatum");
        assert_eq!(parse_taxonomy(&t.to_tsv()).unwrap().species_names(), t.species_names());
    }

    #[test]
    fn single_species() {
        let t = parse_taxonomy("Diptera\tSyrphidae\tEristalis\ttenax\n").unwrap();
        assert_eq!(t.counts(), (1, 1, 1, 1));
    }

    #[test]
    fn parse_errors_name_lines() {
        let two_genera = "Hymenoptera\tApidae\tApis\tApis mellifica\nHymenoptera\tApidae\tBombus\tApis mellifica\n";
        assert!(matches!(parse_taxonomy(two_genera), Err(TaxonomyError::ParentConflict { line: 2, rank: Rank::Species, .. })));
        let dup = "A\tB\tC\td\n# comment\nA\tB\tC\td\n";
        assert!(matches!(parse_taxonomy(dup), Err(TaxonomyError::DuplicateSpecies { line: 3, .. })));
        let genus_two_families = "A\tB\tC\td\nA\tE\tC\tf\n";
        assert!(matches!(parse_taxonomy(genus_two_families), Err(TaxonomyError::ParentConflict { line: 2, rank: Rank::Genus, .. })));
        let rank_reuse = "A\tB\tC\td\nA\tC\tG\th\n";
        assert!(matches!(parse_taxonomy(rank_reuse), Err(TaxonomyError::RankViolation { line: 2, .. })));
        assert!(matches!(parse_taxonomy("A\t\tC\td\n"), Err(TaxonomyError::Orphan { line: 1, rank: Rank::Family })));
        assert!(matches!(parse_taxonomy("A\tB\tC\n"), Err(TaxonomyError::Columns { line: 1, found: 3 })));
        assert_eq!(parse_taxonomy("\n# nothing\n"), Err(TaxonomyError::Empty));
    }

    #[test]
    fn rollup_examples() {
        let t = TaxonomyTree::table1();
        let r = rollup(&bombus_example(&t), &t).unwrap();
        assert!((r.probability("Bombus").unwrap() - 0.75).abs() < 1e-12);

        let one = rollup(&ProbVector::one_hot(16, 5), &t).unwrap();
        let chain: Vec<&str> = t.lineage(5).iter().map(|&id| t.taxon(id).name.as_str()).collect();
        assert_eq!(chain, vec!["Vespula germanica", "Vespula", "Vespidae", "Hymenoptera"]);
        for rank in Rank::ALL {
            for tp in one.rank(rank) {
                let expected = if chain.contains(&tp.taxon.as_str()) { 1.0 } else { 0.0 };
                assert_eq!(tp.probability, expected, "{}", tp.taxon);
            }
        }

        let uni = rollup(&ProbVector::uniform(16), &t).unwrap();
        assert_eq!(uni.probability("Hymenoptera").unwrap(), 7.0 / 16.0);
        assert_eq!(uni.probability("Diptera").unwrap(), 5.0 / 16.0);
        assert_eq!(uni.probability("Coleoptera").unwrap(), 2.0 / 16.0);

        assert!(matches!(rollup(&ProbVector::uniform(3), &t), Err(TaxonomyError::Misaligned { got: 3, want: 16 })));
    }

    #[test]
    fn decide_examples() {
        let t = TaxonomyTree::table1();
        let d = decide(&rollup(&bombus_example(&t), &t).unwrap(), 0.7);
        assert_eq!((d.taxon.as_str(), d.rank), ("Bombus", Rank::Genus));
        assert!((d.confidence - 0.75).abs() < 1e-12);
        assert!(!d.below_threshold);

        let d = decide(&rollup(&ProbVector::one_hot(16, 9), &t).unwrap(), 1.0);
        assert_eq!((d.taxon.as_str(), d.rank, d.confidence), ("Panorpa communis", Rank::Species, 1.0));

        let d = decide(&rollup(&ProbVector::uniform(16), &t).unwrap(), 0.4);
        assert_eq!((d.taxon.as_str(), d.rank, d.confidence), ("Hymenoptera", Rank::Order, 7.0 / 16.0));

        let d = decide(&rollup(&ProbVector::uniform(16), &t).unwrap(), 0.9);
        assert_eq!(d.taxon, "Hymenoptera");
        assert!(d.below_threshold);
    }

    #[test]
    fn alphabetical_tie_break() {
        let t = parse_taxonomy("O\tF\tZeta\tz\nO\tF\tAlpha\ta\n").unwrap();
        let d = decide(&rollup(&ProbVector::uniform(2), &t).unwrap(), 0.5);
        assert_eq!((d.taxon.as_str(), d.rank), ("Alpha a", Rank::Species));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        assert!(serde_json::from_str::<ProbVector>("[0.2, 0.2]").is_err());
    }

    #[test]
    fn rollup_conserves_mass_and_is_monotone() {
        let t = TaxonomyTree::table1();
        let mut rng = crate::rng::rng(3);
        for _ in 0..1000 {
            let p = random_probs(&mut rng, 16);
            let r = rollup(&p, &t).unwrap();
            for rank in Rank::ALL {
                let s: f64 = r.rank(rank).iter().map(|x| x.probability).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
            let mass: HashMap<usize, f64> =
                Rank::ALL.iter().flat_map(|&k| r.rank(k)).map(|x| (x.id, x.probability)).collect();
            for taxon in t.taxa() {
                if let Some(parent) = taxon.parent {
                    assert!(mass[&parent] >= mass[&taxon.id]);
                }
            }
            let top = p.values()[p.argmax()];
            assert_eq!(decide(&r, top).rank, Rank::Species);
        }
    }

    #[test]
    fn permutation_invariance() {
        let t = TaxonomyTree::table1();
        let lines: Vec<&str> = TABLE1_TSV.lines().collect();
        let mut rng = crate::rng::rng(8);
        for _ in 0..50 {
            let mut order: Vec<usize> = (0..16).collect();
            order.shuffle(&mut rng);
            let permuted_text: String = order.iter().map(|&i| format!("{}\n", lines[i])).collect();
            let pt = parse_taxonomy(&permuted_text).unwrap();
            let p = random_probs(&mut rng, 16);
            let pp = ProbVector::new(order.iter().map(|&i| p.values()[i]).collect()).unwrap();
            for tau in [0.2, 0.5, 0.8] {
                let a = decide(&rollup(&p, &t).unwrap(), tau);
                let b = decide(&rollup(&pp, &pt).unwrap(), tau);
                assert_eq!(a.taxon, b.taxon);
            }
        }
    }
}
