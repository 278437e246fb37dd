use std::collections::HashSet;
use std::path::{Path, PathBuf};

use super::split::Split;
use super::EvalError;
use crate::taxonomy::TaxonomyTree;

/// One line of a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub image: PathBuf,
    pub species: String,
    /// Species index in the taxonomy.
    pub class_id: usize,
    pub mask: Option<PathBuf>,
    pub split: Option<Split>,
}

/// Validated dataset listing, species resolved against a taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Species names in taxonomy order.
    pub classes: Vec<String>,
}

impl DatasetManifest {
    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.class_id).collect()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Manifest text: `image<TAB>species<TAB>[mask]<TAB>[split]` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let mask = r.mask.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            let split = r.split.map(|s| s.to_string()).unwrap_or_default();
            let line = format!("{}\t{}\t{}\t{}", r.image.display(), r.species, mask, split);
            out.push_str(line.trim_end_matches('\t'));
            out.push('\n');
        }
        out
    }

    /// Builds a manifest from records whose species are already known to `tree`.
    pub fn from_records(records: Vec<ManifestRecord>, tree: &TaxonomyTree) -> Self {
        Self { records, classes: tree.species_names().into_iter().map(String::from).collect() }
    }
}

/// Parses manifest text; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str, tree: &TaxonomyTree) -> Result<DatasetManifest, EvalError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| EvalError::Manifest { line, message };
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
        if !(2..=4).contains(&cols.len()) {
            return Err(err(format!("expected 2 to 4 tab-separated fields, found {}", cols.len())));
        }
        if cols[0].is_empty() {
            return Err(err("empty image path".into()));
        }
        let class_id = tree.species_index(cols[1]).ok_or_else(|| err(format!("unknown species {:?}", cols[1])))?;
        if !seen.insert(cols[0].to_string()) {
            return Err(err(format!("duplicate image path {:?}", cols[0])));
        }
        let mask = cols.get(2).filter(|m| !m.is_empty()).map(PathBuf::from);
        let split = match cols.get(3).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<Split>().map_err(err)?),
            None => None,
        };
        records.push(ManifestRecord { image: PathBuf::from(cols[0]), species: cols[1].to_string(), class_id, mask, split });
    }
    Ok(DatasetManifest::from_records(records, tree))
}

pub fn load_manifest(path: &Path, tree: &TaxonomyTree) -> Result<DatasetManifest, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_manifest(&text, tree)
}
