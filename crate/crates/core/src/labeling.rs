//! Interaction catalog, pair enumeration, binary labels and interaction-type
//! templates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, DrugId, DrugLexicon};
use crate::error::{Error, Result};

pub const DRUG_PLACEHOLDER: &str = "(~drug~)";

/// Unordered drug pair stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DrugPair {
    first: DrugId,
    second: DrugId,
}

impl DrugPair {
    pub fn new(a: DrugId, b: DrugId) -> Result<Self> {
        if a == b {
            return Err(Error::validation(format!("self-pair ({a}, {a})")));
        }
        Ok(if a < b {
            DrugPair { first: a, second: b }
        } else {
            DrugPair { first: b, second: a }
        })
    }

    pub fn first(&self) -> &DrugId {
        &self.first
    }

    pub fn second(&self) -> &DrugId {
        &self.second
    }

    pub fn contains(&self, d: &DrugId) -> bool {
        &self.first == d || &self.second == d
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub description: String,
    /// Orientation of the first catalog row naming this pair, used when
    /// rendering alerts.
    pub display: (DrugId, DrugId),
}

/// Known interacting pairs with their free-text descriptions.
#[derive(Debug, Clone, Default)]
pub struct InteractionCatalog {
    pairs: BTreeMap<DrugPair, CatalogEntry>,
    partners: BTreeMap<DrugId, BTreeSet<DrugId>>,
    ordered_rows: BTreeSet<(DrugId, DrugId)>,
}

impl InteractionCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair; returns false when the unordered pair was already present
    /// (the first description is kept).
    pub fn insert(&mut self, a: DrugId, b: DrugId, description: impl Into<String>) -> Result<bool> {
        let pair = DrugPair::new(a.clone(), b.clone())?;
        self.ordered_rows.insert((a.clone(), b.clone()));
        if self.pairs.contains_key(&pair) {
            return Ok(false);
        }
        self.partners.entry(a.clone()).or_default().insert(b.clone());
        self.partners.entry(b.clone()).or_default().insert(a.clone());
        self.pairs.insert(
            pair,
            CatalogEntry {
                description: description.into(),
                display: (a, b),
            },
        );
        Ok(true)
    }

    /// Reads `drug_a<TAB>drug_b<TAB>description` rows. `#` lines, blank lines
    /// and a leading `drug_a drug_b description` header are ignored.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut catalog = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            if fields.len() != 3 {
                return Err(Error::row(
                    source_name,
                    line_no,
                    "expected drug_a, drug_b and description separated by tabs",
                ));
            }
            if line_no == 1 && fields[0] == "drug_a" && fields[1] == "drug_b" {
                continue;
            }
            let to_row_err = |e: Error| Error::row(source_name, line_no, e.to_string());
            let a = DrugId::new(fields[0].trim()).map_err(to_row_err)?;
            let b = DrugId::new(fields[1].trim()).map_err(to_row_err)?;
            catalog
                .insert(a, b, fields[2].trim())
                .map_err(|e| Error::row(source_name, line_no, e.to_string()))?;
        }
        Ok(catalog)
    }

    pub fn contains(&self, a: &DrugId, b: &DrugId) -> bool {
        a != b
            && self
                .partners
                .get(a)
                .is_some_and(|partners| partners.contains(b))
    }

    pub fn get(&self, a: &DrugId, b: &DrugId) -> Option<&CatalogEntry> {
        let pair = DrugPair::new(a.clone(), b.clone()).ok()?;
        self.pairs.get(&pair)
    }

    pub fn description(&self, a: &DrugId, b: &DrugId) -> Option<&str> {
        self.get(a, b).map(|e| e.description.as_str())
    }

    pub fn partners(&self, d: &DrugId) -> impl Iterator<Item = &DrugId> {
        self.partners.get(d).into_iter().flatten()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&DrugPair, &CatalogEntry)> {
        self.pairs.iter()
    }

    /// Number of unordered pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of distinct ordered rows read; a pair listed in both
    /// directions counts twice here and once in [`len`](Self::len).
    pub fn ordered_len(&self) -> usize {
        self.ordered_rows.len()
    }
}

/// All drugs considered: the cardiac seeds plus every catalog partner of a seed.
pub fn build_universe(cardiac: &BTreeSet<DrugId>, catalog: &InteractionCatalog) -> BTreeSet<DrugId> {
    let mut universe = cardiac.clone();
    for d in cardiac {
        universe.extend(catalog.partners(d).cloned());
    }
    universe
}

/// 1 if the unordered pair is in the catalog, else 0.
pub fn label_pair(cardiac: &DrugId, other: &DrugId, catalog: &InteractionCatalog) -> Result<u8> {
    if cardiac == other {
        return Err(Error::validation(format!("cannot label self-pair ({cardiac}, {other})")));
    }
    Ok(u8::from(catalog.contains(cardiac, other)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionSample {
    pub cardiac_drug: DrugId,
    pub other_drug: DrugId,
    pub label: u8,
    pub template_id: Option<usize>,
    pub abstract_ids: BTreeSet<String>,
}

impl InteractionSample {
    /// Stable key `cardiac|other`.
    pub fn key(&self) -> String {
        sample_key(&self.cardiac_drug, &self.other_drug)
    }
}

pub fn sample_key(cardiac: &DrugId, other: &DrugId) -> String {
    format!("{cardiac}|{other}")
}

/// One sample per (cardiac, other) with other in the universe. A pair of two
/// cardiac drugs appears once, with the lexicographically smaller id in the
/// cardiac slot. Output is ordered by (cardiac, other).
pub fn enumerate_samples(
    cardiac: &BTreeSet<DrugId>,
    universe: &BTreeSet<DrugId>,
    catalog: &InteractionCatalog,
) -> Vec<InteractionSample> {
    let mut samples = Vec::new();
    for c in cardiac {
        for o in universe {
            if o == c || (cardiac.contains(o) && o < c) {
                continue;
            }
            samples.push(InteractionSample {
                cardiac_drug: c.clone(),
                other_drug: o.clone(),
                label: u8::from(catalog.contains(c, o)),
                template_id: None,
                abstract_ids: BTreeSet::new(),
            });
        }
    }
    samples
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templated {
    pub text: String,
    /// Number of name occurrences replaced.
    pub replaced: usize,
}

fn name_phrases(drug: &DrugId, lexicon: &DrugLexicon) -> Vec<Vec<String>> {
    let mut phrases: Vec<Vec<String>> = lexicon
        .get(drug.as_str())
        .map(|e| e.phrases.iter().cloned().collect())
        .unwrap_or_default();
    let own = tokenize(drug.as_str());
    if !own.is_empty() && !phrases.contains(&own) {
        phrases.push(own);
    }
    phrases
}

/// Replaces every name of either drug in `description` by the placeholder.
/// Matching is case-insensitive on word boundaries, longest phrase first; a
/// drug id is always tried as one of its own names.
pub fn templateize(
    description: &str,
    drug_a: &DrugId,
    drug_b: &DrugId,
    lexicon: &DrugLexicon,
) -> Templated {
    let mut phrases = name_phrases(drug_a, lexicon);
    phrases.extend(name_phrases(drug_b, lexicon));
    phrases.sort_by(|x, y| {
        let len = |p: &Vec<String>| p.iter().map(String::len).sum::<usize>() + p.len();
        len(y).cmp(&len(x)).then_with(|| x.cmp(y))
    });
    phrases.dedup();
    if phrases.is_empty() {
        return Templated {
            text: description.to_string(),
            replaced: 0,
        };
    }
    let alternatives: Vec<String> = phrases
        .iter()
        .map(|p| {
            p.iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join(r"[\s\-]+")
        })
        .collect();
    let pattern = format!(r"(?i)\b(?:{})\b", alternatives.join("|"));
    let re = Regex::new(&pattern).expect("escaped phrases form a valid pattern");
    let replaced = re.find_iter(description).count();
    Templated {
        text: re.replace_all(description, DRUG_PLACEHOLDER).into_owned(),
        replaced,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTemplate {
    pub template_id: usize,
    pub text: String,
    pub support: usize,
}

/// Distinct interaction templates of a catalog, with dense ids assigned in
/// lexicographic order of template text.
#[derive(Debug, Clone, Default)]
pub struct TemplateTable {
    pub templates: Vec<InteractionTemplate>,
    pair_template: BTreeMap<DrugPair, usize>,
    /// Descriptions in which neither drug name was found.
    pub unmatched: usize,
}

impl TemplateTable {
    pub fn build(catalog: &InteractionCatalog, lexicon: &DrugLexicon) -> Self {
        let mut support: BTreeMap<String, usize> = BTreeMap::new();
        let mut per_pair: Vec<(DrugPair, String)> = Vec::with_capacity(catalog.len());
        let mut unmatched = 0;
        for (pair, entry) in catalog.pairs() {
            let t = templateize(&entry.description, pair.first(), pair.second(), lexicon);
            if t.replaced == 0 {
                unmatched += 1;
            }
            *support.entry(t.text.clone()).or_default() += 1;
            per_pair.push((pair.clone(), t.text));
        }
        if unmatched > 0 {
            tracing::warn!(unmatched, "interaction descriptions without a drug name");
        }
        let ids: BTreeMap<&str, usize> = support
            .keys()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let pair_template = per_pair
            .iter()
            .map(|(pair, text)| (pair.clone(), ids[text.as_str()]))
            .collect();
        let templates = support
            .iter()
            .enumerate()
            .map(|(template_id, (text, &support))| InteractionTemplate {
                template_id,
                text: text.clone(),
                support,
            })
            .collect();
        Self {
            templates,
            pair_template,
            unmatched,
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn template_of(&self, a: &DrugId, b: &DrugId) -> Option<usize> {
        let pair = DrugPair::new(a.clone(), b.clone()).ok()?;
        self.pair_template.get(&pair).copied()
    }

    /// Sets `template_id` on every positive sample.
    pub fn annotate(&self, samples: &mut [InteractionSample]) {
        for s in samples {
            s.template_id = if s.label == 1 {
                self.template_of(&s.cardiac_drug, &s.other_drug)
            } else {
                None
            };
        }
    }

    /// Rows `template_id<TAB>template_text<TAB>support_count`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "template_id\ttemplate_text\tsupport_count")?;
        for t in &self.templates {
            writeln!(w, "{}\t{}\t{}", t.template_id, t.text.replace(['\t', '\n'], " "), t.support)?;
        }
        Ok(())
    }
}


const SAMPLES_HEADER: &str = "cardiac_drug\tother_drug\tlabel\ttemplate_id\tabstract_ids";

/// Rows `cardiac<TAB>other<TAB>label<TAB>template_id<TAB>abstract_ids`;
/// a missing template is `-` and abstract ids are joined by `|`.
pub fn write_samples<W: Write>(
    mut w: W,
    samples: &[InteractionSample],
    extra_header: &[(&str, String)],
) -> std::io::Result<()> {
    for (k, v) in extra_header {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{SAMPLES_HEADER}")?;
    for s in samples {
        let template = s.template_id.map_or_else(|| "-".to_string(), |t| t.to_string());
        let ids: Vec<&str> = s.abstract_ids.iter().map(String::as_str).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{template}\t{}",
            s.cardiac_drug,
            s.other_drug,
            s.label,
            ids.join("|")
        )?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<InteractionSample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.starts_with('#') || line == SAMPLES_HEADER {
            continue;
        }
        let bad = |m: &str| Error::row(source_name, line_no, m.to_string());
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let cardiac_drug = DrugId::new(fields[0]).map_err(|e| bad(&e.to_string()))?;
        let other_drug = DrugId::new(fields[1]).map_err(|e| bad(&e.to_string()))?;
        let label = match fields[2] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label must be 0 or 1")),
        };
        let template_id = match fields[3] {
            "-" => None,
            t => Some(t.parse().map_err(|_| bad("bad template id"))?),
        };
        out.push(InteractionSample {
            cardiac_drug,
            other_drug,
            label,
            template_id,
            abstract_ids: fields[4].split('|').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> DrugId {
        DrugId::from(s)
    }

    fn set(ids: &[&str]) -> BTreeSet<DrugId> {
        ids.iter().map(|s| d(s)).collect()
    }

    fn catalog(pairs: &[(&str, &str)]) -> InteractionCatalog {
        let mut c = InteractionCatalog::new();
        for (a, b) in pairs {
            c.insert(d(a), d(b), format!("{a} affects {b}")).unwrap();
        }
        c
    }

    #[test]
    fn samples_round_trip() {
        let mut s = enumerate_samples(&set(&["A"]), &set(&["A", "B", "C"]), &catalog(&[("A", "B")]));
        s[0].template_id = Some(3);
        s[0].abstract_ids = ["p 1".to_string(), "p2".to_string()].into_iter().collect();
        let mut buf = Vec::new();
        write_samples(&mut buf, &s, &[]).unwrap();
        assert_eq!(read_samples(buf.as_slice(), "s").unwrap(), s);
    }

    #[test]
    fn universe_examples() {
        let cat = catalog(&[("A", "B"), ("A", "C"), ("X", "Y")]);
        assert_eq!(build_universe(&set(&["A"]), &cat), set(&["A", "B", "C"]));
        assert_eq!(build_universe(&set(&["A"]), &InteractionCatalog::new()), set(&["A"]));
    }

    #[test]
    fn labels() {
        let cat = catalog(&[("A", "B")]);
        assert_eq!(label_pair(&d("A"), &d("B"), &cat).unwrap(), 1);
        assert_eq!(label_pair(&d("B"), &d("A"), &cat).unwrap(), 1);
        assert_eq!(label_pair(&d("A"), &d("C"), &cat).unwrap(), 0);
        assert!(label_pair(&d("A"), &d("A"), &cat).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let cat = catalog(&[("A", "B")]);
        let s = enumerate_samples(&set(&["A"]), &set(&["A", "B", "C"]), &cat);
        let keys: Vec<String> = s.iter().map(|s| s.key()).collect();
        assert_eq!(keys, ["A|B", "A|C"]);
        assert_eq!(s[0].label, 1);
        assert_eq!(s[1].label, 0);

        let s = enumerate_samples(&set(&["A", "B"]), &set(&["A", "B"]), &cat);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].key(), "A|B");
    }

    #[test]
    fn catalog_reading_and_tallies() {
        let src = "drug_a\tdrug_b\tdescription\nA\tB\tA raises B\nB\tA\tB raises A\n# note\nA\tC\tA and C\n";
        let cat = InteractionCatalog::read(src.as_bytes(), "cat.tsv").unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.ordered_len(), 3);
        assert_eq!(cat.description(&d("B"), &d("A")), Some("A raises B"));
        assert_eq!(cat.get(&d("B"), &d("A")).unwrap().display, (d("A"), d("B")));
        assert!(InteractionCatalog::read("A\tA\tself\n".as_bytes(), "cat.tsv").is_err());
        assert!(InteractionCatalog::read("A\tB\n".as_bytes(), "cat.tsv").is_err());
    }

    fn lexicon() -> DrugLexicon {
        DrugLexicon::from_names([
            ("digoxin", vec!["digoxin", "lanoxin"], true),
            ("quinidine", vec!["quinidine"], false),
            ("aspirin", vec!["acetylsalicylic acid", "aspirin", "acid"], false),
        ])
        .unwrap()
    }

    #[test]
    fn template_example() {
        let t = templateize(
            "The serum concentration of Digoxin can be increased when it is combined with Quinidine.",
            &d("digoxin"),
            &d("quinidine"),
            &lexicon(),
        );
        assert_eq!(
            t.text,
            "The serum concentration of (~drug~) can be increased when it is combined with (~drug~)."
        );
        assert_eq!(t.replaced, 2);
    }

    #[test]
    fn template_without_names_is_unchanged() {
        let t = templateize("Increased bleeding risk.", &d("digoxin"), &d("quinidine"), &lexicon());
        assert_eq!(t.text, "Increased bleeding risk.");
        assert_eq!(t.replaced, 0);
    }

    #[test]
    fn longest_phrase_wins() {
        let t = templateize(
            "Acetylsalicylic  acid may increase digoxin levels.",
            &d("aspirin"),
            &d("digoxin"),
            &lexicon(),
        );
        assert_eq!(t.text, "(~drug~) may increase (~drug~) levels.");
    }

    #[test]
    fn same_template_same_id() {
        let mut cat = InteractionCatalog::new();
        cat.insert(d("digoxin"), d("quinidine"), "Digoxin may increase the QTc-prolonging activities of Quinidine.").unwrap();
        cat.insert(d("aspirin"), d("digoxin"), "Aspirin may increase the QTc-prolonging activities of Lanoxin.").unwrap();
        cat.insert(d("aspirin"), d("quinidine"), "The risk of bleeding rises when aspirin meets quinidine.").unwrap();
        let table = TemplateTable::build(&cat, &lexicon());
        assert_eq!(table.len(), 2);
        assert_eq!(
            table.template_of(&d("digoxin"), &d("quinidine")),
            table.template_of(&d("aspirin"), &d("digoxin"))
        );
        assert_ne!(
            table.template_of(&d("digoxin"), &d("quinidine")),
            table.template_of(&d("aspirin"), &d("quinidine"))
        );
        let ids: Vec<usize> = table.templates.iter().map(|t| t.template_id).collect();
        assert_eq!(ids, [0, 1]);
        assert_eq!(table.templates.iter().map(|t| t.support).sum::<usize>(), 3);
    }
}
