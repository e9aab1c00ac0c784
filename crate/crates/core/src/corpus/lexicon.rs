use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use crate::error::{Error, Result};

/// Canonical drug identifier. Case is preserved; ids are opaque.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DrugId(String);

impl DrugId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        validate_id(&id, "drug id")?;
        Ok(DrugId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Ids end up as fields of tab-separated artifacts with `|`-joined lists.
pub(crate) fn validate_id(id: &str, what: &str) -> Result<()> {
    if id.trim().is_empty() {
        return Err(Error::validation(format!("{what} must be non-empty")));
    }
    if id.trim() != id {
        return Err(Error::validation(format!(
            "{what} {id:?} has leading or trailing whitespace"
        )));
    }
    if id.contains(['\t', '\n', '\r', '|']) {
        return Err(Error::validation(format!(
            "{what} {id:?} contains a tab, newline or '|'"
        )));
    }
    Ok(())
}

impl fmt::Display for DrugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for DrugId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for DrugId {
    /// Panics on an invalid id; intended for literals and tests.
    fn from(s: &str) -> Self {
        DrugId::new(s).expect("invalid drug id")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrugEntry {
    /// Name phrases, each a non-empty token sequence.
    pub phrases: BTreeSet<Vec<String>>,
    pub cardiac: bool,
}

/// The drug lexicon: every drug of interest with its name phrases, and the
/// cardiac seed subset flagged.
#[derive(Debug, Clone, Default)]
pub struct DrugLexicon {
    entries: BTreeMap<DrugId, DrugEntry>,
    /// First phrase token -> (phrase, drug) candidates.
    by_first_token: HashMap<String, Vec<(Vec<String>, DrugId)>>,
}

impl DrugLexicon {
    pub fn new(entries: BTreeMap<DrugId, DrugEntry>) -> Result<Self> {
        let mut by_first_token: HashMap<String, Vec<(Vec<String>, DrugId)>> = HashMap::new();
        for (id, entry) in &entries {
            if entry.phrases.is_empty() {
                return Err(Error::validation(format!("drug {id} has no name phrase")));
            }
            for phrase in &entry.phrases {
                let Some(first) = phrase.first() else {
                    return Err(Error::validation(format!("drug {id} has an empty phrase")));
                };
                by_first_token
                    .entry(first.clone())
                    .or_default()
                    .push((phrase.clone(), id.clone()));
            }
        }
        Ok(Self {
            entries,
            by_first_token,
        })
    }

    /// Builds a lexicon from `(id, [phrase text..], cardiac)` triples; phrase
    /// text is tokenized with the corpus tokenizer.
    pub fn from_names<'a, I>(drugs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Vec<&'a str>, bool)>,
    {
        let mut entries = BTreeMap::new();
        for (id, names, cardiac) in drugs {
            let id = DrugId::new(id)?;
            let mut entry = DrugEntry {
                cardiac,
                ..DrugEntry::default()
            };
            for name in names {
                let phrase = tokenize(name);
                if phrase.is_empty() {
                    return Err(Error::validation(format!(
                        "phrase {name:?} for {id} has no tokens"
                    )));
                }
                entry.phrases.insert(phrase);
            }
            entries.insert(id, entry);
        }
        Self::new(entries)
    }

    /// Reads the tab-delimited lexicon file: `drug_id  phrase  cardiac_flag`
    /// per row, `#` lines and blank lines ignored. A drug may span several
    /// rows, one per phrase, with a consistent flag.
    pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut entries: BTreeMap<DrugId, DrugEntry> = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::row(
                    source_name,
                    line_no,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let id = DrugId::new(fields[0].trim())
                .map_err(|e| Error::row(source_name, line_no, e.to_string()))?;
            let phrase = tokenize(fields[1]);
            if phrase.is_empty() {
                return Err(Error::row(source_name, line_no, "phrase has no tokens"));
            }
            let cardiac = parse_flag(fields[2].trim())
                .ok_or_else(|| Error::row(source_name, line_no, "cardiac flag must be 0/1"))?;
            match entries.get_mut(&id) {
                Some(entry) => {
                    if entry.cardiac != cardiac {
                        return Err(Error::row(
                            source_name,
                            line_no,
                            format!("conflicting cardiac flag for {id}"),
                        ));
                    }
                    entry.phrases.insert(phrase);
                }
                None => {
                    let mut entry = DrugEntry {
                        cardiac,
                        ..DrugEntry::default()
                    };
                    entry.phrases.insert(phrase);
                    entries.insert(id, entry);
                }
            }
        }
        Self::new(entries)
    }

    /// Fails unless exactly `expected` drugs carry the cardiac flag.
    pub fn expect_cardiac_count(&self, expected: usize) -> Result<()> {
        let found = self.cardiac().count();
        if found != expected {
            return Err(Error::validation(format!(
                "lexicon flags {found} cardiac drugs, expected {expected}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&DrugEntry> {
        self.entries.get(id)
    }

    pub fn is_cardiac(&self, id: &str) -> bool {
        self.entries.get(id).is_some_and(|e| e.cardiac)
    }

    pub fn ids(&self) -> impl Iterator<Item = &DrugId> {
        self.entries.keys()
    }

    pub fn cardiac(&self) -> impl Iterator<Item = &DrugId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.cardiac)
            .map(|(id, _)| id)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&DrugId, &DrugEntry)> {
        self.entries.iter()
    }

    pub(crate) fn candidates(&self, first_token: &str) -> &[(Vec<String>, DrugId)] {
        self.by_first_token
            .get(first_token)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// All drugs with at least one phrase occurring as a contiguous token
/// subsequence. Every matching drug is reported, including drugs whose
/// phrase overlaps a longer match.
pub fn match_drugs(tokens: &[String], lexicon: &DrugLexicon) -> BTreeSet<DrugId> {
    let mut found = BTreeSet::new();
    for start in 0..tokens.len() {
        for (phrase, id) in lexicon.candidates(&tokens[start]) {
            if found.contains(id) {
                continue;
            }
            if tokens[start..].starts_with(phrase) {
                found.insert(id.clone());
            }
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn small() -> DrugLexicon {
        DrugLexicon::from_names([
            ("furosemide", vec!["furosemide", "lasix"], true),
            ("bumetanide", vec!["bumetanide"], true),
            ("digoxin", vec!["digoxin"], true),
            ("aspirin", vec!["acetyl salicylic acid", "aspirin"], false),
            ("salicylate", vec!["salicylic acid"], false),
        ])
        .unwrap()
    }

    #[test]
    fn figure_abstract_matches_two_diuretics() {
        let text = "Bumetanide and furosemide in heart failure. We assessed the handling \
                    of and response to oral bumetanide (1.0 and 2.0 mg) and to furosemide";
        let got = match_drugs(&toks(text), &small());
        let want: BTreeSet<DrugId> = ["bumetanide", "furosemide"].map(DrugId::from).into();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_tokens_match_nothing() {
        assert!(match_drugs(&[], &small()).is_empty());
    }

    #[test]
    fn multi_token_phrase_and_overlap_both_reported() {
        let got = match_drugs(&toks("acetyl salicylic acid"), &small());
        let want: BTreeSet<DrugId> = ["aspirin", "salicylate"].map(DrugId::from).into();
        assert_eq!(got, want);
        // partial phrase does not match
        assert!(match_drugs(&toks("acetyl salicylic"), &small()).is_empty());
    }

    #[test]
    fn read_lexicon_file() {
        let src = "# id\tphrase\tcardiac\nFurosemide\tfurosemide\t1\nFurosemide\tLasix\t1\n\nAspirin\tacetylsalicylic acid\t0\n";
        let lex = DrugLexicon::read(src.as_bytes(), "lex.tsv").unwrap();
        assert_eq!(lex.len(), 2);
        assert!(lex.is_cardiac("Furosemide"));
        assert!(!lex.is_cardiac("Aspirin"));
        assert_eq!(lex.get("Furosemide").unwrap().phrases.len(), 2);
        lex.expect_cardiac_count(1).unwrap();
        assert!(lex.expect_cardiac_count(44).is_err());
    }

    #[test]
    fn read_lexicon_rejects_bad_rows() {
        let err = DrugLexicon::read("a\tb\n".as_bytes(), "lex.tsv").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = DrugLexicon::read("a\tb\t1\na\tc\t0\n".as_bytes(), "lex.tsv").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(DrugLexicon::read("a\t...\t1\n".as_bytes(), "lex.tsv").is_err());
        assert!(DrugLexicon::read("a|b\tx\t1\n".as_bytes(), "lex.tsv").is_err());
    }
}
