//! Abstract ingestion, tokenization, drug-lexicon matching, cardiac-abstract
//! filtering and corpus statistics.

mod lexicon;
mod parse;
mod tokenize;

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lexicon::{match_drugs, DrugEntry, DrugId, DrugLexicon};
pub use parse::{parse_abstracts, Abstract, ParsedAbstracts, SourceFormat};
pub use tokenize::{is_token_char, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedAbstract {
    pub id: String,
    pub tokens: Vec<String>,
    pub drug_mentions: BTreeSet<DrugId>,
}

impl TokenizedAbstract {
    pub fn mentions(&self, drug: &str) -> bool {
        self.drug_mentions.contains(drug)
    }
}

pub fn tokenize_abstract(abstract_: &Abstract, lexicon: &DrugLexicon) -> TokenizedAbstract {
    let tokens = tokenize(&abstract_.text);
    let drug_mentions = match_drugs(&tokens, lexicon);
    TokenizedAbstract {
        id: abstract_.id.clone(),
        tokens,
        drug_mentions,
    }
}

/// Tokenizes and matches every abstract in parallel; output keeps input order.
pub fn tokenize_all(abstracts: &[Abstract], lexicon: &DrugLexicon) -> Vec<TokenizedAbstract> {
    abstracts
        .par_iter()
        .map(|a| tokenize_abstract(a, lexicon))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub retention_ratio: f64,
}

/// Keeps the "cardiac abstracts": those mentioning at least one lexicon drug.
/// Mentions of ids outside the lexicon are dropped first.
pub fn filter_cardiac(
    abstracts: Vec<TokenizedAbstract>,
    lexicon: &DrugLexicon,
) -> (Vec<TokenizedAbstract>, FilterReport) {
    let input = abstracts.len();
    let kept: Vec<TokenizedAbstract> = abstracts
        .into_iter()
        .filter_map(|mut a| {
            a.drug_mentions.retain(|d| lexicon.contains(d.as_str()));
            (!a.drug_mentions.is_empty()).then_some(a)
        })
        .collect();
    let retained = kept.len();
    let report = FilterReport {
        input,
        retained,
        retention_ratio: if input == 0 {
            0.0
        } else {
            retained as f64 / input as f64
        },
    };
    (kept, report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_abstracts: usize,
    pub avg_drugs_per_abstract: f64,
    pub max_drugs_per_abstract: usize,
    pub avg_words_per_abstract: f64,
    /// Mean over non-empty abstracts of tokens / distinct tokens.
    pub avg_count_per_word: f64,
    pub n_distinct_words: usize,
}

pub fn corpus_stats(abstracts: &[TokenizedAbstract]) -> CorpusStats {
    if abstracts.is_empty() {
        return CorpusStats::default();
    }
    let n = abstracts.len();
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut total_words = 0usize;
    let mut total_drugs = 0usize;
    let mut max_drugs = 0usize;
    let mut ratio_sum = 0.0;
    let mut non_empty = 0usize;
    for a in abstracts {
        total_drugs += a.drug_mentions.len();
        max_drugs = max_drugs.max(a.drug_mentions.len());
        total_words += a.tokens.len();
        let distinct: HashSet<&str> = a.tokens.iter().map(String::as_str).collect();
        if !distinct.is_empty() {
            ratio_sum += a.tokens.len() as f64 / distinct.len() as f64;
            non_empty += 1;
        }
        vocab.extend(distinct);
    }
    CorpusStats {
        n_abstracts: n,
        avg_drugs_per_abstract: total_drugs as f64 / n as f64,
        max_drugs_per_abstract: max_drugs,
        avg_words_per_abstract: total_words as f64 / n as f64,
        avg_count_per_word: if non_empty == 0 {
            0.0
        } else {
            ratio_sum / non_empty as f64
        },
        n_distinct_words: vocab.len(),
    }
}

/// Counts how many of the lexicon's cardiac drugs appear in at least one
/// abstract. Cardiac drugs absent from the corpus still take part in pair
/// enumeration; this figure is reported alongside the lexicon count.
pub fn cardiac_drugs_mentioned(abstracts: &[TokenizedAbstract], lexicon: &DrugLexicon) -> usize {
    let seen: HashSet<&str> = abstracts
        .iter()
        .flat_map(|a| &a.drug_mentions)
        .map(DrugId::as_str)
        .filter(|d| lexicon.is_cardiac(d))
        .collect();
    seen.len()
}


const TOKENIZED_HEADER: &str = "id\tdrug_mentions\ttokens";

/// Rows `id<TAB>mentions<TAB>tokens`, mentions joined by `|` and tokens by
/// single spaces, after any `# key=value` header lines.
pub fn write_tokenized<W: Write>(
    mut w: W,
    abstracts: &[TokenizedAbstract],
    extra_header: &[(&str, String)],
) -> std::io::Result<()> {
    for (k, v) in extra_header {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "{TOKENIZED_HEADER}")?;
    for a in abstracts {
        let mentions: Vec<&str> = a.drug_mentions.iter().map(DrugId::as_str).collect();
        writeln!(w, "{}\t{}\t{}", a.id, mentions.join("|"), a.tokens.join(" "))?;
    }
    Ok(())
}

pub fn read_tokenized<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<TokenizedAbstract>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.starts_with('#') || line == TOKENIZED_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::row(source_name, line_no, "expected id, mentions and tokens"));
        }
        let drug_mentions = fields[1]
            .split('|')
            .filter(|m| !m.is_empty())
            .map(DrugId::new)
            .collect::<Result<BTreeSet<_>>>()
            .map_err(|e| Error::row(source_name, line_no, e.to_string()))?;
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::row(source_name, line_no, format!("duplicate abstract id {:?}", fields[0])));
        }
        out.push(TokenizedAbstract {
            id: fields[0].to_string(),
            tokens: fields[2].split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
            drug_mentions,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(id: &str, text: &str, mentions: &[&str]) -> TokenizedAbstract {
        TokenizedAbstract {
            id: id.into(),
            tokens: tokenize(text),
            drug_mentions: mentions.iter().map(|m| DrugId::from(*m)).collect(),
        }
    }

    fn lexicon() -> DrugLexicon {
        DrugLexicon::from_names([
            ("furosemide", vec!["furosemide"], true),
            ("digoxin", vec!["digoxin"], true),
            ("warfarin", vec!["warfarin"], false),
        ])
        .unwrap()
    }

    #[test]
    fn tokenized_round_trip() {
        let abstracts = vec![tok("1", "a a-b c", &["furosemide", "digoxin"]), tok("x 2", "", &[])];
        let mut buf = Vec::new();
        write_tokenized(&mut buf, &abstracts, &[("config", "d".into())]).unwrap();
        assert_eq!(read_tokenized(buf.as_slice(), "t").unwrap(), abstracts);
        let dup = "1\t\ta\n1\t\tb\n";
        assert!(read_tokenized(dup.as_bytes(), "t").is_err());
    }

    #[test]
    fn stats_of_empty_corpus_are_zero() {
        assert_eq!(corpus_stats(&[]), CorpusStats::default());
    }

    #[test]
    fn stats_hand_computed() {
        let stats = corpus_stats(&[tok("1", "a a b", &["furosemide"]), tok("2", "b c", &[])]);
        assert_eq!(stats.n_abstracts, 2);
        assert_eq!(stats.avg_words_per_abstract, 2.5);
        assert_eq!(stats.n_distinct_words, 3);
        assert_eq!(stats.avg_count_per_word, 5.0 / 4.0);
        assert_eq!(stats.avg_drugs_per_abstract, 0.5);
        assert_eq!(stats.max_drugs_per_abstract, 1);
    }

    #[test]
    fn filter_keeps_mentioning_abstracts() {
        let lex = lexicon();
        let abstracts = vec![
            tokenize_abstract(
                &Abstract {
                    id: "a".into(),
                    text: "Furosemide dosing".into(),
                },
                &lex,
            ),
            tokenize_abstract(
                &Abstract {
                    id: "b".into(),
                    text: "Unrelated text".into(),
                },
                &lex,
            ),
        ];
        let (kept, report) = filter_cardiac(abstracts, &lex);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
        assert_eq!(report.input, 2);
        assert_eq!(report.retained, 1);
        assert_eq!(report.retention_ratio, 0.5);
    }

    #[test]
    fn filter_drops_foreign_mentions_and_is_idempotent() {
        let lex = lexicon();
        let abstracts = vec![tok("x", "x", &["aspirin"]), tok("y", "y", &["aspirin", "digoxin"])];
        let (once, _) = filter_cardiac(abstracts, &lex);
        assert_eq!(once.len(), 1);
        assert_eq!(once[0].drug_mentions.len(), 1);
        let (twice, _) = filter_cardiac(once.clone(), &lex);
        assert_eq!(once, twice);
    }

    #[test]
    fn cardiac_mention_count() {
        let lex = lexicon();
        let abstracts = vec![tok("1", "", &["furosemide", "warfarin"]), tok("2", "", &["furosemide"])];
        assert_eq!(cardiac_drugs_mentioned(&abstracts, &lex), 1);
    }
}
