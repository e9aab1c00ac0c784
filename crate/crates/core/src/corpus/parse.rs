use std::collections::HashSet;
use std::io::BufRead;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::lexicon::validate_id;
use crate::error::{Error, Result};

/// One publication abstract. The title, when the source has one, is
/// prepended to the body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Abstract {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    /// PubMed citation XML (`PubmedArticle`) or JATS article XML (`article`).
    PubmedXml,
    /// One record per line: `id<TAB>text`.
    LineDelimited,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedAbstracts {
    pub abstracts: Vec<Abstract>,
    /// Records that carried no abstract body.
    pub skipped: usize,
}

impl ParsedAbstracts {
    /// Appends another parse result, rejecting ids already present.
    pub fn extend(&mut self, other: ParsedAbstracts) -> Result<()> {
        let mut seen: HashSet<&str> = self.abstracts.iter().map(|a| a.id.as_str()).collect();
        for a in &other.abstracts {
            if !seen.insert(a.id.as_str()) {
                return Err(Error::validation(format!("duplicate abstract id {:?}", a.id)));
            }
        }
        self.abstracts.extend(other.abstracts);
        self.skipped += other.skipped;
        Ok(())
    }
}

pub fn parse_abstracts<R: BufRead>(source: R, format: SourceFormat) -> Result<ParsedAbstracts> {
    let parsed = match format {
        SourceFormat::PubmedXml => parse_xml(source)?,
        SourceFormat::LineDelimited => parse_lines(source)?,
    };
    let mut seen = HashSet::new();
    for a in &parsed.abstracts {
        if !seen.insert(a.id.as_str()) {
            return Err(Error::validation(format!("duplicate abstract id {:?}", a.id)));
        }
    }
    if parsed.skipped > 0 {
        warn!(skipped = parsed.skipped, "records without an abstract body were skipped");
    }
    Ok(parsed)
}

fn parse_lines<R: BufRead>(mut source: R) -> Result<ParsedAbstracts> {
    let mut out = ParsedAbstracts::default();
    let mut buf = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let n = source.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
            offset: offset + e.valid_up_to() as u64,
            message: format!("invalid UTF-8 on line {line_no}"),
        })?;
        offset += n as u64;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = match line.split_once('\t') {
            Some((id, text)) => (id, text.trim()),
            None => (line, ""),
        };
        validate_id(id, "abstract id")
            .map_err(|e| Error::row("abstracts", line_no, e.to_string()))?;
        if text.is_empty() {
            out.skipped += 1;
            continue;
        }
        out.abstracts.push(Abstract {
            id: id.to_string(),
            text: text.to_string(),
        });
    }
    Ok(out)
}

/// Element names whose boundaries do not separate words.
const INLINE_ELEMENTS: &[&str] = &[
    "i", "b", "u", "sup", "sub", "italic", "bold", "underline", "sc", "monospace",
];

#[derive(Default)]
struct RecordState {
    id: Option<String>,
    pmid_id: Option<String>,
    title: Option<String>,
    body: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Capture {
    Id { pmid: bool },
    Title,
    Abstract,
}

fn is_record(name: &[u8]) -> bool {
    matches!(name, b"PubmedArticle" | b"PubmedBookArticle" | b"article")
}

fn xml_error(offset: u64, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        offset,
        message: e.to_string(),
    }
}

fn parse_xml<R: BufRead>(source: R) -> Result<ParsedAbstracts> {
    let mut reader = Reader::from_reader(source);
    reader.config_mut().check_end_names = true;

    let mut out = ParsedAbstracts::default();
    let mut buf = Vec::new();
    let mut open: Vec<Vec<u8>> = Vec::new();
    let mut record: Option<RecordState> = None;
    let mut record_depth = 0usize;
    // (capture kind, depth at which it started)
    let mut capture: Option<(Capture, usize)> = None;
    let mut text = String::new();
    // reference lists carry their own article titles
    let mut skip_depth: Option<usize> = None;

    loop {
        let pos = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_error(reader.buffer_position().max(pos), e))?;
        match event {
            Event::Start(e) => {
                let name = e.local_name().as_ref().to_vec();
                open.push(name.clone());
                let depth = open.len();
                if record.is_none() && is_record(&name) {
                    record = Some(RecordState::default());
                    record_depth = depth;
                } else if let Some(state) = record.as_mut() {
                    if skip_depth.is_none() && matches!(name.as_slice(), b"ref-list" | b"back" | b"CommentsCorrectionsList" | b"ReferenceList") {
                        skip_depth = Some(depth);
                    }
                    if skip_depth.is_none() && capture.is_none() {
                        capture = start_capture(&e, &name, state, pos)?.map(|c| (c, depth));
                        text.clear();
                    } else if capture.is_some() && !INLINE_ELEMENTS.contains(&as_str(&name)) {
                        text.push(' ');
                    }
                }
            }
            Event::Empty(e) => {
                if capture.is_some() && !INLINE_ELEMENTS.contains(&as_str(e.local_name().as_ref())) {
                    text.push(' ');
                }
            }
            Event::End(_) => {
                let depth = open.len();
                let name = open.pop().unwrap_or_default();
                if let Some((kind, start)) = capture {
                    if start == depth {
                        if let Some(state) = record.as_mut() {
                            finish_capture(kind, normalize_ws(&text), state);
                        }
                        capture = None;
                        text.clear();
                    } else if !INLINE_ELEMENTS.contains(&as_str(&name)) {
                        text.push(' ');
                    }
                }
                if skip_depth == Some(depth) {
                    skip_depth = None;
                }
                if record.is_some() && depth == record_depth {
                    let state = record.take().unwrap_or_default();
                    finish_record(state, pos, &mut out)?;
                }
            }
            Event::Text(t) => {
                if capture.is_some() {
                    let s = t.xml_content().map_err(|e| xml_error(pos, e))?;
                    text.push_str(&s);
                }
            }
            Event::CData(t) => {
                if capture.is_some() {
                    let s = t.xml_content().map_err(|e| xml_error(pos, e))?;
                    text.push_str(&s);
                }
            }
            Event::GeneralRef(r) => {
                if capture.is_some() {
                    if let Some(c) = r.resolve_char_ref().map_err(|e| xml_error(pos, e))? {
                        text.push(c);
                    } else {
                        let name = r.decode().map_err(|e| xml_error(pos, e))?;
                        match quick_xml::escape::resolve_predefined_entity(&name) {
                            Some(v) => text.push_str(v),
                            None => {
                                return Err(xml_error(pos, format!("unknown entity &{name};")))
                            }
                        }
                    }
                }
            }
            Event::Eof => {
                if let Some(name) = open.last() {
                    return Err(xml_error(
                        reader.buffer_position(),
                        format!("unexpected end of document inside <{}>", as_str(name)),
                    ));
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(out)
}

fn as_str(name: &[u8]) -> &str {
    std::str::from_utf8(name).unwrap_or("")
}

fn start_capture(
    e: &BytesStart<'_>,
    name: &[u8],
    state: &RecordState,
    pos: u64,
) -> Result<Option<Capture>> {
    Ok(match name {
        b"PMID" if state.pmid_id.is_none() => Some(Capture::Id { pmid: true }),
        b"article-id" => {
            let pmid = match e
                .try_get_attribute("pub-id-type")
                .map_err(|err| xml_error(pos, err))?
            {
                Some(attr) => attr.value.as_ref() == b"pmid",
                None => false,
            };
            if (pmid && state.pmid_id.is_none()) || (!pmid && state.id.is_none()) {
                Some(Capture::Id { pmid })
            } else {
                None
            }
        }
        b"ArticleTitle" | b"article-title" | b"BookTitle" if state.title.is_none() => {
            Some(Capture::Title)
        }
        b"Abstract" | b"abstract" => Some(Capture::Abstract),
        _ => None,
    })
}

fn finish_capture(kind: Capture, value: String, state: &mut RecordState) {
    match kind {
        Capture::Id { pmid: true } if !value.is_empty() => state.pmid_id = Some(value),
        Capture::Id { pmid: false } if !value.is_empty() => state.id = Some(value),
        Capture::Title if !value.is_empty() => state.title = Some(value),
        Capture::Abstract => {
            if !value.is_empty() {
                match state.body.as_mut() {
                    Some(body) => {
                        body.push(' ');
                        body.push_str(&value);
                    }
                    None => state.body = Some(value),
                }
            }
        }
        _ => {}
    }
}

fn finish_record(state: RecordState, pos: u64, out: &mut ParsedAbstracts) -> Result<()> {
    let Some(id) = state.pmid_id.or(state.id) else {
        return Err(xml_error(pos, "record without an identifier"));
    };
    validate_id(&id, "abstract id").map_err(|e| xml_error(pos, e))?;
    match state.body {
        Some(body) => {
            let text = match state.title {
                Some(title) => format!("{title} {body}"),
                None => body,
            };
            out.abstracts.push(Abstract { id, text });
        }
        None => out.skipped += 1,
    }
    Ok(())
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
