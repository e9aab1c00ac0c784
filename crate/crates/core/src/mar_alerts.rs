//! Medication administration records to exposure intervals, and overlapping
//! exposures of catalogued interacting pairs to alerts.
//!
//! The exposure model is deliberately naive: each administration keeps the
//! drug active for a fixed window (24 hours unless overridden per drug).
//! It has no pharmacokinetic basis.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeDelta, Utc};
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::DrugId;
use crate::error::{Error, Result};
use crate::labeling::{DrugPair, InteractionCatalog};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdminEvent {
    pub patient_id: String,
    pub drug: DrugId,
    pub time: DateTime<Utc>,
}

/// ISO-8601 timestamp. An explicit offset is converted to UTC; without one
/// the time is taken as UTC. Fractional seconds are dropped.
pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    let t = if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        t.with_timezone(&Utc)
    } else {
        ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
            .ok_or_else(|| format!("unparseable timestamp {s:?}"))?
            .and_utc()
    };
    if !(1900..=2100).contains(&t.year()) {
        return Err(format!("timestamp {s:?} outside 1900-2100"));
    }
    Ok(DateTime::from_timestamp(t.timestamp(), 0).expect("in range"))
}

/// Reads `patient_id,drug,timestamp` rows after a required header. Tabs are
/// used as the delimiter when the header contains one.
pub fn read_events<R: Read>(mut reader: R, source_name: &str) -> Result<Vec<AdminEvent>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::row(source_name, 1, e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    if names != ["patient_id", "drug", "timestamp"] {
        return Err(Error::row(
            source_name,
            1,
            format!("expected header patient_id,drug,timestamp, found {}", names.join(",")),
        ));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::row(source_name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::row(source_name, line, "expected 3 fields"));
        }
        if record[0].is_empty() {
            return Err(Error::row(source_name, line, "empty patient_id"));
        }
        let drug = DrugId::new(&record[1]).map_err(|e| Error::row(source_name, line, e.to_string()))?;
        let time = parse_timestamp(&record[2]).map_err(|m| Error::row(source_name, line, m))?;
        events.push(AdminEvent {
            patient_id: record[0].to_string(),
            drug,
            time,
        });
    }
    Ok(events)
}

/// Exposure window length, by default and per drug.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowConfig {
    pub default: TimeDelta,
    pub per_drug: BTreeMap<DrugId, TimeDelta>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            default: TimeDelta::hours(24),
            per_drug: BTreeMap::new(),
        }
    }
}

impl WindowConfig {
    pub fn hours(default_hours: f64) -> Result<Self> {
        Ok(Self {
            default: hours_to_delta(default_hours)?,
            per_drug: BTreeMap::new(),
        })
    }

    pub fn with_drug(mut self, drug: DrugId, hours: f64) -> Result<Self> {
        self.per_drug.insert(drug, hours_to_delta(hours)?);
        Ok(self)
    }

    pub fn window(&self, drug: &DrugId) -> TimeDelta {
        self.per_drug.get(drug).copied().unwrap_or(self.default)
    }
}

fn hours_to_delta(hours: f64) -> Result<TimeDelta> {
    let secs = (hours * 3600.0).round();
    if !(1.0..1e12).contains(&secs) {
        return Err(Error::validation(format!("exposure window of {hours} hours is not positive")));
    }
    Ok(TimeDelta::seconds(secs as i64))
}

/// Half-open `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ExposureInterval {
    pub patient_id: String,
    pub drug: DrugId,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Each event spawns `[t, t + W)`; per (patient, drug) overlapping or
/// touching intervals are merged. Sorted by patient, drug, start.
pub fn build_exposures(events: &[AdminEvent], windows: &WindowConfig) -> Vec<ExposureInterval> {
    let mut groups: BTreeMap<(&str, &DrugId), Vec<DateTime<Utc>>> = BTreeMap::new();
    for e in events {
        groups.entry((&e.patient_id, &e.drug)).or_default().push(e.time);
    }
    let mut out = Vec::new();
    for ((patient, drug), mut times) in groups {
        times.sort();
        let w = windows.window(drug);
        let mut cur: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
        for t in times {
            cur = match cur {
                Some((s, e)) if t <= e => Some((s, e.max(t + w))),
                Some((s, e)) => {
                    out.push(interval(patient, drug, s, e));
                    Some((t, t + w))
                }
                None => Some((t, t + w)),
            };
        }
        if let Some((s, e)) = cur {
            out.push(interval(patient, drug, s, e));
        }
    }
    out
}

fn interval(patient: &str, drug: &DrugId, start: DateTime<Utc>, end: DateTime<Utc>) -> ExposureInterval {
    ExposureInterval {
        patient_id: patient.to_string(),
        drug: drug.clone(),
        start,
        end,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DdiAlert {
    pub patient_id: String,
    /// In the orientation of the catalog row that introduced the pair.
    pub pair: (DrugId, DrugId),
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub effect: String,
}

impl DdiAlert {
    pub fn canonical_pair(&self) -> DrugPair {
        DrugPair::new(self.pair.0.clone(), self.pair.1.clone()).expect("alert pairs are distinct")
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start.date_naive()
    }

    /// Date of the last second inside the window.
    pub fn end_date(&self) -> NaiveDate {
        (self.end - TimeDelta::seconds(1)).date_naive()
    }

    /// `((A, B), ("start", "end"), "effect")`
    pub fn tuple(&self) -> String {
        format!(
            "(({}, {}), (\"{}\", \"{}\"), \"{}\")",
            self.pair.0,
            self.pair.1,
            self.start_date().format("%Y-%m-%d"),
            self.end_date().format("%Y-%m-%d"),
            self.effect
        )
    }

    fn sort_key(&self) -> (&str, DateTime<Utc>, DrugPair, DateTime<Utc>) {
        (&self.patient_id, self.start, self.canonical_pair(), self.end)
    }
}

type Span = (DateTime<Utc>, DateTime<Utc>);

/// Intersections of two sorted, disjoint interval lists, with touching
/// results merged.
fn intersect(a: &[Span], b: &[Span]) -> Vec<Span> {
    let (mut i, mut j) = (0, 0);
    let mut out: Vec<Span> = Vec::new();
    while i < a.len() && j < b.len() {
        let s = a[i].0.max(b[j].0);
        let e = a[i].1.min(b[j].1);
        if s < e {
            match out.last_mut() {
                Some(last) if last.1 >= s => last.1 = last.1.max(e),
                _ => out.push((s, e)),
            }
        }
        if a[i].1 <= b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// One alert per maximal window in which both drugs of a catalogued pair
/// are active for the same patient. Sorted by patient, start, pair.
pub fn detect_overlaps(exposures: &[ExposureInterval], catalog: &InteractionCatalog) -> Vec<DdiAlert> {
    let mut by_patient: BTreeMap<&str, BTreeMap<&DrugId, Vec<Span>>> = BTreeMap::new();
    for x in exposures {
        by_patient
            .entry(&x.patient_id)
            .or_default()
            .entry(&x.drug)
            .or_default()
            .push((x.start, x.end));
    }
    let per_patient: Vec<Vec<DdiAlert>> = by_patient
        .into_par_iter()
        .map(|(patient, mut drugs)| {
            for spans in drugs.values_mut() {
                spans.sort();
            }
            let mut alerts = Vec::new();
            for (&d, spans) in &drugs {
                for partner in catalog.partners(d) {
                    if partner <= d {
                        continue;
                    }
                    let Some(other) = drugs.get(partner) else { continue };
                    let entry = catalog.get(d, partner).expect("partners are catalogued");
                    for (start, end) in intersect(spans, other) {
                        alerts.push(DdiAlert {
                            patient_id: patient.to_string(),
                            pair: entry.display.clone(),
                            start,
                            end,
                            effect: entry.description.clone(),
                        });
                    }
                }
            }
            alerts
        })
        .collect();
    let mut alerts: Vec<DdiAlert> = per_patient.into_iter().flatten().collect();
    alerts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    alerts
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AlertReport {
    pub alerts: Vec<DdiAlert>,
    /// Keyed by the display pair `A|B`.
    pub per_pair: BTreeMap<String, usize>,
    pub per_patient: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn alert_report(mut alerts: Vec<DdiAlert>) -> AlertReport {
    alerts.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut per_pair = BTreeMap::new();
    let mut per_patient = BTreeMap::new();
    for a in &alerts {
        *per_pair.entry(format!("{}|{}", a.pair.0, a.pair.1)).or_default() += 1;
        *per_patient.entry(a.patient_id.clone()).or_default() += 1;
    }
    AlertReport {
        total: alerts.len(),
        alerts,
        per_pair,
        per_patient,
    }
}

impl AlertReport {
    /// Columns `patient_id, pair, window_start, window_end, effect,
    /// start_time, end_time`; the last two at full precision.
    pub fn write_tsv<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> std::io::Result<()> {
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "patient_id\tpair\twindow_start\twindow_end\teffect\tstart_time\tend_time")?;
        for a in &self.alerts {
            writeln!(
                w,
                "{}\t{}|{}\t{}\t{}\t{}\t{}\t{}",
                a.patient_id,
                a.pair.0,
                a.pair.1,
                a.start_date().format("%Y-%m-%d"),
                a.end_date().format("%Y-%m-%d"),
                a.effect,
                a.start.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                a.end.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for AlertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut patient: Option<&str> = None;
        for a in &self.alerts {
            if patient != Some(a.patient_id.as_str()) {
                writeln!(f, "patient {}", a.patient_id)?;
                patient = Some(&a.patient_id);
            }
            writeln!(f, "  {}", a.tuple())?;
        }
        writeln!(f, "alerts per pair:")?;
        for (pair, n) in &self.per_pair {
            writeln!(f, "  {pair}\t{n}")?;
        }
        writeln!(f, "total\t{}", self.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> DateTime<Utc> {
        parse_timestamp(s).unwrap()
    }

    fn ev(p: &str, d: &str, s: &str) -> AdminEvent {
        AdminEvent {
            patient_id: p.into(),
            drug: d.into(),
            time: t(s),
        }
    }

    #[test]
    fn timestamps() {
        assert_eq!(t("2015-07-15T08:00:00Z"), t("2015-07-15 08:00:00"));
        assert_eq!(t("2015-07-15T10:00:00+02:00"), t("2015-07-15T08:00:00"));
        assert!(parse_timestamp("1850-01-01T00:00:00Z").is_err());
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn exposure_examples() {
        let w = WindowConfig::default();
        let one = build_exposures(&[ev("p", "a", "2015-01-01T00:00:00Z")], &w);
        assert_eq!((one[0].start, one[0].end), (t("2015-01-01T00:00:00Z"), t("2015-01-02T00:00:00Z")));

        let merged = build_exposures(
            &[ev("p", "a", "2015-01-01T12:00:00Z"), ev("p", "a", "2015-01-01T00:00:00Z")],
            &w,
        );
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].end, t("2015-01-02T12:00:00Z"));

        let apart = build_exposures(
            &[ev("p", "a", "2015-01-01T00:00:00Z"), ev("p", "a", "2015-01-03T00:00:00Z")],
            &w,
        );
        assert_eq!(apart.len(), 2);

        let touching = build_exposures(
            &[ev("p", "a", "2015-01-01T00:00:00Z"), ev("p", "a", "2015-01-02T00:00:00Z")],
            &w,
        );
        assert_eq!(touching.len(), 1);
    }

    #[test]
    fn per_drug_window() {
        let w = WindowConfig::default().with_drug("a".into(), 6.0).unwrap();
        let x = build_exposures(&[ev("p", "a", "2015-01-01T00:00:00Z")], &w);
        assert_eq!(x[0].end, t("2015-01-01T06:00:00Z"));
        assert!(WindowConfig::hours(0.0).is_err());
    }

    #[test]
    fn disjoint_exposures_raise_nothing() {
        let mut catalog = InteractionCatalog::new();
        catalog.insert("a".into(), "b".into(), "x").unwrap();
        let ex = build_exposures(
            &[ev("p", "a", "2015-01-01T00:00:00Z"), ev("p", "b", "2015-01-05T00:00:00Z")],
            &WindowConfig::default(),
        );
        assert!(detect_overlaps(&ex, &catalog).is_empty());
        // different patients never interact
        let ex = build_exposures(
            &[ev("p", "a", "2015-01-01T00:00:00Z"), ev("q", "b", "2015-01-01T00:00:00Z")],
            &WindowConfig::default(),
        );
        assert!(detect_overlaps(&ex, &catalog).is_empty());
    }

    #[test]
    fn touching_intersections_merge() {
        let a = [(t("2015-01-01T00:00:00Z"), t("2015-01-02T00:00:00Z")), (t("2015-01-02T00:00:00Z"), t("2015-01-03T00:00:00Z"))];
        let b = [(t("2015-01-01T06:00:00Z"), t("2015-01-02T18:00:00Z"))];
        assert_eq!(intersect(&a, &b), vec![(t("2015-01-01T06:00:00Z"), t("2015-01-02T18:00:00Z"))]);
    }

    #[test]
    fn empty_report() {
        let r = alert_report(Vec::new());
        assert_eq!(r.total, 0);
        assert!(r.per_pair.is_empty());
        assert!(r.to_string().ends_with("total\t0\n"));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let text = "patient_id,drug,timestamp\np1,a,2015-01-01T00:00:00Z\np1,b,not-a-time\n";
        let err = read_events(text.as_bytes(), "mar.csv").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_events("p,d,t\n".as_bytes(), "mar.csv").is_err());
        let tsv = "patient_id\tdrug\ttimestamp\np1\ta\t2015-01-01T00:00:00Z\n";
        assert_eq!(read_events(tsv.as_bytes(), "mar.tsv").unwrap().len(), 1);
    }
}
