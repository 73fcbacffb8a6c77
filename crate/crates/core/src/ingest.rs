//! Assessment input parsing, delta computation and coding.
//!
//! Team members report the current state of each factor and the organization
//! states its target, both on a 5-point Likert scale. The gap `target -
//! current` is coded into categories 0..=4, with every non-positive gap (target
//! already met) collapsed into category 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::FactorCatalog;
use crate::findings::{Finding, ValidationError};
use crate::matrix::{CodedMatrix, MatrixError};

/// Top coded category.
pub const TOP_CATEGORY: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LikertScore(u8);

impl LikertScore {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 5;

    pub fn new(value: u8) -> Option<Self> {
        (Self::MIN..=Self::MAX).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = LikertScore> {
        (Self::MIN..=Self::MAX).map(LikertScore)
    }
}

impl TryFrom<u8> for LikertScore {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("Likert score {value} outside 1..5"))
    }
}

impl From<LikertScore> for u8 {
    fn from(s: LikertScore) -> u8 {
        s.0
    }
}

impl fmt::Display for LikertScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Target minus current, in Likert points (-4..=4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeltaValue(i8);

impl DeltaValue {
    pub fn new(value: i8) -> Option<Self> {
        (-4..=4).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> i8 {
        self.0
    }
}

/// Coded improvement-potential category (0..=4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodedCategory(u8);

impl CodedCategory {
    pub fn new(value: u8) -> Option<Self> {
        (value <= TOP_CATEGORY).then_some(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

pub fn compute_delta(current: LikertScore, target: LikertScore) -> DeltaValue {
    DeltaValue(target.0 as i8 - current.0 as i8)
}

/// Non-positive gaps share category 0; positive gaps keep their size.
pub fn code_delta(delta: DeltaValue) -> CodedCategory {
    CodedCategory(delta.0.max(0) as u8)
}

/// One team member's current-state answers, keyed by factor id.
/// Unanswered factors are absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RespondentRecord {
    pub respondent_id: String,
    pub answers: BTreeMap<String, LikertScore>,
}

/// The organization's target level for every catalog factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetProfile {
    targets: BTreeMap<String, LikertScore>,
}

impl TargetProfile {
    pub fn new(targets: BTreeMap<String, LikertScore>, catalog: &FactorCatalog) -> Result<Self, ValidationError> {
        let mut findings = Vec::new();
        for id in targets.keys() {
            if catalog.get(id).is_none() {
                findings.push(Finding::general(format!("unknown factor id {id:?}")));
            }
        }
        let missing: Vec<&str> = catalog.ids().filter(|id| !targets.contains_key(*id)).collect();
        if !missing.is_empty() {
            findings.push(Finding::general(format!("targets missing for factors: {}", missing.join(", "))));
        }
        ValidationError::from_findings(findings)?;
        Ok(Self { targets })
    }

    /// Every catalog factor set to the same target.
    pub fn uniform(catalog: &FactorCatalog, target: LikertScore) -> Self {
        Self { targets: catalog.ids().map(|id| (id.to_string(), target)).collect() }
    }

    pub fn get(&self, factor_id: &str) -> Option<LikertScore> {
        self.targets.get(factor_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, LikertScore)> {
        self.targets.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Parses an integer field with no sign, padding or leading zeros.
fn parse_plain_int(raw: &str) -> Option<i64> {
    let digits = raw.strip_prefix('-').unwrap_or(raw);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0'))
    {
        return None;
    }
    raw.parse().ok()
}

fn parse_score(raw: &str, field: &str, line: u64, findings: &mut Vec<Finding>) -> Option<LikertScore> {
    match parse_plain_int(raw) {
        None => {
            findings.push(Finding::at(line, format!("{field} {raw:?} is not a plain base-10 integer")));
            None
        }
        Some(v) => match u8::try_from(v).ok().and_then(LikertScore::new) {
            Some(s) => Some(s),
            None => {
                findings.push(Finding::at(line, format!("{field} {v} out of range 1..5")));
                None
            }
        },
    }
}

/// Reads every row of a headed CSV, checking the header first. Malformed rows
/// become findings; good rows are handed to `on_row` with their line number.
fn read_rows(
    source: &str,
    header: &[&str],
    findings: &mut Vec<Finding>,
    mut on_row: impl FnMut(u64, &csv::StringRecord),
) -> Result<(), ValidationError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source.as_bytes());
    match reader.headers() {
        Ok(h) if h.iter().map(str::trim).eq(header.iter().copied()) => {}
        Ok(h) => {
            let got: Vec<&str> = h.iter().collect();
            return Err(ValidationError {
                findings: vec![Finding::at(1, format!("expected header {}, found {}", header.join(","), got.join(",")))],
            });
        }
        Err(e) => return Err(ValidationError { findings: vec![Finding::general(format!("unreadable CSV: {e}"))] }),
    }
    for row in reader.records() {
        match row {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                if record.len() != header.len() {
                    findings.push(Finding::at(line, format!("expected {} fields, found {}", header.len(), record.len())));
                } else {
                    on_row(line, &record);
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                findings.push(Finding::at(line, format!("malformed row: {e}")));
            }
        }
    }
    Ok(())
}

/// Parses long-format `respondent_id,factor_id,score` rows, grouping them by
/// respondent in order of first appearance.
pub fn parse_responses(source: &str, catalog: &FactorCatalog) -> Result<Vec<RespondentRecord>, ValidationError> {
    let mut findings = Vec::new();
    let mut records: Vec<RespondentRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut first_seen: HashMap<(String, String), u64> = HashMap::new();

    let mut rows = Vec::new();
    read_rows(source, &["respondent_id", "factor_id", "score"], &mut findings, |line, rec| {
        rows.push((line, rec[0].trim().to_string(), rec[1].trim().to_string(), rec[2].trim().to_string()));
    })?;

    for (line, respondent, factor, raw) in rows {
        if respondent.is_empty() {
            findings.push(Finding::at(line, "blank respondent_id"));
            continue;
        }
        let known = catalog.get(&factor).is_some();
        if !known {
            findings.push(Finding::at(line, format!("unknown factor id {factor:?}")));
        }
        let score = parse_score(&raw, "score", line, &mut findings);
        let key = (respondent.clone(), factor.clone());
        if let Some(first) = first_seen.get(&key) {
            findings.push(Finding::at(
                line,
                format!("duplicate response for respondent {respondent:?} and factor {factor:?} (first on line {first})"),
            ));
            continue;
        }
        first_seen.insert(key, line);
        let slot = *index.entry(respondent.clone()).or_insert_with(|| {
            records.push(RespondentRecord { respondent_id: respondent.clone(), answers: BTreeMap::new() });
            records.len() - 1
        });
        if let (true, Some(score)) = (known, score) {
            records[slot].answers.insert(factor, score);
        }
    }

    if records.is_empty() && findings.is_empty() {
        findings.push(Finding::general("no responses"));
    }
    ValidationError::from_findings(findings)?;
    Ok(records)
}

/// Parses `factor_id,target` rows into a profile covering the whole catalog.
pub fn parse_targets(source: &str, catalog: &FactorCatalog) -> Result<TargetProfile, ValidationError> {
    let mut findings = Vec::new();
    let mut targets = BTreeMap::new();
    let mut seen: HashMap<String, u64> = HashMap::new();

    let mut rows = Vec::new();
    read_rows(source, &["factor_id", "target"], &mut findings, |line, rec| {
        rows.push((line, rec[0].trim().to_string(), rec[1].trim().to_string()));
    })?;

    for (line, factor, raw) in rows {
        if let Some(first) = seen.get(&factor) {
            findings.push(Finding::at(line, format!("duplicate target for factor {factor:?} (first on line {first})")));
            continue;
        }
        seen.insert(factor.clone(), line);
        if catalog.get(&factor).is_none() {
            findings.push(Finding::at(line, format!("unknown factor id {factor:?}")));
            continue;
        }
        if let Some(score) = parse_score(&raw, "target", line, &mut findings) {
            targets.insert(factor, score);
        }
    }

    let uncovered: Vec<&str> = catalog.ids().filter(|id| !seen.contains_key(*id)).collect();
    if !uncovered.is_empty() {
        findings.push(Finding::general(format!("targets missing for factors: {}", uncovered.join(", "))));
    }
    ValidationError::from_findings(findings)?;
    TargetProfile::new(targets, catalog)
}

/// Codes every answer against its factor's target. Rows follow record order,
/// columns follow catalog order, unanswered factors become missing cells.
pub fn build_coded_matrix(
    records: &[RespondentRecord],
    targets: &TargetProfile,
    catalog: &FactorCatalog,
) -> Result<CodedMatrix, IngestError> {
    let mut findings = Vec::new();
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.respondent_id.as_str()) {
            findings.push(Finding::general(format!("respondent {:?} appears twice", r.respondent_id)));
        }
        for id in r.answers.keys() {
            if catalog.get(id).is_none() {
                findings.push(Finding::general(format!("respondent {:?} answers unknown factor {id:?}", r.respondent_id)));
            }
        }
    }
    for f in catalog {
        if targets.get(&f.id).is_none() {
            findings.push(Finding::general(format!("no target for factor {:?}", f.id)));
        }
    }
    ValidationError::from_findings(findings)?;

    let mut cells = Vec::with_capacity(records.len() * catalog.len());
    for r in records {
        for f in catalog {
            let target = targets.get(&f.id).expect("checked above");
            cells.push(r.answers.get(&f.id).map(|&current| code_delta(compute_delta(current, target)).value()));
        }
    }
    let matrix = CodedMatrix::new(
        records.iter().map(|r| r.respondent_id.clone()).collect(),
        catalog.ids().map(str::to_string).collect(),
        cells,
        TOP_CATEGORY,
    )?;
    if !matrix.is_calibratable() {
        return Err(IngestError::InsufficientData(format!(
            "{} non-extreme persons and {} non-extreme items; at least 2 of each are required",
            matrix.non_extreme_persons(),
            matrix.non_extreme_items()
        )));
    }
    Ok(matrix)
}

/// Mean coded gap per item over observed cells, `None` for unanswered items.
pub fn mean_coded_delta(matrix: &CodedMatrix) -> Vec<Option<f64>> {
    (0..matrix.n_items())
        .map(|i| {
            let vals: Vec<f64> = (0..matrix.n_persons()).filter_map(|n| matrix.get(n, i)).map(f64::from).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::default_catalog;

    fn score(v: u8) -> LikertScore {
        LikertScore::new(v).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(compute_delta(score(2), score(5)).value(), 3);
        assert_eq!(compute_delta(score(4), score(4)).value(), 0);
        assert_eq!(compute_delta(score(5), score(1)).value(), -4);
    }

    #[test]
    fn coding_examples() {
        assert_eq!(code_delta(DeltaValue::new(-3).unwrap()).value(), 0);
        assert_eq!(code_delta(DeltaValue::new(0).unwrap()).value(), 0);
        assert_eq!(code_delta(DeltaValue::new(4).unwrap()).value(), 4);
    }

    #[test]
    fn coding_is_monotone_and_identity_on_gaps() {
        let coded: Vec<u8> = (-4..=4).map(|d| code_delta(DeltaValue::new(d).unwrap()).value()).collect();
        assert!(coded.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(&coded[4..], &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn delta_is_antisymmetric() {
        for c in LikertScore::all() {
            for t in LikertScore::all() {
                assert_eq!(compute_delta(c, t).value(), -compute_delta(t, c).value());
            }
        }
    }

    #[test]
    fn minimal_response_file() {
        let recs = parse_responses("respondent_id,factor_id,score\nr1,measurement-model,3", &default_catalog()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].answers["measurement-model"], score(3));
    }

    #[test]
    fn out_of_range_score_names_row_and_value() {
        let src = "respondent_id,factor_id,score\nr1,training,3\nr1,measurement-model,6\n";
        let err = parse_responses(src, &default_catalog()).unwrap_err();
        assert_eq!(err.findings[0].line, Some(3));
        assert!(err.to_string().contains("score 6 out of range"), "{err}");
    }

    #[test]
    fn unknown_factor_and_duplicates_reported_together() {
        let src = "respondent_id,factor_id,score\nr1,training,3\nr1,training,4\nr2,astrology,2\n";
        let err = parse_responses(src, &default_catalog()).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 3: duplicate response"), "{text}");
        assert!(text.contains("line 4: unknown factor id \"astrology\""), "{text}");
    }

    #[test]
    fn padded_or_non_numeric_scores_rejected() {
        for raw in ["03", "+3", "three", ""] {
            let src = format!("respondent_id,factor_id,score\nr1,training,{raw}\n");
            assert!(parse_responses(&src, &default_catalog()).is_err(), "{raw:?} accepted");
        }
    }

    fn full_targets(except: Option<&str>, value: u8) -> String {
        let mut s = String::from("factor_id,target\n");
        for f in &default_catalog() {
            if Some(f.id.as_str()) != except {
                s.push_str(&format!("{},{value}\n", f.id));
            }
        }
        s
    }

    #[test]
    fn complete_targets_parse() {
        let p = parse_targets(&full_targets(None, 5), &default_catalog()).unwrap();
        assert!(p.iter().all(|(_, t)| t == score(5)));
        assert_eq!(p.iter().count(), 23);
    }

    #[test]
    fn missing_target_is_named() {
        let err = parse_targets(&full_targets(Some("training"), 5), &default_catalog()).unwrap_err();
        assert!(err.to_string().contains("training"), "{err}");
    }

    #[test]
    fn duplicate_and_out_of_range_targets() {
        let mut src = full_targets(None, 4);
        src.push_str("training,5\n");
        let err = parse_targets(&src, &default_catalog()).unwrap_err();
        assert!(err.to_string().contains("duplicate target for factor \"training\""), "{err}");
        let err = parse_targets(&full_targets(None, 0), &default_catalog()).unwrap_err();
        assert!(err.to_string().contains("target 0 out of range"), "{err}");
    }

    #[test]
    fn single_satisfied_respondent_is_rejected() {
        let catalog = default_catalog();
        let targets = TargetProfile::uniform(&catalog, score(4));
        let answers = catalog.ids().map(|id| (id.to_string(), score(4))).collect();
        let recs = vec![RespondentRecord { respondent_id: "r1".into(), answers }];
        let err = build_coded_matrix(&recs, &targets, &catalog).unwrap_err();
        assert!(matches!(err, IngestError::InsufficientData(_)));
    }

    #[test]
    fn missing_answer_becomes_missing_cell() {
        let catalog = default_catalog();
        let targets = TargetProfile::uniform(&catalog, score(5));
        let recs: Vec<RespondentRecord> = (0..3u8)
            .map(|n| RespondentRecord {
                respondent_id: format!("r{n}"),
                answers: catalog
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !(n == 0 && *i == 5))
                    .map(|(i, f)| (f.id.clone(), score(1 + ((i as u8 + n) % 5))))
                    .collect(),
            })
            .collect();
        let m = build_coded_matrix(&recs, &targets, &catalog).unwrap();
        assert_eq!(m.missing_count(), 1);
        assert_eq!(m.get(0, 5), None);
        assert_eq!(m.get(1, 0), Some(5 - 2));
    }
}
