//! The success-factor item bank.
//!
//! A [`FactorCatalog`] labels the assessment columns and the report rows. The
//! built-in catalog holds the 23 factors of the agile-transformation
//! assessment, declared in a fixed order that carries no difficulty meaning.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::findings::{Finding, ValidationError};

/// Area of the organization a success factor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorGroup {
    Customer,
    Management,
    Organization,
    Process,
    Team,
    Tools,
}

impl FactorGroup {
    pub const ALL: [FactorGroup; 6] = [
        FactorGroup::Customer,
        FactorGroup::Management,
        FactorGroup::Organization,
        FactorGroup::Process,
        FactorGroup::Team,
        FactorGroup::Tools,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactorGroup::Customer => "Customer",
            FactorGroup::Management => "Management",
            FactorGroup::Organization => "Organization",
            FactorGroup::Process => "Process",
            FactorGroup::Team => "Team",
            FactorGroup::Tools => "Tools",
        }
    }
}

impl fmt::Display for FactorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown factor group {0:?}")]
pub struct UnknownGroup(pub String);

impl FromStr for FactorGroup {
    type Err = UnknownGroup;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        FactorGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| UnknownGroup(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuccessFactor {
    pub id: String,
    pub name: String,
    pub group: FactorGroup,
}

impl SuccessFactor {
    /// Builds a factor whose id is the slug of its name.
    pub fn named(name: &str, group: FactorGroup) -> Self {
        Self { id: slugify(name), name: name.to_string(), group }
    }
}

/// Lowercases `name` and collapses every run of non-alphanumeric characters
/// into a single hyphen, trimming hyphens at both ends.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    let mut pending_hyphen = false;
    for c in name.chars() {
        if c.is_alphanumeric() {
            if pending_hyphen && !slug.is_empty() {
                slug.push('-');
            }
            pending_hyphen = false;
            slug.extend(c.to_lowercase());
        } else {
            pending_hyphen = true;
        }
    }
    slug
}

/// Ordered, id-unique collection of success factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorCatalog {
    factors: Vec<SuccessFactor>,
}

impl FactorCatalog {
    pub fn new(factors: Vec<SuccessFactor>) -> Result<Self, ValidationError> {
        let mut findings = Vec::new();
        let mut seen = HashSet::new();
        for factor in &factors {
            if factor.id.trim().is_empty() {
                findings.push(Finding::general(format!("factor {:?} has an empty id", factor.name)));
            }
            if factor.name.trim().is_empty() {
                findings.push(Finding::general(format!("factor {:?} has an empty name", factor.id)));
            }
            if !seen.insert(factor.id.as_str()) {
                findings.push(Finding::general(format!("duplicate factor id {:?}", factor.id)));
            }
        }
        ValidationError::from_findings(findings)?;
        Ok(Self { factors })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SuccessFactor> {
        self.factors.iter()
    }

    pub fn factors(&self) -> &[SuccessFactor] {
        &self.factors
    }

    pub fn get(&self, id: &str) -> Option<&SuccessFactor> {
        self.factors.iter().find(|f| f.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.id.as_str())
    }

    /// Serializes to the `id,group,name` CSV format accepted by [`load_catalog`].
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(["id", "group", "name"]).expect("in-memory write");
        for f in &self.factors {
            writer.write_record([f.id.as_str(), f.group.name(), f.name.as_str()]).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

impl<'a> IntoIterator for &'a FactorCatalog {
    type Item = &'a SuccessFactor;
    type IntoIter = std::slice::Iter<'a, SuccessFactor>;

    fn into_iter(self) -> Self::IntoIter {
        self.factors.iter()
    }
}

const DEFAULT_FACTORS: [(&str, FactorGroup); 23] = [
    ("Measurement model", FactorGroup::Process),
    ("Training", FactorGroup::Organization),
    ("Agile champions", FactorGroup::Organization),
    ("New mindset/roles", FactorGroup::Organization),
    ("Changes in management style and decentralized decision making", FactorGroup::Management),
    ("Distributed teams", FactorGroup::Team),
    ("Knowledge sharing", FactorGroup::Organization),
    ("Technical activities/skills", FactorGroup::Team),
    ("Business goals", FactorGroup::Organization),
    ("Lightweight documentation", FactorGroup::Process),
    ("Process is compatible with the organizational context", FactorGroup::Process),
    ("Ability to build trustworthy relationships", FactorGroup::Team),
    ("Team involvement", FactorGroup::Team),
    ("Incentives/motivation to adopt agile methods", FactorGroup::Organization),
    ("Communication flow in the organization", FactorGroup::Organization),
    ("Management buy-in", FactorGroup::Management),
    ("Coaching/mentoring", FactorGroup::Organization),
    ("Collaboration", FactorGroup::Team),
    ("Tool set", FactorGroup::Tools),
    ("Cultural changes", FactorGroup::Organization),
    ("Changes in mind set of project managers", FactorGroup::Management),
    ("Self-organized teams", FactorGroup::Team),
    ("Customer involvement", FactorGroup::Customer),
];

/// The 23 success factors of the assessment.
pub fn default_catalog() -> FactorCatalog {
    let factors = DEFAULT_FACTORS.iter().map(|&(name, group)| SuccessFactor::named(name, group)).collect();
    FactorCatalog::new(factors).expect("built-in catalog is valid")
}

/// Parses a catalog from `id,group,name` CSV text.
///
/// Every problem in the file is reported, each with its line number.
pub fn load_catalog(source: &str) -> Result<FactorCatalog, ValidationError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source.as_bytes());
    let mut findings = Vec::new();

    match reader.headers() {
        Ok(h) if h.iter().map(str::trim).eq(["id", "group", "name"]) => {}
        Ok(h) => {
            let got: Vec<&str> = h.iter().collect();
            return Err(ValidationError {
                findings: vec![Finding::at(1, format!("expected header id,group,name, found {}", got.join(",")))],
            });
        }
        Err(e) => return Err(ValidationError { findings: vec![Finding::general(format!("unreadable CSV: {e}"))] }),
    }

    let mut factors: Vec<SuccessFactor> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for row in reader.records() {
        let record = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                findings.push(Finding::at(line, format!("malformed row: {e}")));
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            findings.push(Finding::at(line, format!("expected 3 fields, found {}", record.len())));
            continue;
        }
        let (id, group, name) = (record[0].trim(), record[1].trim(), record[2].trim());
        let mut ok = true;
        for (field, value) in [("id", id), ("group", group), ("name", name)] {
            if value.is_empty() {
                findings.push(Finding::at(line, format!("blank {field} field")));
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let group = match group.parse::<FactorGroup>() {
            Ok(g) => g,
            Err(_) => {
                findings.push(Finding::at(line, format!("unknown group {group:?}")));
                continue;
            }
        };
        if !seen.insert(id.to_string()) {
            findings.push(Finding::at(line, format!("duplicate factor id {id:?}")));
            continue;
        }
        factors.push(SuccessFactor { id: id.to_string(), name: name.to_string(), group });
    }

    if factors.is_empty() && findings.is_empty() {
        findings.push(Finding::general("catalog has no factors"));
    }
    ValidationError::from_findings(findings)?;
    FactorCatalog::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_matches_table() {
        let c = default_catalog();
        assert_eq!(c.len(), 23);
        assert_eq!(c.get("measurement-model").unwrap().group, FactorGroup::Process);
        assert_eq!(c.get("customer-involvement").unwrap().group, FactorGroup::Customer);
        let groups: HashSet<_> = c.iter().map(|f| f.group).collect();
        assert_eq!(groups.len(), 6);
        assert_eq!(c, default_catalog());
    }

    #[test]
    fn ids_follow_slug_rule() {
        for f in &default_catalog() {
            assert_eq!(f.id, slugify(&f.name));
        }
        assert_eq!(slugify("New mindset/roles"), "new-mindset-roles");
        assert_eq!(slugify("  Self--organized teams! "), "self-organized-teams");
    }

    #[test]
    fn load_minimal() {
        let c = load_catalog("id,group,name\nf1,Process,Measurement model").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.factors()[0].name, "Measurement model");
    }

    #[test]
    fn group_is_case_insensitive_and_crlf_accepted() {
        let c = load_catalog("id,group,name\r\nf1,tOoLs,\"Tool set, shared\"\r\n").unwrap();
        assert_eq!(c.factors()[0].group, FactorGroup::Tools);
        assert_eq!(c.factors()[0].name, "Tool set, shared");
    }

    #[test]
    fn duplicate_id_is_named_with_line() {
        let err = load_catalog("id,group,name\nf1,Process,A\nf1,Team,B\n").unwrap_err();
        assert_eq!(err.findings.len(), 1);
        assert_eq!(err.findings[0].line, Some(3));
        assert!(err.to_string().contains("\"f1\""), "{err}");
    }

    #[test]
    fn unknown_group_and_blank_fields() {
        let err = load_catalog("id,group,name\nf1,Sales,A\nf2,Team,\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2: unknown group \"Sales\""), "{text}");
        assert!(text.contains("line 3: blank name field"), "{text}");
    }

    #[test]
    fn bad_header_rejected() {
        assert!(load_catalog("name,id,group\nA,f1,Team\n").is_err());
    }

    #[test]
    fn default_round_trips_through_csv() {
        let c = default_catalog();
        assert_eq!(load_catalog(&c.to_csv()).unwrap(), c);
    }
}
