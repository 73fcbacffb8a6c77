//! Difficulty ranking and its markdown, CSV and JSON renderings.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{FactorCatalog, FactorGroup};
use crate::engine::{CalibrationResult, CategoryCollapse, Excluded};
use crate::fit::{flag_fit, FitBand, FitClass, FitStatistics};

pub const COLUMNS: [&str; 7] = ["Rank", "Group", "Success Factor", "Logit", "Error", "Infit", "Outfit"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub rank: usize,
    pub factor_id: String,
    pub group: FactorGroup,
    pub name: String,
    /// Unrounded difficulty; rounding happens only when rendering.
    pub logit: f64,
    pub se: Option<f64>,
    pub infit: Option<f64>,
    pub outfit: Option<f64>,
    pub fit_flag: Option<FitClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRow {
    pub person_id: String,
    pub measure: Option<f64>,
    pub se: Option<f64>,
    pub infit: Option<f64>,
    pub outfit: Option<f64>,
    pub extreme: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub converged: bool,
    pub iterations: usize,
    pub excluded: Excluded,
    pub category_collapse: Option<CategoryCollapse>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_clamp: f64,
    pub log_likelihood: f64,
    pub fit_band: FitBand,
    pub coding_rule: String,
    pub warnings: Vec<String>,
}

/// Mean coded gap for one factor over the respondents who answered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub factor_id: String,
    pub mean_coded_delta: Option<f64>,
    pub responses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub items: Vec<RankedItem>,
    pub persons: Vec<PersonRow>,
    pub thresholds: Vec<f64>,
    pub meta: ReportMeta,
    #[serde(default)]
    pub delta_summary: Vec<DeltaSummary>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("calibrated item {0:?} is not in the factor catalog")]
    UnknownItem(String),
    #[error("fit statistics cover {fits} items but the calibration has {items}")]
    FitMismatch { fits: usize, items: usize },
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn tie_break(a: &RankedItem, b: &RankedItem) -> Ordering {
    let se = |r: &RankedItem| r.se.unwrap_or(f64::INFINITY);
    b.logit
        .total_cmp(&a.logit)
        .then_with(|| se(a).total_cmp(&se(b)))
        .then_with(|| a.group.name().cmp(b.group.name()))
        .then_with(|| a.name.cmp(&b.name))
        .then_with(|| a.factor_id.cmp(&b.factor_id))
}

/// Orders non-extreme items from hardest (highest logit) to easiest.
///
/// Equal logits fall back to smaller standard error, then group name, factor
/// name and id, all ascending.
pub fn rank_items(
    result: &CalibrationResult,
    fits: &FitStatistics,
    catalog: &FactorCatalog,
    band: FitBand,
) -> Result<RankingReport, ReportError> {
    if fits.items.len() != result.items.len() {
        return Err(ReportError::FitMismatch { fits: fits.items.len(), items: result.items.len() });
    }
    let mut rows = Vec::new();
    for (item, fit) in result.items.iter().zip(&fits.items) {
        let factor = catalog.get(&item.item_id).ok_or_else(|| ReportError::UnknownItem(item.item_id.clone()))?;
        if item.extreme {
            continue;
        }
        rows.push(RankedItem {
            rank: 0,
            factor_id: factor.id.clone(),
            group: factor.group,
            name: factor.name.clone(),
            logit: item.difficulty,
            se: finite(item.se),
            infit: fit.as_ref().map(|f| f.infit_mnsq),
            outfit: fit.as_ref().map(|f| f.outfit_mnsq),
            fit_flag: fit.as_ref().map(|f| flag_fit(f, band).class),
        });
    }
    rows.sort_by(tie_break);
    for (k, row) in rows.iter_mut().enumerate() {
        row.rank = k + 1;
    }

    let persons = result
        .persons
        .iter()
        .zip(&fits.persons)
        .map(|(p, fit)| PersonRow {
            person_id: p.person_id.clone(),
            measure: finite(p.measure),
            se: finite(p.se),
            infit: fit.as_ref().map(|f| f.infit_mnsq),
            outfit: fit.as_ref().map(|f| f.outfit_mnsq),
            extreme: p.extreme,
        })
        .collect();

    Ok(RankingReport {
        items: rows,
        persons,
        thresholds: result.thresholds.as_slice().to_vec(),
        meta: ReportMeta {
            converged: result.converged,
            iterations: result.iterations,
            excluded: result.excluded.clone(),
            category_collapse: result.category_collapse.clone(),
            tolerance: result.config.tolerance,
            max_iterations: result.config.max_iterations,
            step_clamp: result.config.step_clamp,
            log_likelihood: result.log_likelihood,
            fit_band: band,
            coding_rule: String::new(),
            warnings: result.warnings.clone(),
        },
        delta_summary: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected markdown, csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Markdown => "markdown",
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Two decimals, halves rounded away from zero, never `-0.00`.
pub fn display_2dp(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        "0.00".to_string()
    } else {
        format!("{r:.2}")
    }
}

fn display_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), display_2dp)
}

fn display_row(row: &RankedItem) -> [String; 7] {
    [
        row.rank.to_string(),
        row.group.name().to_string(),
        row.name.clone(),
        display_2dp(row.logit),
        display_opt(row.se),
        display_opt(row.infit),
        display_opt(row.outfit),
    ]
}

pub fn render(report: &RankingReport, format: Format) -> String {
    match format {
        Format::Markdown => {
            let mut out = String::new();
            out.push_str(&COLUMNS.join(" | "));
            out.push('\n');
            out.push_str(&["---"; 7].join(" | "));
            out.push('\n');
            for row in &report.items {
                let cells: Vec<String> = display_row(row).into_iter().map(|c| c.replace('|', "\\|")).collect();
                out.push_str(&cells.join(" | "));
                out.push('\n');
            }
            out
        }
        Format::Csv => {
            let mut writer =
                csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            writer.write_record(COLUMNS).expect("in-memory write");
            for row in &report.items {
                writer.write_record(display_row(row)).expect("in-memory write");
            }
            String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
        }
        Format::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report values are finite");
            out.push('\n');
            out
        }
    }
}

pub fn from_json(text: &str) -> Result<RankingReport, serde_json::Error> {
    serde_json::from_str(text)
}
