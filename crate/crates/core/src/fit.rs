//! Infit and outfit mean-square statistics.
//!
//! For an observed category `x` with model expectation `e` and variance `w`,
//! the standardized residual is `z = (x - e) / sqrt(w)`. Over the cells of one
//! item (or person), outfit is the plain mean of `z^2` and infit is
//! `sum (x - e)^2 / sum w`. Only cells between non-extreme persons and items
//! count. No degrees-of-freedom correction is applied.

use serde::{Deserialize, Serialize};

use crate::engine::CalibrationResult;
use crate::matrix::CodedMatrix;
use crate::model::{fill_probabilities, moments};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("degenerate cell: model variance {0} is not positive")]
pub struct DegenerateCell(pub f64);

pub fn standardized_residual(observed: f64, expected: f64, variance: f64) -> Result<f64, DegenerateCell> {
    if variance > 0.0 {
        Ok((observed - expected) / variance.sqrt())
    } else {
        Err(DegenerateCell(variance))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatistic {
    pub id: String,
    pub infit_mnsq: f64,
    pub outfit_mnsq: f64,
    /// Cells that contributed.
    pub cells: usize,
}

/// Per-item and per-person statistics, indexed like the calibration result.
/// `None` marks extreme entities and entities without usable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStatistics {
    pub items: Vec<Option<FitStatistic>>,
    pub persons: Vec<Option<FitStatistic>>,
}

impl FitStatistics {
    /// Means of infit and outfit over the items that have statistics.
    pub fn item_means(&self) -> Option<(f64, f64)> {
        let present: Vec<&FitStatistic> = self.items.iter().flatten().collect();
        if present.is_empty() {
            return None;
        }
        let k = present.len() as f64;
        Some((
            present.iter().map(|s| s.infit_mnsq).sum::<f64>() / k,
            present.iter().map(|s| s.outfit_mnsq).sum::<f64>() / k,
        ))
    }
}

#[derive(Default)]
struct Accumulator {
    squared_residuals: f64,
    variances: f64,
    squared_z: f64,
    cells: usize,
}

impl Accumulator {
    fn add(&mut self, residual: f64, variance: f64, z: f64) {
        self.squared_residuals += residual * residual;
        self.variances += variance;
        self.squared_z += z * z;
        self.cells += 1;
    }

    fn finish(&self, id: &str) -> Option<FitStatistic> {
        (self.cells > 0 && self.variances > 0.0).then(|| FitStatistic {
            id: id.to_string(),
            infit_mnsq: self.squared_residuals / self.variances,
            outfit_mnsq: self.squared_z / self.cells as f64,
            cells: self.cells,
        })
    }
}

/// Computes fit for every non-extreme item and person. `matrix` must be the
/// one that produced `result`; observed categories are recoded through the
/// result's category collapse, if any.
pub fn fit_statistics(matrix: &CodedMatrix, result: &CalibrationResult) -> FitStatistics {
    let tau = result.thresholds.as_slice();
    let mut probs = vec![0.0; tau.len() + 1];
    let mut items: Vec<Accumulator> = (0..result.items.len()).map(|_| Accumulator::default()).collect();
    let mut persons: Vec<Accumulator> = (0..result.persons.len()).map(|_| Accumulator::default()).collect();

    for (n, person) in result.persons.iter().enumerate() {
        if person.extreme {
            continue;
        }
        for (i, item) in result.items.iter().enumerate() {
            if item.extreme {
                continue;
            }
            let Some(x) = matrix.get(n, i) else { continue };
            fill_probabilities(person.measure - item.difficulty, tau, &mut probs);
            let (e, w) = moments(&probs);
            let x = f64::from(result.recode(x));
            let Ok(z) = standardized_residual(x, e, w) else { continue };
            items[i].add(x - e, w, z);
            persons[n].add(x - e, w, z);
        }
    }

    FitStatistics {
        items: items.iter().zip(&result.items).map(|(a, p)| a.finish(&p.item_id)).collect(),
        persons: persons.iter().zip(&result.persons).map(|(a, p)| a.finish(&p.person_id)).collect(),
    }
}

/// Acceptability band for mean squares, `low < 1 < high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBand {
    pub low: f64,
    pub high: f64,
}

impl Default for FitBand {
    fn default() -> Self {
        Self { low: 0.5, high: 2.0 }
    }
}

impl FitBand {
    pub const STRICT: FitBand = FitBand { low: 0.5, high: 1.5 };

    pub fn new(low: f64, high: f64) -> Result<Self, String> {
        if low < 1.0 && 1.0 < high && low >= 0.0 {
            Ok(Self { low, high })
        } else {
            Err(format!("fit band ({low}, {high}) must satisfy 0 <= low < 1 < high"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitClass {
    Acceptable,
    Overfit,
    Misfit,
}

impl FitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FitClass::Acceptable => "acceptable",
            FitClass::Overfit => "overfit",
            FitClass::Misfit => "misfit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitFlag {
    pub class: FitClass,
    pub band: FitBand,
}

/// Misfit wins over overfit when one statistic is above the band and the
/// other below it.
pub fn flag_fit(stat: &FitStatistic, band: FitBand) -> FitFlag {
    let values = [stat.infit_mnsq, stat.outfit_mnsq];
    let class = if values.iter().any(|v| *v > band.high) {
        FitClass::Misfit
    } else if values.iter().any(|v| *v < band.low) {
        FitClass::Overfit
    } else {
        FitClass::Acceptable
    };
    FitFlag { class, band }
}
