#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rasch_assess::catalog::default_catalog;
use rasch_assess::engine::Excluded;
use rasch_assess::{
    calibrate, CalibrationConfig, CalibrationResult, CodedMatrix, FitStatistic, FitStatistics, ItemParameters,
    ThresholdVector,
};

/// Reference calibration of the 23 factors: group, name, logit, error, infit, outfit,
/// in rank order.
pub const REFERENCE: [(&str, &str, f64, f64, f64, f64); 23] = [
    ("Process", "Measurement model", 2.42, 0.33, 0.96, 0.90),
    ("Organization", "Training", 1.68, 0.33, 1.22, 1.24),
    ("Organization", "Agile champions", 1.11, 0.35, 0.48, 0.58),
    ("Organization", "New mindset/roles", 0.98, 0.36, 0.52, 0.56),
    ("Management", "Changes in management style and decentralized decision making", 0.85, 0.37, 0.19, 0.23),
    ("Team", "Distributed teams", 0.85, 0.37, 1.78, 1.04),
    ("Organization", "Knowledge sharing", 0.55, 0.40, 1.62, 1.21),
    ("Team", "Technical activities/skills", 0.55, 0.40, 1.71, 1.20),
    ("Organization", "Business goals", 0.21, 0.43, 0.33, 0.36),
    ("Process", "Lightweight documentation", 0.21, 0.43, 1.59, 1.66),
    ("Process", "Process is compatible with the organizational context", 0.21, 0.43, 0.48, 0.54),
    ("Team", "Ability to build trustworthy relationships", 0.21, 0.43, 0.72, 0.74),
    ("Team", "Team involvement", 0.02, 0.45, 0.72, 0.66),
    ("Organization", "Incentives/motivation to adopt agile methods", -0.20, 0.48, 0.62, 0.59),
    ("Organization", "Communication flow in the organization", -0.20, 0.48, 0.74, 0.75),
    ("Management", "Management buy-in", -0.44, 0.50, 0.38, 0.32),
    ("Organization", "Coaching/mentoring", -0.44, 0.50, 1.73, 1.88),
    ("Team", "Collaboration", -0.70, 0.53, 0.79, 0.91),
    ("Tools", "Tool set", -0.70, 0.53, 1.76, 1.87),
    ("Organization", "Cultural changes", -1.30, 0.57, 0.10, 0.09),
    ("Management", "Changes in mind set of project managers", -1.63, 0.57, 1.08, 1.05),
    ("Team", "Self-organized teams", -1.95, 0.57, 1.38, 1.41),
    ("Customer", "Customer involvement", -2.28, 0.56, 0.42, 0.38),
];

pub fn reference_logits() -> Vec<f64> {
    REFERENCE.iter().map(|r| r.2).collect()
}

pub fn recovery_thresholds() -> ThresholdVector {
    ThresholdVector::new(vec![-1.0, -0.3, 0.3, 1.0]).unwrap()
}

/// A calibration result and fit set carrying the reference values, with the
/// catalog's items in reverse order so ranking has real work to do.
pub fn reference_inputs() -> (CalibrationResult, FitStatistics) {
    let catalog = default_catalog();
    let mut items = Vec::new();
    let mut fits = Vec::new();
    for (group, name, logit, se, infit, outfit) in REFERENCE.iter().rev() {
        let factor = catalog.iter().find(|f| f.name == *name).unwrap();
        assert_eq!(factor.group.name(), *group);
        items.push(ItemParameters { item_id: factor.id.clone(), difficulty: *logit, se: *se, extreme: false });
        fits.push(Some(FitStatistic { id: factor.id.clone(), infit_mnsq: *infit, outfit_mnsq: *outfit, cells: 14 }));
    }
    let result = CalibrationResult {
        items,
        persons: vec![],
        thresholds: ThresholdVector::zeros(4),
        converged: true,
        iterations: 1,
        log_likelihood: 0.0,
        log_likelihood_trace: vec![0.0],
        excluded: Excluded::default(),
        category_collapse: None,
        skipped_updates: 0,
        warnings: vec![],
        config: CalibrationConfig::default(),
    };
    (result, FitStatistics { items: fits, persons: vec![] })
}

/// Uniform random complete matrix.
pub fn random_matrix(rng: &mut ChaCha8Rng, persons: usize, items: usize, max: u8) -> CodedMatrix {
    let rows: Vec<Vec<u8>> =
        (0..persons).map(|_| (0..items).map(|_| rng.gen_range(0..=max)).collect()).collect();
    CodedMatrix::from_complete_rows(&rows, max).unwrap()
}

pub fn has_extremes(m: &CodedMatrix) -> bool {
    m.extreme_persons().iter().chain(m.extreme_items()).any(|&e| e)
}

pub fn all_categories_seen(m: &CodedMatrix) -> bool {
    (0..=m.max_category()).all(|k| m.cells().contains(&Some(k)))
}

/// Random small matrices with every category observed, no extreme rows or
/// columns, and a converged calibration inside `bound` logits. Rejected draws
/// are replaced by fresh ones from the same stream.
pub fn well_posed_matrices(seed: u64, shapes: &[(usize, u8)], bound: f64) -> Vec<(CodedMatrix, CalibrationResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(n, max) in shapes {
        loop {
            let m = random_matrix(&mut rng, n, n, max);
            if has_extremes(&m) || !all_categories_seen(&m) {
                continue;
            }
            let r = calibrate(&m, &CalibrationConfig::default()).unwrap();
            let inside = r.items.iter().map(|i| i.difficulty).chain(r.persons.iter().map(|p| p.measure))
                .chain(r.thresholds.as_slice().iter().copied())
                .all(|x| x.abs() < bound);
            if r.converged && inside {
                out.push((m, r));
                break;
            }
        }
    }
    out
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
