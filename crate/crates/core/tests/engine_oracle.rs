mod common;

use rasch_assess::model::category_probabilities;
use rasch_assess::oracle::{grid_calibrate, joint_log_likelihood, simulate, GridSpec, PersonDistribution, SimulationSpec};
use rasch_assess::{calibrate, CalibrationConfig, CodedMatrix, ThresholdVector};

use common::well_posed_matrices;

fn three_by_three() -> CodedMatrix {
    CodedMatrix::from_complete_rows(&[vec![1, 0, 1], vec![0, 1, 0], vec![1, 1, 0]], 1).unwrap()
}

#[test]
fn three_by_three_oracle_reference() {
    // reference values from the grid oracle, frozen
    let g = grid_calibrate(&three_by_three(), &GridSpec::new(-5.0, 5.0, 0.01).unwrap()).unwrap();
    let expected = [-0.52, -0.52, 1.04];
    for (got, want) in g.difficulties.iter().zip(expected) {
        assert!((got - want).abs() < 1e-9, "{:?}", g.difficulties);
    }
    for (got, want) in g.measures.iter().zip([0.77, -0.80, 0.77]) {
        assert!((got - want).abs() < 0.011, "{:?}", g.measures);
    }
    assert!((g.log_likelihood - -5.220329102).abs() < 1e-8, "{}", g.log_likelihood);
}

#[test]
fn three_by_three_engine_matches_oracle() {
    let r = calibrate(&three_by_three(), &CalibrationConfig::default()).unwrap();
    let d: Vec<f64> = r.items.iter().map(|i| i.difficulty).collect();
    assert_eq!(d[0], d[1]);
    assert!(d[0] < d[2]);
    for (got, want) in d.iter().zip([-0.521976023, -0.521976023, 1.043952047]) {
        assert!((got - want).abs() < 1e-6, "{d:?}");
    }
    for (got, want) in r.persons.iter().zip([0.76846, -0.79747, 0.76846]) {
        assert!((got.measure - want).abs() < 1e-4, "{:?}", r.persons);
    }
    assert!((r.log_likelihood - -5.2203165313).abs() < 1e-8);
    // within two grid steps of the oracle
    for (got, want) in d.iter().zip([-0.52, -0.52, 1.04]) {
        assert!((got - want).abs() <= 0.02);
    }
}

#[test]
fn refined_oracle_is_not_worse_than_engine() {
    let grid = GridSpec::new(-5.0, 5.0, 0.01).unwrap().with_refinements(4);
    let shapes = [(3, 1), (4, 1), (3, 2), (4, 2), (5, 3)];
    for (m, r) in well_posed_matrices(91, &shapes, 4.5) {
        let g = grid_calibrate(&m, &grid).unwrap();
        assert!(g.log_likelihood >= r.log_likelihood - 1e-6, "{} vs {}", g.log_likelihood, r.log_likelihood);
        for (a, b) in r.items.iter().zip(&g.difficulties) {
            assert!((a.difficulty - b).abs() < 2e-3, "{} vs {b}", a.difficulty);
        }
    }
}

#[test]
fn engine_likelihood_matches_independent_evaluation() {
    for (m, r) in well_posed_matrices(17, &[(4, 2), (5, 3), (6, 4)], 6.0) {
        let beta: Vec<f64> = r.persons.iter().map(|p| p.measure).collect();
        let delta: Vec<f64> = r.items.iter().map(|i| i.difficulty).collect();
        let ll = joint_log_likelihood(&m, &beta, &delta, r.thresholds.as_slice());
        assert!((ll - r.log_likelihood).abs() < 1e-9, "{ll} vs {}", r.log_likelihood);
    }
}

#[test]
fn simulated_category_frequencies_match_model() {
    let tau = ThresholdVector::new(vec![-1.0, -0.3, 0.3, 1.0]).unwrap();
    let spec = SimulationSpec {
        item_difficulties: vec![0.2; 100],
        persons: PersonDistribution::Fixed(vec![0.5; 1000]),
        thresholds: tau.clone(),
        seed: 7,
        item_ids: None,
    };
    let m = simulate(&spec);
    let draws = m.cells().len() as f64;
    assert_eq!(draws, 1e5);
    for (k, p) in category_probabilities(0.5, 0.2, &tau).iter().enumerate() {
        let seen = m.cells().iter().filter(|c| **c == Some(k as u8)).count() as f64 / draws;
        let se = (p * (1.0 - p) / draws).sqrt();
        assert!((seen - p).abs() < 3.0 * se, "category {k}: {seen} vs {p}");
    }
}
