mod common;

use std::collections::BTreeMap;

use rasch_assess::catalog::{default_catalog, load_catalog};
use rasch_assess::ingest::{parse_responses, parse_targets, LikertScore, RespondentRecord, TargetProfile};
use rasch_assess::pipeline::{analyze, PipelineConfig};

use common::fixture;

fn answers(pairs: &[(&str, u8)]) -> BTreeMap<String, LikertScore> {
    pairs.iter().map(|(id, s)| (id.to_string(), LikertScore::new(*s).unwrap())).collect()
}

#[test]
fn large_gaps_rank_as_hard_and_met_targets_as_easy() {
    let catalog = load_catalog("id,group,name\nwide,Team,Wide gap\nsome,Team,Some gap\nmet,Team,Target met\n").unwrap();
    let targets = TargetProfile::uniform(&catalog, LikertScore::new(5).unwrap());
    let rows = [[1, 3, 5], [2, 2, 4], [1, 4, 5], [3, 3, 4], [2, 4, 3], [1, 2, 5]];
    let records: Vec<RespondentRecord> = rows
        .iter()
        .enumerate()
        .map(|(n, r)| RespondentRecord {
            respondent_id: format!("r{n}"),
            answers: answers(&[("wide", r[0]), ("some", r[1]), ("met", r[2])]),
        })
        .collect();
    let a = analyze(&catalog, &records, &targets, &PipelineConfig::default()).unwrap();
    let order: Vec<&str> = a.report.items.iter().map(|r| r.factor_id.as_str()).collect();
    assert_eq!(order, ["wide", "some", "met"]);
    let gaps: Vec<f64> = a.report.delta_summary.iter().map(|d| d.mean_coded_delta.unwrap()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(a.report.meta.coding_rule.contains("max(target - current, 0)"));
}

#[test]
fn over_compliance_counts_as_met() {
    // current above target codes to the same category as current == target
    let catalog = load_catalog("id,group,name\na,Team,A\nb,Team,B\nc,Team,C\n").unwrap();
    let three = LikertScore::new(3).unwrap();
    let targets = TargetProfile::uniform(&catalog, three);
    let make = |score_a: u8| {
        let rows = [[score_a, 1, 2], [1, 3, 2], [2, 1, 3], [3, 2, 1]];
        rows.iter()
            .enumerate()
            .map(|(n, r)| RespondentRecord {
                respondent_id: format!("r{n}"),
                answers: answers(&[("a", r[0]), ("b", r[1]), ("c", r[2])]),
            })
            .collect::<Vec<_>>()
    };
    let at = analyze(&catalog, &make(3), &targets, &PipelineConfig::default()).unwrap();
    let above = analyze(&catalog, &make(5), &targets, &PipelineConfig::default()).unwrap();
    assert_eq!(at.coded, above.coded);
    assert_eq!(at.report, above.report);
}

#[test]
fn bundled_fixture_calibrates() {
    let catalog = load_catalog(&std::fs::read_to_string(fixture("factors.csv")).unwrap()).unwrap();
    assert_eq!(catalog, default_catalog());
    let records = parse_responses(&std::fs::read_to_string(fixture("responses.csv")).unwrap(), &catalog).unwrap();
    let targets = parse_targets(&std::fs::read_to_string(fixture("targets.csv")).unwrap(), &catalog).unwrap();
    assert_eq!(records.len(), 14);
    let a = analyze(&catalog, &records, &targets, &PipelineConfig::default()).unwrap();
    assert!(a.report.meta.converged);
    assert_eq!(a.report.items.len(), 23);
    assert!(a.report.meta.excluded.persons.is_empty() && a.report.meta.excluded.items.is_empty());
    assert!(a.report.meta.category_collapse.is_none());
    let (infit, outfit) = a.fits.item_means().unwrap();
    assert!((0.7..1.3).contains(&infit) && (0.7..1.3).contains(&outfit), "{infit} {outfit}");
}

#[test]
fn missing_answers_are_tolerated() {
    let catalog = default_catalog();
    let text = std::fs::read_to_string(fixture("responses.csv")).unwrap();
    let trimmed: String = text.lines().enumerate().filter(|(k, _)| *k != 3 && *k != 40).map(|(_, l)| format!("{l}\n")).collect();
    let records = parse_responses(&trimmed, &catalog).unwrap();
    let targets = parse_targets(&std::fs::read_to_string(fixture("targets.csv")).unwrap(), &catalog).unwrap();
    let a = analyze(&catalog, &records, &targets, &PipelineConfig::default()).unwrap();
    assert_eq!(a.coded.missing_count(), 2);
    assert!(a.report.meta.converged);
}
