//! Text Wright map: persons and items on one logit axis.

use crate::engine::CalibrationResult;
use crate::report::RankingReport;

/// Width of one axis row in logits.
pub const BIN_WIDTH: f64 = 0.25;

const MAX_MARKS: usize = 40;

struct Entry {
    label: String,
    location: f64,
}

fn bin(x: f64) -> i64 {
    (x / BIN_WIDTH).round() as i64
}

fn render(persons: &[f64], items: &[Entry], excluded_persons: &[Entry], excluded_items: &[Entry]) -> String {
    let mut out = String::new();
    let bins: Vec<i64> = persons.iter().map(|&p| bin(p)).chain(items.iter().map(|e| bin(e.location))).collect();
    let (Some(&top), Some(&bottom)) = (bins.iter().max(), bins.iter().min()) else {
        out.push_str("(nothing to map)\n");
        return list_excluded(out, excluded_persons, excluded_items);
    };

    let mut counts = vec![0usize; (top - bottom + 1) as usize];
    for &p in persons {
        counts[(top - bin(p)) as usize] += 1;
    }
    let most = counts.iter().copied().max().unwrap_or(0);
    let per_mark = most.div_ceil(MAX_MARKS).max(1);
    let width = most.div_ceil(per_mark).max("PERSONS".len());

    out.push_str(&format!("{:>width$} | {:>7} | ITEMS\n", "PERSONS", "LOGIT"));
    for (row, b) in (bottom..=top).rev().enumerate() {
        let marks = "#".repeat(counts[row].div_ceil(per_mark));
        let labels: Vec<&str> = items.iter().filter(|e| bin(e.location) == b).map(|e| e.label.as_str()).collect();
        let line = format!("{marks:>width$} | {:>7.2} | {}", b as f64 * BIN_WIDTH, labels.join(" "));
        out.push_str(line.trim_end());
        out.push('\n');
    }
    if persons.is_empty() {
        out.push_str("No non-extreme persons to map.\n");
    } else {
        out.push_str(&format!("Each '#' is up to {per_mark} person(s); rows are {BIN_WIDTH} logits wide.\n"));
    }
    list_excluded(out, excluded_persons, excluded_items)
}

fn list_excluded(mut out: String, persons: &[Entry], items: &[Entry]) -> String {
    for (kind, list) in [("persons", persons), ("items", items)] {
        if list.is_empty() {
            continue;
        }
        let parts: Vec<String> = list
            .iter()
            .map(|e| {
                if e.location.is_finite() {
                    format!("{} ({:.2})", e.label, e.location)
                } else {
                    e.label.clone()
                }
            })
            .collect();
        out.push_str(&format!("Extreme {kind}, not on the axis: {}\n", parts.join(", ")));
    }
    out
}

pub fn wright_map(result: &CalibrationResult) -> String {
    let persons: Vec<f64> = result.persons.iter().filter(|p| !p.extreme).map(|p| p.measure).collect();
    let entry = |label: &str, location: f64| Entry { label: label.to_string(), location };
    let items: Vec<Entry> =
        result.items.iter().filter(|i| !i.extreme).map(|i| entry(&i.item_id, i.difficulty)).collect();
    let ext_p: Vec<Entry> =
        result.persons.iter().filter(|p| p.extreme).map(|p| entry(&p.person_id, p.measure)).collect();
    let ext_i: Vec<Entry> = result.items.iter().filter(|i| i.extreme).map(|i| entry(&i.item_id, i.difficulty)).collect();
    render(&persons, &items, &ext_p, &ext_i)
}

/// Same map, drawn from a stored report.
pub fn wright_map_from_report(report: &RankingReport) -> String {
    let persons: Vec<f64> = report.persons.iter().filter(|p| !p.extreme).filter_map(|p| p.measure).collect();
    let items: Vec<Entry> =
        report.items.iter().map(|r| Entry { label: r.factor_id.clone(), location: r.logit }).collect();
    let ext_p: Vec<Entry> = report
        .persons
        .iter()
        .filter(|p| p.extreme)
        .map(|p| Entry { label: p.person_id.clone(), location: p.measure.unwrap_or(f64::NAN) })
        .collect();
    let ext_i: Vec<Entry> = report
        .meta
        .excluded
        .items
        .iter()
        .map(|id| Entry { label: id.clone(), location: f64::NAN })
        .collect();
    render(&persons, &items, &ext_p, &ext_i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(label: &str, location: f64) -> Entry {
        Entry { label: label.into(), location }
    }

    #[test]
    fn shared_bin_at_zero() {
        let map = render(&[0.0], &[e("item-a", 0.0)], &[], &[]);
        let row = map.lines().find(|l| l.contains("item-a")).unwrap();
        assert!(row.contains("0.00"), "{map}");
        assert!(row.trim_start().starts_with('#'), "{map}");
    }

    #[test]
    fn items_only_with_note() {
        let map = render(&[], &[e("a", 1.0), e("b", -1.0)], &[e("p1", 3.1)], &[]);
        assert!(map.contains("No non-extreme persons"), "{map}");
        assert!(map.contains("Extreme persons, not on the axis: p1 (3.10)"), "{map}");
        assert!(!map.contains('#'));
    }

    #[test]
    fn axis_covers_item_span() {
        let map = render(&[0.3], &[e("hard", 2.42), e("easy", -2.28)], &[], &[]);
        let labels: Vec<f64> = map
            .lines()
            .filter_map(|l| l.split('|').nth(1))
            .filter_map(|c| c.trim().parse::<f64>().ok())
            .collect();
        let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo - BIN_WIDTH / 2.0 <= -2.28 && hi + BIN_WIDTH / 2.0 >= 2.42, "{map}");
        // one row per bin, no gaps
        assert_eq!(labels.len() as i64, bin(2.42) - bin(-2.28) + 1);
    }

    #[test]
    fn crowded_bins_are_scaled() {
        let persons = vec![0.1; 200];
        let map = render(&persons, &[e("a", 0.0)], &[], &[]);
        assert!(map.contains("Each '#' is up to 5 person(s)"), "{map}");
    }
}
