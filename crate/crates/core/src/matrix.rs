//! Persons × items grid of coded ordinal categories.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error("grid has {cells} cells, expected {persons} persons x {items} items")]
    Shape { persons: usize, items: usize, cells: usize },
    #[error("cell ({person}, {item}) holds category {value}, above the top category {max}")]
    OutOfRange { person: String, item: String, value: u8, max: u8 },
    #[error("top category must be at least 1")]
    NoCategories,
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
}

/// Coded response matrix. Missing cells are `None`.
///
/// Persons and items whose observed cells are all at category 0 or all at the
/// top category are flagged extreme. Flagging is repeated after dropping the
/// flagged rows and columns until nothing changes, so a person who is only
/// extreme once an extreme item is removed is flagged too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedMatrix {
    person_ids: Vec<String>,
    item_ids: Vec<String>,
    cells: Vec<Option<u8>>,
    max_category: u8,
    extreme_persons: Vec<bool>,
    extreme_items: Vec<bool>,
}

impl CodedMatrix {
    /// `cells` is row-major: person `n`, item `i` lives at `n * items + i`.
    pub fn new(
        person_ids: Vec<String>,
        item_ids: Vec<String>,
        cells: Vec<Option<u8>>,
        max_category: u8,
    ) -> Result<Self, MatrixError> {
        if max_category == 0 {
            return Err(MatrixError::NoCategories);
        }
        let (np, ni) = (person_ids.len(), item_ids.len());
        if cells.len() != np * ni {
            return Err(MatrixError::Shape { persons: np, items: ni, cells: cells.len() });
        }
        for (kind, ids) in [("person", &person_ids), ("item", &item_ids)] {
            let mut seen = std::collections::HashSet::new();
            for id in ids {
                if !seen.insert(id) {
                    return Err(MatrixError::DuplicateId { kind, id: id.clone() });
                }
            }
        }
        for (idx, cell) in cells.iter().enumerate() {
            if let Some(v) = *cell {
                if v > max_category {
                    return Err(MatrixError::OutOfRange {
                        person: person_ids[idx / ni].clone(),
                        item: item_ids[idx % ni].clone(),
                        value: v,
                        max: max_category,
                    });
                }
            }
        }
        let (extreme_persons, extreme_items) = extreme_fixpoint(&cells, np, ni, max_category);
        Ok(Self { person_ids, item_ids, cells, max_category, extreme_persons, extreme_items })
    }

    /// Convenience constructor from nested rows with generated ids `p1..`, `i1..`.
    pub fn from_rows(rows: &[Vec<Option<u8>>], max_category: u8) -> Result<Self, MatrixError> {
        let ni = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * ni);
        for row in rows {
            if row.len() != ni {
                return Err(MatrixError::Shape { persons: rows.len(), items: ni, cells: row.len() });
            }
            cells.extend_from_slice(row);
        }
        let persons = (1..=rows.len()).map(|n| format!("p{n}")).collect();
        let items = (1..=ni).map(|i| format!("i{i}")).collect();
        Self::new(persons, items, cells, max_category)
    }

    /// Complete-data variant of [`CodedMatrix::from_rows`].
    pub fn from_complete_rows(rows: &[Vec<u8>], max_category: u8) -> Result<Self, MatrixError> {
        let rows: Vec<Vec<Option<u8>>> = rows.iter().map(|r| r.iter().copied().map(Some).collect()).collect();
        Self::from_rows(&rows, max_category)
    }

    pub fn n_persons(&self) -> usize {
        self.person_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn max_category(&self) -> u8 {
        self.max_category
    }

    pub fn person_ids(&self) -> &[String] {
        &self.person_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn get(&self, person: usize, item: usize) -> Option<u8> {
        self.cells[person * self.item_ids.len() + item]
    }

    pub fn cells(&self) -> &[Option<u8>] {
        &self.cells
    }

    pub fn row(&self, person: usize) -> &[Option<u8>] {
        let ni = self.item_ids.len();
        &self.cells[person * ni..(person + 1) * ni]
    }

    pub fn extreme_persons(&self) -> &[bool] {
        &self.extreme_persons
    }

    pub fn extreme_items(&self) -> &[bool] {
        &self.extreme_items
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn non_extreme_persons(&self) -> usize {
        self.extreme_persons.iter().filter(|e| !**e).count()
    }

    pub fn non_extreme_items(&self) -> usize {
        self.extreme_items.iter().filter(|e| !**e).count()
    }

    /// True when at least two persons and two items remain after extreme
    /// exclusion, the minimum for calibration.
    pub fn is_calibratable(&self) -> bool {
        self.non_extreme_persons() >= 2 && self.non_extreme_items() >= 2
    }

    /// Sum of observed categories per item, over all persons.
    pub fn item_totals(&self) -> Vec<u32> {
        let mut totals = vec![0u32; self.n_items()];
        for row in self.cells.chunks(self.n_items().max(1)) {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c.map_or(0, u32::from);
            }
        }
        totals
    }

    /// Sum of observed categories per person.
    pub fn person_totals(&self) -> Vec<u32> {
        (0..self.n_persons()).map(|n| self.row(n).iter().map(|c| c.map_or(0, u32::from)).sum()).collect()
    }

    /// Mirrors every category: `k` becomes `max_category - k`.
    pub fn reversed(&self) -> Self {
        let m = self.max_category;
        let cells = self.cells.iter().map(|c| c.map(|v| m - v)).collect();
        Self::new(self.person_ids.clone(), self.item_ids.clone(), cells, m).expect("mirroring preserves validity")
    }

    /// Reorders persons so that new row `r` is old row `order[r]`.
    pub fn permute_persons(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n_persons(), "order must cover every person");
        let ids = order.iter().map(|&n| self.person_ids[n].clone()).collect();
        let cells = order.iter().flat_map(|&n| self.row(n).iter().copied()).collect();
        Self::new(ids, self.item_ids.clone(), cells, self.max_category).expect("permutation preserves validity")
    }
}

/// Flags persons and items whose observed cells (against still-active
/// counterparts) are all 0 or all `max`. Entities with no such cells are
/// flagged as well, since they carry no information.
pub(crate) fn extreme_fixpoint(cells: &[Option<u8>], np: usize, ni: usize, max: u8) -> (Vec<bool>, Vec<bool>) {
    let mut persons = vec![false; np];
    let mut items = vec![false; ni];
    let is_extreme = |values: &mut dyn Iterator<Item = u8>| {
        let (mut any, mut all_low, mut all_high) = (false, true, true);
        for v in values {
            any = true;
            all_low &= v == 0;
            all_high &= v == max;
        }
        !any || all_low || all_high
    };
    loop {
        let mut changed = false;
        for n in 0..np {
            if persons[n] {
                continue;
            }
            let mut vals = (0..ni).filter(|&i| !items[i]).filter_map(|i| cells[n * ni + i]);
            if is_extreme(&mut vals) {
                persons[n] = true;
                changed = true;
            }
        }
        for i in 0..ni {
            if items[i] {
                continue;
            }
            let mut vals = (0..np).filter(|&n| !persons[n]).filter_map(|n| cells[n * ni + i]);
            if is_extreme(&mut vals) {
                items[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (persons, items);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_row_is_extreme() {
        let m = CodedMatrix::from_complete_rows(&[vec![0, 0, 0], vec![1, 2, 0], vec![2, 1, 3]], 4).unwrap();
        assert_eq!(m.extreme_persons(), &[true, false, false]);
        assert_eq!(m.extreme_items(), &[false, false, false]);
    }

    #[test]
    fn extremity_cascades() {
        // Once person 1 (all max) is dropped, item 3 only sees zeros.
        let m = CodedMatrix::from_complete_rows(&[vec![1, 1, 1], vec![1, 0, 0], vec![0, 1, 0]], 1).unwrap();
        assert_eq!(m.extreme_persons(), &[true, false, false]);
        assert_eq!(m.extreme_items(), &[false, false, true]);
    }

    #[test]
    fn rejects_out_of_range_and_bad_shape() {
        assert!(matches!(CodedMatrix::from_complete_rows(&[vec![5]], 4), Err(MatrixError::OutOfRange { .. })));
        let err = CodedMatrix::new(vec!["a".into()], vec!["x".into(), "y".into()], vec![Some(1)], 4);
        assert!(matches!(err, Err(MatrixError::Shape { .. })));
    }

    #[test]
    fn reversal_mirrors_categories() {
        let m = CodedMatrix::from_rows(&[vec![Some(0), None], vec![Some(3), Some(4)]], 4).unwrap();
        let r = m.reversed();
        assert_eq!(r.row(0), &[Some(4), None]);
        assert_eq!(r.row(1), &[Some(1), Some(0)]);
        assert_eq!(r.reversed(), m);
    }

    #[test]
    fn totals_skip_missing() {
        let m = CodedMatrix::from_rows(&[vec![Some(2), None], vec![Some(1), Some(3)]], 4).unwrap();
        assert_eq!(m.item_totals(), vec![3, 3]);
        assert_eq!(m.person_totals(), vec![2, 4]);
        assert_eq!(m.missing_count(), 1);
    }
}
