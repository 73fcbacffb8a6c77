//! Joint maximum likelihood calibration of the rating-scale model.
//!
//! Each sweep takes one clamped Newton step per person, then per item, then
//! per threshold, each in index order. After the threshold steps the
//! thresholds are re-centred to sum to zero (the shift moves into the item
//! difficulties) and the difficulties are re-centred to mean zero (the shift
//! moves into the person measures), so neither re-centring changes the
//! likelihood. A step that would lower the likelihood is halved until it
//! does not, which keeps the likelihood non-decreasing across sweeps.

use serde::{Deserialize, Serialize};

use crate::matrix::{extreme_fixpoint, CodedMatrix};
use crate::model::{fill_probabilities, log_probability, moments, ThresholdVector};

/// Score-point adjustment applied to extreme totals before solving for their
/// reported measures.
pub const EXTREME_ADJUSTMENT: f64 = 0.25;

/// Newton denominators below this are treated as degenerate and the update is
/// skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Largest absolute parameter change in a sweep that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest absolute Newton update per parameter per sweep.
    pub step_clamp: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { tolerance: 1e-4, max_iterations: 1000, step_clamp: 1.0 }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(CalibrationError::InvalidConfig(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(CalibrationError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.step_clamp > 0.0 && self.step_clamp.is_finite()) {
            return Err(CalibrationError::InvalidConfig(format!("step_clamp must be positive, got {}", self.step_clamp)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibrationError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("only {0} distinct category observed; at least 2 are required")]
    TooFewCategories(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParameters {
    pub item_id: String,
    pub difficulty: f64,
    pub se: f64,
    pub extreme: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonParameters {
    pub person_id: String,
    pub measure: f64,
    pub se: f64,
    pub extreme: bool,
}

/// Renumbering applied when some categories were never observed.
/// `mapping[k]` is the category that original category `k` was merged into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCollapse {
    pub mapping: Vec<u8>,
    pub unobserved: Vec<u8>,
}

impl CategoryCollapse {
    pub fn apply(&self, category: u8) -> u8 {
        self.mapping[category as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Excluded {
    pub persons: Vec<String>,
    pub items: Vec<String>,
}

impl Excluded {
    pub fn is_empty(&self) -> bool {
        self.persons.is_empty() && self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub items: Vec<ItemParameters>,
    pub persons: Vec<PersonParameters>,
    pub thresholds: ThresholdVector,
    pub converged: bool,
    pub iterations: usize,
    /// Joint log-likelihood over non-extreme cells at the returned estimates.
    pub log_likelihood: f64,
    /// Log-likelihood before the first sweep and after each sweep.
    pub log_likelihood_trace: Vec<f64>,
    pub excluded: Excluded,
    pub category_collapse: Option<CategoryCollapse>,
    /// Newton updates skipped because the denominator hit the floor.
    pub skipped_updates: usize,
    pub warnings: Vec<String>,
    pub config: CalibrationConfig,
}

impl CalibrationResult {
    /// Top category after any collapsing.
    pub fn max_category(&self) -> usize {
        self.thresholds.max_category()
    }

    /// Maps an observed category onto the calibrated scale.
    pub fn recode(&self, category: u8) -> u8 {
        self.category_collapse.as_ref().map_or(category, |c| c.apply(category))
    }

    pub fn mean_difficulty(&self) -> f64 {
        let active: Vec<f64> = self.items.iter().filter(|p| !p.extreme).map(|p| p.difficulty).collect();
        active.iter().sum::<f64>() / active.len().max(1) as f64
    }
}

/// Starting values, `NaN` for extreme persons and items.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialEstimates {
    pub difficulties: Vec<f64>,
    pub measures: Vec<f64>,
    pub thresholds: ThresholdVector,
}

/// Matrix after category collapsing and extreme exclusion.
struct Prepared {
    np: usize,
    ni: usize,
    m: usize,
    x: Vec<Option<u8>>,
    active_persons: Vec<bool>,
    active_items: Vec<bool>,
    collapse: Option<CategoryCollapse>,
}

impl Prepared {
    fn cell(&self, n: usize, i: usize) -> Option<u8> {
        self.x[n * self.ni + i]
    }

    fn new(matrix: &CodedMatrix) -> Result<Self, CalibrationError> {
        let (np, ni) = (matrix.n_persons(), matrix.n_items());
        let original_m = matrix.max_category() as usize;
        let mut x = matrix.cells().to_vec();
        let mut m = original_m;
        let mut mapping: Vec<u8> = (0..=original_m as u8).collect();
        loop {
            let (ext_p, ext_i) = extreme_fixpoint(&x, np, ni, m as u8);
            let active_p: Vec<bool> = ext_p.iter().map(|e| !e).collect();
            let active_i: Vec<bool> = ext_i.iter().map(|e| !e).collect();
            let np_active = active_p.iter().filter(|a| **a).count();
            let ni_active = active_i.iter().filter(|a| **a).count();
            if np_active < 2 || ni_active < 2 {
                return Err(CalibrationError::InsufficientData(format!(
                    "{np_active} non-extreme persons and {ni_active} non-extreme items; at least 2 of each are required"
                )));
            }
            let mut seen = vec![false; m + 1];
            for n in (0..np).filter(|&n| active_p[n]) {
                for i in (0..ni).filter(|&i| active_i[i]) {
                    if let Some(v) = x[n * ni + i] {
                        seen[v as usize] = true;
                    }
                }
            }
            let distinct = seen.iter().filter(|s| **s).count();
            if distinct < 2 {
                return Err(CalibrationError::TooFewCategories(distinct));
            }
            if distinct == m + 1 {
                let collapsed = mapping.iter().enumerate().any(|(k, &v)| v as usize != k);
                let collapse = collapsed.then(|| {
                    let mut observed = vec![false; original_m + 1];
                    for n in (0..np).filter(|&n| active_p[n]) {
                        for i in (0..ni).filter(|&i| active_i[i]) {
                            if let Some(v) = matrix.get(n, i) {
                                observed[v as usize] = true;
                            }
                        }
                    }
                    let unobserved = (0..=original_m as u8).filter(|&k| !observed[k as usize]).collect();
                    CategoryCollapse { mapping: mapping.clone(), unobserved }
                });
                return Ok(Self { np, ni, m, x, active_persons: active_p, active_items: active_i, collapse });
            }
            // new(k) = (number of observed categories <= k) - 1, floored at 0
            let mut remap = vec![0u8; m + 1];
            let mut count = 0usize;
            for k in 0..=m {
                if seen[k] {
                    count += 1;
                }
                remap[k] = count.saturating_sub(1) as u8;
            }
            for v in x.iter_mut().flatten() {
                *v = remap[*v as usize];
            }
            for v in mapping.iter_mut() {
                *v = remap[*v as usize];
            }
            m = distinct - 1;
        }
    }
}

struct State {
    beta: Vec<f64>,
    delta: Vec<f64>,
    tau: Vec<f64>,
}

fn initial_state(data: &Prepared) -> State {
    let m = data.m as f64;
    let mut delta = vec![f64::NAN; data.ni];
    let mut beta = vec![f64::NAN; data.np];
    for i in (0..data.ni).filter(|&i| data.active_items[i]) {
        let (mut total, mut count) = (0.0, 0.0);
        for n in (0..data.np).filter(|&n| data.active_persons[n]) {
            if let Some(v) = data.cell(n, i) {
                total += f64::from(v);
                count += 1.0;
            }
        }
        delta[i] = ((count * m - total) / total).ln();
    }
    let active_delta: Vec<f64> = delta.iter().copied().filter(|d| d.is_finite()).collect();
    let mean = active_delta.iter().sum::<f64>() / active_delta.len() as f64;
    for d in delta.iter_mut().filter(|d| d.is_finite()) {
        *d -= mean;
    }
    for n in (0..data.np).filter(|&n| data.active_persons[n]) {
        let (mut total, mut count) = (0.0, 0.0);
        for i in (0..data.ni).filter(|&i| data.active_items[i]) {
            if let Some(v) = data.cell(n, i) {
                total += f64::from(v);
                count += 1.0;
            }
        }
        beta[n] = (total / (count * m - total)).ln();
    }
    State { beta, delta, tau: vec![0.0; data.m] }
}

/// Starting values: log-odds of each item's and person's coded total, item
/// values centred to mean zero, thresholds all zero.
pub fn initialize(matrix: &CodedMatrix) -> Result<InitialEstimates, CalibrationError> {
    let data = Prepared::new(matrix)?;
    let state = initial_state(&data);
    Ok(InitialEstimates {
        difficulties: state.delta,
        measures: state.beta,
        thresholds: ThresholdVector::from_raw(state.tau),
    })
}

/// One clamped Newton step on a concave one-dimensional log-likelihood,
/// halved until it does not decrease `ll`. Returns `None` when the
/// denominator is degenerate.
fn newton_step(value: f64, gradient: f64, information: f64, clamp: f64, mut ll: impl FnMut(f64) -> f64) -> Option<f64> {
    if information.is_nan() || information <= DENOMINATOR_FLOOR {
        return None;
    }
    let mut step = (gradient / information).clamp(-clamp, clamp);
    if step == 0.0 {
        return Some(value);
    }
    let base = ll(value);
    for _ in 0..MAX_HALVINGS {
        let candidate = value + step;
        if ll(candidate) >= base {
            return Some(candidate);
        }
        step *= 0.5;
    }
    Some(value)
}

fn person_ll(d: &Prepared, state: &State, n: usize, beta: f64, scratch: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for i in (0..d.ni).filter(|&i| d.active_items[i]) {
        if let Some(x) = d.cell(n, i) {
            ll += log_probability(beta - state.delta[i], &state.tau, x as usize, scratch);
        }
    }
    ll
}

fn item_ll(d: &Prepared, state: &State, i: usize, delta: f64, scratch: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for n in (0..d.np).filter(|&n| d.active_persons[n]) {
        if let Some(x) = d.cell(n, i) {
            ll += log_probability(state.beta[n] - delta, &state.tau, x as usize, scratch);
        }
    }
    ll
}

/// One full sweep: persons, then items, then thresholds.
/// Returns the number of skipped updates.
fn sweep(d: &Prepared, config: &CalibrationConfig, state: &mut State) -> usize {
    let mut skipped = 0;
    let mut probs = vec![0.0; d.m + 1];
    let mut scratch = vec![0.0; d.m + 1];

    for n in (0..d.np).filter(|&n| d.active_persons[n]) {
        let (mut observed, mut expected, mut info) = (0.0, 0.0, 0.0);
        for i in (0..d.ni).filter(|&i| d.active_items[i]) {
            if let Some(x) = d.cell(n, i) {
                fill_probabilities(state.beta[n] - state.delta[i], &state.tau, &mut probs);
                let (e, v) = moments(&probs);
                observed += f64::from(x);
                expected += e;
                info += v;
            }
        }
        let fixed: &State = state;
        match newton_step(fixed.beta[n], observed - expected, info, config.step_clamp, |b| {
            person_ll(d, fixed, n, b, &mut scratch)
        }) {
            Some(b) => state.beta[n] = b,
            None => skipped += 1,
        }
    }

    for i in (0..d.ni).filter(|&i| d.active_items[i]) {
        let (mut observed, mut expected, mut info) = (0.0, 0.0, 0.0);
        for n in (0..d.np).filter(|&n| d.active_persons[n]) {
            if let Some(x) = d.cell(n, i) {
                fill_probabilities(state.beta[n] - state.delta[i], &state.tau, &mut probs);
                let (e, v) = moments(&probs);
                observed += f64::from(x);
                expected += e;
                info += v;
            }
        }
        let fixed: &State = state;
        match newton_step(fixed.delta[i], expected - observed, info, config.step_clamp, |delta| {
            item_ll(d, fixed, i, delta, &mut scratch)
        }) {
            Some(v) => state.delta[i] = v,
            None => skipped += 1,
        }
    }

    if d.m >= 2 {
        let mut trial = state.tau.clone();
        for j in 1..=d.m {
            let (mut model_at_or_above, mut observed_at_or_above, mut info) = (0.0, 0.0, 0.0);
            for n in (0..d.np).filter(|&n| d.active_persons[n]) {
                for i in (0..d.ni).filter(|&i| d.active_items[i]) {
                    if let Some(x) = d.cell(n, i) {
                        fill_probabilities(state.beta[n] - state.delta[i], &state.tau, &mut probs);
                        let g: f64 = probs[j..].iter().sum();
                        model_at_or_above += g;
                        info += g * (1.0 - g);
                        if x as usize >= j {
                            observed_at_or_above += 1.0;
                        }
                    }
                }
            }
            trial.copy_from_slice(&state.tau);
            let step = newton_step(state.tau[j - 1], model_at_or_above - observed_at_or_above, info, config.step_clamp, |t| {
                let mut candidate = trial.clone();
                candidate[j - 1] = t;
                total_log_likelihood(d, &state.beta, &state.delta, &candidate, &mut scratch)
            });
            match step {
                Some(t) => state.tau[j - 1] = t,
                None => skipped += 1,
            }
        }
    }
    skipped
}

fn total_log_likelihood(d: &Prepared, beta: &[f64], delta: &[f64], tau: &[f64], scratch: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for n in (0..d.np).filter(|&n| d.active_persons[n]) {
        for i in (0..d.ni).filter(|&i| d.active_items[i]) {
            if let Some(x) = d.cell(n, i) {
                ll += log_probability(beta[n] - delta[i], tau, x as usize, scratch);
            }
        }
    }
    ll
}

fn recentre(d: &Prepared, state: &mut State) {
    if d.m >= 2 {
        let shift = state.tau.iter().sum::<f64>() / d.m as f64;
        state.tau.iter_mut().for_each(|t| *t -= shift);
        for i in (0..d.ni).filter(|&i| d.active_items[i]) {
            state.delta[i] += shift;
        }
    }
    let active = d.active_items.iter().filter(|a| **a).count() as f64;
    let mean = (0..d.ni).filter(|&i| d.active_items[i]).map(|i| state.delta[i]).sum::<f64>() / active;
    for i in (0..d.ni).filter(|&i| d.active_items[i]) {
        state.delta[i] -= mean;
    }
    for n in (0..d.np).filter(|&n| d.active_persons[n]) {
        state.beta[n] -= mean;
    }
}

fn max_change(before: &State, after: &State) -> f64 {
    let pairs = before
        .beta
        .iter()
        .zip(&after.beta)
        .chain(before.delta.iter().zip(&after.delta))
        .chain(before.tau.iter().zip(&after.tau));
    pairs.filter(|(a, _)| a.is_finite()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Solves `f(x) = target` for increasing `f`, given `f` and its derivative.
fn solve_increasing(target: f64, mut f: impl FnMut(f64) -> (f64, f64)) -> f64 {
    let (mut lo, mut hi) = (-60.0f64, 60.0f64);
    let mut x = 0.0;
    for _ in 0..300 {
        let (value, slope) = f(x);
        let diff = value - target;
        if diff.abs() < 1e-12 {
            return x;
        }
        if diff < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - diff / slope;
        x = if slope > DENOMINATOR_FLOOR && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-13 {
            break;
        }
    }
    x
}

/// Fits the rating-scale model by joint maximum likelihood.
pub fn calibrate(matrix: &CodedMatrix, config: &CalibrationConfig) -> Result<CalibrationResult, CalibrationError> {
    config.validate()?;
    let data = Prepared::new(matrix)?;
    let mut state = initial_state(&data);
    let mut skipped_updates = 0;

    let mut scratch = vec![0.0; data.m + 1];
    let mut trace = vec![total_log_likelihood(&data, &state.beta, &state.delta, &state.tau, &mut scratch)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let before = State { beta: state.beta.clone(), delta: state.delta.clone(), tau: state.tau.clone() };
        let skipped = sweep(&data, config, &mut state);
        skipped_updates += skipped;
        recentre(&data, &mut state);
        trace.push(total_log_likelihood(&data, &state.beta, &state.delta, &state.tau, &mut scratch));
        // a skipped update moves nothing, so it cannot be evidence of convergence
        if skipped == 0 && max_change(&before, &state) < config.tolerance {
            converged = true;
            break;
        }
    }

    let mut warnings = Vec::new();
    if let Some(c) = &data.collapse {
        warnings.push(format!(
            "categories {:?} were not observed; calibrated with categories merged as {:?}",
            c.unobserved, c.mapping
        ));
    }
    if skipped_updates > 0 {
        warnings.push(format!("{skipped_updates} Newton updates skipped at the denominator floor"));
    }
    if !converged {
        warnings.push(format!("no convergence within {} sweeps", config.max_iterations));
    }

    let thresholds = ThresholdVector::from_raw(state.tau.clone());
    let mut probs = vec![0.0; data.m + 1];
    let mut items = Vec::with_capacity(data.ni);
    for i in 0..data.ni {
        let id = matrix.item_ids()[i].clone();
        if data.active_items[i] {
            items.push(ItemParameters { item_id: id, difficulty: state.delta[i], se: f64::NAN, extreme: false });
            continue;
        }
        let counterparts: Vec<(f64, u8)> = (0..data.np)
            .filter(|&n| data.active_persons[n])
            .filter_map(|n| data.cell(n, i).map(|x| (state.beta[n], x)))
            .collect();
        let difficulty = adjusted_extreme(&counterparts, data.m, &state.tau, &mut probs).map_or(f64::NAN, |theta| -theta);
        items.push(ItemParameters { item_id: id, difficulty, se: f64::NAN, extreme: true });
    }
    let mut persons = Vec::with_capacity(data.np);
    for n in 0..data.np {
        let id = matrix.person_ids()[n].clone();
        if data.active_persons[n] {
            persons.push(PersonParameters { person_id: id, measure: state.beta[n], se: f64::NAN, extreme: false });
            continue;
        }
        let counterparts: Vec<(f64, u8)> = (0..data.ni)
            .filter(|&i| data.active_items[i])
            .filter_map(|i| data.cell(n, i).map(|x| (-state.delta[i], x)))
            .collect();
        let measure = adjusted_extreme(&counterparts, data.m, &state.tau, &mut probs).unwrap_or(f64::NAN);
        persons.push(PersonParameters { person_id: id, measure, se: f64::NAN, extreme: true });
    }

    let excluded = Excluded {
        persons: persons.iter().filter(|p| p.extreme).map(|p| p.person_id.clone()).collect(),
        items: items.iter().filter(|p| p.extreme).map(|p| p.item_id.clone()).collect(),
    };
    let mut result = CalibrationResult {
        items,
        persons,
        thresholds,
        converged,
        iterations,
        log_likelihood: *trace.last().expect("trace starts non-empty"),
        log_likelihood_trace: trace,
        excluded,
        category_collapse: data.collapse.clone(),
        skipped_updates,
        warnings,
        config: *config,
    };
    let (items, persons) = standard_errors(matrix, &result);
    result.items = items;
    result.persons = persons;
    Ok(result)
}

/// Solves for the location `theta` at which the expected total over the
/// counterparts `(offset, observed)` equals the extreme total moved
/// [`EXTREME_ADJUSTMENT`] points toward the interior. Each cell contributes
/// `E(theta + offset)`.
fn adjusted_extreme(counterparts: &[(f64, u8)], m: usize, tau: &[f64], probs: &mut [f64]) -> Option<f64> {
    if counterparts.is_empty() {
        return None;
    }
    let max_total = (counterparts.len() * m) as f64;
    let total: f64 = counterparts.iter().map(|(_, x)| f64::from(*x)).sum();
    let target = total.clamp(EXTREME_ADJUSTMENT, max_total - EXTREME_ADJUSTMENT);
    Some(solve_increasing(target, |theta| {
        let (mut e, mut v) = (0.0, 0.0);
        for (offset, _) in counterparts {
            fill_probabilities(theta + offset, tau, probs);
            let (me, mv) = moments(probs);
            e += me;
            v += mv;
        }
        (e, v)
    }))
}

/// Model standard errors `1 / sqrt(sum of score variances)`, summed over the
/// observed cells shared with non-extreme counterparts.
pub fn standard_errors(matrix: &CodedMatrix, result: &CalibrationResult) -> (Vec<ItemParameters>, Vec<PersonParameters>) {
    let tau = result.thresholds.as_slice();
    let mut probs = vec![0.0; tau.len() + 1];
    let mut item_info = vec![0.0; result.items.len()];
    let mut person_info = vec![0.0; result.persons.len()];
    for (n, person) in result.persons.iter().enumerate() {
        for (i, item) in result.items.iter().enumerate() {
            if matrix.get(n, i).is_none() || (person.extreme && item.extreme) {
                continue;
            }
            if !(person.measure.is_finite() && item.difficulty.is_finite()) {
                continue;
            }
            fill_probabilities(person.measure - item.difficulty, tau, &mut probs);
            let (_, v) = moments(&probs);
            if !person.extreme {
                item_info[i] += v;
            }
            if !item.extreme {
                person_info[n] += v;
            }
        }
    }
    let se = |info: f64| if info > 0.0 { 1.0 / info.sqrt() } else { f64::NAN };
    let items = result
        .items
        .iter()
        .zip(&item_info)
        .map(|(p, &info)| ItemParameters { se: se(info), ..p.clone() })
        .collect();
    let persons = result
        .persons
        .iter()
        .zip(&person_info)
        .map(|(p, &info)| PersonParameters { se: se(info), ..p.clone() })
        .collect();
    (items, persons)
}
