//! Brute-force calibration oracle and seeded response simulator.
//!
//! [`grid_calibrate`] maximizes the same joint likelihood as the engine by
//! coordinate-wise exhaustive search over a fixed grid. It shares no
//! estimation code with the engine: it has its own category probabilities
//! and never uses derivatives. It is slow by construction and meant for
//! matrices of a handful of persons and items.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{extreme_fixpoint, CodedMatrix};
use crate::model::{fill_probabilities, ThresholdVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
    /// Extra passes at step/10, step/100, ... searching a window of ten steps
    /// around the current point. Zero keeps the search on the base grid.
    pub refinements: u32,
    /// Random restarts in addition to the start from all zeros.
    pub restarts: u32,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, step: f64) -> Result<Self, OracleError> {
        if !(lower < upper && step > 0.0 && lower.is_finite() && upper.is_finite()) {
            return Err(OracleError::BadGrid(format!("lower {lower}, upper {upper}, step {step}")));
        }
        if (upper - lower) / step > 1e7 {
            return Err(OracleError::BadGrid(format!("{} grid points is too many", (upper - lower) / step)));
        }
        Ok(Self { lower, upper, step, refinements: 0, restarts: 3, seed: 0x5eed })
    }

    pub fn with_refinements(self, refinements: u32) -> Self {
        Self { refinements, ..self }
    }

    pub fn with_restarts(self, restarts: u32, seed: u64) -> Self {
        Self { restarts, seed, ..self }
    }

    fn points(&self) -> usize {
        ((self.upper - self.lower) / self.step).round() as usize + 1
    }

    fn value(&self, index: usize) -> f64 {
        self.lower + index as f64 * self.step
    }

    fn snap(&self, x: f64) -> f64 {
        let idx = ((x - self.lower) / self.step).round().clamp(0.0, (self.points() - 1) as f64);
        self.value(idx as usize)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("insufficient data: fewer than 2 non-extreme persons or items")]
    InsufficientData,
    #[error("category {0} is not observed among non-extreme cells")]
    UnobservedCategory(u8),
    #[error("no coordinate-wise optimum after {0} sweeps")]
    SweepCap(usize),
}

/// Grid-optimal parameters under the engine's identification: item
/// difficulties averaging zero and thresholds summing to zero. Extreme
/// persons and items are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEstimate {
    pub difficulties: Vec<f64>,
    pub measures: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub log_likelihood: f64,
    pub sweeps: usize,
}

const SWEEP_CAP: usize = 100_000;

fn log_category_probability(eta: f64, tau: &[f64], k: usize) -> f64 {
    // log of exp(k eta - sum_{j<=k} tau_j) / sum_m exp(m eta - sum_{j<=m} tau_j)
    let mut terms = Vec::with_capacity(tau.len() + 1);
    let mut acc = 0.0;
    terms.push(0.0);
    for t in tau {
        acc += eta - t;
        terms.push(acc);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    terms[k] - norm
}

/// Joint log-likelihood over the observed cells whose person and item are
/// both finite. Extreme entities carry `NaN` and drop out.
pub fn joint_log_likelihood(matrix: &CodedMatrix, measures: &[f64], difficulties: &[f64], thresholds: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (n, beta) in measures.iter().enumerate() {
        for (i, delta) in difficulties.iter().enumerate() {
            if let (Some(x), true) = (matrix.get(n, i), beta.is_finite() && delta.is_finite()) {
                ll += log_category_probability(beta - delta, thresholds, x as usize);
            }
        }
    }
    ll
}

struct Problem<'a> {
    matrix: &'a CodedMatrix,
    persons: Vec<usize>,
    items: Vec<usize>,
    m: usize,
}

impl Problem<'_> {
    fn person_ll(&self, n: usize, beta: f64, delta: &[f64], tau: &[f64]) -> f64 {
        self.items
            .iter()
            .zip(delta)
            .filter_map(|(&i, d)| self.matrix.get(n, i).map(|x| log_category_probability(beta - d, tau, x as usize)))
            .sum()
    }

    fn item_ll(&self, i: usize, delta: f64, beta: &[f64], tau: &[f64]) -> f64 {
        self.persons
            .iter()
            .zip(beta)
            .filter_map(|(&n, b)| self.matrix.get(n, i).map(|x| log_category_probability(b - delta, tau, x as usize)))
            .sum()
    }

    fn total_ll(&self, beta: &[f64], delta: &[f64], tau: &[f64]) -> f64 {
        self.persons.iter().zip(beta).map(|(&n, &b)| self.person_ll(n, b, delta, tau)).sum()
    }
}

/// Picks the candidate with the highest score, keeping `current` unless a
/// candidate is strictly better.
fn best_of(current: f64, candidates: impl Iterator<Item = f64>, mut score: impl FnMut(f64) -> f64) -> f64 {
    let mut best = current;
    let mut best_score = score(current);
    for c in candidates {
        let s = score(c);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

struct Search<'a> {
    grid: &'a GridSpec,
    step: f64,
    /// Half-width of the scanned window in steps, or `None` for the full grid.
    window: Option<usize>,
}

impl Search<'_> {
    fn candidates(&self, at: f64) -> Vec<f64> {
        match self.window {
            None => (0..self.grid.points()).map(|k| self.grid.value(k)).collect(),
            Some(w) => (-(w as i64)..=w as i64)
                .map(|k| at + k as f64 * self.step)
                .filter(|v| *v >= self.grid.lower - 1e-12 && *v <= self.grid.upper + 1e-12)
                .collect(),
        }
    }
}

fn coordinate_ascent(
    problem: &Problem,
    search: &Search,
    beta: &mut [f64],
    delta: &mut [f64],
    tau: &mut [f64],
) -> Result<usize, OracleError> {
    for sweep in 1..=SWEEP_CAP {
        let mut moved = false;
        for (b, &n) in beta.iter_mut().zip(&problem.persons) {
            let new = best_of(*b, search.candidates(*b).into_iter(), |x| problem.person_ll(n, x, delta, tau));
            moved |= new != *b;
            *b = new;
        }
        for (d, &i) in delta.iter_mut().zip(&problem.items) {
            let new = best_of(*d, search.candidates(*d).into_iter(), |x| problem.item_ll(i, x, beta, tau));
            moved |= new != *d;
            *d = new;
        }
        if problem.m >= 2 {
            for j in 0..tau.len() {
                let mut trial = tau.to_vec();
                let new = best_of(tau[j], search.candidates(tau[j]).into_iter(), |t| {
                    trial[j] = t;
                    problem.total_ll(beta, delta, &trial)
                });
                moved |= new != tau[j];
                tau[j] = new;
            }
        }
        if !moved {
            return Ok(sweep);
        }
    }
    Err(OracleError::SweepCap(SWEEP_CAP))
}

/// Coordinate-wise exhaustive likelihood maximization on a grid.
///
/// Starts from all zeros and from `grid.restarts` random grid points, runs
/// coordinate ascent until no single parameter can improve, and keeps the best
/// start. Parameters are searched without constraints (the likelihood is flat
/// along the identification directions) and normalized at the end.
type Candidate = (f64, Vec<f64>, Vec<f64>, Vec<f64>, usize);

pub fn grid_calibrate(matrix: &CodedMatrix, grid: &GridSpec) -> Result<OracleEstimate, OracleError> {
    let (np, ni) = (matrix.n_persons(), matrix.n_items());
    let m = matrix.max_category() as usize;
    let (ext_p, ext_i) = extreme_fixpoint(matrix.cells(), np, ni, m as u8);
    let persons: Vec<usize> = (0..np).filter(|&n| !ext_p[n]).collect();
    let items: Vec<usize> = (0..ni).filter(|&i| !ext_i[i]).collect();
    if persons.len() < 2 || items.len() < 2 {
        return Err(OracleError::InsufficientData);
    }
    let mut observed = vec![false; m + 1];
    for &n in &persons {
        for &i in &items {
            if let Some(x) = matrix.get(n, i) {
                observed[x as usize] = true;
            }
        }
    }
    if let Some(k) = observed.iter().position(|o| !o) {
        return Err(OracleError::UnobservedCategory(k as u8));
    }
    let problem = Problem { matrix, persons, items, m };

    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    // (log-likelihood, beta, delta, tau, sweeps) of the best start so far
    let mut best: Option<Candidate> = None;
    for start in 0..=grid.restarts {
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len).map(|_| if start == 0 { grid.snap(0.0) } else { grid.snap(rng.gen_range(-1.0..1.0)) }).collect()
        };
        let mut beta = draw(problem.persons.len());
        let mut delta = draw(problem.items.len());
        let mut tau = if m >= 2 { draw(m) } else { vec![0.0] };

        let mut sweeps = coordinate_ascent(&problem, &Search { grid, step: grid.step, window: None }, &mut beta, &mut delta, &mut tau)?;
        let mut step = grid.step;
        for _ in 0..grid.refinements {
            step /= 10.0;
            sweeps += coordinate_ascent(&problem, &Search { grid, step, window: Some(10) }, &mut beta, &mut delta, &mut tau)?;
        }
        let ll = problem.total_ll(&beta, &delta, &tau);
        if best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, beta, delta, tau, sweeps));
        }
    }
    let (ll, beta, mut delta, mut tau, sweeps) = best.expect("at least one start");

    // thresholds sum to zero, difficulties average zero; both shifts leave the likelihood unchanged
    let mut beta = beta;
    if m >= 2 {
        let shift = tau.iter().sum::<f64>() / m as f64;
        tau.iter_mut().for_each(|t| *t -= shift);
        delta.iter_mut().for_each(|d| *d += shift);
    }
    let mean = delta.iter().sum::<f64>() / delta.len() as f64;
    delta.iter_mut().for_each(|d| *d -= mean);
    beta.iter_mut().for_each(|b| *b -= mean);

    let mut difficulties = vec![f64::NAN; ni];
    for (&i, d) in problem.items.iter().zip(&delta) {
        difficulties[i] = *d;
    }
    let mut measures = vec![f64::NAN; np];
    for (&n, b) in problem.persons.iter().zip(&beta) {
        measures[n] = *b;
    }
    Ok(OracleEstimate { difficulties, measures, thresholds: tau, log_likelihood: ll, sweeps })
}

/// How simulated person measures are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum PersonDistribution {
    Fixed(Vec<f64>),
    Uniform { count: usize, low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub item_difficulties: Vec<f64>,
    pub persons: PersonDistribution,
    pub thresholds: ThresholdVector,
    pub seed: u64,
    /// Item ids for the generated matrix; `i1..` when absent.
    pub item_ids: Option<Vec<String>>,
}

/// Draws every cell independently from the rating-scale model.
/// Identical specs give identical matrices.
pub fn simulate(spec: &SimulationSpec) -> CodedMatrix {
    simulate_with_measures(spec).0
}

/// [`simulate`], also returning the person measures that were used.
pub fn simulate_with_measures(spec: &SimulationSpec) -> (CodedMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let measures: Vec<f64> = match &spec.persons {
        PersonDistribution::Fixed(v) => v.clone(),
        PersonDistribution::Uniform { count, low, high } => (0..*count).map(|_| rng.gen_range(*low..=*high)).collect(),
    };
    let m = spec.thresholds.max_category();
    let tau = spec.thresholds.as_slice();
    let mut probs = vec![0.0; m + 1];
    let mut cells = Vec::with_capacity(measures.len() * spec.item_difficulties.len());
    for beta in &measures {
        for delta in &spec.item_difficulties {
            fill_probabilities(beta - delta, tau, &mut probs);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut category = m;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    category = k;
                    break;
                }
            }
            cells.push(Some(category as u8));
        }
    }
    let width = measures.len().to_string().len();
    let person_ids = (1..=measures.len()).map(|n| format!("sim-{n:0width$}")).collect();
    let item_ids = spec
        .item_ids
        .clone()
        .unwrap_or_else(|| (1..=spec.item_difficulties.len()).map(|i| format!("i{i}")).collect());
    let matrix = CodedMatrix::new(person_ids, item_ids, cells, m as u8).expect("simulated cells are in range");
    (matrix, measures)
}
