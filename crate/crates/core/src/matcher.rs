//! Permutation search: eigenvector initialization, iterated LAP updates of
//! the linearized objective, and multi-restart selection.

use std::borrow::Cow;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dependence::{LsmiCvSelector, LsmiGrams};
use crate::error::{ensure_same_len, Error, Result};
use crate::kernels::{center, gaussian_gram, median_width_with, nocco_normalize, MedianPairs};
use crate::lap::{solve_lap, ProfitMatrix};
use crate::linalg::permuted_trace;
use crate::model::{DependenceModel, LambdaPlacement};
use crate::par;
use crate::permutation::Permutation;
use crate::sample::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Align the sort orders of the principal eigenvectors of `K̄` and `L̄`.
    #[default]
    Eigen,
    /// Uniformly random, seeded per restart.
    Random,
    Identity,
}

/// How the sign ambiguity of the principal eigenvectors is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignChoice {
    /// Each eigenvector is oriented so its largest-magnitude entry is
    /// positive; the sort orders are then aligned.
    #[default]
    Pos,
    /// As `Pos`, but the y-side order is reversed.
    Neg,
    /// Try both alignments and keep the one with the larger HSIC.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InitStrategy {
    pub kind: InitKind,
    pub sign: SignChoice,
}

/// Optimization settings shared by every measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub max_iterations: usize,
    /// Step size `η ∈ (0, 1]`; `1` replaces the pairing by each LAP solution.
    pub step_size: f64,
    pub n_restarts: usize,
    /// Restart `r` initializes with widths `c_r · (m_x, m_y)` where
    /// `c_r = width_multipliers[r mod len]`.
    pub width_multipliers: Vec<f64>,
    pub rng_seed: u64,
    pub init: InitStrategy,
    pub median_pairs: MedianPairs,
    pub lambda_placement: LambdaPlacement,
}

/// `√1, √2, …, √10`.
pub fn default_width_multipliers() -> Vec<f64> {
    (1..=10).map(|c| (c as f64).sqrt()).collect()
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            step_size: 1.0,
            n_restarts: 10,
            width_multipliers: default_width_multipliers(),
            rng_seed: 0,
            init: InitStrategy::default(),
            median_pairs: MedianPairs::default(),
            lambda_placement: LambdaPlacement::default(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(Error::invalid(format!(
                "step size must lie in (0, 1], got {}",
                self.step_size
            )));
        }
        if self.n_restarts < 1 {
            return Err(Error::invalid("n_restarts must be >= 1"));
        }
        check_multipliers(&self.width_multipliers)
    }
}

fn check_multipliers(c: &[f64]) -> Result<()> {
    if c.is_empty() {
        return Err(Error::invalid("width multiplier grid is empty"));
    }
    if let Some(v) = c.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::invalid(format!("width multipliers must be > 0, got {v}")));
    }
    Ok(())
}

/// Grids for cross-validated LSMI model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    /// Candidate widths are `c · (m_x, m_y)`.
    pub width_multipliers: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            width_multipliers: default_width_multipliers(),
            lambdas: vec![1e-1, 1e-2, 1e-3],
            folds: 2,
        }
    }
}

/// What to maximize: a fixed model, or LSMI re-selected by cross-validation
/// on the current pairing at every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Fixed { model: DependenceModel },
    LsmiCv { grid: CvGrid },
}

impl ModelSpec {
    pub fn fixed(model: DependenceModel) -> Self {
        ModelSpec::Fixed { model }
    }

    pub fn lsmi_cv(grid: CvGrid) -> Self {
        ModelSpec::LsmiCv { grid }
    }
}

/// A dependence objective with its Gram matrices precomputed.
#[derive(Debug, Clone)]
pub enum MatchObjective {
    /// `tr(K̄ Πᵀ L̄ Π)`
    Hsic { kbar: Arc<DMatrix<f64>>, lbar: Arc<DMatrix<f64>> },
    /// `tr(K̃ Πᵀ L̃ Π)`
    Nocco { ktil: Arc<DMatrix<f64>>, ltil: Arc<DMatrix<f64>> },
    /// `αᵀh/2 − 1/2` with `α` refit for every pairing.
    Lsmi {
        grams: Arc<LsmiGrams>,
        lambda: f64,
        placement: LambdaPlacement,
    },
}

impl MatchObjective {
    pub fn new(
        x: &SampleSet,
        y: &SampleSet,
        model: &DependenceModel,
        placement: LambdaPlacement,
    ) -> Result<Self> {
        ensure_same_len(x.len(), y.len())?;
        model.validate()?;
        let (sx, sy) = model.widths();
        let k = gaussian_gram(x, sx)?;
        let l = gaussian_gram(y, sy)?;
        match *model {
            DependenceModel::Hsic { .. } => Ok(MatchObjective::Hsic {
                kbar: Arc::new(center(&k).matrix().clone()),
                lbar: Arc::new(center(&l).matrix().clone()),
            }),
            DependenceModel::Nocco { epsilon, .. } => Ok(MatchObjective::Nocco {
                ktil: Arc::new(nocco_normalize(&center(&k), epsilon)?.matrix().clone()),
                ltil: Arc::new(nocco_normalize(&center(&l), epsilon)?.matrix().clone()),
            }),
            DependenceModel::Lsmi { lambda, .. } => Ok(MatchObjective::Lsmi {
                grams: Arc::new(LsmiGrams::new(&k, &l)?),
                lambda,
                placement,
            }),
            DependenceModel::KsmiScore { .. } => Err(Error::invalid(
                "the log-determinant objective is a reference score and cannot be optimized",
            )),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MatchObjective::Hsic { kbar, .. } => kbar.nrows(),
            MatchObjective::Nocco { ktil, .. } => ktil.nrows(),
            MatchObjective::Lsmi { grams, .. } => grams.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn score(&self, p: &Permutation) -> Result<f64> {
        ensure_same_len(self.len(), p.len())?;
        match self {
            MatchObjective::Hsic { kbar: a, lbar: b } | MatchObjective::Nocco { ktil: a, ltil: b } => {
                Ok(permuted_trace(a, b, p))
            }
            MatchObjective::Lsmi {
                grams,
                lambda,
                placement,
            } => Ok(grams.fit(p, *lambda, *placement)?.score),
        }
    }

    /// Gradient-direction profit `profit[i][a]` of pairing `x_i` with `y_a`
    /// at the current pairing.
    pub fn profit(&self, p: &Permutation) -> Result<ProfitMatrix> {
        ensure_same_len(self.len(), p.len())?;
        let m = match self {
            MatchObjective::Hsic { kbar: a, lbar: b } | MatchObjective::Nocco { ktil: a, ltil: b } => {
                // (B Π A)ᵀ = A · B[p(·), :]
                a.as_ref() * b.select_rows(p.as_slice())
            }
            MatchObjective::Lsmi {
                grams,
                lambda,
                placement,
            } => {
                let fit = grams.fit(p, *lambda, *placement)?;
                grams.profit(p, &fit.alpha)
            }
        };
        ProfitMatrix::new(m)
    }

    /// Profit at a fractional point `d` (`d[a][i]` weights `(x_i, y_a)`);
    /// LSMI weights are fitted on the hard pairing `anchor`.
    fn profit_dense(&self, d: &DMatrix<f64>, anchor: &Permutation) -> Result<ProfitMatrix> {
        let m = match self {
            MatchObjective::Hsic { kbar: a, lbar: b } | MatchObjective::Nocco { ktil: a, ltil: b } => {
                a.as_ref() * d.transpose() * b.as_ref()
            }
            MatchObjective::Lsmi {
                grams,
                lambda,
                placement,
            } => {
                let fit = grams.fit(anchor, *lambda, *placement)?;
                grams.profit_dense(d, &fit.alpha)
            }
        };
        ProfitMatrix::new(m)
    }
}

/// One update with unit step: the exact LAP maximizer of the linearized
/// objective around `p_old`.
pub fn lap_step(objective: &MatchObjective, p_old: &Permutation) -> Result<Permutation> {
    let profit = objective.profit(p_old)?;
    Ok(solve_lap(&profit).0)
}

/// Permutation pairing the `r`-th smallest entry of `f` with the `r`-th
/// smallest entry of `g` (ties by index).
pub fn align_orders(f: &[f64], g: &[f64]) -> Result<Permutation> {
    ensure_same_len(f.len(), g.len())?;
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        idx
    };
    let (fo, go) = (order(f), order(g));
    let mut map = vec![0; f.len()];
    for (&i, &a) in fo.iter().zip(&go) {
        map[i] = a;
    }
    Permutation::new(map)
}

fn principal_eigenvector(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let top = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(top).into_owned();
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("eigenvector has non-finite entries".into()));
    }
    // largest-magnitude entry (first on ties) made positive
    let mut lead = 0;
    for (i, e) in v.iter().enumerate() {
        if e.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        v.neg_mut();
    }
    Ok(v)
}

/// Eigenvector initialization at widths `c · (m_x, m_y)` with the default
/// median over all ordered pairs.
pub fn eigen_init(x: &SampleSet, y: &SampleSet, c: f64, sign: SignChoice) -> Result<Permutation> {
    eigen_init_with(x, y, c, sign, MedianPairs::default())
}

pub fn eigen_init_with(
    x: &SampleSet,
    y: &SampleSet,
    c: f64,
    sign: SignChoice,
    pairs: MedianPairs,
) -> Result<Permutation> {
    ensure_same_len(x.len(), y.len())?;
    x.ensure_matchable()?;
    check_multipliers(&[c])?;
    let mx = median_width_with(x, pairs)?;
    let my = median_width_with(y, pairs)?;
    eigen_init_at(x, y, c * mx, c * my, sign)
}

fn eigen_init_at(x: &SampleSet, y: &SampleSet, sx: f64, sy: f64, sign: SignChoice) -> Result<Permutation> {
    let kbar = center(&gaussian_gram(x, sx)?);
    let lbar = center(&gaussian_gram(y, sy)?);
    let f = principal_eigenvector(kbar.matrix())?;
    let g = principal_eigenvector(lbar.matrix())?;
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    match sign {
        SignChoice::Pos => align_orders(f.as_slice(), g.as_slice()),
        SignChoice::Neg => align_orders(f.as_slice(), &neg_g),
        SignChoice::Both => {
            let pos = align_orders(f.as_slice(), g.as_slice())?;
            let neg = align_orders(f.as_slice(), &neg_g)?;
            let hp = permuted_trace(kbar.matrix(), lbar.matrix(), &pos);
            let hn = permuted_trace(kbar.matrix(), lbar.matrix(), &neg);
            Ok(if hn > hp { neg } else { pos })
        }
    }
}

/// Score after one iteration of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub score: f64,
    /// Model used in this iteration when it is re-selected per iteration.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<DependenceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    /// Width multiplier of the eigenvector initialization, if used.
    pub width_multiplier: Option<f64>,
    pub initial_score: f64,
    pub iterations: Vec<IterationRecord>,
    /// The pairing reached a fixed point before `max_iterations`.
    pub converged: bool,
    pub best_score: f64,
    /// 0 denotes the initial pairing.
    pub best_iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub permutation: Permutation,
    pub score: f64,
    pub best_restart: usize,
    pub best_iteration: usize,
    pub selected_model: DependenceModel,
    pub converged: bool,
    pub restarts: Vec<RestartTrace>,
}

struct RestartOutcome {
    trace: RestartTrace,
    best: Permutation,
    best_model: DependenceModel,
}

enum Driver<'a> {
    Fixed(&'a MatchObjective, DependenceModel),
    Cv(&'a LsmiCvSelector),
}

impl Driver<'_> {
    fn objective_at(&self, p: &Permutation) -> Result<(Cow<'_, MatchObjective>, DependenceModel)> {
        match self {
            Driver::Fixed(obj, model) => Ok((Cow::Borrowed(*obj), *model)),
            Driver::Cv(sel) => {
                let s = sel.select(p)?;
                let obj = MatchObjective::Lsmi {
                    grams: sel.grams(s.width_index),
                    lambda: sel.lambdas()[s.lambda_index],
                    placement: sel.placement(),
                };
                Ok((Cow::Owned(obj), s.model))
            }
        }
    }

    fn reselects(&self) -> bool {
        matches!(self, Driver::Cv(_))
    }
}

fn dense(p: &Permutation) -> DMatrix<f64> {
    let n = p.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(p.get(i), i)] = 1.0;
    }
    d
}

fn run_restart(
    restart: usize,
    width_multiplier: Option<f64>,
    start: Permutation,
    driver: &Driver<'_>,
    cfg: &MatchConfig,
) -> Result<RestartOutcome> {
    let (mut objective, mut model) = driver.objective_at(&start)?;
    let initial_score = objective.score(&start)?;
    let mut best = (initial_score, 0usize, start.clone(), model);
    let mut records = Vec::with_capacity(cfg.max_iterations);
    let mut converged = false;
    let mut current = start;
    let fractional = cfg.step_size < 1.0;
    let mut point = if fractional { Some(dense(&current)) } else { None };
    let mut last_target: Option<Permutation> = None;

    for t in 1..=cfg.max_iterations {
        if t > 1 && driver.reselects() {
            (objective, model) = driver.objective_at(&current)?;
        }
        let next = match point.as_mut() {
            None => lap_step(&objective, &current)?,
            Some(d) => {
                let target = solve_lap(&objective.profit_dense(d, &current)?).0;
                *d *= 1.0 - cfg.step_size;
                for i in 0..target.len() {
                    d[(target.get(i), i)] += cfg.step_size;
                }
                // nearest hard pairing: maximize Σ_i d[π(i)][i]
                let rounded = solve_lap(&ProfitMatrix::new(d.transpose())?).0;
                let settled = last_target.as_ref() == Some(&target) && rounded == target;
                last_target = Some(target);
                if settled {
                    converged = true;
                }
                rounded
            }
        };
        let score = objective.score(&next)?;
        records.push(IterationRecord {
            iteration: t,
            score,
            model: driver.reselects().then_some(model),
        });
        let unchanged = next == current;
        if score > best.0 {
            best = (score, t, next.clone(), model);
        }
        current = next;
        if !fractional && unchanged {
            converged = true;
        }
        if converged {
            break;
        }
    }

    let (best_score, best_iteration, best_perm, best_model) = best;
    Ok(RestartOutcome {
        trace: RestartTrace {
            restart,
            width_multiplier,
            initial_score,
            iterations: records,
            converged,
            best_score,
            best_iteration,
        },
        best: best_perm,
        best_model,
    })
}

/// Runs every restart and returns the best pairing observed.
///
/// Restarts may execute concurrently; the merge prefers the highest score and
/// then the lowest restart index, so the result does not depend on timing.
pub fn run_match(x: &SampleSet, y: &SampleSet, spec: &ModelSpec, cfg: &MatchConfig) -> Result<MatchResult> {
    ensure_same_len(x.len(), y.len())?;
    x.ensure_matchable()?;
    cfg.validate()?;
    let mx = median_width_with(x, cfg.median_pairs)?;
    let my = median_width_with(y, cfg.median_pairs)?;

    let fixed;
    let selector;
    let driver = match spec {
        ModelSpec::Fixed { model } => {
            fixed = MatchObjective::new(x, y, model, cfg.lambda_placement)?;
            Driver::Fixed(&fixed, *model)
        }
        ModelSpec::LsmiCv { grid } => {
            check_multipliers(&grid.width_multipliers)?;
            let widths: Vec<(f64, f64)> = grid.width_multipliers.iter().map(|c| (c * mx, c * my)).collect();
            selector = LsmiCvSelector::new(
                x,
                y,
                &widths,
                &grid.lambdas,
                grid.folds,
                cfg.rng_seed,
                cfg.lambda_placement,
            )?;
            Driver::Cv(&selector)
        }
    };

    let n = x.len();
    let mults = &cfg.width_multipliers;
    let starts: Vec<(Option<f64>, Permutation)> = match cfg.init.kind {
        InitKind::Eigen => {
            // one eigen-initialization per distinct multiplier in use
            let used = mults.len().min(cfg.n_restarts);
            let inits = par::map_range(used, |k| {
                eigen_init_at(x, y, mults[k] * mx, mults[k] * my, cfg.init.sign)
            });
            let inits: Vec<Permutation> = inits.into_iter().collect::<Result<_>>()?;
            (0..cfg.n_restarts)
                .map(|r| (Some(mults[r % mults.len()]), inits[r % used].clone()))
                .collect()
        }
        InitKind::Random => (0..cfg.n_restarts)
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                rng.set_stream(r as u64);
                (None, Permutation::random(n, &mut rng))
            })
            .collect(),
        InitKind::Identity => (0..cfg.n_restarts).map(|_| (None, Permutation::identity(n))).collect(),
    };

    let outcomes = par::map_range(cfg.n_restarts, |r| {
        let (c, start) = &starts[r];
        run_restart(r, *c, start.clone(), &driver, cfg)
    });
    let outcomes: Vec<RestartOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut best = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.trace.best_score > outcomes[best].trace.best_score {
            best = r;
        }
    }
    let winner = &outcomes[best];
    if !winner.trace.best_score.is_finite() {
        return Err(Error::Numerical("dependence score is not finite".into()));
    }
    Ok(MatchResult {
        permutation: winner.best.clone(),
        score: winner.trace.best_score,
        best_restart: best,
        best_iteration: winner.trace.best_iteration,
        selected_model: winner.best_model,
        converged: winner.trace.converged,
        restarts: outcomes.into_iter().map(|o| o.trace).collect(),
    })
}

/// Runs one fixed-model match per arm and keeps the highest final score
/// (first arm on ties). Returns the winning arm index with its result.
pub fn run_match_arms(
    x: &SampleSet,
    y: &SampleSet,
    arms: &[DependenceModel],
    cfg: &MatchConfig,
) -> Result<(usize, MatchResult)> {
    if arms.is_empty() {
        return Err(Error::invalid("no model arms given"));
    }
    let mut best: Option<(usize, MatchResult)> = None;
    for (k, model) in arms.iter().enumerate() {
        let r = run_match(x, y, &ModelSpec::fixed(*model), cfg)?;
        if best.as_ref().is_none_or(|(_, b)| r.score > b.score) {
            best = Some((k, r));
        }
    }
    Ok(best.expect("at least one arm"))
}

/// Median-heuristic widths `c · (m_x, m_y)`.
pub fn scaled_median_widths(x: &SampleSet, y: &SampleSet, c: f64, pairs: MedianPairs) -> Result<(f64, f64)> {
    check_multipliers(&[c])?;
    Ok((c * median_width_with(x, pairs)?, c * median_width_with(y, pairs)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permutation::matched_accuracy;
    use rand::RngExt;

    fn random_set(n: usize, d: usize, rng: &mut ChaCha8Rng) -> SampleSet {
        SampleSet::new((0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(), n, d).unwrap()
    }

    fn hsic_model(x: &SampleSet, y: &SampleSet) -> DependenceModel {
        let (sigma_x, sigma_y) = scaled_median_widths(x, y, 1.0, MedianPairs::AllOrdered).unwrap();
        DependenceModel::Hsic { sigma_x, sigma_y }
    }

    fn all_perms(n: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation::new(prefix.clone()).unwrap());
                return;
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    prefix.push(j);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[j] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    #[test]
    fn align_orders_examples() {
        let f = [0.1, 0.2, 0.3, 0.4];
        assert!(align_orders(&f, &[1.0, 2.0, 3.0, 4.0]).unwrap().is_identity());
        assert_eq!(align_orders(&f, &[4.0, 3.0, 2.0, 1.0]).unwrap().as_slice(), &[3, 2, 1, 0]);
        assert!(align_orders(&f, &[1.0]).is_err());
    }

    #[test]
    fn sorted_alignment_maximizes_rank_one_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let perms = all_perms(6);
        for _ in 0..50 {
            let f: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let value = |p: &Permutation| {
                let s: f64 = (0..6).map(|i| f[i] * g[p.get(i)]).sum();
                s * s
            };
            let brute = perms.iter().map(value).fold(f64::MIN, f64::max);
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let best = value(&align_orders(&f, &g).unwrap()).max(value(&align_orders(&f, &neg_g).unwrap()));
            assert!((best - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_init_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_set(15, 2, &mut rng);
        let y = random_set(15, 1, &mut rng);
        let pos = eigen_init(&x, &y, 1.0, SignChoice::Pos).unwrap();
        let neg = eigen_init(&x, &y, 1.0, SignChoice::Neg).unwrap();
        let both = eigen_init(&x, &y, 1.0, SignChoice::Both).unwrap();
        assert_ne!(pos, neg);
        assert!(both == pos || both == neg);
        assert!(eigen_init(&x, &y, 0.0, SignChoice::Pos).is_err());
    }

    #[test]
    fn lap_step_keeps_global_optimum_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let perms = all_perms(5);
        for _ in 0..10 {
            let x = random_set(5, 2, &mut rng);
            let y = random_set(5, 2, &mut rng);
            let obj = MatchObjective::new(&x, &y, &hsic_model(&x, &y), LambdaPlacement::Inside).unwrap();
            let (best_p, best_v) = perms
                .iter()
                .map(|p| (p.clone(), obj.score(p).unwrap()))
                .fold((Permutation::identity(5), f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
            let next = lap_step(&obj, &best_p).unwrap();
            assert!((obj.score(&next).unwrap() - best_v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_kernel_profit_gives_canonical_assignment() {
        let x = SampleSet::from_scalars(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let obj = MatchObjective::Hsic {
            kbar: Arc::new(center(&gaussian_gram(&x, 1.0).unwrap()).matrix().clone()),
            lbar: Arc::new(DMatrix::identity(4, 4)),
        };
        let a = lap_step(&obj, &Permutation::identity(4)).unwrap();
        let b = lap_step(&obj, &Permutation::new(vec![3, 2, 1, 0]).unwrap()).unwrap();
        let canonical = solve_lap(&ProfitMatrix::new(DMatrix::zeros(4, 4)).unwrap()).0;
        assert_eq!(a, canonical);
        assert_eq!(b, canonical);
    }

    #[test]
    fn hsic_step_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_set(30, 2, &mut rng);
        let y: SampleSet = {
            let v: Vec<f64> = (0..30).map(|i| x.row(i)[0] * x.row(i)[1] + 0.1 * rng.random_range(-1.0..1.0)).collect();
            SampleSet::from_scalars(&v).unwrap()
        };
        let obj = MatchObjective::new(&x, &y, &hsic_model(&x, &y), LambdaPlacement::Inside).unwrap();
        for _ in 0..100 {
            let p = Permutation::random(30, &mut rng);
            let q = lap_step(&obj, &p).unwrap();
            assert!(obj.score(&q).unwrap() >= obj.score(&p).unwrap() - 1e-12);
        }
    }

    #[test]
    fn self_matching_recovers_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_set(20, 2, &mut rng);
        let r = run_match(&x, &x, &ModelSpec::fixed(hsic_model(&x, &x)), &MatchConfig::default()).unwrap();
        assert_eq!(matched_accuracy(&r.permutation, &Permutation::identity(20)).unwrap(), 1.0);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let one = SampleSet::from_scalars(&[1.0]).unwrap();
        let model = DependenceModel::Hsic { sigma_x: 1.0, sigma_y: 1.0 };
        assert!(run_match(&one, &one, &ModelSpec::fixed(model), &MatchConfig::default()).is_err());
        let a = SampleSet::from_scalars(&[1.0, 2.0, 3.0]).unwrap();
        let b = SampleSet::from_scalars(&[1.0, 2.0]).unwrap();
        assert!(run_match(&a, &b, &ModelSpec::fixed(model), &MatchConfig::default()).is_err());
        let flat = SampleSet::from_scalars(&[1.0, 1.0, 1.0]).unwrap();
        assert!(run_match(&flat, &a, &ModelSpec::fixed(model), &MatchConfig::default()).is_err());
        let cfg = MatchConfig { step_size: 0.0, ..MatchConfig::default() };
        assert!(run_match(&a, &a, &ModelSpec::fixed(model), &cfg).is_err());
    }

    #[test]
    fn traces_respect_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_set(25, 1, &mut rng);
        let y = SampleSet::from_scalars(
            &x.as_slice().iter().map(|v| v.sin() + 0.05 * rng.random_range(-1.0..1.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let yshuf = y.permuted(&Permutation::random(25, &mut rng)).unwrap();
        let cfg = MatchConfig::default();
        for spec in [ModelSpec::fixed(hsic_model(&x, &yshuf)), ModelSpec::lsmi_cv(CvGrid::default())] {
            let r = run_match(&x, &yshuf, &spec, &cfg).unwrap();
            assert_eq!(r.restarts.len(), cfg.n_restarts);
            let mut max_seen = f64::MIN;
            for t in &r.restarts {
                assert!(t.iterations.len() <= cfg.max_iterations);
                assert!(r.score >= t.initial_score);
                max_seen = max_seen.max(t.initial_score);
                for it in &t.iterations {
                    max_seen = max_seen.max(it.score);
                }
            }
            assert_eq!(r.score, max_seen);
            assert_eq!(r.restarts[r.best_restart].best_score, r.score);
            let again = run_match(&x, &yshuf, &spec, &cfg).unwrap();
            assert_eq!(again, r);
        }
    }

    #[test]
    fn fractional_steps_terminate_with_valid_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_set(15, 2, &mut rng);
        let y = x.permuted(&Permutation::random(15, &mut rng)).unwrap();
        let cfg = MatchConfig { step_size: 0.5, n_restarts: 3, ..MatchConfig::default() };
        let r = run_match(&x, &y, &ModelSpec::fixed(hsic_model(&x, &y)), &cfg).unwrap();
        assert_eq!(r.permutation.len(), 15);
        assert!(r.restarts.iter().all(|t| t.iterations.len() <= cfg.max_iterations));
    }

    #[test]
    fn random_init_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_set(12, 2, &mut rng);
        let y = random_set(12, 2, &mut rng);
        let cfg = MatchConfig {
            init: InitStrategy { kind: InitKind::Random, sign: SignChoice::Pos },
            n_restarts: 4,
            rng_seed: 77,
            ..MatchConfig::default()
        };
        let spec = ModelSpec::fixed(hsic_model(&x, &y));
        assert_eq!(run_match(&x, &y, &spec, &cfg).unwrap(), run_match(&x, &y, &spec, &cfg).unwrap());
    }
}
