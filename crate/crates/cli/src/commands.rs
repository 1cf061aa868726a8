use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use cdom::dependence::{hsic, ksmi_objective, lsmi_fit_with, nocco_score};
use cdom::io::{
    self, gen_color_clusters, gen_cubic, gen_split_halves, load_match_document, load_permutation, load_pnm,
    load_regressor, load_samples, save_match_document, save_permutation, save_pnm, save_regressor, save_samples,
    write_atomic, ArmSummary, Image, MatchDocument,
};
use cdom::kernels::{center, gaussian_gram, median_width_with, nocco_normalize, MedianPairs};
use cdom::lap::{solve_lap, ProfitMatrix};
use cdom::layout::{mask_frame, montage, random_baseline, rect_frame, summarize as layout_summarize, GridFrame};
use cdom::matcher::{
    default_width_multipliers, run_match as core_run_match, scaled_median_widths, CvGrid, InitStrategy, MatchConfig,
    ModelSpec,
};
use cdom::regression::KernelRegressor;
use cdom::{matched_accuracy, DependenceModel, Permutation, SampleSet};

use crate::args::{
    Dataset, EvalArgs, GenArgs, IngestArgs, LapArgs, MatchArgs, Measure, Method, ModelArgs, OptimizerArgs,
    RegressAction, RegressArgs, ScoreArgs, SummarizeArgs,
};

/// A flag combination clap cannot reject on its own; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($t:tt)*) => {
        return Err(UsageError(format!($($t)*)).into())
    };
}

/// Width multipliers tried as separate arms when no widths are given.
const WIDTH_ARMS: [f64; 2] = [1.0, 3.1622776601683795];
/// NOCCO regularizers tried as separate arms when none is given.
const EPSILON_ARMS: [f64; 2] = [0.01, 0.05];

fn load(path: &Path) -> Result<SampleSet> {
    load_samples(path).with_context(|| format!("reading samples from {}", path.display()))
}

fn match_config(o: &OptimizerArgs, m: Option<&ModelArgs>) -> MatchConfig {
    let mut cfg = MatchConfig {
        max_iterations: o.max_iter,
        step_size: o.eta,
        n_restarts: o.restarts,
        rng_seed: o.seed,
        init: InitStrategy {
            kind: o.init.into(),
            sign: o.sign.into(),
        },
        median_pairs: o.median_pairs.into(),
        ..MatchConfig::default()
    };
    if !o.init_widths.is_empty() {
        cfg.width_multipliers = o.init_widths.clone();
    }
    if let Some(m) = m {
        cfg.lambda_placement = m.lambda_placement.into();
    }
    cfg
}

/// Every model the flags ask for, in arm order: widths outer, ε inner.
fn model_arms(m: &ModelArgs, x: &SampleSet, y: &SampleSet, pairs: MedianPairs) -> Result<Vec<ModelSpec>> {
    if m.method != Method::Lsom && (m.lambda.is_some() || m.cv) {
        usage!("--lambda and --cv apply only to --method lsom");
    }
    if m.method != Method::Nocco && m.epsilon.is_some() {
        usage!("--epsilon applies only to --method nocco");
    }
    if m.method == Method::Lsom && m.lambda.is_none() {
        if m.sigma_x.is_some() {
            usage!("--sigma-x/--sigma-y need --lambda; with CV the widths are selected");
        }
        return Ok(vec![ModelSpec::lsmi_cv(CvGrid {
            width_multipliers: default_width_multipliers(),
            lambdas: m.cv_lambdas.clone(),
            folds: m.folds,
        })]);
    }
    let widths: Vec<(f64, f64)> = match (m.sigma_x, m.sigma_y) {
        (Some(sx), Some(sy)) => vec![(sx, sy)],
        _ => WIDTH_ARMS
            .iter()
            .map(|&c| scaled_median_widths(x, y, c, pairs))
            .collect::<cdom::Result<_>>()?,
    };
    let mut arms = Vec::new();
    for (sigma_x, sigma_y) in widths {
        match m.method {
            Method::Hsic => arms.push(DependenceModel::Hsic { sigma_x, sigma_y }),
            Method::Nocco => {
                let eps: Vec<f64> = m.epsilon.map_or(EPSILON_ARMS.to_vec(), |e| vec![e]);
                arms.extend(eps.into_iter().map(|epsilon| DependenceModel::Nocco {
                    sigma_x,
                    sigma_y,
                    epsilon,
                }));
            }
            Method::Lsom => arms.push(DependenceModel::Lsmi {
                sigma_x,
                sigma_y,
                lambda: m.lambda.expect("checked above"),
            }),
        }
    }
    Ok(arms.into_iter().map(ModelSpec::fixed).collect())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Hsic => "hsic",
        Method::Nocco => "nocco",
        Method::Lsom => "lsom",
    }
}

pub fn run_match(a: MatchArgs) -> Result<()> {
    let x = load(&a.x)?;
    let y = load(&a.y)?;
    let truth = a
        .truth
        .as_deref()
        .map(|p| load_permutation(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let cfg = match_config(&a.optimizer, Some(&a.model));
    let specs = model_arms(&a.model, &x, &y, cfg.median_pairs)?;

    let mut arms = Vec::with_capacity(specs.len());
    let mut best: Option<(usize, cdom::matcher::MatchResult)> = None;
    for (k, spec) in specs.into_iter().enumerate() {
        let r = core_run_match(&x, &y, &spec, &cfg).with_context(|| format!("matching arm {k}"))?;
        arms.push(ArmSummary { spec, score: r.score });
        if best.as_ref().is_none_or(|(_, b)| r.score > b.score) {
            best = Some((k, r));
        }
    }
    let (best_arm, result) = best.expect("at least one arm");
    let permutation = result.permutation.clone();
    let mut doc = MatchDocument::new(method_name(a.model.method), cfg, arms, best_arm, result);
    if let Some(t) = &truth {
        doc.accuracy = Some(matched_accuracy(&permutation, t)?);
    }
    save_match_document(&doc, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.pairing_out {
        save_permutation(&permutation, p)?;
    }
    println!("score: {}", doc.result.score);
    println!("arm: {} of {}", best_arm, doc.arms.len());
    if let Some(acc) = doc.accuracy {
        println!("accuracy: {acc}");
    }
    Ok(())
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let x = load(&a.x)?;
    let y = load(&a.y)?;
    let p = match &a.pairing {
        Some(path) => load_permutation(path)?,
        None => Permutation::identity(x.len()),
    };
    let pairs = MedianPairs::default();
    let sx = a.sigma_x.map_or_else(|| median_width_with(&x, pairs), Ok)?;
    let sy = a.sigma_y.map_or_else(|| median_width_with(&y, pairs), Ok)?;
    let k = gaussian_gram(&x, sx)?;
    let l = gaussian_gram(&y, sy)?;
    let value = match a.measure {
        Measure::Hsic => hsic(&center(&k), &center(&l), &p)?,
        Measure::Nocco => nocco_score(
            &nocco_normalize(&center(&k), a.epsilon)?,
            &nocco_normalize(&center(&l), a.epsilon)?,
            &p,
        )?,
        Measure::Lsmi => lsmi_fit_with(&k, &l, &p, a.lambda, a.lambda_placement.into())?.score,
        Measure::Ksmi => ksmi_objective(&k, &l, &p)?,
    };
    println!("{value}");
    Ok(())
}

pub fn lap(a: LapArgs) -> Result<()> {
    let mut m = io::load_matrix(&a.profit)?;
    if a.minimize {
        m.neg_mut();
    }
    let profit = ProfitMatrix::new(m)?;
    let (p, value) = solve_lap(&profit);
    let value = if a.minimize { -value } else { value };
    let cols: Vec<String> = p.as_slice().iter().map(usize::to_string).collect();
    println!("assignment: {}", cols.join(" "));
    println!("value: {value}");
    if let Some(out) = &a.out {
        save_permutation(&p, out)?;
    }
    Ok(())
}

pub fn gen(a: GenArgs) -> Result<()> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;
    match a.dataset {
        Dataset::Cubic | Dataset::Split => {
            let g = if a.dataset == Dataset::Cubic {
                gen_cubic(a.n, a.seed)?
            } else {
                gen_split_halves(a.n, a.dim, a.noise, a.seed, a.mode.into())?
            };
            save_samples(&g.x, dir.join("x.csv"))?;
            save_samples(&g.y, dir.join("y.csv"))?;
            save_permutation(&g.truth, dir.join("truth.txt"))?;
        }
        Dataset::Colors => {
            let c = gen_color_clusters(a.n, a.clusters, a.spread, a.seed)?;
            save_samples(&c.features, dir.join("features.csv"))?;
            let labels: String = c.labels.iter().map(|l| format!("{l}\n")).collect();
            write_atomic(&dir.join("labels.txt"), labels.as_bytes())?;
        }
    }
    Ok(())
}

pub fn regress(a: RegressArgs) -> Result<()> {
    match a.action {
        RegressAction::Fit(f) => {
            let x = load(&f.x)?;
            let mut y = load(&f.y)?;
            if let Some(p) = &f.pairing {
                y = y.permuted(&load_permutation(p)?)?;
            }
            let taus = if f.tau.is_empty() {
                vec![median_width_with(&x, MedianPairs::default())?]
            } else {
                f.tau.clone()
            };
            let model = if taus.len() * f.delta.len() == 1 {
                KernelRegressor::fit(&x, &y, taus[0], f.delta[0])?
            } else {
                let cv = KernelRegressor::fit_cv(&x, &y, &taus, &f.delta, f.folds, f.seed)?;
                println!("cv error: {}", cv.errors[cv.tau_index * f.delta.len() + cv.delta_index]);
                cv.model
            };
            save_regressor(&model, &f.out)?;
            println!("tau: {}", model.tau());
            println!("delta: {}", model.delta());
            println!("objective: {}", model.objective(&y)?);
        }
        RegressAction::Predict(p) => {
            let model = load_regressor(&p.model)?;
            let x = load(&p.x)?;
            save_samples(&model.predict(&x)?, &p.out)?;
        }
    }
    Ok(())
}

fn frame_from(a: &SummarizeArgs) -> Result<GridFrame> {
    match (a.rows, a.cols, &a.mask) {
        (Some(r), Some(c), None) => Ok(rect_frame(r, c)?),
        (None, None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(mask_frame(&text)?)
        }
        _ => usage!("give either --rows and --cols, or --mask"),
    }
}

pub fn summarize(a: SummarizeArgs) -> Result<()> {
    let features = load(&a.features)?;
    let frame = frame_from(&a)?;
    let coords = frame.coordinates();
    let cfg = match_config(&a.optimizer, None);
    let spec = if features.len() < 2 {
        ModelSpec::fixed(DependenceModel::Hsic {
            sigma_x: 1.0,
            sigma_y: 1.0,
        })
    } else {
        let (sigma_x, sigma_y) = scaled_median_widths(&features, &coords, 1.0, cfg.median_pairs)?;
        match a.method {
            Method::Hsic => ModelSpec::fixed(DependenceModel::Hsic { sigma_x, sigma_y }),
            Method::Nocco => ModelSpec::fixed(DependenceModel::Nocco {
                sigma_x,
                sigma_y,
                epsilon: 0.05,
            }),
            Method::Lsom => ModelSpec::lsmi_cv(CvGrid::default()),
        }
    };
    let layout = layout_summarize(&features, &frame, &spec, &cfg)?;
    let mut csv = String::from("cell_row,cell_col,feature_index\n");
    for (&(r, c), &f) in frame.cells().iter().zip(&layout.cell_to_feature) {
        csv.push_str(&format!("{r},{c},{f}\n"));
    }
    write_atomic(&a.out, csv.as_bytes())?;
    println!("locality: {}", layout.locality);
    if a.baseline_trials > 0 {
        let base = random_baseline(&features, &frame, a.baseline_trials, a.optimizer.seed)?;
        println!("random baseline mean: {}", base.iter().sum::<f64>() / base.len() as f64);
    }
    if let Some(out) = &a.montage {
        let images: Vec<Image> = a
            .images
            .iter()
            .map(|p| load_pnm(p).with_context(|| format!("reading {}", p.display())))
            .collect::<Result<_>>()?;
        save_pnm(&montage(&images, &frame, &layout.cell_to_feature)?, out)?;
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let truth = load_permutation(&a.truth)?;
    let p = if a.result.extension().is_some_and(|e| e == "json") {
        load_match_document(&a.result)?.result.permutation
    } else {
        load_permutation(&a.result)?
    };
    let acc = matched_accuracy(&p, &truth)?;
    let correct = (acc * p.len() as f64).round() as usize;
    println!("accuracy: {acc}");
    println!("correct: {correct} of {}", p.len());
    Ok(())
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let mut rows = Vec::with_capacity(a.images.len());
    for path in &a.images {
        let img = load_pnm(path).with_context(|| format!("reading {}", path.display()))?;
        rows.push(if a.lab { img.to_lab() } else { img.data });
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        bail!("images differ in size or channel count");
    }
    save_samples(&SampleSet::from_rows(&rows)?, &a.out)?;
    println!("{} images, {} features each", rows.len(), rows[0].len());
    Ok(())
}
