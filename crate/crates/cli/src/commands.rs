//! Implementations of the CLI subcommands. Every command writes its
//! artifacts into the resolved output directory and prints a short
//! deterministic summary line; nothing here embeds timestamps.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tnq_core::circuit::{circuit_as_network, evaluate as circuit_state, CircuitSpec};
use tnq_core::data::{
    features_from_set, preprocess, read_dataset, save_checkpoint, split, synth_generate,
    write_dataset, LabeledImageSet,
};
use tnq_core::diag::{
    effective_dimension, fisher_theta_samples, mean_fisher_sampled, normalize_fisher, roc_auc,
    fpr_ratio, BornModel, FisherReport, RocCurve,
};
use tnq_core::train::{evaluate as eval_model, train as train_model, FeatureSet, Model, ModelArch};
use tnq_core::{Error, Result};

use crate::config::RunConfig;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize report: {e}")))?;
    write_text(path, &(text + "\n"))
}

pub fn cmd_synth(
    config: &RunConfig,
    out_dir: &Path,
    n: usize,
    height: usize,
    width: usize,
    file: Option<PathBuf>,
) -> Result<()> {
    let set = synth_generate(n, config.seed, height, width)?;
    let path = file.unwrap_or_else(|| out_dir.join("synthetic.tnqc"));
    ensure_parent(&path)?;
    write_dataset(&path, &set)?;
    println!(
        "synth: wrote {} events ({}x{}, seed {}) to {}",
        set.n_events(),
        height,
        width,
        config.seed,
        path.display()
    );
    Ok(())
}

pub fn cmd_preprocess(
    config: &RunConfig,
    out_dir: &Path,
    input: PathBuf,
    file: Option<PathBuf>,
) -> Result<()> {
    let raw = read_dataset(&input)?;
    let processed = preprocess(&raw, config.data.crop, config.data.pool, config.data.n_fit)?;
    let path = file.unwrap_or_else(|| out_dir.join("preprocessed.tnqc"));
    ensure_parent(&path)?;
    write_dataset(&path, &processed)?;
    println!(
        "preprocess: {}x{} -> {}x{} (crop {}, pool {}), {} events to {}",
        raw.height(),
        raw.width(),
        processed.height(),
        processed.width(),
        config.data.crop,
        config.data.pool,
        processed.n_events(),
        path.display()
    );
    Ok(())
}

fn load_features(config: &RunConfig, path: &Path) -> Result<LabeledImageSet> {
    let raw = read_dataset(path)?;
    if config.data.preprocess {
        preprocess(&raw, config.data.crop, config.data.pool, config.data.n_fit)
    } else {
        Ok(raw)
    }
}

fn dataset_path(config: &RunConfig, flag: Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| config.data.dataset.clone()).ok_or_else(|| {
        Error::InvalidArgument(
            "data.dataset: no dataset given (set it in the config or pass --data)".into(),
        )
    })
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct TrainSummary {
    arch: ModelArch,
    n_classical_params: usize,
    n_quantum_params: usize,
    epochs_run: usize,
    stopped_early: bool,
    best_epoch: usize,
    best_val_loss: f64,
    best_val_auc: f64,
    test_loss: Option<f64>,
    test_auc: Option<f64>,
    shots: Option<u64>,
}

pub fn cmd_train(config: &RunConfig, out_dir: &Path, data: Option<PathBuf>) -> Result<()> {
    let path = dataset_path(config, data)?;
    let set = load_features(config, &path)?;
    let (ftrain, fval, ftest) = split(
        &set,
        (
            config.data.split[0],
            config.data.split[1],
            config.data.split[2],
        ),
        config.seed,
    )?;
    let train_set = features_from_set(&ftrain, config.data.selection)?;
    let val_set = features_from_set(&fval, config.data.selection)?;
    let mut model = Model::build(config.model.arch, &config.model.options())?;
    model.init_params(config.seed);
    let log = train_model(&mut model, &train_set, &val_set, &config.train)?;
    fs::create_dir_all(out_dir)?;
    save_checkpoint(out_dir.join("checkpoint.toml"), &model, Some(&config.train))?;
    write_text(&out_dir.join("train-log.csv"), &log.to_csv())?;
    let test_report = if ftest.is_empty() {
        None
    } else {
        let test_set = features_from_set(&ftest, config.data.selection)?;
        Some(eval_model(&model, &test_set, config.train.shots, config.seed)?)
    };
    let best_val_auc = log
        .records
        .iter()
        .map(|r| r.val_auc)
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = TrainSummary {
        arch: model.arch(),
        n_classical_params: model.n_classical_params(),
        n_quantum_params: model.n_quantum_params(),
        epochs_run: log.records.len(),
        stopped_early: log.stopped_early,
        best_epoch: log.best_epoch,
        best_val_loss: log.best_val_loss,
        best_val_auc,
        test_loss: test_report.as_ref().map(|r| r.loss),
        test_auc: test_report.as_ref().map(|r| r.auc),
        shots: config.train.shots,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!(
        "train: {:?} best val loss {:.6} (epoch {}), best val auc {:.4}, {} epochs -> {}",
        summary.arch,
        summary.best_val_loss,
        summary.best_epoch,
        summary.best_val_auc,
        summary.epochs_run,
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_eval(
    config: &RunConfig,
    out_dir: &Path,
    checkpoint: PathBuf,
    data: Option<PathBuf>,
    shots: Option<u64>,
) -> Result<()> {
    let (model, _) = tnq_core::data::load_checkpoint(&checkpoint)?;
    let path = dataset_path(config, data)?;
    let set = load_features(config, &path)?;
    let features = features_from_set(&set, config.data.selection)?;
    let shots = shots.or(config.train.shots);
    let report = eval_model(&model, &features, shots, config.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "kebab-case")]
    struct EvalSummary {
        loss: f64,
        auc: f64,
        n_events: usize,
        shots: Option<u64>,
        seed: u64,
    }
    write_json(
        &out_dir.join("eval.json"),
        &EvalSummary {
            loss: report.loss,
            auc: report.auc,
            n_events: report.n_events,
            shots,
            seed: config.seed,
        },
    )?;
    match shots {
        Some(s) => println!(
            "eval: loss {:.6}, auc {:.4} on {} events ({} shots, seed {})",
            report.loss, report.auc, report.n_events, s, config.seed
        ),
        None => println!(
            "eval: loss {:.6}, auc {:.4} on {} events (exact)",
            report.loss, report.auc, report.n_events
        ),
    }
    Ok(())
}

fn model_from(config: &RunConfig, checkpoint: Option<&Path>) -> Result<Model> {
    match checkpoint {
        Some(path) => Ok(tnq_core::data::load_checkpoint(path)?.0),
        None => {
            let mut model = Model::build(config.model.arch, &config.model.options())?;
            model.init_params(config.seed);
            Ok(model)
        }
    }
}

fn fisher_csv(report: &FisherReport) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, ev) in report.eigenvalues.iter().enumerate() {
        out.push_str(&format!("{i},{ev}\n"));
    }
    out
}

pub fn cmd_fisher(
    config: &RunConfig,
    out_dir: &Path,
    checkpoint: Option<PathBuf>,
    draws: usize,
) -> Result<()> {
    let model = model_from(config, checkpoint.as_deref())?;
    let report = mean_fisher_sampled(&model, draws, config.seed)?;
    #[derive(Serialize)]
    #[serde(rename_all = "kebab-case")]
    struct FisherSummary {
        arch: ModelArch,
        d: usize,
        n_draws: usize,
        seed: u64,
        trace: f64,
        min_eigenvalue: f64,
        max_eigenvalue: f64,
        clamped: usize,
        eigenvalues: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    }
    let matrix = (0..report.d)
        .map(|r| (0..report.d).map(|c| report.matrix[(r, c)]).collect())
        .collect();
    let summary = FisherSummary {
        arch: model.arch(),
        d: report.d,
        n_draws: report.n_draws,
        seed: report.seed,
        trace: report.matrix.trace(),
        min_eigenvalue: report.eigenvalues[0],
        max_eigenvalue: report.eigenvalues[report.d - 1],
        clamped: report.clamped,
        eigenvalues: report.eigenvalues.clone(),
        matrix,
    };
    write_json(&out_dir.join("fisher.json"), &summary)?;
    write_text(&out_dir.join("fisher-eigenvalues.csv"), &fisher_csv(&report))?;
    println!(
        "fisher: {:?} d={} draws={} trace {:.6} eigenvalues in [{:.3e}, {:.3e}]",
        summary.arch, summary.d, draws, summary.trace, summary.min_eigenvalue, summary.max_eigenvalue
    );
    Ok(())
}

/// Closed-form normalized effective dimension when the Fisher matrix
/// is exactly the identity.
fn identity_effdim(n: f64) -> f64 {
    let kappa = n / (std::f64::consts::TAU * n.ln());
    (1.0 + kappa).ln() / kappa.ln()
}

pub fn cmd_effdim(
    config: &RunConfig,
    out_dir: &Path,
    checkpoint: Option<PathBuf>,
    n_max: f64,
    param_draws: usize,
    input_draws: usize,
) -> Result<()> {
    if !(n_max >= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "--n must be at least 100 so that kappa > 1, got {n_max}"
        )));
    }
    let model = model_from(config, checkpoint.as_deref())?;
    let samples = fisher_theta_samples(&model, param_draws, input_draws, config.seed)?;
    let normalized = normalize_fisher(&samples)?;
    let d = BornModel::n_params(&model);
    // Decade table from 1e3 (or below n_max) up to n_max.
    let mut table: Vec<f64> = Vec::new();
    let mut n = f64::min(1e3, n_max);
    while n < n_max {
        table.push(n);
        n *= 10.0;
    }
    table.push(n_max);
    table.dedup();
    let mut csv = String::from("n,effective-dimension,identity-reference\n");
    let mut rows = Vec::new();
    for &n in &table {
        let d_eff = effective_dimension(&normalized, n, d)?;
        let reference = identity_effdim(n);
        csv.push_str(&format!("{n},{d_eff},{reference}\n"));
        rows.push((n, d_eff, reference));
    }
    // Identity-Fisher self-test: the estimator must reproduce the
    // closed form on identity samples.
    let identity = vec![nalgebra_identity(d); normalized.len().max(1)];
    let check_n = *table.last().expect("table is never empty");
    let got = effective_dimension(&identity, check_n, d)?;
    let expected = identity_effdim(check_n);
    let self_test_pass = (got - expected).abs() <= 1e-12;
    #[derive(Serialize)]
    #[serde(rename_all = "kebab-case")]
    struct EffdimSummary {
        arch: ModelArch,
        d: usize,
        param_draws: usize,
        input_draws: usize,
        seed: u64,
        rows: Vec<(f64, f64, f64)>,
        self_test_expected: f64,
        self_test_got: f64,
        self_test_pass: bool,
    }
    write_json(
        &out_dir.join("effdim.json"),
        &EffdimSummary {
            arch: model.arch(),
            d,
            param_draws,
            input_draws,
            seed: config.seed,
            rows: rows.clone(),
            self_test_expected: expected,
            self_test_got: got,
            self_test_pass,
        },
    )?;
    write_text(&out_dir.join("effdim.csv"), &csv)?;
    if !self_test_pass {
        return Err(Error::Numerical(format!(
            "identity-Fisher self-test failed: {got} vs closed form {expected}"
        )));
    }
    let last = rows.last().expect("at least one row");
    println!(
        "effdim: {:?} d={} at n={:.0e}: {:.6} (identity reference {:.6}, self-test ok)",
        model.arch(),
        d,
        last.0,
        last.1,
        last.2
    );
    Ok(())
}

fn nalgebra_identity(d: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::identity(d, d)
}

fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (f, t) in curve.fpr.iter().zip(&curve.tpr) {
        out.push_str(&format!("{f},{t}\n"));
    }
    out
}

fn scores_for(model: &Model, features: &FeatureSet) -> Result<(Vec<f64>, Vec<usize>)> {
    let probs = model.batch_probabilities(&features.features)?;
    Ok((
        probs.iter().map(|p| p[1]).collect(),
        features.labels.clone(),
    ))
}

pub fn cmd_roc(
    config: &RunConfig,
    out_dir: &Path,
    checkpoint: PathBuf,
    baseline: Option<PathBuf>,
    data: Option<PathBuf>,
) -> Result<()> {
    let (model, _) = tnq_core::data::load_checkpoint(&checkpoint)?;
    let path = dataset_path(config, data)?;
    let set = load_features(config, &path)?;
    let features = features_from_set(&set, config.data.selection)?;
    let (scores, labels) = scores_for(&model, &features)?;
    let curve = roc_auc(&scores, &labels)?;
    write_text(&out_dir.join("roc.csv"), &roc_csv(&curve))?;
    let mut message = format!("roc: {:?} auc {:.4}", model.arch(), curve.auc);
    if let Some(base_path) = baseline {
        let (base, _) = tnq_core::data::load_checkpoint(&base_path)?;
        let (base_scores, base_labels) = scores_for(&base, &features)?;
        let base_curve = roc_auc(&base_scores, &base_labels)?;
        write_text(&out_dir.join("roc-baseline.csv"), &roc_csv(&base_curve))?;
        let grid: Vec<f64> = (50..100).map(|k| k as f64 / 100.0).collect();
        let ratio = fpr_ratio(&base_curve, &curve, &grid)?;
        let mut csv = String::from("signal-efficiency,background-rejection-ratio,flagged\n");
        for point in &ratio {
            match point.ratio {
                Some(r) => csv.push_str(&format!("{},{r},\n", point.signal_efficiency)),
                None => csv.push_str(&format!("{},,zero-denominator\n", point.signal_efficiency)),
            }
        }
        write_text(&out_dir.join("rejection-ratio.csv"), &csv)?;
        message.push_str(&format!(", baseline {:?} auc {:.4}", base.arch(), base_curve.auc));
    }
    println!("{message} -> {}", out_dir.display());
    Ok(())
}

pub fn cmd_xcheck(
    config: &RunConfig,
    out_dir: &Path,
    arch: ModelArch,
    qubits: usize,
    trials: usize,
) -> Result<()> {
    use tnq_core::circuit::{build_qmera_with, build_qmps, build_qttn};
    let circuit: CircuitSpec = match arch {
        ModelArch::Qmps => build_qmps(qubits)?,
        ModelArch::Qttn => build_qttn(qubits)?,
        ModelArch::Qmera => build_qmera_with(qubits, config.model.mera_layout)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "xcheck compares circuits; {other:?} is not a circuit architecture"
            )))
        }
    };
    let circuit = if config.model.gate_set == tnq_core::circuit::GateSet::Full {
        circuit.with_gate_set(tnq_core::circuit::GateSet::Full)
    } else {
        circuit
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst = 0.0f64;
    for _ in 0..trials.max(1) {
        let angles: Vec<f64> = (0..circuit.n_qubits())
            .map(|_| rng.random_range(0.0..std::f64::consts::PI))
            .collect();
        let theta: Vec<f64> = (0..circuit.n_params())
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let state = circuit_state(&circuit, &angles, &theta)?;
        let network = circuit_as_network(&circuit, &angles, &theta)?;
        let deviation = state
            .amplitudes()
            .iter()
            .zip(&network)
            .map(|(a, b): (&Complex64, &Complex64)| (a - b).norm())
            .fold(0.0f64, f64::max);
        worst = worst.max(deviation);
    }
    #[derive(Serialize)]
    #[serde(rename_all = "kebab-case")]
    struct XcheckSummary {
        arch: ModelArch,
        qubits: usize,
        trials: usize,
        seed: u64,
        max_deviation: f64,
        tolerance: f64,
        pass: bool,
    }
    let tolerance = 1e-10;
    let pass = worst < tolerance;
    write_json(
        &out_dir.join("xcheck.json"),
        &XcheckSummary {
            arch,
            qubits,
            trials: trials.max(1),
            seed: config.seed,
            max_deviation: worst,
            tolerance,
            pass,
        },
    )?;
    println!(
        "xcheck: {arch:?} {qubits} qubits, {} trials, max amplitude deviation {worst:.3e} ({})",
        trials.max(1),
        if pass { "ok" } else { "FAIL" }
    );
    if pass {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "amplitude deviation {worst:.3e} exceeds {tolerance:.0e}"
        )))
    }
}
