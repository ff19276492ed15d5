//! Subcommand implementations.

use std::path::{Path, PathBuf};

use wtasnn::data::{shuffle, synth_polarity_task, DatasetManifest, Encoding, Pipeline, SynthSpec};
use wtasnn::learning::{classify, train_example, Example, Learner};
use wtasnn::network::{Network, NetworkState, Role, Topology};

use crate::checkpoint::Checkpoint;
use crate::config::{ConfigError, ExperimentConfig};
use crate::metrics::{MetricsRow, MetricsWriter, Window};

/// Relative manifest paths in a configuration resolve against this
/// directory when set, and against the configuration file's directory
/// otherwise.
pub const DATA_ROOT_ENV: &str = "WTASNN_DATA_ROOT";

/// Offset between a trial's training seed and the seed of its evaluation
/// sampling streams.
const EVAL_SEED_OFFSET: u64 = 0x5eed_0000_0000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("gradient check failed")]
    GradcheckFailed,
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::GradcheckFailed | CliError::Other(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

/// Resolves a manifest path from a configuration file.
pub fn resolve_data_path(path: &Path, config_path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => config_path.parent().unwrap_or(Path::new(".")).join(path),
    }
}

/// Labelled examples of one manifest, encoded as the configuration asks.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub pipeline: Pipeline,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn load(manifest_path: &Path, config: &ExperimentConfig) -> Result<Self, CliError> {
        let manifest = DatasetManifest::load(manifest_path).map_err(data_err)?;
        let pipeline = Pipeline {
            period_us: manifest.period_us,
            steps: manifest.steps(),
            width: manifest.width,
            height: manifest.height,
            crop: config.data.crop.map(|[w, h]| (w, h)),
            pool: config.data.pool,
            encoding: config.data.encoding,
        };
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let sequences = manifest.load_sequences(base, &pipeline).map_err(data_err)?;
        let examples = sequences
            .into_iter()
            .map(|s| Example::classification(s.symbols, s.label, manifest.n_classes))
            .collect();
        Ok(Dataset {
            manifest,
            pipeline,
            examples,
        })
    }
}

/// Classifier topology for the configuration and data geometry.
pub fn build_topology(config: &ExperimentConfig, pipeline: &Pipeline, classes: usize) -> Result<Topology, CliError> {
    let units = config.circuit_units();
    Topology::classifier(
        pipeline.circuits(),
        pipeline.encoding.shape().1,
        config.network.hidden,
        units,
        classes,
        units,
        config.network.wiring,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassAccuracy {
    pub label: usize,
    pub correct: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassAccuracy>,
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let total: usize = self.per_class.iter().map(|c| c.total).sum();
        let correct: usize = self.per_class.iter().map(|c| c.correct).sum();
        writeln!(f, "accuracy {:.4} ({correct}/{total})", self.accuracy)?;
        for c in &self.per_class {
            let acc = if c.total == 0 { 0.0 } else { c.correct as f64 / c.total as f64 };
            writeln!(f, "  class {:>3}: {acc:.4} ({}/{})", c.label, c.correct, c.total)?;
        }
        Ok(())
    }
}

/// Free-run classification accuracy over `examples`.
pub fn evaluate(net: &Network, state: &mut NetworkState, examples: &[Example], classes: usize) -> Result<EvalReport, CliError> {
    if examples.is_empty() {
        return Err(CliError::Data("no examples to evaluate".into()));
    }
    let mut per_class: Vec<ClassAccuracy> = (0..classes)
        .map(|label| ClassAccuracy {
            label,
            correct: 0,
            total: 0,
        })
        .collect();
    for ex in examples {
        let label = ex.label.expect("classification examples are labelled");
        let predicted = classify(net, state, ex).map_err(|e| anyhow::anyhow!(e))?;
        per_class[label].total += 1;
        per_class[label].correct += (predicted == label) as usize;
    }
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    Ok(EvalReport {
        accuracy: correct as f64 / examples.len() as f64,
        per_class,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub config_path: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct TrialSummary {
    pub seed: u64,
    pub dir: PathBuf,
    /// Summary row of the last epoch, if any epoch ran.
    pub last: Option<MetricsRow>,
    pub test: Option<EvalReport>,
}

/// Loads and validates the configuration of a training run, applying the
/// seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

/// Runs every trial of a configuration. With one trial its outputs go to
/// `out_dir`; otherwise trial `n` writes to `out_dir/trial_n` with seed
/// `seed + n`.
pub fn train(opts: &TrainOptions) -> Result<Vec<TrialSummary>, CliError> {
    let config = load_config(&opts.config_path, opts.seed)?;
    let train_path = config
        .data
        .train_manifest
        .as_ref()
        .ok_or_else(|| CliError::Config("data.train_manifest is required".into()))?;
    let train_set = Dataset::load(&resolve_data_path(train_path, &opts.config_path), &config)?;
    if train_set.examples.is_empty() {
        return Err(CliError::Data("training manifest lists no examples".into()));
    }
    let test_set = match &config.data.test_manifest {
        Some(p) => {
            let set = Dataset::load(&resolve_data_path(p, &opts.config_path), &config)?;
            if set.pipeline.circuits() != train_set.pipeline.circuits() || set.manifest.n_classes != train_set.manifest.n_classes {
                return Err(CliError::Data("test and training data have different shapes".into()));
            }
            Some(set)
        }
        None => None,
    };
    let mut summaries = Vec::with_capacity(config.trials);
    for n in 0..config.trials {
        let mut trial = config.clone();
        trial.seed = config.seed.wrapping_add(n as u64);
        let dir = if config.trials == 1 {
            opts.out_dir.clone()
        } else {
            opts.out_dir.join(format!("trial_{n}"))
        };
        summaries.push(run_trial(&trial, &train_set, test_set.as_ref(), &dir)?);
    }
    Ok(summaries)
}

fn run_trial(config: &ExperimentConfig, train_set: &Dataset, test_set: Option<&Dataset>, dir: &Path) -> Result<TrialSummary, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), config.resolved().to_toml()).map_err(|e| anyhow::anyhow!(e))?;
    let classes = train_set.manifest.n_classes;
    let topology = build_topology(config, &train_set.pipeline, classes)?;
    let bank = config.filter_bank().map_err(|e| CliError::Config(e.to_string()))?;
    let mut net = Network::new(topology, bank);
    net.randomize(config.network.init_std, config.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let mut state = NetworkState::new(&net, config.seed);
    let mut eval_state = NetworkState::new(&net, config.seed.wrapping_add(EVAL_SEED_OFFSET));
    let mut learner = Learner::new(&net, config.learner_config()).map_err(|e| CliError::Config(e.to_string()))?;
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"))?;
    log::info!(
        "trial seed {}: {} circuits ({} hidden), {} parameters, {} training examples",
        config.seed,
        net.topology().len(),
        net.topology().ids_with_role(Role::Hidden).count(),
        net.num_params(),
        train_set.examples.len()
    );

    let mut seen = 0usize;
    let mut last = None;
    let mut test_report = None;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.examples.len()).collect();
        if config.data.shuffle {
            shuffle(&mut order, epoch_seed(config.seed, epoch));
        }
        let mut window = Window::default();
        let mut epoch_window = Window::default();
        for &idx in &order {
            let ex = &train_set.examples[idx];
            let stats = train_example(&mut net, &mut state, &mut learner, ex).map_err(|e| anyhow::anyhow!(e))?;
            let correct = stats.predicted.is_some() && stats.predicted == ex.label;
            window.add(stats.mean_reward, stats.hidden_rate, correct);
            epoch_window.add(stats.mean_reward, stats.hidden_rate, correct);
            seen += 1;
            let test_now = test_set.is_some() && config.data.test_every.is_some_and(|k| seen.is_multiple_of(k));
            if test_now || seen.is_multiple_of(config.log_every) {
                let acc = if test_now {
                    let report = evaluate(&net, &mut eval_state, &test_set.unwrap().examples, classes)?;
                    Some(report.accuracy)
                } else {
                    None
                };
                let row = window.row(epoch, seen, acc);
                log::info!("{}", row.to_csv());
                metrics.write(&row)?;
                window = Window::default();
            }
        }
        learner.end_epoch();
        let acc = match test_set {
            Some(t) => {
                let report = evaluate(&net, &mut eval_state, &t.examples, classes)?;
                let acc = report.accuracy;
                test_report = Some(report);
                Some(acc)
            }
            None => None,
        };
        let row = epoch_window.row(epoch, seen, acc);
        log::info!("epoch {epoch} done: {}", row.to_csv());
        metrics.write(&row)?;
        last = Some(row);
    }
    metrics.flush()?;
    Checkpoint::new(config, &net, state.rngs(), config.epochs, seen, learner.eta()).save(&dir.join("checkpoint.json"))?;
    Ok(TrialSummary {
        seed: config.seed,
        dir: dir.to_path_buf(),
        last,
        test: test_report,
    })
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(epoch as u64)
}

/// Evaluates a checkpoint on a manifest. Sampling streams are seeded with
/// `seed`, or the checkpoint's configuration seed.
pub fn eval(checkpoint: &Path, manifest: &Path, seed: Option<u64>) -> Result<EvalReport, CliError> {
    let cp = Checkpoint::load(checkpoint)?;
    let net = cp.network()?;
    let data = Dataset::load(manifest, &cp.config)?;
    if data.examples.is_empty() {
        return Err(CliError::Data(format!("{}: manifest lists no examples", manifest.display())));
    }
    let topo = net.topology();
    let inputs: Vec<usize> = topo.ids_with_role(Role::Input).collect();
    let visible = topo.ids_with_role(Role::Visible).count();
    let input_units = data.pipeline.encoding.shape().1;
    if inputs.len() != data.pipeline.circuits() || inputs.iter().any(|&i| topo.units(i) != input_units) || visible != data.manifest.n_classes {
        return Err(CliError::Data(format!(
            "checkpoint expects {} input circuits and {} classes, data has {} and {}",
            inputs.len(),
            visible,
            data.pipeline.circuits(),
            data.manifest.n_classes
        )));
    }
    let mut state = NetworkState::new(&net, seed.unwrap_or(cp.config.seed).wrapping_add(EVAL_SEED_OFFSET));
    evaluate(&net, &mut state, &data.examples, data.manifest.n_classes)
}

/// Materializes a synthetic polarity task in `out_dir`, with one ready-made
/// configuration per encoding (`wta.toml`, `unsigned.toml`, `per_sign.toml`).
pub fn synth(out_dir: &Path, spec: &SynthSpec) -> Result<(PathBuf, PathBuf), CliError> {
    let task = synth_polarity_task(spec).map_err(|e| CliError::Config(e.to_string()))?;
    let (train, test) = task.write(out_dir).map_err(data_err)?;
    for (name, encoding) in [("wta", Encoding::Wta), ("unsigned", Encoding::Unsigned), ("per_sign", Encoding::PerSign)] {
        let mut config = ExperimentConfig::default();
        config.seed = spec.seed;
        config.network.hidden = 8;
        config.data.encoding = encoding;
        config.data.train_manifest = Some("train.toml".into());
        config.data.test_manifest = Some("test.toml".into());
        let path = out_dir.join(format!("{name}.toml"));
        std::fs::write(&path, config.to_toml()).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    }
    Ok((train, test))
}

/// Human-readable checkpoint summary.
pub fn inspect(checkpoint: &Path) -> Result<String, CliError> {
    use std::fmt::Write as _;
    let cp = Checkpoint::load(checkpoint)?;
    let net = cp.network()?;
    let topo = net.topology();
    let count = |role| topo.ids_with_role(role).count();
    let mut s = String::new();
    writeln!(s, "format        {}", cp.format).unwrap();
    writeln!(s, "config hash   {}", cp.config_hash).unwrap();
    writeln!(s, "epochs        {}", cp.epoch).unwrap();
    writeln!(s, "examples      {}", cp.examples_seen).unwrap();
    writeln!(s, "eta           {}", cp.eta).unwrap();
    writeln!(
        s,
        "circuits      {} ({} input, {} hidden, {} read-out)",
        topo.len(),
        count(Role::Input),
        count(Role::Hidden),
        count(Role::Visible)
    )
    .unwrap();
    writeln!(s, "edges         {}", topo.edges().len()).unwrap();
    writeln!(s, "filters       K={} tau={}", net.filters().len(), net.filters().duration()).unwrap();
    for role in [Role::Hidden, Role::Visible] {
        let values: Vec<f64> = topo
            .ids_with_role(role)
            .filter_map(|i| net.params(i))
            .flat_map(|p| p.values().iter().copied())
            .collect();
        if values.is_empty() {
            continue;
        }
        let mean_abs = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        writeln!(s, "{:<13} {} parameters, mean |w| {mean_abs:.4e}, max |w| {max_abs:.4e}", format!("{role:?}").to_lowercase(), values.len()).unwrap();
    }
    Ok(s)
}
