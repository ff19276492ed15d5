//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any mandatory criterion fails.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wtasnn::data::{synth_polarity_task, Encoding, SynthSpec};
use wtasnn::filters::{make_raised_cosine_bank, make_somatic_filter, FilterBank};
use wtasnn::learning::{train_step, Learner, LearnerConfig};
use wtasnn::mathcore::{wta_softmax, SpikeSymbol};
use wtasnn::network::{CircuitSpec, Network, NetworkState, Role, Topology};
use wtasnn_cli::commands::{synth, train, TrainOptions};
use wtasnn_cli::config::ExperimentConfig;
use wtasnn_cli::gradcheck::{chain_case, enumeration_suite, fd_suite, library_gradient, mc_suite, GradcheckOptions};
use wtasnn_cli::metrics::{read_metrics, MetricsRow};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_oracle() -> Outcome {
    let opts = GradcheckOptions::default();
    let start = Instant::now();
    let fd = fd_suite(&opts, &library_gradient).map_err(|e| e.to_string())?;
    let elbo = enumeration_suite(&opts).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        fd.passed() && elbo.passed() && opts.fd_networks >= 20 && secs < 10.0,
        format!(
            "{} networks, {} components, max rel err {:.2e}; enumeration max rel err {:.2e}; {secs:.1}s",
            opts.fd_networks, fd.components, fd.max_error, elbo.max_error
        ),
    )
}

fn estimator_unbiasedness() -> Outcome {
    let start = Instant::now();
    let (tiny, x) = chain_case(2, 0);
    let spec_net = mc_suite("T=2", &tiny, &x, 100_000, 0, 3.0).map_err(|e| e.to_string())?;
    let (tiny, x) = chain_case(6, 0);
    let chain = mc_suite("T=6", &tiny, &x, 100_000, 0, 3.0).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        spec_net.passed() && chain.passed() && secs < 120.0,
        format!(
            "T=2 max z {:.2} over {} components; T=6 max z {:.2} over {} components; {secs:.1}s",
            spec_net.max_error, spec_net.components, chain.max_error, chain.components
        ),
    )
}

/// Scalar binary network with sigmoid spiking, written against plain
/// arrays: each neuron has a bias, a feedback weight and one weight per
/// (pre-synaptic neuron, filter).
struct ScalarNet {
    synaptic_taps: Vec<Vec<f64>>,
    somatic_taps: Vec<f64>,
    /// `pre[i]` for every neuron; empty for inputs.
    pre: Vec<Vec<usize>>,
    role: Vec<Role>,
    bias: Vec<f64>,
    feedback: Vec<f64>,
    /// `w[i][p][k]`.
    w: Vec<Vec<Vec<f64>>>,
}

struct ScalarLearning {
    eta: f64,
    gamma: f64,
    kappa: f64,
    kappa_b: f64,
    alpha: f64,
    r: f64,
    use_baseline: bool,
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// `s log σ(u) + (1 − s) log(1 − σ(u))`.
fn binary_log_prob(s: f64, u: f64) -> f64 {
    if s > 0.5 {
        -(-u).exp().ln_1p()
    } else {
        -u.exp().ln_1p()
    }
}

impl ScalarNet {
    fn from_network(net: &Network) -> Self {
        let topo = net.topology();
        let k = net.filters().len();
        let mut s = ScalarNet {
            synaptic_taps: net.filters().synaptic().iter().map(|t| t.as_slice().to_vec()).collect(),
            somatic_taps: net.filters().somatic().as_slice().to_vec(),
            pre: Vec::new(),
            role: Vec::new(),
            bias: Vec::new(),
            feedback: Vec::new(),
            w: Vec::new(),
        };
        for i in 0..topo.len() {
            s.role.push(topo.role(i));
            s.pre.push(topo.presynaptic(i).to_vec());
            match net.params(i) {
                Some(p) => {
                    let v = p.values();
                    s.bias.push(v[0]);
                    s.feedback.push(v[1]);
                    s.w.push(v[2..].chunks(k).map(<[f64]>::to_vec).collect());
                }
                None => {
                    s.bias.push(0.0);
                    s.feedback.push(0.0);
                    s.w.push(Vec::new());
                }
            }
        }
        s
    }

    fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.role.len() {
            if self.role[i] != Role::Input {
                out.push(self.bias[i]);
                out.push(self.feedback[i]);
                out.extend(self.w[i].iter().flatten());
            }
        }
        out
    }

    /// A spike emitted at step `t'` enters the filters at lag 1 of the trace
    /// read at step `t' + 1`, i.e. it reaches potentials from step `t' + 2`.
    fn trace(taps: &[f64], history: &[f64], t: usize) -> f64 {
        (0..taps.len()).filter(|d| t >= d + 2).map(|d| taps[d] * history[t - 2 - d]).sum()
    }
}

/// Runs both implementations side by side for `steps` steps and returns the
/// largest componentwise parameter difference seen after any step.
fn binary_reduction_run(seed: u64, steps: usize, lc: ScalarLearning) -> f64 {
    let circuits = vec![
        CircuitSpec { units: 1, role: Role::Input },
        CircuitSpec { units: 1, role: Role::Input },
        CircuitSpec { units: 1, role: Role::Hidden },
        CircuitSpec { units: 1, role: Role::Hidden },
        CircuitSpec { units: 1, role: Role::Visible },
    ];
    let edges = vec![(0, 2), (1, 2), (3, 2), (0, 3), (1, 3), (2, 3), (0, 4), (2, 4), (3, 4)];
    let topo = Topology::new(circuits, edges).unwrap();
    let bank = FilterBank::new(make_raised_cosine_bank(2, 4).unwrap(), make_somatic_filter(2.0, 4).unwrap()).unwrap();
    let mut net = Network::new(topo, bank);
    net.randomize(0.8, seed).unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let mut flat = net.flat_params();
    for v in flat.iter_mut() {
        *v += data_rng.gen_range(-0.3..0.3);
    }
    net.set_flat_params(&flat).unwrap();
    let rows: Vec<[bool; 3]> = (0..steps)
        .map(|_| [data_rng.gen_bool(0.4), data_rng.gen_bool(0.4), data_rng.gen_bool(0.5)])
        .collect();

    let mut scalar = ScalarNet::from_network(&net);
    let config = LearnerConfig {
        eta: lc.eta,
        gamma: lc.gamma,
        kappa: lc.kappa,
        kappa_b: lc.kappa_b,
        alpha: lc.alpha,
        r: lc.r,
        halve_lr_each_epoch: false,
        use_baseline: lc.use_baseline,
        grad_clip: None,
    };
    let mut learner = Learner::new(&net, config).unwrap();
    let state_seed = seed + 7;
    let mut state = NetworkState::new(&net, state_seed);

    let n = scalar.role.len();
    let k = scalar.synaptic_taps.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(state_seed);
            r.set_stream(i as u64);
            r
        })
        .collect();
    let mut history = vec![vec![0.0; steps]; n];
    // Per neuron, per parameter (bias, feedback, w[p][k]) accumulators.
    let sizes: Vec<usize> = (0..n).map(|i| 2 + scalar.pre[i].len() * k).collect();
    let mut outer: Vec<Vec<f64>> = sizes.iter().map(|&m| vec![0.0; m]).collect();
    let mut elig = outer.clone();
    let mut num = outer.clone();
    let mut den = outer.clone();

    let mut worst = 0.0f64;
    for (t, row) in rows.iter().enumerate() {
        let clamp = vec![
            Some(SpikeSymbol::from_code(row[0] as u8)),
            Some(SpikeSymbol::from_code(row[1] as u8)),
            None,
            None,
            Some(SpikeSymbol::from_code(row[2] as u8)),
        ];
        train_step(&mut net, &mut state, &mut learner, &clamp).unwrap();

        let mut u = vec![0.0; n];
        let mut features: Vec<Vec<f64>> = vec![Vec::new(); n];
        for i in 0..n {
            if scalar.role[i] == Role::Input {
                continue;
            }
            let mut f = vec![1.0, ScalarNet::trace(&scalar.somatic_taps, &history[i], t)];
            for &j in &scalar.pre[i] {
                for taps in &scalar.synaptic_taps {
                    f.push(ScalarNet::trace(taps, &history[j], t));
                }
            }
            let weights = std::iter::once(scalar.bias[i])
                .chain(std::iter::once(scalar.feedback[i]))
                .chain(scalar.w[i].iter().flatten().copied());
            u[i] = weights.zip(&f).map(|(w, x)| w * x).sum();
            features[i] = f;
        }
        let mut s = vec![0.0; n];
        for i in 0..n {
            s[i] = match scalar.role[i] {
                Role::Input => row[i] as u8 as f64,
                Role::Visible => row[2] as u8 as f64,
                Role::Hidden => (rngs[i].gen::<f64>() < sigmoid(u[i])) as u8 as f64,
            };
            history[i][t] = s[i];
        }
        let mut reward = 0.0;
        let mut kl = 0.0;
        for i in 0..n {
            match scalar.role[i] {
                Role::Visible => reward += binary_log_prob(s[i], u[i]),
                Role::Hidden => {
                    let reference = if s[i] > 0.5 { lc.r.ln() } else { (1.0 - lc.r).ln() };
                    kl += binary_log_prob(s[i], u[i]) - reference;
                }
                Role::Input => {}
            }
        }
        if lc.alpha != 0.0 {
            reward -= lc.alpha * kl;
        }
        for i in 0..n {
            if scalar.role[i] == Role::Input {
                continue;
            }
            let post = s[i] - sigmoid(u[i]);
            for (m, x) in features[i].iter().enumerate() {
                let g = post * x;
                if scalar.role[i] == Role::Visible {
                    outer[i][m] = lc.gamma * outer[i][m] + g;
                } else {
                    elig[i][m] = lc.kappa * elig[i][m] + g;
                    let e = elig[i][m];
                    let b = if lc.use_baseline {
                        num[i][m] = lc.kappa_b * num[i][m] + reward * e * e;
                        den[i][m] = lc.kappa_b * den[i][m] + e * e;
                        if den[i][m] == 0.0 {
                            0.0
                        } else {
                            num[i][m] / den[i][m]
                        }
                    } else {
                        0.0
                    };
                    outer[i][m] = lc.gamma * outer[i][m] + (reward - b) * e;
                }
            }
        }
        for i in 0..n {
            if scalar.role[i] == Role::Input {
                continue;
            }
            scalar.bias[i] += lc.eta * outer[i][0];
            scalar.feedback[i] += lc.eta * outer[i][1];
            for (m, w) in scalar.w[i].iter_mut().flatten().enumerate() {
                *w += lc.eta * outer[i][2 + m];
            }
        }
        for (a, b) in net.flat_params().iter().zip(scalar.flat()) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn binary_reduction() -> Outcome {
    let start = Instant::now();
    let plain = binary_reduction_run(
        3,
        100,
        ScalarLearning {
            eta: 0.05,
            gamma: 0.2,
            kappa: 0.2,
            kappa_b: 0.05,
            alpha: 0.0,
            r: 0.3,
            use_baseline: false,
        },
    );
    let full = binary_reduction_run(
        4,
        100,
        ScalarLearning {
            eta: 0.05,
            gamma: 0.6,
            kappa: 0.5,
            kappa_b: 0.3,
            alpha: 1.0,
            r: 0.3,
            use_baseline: true,
        },
    );
    let secs = start.elapsed().as_secs_f64();
    check(
        plain <= 1e-12 && full <= 1e-12 && secs < 10.0,
        format!("max |Δθ| {plain:.1e} (no baseline, α=0), {full:.1e} (baseline, α=1); {secs:.2}s"),
    )
}

fn baseline_exactness() -> Outcome {
    let topo = Topology::classifier(2, 2, 3, 2, 2, 2, Default::default()).unwrap();
    let bank = FilterBank::new(make_raised_cosine_bank(2, 4).unwrap(), make_somatic_filter(2.0, 4).unwrap()).unwrap();
    let mut net = Network::new(topo, bank);
    net.randomize(0.5, 11).unwrap();
    let mut learner = Learner::new(&net, LearnerConfig::defaults_for(3)).unwrap();
    let mut state = NetworkState::new(&net, 5);
    let hidden: Vec<usize> = net.topology().ids_with_role(Role::Hidden).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ell = -1.734_5;
    let (mut checked, mut violations) = (0usize, 0usize);
    for _ in 0..200 {
        let clamp: Vec<_> = (0..net.topology().len())
            .map(|i| match net.topology().role(i) {
                Role::Hidden => None,
                _ => Some(SpikeSymbol::from_code(rng.gen_range(0..=2))),
            })
            .collect();
        let before: Vec<Vec<f64>> = hidden.iter().map(|&i| net.params(i).unwrap().values().to_vec()).collect();
        state.step(&net, &clamp, wtasnn::network::StepMode::Train).unwrap();
        learner.update(&mut net, &state, ell).unwrap();
        for (h, &i) in hidden.iter().enumerate() {
            let cl = learner.circuit(i).unwrap();
            let e = cl.eligibility().unwrap();
            let b = cl.baseline().unwrap();
            for (j, &ej) in e.iter().enumerate() {
                if ej != 0.0 {
                    checked += 1;
                    violations += (b.value(j) != ell) as usize;
                }
            }
            violations += (net.params(i).unwrap().values() != before[h].as_slice()) as usize;
        }
    }
    check(
        checked > 0 && violations == 0,
        format!("{checked} nonzero-eligibility components over 200 steps, {violations} violations"),
    )
}

fn normalization_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for n in 0..100_000 {
        let c = rng.gen_range(1..=8);
        let scale = if n % 10 == 0 { 700.0 } else { 30.0 };
        let u: Vec<f64> = (0..c).map(|_| rng.gen_range(-scale..scale)).collect();
        let p = wta_softmax(&u).map_err(|e| e.to_string())?;
        worst = worst.max((p.silence() + p.units().iter().sum::<f64>() - 1.0).abs());
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        n_train: 60,
        n_test: 20,
        ..SynthSpec::default()
    };
    synth(dir.path(), &spec).map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 9\nepochs = 2\nlog_every = 10\n[network]\nhidden = 4\n[data]\ntrain_manifest = \"train.toml\"\ntest_manifest = \"test.toml\"\ntest_every = 30\n",
    )
    .map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        train(&TrainOptions {
            config_path: cfg.clone(),
            seed: None,
            out_dir: out.clone(),
        })
        .map_err(|e| e.to_string())?;
        read_metrics(&out.join("metrics.csv")).map_err(|e| e.to_string())?;
        std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a")?, run("b")?);
    check(
        worst <= 1e-12 && a == b,
        format!(
            "max |Σσ − 1| {worst:.1e} over 1e5 draws; two runs {} ({} bytes)",
            if a == b { "byte-identical" } else { "differ" },
            a.len()
        ),
    )
}

/// Trains on the synthetic task written to `dir` for one epoch, logging every
/// 500 examples, and returns the metrics rows.
fn synth_run(dir: &Path, name: &str, encoding: Encoding, alpha: f64, seed: u64, test: bool) -> Result<Vec<MetricsRow>, String> {
    let mut config = ExperimentConfig::default();
    config.seed = seed;
    config.log_every = 500;
    config.network.hidden = 8;
    config.learner.alpha = alpha;
    config.data.encoding = encoding;
    config.data.train_manifest = Some("train.toml".into());
    config.data.test_manifest = test.then(|| "test.toml".into());
    let cfg = dir.join(format!("{name}.toml"));
    std::fs::write(&cfg, config.to_toml()).map_err(|e| e.to_string())?;
    train(&TrainOptions {
        config_path: cfg,
        seed: None,
        out_dir: dir.join(name),
    })
    .map_err(|e| e.to_string())?;
    read_metrics(&dir.join(name).join("metrics.csv")).map_err(|e| e.to_string())
}

/// Hidden rate over the last 500 training examples.
fn final_hidden_rate(rows: &[MetricsRow]) -> Result<f64, String> {
    rows.len().checked_sub(2).map(|i| rows[i].hidden_rate).ok_or_else(|| "too few metrics rows".into())
}

fn final_test_acc(rows: &[MetricsRow]) -> Result<f64, String> {
    rows.last().and_then(|r| r.test_acc).ok_or_else(|| "no test accuracy".into())
}

fn sparsity_regularization() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    synth(
        dir.path(),
        &SynthSpec {
            n_test: 2,
            ..SynthSpec::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let free = final_hidden_rate(&synth_run(dir.path(), &format!("free{seed}"), Encoding::Wta, 0.0, seed, false)?)?;
        let reg = final_hidden_rate(&synth_run(dir.path(), &format!("reg{seed}"), Encoding::Wta, 1.0, seed, false)?)?;
        ok &= (reg - 0.3).abs() < (free - 0.3).abs();
        lines.push(format!("seed {seed}: α=0 {free:.3}, α=1 {reg:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok, format!("hidden rate over the last 500 of 2000 examples, {}; {secs:.0}s", lines.join("; ")))
}

fn polarity_separation() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec::default();
    let task = synth_polarity_task(&spec).map_err(|e| e.to_string())?;
    task.write(dir.path()).map_err(|e| e.to_string())?;
    let wta = final_test_acc(&synth_run(dir.path(), "wta", Encoding::Wta, 1.0, 0, true)?)?;
    let unsigned = final_test_acc(&synth_run(dir.path(), "unsigned", Encoding::Unsigned, 1.0, 0, true)?)?;
    let secs = start.elapsed().as_secs_f64();
    check(
        wta >= 0.9 && unsigned <= 0.6 && secs < 300.0,
        format!(
            "{} train / {} test examples, H=8: WTA test acc {wta:.3}, unsigned {unsigned:.3}; {secs:.0}s",
            spec.n_train, spec.n_test
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("gradient oracle", gradient_oracle),
        ("estimator unbiasedness", estimator_unbiasedness),
        ("binary reduction", binary_reduction),
        ("baseline exactness", baseline_exactness),
        ("normalization and determinism", normalization_and_determinism),
        ("sparsity regularization", sparsity_regularization),
        ("polarity separation", polarity_separation),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let (status, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {status} {name}: {detail}", n + 1);
    }
    println!("criterion 8: SKIP published-table reproduction: excluded long run, needs the full event recordings");
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
