//! Gradient and estimator checks against the brute-force oracles.
//!
//! Three suites:
//!
//! - `fd`: the analytic log-likelihood gradient of random tiny networks
//!   against central finite differences.
//! - `enumeration`: the exact criterion gradient from hidden-sequence
//!   enumeration against finite differences of its value.
//! - `mc`: the mean of the online hidden-parameter estimator against the
//!   enumerated gradient, in standard errors. With two steps a hidden spike
//!   cannot reach the read-out circuit before the sequence ends, so the
//!   exact hidden gradient vanishes; six steps give a chain where every
//!   hidden parameter matters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wtasnn::filters::{FilterBank, Taps};
use wtasnn::learning::{train_step, Example, Learner, LearnerConfig};
use wtasnn::network::{CircuitSpec, Network, NetworkState, Role, Topology};
use wtasnn::oracle::{exact_elbo, fd_gradient, mc_gradient_mean, relative_error, sequence_log_likelihood, TinyNetSpec};
use wtasnn::SpikeSymbol;

/// Relative-error denominators are floored at this magnitude so that
/// components whose gradient vanishes are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Analytic gradient of `Σ_t Σ_i log p(s_{i,t} | u_{i,t})` for a fully
/// clamped sequence, in [`Network::flat_params`] order.
pub type GradFn = dyn Fn(&Network, &[Vec<SpikeSymbol>]) -> wtasnn::Result<Vec<f64>>;

/// The library gradient: a learner with `γ = 1` and `η = 0` accumulates the
/// per-step gradients of every (visible) circuit over the sequence.
pub fn library_gradient(net: &Network, seq: &[Vec<SpikeSymbol>]) -> wtasnn::Result<Vec<f64>> {
    let mut net = net.clone();
    let config = LearnerConfig {
        eta: 0.0,
        gamma: 1.0,
        kappa: 1.0,
        kappa_b: 1.0,
        alpha: 0.0,
        r: 0.5,
        halve_lr_each_epoch: false,
        use_baseline: false,
        grad_clip: None,
    };
    let mut learner = Learner::new(&net, config)?;
    let mut state = NetworkState::new(&net, 0);
    for row in seq {
        let clamp: Vec<_> = row.iter().map(|s| Some(*s)).collect();
        train_step(&mut net, &mut state, &mut learner, &clamp)?;
    }
    Ok(learner.flat_direction())
}

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub fd_networks: usize,
    pub enumeration_networks: usize,
    pub mc_samples: usize,
    pub h: f64,
    /// Relative-error tolerance of the `fd` and `enumeration` suites.
    pub tolerance: f64,
    /// Largest allowed `|mean − exact| / stderr` in the `mc` suite.
    pub max_z: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 0,
            fd_networks: 20,
            enumeration_networks: 5,
            mc_samples: 100_000,
            h: 1e-4,
            tolerance: 1e-5,
            max_z: 3.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub components: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Where `max_error` occurred.
    pub worst: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }

    fn new(name: &str, tolerance: f64) -> Self {
        SuiteReport {
            name: name.into(),
            components: 0,
            max_error: 0.0,
            tolerance,
            worst: "-".into(),
        }
    }

    fn record(&mut self, err: f64, at: impl FnOnce() -> String) {
        self.components += 1;
        if err > self.max_error || err.is_nan() {
            self.max_error = if err.is_nan() { f64::INFINITY } else { err };
            self.worst = at();
        }
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<12} {} components={} max={:.3e} tol={:.1e} worst: {}",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.components,
            self.max_error,
            self.tolerance,
            self.worst
        )
    }
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub suites: Vec<SuiteReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

fn random_taps(rng: &mut ChaCha8Rng, tau: usize) -> Taps {
    Taps::new((0..tau).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("finite taps")
}

fn random_params(net: &mut Network, rng: &mut ChaCha8Rng, scale: f64) {
    let flat: Vec<f64> = (0..net.num_params()).map(|_| rng.gen_range(-scale..scale)).collect();
    net.set_flat_params(&flat).expect("matching length");
}

/// A random network of at most three circuits (`C ≤ 3`, `K ≤ 2`, `τ ≤ 3`)
/// whose learnable circuits are all visible, with a random clamped sequence.
pub fn random_fd_case(rng: &mut ChaCha8Rng) -> (Network, Vec<Vec<SpikeSymbol>>) {
    let learnable = rng.gen_range(1..=2);
    let mut circuits = vec![CircuitSpec { units: rng.gen_range(1..=3), role: Role::Input }];
    circuits.extend((0..learnable).map(|_| CircuitSpec { units: rng.gen_range(1..=3), role: Role::Visible }));
    let mut edges = Vec::new();
    for post in 1..circuits.len() {
        for pre in 0..circuits.len() {
            if pre != post && rng.gen_bool(0.7) {
                edges.push((pre, post));
            }
        }
    }
    let topo = Topology::new(circuits, edges).expect("valid random topology");
    let tau = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=2);
    let bank = FilterBank::new((0..k).map(|_| random_taps(rng, tau)).collect(), random_taps(rng, tau)).expect("same duration");
    let mut net = Network::new(topo, bank);
    random_params(&mut net, rng, 1.0);
    let steps = rng.gen_range(6..=10);
    let seq = (0..steps)
        .map(|_| {
            net.topology()
                .circuits()
                .iter()
                .map(|c| SpikeSymbol::from_code(rng.gen_range(0..=c.units as u8)))
                .collect()
        })
        .collect();
    (net, seq)
}

/// Input, hidden and visible circuit with random units, recurrent hidden
/// wiring and random kernels, plus a random clamped example.
pub fn random_enumeration_case(rng: &mut ChaCha8Rng) -> (TinyNetSpec, Example) {
    let units: Vec<usize> = (0..3).map(|_| rng.gen_range(1..=2)).collect();
    let topo = Topology::new(
        vec![
            CircuitSpec { units: units[0], role: Role::Input },
            CircuitSpec { units: units[1], role: Role::Hidden },
            CircuitSpec { units: units[2], role: Role::Visible },
        ],
        vec![(0, 1), (1, 2), (0, 2), (2, 1)],
    )
    .expect("valid topology");
    let tau = rng.gen_range(1..=3);
    let bank = FilterBank::new(vec![random_taps(rng, tau)], random_taps(rng, tau)).expect("same duration");
    let mut net = Network::new(topo, bank);
    random_params(&mut net, rng, 1.0);
    let steps = rng.gen_range(3..=4);
    let example = random_example(rng, steps, units[0], units[2]);
    (TinyNetSpec::new(net, steps).expect("small enough"), example)
}

fn random_example(rng: &mut ChaCha8Rng, steps: usize, input_units: usize, visible_units: usize) -> Example {
    Example {
        inputs: (0..steps).map(|_| vec![SpikeSymbol::from_code(rng.gen_range(0..=input_units as u8))]).collect(),
        targets: (0..steps).map(|_| vec![SpikeSymbol::from_code(rng.gen_range(0..=visible_units as u8))]).collect(),
        label: None,
    }
}

/// One input, one hidden and one visible circuit with `C = 2` and a single
/// feed-forward chain, with fixed random weights.
pub fn chain_case(steps: usize, seed: u64) -> (TinyNetSpec, Example) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = Topology::new(
        vec![
            CircuitSpec { units: 2, role: Role::Input },
            CircuitSpec { units: 2, role: Role::Hidden },
            CircuitSpec { units: 2, role: Role::Visible },
        ],
        vec![(0, 1), (1, 2)],
    )
    .expect("valid topology");
    let bank = FilterBank::new(vec![Taps::new(vec![1.0, 0.5]).unwrap()], Taps::new(vec![-1.0, -0.5]).unwrap()).unwrap();
    let mut net = Network::new(topo, bank);
    random_params(&mut net, &mut rng, 1.5);
    let example = random_example(&mut rng, steps, 2, 2);
    (TinyNetSpec::new(net, steps).expect("small enough"), example)
}

pub fn fd_suite(opts: &GradcheckOptions, grad: &GradFn) -> anyhow::Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = SuiteReport::new("fd", opts.tolerance);
    for n in 0..opts.fd_networks {
        let (net, seq) = random_fd_case(&mut rng);
        let analytic = grad(&net, &seq)?;
        anyhow::ensure!(analytic.len() == net.num_params(), "gradient has {} entries, expected {}", analytic.len(), net.num_params());
        let mut probe = net.clone();
        let numeric = fd_gradient(
            |p| {
                probe.set_flat_params(p).expect("matching length");
                sequence_log_likelihood(&probe, &seq).expect("valid sequence")
            },
            &net.flat_params(),
            opts.h,
        )?;
        for (j, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            report.record(relative_error(*a, *f, RELATIVE_FLOOR), || {
                format!("network {n} parameter {j}: analytic {a:.6e} vs fd {f:.6e}")
            });
        }
    }
    Ok(report)
}

pub fn enumeration_suite(opts: &GradcheckOptions) -> anyhow::Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
    let mut report = SuiteReport::new("enumeration", opts.tolerance);
    for n in 0..opts.enumeration_networks {
        let (tiny, x) = random_enumeration_case(&mut rng);
        let (alpha, r, gamma) = (rng.gen_range(0.0..1.5), rng.gen_range(0.1..0.9), rng.gen_range(0.1..1.0));
        let exact = exact_elbo(&tiny, &x, alpha, r, gamma)?;
        let mut probe = tiny.clone();
        let numeric = fd_gradient(
            |p| {
                probe.net_mut().set_flat_params(p).expect("matching length");
                exact_elbo(&probe, &x, alpha, r, gamma).expect("enumerable").value
            },
            &tiny.net().flat_params(),
            opts.h,
        )?;
        for (j, (a, f)) in exact.gradient.iter().zip(&numeric).enumerate() {
            report.record(relative_error(*a, *f, RELATIVE_FLOOR), || {
                format!("network {n} parameter {j}: exact {a:.6e} vs fd {f:.6e}")
            });
        }
    }
    Ok(report)
}

/// Largest standard-error distance between the estimator mean and the
/// enumerated gradient over the hidden circuit's parameters. Components with
/// zero sample variance must agree to 1e-12.
pub fn mc_suite(name: &str, tiny: &TinyNetSpec, x: &Example, samples: usize, seed: u64, max_z: f64) -> anyhow::Result<SuiteReport> {
    let (alpha, r, gamma) = (0.0, 0.3, 1.0);
    let exact = exact_elbo(tiny, x, alpha, r, gamma)?;
    let est = mc_gradient_mean(tiny.net(), x, alpha, r, gamma, samples, seed)?;
    let topo = tiny.net().topology();
    let mut offset = 0;
    let mut report = SuiteReport::new(name, max_z);
    for i in 0..topo.len() {
        let Some(p) = tiny.net().params(i) else { continue };
        let len = p.values().len();
        if topo.role(i) == Role::Hidden {
            for j in offset..offset + len {
                let diff = (est.mean[j] - exact.gradient[j]).abs();
                let z = if est.stderr[j] > 0.0 {
                    diff / est.stderr[j]
                } else if diff <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                report.record(z, || {
                    format!(
                        "parameter {j}: mean {:.6e} ± {:.2e} vs exact {:.6e}",
                        est.mean[j], est.stderr[j], exact.gradient[j]
                    )
                });
            }
        }
        offset += len;
    }
    Ok(report)
}

pub fn run_gradcheck(opts: &GradcheckOptions, grad: &GradFn) -> anyhow::Result<GradcheckReport> {
    let mut suites = vec![fd_suite(opts, grad)?, enumeration_suite(opts)?];
    let (tiny, x) = chain_case(2, opts.seed);
    suites.push(mc_suite("mc(T=2)", &tiny, &x, opts.mc_samples, opts.seed, opts.max_z)?);
    let (tiny, x) = chain_case(6, opts.seed);
    suites.push(mc_suite("mc(T=6)", &tiny, &x, opts.mc_samples, opts.seed, opts.max_z)?);
    Ok(GradcheckReport { suites })
}
