//! Online local variational learning for WTA-SNNs.
//!
//! At every step a central reduction computes the scalar reward
//!
//! ```text
//! ℓ_t = Σ_{i∈X} H̄(x_{i,t}, σ(u_{i,t})) − α Σ_{i∈H} [H̄(h_{i,t}, σ(u_{i,t})) − log r(h_{i,t})]
//! ```
//!
//! and every circuit updates its own parameters from local quantities:
//!
//! ```text
//! visible:  θ_i += η ⟨∇ log p(x_{i,t} | u_{i,t})⟩_γ
//! hidden:   θ_i += η ⟨(ℓ_t − b_{i,t}) ⊙ e_{i,t}⟩_γ,   e_{i,t} = ⟨∇ log p(h_{i,t} | u_{i,t})⟩_κ
//! ```
//!
//! with the per-parameter baseline `b_{i,t} = ⟨ℓ_t e²⟩_{κ_b} / ⟨e²⟩_{κ_b}`.
//! The gradient of the log-probability is `s − σ(u)` times the trace that
//! multiplies each parameter in the membrane potential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{log_prob, SpikeSymbol, TemporalAverage, LOG_FLOOR};
use crate::network::{argmax_first, Network, NetworkState, ParamLayout, Role, StepMode, StepTraces, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Learning rate `η`.
    pub eta: f64,
    /// Outer discount `γ`.
    pub gamma: f64,
    /// Eligibility averaging constant `κ`.
    pub kappa: f64,
    /// Baseline averaging constant `κ_b`.
    pub kappa_b: f64,
    /// Weight `α` of the sparsity regularizer.
    pub alpha: f64,
    /// Desired hidden spiking rate `r`.
    pub r: f64,
    /// Halve `η` at the end of every epoch.
    pub halve_lr_each_epoch: bool,
    /// Use the optimized baseline; with `false`, `b = 0`.
    pub use_baseline: bool,
    /// Optional bound on each component of `⟨·⟩_γ` before it is applied.
    pub grad_clip: Option<f64>,
}

impl LearnerConfig {
    /// Reference hyperparameters for a network with `hidden` hidden circuits:
    /// `η = 0.05/H`, `γ = κ = 0.2`, `κ_b = 0.05`, `α = 1`, `r = 0.3`.
    pub fn defaults_for(hidden: usize) -> Self {
        LearnerConfig {
            eta: 0.05 / hidden.max(1) as f64,
            gamma: 0.2,
            kappa: 0.2,
            kappa_b: 0.05,
            alpha: 1.0,
            r: 0.3,
            halve_lr_each_epoch: true,
            use_baseline: true,
            grad_clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return bad(format!("learning rate {} must be finite and ≥ 0", self.eta));
        }
        for (name, v) in [("gamma", self.gamma), ("kappa", self.kappa), ("kappa_b", self.kappa_b)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha = {} must be ≥ 0", self.alpha));
        }
        if !(0.0..1.0).contains(&self.r) {
            return bad(format!("r = {} outside [0, 1)", self.r));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip = {c} must be > 0"));
            }
        }
        Ok(())
    }
}

/// `∇_θ log p(s | u)` for one circuit, written into `out` using the circuit's
/// flat parameter layout.
///
/// `sigma` is `σ(u)`, `pre_traces[p][k]` the traces that multiplied
/// `W_syn[p][k]` and `somatic` the trace that multiplied `W_fb`.
pub fn log_prob_gradient_into(
    s: SpikeSymbol,
    sigma: &[f64],
    pre_traces: &[&[Vec<f64>]],
    somatic: &[f64],
    layout: &ParamLayout,
    out: &mut [f64],
) -> Result<()> {
    let c = layout.units;
    if sigma.len() != c || somatic.len() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            got: if sigma.len() != c { sigma.len() } else { somatic.len() },
        });
    }
    if pre_traces.len() != layout.pre_units.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.pre_units.len(),
            got: pre_traces.len(),
        });
    }
    if out.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            got: out.len(),
        });
    }
    s.check(c)?;

    let mut post = [0.0f64; SpikeSymbol::MAX_UNITS];
    let post = &mut post[..c];
    for (unit, p) in post.iter_mut().enumerate() {
        *p = -sigma[unit];
    }
    if let Some(unit) = s.unit_index() {
        post[unit] += 1.0;
    }

    out[layout.bias_range()].copy_from_slice(post);
    outer_into(post, somatic, &mut out[layout.feedback_range()]);
    for (p, per_filter) in pre_traces.iter().enumerate() {
        if per_filter.len() != layout.filters {
            return Err(Error::DimensionMismatch {
                expected: layout.filters,
                got: per_filter.len(),
            });
        }
        for (k, trace) in per_filter.iter().enumerate() {
            if trace.len() != layout.pre_units[p] {
                return Err(Error::DimensionMismatch {
                    expected: layout.pre_units[p],
                    got: trace.len(),
                });
            }
            outer_into(post, trace, &mut out[layout.synaptic_range(p, k)]);
        }
    }
    Ok(())
}

/// Allocating form of [`log_prob_gradient_into`] that computes `σ(u)` itself.
pub fn log_prob_gradient(
    s: SpikeSymbol,
    u: &[f64],
    pre_traces: &[&[Vec<f64>]],
    somatic: &[f64],
    layout: &ParamLayout,
) -> Result<Vec<f64>> {
    let sigma = crate::mathcore::wta_softmax(u)?;
    let mut out = vec![0.0; layout.len()];
    log_prob_gradient_into(s, sigma.units(), pre_traces, somatic, layout, &mut out)?;
    Ok(out)
}

/// Row-major outer product `a bᵀ`.
fn outer_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let cols = b.len();
    for (row, &x) in a.iter().enumerate() {
        for (o, &y) in out[row * cols..(row + 1) * cols].iter_mut().zip(b) {
            *o = x * y;
        }
    }
}

/// `log r(h)` under the i.i.d. reference distribution: `log(r/C)` for a
/// spike at any unit, `log(1 − r)` for silence.
pub fn reference_log_prob(h: SpikeSymbol, r: f64, units: usize) -> f64 {
    if h.is_spike() {
        (r / units as f64).max(LOG_FLOOR).ln()
    } else {
        (1.0 - r).ln()
    }
}

/// Global reward `ℓ_t` of the last step.
///
/// `spikes` and `potentials` are indexed by circuit; input circuits are
/// ignored.
pub fn reward(topology: &Topology, spikes: &[SpikeSymbol], potentials: &[Vec<f64>], alpha: f64, r: f64) -> f64 {
    let mut visible = 0.0;
    let mut hidden = 0.0;
    for i in 0..topology.len() {
        match topology.role(i) {
            Role::Input => {}
            Role::Visible => visible += log_prob(spikes[i], &potentials[i]),
            Role::Hidden => {
                hidden += log_prob(spikes[i], &potentials[i])
                    - reference_log_prob(spikes[i], r, topology.units(i))
            }
        }
    }
    if alpha == 0.0 {
        visible
    } else {
        visible - alpha * hidden
    }
}

/// Per-parameter optimized baseline `⟨ℓ e²⟩_{κ_b} / ⟨e²⟩_{κ_b}`.
///
/// The ratio is carried as a running weighted mean,
/// `m_t = m_{t−1} + (ℓ_t − m_{t−1}) · e_t² / ⟨e²⟩_t`, which is algebraically
/// the same quotient and returns `ℓ` exactly when the reward is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Baseline {
    den: TemporalAverage,
    mean: Vec<f64>,
}

impl Baseline {
    pub fn new(len: usize, kappa_b: f64) -> Result<Self> {
        Ok(Baseline {
            den: TemporalAverage::new(len, kappa_b)?,
            mean: vec![0.0; len],
        })
    }

    /// Folds in the current eligibility trace and reward.
    pub fn update(&mut self, e: &[f64], reward: f64) {
        assert_eq!(e.len(), self.mean.len(), "baseline length");
        self.den.step_with(|i| e[i] * e[i]);
        for ((m, &den), &ei) in self.mean.iter_mut().zip(self.den.value()).zip(e) {
            let w = ei * ei;
            if w > 0.0 && den > 0.0 {
                *m += (reward - *m) * (w / den);
            }
        }
    }

    /// Baseline for parameter `i`; zero until its eligibility has been
    /// nonzero at least once.
    ///
    /// The running-mean form never divides by a small denominator, so no
    /// threshold on `⟨e²⟩` is applied: a decaying eligibility keeps the
    /// weighted mean of the rewards it has seen.
    pub fn value(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.value(i)).collect()
    }

    pub fn reset(&mut self) {
        self.den.reset();
        self.mean.iter_mut().for_each(|m| *m = 0.0);
    }
}

/// Accumulators of one learnable circuit.
#[derive(Clone, Debug)]
pub struct CircuitLearner {
    role: Role,
    grad: Vec<f64>,
    /// `e = ⟨∇ log p⟩_κ`; hidden circuits only.
    eligibility: Option<TemporalAverage>,
    baseline: Option<Baseline>,
    /// `⟨·⟩_γ` of the per-step update direction.
    outer: TemporalAverage,
}

impl CircuitLearner {
    pub fn role(&self) -> Role {
        self.role
    }

    /// Gradient of the log-probability at the last step.
    pub fn last_gradient(&self) -> &[f64] {
        &self.grad
    }

    pub fn eligibility(&self) -> Option<&[f64]> {
        self.eligibility.as_ref().map(TemporalAverage::value)
    }

    pub fn baseline(&self) -> Option<&Baseline> {
        self.baseline.as_ref()
    }

    /// Current `⟨·⟩_γ` accumulator, i.e. the update direction before `η`.
    pub fn direction(&self) -> &[f64] {
        self.outer.value()
    }

    fn reset(&mut self) {
        if let Some(e) = &mut self.eligibility {
            e.reset();
        }
        if let Some(b) = &mut self.baseline {
            b.reset();
        }
        self.outer.reset();
    }
}

/// Learning state for a whole network.
#[derive(Clone, Debug)]
pub struct Learner {
    config: LearnerConfig,
    eta: f64,
    circuits: Vec<Option<CircuitLearner>>,
}

impl Learner {
    pub fn new(net: &Network, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let topo = net.topology();
        let circuits = (0..topo.len())
            .map(|i| {
                let Some(p) = net.params(i) else { return Ok(None) };
                let n = p.values().len();
                let role = topo.role(i);
                let hidden = role == Role::Hidden;
                Ok(Some(CircuitLearner {
                    role,
                    grad: vec![0.0; n],
                    eligibility: hidden.then(|| TemporalAverage::new(n, config.kappa)).transpose()?,
                    baseline: hidden.then(|| Baseline::new(n, config.kappa_b)).transpose()?,
                    outer: TemporalAverage::new(n, config.gamma)?,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Learner {
            eta: config.eta,
            config,
            circuits,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    /// Learning rate currently in force.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn set_eta(&mut self, eta: f64) {
        self.eta = eta;
    }

    pub fn circuit(&self, i: usize) -> Option<&CircuitLearner> {
        self.circuits[i].as_ref()
    }

    /// Update directions of all learnable circuits, concatenated in the same
    /// order as [`Network::flat_params`].
    pub fn flat_direction(&self) -> Vec<f64> {
        self.circuits
            .iter()
            .flatten()
            .flat_map(|c| c.direction().iter().copied())
            .collect()
    }

    /// Clears every accumulator; called at example boundaries.
    pub fn reset(&mut self) {
        self.circuits.iter_mut().flatten().for_each(CircuitLearner::reset);
    }

    /// Applies the end-of-epoch learning-rate schedule.
    pub fn end_epoch(&mut self) {
        if self.config.halve_lr_each_epoch {
            self.eta /= 2.0;
        }
    }

    /// Reward of the state's last step under this learner's `α` and `r`.
    pub fn reward(&self, net: &Network, state: &NetworkState) -> f64 {
        reward(net.topology(), state.spikes(), state.potentials(), self.config.alpha, self.config.r)
    }

    /// Updates all accumulators from the state's last step and `reward`, then
    /// applies `θ_i += η ⟨·⟩_γ` to every learnable circuit.
    ///
    /// Every update direction is computed from the same step snapshot before
    /// any parameter moves.
    pub fn update(&mut self, net: &mut Network, state: &NetworkState, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        let use_baseline = self.config.use_baseline;
        {
            let topo = net.topology();
            let traces = state.traces();
            for (i, slot) in self.circuits.iter_mut().enumerate() {
                let Some(cl) = slot else { continue };
                let layout = net.params(i).expect("learnable circuit").layout();
                let sigma = state.probs()[i]
                    .as_ref()
                    .ok_or(Error::Empty("step output; call step() before update()"))?;
                let pre = pre_traces(topo, traces, i);
                log_prob_gradient_into(
                    state.spikes()[i],
                    sigma.units(),
                    &pre,
                    &traces.somatic[i],
                    layout,
                    &mut cl.grad,
                )?;
                match cl.role {
                    Role::Visible => cl.outer.step(&cl.grad),
                    Role::Hidden => {
                        let e = cl.eligibility.as_mut().expect("hidden eligibility");
                        e.step(&cl.grad);
                        let e = e.value();
                        let baseline = cl.baseline.as_mut().expect("hidden baseline");
                        if use_baseline {
                            baseline.update(e, reward);
                            cl.outer.step_with(|j| (reward - baseline.value(j)) * e[j]);
                        } else {
                            cl.outer.step_with(|j| reward * e[j]);
                        }
                    }
                    Role::Input => unreachable!("input circuits have no learner"),
                }
            }
        }

        let eta = self.eta;
        let clip = self.config.grad_clip;
        for (i, slot) in self.circuits.iter().enumerate() {
            let Some(cl) = slot else { continue };
            let params = net.params_mut(i).expect("learnable circuit");
            for (w, &d) in params.values_mut().iter_mut().zip(cl.outer.value()) {
                let d = match clip {
                    Some(c) => d.clamp(-c, c),
                    None => d,
                };
                *w += eta * d;
            }
        }
        Ok(())
    }
}

fn pre_traces<'a>(topo: &Topology, traces: &'a StepTraces, i: usize) -> Vec<&'a [Vec<f64>]> {
    topo.presynaptic(i)
        .iter()
        .map(|&j| traces.synaptic[j].as_slice())
        .collect()
}

/// One training step: advance the network with inputs and targets clamped,
/// compute the reward and update every circuit. Returns `ℓ_t`.
pub fn train_step(
    net: &mut Network,
    state: &mut NetworkState,
    learner: &mut Learner,
    clamp: &[Option<SpikeSymbol>],
) -> Result<f64> {
    state.step(net, clamp, StepMode::Train)?;
    let l = learner.reward(net, state);
    learner.update(net, state, l)?;
    Ok(l)
}

/// A clamped training or evaluation sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// `inputs[t][n]`: symbol of the `n`th input circuit at step `t`.
    pub inputs: Vec<Vec<SpikeSymbol>>,
    /// `targets[t][n]`: symbol of the `n`th visible circuit at step `t`.
    pub targets: Vec<Vec<SpikeSymbol>>,
    pub label: Option<usize>,
}

impl Example {
    /// Classification example: the read-out circuit of `label` emits a spike
    /// at its first unit on every step, all other read-out circuits stay
    /// silent.
    pub fn classification(inputs: Vec<Vec<SpikeSymbol>>, label: usize, classes: usize) -> Self {
        let targets = (0..inputs.len())
            .map(|_| {
                (0..classes)
                    .map(|c| if c == label { SpikeSymbol::unit(0) } else { SpikeSymbol::SILENCE })
                    .collect()
            })
            .collect();
        Example {
            inputs,
            targets,
            label: Some(label),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Builds the clamp vector of step `t`.
pub fn clamp_for(topology: &Topology, example: &Example, t: usize, mode: StepMode) -> Result<Vec<Option<SpikeSymbol>>> {
    let mut clamp = vec![None; topology.len()];
    let (mut n_in, mut n_vis) = (0, 0);
    for (i, slot) in clamp.iter_mut().enumerate() {
        match topology.role(i) {
            Role::Input => {
                *slot = Some(*example.inputs[t].get(n_in).ok_or(Error::DimensionMismatch {
                    expected: n_in + 1,
                    got: example.inputs[t].len(),
                })?);
                n_in += 1;
            }
            Role::Visible if mode == StepMode::Train => {
                *slot = Some(*example.targets[t].get(n_vis).ok_or(Error::DimensionMismatch {
                    expected: n_vis + 1,
                    got: example.targets[t].len(),
                })?);
                n_vis += 1;
            }
            _ => {}
        }
    }
    if example.inputs[t].len() != n_in {
        return Err(Error::DimensionMismatch {
            expected: n_in,
            got: example.inputs[t].len(),
        });
    }
    Ok(clamp)
}

/// Summary of one training example.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleStats {
    /// Mean of `ℓ_t` over the example.
    pub mean_reward: f64,
    /// Fraction of hidden circuit-steps that emitted a spike.
    pub hidden_rate: f64,
    /// Read-out circuit with the largest summed spiking probability while
    /// clamped (the training-time prediction), if the example has a label.
    pub predicted: Option<usize>,
}

/// Trains on one example from a clean state.
pub fn train_example(
    net: &mut Network,
    state: &mut NetworkState,
    learner: &mut Learner,
    example: &Example,
) -> Result<ExampleStats> {
    if example.is_empty() {
        return Err(Error::Empty("example"));
    }
    state.reset();
    learner.reset();
    let hidden: Vec<usize> = net.topology().ids_with_role(Role::Hidden).collect();
    let visible: Vec<usize> = net.topology().ids_with_role(Role::Visible).collect();
    let mut reward_sum = 0.0;
    let mut hidden_spikes = 0usize;
    let mut mass = vec![0.0; visible.len()];
    for t in 0..example.len() {
        let clamp = clamp_for(net.topology(), example, t, StepMode::Train)?;
        reward_sum += train_step(net, state, learner, &clamp)?;
        hidden_spikes += hidden.iter().filter(|&&i| state.spikes()[i].is_spike()).count();
        for (m, &i) in mass.iter_mut().zip(&visible) {
            *m += state.probs()[i].as_ref().map_or(0.0, |p| p.spike_mass());
        }
    }
    let steps = example.len() as f64;
    Ok(ExampleStats {
        mean_reward: reward_sum / steps,
        hidden_rate: if hidden.is_empty() {
            0.0
        } else {
            hidden_spikes as f64 / (steps * hidden.len() as f64)
        },
        predicted: (example.label.is_some() && !visible.is_empty()).then(|| argmax_first(&mass)),
    })
}

/// One pass over `examples` in the given order, followed by the learning-rate
/// schedule. `on_example` sees each example's index and statistics.
pub fn train_epoch(
    net: &mut Network,
    state: &mut NetworkState,
    learner: &mut Learner,
    examples: &[Example],
    mut on_example: impl FnMut(usize, &ExampleStats),
) -> Result<Vec<ExampleStats>> {
    if examples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut stats = Vec::with_capacity(examples.len());
    for (n, ex) in examples.iter().enumerate() {
        let s = train_example(net, state, learner, ex)?;
        on_example(n, &s);
        stats.push(s);
    }
    learner.end_epoch();
    Ok(stats)
}

/// Free-runs the network on an example's inputs and predicts its class from
/// the read-out spike counts.
pub fn classify(net: &Network, state: &mut NetworkState, example: &Example) -> Result<usize> {
    if example.is_empty() {
        return Err(Error::Empty("example"));
    }
    state.reset();
    let visible: Vec<usize> = net.topology().ids_with_role(Role::Visible).collect();
    let mut trains = vec![Vec::with_capacity(example.len()); visible.len()];
    for t in 0..example.len() {
        let clamp = clamp_for(net.topology(), example, t, StepMode::FreeRun)?;
        state.step(net, &clamp, StepMode::FreeRun)?;
        for (train, &i) in trains.iter_mut().zip(&visible) {
            train.push(state.spikes()[i]);
        }
    }
    crate::network::predict_class(&trains)
}
