//! Network topology, per-circuit parameters and stepping.
//!
//! Each learnable circuit `i` with `C_i` units has a membrane potential
//!
//! ```text
//! u_{i,t} = Σ_{j∈P_i} Σ_k W_syn[j][k] · strace^{(k)}_{j,t−1} + W_fb · ftrace_{i,t−1} + ϑ_i
//! ```
//!
//! with `W_syn[j][k]` of shape `C_i × C_j`, `W_fb` of shape `C_i × C_i` and
//! bias `ϑ_i`. All potentials of a step are computed from the previous step's
//! traces before any circuit samples, so the order in which circuits are
//! visited within a step never matters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterBank, TraceBuffer};
use crate::mathcore::{sample_spike, wta_softmax, ProbVector, SpikeSymbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Parameterless source, always clamped to data.
    Input,
    /// Sampled from the model.
    Hidden,
    /// Read-out circuit: clamped to targets while training, sampled otherwise.
    Visible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub units: usize,
    pub role: Role,
}

/// Connectivity among the hidden circuits of [`Topology::classifier`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    /// Every hidden circuit receives every other hidden circuit.
    #[default]
    FullyConnected,
    /// Hidden circuits receive only the inputs.
    Feedforward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RawTopology {
    circuits: Vec<CircuitSpec>,
    edges: Vec<(usize, usize)>,
}

/// Directed graph of WTA circuits. Edges are `(pre, post)`; cycles are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    circuits: Vec<CircuitSpec>,
    edges: Vec<(usize, usize)>,
    presynaptic: Vec<Vec<usize>>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        Topology::new(raw.circuits, raw.edges)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            circuits: t.circuits,
            edges: t.edges,
        }
    }
}

impl Topology {
    pub fn new(circuits: Vec<CircuitSpec>, edges: Vec<(usize, usize)>) -> Result<Self> {
        for (i, c) in circuits.iter().enumerate() {
            if c.units == 0 || c.units > SpikeSymbol::MAX_UNITS {
                return Err(Error::Topology(format!(
                    "circuit {i} has {} units (allowed 1..={})",
                    c.units,
                    SpikeSymbol::MAX_UNITS
                )));
            }
        }
        let mut presynaptic = vec![Vec::new(); circuits.len()];
        for &(pre, post) in &edges {
            if pre >= circuits.len() || post >= circuits.len() {
                return Err(Error::Topology(format!(
                    "edge ({pre}, {post}) references a missing circuit"
                )));
            }
            if circuits[post].role == Role::Input {
                return Err(Error::Topology(format!(
                    "input circuit {post} cannot have incoming edges"
                )));
            }
            if presynaptic[post].contains(&pre) {
                return Err(Error::Topology(format!("duplicate edge ({pre}, {post})")));
            }
            presynaptic[post].push(pre);
        }
        Ok(Topology {
            circuits,
            edges,
            presynaptic,
        })
    }

    /// Classifier wiring: every hidden circuit receives all inputs (and, when
    /// fully connected, all other hidden circuits); every read-out circuit
    /// receives all inputs and all hidden circuits. Ids are assigned inputs first, then hidden, then
    /// one read-out circuit per class.
    pub fn classifier(
        inputs: usize,
        input_units: usize,
        hidden: usize,
        hidden_units: usize,
        classes: usize,
        output_units: usize,
        wiring: Wiring,
    ) -> Result<Self> {
        let mut circuits = Vec::with_capacity(inputs + hidden + classes);
        circuits.extend((0..inputs).map(|_| CircuitSpec {
            units: input_units,
            role: Role::Input,
        }));
        circuits.extend((0..hidden).map(|_| CircuitSpec {
            units: hidden_units,
            role: Role::Hidden,
        }));
        circuits.extend((0..classes).map(|_| CircuitSpec {
            units: output_units,
            role: Role::Visible,
        }));
        let input_ids = 0..inputs;
        let hidden_ids = inputs..inputs + hidden;
        let output_ids = inputs + hidden..inputs + hidden + classes;

        let mut edges = Vec::new();
        for post in hidden_ids.clone() {
            edges.extend(input_ids.clone().map(|pre| (pre, post)));
            if wiring == Wiring::FullyConnected {
                edges.extend(hidden_ids.clone().filter(|&pre| pre != post).map(|pre| (pre, post)));
            }
        }
        for post in output_ids {
            edges.extend(input_ids.clone().map(|pre| (pre, post)));
            edges.extend(hidden_ids.clone().map(|pre| (pre, post)));
        }
        Topology::new(circuits, edges)
    }

    pub fn len(&self) -> usize {
        self.circuits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuits.is_empty()
    }

    pub fn circuits(&self) -> &[CircuitSpec] {
        &self.circuits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn role(&self, i: usize) -> Role {
        self.circuits[i].role
    }

    pub fn units(&self, i: usize) -> usize {
        self.circuits[i].units
    }

    /// Pre-synaptic circuits of `i`, in edge order.
    pub fn presynaptic(&self, i: usize) -> &[usize] {
        &self.presynaptic[i]
    }

    pub fn ids_with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.circuits
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.role == role)
            .map(|(i, _)| i)
    }
}

/// Shape of one circuit's flat parameter vector.
///
/// Layout: bias (`C`), then `W_fb` row-major (`C × C`), then for each
/// pre-synaptic circuit `p` (in topology order) and each filter `k` the
/// row-major block `W_syn[p][k]` (`C × C_p`). Rows index post-synaptic units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub units: usize,
    pub pre_units: Vec<usize>,
    pub filters: usize,
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        let c = self.units;
        c + c * c + self.pre_units.iter().map(|cp| self.filters * c * cp).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        0..self.units
    }

    pub fn feedback_range(&self) -> std::ops::Range<usize> {
        let c = self.units;
        c..c + c * c
    }

    /// Range of `W_syn[pre][k]`, where `pre` indexes the pre-synaptic list.
    pub fn synaptic_range(&self, pre: usize, k: usize) -> std::ops::Range<usize> {
        let c = self.units;
        let mut start = c + c * c;
        start += self.pre_units[..pre]
            .iter()
            .map(|cp| self.filters * c * cp)
            .sum::<usize>();
        let block = c * self.pre_units[pre];
        start += k * block;
        start..start + block
    }
}

/// Learnable parameters `{W_syn, W_fb, ϑ}` of one circuit, stored flat.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl CircuitParams {
    pub fn zeros(layout: ParamLayout) -> Self {
        let values = vec![0.0; layout.len()];
        CircuitParams { layout, values }
    }

    pub fn from_values(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("circuit parameters"));
        }
        Ok(CircuitParams { layout, values })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn bias(&self) -> &[f64] {
        &self.values[self.layout.bias_range()]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        let r = self.layout.bias_range();
        &mut self.values[r]
    }

    pub fn feedback(&self) -> &[f64] {
        &self.values[self.layout.feedback_range()]
    }

    pub fn feedback_mut(&mut self) -> &mut [f64] {
        let r = self.layout.feedback_range();
        &mut self.values[r]
    }

    pub fn synaptic(&self, pre: usize, k: usize) -> &[f64] {
        &self.values[self.layout.synaptic_range(pre, k)]
    }

    pub fn synaptic_mut(&mut self, pre: usize, k: usize) -> &mut [f64] {
        let r = self.layout.synaptic_range(pre, k);
        &mut self.values[r]
    }
}

/// Row-major `rows × cols` matrix times vector, accumulated into `out`.
fn mat_vec_acc(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (row, o) in out.iter_mut().enumerate() {
        let r = &m[row * cols..(row + 1) * cols];
        *o += r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Filtered traces read at one step: `synaptic[j][k]` for every circuit `j`
/// and `somatic[i]` for every circuit `i`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepTraces {
    pub synaptic: Vec<Vec<Vec<f64>>>,
    pub somatic: Vec<Vec<f64>>,
}

/// Membrane potential of one circuit.
///
/// `pre_traces[p][k]` is the `k`th synaptic trace of the `p`th pre-synaptic
/// circuit (length `C_p`), `somatic` the circuit's own feedback trace.
pub fn membrane_potential(
    params: &CircuitParams,
    pre_traces: &[&[Vec<f64>]],
    somatic: &[f64],
) -> Result<Vec<f64>> {
    let layout = params.layout();
    if pre_traces.len() != layout.pre_units.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.pre_units.len(),
            got: pre_traces.len(),
        });
    }
    if somatic.len() != layout.units {
        return Err(Error::DimensionMismatch {
            expected: layout.units,
            got: somatic.len(),
        });
    }
    let mut u = params.bias().to_vec();
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
            if trace.iter().all(|x| *x == 0.0) {
                continue;
            }
            mat_vec_acc(params.synaptic(p, k), trace, &mut u);
        }
    }
    if somatic.iter().any(|x| *x != 0.0) {
        mat_vec_acc(params.feedback(), somatic, &mut u);
    }
    Ok(u)
}

/// Topology, filters and parameters of a WTA-SNN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    topology: Topology,
    filters: FilterBank,
    params: Vec<Option<CircuitParams>>,
}

impl Network {
    /// Network with all parameters zero.
    pub fn new(topology: Topology, filters: FilterBank) -> Self {
        let params = (0..topology.len())
            .map(|i| {
                (topology.role(i) != Role::Input)
                    .then(|| CircuitParams::zeros(Self::layout_for(&topology, &filters, i)))
            })
            .collect();
        Network {
            topology,
            filters,
            params,
        }
    }

    /// Rebuilds a network from stored parameters, checking every shape.
    pub fn from_parts(
        topology: Topology,
        filters: FilterBank,
        params: Vec<Option<CircuitParams>>,
    ) -> Result<Self> {
        if params.len() != topology.len() {
            return Err(Error::DimensionMismatch {
                expected: topology.len(),
                got: params.len(),
            });
        }
        for (i, p) in params.iter().enumerate() {
            match (topology.role(i), p) {
                (Role::Input, None) => {}
                (Role::Input, Some(_)) => {
                    return Err(Error::Topology(format!("input circuit {i} has parameters")))
                }
                (_, None) => {
                    return Err(Error::Topology(format!("circuit {i} is missing parameters")))
                }
                (_, Some(p)) => {
                    let expected = Self::layout_for(&topology, &filters, i);
                    if *p.layout() != expected {
                        return Err(Error::Topology(format!(
                            "circuit {i}: parameter shape does not match topology"
                        )));
                    }
                }
            }
        }
        Ok(Network {
            topology,
            filters,
            params,
        })
    }

    fn layout_for(topology: &Topology, filters: &FilterBank, i: usize) -> ParamLayout {
        ParamLayout {
            units: topology.units(i),
            pre_units: topology
                .presynaptic(i)
                .iter()
                .map(|&j| topology.units(j))
                .collect(),
            filters: filters.len(),
        }
    }

    /// Zero-mean Gaussian weights with standard deviation `std`, zero biases.
    pub fn randomize(&mut self, std: f64, seed: u64) -> Result<()> {
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::InvalidParameter(format!("init std {std}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in self.params.iter_mut().flatten() {
            let bias = p.layout().bias_range();
            for (idx, v) in p.values_mut().iter_mut().enumerate() {
                *v = if bias.contains(&idx) {
                    0.0
                } else {
                    normal.sample(&mut rng)
                };
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn filters(&self) -> &FilterBank {
        &self.filters
    }

    pub fn params(&self, i: usize) -> Option<&CircuitParams> {
        self.params[i].as_ref()
    }

    pub fn params_mut(&mut self, i: usize) -> Option<&mut CircuitParams> {
        self.params[i].as_mut()
    }

    pub fn all_params(&self) -> &[Option<CircuitParams>] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().flatten().map(|p| p.values().len()).sum()
    }

    /// All parameters concatenated in circuit order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.params
            .iter()
            .flatten()
            .flat_map(|p| p.values().iter().copied())
            .collect()
    }

    /// Inverse of [`Network::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut rest = flat;
        for p in self.params.iter_mut().flatten() {
            let (head, tail) = rest.split_at(p.values().len());
            p.values_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Membrane potential of circuit `i` given the traces of the current step.
    pub fn membrane_potential(&self, i: usize, traces: &StepTraces) -> Result<Vec<f64>> {
        let params = self.params[i]
            .as_ref()
            .ok_or_else(|| Error::Topology(format!("circuit {i} has no parameters")))?;
        let pre: Vec<&[Vec<f64>]> = self
            .topology
            .presynaptic(i)
            .iter()
            .map(|&j| traces.synaptic[j].as_slice())
            .collect();
        membrane_potential(params, &pre, &traces.somatic[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    /// Visible circuits are clamped to targets.
    Train,
    /// Visible circuits are sampled from the model.
    FreeRun,
}

/// Dynamic state of a network: spike histories, the current step's traces,
/// potentials and outputs, and one RNG stream per circuit.
#[derive(Clone, Debug)]
pub struct NetworkState {
    buffers: Vec<TraceBuffer>,
    /// Symbols emitted at the previous step; they enter the buffers after the
    /// next step has read its traces.
    pending: Vec<SpikeSymbol>,
    traces: StepTraces,
    potentials: Vec<Vec<f64>>,
    probs: Vec<Option<ProbVector>>,
    spikes: Vec<SpikeSymbol>,
    time: u64,
    rngs: Vec<ChaCha8Rng>,
}

/// Per-circuit RNG: stream `i` of the ChaCha8 generator seeded with `seed`.
pub fn circuit_rng(seed: u64, circuit: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(circuit as u64);
    rng
}

impl NetworkState {
    pub fn new(net: &Network, seed: u64) -> Self {
        let topo = net.topology();
        let rngs = (0..topo.len()).map(|i| circuit_rng(seed, i)).collect();
        Self::with_rngs(net, rngs)
    }

    /// State with explicit per-circuit RNGs (e.g. restored from a checkpoint).
    pub fn with_rngs(net: &Network, rngs: Vec<ChaCha8Rng>) -> Self {
        let topo = net.topology();
        assert_eq!(rngs.len(), topo.len(), "one RNG per circuit");
        let n = topo.len();
        let k = net.filters().len();
        let tau = net.filters().duration();
        NetworkState {
            buffers: topo
                .circuits()
                .iter()
                .map(|c| TraceBuffer::new(c.units, tau))
                .collect(),
            pending: vec![SpikeSymbol::SILENCE; n],
            traces: StepTraces {
                synaptic: topo
                    .circuits()
                    .iter()
                    .map(|c| vec![vec![0.0; c.units]; k])
                    .collect(),
                somatic: topo.circuits().iter().map(|c| vec![0.0; c.units]).collect(),
            },
            potentials: vec![Vec::new(); n],
            probs: vec![None; n],
            spikes: vec![SpikeSymbol::SILENCE; n],
            time: 0,
            rngs,
        }
    }

    /// Clears spike histories and step outputs; RNG streams keep running.
    pub fn reset(&mut self) {
        self.buffers.iter_mut().for_each(TraceBuffer::clear);
        self.pending.iter_mut().for_each(|s| *s = SpikeSymbol::SILENCE);
        for per_k in &mut self.traces.synaptic {
            per_k.iter_mut().flatten().for_each(|x| *x = 0.0);
        }
        self.traces.somatic.iter_mut().flatten().for_each(|x| *x = 0.0);
        self.potentials.iter_mut().for_each(Vec::clear);
        self.probs.iter_mut().for_each(|p| *p = None);
        self.spikes.iter_mut().for_each(|s| *s = SpikeSymbol::SILENCE);
        self.time = 0;
    }

    /// Number of completed steps since the last reset.
    pub fn time(&self) -> u64 {
        self.time
    }

    /// Symbols emitted at the last step.
    pub fn spikes(&self) -> &[SpikeSymbol] {
        &self.spikes
    }

    /// Potentials of the last step (empty for input circuits).
    pub fn potentials(&self) -> &[Vec<f64>] {
        &self.potentials
    }

    /// Spiking distributions of the last step (`None` for input circuits).
    pub fn probs(&self) -> &[Option<ProbVector>] {
        &self.probs
    }

    /// Traces that produced the last step's potentials.
    pub fn traces(&self) -> &StepTraces {
        &self.traces
    }

    pub fn rngs(&self) -> &[ChaCha8Rng] {
        &self.rngs
    }

    fn check_clamp(net: &Network, clamp: &[Option<SpikeSymbol>], mode: StepMode) -> Result<()> {
        let topo = net.topology();
        if clamp.len() != topo.len() {
            return Err(Error::DimensionMismatch {
                expected: topo.len(),
                got: clamp.len(),
            });
        }
        for (i, c) in clamp.iter().enumerate() {
            let clamped = match (topo.role(i), mode) {
                (Role::Input, _) | (Role::Visible, StepMode::Train) => true,
                (Role::Hidden, _) | (Role::Visible, StepMode::FreeRun) => false,
            };
            match (clamped, c) {
                (true, None) => {
                    return Err(Error::Clamp {
                        circuit: i,
                        reason: "missing clamp entry".into(),
                    })
                }
                (false, Some(_)) => {
                    return Err(Error::Clamp {
                        circuit: i,
                        reason: "circuit is sampled and cannot be clamped".into(),
                    })
                }
                (true, Some(s)) => s.check(topo.units(i)).map_err(|e| Error::Clamp {
                    circuit: i,
                    reason: e.to_string(),
                })?,
                (false, None) => {}
            }
        }
        Ok(())
    }

    /// Advances the network by one step.
    ///
    /// `clamp[i]` must be `Some` exactly for input circuits and, in training
    /// mode, visible circuits.
    pub fn step(&mut self, net: &Network, clamp: &[Option<SpikeSymbol>], mode: StepMode) -> Result<()> {
        Self::check_clamp(net, clamp, mode)?;
        let topo = net.topology();
        let filters = net.filters();

        for (j, buf) in self.buffers.iter().enumerate() {
            for (k, taps) in filters.synaptic().iter().enumerate() {
                buf.trace_into(taps, &mut self.traces.synaptic[j][k]);
            }
            buf.trace_into(filters.somatic(), &mut self.traces.somatic[j]);
        }

        for i in 0..topo.len() {
            if topo.role(i) == Role::Input {
                continue;
            }
            let u = net.membrane_potential(i, &self.traces)?;
            self.probs[i] = Some(wta_softmax(&u)?);
            self.potentials[i] = u;
        }

        for i in 0..topo.len() {
            self.spikes[i] = match clamp[i] {
                Some(s) => s,
                None => {
                    let p = self.probs[i].as_ref().expect("learnable circuit has probabilities");
                    sample_spike(p, &mut self.rngs[i])
                }
            };
        }

        for (buf, s) in self.buffers.iter_mut().zip(&self.pending) {
            buf.push(*s)?;
        }
        self.pending.copy_from_slice(&self.spikes);
        self.time += 1;
        Ok(())
    }
}

/// Index of the read-out circuit with the most spikes over the window,
/// counting spikes at every unit. Ties go to the lowest index.
pub fn predict_class(output_trains: &[Vec<SpikeSymbol>]) -> Result<usize> {
    if output_trains.is_empty() || output_trains.iter().all(Vec::is_empty) {
        return Err(Error::Empty("prediction window"));
    }
    let counts: Vec<usize> = output_trains
        .iter()
        .map(|train| train.iter().filter(|s| s.is_spike()).count())
        .collect();
    Ok(argmax_first(&counts))
}

/// First index of the maximum.
pub(crate) fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
