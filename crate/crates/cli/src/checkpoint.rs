//! JSON checkpoints with explicit array shapes.
//!
//! Each learnable circuit is stored as nested arrays: `bias[c]`,
//! `feedback[c][c']` and `synaptic[p][k][c][c_p]`, where `p` runs over the
//! circuit's pre-synaptic list in topology order.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use wtasnn::filters::FilterBank;
use wtasnn::network::{CircuitParams, Network, Topology};

use crate::config::ExperimentConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredCircuit {
    pub units: usize,
    pub presynaptic: Vec<usize>,
    pub bias: Vec<f64>,
    pub feedback: Vec<Vec<f64>>,
    pub synaptic: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Completed epochs.
    pub epoch: usize,
    pub examples_seen: usize,
    /// Learning rate in force for the next epoch.
    pub eta: f64,
    pub topology: Topology,
    pub filters: FilterBank,
    /// One entry per circuit; `null` for input circuits.
    pub circuits: Vec<Option<StoredCircuit>>,
    /// Per-circuit sampling generators.
    pub rngs: Vec<ChaCha8Rng>,
}

fn rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols.max(1)).map(<[f64]>::to_vec).collect()
}

impl StoredCircuit {
    fn from_params(p: &CircuitParams, presynaptic: &[usize]) -> Self {
        let layout = p.layout();
        StoredCircuit {
            units: layout.units,
            presynaptic: presynaptic.to_vec(),
            bias: p.bias().to_vec(),
            feedback: rows(p.feedback(), layout.units),
            synaptic: (0..layout.pre_units.len())
                .map(|pre| {
                    (0..layout.filters)
                        .map(|k| rows(p.synaptic(pre, k), layout.pre_units[pre]))
                        .collect()
                })
                .collect(),
        }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = self.bias.clone();
        v.extend(self.feedback.iter().flatten());
        v.extend(self.synaptic.iter().flatten().flatten().flatten());
        v
    }
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, net: &Network, rngs: &[ChaCha8Rng], epoch: usize, examples_seen: usize, eta: f64) -> Self {
        let topo = net.topology();
        Checkpoint {
            format: FORMAT_VERSION,
            config: config.resolved(),
            config_hash: config.hash(),
            epoch,
            examples_seen,
            eta,
            topology: topo.clone(),
            filters: net.filters().clone(),
            circuits: (0..topo.len())
                .map(|i| net.params(i).map(|p| StoredCircuit::from_params(p, topo.presynaptic(i))))
                .collect(),
            rngs: rngs.to_vec(),
        }
    }

    /// Rebuilds the network, checking every stored shape against the
    /// topology.
    pub fn network(&self) -> anyhow::Result<Network> {
        let mut net = Network::new(self.topology.clone(), self.filters.clone());
        for (i, stored) in self.circuits.iter().enumerate() {
            match (net.params_mut(i), stored) {
                (None, None) => {}
                (Some(p), Some(s)) => {
                    let layout = p.layout().clone();
                    let shape_ok = s.units == layout.units
                        && s.presynaptic == self.topology.presynaptic(i)
                        && s.bias.len() == layout.units
                        && s.feedback.len() == layout.units
                        && s.feedback.iter().all(|r| r.len() == layout.units)
                        && s.synaptic.len() == layout.pre_units.len()
                        && s.synaptic.iter().zip(&layout.pre_units).all(|(per_k, &cp)| {
                            per_k.len() == layout.filters
                                && per_k.iter().all(|m| m.len() == layout.units && m.iter().all(|r| r.len() == cp))
                        });
                    anyhow::ensure!(shape_ok, "circuit {i}: stored arrays do not match the topology");
                    *p = CircuitParams::from_values(layout, s.flatten())?;
                }
                _ => anyhow::bail!("circuit {i}: parameters present for the wrong role"),
            }
        }
        anyhow::ensure!(
            self.rngs.len() == self.topology.len(),
            "expected {} generators, found {}",
            self.topology.len(),
            self.rngs.len()
        );
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let cp: Checkpoint = serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        anyhow::ensure!(cp.format == FORMAT_VERSION, "unsupported checkpoint format {}", cp.format);
        Ok(cp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wtasnn::network::{NetworkState, Role, StepMode, Wiring};
    use wtasnn::SpikeSymbol;

    #[test]
    fn round_trip_is_bit_exact() {
        let config = ExperimentConfig::default();
        let topo = Topology::classifier(3, 2, 2, 2, 2, 2, Wiring::FullyConnected).unwrap();
        let mut net = Network::new(topo, config.filter_bank().unwrap());
        net.randomize(0.37, 5).unwrap();
        let state = NetworkState::new(&net, 9);
        let cp = Checkpoint::new(&config, &net, state.rngs(), 2, 40, 0.01);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        cp.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let restored = loaded.network().unwrap();
        assert_eq!(restored, net);
        assert_eq!(loaded.rngs, cp.rngs);

        let probe = |n: &Network| {
            let mut s = NetworkState::with_rngs(n, loaded.rngs.clone());
            let mut out = Vec::new();
            for t in 0..30u8 {
                let clamp: Vec<_> = (0..n.topology().len())
                    .map(|i| (n.topology().role(i) == Role::Input).then(|| SpikeSymbol::from_code((t + i as u8) % 3)))
                    .collect();
                s.step(n, &clamp, StepMode::FreeRun).unwrap();
                out.push(s.potentials().to_vec());
            }
            out
        };
        assert_eq!(probe(&net), probe(&restored));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let config = ExperimentConfig::default();
        let topo = Topology::classifier(1, 2, 1, 2, 1, 2, Wiring::FullyConnected).unwrap();
        let net = Network::new(topo, config.filter_bank().unwrap());
        let state = NetworkState::new(&net, 0);
        let mut cp = Checkpoint::new(&config, &net, state.rngs(), 0, 0, 0.1);
        cp.circuits[1].as_mut().unwrap().feedback.pop();
        assert!(cp.network().is_err());
    }
}
