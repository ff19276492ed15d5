//! Brute-force references for checking the learning rule.
//!
//! Everything here is written for clarity over speed and shares no forward
//! code with [`crate::network`] or [`crate::learning`]: potentials are
//! rebuilt by direct convolution over the full spike history and the
//! parameter offsets are recomputed from the shapes.

use crate::error::{Error, Result};
use crate::learning::{Example, Learner, LearnerConfig};
use crate::mathcore::SpikeSymbol;
use crate::network::{Network, NetworkState, Role};

/// Upper bound on the number of hidden sequences [`exact_elbo`] may visit.
pub const MAX_ENUMERATED_SEQUENCES: u128 = 100_000;

/// Central finite differences `(f(p + h e_n) − f(p − h e_n)) / 2h`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("finite-difference step {h} must be > 0")));
    }
    let mut p = params.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for n in 0..p.len() {
        let orig = p[n];
        p[n] = orig + h;
        let plus = f(&p);
        p[n] = orig - h;
        let minus = f(&p);
        p[n] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// A network small enough for exhaustive enumeration over `horizon` steps.
#[derive(Clone, Debug)]
pub struct TinyNetSpec {
    net: Network,
    horizon: usize,
}

impl TinyNetSpec {
    /// Fails when `Π_{i∈H} (C_i + 1)^T` exceeds [`MAX_ENUMERATED_SEQUENCES`].
    pub fn new(net: Network, horizon: usize) -> Result<Self> {
        let count = Self::count(&net, horizon);
        if count > MAX_ENUMERATED_SEQUENCES {
            return Err(Error::EnumerationTooLarge(count));
        }
        Ok(TinyNetSpec { net, horizon })
    }

    fn count(net: &Network, horizon: usize) -> u128 {
        let topo = net.topology();
        let mut count: u128 = 1;
        for i in topo.ids_with_role(Role::Hidden) {
            for _ in 0..horizon {
                count = count.saturating_mul(topo.units(i) as u128 + 1);
            }
        }
        count
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of hidden sequences of length `horizon`.
    pub fn sequences(&self) -> u128 {
        Self::count(&self.net, self.horizon)
    }
}

/// Offset of every parameter block of circuit `i` inside the flat vector.
struct Offsets {
    start: usize,
    units: usize,
    feedback: usize,
    synaptic: Vec<Vec<usize>>,
    len: usize,
}

fn offsets(net: &Network) -> Vec<Option<Offsets>> {
    let topo = net.topology();
    let k = net.filters().len();
    let mut start = 0;
    (0..topo.len())
        .map(|i| {
            if topo.role(i) == Role::Input {
                return None;
            }
            let c = topo.units(i);
            let mut at = c + c * c;
            let synaptic = topo
                .presynaptic(i)
                .iter()
                .map(|&j| {
                    (0..k)
                        .map(|_| {
                            let o = at;
                            at += c * topo.units(j);
                            o
                        })
                        .collect()
                })
                .collect();
            let o = Offsets {
                start,
                units: c,
                feedback: c,
                synaptic,
                len: at,
            };
            start += at;
            Some(o)
        })
        .collect()
}

fn one_hot(s: SpikeSymbol, units: usize) -> Vec<f64> {
    let mut v = vec![0.0; units];
    if s.is_spike() {
        v[s.code() as usize - 1] = 1.0;
    }
    v
}

/// Trace of `history` read at step `t` (0-based): `Σ_δ taps[δ] · s_{t−1−δ}`.
fn filtered(taps: &[f64], history: &[SpikeSymbol], t: usize, units: usize) -> Vec<f64> {
    let mut out = vec![0.0; units];
    for (d, &w) in taps.iter().enumerate() {
        let delta = d + 1;
        if t > delta {
            let s = history[t - 1 - delta];
            if s.is_spike() {
                out[s.code() as usize - 1] += w;
            }
        }
    }
    out
}

/// `log p(s | u)` with its own log-sum-exp.
fn log_softmax_prob(s: SpikeSymbol, u: &[f64]) -> (f64, Vec<f64>) {
    let m = u.iter().fold(0.0f64, |a, &b| a.max(b));
    let z = (-m).exp() + u.iter().map(|x| (x - m).exp()).sum::<f64>();
    let log_z = m + z.ln();
    let sigma: Vec<f64> = u.iter().map(|x| (x - log_z).exp()).collect();
    let lp = match s.code() {
        0 => -log_z,
        c => u[c as usize - 1] - log_z,
    };
    (lp, sigma)
}

/// Forward quantities of one circuit at one step of a fully specified sequence.
struct CircuitStep {
    log_p: f64,
    /// `∇ log p` scattered into a flat gradient of the whole network.
    grad: Vec<(usize, f64)>,
}

fn circuit_step(net: &Network, offs: &Offsets, seq: &[Vec<SpikeSymbol>], i: usize, t: usize) -> CircuitStep {
    let topo = net.topology();
    let params = net.params(i).expect("learnable circuit").values();
    assert_eq!(params.len(), offs.len, "parameter block of circuit {i}");
    let c = offs.units;
    let history = |j: usize| seq.iter().map(|row| row[j]).collect::<Vec<_>>();

    let mut u: Vec<f64> = params[..c].to_vec();
    let mut features: Vec<(usize, Vec<f64>)> = Vec::new();
    let fb = filtered(net.filters().somatic().as_slice(), &history(i), t, c);
    features.push((offs.feedback, fb));
    for (p, &j) in topo.presynaptic(i).iter().enumerate() {
        let hist = history(j);
        for (k, taps) in net.filters().synaptic().iter().enumerate() {
            features.push((offs.synaptic[p][k], filtered(taps.as_slice(), &hist, t, topo.units(j))));
        }
    }
    for (off, x) in &features {
        let cols = x.len();
        for (row, ur) in u.iter_mut().enumerate() {
            for (col, xv) in x.iter().enumerate() {
                *ur += params[off + row * cols + col] * xv;
            }
        }
    }

    let s = seq[t][i];
    let (log_p, sigma) = log_softmax_prob(s, &u);
    let target = one_hot(s, c);
    let post: Vec<f64> = (0..c).map(|r| target[r] - sigma[r]).collect();
    let mut grad = Vec::new();
    for (r, &g) in post.iter().enumerate() {
        grad.push((offs.start + r, g));
    }
    for (off, x) in &features {
        let cols = x.len();
        for (row, &g) in post.iter().enumerate() {
            for (col, xv) in x.iter().enumerate() {
                grad.push((offs.start + off + row * cols + col, g * xv));
            }
        }
    }
    CircuitStep { log_p, grad }
}

/// `Σ_t Σ_i log p(s_{i,t} | u_{i,t})` over every learnable circuit of a fully
/// specified sequence (`seq[t][i]`).
pub fn sequence_log_likelihood(net: &Network, seq: &[Vec<SpikeSymbol>]) -> Result<f64> {
    check_sequence(net, seq)?;
    let offs = offsets(net);
    let mut total = 0.0;
    for t in 0..seq.len() {
        for (i, o) in offs.iter().enumerate() {
            if let Some(o) = o {
                total += circuit_step(net, o, seq, i, t).log_p;
            }
        }
    }
    Ok(total)
}

fn check_sequence(net: &Network, seq: &[Vec<SpikeSymbol>]) -> Result<()> {
    let topo = net.topology();
    for row in seq {
        if row.len() != topo.len() {
            return Err(Error::DimensionMismatch {
                expected: topo.len(),
                got: row.len(),
            });
        }
        for (i, s) in row.iter().enumerate() {
            s.check(topo.units(i))?;
        }
    }
    Ok(())
}

/// Value and exact gradient of the discounted learning criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Elbo {
    pub value: f64,
    /// Flat gradient in the order of [`Network::flat_params`].
    pub gradient: Vec<f64>,
    /// `Σ_h p(h ‖ x)`; one up to rounding.
    pub total_probability: f64,
    pub sequences: u128,
}

/// Exhaustive expectation over hidden sequences of
/// `Σ_t γ^{T−t} ℓ_t` under the causally conditioned hidden distribution.
///
/// The gradient is `Σ_h p(h‖x) [∇L(h) + L(h) ∇ log p(h‖x)]`.
pub fn exact_elbo(tiny: &TinyNetSpec, x: &Example, alpha: f64, r: f64, gamma: f64) -> Result<Elbo> {
    exact_elbo_ordered(tiny, x, alpha, r, gamma, false)
}

fn exact_elbo_ordered(tiny: &TinyNetSpec, x: &Example, alpha: f64, r: f64, gamma: f64, reverse: bool) -> Result<Elbo> {
    let net = &tiny.net;
    let topo = net.topology();
    let horizon = tiny.horizon;
    if x.len() != horizon {
        return Err(Error::DimensionMismatch {
            expected: horizon,
            got: x.len(),
        });
    }

    // clamped symbols; hidden slots are filled per enumerated sequence
    let mut seq = vec![vec![SpikeSymbol::SILENCE; topo.len()]; horizon];
    for (t, row) in seq.iter_mut().enumerate() {
        let (mut n_in, mut n_vis) = (0, 0);
        for (i, slot) in row.iter_mut().enumerate() {
            match topo.role(i) {
                Role::Input => {
                    *slot = x.inputs[t][n_in];
                    n_in += 1;
                }
                Role::Visible => {
                    *slot = x.targets[t][n_vis];
                    n_vis += 1;
                }
                Role::Hidden => {}
            }
        }
    }
    check_sequence(net, &seq)?;

    let hidden: Vec<usize> = topo.ids_with_role(Role::Hidden).collect();
    // digit n ↔ (hidden[n / T], n % T); the last digit varies fastest
    let radix: Vec<u8> = hidden
        .iter()
        .flat_map(|&i| std::iter::repeat_n(topo.units(i) as u8 + 1, horizon))
        .collect();
    let mut digits = vec![0u8; radix.len()];
    let offs = offsets(net);
    let n_params = net.num_params();

    let mut order: Vec<u128> = (0..tiny.sequences()).collect();
    if reverse {
        order.reverse();
    }
    let mut value = 0.0;
    let mut total_probability = 0.0;
    let mut gradient = vec![0.0; n_params];
    let mut grad_l = vec![0.0; n_params];
    let mut grad_logp = vec![0.0; n_params];
    for &code in &order {
        let mut rest = code;
        for (d, &b) in digits.iter_mut().zip(&radix).rev() {
            *d = (rest % b as u128) as u8;
            rest /= b as u128;
        }
        for (n, &d) in digits.iter().enumerate() {
            seq[n % horizon][hidden[n / horizon]] = SpikeSymbol::from_code(d);
        }

        grad_l.iter_mut().for_each(|g| *g = 0.0);
        grad_logp.iter_mut().for_each(|g| *g = 0.0);
        let mut log_p_h = 0.0;
        let mut big_l = 0.0;
        for t in 0..horizon {
            let weight = gamma.powi((horizon - 1 - t) as i32);
            let mut ell = 0.0;
            for (i, o) in offs.iter().enumerate() {
                let Some(o) = o else { continue };
                let step = circuit_step(net, o, &seq, i, t);
                match topo.role(i) {
                    Role::Visible => {
                        ell += step.log_p;
                        for &(n, g) in &step.grad {
                            grad_l[n] += weight * g;
                        }
                    }
                    Role::Hidden => {
                        let h = seq[t][i];
                        let units = topo.units(i) as f64;
                        let log_r = if h.is_spike() { (r / units).ln() } else { (1.0 - r).ln() };
                        if alpha != 0.0 {
                            ell -= alpha * (step.log_p - log_r);
                            for &(n, g) in &step.grad {
                                grad_l[n] -= weight * alpha * g;
                            }
                        }
                        log_p_h += step.log_p;
                        for &(n, g) in &step.grad {
                            grad_logp[n] += g;
                        }
                    }
                    Role::Input => {}
                }
            }
            big_l += weight * ell;
        }
        let p = log_p_h.exp();
        total_probability += p;
        value += p * big_l;
        for ((g, gl), gp) in gradient.iter_mut().zip(&grad_l).zip(&grad_logp) {
            *g += p * (gl + big_l * gp);
        }
    }
    Ok(Elbo {
        value,
        gradient,
        total_probability,
        sequences: tiny.sequences(),
    })
}

/// Componentwise sample mean and standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

/// Mean of `n` independent episodes of the online estimator at the last
/// step of `x`, with `κ = 1` and no baseline, so that each episode is an
/// unbiased sample of the [`exact_elbo`] gradient. Parameters are held fixed.
pub fn mc_gradient_mean(net: &Network, x: &Example, alpha: f64, r: f64, gamma: f64, n: usize, seed: u64) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n}")));
    }
    let config = LearnerConfig {
        eta: 0.0,
        gamma,
        kappa: 1.0,
        kappa_b: 1.0,
        alpha,
        r,
        halve_lr_each_epoch: false,
        use_baseline: false,
        grad_clip: None,
    };
    let mut net = net.clone();
    let mut learner = Learner::new(&net, config)?;
    let mut state = NetworkState::new(&net, seed);

    let d = net.num_params();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for episode in 0..n {
        state.reset();
        learner.reset();
        for t in 0..x.len() {
            let clamp = crate::learning::clamp_for(net.topology(), x, t, crate::network::StepMode::Train)?;
            crate::learning::train_step(&mut net, &mut state, &mut learner, &clamp)?;
        }
        let sample = learner.flat_direction();
        let k = (episode + 1) as f64;
        for ((m, s), v) in mean.iter_mut().zip(m2.iter_mut()).zip(sample) {
            let delta = v - *m;
            *m += delta / k;
            *s += delta * (v - *m);
        }
    }
    let nf = n as f64;
    let stderr = m2.iter().map(|s| (s / (nf - 1.0) / nf).sqrt()).collect();
    Ok(McEstimate { mean, stderr, samples: n })
}
