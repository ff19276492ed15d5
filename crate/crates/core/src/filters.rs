//! Finite-duration spike kernels and the ring buffers that turn spike
//! histories into filtered traces.
//!
//! A kernel of duration `τ` is stored as taps for lags `δ = 1..=τ`. The trace
//! at buffer time `t` is the causal convolution
//!
//! ```text
//! trace_t = Σ_{δ=1}^{τ} taps[δ] · s_{t−δ}
//! ```
//!
//! so the spike written at time `t` itself never contributes at time `t`.
//! The network reads traces one step late (`trace_{t−1}` drives `u_t`), which
//! means a spike emitted at `t'` first reaches a membrane potential at `t'+2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mathcore::SpikeSymbol;

/// Kernel taps for lags `1..=τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Taps(Vec<f64>);

impl Taps {
    /// Wraps explicit taps; `taps[0]` is the weight at lag 1.
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("filter duration must be ≥ 1".into()));
        }
        if taps.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("filter taps"));
        }
        Ok(Taps(taps))
    }

    pub fn duration(&self) -> usize {
        self.0.len()
    }

    /// Tap at lag `delta`; zero outside `1..=τ`.
    pub fn at(&self, delta: usize) -> f64 {
        if delta == 0 {
            0.0
        } else {
            self.0.get(delta - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_duration(tau: usize) -> Result<()> {
    if tau == 0 {
        return Err(Error::InvalidParameter("filter duration must be ≥ 1".into()));
    }
    Ok(())
}

/// `taps[δ] = exp(−δ/τ1) − exp(−δ/τ2)` for `δ = 1..=τ`.
pub fn make_exp_diff_filter(tau1: f64, tau2: f64, tau: usize) -> Result<Taps> {
    check_duration(tau)?;
    if !(tau1 > 0.0 && tau2 > 0.0) || !tau1.is_finite() || !tau2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time constants must be positive, got τ1={tau1}, τ2={tau2}"
        )));
    }
    if tau1 < tau2 {
        return Err(Error::InvalidParameter(format!(
            "exp-diff filter needs τ1 ≥ τ2, got τ1={tau1}, τ2={tau2}"
        )));
    }
    if tau1 == tau2 {
        log::warn!("exp-diff filter with τ1 = τ2 = {tau1} is identically zero");
    }
    Taps::new(
        (1..=tau)
            .map(|d| {
                let d = d as f64;
                (-d / tau1).exp() - (-d / tau2).exp()
            })
            .collect(),
    )
}

/// Refractory feedback kernel `taps[δ] = −exp(−δ/τ3)`.
pub fn make_somatic_filter(tau3: f64, tau: usize) -> Result<Taps> {
    check_duration(tau)?;
    if !(tau3 > 0.0) || !tau3.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "somatic time constant must be positive, got {tau3}"
        )));
    }
    Taps::new((1..=tau).map(|d| -(-(d as f64) / tau3).exp()).collect())
}

/// `K` raised-cosine bumps over lags `1..=τ`.
///
/// Bump `k` (1-based) peaks at `round(k·τ/(K+1))` and has half-width
/// `w = τ/(K+1)`: `0.5·(1 + cos(π·(δ − peak)/w))` for `|δ − peak| < w`, zero
/// elsewhere.
pub fn make_raised_cosine_bank(k: usize, tau: usize) -> Result<Vec<Taps>> {
    check_duration(tau)?;
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one filter".into()));
    }
    if k > tau {
        return Err(Error::InvalidParameter(format!(
            "{k} raised-cosine filters do not fit in duration {tau}"
        )));
    }
    let width = tau as f64 / (k + 1) as f64;
    (1..=k)
        .map(|bump| {
            let peak = (bump as f64 * tau as f64 / (k + 1) as f64).round();
            Taps::new(
                (1..=tau)
                    .map(|d| {
                        let offset = d as f64 - peak;
                        if offset.abs() < width {
                            0.5 * (1.0 + (PI * offset / width).cos())
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

/// `K` synaptic kernels and one somatic kernel, all of the same duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    synaptic: Vec<Taps>,
    somatic: Taps,
}

impl FilterBank {
    pub fn new(synaptic: Vec<Taps>, somatic: Taps) -> Result<Self> {
        if synaptic.is_empty() {
            return Err(Error::InvalidParameter(
                "filter bank needs at least one synaptic filter".into(),
            ));
        }
        let tau = somatic.duration();
        if let Some(bad) = synaptic.iter().find(|t| t.duration() != tau) {
            return Err(Error::InvalidParameter(format!(
                "all filters must share one duration: somatic has {tau}, a synaptic filter has {}",
                bad.duration()
            )));
        }
        Ok(FilterBank { synaptic, somatic })
    }

    pub fn synaptic(&self) -> &[Taps] {
        &self.synaptic
    }

    pub fn somatic(&self) -> &Taps {
        &self.somatic
    }

    /// Number of synaptic filters `K`.
    pub fn len(&self) -> usize {
        self.synaptic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synaptic.is_empty()
    }

    /// Shared duration `τ`.
    pub fn duration(&self) -> usize {
        self.somatic.duration()
    }
}

/// The last `τ` symbols emitted by one circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceBuffer {
    units: usize,
    slots: Vec<SpikeSymbol>,
    /// Slot that the next push overwrites, i.e. the oldest entry.
    cursor: usize,
    time: u64,
}

impl TraceBuffer {
    pub fn new(units: usize, duration: usize) -> Self {
        assert!(duration > 0, "trace buffer duration must be ≥ 1");
        TraceBuffer {
            units,
            slots: vec![SpikeSymbol::SILENCE; duration],
            cursor: 0,
            time: 0,
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn duration(&self) -> usize {
        self.slots.len()
    }

    /// Number of symbols pushed so far (the buffer's current time).
    pub fn time(&self) -> u64 {
        self.time
    }

    /// Records `s` as the symbol at the current time and advances the clock.
    pub fn push(&mut self, s: SpikeSymbol) -> Result<()> {
        s.check(self.units).map_err(|_| Error::DimensionMismatch {
            expected: self.units,
            got: s.unit_index().map_or(0, |c| c + 1),
        })?;
        self.slots[self.cursor] = s;
        self.cursor = (self.cursor + 1) % self.slots.len();
        self.time += 1;
        Ok(())
    }

    /// Symbol emitted `delta` steps before the current time (`1 ≤ delta ≤ τ`).
    pub fn lagged(&self, delta: usize) -> SpikeSymbol {
        let n = self.slots.len();
        if delta == 0 || delta > n || delta as u64 > self.time {
            return SpikeSymbol::SILENCE;
        }
        self.slots[(self.cursor + n - delta) % n]
    }

    /// Writes `Σ_δ taps[δ] · s_{t−δ}` into `out` (length `units`).
    pub fn trace_into(&self, taps: &Taps, out: &mut [f64]) {
        assert_eq!(out.len(), self.units, "trace output length");
        out.iter_mut().for_each(|x| *x = 0.0);
        let span = taps.duration().min(self.slots.len());
        for delta in 1..=span {
            if let Some(c) = self.lagged(delta).unit_index() {
                out[c] += taps.at(delta);
            }
        }
    }

    pub fn trace(&self, taps: &Taps) -> Vec<f64> {
        let mut out = vec![0.0; self.units];
        self.trace_into(taps, &mut out);
        out
    }

    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = SpikeSymbol::SILENCE);
        self.cursor = 0;
        self.time = 0;
    }
}

/// Filtered trace of a pre-synaptic circuit's history through one synaptic kernel.
pub fn synaptic_trace(buf: &TraceBuffer, taps: &Taps) -> Vec<f64> {
    buf.trace(taps)
}

/// Filtered trace of a circuit's own history through the somatic kernel.
pub fn somatic_trace(buf: &TraceBuffer, taps: &Taps) -> Vec<f64> {
    buf.trace(taps)
}
