//! Scalar and vector primitives shared by the rest of the crate.
//!
//! Everything here is `f64`. The negative cross-entropy of two non-negative
//! vectors `a`, `b` with sums at most one is
//!
//! ```text
//! H̄(a, b) = Σ_x a_x log b_x + (1 − Σ_x a_x) log(1 − Σ_x b_x)
//! ```
//!
//! where the second term carries the implicit "silence" mass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log arguments below this value are clamped before taking the logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

/// Tolerance on `Σ p ≤ 1` for probability vectors.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Output of one WTA circuit at one time step: silence or a spike at one unit.
///
/// Stored as a code: `0` is silence and `c + 1` is a spike at (zero-based)
/// unit `c`. The same code is used by the on-disk sequence cache.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpikeSymbol(u8);

impl SpikeSymbol {
    pub const SILENCE: SpikeSymbol = SpikeSymbol(0);

    /// Largest supported number of units per circuit.
    pub const MAX_UNITS: usize = u8::MAX as usize;

    /// Spike at zero-based unit `c`.
    pub fn unit(c: usize) -> Self {
        assert!(c < Self::MAX_UNITS, "unit index {c} out of range");
        SpikeSymbol(c as u8 + 1)
    }

    pub fn from_code(code: u8) -> Self {
        SpikeSymbol(code)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn is_spike(self) -> bool {
        self.0 != 0
    }

    /// Zero-based unit index, `None` for silence.
    pub fn unit_index(self) -> Option<usize> {
        self.0.checked_sub(1).map(usize::from)
    }

    /// Checks that the symbol is valid for a circuit with `units` units.
    pub fn check(self, units: usize) -> Result<()> {
        match self.unit_index() {
            Some(c) if c >= units => Err(Error::InvalidParameter(format!(
                "spike at unit {c} in a circuit with {units} units"
            ))),
            _ => Ok(()),
        }
    }

    /// All-zero vector for silence, standard basis vector otherwise.
    pub fn to_vector(self, units: usize) -> Vec<f64> {
        let mut v = vec![0.0; units];
        if let Some(c) = self.unit_index() {
            v[c] = 1.0;
        }
        v
    }
}

/// Per-unit spiking probabilities of one circuit plus the implicit silence mass.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    units: Vec<f64>,
    silence: f64,
}

impl ProbVector {
    /// Builds a probability vector from unit probabilities; silence takes the
    /// remaining mass.
    pub fn new(units: Vec<f64>) -> Result<Self> {
        if units.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = units.iter().sum();
        if total > 1.0 + SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total} > 1"
            )));
        }
        Ok(ProbVector {
            units,
            silence: (1.0 - total).max(0.0),
        })
    }

    pub fn units(&self) -> &[f64] {
        &self.units
    }

    pub fn silence(&self) -> f64 {
        self.silence
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Probability of emitting `s`.
    pub fn prob(&self, s: SpikeSymbol) -> f64 {
        match s.unit_index() {
            Some(c) => self.units[c],
            None => self.silence,
        }
    }

    /// Total probability of emitting any spike.
    pub fn spike_mass(&self) -> f64 {
        self.units.iter().sum()
    }
}

fn guarded_ln(x: f64, clamped: &mut bool) -> f64 {
    if x < LOG_FLOOR {
        *clamped = true;
        LOG_FLOOR.ln()
    } else {
        x.ln()
    }
}

/// Result of a guarded cross-entropy evaluation. `clamped` is set when a log
/// argument fell below [`LOG_FLOOR`] while paired with positive mass, i.e. the
/// exact value would have been `−∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Guarded {
    pub value: f64,
    pub clamped: bool,
}

fn check_sub_distribution(v: &[f64], what: &'static str) -> Result<f64> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    if v.iter().any(|x| *x < 0.0) {
        return Err(Error::InvalidParameter(format!("{what} has negative entries")));
    }
    let total: f64 = v.iter().sum();
    if total > 1.0 + SUM_TOLERANCE {
        return Err(Error::InvalidParameter(format!("{what} sums to {total} > 1")));
    }
    Ok(total)
}

/// Negative cross-entropy `H̄(a, b)`, reporting whether the log guard fired.
pub fn neg_cross_entropy_guarded(a: &[f64], b: &[f64]) -> Result<Guarded> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let sum_a = check_sub_distribution(a, "first argument")?;
    let sum_b = check_sub_distribution(b, "second argument")?;

    let mut clamped = false;
    let mut value = 0.0;
    for (&ax, &bx) in a.iter().zip(b) {
        // 0 · log 0 = 0
        if ax > 0.0 {
            value += ax * guarded_ln(bx, &mut clamped);
        }
    }
    let rest_a = 1.0 - sum_a;
    if rest_a > 0.0 {
        value += rest_a * guarded_ln((1.0 - sum_b).max(0.0), &mut clamped);
    }
    Ok(Guarded { value, clamped })
}

/// Negative cross-entropy `H̄(a, b)`. Log arguments are clamped at
/// [`LOG_FLOOR`], so an impossible outcome yields a large negative finite
/// value instead of `−∞`.
pub fn neg_cross_entropy(a: &[f64], b: &[f64]) -> Result<f64> {
    let g = neg_cross_entropy_guarded(a, b)?;
    if g.clamped {
        log::debug!("neg_cross_entropy: log argument clamped at {LOG_FLOOR:e}");
    }
    Ok(g.value)
}

/// `KL(a‖b) = H̄(a, a) − H̄(a, b)`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(neg_cross_entropy(a, a)? - neg_cross_entropy(a, b)?)
}

/// Discounted running sum `⟨f_t⟩ = decay · ⟨f_{t−1}⟩ + f_t` with `⟨f_0⟩ = 0`,
/// applied elementwise.
///
/// After `t` steps the accumulator equals `Σ_{t'=0}^{t−1} decay^{t'} f_{t−t'}`.
/// A decay of exactly 1 gives the plain running sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalAverage {
    value: Vec<f64>,
    decay: f64,
}

impl TemporalAverage {
    pub fn new(len: usize, decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidParameter(format!(
                "decay {decay} outside [0, 1]"
            )));
        }
        Ok(TemporalAverage {
            value: vec![0.0; len],
            decay,
        })
    }

    pub fn step(&mut self, f: &[f64]) {
        assert_eq!(f.len(), self.value.len(), "temporal average length");
        for (acc, x) in self.value.iter_mut().zip(f) {
            *acc = self.decay * *acc + x;
        }
    }

    /// Step with the input given per element by `f(i)`.
    pub fn step_with(&mut self, mut f: impl FnMut(usize) -> f64) {
        for (i, acc) in self.value.iter_mut().enumerate() {
            *acc = self.decay * *acc + f(i);
        }
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn reset(&mut self) {
        self.value.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Shift applied before exponentiation: the implicit silence logit 0 takes
/// part in the maximum.
fn logit_shift(u: &[f64]) -> f64 {
    u.iter().copied().fold(0.0, f64::max)
}

/// WTA softmax: `σ_c(u) = exp(u_c) / (1 + Σ_c' exp(u_c'))`, silence mass
/// `1 / (1 + Σ_c' exp(u_c'))`.
pub fn wta_softmax(u: &[f64]) -> Result<ProbVector> {
    if u.iter().any(|x| x.is_nan()) {
        return Err(Error::NonFinite("membrane potential"));
    }
    let m = logit_shift(u);
    let silence_w = (-m).exp();
    let weights: Vec<f64> = u.iter().map(|x| (x - m).exp()).collect();
    let z = silence_w + weights.iter().sum::<f64>();
    Ok(ProbVector {
        units: weights.into_iter().map(|w| w / z).collect(),
        silence: silence_w / z,
    })
}

/// `log p(s | u) = H̄(s, σ(u))` evaluated in log space, exact for any finite
/// potential.
pub fn log_prob(s: SpikeSymbol, u: &[f64]) -> f64 {
    let m = logit_shift(u);
    let z = (-m).exp() + u.iter().map(|x| (x - m).exp()).sum::<f64>();
    let log_z = m + z.ln();
    match s.unit_index() {
        Some(c) => u[c] - log_z,
        None => -log_z,
    }
}

/// Draws one symbol: unit `c` with probability `p_c`, silence otherwise.
/// Consumes exactly one uniform `f64` from `rng`.
pub fn sample_spike<R: Rng + ?Sized>(p: &ProbVector, rng: &mut R) -> SpikeSymbol {
    let v: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (c, &pc) in p.units.iter().enumerate() {
        cumulative += pc;
        if v < cumulative {
            return SpikeSymbol::unit(c);
        }
    }
    SpikeSymbol::SILENCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN_THIRD: f64 = -1.098_612_288_668_109_8;

    #[test]
    fn cross_entropy_silence_case_is_zero() {
        assert_eq!(neg_cross_entropy(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let v = neg_cross_entropy(&[1.0, 0.0], &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((v - LN_THIRD).abs() < 1e-12);
        let v = neg_cross_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((v + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_dimension_mismatch() {
        assert!(matches!(
            neg_cross_entropy(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_zero_probability_is_flagged() {
        let g = neg_cross_entropy_guarded(&[1.0, 0.0], &[0.0, 0.5]).unwrap();
        assert!(g.clamped);
        assert!((g.value - LOG_FLOOR.ln()).abs() < 1e-9);
        assert!(g.value.is_finite());
    }

    #[test]
    fn kl_examples() {
        assert!(kl_divergence(&[0.2, 0.3], &[0.2, 0.3]).unwrap().abs() < 1e-15);
        let v = kl_divergence(&[1.0, 0.0], &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((v + LN_THIRD).abs() < 1e-12);
        let v = kl_divergence(&[0.0, 0.0], &[0.5, 0.25]).unwrap();
        assert!((v - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn temporal_average_unrolls() {
        let mut avg = TemporalAverage::new(1, 0.5).unwrap();
        let mut seen = vec![];
        for _ in 0..3 {
            avg.step(&[1.0]);
            seen.push(avg.value()[0]);
        }
        assert_eq!(seen, vec![1.0, 1.5, 1.75]);

        let mut zero = TemporalAverage::new(3, 0.2).unwrap();
        for _ in 0..10 {
            zero.step(&[0.0; 3]);
        }
        assert_eq!(zero.value(), &[0.0; 3]);
    }

    #[test]
    fn temporal_average_geometric_limit() {
        let c = 3.7;
        let mut avg = TemporalAverage::new(1, 0.2).unwrap();
        for _ in 0..100 {
            avg.step(&[c]);
        }
        assert!((avg.value()[0] - 1.25 * c).abs() < 1e-9);
    }

    #[test]
    fn temporal_average_rejects_bad_decay() {
        assert!(TemporalAverage::new(1, 1.5).is_err());
        assert!(TemporalAverage::new(1, -0.1).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = wta_softmax(&[0.0, 0.0]).unwrap();
        for x in p.units() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((p.silence() - 1.0 / 3.0).abs() < 1e-15);

        let p = wta_softmax(&[2.0f64.ln(), 0.0]).unwrap();
        assert!((p.units()[0] - 0.5).abs() < 1e-15);
        assert!((p.units()[1] - 0.25).abs() < 1e-15);
        assert!((p.silence() - 0.25).abs() < 1e-15);

        let p = wta_softmax(&[0.0]).unwrap();
        assert_eq!(p.units(), &[0.5]);
    }

    #[test]
    fn softmax_rejects_nan() {
        assert!(wta_softmax(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn softmax_survives_huge_potentials() {
        let p = wta_softmax(&[1e6, -1e6]).unwrap();
        assert_eq!(p.units(), &[1.0, 0.0]);
        let p = wta_softmax(&[-1e6, -1e6]).unwrap();
        assert_eq!(p.silence(), 1.0);
    }

    #[test]
    fn log_prob_matches_cross_entropy() {
        let u = [0.3, -1.2, 2.0];
        let p = wta_softmax(&u).unwrap();
        for code in 0..=3u8 {
            let s = SpikeSymbol::from_code(code);
            let direct = neg_cross_entropy(&s.to_vector(3), p.units()).unwrap();
            assert!((log_prob(s, &u) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_degenerate_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let one = ProbVector::new(vec![1.0, 0.0]).unwrap();
        let none = ProbVector::new(vec![0.0, 0.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_spike(&one, &mut rng), SpikeSymbol::unit(0));
            assert_eq!(sample_spike(&none, &mut rng), SpikeSymbol::SILENCE);
        }
    }

    #[test]
    fn sample_frequencies_within_three_sigma() {
        let n = 100_000;
        let p = ProbVector::new(vec![1.0 / 3.0, 1.0 / 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_spike(&p, &mut rng).code() as usize] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn spike_symbol_codes() {
        assert_eq!(SpikeSymbol::SILENCE.unit_index(), None);
        assert_eq!(SpikeSymbol::unit(1).code(), 2);
        assert_eq!(SpikeSymbol::unit(1).to_vector(3), vec![0.0, 1.0, 0.0]);
        assert!(SpikeSymbol::unit(2).check(2).is_err());
        assert!(SpikeSymbol::unit(1).check(2).is_ok());
    }

    fn sub_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
        // n weights plus one silence weight, normalised
        proptest::collection::vec(0.0f64..1.0, n + 1).prop_map(|w| {
            let z: f64 = w.iter().sum::<f64>() + 1e-12;
            w[..w.len() - 1].iter().map(|x| x / z).collect()
        })
    }

    proptest! {
        #[test]
        fn softmax_normalises(u in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let p = wta_softmax(&u).unwrap();
            let total = p.spike_mass() + p.silence();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn single_unit_softmax_is_sigmoid(u in -40.0f64..40.0) {
            let p = wta_softmax(&[u]).unwrap();
            let sigmoid = 1.0 / (1.0 + (-u).exp());
            prop_assert!((p.units()[0] - sigmoid).abs() <= 1e-15);
        }

        #[test]
        fn kl_is_non_negative((a, b) in (1usize..5).prop_flat_map(|n| (sub_distribution(n), sub_distribution(n)))) {
            prop_assert!(kl_divergence(&a, &b).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_identity() {
        // d/du_c H̄(s, σ(u)) = 1{s = e_c} − σ_c(u), checked by central differences
        let h = 1e-4;
        let u = [0.4, -0.7, 1.1];
        let p = wta_softmax(&u).unwrap();
        for code in 0..=3u8 {
            let s = SpikeSymbol::from_code(code);
            let sv = s.to_vector(3);
            for c in 0..3 {
                let eval = |delta: f64| {
                    let mut v = u;
                    v[c] += delta;
                    neg_cross_entropy(&sv, wta_softmax(&v).unwrap().units()).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = sv[c] - p.units()[c];
                let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
                assert!(rel < 1e-6, "s={code} c={c} fd={fd} analytic={analytic}");
            }
        }
    }
}
