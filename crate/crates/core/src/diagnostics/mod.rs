//! Cost accounting, probe traces, energy traces and spectra.

mod ledger;

pub use ledger::{Category, CostLedger};

use crate::system::DiscreteSystem;
use crate::{Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Which field a probe reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    E,
    H,
}

/// A single DOF observed over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Probe {
    pub field: Field,
    pub dof: usize,
}

impl Probe {
    pub fn e(dof: usize) -> Self {
        Self { field: Field::E, dof }
    }

    pub fn h(dof: usize) -> Self {
        Self { field: Field::H, dof }
    }
}

/// Time samples of one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTrace {
    pub probe: Probe,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ProbeTrace {
    pub fn new(probe: Probe) -> Self {
        Self {
            probe,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a trace from paired samples; times must increase strictly.
    pub fn from_samples(probe: Probe, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: values.len(),
                context: "probe trace values",
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("probe times must increase strictly".into()));
        }
        Ok(Self { probe, times, values })
    }

    /// Appends a sample.
    ///
    /// # Panics
    /// If `t` does not exceed the last sample time.
    pub fn push(&mut self, t: f64, v: f64) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "probe times must increase strictly ({t} after {last})");
        }
        self.times.push(t);
        self.values.push(v);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Constant sample spacing, if the trace is uniformly sampled.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        let tol = 1e-9 * dt;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= tol)
            .then_some(dt)
    }

    /// Keeps every `stride`-th sample starting at the first.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            probe: self.probe,
            times: self.times.iter().step_by(stride).copied().collect(),
            values: self.values.iter().step_by(stride).copied().collect(),
        }
    }
}

/// Relative L² difference `∥a − b∥ / ∥b∥` of two sample sequences.
pub fn relative_l2_difference(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            actual: a.len(),
            context: "compared series",
        });
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

/// Per-processor effective SMVP count `2·n_t/p + n_Leja + 2`.
pub fn effective_cost(n_t: usize, p: usize, n_leja: u64) -> f64 {
    2.0 * n_t as f64 / p as f64 + n_leja as f64 + 2.0
}

/// Cost ratio `R = C_Leja / C_LF`.
pub fn cost_ratio(c_leja: f64, c_lf: f64) -> Result<f64> {
    if !(c_lf > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cost ratio needs C_LF > 0, got {c_lf}"
        )));
    }
    Ok(c_leja / c_lf)
}

/// Which quadratic form [`energy_trace`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyForm {
    /// Staggered pairs `(e_m, e_{m+1}, h_{m-1/2}, h_{m+1/2})`; conserved by
    /// source-free Leapfrog.
    Staggered,
    /// `⟨e_m, e_m⟩_ε + ⟨h_m, h_m⟩_μ` with `h_m` the mean of the neighbouring
    /// half-step values.
    Averaged,
}

/// Field samples at integer steps with their half-step neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredSample {
    pub t: f64,
    pub e: Vec<f64>,
    /// `e` one step later; required by [`EnergyForm::Staggered`].
    pub e_next: Option<Vec<f64>>,
    pub h_prev: Vec<f64>,
    pub h_next: Vec<f64>,
}

/// Energy `E(t)` over a sequence of staggered samples.
pub fn energy_trace(sys: &DiscreteSystem, samples: &[StaggeredSample], form: EnergyForm) -> Result<Vec<(f64, f64)>> {
    samples
        .iter()
        .map(|s| {
            let e = match form {
                EnergyForm::Staggered => {
                    let e_next = s.e_next.as_deref().ok_or_else(|| {
                        Error::InvalidParameter("staggered energy needs the next electric sample".into())
                    })?;
                    let (we, wh) = crate::leapfrog::energy(sys, &s.e, e_next, &s.h_prev, &s.h_next);
                    we + wh
                }
                EnergyForm::Averaged => crate::leapfrog::averaged_energy(sys, &s.e, &s.h_prev, &s.h_next),
            };
            Ok((s.t, e))
        })
        .collect()
}

/// Maximum relative deviation `max |E - E_0| / |E_0|` of a trace.
pub fn relative_drift(trace: &[(f64, f64)]) -> f64 {
    let Some(&(_, e0)) = trace.first() else {
        return 0.0;
    };
    let dev = trace.iter().map(|(_, e)| (e - e0).abs()).fold(0.0, f64::max);
    if e0 == 0.0 {
        if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        dev / e0.abs()
    }
}

/// Full DFT magnitudes `|X_k|`, `k = 0..n`.
pub fn dft_magnitudes(values: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if buf.is_empty() {
        return Vec::new();
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// One-sided magnitude spectrum of a uniformly sampled trace: pairs
/// `(f_k, |X_k|)` for `k = 0..=n/2` with `f_k = k / (n·Δt)`.
pub fn spectrum(trace: &ProbeTrace, hann: bool) -> Result<Vec<(f64, f64)>> {
    let dt = trace
        .uniform_step()
        .ok_or_else(|| Error::InvalidParameter("spectrum needs a uniformly sampled trace".into()))?;
    let n = trace.len();
    let values: Vec<f64> = if hann {
        let w = |i: usize| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
        trace.values().iter().enumerate().map(|(i, v)| v * w(i)).collect()
    } else {
        trace.values().to_vec()
    };
    let mags = dft_magnitudes(&values);
    Ok((0..=n / 2).map(|k| (k as f64 / (n as f64 * dt), mags[k])).collect())
}

/// Mean magnitude of the spectrum bins with `f > f_min`.
pub fn mean_magnitude_above(spectrum: &[(f64, f64)], f_min: f64) -> f64 {
    let (sum, count) = spectrum
        .iter()
        .filter(|(f, _)| *f > f_min)
        .fold((0.0, 0usize), |(s, c), (_, m)| (s + m, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform_trace(values: Vec<f64>, dt: f64) -> ProbeTrace {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        ProbeTrace::from_samples(Probe::e(0), times, values).unwrap()
    }

    #[test]
    fn effective_cost_examples() {
        assert_eq!(effective_cost(100, 4, 300), 352.0);
        assert_eq!(effective_cost(250, 1, 0), 502.0);
    }

    #[test]
    fn cost_ratio_examples() {
        assert_eq!(cost_ratio(7.0, 7.0).unwrap(), 1.0);
        let r = cost_ratio(34864.0, 21654.0).unwrap();
        assert!((r - 1.610).abs() < 5e-4, "{r}");
        assert!(cost_ratio(1.0, 0.0).is_err());
        assert!(cost_ratio(1.0, f64::NAN).is_err());
    }

    #[test]
    fn trace_rejects_non_increasing_times() {
        assert!(ProbeTrace::from_samples(Probe::e(0), vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(ProbeTrace::from_samples(Probe::e(0), vec![0.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    #[should_panic]
    fn push_panics_on_repeated_time() {
        let mut t = ProbeTrace::new(Probe::h(3));
        t.push(1.0, 0.0);
        t.push(1.0, 0.0);
    }

    #[test]
    fn uniform_detection() {
        assert_eq!(uniform_trace(vec![1.0; 4], 0.5).uniform_step(), Some(0.5));
        let t = ProbeTrace::from_samples(Probe::e(0), vec![0.0, 1.0, 3.0], vec![0.0; 3]).unwrap();
        assert_eq!(t.uniform_step(), None);
        assert!(spectrum(&t, false).is_err());
    }

    #[test]
    fn sine_has_single_dominant_bin() {
        let n = 1024;
        let periods = 16.0;
        let dt = 1e-9;
        let f0 = periods / (n as f64 * dt);
        let v = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 * dt).sin())
            .collect();
        let s = spectrum(&uniform_trace(v, dt), false).unwrap();
        let (peak, &(f, m)) = s.iter().enumerate().max_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
        assert_eq!(peak, 16);
        assert!((f - f0).abs() < 1e-6 * f0);
        assert!((m - n as f64 / 2.0).abs() < 1e-8 * n as f64);
        for (k, &(_, mk)) in s.iter().enumerate() {
            if k != peak {
                assert!(mk < 1e-9 * m, "bin {k} = {mk}");
            }
        }
    }

    #[test]
    fn constant_is_all_dc() {
        let s = spectrum(&uniform_trace(vec![2.5; 64], 1.0), false).unwrap();
        assert!((s[0].1 - 160.0).abs() < 1e-12);
        assert!(s[1..].iter().all(|(_, m)| *m < 1e-12));
    }

    #[test]
    fn hann_window_suppresses_leakage() {
        let n = 512;
        let v: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).sin()).collect();
        let raw = spectrum(&uniform_trace(v.clone(), 1.0), false).unwrap();
        let win = spectrum(&uniform_trace(v, 1.0), true).unwrap();
        let far = |s: &[(f64, f64)]| s[200..].iter().map(|x| x.1).sum::<f64>();
        assert!(far(&win) < 0.1 * far(&raw));
    }

    #[test]
    fn drift_of_constant_trace_is_zero() {
        assert_eq!(relative_drift(&[(0.0, 3.0), (1.0, 3.0)]), 0.0);
        assert_eq!(relative_drift(&[(0.0, 0.0), (1.0, 0.0)]), 0.0);
        assert!((relative_drift(&[(0.0, 2.0), (1.0, 2.5), (2.0, 1.0)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_above_cutoff() {
        let s = [(0.0, 10.0), (1.0, 2.0), (2.0, 4.0)];
        assert_eq!(mean_magnitude_above(&s, 0.5), 3.0);
        assert_eq!(mean_magnitude_above(&s, 5.0), 0.0);
    }

    proptest! {
        #[test]
        fn parseval(values in prop::collection::vec(-1e3f64..1e3, 1..300)) {
            let mags = dft_magnitudes(&values);
            let lhs: f64 = mags.iter().map(|m| m * m).sum();
            let rhs: f64 = values.len() as f64 * values.iter().map(|v| v * v).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }

        #[test]
        fn l2_difference_is_zero_for_identical(values in prop::collection::vec(-1.0f64..1.0, 1..50)) {
            prop_assert_eq!(relative_l2_difference(&values, &values).unwrap(), 0.0);
        }
    }
}
