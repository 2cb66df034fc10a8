//! Butterworth band-pass design as cascaded second-order sections, with
//! causal and forward-backward (zero-phase) application.
//!
//! The design follows the usual analog-prototype route: Butterworth poles,
//! low-pass to band-pass transform, bilinear transform with pre-warped band
//! edges. An order-`n` design yields `2n` poles, `n` sections.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub zero_phase: bool,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            low_hz: 0.2,
            high_hz: 35.0,
            order: 4,
            zero_phase: true,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sampling_rate_hz: f64) -> Result<()> {
        let nyquist = sampling_rate_hz / 2.0;
        if self.order == 0 {
            return invalid("filter order must be positive");
        }
        if !(self.low_hz > 0.0) || !(self.high_hz > self.low_hz) {
            return invalid(format!(
                "band edges must satisfy 0 < low < high (got {} .. {})",
                self.low_hz, self.high_hz
            ));
        }
        if self.high_hz >= nyquist {
            return invalid(format!(
                "cutoff {} Hz at or above Nyquist {} Hz",
                self.high_hz, nyquist
            ));
        }
        Ok(())
    }
}

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z_inv * self.a[0] + z2 * self.a[1];
        num / den
    }

    /// Transposed direct-form II state after an infinitely long constant unit input.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // (I - A^T) zi = b[1:] - a[1:] * b0
        let r0 = b1 - a1 * b0;
        let r1 = b2 - a2 * b0;
        let det = (1.0 + a1) + a2;
        let z0 = (r0 + r1) / det;
        let z1 = r1 - a2 * z0;
        [z0, z1]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Second-order-section realisation of a band-pass filter.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sampling_rate_hz: f64,
}

pub fn design_bandpass(spec: &FilterSpec, sampling_rate_hz: f64) -> Result<SosFilter> {
    spec.validate(sampling_rate_hz)?;
    let n = spec.order;
    // Pre-warp on the fs = 2 normalised scale.
    let warp = |f: f64| 4.0 * (PI * f / sampling_rate_hz).tan();
    let w1 = warp(spec.low_hz);
    let w2 = warp(spec.high_hz);
    let bw = w2 - w1;
    let wo = (w1 * w2).sqrt();

    let mut poles = Vec::with_capacity(2 * n);
    for k in 0..n {
        let m = -(n as f64) + 1.0 + 2.0 * k as f64;
        let proto = -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64));
        let lp = proto * (bw / 2.0);
        let root = (lp * lp - wo * wo).sqrt();
        poles.push(lp + root);
        poles.push(lp - root);
    }
    // n analog zeros at the origin map to z = +1, n more appear at z = -1.
    let fs2: f64 = 4.0;
    let mut gain = bw.powi(n as i32) * fs2.powi(n as i32);
    let mut denom = Complex64::new(1.0, 0.0);
    for p in &poles {
        denom *= fs2 - p;
    }
    gain /= denom.re;
    let zpoles: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();

    let mut sections = Vec::with_capacity(n);
    let mut upper: Vec<Complex64> = zpoles.iter().copied().filter(|p| p.im > 1e-14).collect();
    let mut reals: Vec<f64> = zpoles
        .iter()
        .filter(|p| p.im.abs() <= 1e-14)
        .map(|p| p.re)
        .collect();
    // Slowest poles last, which keeps the gain section well away from them.
    upper.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    reals.sort_by(f64::total_cmp);
    for p in &upper {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * p.re, p.norm_sqr()],
        });
    }
    for pair in reals.chunks(2) {
        let (p, q) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(p + q), p * q],
        });
    }
    debug_assert_eq!(sections.len(), n);
    for c in sections[0].b.iter_mut() {
        *c *= gain;
    }
    Ok(SosFilter {
        sections,
        sampling_rate_hz,
    })
}

impl SosFilter {
    /// Magnitude of the single-pass frequency response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
            .norm()
    }

    /// Magnitude of the effective response: squared when applied forward-backward.
    pub fn effective_magnitude(&self, freq_hz: f64, zero_phase: bool) -> f64 {
        let m = self.magnitude(freq_hz);
        if zero_phase {
            m * m
        } else {
            m
        }
    }

    fn steady_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let zi = s.steady_state();
                let out = [zi[0] * scale, zi[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], init: f64) {
        let zi = self.steady_states();
        for (s, z) in self.sections.iter().zip(zi) {
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            let mut z0 = z[0] * init;
            let mut z1 = z[1] * init;
            for v in x.iter_mut() {
                let xi = *v;
                let y = b0 * xi + z0;
                z0 = b1 * xi - a1 * y + z1;
                z1 = b2 * xi - a2 * y;
                *v = y;
            }
        }
    }

    /// Causal filtering, state initialised to the steady state of `x[0]`.
    pub fn filter(&self, x: &mut [f64]) {
        if let Some(&first) = x.first() {
            self.run(x, first);
        }
    }

    /// Edge padding used by [`filtfilt`](Self::filtfilt).
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &mut [f64]) -> Result<()> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return invalid(format!(
                "signal of {n} samples too short for padding of {pad}"
            ));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let init = ext[0];
        self.run(&mut ext, init);
        ext.reverse();
        let init = ext[0];
        self.run(&mut ext, init);
        ext.reverse();
        x.copy_from_slice(&ext[pad..pad + n]);
        Ok(())
    }

    pub fn apply(&self, x: &mut [f64], zero_phase: bool) -> Result<()> {
        if zero_phase {
            self.filtfilt(x)
        } else {
            self.filter(x);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_filter() -> SosFilter {
        design_bandpass(&FilterSpec::default(), 2000.0).unwrap()
    }

    #[test]
    fn magnitude_matches_reference_design() {
        // Reference: |H| of butter(4, [0.2, 35], 'band', fs=2000) in SciPy.
        let f = default_filter();
        let reference = [
            (10.0, 0.999987095738024),
            (50.0, 0.22997355678882503),
            (2.6, 0.9999999999954767),
            (0.2, 0.7071067814460871),
            (35.0, 0.7071067811865182),
            (100.0, 0.014284378406914358),
        ];
        for (hz, expected) in reference {
            let m = f.magnitude(hz);
            assert!((m - expected).abs() < 1e-9, "{hz} Hz: {m} vs {expected}");
        }
    }

    #[test]
    fn pole_radii_match_reference_design() {
        // a2 = |p|^2 of each reference section.
        let mut reference = [
            0.81781001263687259,
            0.92027697856596447,
            0.99883027844102157,
            0.99952312353217787,
        ];
        let mut ours: Vec<f64> = default_filter().sections.iter().map(|s| s.a[1]).collect();
        ours.sort_by(f64::total_cmp);
        reference.sort_by(f64::total_cmp);
        for (o, r) in ours.iter().zip(reference) {
            assert!((o - r).abs() < 1e-12, "{o} vs {r}");
        }
    }

    #[test]
    fn filtfilt_matches_reference_on_noise() {
        // 3000 standard-normal samples; outputs of SciPy's sosfiltfilt pinned.
        let input: Vec<f64> = include_str!("../../tests/data/filt_in.txt")
            .lines()
            .map(|l| l.trim().parse().unwrap())
            .collect();
        let expected: Vec<f64> = include_str!("../../tests/data/filt_out.txt")
            .lines()
            .map(|l| l.trim().parse().unwrap())
            .collect();
        let mut x = input.clone();
        default_filter().filtfilt(&mut x).unwrap();
        let worst = x
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "max deviation {worst}");
    }

    #[test]
    fn constant_input_is_removed() {
        let mut x = vec![100.0; 20_000];
        default_filter().filtfilt(&mut x).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            FilterSpec { high_hz: 1000.0, ..FilterSpec::default() },
            FilterSpec { low_hz: 0.0, ..FilterSpec::default() },
            FilterSpec { low_hz: 40.0, ..FilterSpec::default() },
            FilterSpec { order: 0, ..FilterSpec::default() },
        ];
        for spec in bad {
            assert!(design_bandpass(&spec, 2000.0).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn short_signal_rejected() {
        let mut x = vec![0.0; 10];
        assert!(default_filter().filtfilt(&mut x).is_err());
    }

    #[test]
    fn odd_orders_design() {
        for order in 1..=6 {
            let spec = FilterSpec { order, ..FilterSpec::default() };
            let f = design_bandpass(&spec, 2000.0).unwrap();
            assert_eq!(f.sections.len(), order);
            assert!((f.magnitude(2.6) - 1.0).abs() < 1e-3, "order {order}");
            assert!((f.magnitude(35.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        }
    }
}
