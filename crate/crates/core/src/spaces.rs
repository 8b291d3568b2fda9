//! Sobolev, Fourier–Lebesgue, modulation and modulated Sobolev norms on `T_λ`.
//!
//! Modulation norms use sharp unit windows `I_n = [n − 1/2, n + 1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lattice::SpectralField;
use crate::special::{bracket, integrate_to_infinity, KahanSum};
use crate::symmetry;

/// Extra unit blocks summed explicitly beyond the field's cutoff before the
/// modulated Sobolev tail is closed with an Euler–Maclaurin estimate.
pub const DEFAULT_MODULATION_MARGIN: i64 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    Sobolev { theta: f64 },
    FourierLebesgue { s: f64, p: f64 },
    Modulation { s: f64, p: f64 },
    ModulatedSobolev { theta: f64, p: f64, s: f64 },
}

impl NormKind {
    pub fn label(&self) -> &'static str {
        match self {
            NormKind::Sobolev { .. } => "sobolev",
            NormKind::FourierLebesgue { .. } => "fourier_lebesgue",
            NormKind::Modulation { .. } => "modulation",
            NormKind::ModulatedSobolev { .. } => "modulated_sobolev",
        }
    }

    /// `(theta, s, p)` with `NaN` for parameters the kind does not use.
    pub fn params(&self) -> (f64, f64, f64) {
        match *self {
            NormKind::Sobolev { theta } => (theta, f64::NAN, 2.0),
            NormKind::FourierLebesgue { s, p } => (f64::NAN, s, p),
            NormKind::Modulation { s, p } => (f64::NAN, s, p),
            NormKind::ModulatedSobolev { theta, p, s } => (theta, s, p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub kind: NormKind,
    /// Half-width of the outer index range `n ∈ [−N, N]`; `None` picks
    /// `cutoff + DEFAULT_MODULATION_MARGIN`.
    pub window_radius: Option<i64>,
}

impl NormSpec {
    pub fn new(kind: NormKind) -> Self {
        Self { kind, window_radius: None }
    }
}

/// A norm value and the part of it that was estimated rather than summed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub tail_estimate: f64,
}

/// One CSV row of a norm report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormRow {
    pub field_id: String,
    pub kind: String,
    pub theta: f64,
    pub s: f64,
    pub p: f64,
    pub value: f64,
    pub tail_estimate: f64,
}

impl NormRow {
    pub fn new(field_id: impl Into<String>, kind: &NormKind, v: NormValue) -> Self {
        let (theta, s, p) = kind.params();
        Self {
            field_id: field_id.into(),
            kind: kind.label().to_string(),
            theta,
            s,
            p,
            value: v.value,
            tail_estimate: v.tail_estimate,
        }
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(2.0..f64::INFINITY).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [2, ∞), got {p}")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("weight exponent s must be ≥ 0, got {s}")));
    }
    Ok(())
}

/// `(∫ ⟨ξ⟩^{2θ} |û|² (dξ)_λ)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, theta: f64) -> f64 {
    let lat = f.lattice();
    let acc: KahanSum = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| bracket(lat.frequency(i)).powf(2.0 * theta) * c.norm_sqr())
        .collect();
    (acc.value() * lat.spacing()).sqrt()
}

/// `(λ^{-1} Σ ⟨ξ⟩^{sp} |û(ξ)|^p)^{1/p}`.
pub fn fourier_lebesgue_norm(f: &SpectralField, s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_s(s)?;
    let lat = f.lattice();
    let acc: KahanSum = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| bracket(lat.frequency(i)).powf(s * p) * c.norm().powf(p))
        .collect();
    Ok((acc.value() * lat.spacing()).powf(1.0 / p))
}

/// Unit block containing the mode `k/λ`: `n = ⌊k/λ + 1/2⌋`.
pub fn block_index(k: i64, lambda: u32) -> i64 {
    let l = lambda as i64;
    (2 * k + l).div_euclid(2 * l)
}

/// `(n, λ^{-1} Σ_{ξ ∈ I_n} |û|²)` for every block meeting the lattice.
pub fn block_masses(f: &SpectralField) -> Vec<(i64, f64)> {
    let lat = f.lattice();
    let lambda = lat.lambda();
    let kmax = lat.half_width();
    let first = block_index(-kmax, lambda);
    let last = block_index(kmax, lambda);
    let mut masses: Vec<KahanSum> = vec![KahanSum::new(); (last - first + 1) as usize];
    for (i, c) in f.coeffs().iter().enumerate() {
        let n = block_index(lat.mode(i), lambda);
        masses[(n - first) as usize].add(c.norm_sqr());
    }
    masses
        .iter()
        .enumerate()
        .map(|(j, m)| (first + j as i64, m.value() * lat.spacing()))
        .collect()
}

/// `‖⟨n⟩^s ‖û‖_{L²(I_n)}‖_{ℓ^p_n}` with sharp windows.
pub fn modulation_norm(f: &SpectralField, s: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_s(s)?;
    let acc: KahanSum = block_masses(f)
        .into_iter()
        .map(|(n, m)| bracket(n as f64).powf(s * p) * m.powf(0.5 * p))
        .collect();
    Ok(acc.value().powf(1.0 / p))
}

/// As [`modulation_norm`], but refuses an index window that misses blocks carrying data.
pub fn modulation_norm_windowed(f: &SpectralField, s: f64, p: f64, window_radius: i64) -> Result<f64> {
    let needed = block_index(f.lattice().half_width(), f.lattice().lambda());
    if window_radius < needed {
        return Err(Error::invalid(format!(
            "window radius {window_radius} below the {needed} blocks spanned by the lattice"
        )));
    }
    modulation_norm(f, s, p)
}

/// `λ^{-1} Σ_ξ ⟨ξ − x⟩^{2θ} |û(ξ)|²` at real modulation `x`.
fn shifted_sobolev_sq(freqs: &[f64], mass: &[f64], theta: f64, x: f64) -> f64 {
    let acc: KahanSum = freqs
        .iter()
        .zip(mass)
        .filter(|(_, m)| **m > 0.0)
        .map(|(xi, m)| bracket(xi - x).powf(2.0 * theta) * m)
        .collect();
    acc.value()
}

/// `(Σ_n ⟨n⟩^{sp} ‖⟨ξ − n⟩^θ û‖^p_{L²})^{1/p}`.
///
/// The outer sum runs explicitly over `|n| ≤ window`; the remainder is the
/// Euler–Maclaurin midpoint estimate `∫_{N+1/2}^∞ t + t'(N+1/2)/24` on both
/// sides, which is also reported as `tail_estimate` (in the p-th power).
pub fn modulated_sobolev_norm(f: &SpectralField, theta: f64, p: f64, s: f64) -> Result<NormValue> {
    let window = f.lattice().cutoff() as i64 + DEFAULT_MODULATION_MARGIN;
    modulated_sobolev_norm_windowed(f, theta, p, s, window)
}

pub fn modulated_sobolev_norm_windowed(
    f: &SpectralField,
    theta: f64,
    p: f64,
    s: f64,
    window: i64,
) -> Result<NormValue> {
    check_p(p)?;
    check_s(s)?;
    if f.is_zero() {
        return Ok(NormValue { value: 0.0, tail_estimate: 0.0 });
    }
    if theta >= 0.0 || (theta + s) * p >= -1.0 {
        return Err(Error::invalid(format!(
            "outer sum diverges for theta = {theta}, s = {s}, p = {p}"
        )));
    }
    if window < f.lattice().cutoff() as i64 {
        return Err(Error::invalid("window radius smaller than the lattice cutoff"));
    }
    let terms = modulated_sobolev_terms(f, theta, p, s, window);
    let body: KahanSum = terms.terms.iter().map(|(_, t)| *t).collect();
    Ok(NormValue {
        value: (body.value() + terms.tail).powf(1.0 / p),
        tail_estimate: terms.tail,
    })
}

/// Per-index terms `t_n = ⟨n⟩^{sp} ‖⟨ξ − n⟩^θ û‖^p_{L²}` of the modulated
/// Sobolev norm for `|n| ≤ window`, plus the estimated remainder.
#[derive(Clone, Debug)]
pub struct ModulatedTerms {
    pub terms: Vec<(i64, f64)>,
    pub tail: f64,
}

/// Caller guarantees `θ < 0` and `(θ + s)p < −1`.
pub fn modulated_sobolev_terms(f: &SpectralField, theta: f64, p: f64, s: f64, window: i64) -> ModulatedTerms {
    let lat = f.lattice();
    let freqs = lat.frequencies();
    let mass: Vec<f64> = f.coeffs().iter().map(|c| c.norm_sqr() * lat.spacing()).collect();
    let term = |x: f64| bracket(x).powf(s * p) * shifted_sobolev_sq(&freqs, &mass, theta, x).powf(0.5 * p);

    let terms = (-window..=window).map(|n| (n, term(n as f64))).collect();
    let a = window as f64 + 0.5;
    let side = |sign: f64| {
        let t = |x: f64| term(sign * x);
        let h = 1e-3 * a;
        let deriv = (t(a + h) - t(a - h)) / (2.0 * h);
        integrate_to_infinity(a, t) + deriv / 24.0
    };
    ModulatedTerms { terms, tail: side(1.0) + side(-1.0) }
}

pub fn evaluate(f: &SpectralField, spec: &NormSpec) -> Result<NormValue> {
    let exact = |value| NormValue { value, tail_estimate: 0.0 };
    match spec.kind {
        NormKind::Sobolev { theta } => Ok(exact(sobolev_norm(f, theta))),
        NormKind::FourierLebesgue { s, p } => fourier_lebesgue_norm(f, s, p).map(exact),
        NormKind::Modulation { s, p } => match spec.window_radius {
            Some(w) => modulation_norm_windowed(f, s, p, w).map(exact),
            None => modulation_norm(f, s, p).map(exact),
        },
        NormKind::ModulatedSobolev { theta, p, s } => match spec.window_radius {
            Some(w) => modulated_sobolev_norm_windowed(f, theta, p, s, w),
            None => modulated_sobolev_norm(f, theta, p, s),
        },
    }
}

/// Ratios `‖f‖_{MH^{θ,p}_s} / ‖f‖_{M^{2,p}_s}` over a corpus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub theta: f64,
    pub p: f64,
    pub s: f64,
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Indices of zero fields that were skipped.
    pub skipped: Vec<usize>,
}

impl EquivalenceReport {
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.ratios.iter().all(|r| (lo..=hi).contains(r))
    }
}

pub fn equivalence_report(corpus: &[SpectralField], theta: f64, p: f64, s: f64) -> Result<EquivalenceReport> {
    equivalence_report_with(corpus, theta, p, s, Execution::default())
}

pub fn equivalence_report_with(
    corpus: &[SpectralField],
    theta: f64,
    p: f64,
    s: f64,
    mode: Execution,
) -> Result<EquivalenceReport> {
    if theta + s >= -0.5 {
        return Err(Error::invalid("equivalence needs theta + s < -1/2"));
    }
    check_p(p)?;
    let per_field: Vec<Result<Option<f64>>> = exec::map(corpus, mode, |f| {
        if f.is_zero() {
            return Ok(None);
        }
        let mh = modulated_sobolev_norm(f, theta, p, s)?.value;
        let m = modulation_norm(f, s, p)?;
        Ok(Some(mh / m))
    });
    let mut ratios = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in per_field.into_iter().enumerate() {
        match r? {
            Some(v) => ratios.push(v),
            None => skipped.push(i),
        }
    }
    if ratios.is_empty() {
        return Err(Error::invalid("corpus has no nonzero field"));
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(EquivalenceReport { theta, p, s, ratios, min, max, mean, skipped })
}

/// Measured constants of the two scaling relations between `FL^p(T)` and
/// `M^{2,p}(T_λ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub lambda: u32,
    pub p: f64,
    pub s: f64,
    pub fl_unit: f64,
    pub fl_scaled: f64,
    pub mod_scaled: f64,
    /// `‖f‖_{FL^p(T)} / (λ^{1/2} ‖f_λ‖_{M^{2,p}(T_λ)})`.
    pub lower_constant: f64,
    /// `‖f_λ‖_{M^{2,p}(T_λ)} / (λ^{-1/p} ‖f‖_{FL^p(T)})`.
    pub upper_constant: f64,
    /// `|‖f_λ‖_{FL^p(T_λ)} − λ^{-1/p}‖f‖_{FL^p(T)}|` relative to the right side.
    pub fl_identity_error: f64,
}

pub fn scaling_check(f: &SpectralField, lambda: u32, p: f64, s: f64) -> Result<ScalingReport> {
    if f.lattice().lambda() != 1 {
        return Err(Error::invalid("scaling check starts from the unit torus"));
    }
    let g = symmetry::rescale(f, lambda)?;
    let lam = lambda as f64;
    let fl_unit = fourier_lebesgue_norm(f, s, p)?;
    let fl_scaled = fourier_lebesgue_norm(&g, s, p)?;
    let mod_scaled = modulation_norm(&g, s, p)?;
    let expected = lam.powf(-1.0 / p) * fl_unit;
    Ok(ScalingReport {
        lambda,
        p,
        s,
        fl_unit,
        fl_scaled,
        mod_scaled,
        lower_constant: fl_unit / (lam.sqrt() * mod_scaled),
        upper_constant: mod_scaled / expected,
        fl_identity_error: if expected > 0.0 { (fl_scaled - expected).abs() / expected } else { fl_scaled },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_lattice, FrequencyLattice};
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn single(l: FrequencyLattice, k: i64, c: f64) -> SpectralField {
        SpectralField::from_modes(l, &[(k, Complex64::new(c, 0.0))]).unwrap()
    }

    #[test]
    fn block_index_uses_half_open_windows() {
        assert_eq!(block_index(0, 4), 0);
        assert_eq!(block_index(1, 4), 0);
        assert_eq!(block_index(2, 4), 1); // ξ = 1/2 belongs to I_1
        assert_eq!(block_index(-2, 4), 0); // ξ = -1/2 belongs to I_0
        assert_eq!(block_index(-3, 4), -1);
        assert_eq!(block_index(5, 1), 5);
    }

    #[test]
    fn single_mode_values() {
        let l = make_lattice(1, 8).unwrap();
        let s2p = (2.0 * PI).sqrt();
        let f = single(l, 3, s2p);
        assert!((sobolev_norm(&f, 0.0) - s2p).abs() < 1e-14);
        let g = single(l, 2, s2p);
        assert!((sobolev_norm(&g, -1.0) - s2p / 5f64.sqrt()).abs() < 1e-14);
        for p in [2.0, 3.0, 7.5] {
            assert!((fourier_lebesgue_norm(&f, 0.0, p).unwrap() - s2p).abs() < 1e-13);
        }
        assert_eq!(sobolev_norm(&SpectralField::zeros(l), 0.3), 0.0);
        assert!(fourier_lebesgue_norm(&f, 0.0, 1.5).is_err());
        assert!(fourier_lebesgue_norm(&f, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn flat_block_on_dilated_torus() {
        let l = make_lattice(4, 2).unwrap();
        // modes k = -2..=1 make up I_0 ∩ Z_4
        let f = SpectralField::from_fn(l, |k| {
            if (-2..=1).contains(&k) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
        .unwrap();
        for p in [2.0, 4.0, 9.0] {
            assert!((modulation_norm(&f, 0.0, p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn modulated_sobolev_single_mode() {
        let l = make_lattice(1, 4).unwrap();
        let c = 0.37;
        let f = single(l, 1, c * (2.0 * PI).sqrt());
        let v = modulated_sobolev_norm(&f, -1.0, 2.0, 0.0).unwrap();
        let want = c * (2.0 * PI).sqrt() * (PI / PI.tanh()).sqrt();
        assert!((v.value - want).abs() < 1e-10 * want, "{} vs {want}", v.value);
        assert!(v.tail_estimate > 0.0);
    }

    #[test]
    fn euler_maclaurin_tail_sign() {
        // Σ_{n>N} 1/n² against ∫_{N+1/2}^∞ + f'(N+1/2)/24
        let n = 40.0;
        let a: f64 = n + 0.5;
        let est = 1.0 / a + (-2.0 / a.powi(3)) / 24.0;
        let exact: f64 = PI * PI / 6.0 - (1..=40).map(|k| 1.0 / (k * k) as f64).sum::<f64>();
        assert!((est - exact).abs() < 1e-9);
    }

    #[test]
    fn unit_torus_modulation_equals_fourier_lebesgue() {
        let l = make_lattice(1, 6).unwrap();
        let f = crate::lattice::random_band_limited(l, 6, 1.3, 5).unwrap();
        for p in [2.0, 3.0, 6.0] {
            let a = modulation_norm(&f, 0.0, p).unwrap();
            let b = fourier_lebesgue_norm(&f, 0.0, p).unwrap();
            assert!((a - b).abs() < 1e-13 * b);
        }
    }

    #[test]
    fn divergent_configuration_rejected() {
        let l = make_lattice(1, 4).unwrap();
        let f = single(l, 0, 1.0);
        assert!(modulated_sobolev_norm(&f, 0.5, 2.0, 0.0).is_err());
        assert!(modulated_sobolev_norm(&f, -0.2, 2.0, 0.0).is_err());
        assert_eq!(modulated_sobolev_norm(&SpectralField::zeros(l), 0.5, 2.0, 0.0).unwrap().value, 0.0);
        assert!(modulation_norm_windowed(&f, 0.0, 2.0, 2).is_err());
        assert!(modulation_norm_windowed(&f, 0.0, 2.0, 4).is_ok());
    }
}
