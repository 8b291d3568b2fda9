//! Frequency lattices on dilated tori, spectral fields and the transforms
//! between coefficient and sample space.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::bracket;

/// Truncated dual lattice `{k/λ : |k| ≤ cutoff·λ}` of the torus `R/(2πλZ)`.
///
/// Modes are addressed by the integer `k`; the frequency is `k/λ`. Storage
/// index `i` corresponds to `k = i − cutoff·λ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyLattice {
    lambda: u32,
    cutoff: u32,
}

impl FrequencyLattice {
    pub fn new(lambda: u32, cutoff: u32) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::invalid("lambda must be a positive integer"));
        }
        if cutoff == 0 {
            return Err(Error::invalid("cutoff must be a positive integer"));
        }
        if (cutoff as u64) * (lambda as u64) > (1 << 24) {
            return Err(Error::invalid("lattice too large"));
        }
        Ok(Self { lambda, cutoff })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Largest integer mode index `cutoff·λ`.
    pub fn half_width(&self) -> i64 {
        self.cutoff as i64 * self.lambda as i64
    }

    pub fn mode_count(&self) -> usize {
        2 * self.half_width() as usize + 1
    }

    /// `1/λ`, both the lattice spacing and the weight of the counting measure.
    pub fn spacing(&self) -> f64 {
        1.0 / self.lambda as f64
    }

    /// Length `2πλ` of the physical period.
    pub fn period(&self) -> f64 {
        2.0 * PI * self.lambda as f64
    }

    pub fn contains(&self, k: i64) -> bool {
        k.abs() <= self.half_width()
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        self.contains(k).then(|| (k + self.half_width()) as usize)
    }

    pub fn mode(&self, i: usize) -> i64 {
        i as i64 - self.half_width()
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.mode(i) as f64 / self.lambda as f64
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        let k = self.half_width();
        -k..=k
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.mode_count()).map(|i| self.frequency(i)).collect()
    }

    /// Next power of two `≥ 2·mode_count`; products of up to three fields
    /// projected back onto the lattice are alias-free on this grid.
    pub fn default_grid_size(&self) -> usize {
        (2 * self.mode_count()).next_power_of_two()
    }

    /// Next power of two `≥ mode_count`: exact synthesis, aliased products.
    pub fn minimal_grid_size(&self) -> usize {
        self.mode_count().next_power_of_two()
    }
}

pub fn make_lattice(lambda: u32, cutoff: u32) -> Result<FrequencyLattice> {
    FrequencyLattice::new(lambda, cutoff)
}

/// Fourier coefficients `û(ξ)` of a complex field on `T_λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: FrequencyLattice,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(lattice: FrequencyLattice, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != lattice.mode_count() {
            return Err(Error::invalid(format!(
                "expected {} coefficients, got {}",
                lattice.mode_count(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::numerical("non-finite coefficient"));
        }
        Ok(Self { lattice, coeffs })
    }

    /// Skips the finiteness scan; callers guarantee finite input.
    pub(crate) fn from_raw(lattice: FrequencyLattice, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), lattice.mode_count());
        Self { lattice, coeffs }
    }

    pub fn zeros(lattice: FrequencyLattice) -> Self {
        Self {
            lattice,
            coeffs: vec![Complex64::new(0.0, 0.0); lattice.mode_count()],
        }
    }

    /// Field with the listed integer modes set; every mode must lie on the lattice.
    pub fn from_modes(lattice: FrequencyLattice, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(lattice);
        for &(k, c) in modes {
            let i = lattice
                .index_of(k)
                .ok_or_else(|| Error::invalid(format!("mode {k} outside lattice")))?;
            f.coeffs[i] += c;
        }
        Self::new(lattice, f.coeffs)
    }

    pub fn from_fn<F: FnMut(i64) -> Complex64>(lattice: FrequencyLattice, mut f: F) -> Result<Self> {
        let coeffs = lattice.modes().map(&mut f).collect();
        Self::new(lattice, coeffs)
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `û(k/λ)`, zero off the lattice.
    pub fn at(&self, k: i64) -> Complex64 {
        self.lattice
            .index_of(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// `∫|û|² (dξ)_λ = ‖u‖²_{L²(T_λ)}`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.lattice.spacing()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// Mean intensity `μ = (2πλ)^{-1} ∫|u|² dx`.
    pub fn mean_intensity(&self) -> f64 {
        self.l2_norm_sq() / self.lattice.period()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_raw(self.lattice, self.coeffs.iter().map(|z| z * c).collect())
    }

    /// `L²(T_λ)` distance; both fields must share a lattice.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        self.same_lattice(other)?;
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.lattice.spacing()).sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_lattice(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn same_lattice(&self, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch(format!(
                "{:?} vs {:?}",
                self.lattice, other.lattice
            )));
        }
        Ok(())
    }

    /// Largest `|k|` carrying a nonzero coefficient, `None` for the zero field.
    pub fn support_radius(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(i, _)| self.lattice.mode(i).abs())
            .max()
    }

    /// Same field on another lattice with the same λ; modes that do not fit
    /// are dropped and their `L²` mass is returned.
    pub fn retruncate(&self, target: FrequencyLattice) -> Result<(Self, f64)> {
        if target.lambda() != self.lattice.lambda() {
            return Err(Error::LatticeMismatch("retruncate needs equal lambda".into()));
        }
        self.reindexed(target, 0)
    }

    /// `v̂(k) = û(k + shift)` on `target` (same λ); returns dropped `L²` mass.
    pub(crate) fn reindexed(&self, target: FrequencyLattice, shift: i64) -> Result<(Self, f64)> {
        let mut out = vec![Complex64::new(0.0, 0.0); target.mode_count()];
        let mut dropped = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.lattice.mode(i) - shift;
            match target.index_of(k) {
                Some(j) => out[j] = *c,
                None => dropped += c.norm_sqr(),
            }
        }
        Ok((Self::from_raw(target, out), dropped * target.spacing()))
    }
}

/// FFT plans bound to a lattice and a sample count.
///
/// `x_j = 2πλ j / M`, `j = 0..M`. Synthesis scatters `û(k)` into bin `k mod M`
/// and applies the unnormalised inverse FFT times `(2π)^{-1/2} λ^{-1}`;
/// analysis applies the forward FFT times `(2π)^{-1/2} · 2πλ/M`.
#[derive(Clone)]
pub struct SpectralGrid {
    lattice: FrequencyLattice,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("lattice", &self.lattice)
            .field("size", &self.size)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(lattice: FrequencyLattice, size: usize) -> Result<Self> {
        if size < lattice.mode_count() {
            return Err(Error::invalid(format!(
                "grid of {size} samples undersamples {} modes",
                lattice.mode_count()
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            lattice,
            size,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn with_default_size(lattice: FrequencyLattice) -> Result<Self> {
        Self::new(lattice, lattice.default_grid_size())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.size as i64) as usize
    }

    /// Writes samples of the field with coefficients `coeffs` into `out`.
    pub fn to_physical(&mut self, coeffs: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(coeffs.len(), self.lattice.mode_count());
        debug_assert_eq!(out.len(), self.size);
        out.fill(Complex64::new(0.0, 0.0));
        let scale = 1.0 / ((2.0 * PI).sqrt() * self.lattice.lambda() as f64);
        for (i, c) in coeffs.iter().enumerate() {
            let b = self.bin(self.lattice.mode(i));
            out[b] = c * scale;
        }
        self.inverse.process_with_scratch(out, &mut self.scratch);
    }

    /// Consumes `samples` (overwritten by the FFT) and writes lattice coefficients into `out`.
    pub fn to_spectral(&mut self, samples: &mut [Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(samples.len(), self.size);
        debug_assert_eq!(out.len(), self.lattice.mode_count());
        self.forward.process_with_scratch(samples, &mut self.scratch);
        let scale = self.lattice.period() / (self.size as f64 * (2.0 * PI).sqrt());
        for (i, o) in out.iter_mut().enumerate() {
            let b = self.bin(self.lattice.mode(i));
            *o = samples[b] * scale;
        }
    }

    /// Sample positions `x_j`.
    pub fn points(&self) -> Vec<f64> {
        let h = self.lattice.period() / self.size as f64;
        (0..self.size).map(|j| j as f64 * h).collect()
    }
}

/// Samples `f(x_j)` on `sample_count` equispaced points of `[0, 2πλ)`.
pub fn synthesize(f: &SpectralField, sample_count: usize) -> Result<Vec<Complex64>> {
    let mut grid = SpectralGrid::new(*f.lattice(), sample_count)?;
    let mut out = vec![Complex64::new(0.0, 0.0); sample_count];
    grid.to_physical(f.coeffs(), &mut out);
    Ok(out)
}

/// Lattice coefficients of equispaced samples on `[0, 2πλ)`.
pub fn analyze(samples: &[Complex64], lattice: FrequencyLattice) -> Result<SpectralField> {
    let mut grid = SpectralGrid::new(lattice, samples.len())?;
    let mut buf = samples.to_vec();
    let mut out = vec![Complex64::new(0.0, 0.0); lattice.mode_count()];
    grid.to_spectral(&mut buf, &mut out);
    SpectralField::new(lattice, out)
}

/// `(fg)^(ξ) = (2π)^{-1/2} λ^{-1} Σ_η f̂(η) ĝ(ξ−η)`, truncated to the lattice.
///
/// Direct lattice sum; the flow module forms products on a sample grid instead.
pub fn convolve(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.same_lattice(g)?;
    let lat = *f.lattice();
    let kmax = lat.half_width();
    let scale = 1.0 / ((2.0 * PI).sqrt() * lat.lambda() as f64);
    let fk = f.coeffs();
    let gk = g.coeffs();
    let out = lat
        .modes()
        .map(|k| {
            // η ranges where both η and k−η are on the lattice
            let lo = (-kmax).max(k - kmax);
            let hi = kmax.min(k + kmax);
            let mut acc = Complex64::new(0.0, 0.0);
            for eta in lo..=hi {
                acc += fk[(eta + kmax) as usize] * gk[(k - eta + kmax) as usize];
            }
            acc * scale
        })
        .collect();
    SpectralField::new(lat, out)
}

/// Random data `û(n) = g_n ⟨n⟩^{-α}` on the unit torus with independent
/// standard complex Gaussians `g_n` (`E|g_n|² = 1`), so that
/// `u(x) = (2π)^{-1/2} Σ g_n ⟨n⟩^{-α} e^{inx}`. Deterministic per seed.
pub fn random_gaussian_data(lattice: FrequencyLattice, alpha: f64, seed: u64) -> Result<SpectralField> {
    if lattice.lambda() != 1 {
        return Err(Error::invalid("random data is generated on the unit torus (lambda = 1)"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid("decay exponent must be finite and nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    SpectralField::from_fn(lattice, |n| {
        let g = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        g * bracket(n as f64).powf(-alpha)
    })
}

/// Random band-limited field on any lattice: Gaussian coefficients on
/// `|k| ≤ support` (integer mode index), zero elsewhere, scaled to `‖f‖_{L²} = l2`.
pub fn random_band_limited(
    lattice: FrequencyLattice,
    support: i64,
    l2: f64,
    seed: u64,
) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let f = SpectralField::from_fn(lattice, |k| {
        let z = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        if k.abs() <= support {
            z
        } else {
            Complex64::new(0.0, 0.0)
        }
    })?;
    let n = f.l2_norm();
    if n == 0.0 {
        return Ok(f);
    }
    Ok(f.scaled(Complex64::new(l2 / n, 0.0)))
}
