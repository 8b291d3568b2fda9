//! Scaling, Galilean boosts, modulation and the periodic gauge transform.
//!
//! Boost and modulation parameters are integers: on `T_λ` with integer `λ`
//! the shift `ξ ↦ ξ + β` maps `Z_λ` to itself and moves storage indices by `βλ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Sign;
use crate::lattice::{FrequencyLattice, SpectralField};

/// Parameters of a transform application.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub beta: i64,
    pub lambda_scale: u32,
    pub time: f64,
    pub mu: f64,
}

/// Result of a frequency-shifting transform on a truncated lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Transformed {
    pub field: SpectralField,
    /// `L²` mass of modes pushed past the cutoff (and dropped).
    pub dropped_l2_sq: f64,
}

/// `f_λ(x) = λ^{-1} f(x/λ)` on `T_λ`: `û_λ(k/λ) = û(k)`.
///
/// The target lattice has the smallest cutoff covering the source modes.
pub fn rescale(f: &SpectralField, lambda: u32) -> Result<SpectralField> {
    if lambda == 0 {
        return Err(Error::invalid("scale factor must be ≥ 1"));
    }
    let src = f.lattice();
    if src.lambda() != 1 {
        return Err(Error::invalid("rescale starts from the unit torus"));
    }
    let cutoff = (src.half_width() as u64).div_ceil(lambda as u64).max(1) as u32;
    rescale_to(f, FrequencyLattice::new(lambda, cutoff)?)
}

/// As [`rescale`] onto a caller-chosen lattice; fails if nonzero modes would not fit.
pub fn rescale_to(f: &SpectralField, target: FrequencyLattice) -> Result<SpectralField> {
    let src = f.lattice();
    if src.lambda() != 1 {
        return Err(Error::invalid("rescale starts from the unit torus"));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); target.mode_count()];
    for (i, c) in f.coeffs().iter().enumerate() {
        let k = src.mode(i);
        match target.index_of(k) {
            Some(j) => out[j] = *c,
            None if c.norm_sqr() > 0.0 => {
                return Err(Error::invalid(format!("target cutoff too small for mode {k}")))
            }
            None => {}
        }
    }
    SpectralField::new(target, out)
}

/// Inverse of [`rescale`]: the unit-torus field whose λ-rescaling is `g`.
pub fn unscale(g: &SpectralField) -> Result<SpectralField> {
    let target = FrequencyLattice::new(1, g.lattice().half_width() as u32)?;
    Ok(SpectralField::from_raw(target, g.coeffs().to_vec()))
}

fn boost(f: &SpectralField, beta: i64, phase: impl Fn(f64) -> f64) -> Result<Transformed> {
    let lat = *f.lattice();
    let shift = beta * lat.lambda() as i64;
    let (shifted, dropped) = f.reindexed(lat, shift)?;
    let coeffs = shifted
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * Complex64::from_polar(1.0, phase(lat.frequency(i))))
        .collect();
    Ok(Transformed {
        field: SpectralField::new(lat, coeffs)?,
        dropped_l2_sq: dropped,
    })
}

/// NLS boost `u ↦ e^{-iβx} e^{iβ²t} u(x − 2βt, t)`:
/// `û^β(ξ) = e^{-iβ²t} e^{-2iβξt} û(ξ + β)`.
pub fn galilean_nls(f: &SpectralField, beta: i64, t: f64) -> Result<Transformed> {
    let b = beta as f64;
    boost(f, beta, |xi| -b * b * t - 2.0 * b * xi * t)
}

/// `M_n f = e^{-inx} f`: `û(ξ + n)`.
pub fn modulate(f: &SpectralField, n: i64) -> Result<Transformed> {
    galilean_nls(f, n, 0.0)
}

/// mKdV boost `u ↦ e^{-iβx} e^{2iβ³t} u(x − 3β²t, t)`:
/// `û^β(ξ) = e^{2iβ³t} e^{-3iβ²(ξ+β)t} û(ξ + β)`.
pub fn galilean_mkdv(f: &SpectralField, beta: i64, t: f64) -> Result<Transformed> {
    let b = beta as f64;
    boost(f, beta, |xi| 2.0 * b * b * b * t - 3.0 * b * b * (xi + b) * t)
}

/// Gauge phase `e^{∓4iμt}` (upper sign defocusing), mapping cubic NLS to its
/// renormalised form when `μ = ⨍|u|²`.
pub fn gauge(f: &SpectralField, mu: f64, t: f64, sign: Sign) -> SpectralField {
    f.scaled(Complex64::from_polar(1.0, -4.0 * sign.value() * mu * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_lattice, random_band_limited};
    use crate::spaces::fourier_lebesgue_norm;

    #[test]
    fn rescale_identity_and_single_mode() {
        let l = make_lattice(1, 5).unwrap();
        let f = random_band_limited(l, 5, 1.0, 2).unwrap();
        assert_eq!(rescale(&f, 1).unwrap(), f);
        let m = SpectralField::from_modes(l, &[(3, Complex64::new(2.0, 0.0))]).unwrap();
        let g = rescale(&m, 4).unwrap();
        assert_eq!(g.lattice().lambda(), 4);
        assert_eq!(g.at(3), Complex64::new(2.0, 0.0)); // ξ = 3/4
        for p in [2.0, 4.0] {
            let lhs = fourier_lebesgue_norm(&g, 0.0, p).unwrap();
            let rhs = 4f64.powf(-1.0 / p) * fourier_lebesgue_norm(&m, 0.0, p).unwrap();
            assert!((lhs - rhs).abs() < 1e-14);
        }
        assert_eq!(unscale(&g).unwrap().at(3), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn boosts_at_time_zero_are_shifts() {
        let l = make_lattice(2, 6).unwrap();
        let f = random_band_limited(l, 6, 1.0, 9).unwrap();
        let a = galilean_nls(&f, 2, 0.0).unwrap();
        let b = galilean_mkdv(&f, 2, 0.0).unwrap();
        let m = modulate(&f, 2).unwrap();
        assert_eq!(a.field, m.field);
        assert_eq!(b.field, m.field);
        assert_eq!(m.field.at(0), f.at(4));
        assert_eq!(galilean_nls(&f, 0, 0.7).unwrap().field, f);
    }

    #[test]
    fn gauge_round_trip() {
        let l = make_lattice(1, 4).unwrap();
        let f = random_band_limited(l, 3, 1.0, 1).unwrap();
        let g = gauge(&gauge(&f, 0.3, 1.7, Sign::Defocusing), -0.3, 1.7, Sign::Defocusing);
        assert!(g.max_abs_diff(&f).unwrap() < 1e-15);
        assert_eq!(gauge(&f, 0.3, 0.0, Sign::Focusing), f);
    }
}
