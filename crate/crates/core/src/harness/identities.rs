//! Exact discrete identities checked on a random band-limited corpus:
//! matrix vs closed-form leading term, Frobenius norm vs the double sum,
//! and the complex-κ shift of the leading term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::determinant::{build_kernel, hs_double_sum, hs_norm_sq, leading_term, LeadingMode, DEFAULT_KAPPA};
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::lattice::{random_band_limited, FrequencyLattice, SpectralField};
use crate::symmetry;

pub const LEADING_TOLERANCE: f64 = 1e-10;
pub const HS_TOLERANCE: f64 = 1e-12;
pub const SHIFT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    /// Largest relative error over the corpus.
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lambda: u32,
    pub cutoff: u32,
    pub support: i64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityOptions {
    pub lambda: u32,
    pub cutoff: u32,
    /// Data support radius in frequency units.
    pub support: u32,
    pub count: usize,
    pub seed: u64,
    /// Shifts `n` used for the complex-κ check run over `−max_shift..=max_shift`.
    pub max_shift: i64,
    pub execution: Execution,
}

impl IdentityOptions {
    pub fn new(lambda: u32, cutoff: u32) -> Self {
        Self {
            lambda,
            cutoff,
            support: (cutoff / 4).max(1),
            count: 20,
            seed: 1,
            max_shift: 4,
            execution: Execution::default(),
        }
    }
}

pub fn corpus(opts: &IdentityOptions) -> Result<Vec<SpectralField>> {
    let lat = FrequencyLattice::new(opts.lambda, opts.cutoff)?;
    let support = opts.support as i64 * opts.lambda as i64;
    (0..opts.count)
        .map(|i| random_band_limited(lat, support, 0.1 + 0.05 * i as f64, opts.seed.wrapping_add(i as u64)))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `max_{|n| ≤ N} |L(u, 1/2 + in/2) − L(M_n u, 1/2)| / L` in closed form,
/// modulating on a lattice wide enough to keep every mode.
pub fn shift_identity_error(u: &SpectralField, max_shift: i64) -> Result<f64> {
    let lat = u.lattice();
    let wide = FrequencyLattice::new(lat.lambda(), lat.cutoff() + max_shift.unsigned_abs() as u32)?;
    let (ext, _) = u.retruncate(wide)?;
    let mut worst: f64 = 0.0;
    for n in -max_shift..=max_shift {
        let direct = leading_term(u, Complex64::new(DEFAULT_KAPPA, 0.5 * n as f64), LeadingMode::ClosedForm)?;
        let moved = symmetry::modulate(&ext, n)?;
        let shifted = leading_term(&moved.field, Complex64::new(DEFAULT_KAPPA, 0.0), LeadingMode::ClosedForm)?;
        worst = worst.max(rel(direct, shifted));
    }
    Ok(worst)
}

pub fn identity_suite(opts: &IdentityOptions) -> Result<IdentityReport> {
    let fields = corpus(opts)?;
    let kappa = Complex64::new(DEFAULT_KAPPA, 0.0);
    let per_field: Vec<Result<[f64; 3]>> = exec::map(&fields, opts.execution, |u| {
        let op = build_kernel(u, kappa)?;
        let matrix = leading_term(u, kappa, LeadingMode::Matrix)?;
        let closed = leading_term(u, kappa, LeadingMode::ClosedForm)?;
        Ok([rel(matrix, closed), rel(hs_norm_sq(&op), hs_double_sum(&op)), shift_identity_error(u, opts.max_shift)?])
    });
    let errs = per_field.into_iter().collect::<Result<Vec<_>>>()?;
    let worst = |j: usize| errs.iter().map(|e| e[j]).fold(0.0, f64::max);
    let check = |name: &str, j: usize, tolerance: f64, cases: usize| {
        let max_error = worst(j);
        IdentityCheck { name: name.into(), max_error, tolerance, cases, passed: max_error <= tolerance }
    };
    let n = fields.len();
    Ok(IdentityReport {
        lambda: opts.lambda,
        cutoff: opts.cutoff,
        support: opts.support as i64,
        checks: vec![
            check("leading_term_matrix_vs_closed_form", 0, LEADING_TOLERANCE, n),
            check("hilbert_schmidt_frobenius_vs_double_sum", 1, HS_TOLERANCE, n),
            check("complex_kappa_shift", 2, SHIFT_TOLERANCE, n * (2 * opts.max_shift as usize + 1)),
        ],
    })
}
