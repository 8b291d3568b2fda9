//! Kernel operators `(κ − ∂ₓ)^{-1/2} u (κ + ∂ₓ)^{-1/2}` on the dual lattice and
//! the trace series
//!
//! ```text
//! α(κ; u) = Re Σ_{j≥1} ((∓1)^{j−1}/j) tr((A B)^j),
//! A_{ξη} = û(ξ−η) / (√(2π) λ √(κ−iξ) √(κ+iη)),
//! B_{ηζ} = conj(û(ζ−η)) / (√(2π) λ √(κ+iη) √(κ−iζ)).
//! ```
//!
//! Matrices live on a finite window of the lattice. The first-order trace is
//! completed over the whole dual lattice in closed form (digamma ray sums), so
//! the leading term carries no truncation error; higher orders converge
//! like an inverse cube of the window margin and are left truncated.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::flow::{Sign, Trajectory};
use crate::lattice::{FrequencyLattice, SpectralField};
use crate::special::{kahan_sum, kahan_sum_complex, rational_ray_sum};

pub const DEFAULT_KAPPA: f64 = 0.5;
pub const DEFAULT_ORDER: usize = 8;
/// Operational smallness threshold on `r = ‖A‖²_HS`.
pub const DEFAULT_C0: f64 = 0.25;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Inclusive range of integer mode indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "empty index range");
        Self { lo, hi }
    }

    pub fn symmetric(half: i64) -> Self {
        Self::new(-half, half)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

/// Placement of a kernel on the lattice: data `ŵ(k) = û(k + shift)`, rows
/// (the `ξ` variable) and columns (the `η` variable) as index windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelWindow {
    pub shift: i64,
    pub rows: IndexRange,
    pub cols: IndexRange,
}

#[derive(Clone, Debug)]
pub struct KernelOperator {
    lattice: FrequencyLattice,
    kappa: Complex64,
    window: KernelWindow,
    a: Array2<Complex64>,
    b: Array2<Complex64>,
    /// Nonzero `(k, |ŵ(k)|²)` of the (shifted) data.
    data: Vec<(i64, f64)>,
}

impl KernelOperator {
    pub fn lattice(&self) -> &FrequencyLattice {
        &self.lattice
    }

    pub fn kappa(&self) -> Complex64 {
        self.kappa
    }

    pub fn window(&self) -> &KernelWindow {
        &self.window
    }

    /// The matrix `A_{ξη}`.
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.a
    }

    /// The partner `B_{ηζ}`; `M = A B`.
    pub fn partner(&self) -> &Array2<Complex64> {
        &self.b
    }

    pub fn product(&self) -> Array2<Complex64> {
        self.a.dot(&self.b)
    }
}

fn check_kappa(kappa: Complex64) -> Result<()> {
    if !(kappa.re > 0.0) || !kappa.im.is_finite() || !kappa.re.is_finite() {
        return Err(Error::invalid(format!("Re(kappa) must be positive, got {kappa}")));
    }
    Ok(())
}

/// Kernel on the field's own lattice (square, unshifted).
pub fn build_kernel(u: &SpectralField, kappa: Complex64) -> Result<KernelOperator> {
    let w = IndexRange::symmetric(u.lattice().half_width());
    build_kernel_windowed(u, kappa, KernelWindow { shift: 0, rows: w, cols: w })
}

pub fn build_kernel_windowed(u: &SpectralField, kappa: Complex64, window: KernelWindow) -> Result<KernelOperator> {
    check_kappa(kappa)?;
    let lat = *u.lattice();
    let lam = lat.lambda() as f64;
    let norm = 1.0 / ((2.0 * PI).sqrt() * lam);
    let row_f: Vec<Complex64> = window.rows.iter().map(|k| (kappa - I * (k as f64 / lam)).sqrt().inv()).collect();
    let col_f: Vec<Complex64> = window.cols.iter().map(|k| (kappa + I * (k as f64 / lam)).sqrt().inv()).collect();
    let dat = |d: i64| u.at(d + window.shift);
    let (nr, nc) = (window.rows.len(), window.cols.len());
    let mut a = Array2::<Complex64>::zeros((nr, nc));
    let mut b = Array2::<Complex64>::zeros((nc, nr));
    for (i, xi) in window.rows.iter().enumerate() {
        for (j, eta) in window.cols.iter().enumerate() {
            let w = dat(xi - eta);
            if w.re == 0.0 && w.im == 0.0 {
                continue;
            }
            let f = row_f[i] * col_f[j] * norm;
            a[[i, j]] = w * f;
            b[[j, i]] = w.conj() * f;
        }
    }
    let data = lat
        .modes()
        .map(|k| (k - window.shift, u.at(k).norm_sqr()))
        .filter(|(_, m)| *m > 0.0)
        .collect();
    Ok(KernelOperator { lattice: lat, kappa, window, a, b, data })
}

/// `Σ|A_{ξη}|²` from the assembled matrix.
pub fn hs_norm_sq(op: &KernelOperator) -> f64 {
    kahan_sum(op.a.iter().map(|z| z.norm_sqr()))
}

/// `(2πλ²)^{-1} Σ_{ξ,η} |ŵ(ξ−η)|² / (|κ−iξ| |κ+iη|)` summed directly over the window.
pub fn hs_double_sum(op: &KernelOperator) -> f64 {
    let lam = op.lattice.lambda() as f64;
    let k = op.kappa;
    let w = op.window;
    let mass: std::collections::HashMap<i64, f64> = op.data.iter().copied().collect();
    let mut terms = Vec::new();
    for xi in w.rows.iter() {
        let rx = (k - I * (xi as f64 / lam)).norm();
        for eta in w.cols.iter() {
            if let Some(m) = mass.get(&(xi - eta)) {
                terms.push(m / (rx * (k + I * (eta as f64 / lam)).norm()));
            }
        }
    }
    kahan_sum(terms) / (2.0 * PI * lam * lam)
}

/// `∫ log(4 + ξ²/κ²) |ŵ(ξ)|² / √(4κ² + ξ²) (dξ)_λ` with `κ = |kappa|`.
pub fn log_weighted_sum(op: &KernelOperator) -> f64 {
    let lam = op.lattice.lambda() as f64;
    let k = op.kappa.norm();
    kahan_sum(op.data.iter().map(|&(d, m)| {
        let xi = d as f64 / lam;
        (4.0 + xi * xi / (k * k)).ln() * m / (4.0 * k * k + xi * xi).sqrt()
    })) / lam
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HsReport {
    pub frobenius_sq: f64,
    pub double_sum: f64,
    pub log_weighted: f64,
    /// `frobenius_sq / log_weighted` (NaN for the zero field).
    pub ratio: f64,
}

pub fn hs_report(op: &KernelOperator) -> HsReport {
    let frobenius_sq = hs_norm_sq(op);
    let log_weighted = log_weighted_sum(op);
    HsReport {
        frobenius_sq,
        double_sum: hs_double_sum(op),
        log_weighted,
        ratio: if log_weighted > 0.0 { frobenius_sq / log_weighted } else { f64::NAN },
    }
}

/// `C_λ(κ) = (1 + e^{−2πλκ}) / (1 − e^{−2πλκ}) = coth(πλκ)`.
pub fn c_lambda(lambda: u32, kappa_re: f64) -> f64 {
    1.0 / (PI * lambda as f64 * kappa_re).tanh()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadingMode {
    Matrix,
    ClosedForm,
}

/// First-order trace `tr(AB)` over the whole dual lattice: the assembled
/// window part plus the exact complement outside the window.
pub fn first_trace(op: &KernelOperator) -> Complex64 {
    window_trace(op) + first_trace_complement(op)
}

/// `Σ_{ξη} A_{ξη} B_{ηξ}` over the window.
pub fn window_trace(op: &KernelOperator) -> Complex64 {
    let (nr, nc) = op.a.dim();
    kahan_sum_complex((0..nr).flat_map(|i| (0..nc).map(move |j| (i, j))).map(|(i, j)| op.a[[i, j]] * op.b[[j, i]]))
}

/// Contribution of all `(ξ, η)` pairs outside the window to `tr(AB)`.
///
/// For data index `d` the summand over `ξ = k/λ` is
/// `λ² / ((k − a)(k − b))` with `a = −iκλ`, `b = d + iκλ`, summed over the
/// two rays left and right of the window via digamma differences.
pub fn first_trace_complement(op: &KernelOperator) -> Complex64 {
    let lam = op.lattice.lambda() as f64;
    let kl = op.kappa * lam;
    let a = -I * kl;
    let w = op.window;
    let terms = op.data.iter().map(|&(d, m)| {
        let b = I * kl + d as f64;
        let lo = w.rows.lo.max(w.cols.lo + d);
        let hi = w.rows.hi.min(w.cols.hi + d).max(lo - 1);
        let right = rational_ray_sum(hi + 1, a, b);
        let left = rational_ray_sum(1 - lo, -a, -b);
        (right + left) * m
    });
    kahan_sum_complex(terms) / (2.0 * PI)
}

/// Closed form `C_λ(κ_r) ∫ 2κ_r |û(ξ + 2κ_i)|² / (4κ_r² + ξ²) (dξ)_λ`;
/// requires `2κ_i ∈ Z_λ`.
pub fn closed_form_leading(u: &SpectralField, kappa: Complex64) -> Result<f64> {
    check_kappa(kappa)?;
    let lat = u.lattice();
    let lam = lat.lambda() as f64;
    let q = 2.0 * kappa.im * lam;
    if (q - q.round()).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "2·Im(kappa) = {} is not on the lattice Z_{}",
            2.0 * kappa.im,
            lat.lambda()
        )));
    }
    let q = q.round() as i64;
    let kr = kappa.re;
    let s = kahan_sum(lat.modes().map(|k| {
        let xi = (k - q) as f64 / lam;
        2.0 * kr * u.at(k).norm_sqr() / (4.0 * kr * kr + xi * xi)
    }));
    Ok(c_lambda(lat.lambda(), kr) * s / lam)
}

pub fn leading_term(u: &SpectralField, kappa: Complex64, mode: LeadingMode) -> Result<f64> {
    match mode {
        LeadingMode::ClosedForm => closed_form_leading(u, kappa),
        LeadingMode::Matrix => Ok(first_trace(&build_kernel(u, kappa)?).re),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub order: usize,
    /// Sign of the flow whose conservation law is evaluated; picks `(∓1)^{j−1}`.
    pub sign: Sign,
    pub c0: f64,
    /// Replace the first-order window trace by the full-lattice value.
    pub complete_first_order: bool,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, sign: Sign::Defocusing, c0: DEFAULT_C0, complete_first_order: true }
    }
}

impl AlphaOptions {
    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub value: f64,
    /// `Re((∓1)^{j−1}/j · tr(M^j))`, `j = 1..=J`.
    pub terms: Vec<f64>,
    #[serde(rename = "J")]
    pub order: usize,
    pub kappa: [f64; 2],
    pub hs_norm_sq: f64,
    /// `Σ_{j>J} r^j / j`; infinite when `r ≥ 1`.
    pub tail_bound: f64,
    pub smallness_ok: bool,
    pub c0: f64,
    /// False when `r ≥ 1`: the series bound diverges and the value is not trustworthy.
    pub usable: bool,
}

impl AlphaResult {
    pub fn smallness_margin(&self) -> f64 {
        self.c0 - self.hs_norm_sq
    }
}

/// `Σ_{j>J} r^j/j`.
pub fn series_tail(r: f64, order: usize) -> f64 {
    if r >= 1.0 {
        return f64::INFINITY;
    }
    if r <= 0.0 {
        return 0.0;
    }
    if r > 0.9 {
        let head: f64 = (1..=order).map(|j| r.powi(j as i32) / j as f64).sum();
        return (-(-r).ln_1p() - head).max(0.0);
    }
    let mut acc = 0.0;
    let mut p = r.powi(order as i32);
    for j in order + 1.. {
        p *= r;
        let t = p / j as f64;
        acc += t;
        if t < 1e-20 * acc {
            break;
        }
    }
    acc
}

/// `tr(X Y)` in `O(n²)`.
fn trace_of_product(x: &Array2<Complex64>, y: &Array2<Complex64>) -> Complex64 {
    let n = x.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += x[[i, k]] * y[[k, i]];
        }
    }
    acc
}

/// `tr(M^j)` for `j = 1..=order`, from the powers `M, …, M^{⌈order/2⌉}`.
pub fn power_traces(m: &Array2<Complex64>, order: usize) -> Vec<Complex64> {
    let half = order.div_ceil(2).max(1);
    let mut powers = vec![m.clone()];
    for i in 1..half {
        let next = powers[i - 1].dot(m);
        powers.push(next);
    }
    (1..=order)
        .map(|j| {
            if j <= half {
                powers[j - 1].diag().iter().sum()
            } else {
                trace_of_product(&powers[half - 1], &powers[j - half - 1])
            }
        })
        .collect()
}

/// The series on an assembled kernel.
pub fn alpha_of(op: &KernelOperator, opts: &AlphaOptions) -> Result<AlphaResult> {
    if opts.order == 0 {
        return Err(Error::invalid("series order J must be ≥ 1"));
    }
    let r = hs_norm_sq(op);
    let m = op.product();
    let mut traces = power_traces(&m, opts.order);
    if opts.complete_first_order {
        traces[0] = first_trace(op);
    }
    let sign = -opts.sign.value();
    let terms: Vec<f64> = traces
        .iter()
        .enumerate()
        .map(|(idx, t)| (sign.powi(idx as i32) / (idx + 1) as f64 * t).re)
        .collect();
    Ok(AlphaResult {
        value: kahan_sum(terms.iter().copied()),
        order: opts.order,
        kappa: [op.kappa.re, op.kappa.im],
        hs_norm_sq: r,
        tail_bound: series_tail(r, opts.order),
        smallness_ok: r <= opts.c0,
        c0: opts.c0,
        usable: r < 1.0,
        terms,
    })
}

/// `α(κ; u)` on the field's lattice, defocusing sign.
pub fn alpha(u: &SpectralField, kappa: Complex64, order: usize) -> Result<AlphaResult> {
    alpha_with(u, kappa, &AlphaOptions::default().with_order(order))
}

pub fn alpha_with(u: &SpectralField, kappa: Complex64, opts: &AlphaOptions) -> Result<AlphaResult> {
    alpha_of(&build_kernel(u, kappa)?, opts)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftReport {
    pub times: Vec<f64>,
    pub results: Vec<AlphaResult>,
    /// Snapshots that passed the smallness check.
    pub verifiable: Vec<bool>,
    /// `max_t |α(t) − α(0)| / |α(0)|` over verifiable snapshots.
    pub max_relative_drift: f64,
    pub max_abs_drift: f64,
    pub min_smallness_margin: f64,
}

/// α along a trajectory with the sign of its equation.
pub fn conservation_drift(traj: &Trajectory, kappa: Complex64, order: usize) -> Result<DriftReport> {
    let opts = AlphaOptions::default()
        .with_order(order)
        .with_sign(traj.spec.equation.sign());
    conservation_drift_with(traj, kappa, &opts, Execution::default())
}

pub fn conservation_drift_with(
    traj: &Trajectory,
    kappa: Complex64,
    opts: &AlphaOptions,
    mode: Execution,
) -> Result<DriftReport> {
    let results = exec::map(&traj.snapshots, mode, |s| alpha_with(&s.field, kappa, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let verifiable: Vec<bool> = results.iter().map(|r| r.smallness_ok && r.usable).collect();
    let a0 = results.first().map(|r| r.value).unwrap_or(0.0);
    let mut max_abs: f64 = 0.0;
    for (r, ok) in results.iter().zip(&verifiable) {
        if *ok {
            max_abs = max_abs.max((r.value - a0).abs());
        }
    }
    let max_relative_drift = if a0 != 0.0 { max_abs / a0.abs() } else { max_abs };
    let min_smallness_margin = results.iter().map(|r| r.smallness_margin()).fold(f64::INFINITY, f64::min);
    Ok(DriftReport {
        times: traj.times(),
        results,
        verifiable,
        max_relative_drift,
        max_abs_drift: max_abs,
        min_smallness_margin,
    })
}

/// Alpha report rows as CSV: `time, kappa_re, kappa_im, J, value, term_1..term_J,
/// hs_norm_sq, tail_bound, smallness_ok`.
pub fn write_alpha_csv<W: std::io::Write>(rows: &[(f64, AlphaResult)], w: W) -> Result<()> {
    let order = rows.iter().map(|(_, r)| r.order).max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["time", "kappa_re", "kappa_im", "J", "value"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=order).map(|j| format!("term_{j}")));
    header.extend(["hs_norm_sq", "tail_bound", "smallness_ok"].iter().map(|s| s.to_string()));
    out.write_record(&header)?;
    for (t, r) in rows {
        let mut rec = vec![
            format!("{t}"),
            format!("{}", r.kappa[0]),
            format!("{}", r.kappa[1]),
            format!("{}", r.order),
            format!("{:e}", r.value),
        ];
        rec.extend((0..order).map(|j| r.terms.get(j).map(|v| format!("{v:e}")).unwrap_or_default()));
        rec.push(format!("{:e}", r.hs_norm_sq));
        rec.push(format!("{:e}", r.tail_bound));
        rec.push(format!("{}", r.smallness_ok));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
