//! Scaling reduction and global-in-time growth certificates.
//!
//! Pipeline: pick the smallest power-of-two `λ` that makes the rescaled datum
//! `ε`-small in `M^{2,p}_s(T_λ)`, evolve on `T_λ` (steps `λ^k dt`, `k` the
//! scaling order of the flow, so each step is the image of a unit-torus step),
//! re-check smallness and the quartic error bound on every snapshot, and undo
//! the scaling to bound `sup_t ‖u(t)‖_{FL^{s,p}(T)}`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::family::{modulated_family_sum, FamilyMode, FamilyOptions, FamilyReport};
use crate::determinant::{AlphaOptions, DEFAULT_C0, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::flow::{Equation, FlowSpec, Sign, Stepper};
use crate::io;
use crate::lattice::{random_band_limited, random_gaussian_data, FrequencyLattice, SpectralField};
use crate::spaces;
use crate::symmetry;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAmplitude {
    pub k: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Initial data on the unit torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Zero,
    Modes { modes: Vec<ModeAmplitude> },
    /// `û(n) = g_n ⟨n⟩^{-α}`, seeded by the config seed.
    Gaussian { alpha: f64 },
    /// Gaussian coefficients on `|n| ≤ support`.
    BandLimited { support: i64 },
    File { path: PathBuf },
}

impl Default for DataSpec {
    /// A dominant zero mode with two weaker neighbours.
    fn default() -> Self {
        let m = |k, re| ModeAmplitude { k, re, im: 0.0 };
        DataSpec::Modes { modes: vec![m(0, 1.0), m(1, 0.3), m(-1, 0.2)] }
    }
}

impl DataSpec {
    pub fn build(&self, cutoff: u32, seed: u64) -> Result<SpectralField> {
        let lat = FrequencyLattice::new(1, cutoff)?;
        match self {
            DataSpec::Zero => Ok(SpectralField::zeros(lat)),
            DataSpec::Modes { modes } => {
                let pairs: Vec<(i64, Complex64)> = modes.iter().map(|m| (m.k, Complex64::new(m.re, m.im))).collect();
                SpectralField::from_modes(lat, &pairs)
            }
            DataSpec::Gaussian { alpha } => random_gaussian_data(lat, *alpha, seed),
            DataSpec::BandLimited { support } => random_band_limited(lat, *support, 1.0, seed),
            DataSpec::File { path } => {
                let f = io::load_field(path)?;
                if f.lattice().lambda() != 1 {
                    return Err(Error::invalid("initial data must live on the unit torus"));
                }
                Ok(f.retruncate(lat)?.0)
            }
        }
    }
}

/// Experiment configuration; TOML files use these field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `nls`, `nls2`, `mkdv`, `mkdv3` or `mkdv-nls`.
    pub equation: String,
    pub sign: Sign,
    pub beta: f64,
    /// Step on the unit torus.
    pub dt: f64,
    pub dealias: bool,
    /// Cutoff of the unit-torus lattice.
    pub cutoff: u32,
    /// Fixed scale instead of the search.
    pub lambda: Option<u32>,
    pub lambda_cap: u32,
    pub p: f64,
    pub s: f64,
    pub epsilon: f64,
    /// Family half-width; `None` means rescaled cutoff + 16.
    pub n_mod: Option<i64>,
    pub family_mode: FamilyMode,
    pub order: usize,
    pub c0: f64,
    pub window_margin: f64,
    pub max_kernel_dim: usize,
    /// Allowed `error_aggregate / ‖u‖⁴_{M^{2,p}_s}` per snapshot.
    pub y3_constant: f64,
    /// Allowed `‖u(t)‖_{M^{2,p}_s} / ‖u(0)‖_{M^{2,p}_s}` on `T_λ`.
    pub growth_constant: f64,
    #[serde(alias = "T")]
    pub t_final: f64,
    pub snap_every: f64,
    pub snap_times: Option<Vec<f64>>,
    pub seed: u64,
    pub data: DataSpec,
    /// Rescale the data so that `‖u0‖_{FL^{s,p}(T)}` equals this.
    pub size: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            equation: "nls".into(),
            sign: Sign::Defocusing,
            beta: 0.0,
            dt: 1e-3,
            dealias: true,
            cutoff: 64,
            lambda: None,
            lambda_cap: 1 << 12,
            p: 4.0,
            s: 0.0,
            epsilon: 0.05,
            n_mod: None,
            family_mode: FamilyMode::Galilean,
            order: DEFAULT_ORDER,
            c0: DEFAULT_C0,
            window_margin: 2.0,
            max_kernel_dim: 1024,
            y3_constant: 10.0,
            growth_constant: 2.0,
            t_final: 10.0,
            snap_every: 1.0,
            snap_times: None,
            seed: 0,
            data: DataSpec::default(),
            size: None,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn equation(&self) -> Result<Equation> {
        Equation::parse(&self.equation, self.sign, self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.equation()?;
        if !(2.0..f64::INFINITY).contains(&self.p) {
            return Err(Error::invalid(format!("p must lie in [2, ∞), got {}", self.p)));
        }
        if !(self.s >= 0.0 && self.s < 1.0 - 1.0 / self.p) {
            return Err(Error::invalid(format!("need 0 ≤ s < 1 − 1/p, got s = {}", self.s)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) || !(self.snap_every > 0.0) {
            return Err(Error::invalid("dt and snap_every must be positive, T nonnegative"));
        }
        if self.order == 0 || !(self.c0 > 0.0) || !(self.window_margin > 0.0) {
            return Err(Error::invalid("order, c0 and window_margin must be positive"));
        }
        if self.n_mod.is_some_and(|n| n < 0) {
            return Err(Error::invalid("n_mod must be ≥ 0"));
        }
        if self.size.is_some_and(|v| !(v >= 0.0)) {
            return Err(Error::invalid("size must be ≥ 0"));
        }
        if self.lambda == Some(0) || self.lambda_cap == 0 {
            return Err(Error::invalid("lambda must be ≥ 1"));
        }
        Ok(())
    }

    /// Initial datum on the unit torus, normalised when `size` is set.
    pub fn initial_data(&self) -> Result<SpectralField> {
        let u = self.data.build(self.cutoff, self.seed)?;
        match self.size {
            Some(target) if !u.is_zero() => {
                let n = spaces::fourier_lebesgue_norm(&u, self.s, self.p)?;
                Ok(u.scaled(Complex64::new(target / n, 0.0)))
            }
            Some(_) => Ok(u),
            None => Ok(u),
        }
    }

    fn snap_times(&self) -> Vec<f64> {
        let mut t = match &self.snap_times {
            Some(v) => v.clone(),
            None => crate::flow::uniform_snap_times(self.t_final, self.snap_every),
        };
        t.retain(|&x| x <= self.t_final * (1.0 + 1e-12));
        t
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReduction {
    pub lambda: u32,
    #[serde(skip)]
    pub field: Option<SpectralField>,
    /// `‖u0‖_{FL^{s,p}(T)}`.
    pub fl_norm: f64,
    /// `‖u0_λ‖_{M^{2,p}_s(T_λ)}` at the chosen `λ`.
    pub mod_norm: f64,
    /// `λ / (1 + ‖u0‖_{FL^{s,p}})^p`.
    pub lambda_constant: f64,
    /// `(λ, ‖u0_λ‖_{M^{2,p}_s})` for every scale tried.
    pub searched: Vec<(u32, f64)>,
}

/// Smallest power of two `λ ≤ cap` with `‖u0_λ‖_{M^{2,p}_s(T_λ)} ≤ ε`.
pub fn scaling_reduction(u0: &SpectralField, p: f64, s: f64, epsilon: f64, cap: u32) -> Result<ScalingReduction> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let fl_norm = spaces::fourier_lebesgue_norm(u0, s, p)?;
    let mut searched = Vec::new();
    let mut lambda = 1u32;
    loop {
        let g = symmetry::rescale(u0, lambda)?;
        let m = spaces::modulation_norm(&g, s, p)?;
        searched.push((lambda, m));
        if m <= epsilon {
            return Ok(ScalingReduction {
                lambda,
                field: Some(g),
                fl_norm,
                mod_norm: m,
                lambda_constant: lambda as f64 / (1.0 + fl_norm).powf(p),
                searched,
            });
        }
        match lambda.checked_mul(2) {
            Some(next) if next <= cap => lambda = next,
            _ => {
                return Err(Error::numerical(format!(
                    "no λ ≤ {cap} makes the datum {epsilon}-small (reached {m:.3e} at λ = {lambda})"
                )))
            }
        }
    }
}

/// Same bookkeeping for a fixed scale.
pub fn fixed_scaling(u0: &SpectralField, p: f64, s: f64, lambda: u32) -> Result<ScalingReduction> {
    let fl_norm = spaces::fourier_lebesgue_norm(u0, s, p)?;
    let g = symmetry::rescale(u0, lambda)?;
    let m = spaces::modulation_norm(&g, s, p)?;
    Ok(ScalingReduction {
        lambda,
        field: Some(g),
        fl_norm,
        mod_norm: m,
        lambda_constant: lambda as f64 / (1.0 + fl_norm).powf(p),
        searched: vec![(lambda, m)],
    })
}

/// One row of `timeseries.csv` plus the family details.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotRecord {
    /// Unit-torus time.
    pub t: f64,
    /// `‖u(t)‖_{L²(T)}`.
    pub l2: f64,
    /// `‖u(t)‖_{FL^{s,p}(T)}`.
    pub fl_norm: f64,
    /// `‖u_λ(t)‖_{M^{2,p}_s(T_λ)}`.
    pub mod_norm: f64,
    /// `‖u_λ(t)‖_{MH^{-1,p}_s(T_λ)}`.
    pub mh_norm: f64,
    pub family: FamilyReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub t: f64,
    pub l2: f64,
    pub fl_norm: f64,
    pub mod_norm: f64,
    pub mh_norm: f64,
    pub alpha_aggregate: f64,
    pub error_aggregate: f64,
    pub smallness_min_margin: f64,
}

impl From<&SnapshotRecord> for TimeseriesRow {
    fn from(r: &SnapshotRecord) -> Self {
        Self {
            t: r.t,
            l2: r.l2,
            fl_norm: r.fl_norm,
            mod_norm: r.mod_norm,
            mh_norm: r.mh_norm,
            alpha_aggregate: r.family.alpha_aggregate,
            error_aggregate: r.family.error_aggregate,
            smallness_min_margin: r.family.min_smallness_margin,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Certificate {
    /// Every family member at every snapshot satisfied `r ≤ c0`.
    pub smallness_ok: bool,
    /// Every snapshot had `error_aggregate ≤ y3_constant · ‖u‖⁴_{M^{2,p}_s}`.
    pub y3_ok: bool,
    pub y3_measured_max: f64,
    /// `‖u_λ(t)‖_M ≤ growth_constant · ‖u_λ(0)‖_M` on every snapshot.
    pub growth_ok: bool,
    pub growth_measured_max: f64,
    /// `sup_t ‖u(t)‖_{FL^{s,p}(T)} / ‖u(0)‖_{FL^{s,p}(T)}`; `None` for zero data.
    pub sup_ratio: Option<f64>,
    /// `sup_t ‖u(t)‖ / ((1 + ‖u(0)‖)^{p/2−1} ‖u(0)‖)`; `None` for zero data.
    pub certificate_constant: Option<f64>,
    /// Largest `‖u(t)‖_{FL^{s,p}(T)} / (λ^{1/2} ‖u_λ(t)‖_{M^{2,p}_s(T_λ)})`.
    pub unscaling_constant: f64,
    /// `unscaling_constant · λ^{1/2} · growth_constant · ‖u_λ(0)‖_M`.
    pub chain_bound: f64,
    /// `sup_t ‖u(t)‖_{FL^{s,p}(T)} ≤ chain_bound`.
    pub chain_consistent: bool,
    pub max_error_tail_fraction: f64,
    pub max_leading_identity_error: f64,
    pub guard_tripped: Option<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WallClock {
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub scaling: ScalingReduction,
    pub n_mod: i64,
    /// Step and horizon on `T_λ`.
    pub dt_scaled: f64,
    pub t_final_scaled: f64,
    pub snapshots: Vec<SnapshotRecord>,
    pub certificate: Certificate,
    pub wall_clock: WallClock,
}

impl ExperimentRecord {
    pub fn timeseries(&self) -> Vec<TimeseriesRow> {
        self.snapshots.iter().map(TimeseriesRow::from).collect()
    }

    pub fn write_timeseries<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in self.timeseries() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `record.json` and `timeseries.csv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("record.json"), serde_json::to_string_pretty(self)?)?;
        let file = std::fs::File::create(dir.join("timeseries.csv"))?;
        self.write_timeseries(std::io::BufWriter::new(file))
    }
}

/// Runs `u0` to every snapshot step; a tripped guard ends the run early and
/// is returned alongside the snapshots reached.
fn evolve_partial(
    u0: &SpectralField,
    spec: &FlowSpec,
    snap_steps: &[u64],
) -> Result<(Vec<(u64, SpectralField)>, Option<String>)> {
    let lattice = *u0.lattice();
    let mut stepper = Stepper::new(lattice, *spec)?;
    let mut u = u0.coeffs().to_vec();
    let mut out = Vec::with_capacity(snap_steps.len());
    let mut n = 0u64;
    for &target in snap_steps {
        while n < target {
            if let Err(e) = stepper.step(&mut u) {
                return match e {
                    Error::Numerical(msg) => Ok((out, Some(format!("t-step {n}: {msg}")))),
                    other => Err(other),
                };
            }
            n += 1;
        }
        out.push((n, SpectralField::new(lattice, u.clone())?));
    }
    Ok((out, None))
}

pub fn growth_bound_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    growth_bound_experiment_with(config, Execution::default())
}

pub fn growth_bound_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentRecord> {
    let started = Instant::now();
    config.validate()?;
    let equation = config.equation()?;
    let (p, s) = (config.p, config.s);
    let u0 = config.initial_data()?;
    let scaling = match config.lambda {
        Some(l) => fixed_scaling(&u0, p, s, l)?,
        None => scaling_reduction(&u0, p, s, config.epsilon, config.lambda_cap)?,
    };
    let lambda = scaling.lambda;
    let start = scaling.field.clone().expect("scaled field");
    let n_mod = config.n_mod.unwrap_or(start.lattice().cutoff() as i64 + 16);

    let time_scale = (lambda as f64).powi(equation.scaling_order());
    let mut spec = FlowSpec::new(equation, config.dt * time_scale);
    spec.dealias = config.dealias;
    let mut snap_steps: Vec<u64> = config
        .snap_times()
        .iter()
        .map(|&t| {
            let k = (t / config.dt).round();
            if (k * config.dt - t).abs() > 1e-9 * t.max(1.0) {
                Err(Error::invalid(format!("snapshot time {t} is not a multiple of dt")))
            } else {
                Ok(k as u64)
            }
        })
        .collect::<Result<_>>()?;
    snap_steps.push(0);
    snap_steps.sort_unstable();
    snap_steps.dedup();
    let (states, guard) = evolve_partial(&start, &spec, &snap_steps)?;

    let fam = FamilyOptions {
        p,
        s,
        n_mod,
        mode: config.family_mode,
        alpha: AlphaOptions { order: config.order, sign: config.sign, c0: config.c0, complete_first_order: true },
        window_margin: config.window_margin,
        max_kernel_dim: config.max_kernel_dim,
        execution,
    };
    let mut snapshots = Vec::with_capacity(states.len());
    for (k, g) in &states {
        let unit = symmetry::unscale(g)?;
        let mh_norm = if g.is_zero() { 0.0 } else { spaces::modulated_sobolev_norm(g, -1.0, p, s)?.value };
        snapshots.push(SnapshotRecord {
            t: *k as f64 * config.dt,
            l2: unit.l2_norm(),
            fl_norm: spaces::fourier_lebesgue_norm(&unit, s, p)?,
            mod_norm: spaces::modulation_norm(g, s, p)?,
            mh_norm,
            family: modulated_family_sum(g, &fam)?,
        });
    }
    let certificate = certify(config, &scaling, &snapshots, guard);
    Ok(ExperimentRecord {
        config: config.clone(),
        n_mod,
        dt_scaled: spec.dt,
        t_final_scaled: config.t_final * time_scale,
        scaling,
        snapshots,
        certificate,
        wall_clock: WallClock { seconds: started.elapsed().as_secs_f64() },
    })
}

fn certify(
    config: &ExperimentConfig,
    scaling: &ScalingReduction,
    snaps: &[SnapshotRecord],
    guard: Option<String>,
) -> Certificate {
    let p = config.p;
    let lam_sqrt = (scaling.lambda as f64).sqrt();
    let smallness_ok = snaps.iter().all(|r| r.family.smallness_ok);
    let y3_measured_max = snaps.iter().map(|r| r.family.y3_ratio()).fold(0.0, f64::max);
    let y3_ok = y3_measured_max <= config.y3_constant;
    let m0 = snaps.first().map(|r| r.mod_norm).unwrap_or(0.0);
    let growth_measured_max = if m0 > 0.0 { snaps.iter().map(|r| r.mod_norm / m0).fold(0.0, f64::max) } else { 0.0 };
    let growth_ok = growth_measured_max <= config.growth_constant;
    let fl0 = scaling.fl_norm;
    let sup_fl = snaps.iter().map(|r| r.fl_norm).fold(0.0, f64::max);
    let (sup_ratio, certificate_constant) = if fl0 > 0.0 {
        (Some(sup_fl / fl0), Some(sup_fl / ((1.0 + fl0).powf(0.5 * p - 1.0) * fl0)))
    } else {
        (None, None)
    };
    let unscaling_constant = snaps
        .iter()
        .filter(|r| r.mod_norm > 0.0)
        .map(|r| r.fl_norm / (lam_sqrt * r.mod_norm))
        .fold(0.0, f64::max);
    let chain_bound = unscaling_constant * lam_sqrt * config.growth_constant * m0;
    let chain_consistent = !growth_ok || sup_fl <= chain_bound * (1.0 + 1e-12);
    let passed = guard.is_none() && smallness_ok && y3_ok && growth_ok && chain_consistent;
    Certificate {
        smallness_ok,
        y3_ok,
        y3_measured_max,
        growth_ok,
        growth_measured_max,
        sup_ratio,
        certificate_constant,
        unscaling_constant,
        chain_bound,
        chain_consistent,
        max_error_tail_fraction: snaps.iter().map(|r| r.family.error_tail_fraction).fold(0.0, f64::max),
        max_leading_identity_error: snaps.iter().map(|r| r.family.leading_identity_error).fold(0.0, f64::max),
        guard_tripped: guard,
        passed,
    }
}

/// Least-squares slope of `log sup_ratio` against `log(1 + ‖u(0)‖)` over
/// records with nonzero data.
pub fn fit_growth_exponent(records: &[ExperimentRecord]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.certificate.sup_ratio.map(|q| ((1.0 + r.scaling.fl_norm).ln(), q.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig { epsilon: 0.4, n_mod: Some(3), ..Default::default() };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        let short = ExperimentConfig::from_toml("T = 2.0\np = 6\n[data]\nkind = \"zero\"\n").unwrap();
        assert_eq!(short.t_final, 2.0);
        assert_eq!(short.data, DataSpec::Zero);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn already_small_data_keeps_unit_scale() {
        let l = FrequencyLattice::new(1, 4).unwrap();
        let u = SpectralField::from_modes(l, &[(0, Complex64::new(0.01, 0.0))]).unwrap();
        let r = scaling_reduction(&u, 4.0, 0.0, 0.05, 64).unwrap();
        assert_eq!(r.lambda, 1);
        let big = u.scaled(Complex64::new(1e4, 0.0));
        assert!(matches!(scaling_reduction(&big, 4.0, 0.0, 0.05, 64), Err(Error::Numerical(_))));
    }

    #[test]
    fn weighted_regime_is_checked() {
        let c = ExperimentConfig { s: 0.8, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
