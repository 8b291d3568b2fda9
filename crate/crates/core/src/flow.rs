//! Time integrators for cubic NLS, renormalised NLS, complex mKdV,
//! renormalised mKdV and the mKdV-NLS equation, plus residual evaluation.
//!
//! Conventions (upper sign = defocusing, `s = +1`):
//!
//! ```text
//! NLS       i u_t = u_xx − 2s|u|²u                 û_t = iξ² û + (2is|u|²u)^
//! NLS2      i u_t = u_xx − 2s(|u|² − 2μ)u
//! mKdV      u_t = −u_xxx + 6s|u|²u_x               û_t = iξ³ û + (6s|u|²u_x)^
//! mKdV3     u_t = −u_xxx + 6s(|u|² − μ)u_x
//! mKdV-NLS  v_t = −v_xxx − 3iβ v_xx + 6s|v|²v_x + 6iβs|v|²v
//! ```
//!
//! with `μ = ⨍|u|² dx`.

use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::lattice::{FrequencyLattice, SpectralField, SpectralGrid};
use crate::spaces;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Sign of the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Focusing,
    Defocusing,
}

impl Sign {
    /// `+1` defocusing, `−1` focusing.
    pub fn value(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }
}

impl FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "defocusing" | "+" => Ok(Sign::Defocusing),
            "focusing" | "-" => Ok(Sign::Focusing),
            _ => Err(Error::invalid(format!("unknown sign '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Equation {
    Nls { sign: Sign },
    RenormalizedNls { sign: Sign },
    Mkdv { sign: Sign },
    RenormalizedMkdv { sign: Sign },
    MkdvNls { sign: Sign, beta: f64 },
}

impl Equation {
    pub fn sign(&self) -> Sign {
        match *self {
            Equation::Nls { sign }
            | Equation::RenormalizedNls { sign }
            | Equation::Mkdv { sign }
            | Equation::RenormalizedMkdv { sign }
            | Equation::MkdvNls { sign, .. } => sign,
        }
    }

    pub fn is_mkdv_family(&self) -> bool {
        !matches!(self, Equation::Nls { .. } | Equation::RenormalizedNls { .. })
    }

    /// Linear symbol `L(ξ)` in `û_t = L(ξ) û + N̂`.
    pub fn linear_symbol(&self, xi: f64) -> Complex64 {
        match *self {
            Equation::Nls { .. } | Equation::RenormalizedNls { .. } => I * (xi * xi),
            Equation::Mkdv { .. } | Equation::RenormalizedMkdv { .. } => I * (xi * xi * xi),
            Equation::MkdvNls { beta, .. } => I * (xi * xi * xi + 3.0 * beta * xi * xi),
        }
    }

    /// Time exponent of the scaling symmetry (2 for NLS, 3 for mKdV).
    pub fn scaling_order(&self) -> i32 {
        if self.is_mkdv_family() { 3 } else { 2 }
    }

    pub fn parse(name: &str, sign: Sign, beta: f64) -> Result<Self> {
        Ok(match name {
            "nls" => Equation::Nls { sign },
            "nls2" | "renormalized-nls" => Equation::RenormalizedNls { sign },
            "mkdv" => Equation::Mkdv { sign },
            "mkdv3" | "renormalized-mkdv" => Equation::RenormalizedMkdv { sign },
            "mkdv-nls" => Equation::MkdvNls { sign, beta },
            _ => return Err(Error::invalid(format!("unknown equation '{name}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    StrangSplit,
    IntegratingFactorRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub equation: Equation,
    pub dt: f64,
    pub integrator: Integrator,
    /// Zero-padded product grid (alias-free for cubic terms) when true;
    /// collocation grid with exactly `mode_count` points otherwise.
    pub dealias: bool,
    /// Multiplies the nonlinearity; 1 for the actual equations.
    #[serde(default = "one")]
    pub coupling: f64,
}

fn one() -> f64 {
    1.0
}

impl FlowSpec {
    /// Strang splitting for the NLS family, integrating-factor RK4 for mKdV.
    pub fn new(equation: Equation, dt: f64) -> Self {
        let integrator = if equation.is_mkdv_family() {
            Integrator::IntegratingFactorRk4
        } else {
            Integrator::StrangSplit
        };
        Self { equation, dt, integrator, dealias: true, coupling: 1.0 }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.equation.is_mkdv_family() && self.integrator != Integrator::IntegratingFactorRk4 {
            return Err(Error::invalid("mKdV-family equations need the integrating-factor RK4 scheme"));
        }
        if let Equation::MkdvNls { beta, .. } = self.equation {
            if !beta.is_finite() {
                return Err(Error::invalid("beta must be finite"));
            }
        }
        Ok(())
    }

    fn grid_size(&self, lattice: &FrequencyLattice) -> usize {
        if self.dealias {
            lattice.default_grid_size()
        } else {
            lattice.mode_count()
        }
    }
}

/// Reusable stepping workspace for one lattice and flow.
pub struct Stepper {
    spec: FlowSpec,
    lattice: FrequencyLattice,
    grid: SpectralGrid,
    freqs: Vec<f64>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    phys: Vec<Complex64>,
    phys_x: Vec<Complex64>,
    spec_tmp: Vec<Complex64>,
    stages: [Vec<Complex64>; 5],
}

impl Stepper {
    pub fn new(lattice: FrequencyLattice, spec: FlowSpec) -> Result<Self> {
        spec.validate()?;
        let grid = SpectralGrid::new(lattice, spec.grid_size(&lattice))?;
        let freqs = lattice.frequencies();
        let half = freqs.iter().map(|&xi| (spec.equation.linear_symbol(xi) * (0.5 * spec.dt)).exp()).collect();
        let full = freqs.iter().map(|&xi| (spec.equation.linear_symbol(xi) * spec.dt).exp()).collect();
        let m = grid.size();
        let n = lattice.mode_count();
        Ok(Self {
            spec,
            lattice,
            grid,
            freqs,
            half,
            full,
            phys: vec![ZERO; m],
            phys_x: vec![ZERO; m],
            spec_tmp: vec![ZERO; n],
            stages: std::array::from_fn(|_| vec![ZERO; n]),
        })
    }

    pub fn spec(&self) -> &FlowSpec {
        &self.spec
    }

    fn mean_intensity(&self, u: &[Complex64]) -> f64 {
        u.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.lattice.spacing() / self.lattice.period()
    }

    /// `N̂(u)` for the configured equation, scaled by the coupling.
    pub fn nonlinear(&mut self, u: &[Complex64], out: &mut [Complex64]) {
        let s = self.spec.equation.sign().value();
        let g = self.spec.coupling;
        let mu = self.mean_intensity(u);
        self.grid.to_physical(u, &mut self.phys);
        match self.spec.equation {
            Equation::Nls { .. } | Equation::RenormalizedNls { .. } => {
                let shift = if matches!(self.spec.equation, Equation::RenormalizedNls { .. }) { 2.0 * mu } else { 0.0 };
                for v in self.phys.iter_mut() {
                    *v = I * (2.0 * s * g * (v.norm_sqr() - shift)) * *v;
                }
            }
            eq => {
                for ((d, c), xi) in self.spec_tmp.iter_mut().zip(u).zip(&self.freqs) {
                    *d = I * *xi * c;
                }
                self.grid.to_physical(&self.spec_tmp, &mut self.phys_x);
                let (shift, beta) = match eq {
                    Equation::RenormalizedMkdv { .. } => (mu, 0.0),
                    Equation::MkdvNls { beta, .. } => (0.0, beta),
                    _ => (0.0, 0.0),
                };
                for (v, vx) in self.phys.iter_mut().zip(&self.phys_x) {
                    let a = v.norm_sqr();
                    *v = (6.0 * s * g) * ((a - shift) * vx + I * (beta * a) * *v);
                }
            }
        }
        self.grid.to_spectral(&mut self.phys, out);
    }

    /// Advances `u` (lattice coefficients) by one `dt`.
    pub fn step(&mut self, u: &mut [Complex64]) -> Result<()> {
        let before: f64 = u.iter().map(|c| c.norm_sqr()).sum();
        match self.spec.integrator {
            Integrator::StrangSplit => self.strang(u),
            Integrator::IntegratingFactorRk4 => self.ifrk4(u),
        }
        let after: f64 = u.iter().map(|c| c.norm_sqr()).sum();
        if !after.is_finite() {
            return Err(Error::numerical("non-finite state"));
        }
        if after > 1.21 * before && before > 0.0 {
            return Err(Error::numerical(format!(
                "L² norm grew by {:.1}% in one step",
                100.0 * ((after / before).sqrt() - 1.0)
            )));
        }
        Ok(())
    }

    fn strang(&mut self, u: &mut [Complex64]) {
        for (c, e) in u.iter_mut().zip(&self.half) {
            *c *= e;
        }
        if !self.spec.equation.is_mkdv_family() {
            let s = self.spec.equation.sign().value();
            let shift = match self.spec.equation {
                Equation::RenormalizedNls { .. } => 2.0 * self.mean_intensity(u),
                _ => 0.0,
            };
            let rate = 2.0 * s * self.spec.coupling * self.spec.dt;
            self.grid.to_physical(u, &mut self.phys);
            for v in self.phys.iter_mut() {
                *v *= Complex64::from_polar(1.0, rate * (v.norm_sqr() - shift));
            }
            self.grid.to_spectral(&mut self.phys, u);
        }
        for (c, e) in u.iter_mut().zip(&self.half) {
            *c *= e;
        }
    }

    fn ifrk4(&mut self, u: &mut [Complex64]) {
        let dt = self.spec.dt;
        let n = u.len();
        let mut stages = std::mem::take(&mut self.stages);
        let [a, b, c, d, w] = &mut stages;

        self.nonlinear(u, a);
        for j in 0..n {
            a[j] *= dt;
            w[j] = self.half[j] * (u[j] + 0.5 * a[j]);
        }
        self.nonlinear(w, b);
        for j in 0..n {
            b[j] *= dt;
            w[j] = self.half[j] * u[j] + 0.5 * b[j];
        }
        self.nonlinear(w, c);
        for j in 0..n {
            c[j] *= dt;
            w[j] = self.full[j] * u[j] + self.half[j] * c[j];
        }
        self.nonlinear(w, d);
        for j in 0..n {
            d[j] *= dt;
            u[j] = self.full[j] * u[j]
                + (self.full[j] * a[j] + 2.0 * self.half[j] * (b[j] + c[j]) + d[j]) / 6.0;
        }
        self.stages = stages;
    }
}

/// One step of size `spec.dt`.
pub fn step(state: &SpectralField, spec: &FlowSpec) -> Result<SpectralField> {
    let mut stepper = Stepper::new(*state.lattice(), *spec)?;
    let mut u = state.coeffs().to_vec();
    stepper.step(&mut u)?;
    SpectralField::new(*state.lattice(), u)
}

/// `N̂(u)` of an equation (unit coupling) on the dealiased grid.
pub fn nonlinearity(u: &SpectralField, equation: Equation) -> Result<SpectralField> {
    let mut stepper = Stepper::new(*u.lattice(), FlowSpec::new(equation, 1.0))?;
    let mut out = vec![ZERO; u.lattice().mode_count()];
    stepper.nonlinear(u.coeffs(), &mut out);
    SpectralField::new(*u.lattice(), out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub l2: f64,
    pub mean_intensity: f64,
    pub fl4: f64,
}

impl Diagnostics {
    pub fn of(time: f64, f: &SpectralField) -> Self {
        Self {
            time,
            l2: f.l2_norm(),
            mean_intensity: f.mean_intensity(),
            fl4: spaces::fourier_lebesgue_norm(f, 0.0, 4.0).unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: SpectralField,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: FlowSpec,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<Diagnostics>,
}

impl Trajectory {
    /// Builds a trajectory from externally produced snapshots (e.g. a transformed one).
    pub fn from_snapshots(spec: FlowSpec, snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::invalid("snapshot times must increase strictly"));
        }
        if let Some(first) = snapshots.first() {
            if snapshots.iter().any(|s| s.field.lattice() != first.field.lattice()) {
                return Err(Error::LatticeMismatch("snapshots on different lattices".into()));
            }
        }
        let diagnostics = snapshots.iter().map(|s| Diagnostics::of(s.time, &s.field)).collect();
        Ok(Self { spec, snapshots, diagnostics })
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &SpectralField {
        &self.snapshots.last().expect("nonempty trajectory").field
    }

    /// Largest `|‖u(t)‖ − ‖u(0)‖| / ‖u(0)‖` over the snapshots.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.diagnostics[0].l2;
        if m0 == 0.0 {
            return 0.0;
        }
        self.diagnostics.iter().map(|d| (d.l2 - m0).abs() / m0).fold(0.0, f64::max)
    }

    /// Directory with `snap_XXXXX.bin` field dumps, `manifest.json` and `diagnostics.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (i, s) in self.snapshots.iter().enumerate() {
            let name = format!("snap_{i:05}.bin");
            io::save_field(&s.field, &dir.join(&name))?;
            files.push(name);
        }
        let manifest = Manifest {
            spec: self.spec,
            times: self.times(),
            files,
            diagnostics: self.diagnostics.clone(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        let mut w = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
        for d in &self.diagnostics {
            w.serialize(d)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let snapshots = manifest
            .times
            .iter()
            .zip(&manifest.files)
            .map(|(&time, f)| Ok(Snapshot { time, field: io::load_field(&dir.join(f))? }))
            .collect::<Result<Vec<_>>>()?;
        Self::from_snapshots(manifest.spec, snapshots)
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    spec: FlowSpec,
    times: Vec<f64>,
    files: Vec<String>,
    diagnostics: Vec<Diagnostics>,
}

/// Integrates to `t_final`, recording snapshots at `snap_times` (multiples of `dt`).
/// Time 0 is always recorded.
pub fn evolve(u0: &SpectralField, spec: &FlowSpec, t_final: f64, snap_times: &[f64]) -> Result<Trajectory> {
    spec.validate()?;
    if !(t_final >= 0.0) {
        return Err(Error::invalid("final time must be nonnegative"));
    }
    let steps = (t_final / spec.dt).round() as u64;
    if ((steps as f64) * spec.dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::invalid("final time is not a multiple of dt"));
    }
    let mut snap_steps = vec![0u64];
    for &t in snap_times {
        if t < 0.0 || t > t_final * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("snapshot time {t} outside [0, T]")));
        }
        let k = (t / spec.dt).round() as u64;
        if ((k as f64) * spec.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid(format!("snapshot time {t} is not a multiple of dt")));
        }
        snap_steps.push(k);
    }
    snap_steps.sort_unstable();
    snap_steps.dedup();

    let lattice = *u0.lattice();
    let mut stepper = Stepper::new(lattice, *spec)?;
    let mut u = u0.coeffs().to_vec();
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut next = 0usize;
    for n in 0..=steps {
        if next < snap_steps.len() && snap_steps[next] == n {
            snapshots.push(Snapshot { time: n as f64 * spec.dt, field: SpectralField::from_raw(lattice, u.clone()) });
            next += 1;
        }
        if n < steps {
            stepper.step(&mut u)?;
        }
    }
    Trajectory::from_snapshots(*spec, snapshots)
}

/// Snapshot times `0, every, 2·every, …, T`.
pub fn uniform_snap_times(t_final: f64, every: f64) -> Vec<f64> {
    let n = (t_final / every).round() as usize;
    (0..=n).map(|i| i as f64 * every).collect()
}

/// Residual norms at interior snapshots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

/// `‖∂_t u − L u − N(u)‖_{L²}` at each interior snapshot.
///
/// The time derivative is a centred difference taken in the interaction
/// picture `w = e^{-tL} û`, where `∂_t w = e^{-tL}(∂_t û − Lû)`; the unitary
/// factor leaves the norm unchanged while the stiff dispersive phase drops
/// out of the difference quotient.
pub fn residual(traj: &Trajectory, equation: Equation) -> Result<ResidualReport> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(Error::invalid("residual needs at least three snapshots"));
    }
    let h = snaps[1].time - snaps[0].time;
    if snaps.windows(2).any(|w| ((w[1].time - w[0].time) - h).abs() > 1e-9 * h.max(1e-300)) {
        return Err(Error::invalid("snapshots are not equispaced in time"));
    }
    let lattice = *snaps[0].field.lattice();
    let freqs = lattice.frequencies();
    let symbols: Vec<Complex64> = freqs.iter().map(|&xi| equation.linear_symbol(xi)).collect();
    let mut stepper = Stepper::new(lattice, FlowSpec::new(equation, 1.0))?;
    let pull = |s: &Snapshot, j: usize| (-symbols[j] * s.time).exp() * s.field.coeffs()[j];
    let mut nl = vec![ZERO; lattice.mode_count()];
    let mut times = Vec::new();
    let mut norms = Vec::new();
    for i in 1..snaps.len() - 1 {
        let (prev, cur, next) = (&snaps[i - 1], &snaps[i], &snaps[i + 1]);
        stepper.nonlinear(cur.field.coeffs(), &mut nl);
        let mut acc = 0.0;
        for j in 0..lattice.mode_count() {
            let dw = (pull(next, j) - pull(prev, j)) / (2.0 * h);
            let r = dw - (-symbols[j] * cur.time).exp() * nl[j];
            acc += r.norm_sqr();
        }
        times.push(cur.time);
        norms.push((acc * lattice.spacing()).sqrt());
    }
    Ok(ResidualReport { times, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_lattice;
    use std::f64::consts::PI;

    #[test]
    fn zero_stays_zero() {
        let l = make_lattice(1, 8).unwrap();
        let z = SpectralField::zeros(l);
        for eq in [Equation::Nls { sign: Sign::Defocusing }, Equation::Mkdv { sign: Sign::Focusing }] {
            assert!(step(&z, &FlowSpec::new(eq, 1e-3)).unwrap().is_zero());
        }
    }

    #[test]
    fn linear_phase() {
        let l = make_lattice(1, 8).unwrap();
        let f = SpectralField::from_modes(l, &[(3, Complex64::new(1.0, 0.0))]).unwrap();
        let spec = FlowSpec::new(Equation::Nls { sign: Sign::Defocusing }, 1e-3).with_coupling(0.0);
        let g = step(&f, &spec).unwrap();
        assert!((g.at(3) - Complex64::from_polar(1.0, 9e-3)).norm() < 1e-15);
    }

    #[test]
    fn plane_wave_phase() {
        let l = make_lattice(1, 8).unwrap();
        let (m, c) = (2i64, 0.3);
        let f = SpectralField::from_modes(l, &[(m, Complex64::new(c * (2.0 * PI).sqrt(), 0.0))]).unwrap();
        for sign in [Sign::Defocusing, Sign::Focusing] {
            let spec = FlowSpec::new(Equation::Nls { sign }, 1e-3);
            let traj = evolve(&f, &spec, 1.0, &[1.0]).unwrap();
            let omega = (m * m) as f64 + 2.0 * sign.value() * c * c;
            let want = Complex64::new(c * (2.0 * PI).sqrt(), 0.0) * Complex64::from_polar(1.0, omega);
            assert!((traj.last().at(m) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = FlowSpec::new(Equation::Mkdv { sign: Sign::Defocusing }, 1e-3);
        s.integrator = Integrator::StrangSplit;
        assert!(s.validate().is_err());
        assert!(FlowSpec::new(Equation::Nls { sign: Sign::Defocusing }, 0.0).validate().is_err());
        let l = make_lattice(1, 4).unwrap();
        let z = SpectralField::zeros(l);
        let spec = FlowSpec::new(Equation::Nls { sign: Sign::Defocusing }, 0.1);
        assert!(evolve(&z, &spec, 1.0, &[0.25]).is_err());
    }

    #[test]
    fn blowup_guard_trips() {
        let l = make_lattice(1, 16).unwrap();
        let f = SpectralField::from_modes(l, &[(0, Complex64::new(30.0, 0.0)), (1, Complex64::new(10.0, 0.0))]).unwrap();
        let spec = FlowSpec::new(Equation::Mkdv { sign: Sign::Focusing }, 0.05);
        let err = evolve(&f, &spec, 5.0, &[]).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn residual_of_zero_trajectory() {
        let l = make_lattice(1, 4).unwrap();
        let spec = FlowSpec::new(Equation::Nls { sign: Sign::Defocusing }, 0.1);
        let traj = evolve(&SpectralField::zeros(l), &spec, 0.3, &uniform_snap_times(0.3, 0.1)).unwrap();
        assert_eq!(residual(&traj, spec.equation).unwrap().max(), 0.0);
    }
}
