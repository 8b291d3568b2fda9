use std::path::Path;
use std::process::{Command, Stdio};

use integrable_lab::harness::{
    growth_bound_experiment, modulated_family_sum, scaling_reduction, DataSpec, ExperimentConfig, FamilyMode,
    FamilyOptions,
};
use integrable_lab::io::load_field;
use integrable_lab::lattice::{make_lattice, random_band_limited, SpectralField};
use integrable_lab::spaces::modulation_norm;
use integrable_lab::Complex64;

fn run(args: &[&str], dir: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_integrable-lab"))
        .args(args)
        .current_dir(dir)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn family_of_the_zero_field_vanishes() {
    let z = SpectralField::zeros(make_lattice(2, 8).unwrap());
    let rep = modulated_family_sum(&z, &FamilyOptions::new(4.0, 0.0, 3)).unwrap();
    assert_eq!(rep.members.len(), 7);
    assert_eq!(rep.alpha_aggregate, 0.0);
    assert_eq!(rep.error_aggregate, 0.0);
    assert_eq!(rep.y3_ratio(), 0.0);
    assert!(rep.smallness_ok && rep.failed_members.is_empty());
}

#[test]
fn galilean_and_complex_kappa_leading_parts_agree() {
    let u = random_band_limited(make_lattice(2, 8).unwrap(), 6, 0.05, 4).unwrap();
    let mut opts = FamilyOptions::new(4.0, 0.0, 3);
    let gal = modulated_family_sum(&u, &opts).unwrap();
    opts.mode = FamilyMode::ComplexKappa;
    let cpx = modulated_family_sum(&u, &opts).unwrap();
    assert!((gal.leading_aggregate - cpx.leading_aggregate).abs() <= 1e-10 * gal.leading_aggregate);
    assert!(gal.leading_identity_error <= 1e-10);
}

#[test]
fn family_error_is_quartic_for_small_data() {
    let l = make_lattice(1, 8).unwrap();
    let opts = FamilyOptions::new(4.0, 0.0, 4);
    let mut ratios = Vec::new();
    for a in [0.01, 0.02, 0.04] {
        let u = SpectralField::from_modes(l, &[(0, Complex64::new(a, 0.0)), (1, Complex64::new(0.0, a / 2.0))]).unwrap();
        let rep = modulated_family_sum(&u, &opts).unwrap();
        assert!(rep.smallness_ok);
        ratios.push(rep.y3_ratio());
    }
    // error / ‖u‖⁴ settles to a constant as the data shrink.
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0 && *r < 10.0), "{ratios:?}");
    assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.05, "{ratios:?}");
}

#[test]
fn scaling_reduction_picks_the_smallest_scale() {
    let u = random_band_limited(make_lattice(1, 8).unwrap(), 4, 1.0, 2).unwrap();
    let tiny = u.scaled(Complex64::new(1e-3, 0.0));
    assert_eq!(scaling_reduction(&tiny, 4.0, 0.0, 0.05, 1 << 10).unwrap().lambda, 1);
    let mut last = 1;
    for size in [0.5, 1.0, 2.0] {
        let red = scaling_reduction(&u.scaled(Complex64::new(size, 0.0)), 4.0, 0.0, 0.2, 1 << 16).unwrap();
        assert!(red.lambda >= last && red.mod_norm <= 0.2);
        let g = red.field.as_ref().unwrap();
        assert!((modulation_norm(g, 0.0, 4.0).unwrap() - red.mod_norm).abs() < 1e-15);
        if red.lambda > 1 {
            // The next scale down was not small enough.
            assert!(red.searched[red.searched.len() - 2].1 > 0.2);
        }
        last = red.lambda;
    }
    assert!(last > 1);
    assert!(scaling_reduction(&u.scaled(Complex64::new(16.0, 0.0)), 4.0, 0.0, 0.05, 2).is_err());
    assert!(scaling_reduction(&u, 4.0, 0.0, 0.0, 8).is_err());
}

#[test]
fn zero_data_certifies_trivially() {
    let config = ExperimentConfig { data: DataSpec::Zero, t_final: 1.0, n_mod: Some(2), ..ExperimentConfig::default() };
    let rec = growth_bound_experiment(&config).unwrap();
    assert_eq!(rec.scaling.lambda, 1);
    assert!(rec.certificate.passed && rec.certificate.sup_ratio.is_none());
}

#[test]
fn config_parses_from_toml() {
    let text = r#"
        equation = "mkdv"
        sign = "focusing"
        p = 6.0
        s = 0.25
        epsilon = 0.1
        T = 2.0
        n_mod = 3
        family_mode = "complex_kappa"
        [data]
        kind = "band_limited"
        support = 3
    "#;
    let c = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(c.equation, "mkdv");
    assert_eq!(c.t_final, 2.0);
    assert_eq!(c.family_mode, FamilyMode::ComplexKappa);
    assert_eq!(c.data, DataSpec::BandLimited { support: 3 });
    c.validate().unwrap();
    assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    let bad = ExperimentConfig { s: 0.9, ..ExperimentConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["identity-suite", "--lambda", "1", "--cutoff", "64"], d), 0);
    assert_eq!(run(&["certify", "--data", "zero", "--t-final", "1", "--n-mod", "2"], d), 0);
    // 2κ_i = 1/2 is not a frequency of the unit torus.
    assert_eq!(run(&["alpha", "--kappa-im", "0.25"], d), 2);
    assert_eq!(run(&["alpha", "--kappa-re", "-1"], d), 2);
    assert_eq!(run(&["no-such-command"], d), 2);
    assert_eq!(run(&["norms", "--p", "1"], d), 2);
}

#[test]
fn cli_generates_and_reads_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.json");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["gen", "--kind", "gaussian", "--alpha", "1", "--cutoff", "16", "--seed", "3", "--out", o], dir.path()), 0);
    let f = load_field(&out).unwrap();
    assert_eq!(f.lattice().half_width(), 16);
    assert_eq!(run(&["norms", "--field", o], dir.path()), 0);
    assert_eq!(run(&["alpha", "--field", o, "--order", "4"], dir.path()), 0);
}

#[test]
fn cli_certify_writes_records_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = out.to_str().unwrap();
    let args = [
        "certify", "--equation", "nls", "--size", "0.5", "--epsilon", "0.4", "--n-mod", "3", "--t-final", "0.5",
        "--data", "band-limited:3", "--seed", "1", "--output-dir", o, "--plot",
    ];
    assert_eq!(run(&args, dir.path()), 0);
    for name in ["record.json", "timeseries.csv", "norms.svg", "alpha.svg"] {
        let meta = std::fs::metadata(out.join(name)).unwrap();
        assert!(meta.len() > 0, "{name}");
    }
    let svg = std::fs::read_to_string(out.join("norms.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.contains("<svg"));
}
