use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use integrable_lab::io::{field_from_json, field_to_json, read_field_binary, write_field_binary};
use integrable_lab::lattice::{
    analyze, convolve, make_lattice, random_band_limited, random_gaussian_data, synthesize, SpectralField,
};
use integrable_lab::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn lattice_examples() {
    let l = make_lattice(1, 2).unwrap();
    assert_eq!(l.modes().collect::<Vec<_>>(), vec![-2, -1, 0, 1, 2]);
    let l = make_lattice(2, 1).unwrap();
    assert_eq!(l.frequencies(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    assert_eq!(make_lattice(4, 32).unwrap().mode_count(), 257);
    assert!(make_lattice(0, 4).is_err());
    assert!(make_lattice(3, 0).is_err());
}

#[test]
fn synthesis_examples() {
    let l = make_lattice(1, 4).unwrap();
    let zero = synthesize(&SpectralField::zeros(l), 16).unwrap();
    assert!(zero.iter().all(|z| z.norm() == 0.0));

    let s2p = (2.0 * PI).sqrt();
    let one = synthesize(&SpectralField::from_modes(l, &[(0, c(s2p, 0.0))]).unwrap(), 16).unwrap();
    for z in &one {
        assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
    }

    let wave = synthesize(&SpectralField::from_modes(l, &[(1, c(s2p, 0.0))]).unwrap(), 16).unwrap();
    for (j, z) in wave.iter().enumerate() {
        let x = 2.0 * PI * j as f64 / 16.0;
        assert!((z - Complex64::from_polar(1.0, x)).norm() < 1e-14);
    }

    // Undersampled grids are rejected.
    assert!(synthesize(&SpectralField::zeros(l), 8).is_err());
}

#[test]
fn analysis_examples() {
    let l = make_lattice(1, 3).unwrap();
    let f = analyze(&vec![c(1.0, 0.0); 8], l).unwrap();
    assert!((f.at(0) - c((2.0 * PI).sqrt(), 0.0)).norm() < 1e-14);
    assert!(analyze(&vec![c(1.0, 0.0); 5], l).is_err());

    // e^{ix/2} on T_2 lives entirely on ξ = 1/2.
    let l2 = make_lattice(2, 2).unwrap();
    let m = 16;
    let samples: Vec<Complex64> =
        (0..m).map(|j| Complex64::from_polar(1.0, 0.5 * 4.0 * PI * j as f64 / m as f64)).collect();
    let g = analyze(&samples, l2).unwrap();
    for k in l2.modes() {
        if k != 1 {
            assert!(g.at(k).norm() <= 1e-12);
        }
    }
    assert!(g.at(1).norm() > 1.0);
}

#[test]
fn convolution_matches_physical_product() {
    let l = make_lattice(2, 6).unwrap();
    let f = random_band_limited(l, 5, 0.7, 1).unwrap();
    let g = random_band_limited(l, 5, 1.3, 2).unwrap();
    let h = convolve(&f, &g).unwrap();
    // The product of two fields supported on |k| ≤ 5 fits in |k| ≤ 10 < 12.
    let m = 64;
    let pf = synthesize(&f, m).unwrap();
    let pg = synthesize(&g, m).unwrap();
    let prod: Vec<Complex64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
    let oracle = analyze(&prod, l).unwrap();
    assert!(h.max_abs_diff(&oracle).unwrap() <= 1e-10);
}

#[test]
fn gaussian_data_properties() {
    let l = make_lattice(1, 40).unwrap();
    assert!(random_gaussian_data(l, -1.0, 0).is_err());
    assert!(random_gaussian_data(make_lattice(2, 4).unwrap(), 1.0, 0).is_err());
    assert_eq!(random_gaussian_data(l, 0.5, 9).unwrap(), random_gaussian_data(l, 0.5, 9).unwrap());

    // White noise: flat expected magnitude across modes.
    let low: f64 = (0..200).map(|s| random_gaussian_data(l, 0.0, s).unwrap().at(1).norm_sqr()).sum::<f64>() / 200.0;
    let high: f64 = (0..200).map(|s| random_gaussian_data(l, 0.0, s).unwrap().at(37).norm_sqr()).sum::<f64>() / 200.0;
    assert!((low / high - 1.0).abs() < 0.35, "{low} vs {high}");

    // α = 10 decays fast enough that the H¹ weight is harmless.
    let smooth = random_gaussian_data(l, 10.0, 3).unwrap();
    let h1: f64 = l.modes().map(|k| (1.0 + (k * k) as f64) * smooth.at(k).norm_sqr()).sum();
    assert!(h1.is_finite() && h1 < 10.0);
}

#[test]
fn gaussian_tail_converges_above_critical_exponent() {
    // α = 1/2, p = 3 > 1/α: the tail Σ_{|n|>N} E|û(n)|^p shrinks with N.
    let l = make_lattice(1, 256).unwrap();
    let p = 3.0;
    let tail = |n0: i64| -> f64 {
        (0..40)
            .map(|seed| {
                let f = random_gaussian_data(l, 0.5, seed).unwrap();
                l.modes().filter(|k| k.abs() > n0).map(|k| f.at(k).norm().powf(p)).sum::<f64>()
            })
            .sum::<f64>()
            / 40.0
    };
    let (t32, t128) = (tail(32), tail(128));
    assert!(t128 < 0.6 * t32, "{t32} -> {t128}");
}

#[test]
fn field_serialization_round_trips() {
    let f = random_band_limited(make_lattice(3, 5).unwrap(), 9, 0.4, 8).unwrap();
    let back = field_from_json(&field_to_json(&f).unwrap()).unwrap();
    assert_eq!(back, f);
    let mut buf = Vec::new();
    write_field_binary(&f, &mut buf).unwrap();
    assert_eq!(&buf[..4], &3u32.to_le_bytes());
    assert_eq!(read_field_binary(buf.as_slice()).unwrap(), f);
}

fn field_strategy() -> impl Strategy<Value = SpectralField> {
    (1u32..=4, 1u32..=8, 0u64..1000, 0.01f64..5.0).prop_map(|(lambda, cutoff, seed, l2)| {
        let l = make_lattice(lambda, cutoff).unwrap();
        random_band_limited(l, l.half_width(), l2, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_is_identity(f in field_strategy(), extra in 0usize..3) {
        let m = f.lattice().mode_count() + extra * 7;
        let back = analyze(&synthesize(&f, m).unwrap(), *f.lattice()).unwrap();
        let scale = f.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(back.max_abs_diff(&f).unwrap() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn parseval(f in field_strategy()) {
        let m = f.lattice().default_grid_size();
        let samples = synthesize(&f, m).unwrap();
        let dx = f.lattice().period() / m as f64;
        let physical: f64 = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        prop_assert!((physical - f.l2_norm_sq()).abs() <= 1e-12 * f.l2_norm_sq().max(1e-300));
    }

    #[test]
    fn band_limited_generator_is_reproducible(seed in 0u64..10_000) {
        let l = make_lattice(2, 6).unwrap();
        prop_assert_eq!(random_band_limited(l, 5, 1.0, seed).unwrap(), random_band_limited(l, 5, 1.0, seed).unwrap());
    }
}
