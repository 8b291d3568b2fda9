//! Small special-function toolkit: complex digamma, compensated sums,
//! Gauss–Legendre rules and the Japanese bracket.

use num_complex::Complex64;
use std::f64::consts::PI;

/// `⟨x⟩ = (1 + x²)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Compensated sum of complex values (independent real/imaginary accumulators).
pub fn kahan_sum_complex<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for z in iter {
        re.add(z.re);
        im.add(z.im);
    }
    Complex64::new(re.value(), im.value())
}

// B_{2k} / (2k) for k = 1..7
const DIGAMMA_ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma `ψ(z)` for complex `z` away from the poles `0, −1, −2, …`.
///
/// Upward recurrence `ψ(z) = ψ(z+1) − 1/z` until `Re z ≥ 10`, then the
/// asymptotic Bernoulli series; absolute error is at the 1e-15 level.
pub fn digamma(z: Complex64) -> Complex64 {
    let mut z = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.re < 10.0 {
        shift -= z.inv();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv2;
    for c in DIGAMMA_ASYMPTOTIC {
        series += pow * c;
        pow *= inv2;
    }
    shift + z.ln() - inv * 0.5 - series
}

/// `Σ_{k ≥ k0} 1/((k−a)(k−b))` for `a ≠ b` and no pole on the ray.
pub fn rational_ray_sum(k0: i64, a: Complex64, b: Complex64) -> Complex64 {
    let k0 = k0 as f64;
    (digamma(Complex64::new(k0, 0.0) - b) - digamma(Complex64::new(k0, 0.0) - a)) / (a - b)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^∞ f(x) dx` for an integrand decaying at least like `x^{-1-δ}`,
/// using 16-point Gauss–Legendre on dyadic panels `[a·2^k, a·2^{k+1}]`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(a: f64, f: F) -> f64 {
    assert!(a > 0.0, "integration start must be positive");
    let (nodes, weights) = gauss_legendre(16);
    let mut acc = KahanSum::new();
    let mut lo = a;
    for _ in 0..80 {
        let hi = 2.0 * lo;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            panel += w * f(mid + half * x);
        }
        panel *= half;
        acc.add(panel);
        if panel.abs() <= 1e-18 * acc.value().abs() {
            break;
        }
        lo = hi;
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_real_values() {
        let one = digamma(Complex64::new(1.0, 0.0));
        assert!((one.re + EULER_GAMMA).abs() < 1e-14);
        let half = digamma(Complex64::new(0.5, 0.0));
        assert!((half.re + EULER_GAMMA + 2.0 * 2f64.ln()).abs() < 1e-14);
        // ψ(n+1) = H_n − γ
        let h10: f64 = (1..=10).map(|k| 1.0 / k as f64).sum();
        let v = digamma(Complex64::new(11.0, 0.0));
        assert!((v.re - (h10 - EULER_GAMMA)).abs() < 1e-14);
    }

    #[test]
    fn digamma_imaginary_axis() {
        // Im ψ(iy) = 1/(2y) + (π/2) coth(πy)
        for y in [0.3, 1.0, 2.5, 7.0] {
            let v = digamma(Complex64::new(0.0, y));
            let want = 0.5 / y + 0.5 * PI / (PI * y).tanh();
            assert!((v.im - want).abs() < 1e-13, "y={y}: {} vs {want}", v.im);
        }
    }

    #[test]
    fn ray_sum_matches_brute_force() {
        let a = Complex64::new(0.3, -2.0);
        let b = Complex64::new(-1.7, 0.8);
        let direct: Complex64 = (5..2_000_000i64)
            .map(|k| {
                let k = k as f64;
                ((k - a) * (k - b)).inv()
            })
            .sum();
        let exact = rational_ray_sum(5, a, b);
        // brute force misses ~1/2e6
        assert!((direct - exact).norm() < 1e-6);
        assert!((direct - exact).norm() > 1e-7);
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m30: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn improper_integral() {
        let v = integrate_to_infinity(1.0, |x| 1.0 / (x * x));
        assert!((v - 1.0).abs() < 1e-13);
        let v = integrate_to_infinity(2.0, |x| 1.0 / (1.0 + x * x));
        assert!((v - (0.5 * PI - 2f64.atan())).abs() < 1e-12);
    }

    #[test]
    fn kahan_beats_naive() {
        let xs: Vec<f64> = std::iter::once(1.0).chain(std::iter::repeat_n(1e-16, 1_000_000)).collect();
        let v = kahan_sum(xs.iter().copied());
        assert!((v - (1.0 + 1e-10)).abs() < 1e-15);
    }
}
