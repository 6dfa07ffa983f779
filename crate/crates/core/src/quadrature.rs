//! Quadrature rules and special functions: the Gamma function, Gauss–Legendre
//! and Gauss–Jacobi rules (used to discretise the kernel's Laplace integral),
//! and an adaptive Gauss–Kronrod integrator that serves as an independent
//! oracle for the closed-form mesh weights.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result, SveError};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation of `Γ(x)`, with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (x + k as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return gamma(x).ln();
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Nodes and weights of a quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `q`-point Gauss–Legendre rule (Newton iteration on `P_q`).
pub fn gauss_legendre(q: usize) -> Rule {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for k in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[q - 1 - k] = x;
        weights[k] = w;
        weights[q - 1 - k] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `q`-point Gauss–Jacobi rule for the weight `(1 - x)^a (1 + x)^b` on
/// `[-1, 1]`, via the Golub–Welsch eigenproblem. Requires `a, b > -1`.
pub fn gauss_jacobi(q: usize, a: f64, b: f64) -> Rule {
    assert!(q >= 1 && a > -1.0 && b > -1.0);
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for k in 0..q {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            let s = 2.0 * kf + ab;
            (b * b - a * a) / (s * (s + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < q {
            let n = kf + 1.0;
            let s = 2.0 * n + ab;
            let beta = 4.0 * n * (n + a) * (n + b) * (n + ab) / (s * s * (s + 1.0) * (s - 1.0));
            let off = beta.sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let mu0 =
        2f64.powf(ab + 1.0) * (ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(ab + 2.0)).exp();
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to relative
/// tolerance `rel_tol` (global bisection of the worst panel).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a < b) {
        return Err(invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..5000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            return Ok(total);
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let estimate = panels.iter().map(|p| p.3).sum();
    Err(SveError::QuadratureNonConvergence { estimate })
}

/// Independent numerical value of `∫_a^b (t_n - s)^{-e} ds`, `0 <= e < 1`.
///
/// Panels away from `t_n` are integrated directly in `s`, which keeps full
/// relative accuracy on narrow panels far from the singularity. The panel
/// ending at `t_n` is integrated in `w = t_n - s` after the change of
/// variables `w = y^q` with `q (1 - e) >= 2`, which removes the endpoint
/// singularity.
pub fn quadrature_oracle(exponent: f64, a: f64, b: f64, tn: f64) -> Result<f64> {
    if !(a < b && b <= tn) {
        return Err(invalid(format!(
            "need a < b <= t_n, got a={a}, b={b}, t_n={tn}"
        )));
    }
    if !(0.0..1.0).contains(&exponent) {
        return Err(invalid(format!(
            "exponent must lie in [0,1), got {exponent}"
        )));
    }
    if b < tn {
        return integrate_adaptive(|s| (tn - s).powf(-exponent), a, b, 1e-13);
    }
    let q = (2.0 / (1.0 - exponent)).ceil();
    let power = q * (1.0 - exponent) - 1.0;
    integrate_adaptive(|y| q * y.powf(power), 0.0, (tn - a).powf(1.0 / q), 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        let pi = std::f64::consts::PI;
        assert!((gamma(0.5) - pi.sqrt()).abs() < 1e-14);
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(5.0) - 24.0).abs() < 1e-12);
        // Γ(0.1) = 9.513507698668731836...
        assert!((gamma(0.1) / 9.513_507_698_668_732 - 1.0).abs() < 1e-13);
        // Γ(0.9) = 1.068628702119319354...
        assert!((gamma(0.9) / 1.068_628_702_119_319_4 - 1.0).abs() < 1e-13);
        assert!((ln_gamma(30.0) - 71.257_038_967_168_01).abs() < 1e-11);
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        for deg in 0..16 {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!((got - exact).abs() < 1e-14, "deg {deg}: {got} vs {exact}");
        }
    }

    #[test]
    fn jacobi_moments() {
        // ∫ (1+x)^b x^k dx over [-1,1], compared with adaptive integration.
        let b = -0.5;
        let rule = gauss_jacobi(10, 0.0, b);
        for k in 0..12 {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(k))
                .sum();
            // Substitute 1 + x = y^2 to remove the endpoint singularity.
            let exact = integrate_adaptive(
                |y| 2.0 * y.powf(2.0 * b + 1.0) * (y * y - 1.0).powi(k),
                0.0,
                2f64.sqrt(),
                1e-14,
            )
            .unwrap();
            assert!((got - exact).abs() < 1e-12, "k={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let v = quadrature_oracle(0.5, 0.0, 0.7, 0.7).unwrap();
        assert!((v - 2.0 * 0.7f64.sqrt()).abs() < 1e-12);
        let v = quadrature_oracle(0.0, 0.2, 0.5, 1.0).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
        assert!(quadrature_oracle(0.5, 0.5, 0.2, 1.0).is_err());
    }
}
