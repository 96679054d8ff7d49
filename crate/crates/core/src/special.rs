//! Special functions: the Gamma function via a Lanczos approximation.
//!
//! All Gamma arguments arising in the kernel-normalizing constant lie in
//! (0, (N*N + 2N - 2)/2) for N <= 2, so accuracy on (0, 20) is what we
//! certify in tests (target: 1e-12 relative).

/// Lanczos coefficients for g = 7, n = 9 (Godfrey / Pugh style).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma(x) for real x (poles at non-positive integers return NaN/inf
/// naturally through the reflection formula).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (std::f64::consts::PI * x).sin();
        std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Angular moment A(N,p) = \int_{S^{N-1}} |omega_1|^p d sigma(omega), the
/// constant appearing in the sub-cell kernel correction.
///
/// N = 1: the "sphere" is {-1, 1}, so A = 2.
/// N = 2: \int_0^{2pi} |cos t|^p dt = 2 sqrt(pi) Gamma((p+1)/2) / Gamma(p/2 + 1).
pub fn angular_moment(n: usize, p: f64) -> f64 {
    match n {
        1 => 2.0,
        2 => {
            2.0 * std::f64::consts::PI.sqrt() * gamma((p + 1.0) / 2.0) / gamma(p / 2.0 + 1.0)
        }
        _ => panic!("angular_moment: only N in {{1,2}} supported"),
    }
}
