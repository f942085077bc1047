//! Scaled complementary error function.

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// erfcx(x) = exp(x²)·erfc(x), finite for all x above about −26.6.
///
/// Series below 1.5, Laplace continued fraction above; both keep about
/// 14 significant digits.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 1.5 {
        // erf(x) = 2/√π · e^{-x²} · Σ (2x²)^n x / (2n+1)!!, all terms positive
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
        }
        return x2.exp() - 2.0 * FRAC_1_SQRT_PI * sum;
    }
    // Laplace continued fraction: erfcx(x) = π^{-1/2} / (x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut tail = x;
    for k in (1..=120).rev() {
        tail = x + (k as f64 / 2.0) / tail;
    }
    FRAC_1_SQRT_PI / tail
}
