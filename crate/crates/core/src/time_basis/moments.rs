use num_rational::BigRational;

use crate::scalar::BasisField;

/// Moments `m_a = ∫_0^T t^a e^{2t} dt` for `a = 0..=max_power`.
///
/// Uses the integration-by-parts recursion `m_a = (T^a e^{2T} - a m_{a-1}) / 2`.
/// The recursion amplifies rounding by roughly `a!/4^a`, so it is only
/// trustworthy in exact arithmetic beyond the first dozen powers.
pub fn moments<F: BasisField>(max_power: usize, final_time: &F) -> Vec<F> {
    let two = F::from_usize(2);
    let e2t = F::exp(&(final_time.clone() + final_time.clone()));
    let mut out = Vec::with_capacity(max_power + 1);
    out.push((e2t.clone() - F::one()) / two.clone());
    let mut power = F::one();
    for a in 1..=max_power {
        power = power * final_time.clone();
        let prev = out[a - 1].clone();
        out.push((power.clone() * e2t.clone() - F::from_usize(a) * prev) / two.clone());
    }
    out
}

/// `∫_0^T t^a e^{2t} dt` evaluated exactly and rounded once to `f64`.
pub fn moment(power: usize, final_time: f64) -> f64 {
    let t = BigRational::from_float(final_time).expect("finite final time");
    moments(power, &t)[power].to_f64_lossy()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn zeroth_moment_closed_form() {
        let expected = ((4.0f64).exp() - 1.0) / 2.0;
        assert!((moment(0, 2.0) - expected).abs() < 1e-13 * expected);
        assert!((moment(0, 2.0) - 26.799_075).abs() < 1e-5);
    }

    #[test]
    fn empty_interval_has_zero_moment() {
        assert_eq!(moment(0, 0.0), 0.0);
        assert!(moment(3, 1e-12).abs() < 1e-40);
    }

    #[test]
    fn first_moment_matches_quadrature() {
        let q = simpson(|t| t * (2.0 * t).exp(), 0.0, 2.0, 20_000);
        assert!((moment(1, 2.0) - q).abs() < 1e-12 * q);
    }

    #[test]
    fn high_moments_match_quadrature_in_exact_arithmetic() {
        for a in [10usize, 25, 38] {
            let q = simpson(|t| t.powi(a as i32) * (2.0 * t).exp(), 0.0, 2.0, 40_000);
            let m = moment(a, 2.0);
            assert!((m - q).abs() < 1e-9 * q, "a={a}: {m} vs {q}");
        }
    }

    #[test]
    fn float_recursion_degrades_for_high_powers() {
        let exact = moment(38, 2.0);
        let float = moments::<f64>(38, &2.0)[38];
        // The recursion is fine in f64 for low powers but not at the top.
        assert!((moments::<f64>(3, &2.0)[3] - moment(3, 2.0)).abs() < 1e-12 * moment(3, 2.0));
        assert!(((float - exact) / exact).abs() > 1e-10);
    }
}
