//! Conversion of monomial coefficients on `[0, T]` to a Chebyshev series in
//! `s = 2t/T - 1`, and Clenshaw evaluation.
//!
//! Orthogonal polynomials of degree ~20 have monomial coefficients around
//! `1e9` with values of order one; summing them in `f64` cancels away most
//! digits. The Chebyshev coefficients stay small, so evaluation is stable.

use crate::scalar::{BasisField, Scalar};

fn binomial<F: BasisField>(n: usize, k: usize) -> F {
    let mut acc = F::one();
    for i in 0..k {
        acc = acc * F::from_usize(n - i) / F::from_usize(i + 1);
    }
    acc
}

/// Exact Chebyshev coefficients of `p(t) = Σ a_k t^k`, `t ∈ [0, T]`.
pub fn monomial_to_chebyshev<F: BasisField>(a: &[F], final_time: &F) -> Vec<F> {
    let len = a.len();
    let half = final_time.clone() / F::from_usize(2);
    // p in powers of s: t = half (s + 1).
    let mut b = vec![F::zero(); len];
    let mut scale = F::one();
    for (k, ak) in a.iter().enumerate() {
        if k > 0 {
            scale = scale * half.clone();
        }
        if ak.is_zero() {
            continue;
        }
        let w = ak.clone() * scale.clone();
        for (j, bj) in b.iter_mut().enumerate().take(k + 1) {
            *bj = bj.clone() + w.clone() * binomial::<F>(k, j);
        }
    }
    // s^j = 2^{1-j} Σ_i C(j, i) T_{j-2i}, the T_0 term halved.
    let mut c = vec![F::zero(); len];
    for (j, bj) in b.iter().enumerate() {
        if bj.is_zero() {
            continue;
        }
        let mut pow2 = F::one();
        for _ in 0..j {
            pow2 = pow2 * F::from_usize(2);
        }
        for i in 0..=j / 2 {
            let mut w = bj.clone() * binomial::<F>(j, i) * F::from_usize(2) / pow2.clone();
            if 2 * i == j {
                w = w / F::from_usize(2);
            }
            c[j - 2 * i] = c[j - 2 * i].clone() + w;
        }
    }
    c
}

/// Clenshaw summation of `Σ c_k T_k(s)`.
pub fn clenshaw<T: Scalar>(coeffs: &[T], s: T) -> T {
    let two_s = s + s;
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = c + two_s * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match coeffs.first() {
        Some(&c0) => c0 + s * b1 - b2,
        None => T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn converts_quadratic() {
        // p(t) = t^2 on [0, 2]: s = t - 1, p = (s+1)^2 = s^2 + 2s + 1
        // = (T0 + T2)/2 + 2 T1 + T0 = 1.5 T0 + 2 T1 + 0.5 T2
        let a: Vec<BigRational> = [0.0, 0.0, 1.0]
            .iter()
            .map(|&x| BigRational::from_float(x).unwrap())
            .collect();
        let c = monomial_to_chebyshev(&a, &BigRational::from_float(2.0).unwrap());
        let c: Vec<f64> = c.iter().map(|x| x.to_f64_lossy()).collect();
        assert_eq!(c, vec![1.5, 2.0, 0.5]);
    }

    #[test]
    fn clenshaw_matches_direct_polynomial() {
        let a = [0.3, -1.2, 0.7, 2.5, -0.4];
        let c = monomial_to_chebyshev(&a, &3.0);
        for i in 0..=10 {
            let t = 0.3 * i as f64;
            let direct: f64 = a.iter().enumerate().map(|(k, ak)| ak * t.powi(k as i32)).sum();
            let s = 2.0 * t / 3.0 - 1.0;
            assert!((clenshaw(&c, s) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
        }
    }
}
