//! Modified Gram–Schmidt of `t^k e^t` on `L^2(0, T)`.
//!
//! Because every candidate carries the same `e^t` factor, inner products
//! reduce to `<p e^t, q e^t> = Σ_ij p_i q_j m_{i+j}` with the closed-form
//! moments `m_a`. Polynomials are kept in the monomial basis and are left
//! unnormalized (normalizing needs a square root, which rationals and
//! fixed-point numbers lack); the squared norms are returned alongside.

use crate::error::{Error, Result};
use crate::scalar::BasisField;

#[derive(Clone, Debug)]
pub struct OrthogonalPolynomials<F> {
    /// Monomial coefficients of `q_n`, lowest degree first, `n = 0..count`.
    pub coeffs: Vec<Vec<F>>,
    /// `<q_n e^t, q_n e^t>`.
    pub norms_sq: Vec<F>,
    /// `image[n][i] = Σ_j q_n[j] m_{i+j}`, so `<p e^t, q_n e^t> = Σ_i p_i image[n][i]`.
    pub images: Vec<Vec<F>>,
}

impl<F: BasisField> OrthogonalPolynomials<F> {
    /// `<p e^t, q_n e^t>` for an arbitrary polynomial `p` of degree `< count`.
    pub fn inner_with(&self, p: &[F], n: usize) -> F {
        p.iter()
            .zip(&self.images[n])
            .fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }
}

fn image<F: BasisField>(p: &[F], moments: &[F]) -> Vec<F> {
    (0..p.len())
        .map(|i| {
            p.iter()
                .enumerate()
                .fold(F::zero(), |acc, (j, c)| acc + c.clone() * moments[i + j].clone())
        })
        .collect()
}

/// Orthogonalizes `1, t, ..., t^{count-1}` (times `e^t`), with one
/// re-orthogonalization pass.
///
/// `moments` must hold at least `2 count - 1` entries.
pub fn gram_schmidt<F: BasisField>(count: usize, moments: &[F]) -> Result<OrthogonalPolynomials<F>> {
    if moments.len() + 1 < 2 * count {
        return Err(Error::LengthMismatch {
            expected: 2 * count - 1,
            got: moments.len(),
        });
    }
    let mut coeffs: Vec<Vec<F>> = Vec::with_capacity(count);
    let mut norms_sq: Vec<F> = Vec::with_capacity(count);
    let mut images: Vec<Vec<F>> = Vec::with_capacity(count);
    for n in 0..count {
        let mut v = vec![F::zero(); count];
        v[n] = F::one();
        for _pass in 0..2 {
            for k in 0..n {
                let proj: F = v
                    .iter()
                    .zip(&images[k])
                    .fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                let c = proj / norms_sq[k].clone();
                for (vi, qi) in v.iter_mut().zip(&coeffs[k]) {
                    *vi = vi.clone() - c.clone() * qi.clone();
                }
            }
        }
        let img = image(&v, moments);
        let nsq = v
            .iter()
            .zip(&img)
            .fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        if nsq.is_negative() || nsq.is_zero() {
            return Err(Error::BasisConditioning {
                m: n + 1,
                n: n + 1,
                residual: 1.0,
                tolerance: 0.0,
            });
        }
        coeffs.push(v);
        norms_sq.push(nsq);
        images.push(img);
    }
    Ok(OrthogonalPolynomials {
        coeffs,
        norms_sq,
        images,
    })
}

/// Derivative of a monomial-coefficient polynomial, same length (top entry 0).
pub fn differentiate<F: BasisField>(p: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); p.len()];
    for k in 1..p.len() {
        out[k - 1] = p[k].clone() * F::from_usize(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_basis::moments::moments;
    use num_rational::BigRational;

    #[test]
    fn exact_polynomials_are_orthogonal() {
        let t = BigRational::from_float(2.0).unwrap();
        let m = moments(2 * 8, &t);
        let ortho = gram_schmidt(8, &m).unwrap();
        for a in 0..8 {
            for b in 0..a {
                assert!(num_traits::Zero::is_zero(&ortho.inner_with(&ortho.coeffs[a], b)));
            }
        }
    }

    #[test]
    fn first_polynomial_is_constant() {
        let m = moments::<f64>(4, &2.0);
        let ortho = gram_schmidt(2, &m).unwrap();
        assert_eq!(ortho.coeffs[0], vec![1.0, 0.0]);
        assert!((ortho.norms_sq[0] - ((4.0f64).exp() - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_of_cubic() {
        let p = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(differentiate(&p), vec![2.0, 6.0, 12.0, 0.0]);
    }
}
