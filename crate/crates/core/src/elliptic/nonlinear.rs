//! The projected nonlinear term
//! `𝓕_m(x) = ∫ ĉ(x) F(x, u, u_t, ∇u) Ψ_m dt`, `u = Σ v_n Ψ_n`, with the
//! potential eliminated as `ĉ = (Σ v_n Ψ_n''(0) - Δp) / F(x, p, 0, ∇p)`.

use crate::elliptic::field::FourierField;
use crate::error::{Error, Result};
use crate::forward::{initial_denominator, InitialField, Nonlinearity};
use crate::grid::SpatialGrid;
use crate::scalar::Scalar;
use crate::time_basis::TimeBasis;

/// Smooth cut-off `χ` of `|ξ| + |∇ξ|`: 1 below `bound`, 0 above twice it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffBound<T> {
    pub bound: T,
}

impl<T: Scalar> CutoffBound<T> {
    pub fn new(bound: T) -> Result<Self> {
        if !(bound > T::zero()) || !bound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cut-off bound must be positive, got {bound}"
            )));
        }
        Ok(Self { bound })
    }

    /// `factor · max_x (|U(x)| + |∇U(x)|)` over interior nodes.
    pub fn from_field(field: &FourierField<T>, factor: T) -> Result<Self> {
        let n = field.grid().nodes();
        let d = field.interior_derivatives();
        let mut largest = T::zero();
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let k = iy * n + ix;
                let r = field.modes();
                largest = largest.max(magnitude(field.at(k), &d.gradient[k * r..(k + 1) * r]));
            }
        }
        Self::new(factor * largest)
    }

    /// Smoothstep `1 - s²(3 - 2s)`, `s = (level - M) / M`, clamped.
    pub fn factor(&self, level: T) -> T {
        let s = (level - self.bound) / self.bound;
        if s <= T::zero() {
            T::one()
        } else if s >= T::one() {
            T::zero()
        } else {
            T::one() - s * s * (T::lit(3.0) - T::lit(2.0) * s)
        }
    }
}

/// `|ξ| + |∇ξ|` with Euclidean and Frobenius norms.
pub fn magnitude<T: Scalar>(values: &[T], gradients: &[[T; 2]]) -> T {
    let a: T = values.iter().map(|&v| v * v).sum::<T>().sqrt();
    let b: T = gradients
        .iter()
        .map(|g| g[0] * g[0] + g[1] * g[1])
        .sum::<T>()
        .sqrt();
    a + b
}

/// Evaluates `𝓕` (optionally times `χ`) at every interior node of a grid.
#[derive(Clone, Debug)]
pub struct NonlinearTerm<T> {
    grid: SpatialGrid<T>,
    modes: usize,
    nonlinearity: Nonlinearity<T>,
    points: Vec<[T; 2]>,
    /// `F(x, p, 0, ∇p)` per node.
    denominator: Vec<T>,
    /// `Δ_h p` per node.
    initial_laplacian: Vec<T>,
    second_at_zero: Vec<T>,
    /// Trapezoid weights of the time grid.
    time_weights: Vec<T>,
    /// `Ψ_n(t_j)` and `Ψ_n'(t_j)`, indexed `[j * N + n]`.
    values: Vec<T>,
    derivatives: Vec<T>,
    cutoff: Option<CutoffBound<T>>,
}

impl<T: Scalar> NonlinearTerm<T> {
    pub fn new(
        grid: &SpatialGrid<T>,
        basis: &TimeBasis<T>,
        nonlinearity: &Nonlinearity<T>,
        initial: &InitialField<T>,
    ) -> Result<Self> {
        let denominator = initial_denominator(nonlinearity, initial, grid)?;
        let h = grid.spacing();
        let initial_laplacian = grid.sample(|x| initial.laplacian(x, h));
        let modes = basis.count();
        let steps = basis.grid().len();
        let mut values = Vec::with_capacity(steps * modes);
        let mut derivatives = Vec::with_capacity(steps * modes);
        for j in 0..steps {
            for n in 0..modes {
                values.push(basis.table(0, n)[j]);
                derivatives.push(basis.table(1, n)[j]);
            }
        }
        let n = grid.nodes();
        Ok(Self {
            grid: grid.clone(),
            modes,
            nonlinearity: nonlinearity.clone(),
            points: (0..grid.len()).map(|k| grid.point(k % n, k / n)).collect(),
            denominator,
            initial_laplacian,
            second_at_zero: basis.second_at_zero().to_vec(),
            time_weights: basis.grid().quadrature_weights(),
            values,
            derivatives,
            cutoff: None,
        })
    }

    pub fn with_cutoff(mut self, cutoff: Option<CutoffBound<T>>) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn cutoff(&self) -> Option<CutoffBound<T>> {
        self.cutoff
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `ĉ(x)` from coefficients `v` at flat node `k`.
    pub fn potential_estimate(&self, k: usize, v: &[T]) -> T {
        let lead: T = v.iter().zip(&self.second_at_zero).map(|(&a, &b)| a * b).sum();
        (lead - self.initial_laplacian[k]) / self.denominator[k]
    }

    /// `𝓕̃(x, V, ∇V)` at every interior node; zero on the boundary ring.
    pub fn evaluate(&self, field: &FourierField<T>) -> Result<FourierField<T>> {
        if field.grid() != &self.grid || field.modes() != self.modes {
            return Err(Error::GridMismatch(
                "field does not match the nonlinear term's grid or mode count".into(),
            ));
        }
        let n = self.grid.nodes();
        let r = self.modes;
        let d = field.interior_derivatives();
        let mut out = FourierField::zeros(self.grid.clone(), r);
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let k = iy * n + ix;
                let v = field.at(k);
                let grads = &d.gradient[k * r..(k + 1) * r];
                let estimate = self.potential_estimate(k, v);
                let chi = match self.cutoff {
                    Some(c) => c.factor(magnitude(v, grads)),
                    None => T::one(),
                };
                let scale = estimate * chi;
                if scale == T::zero() {
                    continue;
                }
                let acc = out.at_mut(k);
                for (j, &tw) in self.time_weights.iter().enumerate() {
                    let psi = &self.values[j * r..(j + 1) * r];
                    let dpsi = &self.derivatives[j * r..(j + 1) * r];
                    let (mut u, mut ut, mut g) = (T::zero(), T::zero(), [T::zero(); 2]);
                    for m in 0..r {
                        u += v[m] * psi[m];
                        ut += v[m] * dpsi[m];
                        g[0] += grads[m][0] * psi[m];
                        g[1] += grads[m][1] * psi[m];
                    }
                    let f = tw * self.nonlinearity.eval(self.points[k], u, ut, g);
                    for m in 0..r {
                        acc[m] += f * psi[m];
                    }
                }
                for a in acc.iter_mut() {
                    *a *= scale;
                }
            }
        }
        Ok(out)
    }
}
