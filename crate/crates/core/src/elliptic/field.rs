use crate::error::{Error, Result};
use crate::grid::{gradient, laplacian, second_derivatives, SpatialGrid};
use crate::scalar::Scalar;

/// `N` coefficient fields on one grid, stored node-major: `values[k * N + m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField<T> {
    grid: SpatialGrid<T>,
    modes: usize,
    values: Vec<T>,
}

impl<T: Scalar> FourierField<T> {
    pub fn zeros(grid: SpatialGrid<T>, modes: usize) -> Self {
        let values = vec![T::zero(); grid.len() * modes];
        Self { grid, modes, values }
    }

    pub fn from_values(grid: SpatialGrid<T>, modes: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() * modes {
            return Err(Error::LengthMismatch {
                expected: grid.len() * modes,
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite coefficient at node {} mode {}",
                k / modes,
                k % modes
            )));
        }
        Ok(Self { grid, modes, values })
    }

    /// Field whose coefficients at node `x` are `f(x)`.
    pub fn sample(grid: SpatialGrid<T>, modes: usize, f: impl Fn([T; 2]) -> Vec<T>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * modes);
        let n = grid.nodes();
        for iy in 0..n {
            for ix in 0..n {
                let v = f(grid.point(ix, iy));
                assert_eq!(v.len(), modes, "sampled vector has the wrong length");
                values.extend(v);
            }
        }
        Self { grid, modes, values }
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Coefficient vector at flat node `k`.
    pub fn at(&self, k: usize) -> &[T] {
        &self.values[k * self.modes..(k + 1) * self.modes]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.values[k * self.modes..(k + 1) * self.modes]
    }

    /// Scalar field of mode `m`.
    pub fn component(&self, m: usize) -> Vec<T> {
        self.values.iter().skip(m).step_by(self.modes).copied().collect()
    }

    pub fn laplacian(&self, m: usize, ix: usize, iy: usize) -> T {
        let u = self.component(m);
        laplacian(&u, self.grid.nodes(), self.grid.spacing(), ix, iy)
    }

    /// All per-mode interior stencils at once, for every interior node:
    /// `(laplacian, gradient, [∂11, ∂22, ∂12])`, indexed like `values`.
    pub fn interior_derivatives(&self) -> InteriorDerivatives<T> {
        let n = self.grid.nodes();
        let h = self.grid.spacing();
        let len = self.values.len();
        let mut out = InteriorDerivatives {
            laplacian: vec![T::zero(); len],
            gradient: vec![[T::zero(); 2]; len],
            second: vec![[T::zero(); 3]; len],
        };
        for m in 0..self.modes {
            let u = self.component(m);
            for iy in 1..n - 1 {
                for ix in 1..n - 1 {
                    let i = (iy * n + ix) * self.modes + m;
                    out.laplacian[i] = laplacian(&u, n, h, ix, iy);
                    out.gradient[i] = gradient(&u, n, h, ix, iy);
                    out.second[i] = second_derivatives(&u, n, h, ix, iy);
                }
            }
        }
        out
    }

    pub fn axpy(&mut self, a: T, other: &Self) {
        for (x, &y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// Plain Euclidean norm of all coefficients.
    pub fn l2(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

/// Discrete derivatives at interior nodes (zero on the boundary ring).
pub struct InteriorDerivatives<T> {
    pub laplacian: Vec<T>,
    pub gradient: Vec<[T; 2]>,
    pub second: Vec<[T; 3]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_stencils() {
        let grid = SpatialGrid::<f64>::new(1.0, 9).unwrap();
        let f = FourierField::sample(grid.clone(), 2, |[x, y]| vec![x * x + y, 3.0 * x * y]);
        assert_eq!(f.at(grid.index(8, 8)), &[2.0, 3.0]);
        assert_eq!(f.component(1).len(), 81);
        let d = f.interior_derivatives();
        let i = grid.index(3, 5) * 2;
        assert!((d.laplacian[i] - 2.0).abs() < 1e-12);
        assert!((d.second[i + 1][2] - 3.0).abs() < 1e-12);
        assert!((f.laplacian(0, 3, 5) - 2.0).abs() < 1e-12);
        assert_eq!(d.laplacian[0], 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let grid = SpatialGrid::<f64>::new(1.0, 3).unwrap();
        assert!(FourierField::from_values(grid.clone(), 2, vec![0.0; 17]).is_err());
        let mut v = vec![0.0; 18];
        v[5] = f64::NAN;
        assert!(FourierField::from_values(grid, 2, v).is_err());
    }
}
