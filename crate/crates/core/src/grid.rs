//! Vertex-centered square grids and finite-difference stencils.
//!
//! Node `(ix, iy)` sits at `(-R + ix h, -R + iy h)`; flat index `iy n + ix`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid<T> {
    half_width: T,
    nodes: usize,
}

impl<T: Scalar> SpatialGrid<T> {
    pub fn new(half_width: T, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 3 nodes per side, got {nodes}"
            )));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { half_width, nodes })
    }

    /// Grid on `(-R, R)^2` whose spacing equals `spacing` exactly.
    pub fn with_spacing(half_width: T, spacing: T) -> Result<Self> {
        let cells = (T::lit(2.0) * half_width / spacing).as_f64();
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::GridMismatch(format!(
                "spacing {spacing} does not divide width {}",
                T::lit(2.0) * half_width
            )));
        }
        Self::new(half_width, rounded as usize + 1)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    /// Nodes per side.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes * self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        T::lit(2.0) * self.half_width / T::lit((self.nodes - 1) as f64)
    }

    pub fn coord(&self, i: usize) -> T {
        if i == self.nodes - 1 {
            self.half_width
        } else {
            -self.half_width + T::lit(i as f64) * self.spacing()
        }
    }

    pub fn point(&self, ix: usize, iy: usize) -> [T; 2] {
        [self.coord(ix), self.coord(iy)]
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes + ix
    }

    pub fn is_boundary(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix == self.nodes - 1 || iy == self.nodes - 1
    }

    /// Offset `o` such that node `(i, j)` of `inner` is node `(i + o, j + o)`
    /// of `self`.
    pub fn subgrid_offset(&self, inner: &SpatialGrid<T>) -> Result<usize> {
        let (h, hi) = (self.spacing().as_f64(), inner.spacing().as_f64());
        if (h - hi).abs() > 1e-12 * h {
            return Err(Error::GridMismatch(format!(
                "spacings differ: {h} vs {hi}"
            )));
        }
        let shift = (inner.half_width - self.half_width).as_f64() / h;
        let offset = (-shift).round();
        if (shift + offset).abs() > 1e-9 || offset < 0.0 || offset as usize + inner.nodes > self.nodes
        {
            return Err(Error::GridMismatch(
                "inner grid is not a node-aligned subgrid".into(),
            ));
        }
        Ok(offset as usize)
    }

    pub fn sample(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.nodes {
            for ix in 0..self.nodes {
                out.push(f(self.point(ix, iy)));
            }
        }
        out
    }

    /// Trapezoid quadrature weights (area element included).
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let h = self.spacing();
        let one_d: Vec<T> = (0..self.nodes)
            .map(|i| {
                if i == 0 || i == self.nodes - 1 {
                    h / T::lit(2.0)
                } else {
                    h
                }
            })
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for &wy in &one_d {
            for &wx in &one_d {
                out.push(wx * wy);
            }
        }
        out
    }
}

/// A side of the square, in the order south, east, north, west.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    South,
    East,
    North,
    West,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::South, Side::East, Side::North, Side::West];

    pub fn name(self) -> &'static str {
        match self {
            Side::South => "south",
            Side::East => "east",
            Side::North => "north",
            Side::West => "west",
        }
    }

    pub fn ordinal(self) -> usize {
        self as usize
    }

    /// Node `k` along the side (tangential index increasing in `x1` on
    /// south/north and in `x2` on east/west), at depth `d` from the side.
    pub fn node(self, n: usize, k: usize, depth: usize) -> (usize, usize) {
        match self {
            Side::South => (k, depth),
            Side::North => (k, n - 1 - depth),
            Side::West => (depth, k),
            Side::East => (n - 1 - depth, k),
        }
    }

    /// Outward unit normal.
    pub fn normal(self) -> [i32; 2] {
        match self {
            Side::South => [0, -1],
            Side::North => [0, 1],
            Side::West => [-1, 0],
            Side::East => [1, 0],
        }
    }
}

/// Dirichlet/Neumann traces laid out side by side: entry `side * n + k`.
pub fn boundary_entries(n: usize) -> impl Iterator<Item = (Side, usize)> {
    Side::ALL
        .into_iter()
        .flat_map(move |s| (0..n).map(move |k| (s, k)))
}

/// Five-point Laplacian at an interior node of a scalar field.
#[inline]
pub fn laplacian<T: Scalar>(u: &[T], n: usize, h: T, ix: usize, iy: usize) -> T {
    let c = iy * n + ix;
    (u[c - 1] + u[c + 1] + u[c - n] + u[c + n] - T::lit(4.0) * u[c]) / (h * h)
}

/// Centered gradient at an interior node.
#[inline]
pub fn gradient<T: Scalar>(u: &[T], n: usize, h: T, ix: usize, iy: usize) -> [T; 2] {
    let c = iy * n + ix;
    let two_h = h + h;
    [(u[c + 1] - u[c - 1]) / two_h, (u[c + n] - u[c - n]) / two_h]
}

/// First derivative along one axis: centered inside, second-order one-sided
/// at the ends.
#[inline]
fn axis_derivative<T: Scalar>(at: impl Fn(usize) -> T, i: usize, n: usize, h: T) -> T {
    let two_h = h + h;
    if i == 0 {
        (T::lit(-3.0) * at(0) + T::lit(4.0) * at(1) - at(2)) / two_h
    } else if i == n - 1 {
        (T::lit(3.0) * at(n - 1) - T::lit(4.0) * at(n - 2) + at(n - 3)) / two_h
    } else {
        (at(i + 1) - at(i - 1)) / two_h
    }
}

/// Second-order gradient at any node, one-sided on the boundary.
pub fn gradient_anywhere<T: Scalar>(u: &[T], n: usize, h: T, ix: usize, iy: usize) -> [T; 2] {
    [
        axis_derivative(|i| u[iy * n + i], ix, n, h),
        axis_derivative(|j| u[j * n + ix], iy, n, h),
    ]
}

/// `(∂11, ∂22, ∂12)` by centered differences at an interior node.
#[inline]
pub fn second_derivatives<T: Scalar>(u: &[T], n: usize, h: T, ix: usize, iy: usize) -> [T; 3] {
    let c = iy * n + ix;
    let h2 = h * h;
    let two = T::lit(2.0);
    [
        (u[c + 1] - two * u[c] + u[c - 1]) / h2,
        (u[c + n] - two * u[c] + u[c - n]) / h2,
        (u[c + n + 1] - u[c + n - 1] - u[c - n + 1] + u[c - n - 1]) / (T::lit(4.0) * h2),
    ]
}

/// Stencil offsets `(dx, dy, coefficient * h^2)` of the interior operators.
pub mod stencil {
    pub const LAPLACIAN: [(i32, i32, f64); 5] =
        [(0, 0, -4.0), (-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0)];
    pub const D11: [(i32, i32, f64); 3] = [(-1, 0, 1.0), (0, 0, -2.0), (1, 0, 1.0)];
    pub const D22: [(i32, i32, f64); 3] = [(0, -1, 1.0), (0, 0, -2.0), (0, 1, 1.0)];
    pub const D12: [(i32, i32, f64); 4] =
        [(1, 1, 0.25), (-1, 1, -0.25), (1, -1, -0.25), (-1, -1, 0.25)];
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn omega_is_a_subgrid_of_g() {
        let omega = SpatialGrid::new(1.0, 65).unwrap();
        let g = SpatialGrid::with_spacing(4.0, omega.spacing()).unwrap();
        assert_eq!(g.nodes(), 257);
        let o = g.subgrid_offset(&omega).unwrap();
        assert_eq!(o, 96);
        assert_eq!(g.coord(o), -1.0);
        assert_eq!(g.coord(o + 64), 1.0);
        let coarse = SpatialGrid::new(4.0, 129).unwrap();
        assert!(coarse.subgrid_offset(&omega).is_err());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(SpatialGrid::new(1.0, 2).is_err());
        assert!(SpatialGrid::new(0.0, 9).is_err());
        assert!(SpatialGrid::with_spacing(1.0, 0.3).is_err());
    }

    #[test]
    fn sides_walk_the_boundary() {
        let n = 5;
        assert_eq!(Side::South.node(n, 2, 0), (2, 0));
        assert_eq!(Side::East.node(n, 3, 1), (3, 3));
        assert_eq!(Side::North.node(n, 0, 2), (0, 2));
        assert_eq!(Side::West.node(n, 4, 0), (0, 4));
        assert_eq!(boundary_entries(n).count(), 20);
    }

    #[test]
    fn trapezoid_weights_integrate_area() {
        let g = SpatialGrid::new(1.0, 17).unwrap();
        let area: f64 = g.trapezoid_weights().iter().sum();
        assert!((area - 4.0).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn laplacian_annihilates_affine_fields(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let g = SpatialGrid::new(1.0, 9).unwrap();
            let u = g.sample(|[x, y]| a * x + b * y + c);
            let h = g.spacing();
            for iy in 1..8 {
                for ix in 1..8 {
                    prop_assert!(laplacian(&u, 9, h, ix, iy).abs() < 1e-11);
                    let d = second_derivatives(&u, 9, h, ix, iy);
                    prop_assert!(d.iter().all(|v| v.abs() < 1e-11));
                }
            }
            for iy in 0..9 {
                for ix in 0..9 {
                    let gr = gradient_anywhere(&u, 9, h, ix, iy);
                    prop_assert!((gr[0] - a).abs() < 1e-12 && (gr[1] - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn second_derivatives_exact_on_quadratics() {
        let g = SpatialGrid::<f64>::new(1.0, 11).unwrap();
        let u = g.sample(|[x, y]| 3.0 * x * x - 2.0 * y * y + 5.0 * x * y);
        let d = second_derivatives(&u, 11, g.spacing(), 4, 6);
        assert!((d[0] - 6.0).abs() < 1e-10 && (d[1] + 4.0).abs() < 1e-10 && (d[2] - 5.0).abs() < 1e-10);
        assert!((laplacian(&u, 11, g.spacing(), 4, 6) - 2.0).abs() < 1e-10);
    }
}
