//! One application of the contraction map: minimize the Carleman-weighted
//! quadratic functional over fields carrying the Cauchy data, with the
//! nonlinear term frozen at the previous iterate.

pub mod constraints;
pub mod field;
pub mod nonlinear;
pub mod system;

pub use constraints::ConstraintMap;
pub use field::{FourierField, InteriorDerivatives};
pub use nonlinear::{magnitude, CutoffBound, NonlinearTerm};
pub use system::{EllipticSystem, Minimizer, SolveReport, SolverBackend, SOLVE_TOLERANCE};

use crate::error::Result;
use crate::forward::BoundaryVectors;
use crate::scalar::Scalar;

fn add_source<T: Scalar>(mut forcing: FourierField<T>, source: Option<&FourierField<T>>) -> FourierField<T> {
    if let Some(q) = source {
        forcing.axpy(T::one(), q);
    }
    forcing
}

/// `Φ(V)`: the minimizer with `𝓕̃(V)` (plus an optional extra source) as a
/// fixed right-hand side.
pub fn minimize_j<T: Scalar>(
    system: &EllipticSystem<T>,
    term: &NonlinearTerm<T>,
    previous: &FourierField<T>,
    data: &BoundaryVectors<T>,
    source: Option<&FourierField<T>>,
) -> Result<Minimizer<T>> {
    let forcing = add_source(term.evaluate(previous)?, source);
    system.minimize(data, Some(&forcing))
}

/// `J(U)` with the nonlinear term evaluated at `U` itself.
pub fn cost<T: Scalar>(
    system: &EllipticSystem<T>,
    term: &NonlinearTerm<T>,
    field: &FourierField<T>,
    source: Option<&FourierField<T>>,
) -> Result<T> {
    let forcing = add_source(term.evaluate(field)?, source);
    system.frozen_cost(field, Some(&forcing))
}

/// Source `q` making `field` an exact zero-residual solution of
/// `Δ_h U - S U + 𝓕̃(U) + q = 0` at every interior node.
pub fn manufactured_source<T: Scalar>(
    system: &EllipticSystem<T>,
    term: &NonlinearTerm<T>,
    field: &FourierField<T>,
) -> Result<FourierField<T>> {
    let forcing = term.evaluate(field)?;
    let res = system.residual(field, Some(&forcing))?;
    let n = field.grid().nodes();
    let r = field.modes();
    let mut q = FourierField::zeros(field.grid().clone(), r);
    let mut idx = 0;
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            let k = iy * n + ix;
            for (a, &b) in q.at_mut(k).iter_mut().zip(&res[idx * r..(idx + 1) * r]) {
                *a = -b;
            }
            idx += 1;
        }
    }
    Ok(q)
}

/// Boundary vectors of `field` as the extraction stencil would report them:
/// Dirichlet values and `(3u_0 - 4u_1 + u_2) / 2h` along each side.
pub fn traces<T: Scalar>(field: &FourierField<T>) -> BoundaryVectors<T> {
    let grid = field.grid();
    let n = grid.nodes();
    let h = grid.spacing();
    let r = field.modes();
    let mut out = BoundaryVectors::zeros(n, r);
    for (e, (side, k)) in crate::grid::boundary_entries(n).enumerate() {
        let at = |d: usize| {
            let (ix, iy) = side.node(n, k, d);
            field.at(grid.index(ix, iy))
        };
        let (u0, u1, u2) = (at(0), at(1), at(2));
        for m in 0..r {
            out.dirichlet[e * r + m] = u0[m];
            out.neumann[e * r + m] =
                (T::lit(3.0) * u0[m] - T::lit(4.0) * u1[m] + u2[m]) / (h + h);
        }
    }
    out
}
