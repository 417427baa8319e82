//! The weighted least-squares problem behind one contraction step.
//!
//! For free values `φ` the residual at an interior node is
//! `Δ_h U - S U + q`, with `U` the constrained field built from `φ` and the
//! data, and `q` a fixed forcing. The normal matrix of
//! `Σ w h² |Δ_h U - S U + q|² + ε h² Σ_{|α|=2} |D^α U|²` does not depend on
//! the data or the forcing, so it is assembled and factored once.

use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

use crate::carleman::CarlemanWeight;
use crate::elliptic::constraints::ConstraintMap;
use crate::elliptic::field::FourierField;
use crate::error::{Error, Result};
use crate::forward::BoundaryVectors;
use crate::grid::{stencil, SpatialGrid};
use crate::scalar::Scalar;
use crate::time_basis::StiffnessMatrix;

/// Relative residual the normal-equation solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

const REFINEMENT_STEPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[derive(Default)]
pub enum SolverBackend {
    /// Sparse Cholesky, factored once, with iterative refinement.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient { max_iterations: usize },
}


impl SolverBackend {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "cholesky" => Ok(SolverBackend::Cholesky),
            "cg" => Ok(SolverBackend::ConjugateGradient {
                max_iterations: 100_000,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver '{other}' (expected cholesky or cg)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            SolverBackend::Cholesky => "cholesky",
            SolverBackend::ConjugateGradient { .. } => "cg",
        }
    }
}

/// What the linear solve achieved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    /// Refinement sweeps (Cholesky) or iterations (CG).
    pub iterations: usize,
    /// `‖K x - b‖ / ‖b‖` (0 when `b = 0`).
    pub relative_residual: f64,
    pub unknowns: usize,
    pub nonzeros: usize,
}

type Row<T> = Vec<(usize, T)>;

/// Lower triangle of a symmetric matrix, column-compressed.
#[derive(Clone, Debug)]
struct LowerCsc<T> {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> LowerCsc<T> {
    fn apply(&self, x: &[T], y: &mut [T]) {
        y.fill(T::zero());
        for j in 0..self.dim {
            let xj = x[j];
            let mut acc = T::zero();
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * xj;
                if i != j {
                    acc += v * x[i];
                }
            }
            y[j] += acc;
        }
    }

    fn diagonal(&self) -> Vec<T> {
        (0..self.dim)
            .map(|j| self.values[self.col_ptr[j]])
            .collect()
    }
}

enum Factor<T> {
    Cholesky(Llt<usize, T>),
    Cg { max_iterations: usize, diagonal: Vec<T> },
}

/// Minimizer of the quadratic functional plus the solve diagnostics.
#[derive(Clone, Debug)]
pub struct Minimizer<T> {
    pub field: FourierField<T>,
    pub report: SolveReport,
}

pub struct EllipticSystem<T> {
    map: ConstraintMap<T>,
    modes: usize,
    stiffness: StiffnessMatrix<T>,
    epsilon: T,
    /// Interior nodes where residuals and second derivatives are taken.
    residual_nodes: Vec<usize>,
    /// `w(x) h²` per residual node.
    weights: Vec<T>,
    /// `ε h²`.
    regularization: T,
    laplacian_rows: Vec<Row<T>>,
    value_rows: Vec<Row<T>>,
    second_rows: Vec<[Row<T>; 3]>,
    matrix: LowerCsc<T>,
    factor: Factor<T>,
}

fn map_stencil<T: Scalar>(
    map: &ConstraintMap<T>,
    n: usize,
    node: usize,
    offsets: &[(i32, i32, f64)],
    scale: T,
) -> Row<T> {
    let (ix, iy) = ((node % n) as i32, (node / n) as i32);
    let mut row: Row<T> = Vec::new();
    for &(dx, dy, c) in offsets {
        let nb = ((iy + dy) as usize) * n + (ix + dx) as usize;
        for (i, a) in map.dependence(nb) {
            let v = T::lit(c) * scale * a;
            match row.iter_mut().find(|(j, _)| *j == i) {
                Some(e) => e.1 += v,
                None => row.push((i, v)),
            }
        }
    }
    row
}

impl<T: Scalar> EllipticSystem<T> {
    /// Assembles and factors the normal equations for node weights
    /// `weight_values` (one per grid node).
    pub fn new(
        grid: &SpatialGrid<T>,
        stiffness: &StiffnessMatrix<T>,
        weight_values: &[T],
        epsilon: T,
        backend: SolverBackend,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!(
                "regularization must be positive, got {epsilon}"
            )));
        }
        if weight_values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: weight_values.len(),
            });
        }
        if let Some(w) = weight_values.iter().find(|w| !(**w > T::zero())) {
            return Err(Error::NotPositiveDefinite(format!("weight {w} is not positive")));
        }
        let map = ConstraintMap::new(grid)?;
        let n = grid.nodes();
        let h = grid.spacing();
        let inv_h2 = T::one() / (h * h);
        let modes = stiffness.size();
        let residual_nodes: Vec<usize> = (1..n - 1)
            .flat_map(|iy| (1..n - 1).map(move |ix| iy * n + ix))
            .collect();
        let weights: Vec<T> = residual_nodes
            .iter()
            .map(|&k| weight_values[k] * h * h)
            .collect();
        let regularization = epsilon * h * h;
        let laplacian_rows: Vec<Row<T>> = residual_nodes
            .iter()
            .map(|&k| map_stencil(&map, n, k, &stencil::LAPLACIAN, inv_h2))
            .collect();
        let value_rows: Vec<Row<T>> = residual_nodes
            .iter()
            .map(|&k| map_stencil(&map, n, k, &[(0, 0, 1.0)], T::one()))
            .collect();
        let second_rows: Vec<[Row<T>; 3]> = residual_nodes
            .iter()
            .map(|&k| {
                [&stencil::D11[..], &stencil::D22[..], &stencil::D12[..]]
                    .map(|s| map_stencil(&map, n, k, s, inv_h2))
            })
            .collect();

        // Spatial couplings [Σ w L L + ε Σ D D, Σ w L E, Σ w E E] per pair.
        let mut pairs: HashMap<(usize, usize), [T; 3]> = HashMap::new();
        for r in 0..residual_nodes.len() {
            let w = weights[r];
            for &(i, li) in &laplacian_rows[r] {
                for &(j, lj) in &laplacian_rows[r] {
                    pairs.entry((i, j)).or_insert([T::zero(); 3])[0] += w * li * lj;
                }
                for &(j, ej) in &value_rows[r] {
                    pairs.entry((i, j)).or_insert([T::zero(); 3])[1] += w * li * ej;
                    pairs.entry((j, i)).or_insert([T::zero(); 3]);
                }
            }
            for &(i, ei) in &value_rows[r] {
                for &(j, ej) in &value_rows[r] {
                    pairs.entry((i, j)).or_insert([T::zero(); 3])[2] += w * ei * ej;
                }
            }
            for rows in &second_rows[r] {
                for &(i, di) in rows {
                    for &(j, dj) in rows {
                        pairs.entry((i, j)).or_insert([T::zero(); 3])[0] += regularization * di * dj;
                    }
                }
            }
        }
        let free = map.free_nodes().len();
        let mut columns: Vec<Vec<(usize, [T; 4])>> = vec![Vec::new(); free];
        for (&(i, j), &[p1, p2, p3]) in &pairs {
            if i >= j {
                let p2t = pairs.get(&(j, i)).map_or(T::zero(), |v| v[1]);
                columns[j].push((i, [p1, p2, p2t, p3]));
            }
        }
        drop(pairs);
        let s = stiffness.entries();
        let mut sts = vec![T::zero(); modes * modes];
        for a in 0..modes {
            for b in 0..modes {
                sts[a * modes + b] = (0..modes).map(|c| s[c * modes + a] * s[c * modes + b]).sum();
            }
        }
        let dim = free * modes;
        let mut col_ptr = Vec::with_capacity(dim + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for (j, col) in columns.iter_mut().enumerate() {
            col.sort_by_key(|e| e.0);
            for b in 0..modes {
                for &(i, [p1, p2, p2t, p3]) in col.iter() {
                    let start = if i == j { b } else { 0 };
                    for a in start..modes {
                        let mut v = p3 * sts[a * modes + b]
                            - p2 * s[a * modes + b]
                            - p2t * s[b * modes + a];
                        if a == b {
                            v += p1;
                        }
                        row_idx.push(i * modes + a);
                        values.push(v);
                    }
                }
                col_ptr.push(row_idx.len());
            }
        }
        drop(columns);
        let matrix = LowerCsc {
            dim,
            col_ptr,
            row_idx,
            values,
        };
        let factor = match backend {
            SolverBackend::Cholesky => {
                let symbolic = SymbolicSparseColMatRef::new_checked(dim, dim, &matrix.col_ptr, None, &matrix.row_idx);
                let llt = SparseColMatRef::new(symbolic, &matrix.values)
                    .sp_cholesky(faer::Side::Lower)
                    .map_err(|e| Error::NotPositiveDefinite(format!("{e:?}")))?;
                Factor::Cholesky(llt)
            }
            SolverBackend::ConjugateGradient { max_iterations } => Factor::Cg {
                max_iterations,
                diagonal: matrix.diagonal(),
            },
        };
        log::debug!(
            "normal equations: {dim} unknowns, {} stored nonzeros",
            matrix.values.len()
        );
        Ok(Self {
            map,
            modes,
            stiffness: stiffness.clone(),
            epsilon,
            residual_nodes,
            weights,
            regularization,
            laplacian_rows,
            value_rows,
            second_rows,
            matrix,
            factor,
        })
    }

    /// Weights from a Carleman weight sampled on the grid.
    pub fn with_carleman(
        grid: &SpatialGrid<T>,
        stiffness: &StiffnessMatrix<T>,
        weight: &CarlemanWeight<T>,
        epsilon: T,
        backend: SolverBackend,
    ) -> Result<Self> {
        Self::new(grid, stiffness, &weight.sample(grid), epsilon, backend)
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        self.map.grid()
    }

    pub fn constraints(&self) -> &ConstraintMap<T> {
        &self.map
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.dim
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.values.len()
    }

    fn check_field(&self, field: &FourierField<T>, what: &str) -> Result<()> {
        if field.grid() != self.grid() || field.modes() != self.modes {
            return Err(Error::GridMismatch(format!(
                "{what} does not match the system's grid or mode count"
            )));
        }
        Ok(())
    }

    /// `Δ_h U - S U + q` per residual node, `[r * N + m]`.
    pub fn residual(&self, field: &FourierField<T>, forcing: Option<&FourierField<T>>) -> Result<Vec<T>> {
        self.check_field(field, "field")?;
        if let Some(q) = forcing {
            self.check_field(q, "forcing")?;
        }
        let grid = self.grid();
        let n = grid.nodes();
        let h2 = grid.spacing() * grid.spacing();
        let r = self.modes;
        let mut out = vec![T::zero(); self.residual_nodes.len() * r];
        let mut su = vec![T::zero(); r];
        for (idx, &k) in self.residual_nodes.iter().enumerate() {
            self.stiffness.apply(field.at(k), &mut su);
            let o = &mut out[idx * r..(idx + 1) * r];
            for m in 0..r {
                let mut lap = T::zero();
                for &(dx, dy, c) in &stencil::LAPLACIAN {
                    let nb = (k as i64 + dy as i64 * n as i64 + dx as i64) as usize;
                    lap += T::lit(c) * field.at(nb)[m];
                }
                o[m] = lap / h2 - su[m];
            }
            if let Some(q) = forcing {
                for (a, &b) in o.iter_mut().zip(q.at(k)) {
                    *a += b;
                }
            }
        }
        Ok(out)
    }

    /// `[∂11, ∂22, ∂12]` per residual node and mode, `[(r * N + m) * 3 + α]`.
    fn second_derivatives(&self, field: &FourierField<T>) -> Vec<T> {
        let n = self.grid().nodes() as i64;
        let h2 = self.grid().spacing() * self.grid().spacing();
        let r = self.modes;
        let mut out = vec![T::zero(); self.residual_nodes.len() * r * 3];
        for (idx, &k) in self.residual_nodes.iter().enumerate() {
            for (a, s) in [&stencil::D11[..], &stencil::D22[..], &stencil::D12[..]].iter().enumerate() {
                for m in 0..r {
                    let mut acc = T::zero();
                    for &(dx, dy, c) in s.iter() {
                        let nb = (k as i64 + dy as i64 * n + dx as i64) as usize;
                        acc += T::lit(c) * field.at(nb)[m];
                    }
                    out[(idx * r + m) * 3 + a] = acc / h2;
                }
            }
        }
        out
    }

    /// `Σ w h² |Δ_h U - S U + q|² + ε h² Σ |D²U|²` with `q` held fixed.
    pub fn frozen_cost(&self, field: &FourierField<T>, forcing: Option<&FourierField<T>>) -> Result<T> {
        let res = self.residual(field, forcing)?;
        let r = self.modes;
        let mut total = T::zero();
        for (idx, &w) in self.weights.iter().enumerate() {
            let s: T = res[idx * r..(idx + 1) * r].iter().map(|&v| v * v).sum();
            total += w * s;
        }
        let d2: T = self.second_derivatives(field).iter().map(|&v| v * v).sum();
        Ok(total + self.regularization * d2)
    }

    /// Right-hand side `-Aᵀ W a₀ - ε h² Dᵀ d₀` for the lifted data field.
    fn rhs(&self, lift: &FourierField<T>, forcing: Option<&FourierField<T>>) -> Result<Vec<T>> {
        let r = self.modes;
        let a0 = self.residual(lift, forcing)?;
        let d0 = self.second_derivatives(lift);
        let mut b = vec![T::zero(); self.matrix.dim];
        let mut y = vec![T::zero(); r];
        let mut sty = vec![T::zero(); r];
        for idx in 0..self.residual_nodes.len() {
            for m in 0..r {
                y[m] = self.weights[idx] * a0[idx * r + m];
            }
            self.stiffness.apply_transpose(&y, &mut sty);
            for &(i, l) in &self.laplacian_rows[idx] {
                for m in 0..r {
                    b[i * r + m] -= l * y[m];
                }
            }
            for &(i, e) in &self.value_rows[idx] {
                for m in 0..r {
                    b[i * r + m] += e * sty[m];
                }
            }
            for (a, rows) in self.second_rows[idx].iter().enumerate() {
                for &(i, d) in rows {
                    for m in 0..r {
                        let v = self.regularization * d * d0[(idx * r + m) * 3 + a];
                        b[i * r + m] -= v;
                    }
                }
            }
        }
        Ok(b)
    }

    fn relative_residual(&self, x: &[T], b: &[T], scratch: &mut [T]) -> (Vec<T>, f64) {
        self.matrix.apply(x, scratch);
        let res: Vec<T> = b.iter().zip(scratch.iter()).map(|(&bi, &ki)| bi - ki).collect();
        let bn = norm(b);
        let rel = if bn == 0.0 { norm(&res) } else { norm(&res) / bn };
        (res, rel)
    }

    fn solve_normal(&self, b: &[T]) -> Result<(Vec<T>, usize, f64)> {
        let dim = self.matrix.dim;
        let mut scratch = vec![T::zero(); dim];
        if norm(b) == 0.0 {
            return Ok((vec![T::zero(); dim], 0, 0.0));
        }
        match &self.factor {
            Factor::Cholesky(llt) => {
                let solve = |rhs: &[T]| -> Vec<T> {
                    let col = faer::Col::<T>::from_fn(dim, |i| rhs[i]);
                    let sol = llt.solve(&col);
                    (0..dim).map(|i| sol[i]).collect()
                };
                let mut x = solve(b);
                let (mut res, mut rel) = self.relative_residual(&x, b, &mut scratch);
                let mut sweeps = 0;
                while rel > SOLVE_TOLERANCE && sweeps < REFINEMENT_STEPS {
                    let dx = solve(&res);
                    for (xi, d) in x.iter_mut().zip(dx) {
                        *xi += d;
                    }
                    sweeps += 1;
                    (res, rel) = self.relative_residual(&x, b, &mut scratch);
                }
                if !(rel <= SOLVE_TOLERANCE) {
                    return Err(Error::SolverNotConverged {
                        iterations: sweeps,
                        residual: rel,
                    });
                }
                Ok((x, sweeps, rel))
            }
            Factor::Cg {
                max_iterations,
                diagonal,
            } => {
                let (x, it, rel) = pcg(&self.matrix, diagonal, b, *max_iterations);
                if !(rel <= SOLVE_TOLERANCE) {
                    return Err(Error::SolverNotConverged {
                        iterations: it,
                        residual: rel,
                    });
                }
                Ok((x, it, rel))
            }
        }
    }

    /// Minimizer over fields matching `data` of the functional with forcing
    /// `q` frozen (zero when `None`).
    pub fn minimize(&self, data: &BoundaryVectors<T>, forcing: Option<&FourierField<T>>) -> Result<Minimizer<T>> {
        if data.modes != self.modes {
            return Err(Error::LengthMismatch {
                expected: self.modes,
                got: data.modes,
            });
        }
        let lift = self.map.lift(data)?;
        let b = self.rhs(&lift, forcing)?;
        let (x, iterations, relative_residual) = self.solve_normal(&b)?;
        Ok(Minimizer {
            field: self.map.expand(&lift, &x),
            report: SolveReport {
                iterations,
                relative_residual,
                unknowns: self.matrix.dim,
                nonzeros: self.matrix.values.len(),
            },
        })
    }

    /// `‖K x - b‖ / ‖b‖` for the free values of `field`: how well it satisfies
    /// the Euler–Lagrange equations of [`Self::minimize`].
    pub fn stationarity(
        &self,
        field: &FourierField<T>,
        data: &BoundaryVectors<T>,
        forcing: Option<&FourierField<T>>,
    ) -> Result<f64> {
        let lift = self.map.lift(data)?;
        let b = self.rhs(&lift, forcing)?;
        let x = self.map.restrict(field);
        let mut scratch = vec![T::zero(); self.matrix.dim];
        Ok(self.relative_residual(&x, &b, &mut scratch).1)
    }
}

fn norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|&x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn pcg<T: Scalar>(matrix: &LowerCsc<T>, diagonal: &[T], b: &[T], max_iterations: usize) -> (Vec<T>, usize, f64) {
    let dim = matrix.dim;
    let bn = norm(b);
    let mut x = vec![T::zero(); dim];
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(diagonal).map(|(&ri, &d)| ri / d).collect();
    let mut p = z.clone();
    let mut kp = vec![T::zero(); dim];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iterations {
        matrix.apply(&p, &mut kp);
        let alpha = rz / dot(&p, &kp);
        for i in 0..dim {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        rel = norm(&r) / bn;
        if rel <= SOLVE_TOLERANCE {
            // Confirm against the true residual, not the recurrence.
            matrix.apply(&x, &mut kp);
            let true_res: Vec<T> = b.iter().zip(&kp).map(|(&bi, &ki)| bi - ki).collect();
            rel = norm(&true_res) / bn;
            if rel <= SOLVE_TOLERANCE {
                return (x, it + 1, rel);
            }
            r = true_res;
        }
        for i in 0..dim {
            z[i] = r[i] / diagonal[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..dim {
            p[i] = z[i] + beta * p[i];
        }
    }
    (x, max_iterations, rel)
}
