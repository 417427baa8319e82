//! Strong imposition of the Cauchy data: the boundary ring takes `𝐟`, the
//! first interior ring is eliminated through the one-sided normal-derivative
//! stencil `2h 𝐠 = 3u_0 - 4u_1 + u_2`, and every deeper node is free.

use crate::elliptic::field::FourierField;
use crate::error::{Error, Result};
use crate::forward::BoundaryVectors;
use crate::grid::{Side, SpatialGrid};
use crate::scalar::Scalar;

/// `constant + Σ coef · x[free]` per mode; coefficients are shared by all
/// modes.
#[derive(Clone, Debug, PartialEq)]
struct NodeExpr<T> {
    constant: Vec<T>,
    terms: Vec<(usize, T)>,
}

impl<T: Scalar> NodeExpr<T> {
    fn scaled_add(&mut self, a: T, other: &NodeExpr<T>) {
        for (c, &o) in self.constant.iter_mut().zip(&other.constant) {
            *c += a * o;
        }
        for &(i, coef) in &other.terms {
            match self.terms.iter_mut().find(|(j, _)| *j == i) {
                Some(t) => t.1 += a * coef,
                None => self.terms.push((i, a * coef)),
            }
        }
    }
}

/// Tangential index and depth of node `(ix, iy)` relative to `side`.
fn side_coords(side: Side, n: usize, ix: usize, iy: usize) -> (usize, usize) {
    match side {
        Side::South => (ix, iy),
        Side::North => (ix, n - 1 - iy),
        Side::West => (iy, ix),
        Side::East => (iy, n - 1 - ix),
    }
}

fn depth(n: usize, ix: usize, iy: usize) -> usize {
    ix.min(iy).min(n - 1 - ix).min(n - 1 - iy)
}

/// Which nodes are free and how the others depend on data and free values.
#[derive(Clone, Debug)]
pub struct ConstraintMap<T> {
    grid: SpatialGrid<T>,
    free_nodes: Vec<usize>,
    /// Per node: `None` if free, otherwise the affine terms over free indices.
    terms: Vec<Option<Vec<(usize, T)>>>,
    free_index: Vec<Option<usize>>,
}

impl<T: Scalar> ConstraintMap<T> {
    pub fn new(grid: &SpatialGrid<T>) -> Result<Self> {
        let n = grid.nodes();
        if n < 5 {
            return Err(Error::InvalidParameter(format!(
                "need at least 5 nodes per side to pin two boundary layers, got {n}"
            )));
        }
        let mut free_index = vec![None; grid.len()];
        let mut free_nodes = Vec::new();
        for iy in 2..n - 2 {
            for ix in 2..n - 2 {
                let k = grid.index(ix, iy);
                free_index[k] = Some(free_nodes.len());
                free_nodes.push(k);
            }
        }
        let zero = BoundaryVectors::zeros(n, 1);
        let exprs = layer_exprs(grid, &free_index, &zero);
        let terms = (0..grid.len())
            .map(|k| exprs[k].as_ref().map(|e| e.terms.clone()))
            .collect();
        Ok(Self {
            grid: grid.clone(),
            free_nodes,
            terms,
            free_index,
        })
    }

    pub fn grid(&self) -> &SpatialGrid<T> {
        &self.grid
    }

    /// Flat indices of the free nodes, in unknown order.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Affine dependence of `node` on the free values: `[(free, coef)]`.
    pub fn dependence(&self, node: usize) -> Vec<(usize, T)> {
        match (&self.terms[node], self.free_index[node]) {
            (_, Some(i)) => vec![(i, T::one())],
            (Some(t), None) => t.clone(),
            (None, None) => Vec::new(),
        }
    }

    /// Number of pinned scalar values for `modes` coefficients per node.
    pub fn constrained_count(&self, modes: usize) -> usize {
        modes * (self.grid.len() - self.free_nodes.len())
    }

    /// Field equal to the data-driven constants on the two outer rings and
    /// zero on free nodes.
    pub fn lift(&self, data: &BoundaryVectors<T>) -> Result<FourierField<T>> {
        if data.nodes != self.grid.nodes() {
            return Err(Error::GridMismatch(format!(
                "boundary data has {} nodes per side, grid has {}",
                data.nodes,
                self.grid.nodes()
            )));
        }
        let exprs = layer_exprs(&self.grid, &self.free_index, data);
        let mut out = FourierField::zeros(self.grid.clone(), data.modes);
        for (k, e) in exprs.iter().enumerate() {
            if let Some(e) = e {
                out.at_mut(k).copy_from_slice(&e.constant);
            }
        }
        Ok(out)
    }

    /// `lift + Σ coef · free`, with `free[i * N + m]`.
    pub fn expand(&self, lift: &FourierField<T>, free: &[T]) -> FourierField<T> {
        let r = lift.modes();
        let mut out = lift.clone();
        for (k, dep) in self.terms.iter().enumerate() {
            let target = out.at_mut(k);
            match (self.free_index[k], dep) {
                (Some(i), _) => target.copy_from_slice(&free[i * r..(i + 1) * r]),
                (None, Some(dep)) => {
                    for &(i, c) in dep {
                        for m in 0..r {
                            target[m] += c * free[i * r + m];
                        }
                    }
                }
                (None, None) => {}
            }
        }
        out
    }

    /// Values at the free nodes, `[i * N + m]`.
    pub fn restrict(&self, field: &FourierField<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.free_nodes.len() * field.modes());
        for &k in &self.free_nodes {
            out.extend_from_slice(field.at(k));
        }
        out
    }
}

fn layer_exprs<T: Scalar>(
    grid: &SpatialGrid<T>,
    free_index: &[Option<usize>],
    data: &BoundaryVectors<T>,
) -> Vec<Option<NodeExpr<T>>> {
    let n = grid.nodes();
    let r = data.modes;
    let h = grid.spacing();
    let empty = || NodeExpr {
        constant: vec![T::zero(); r],
        terms: Vec::new(),
    };
    let mut exprs: Vec<Option<NodeExpr<T>>> = vec![None; grid.len()];
    // Boundary ring: Dirichlet values, averaged at corners.
    for iy in 0..n {
        for ix in 0..n {
            if depth(n, ix, iy) != 0 {
                continue;
            }
            let sides: Vec<Side> = Side::ALL
                .into_iter()
                .filter(|&s| side_coords(s, n, ix, iy).1 == 0)
                .collect();
            let mut e = empty();
            let weight = T::one() / T::lit(sides.len() as f64);
            for &s in &sides {
                let (k, _) = side_coords(s, n, ix, iy);
                for (c, &f) in e.constant.iter_mut().zip(data.dirichlet_at(s, k)) {
                    *c += weight * f;
                }
            }
            if sides.len() > 1 {
                let (a, b) = (sides[0], sides[1]);
                let (ka, kb) = (side_coords(a, n, ix, iy).0, side_coords(b, n, ix, iy).0);
                let gap = data
                    .dirichlet_at(a, ka)
                    .iter()
                    .zip(data.dirichlet_at(b, kb))
                    .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
                if gap.as_f64() > 1e-12 {
                    log::debug!("corner ({ix}, {iy}): Dirichlet values differ by {gap}, averaged");
                }
            }
            exprs[grid.index(ix, iy)] = Some(e);
        }
    }
    // First interior ring: `u_1 = (3f - 2hg + u_2) / 4` along each side it
    // belongs to; edge nodes first so the ring corners can use them.
    let three = T::lit(3.0);
    let quarter = T::lit(0.25);
    let inner_value = |exprs: &Vec<Option<NodeExpr<T>>>, node: usize| -> NodeExpr<T> {
        match free_index[node] {
            Some(i) => NodeExpr {
                constant: vec![T::zero(); r],
                terms: vec![(i, T::one())],
            },
            None => exprs[node].clone().expect("inner node resolved before use"),
        }
    };
    for pass_corners in [false, true] {
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                if depth(n, ix, iy) != 1 {
                    continue;
                }
                let sides: Vec<Side> = Side::ALL
                    .into_iter()
                    .filter(|&s| side_coords(s, n, ix, iy).1 == 1)
                    .collect();
                if (sides.len() > 1) != pass_corners {
                    continue;
                }
                let weight = T::one() / T::lit(sides.len() as f64);
                let mut e = empty();
                for &s in &sides {
                    let (k, _) = side_coords(s, n, ix, iy);
                    let (jx, jy) = s.node(n, k, 2);
                    let f = data.dirichlet_at(s, k);
                    let g = data.neumann_at(s, k);
                    for m in 0..r {
                        e.constant[m] += weight * quarter * (three * f[m] - (h + h) * g[m]);
                    }
                    let inner = inner_value(&exprs, grid.index(jx, jy));
                    e.scaled_add(weight * quarter, &inner);
                }
                exprs[grid.index(ix, iy)] = Some(e);
            }
        }
    }
    exprs
}
