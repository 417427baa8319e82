//! The contraction iteration `U_k = Φ(U_{k-1})` from the linear initial
//! guess, with cost history and stopping rules.

use std::io::Write;
use std::time::Instant;

use crate::elliptic::{cost, minimize_j, CutoffBound, EllipticSystem, FourierField, NonlinearTerm, SolveReport};
use crate::error::{Error, Result};
use crate::forward::BoundaryVectors;
use crate::grid::gradient_anywhere;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    /// Iterations after `U_0`.
    pub max_iterations: usize,
    /// Stop early once `|J_k - J_{k-1}| ≤ tol · J_{k-1}` holds for
    /// `consecutive` iterations in a row.
    pub tolerance: Option<f64>,
    pub consecutive: usize,
    /// Abort when `J_k > factor · J_0`.
    pub divergence_factor: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iterations: 25,
            tolerance: None,
            consecutive: 3,
            divergence_factor: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopReason {
    MaxIterations,
    Stabilized,
    /// `J_k` was non-finite or above the guard; `U_k` is not kept.
    Diverged { k: usize, cost: f64, limit: f64 },
}

impl StopReason {
    pub fn tag(self) -> &'static str {
        match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::Stabilized => "stabilized",
            StopReason::Diverged { .. } => "diverged",
        }
    }
}

/// One row per iterate, starting at `U_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub cost: f64,
    /// Weighted `H¹` norm of `U_k - U_{k-1}`; `None` for `k = 0`.
    pub iterate_diff: Option<f64>,
    pub seconds: f64,
    pub solve: SolveReport,
}

#[derive(Clone, Debug)]
pub struct RunHistory<T> {
    pub records: Vec<IterationRecord>,
    pub initial: FourierField<T>,
    pub final_field: FourierField<T>,
    pub cutoff: Option<CutoffBound<T>>,
    pub stop: StopReason,
}

impl<T: Scalar> RunHistory<T> {
    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cost).collect()
    }

    /// `‖U_k - U_{k-1}‖` for `k = 1..`.
    pub fn differences(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.iterate_diff).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_history_csv(&self.records, out)
    }

    /// The history itself, or [`Error::Diverged`] if the guard tripped.
    pub fn into_result(self) -> Result<Self> {
        match self.stop {
            StopReason::Diverged { k, cost, limit } => Err(Error::Diverged { k, cost, limit }),
            _ => Ok(self),
        }
    }
}

pub fn write_history_csv<W: Write>(records: &[IterationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k [1]", "J [1]", "iterate_diff [1]", "seconds [s]"])?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            format!("{:.15e}", r.cost),
            r.iterate_diff.map_or(String::new(), |d| format!("{d:.15e}")),
            format!("{:.6}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(Σ w (|U|² + |∇U|²) dx)^{1/2}` with trapezoid weights and second-order
/// gradients up to the boundary.
pub fn weighted_h1_norm<T: Scalar>(field: &FourierField<T>, weights: &[T]) -> T {
    let grid = field.grid();
    let n = grid.nodes();
    let h = grid.spacing();
    let area = grid.trapezoid_weights();
    let mut total = T::zero();
    for m in 0..field.modes() {
        let u = field.component(m);
        for iy in 0..n {
            for ix in 0..n {
                let k = iy * n + ix;
                let g = gradient_anywhere(&u, n, h, ix, iy);
                total += weights[k] * area[k] * (u[k] * u[k] + g[0] * g[0] + g[1] * g[1]);
            }
        }
    }
    total.sqrt()
}

/// `U_0`: the minimizer with the nonlinear term dropped.
pub fn init_u0<T: Scalar>(system: &EllipticSystem<T>, data: &BoundaryVectors<T>) -> Result<(FourierField<T>, SolveReport)> {
    let m = system.minimize(data, None)?;
    Ok((m.field, m.report))
}

/// Runs the iteration. `cutoff_factor` sets `M = factor · max(|U_0| + |∇U_0|)`
/// (no cut-off when `None`); `observer` sees every iterate.
///
/// A tripped divergence guard ends the run early with
/// [`StopReason::Diverged`] so the partial history survives;
/// [`RunHistory::into_result`] turns it into an error.
pub fn iterate<T: Scalar>(
    system: &EllipticSystem<T>,
    term: &NonlinearTerm<T>,
    data: &BoundaryVectors<T>,
    norm_weights: &[T],
    cutoff_factor: Option<T>,
    stop: &StopRule,
    mut observer: impl FnMut(usize, &FourierField<T>),
) -> Result<RunHistory<T>> {
    let clock = Instant::now();
    let (initial, report) = init_u0(system, data)?;
    let cutoff = match cutoff_factor {
        Some(f) => Some(CutoffBound::from_field(&initial, f)?),
        None => None,
    };
    let term = term.clone().with_cutoff(cutoff);
    let j0 = cost(system, &term, &initial, None)?.as_f64();
    let mut records = vec![IterationRecord {
        k: 0,
        cost: j0,
        iterate_diff: None,
        seconds: clock.elapsed().as_secs_f64(),
        solve: report,
    }];
    observer(0, &initial);
    log::info!("k = 0: J = {j0:.6e}");
    let limit = stop.divergence_factor * j0;
    let mut current = initial.clone();
    let mut calm = 0;
    let mut reason = StopReason::MaxIterations;
    for k in 1..=stop.max_iterations {
        let clock = Instant::now();
        let next = minimize_j(system, &term, &current, data, None)?;
        let j = cost(system, &term, &next.field, None)?.as_f64();
        if !j.is_finite() || j > limit {
            log::warn!("k = {k}: J = {j:.3e} exceeds the divergence limit {limit:.3e}");
            reason = StopReason::Diverged { k, cost: j, limit };
            break;
        }
        let mut diff = next.field.clone();
        diff.axpy(-T::one(), &current);
        let d = weighted_h1_norm(&diff, norm_weights).as_f64();
        let previous = records.last().map_or(j0, |r| r.cost);
        records.push(IterationRecord {
            k,
            cost: j,
            iterate_diff: Some(d),
            seconds: clock.elapsed().as_secs_f64(),
            solve: next.report,
        });
        log::info!("k = {k}: J = {j:.6e}, |U_k - U_k-1| = {d:.3e}");
        current = next.field;
        observer(k, &current);
        if let Some(tol) = stop.tolerance {
            if (j - previous).abs() <= tol * previous {
                calm += 1;
            } else {
                calm = 0;
            }
            if calm >= stop.consecutive {
                reason = StopReason::Stabilized;
                break;
            }
        }
    }
    Ok(RunHistory {
        records,
        initial,
        final_field: current,
        cutoff,
        stop: reason,
    })
}
