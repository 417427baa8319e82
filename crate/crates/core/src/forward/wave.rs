//! Explicit leapfrog scheme for `u_tt = Δu + c F(x, u, u_t, ∇u)` on the
//! enlarged square, boundary held at `p`.

use crate::error::{Error, Result};
use crate::forward::model::{InitialField, Nonlinearity};
use crate::grid::{gradient, laplacian, SpatialGrid};
use crate::scalar::Scalar;
use crate::time_basis::TimeGrid;

/// How the first step `u_1` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartRule {
    /// `u_0 = u_1 = p`. Second-order accurate for `u(t_j - Δt/2)`, first
    /// order for `u(t_j)`.
    #[default]
    Repeat,
    /// `u_1 = p + Δt²/2 · u_tt(0)`, second order for `u(t_j)`.
    Taylor,
}

impl StartRule {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "repeat" => Ok(StartRule::Repeat),
            "taylor" => Ok(StartRule::Taylor),
            other => Err(Error::InvalidParameter(format!(
                "unknown start rule '{other}' (expected repeat or taylor)"
            ))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            StartRule::Repeat => "repeat",
            StartRule::Taylor => "taylor",
        }
    }
}

pub struct WaveProblem<'a, T> {
    pub grid: &'a SpatialGrid<T>,
    pub time: &'a TimeGrid<T>,
    /// `c` on `grid`.
    pub potential: &'a [T],
    pub nonlinearity: &'a Nonlinearity<T>,
    pub initial: &'a InitialField<T>,
    pub start: StartRule,
}

/// `u(x, t_j)` on the whole grid for `j = 0..=M_t`.
#[derive(Clone, Debug)]
pub struct WaveField<T> {
    pub grid: SpatialGrid<T>,
    pub time: TimeGrid<T>,
    pub snapshots: Vec<Vec<T>>,
}

/// Stability bound of the 2-D scheme.
pub fn check_cfl<T: Scalar>(dt: T, h: T) -> Result<()> {
    let limit = h / T::lit(2.0).sqrt();
    if dt > limit {
        return Err(Error::Cfl {
            dt: dt.as_f64(),
            limit: limit.as_f64(),
        });
    }
    Ok(())
}

pub fn solve_wave<T: Scalar>(problem: &WaveProblem<'_, T>) -> Result<WaveField<T>> {
    let mut snapshots = Vec::with_capacity(problem.time.len());
    solve_wave_forced(problem, None, |_, u| snapshots.push(u.to_vec()))?;
    Ok(WaveField {
        grid: problem.grid.clone(),
        time: problem.time.clone(),
        snapshots,
    })
}

/// Runs the scheme, handing each time level to `observer` instead of storing
/// the whole field.
pub fn solve_wave_observed<T: Scalar>(
    problem: &WaveProblem<'_, T>,
    observer: impl FnMut(usize, &[T]),
) -> Result<()> {
    solve_wave_forced(problem, None, observer)
}

pub type Source<'s, T> = &'s dyn Fn([T; 2], T) -> T;

/// Runs the scheme with an extra source term `s(x, t)` added to the right-hand
/// side (used for manufactured-solution checks).
pub fn solve_wave_forced<T: Scalar>(
    problem: &WaveProblem<'_, T>,
    source: Option<Source<'_, T>>,
    mut observer: impl FnMut(usize, &[T]),
) -> Result<()> {
    let grid = problem.grid;
    let n = grid.nodes();
    let h = grid.spacing();
    let dt = problem.time.step();
    check_cfl(dt, h)?;
    if problem.potential.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: problem.potential.len(),
        });
    }
    let c = problem.potential;
    let p: Vec<T> = grid.sample(|x| problem.initial.value(x));
    let points: Vec<[T; 2]> = (0..grid.len()).map(|i| grid.point(i % n, i / n)).collect();
    let dt2 = dt * dt;
    let two = T::lit(2.0);

    let mut prev = p.clone();
    let mut cur = p.clone();
    if problem.start == StartRule::Taylor {
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let k = iy * n + ix;
                let mut acc = laplacian(&p, n, h, ix, iy);
                if c[k] != T::zero() {
                    let g = gradient(&p, n, h, ix, iy);
                    acc += c[k] * problem.nonlinearity.eval(points[k], p[k], T::zero(), g);
                }
                if let Some(s) = source {
                    acc += s(points[k], T::zero());
                }
                cur[k] = p[k] + dt2 / two * acc;
            }
        }
    }
    observer(0, &prev);
    observer(1, &cur);
    let mut next = p.clone();
    for j in 0..problem.time.intervals() - 1 {
        let t = problem.time.node(j + 1);
        for iy in 1..n - 1 {
            for ix in 1..n - 1 {
                let k = iy * n + ix;
                let mut acc = laplacian(&cur, n, h, ix, iy);
                // c F vanishes off the support; skip the evaluation there.
                if c[k] != T::zero() {
                    let g = gradient(&cur, n, h, ix, iy);
                    let ut = (cur[k] - prev[k]) / dt;
                    acc += c[k] * problem.nonlinearity.eval(points[k], cur[k], ut, g);
                }
                if let Some(s) = source {
                    acc += s(points[k], t);
                }
                next[k] = dt2 * acc + two * cur[k] - prev[k];
            }
        }
        if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: j + 2,
                ix: bad % n,
                iy: bad / n,
            });
        }
        observer(j + 2, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(())
}
