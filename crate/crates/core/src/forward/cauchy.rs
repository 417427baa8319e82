//! Lateral Cauchy data on the boundary of the measurement square.
//!
//! Traces are stored side by side (see [`crate::grid::boundary_entries`]):
//! entry `side * n + k`. Corners therefore appear twice, once per side, with
//! the Neumann value taken along that side's normal.

use rand::Rng;

use crate::error::{Error, Result};
use crate::forward::wave::WaveField;
use crate::grid::{Side, SpatialGrid};
use crate::rng;
use crate::scalar::Scalar;
use crate::time_basis::{TimeBasis, TimeGrid};

/// Time series of `f = u` and `g = ∂_ν u` per boundary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData<T> {
    pub grid: SpatialGrid<T>,
    pub time: TimeGrid<T>,
    /// `[entry][j]`
    pub dirichlet: Vec<Vec<T>>,
    /// `[entry][j]`
    pub neumann: Vec<Vec<T>>,
}

/// Projected data: `N` coefficients per boundary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryVectors<T> {
    /// Nodes per side of the measurement grid.
    pub nodes: usize,
    pub modes: usize,
    /// `[entry * modes + m]`
    pub dirichlet: Vec<T>,
    /// `[entry * modes + m]`
    pub neumann: Vec<T>,
}

impl<T: Scalar> BoundaryVectors<T> {
    pub fn zeros(nodes: usize, modes: usize) -> Self {
        Self {
            nodes,
            modes,
            dirichlet: vec![T::zero(); 4 * nodes * modes],
            neumann: vec![T::zero(); 4 * nodes * modes],
        }
    }

    pub fn entries(&self) -> usize {
        4 * self.nodes
    }

    pub fn dirichlet_at(&self, side: Side, k: usize) -> &[T] {
        let e = side.ordinal() * self.nodes + k;
        &self.dirichlet[e * self.modes..(e + 1) * self.modes]
    }

    pub fn neumann_at(&self, side: Side, k: usize) -> &[T] {
        let e = side.ordinal() * self.nodes + k;
        &self.neumann[e * self.modes..(e + 1) * self.modes]
    }
}

/// Collects traces on `omega` from time levels of a run on the larger grid.
pub struct TraceRecorder<T> {
    outer_nodes: usize,
    offset: usize,
    omega: SpatialGrid<T>,
    dirichlet: Vec<Vec<T>>,
    neumann: Vec<Vec<T>>,
}

impl<T: Scalar> TraceRecorder<T> {
    pub fn new(outer: &SpatialGrid<T>, omega: &SpatialGrid<T>) -> Result<Self> {
        let offset = outer.subgrid_offset(omega)?;
        let entries = 4 * omega.nodes();
        Ok(Self {
            outer_nodes: outer.nodes(),
            offset,
            omega: omega.clone(),
            dirichlet: vec![Vec::new(); entries],
            neumann: vec![Vec::new(); entries],
        })
    }

    /// Records one time level (levels must arrive in order).
    pub fn record(&mut self, u: &[T]) {
        let n = self.omega.nodes();
        let h = self.omega.spacing();
        let at = |(ix, iy): (usize, usize)| {
            u[(iy + self.offset) * self.outer_nodes + ix + self.offset]
        };
        for side in Side::ALL {
            for k in 0..n {
                let e = side.ordinal() * n + k;
                let u0 = at(side.node(n, k, 0));
                let u1 = at(side.node(n, k, 1));
                let u2 = at(side.node(n, k, 2));
                self.dirichlet[e].push(u0);
                self.neumann[e].push((T::lit(3.0) * u0 - T::lit(4.0) * u1 + u2) / (h + h));
            }
        }
    }

    pub fn finish(self, time: TimeGrid<T>) -> Result<CauchyData<T>> {
        let got = self.dirichlet.first().map_or(0, Vec::len);
        if got != time.len() {
            return Err(Error::LengthMismatch {
                expected: time.len(),
                got,
            });
        }
        Ok(CauchyData {
            grid: self.omega,
            time,
            dirichlet: self.dirichlet,
            neumann: self.neumann,
        })
    }
}

/// Restricts a stored wave field to the boundary of `omega`. The Neumann
/// trace uses the second-order one-sided stencil
/// `(3u(x) - 4u(x - hν) + u(x - 2hν)) / 2h`.
pub fn extract_cauchy<T: Scalar>(field: &WaveField<T>, omega: &SpatialGrid<T>) -> Result<CauchyData<T>> {
    let mut rec = TraceRecorder::new(&field.grid, omega)?;
    for u in &field.snapshots {
        rec.record(u);
    }
    rec.finish(field.time.clone())
}

impl<T: Scalar> CauchyData<T> {
    /// Keeps every `space`-th boundary node and every `time`-th time level.
    pub fn downsample(&self, space: usize, time: usize) -> Result<Self> {
        let n = self.grid.nodes();
        if space == 0 || time == 0 || !(n - 1).is_multiple_of(space) || !self.time.intervals().is_multiple_of(time) {
            return Err(Error::GridMismatch(format!(
                "cannot downsample {n} nodes / {} intervals by ({space}, {time})",
                self.time.intervals()
            )));
        }
        let coarse_n = (n - 1) / space + 1;
        let grid = SpatialGrid::new(self.grid.half_width(), coarse_n)?;
        let tgrid = TimeGrid::new(self.time.final_time(), self.time.intervals() / time)?;
        let pick = |series: &Vec<Vec<T>>| -> Vec<Vec<T>> {
            Side::ALL
                .iter()
                .flat_map(|s| (0..coarse_n).map(move |k| s.ordinal() * n + k * space))
                .map(|e| series[e].iter().step_by(time).copied().collect())
                .collect()
        };
        Ok(Self {
            grid,
            time: tgrid,
            dirichlet: pick(&self.dirichlet),
            neumann: pick(&self.neumann),
        })
    }
}

/// Projects every boundary series onto the time basis.
pub fn project_cauchy<T: Scalar>(data: &CauchyData<T>, basis: &TimeBasis<T>) -> Result<BoundaryVectors<T>> {
    if &data.time != basis.grid() {
        return Err(Error::GridMismatch(format!(
            "data sampled on {} intervals over T = {}, basis on {} over T = {}",
            data.time.intervals(),
            data.time.final_time(),
            basis.grid().intervals(),
            basis.final_time()
        )));
    }
    let modes = basis.count();
    let mut out = BoundaryVectors::zeros(data.grid.nodes(), modes);
    for (e, (f, g)) in data.dirichlet.iter().zip(&data.neumann).enumerate() {
        out.dirichlet[e * modes..(e + 1) * modes].copy_from_slice(&basis.project(f)?);
        out.neumann[e * modes..(e + 1) * modes].copy_from_slice(&basis.project(g)?);
    }
    Ok(out)
}

fn perturb<T: Scalar>(clean: &[T], level: T, rng: &mut impl Rng) -> Vec<T> {
    let norm = clean.iter().map(|&v| v * v).sum::<T>().sqrt();
    let mut r: Vec<f64> = (0..clean.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn > 0.0 {
        r.iter_mut().for_each(|v| *v /= rn);
    }
    clean
        .iter()
        .zip(&r)
        .map(|(&c, &d)| c + level * norm * T::lit(d))
        .collect()
}

fn check_level<T: Scalar>(level: T) -> Result<()> {
    if level >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {level}"
        )))
    }
}

fn perturb_series<T: Scalar>(clean: &[Vec<T>], level: T, rng: &mut impl Rng) -> Vec<Vec<T>> {
    let width = clean.first().map_or(0, Vec::len);
    let flat: Vec<T> = clean.iter().flatten().copied().collect();
    perturb(&flat, level, rng)
        .chunks(width.max(1))
        .map(<[T]>::to_vec)
        .collect()
}

/// `f = f* + level ‖f*‖₂ r̂` on the sampled time series, `r̂` a unit vector
/// of uniform(-1, 1) samples, independently for the Dirichlet and Neumann
/// data.
pub fn add_noise<T: Scalar>(data: &CauchyData<T>, level: T, seed: u64) -> Result<CauchyData<T>> {
    check_level(level)?;
    if level == T::zero() {
        return Ok(data.clone());
    }
    let mut out = data.clone();
    out.dirichlet = perturb_series(&data.dirichlet, level, &mut rng::stream(seed, "noise/dirichlet"));
    out.neumann = perturb_series(&data.neumann, level, &mut rng::stream(seed, "noise/neumann"));
    Ok(out)
}

/// Same construction applied to the projected vectors instead of the series.
pub fn add_noise_projected<T: Scalar>(
    data: &BoundaryVectors<T>,
    level: T,
    seed: u64,
) -> Result<BoundaryVectors<T>> {
    check_level(level)?;
    if level == T::zero() {
        return Ok(data.clone());
    }
    let mut out = data.clone();
    out.dirichlet = perturb(&data.dirichlet, level, &mut rng::stream(seed, "noise/dirichlet"));
    out.neumann = perturb(&data.neumann, level, &mut rng::stream(seed, "noise/neumann"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time_basis::build_basis;

    fn static_field(grid: &SpatialGrid<f64>, time: &TimeGrid<f64>, f: impl Fn([f64; 2]) -> f64) -> WaveField<f64> {
        let u = grid.sample(f);
        WaveField {
            grid: grid.clone(),
            time: time.clone(),
            snapshots: vec![u; time.len()],
        }
    }

    #[test]
    fn constant_field_gives_constant_dirichlet_and_zero_neumann() {
        let g = SpatialGrid::new(2.0, 33).unwrap();
        let omega = SpatialGrid::new(1.0, 17).unwrap();
        let t = TimeGrid::new(1.0, 4).unwrap();
        let d = extract_cauchy(&static_field(&g, &t, |_| 0.5), &omega).unwrap();
        assert!(d.dirichlet.iter().flatten().all(|&v| v == 0.5));
        assert!(d.neumann.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_field_has_unit_normal_derivative_on_vertical_sides() {
        let g = SpatialGrid::new(2.0, 33).unwrap();
        let omega = SpatialGrid::new(1.0, 17).unwrap();
        let t = TimeGrid::new(1.0, 2).unwrap();
        let d = extract_cauchy(&static_field(&g, &t, |[x, _]| x), &omega).unwrap();
        let n = 17;
        for k in 0..n {
            let e = |s: Side| s.ordinal() * n + k;
            assert!((d.neumann[e(Side::East)][0] - 1.0).abs() < 1e-12);
            assert!((d.neumann[e(Side::West)][0] + 1.0).abs() < 1e-12);
            assert!(d.neumann[e(Side::North)][0].abs() < 1e-12);
            assert!(d.neumann[e(Side::South)][0].abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_trace_is_second_order() {
        let errs: Vec<f64> = [17usize, 33, 65]
            .iter()
            .map(|&n| {
                let omega = SpatialGrid::new(1.0, n).unwrap();
                let g = SpatialGrid::with_spacing(2.0, omega.spacing()).unwrap();
                let t = TimeGrid::new(1.0, 2).unwrap();
                let d = extract_cauchy(&static_field(&g, &t, |[x, y]| (1.3 * x).sin() * (0.7 * y).exp()), &omega).unwrap();
                let mut worst: f64 = 0.0;
                for (side, k) in crate::grid::boundary_entries(n) {
                    let (ix, iy) = side.node(n, k, 0);
                    let [x, y] = omega.point(ix, iy);
                    let grad = [1.3 * (1.3 * x).cos() * (0.7 * y).exp(), 0.7 * (1.3 * x).sin() * (0.7 * y).exp()];
                    let nu = side.normal();
                    let exact = grad[0] * nu[0] as f64 + grad[1] * nu[1] as f64;
                    worst = worst.max((d.neumann[side.ordinal() * n + k][0] - exact).abs());
                }
                worst
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9, "{errs:?}");
        }
    }

    #[test]
    fn noise_has_exact_relative_norm_and_is_deterministic() {
        let mut v = BoundaryVectors::<f64>::zeros(9, 3);
        for (i, x) in v.dirichlet.iter_mut().enumerate() {
            *x = (i as f64 * 0.37).sin();
        }
        for (i, x) in v.neumann.iter_mut().enumerate() {
            *x = (i as f64 * 0.11).cos();
        }
        let a = add_noise_projected(&v, 0.05, 1).unwrap();
        let b = add_noise_projected(&v, 0.05, 1).unwrap();
        assert_eq!(a, b);
        for (noisy, clean) in [(&a.dirichlet, &v.dirichlet), (&a.neumann, &v.neumann)] {
            let diff: f64 = noisy.iter().zip(clean.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = clean.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((diff / norm - 0.05).abs() < 1e-12);
        }
        assert_eq!(add_noise_projected(&v, 0.0, 1).unwrap(), v);
        assert_ne!(add_noise_projected(&v, 0.05, 2).unwrap(), a);
        assert!(add_noise_projected(&v, -0.1, 1).is_err());
    }

    #[test]
    fn series_noise_has_exact_relative_norm() {
        let g = SpatialGrid::new(2.0, 33).unwrap();
        let omega = SpatialGrid::new(1.0, 17).unwrap();
        let t = TimeGrid::new(1.0, 8).unwrap();
        let clean = extract_cauchy(&static_field(&g, &t, |[x, y]| 0.5 + x * x - y), &omega).unwrap();
        let noisy = add_noise(&clean, 0.05, 7).unwrap();
        assert_eq!(noisy, add_noise(&clean, 0.05, 7).unwrap());
        assert_eq!(add_noise(&clean, 0.0, 7).unwrap(), clean);
        for (a, b) in [(&noisy.dirichlet, &clean.dirichlet), (&noisy.neumann, &clean.neumann)] {
            assert_eq!(a.len(), b.len());
            assert!(a.iter().all(|row| row.len() == t.len()));
            let diff: f64 = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = b.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            assert!((diff / norm - 0.05).abs() < 1e-12);
        }
        assert!(add_noise(&clean, -1.0, 7).is_err());
    }

    #[test]
    fn projection_of_basis_function_is_unit_vector() {
        let time = TimeGrid::new(2.0, 4096).unwrap();
        let basis: TimeBasis<f64> = build_basis(3, time.clone()).unwrap();
        let omega = SpatialGrid::new(1.0, 5).unwrap();
        let psi2 = basis.table(0, 1).to_vec();
        let data = CauchyData {
            grid: omega,
            time,
            dirichlet: vec![psi2.clone(); 20],
            neumann: vec![vec![0.0; psi2.len()]; 20],
        };
        let v = project_cauchy(&data, &basis).unwrap();
        for e in 0..20 {
            let f = &v.dirichlet[e * 3..e * 3 + 3];
            assert!(f[0].abs() < 1e-5 && (f[1] - 1.0).abs() < 1e-5 && f[2].abs() < 1e-5);
        }
        assert!(v.neumann.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn projection_rejects_mismatched_time_grid() {
        let basis = build_basis(2, TimeGrid::new(2.0, 64).unwrap()).unwrap();
        let data = CauchyData {
            grid: SpatialGrid::new(1.0, 3).unwrap(),
            time: TimeGrid::new(2.0, 32).unwrap(),
            dirichlet: vec![vec![0.0; 33]; 12],
            neumann: vec![vec![0.0; 33]; 12],
        };
        assert!(matches!(project_cauchy(&data, &basis), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn downsampling_keeps_aligned_samples() {
        let g = SpatialGrid::new(2.0, 33).unwrap();
        let omega = SpatialGrid::new(1.0, 17).unwrap();
        let t = TimeGrid::new(1.0, 4).unwrap();
        let d = extract_cauchy(&static_field(&g, &t, |[x, y]| x + 2.0 * y), &omega).unwrap();
        let c = d.downsample(2, 2).unwrap();
        assert_eq!(c.grid.nodes(), 9);
        assert_eq!(c.time.intervals(), 2);
        assert_eq!(c.dirichlet[Side::North.ordinal() * 9 + 3][1], d.dirichlet[Side::North.ordinal() * 17 + 6][2]);
        assert!(d.downsample(3, 2).is_err());
    }
}
