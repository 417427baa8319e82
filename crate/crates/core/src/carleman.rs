//! The Carleman weight `exp(2λ r(x)^β)`, `r = |x - x0| / b`, its
//! admissibility check, and a numerical sanity check of the estimate
//! `∫ w |Δh|² ≥ C (λ ∫ w |∇h|² + λ³ ∫ w h²)` for `h = ∂_ν h = 0` on the
//! boundary.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{gradient, gradient_anywhere, laplacian, Side, SpatialGrid};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanWeight<T> {
    pub lambda: T,
    pub beta: T,
    /// External point `x0`.
    pub center: [T; 2],
    /// Normalizer `b`.
    pub scale: T,
}

impl<T: Scalar> CarlemanWeight<T> {
    #[inline]
    pub fn radius(&self, x: [T; 2]) -> T {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1]) / self.scale
    }

    #[inline]
    pub fn weight(&self, x: [T; 2]) -> T {
        (T::lit(2.0) * self.lambda * self.radius(x).powf(self.beta)).exp()
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..*self }
    }

    /// Weights at every node of `grid`.
    pub fn sample(&self, grid: &SpatialGrid<T>) -> Vec<T> {
        grid.sample(|x| self.weight(x))
    }
}

/// Outcome of [`check_admissible`] with both margins.
#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    /// Distance from `x0` to the closed square (0 when inside).
    pub center_distance: f64,
    /// `max |x - x0|` over the closed square.
    pub max_distance: f64,
    /// `b - max_distance`.
    pub scale_margin: f64,
    pub failures: Vec<String>,
}

impl Admissibility {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Inadmissible(self.failures.join("; ")))
        }
    }
}

/// Checks the weight against the square `[-R, R]^2`.
pub fn check_admissible<T: Scalar>(half_width: T, w: &CarlemanWeight<T>) -> Admissibility {
    let r = half_width.as_f64();
    let (cx, cy) = (w.center[0].as_f64(), w.center[1].as_f64());
    let dx = (cx.abs() - r).max(0.0);
    let dy = (cy.abs() - r).max(0.0);
    let center_distance = dx.hypot(dy);
    let max_distance = [(-r, -r), (-r, r), (r, -r), (r, r)]
        .iter()
        .map(|&(x, y)| (x - cx).hypot(y - cy))
        .fold(0.0, f64::max);
    let b = w.scale.as_f64();
    let mut failures = Vec::new();
    if !(center_distance > 0.0) {
        failures.push(format!("x0 = ({cx}, {cy}) lies in the closed domain"));
    }
    if !(b > max_distance) {
        failures.push(format!(
            "b = {b} must exceed the largest distance {max_distance:.6} from x0 to the domain"
        ));
    }
    if !(w.lambda.as_f64() > 1.0) {
        failures.push(format!("lambda = {} must exceed 1", w.lambda));
    }
    if !(w.beta.as_f64() > 1.0) {
        failures.push(format!("beta = {} must exceed 1", w.beta));
    }
    Admissibility {
        center_distance,
        max_distance,
        scale_margin: b - max_distance,
        failures,
    }
}

/// `∫ w |Δh|² / (λ ∫ w |∇h|² + λ³ ∫ w h²)` over interior nodes, or `None`
/// when `h ≡ 0`.
///
/// Rejects `h` whose boundary trace is not zero, or whose discrete normal
/// derivative exceeds `4 h / R` times its largest interior gradient (a
/// vanishing derivative shows up as `O(h²)` in the one-sided stencil).
pub fn estimate_ratio<T: Scalar>(
    w: &CarlemanWeight<T>,
    grid: &SpatialGrid<T>,
    h_values: &[T],
) -> Result<Option<f64>> {
    let n = grid.nodes();
    let h = grid.spacing();
    if h_values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: h_values.len(),
        });
    }
    let scale = h_values.iter().fold(0.0f64, |a, v| a.max(v.abs().as_f64()));
    if scale == 0.0 {
        return Ok(None);
    }
    let mut max_grad: f64 = 0.0;
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            let g = gradient(h_values, n, h, ix, iy);
            max_grad = max_grad.max(g[0].hypot(g[1]).as_f64());
        }
    }
    let mut trace: f64 = 0.0;
    let mut normal: f64 = 0.0;
    for side in Side::ALL {
        for k in 0..n {
            let (ix, iy) = side.node(n, k, 0);
            trace = trace.max(h_values[grid.index(ix, iy)].abs().as_f64());
            let g = gradient_anywhere(h_values, n, h, ix, iy);
            let nu = side.normal();
            let dn = g[0].as_f64() * nu[0] as f64 + g[1].as_f64() * nu[1] as f64;
            normal = normal.max(dn.abs());
        }
    }
    if trace > 1e-10 * scale || normal > 4.0 * (h / grid.half_width()).as_f64() * max_grad {
        return Err(Error::BoundaryCondition(trace.max(normal)));
    }
    let (mut lhs, mut grad_sq, mut val_sq) = (0.0, 0.0, 0.0);
    for iy in 1..n - 1 {
        for ix in 1..n - 1 {
            let k = grid.index(ix, iy);
            let wk = w.weight(grid.point(ix, iy)).as_f64();
            let lap = laplacian(h_values, n, h, ix, iy).as_f64();
            let g = gradient(h_values, n, h, ix, iy);
            lhs += wk * lap * lap;
            grad_sq += wk * (g[0] * g[0] + g[1] * g[1]).as_f64();
            val_sq += wk * (h_values[k] * h_values[k]).as_f64();
        }
    }
    let l = w.lambda.as_f64();
    Ok(Some(lhs / (l * grad_sq + l.powi(3) * val_sq)))
}

/// One row of the diagnostic table.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub lambda: f64,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub trials: usize,
}

/// Random test function `((R²-x²)(R²-y²))³ q(x, y) / R^12`, `q` a cubic with
/// uniform(-1, 1) coefficients: vanishes with its first two derivatives on
/// the boundary.
pub fn random_test_function<T: Scalar>(grid: &SpatialGrid<T>, rng: &mut impl Rng) -> Vec<T> {
    let coeffs: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r2 = grid.half_width().as_f64().powi(2);
    grid.sample(|[x, y]| {
        let (x, y) = (x.as_f64(), y.as_f64());
        let bump = ((r2 - x * x) * (r2 - y * y) / (r2 * r2)).powi(3);
        let monomials = [1.0, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y];
        let q: f64 = coeffs.iter().zip(monomials).map(|(c, m)| c * m).sum();
        T::lit(bump * q)
    })
}

/// Min and median of the ratio over `trials` random test functions, for each
/// `λ` in `lambdas` (other weight parameters from `w`).
pub fn carleman_diagnostic<T: Scalar>(
    w: &CarlemanWeight<T>,
    grid: &SpatialGrid<T>,
    lambdas: &[T],
    trials: usize,
    seed: u64,
) -> Result<Vec<DiagnosticRow>> {
    let mut rng = rng::stream(seed, "carleman/diagnostic");
    let functions: Vec<Vec<T>> = (0..trials)
        .map(|_| random_test_function(grid, &mut rng))
        .collect();
    lambdas
        .iter()
        .map(|&lambda| {
            let wl = w.with_lambda(lambda);
            let mut ratios = Vec::with_capacity(trials);
            for f in &functions {
                if let Some(r) = estimate_ratio(&wl, grid, f)? {
                    ratios.push(r);
                }
            }
            ratios.sort_by(f64::total_cmp);
            let (min_ratio, median_ratio) = match ratios.len() {
                0 => (f64::NAN, f64::NAN),
                m => (ratios[0], ratios[m / 2]),
            };
            Ok(DiagnosticRow {
                lambda: lambda.as_f64(),
                min_ratio,
                median_ratio,
                trials: ratios.len(),
            })
        })
        .collect()
}

pub fn write_diagnostic_csv<W: Write>(rows: &[DiagnosticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda [1]", "min_ratio [1]", "median_ratio [1]", "trials [count]"])?;
    for r in rows {
        w.write_record([
            format!("{}", r.lambda),
            format!("{:.12e}", r.min_ratio),
            format!("{:.12e}", r.median_ratio),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_weight() -> CarlemanWeight<f64> {
        CarlemanWeight {
            lambda: 2.0,
            beta: 10.0,
            center: [0.0, 1.25],
            scale: 3.0,
        }
    }

    #[test]
    fn weight_values() {
        let w = default_weight();
        let v = w.weight([0.0, 0.25]);
        assert!((v - (4.0f64 / 59049.0).exp()).abs() < 1e-15);
        assert!((v - 1.000_067_74).abs() < 1e-8);
        assert_eq!(w.weight([0.0, 1.25]), 1.0);
        assert!(w.weight([-1.0, -1.0]) > w.weight([0.0, 1.0]));
    }

    #[test]
    fn default_parameters_are_admissible() {
        let rep = check_admissible(1.0, &default_weight());
        assert!(rep.passed(), "{:?}", rep.failures);
        assert!((rep.max_distance - 6.0625f64.sqrt()).abs() < 1e-14);
        assert!((rep.max_distance - 2.462_21).abs() < 1e-5);
        assert!((rep.scale_margin - 0.538).abs() < 1e-3);
        assert!((rep.center_distance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inadmissible_parameters_are_reported() {
        let inside = CarlemanWeight {
            center: [0.0, 0.0],
            ..default_weight()
        };
        assert!(!check_admissible(1.0, &inside).passed());
        let small_b = CarlemanWeight {
            scale: 2.0,
            ..default_weight()
        };
        let rep = check_admissible(1.0, &small_b);
        assert_eq!(rep.failures.len(), 1);
        assert!(rep.into_result().is_err());
        let weak = default_weight().with_lambda(0.5);
        assert!(!check_admissible(1.0, &weak).passed());
    }

    #[test]
    fn diagnostic_ratios_are_positive() {
        let grid = SpatialGrid::new(1.0, 33).unwrap();
        let rows = carleman_diagnostic(&default_weight(), &grid, &[2.0, 4.0, 8.0], 10, 3).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.min_ratio > 0.0 && r.min_ratio <= r.median_ratio, "{r:?}");
            assert_eq!(r.trials, 10);
        }
        let mut buf = Vec::new();
        write_diagnostic_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lambda [1],min_ratio [1]"));
    }

    #[test]
    fn zero_function_is_skipped_and_bad_boundary_rejected() {
        let grid = SpatialGrid::new(1.0, 17).unwrap();
        let w = default_weight();
        assert_eq!(estimate_ratio(&w, &grid, &vec![0.0; grid.len()]).unwrap(), None);
        let bad = grid.sample(|[x, y]| (1.0 - x * x) * (1.0 - y * y));
        assert!(matches!(
            estimate_ratio(&w, &grid, &bad),
            Err(Error::BoundaryCondition(_))
        ));
        let lifted = grid.sample(|[x, _]| 1.0 + x);
        assert!(estimate_ratio(&w, &grid, &lifted).is_err());
    }

    proptest! {
        #[test]
        fn weight_is_bounded_and_radially_monotone(
            a in (-1.0f64..1.0, -1.0f64..1.0),
            b in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let w = default_weight();
            let (x, y) = ([a.0, a.1], [b.0, b.1]);
            for p in [x, y] {
                let v = w.weight(p);
                prop_assert!((1.0..=(2.0 * w.lambda).exp()).contains(&v));
            }
            if w.radius(x) <= w.radius(y) {
                prop_assert!(w.weight(x) <= w.weight(y));
            }
        }
    }
}
