//! `u_comp`, `c_comp` from the final iterate, and reconstruction metrics.

use std::io::Write;

use crate::elliptic::FourierField;
use crate::error::{Error, Result};
use crate::forward::phantom::support_components;
use crate::forward::{initial_denominator, InitialField, Nonlinearity, Potential};
use crate::scalar::Scalar;
use crate::time_basis::TimeBasis;

/// Value reported for a support score whose denominator vanishes.
pub const SUPPORT_SCORE_CAP: f64 = 1e12;

/// Half-width of the window used to detect local maxima (5×5 nodes).
pub const PEAK_WINDOW: usize = 2;

/// `Σ u_n(x) Ψ_n(t)` at every node.
pub fn compute_u_comp<T: Scalar>(field: &FourierField<T>, basis: &TimeBasis<T>, t: T) -> Result<Vec<T>> {
    let grid = field.grid();
    (0..grid.len())
        .map(|k| basis.synthesize(field.at(k), 0, t))
        .collect()
}

/// `(Σ u_n Ψ_n''(0) - Δ_h p) / F(x, p, 0, ∇_h p)`, optionally clipped below at 0.
pub fn compute_c<T: Scalar>(
    field: &FourierField<T>,
    basis: &TimeBasis<T>,
    initial: &InitialField<T>,
    nonlinearity: &Nonlinearity<T>,
    clip: bool,
) -> Result<Potential<T>> {
    let grid = field.grid();
    if field.modes() != basis.count() {
        return Err(Error::LengthMismatch {
            expected: basis.count(),
            got: field.modes(),
        });
    }
    let denominator = initial_denominator(nonlinearity, initial, grid)?;
    let h = grid.spacing();
    let n = grid.nodes();
    let second = basis.second_at_zero();
    let values = (0..grid.len())
        .map(|k| {
            let lead: T = field.at(k).iter().zip(second).map(|(&a, &b)| a * b).sum();
            let c = (lead - initial.laplacian(grid.point(k % n, k / n), h)) / denominator[k];
            if clip {
                c.max(T::zero())
            } else {
                c
            }
        })
        .collect();
    Ok(Potential {
        grid: grid.clone(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentScore {
    /// Mean of the true potential over the component.
    pub true_value: f64,
    pub nodes: usize,
    /// Mean of `c_comp` over the component divided by the mean of `|c_comp|`
    /// off the whole true support.
    pub support_score: f64,
    pub peak_value: f64,
    pub peak_location: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalMaximum {
    pub value: f64,
    pub location: [f64; 2],
    /// Index into `Metrics::components` if the node lies in a true support.
    pub component: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub relative_l2: f64,
    /// Support score over the union of all components.
    pub support_score: f64,
    pub components: Vec<ComponentScore>,
    /// Local maxima over 5×5 windows, largest first.
    pub maxima: Vec<LocalMaximum>,
}

impl Metrics {
    pub fn min_component_score(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.support_score)
            .fold(f64::INFINITY, f64::min)
    }

    /// Peak of the component with the largest true value over the peak of the
    /// one with the smallest.
    pub fn peak_ratio(&self) -> Option<f64> {
        let by = |f: fn(f64, f64) -> bool| {
            self.components
                .iter()
                .reduce(|a, b| if f(b.true_value, a.true_value) { b } else { a })
        };
        let hi = by(|a, b| a > b)?;
        let lo = by(|a, b| a < b)?;
        Some(hi.peak_value / lo.peak_value)
    }

    /// Whether each of the `count` largest local maxima lies in a support.
    pub fn top_maxima_in_support(&self, count: usize) -> bool {
        self.maxima.len() >= count && self.maxima[..count].iter().all(|m| m.component.is_some())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec![
            "relative_l2 [1]".to_string(),
            "support_score [1]".to_string(),
            "min_component_score [1]".to_string(),
            "peak_ratio [1]".to_string(),
            "top2_maxima_in_support [bool]".to_string(),
        ];
        let mut row = vec![
            format!("{:.12e}", self.relative_l2),
            format!("{:.12e}", self.support_score),
            format!("{:.12e}", self.min_component_score()),
            self.peak_ratio().map_or(String::new(), |r| format!("{r:.12e}")),
            self.top_maxima_in_support(2).to_string(),
        ];
        for (i, c) in self.components.iter().enumerate() {
            let i = i + 1;
            header.extend([
                format!("component{i}_true_value [1]"),
                format!("component{i}_support_score [1]"),
                format!("component{i}_peak_value [1]"),
                format!("component{i}_peak_x1 [1]"),
                format!("component{i}_peak_x2 [1]"),
            ]);
            row.extend([
                format!("{}", c.true_value),
                format!("{:.12e}", c.support_score),
                format!("{:.12e}", c.peak_value),
                format!("{}", c.peak_location[0]),
                format!("{}", c.peak_location[1]),
            ]);
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&header)?;
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    }
}

fn capped(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num > 0.0 {
            SUPPORT_SCORE_CAP
        } else {
            0.0
        }
    } else {
        (num / den).min(SUPPORT_SCORE_CAP)
    }
}

/// Local maxima of `values` over `(2·PEAK_WINDOW + 1)²` windows, ties going
/// to the lower flat index, sorted by decreasing value.
pub fn local_maxima<T: Scalar>(potential: &Potential<T>) -> Vec<(usize, f64)> {
    let n = potential.grid.nodes();
    let v: Vec<f64> = potential.values.iter().map(|x| x.as_f64()).collect();
    let mut out = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let k = iy * n + ix;
            let mut is_max = true;
            'window: for jy in iy.saturating_sub(PEAK_WINDOW)..=(iy + PEAK_WINDOW).min(n - 1) {
                for jx in ix.saturating_sub(PEAK_WINDOW)..=(ix + PEAK_WINDOW).min(n - 1) {
                    let j = jy * n + jx;
                    if v[j] > v[k] || (v[j] == v[k] && j < k) {
                        is_max = false;
                        break 'window;
                    }
                }
            }
            if is_max {
                out.push((k, v[k]));
            }
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

pub fn score<T: Scalar>(computed: &Potential<T>, truth: &Potential<T>) -> Result<Metrics> {
    if computed.grid != truth.grid {
        return Err(Error::GridMismatch("computed and true potentials differ in grid".into()));
    }
    let grid = &truth.grid;
    let n = grid.nodes();
    let area = grid.trapezoid_weights();
    let (mut err, mut norm) = (0.0, 0.0);
    for k in 0..grid.len() {
        let (c, t) = (computed.values[k].as_f64(), truth.values[k].as_f64());
        let a = area[k].as_f64();
        err += a * (c - t) * (c - t);
        norm += a * t * t;
    }
    let relative_l2 = if norm == 0.0 { err.sqrt() } else { (err / norm).sqrt() };

    let comps = support_components(truth);
    let mut label = vec![None; grid.len()];
    for (i, comp) in comps.iter().enumerate() {
        for &k in comp {
            label[k] = Some(i);
        }
    }
    let outside: Vec<f64> = (0..grid.len())
        .filter(|&k| label[k].is_none())
        .map(|k| computed.values[k].as_f64().abs())
        .collect();
    let outside_mean = if outside.is_empty() {
        0.0
    } else {
        outside.iter().sum::<f64>() / outside.len() as f64
    };
    let point = |k: usize| {
        let p = grid.point(k % n, k / n);
        [p[0].as_f64(), p[1].as_f64()]
    };
    let mean_over = |nodes: &[usize], f: &dyn Fn(usize) -> f64| nodes.iter().map(|&k| f(k)).sum::<f64>() / nodes.len() as f64;
    let components: Vec<ComponentScore> = comps
        .iter()
        .map(|comp| {
            let peak = comp
                .iter()
                .copied()
                .max_by(|&a, &b| computed.values[a].as_f64().total_cmp(&computed.values[b].as_f64()))
                .expect("components are non-empty");
            ComponentScore {
                true_value: mean_over(comp, &|k| truth.values[k].as_f64()),
                nodes: comp.len(),
                support_score: capped(mean_over(comp, &|k| computed.values[k].as_f64()), outside_mean),
                peak_value: computed.values[peak].as_f64(),
                peak_location: point(peak),
            }
        })
        .collect();
    let all: Vec<usize> = comps.iter().flatten().copied().collect();
    let support_score = if all.is_empty() {
        0.0
    } else {
        capped(mean_over(&all, &|k| computed.values[k].as_f64()), outside_mean)
    };
    let maxima = local_maxima(computed)
        .into_iter()
        .map(|(k, value)| LocalMaximum {
            value,
            location: point(k),
            component: label[k],
        })
        .collect();
    Ok(Metrics {
        relative_l2,
        support_score,
        components,
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{make_phantom, PhantomKind};
    use crate::grid::SpatialGrid;
    use crate::time_basis::{build_basis, TimeGrid};

    fn omega() -> SpatialGrid<f64> {
        SpatialGrid::new(1.0, 65).unwrap()
    }

    fn basis(modes: usize) -> TimeBasis<f64> {
        build_basis(modes, TimeGrid::new(2.0, 256).unwrap()).unwrap()
    }

    #[test]
    fn u_comp_synthesizes_modes() {
        let grid = SpatialGrid::new(1.0, 5).unwrap();
        let b = basis(3);
        assert!(compute_u_comp(&FourierField::zeros(grid.clone(), 3), &b, 0.7)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let mut f = FourierField::zeros(grid.clone(), 3);
        f.at_mut(7)[1] = 1.0;
        let u = compute_u_comp(&f, &b, 0.7).unwrap();
        assert_eq!(u[7], b.evaluate(1, 0, 0.7).unwrap());
        assert_eq!(u[6], 0.0);
        assert!(compute_u_comp(&f, &b, 2.5).is_err());
    }

    #[test]
    fn c_from_zero_field_and_ratio_identity() {
        let grid = SpatialGrid::new(1.0, 9).unwrap();
        let b = basis(4);
        let p = InitialField::Constant(0.5);
        let f = Nonlinearity::SqrtGrad;
        let c = compute_c(&FourierField::zeros(grid.clone(), 4), &b, &p, &f, false).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        // Numerator Σ u_n Ψ_n''(0) equal to F(p) = √0.5 via a single mode.
        let psi = b.second_at_zero()[2];
        let field = FourierField::sample(grid.clone(), 4, |_| vec![0.0, 0.0, 0.5f64.sqrt() / psi, 0.0]);
        let c = compute_c(&field, &b, &p, &f, false).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let mut twice = field.clone();
        twice.axpy(1.0, &field);
        let c2 = compute_c(&twice, &b, &p, &f, false).unwrap();
        assert!(c2.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let mut negative = field.clone();
        negative.axpy(-2.0, &field);
        let clipped = compute_c(&negative, &b, &p, &f, true).unwrap();
        assert!(clipped.values.iter().all(|&v| v == 0.0));
        assert!(compute_c(&field, &b, &InitialField::Constant(0.0), &Nonlinearity::Quadratic, false).is_err());
    }

    #[test]
    fn perfect_and_empty_reconstructions() {
        let grid = omega();
        let truth = make_phantom(&PhantomKind::TwoDisks, &grid).unwrap();
        let m = score(&truth, &truth).unwrap();
        assert_eq!(m.relative_l2, 0.0);
        assert_eq!(m.support_score, SUPPORT_SCORE_CAP);
        assert_eq!(m.components.len(), 2);
        assert_eq!(m.peak_ratio(), Some(2.0));
        let zero = Potential::zeros(grid);
        assert_eq!(score(&zero, &truth).unwrap().relative_l2, 1.0);
    }

    #[test]
    fn uniform_offset_error_is_closed_form() {
        let grid = omega();
        let truth = make_phantom(&PhantomKind::TwoDisks, &grid).unwrap();
        let mut shifted = truth.clone();
        shifted.values.iter_mut().for_each(|v| *v += 0.1);
        let area = grid.trapezoid_weights();
        let norm: f64 = truth.values.iter().zip(&area).map(|(t, a)| a * t * t).sum::<f64>().sqrt();
        let expected = 0.1 * 4f64.sqrt() / norm;
        let m = score(&shifted, &truth).unwrap();
        assert!((m.relative_l2 - expected).abs() < 1e-12);
        // Inside mean ≈ 2.1 or 1.1 against 0.1 outside.
        assert!((m.components[1].support_score - 11.0).abs() < 1e-9 || (m.components[0].support_score - 11.0).abs() < 1e-9);
    }

    #[test]
    fn maxima_and_peaks() {
        let grid = omega();
        let truth = make_phantom(&PhantomKind::TwoDisks, &grid).unwrap();
        let bumps = grid.sample(|[x, y]| {
            1.8 * (-((x + 0.45).powi(2) + y * y) / 0.02).exp() + 0.9 * (-((x - 0.45).powi(2) + y * y) / 0.02).exp()
                + 0.3 * (-((x - 0.7).powi(2) + (y - 0.7).powi(2)) / 0.01).exp()
        });
        let comp = Potential { grid: grid.clone(), values: bumps };
        let m = score(&comp, &truth).unwrap();
        assert!(m.top_maxima_in_support(2));
        assert!(!m.top_maxima_in_support(3));
        assert!((m.peak_ratio().unwrap() - 2.0).abs() < 1e-9);
        assert!((m.maxima[0].location[0] + 0.45).abs() <= grid.spacing() / 2.0);
        assert!(m.min_component_score() > 2.0);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("relative_l2 [1],support_score [1]"));
    }
}
