//! Synthetic potentials. Geometry defaults here are this crate's choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::scalar::Scalar;

/// Vertices used when a smooth curve is turned into a polygon.
const CURVE_VERTICES: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: [f64; 2],
        radius: f64,
        value: f64,
    },
    /// Closed polygon, vertices in order.
    Polygon { vertices: Vec<[f64; 2]>, value: f64 },
    /// `value * exp(1 - 1 / (1 - (r/radius)^2))` inside the disk, a smooth
    /// compactly supported profile.
    Bump {
        center: [f64; 2],
        radius: f64,
        value: f64,
    },
}

impl Shape {
    fn name(&self) -> &'static str {
        match self {
            Shape::Disk { .. } => "disk",
            Shape::Polygon { .. } => "polygon",
            Shape::Bump { .. } => "bump",
        }
    }

    /// Axis-aligned bounding box `[xmin, xmax, ymin, ymax]`.
    fn bounds(&self) -> [f64; 4] {
        match self {
            Shape::Disk { center, radius, .. } | Shape::Bump { center, radius, .. } => [
                center[0] - radius,
                center[0] + radius,
                center[1] - radius,
                center[1] + radius,
            ],
            Shape::Polygon { vertices, .. } => vertices.iter().fold(
                [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
                |b, v| [b[0].min(v[0]), b[1].max(v[0]), b[2].min(v[1]), b[3].max(v[1])],
            ),
        }
    }

    fn value_at(&self, x: f64, y: f64) -> f64 {
        match self {
            Shape::Disk {
                center,
                radius,
                value,
            } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                if r2 <= radius * radius {
                    *value
                } else {
                    0.0
                }
            }
            Shape::Bump {
                center,
                radius,
                value,
            } => {
                let s = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (radius * radius);
                if s < 1.0 {
                    value * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Shape::Polygon { vertices, value } => {
                if point_in_polygon(vertices, x, y) {
                    *value
                } else {
                    0.0
                }
            }
        }
    }
}

fn point_in_polygon(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = vertices.len().wrapping_sub(1);
    for i in 0..vertices.len() {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn sampled_curve(f: impl Fn(f64) -> [f64; 2]) -> Vec<[f64; 2]> {
    (0..CURVE_VERTICES)
        .map(|i| f(std::f64::consts::TAU * i as f64 / CURVE_VERTICES as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    TwoDisks,
    Kite,
    Peanut,
    Custom(Vec<Shape>),
}

impl PhantomKind {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "two_disks" => Ok(PhantomKind::TwoDisks),
            "kite" => Ok(PhantomKind::Kite),
            "peanut" => Ok(PhantomKind::Peanut),
            other => Err(Error::InvalidParameter(format!(
                "unknown phantom '{other}' (expected two_disks, kite or peanut)"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PhantomKind::TwoDisks => "two_disks",
            PhantomKind::Kite => "kite",
            PhantomKind::Peanut => "peanut",
            PhantomKind::Custom(_) => "custom",
        }
    }

    /// The shapes making up the phantom. Later shapes overwrite earlier ones
    /// where they overlap.
    pub fn shapes(&self) -> Vec<Shape> {
        match self {
            PhantomKind::TwoDisks => vec![
                Shape::Disk {
                    center: [-0.45, 0.0],
                    radius: 0.25,
                    value: 2.0,
                },
                Shape::Disk {
                    center: [0.45, 0.0],
                    radius: 0.25,
                    value: 1.0,
                },
            ],
            PhantomKind::Kite => vec![Shape::Polygon {
                vertices: sampled_curve(|t| {
                    [
                        0.3 * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65) + 0.1,
                        0.3 * 1.5 * t.sin(),
                    ]
                }),
                value: 2.0,
            }],
            PhantomKind::Peanut => vec![Shape::Polygon {
                vertices: sampled_curve(|t| {
                    let r = 0.6 * (t.cos().powi(2) + 0.25 * t.sin().powi(2)).sqrt();
                    [r * t.cos(), r * t.sin()]
                }),
                value: 2.0,
            }],
            PhantomKind::Custom(shapes) => shapes.clone(),
        }
    }
}

/// Values of `c(x)` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential<T> {
    pub grid: SpatialGrid<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> Potential<T> {
    pub fn zeros(grid: SpatialGrid<T>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }
}

/// Checks every shape lies inside `(-R + margin, R - margin)^2`.
pub fn check_inside(shapes: &[Shape], half_width: f64, margin: f64) -> Result<()> {
    let limit = half_width - margin;
    for s in shapes {
        let b = s.bounds();
        if !(b[0] > -limit && b[1] < limit && b[2] > -limit && b[3] < limit) {
            return Err(Error::PhantomOutsideDomain(s.name().into()));
        }
    }
    Ok(())
}

/// Samples the shapes at the nodes of any grid.
pub fn rasterize<T: Scalar>(shapes: &[Shape], grid: &SpatialGrid<T>) -> Potential<T> {
    let values = grid.sample(|[x, y]| {
        let (x, y) = (x.as_f64(), y.as_f64());
        let mut v = 0.0;
        for s in shapes {
            let sv = s.value_at(x, y);
            if sv != 0.0 {
                v = sv;
            }
        }
        T::lit(v)
    });
    Potential {
        grid: grid.clone(),
        values,
    }
}

/// Phantom on `grid`, which must cover the measurement domain `(-1, 1)^2`.
///
/// Shapes must stay two cells clear of the boundary so that the potential
/// vanishes on the boundary and on the first interior layer.
pub fn make_phantom<T: Scalar>(kind: &PhantomKind, grid: &SpatialGrid<T>) -> Result<Potential<T>> {
    let shapes = kind.shapes();
    check_inside(&shapes, 1.0, 2.0 * grid.spacing().as_f64())?;
    Ok(rasterize(&shapes, grid))
}

/// Connected components (4-neighbor) of `{values > 0}`, as flat node lists.
pub fn support_components<T: Scalar>(potential: &Potential<T>) -> Vec<Vec<usize>> {
    let n = potential.grid.nodes();
    let mut label = vec![usize::MAX; n * n];
    let mut out = Vec::new();
    for start in 0..n * n {
        if label[start] != usize::MAX || !(potential.values[start] > T::zero()) {
            continue;
        }
        let id = out.len();
        let mut comp = vec![start];
        label[start] = id;
        let mut head = 0;
        while head < comp.len() {
            let c = comp[head];
            head += 1;
            let (ix, iy) = (c % n, c / n);
            let mut push = |nb: usize| {
                if label[nb] == usize::MAX && potential.values[nb] > T::zero() {
                    label[nb] = id;
                    comp.push(nb);
                }
            };
            if ix > 0 {
                push(c - 1);
            }
            if ix + 1 < n {
                push(c + 1);
            }
            if iy > 0 {
                push(c - n);
            }
            if iy + 1 < n {
                push(c + n);
            }
        }
        out.push(comp);
    }
    out
}
