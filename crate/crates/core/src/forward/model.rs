use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::scalar::Scalar;

/// Smallest `|F(x, p, 0, ∇p)|` accepted as a divisor.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-12;

type CustomNonlinearity<T> = Arc<dyn Fn([T; 2], T, T, [T; 2]) -> T + Send + Sync>;

/// The nonlinearity `F(x, u, u_t, ∇u)`.
#[derive(Clone)]
pub enum Nonlinearity<T> {
    /// `sqrt(|u|) + |∇u|`
    SqrtGrad,
    /// `|u|^2 + |∇u|^2`
    Quadratic,
    Custom {
        name: String,
        f: CustomNonlinearity<T>,
    },
}

impl<T> fmt::Debug for Nonlinearity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl<T> Nonlinearity<T> {
    pub fn tag(&self) -> &str {
        match self {
            Nonlinearity::SqrtGrad => "sqrt-grad",
            Nonlinearity::Quadratic => "quadratic",
            Nonlinearity::Custom { name, .. } => name,
        }
    }
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sqrt-grad" => Ok(Nonlinearity::SqrtGrad),
            "quadratic" => Ok(Nonlinearity::Quadratic),
            "zero" => Ok(Self::custom("zero", |_, _, _, _| T::zero())),
            other => Err(Error::InvalidParameter(format!(
                "unknown nonlinearity '{other}' (expected sqrt-grad, quadratic or zero)"
            ))),
        }
    }

    pub fn custom(
        name: &str,
        f: impl Fn([T; 2], T, T, [T; 2]) -> T + Send + Sync + 'static,
    ) -> Self {
        Nonlinearity::Custom {
            name: name.to_string(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: [T; 2], u: T, ut: T, grad: [T; 2]) -> T {
        match self {
            Nonlinearity::SqrtGrad => u.abs().sqrt() + grad[0].hypot(grad[1]),
            Nonlinearity::Quadratic => u * u + grad[0] * grad[0] + grad[1] * grad[1],
            Nonlinearity::Custom { f, .. } => f(x, u, ut, grad),
        }
    }
}

type CustomField<T> = Arc<dyn Fn([T; 2]) -> T + Send + Sync>;

/// The initial state `p(x)`.
#[derive(Clone)]
pub enum InitialField<T> {
    Constant(T),
    Function(CustomField<T>),
}

impl<T: fmt::Debug> fmt::Debug for InitialField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialField::Constant(c) => write!(f, "Constant({c:?})"),
            InitialField::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl<T: Scalar> InitialField<T> {
    pub fn function(f: impl Fn([T; 2]) -> T + Send + Sync + 'static) -> Self {
        InitialField::Function(Arc::new(f))
    }

    #[inline]
    pub fn value(&self, x: [T; 2]) -> T {
        match self {
            InitialField::Constant(c) => *c,
            InitialField::Function(f) => f(x),
        }
    }

    /// Five-point Laplacian with spacing `h`; exactly zero for constants.
    pub fn laplacian(&self, x: [T; 2], h: T) -> T {
        match self {
            InitialField::Constant(_) => T::zero(),
            InitialField::Function(f) => {
                let [a, b] = x;
                (f([a + h, b]) + f([a - h, b]) + f([a, b + h]) + f([a, b - h])
                    - T::lit(4.0) * f(x))
                    / (h * h)
            }
        }
    }

    /// Centered gradient with spacing `h`; exactly zero for constants.
    pub fn gradient(&self, x: [T; 2], h: T) -> [T; 2] {
        match self {
            InitialField::Constant(_) => [T::zero(); 2],
            InitialField::Function(f) => {
                let [a, b] = x;
                let two_h = h + h;
                [
                    (f([a + h, b]) - f([a - h, b])) / two_h,
                    (f([a, b + h]) - f([a, b - h])) / two_h,
                ]
            }
        }
    }
}

/// `F(x, p, 0, ∇_h p)` at every node of `grid`, failing where it is too
/// small to divide by.
pub fn initial_denominator<T: Scalar>(
    nonlinearity: &Nonlinearity<T>,
    initial: &InitialField<T>,
    grid: &SpatialGrid<T>,
) -> Result<Vec<T>> {
    let h = grid.spacing();
    let n = grid.nodes();
    let mut out = Vec::with_capacity(grid.len());
    for iy in 0..n {
        for ix in 0..n {
            let x = grid.point(ix, iy);
            let v = nonlinearity.eval(x, initial.value(x), T::zero(), initial.gradient(x, h));
            if !(v.abs().as_f64() >= DENOMINATOR_THRESHOLD) {
                return Err(Error::DegenerateNonlinearity {
                    x1: x[0].as_f64(),
                    x2: x[1].as_f64(),
                    value: v.as_f64(),
                    threshold: DENOMINATOR_THRESHOLD,
                });
            }
            out.push(v);
        }
    }
    Ok(out)
}
