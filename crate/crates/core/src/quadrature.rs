use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[a, b]`.
///
/// Newton iteration on `P_n` from the Chebyshev-like initial guesses; fine
/// for the few-dozen-point rules used to audit the time basis.
pub fn gauss_legendre(points: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; points];
    let mut weights = vec![0.0; points];
    let n = points as f64;
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    for i in 0..points.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=points {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if points == 1 { x } else { p1 };
            let pm = if points == 1 { 1.0 } else { p0 };
            dp = n * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[points - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[points - 1 - i] = half * w;
    }
    (nodes, weights)
}

/// Composite trapezoid weights for `intervals` equal steps of width `step`.
pub fn trapezoid_weights<T: Scalar>(intervals: usize, step: T) -> Vec<T> {
    let mut w = vec![step; intervals + 1];
    let half = step / T::lit(2.0);
    w[0] = half;
    w[intervals] = half;
    w
}

/// `B_{q+1} / (q+1)` for odd `q < 8`: the left-end Euler–Maclaurin
/// coefficient of `t^q` with unit step.
const END_MOMENTS: [f64; 8] = [
    0.0,
    1.0 / 12.0,
    0.0,
    -1.0 / 120.0,
    0.0,
    1.0 / 252.0,
    0.0,
    -1.0 / 240.0,
];

/// Largest supported end-correction order.
pub const MAX_END_ORDER: usize = 8;

/// Trapezoid weights with `order` corrected weights at each end (Gregory
/// type), exact for polynomials of degree below `order`.
///
/// The corrections `d_j` solve `Σ_j d_j j^q = B_{q+1}/(q+1)` (zero for even
/// `q`), cancelling the Euler–Maclaurin end terms. `order = 0` is the plain
/// trapezoid rule.
pub fn end_corrected_weights<T: Scalar>(intervals: usize, step: T, order: usize) -> Vec<T> {
    let mut w = trapezoid_weights(intervals, step);
    if order == 0 {
        return w;
    }
    assert!(order <= MAX_END_ORDER, "end correction order {order} above {MAX_END_ORDER}");
    assert!(intervals + 1 >= 2 * order, "grid too short for end correction of order {order}");
    let mut a = vec![vec![0.0f64; order + 1]; order];
    for (q, row) in a.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().take(order).enumerate() {
            *slot = (j as f64).powi(q as i32);
        }
        row[order] = END_MOMENTS[q];
    }
    for col in 0..order {
        let pivot = (col..order)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap_or(col);
        a.swap(col, pivot);
        for r in 0..order {
            if r != col {
                let f = a[r][col] / a[col][col];
                for q in col..=order {
                    a[r][q] -= f * a[col][q];
                }
            }
        }
    }
    for j in 0..order {
        let v = step * T::lit(a[j][order] / a[j][j]);
        w[j] += v;
        w[intervals - j] += v;
    }
    w
}
