//! Gaussian tail function and its exponential-quadratic approximation.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian tail probability `Q(x) = P(Z > x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Q(x)`, accurate far into the upper tail.
pub fn ln_q(x: f64) -> f64 {
    if x < 30.0 {
        q_function(x).ln()
    } else {
        // Leading asymptotic terms; relative error below 1e-6 at x = 30.
        let x2 = x * x;
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Uniform grid `start, start + step, ..., end` used for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl FitGrid {
    pub const MIN_POINTS: usize = 100;

    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(start >= 0.0 && end <= 8.0 && start < end) {
            return Err(Error::InvalidConfig(format!(
                "fit range [{start}, {end}] must be a nonempty subset of [0, 8]"
            )));
        }
        if !(step > 0.0) {
            return Err(Error::param("step", step, "must be positive"));
        }
        let grid = FitGrid { start, end, step };
        if grid.len() < Self::MIN_POINTS {
            return Err(Error::InvalidConfig(format!(
                "fit grid has {} points, need at least {}",
                grid.len(),
                Self::MIN_POINTS
            )));
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.start + i as f64 * self.step)
    }
}

/// `Q(x) ≈ exp(a x² + b x + c)` for `x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QExpFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub grid: FitGrid,
    /// Largest `|approx / Q - 1|` over the fit grid.
    pub max_rel_error: f64,
}

impl QExpFit {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x * x + self.b * x + self.c).exp()
    }

    /// Maximum relative error against `Q` over an arbitrary grid.
    pub fn rel_error_over(&self, points: impl IntoIterator<Item = f64>) -> f64 {
        points
            .into_iter()
            .map(|x| (self.eval(x) / q_function(x) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Minimax fit over `[0.5, 8]` with step 0.01, computed once.
    pub fn standard() -> &'static QExpFit {
        static FIT: OnceLock<QExpFit> = OnceLock::new();
        FIT.get_or_init(|| {
            let grid = FitGrid::new(0.5, 8.0, 0.01).expect("static grid is valid");
            fit_q_exp(grid).expect("minimax fit of ln Q converges")
        })
    }

    fn finish(a: f64, b: f64, c: f64, grid: FitGrid) -> Result<Self> {
        if !(a < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fitted quadratic coefficient a = {a} is not negative"
            )));
        }
        let mut fit = QExpFit {
            a,
            b,
            c,
            grid,
            max_rel_error: 0.0,
        };
        fit.max_rel_error = fit.rel_error_over(grid.points());
        Ok(fit)
    }
}

/// Ordinary least squares of `ln Q` on the grid.
pub fn fit_q_exp_least_squares(grid: FitGrid) -> Result<QExpFit> {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for x in grid.points() {
        let row = [x * x, x, 1.0];
        let y = ln_q(x);
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let [a, b, c] = solve(ata, atb).ok_or(Error::SingularFit)?;
    QExpFit::finish(a, b, c, grid)
}

/// Minimax fit in relative error: discrete Remez exchange on `ln Q`, then
/// `c` is shifted so the largest over- and under-estimates balance.
pub fn fit_q_exp(grid: FitGrid) -> Result<QExpFit> {
    let xs: Vec<f64> = grid.points().collect();
    let ys: Vec<f64> = xs.iter().map(|&x| ln_q(x)).collect();
    let n = xs.len();
    let mut refs = [0, n / 3, 2 * n / 3, n - 1];
    let mut coef = [0.0; 3];

    for _ in 0..100 {
        let mut m = [[0.0; 4]; 4];
        let mut rhs = [0.0; 4];
        for (r, &i) in refs.iter().enumerate() {
            let x = xs[i];
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            m[r] = [x * x, x, 1.0, sign];
            rhs[r] = ys[i];
        }
        let [a, b, c, h] = solve(m, rhs).ok_or(Error::SingularFit)?;
        coef = [a, b, c];
        let level = h.abs();

        let err = |i: usize| ys[i] - (a * xs[i] * xs[i] + b * xs[i] + c);
        let (worst, worst_err) = (0..n)
            .map(|i| (i, err(i)))
            .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
            .expect("grid is nonempty");
        if worst_err.abs() <= level * (1.0 + 1e-12) {
            break;
        }
        refs = exchange(refs, worst, &err);
    }

    let [a, b, mut c] = coef;
    // Residual of ln Q now spans [-level, level]; centre it in ratio space.
    let errs = xs.iter().zip(&ys).map(|(&x, &y)| a * x * x + b * x + c - y);
    let (lo, hi) = errs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| {
        (l.min(e), h.max(e))
    });
    let half = 0.5 * (hi - lo);
    c -= 0.5 * (hi + lo) + half.cosh().ln();
    QExpFit::finish(a, b, c, grid)
}

/// Swaps `new` into the reference set keeping sign alternation.
fn exchange(mut refs: [usize; 4], new: usize, err: &impl Fn(usize) -> f64) -> [usize; 4] {
    let sign = |i: usize| err(i).signum();
    let s = sign(new);
    let pos = refs.partition_point(|&r| r < new);
    if pos < 4 && refs[pos] == new {
        return refs;
    }
    if pos == 0 {
        if sign(refs[0]) == s {
            refs[0] = new;
        } else {
            refs = [new, refs[0], refs[1], refs[2]];
        }
    } else if pos == 4 {
        if sign(refs[3]) == s {
            refs[3] = new;
        } else {
            refs = [refs[1], refs[2], refs[3], new];
        }
    } else if sign(refs[pos - 1]) == s {
        refs[pos - 1] = new;
    } else {
        refs[pos] = new;
    }
    refs
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve<const N: usize>(mut m: [[f64; N]; N], mut rhs: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..N {
            let f = m[row][col] / m[col][col];
            for k in col..N {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_examples() {
        assert_eq!(q_function(0.0), 0.5);
        assert_eq!(q_function(f64::INFINITY), 0.0);
        // Φ⁻¹(0.95) = 1.6448536...; Q(1.6449) = 0.049998...
        assert_relative_eq!(q_function(1.6449), 0.0500, epsilon = 5e-5);
        assert_relative_eq!(
            q_function(1.644_853_626_951_472_2),
            0.05,
            max_relative = 1e-12
        );
        for x in [0.1, 0.7, 1.3, 2.9, 5.0] {
            assert!((q_function(-x) - (1.0 - q_function(x))).abs() <= 1e-15);
        }
    }

    #[test]
    fn ln_q_matches_direct_log_and_asymptotics() {
        for x in [0.0, 1.0, 5.0, 20.0, 29.0] {
            assert_relative_eq!(ln_q(x), q_function(x).ln(), max_relative = 1e-12);
        }
        // Continuity across the asymptotic switch.
        assert_relative_eq!(ln_q(30.0 - 1e-9), ln_q(30.0), max_relative = 1e-6);
    }

    #[test]
    fn grid_validation() {
        assert!(FitGrid::new(0.0, 9.0, 0.01).is_err());
        assert!(FitGrid::new(0.0, 0.5, 0.01).is_err());
        assert_eq!(FitGrid::new(0.0, 8.0, 0.01).unwrap().len(), 801);
        assert_eq!(FitGrid::new(0.5, 8.0, 0.01).unwrap().len(), 751);
    }

    #[test]
    fn least_squares_reconstruction() {
        let fit = fit_q_exp_least_squares(FitGrid::new(0.0, 8.0, 0.01).unwrap()).unwrap();
        // Values from an independent numpy lstsq on log_ndtr(-x).
        assert_relative_eq!(fit.a, -0.469_8, epsilon = 5e-4);
        assert_relative_eq!(fit.b, -0.502_7, epsilon = 5e-4);
        assert_relative_eq!(fit.c, -0.844_3, epsilon = 5e-4);
        assert!(fit.rel_error_over(FitGrid::new(0.5, 8.0, 0.01).unwrap().points()) > 0.05);
    }

    #[test]
    fn minimax_fit_meets_five_percent() {
        let fit = QExpFit::standard();
        assert!(fit.a < 0.0 && fit.b < 0.0);
        // Independent LP (scipy linprog) optimum of max |ln error|: t = 0.04988.
        assert_relative_eq!(fit.a, -0.4711, epsilon = 1e-3);
        assert_relative_eq!(fit.b, -0.4940, epsilon = 2e-3);
        assert!(fit.max_rel_error <= 0.05, "{}", fit.max_rel_error);
        assert_relative_eq!(fit.max_rel_error, 0.0499, epsilon = 2e-4);
        let fine = fit.rel_error_over((0..=7500).map(|i| 0.5 + i as f64 * 0.001));
        assert!(fine <= 0.05);
    }

    #[test]
    fn recorded_error_bounds_zero_point() {
        let fit = fit_q_exp_least_squares(FitGrid::new(0.0, 8.0, 0.01).unwrap()).unwrap();
        assert!((fit.c.exp() / 0.5 - 1.0).abs() <= fit.max_rel_error);
    }

    #[test]
    fn approximation_decreasing() {
        let fit = QExpFit::standard();
        let mut prev = f64::INFINITY;
        for i in 0..=800 {
            let v = fit.eval(i as f64 * 0.01);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn solver_rejects_singular() {
        assert!(solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0]).is_none());
        assert_eq!(
            solve([[2.0, 0.0], [0.0, 4.0]], [2.0, 2.0]).unwrap(),
            [1.0, 0.5]
        );
    }
}
