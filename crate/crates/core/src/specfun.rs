//! Special functions used by the outage closed forms.
//!
//! * [`marcum_q1`]: first-order Marcum Q-function, the exceedance probability
//!   of a noncentral chi-square variable with two degrees of freedom.
//! * [`lambert_w0`]: principal branch of the Lambert W function on `x >= 0`.

use crate::error::{domain, Result};

/// Poisson windows are truncated once a term drops below this fraction of the
/// modal term. The modal pmf is at least `1/sqrt(2*pi*mean)`, so the dropped
/// mass stays far below `1e-15` for every mean we accept.
const POISSON_CUTOFF: f64 = 1e-21;

/// Largest `a^2/2` or `b^2/2` accepted by [`marcum_q1`]. The series cost grows
/// like the square root of this quantity.
pub const MARCUM_MAX_HALF_SQUARE: f64 = 1e10;

/// Normalized Poisson pmf over the window of non-negligible terms.
///
/// Terms are generated by the ratio recurrence outward from the mode and
/// normalized by their sum, so no log-gamma evaluation is involved.
struct PoissonWindow {
    start: usize,
    pmf: Vec<f64>,
}

impl PoissonWindow {
    fn new(mean: f64) -> Self {
        if mean == 0.0 {
            return Self { start: 0, pmf: vec![1.0] };
        }
        let mode = mean.floor() as usize;

        let mut below = Vec::new();
        let mut u = 1.0;
        let mut n = mode;
        while n > 0 {
            // p(n-1) = p(n) * n / mean
            u *= n as f64 / mean;
            if u < POISSON_CUTOFF {
                break;
            }
            below.push(u);
            n -= 1;
        }
        let start = mode - below.len();

        let mut pmf: Vec<f64> = below.into_iter().rev().collect();
        pmf.push(1.0);
        let mut u = 1.0;
        let mut n = mode;
        loop {
            // p(n+1) = p(n) * mean / (n+1)
            u *= mean / (n + 1) as f64;
            if u < POISSON_CUTOFF {
                break;
            }
            pmf.push(u);
            n += 1;
        }

        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        Self { start, pmf }
    }

    fn end(&self) -> usize {
        self.start + self.pmf.len()
    }
}

/// First-order Marcum Q-function `Q1(a, b)`.
///
/// Equals `Pr(X > b^2)` for `X` noncentral chi-square with two degrees of
/// freedom and noncentrality `a^2`. Evaluated through the Poisson-mixture form
/// of the Bessel series, `Q1(a, b) = Pr(K <= N)` with independent
/// `N ~ Poisson(a^2/2)` and `K ~ Poisson(b^2/2)`. When `a >= b` the
/// complementary sum `1 - Pr(K > N)` is used so small tails keep their
/// relative accuracy on both sides. Absolute error is below `1e-13`.
///
/// ```
/// use secure_onoff::specfun::marcum_q1;
/// assert_eq!(marcum_q1(3.0, 0.0).unwrap(), 1.0);
/// assert!((marcum_q1(0.0, 2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
/// ```
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
        return Err(domain("marcum_q1", format!("arguments must be finite and non-negative, got a={a}, b={b}")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-0.5 * b * b).exp());
    }
    // Gaussian tail bound: Q1 differs from the step 1{a > b} by < 1e-300 here.
    if b - a > 38.0 {
        return Ok(0.0);
    }
    if a - b > 38.0 {
        return Ok(1.0);
    }

    let lambda = 0.5 * a * a;
    let x = 0.5 * b * b;
    if lambda.max(x) > MARCUM_MAX_HALF_SQUARE {
        return Err(domain("marcum_q1", format!("arguments too large for the series (a={a}, b={b})")));
    }

    let outer = PoissonWindow::new(lambda);
    let inner = PoissonWindow::new(x);

    if a < b {
        // Q1 = sum_n Pr(N = n) Pr(K <= n)
        let mut cdf = 0.0;
        let mut k = inner.start;
        let mut acc = 0.0;
        for (i, w) in outer.pmf.iter().enumerate() {
            let n = outer.start + i;
            while k <= n && k < inner.end() {
                cdf += inner.pmf[k - inner.start];
                k += 1;
            }
            acc += w * cdf;
        }
        Ok(acc.clamp(0.0, 1.0))
    } else {
        // Q1 = 1 - sum_n Pr(N = n) Pr(K > n), with Pr(K > n) built from the top.
        let mut tail = vec![0.0; inner.pmf.len() + 1];
        for j in (0..inner.pmf.len()).rev() {
            tail[j] = tail[j + 1] + inner.pmf[j];
        }
        let survival = |n: usize| -> f64 {
            // Pr(K > n) = sum_{k >= n+1} pmf(k)
            let first = n + 1;
            if first <= inner.start {
                tail[0]
            } else if first >= inner.end() {
                0.0
            } else {
                tail[first - inner.start]
            }
        };
        let acc: f64 = outer
            .pmf
            .iter()
            .enumerate()
            .map(|(i, w)| w * survival(outer.start + i))
            .sum();
        Ok((1.0 - acc).clamp(0.0, 1.0))
    }
}

/// Principal branch `W0(x)` of the Lambert W function for `x >= 0`.
///
/// Halley iteration from a logarithmic starting point. The residual satisfies
/// `|w e^w - x| <= 1e-12 * max(1, x)`.
///
/// ```
/// use secure_onoff::specfun::lambert_w0;
/// assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
/// ```
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(domain("lambert_w0", format!("argument must be finite and non-negative, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }

    let mut w = if x < 3.0 {
        (1.0 + x).ln() * (1.0 - 0.15 * (1.0 + x).ln() / (1.0 + (1.0 + x).ln()))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}
