//! Scalar numerics: bracketed root finding, adaptive quadrature and bounded
//! one-dimensional maximization.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Convergence controls shared by the scalar routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-9, max_iter: 200 }
    }
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) || max_iter < 10 {
            return Err(Error::Config(format!(
                "tolerances must be positive and max_iter >= 10 (got {abs_tol}, {rel_tol}, {max_iter})"
            )));
        }
        Ok(Self { abs_tol, rel_tol, max_iter })
    }

    /// Tolerances used by the design solvers where constraint residuals are
    /// checked to 1e-9 or better.
    pub fn tight() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-13, max_iter: 400 }
    }
}

fn finite(what: &'static str, x: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, x, value })
    }
}

/// Brent's method on a sign-changing bracket.
///
/// Returns `x` in `[lo, hi]` with `|f(x)| <= abs_tol` or a final bracket no
/// wider than `rel_tol * |x|`. The iteration falls back to bisection whenever
/// interpolation stalls, so convergence is guaranteed for continuous `f`.
pub fn find_root_monotone<F>(mut f: F, lo: f64, hi: f64, tol: ToleranceSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = finite("root objective", a, f(a))?;
    let mut fb = finite("root objective", b, f(b))?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.rel_tol * b.abs() + f64::MIN_POSITIVE;
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.abs_tol || m.abs() <= tol1 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = finite("root objective", b, f(b))?;
    }
    Err(Error::Convergence { what: "root finding", iterations: tol.max_iter, estimate: b })
}

/// Grows the upper end of a bracket until `f` changes sign relative to
/// `f(lo)`, doubling the offset from `lo` each step starting at `first_hi`.
/// Returns the narrowed bracket `(a, b)` with `lo <= a < b <= max_hi`.
pub fn expand_upper_bracket<F>(mut f: F, lo: f64, first_hi: f64, max_hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = finite("bracket objective", lo, f(lo))?;
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    let mut a = lo;
    let mut b = first_hi.max(lo + f64::EPSILON * lo.abs().max(1.0));
    loop {
        let fb = finite("bracket objective", b, f(b))?;
        if fb == 0.0 || fb.signum() != f_lo.signum() {
            return Ok((a, b));
        }
        if b >= max_hi {
            return Err(Error::Bracket { lo, hi: b, f_lo, f_hi: fb });
        }
        a = b;
        b = (lo + 2.0 * (b - lo)).min(max_hi);
    }
}

// 15-point Gauss-Kronrod rule with embedded 7-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_15<F>(f: &mut F, lo: f64, hi: f64) -> Result<Panel>
where
    F: FnMut(f64) -> f64,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = finite("integrand", center, f(center))?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = finite("integrand", center - dx, f(center - dx))?;
        let f2 = finite("integrand", center + dx, f(center + dx))?;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Ok(Panel { lo, hi, value: kronrod * half, error: ((kronrod - gauss) * half).abs() })
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate is below `max(abs_tol, rel_tol * |result|)`. `max_iter` bounds the
/// number of bisections.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, tol: ToleranceSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::Precondition(format!("integration limits must satisfy lo <= hi, got [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let first = gauss_kronrod_15(&mut f, lo, hi)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::from([first]);

    for _ in 0..tol.max_iter {
        if error <= tol.abs_tol.max(tol.rel_tol * value.abs()) {
            return Ok(value);
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let left = gauss_kronrod_15(&mut f, worst.lo, mid)?;
        let right = gauss_kronrod_15(&mut f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Recompute sums from the panels to shed accumulated round-off before the
    // final check.
    value = heap.iter().map(|p| p.value).sum();
    error = heap.iter().map(|p| p.error).sum();
    if error <= tol.abs_tol.max(tol.rel_tol * value.abs()) {
        Ok(value)
    } else {
        Err(Error::Convergence { what: "adaptive quadrature", iterations: tol.max_iter, estimate: value })
    }
}

/// Number of coarse-scan seeds used by [`maximize_scalar`].
pub const DEFAULT_SCAN_SEEDS: usize = 64;

/// Maximizes `f` on `[lo, hi]` with a coarse scan followed by golden-section
/// refinement around the best local maxima of the scan.
///
/// Ties are resolved toward the smaller abscissa. The returned value is never
/// below the best scan seed.
pub fn maximize_scalar<F>(f: F, lo: f64, hi: f64, tol: ToleranceSpec) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    maximize_scalar_seeded(f, lo, hi, DEFAULT_SCAN_SEEDS, tol)
}

/// [`maximize_scalar`] with an explicit number of scan seeds (at least 3).
pub fn maximize_scalar_seeded<F>(mut f: F, lo: f64, hi: f64, seeds: usize, tol: ToleranceSpec) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Precondition(format!("maximization interval must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let seeds = seeds.max(3);
    let step = (hi - lo) / (seeds - 1) as f64;
    let xs: Vec<f64> = (0..seeds).map(|i| if i + 1 == seeds { hi } else { lo + i as f64 * step }).collect();
    let mut ys = Vec::with_capacity(seeds);
    for &x in &xs {
        ys.push(finite("objective", x, f(x))?);
    }

    // Local maxima of the scan, best first; the sort is stable so equal values
    // keep their left-to-right order.
    let mut peaks: Vec<usize> = (0..seeds)
        .filter(|&i| (i == 0 || ys[i] >= ys[i - 1]) && (i + 1 == seeds || ys[i] >= ys[i + 1]))
        .collect();
    peaks.sort_by(|&i, &j| ys[j].total_cmp(&ys[i]));
    peaks.truncate(3);

    let mut best = (xs[peaks[0]], ys[peaks[0]]);
    for &i in &peaks {
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(seeds - 1)];
        let (x, y) = golden_section(&mut f, a, b, tol)?;
        if y > best.1 || (y == best.1 && x < best.0) {
            best = (x, y);
        }
    }
    Ok(best)
}

fn golden_section<F>(f: &mut F, mut a: f64, mut b: f64, tol: ToleranceSpec) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = finite("objective", c, f(c))?;
    let mut fd = finite("objective", d, f(d))?;
    let fa = finite("objective", a, f(a))?;
    let fb = finite("objective", b, f(b))?;
    let mut best = if fb > fa { (b, fb) } else { (a, fa) };

    for _ in 0..tol.max_iter {
        if (b - a).abs() <= tol.abs_tol.max(tol.rel_tol * 0.5 * (a + b).abs()) {
            break;
        }
        // `>=` keeps the left section on ties.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = finite("objective", c, f(c))?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = finite("objective", d, f(d))?;
        }
    }
    for (x, y) in [(c, fc), (d, fd)] {
        if y > best.1 || (y == best.1 && x < best.0) {
            best = (x, y);
        }
    }
    Ok(best)
}
