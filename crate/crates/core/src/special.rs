//! Special functions and quadrature used across the crate.
//!
//! Normal cdf/quantile are delegated to `statrs`; the Student-t distributions
//! with 4 and 5 degrees of freedom have closed forms and are evaluated here.

use crate::error::{Error, Result};
use statrs::function::erf;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile; `p` must lie in (0,1).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}

/// Cdf of the Student-t distribution with 4 degrees of freedom.
pub fn t4_cdf(t: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let s = 1.0 + t * t / 4.0;
    let x = t / s.sqrt();
    0.5 + 0.375 * x * (1.0 - t * t / (12.0 * s))
}

/// Density of the Student-t distribution with 4 degrees of freedom.
pub fn t4_pdf(t: f64) -> f64 {
    0.375 * (1.0 + t * t / 4.0).powf(-2.5)
}

/// Quantile of the Student-t distribution with 4 degrees of freedom.
pub fn t4_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let alpha = 4.0 * p * (1.0 - p);
    let sa = alpha.sqrt();
    let q = 2.0 * ((sa.acos() / 3.0).cos() / sa - 1.0).max(0.0).sqrt();
    if p < 0.5 {
        -q
    } else {
        q
    }
}

/// Cdf of the Student-t distribution with 5 degrees of freedom.
pub fn t5_cdf(t: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let th = (t / 5f64.sqrt()).atan();
    let (s, c) = th.sin_cos();
    0.5 + (th + s * c * (1.0 + 2.0 / 3.0 * c * c)) / PI
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// `ln(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `1 - exp(-x)` computed without cancellation.
pub fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

const GK_XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = hl * GK_XK[j];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kron * hl, ((kron - gauss) * hl).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over the finite interval `[a,b]`.
///
/// Subintervals are refined in a fixed depth-first order, so the result is
/// deterministic. Fails when the absolute tolerance is not reached within the
/// subdivision budget.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut budget = 2000usize;
    let mut stack = vec![(a, b, tol)];
    while let Some((lo, hi, t)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if !val.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if err <= t.max(1e-15 * val.abs()) || (hi - lo).abs() < 1e-13 * (b - a).abs() {
            total += val;
            continue;
        }
        if budget == 0 {
            return Err(Error::Numerical(format!(
                "quadrature tolerance {tol:e} not reached on [{a}, {b}]"
            )));
        }
        budget -= 1;
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, 0.5 * t));
        stack.push((lo, mid, 0.5 * t));
    }
    Ok(total)
}

/// Gauss–Legendre nodes and weights on `[a,b]` (weights sum to `b - a`).
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..(m + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { 1.0 } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = if m == 1 { 1.0 } else { mf * (z * pm - pm1) / (z * z - 1.0) };
            if m == 1 {
                z = 0.0;
                break;
            }
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = if m == 1 { 2.0 } else { 2.0 / ((1.0 - z * z) * dp * dp) };
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        nodes[i] = mid - half * z;
        nodes[m - 1 - i] = mid + half * z;
        weights[i] = w * half;
        weights[m - 1 - i] = w * half;
    }
    (nodes, weights)
}

/// First Debye function `D_1(x) = x^{-1} ∫_0^x t/(e^t - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    if x < 1e-4 {
        return 1.0 - x / 4.0 + x * x / 36.0;
    }
    let val = if x > 60.0 {
        // the tail beyond x is (x + 1) e^{-x} to leading order
        PI * PI / 6.0 - (x + 1.0) * (-x).exp()
    } else {
        let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
        integrate(integrand, 0.0, x, 1e-14).unwrap_or(f64::NAN)
    };
    val / x
}

/// Brent's root finder on a bracketing interval.
pub fn brent_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!("root not bracketed in [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1 * xm.signum() };
        fb = f(b);
    }
    Err(Error::Numerical("Brent root finder did not converge".into()))
}
