//! Gauss-Legendre rules on [0, 1] and graded composite rules.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights mapped to [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.5;
    }
    (x, w)
}

pub fn gauss8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

fn gauss10() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(10))
}

const GRADING_RATIO: f64 = 0.4;
const GRADING_LEVELS: usize = 34;

/// Composite rule on [0, 1] refined geometrically toward each point in `hot`.
///
/// Integrands with logarithmic singularities at the hot points are
/// integrated to near machine precision.
pub fn graded_rule(hot: &[f64]) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss10();
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    cuts.extend(hot.iter().copied().filter(|h| *h > 0.0 && *h < 1.0));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let is_hot = |p: f64| hot.iter().any(|h| (h - p).abs() < 1e-14);
    let mut out = Vec::new();
    let push = |a: f64, b: f64, out: &mut Vec<(f64, f64)>| {
        for (x, w) in gx.iter().zip(gw) {
            out.push((a + (b - a) * x, (b - a) * w));
        }
    };
    for c in cuts.windows(2) {
        let (a, b) = (c[0], c[1]);
        match (is_hot(a), is_hot(b)) {
            (false, false) => push(a, b, &mut out),
            (true, false) => {
                let mut hi = b;
                for _ in 0..GRADING_LEVELS {
                    let lo = a + (hi - a) * GRADING_RATIO;
                    push(lo, hi, &mut out);
                    hi = lo;
                }
                push(a, hi, &mut out);
            }
            (false, true) => {
                let mut lo = a;
                for _ in 0..GRADING_LEVELS {
                    let hi = b - (b - lo) * GRADING_RATIO;
                    push(lo, hi, &mut out);
                    lo = hi;
                }
                push(lo, b, &mut out);
            }
            (true, true) => {
                let m = 0.5 * (a + b);
                let mut hi = m;
                for _ in 0..GRADING_LEVELS {
                    let lo = a + (hi - a) * GRADING_RATIO;
                    push(lo, hi, &mut out);
                    hi = lo;
                }
                push(a, hi, &mut out);
                let mut lo = m;
                for _ in 0..GRADING_LEVELS {
                    let hi = b - (b - lo) * GRADING_RATIO;
                    push(lo, hi, &mut out);
                    lo = hi;
                }
                push(lo, b, &mut out);
            }
        }
    }
    out
}
