//! Small descriptive statistics shared by calibration and reporting.

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased (n - 1) sample standard deviation. `None` below two samples.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Trapezoidal integral of `ys` over `xs` restricted to `[a, b]`, with
/// linear interpolation at the clip points. `xs` must be strictly increasing.
pub fn trapz_clipped(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 || b <= a {
        return 0.0;
    }
    let lo = a.max(xs[0]);
    let hi = b.min(xs[xs.len() - 1]);
    if hi <= lo {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..xs.len() - 1 {
        let (x0, x1) = (xs[k], xs[k + 1]);
        let s = x0.max(lo);
        let e = x1.min(hi);
        if e <= s {
            continue;
        }
        let slope = (ys[k + 1] - ys[k]) / (x1 - x0);
        let ys_ = ys[k] + slope * (s - x0);
        let ye = ys[k] + slope * (e - x0);
        acc += 0.5 * (ys_ + ye) * (e - s);
    }
    acc
}
