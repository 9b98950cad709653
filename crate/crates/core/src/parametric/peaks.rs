//! Local maxima of smooth one-dimensional densities by grid scan followed by
//! safeguarded Newton refinement.

/// Zero of `fp` inside `[a, b]` where `fp(a) > 0 > fp(b)`, by Newton steps
/// that fall back to bisection whenever they leave the bracket.
pub(crate) fn refine_max(
    fp: impl Fn(f64) -> f64,
    fpp: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    start: f64,
) -> f64 {
    let mut y = start;
    let tol = 1e-14 * (1.0 + a.abs().max(b.abs()));
    for _ in 0..200 {
        let g = fp(y);
        if g == 0.0 {
            return y;
        }
        if g > 0.0 {
            a = y;
        } else {
            b = y;
        }
        let h = fpp(y);
        let newton = if h < 0.0 { y - g / h } else { f64::NAN };
        let next = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - y).abs() <= tol || b - a <= tol {
            return next;
        }
        y = next;
    }
    y
}

/// Grid points that are strict local maxima, each refined to a root of `fp`.
pub(crate) fn scan_maxima(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    fpp: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(2.0) as usize;
    let step = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|k| f(lo + step * k as f64)).collect();
    let mut out = Vec::new();
    for k in 1..n {
        if vals[k] > vals[k - 1] && vals[k] >= vals[k + 1] {
            let y = lo + step * k as f64;
            let (a, b) = (y - step, y + step);
            let refined = if fp(a) > 0.0 && fp(b) < 0.0 {
                refine_max(&fp, &fpp, a, b, y)
            } else {
                y
            };
            out.push(refined);
        }
    }
    out
}
