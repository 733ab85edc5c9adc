//! Derivative-free minimization of convex functions over small price simplices.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Smallest price coordinate considered; utilities are undefined at zero prices.
pub(crate) const EDGE: f64 = 1e-9;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
/// Returns the best point seen and its value.
pub(crate) fn golden<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iters {
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimizes a convex function over the price simplex with coordinates
/// bounded below by [`EDGE`], by nested golden sections. Only two and three
/// goods are supported; returns `None` otherwise.
pub(crate) fn minimize_on_simplex<F: FnMut(&[f64]) -> f64>(
    goods: usize,
    mut f: F,
) -> Option<(Vec<f64>, f64)> {
    const ITERS: usize = 80;
    match goods {
        2 => {
            let (t, v) = golden(|t| f(&[t, 1.0 - t]), EDGE, 1.0 - EDGE, ITERS);
            Some((vec![t, 1.0 - t], v))
        }
        3 => {
            let inner = |t: f64, f: &mut F| {
                let rest = 1.0 - t;
                golden(
                    |s| f(&[t, s * rest, (1.0 - s) * rest]),
                    EDGE / rest,
                    1.0 - EDGE / rest,
                    ITERS,
                )
            };
            let (t, v) = golden(|t| inner(t, &mut f).1, EDGE, 1.0 - 2.0 * EDGE, ITERS);
            let (s, _) = inner(t, &mut f);
            let rest = 1.0 - t;
            Some((vec![t, s * rest, (1.0 - s) * rest], v))
        }
        _ => None,
    }
}

/// Maximizes a concave function over the probability simplex by entropic
/// mirror ascent, given only its gradient. Steps that overshoot are cut back
/// to the point on the chord where the slope changes sign. Stops when the
/// duality gap `max_k g_k − ⟨x, g⟩` falls below `gap_tol` or `stop` holds.
pub(crate) fn mirror_ascent<G: FnMut(&[f64]) -> Vec<f64>, S: Fn(&[f64], &[f64]) -> bool>(
    x0: Vec<f64>,
    mut grad: G,
    stop: S,
    gap_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    let mut x = x0;
    let mut g = grad(&x);
    let mut eta = 1.0;
    for _ in 0..max_iter {
        let top = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top - dot(&x, &g) <= gap_tol || stop(&x, &g) {
            break;
        }
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut xn: Vec<f64> = x
            .iter()
            .zip(&g)
            .map(|(a, b)| a * (eta * (b - top) / scale).exp())
            .collect();
        let total: f64 = xn.iter().sum();
        for a in &mut xn {
            *a = (*a / total).max(1e-300);
        }
        let dir: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        if dot(&dir, &g) <= 0.0 {
            // No ascent left at this resolution.
            if eta < 1e-12 {
                break;
            }
            eta *= 0.5;
            continue;
        }
        let gn = grad(&xn);
        if dot(&gn, &dir) >= 0.0 {
            x = xn;
            g = gn;
            eta *= 2.0;
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut g_lo = None;
        for _ in 0..30 {
            let t = 0.5 * (lo + hi);
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let gt = grad(&xt);
            if dot(&gt, &dir) >= 0.0 {
                lo = t;
                g_lo = Some((xt, gt));
            } else {
                hi = t;
            }
        }
        match g_lo {
            Some((xt, gt)) => {
                x = xt;
                g = gt;
            }
            None => {
                if eta < 1e-12 {
                    break;
                }
            }
        }
        eta *= 0.5;
    }
    (x, g)
}
