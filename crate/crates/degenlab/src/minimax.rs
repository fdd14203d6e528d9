//! Discrete Chebyshev (minimax) affine fits: the best `a + b.x` under the
//! sup norm over a finite point set. One-dimensional fits exploit convexity
//! of the error in the slope; higher dimensions use Lawson's iteratively
//! reweighted least squares.

/// Result of a minimax affine fit.
#[derive(Debug, Clone)]
pub struct AffineFit {
    /// Constant coefficient.
    pub offset: f64,
    /// Slope coefficients, one per dimension.
    pub slope: Vec<f64>,
    /// Minimax error `max_i |u_i - offset - slope . x_i|`.
    pub error: f64,
}

/// For fixed slope `b` the optimal offset centers the residual range;
/// returns (offset, error).
fn center_offset(xs: &[f64], us: &[f64], b: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (&x, &u) in xs.iter().zip(us) {
        let r = u - b * x;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// Best affine fit to 1-D samples under the sup norm. The error as a
/// function of the slope is convex (a max of affine functions of `b`), so a
/// ternary search between expanded secant brackets locates the optimum.
pub fn minimax_affine_1d(xs: &[f64], us: &[f64]) -> AffineFit {
    assert_eq!(xs.len(), us.len());
    assert!(!xs.is_empty());
    if xs.len() == 1 {
        return AffineFit { offset: us[0], slope: vec![0.0], error: 0.0 };
    }
    let (x_min, x_max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &x| {
        (acc.0.min(x), acc.1.max(x))
    });
    let span = (x_max - x_min).max(1e-300);
    let (u_min, u_max) = us.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &u| {
        (acc.0.min(u), acc.1.max(u))
    });
    let osc = u_max - u_min;
    let secant = (us[us.len() - 1] - us[0]) / ((xs[xs.len() - 1] - xs[0]).abs().max(1e-300));
    let width = 8.0 * osc / span + 1.0;
    let mut lo = secant - width;
    let mut hi = secant + width;
    let err = |b: f64| center_offset(xs, us, b).1;
    // expand until the minimum is interior
    for _ in 0..60 {
        let w = hi - lo;
        if err(lo) > err(lo + 1e-3 * w) && err(hi) > err(hi - 1e-3 * w) {
            break;
        }
        lo -= w;
        hi += w;
    }
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if err(m1) <= err(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo < 1e-15 * (1.0 + secant.abs()) {
            break;
        }
    }
    let b = 0.5 * (lo + hi);
    let (a, e) = center_offset(xs, us, b);
    AffineFit { offset: a, slope: vec![b], error: e }
}

/// Weighted least squares fit of `a + b . x` (normal equations).
fn weighted_affine(points: &[Vec<f64>], us: &[f64], w: &[f64], dim: usize) -> Option<Vec<f64>> {
    let m = dim + 1;
    let mut ata = vec![0.0; m * m];
    let mut atb = vec![0.0; m];
    for ((p, &u), &wi) in points.iter().zip(us).zip(w) {
        let mut row = Vec::with_capacity(m);
        row.push(1.0);
        row.extend_from_slice(&p[..dim]);
        for i in 0..m {
            for j in 0..m {
                ata[i * m + j] += wi * row[i] * row[j];
            }
            atb[i] += wi * row[i] * u;
        }
    }
    // tiny ridge keeps collinear point sets (a flat coordinate) solvable
    let scale = (0..m).map(|i| ata[i * m + i]).fold(0.0f64, f64::max);
    for i in 0..m {
        ata[i * m + i] += 1e-13 * (scale + 1e-300);
    }
    solve_dense(&mut ata, &mut atb, m)
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let mut piv = col;
        for row in col + 1..m {
            if a[row * m + col].abs() > a[piv * m + col].abs() {
                piv = row;
            }
        }
        if a[piv * m + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..m {
                a.swap(col * m + j, piv * m + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * m + col];
        for row in col + 1..m {
            let f = a[row * m + col] / d;
            for j in col..m {
                a[row * m + j] -= f * a[col * m + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut s = b[row];
        for j in row + 1..m {
            s -= a[row * m + j] * x[j];
        }
        x[row] = s / a[row * m + row];
    }
    Some(x)
}

/// Minimax affine fit in `dim` dimensions by Lawson's algorithm: weighted
/// least squares with weights re-scaled by the residual magnitudes, which
/// converges towards the Chebyshev solution.
pub fn minimax_affine_nd(points: &[Vec<f64>], us: &[f64], dim: usize) -> AffineFit {
    assert_eq!(points.len(), us.len());
    assert!(!points.is_empty());
    if dim == 1 {
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        return minimax_affine_1d(&xs, us);
    }
    let n = points.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut best: Option<AffineFit> = None;
    for _ in 0..60 {
        let coeffs = match weighted_affine(points, us, &w, dim) {
            Some(c) => c,
            None => break,
        };
        let mut emax = 0.0f64;
        let mut res = vec![0.0; n];
        for (i, (p, &u)) in points.iter().zip(us).enumerate() {
            let mut v = coeffs[0];
            for d in 0..dim {
                v += coeffs[1 + d] * p[d];
            }
            res[i] = (u - v).abs();
            emax = emax.max(res[i]);
        }
        let fit = AffineFit { offset: coeffs[0], slope: coeffs[1..].to_vec(), error: emax };
        if best.as_ref().is_none_or(|b| fit.error < b.error) {
            best = Some(fit);
        }
        // Lawson update
        let mut total = 0.0;
        for i in 0..n {
            w[i] *= res[i].max(1e-300);
            total += w[i];
        }
        if total <= 0.0 {
            break;
        }
        for wi in &mut w {
            *wi /= total;
        }
    }
    best.unwrap_or(AffineFit { offset: 0.0, slope: vec![0.0; dim], error: f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_affine_data() {
        let xs: Vec<f64> = (0..100).map(|i| -1.0 + 0.02 * i as f64).collect();
        let us: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let fit = minimax_affine_1d(&xs, &us);
        assert!(fit.error < 1e-12);
        assert!((fit.offset - 3.0).abs() < 1e-9);
        assert!((fit.slope[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn parabola_equioscillation() {
        // best affine fit to x^2 on [-1, 1] is 1/2 with error 1/2
        let xs: Vec<f64> = (0..=2000).map(|i| -1.0 + 0.001 * i as f64).collect();
        let us: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = minimax_affine_1d(&xs, &us);
        assert!((fit.error - 0.5).abs() < 1e-6, "E = {}", fit.error);
        assert!(fit.slope[0].abs() < 1e-6);
        assert!((fit.offset - 0.5).abs() < 1e-6);
    }

    #[test]
    fn three_halves_power_closed_form() {
        // |x|^{3/2} on [-rho, rho]: symmetric, optimal offset halves the
        // range, E = rho^{3/2} / 2
        let rho: f64 = 0.25;
        let xs: Vec<f64> = (0..=4000).map(|i| -rho + 2.0 * rho * i as f64 / 4000.0).collect();
        let us: Vec<f64> = xs.iter().map(|x| x.abs().powf(1.5)).collect();
        let fit = minimax_affine_1d(&xs, &us);
        let expect = 0.5 * rho.powf(1.5);
        assert!((fit.error - expect).abs() < 1e-6, "E = {} vs {expect}", fit.error);
    }

    #[test]
    fn nd_matches_1d_on_line_data() {
        let points: Vec<Vec<f64>> = (0..500).map(|i| vec![i as f64 * 0.002, 0.0]).collect();
        let us: Vec<f64> = points.iter().map(|p| (p[0] * 3.0).sin()).collect();
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let d1 = minimax_affine_1d(&xs, &us);
        let d2 = minimax_affine_nd(&points, &us, 2);
        assert!((d1.error - d2.error).abs() < 5e-3 * d1.error.max(1e-9), "{} vs {}", d1.error, d2.error);
    }

    #[test]
    fn nd_exact_on_affine_plane() {
        let mut points = Vec::new();
        let mut us = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let x = -1.0 + i as f64 / 20.0;
                let y = -1.0 + j as f64 / 20.0;
                points.push(vec![x, y]);
                us.push(1.0 + 2.0 * x - 0.5 * y);
            }
        }
        let fit = minimax_affine_nd(&points, &us, 2);
        assert!(fit.error < 1e-10);
        assert!((fit.slope[0] - 2.0).abs() < 1e-8);
        assert!((fit.slope[1] + 0.5).abs() < 1e-8);
    }
}
