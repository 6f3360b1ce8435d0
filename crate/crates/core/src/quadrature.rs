//! Midpoint-rule quadrature on boxes.

use rayon::prelude::*;

/// Points per axis used by the normalization and purity checks.
pub const DEFAULT_POINTS: usize = 2048;

pub fn midpoint_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// ∫∫ f(x, y) over [x0, x1] × [y0, y1], rows evaluated in parallel.
pub fn midpoint_2d<F>(f: F, x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let hx = (x.1 - x.0) / nx as f64;
    let hy = (y.1 - y.0) / ny as f64;
    let rows: Vec<f64> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let xi = x.0 + (i as f64 + 0.5) * hx;
            (0..ny)
                .map(|j| f(xi, y.0 + (j as f64 + 0.5) * hy))
                .sum::<f64>()
        })
        .collect();
    // fixed summation order keeps results reproducible across thread counts
    rows.iter().sum::<f64>() * hx * hy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        assert!((midpoint_1d(|x| x, 0.0, 2.0, 10) - 2.0).abs() < 1e-14);
        let g = midpoint_1d(|x| (-x * x / 2.0).exp(), -10.0, 10.0, 400);
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let area = midpoint_2d(|_, _| 1.0, (0.0, 2.0), (-1.0, 2.0), 16, 32);
        assert!((area - 6.0).abs() < 1e-13);
    }
}
