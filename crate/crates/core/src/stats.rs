//! Small-sample statistics used by the harness and the acceptance checks.

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - mu).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Standard error of the mean, `s / sqrt(n)`.
pub fn sem(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
    /// Coefficient of determination of the unweighted fit.
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`. With `sigma` the fit is weighted by
/// `1/sigma^2` and the standard errors come from those sigmas; without it
/// they come from the residual scatter.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> LinearFit {
    assert_eq!(x.len(), y.len(), "x and y lengths differ");
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len();
    let weights: Vec<f64> = match sigma {
        Some(s) => {
            assert_eq!(s.len(), n);
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; n],
    };
    let (a, b, sa, sb) = weighted(x, y, &weights);
    let (sa, sb) = if sigma.is_some() {
        (sa, sb)
    } else if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - a - b * xi).powi(2))
            .sum();
        let s2 = rss / (n - 2) as f64;
        (sa * s2.sqrt(), sb * s2.sqrt())
    } else {
        (0.0, 0.0)
    };
    let (a0, b0, _, _) = weighted(x, y, &vec![1.0; n]);
    let ybar = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - a0 - b0 * xi).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    LinearFit {
        intercept: a,
        slope: b,
        intercept_se: sa,
        slope_se: sb,
        r_squared,
    }
}

/// Returns `(intercept, slope, se_intercept, se_slope)` assuming unit-variance
/// weighted residuals.
fn weighted(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64, f64) {
    let s: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let delta = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let slope = (s * sxy - sx * sy) / delta;
    (intercept, slope, (sxx / delta).sqrt(), (s / delta).sqrt())
}

/// `(value - expected) / sigma`; zero when both the deviation and sigma vanish.
pub fn z_score(value: f64, expected: f64, sigma: f64) -> f64 {
    let d = value - expected;
    if sigma > 0.0 {
        d / sigma
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sem_by_hand() {
        // mean 5, deviations -3,-1,1,3 -> ss 20, s^2 = 20/3
        let xs = [2.0, 4.0, 6.0, 8.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((sample_std(&xs) - (20.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((sem(&xs) - (20.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(sem(&[1.0]), 0.0);
    }

    #[test]
    fn synthetic_dataset_with_known_variance() {
        use crate::rng::RandomStream;
        // Uniform(0,1) has variance 1/12, so the squared SEM of 50 draws is
        // an unbiased estimate of 1/12/50.
        let mut s = RandomStream::new(3, "sem");
        let groups = 2000;
        let mut total = 0.0;
        for _ in 0..groups {
            let xs: Vec<f64> = (0..50).map(|_| s.uniform()).collect();
            total += sem(&xs).powi(2);
        }
        let avg = total / groups as f64;
        let expect = 1.0 / 12.0 / 50.0;
        assert!((avg - expect).abs() / expect < 0.01, "{avg} vs {expect}");
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y, None);
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-7);
    }

    #[test]
    fn weighted_errors() {
        // Two points with unit sigma at x = 0, 1: slope se = sqrt(2).
        let f = linear_fit(&[0.0, 1.0], &[0.0, 1.0], Some(&[1.0, 1.0]));
        assert!((f.slope_se - 2f64.sqrt()).abs() < 1e-12);
        assert!((f.intercept_se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_scores() {
        assert_eq!(z_score(3.0, 1.0, 1.0), 2.0);
        assert_eq!(z_score(1.0, 1.0, 0.0), 0.0);
        assert!(z_score(2.0, 1.0, 0.0).is_infinite());
    }
}
