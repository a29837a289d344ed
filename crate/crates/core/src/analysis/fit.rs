use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `a exp(b x) + c`, coefficients `[a, b, c]`.
    Exponential,
    /// `q x^2 + l x + k`, coefficients `[q, l, k]`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub coefficients: Vec<f64>,
    /// 2-norm of the residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Set when the data carry no exponential trend (the fit is `c` alone).
    pub degenerate: bool,
}

impl FitResult {
    pub fn evaluate(&self, x: f64) -> f64 {
        let k = &self.coefficients;
        match self.model {
            FitModel::Exponential => k[0] * libm::exp(k[1] * x) + k[2],
            FitModel::Quadratic => (k[0] * x + k[1]) * x + k[2],
        }
    }
}

fn residual_norm(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    libm::sqrt(points.iter().map(|&(x, y)| (f(x) - y) * (f(x) - y)).sum())
}

fn check_points(points: &[(f64, f64)], min: usize) -> Result<()> {
    if points.len() < min {
        return Err(Error::Fit(alloc::format!(
            "need at least {min} points, got {}",
            points.len()
        )));
    }
    if !points.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
        return Err(Error::Fit("data contain non-finite values".into()));
    }
    Ok(())
}

/// Least-squares solution of the `m x k` system `design * x = rhs` by
/// Householder QR. `design` is stored row-major.
fn lstsq(mut design: Vec<f64>, mut rhs: Vec<f64>, k: usize) -> Result<Vec<f64>> {
    let m = rhs.len();
    debug_assert_eq!(design.len(), m * k);
    if m < k {
        return Err(Error::RankDeficient);
    }
    let scale = design.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for j in 0..k {
        let norm = libm::sqrt((j..m).map(|i| design[i * k + j] * design[i * k + j]).sum());
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient);
        }
        let alpha = if design[j * k + j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| design[i * k + j]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for c in j..k {
                let s: f64 =
                    (j..m).map(|i| v[i - j] * design[i * k + c]).sum::<f64>() * 2.0 / vnorm2;
                for i in j..m {
                    design[i * k + c] -= s * v[i - j];
                }
            }
            let s: f64 = (j..m).map(|i| v[i - j] * rhs[i]).sum::<f64>() * 2.0 / vnorm2;
            for i in j..m {
                rhs[i] -= s * v[i - j];
            }
        }
    }
    let mut x = alloc::vec![0.0; k];
    for j in (0..k).rev() {
        let s: f64 = (j + 1..k).map(|c| design[j * k + c] * x[c]).sum();
        x[j] = (rhs[j] - s) / design[j * k + j];
    }
    Ok(x)
}

/// Least-squares fit of `D(x) = q x^2 + l x + k`.
pub fn fit_hotspot_diameter(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 3)?;
    let design = points.iter().flat_map(|&(x, _)| [x * x, x, 1.0]).collect();
    let rhs = points.iter().map(|p| p.1).collect();
    let coefficients = lstsq(design, rhs, 3)?;
    let fit = FitResult {
        model: FitModel::Quadratic,
        residual_norm: 0.0,
        coefficients,
        iterations: 1,
        degenerate: false,
    };
    let residual_norm = residual_norm(points, |x| fit.evaluate(x));
    Ok(FitResult {
        residual_norm,
        ..fit
    })
}

/// Least-squares fit of `N(x) = a exp(b x) + c` by damped Gauss-Newton.
///
/// The start uses `c0 = min N` and a log-linear fit of `N - c0` over the
/// points where it is positive.
pub fn fit_hotspot_count(points: &[(f64, f64)]) -> Result<FitResult> {
    check_points(points, 4)?;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("abscissae must be distinct".into()));
    }

    let c0 = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 - c0 > 0.0)
        .map(|&(x, y)| (x, libm::log(y - c0)))
        .collect();
    let spread = points.iter().map(|p| (p.1 - c0).abs()).fold(0.0, f64::max);
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    if logs.len() < 2 || spread <= 1e-12 * mean.abs().max(1.0) {
        return Ok(FitResult {
            model: FitModel::Exponential,
            coefficients: alloc::vec![0.0, 0.0, mean],
            residual_norm: residual_norm(points, |_| mean),
            iterations: 0,
            degenerate: true,
        });
    }
    let design = logs.iter().flat_map(|&(x, _)| [x, 1.0]).collect();
    let line = lstsq(design, logs.iter().map(|p| p.1).collect(), 2)?;
    let mut theta = [libm::exp(line[1]), line[0], c0];

    let objective = |t: &[f64; 3]| residual_norm(points, |x| t[0] * libm::exp(t[1] * x) + t[2]);
    let mut current = objective(&theta);
    let data_norm = libm::sqrt(points.iter().map(|p| p.1 * p.1).sum());
    const MAX_ITERS: usize = 100;
    for iteration in 1..=MAX_ITERS {
        let mut design = Vec::with_capacity(points.len() * 3);
        let mut rhs = Vec::with_capacity(points.len());
        for &(x, y) in points {
            let e = libm::exp(theta[1] * x);
            design.extend_from_slice(&[e, theta[0] * x * e, 1.0]);
            rhs.push(y - (theta[0] * e + theta[2]));
        }
        let step =
            lstsq(design, rhs, 3).map_err(|_| Error::Fit("singular Gauss-Newton system".into()))?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = [
                theta[0] + lambda * step[0],
                theta[1] + lambda * step[1],
                theta[2] + lambda * step[2],
            ];
            let value = objective(&trial);
            if value.is_finite() && value <= current {
                accepted = Some((trial, value));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            // No descent along the Gauss-Newton direction: stationary point.
            return Ok(finish(theta, current, iteration));
        };
        let step_norm = libm::sqrt(step.iter().map(|s| s * s).sum::<f64>()) * lambda;
        let size = libm::sqrt(trial.iter().map(|s| s * s).sum::<f64>());
        let improvement = current - value;
        theta = trial;
        current = value;
        if step_norm <= 1e-13 * size
            || current <= 1e-15 * data_norm
            || improvement <= 1e-15 * current
        {
            return Ok(finish(theta, current, iteration));
        }
    }
    Err(Error::Fit(alloc::format!(
        "Gauss-Newton did not converge in {MAX_ITERS} iterations (residual {current:e})"
    )))
}

fn finish(theta: [f64; 3], residual_norm: f64, iterations: usize) -> FitResult {
    FitResult {
        model: FitModel::Exponential,
        coefficients: theta.to_vec(),
        residual_norm,
        iterations,
        degenerate: false,
    }
}
