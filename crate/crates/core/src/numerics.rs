//! Small numerical routines: bracketing root find, scalar maximization,
//! Levenberg-Marquardt least squares, and periodogram peak extraction.

use crate::{Error, Result};

/// Bisection on a bracketing interval to relative tolerance `rel_tol` in x.
///
/// `f(lo)` and `f(hi)` must have opposite signs.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { quantity: "bisection input", lo, hi });
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rel_tol * scale {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section maximization of a unimodal function on [lo, hi].
///
/// Returns (x_max, f(x_max)) to absolute x tolerance `x_tol`.
pub fn maximize_scalar<F>(f: F, lo: f64, hi: f64, x_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > x_tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Result of a nonlinear least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Standard errors from the Jacobian at the solution.
    pub std_errors: Vec<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    pub iterations: usize,
}

/// Levenberg-Marquardt least squares for a model y = model(x, params).
///
/// `jacobian(x, params)` returns the partial derivatives of the model with
/// respect to each parameter. Optional box bounds clamp the parameters after
/// every accepted step.
pub fn levenberg_marquardt<M, J>(
    xs: &[f64],
    ys: &[f64],
    initial: &[f64],
    bounds: Option<(&[f64], &[f64])>,
    model: M,
    jacobian: J,
) -> Result<FitResult>
where
    M: Fn(f64, &[f64]) -> f64,
    J: Fn(f64, &[f64]) -> Vec<f64>,
{
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let p = initial.len();
    if n < p {
        return Err(Error::DegenerateData(format!("{n} points for {p} parameters")));
    }
    let clamp = |params: &mut [f64]| {
        if let Some((lo, hi)) = bounds {
            for (k, v) in params.iter_mut().enumerate() {
                *v = v.clamp(lo[k], hi[k]);
            }
        }
    };
    let ssr_of = |params: &[f64]| -> f64 {
        xs.iter().zip(ys).map(|(&x, &y)| (y - model(x, params)).powi(2)).sum()
    };

    let mut params = initial.to_vec();
    clamp(&mut params);
    let mut ssr = ssr_of(&params);
    let mut lambda = 1e-3;
    let max_iter = 200;

    for iter in 0..max_iter {
        // Normal equations J^T J + lambda diag(J^T J), J^T r
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for (&x, &y) in xs.iter().zip(ys) {
            let row = jacobian(x, &params);
            let r = y - model(x, &params);
            for a in 0..p {
                jtr[a] += row[a] * r;
                for b in 0..p {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..20 {
            let mut a = nalgebra::DMatrix::<f64>::zeros(p, p);
            let mut b = nalgebra::DVector::<f64>::zeros(p);
            for i in 0..p {
                b[i] = jtr[i];
                for j in 0..p {
                    a[(i, j)] = jtj[i][j];
                }
                a[(i, i)] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = a.lu().solve(&b) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = params.iter().zip(step.iter()).map(|(v, s)| v + s).collect();
            clamp(&mut trial);
            let trial_ssr = ssr_of(&trial);
            if trial_ssr < ssr {
                let rel_change = (ssr - trial_ssr) / ssr.max(1e-300);
                params = trial;
                ssr = trial_ssr;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_change < 1e-14 || ssr < 1e-28 {
                    return finish(xs, &params, ssr, iter + 1, &jacobian);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            return finish(xs, &params, ssr, iter + 1, &jacobian);
        }
    }
    finish(xs, &params, ssr, max_iter, &jacobian)
}

fn finish<J>(xs: &[f64], params: &[f64], ssr: f64, iterations: usize, jacobian: &J) -> Result<FitResult>
where
    J: Fn(f64, &[f64]) -> Vec<f64>,
{
    let p = params.len();
    let n = xs.len();
    let mut jtj = nalgebra::DMatrix::<f64>::zeros(p, p);
    for &x in xs {
        let row = jacobian(x, params);
        for a in 0..p {
            for b in 0..p {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    let dof = (n.saturating_sub(p)).max(1) as f64;
    let sigma2 = ssr / dof;
    let std_errors = match jtj.try_inverse() {
        Some(cov) => (0..p).map(|k| (cov[(k, k)].max(0.0) * sigma2).sqrt()).collect(),
        None => vec![f64::NAN; p],
    };
    Ok(FitResult { params: params.to_vec(), std_errors, ssr, iterations })
}

/// Decaying-cosine fit result: y = offset + amp e^{-decay t} cos(w t + phase).
#[derive(Debug, Clone)]
pub struct CosineFit {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub offset: f64,
    pub decay_rate: f64,
    pub ssr: f64,
}

/// Fit a decaying cosine with frequency, phase, amplitude, offset and decay
/// free; the frequency is seeded from the periodogram.
pub fn fit_decaying_cosine(times: &[f64], values: &[f64]) -> Result<CosineFit> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::DegenerateData("need at least 8 samples".into()));
    }
    let dt = times[1] - times[0];
    let (w0, _) = dominant_frequency(values, dt)?;
    let offset0 = values.iter().sum::<f64>() / values.len() as f64;
    let amp0 = values.iter().map(|v| (v - offset0).abs()).fold(0.0, f64::max);
    // linear phase seed from the first quadrature pair
    let c: f64 = times.iter().zip(values).map(|(&t, &v)| (v - offset0) * (w0 * t).cos()).sum();
    let s: f64 = times.iter().zip(values).map(|(&t, &v)| -(v - offset0) * (w0 * t).sin()).sum();
    let phase0 = s.atan2(c);
    let span = times.last().unwrap() - times[0];
    let initial = [amp0.max(1e-12), w0, phase0, offset0, 0.0];
    let lo = [0.0, 0.0, -10.0, -f64::INFINITY, 0.0];
    let hi = [f64::INFINITY, std::f64::consts::PI / dt, 10.0, f64::INFINITY, 100.0 / span];
    let model = |t: f64, p: &[f64]| p[3] + p[0] * (-p[4] * t).exp() * (p[1] * t + p[2]).cos();
    let jac = |t: f64, p: &[f64]| {
        let e = (-p[4] * t).exp();
        let arg = p[1] * t + p[2];
        vec![
            e * arg.cos(),
            -p[0] * e * t * arg.sin(),
            -p[0] * e * arg.sin(),
            1.0,
            -p[0] * t * e * arg.cos(),
        ]
    };
    let fit = levenberg_marquardt(times, values, &initial, Some((&lo, &hi)), model, jac)?;
    Ok(CosineFit {
        amplitude: fit.params[0],
        frequency: fit.params[1],
        phase: fit.params[2],
        offset: fit.params[3],
        decay_rate: fit.params[4],
        ssr: fit.ssr,
    })
}

/// Dominant nonzero frequency of a uniformly sampled real signal.
///
/// Direct periodogram over a dense frequency grid up to Nyquist, refined by
/// parabolic interpolation around the peak. Returns the angular frequency
/// (rad per unit of `dt`) and the peak power fraction relative to the total
/// AC power. Errors if the signal has no AC content.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::DegenerateData("too few samples for a periodogram".into()));
    }
    // Hann window against leakage bias of the finite observation window
    let window: Vec<f64> = (0..n)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / (n - 1) as f64).cos()))
        .collect();
    let wsum: f64 = window.iter().sum();
    let wmean = samples.iter().zip(&window).map(|(&s, &w)| s * w).sum::<f64>() / wsum;
    let ac: Vec<f64> = samples.iter().zip(&window).map(|(&s, &w)| (s - wmean) * w).collect();
    let total_power: f64 = ac.iter().map(|&a| a * a).sum::<f64>() / n as f64;
    if total_power < 1e-18 {
        return Err(Error::NoOscillation("signal is constant".into()));
    }

    let nyquist = std::f64::consts::PI / dt;
    let span = dt * n as f64;
    let df = std::f64::consts::TAU / span / 4.0; // 4x zero-padding resolution
    let n_freq = (nyquist / df) as usize;
    let power_at = |w: f64| -> f64 {
        let mut c = 0.0;
        let mut s = 0.0;
        for (k, &a) in ac.iter().enumerate() {
            let ph = w * dt * k as f64;
            c += a * ph.cos();
            s += a * ph.sin();
        }
        (c * c + s * s) / (n as f64)
    };
    let mut best_k = 1;
    let mut best_p = 0.0;
    for k in 1..n_freq {
        let p = power_at(df * k as f64);
        if p > best_p {
            best_p = p;
            best_k = k;
        }
    }
    // refine the peak on the continuous periodogram
    let w0 = df * best_k as f64;
    let lo = (w0 - df).max(df * 0.5);
    let hi = (w0 + df).min(nyquist);
    let (w_peak, p_peak) = maximize_scalar(|w| Ok(power_at(w)), lo, hi, df * 1e-6)?;
    Ok((w_peak, p_peak / (total_power * n as f64 / 2.0).max(1e-300)))
}

/// Fraction of AC spectral power above an angular-frequency cutoff.
pub fn power_fraction_above(samples: &[f64], dt: f64, w_cut: f64) -> f64 {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ac: Vec<f64> = samples.iter().map(|&s| s - mean).collect();
    let nyquist = std::f64::consts::PI / dt;
    let span = dt * n as f64;
    let df = std::f64::consts::TAU / span;
    let mut above = 0.0;
    let mut total = 0.0;
    let mut k = 1;
    loop {
        let w = df * k as f64;
        if w >= nyquist {
            break;
        }
        let mut c = 0.0;
        let mut s = 0.0;
        for (j, &a) in ac.iter().enumerate() {
            let ph = w * dt * j as f64;
            c += a * ph.cos();
            s += a * ph.sin();
        }
        let p = c * c + s * s;
        total += p;
        if w > w_cut {
            above += p;
        }
        k += 1;
    }
    if total <= 0.0 {
        0.0
    } else {
        above / total
    }
}
