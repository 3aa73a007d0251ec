//! Error-matrix analysis of a characterized gate: factoring out the target
//! unitary, SPAM subtraction, dynamic-ZZ and decoherence error extraction,
//! the coherence-limit budget, and gate-repetition fidelity-decay fitting.

use num_complex::Complex64 as C64;

use crate::linalg::{hermitize, re, unitarity_deviation, CMatrix};
use crate::numerics::levenberg_marquardt;
use crate::tomography::{pauli_2q, ProcessMatrix, ZZ_INDEX};
use crate::{Error, Result};

/// chi with the target unitary factored out; the identity process iff the
/// gate is perfect.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    pub chi_err: CMatrix,
    pub target_label: String,
}

impl ErrorMatrix {
    /// Gate fidelity Re chi_err[II, II].
    pub fn fidelity(&self) -> f64 {
        self.chi_err[(0, 0)].re
    }

    pub fn trace(&self) -> f64 {
        crate::linalg::trace(&self.chi_err).re
    }
}

/// The change-of-frame matrix T with T_mn = tr(E_m† E_n U†) / 4. Unitary for
/// unitary U.
pub fn frame_change(target: &CMatrix) -> Result<CMatrix> {
    let dev = unitarity_deviation(target);
    if dev > 1e-10 {
        return Err(Error::NonUnitary(dev));
    }
    let basis = pauli_2q();
    let udag = target.adjoint();
    let mut t = CMatrix::zeros(16, 16);
    for m in 0..16 {
        for n in 0..16 {
            let prod = basis[m].adjoint() * &basis[n] * &udag;
            t[(m, n)] = crate::linalg::trace(&prod) / re(4.0);
        }
    }
    debug_assert!(unitarity_deviation(&t) < 1e-10, "T must be unitary");
    Ok(t)
}

/// Factor the target unitary out of a process matrix: chi_err = T chi T†.
pub fn error_matrix(chi: &ProcessMatrix, target: &CMatrix, label: &str) -> Result<ErrorMatrix> {
    let t = frame_change(target)?;
    Ok(ErrorMatrix { chi_err: &t * &chi.chi * t.adjoint(), target_label: label.to_string() })
}

/// SPAM subtraction: chi_err ≈ chi_err_exp - (chi_err_control - chi_I),
/// where the control error matrix comes from tomography without the gate
/// (target = identity). Re-symmetrized after subtraction.
pub fn subtract_spam(exp: &ErrorMatrix, control: &ErrorMatrix) -> ErrorMatrix {
    let mut corrected = &exp.chi_err - &control.chi_err;
    corrected[(0, 0)] += re(1.0); // + chi_I
    ErrorMatrix { chi_err: hermitize(&corrected), target_label: exp.target_label.clone() }
}

/// Unitary-error diagnostics extracted from the first column of chi_err.
#[derive(Debug, Clone)]
pub struct DynamicZz {
    /// Dynamic ZZ rate h_ZZ, angular rad/s.
    pub h_zz: f64,
    /// Full unitary-error coefficient vector u_n = i Im(chi_err[n, 0]) / F.
    pub u_vector: Vec<C64>,
    /// True when F < 0.5 makes the first-order extraction unreliable.
    pub unreliable: bool,
}

/// Dynamic ZZ coupling rate parasitizing the gate, from the imaginary part
/// of the ZZ element of the first column: h_ZZ = Im(chi_err[ZZ, II]) / t
/// (equivalently -Im(chi_err[II, ZZ]) / t by Hermiticity).
pub fn dynamic_zz(chi_err: &ErrorMatrix, gate_time: f64) -> Result<DynamicZz> {
    if gate_time <= 0.0 || gate_time.is_nan() {
        return Err(Error::InvalidParameter("gate_time must be positive".into()));
    }
    let f = chi_err.fidelity();
    let u_vector: Vec<C64> = (0..16)
        .map(|n| C64::new(0.0, 1.0) * re(chi_err.chi_err[(n, 0)].im / f.max(1e-12)))
        .collect();
    let h_zz = chi_err.chi_err[(ZZ_INDEX, 0)].im / gate_time;
    Ok(DynamicZz { h_zz, u_vector, unreliable: f < 0.5 })
}

/// Gate infidelity induced by the dynamic ZZ coupling:
/// dF_ZZ,D = (Im chi_err[ZZ, II])^2 / F.
///
/// Uses the first-column element; by Hermiticity |Im chi_err[II, ZZ]| is the
/// same magnitude.
pub fn zz_infidelity(chi_err: &ErrorMatrix, fidelity: f64) -> Result<f64> {
    if fidelity <= 0.0 || fidelity.is_nan() {
        return Err(Error::InvalidParameter("fidelity must be positive".into()));
    }
    let im_col = chi_err.chi_err[(ZZ_INDEX, 0)].im;
    let im_row = chi_err.chi_err[(0, ZZ_INDEX)].im;
    debug_assert!(
        (im_col.abs() - im_row.abs()).abs() < 1e-9,
        "Hermiticity ties the row and column elements"
    );
    Ok(im_col * im_col / fidelity)
}

/// Decoherence error dF_dec = 1 - lambda_0 with lambda_0 the largest
/// eigenvalue of chi_err; also returns the full spectrum, descending.
pub fn decoherence_error(chi_err: &ErrorMatrix) -> (f64, Vec<f64>) {
    let (mut vals, _) = crate::linalg::eigh(&chi_err.chi_err);
    vals.reverse();
    (1.0 - vals[0], vals)
}

/// Linear-order coherence-limit budget:
/// dF = t (1/(2 T1_q1) + 1/(2 T1_q2) + 1/(2 Tphi_q1) + 1/(2 Tphi_q2)).
pub fn coherence_budget(
    t1_q1: f64,
    t1_q2: f64,
    tphi_q1: f64,
    tphi_q2: f64,
    gate_time: f64,
) -> Result<f64> {
    if gate_time <= 0.0 || gate_time.is_nan() {
        return Err(Error::InvalidParameter("gate_time must be positive".into()));
    }
    for t in [t1_q1, t1_q2, tphi_q1, tphi_q2] {
        if t <= 0.0 || t.is_nan() {
            return Err(Error::InvalidParameter(
                "coherence times must be positive or infinite".into(),
            ));
        }
    }
    let rate = |t: f64| if t.is_infinite() { 0.0 } else { 1.0 / (2.0 * t) };
    Ok(gate_time * (rate(t1_q1) + rate(t1_q2) + rate(tphi_q1) + rate(tphi_q2)))
}

/// Upper bound on the high-order oscillation error:
/// dF_osc = 1 - F - dF_T1phi - dF_ZZ,D. May be negative when the coherence
/// limit overestimates; reported as-is with a flag, never clamped.
pub fn oscillation_error_bound(fidelity: f64, df_coherence: f64, df_zz: f64) -> (f64, bool) {
    let bound = 1.0 - fidelity - df_coherence - df_zz;
    (bound, bound < 0.0)
}

/// Gate fidelity plus the extracted error contributions at one operating
/// point.
#[derive(Debug, Clone)]
pub struct ErrorBudget {
    pub fidelity: f64,
    pub delta_dec: f64,
    pub delta_zz: f64,
    pub delta_coh_limit: f64,
    pub delta_osc: f64,
    pub osc_negative: bool,
    /// Dynamic ZZ rate, angular rad/s.
    pub h_zz: f64,
}

/// Assemble the full budget from an error matrix and the device coherence.
pub fn error_budget(
    chi_err: &ErrorMatrix,
    gate_time: f64,
    t1: (f64, f64),
    tphi: (f64, f64),
) -> Result<ErrorBudget> {
    let fidelity = chi_err.fidelity();
    let (delta_dec, _) = decoherence_error(chi_err);
    let delta_zz = zz_infidelity(chi_err, fidelity)?;
    let delta_coh_limit = coherence_budget(t1.0, t1.1, tphi.0, tphi.1, gate_time)?;
    let (delta_osc, osc_negative) = oscillation_error_bound(fidelity, delta_coh_limit, delta_zz);
    let zz = dynamic_zz(chi_err, gate_time)?;
    Ok(ErrorBudget {
        fidelity,
        delta_dec,
        delta_zz,
        delta_coh_limit,
        delta_osc,
        osc_negative,
        h_zz: zz.h_zz,
    })
}

/// Result of the fidelity-decay fit F = A P^N + 1/16.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub a: f64,
    pub p: f64,
    pub a_std_error: f64,
    pub p_std_error: f64,
    pub ssr: f64,
}

/// Fit the gate-repetition fidelity decay F(N) = A P^N + 1/16 by nonlinear
/// least squares.
///
/// Initialization: A0 = F(N_min) - 1/16 and
/// P0 = (F(N_max)/F(N_min))^(1/(N_max - N_min)), both bounded to (0, 1].
pub fn fit_fidelity_decay(points: &[(u32, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, _)| n < 1) {
        return Err(Error::InvalidParameter("gate numbers must be >= 1".into()));
    }
    let f_min = points.iter().map(|&(_, f)| f).fold(f64::INFINITY, f64::min);
    let f_max = points.iter().map(|&(_, f)| f).fold(f64::NEG_INFINITY, f64::max);
    if (f_max - f_min).abs() < 1e-12 {
        return Err(Error::DegenerateData("all fidelities equal".into()));
    }

    let mut sorted: Vec<(u32, f64)> = points.to_vec();
    sorted.sort_by_key(|&(n, _)| n);
    let (n_min, f_first) = sorted[0];
    let (n_max, f_last) = *sorted.last().unwrap();
    let a0 = (f_first - 1.0 / 16.0).clamp(1e-6, 1.0);
    let p0 = if n_max > n_min && f_first > 0.0 && f_last > 0.0 {
        ((f_last / f_first).max(1e-6)).powf(1.0 / (n_max - n_min) as f64).clamp(1e-6, 1.0)
    } else {
        0.9
    };

    let xs: Vec<f64> = points.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, f)| f).collect();
    let lo = [0.0, 0.0];
    let hi = [1.0, 1.0];
    let fit = levenberg_marquardt(
        &xs,
        &ys,
        &[a0, p0],
        Some((&lo, &hi)),
        |n, p| p[0] * p[1].powf(n) + 1.0 / 16.0,
        |n, p| vec![p[1].powf(n), p[0] * n * p[1].powf(n - 1.0)],
    )?;
    Ok(DecayFit {
        a: fit.params[0],
        p: fit.params[1],
        a_std_error: fit.std_errors[0],
        p_std_error: fit.std_errors[1],
        ssr: fit.ssr,
    })
}
