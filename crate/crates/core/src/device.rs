//! Static device physics: flux-to-frequency maps, effective qubit-qubit
//! coupling J12 and its flux derivatives, Lamb shifts, and static ZZ from
//! exact diagonalization.
//!
//! All frequencies are angular (rad/s), flux is in units of the flux quantum
//! Phi0, and the principal flux branch is phi in (-1/2, 1/2).

use crate::hamiltonian::{build_static_transmon, ComputationalFrame};
use crate::linalg::NumberSector;
use crate::numerics::bisect;
use crate::{Error, Result};

/// Half-width of the principal flux branch.
pub const PRINCIPAL_BRANCH: f64 = 0.5;

/// Default step (in Phi0) for numerical flux derivatives.
pub const DEFAULT_FLUX_STEP: f64 = 5e-5;

/// Sweet-spot frequency, anharmonicity and SQUID asymmetry of one transmon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmonParams {
    /// Maximum (sweet-spot) transition frequency, angular rad/s.
    pub freq_max: f64,
    /// Anharmonicity magnitude E_c, angular rad/s (positive).
    pub anharmonicity: f64,
    /// Dimensionless junction asymmetry, in [0, 1).
    pub asymmetry: f64,
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if self.freq_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "freq_max must be positive, got {}",
                self.freq_max
            )));
        }
        if self.anharmonicity <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "anharmonicity must be positive, got {}",
                self.anharmonicity
            )));
        }
        if !(0.0..1.0).contains(&self.asymmetry) {
            return Err(Error::InvalidParameter(format!(
                "asymmetry must lie in [0, 1), got {}",
                self.asymmetry
            )));
        }
        Ok(())
    }
}

/// Affine calibration between instrument bias (mV) and coupler flux (Phi0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxMap {
    /// Conversion slope, mV per Phi0 (nonzero, sign free).
    pub volts_per_phi0: f64,
    /// Bias voltage at zero flux, mV.
    pub offset_mv: f64,
}

impl FluxMap {
    pub fn validate(&self) -> Result<()> {
        if self.volts_per_phi0 == 0.0 {
            return Err(Error::InvalidParameter("volts_per_phi0 must be nonzero".into()));
        }
        Ok(())
    }

    pub fn mv_to_phi(&self, mv: f64) -> f64 {
        (mv - self.offset_mv) / self.volts_per_phi0
    }

    pub fn phi_to_mv(&self, phi: f64) -> f64 {
        self.offset_mv + phi * self.volts_per_phi0
    }
}

/// Which computational qubit an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    Q1,
    Q2,
}

/// Full physical description of the two-qubit / tunable-coupler device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub q1: TransmonParams,
    pub q2: TransmonParams,
    pub coupler: TransmonParams,
    pub coupler_flux_map: FluxMap,
    /// Q1-coupler coupling, angular rad/s.
    pub g1: f64,
    /// Q2-coupler coupling, angular rad/s.
    pub g2: f64,
    /// Direct qubit-qubit coupling, angular rad/s.
    pub g12: f64,
    /// Energy-relaxation times, seconds (`f64::INFINITY` disables).
    pub t1_q1: f64,
    pub t1_q2: f64,
    /// Pure-dephasing times, seconds (`f64::INFINITY` disables).
    pub tphi_q1: f64,
    pub tphi_q2: f64,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        self.q1.validate()?;
        self.q2.validate()?;
        self.coupler.validate()?;
        self.coupler_flux_map.validate()?;
        for (name, t) in [
            ("t1_q1", self.t1_q1),
            ("t1_q2", self.t1_q2),
            ("tphi_q1", self.tphi_q1),
            ("tphi_q2", self.tphi_q2),
        ] {
            if t <= 0.0 || t.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive or infinite, got {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn qubit(&self, q: Qubit) -> &TransmonParams {
        match q {
            Qubit::Q1 => &self.q1,
            Qubit::Q2 => &self.q2,
        }
    }

    pub fn coupling(&self, q: Qubit) -> f64 {
        match q {
            Qubit::Q1 => self.g1,
            Qubit::Q2 => self.g2,
        }
    }

    /// Warn when the dispersive condition g_i < |Delta_i(phi)| / 5 fails.
    pub fn dispersive_warning(&self, phi: f64) -> Option<String> {
        let mut failing = Vec::new();
        for q in [Qubit::Q1, Qubit::Q2] {
            let delta = detuning(self, q, phi);
            if self.coupling(q) >= delta.abs() / 5.0 {
                failing.push(format!(
                    "{q:?}: g/2pi = {:.1} MHz vs |Delta|/5 = {:.1} MHz",
                    crate::units::to_mhz(self.coupling(q)),
                    crate::units::to_mhz(delta.abs() / 5.0)
                ));
            }
        }
        if failing.is_empty() {
            None
        } else {
            Some(format!("dispersive condition violated at phi = {phi}: {}", failing.join("; ")))
        }
    }
}

fn check_principal_branch(phi: f64) -> Result<()> {
    if !phi.is_finite() || phi.abs() >= PRINCIPAL_BRANCH {
        return Err(Error::OffBranchFlux(phi));
    }
    Ok(())
}

/// Coupler frequency at flux `phi` (Phi0 units) on the principal branch:
///
/// omega_c(phi) = (omega_max + E_c) (cos^2(pi phi) + d^2 sin^2(pi phi))^(1/4) - E_c
///
/// the standard split-transmon form with junction asymmetry `d`.
pub fn coupler_frequency(params: &DeviceParams, phi: f64) -> f64 {
    transmon_frequency(&params.coupler, phi)
}

/// Same flux-to-frequency form for an arbitrary transmon.
pub fn transmon_frequency(t: &TransmonParams, phi: f64) -> f64 {
    let c = (std::f64::consts::PI * phi).cos();
    let s = (std::f64::consts::PI * phi).sin();
    let envelope = (c * c + t.asymmetry * t.asymmetry * s * s).powf(0.25);
    (t.freq_max + t.anharmonicity) * envelope - t.anharmonicity
}

/// Flux on [0, 1/2) at which the coupler reaches `target` (angular rad/s).
pub fn phi_for_coupler_freq(params: &DeviceParams, target: f64) -> Result<f64> {
    let t = &params.coupler;
    let y = ((target + t.anharmonicity) / (t.freq_max + t.anharmonicity)).powi(4);
    let d2 = t.asymmetry * t.asymmetry;
    if !(d2..=1.0).contains(&y) {
        return Err(Error::InvalidParameter(format!(
            "coupler frequency {} GHz is outside the tunable range",
            crate::units::to_ghz(target)
        )));
    }
    let cos_pi_phi = ((y - d2) / (1.0 - d2)).sqrt();
    Ok(cos_pi_phi.clamp(-1.0, 1.0).acos() / std::f64::consts::PI)
}

/// Qubit-coupler detuning Delta_i(phi) = omega_i - omega_c(phi).
pub fn detuning(params: &DeviceParams, q: Qubit, phi: f64) -> f64 {
    params.qubit(q).freq_max - coupler_frequency(params, phi)
}

/// Harmonic-mean detuning Delta(phi) = 2 / (1/Delta_1 + 1/Delta_2).
pub fn harmonic_detuning(params: &DeviceParams, phi: f64) -> Result<f64> {
    let d1 = detuning(params, Qubit::Q1, phi);
    let d2 = detuning(params, Qubit::Q2, phi);
    if d1 == 0.0 || d2 == 0.0 {
        return Err(Error::ZeroDetuning(phi));
    }
    Ok(2.0 / (1.0 / d1 + 1.0 / d2))
}

/// Total effective qubit-qubit coupling J12 = g12 + g1 g2 / Delta(phi).
pub fn effective_coupling_j12(params: &DeviceParams, phi: f64) -> Result<f64> {
    check_principal_branch(phi)?;
    let delta = harmonic_detuning(params, phi)?;
    Ok(params.g12 + params.g1 * params.g2 / delta)
}

/// Central-difference flux derivative of J12 (order 1 or 2).
pub fn j12_derivative(params: &DeviceParams, phi: f64, order: u32) -> Result<f64> {
    j12_derivative_with_step(params, phi, order, DEFAULT_FLUX_STEP)
}

pub fn j12_derivative_with_step(
    params: &DeviceParams,
    phi: f64,
    order: u32,
    step: f64,
) -> Result<f64> {
    central_difference(|p| effective_coupling_j12(params, p), phi, order, step)
}

/// Lamb-shifted qubit frequency omega_i + g_i^2 / Delta_i(phi).
pub fn lamb_shifted_freq(params: &DeviceParams, q: Qubit, phi: f64) -> Result<f64> {
    check_principal_branch(phi)?;
    let delta = detuning(params, q, phi);
    if delta == 0.0 {
        return Err(Error::ZeroDetuning(phi));
    }
    let g = params.coupling(q);
    Ok(params.qubit(q).freq_max + g * g / delta)
}

/// Central-difference flux derivative of the Lamb-shifted frequency.
pub fn lamb_shift_derivative(params: &DeviceParams, q: Qubit, phi: f64, order: u32) -> Result<f64> {
    central_difference(|p| lamb_shifted_freq(params, q, p), phi, order, DEFAULT_FLUX_STEP)
}

fn central_difference<F>(f: F, x: f64, order: u32, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let fp = f(x + h)?;
    let fm = f(x - h)?;
    match order {
        1 => Ok((fp - fm) / (2.0 * h)),
        2 => {
            let f0 = f(x)?;
            Ok((fp - 2.0 * f0 + fm) / (h * h))
        }
        _ => Err(Error::InvalidParameter(format!("derivative order must be 1 or 2, got {order}"))),
    }
}

/// Static ZZ coupling xi_ZZ,S = E11 - E01 - E10 + E00 from exact
/// diagonalization of the static multi-level Hamiltonian at flux `phi`.
///
/// Eigenstates are assigned to the bare computational labels by maximum
/// overlap; an ambiguous assignment surfaces as [`Error::DegenerateLabels`].
pub fn static_zz(params: &DeviceParams, phi: f64, n_levels: usize) -> Result<f64> {
    let frame = computational_frame(params, phi, n_levels)?;
    let [e00, e01, e10, e11] = frame.energies;
    Ok(e11 - e01 - e10 + e00)
}

/// Dressed computational frame (energies and eigenvectors of the four
/// computational states) of the static model at flux `phi`.
///
/// Built inside the total-excitation sector N <= 2, which contains the full
/// computational manifold exactly.
pub fn computational_frame(
    params: &DeviceParams,
    phi: f64,
    n_levels: usize,
) -> Result<ComputationalFrame> {
    check_principal_branch(phi)?;
    if n_levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_levels must be at least 2, got {n_levels}"
        )));
    }
    let model = build_static_transmon(params, phi, n_levels)?;
    let sector = NumberSector::new(&model.dims, 2);
    let h_sector = sector.project_op(&model.static_part);
    ComputationalFrame::from_sector(&h_sector, &sector)
}

/// Exact dressed single-excitation qubit frequencies (relative to the dressed
/// ground state) of the static model at flux `phi`.
///
/// Returns (omega_q1, omega_q2). These are the frequencies a Ramsey
/// experiment would calibrate against at this bias; they agree with
/// [`lamb_shifted_freq`] to second order in g/Delta.
pub fn dressed_qubit_freqs(params: &DeviceParams, phi: f64, n_levels: usize) -> Result<(f64, f64)> {
    let frame = computational_frame(params, phi, n_levels)?;
    let [e00, e01, e10, _] = frame.energies;
    Ok((e10 - e00, e01 - e00))
}

/// Flux at which J12 crosses zero, to relative tolerance 1e-10.
pub fn find_off_flux(params: &DeviceParams) -> Result<f64> {
    find_zero_of(params, "J12", effective_coupling_j12)
}

/// Flux at which the static ZZ coupling crosses zero, to relative tolerance
/// 1e-10 in flux.
pub fn find_zero_zz_flux(params: &DeviceParams, n_levels: usize) -> Result<f64> {
    find_zero_of(params, "static ZZ", |p, phi| static_zz(p, phi, n_levels))
}

fn find_zero_of<F>(params: &DeviceParams, quantity: &'static str, f: F) -> Result<f64>
where
    F: Fn(&DeviceParams, f64) -> Result<f64>,
{
    // Bracket on a coarse grid over the dispersive branch (coupler above
    // both qubits), then bisect. Restricting the scan keeps the divergence
    // at qubit-coupler resonance out of the bracket.
    let lo = 1e-3;
    let hi = 0.495;
    let n = 400;
    let w_floor = params.q1.freq_max.max(params.q2.freq_max);
    let mut prev_phi = lo;
    let mut prev_val = f(params, lo)?;
    for k in 1..=n {
        let phi = lo + (hi - lo) * k as f64 / n as f64;
        if coupler_frequency(params, phi) <= w_floor {
            break;
        }
        let val = match f(params, phi) {
            Ok(v) => v,
            // Stop scanning once the model leaves its domain (e.g. label
            // ambiguity as the coupler approaches the qubits).
            Err(_) => break,
        };
        if prev_val == 0.0 {
            return Ok(prev_phi);
        }
        if prev_val.signum() != val.signum() {
            let root = bisect(|x| f(params, x), prev_phi, phi, 1e-10)?;
            // reject poles: the bracketed value must actually shrink
            let f_root = f(params, root)?;
            if f_root.abs() <= prev_val.abs().min(val.abs()) {
                return Ok(root);
            }
        }
        prev_phi = phi;
        prev_val = val;
    }
    Err(Error::NoSignChange { quantity, lo, hi })
}
