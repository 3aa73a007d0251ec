//! The calibrated parametric-gate executor: resolves an operating point,
//! calibrates the flux modulation (frequency, then amplitude, with one
//! refinement pass), and runs the pulse as a two-qubit gate for tomography.
//!
//! Execution model: preparations and measurements address the dressed
//! computational eigenstates of the static Hamiltonian at the DC bias (the
//! states an experiment calibrates against), the pulse evolves the full
//! model in the lab frame up to an exact uniform frame shift, and the
//! deterministic single-qubit Z rotations at the dressed qubit frequencies
//! are removed before tomography.

use num_complex::Complex64 as C64;

use crate::device::{DeviceParams, PRINCIPAL_BRANCH};
use crate::dynamics::{evolve_observed, EvolveOptions, NoiseModel, QuantumState};
use crate::hamiltonian::{
    build_static_transmon, build_time_dependent, ComputationalFrame, FluxPulse, ModelKind,
};
use crate::linalg::{re, total_number, CMatrix, CVector, NumberSector};
use crate::tomography::GateExecutor;
use crate::{Error, Result};

/// A DC bias point at which the gate is operated.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub label: String,
    pub phi_dc: f64,
    /// Coupler frequency at the bias, angular rad/s.
    pub coupler_freq: f64,
    /// Instrument bias through the flux map, mV.
    pub bias_mv: f64,
}

impl OperatingPoint {
    /// Resolve a coupler frequency target (angular rad/s) to a flux bias.
    pub fn resolve(params: &DeviceParams, label: &str, coupler_freq: f64) -> Result<Self> {
        let phi_dc = crate::device::phi_for_coupler_freq(params, coupler_freq)?;
        Ok(Self {
            label: label.to_string(),
            phi_dc,
            coupler_freq,
            bias_mv: params.coupler_flux_map.phi_to_mv(phi_dc),
        })
    }
}

/// Calibration result: the pulse that realizes an iSWAP in `target_time`.
#[derive(Debug, Clone)]
pub struct CalibratedGate {
    pub point: OperatingPoint,
    pub pulse: FluxPulse,
    /// True when the drive phase was flipped by pi to select the +i
    /// (iSWAP) chirality.
    pub phase_flipped: bool,
    /// Population-oscillation angular frequency at resonance (2 J_exchange).
    pub rabi_rate: f64,
    /// Per-gate virtual-Z correction angles (Q1, Q2), rad, from the
    /// single-qubit phase calibration.
    pub phase_corrections: (f64, f64),
}

impl CalibratedGate {
    /// Executor running this calibrated gate `repeats` times back-to-back.
    pub fn executor(
        &self,
        params: &DeviceParams,
        kind: ModelKind,
        repeats: usize,
        noise: NoiseModel,
    ) -> Result<PulseGateExecutor> {
        let mut ex =
            PulseGateExecutor::new(params, &self.point, kind, &self.pulse, repeats, noise)?;
        ex.set_phase_corrections(self.phase_corrections);
        Ok(ex)
    }
}

/// Integration accuracy used for gate execution and calibration.
fn gate_opts(omega_drive: f64) -> EvolveOptions {
    EvolveOptions::for_drive(omega_drive)
}

/// Single-excitation transfer probe: evolve the dressed |10> state under the
/// pulse and return the population trace of the dressed |01> state.
struct TransferProbe {
    h_base: CMatrix,
    coupler_number: CMatrix,
    coupler: crate::device::TransmonParams,
    psi0: CVector,
    target: CVector,
}

impl TransferProbe {
    fn new(params: &DeviceParams, phi_dc: f64, kind: ModelKind) -> Result<Self> {
        let n = kind.levels();
        let dims = vec![n; 3];
        let sector = NumberSector::new(&dims, 1);
        let model = build_static_transmon(params, phi_dc, n)?;
        let w_ref = (params.q1.freq_max + params.q2.freq_max) / 2.0;
        let shifted = &model.static_part - total_number(&dims) * re(w_ref);
        let h_sector = sector.project_op(&shifted);
        // dressed single-excitation eigenvectors by maximum overlap
        let frame = single_excitation_frame(&h_sector, &sector)?;
        // the flux-dependent split: H(phi) = base + omega_c(phi) n_c
        let n_c = sector.project_op(&crate::linalg::embed(
            &crate::linalg::number(n),
            &dims,
            2,
        ));
        let base = &h_sector - &n_c * re(crate::device::coupler_frequency(params, phi_dc));
        Ok(Self {
            h_base: base,
            coupler_number: n_c,
            coupler: params.coupler,
            psi0: frame.0,
            target: frame.1,
        })
    }

    /// Dressed |01> population on a uniform grid under the given pulse.
    fn transfer_trace(&self, pulse: &FluxPulse, n_times: usize) -> Result<Vec<f64>> {
        let h = ProbeHamiltonian { probe: self, pulse: *pulse };
        let state = QuantumState {
            dims: vec![0; 0], // unused on the pure-state path
            rho: &self.psi0 * self.psi0.adjoint(),
        };
        let times: Vec<f64> = (0..n_times)
            .map(|k| pulse.duration * k as f64 / (n_times - 1) as f64)
            .collect();
        let noise = NoiseModel::none(3);
        let mut trace = Vec::with_capacity(n_times);
        evolve_observed(&h, &state, &times, &noise, &gate_opts(pulse.omega_drive), |_, rho| {
            trace.push((self.target.adjoint() * rho * &self.target)[(0, 0)].re);
        })?;
        Ok(trace)
    }
}

struct ProbeHamiltonian<'a> {
    probe: &'a TransferProbe,
    pulse: FluxPulse,
}

impl crate::hamiltonian::HamiltonianEvaluator for ProbeHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.probe.h_base.nrows()
    }
    fn at(&self, t: f64) -> CMatrix {
        let phi = self.pulse.phi_at(t.clamp(0.0, self.pulse.duration));
        let wc = crate::device::transmon_frequency(&self.probe.coupler, phi);
        &self.probe.h_base + &self.probe.coupler_number * re(wc)
    }
}

/// Dressed (|10>, |01>) eigenvectors in the single-excitation sector, gauge
/// fixed to real positive bare amplitude.
fn single_excitation_frame(
    h_sector: &CMatrix,
    sector: &NumberSector,
) -> Result<(CVector, CVector)> {
    let dims = &sector.dims;
    let row10 = sector.position_of(crate::linalg::flat_index(&[1, 0, 0], dims)).unwrap();
    let row01 = sector.position_of(crate::linalg::flat_index(&[0, 1, 0], dims)).unwrap();
    let (_vals, vecs) = crate::linalg::eigh(h_sector);
    let pick = |row: usize| -> CVector {
        let mut best = 0;
        let mut best_ov = -1.0;
        for k in 0..vecs.ncols() {
            let ov = vecs[(row, k)].norm_sqr();
            if ov > best_ov {
                best_ov = ov;
                best = k;
            }
        }
        let col = vecs.column(best);
        let amp = col[row];
        let phase = if amp.norm() > 0.0 { amp / re(amp.norm()) } else { re(1.0) };
        CVector::from_iterator(col.len(), col.iter().map(|z| z * phase.conj()))
    };
    let v10 = pick(row10);
    let v01 = pick(row01);
    if (v10.adjoint() * &v01)[(0, 0)].norm() > 1e-6 {
        return Err(Error::Calibration("single-excitation labels collapsed".into()));
    }
    Ok((v10, v01))
}

/// Population-oscillation angular frequency of the transfer probe under a
/// pulse (ramp-free, observation window `cycles` swap periods long).
fn rabi_rate(probe: &TransferProbe, pulse: &FluxPulse, window: f64) -> Result<f64> {
    let mut p = *pulse;
    p.duration = window;
    p.ramp = 0.0;
    let n = 512;
    let trace = probe.transfer_trace(&p, n)?;
    let dt = window / (n - 1) as f64;
    let (w, _) = crate::numerics::dominant_frequency(&trace, dt)?;
    Ok(w)
}

/// Swap time realized by a calibrated pulse, measured through the exchange
/// rate on a long ramp-free probe window plus the ramp correction.
pub fn measured_swap_time(
    params: &DeviceParams,
    point: &OperatingPoint,
    kind: ModelKind,
    pulse: &FluxPulse,
) -> Result<f64> {
    let probe = TransferProbe::new(params, point.phi_dc, kind)?;
    let rate = rabi_rate(&probe, pulse, 6.0 * pulse.duration)?;
    Ok(std::f64::consts::PI / rate + pulse.ramp)
}

/// Time of the first full-transfer maximum under the actual pulse shape
/// (ramps included), via dense sampling and parabolic refinement.
#[allow(dead_code)]
fn full_swap_time(probe: &TransferProbe, pulse: &FluxPulse, horizon: f64) -> Result<f64> {
    let mut p = *pulse;
    p.duration = horizon;
    let n = 1025;
    let trace = probe.transfer_trace(&p, n)?;
    let dt = horizon / (n - 1) as f64;
    let peak = trace.iter().cloned().fold(0.0f64, f64::max);
    if peak < 0.5 {
        return Err(Error::Calibration(format!(
            "no population transfer within the horizon (peak {peak:.3})"
        )));
    }
    // first local maximum reaching at least 90% of the global peak
    for k in 1..n - 1 {
        if trace[k] >= 0.9 * peak && trace[k] >= trace[k - 1] && trace[k] >= trace[k + 1] {
            let denom = trace[k - 1] - 2.0 * trace[k] + trace[k + 1];
            let shift = if denom.abs() > 1e-15 {
                0.5 * (trace[k - 1] - trace[k + 1]) / denom
            } else {
                0.0
            };
            return Ok((k as f64 + shift.clamp(-1.0, 1.0)) * dt);
        }
    }
    Err(Error::Calibration("transfer peak not localized".into()))
}

/// Largest modulation amplitude keeping the coupler dispersive over the
/// whole excursion (min coupler frequency 250 MHz above the qubits).
fn amplitude_ceiling(params: &DeviceParams, phi_dc: f64) -> f64 {
    let w_floor =
        params.q1.freq_max.max(params.q2.freq_max) + crate::units::ghz(0.25);
    let phi_max = crate::device::phi_for_coupler_freq(params, w_floor)
        .unwrap_or(PRINCIPAL_BRANCH - 1e-3);
    (phi_max - phi_dc).min(PRINCIPAL_BRANCH - 1e-3 - phi_dc.abs()).max(0.0)
}

/// Calibrate the parametric iSWAP at a DC bias: two-stage search setting the
/// drive frequency from the model resonance then refining on a transfer
/// scan, and solving the amplitude so the simulated full-swap time equals
/// `target_time`; one frequency/amplitude refinement pass; finally the drive
/// phase is chosen so the realized gate has the +i (iSWAP) chirality.
///
/// Calibration runs on the noiseless single-excitation dynamics.
pub fn calibrate_gate(
    params: &DeviceParams,
    point: &OperatingPoint,
    kind: ModelKind,
    target_time: f64,
    ramp: f64,
) -> Result<CalibratedGate> {
    if target_time <= 0.0 || target_time.is_nan() {
        return Err(Error::InvalidParameter("target_time must be positive".into()));
    }
    let phi_dc = point.phi_dc;
    let probe = TransferProbe::new(params, phi_dc, kind)?;

    // initial guesses: first-order amplitude, model resonance with the
    // second-order drive-induced shift
    let dj = crate::device::j12_derivative(params, phi_dc, 1)?;
    if dj.abs() < 1e-3 {
        return Err(Error::Calibration("dJ12/dphi vanishes at this bias".into()));
    }
    let mut amplitude =
        (std::f64::consts::PI / (target_time * dj.abs())).min(0.9 * amplitude_ceiling(params, phi_dc));
    if amplitude <= 0.0 {
        return Err(Error::Calibration("no dispersive amplitude headroom".into()));
    }
    let splitting = dressed_splitting(params, phi_dc, kind)?;
    let drive_shift = |amp: f64| -> Result<f64> {
        Ok(crate::hamiltonian::effective_drive_frequency(params, phi_dc, amp)?
            - crate::hamiltonian::effective_drive_frequency(params, phi_dc, 0.0)?)
    };
    let mut omega = splitting + drive_shift(amplitude)?;

    let mut rate = 0.0;
    for _pass in 0..2 {
        // frequency stage: minimize the oscillation rate around the current
        // estimate (the chevron V has its vertex at resonance). Coarse-scan
        // first to stay on the central lobe, then refine by golden section.
        let j_eff_scale = std::f64::consts::PI / (2.0 * target_time);
        let span = (5.0 * j_eff_scale).max(crate::units::mhz(1.0));
        let window = 4.5 * target_time;
        let pulse_probe = FluxPulse {
            phi_dc,
            omega_drive: omega,
            amplitude,
            phase: 0.0,
            duration: target_time,
            ramp: 0.0,
        };
        let rate_at = |w: f64| -> f64 {
            let mut p = pulse_probe;
            p.omega_drive = w;
            rabi_rate(&probe, &p, window).unwrap_or(f64::INFINITY)
        };
        let n_scan = 25;
        let ws: Vec<f64> = (0..n_scan)
            .map(|k| omega - span + 2.0 * span * k as f64 / (n_scan - 1) as f64)
            .collect();
        let rates: Vec<f64> = ws.iter().map(|&w| rate_at(w)).collect();
        let k_best = rates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        let lo = ws[k_best.saturating_sub(1)];
        let hi = ws[(k_best + 1).min(n_scan - 1)];
        let (w_best, neg_rate) = crate::numerics::maximize_scalar(
            |w| Ok(-rate_at(w)),
            lo,
            hi,
            crate::units::khz(10.0),
        )?;
        omega = w_best;
        rate = -neg_rate;

        // amplitude stage: bisection on the simulated swap time. The swap
        // time is measured through the exchange rate, t = pi / Omega_R plus
        // the cosine-ramp correction (each ramp contributes half its length
        // of full-rate evolution), which is immune to the fast off-resonant
        // ripple riding on the transfer lobe.
        let t_swap_of = |amp: f64| -> Result<f64> {
            let p = FluxPulse {
                phi_dc,
                omega_drive: omega,
                amplitude: amp,
                phase: 0.0,
                duration: target_time,
                ramp: 0.0,
            };
            Ok(std::f64::consts::PI / rabi_rate(&probe, &p, window)? + ramp)
        };
        let ceiling = amplitude_ceiling(params, phi_dc);
        let mut lo = 0.45 * amplitude;
        let mut hi = (2.2 * amplitude).min(ceiling);
        let t_lo = t_swap_of(lo)?;
        let t_hi = t_swap_of(hi)?;
        if !(t_hi <= target_time && target_time <= t_lo) {
            return Err(Error::Calibration(format!(
                "swap time not bracketed: [{:.1}, {:.1}] ns around target {:.1} ns",
                t_hi * 1e9,
                t_lo * 1e9,
                target_time * 1e9
            )));
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            let t_mid = t_swap_of(mid)?;
            if (t_mid - target_time).abs() < 0.02e-9 {
                lo = mid;
                hi = mid;
                break;
            }
            if t_mid > target_time {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        amplitude = 0.5 * (lo + hi);
    }

    let mut pulse = FluxPulse {
        phi_dc,
        omega_drive: omega,
        amplitude,
        phase: 0.0,
        duration: target_time,
        ramp,
    };
    pulse.validate()?;

    // chirality: the realized transfer amplitude must be +i (iSWAP)
    let phase_flipped = match realized_chirality(params, point, kind, &pulse)? {
        Chirality::Iswap => false,
        Chirality::IswapDagger => {
            pulse.phase = std::f64::consts::PI;
            match realized_chirality(params, point, kind, &pulse)? {
                Chirality::Iswap => true,
                Chirality::IswapDagger => {
                    return Err(Error::Calibration(
                        "chirality did not flip with the drive phase".into(),
                    ))
                }
            }
        }
    };

    // single-qubit phase calibration (virtual Z): extract each qubit's
    // deterministic Z phase from the noiseless gate with the partner in its
    // ground state, which leaves conditional (ZZ) phases untouched
    let phase_corrections = calibrate_phases(params, point, kind, &pulse)?;

    Ok(CalibratedGate {
        point: point.clone(),
        pulse,
        phase_flipped,
        rabi_rate: rate,
        phase_corrections,
    })
}

/// Residual single-qubit Z angles of the (noiseless) calibrated gate,
/// probed with |+0> and |0+> inputs; for iSWAP U|+0> has its transferred
/// amplitude i e^{i theta} on |01>, so theta reads off the 00-01 coherence.
fn calibrate_phases(
    params: &DeviceParams,
    point: &OperatingPoint,
    kind: ModelKind,
    pulse: &FluxPulse,
) -> Result<(f64, f64)> {
    let executor = PulseGateExecutor::new(params, point, kind, pulse, 1, NoiseModel::none(3))?;
    let probe = |excited: usize| -> Result<f64> {
        let mut rho = CMatrix::zeros(4, 4);
        for (a, b) in [(0usize, 0usize), (0, excited), (excited, 0), (excited, excited)] {
            rho[(a, b)] = re(0.5);
        }
        let out = executor.apply(&rho)?;
        // the excitation lands on the other qubit
        let landing = if excited == 2 { 1 } else { 2 };
        let coh = out[(landing, 0)];
        if coh.norm() < 0.2 {
            return Err(Error::Calibration("phase probe lost its coherence".into()));
        }
        Ok(coh.arg() - std::f64::consts::FRAC_PI_2)
    };
    // |+0> transfers onto Q2 (reads the Q2 frame), |0+> onto Q1
    let theta_q2 = probe(2)?;
    let theta_q1 = probe(1)?;
    Ok((theta_q1, theta_q2))
}

/// Locally dressed computational states: each qubit mode hybridized with
/// the coupler through its own coupling only, |1>_i = cos(t_i) a_i† |0> +
/// sin(t_i) a_c† |0>, and |11> built from both local raising operators.
///
/// The |10> and |01> columns share a small coupler component (overlap
/// sin t_1 sin t_2), so the map is not exactly an isometry — that residual
/// is the physical preparation imperfection of fast local pulses.
fn locally_dressed_states(
    params: &DeviceParams,
    phi_dc: f64,
    n_levels: usize,
    sector: &NumberSector,
) -> Result<CMatrix> {
    let wc = crate::device::coupler_frequency(params, phi_dc);
    let mixing = |wq: f64, g: f64| -> (f64, f64) {
        // qubit-like eigenvector of [[wq, g], [g, wc]]; the qubit sits
        // below the coupler, so it is the lower branch
        let mean = 0.5 * (wq + wc);
        let half = 0.5 * (wq - wc);
        let branch = (half * half + g * g).sqrt();
        let lambda = if wq < wc { mean - branch } else { mean + branch };
        let v1 = (lambda - wq) / g;
        let norm = (1.0 + v1 * v1).sqrt();
        (1.0 / norm, v1 / norm)
    };
    let (c1, s1) = mixing(params.q1.freq_max, params.g1);
    let (c2, s2) = mixing(params.q2.freq_max, params.g2);

    let dims = vec![n_levels; 3];
    let mut w = CMatrix::zeros(sector.dim(), 4);
    let mut put = |col: usize, occ: [usize; 3], amp: f64| {
        let flat = crate::linalg::flat_index(&occ, &dims);
        w[(sector.position_of(flat).expect("state in sector"), col)] = re(amp);
    };
    // |00>
    put(0, [0, 0, 0], 1.0);
    // |01> = local Q2 excitation
    put(1, [0, 1, 0], c2);
    put(1, [0, 0, 1], s2);
    // |10> = local Q1 excitation
    put(2, [1, 0, 0], c1);
    put(2, [0, 0, 1], s1);
    // |11> = both local raising operators applied to vacuum
    put(3, [1, 1, 0], c1 * c2);
    put(3, [1, 0, 1], c1 * s2);
    put(3, [0, 1, 1], s1 * c2);
    if n_levels >= 3 {
        put(3, [0, 0, 2], s1 * s2 * std::f64::consts::SQRT_2);
    }
    let norm = w.column(3).norm();
    let scaled = w.column(3) / re(norm);
    w.set_column(3, &scaled);
    Ok(w)
}

/// Exact dressed qubit-qubit splitting E10 - E01 at a bias.
pub fn dressed_splitting(params: &DeviceParams, phi_dc: f64, kind: ModelKind) -> Result<f64> {
    let frame = crate::device::computational_frame(params, phi_dc, kind.levels())?;
    Ok(frame.energies[2] - frame.energies[1])
}

/// Exact dressed single-excitation qubit energies (E(Q1), E(Q2)) above the
/// ground state at a static flux, from the 3x3 single-excitation block.
///
/// This block is independent of the transmon truncation, so the two-level
/// builder serves all model kinds.
fn single_excitation_energies(params: &DeviceParams, phi: f64) -> Result<(f64, f64)> {
    let dims = [2usize, 2, 2];
    let rows = [
        crate::linalg::flat_index(&[1, 0, 0], &dims),
        crate::linalg::flat_index(&[0, 1, 0], &dims),
        crate::linalg::flat_index(&[0, 0, 1], &dims),
    ];
    let model = build_static_transmon(params, phi, 2)?;
    let mut block = CMatrix::zeros(3, 3);
    for (a, &ra) in rows.iter().enumerate() {
        for (b, &rb) in rows.iter().enumerate() {
            block[(a, b)] = model.static_part[(ra, rb)];
        }
    }
    let (vals, vecs) = crate::linalg::eigh(&block);
    let pick = |row: usize| -> f64 {
        let mut best = 0;
        let mut best_ov = -1.0;
        for k in 0..3 {
            let ov = vecs[(row, k)].norm_sqr();
            if ov > best_ov {
                best_ov = ov;
                best = k;
            }
        }
        vals[best]
    };
    Ok((pick(0), pick(1)))
}

enum Chirality {
    Iswap,
    IswapDagger,
}

fn realized_chirality(
    params: &DeviceParams,
    point: &OperatingPoint,
    kind: ModelKind,
    pulse: &FluxPulse,
) -> Result<Chirality> {
    let executor = PulseGateExecutor::new(params, point, kind, pulse, 1, NoiseModel::none(3))?;
    let mut rho_in = CMatrix::zeros(4, 4);
    rho_in[(2, 2)] = re(1.0); // |10>
    let rho_out = executor.apply(&rho_in)?;
    let transfer = rho_out[(1, 1)].re;
    if transfer < 0.5 {
        return Err(Error::Calibration(format!(
            "calibrated pulse does not transfer population (P = {transfer:.3})"
        )));
    }
    // The ±i transfer phase survives only against a reference amplitude:
    // (|00> + |10>)/sqrt2 -> (|00> + i|01>)/sqrt2 under iSWAP, so the
    // coherence <00|rho|01> is -i/2 for iSWAP and +i/2 for iSWAP†.
    let mut rho_sup = CMatrix::zeros(4, 4);
    for (a, b) in [(0usize, 0usize), (0, 2), (2, 0), (2, 2)] {
        rho_sup[(a, b)] = re(0.5);
    }
    let out_sup = executor.apply(&rho_sup)?;
    if out_sup[(0, 1)].im < 0.0 {
        Ok(Chirality::Iswap)
    } else {
        Ok(Chirality::IswapDagger)
    }
}

/// Which computational frame preparations and measurements address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreparationFrame {
    /// Locally dressed product states: each qubit hybridized with the
    /// coupler through its own g_i, but not with the other qubit. This is
    /// what a fast local pi-pulse prepares — it follows the coupler
    /// dressing (detuning ~1 GHz) but cannot resolve the slow J12
    /// hybridization (a few MHz), which therefore survives as a genuine
    /// preparation imperfection of the protocol.
    #[default]
    LocallyDressed,
    /// The exact dressed eigenstates of the full static Hamiltonian at the
    /// DC bias, including the qubit-qubit hybridization (idealized
    /// preparation).
    Dressed,
    /// The bare truncated-mode product states, carrying the full
    /// bare/dressed mismatch as a coherent state-preparation error.
    Bare,
}

/// Gate executor that runs the calibrated flux pulse on the full model.
pub struct PulseGateExecutor {
    dims: Vec<usize>,
    hamiltonian: crate::hamiltonian::TimeDependentHamiltonian,
    /// Computational isometry (sector dim x 4).
    isometry: CMatrix,
    /// Dressed single-qubit frequencies in the shifted frame.
    w_q1: f64,
    w_q2: f64,
    /// Per-gate virtual-Z correction angles (Q1, Q2), rad.
    phase_corr: (f64, f64),
    repeats: usize,
    total_time: f64,
    noise: NoiseModel,
    opts: EvolveOptions,
}

impl PulseGateExecutor {
    pub fn new(
        params: &DeviceParams,
        point: &OperatingPoint,
        kind: ModelKind,
        pulse: &FluxPulse,
        repeats: usize,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::with_frame(params, point, kind, pulse, repeats, noise, PreparationFrame::default())
    }

    pub fn with_frame(
        params: &DeviceParams,
        point: &OperatingPoint,
        kind: ModelKind,
        pulse: &FluxPulse,
        repeats: usize,
        noise: NoiseModel,
        prep_frame: PreparationFrame,
    ) -> Result<Self> {
        pulse.validate()?;
        let n = kind.levels();
        let dims = vec![n; 3];
        let sector = NumberSector::new(&dims, 2);
        let w_ref = (params.q1.freq_max + params.q2.freq_max) / 2.0;

        let hamiltonian = build_time_dependent(params, pulse, kind)?
            .with_frame_shift(w_ref, &dims)
            .into_sector(&sector)
            .with_repeats(repeats);

        let static_model = build_static_transmon(params, point.phi_dc, n)?;
        let shifted = &static_model.static_part - total_number(&dims) * re(w_ref);
        let h_sector = sector.project_op(&shifted);
        let frame = ComputationalFrame::from_sector(&h_sector, &sector)?;
        let [e00, e01, e10, _] = frame.energies;
        let isometry = match prep_frame {
            PreparationFrame::LocallyDressed => {
                locally_dressed_states(params, point.phi_dc, n, &sector)?
            }
            PreparationFrame::Dressed => frame.isometry,
            PreparationFrame::Bare => {
                let labels = [[0usize, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0]];
                let mut w = CMatrix::zeros(sector.dim(), 4);
                for (col, occ) in labels.iter().enumerate() {
                    let flat = crate::linalg::flat_index(occ, &dims);
                    w[(sector.position_of(flat).unwrap(), col)] = re(1.0);
                }
                w
            }
        };

        // Rotating frame at the qubit frequencies including the
        // drive-induced shift: the coupler dressing follows the slow flux
        // modulation adiabatically, so each dressed qubit frequency
        // accumulates the cycle average of its exact single-excitation
        // eigenvalue, active for the flat-top fraction of the envelope.
        let duty = (pulse.duration - 1.25 * pulse.ramp) / pulse.duration;
        let (shift_q1, shift_q2) = if pulse.amplitude == 0.0 {
            (0.0, 0.0)
        } else {
            let base = single_excitation_energies(params, pulse.phi_dc)?;
            let n_samples = 1024;
            let mut acc = (0.0, 0.0);
            for k in 0..n_samples {
                let theta = std::f64::consts::TAU * k as f64 / n_samples as f64;
                let phi = pulse.phi_dc + pulse.amplitude * theta.cos();
                let e = single_excitation_energies(params, phi)?;
                acc.0 += e.0 - base.0;
                acc.1 += e.1 - base.1;
            }
            (acc.0 / n_samples as f64 * duty, acc.1 / n_samples as f64 * duty)
        };

        // The hardware phase-locks the modulation to the qubit sidebands,
        // keeping the drive and the qubit-frame difference frequency
        // coherent; that lock is abstracted here by pinning the
        // differential frame frequency to the drive, while the common mode
        // carries the adiabatic drive-induced shift.
        let sum = (e10 - e00 + shift_q1) + (e01 - e00 + shift_q2);
        let diff = if pulse.amplitude == 0.0 {
            (e10 - e00) - (e01 - e00)
        } else {
            pulse.omega_drive
        };

        Ok(Self {
            dims,
            hamiltonian,
            isometry,
            w_q1: 0.5 * (sum + diff),
            w_q2: 0.5 * (sum - diff),
            phase_corr: (0.0, 0.0),
            repeats,
            total_time: pulse.duration * repeats as f64,
            noise,
            opts: gate_opts(pulse.omega_drive),
        })
    }

    /// Install per-gate virtual-Z corrections from phase calibration.
    pub fn set_phase_corrections(&mut self, corr: (f64, f64)) {
        self.phase_corr = corr;
    }

    /// Frame-removal phases for the dressed computational basis.
    fn frame_rotation(&self) -> CMatrix {
        let t = self.total_time;
        let n = self.repeats as f64;
        let a1 = self.w_q1 * t - self.phase_corr.0 * n;
        let a2 = self.w_q2 * t - self.phase_corr.1 * n;
        let d = [
            re(1.0),
            C64::from_polar(1.0, a2),
            C64::from_polar(1.0, a1),
            C64::from_polar(1.0, a1 + a2),
        ];
        CMatrix::from_diagonal(&CVector::from_row_slice(&d))
    }
}

impl GateExecutor for PulseGateExecutor {
    fn apply(&self, rho_in: &CMatrix) -> Result<CMatrix> {
        // lift the two-qubit state onto the dressed computational manifold
        let rho_full = &self.isometry * rho_in * self.isometry.adjoint();
        let state = QuantumState { dims: self.dims.clone(), rho: rho_full };
        let out = crate::dynamics::evolve(
            &self.hamiltonian,
            &state,
            self.total_time,
            &self.noise,
            &self.opts,
        )?;
        // compress back; trace deficit is leakage out of the computational
        // manifold
        let rho4 = self.isometry.adjoint() * &out.rho * &self.isometry;
        let rot = self.frame_rotation();
        Ok(&rot * rho4 * rot.adjoint())
    }
}
