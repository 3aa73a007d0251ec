//! Quantum state / process tomography: the 16-input-state QPT protocol, chi
//! matrices in the two-qubit Pauli basis, process fidelity, and readout
//! imperfection modeled by a confusion matrix with Bayes-rule correction.
//!
//! Basis order is lexicographic over {I, X, Y, Z} ⊗ {I, X, Y, Z}:
//! II, IX, IY, IZ, XI, ..., ZZ.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::linalg::{eye, hermitize, re, trace_of_product, unitarity_deviation, CMatrix, CVector};
use crate::{Error, Result};

/// Single-qubit Pauli matrices in order I, X, Y, Z.
pub fn pauli_1q() -> [CMatrix; 4] {
    let i = eye(2);
    let x = CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)]);
    let y = CMatrix::from_row_slice(
        2,
        2,
        &[re(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), re(0.0)],
    );
    let z = CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)]);
    [i, x, y, z]
}

/// The 16 two-qubit Pauli basis operators E_n, lexicographic, Q1 major.
pub fn pauli_2q() -> Vec<CMatrix> {
    let p = pauli_1q();
    let mut out = Vec::with_capacity(16);
    for a in &p {
        for b in &p {
            out.push(a.kronecker(b));
        }
    }
    out
}

/// Human-readable labels of the two-qubit Pauli basis, same order as
/// [`pauli_2q`].
pub fn pauli_labels() -> [&'static str; 16] {
    [
        "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY",
        "ZZ",
    ]
}

/// Index of the ZZ element in the Pauli basis order.
pub const ZZ_INDEX: usize = 15;

/// The ideal two-qubit iSWAP unitary.
pub fn iswap() -> CMatrix {
    let mut u = CMatrix::zeros(4, 4);
    u[(0, 0)] = re(1.0);
    u[(3, 3)] = re(1.0);
    u[(1, 2)] = C64::new(0.0, 1.0);
    u[(2, 1)] = C64::new(0.0, 1.0);
    u
}

/// 16x16 process matrix chi over the two-qubit Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub chi: CMatrix,
    /// True when negative eigenvalues were clipped to enforce complete
    /// positivity.
    pub cp_projected: bool,
}

impl ProcessMatrix {
    pub fn new(chi: CMatrix) -> Self {
        debug_assert_eq!(chi.nrows(), 16);
        Self { chi, cp_projected: false }
    }

    /// chi of the identity process: the only nonzero element is (II, II).
    pub fn identity() -> Self {
        let mut chi = CMatrix::zeros(16, 16);
        chi[(0, 0)] = re(1.0);
        Self::new(chi)
    }

    pub fn trace(&self) -> f64 {
        crate::linalg::trace(&self.chi).re
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        crate::linalg::hermiticity_deviation(&self.chi)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = crate::linalg::eigh(&self.chi);
        vals[0]
    }

    /// Clip negative eigenvalues and renormalize the trace; sets the
    /// `cp_projected` flag.
    pub fn project_cp(&mut self) {
        let (vals, vecs) = crate::linalg::eigh(&self.chi);
        let total_before: f64 = self.trace();
        let mut chi = CMatrix::zeros(16, 16);
        for (k, &v) in vals.iter().enumerate() {
            if v > 0.0 {
                let col = vecs.column(k);
                chi += (col * col.adjoint()) * re(v);
            }
        }
        let total_after = chi.diagonal().sum().re;
        if total_after > 0.0 {
            chi *= re(total_before / total_after);
        }
        self.chi = chi;
        self.cp_projected = true;
    }

    /// Apply the channel to a 4x4 density matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let basis = pauli_2q();
        let mut out = CMatrix::zeros(4, 4);
        for m in 0..16 {
            for n in 0..16 {
                let c = self.chi[(m, n)];
                if c.norm() > 0.0 {
                    out += (&basis[m] * rho * basis[n].adjoint()) * c;
                }
            }
        }
        out
    }
}

/// The 16 two-qubit preparation states {|0>, |1>, |+>, |+i>}^⊗2.
///
/// Ordered Q1-major: element 4a + b prepares state a on Q1 and b on Q2, so
/// the first element is |00><00|. The set is informationally complete.
pub fn preparation_set() -> Vec<CMatrix> {
    let kets: [CVector; 4] = [
        CVector::from_vec(vec![re(1.0), re(0.0)]),
        CVector::from_vec(vec![re(0.0), re(1.0)]),
        CVector::from_vec(vec![re(1.0 / 2f64.sqrt()), re(1.0 / 2f64.sqrt())]),
        CVector::from_vec(vec![re(1.0 / 2f64.sqrt()), C64::new(0.0, 1.0 / 2f64.sqrt())]),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &kets {
        for b in &kets {
            let psi = a.kronecker(b);
            out.push(&psi * psi.adjoint());
        }
    }
    out
}

/// Rank of the Gram matrix of a set of vectorized states.
pub fn gram_rank(states: &[CMatrix]) -> usize {
    let n = states.len();
    let mut gram = CMatrix::zeros(n, n);
    for (i, a) in states.iter().enumerate() {
        for (j, b) in states.iter().enumerate() {
            gram[(i, j)] = trace_of_product(&a.adjoint(), b);
        }
    }
    let (vals, _) = crate::linalg::eigh(&gram);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    vals.iter().filter(|v| v.abs() > 1e-10 * scale.max(1e-300)).count()
}

/// Linear-inversion process tomography from (rho_in, rho_out) pairs.
///
/// Solves rho_out = sum_mn chi_mn E_m rho_in E_n† in the Pauli basis. Needs
/// an informationally complete input set (>= 16 pairs spanning operator
/// space). Hermiticity is enforced by symmetrization; complete positivity is
/// the caller's choice via [`ProcessMatrix::project_cp`].
pub fn chi_from_process(pairs: &[(CMatrix, CMatrix)]) -> Result<ProcessMatrix> {
    if pairs.len() < 16 {
        return Err(Error::RankDeficient { rank: pairs.len(), needed: 16 });
    }
    let inputs: Vec<CMatrix> = pairs.iter().map(|(a, _)| a.clone()).collect();
    let rank = gram_rank(&inputs);
    if rank < 16 {
        return Err(Error::RankDeficient { rank, needed: 16 });
    }

    // Superoperator S with vec(rho_out) = S vec(rho_in), column-major vec.
    let n = pairs.len();
    let mut v_in = CMatrix::zeros(16, n);
    let mut v_out = CMatrix::zeros(16, n);
    for (k, (rin, rout)) in pairs.iter().enumerate() {
        v_in.set_column(k, &crate::linalg::vectorize(rin));
        v_out.set_column(k, &crate::linalg::vectorize(rout));
    }
    // least squares S = V_out V_in† (V_in V_in†)^-1
    let gram = &v_in * v_in.adjoint();
    let rhs = &v_in * v_out.adjoint();
    let st = gram.lu().solve(&rhs).ok_or(Error::SingularMatrix)?;
    let s = st.adjoint();

    // chi_mn = tr(B_mn† S) / 16 with B_mn = conj(E_n) ⊗ E_m, using
    // vec(A X B†) = (conj(B) ⊗ A) vec(X).
    let basis = pauli_2q();
    let mut chi = CMatrix::zeros(16, 16);
    for m in 0..16 {
        for nn in 0..16 {
            let b = basis[nn].map(|z| z.conj()).kronecker(&basis[m]);
            chi[(m, nn)] = trace_of_product(&b.adjoint(), &s) / re(16.0);
        }
    }
    Ok(ProcessMatrix { chi: hermitize(&chi), cp_projected: false })
}

/// chi of an ideal unitary: chi = u u† with u_n = tr(E_n† U) / 4.
pub fn ideal_chi(u: &CMatrix) -> Result<ProcessMatrix> {
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NonUnitary(dev));
    }
    let uvec = pauli_coefficients(u);
    let mut chi = CMatrix::zeros(16, 16);
    for m in 0..16 {
        for n in 0..16 {
            chi[(m, n)] = uvec[m] * uvec[n].conj();
        }
    }
    Ok(ProcessMatrix::new(chi))
}

/// Pauli expansion coefficients u_n = tr(E_n† U) / 4 of a two-qubit operator.
pub fn pauli_coefficients(u: &CMatrix) -> Vec<C64> {
    pauli_2q().iter().map(|e| trace_of_product(&e.adjoint(), u) / re(4.0)).collect()
}

/// Process fidelity F = Re tr(chi_a chi_b), clamped to [0, 1].
pub fn process_fidelity(chi_a: &ProcessMatrix, chi_b: &ProcessMatrix) -> f64 {
    let f = trace_of_product(&chi_a.chi, &chi_b.chi).re;
    debug_assert!(
        f > -1e-6 && f < 1.0 + 1e-6,
        "fidelity {f} clamped by more than 1e-6"
    );
    f.clamp(0.0, 1.0)
}

/// 4x4 row-stochastic readout confusion matrix,
/// M[observed][true] = P(observed | true), over outcomes {00, 01, 10, 11}.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    m: [[f64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self> {
        for col in 0..4 {
            let sum: f64 = (0..4).map(|row| m[row][col]).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "confusion column {col} sums to {sum}, not 1"
                )));
            }
            for row in 0..4 {
                if !(0.0..=1.0).contains(&m[row][col]) {
                    return Err(Error::InvalidParameter(format!(
                        "confusion entry ({row},{col}) = {} outside [0,1]",
                        m[row][col]
                    )));
                }
            }
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for k in 0..4 {
            m[k][k] = 1.0;
        }
        Self { m }
    }

    /// Tensor product of independent per-qubit flip probabilities:
    /// eps_i = P(read 1 | prepared 0), eta_i = P(read 0 | prepared 1).
    pub fn from_qubit_errors(eps1: f64, eta1: f64, eps2: f64, eta2: f64) -> Result<Self> {
        let q1 = [[1.0 - eps1, eta1], [eps1, 1.0 - eta1]];
        let q2 = [[1.0 - eps2, eta2], [eps2, 1.0 - eta2]];
        let mut m = [[0.0; 4]; 4];
        for o1 in 0..2 {
            for o2 in 0..2 {
                for t1 in 0..2 {
                    for t2 in 0..2 {
                        m[2 * o1 + o2][2 * t1 + t2] = q1[o1][t1] * q2[o2][t2];
                    }
                }
            }
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    /// Forward model: observed probabilities M p for true probabilities p.
    pub fn corrupt(&self, p: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for row in 0..4 {
            for col in 0..4 {
                out[row] += self.m[row][col] * p[col];
            }
        }
        out
    }
}

/// Invert a confusion matrix on an observed histogram by constrained least
/// squares: minimize ‖M p - q‖ subject to p >= 0, sum p = sum q.
///
/// Returns the corrected probabilities and a flag set when the observed
/// vector was infeasible (outside the image of the simplex) and had to be
/// projected to the nearest feasible point.
pub fn apply_readout_correction(
    histogram: &[f64; 4],
    confusion: &ConfusionMatrix,
) -> Result<([f64; 4], bool)> {
    let total: f64 = histogram.iter().sum();
    if histogram.iter().any(|&h| h < 0.0) {
        return Err(Error::InvalidParameter("histogram entries must be nonnegative".into()));
    }
    if total <= 0.0 {
        return Err(Error::InvalidParameter("histogram must have positive total".into()));
    }
    let m = nalgebra::Matrix4::from_fn(|r, c| confusion.m[r][c]);
    if m.determinant().abs() < 1e-12 {
        return Err(Error::SingularMatrix);
    }
    let q = nalgebra::Vector4::from_column_slice(histogram);

    // Try the unconstrained solve first; most histograms are feasible.
    if let Some(p) = m.lu().solve(&q) {
        if p.iter().all(|&v| v >= -1e-12) {
            let mut out = [0.0; 4];
            for k in 0..4 {
                out[k] = p[k].max(0.0);
            }
            let s: f64 = out.iter().sum();
            if s > 0.0 {
                for v in &mut out {
                    *v *= total / s;
                }
            }
            return Ok((out, false));
        }
    }

    // Active-set enumeration over the 15 nonempty supports: solve the
    // equality-constrained least squares on each support, keep the feasible
    // candidate with the smallest residual.
    let mut best: Option<([f64; 4], f64)> = None;
    for support in 1u8..16 {
        let idx: Vec<usize> = (0..4).filter(|k| support & (1 << k) != 0).collect();
        let d = idx.len();
        // minimize ‖M_s p_s - q‖² s.t. 1ᵀ p_s = total, p_s >= 0
        // KKT system: [2 AᵀA  1; 1ᵀ  0] [p; λ] = [2 Aᵀ q; total]
        let mut kkt = DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut rhs = nalgebra::DVector::<f64>::zeros(d + 1);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                let mut dot = 0.0;
                for r in 0..4 {
                    dot += confusion.m[r][ia] * confusion.m[r][ib];
                }
                kkt[(a, b)] = 2.0 * dot;
            }
            kkt[(a, d)] = 1.0;
            kkt[(d, a)] = 1.0;
            let mut dot_q = 0.0;
            for r in 0..4 {
                dot_q += confusion.m[r][ia] * histogram[r];
            }
            rhs[a] = 2.0 * dot_q;
        }
        rhs[d] = total;
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        if (0..d).any(|a| sol[a] < -1e-10) {
            continue;
        }
        let mut p = [0.0; 4];
        for (a, &ia) in idx.iter().enumerate() {
            p[ia] = sol[a].max(0.0);
        }
        let mp = confusion.corrupt(&p);
        let residual: f64 =
            mp.iter().zip(histogram).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if best.is_none_or(|(_, r)| residual < r - 1e-15) {
            best = Some((p, residual));
        }
    }
    let (p, residual) = best.ok_or(Error::SingularMatrix)?;
    Ok((p, residual > 1e-12 * total * total))
}

/// How measurement statistics are generated during simulated QPT.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub confusion: Option<ConfusionMatrix>,
    pub shots: crate::config::Shots,
    pub seed: u64,
    /// Apply CP projection to the reconstructed chi (recommended for finite
    /// shots, off for exact statistics).
    pub project_cp: bool,
}

impl MeasurementModel {
    /// Exact expectation values, perfect readout.
    pub fn exact() -> Self {
        Self {
            confusion: None,
            shots: crate::config::Shots::Exact,
            seed: 0,
            project_cp: false,
        }
    }

    pub fn with_shots(shots: u64, seed: u64) -> Self {
        Self {
            confusion: None,
            shots: crate::config::Shots::Finite(shots),
            seed,
            project_cp: true,
        }
    }
}

/// Anything that maps a two-qubit input state to a two-qubit output state.
///
/// Implementations may be non-trace-preserving (leakage out of the
/// computational space shows up as trace deficit).
pub trait GateExecutor: Sync {
    fn apply(&self, rho_in: &CMatrix) -> Result<CMatrix>;
}

/// Executor that applies a fixed unitary.
pub struct UnitaryExecutor(pub CMatrix);

impl GateExecutor for UnitaryExecutor {
    fn apply(&self, rho_in: &CMatrix) -> Result<CMatrix> {
        Ok(&self.0 * rho_in * self.0.adjoint())
    }
}

/// Executor that returns the input unchanged.
pub struct IdentityExecutor;

impl GateExecutor for IdentityExecutor {
    fn apply(&self, rho_in: &CMatrix) -> Result<CMatrix> {
        Ok(rho_in.clone())
    }
}

/// Executor wrapper injecting a two-qubit depolarizing preparation error:
/// rho -> (1-p) rho + p I/4 before the wrapped gate.
pub struct DepolarizingPreparation<'a> {
    pub inner: &'a dyn GateExecutor,
    pub p: f64,
}

impl GateExecutor for DepolarizingPreparation<'_> {
    fn apply(&self, rho_in: &CMatrix) -> Result<CMatrix> {
        let mixed = rho_in * re(1.0 - self.p) + eye(4) * re(self.p / 4.0 * rho_in.diagonal().sum().re);
        self.inner.apply(&mixed)
    }
}

/// The 9 two-qubit measurement settings {X, Y, Z}⊗{X, Y, Z} used for state
/// tomography, as (basis_q1, basis_q2) with 1 = X, 2 = Y, 3 = Z in the Pauli
/// order of [`pauli_1q`].
pub const MEASUREMENT_SETTINGS: [(usize, usize); 9] =
    [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)];

fn eigenbasis_projectors(pauli_index: usize) -> [CMatrix; 2] {
    let p = pauli_1q();
    let (vals, vecs) = crate::linalg::eigh(&p[pauli_index]);
    // order projectors as (+1, -1)
    let (plus_col, minus_col) = if vals[0] > 0.0 { (0, 1) } else { (1, 0) };
    let plus = vecs.column(plus_col);
    let minus = vecs.column(minus_col);
    [&plus * plus.adjoint(), &minus * minus.adjoint()]
}

/// Outcome probabilities of one measurement setting, ordered (++, +-, -+, --)
/// which maps onto readout outcomes (00, 01, 10, 11).
fn setting_probabilities(rho: &CMatrix, setting: (usize, usize)) -> [f64; 4] {
    let pa = eigenbasis_projectors(setting.0);
    let pb = eigenbasis_projectors(setting.1);
    let mut out = [0.0; 4];
    for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)]
        .iter()
        .map(|&(a, b)| (a, b))
        .enumerate()
    {
        let proj = pa[a].kronecker(&pb[b]);
        out[k] = trace_of_product(&proj, rho).re;
    }
    out
}

/// Reconstruct a two-qubit state from per-setting outcome probabilities via
/// linear inversion: rho = (1/4) sum_P <P> P, averaging single-qubit
/// expectations over the settings that measure them. The II coefficient is
/// the measured trace (not forced to one), so leakage survives faithfully.
fn state_from_setting_probabilities(probs: &[[f64; 4]; 9]) -> CMatrix {
    let basis = pauli_2q();
    let mut expect = [0.0f64; 16];
    let mut counts = [0.0f64; 16];
    for (s, &(a, b)) in MEASUREMENT_SETTINGS.iter().enumerate() {
        let p = &probs[s];
        let trace = p[0] + p[1] + p[2] + p[3];
        let e_ab = p[0] - p[1] - p[2] + p[3];
        let e_ai = p[0] + p[1] - p[2] - p[3];
        let e_ib = p[0] - p[1] + p[2] - p[3];
        let idx_ab = 4 * a + b;
        let idx_ai = 4 * a;
        let idx_ib = b;
        expect[idx_ab] += e_ab;
        counts[idx_ab] += 1.0;
        expect[idx_ai] += e_ai;
        counts[idx_ai] += 1.0;
        expect[idx_ib] += e_ib;
        counts[idx_ib] += 1.0;
        expect[0] += trace;
        counts[0] += 1.0;
    }
    let mut rho = CMatrix::zeros(4, 4);
    for n in 0..16 {
        if counts[n] > 0.0 {
            rho += &basis[n] * re(expect[n] / counts[n] / 4.0);
        }
    }
    rho
}

/// Simulate full quantum process tomography of a gate executor.
///
/// For each of the 16 preparations the executor produces an output state,
/// which is measured in the 9 Pauli settings; outcome histograms optionally
/// pass through a confusion matrix and finite-shot binomial sampling (seeded
/// per grid cell, so results do not depend on scheduling), then through
/// Bayes-rule readout correction; state tomography and chi linear inversion
/// complete the pipeline.
pub fn simulate_qpt(
    executor: &dyn GateExecutor,
    measurement: &MeasurementModel,
) -> Result<ProcessMatrix> {
    let preparations = preparation_set();
    let outputs: Vec<Result<CMatrix>> =
        preparations.par_iter().map(|rho_in| executor.apply(rho_in)).collect();

    let mut pairs = Vec::with_capacity(16);
    for (prep_idx, (rho_in, rho_out)) in preparations.iter().zip(outputs).enumerate() {
        let rho_out = rho_out?;
        let mut probs = [[0.0f64; 4]; 9];
        for (s, &setting) in MEASUREMENT_SETTINGS.iter().enumerate() {
            let mut p = setting_probabilities(&rho_out, setting);
            if let Some(confusion) = &measurement.confusion {
                p = confusion.corrupt(&p);
            }
            if let crate::config::Shots::Finite(shots) = measurement.shots {
                if shots < 1 {
                    return Err(Error::InvalidParameter("shots must be >= 1".into()));
                }
                p = sample_histogram(&p, shots, measurement.seed, prep_idx, s);
            }
            if let Some(confusion) = &measurement.confusion {
                let (corrected, _flagged) = apply_readout_correction(&p, confusion)?;
                p = corrected;
            }
            probs[s] = p;
        }
        let rho_rec = state_from_setting_probabilities(&probs);
        pairs.push((rho_in.clone(), rho_rec));
    }
    let mut chi = chi_from_process(&pairs)?;
    if measurement.project_cp {
        chi.project_cp();
    }
    Ok(chi)
}

/// Multinomial sampling of a histogram via sequential binomials, seeded per
/// (preparation, setting) cell.
fn sample_histogram(p: &[f64; 4], shots: u64, seed: u64, prep: usize, setting: usize) -> [f64; 4] {
    let total: f64 = p.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (prep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
            ^ (setting as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9),
    );
    let mut remaining = shots;
    let mut remaining_p = total;
    let mut out = [0.0; 4];
    for k in 0..3 {
        if remaining == 0 || remaining_p <= 0.0 {
            break;
        }
        let frac = (p[k] / remaining_p).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, frac).map(|d| d.sample(&mut rng)).unwrap_or(0);
        out[k] = draw as f64;
        remaining -= draw;
        remaining_p -= p[k];
    }
    out[3] = remaining as f64;
    // report as probabilities scaled to the true total (leakage-aware)
    for v in &mut out {
        *v *= total / shots as f64;
    }
    out
}
