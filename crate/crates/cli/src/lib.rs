//! Command runner behind the `couplersim` binary: configuration loading,
//! experiment dispatch, and artifact output.

use std::path::{Path, PathBuf};

use couplersim::artifacts::{chi_table, gnuplot_heatmap, gnuplot_lines, ArtifactSet, CsvTable};
use couplersim::config::{reference_config, RunConfig, Shots};
use couplersim::device::DeviceParams;
use couplersim::dynamics::NoiseModel;
use couplersim::error_analysis::fit_fidelity_decay;
use couplersim::experiments;
use couplersim::gate::{calibrate_gate, measured_swap_time, OperatingPoint};
use couplersim::hamiltonian::ModelKind;
use couplersim::tomography::{
    ideal_chi, iswap, process_fidelity, simulate_qpt, ConfusionMatrix, MeasurementModel,
};
use couplersim::units::{ghz, mhz, ns, to_ghz, to_khz, to_mhz, to_ns};
use couplersim::{Error, Result};

/// One experiment invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    J12Sweep { points: usize },
    ZzSweep { points: usize, n_levels: usize },
    Chevron { point: usize, span_mhz: f64, n_freq: usize, t_max_ns: f64, n_time: usize },
    SwapSpec { freq_min_ghz: f64, freq_max_ghz: f64, n_freq: usize, t_max_ns: f64, n_time: usize },
    Qpt { point: usize },
    ErrorBudget,
    DecayFit { point: usize, n_max: u32 },
    Calibrate { point: usize },
    EmitConfig,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::J12Sweep { .. } => "j12-sweep",
            Command::ZzSweep { .. } => "zz-sweep",
            Command::Chevron { .. } => "chevron",
            Command::SwapSpec { .. } => "swap-spec",
            Command::Qpt { .. } => "qpt",
            Command::ErrorBudget => "error-budget",
            Command::DecayFit { .. } => "decay-fit",
            Command::Calibrate { .. } => "calibrate",
            Command::EmitConfig => "config",
        }
    }
}

/// Resolved run context: config plus output controls.
pub struct RunContext {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn load(config_path: Option<&Path>, out_dir: &Path) -> Result<Self> {
        let config = match config_path {
            Some(p) => RunConfig::load(p)?,
            None => reference_config(),
        };
        Ok(Self { config, out_dir: out_dir.to_path_buf() })
    }

    fn device(&self) -> Result<DeviceParams> {
        self.config.device_params()
    }

    fn kind(&self) -> ModelKind {
        match self.config.gate.n_levels {
            2 => ModelKind::TwoLevel,
            n => ModelKind::Transmon(n),
        }
    }

    fn operating_point(&self, index: usize) -> Result<OperatingPoint> {
        let params = self.device()?;
        let cfg = self.config.operating_points.get(index).ok_or_else(|| {
            Error::Config(format!(
                "operating point index {index} out of range (config has {})",
                self.config.operating_points.len()
            ))
        })?;
        OperatingPoint::resolve(&params, &cfg.label, ghz(cfg.coupler_freq_ghz))
    }

    fn measurement_model(&self) -> Result<MeasurementModel> {
        let confusion = match &self.config.readout {
            Some(r) => Some(ConfusionMatrix::new(r.confusion)?),
            None => None,
        };
        Ok(match self.config.shots {
            Shots::Exact => MeasurementModel {
                confusion,
                shots: Shots::Exact,
                seed: self.config.seed.unwrap_or(0),
                project_cp: false,
            },
            Shots::Finite(n) => MeasurementModel {
                confusion,
                shots: Shots::Finite(n),
                seed: self.config.seed.ok_or_else(|| {
                    Error::Config("seed required for finite shots".into())
                })?,
                project_cp: true,
            },
        })
    }

    fn metadata(&self, command: &str, extra: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "command": command,
            "config": serde_json::from_str::<serde_json::Value>(&self.config.to_json()).unwrap(),
            "seed": self.config.seed,
            "extra": extra,
        })
    }
}

/// Dispatch one command; returns the written artifact files.
pub fn run(ctx: &RunContext, command: &Command) -> Result<Vec<PathBuf>> {
    let started = std::time::Instant::now();
    let mut files = match command {
        Command::J12Sweep { points } => j12_sweep(ctx, *points)?,
        Command::ZzSweep { points, n_levels } => zz_sweep(ctx, *points, *n_levels)?,
        Command::Chevron { point, span_mhz, n_freq, t_max_ns, n_time } => {
            chevron(ctx, *point, *span_mhz, *n_freq, *t_max_ns, *n_time)?
        }
        Command::SwapSpec { freq_min_ghz, freq_max_ghz, n_freq, t_max_ns, n_time } => {
            swap_spec(ctx, *freq_min_ghz, *freq_max_ghz, *n_freq, *t_max_ns, *n_time)?
        }
        Command::Qpt { point } => qpt(ctx, *point)?,
        Command::ErrorBudget => error_budget(ctx)?,
        Command::DecayFit { point, n_max } => decay_fit(ctx, *point, *n_max)?,
        Command::Calibrate { point } => calibrate(ctx, *point)?,
        Command::EmitConfig => {
            println!("{}", reference_config().to_json());
            Vec::new()
        }
    };
    files.sort();
    let _elapsed = started.elapsed();
    Ok(files)
}

fn dispersive_flux_grid(params: &DeviceParams, points: usize) -> Result<Vec<f64>> {
    // cover the branch from near the sweet spot down to 250 MHz above the
    // qubits
    let w_floor = params.q1.freq_max.max(params.q2.freq_max) + ghz(0.25);
    let phi_max = couplersim::device::phi_for_coupler_freq(params, w_floor)?;
    Ok((0..points).map(|k| 0.005 + (phi_max - 0.005) * k as f64 / (points - 1) as f64).collect())
}

fn j12_sweep(ctx: &RunContext, points: usize) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let grid = dispersive_flux_grid(&params, points.max(2))?;
    let mut table = CsvTable::new(&[
        "phi_phi0",
        "bias_mv",
        "coupler_freq_ghz",
        "j12_mhz",
        "dj12_dphi_mhz",
        "d2j12_dphi2_mhz",
    ]);
    for &phi in &grid {
        table.push(vec![
            phi,
            params.coupler_flux_map.phi_to_mv(phi),
            to_ghz(couplersim::device::coupler_frequency(&params, phi)),
            to_mhz(couplersim::device::effective_coupling_j12(&params, phi)?),
            to_mhz(couplersim::device::j12_derivative(&params, phi, 1)?),
            to_mhz(couplersim::device::j12_derivative(&params, phi, 2)?),
        ]);
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "j12_sweep")?;
    set.write_csv("", &table)?;
    set.write_plot_script(&gnuplot_lines(
        "j12_sweep.csv",
        "Effective coupling vs coupler bias",
        2,
        "bias (mV)",
        &[(4, "J12 (MHz)"), (5, "dJ12/dphi (MHz/Phi0)")],
        "coupling (MHz)",
    ))?;
    set.write_meta(&ctx.metadata("j12-sweep", serde_json::json!({"points": points})))?;
    Ok(set.files().to_vec())
}

fn zz_sweep(ctx: &RunContext, points: usize, n_levels: usize) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let grid = dispersive_flux_grid(&params, points.max(2))?;
    let mut table =
        CsvTable::new(&["phi_phi0", "bias_mv", "coupler_freq_ghz", "static_zz_mhz"]);
    for &phi in &grid {
        table.push(vec![
            phi,
            params.coupler_flux_map.phi_to_mv(phi),
            to_ghz(couplersim::device::coupler_frequency(&params, phi)),
            to_mhz(couplersim::device::static_zz(&params, phi, n_levels.max(3))?),
        ]);
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "zz_sweep")?;
    set.write_csv("", &table)?;
    set.write_plot_script(&gnuplot_lines(
        "zz_sweep.csv",
        "Static ZZ coupling vs coupler bias",
        2,
        "bias (mV)",
        &[(4, "static ZZ (MHz)")],
        "ZZ (MHz)",
    ))?;
    set.write_meta(&ctx.metadata("zz-sweep", serde_json::json!({"points": points})))?;
    Ok(set.files().to_vec())
}

fn chevron(
    ctx: &RunContext,
    point: usize,
    span_mhz: f64,
    n_freq: usize,
    t_max_ns: f64,
    n_time: usize,
) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let kind = ctx.kind();
    let op = ctx.operating_point(point)?;
    let cal =
        calibrate_gate(&params, &op, kind, ctx.config.gate.target_time(), ctx.config.gate.ramp())?;
    let center = cal.pulse.omega_drive;
    let freqs: Vec<f64> = (0..n_freq)
        .map(|k| center + mhz(span_mhz) * (k as f64 / (n_freq - 1) as f64 - 0.5))
        .collect();
    let noise = NoiseModel::from_device(&params);
    let grid = experiments::chevron_scan(
        &params,
        kind,
        &noise,
        op.phi_dc,
        cal.pulse.amplitude,
        cal.pulse.ramp,
        &freqs,
        ns(t_max_ns),
        n_time,
    )?;
    let resonance = experiments::chevron_resonance(&grid).ok();

    let mut table = CsvTable::new(&["drive_freq_mhz", "time_ns", "pop_q1"]);
    for (i, &f) in grid.y.iter().enumerate() {
        for (j, &t) in grid.x.iter().enumerate() {
            table.push(vec![to_mhz(f), to_ns(t), grid.values[i][j]]);
        }
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "chevron")?;
    set.write_csv("", &table)?;
    set.write_plot_script(&gnuplot_heatmap(
        "chevron.csv",
        "Parametric exchange chevron",
        "drive frequency (MHz)",
        "time (ns)",
    ))?;
    set.write_meta(&ctx.metadata(
        "chevron",
        serde_json::json!({
            "point": op.label,
            "amplitude_phi0": cal.pulse.amplitude,
            "calibrated_drive_mhz": to_mhz(cal.pulse.omega_drive),
            "fitted_resonance_mhz": resonance.map(to_mhz),
        }),
    ))?;
    Ok(set.files().to_vec())
}

fn swap_spec(
    ctx: &RunContext,
    freq_min_ghz: f64,
    freq_max_ghz: f64,
    n_freq: usize,
    t_max_ns: f64,
    n_time: usize,
) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let freqs: Vec<f64> = (0..n_freq)
        .map(|k| ghz(freq_min_ghz + (freq_max_ghz - freq_min_ghz) * k as f64 / (n_freq - 1) as f64))
        .collect();
    let noise = NoiseModel::from_device(&params);
    let spec = experiments::swap_spectroscopy(
        &params,
        ctx.kind(),
        &noise,
        &freqs,
        ns(t_max_ns),
        n_time,
    )?;

    let mut table = CsvTable::new(&["coupler_freq_ghz", "time_ns", "pop_q2"]);
    for (i, &f) in spec.grid.y.iter().enumerate() {
        for (j, &t) in spec.grid.x.iter().enumerate() {
            table.push(vec![to_ghz(f), to_ns(t), spec.grid.values[i][j]]);
        }
    }
    let mut extracted =
        CsvTable::new(&["coupler_freq_ghz", "j12_extracted_mhz", "ripple_fraction"]);
    for (i, &f) in spec.grid.y.iter().enumerate() {
        extracted.push(vec![
            to_ghz(f),
            spec.j12_extracted[i].map(to_mhz).unwrap_or(f64::NAN),
            spec.ripple_fraction[i],
        ]);
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "swap_spec")?;
    set.write_csv("", &table)?;
    set.write_csv("_extracted", &extracted)?;
    set.write_plot_script(&gnuplot_heatmap(
        "swap_spec.csv",
        "Static swap spectroscopy",
        "coupler frequency (GHz)",
        "time (ns)",
    ))?;
    set.write_meta(&ctx.metadata("swap-spec", serde_json::json!({"n_freq": n_freq})))?;
    Ok(set.files().to_vec())
}

fn qpt(ctx: &RunContext, point: usize) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let kind = ctx.kind();
    let op = ctx.operating_point(point)?;
    let cal =
        calibrate_gate(&params, &op, kind, ctx.config.gate.target_time(), ctx.config.gate.ramp())?;
    let executor = cal.executor(&params, kind, 1, NoiseModel::from_device(&params))?;
    let measurement = ctx.measurement_model()?;
    let chi = simulate_qpt(&executor, &measurement)?;
    let fidelity = process_fidelity(&chi, &ideal_chi(&iswap())?);

    let mut set = ArtifactSet::new(&ctx.out_dir, "qpt")?;
    set.write_csv("_chi", &chi_table(&chi))?;
    set.write_meta(&ctx.metadata(
        "qpt",
        serde_json::json!({
            "point": op.label,
            "basis_order": crate::pauli_order_string(),
            "cp_projected": chi.cp_projected,
            "fidelity": fidelity,
            "amplitude_phi0": cal.pulse.amplitude,
            "drive_freq_mhz": to_mhz(cal.pulse.omega_drive),
        }),
    ))?;
    Ok(set.files().to_vec())
}

fn error_budget(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let kind = ctx.kind();
    let mut points = Vec::new();
    for cfg in &ctx.config.operating_points {
        points.push(OperatingPoint::resolve(&params, &cfg.label, ghz(cfg.coupler_freq_ghz))?);
    }
    let noise = NoiseModel::from_device(&params);
    let rows = experiments::run_error_budget(
        &params,
        kind,
        &points,
        ctx.config.gate.target_time(),
        ctx.config.gate.ramp(),
        &noise,
    )?;

    let mut table = CsvTable::new(&[
        "flux_mv",
        "coupler_freq_ghz",
        "static_zz_mhz",
        "F",
        "dF_dec",
        "dF_zz",
        "dF_coh",
        "dF_osc",
        "h_zz_khz",
    ]);
    for row in &rows {
        table.push(vec![
            row.bias_mv,
            row.coupler_freq_ghz,
            row.static_zz_mhz,
            row.budget.fidelity,
            row.budget.delta_dec,
            row.budget.delta_zz,
            row.budget.delta_coh_limit,
            row.budget.delta_osc,
            to_khz(row.budget.h_zz),
        ]);
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "error_budget")?;
    set.write_csv("", &table)?;
    set.write_plot_script(&gnuplot_lines(
        "error_budget.csv",
        "Gate error budget vs static ZZ",
        3,
        "static ZZ (MHz)",
        &[(4, "F"), (5, "dF_dec"), (6, "dF_zz"), (8, "dF_osc")],
        "fidelity / infidelity",
    ))?;
    set.write_meta(&ctx.metadata(
        "error-budget",
        serde_json::json!({
            "labels": rows.iter().map(|r| r.label.clone()).collect::<Vec<_>>(),
            "amplitudes_phi0": rows.iter().map(|r| r.amplitude).collect::<Vec<_>>(),
            "osc_negative_flags": rows.iter().map(|r| r.budget.osc_negative).collect::<Vec<_>>(),
        }),
    ))?;
    Ok(set.files().to_vec())
}

fn decay_fit(ctx: &RunContext, point: usize, n_max: u32) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let kind = ctx.kind();
    let op = ctx.operating_point(point)?;
    let cal =
        calibrate_gate(&params, &op, kind, ctx.config.gate.target_time(), ctx.config.gate.ramp())?;
    let n_list: Vec<u32> = (0..).map(|k| 1 + 2 * k).take_while(|&n| n <= n_max).collect();
    let noise = NoiseModel::from_device(&params);
    let points = experiments::repeat_gate_qpt(&params, &cal, kind, &noise, &n_list)?;
    let fit = fit_fidelity_decay(&points)?;

    let mut table = CsvTable::new(&["n_gates", "fidelity"]);
    for &(n, f) in &points {
        table.push(vec![n as f64, f]);
    }
    let mut set = ArtifactSet::new(&ctx.out_dir, "decay_fit")?;
    set.write_csv("", &table)?;
    set.write_plot_script(&gnuplot_lines(
        "decay_fit.csv",
        "QPT fidelity vs gate number",
        1,
        "N gates",
        &[(2, "fidelity")],
        "fidelity",
    ))?;
    set.write_meta(&ctx.metadata(
        "decay-fit",
        serde_json::json!({
            "point": op.label,
            "a": fit.a,
            "p": fit.p,
            "a_std_error": fit.a_std_error,
            "p_std_error": fit.p_std_error,
        }),
    ))?;
    Ok(set.files().to_vec())
}

fn calibrate(ctx: &RunContext, point: usize) -> Result<Vec<PathBuf>> {
    let params = ctx.device()?;
    let kind = ctx.kind();
    let op = ctx.operating_point(point)?;
    let cal =
        calibrate_gate(&params, &op, kind, ctx.config.gate.target_time(), ctx.config.gate.ramp())?;
    let t_swap = measured_swap_time(&params, &op, kind, &cal.pulse)?;

    let mut table = CsvTable::new(&[
        "bias_mv",
        "coupler_freq_ghz",
        "amplitude_phi0",
        "drive_freq_mhz",
        "swap_time_ns",
        "phase_corr_q1_rad",
        "phase_corr_q2_rad",
    ]);
    table.push(vec![
        op.bias_mv,
        to_ghz(op.coupler_freq),
        cal.pulse.amplitude,
        to_mhz(cal.pulse.omega_drive),
        to_ns(t_swap),
        cal.phase_corrections.0,
        cal.phase_corrections.1,
    ]);

    // population exchange under the calibrated pulse
    let series = couplersim::dynamics::simulate_population(
        &params,
        &cal.pulse,
        kind,
        &[1, 0, 0],
        &NoiseModel::from_device(&params),
        201,
    )?;
    let mut populations = CsvTable::new(&["time_ns", "pop_q1", "pop_q2", "pop_coupler"]);
    for k in 0..series.times.len() {
        populations.push(vec![
            to_ns(series.times[k]),
            series.pop_q1[k],
            series.pop_q2[k],
            series.pop_coupler[k],
        ]);
    }

    let mut set = ArtifactSet::new(&ctx.out_dir, "calibrate")?;
    set.write_csv("", &table)?;
    set.write_csv("_populations", &populations)?;
    set.write_plot_script(&gnuplot_lines(
        "calibrate_populations.csv",
        "Population exchange under the calibrated pulse",
        1,
        "time (ns)",
        &[(2, "P(Q1)"), (3, "P(Q2)"), (4, "P(coupler)")],
        "population",
    ))?;
    set.write_meta(&ctx.metadata(
        "calibrate",
        serde_json::json!({
            "point": op.label,
            "phase_flipped": cal.phase_flipped,
        }),
    ))?;
    Ok(set.files().to_vec())
}

/// Crosstalk-corrected biases for a requested (Q1, Q2, Coupler) mV vector
/// using the configured matrix (identity when absent).
pub fn corrected_biases(config: &RunConfig, requested_mv: [f64; 3]) -> Result<[f64; 3]> {
    let matrix = match &config.crosstalk {
        Some(ct) => couplersim::config::CrosstalkMatrix::new(ct.matrix)?,
        None => couplersim::config::CrosstalkMatrix::identity(),
    };
    if let Some(warning) = matrix.dominance_warning() {
        eprintln!("warning: {warning}");
    }
    Ok(matrix.apply(requested_mv))
}

/// Pauli basis order documentation string for sidecar metadata.
pub fn pauli_order_string() -> String {
    couplersim::tomography::pauli_labels().join(",")
}
