//! The named experiment pipelines behind each CLI subcommand.

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sli_core::constants::{AMPLIFIER_GAIN, EOM_RAD_PER_VOLT};
use sli_core::fitting::{fit_scaling, OffsetMode, ScalingFit};
use sli_core::lattice::{band_gap_frequency, ground_bloch_state};
use sli_core::optimizer::{optimize_interferometer, percent_error, TargetState};
use sli_core::sensing::{acceleration_scan, sensitivity_vs_interrogation};

use crate::config::ExperimentConfig;
use crate::formats::{
    file_sha256, fmt_f64, read_xy_table, write_optimization_log, write_sidecar_meta,
    ProtocolDocument, TsvWriter,
};

/// Distinguishes "wrong invocation" from "the numerics failed".
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(e) | CliError::Numerical(e) => format!("{e:#}"),
        }
    }
}

pub type CmdResult = std::result::Result<(), CliError>;

fn usage(err: anyhow::Error) -> CliError {
    CliError::Usage(err)
}

fn numerical(err: anyhow::Error) -> CliError {
    CliError::Numerical(err)
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn load_config(path: Option<&PathBuf>) -> std::result::Result<ExperimentConfig, CliError> {
    ExperimentConfig::load_or_default(path.map(|p| p.as_path())).map_err(usage)
}

pub fn cmd_optimize(
    config_path: Option<&PathBuf>,
    n: usize,
    out_dir_override: Option<&PathBuf>,
) -> CmdResult {
    let config = load_config(config_path)?;
    if n == 0 {
        return Err(usage(anyhow!("interferometer order --n must be at least 1")));
    }
    let out_dir = out_dir_override
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    ensure_out_dir(&out_dir).map_err(numerical)?;
    let lattice = config.lattice_config().map_err(usage)?;
    let optimizer = config.optimizer_config(config.seed).map_err(usage)?;
    let hash = config.content_hash();

    let started = Instant::now();
    let result = optimize_interferometer(&lattice, &optimizer, n)
        .map_err(|e| numerical(anyhow!(e)))?;
    let duration = started.elapsed().as_secs_f64();

    let doc = ProtocolDocument::from_optimization(
        &result,
        n,
        &hash,
        config.seed,
        optimizer.bias_accel,
    );
    let protocol_path = out_dir.join(format!("protocol_n{n}.toml"));
    doc.write(&protocol_path).map_err(numerical)?;
    write_optimization_log(&out_dir.join(format!("optimize_n{n}_log.jsonl")), &result.stages)
        .map_err(numerical)?;

    #[derive(Serialize)]
    struct Summary {
        config_sha256: String,
        seed: u64,
        interferometer_order: usize,
        converged: bool,
        bias_accel: f64,
        split_error: f64,
        half_time_split_error: f64,
        recombination_error: f64,
        stage_errors: Vec<f64>,
        total_evaluations: usize,
    }
    let summary = Summary {
        config_sha256: hash.clone(),
        seed: config.seed,
        interferometer_order: n,
        converged: result.converged,
        bias_accel: optimizer.bias_accel,
        split_error: result.stages[0].best_error,
        half_time_split_error: result.half_time_split_error,
        recombination_error: result.recombination_error,
        stage_errors: result.stages.iter().map(|s| s.best_error).collect(),
        total_evaluations: result.stages.iter().map(|s| s.evaluations.len()).sum(),
    };
    let summary_text = toml::to_string(&summary)
        .context("serializing summary")
        .map_err(numerical)?;
    std::fs::write(out_dir.join(format!("optimize_n{n}_summary.toml")), summary_text)
        .context("writing summary")
        .map_err(numerical)?;
    write_sidecar_meta(
        &out_dir.join(format!("optimize_n{n}.meta.toml")),
        "optimize",
        duration,
    )
    .map_err(numerical)?;

    println!(
        "optimize n={n}: split {:.3}%, half-time split {:.3}%, recombination {:.3}%, converged: {}",
        summary.split_error, summary.half_time_split_error, summary.recombination_error,
        result.converged,
    );
    println!("wrote {}", protocol_path.display());
    if result.converged {
        Ok(())
    } else {
        Err(numerical(anyhow!(
            "optimization did not reach the target error; partial artifacts written to {}",
            out_dir.display()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_scan(
    config_path: Option<&PathBuf>,
    protocol_path: &PathBuf,
    grid: Option<&String>,
    min: Option<f64>,
    max: Option<f64>,
    points: Option<usize>,
    out_dir_override: Option<&PathBuf>,
) -> CmdResult {
    let mut config = load_config(config_path)?;
    if let Some(v) = min {
        config.sensing.scan_min = v;
    }
    if let Some(v) = max {
        config.sensing.scan_max = v;
    }
    if let Some(v) = points {
        config.sensing.scan_points = v;
    }
    config.validate().map_err(usage)?;
    let accels: Vec<f64> = match grid {
        Some(csv) => csv
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| usage(anyhow!("bad grid value {s:?}: {e}"))))
            .collect::<std::result::Result<_, _>>()?,
        None => config.scan_grid(),
    };
    if accels.is_empty() {
        return Err(usage(anyhow!("scan grid is empty")));
    }

    let lattice = config.lattice_config().map_err(usage)?;
    let doc = ProtocolDocument::read(protocol_path).map_err(usage)?;
    let protocol = doc.to_protocol().map_err(usage)?;
    let out_dir = out_dir_override
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    ensure_out_dir(&out_dir).map_err(numerical)?;

    let started = Instant::now();
    let rows = acceleration_scan(&lattice, &protocol, &accels)
        .map_err(|e| numerical(anyhow!(e)))?;
    let duration = started.elapsed().as_secs_f64();

    let ground = TargetState::ground(lattice.measure_n);
    let mut table = TsvWriter::new(&config.content_hash());
    table.comment(&format!("protocol = {}", protocol_path.display()));
    table.comment(&format!("protocol_sha256 = {}", file_sha256(protocol_path).map_err(numerical)?));
    table.comment(&format!("bias_accel = {}", fmt_f64(doc.bias_accel)));
    let span = lattice.measure_n as i32;
    let mut names = vec!["accel_m_per_s2".to_string()];
    for m in -span..=span {
        names.push(format!("p_{m}"));
    }
    names.push("leak".into());
    names.push("ground_error_percent".into());
    names.push("status".into());
    table.columns(&names.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for row in &rows {
        let mut cells = vec![fmt_f64(row.accel)];
        match &row.result {
            Ok(dist) => {
                for m in -span..=span {
                    cells.push(fmt_f64(dist.population(m)));
                }
                cells.push(fmt_f64(dist.leak));
                let err = percent_error(dist, &ground)
                    .map(fmt_f64)
                    .unwrap_or_else(|_| "nan".into());
                cells.push(err);
                cells.push("ok".into());
            }
            Err(e) => {
                for _ in 0..(2 * span + 3) {
                    cells.push("nan".into());
                }
                cells.push(format!("error: {e}"));
            }
        }
        table.row(&cells);
    }
    let table_path = out_dir.join("scan.tsv");
    table.write(&table_path).map_err(numerical)?;
    write_sidecar_meta(&out_dir.join("scan.meta.toml"), "scan", duration)
        .map_err(numerical)?;
    println!("wrote {} ({} rows)", table_path.display(), rows.len());
    Ok(())
}

#[derive(Serialize)]
struct FitArtifact {
    config_sha256: String,
    seed: u64,
    input_table_sha256: String,
    c_mode: String,
    amplitude: f64,
    exponent: f64,
    offset: f64,
    amplitude_err: f64,
    exponent_err: f64,
    offset_err: f64,
    residual_norm: f64,
    converged: bool,
}

fn write_fit(
    fit: &ScalingFit,
    c_mode: &str,
    config: &ExperimentConfig,
    table_sha256: &str,
    path: &Path,
) -> Result<()> {
    let artifact = FitArtifact {
        config_sha256: config.content_hash(),
        seed: config.seed,
        input_table_sha256: table_sha256.to_string(),
        c_mode: c_mode.to_string(),
        amplitude: fit.amplitude,
        exponent: fit.exponent,
        offset: fit.offset,
        amplitude_err: fit.amplitude_err,
        exponent_err: fit.exponent_err,
        offset_err: fit.offset_err,
        residual_norm: fit.residual_norm,
        converged: fit.converged(),
    };
    let text = toml::to_string(&artifact).context("serializing fit")?;
    std::fs::write(path, text).with_context(|| format!("writing fit {}", path.display()))?;
    Ok(())
}

pub fn cmd_sensitivity(
    config_path: Option<&PathBuf>,
    protocol_paths: &[PathBuf],
    out_dir_override: Option<&PathBuf>,
) -> CmdResult {
    let config = load_config(config_path)?;
    let free_mode = config.fit.c_mode == "free";
    let needed = if free_mode { 4 } else { 3 };
    if protocol_paths.len() < needed {
        return Err(usage(anyhow!(
            "sensitivity needs at least {needed} protocols for a {} fit, got {}",
            config.fit.c_mode,
            protocol_paths.len()
        )));
    }
    let lattice = config.lattice_config().map_err(usage)?;
    let out_dir = out_dir_override
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    ensure_out_dir(&out_dir).map_err(numerical)?;

    let mut protocols = Vec::with_capacity(protocol_paths.len());
    for path in protocol_paths {
        let doc = ProtocolDocument::read(path).map_err(usage)?;
        let protocol = doc.to_protocol().map_err(usage)?;
        protocols.push((protocol, doc.bias_accel));
    }

    let noise = config.sensing.noise_enabled.then(|| config.noise_estimation());
    let delta_a = if config.sensing.noise_enabled {
        config.sensing.noise_delta_a
    } else {
        config.sensing.delta_a
    };
    let started = Instant::now();
    let rows = sensitivity_vs_interrogation(
        &lattice,
        &protocols,
        delta_a,
        config.sensing.atom_number,
        noise.as_ref(),
    )
    .map_err(|e| numerical(anyhow!(e)))?;
    let duration = started.elapsed().as_secs_f64();

    let mut table = TsvWriter::new(&config.content_hash());
    table.comment(&format!("delta_a = {}", fmt_f64(delta_a)));
    table.comment(&format!("atom_number = {}", fmt_f64(config.sensing.atom_number)));
    table.comment(&format!("noise_enabled = {}", config.sensing.noise_enabled));
    table.columns(&[
        "interrogation_time_s",
        "min_detectable_accel_m_per_s2",
        "std_error",
        "fisher_information",
        "operating_accel_m_per_s2",
        "resolvable",
    ]);
    for row in &rows {
        table.row(&[
            fmt_f64(row.interrogation_time),
            fmt_f64(row.min_detectable),
            fmt_f64(row.std_error),
            fmt_f64(row.fisher_information),
            fmt_f64(row.operating_accel),
            row.resolvable.to_string(),
        ]);
    }
    let table_path = out_dir.join("sensitivity.tsv");
    table.write(&table_path).map_err(numerical)?;

    let fit_rows: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.resolvable && r.min_detectable.is_finite())
        .map(|r| (r.interrogation_time * 1e3, r.min_detectable))
        .collect();
    let mode = if free_mode {
        OffsetMode::Free
    } else {
        OffsetMode::Fixed(config.fit.c_value)
    };
    let fit = fit_scaling(&fit_rows, mode).map_err(|e| numerical(anyhow!(e)))?;
    let fit_path = out_dir.join("scaling_fit.toml");
    let table_hash = file_sha256(&table_path).map_err(numerical)?;
    write_fit(&fit, &config.fit.c_mode, &config, &table_hash, &fit_path).map_err(numerical)?;
    write_sidecar_meta(&out_dir.join("sensitivity.meta.toml"), "sensitivity", duration)
        .map_err(numerical)?;

    println!(
        "sensitivity: {} rows; fit b = {:.3} ± {:.3}, c = {} ({})",
        rows.len(),
        fit.exponent,
        fit.exponent_err,
        fmt_f64(fit.offset),
        config.fit.c_mode
    );
    println!("wrote {} and {}", table_path.display(), fit_path.display());
    Ok(())
}

pub fn cmd_fit(
    config_path: Option<&PathBuf>,
    table_path: &PathBuf,
    c_mode: Option<&String>,
    c_value: Option<f64>,
    out_dir_override: Option<&PathBuf>,
) -> CmdResult {
    let mut config = load_config(config_path)?;
    if let Some(mode) = c_mode {
        config.fit.c_mode = mode.clone();
    }
    if let Some(value) = c_value {
        config.fit.c_value = value;
    }
    config.validate().map_err(usage)?;

    // columns: interrogation time (s), min detectable acceleration
    let raw = read_xy_table(table_path, 0, 1).map_err(usage)?;
    let rows: Vec<(f64, f64)> = raw
        .into_iter()
        .filter(|(t, y)| t.is_finite() && y.is_finite())
        .map(|(t, y)| (t * 1e3, y))
        .collect();
    let mode = match config.fit.c_mode.as_str() {
        "free" => OffsetMode::Free,
        _ => OffsetMode::Fixed(config.fit.c_value),
    };
    let fit = fit_scaling(&rows, mode).map_err(|e| usage(anyhow!(e)))?;
    let out_dir = out_dir_override
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    ensure_out_dir(&out_dir).map_err(numerical)?;
    let fit_path = out_dir.join("scaling_fit.toml");
    let table_hash = file_sha256(table_path).map_err(numerical)?;
    write_fit(&fit, &config.fit.c_mode, &config, &table_hash, &fit_path).map_err(numerical)?;
    println!(
        "fit: b = {:.3} ± {:.3}, a = {}, c = {} ({}); wrote {}",
        fit.exponent,
        fit.exponent_err,
        fmt_f64(fit.amplitude),
        fmt_f64(fit.offset),
        config.fit.c_mode,
        fit_path.display()
    );
    Ok(())
}

pub fn cmd_export_waveform(
    config_path: Option<&PathBuf>,
    protocol_path: &PathBuf,
    sample_rate: Option<f64>,
    out_file: Option<&PathBuf>,
) -> CmdResult {
    let config = load_config(config_path)?;
    let rate = sample_rate.unwrap_or(config.export.sample_rate);
    let limit = config.export.awg_voltage_limit;
    let doc = ProtocolDocument::read(protocol_path).map_err(usage)?;
    let protocol = doc.to_protocol().map_err(usage)?;
    let series = protocol.sample(rate).map_err(|e| usage(anyhow!(e)))?;

    let volts_per_rad = 1.0 / (EOM_RAD_PER_VOLT * AMPLIFIER_GAIN);
    let mut peak: (f64, f64) = (0.0, 0.0);
    for &(t, phase) in &series {
        let v = phase * volts_per_rad;
        if v.abs() > peak.1.abs() {
            peak = (t, v);
        }
    }
    if peak.1.abs() > limit {
        return Err(numerical(anyhow!(
            "waveform exceeds the ±{limit} V generator range: {:.5} V at t = {:.9e} s",
            peak.1,
            peak.0
        )));
    }

    let mut table = TsvWriter::new(&config.content_hash());
    table.comment(&format!("protocol_sha256 = {}", file_sha256(protocol_path).map_err(numerical)?));
    table.comment(&format!("eom_rad_per_volt = {EOM_RAD_PER_VOLT}"));
    table.comment(&format!("amplifier_gain = {AMPLIFIER_GAIN}"));
    table.comment(&format!("sample_rate_hz = {}", fmt_f64(rate)));
    table.columns(&["time_s", "phase_rad", "awg_volts"]);
    for &(t, phase) in &series {
        table.row(&[
            format!("{t:.14e}"),
            fmt_f64(phase),
            fmt_f64(phase * volts_per_rad),
        ]);
    }
    let default_out = PathBuf::from(&config.output_dir).join("waveform.tsv");
    let path = out_file.cloned().unwrap_or(default_out);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent).map_err(numerical)?;
        }
    }
    table.write(&path).map_err(numerical)?;
    println!(
        "wrote {} ({} samples, peak {:.5} V)",
        path.display(),
        series.len(),
        peak.1
    );
    Ok(())
}

pub fn cmd_ground_state(
    config_path: Option<&PathBuf>,
    out_dir_override: Option<&PathBuf>,
) -> CmdResult {
    let config = load_config(config_path)?;
    let lattice = config.lattice_config().map_err(usage)?;
    let state = ground_bloch_state(&lattice).map_err(|e| numerical(anyhow!(e)))?;
    let gap = band_gap_frequency(&lattice).map_err(|e| numerical(anyhow!(e)))?;

    let out_dir = out_dir_override
        .cloned()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    ensure_out_dir(&out_dir).map_err(numerical)?;
    let mut table = TsvWriter::new(&config.content_hash());
    table.comment(&format!("recoil_frequency_hz = {}", fmt_f64(lattice.recoil_frequency())));
    table.comment(&format!("band_gap_frequency_hz = {}", fmt_f64(gap)));
    table.comment(&format!(
        "harmonic_band_frequency_hz = {}",
        fmt_f64(lattice.harmonic_band_frequency())
    ));
    table.columns(&["n", "momentum_units_2hbar_kl", "population"]);
    for m in -(lattice.n_max as i32)..=(lattice.n_max as i32) {
        table.row(&[m.to_string(), m.to_string(), fmt_f64(state.population(m))]);
    }
    let path = out_dir.join("ground_state.tsv");
    table.write(&path).map_err(numerical)?;
    println!(
        "E_r/h = {:.1} Hz, band 0->1 gap = {:.1} Hz (harmonic estimate {:.1} Hz)",
        lattice.recoil_frequency(),
        gap,
        lattice.harmonic_band_frequency()
    );
    println!("wrote {}", path.display());
    Ok(())
}
