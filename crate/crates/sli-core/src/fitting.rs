//! Nonlinear least squares and the sensitivity scaling-law fit.
//!
//! A small Levenberg-Marquardt engine (damped Gauss-Newton with adaptive
//! damping and a finite-difference Jacobian) drives the power-law fit
//! `f(T_I) = a·T_I^(-b) + c` used to extract the sensitivity scaling exponent
//! from a `(T_I, δa)` table, with the offset either free or pinned to an
//! independently measured noise floor.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{invert_real, solve_real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {needed} points for {free} free parameters, got {got}")]
    InsufficientData { needed: usize, free: usize, got: usize },
    #[error("data, parameters, and mask must be finite and consistently sized")]
    MalformedInput,
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
}

/// How the fit finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    /// Parameter change or gradient fell below tolerance.
    Converged,
    /// Iteration budget exhausted.
    MaxIterations,
    /// The damped normal equations stayed singular at maximum damping.
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Relative parameter-change convergence threshold.
    pub param_tol: f64,
    /// Infinity-norm gradient convergence threshold.
    pub grad_tol: f64,
    /// Relative central-difference step for the Jacobian.
    pub rel_step: f64,
    pub lambda_init: f64,
    pub lambda_factor: f64,
    pub lambda_max: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            param_tol: 1e-10,
            grad_tol: 1e-12,
            rel_step: 1e-6,
            lambda_init: 1e-3,
            lambda_factor: 10.0,
            lambda_max: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Standard errors from the covariance of the converged Jacobian,
    /// scaled by `χ²/dof` when there are surplus points; zero for fixed
    /// parameters.
    pub std_errors: Vec<f64>,
    /// `√(Σ rᵢ²)` at the returned parameters.
    pub residual_norm: f64,
    pub status: FitStatus,
    pub iterations: usize,
}

impl LmResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// One `(x, y, σ_y)` observation.
pub type DataPoint = (f64, f64, f64);

fn chi_sq<M: Fn(&[f64], f64) -> f64>(model: &M, params: &[f64], data: &[DataPoint]) -> f64 {
    data.iter()
        .map(|&(x, y, sigma)| {
            let r = (y - model(params, x)) / sigma;
            r * r
        })
        .sum()
}

/// Damped Gauss-Newton (Levenberg-Marquardt) minimization of
/// `Σ ((yᵢ - f(p, xᵢ))/σᵢ)²`.
///
/// `fixed[j]` pins parameter `j` at its initial value; pinned entries come
/// back bit-identical. The Jacobian is taken by central differences, so the
/// model only needs to be evaluable. The returned residual never exceeds the
/// residual at the initial guess.
pub fn levenberg_marquardt<M>(
    model: M,
    data: &[DataPoint],
    init: &[f64],
    fixed: &[bool],
    config: &LmConfig,
) -> Result<LmResult, FitError>
where
    M: Fn(&[f64], f64) -> f64,
{
    if init.is_empty() || init.len() != fixed.len() {
        return Err(FitError::MalformedInput);
    }
    let finite = init.iter().all(|p| p.is_finite())
        && data
            .iter()
            .all(|&(x, y, s)| x.is_finite() && y.is_finite() && s.is_finite() && s > 0.0);
    if !finite {
        return Err(FitError::MalformedInput);
    }
    if config.max_iterations == 0 || config.param_tol <= 0.0 || config.rel_step <= 0.0 {
        return Err(FitError::InvalidConfig("tolerances and budgets must be positive"));
    }
    let free: Vec<usize> = (0..init.len()).filter(|&j| !fixed[j]).collect();
    let n_free = free.len();
    if n_free == 0 {
        return Err(FitError::InvalidConfig("at least one parameter must be free"));
    }
    if data.len() < n_free {
        return Err(FitError::InsufficientData {
            needed: n_free,
            free: n_free,
            got: data.len(),
        });
    }

    let m = data.len();
    let mut params = init.to_vec();
    let mut chi = chi_sq(&model, &params, data);
    let mut lambda = config.lambda_init;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;

    // residual Jacobian J[i][j] = ∂rᵢ/∂p_free[j], rᵢ = (yᵢ - f)/σᵢ
    let mut jacobian = vec![0.0; m * n_free];
    let mut residuals = vec![0.0; m];

    let fill = |params: &[f64], jacobian: &mut [f64], residuals: &mut [f64]| {
        for (i, &(x, y, sigma)) in data.iter().enumerate() {
            residuals[i] = (y - model(params, x)) / sigma;
        }
        let mut probe = params.to_vec();
        for (col, &j) in free.iter().enumerate() {
            let h = config.rel_step * params[j].abs().max(1e-3);
            probe[j] = params[j] + h;
            let mut plus = vec![0.0; m];
            for (i, &(x, _, _)) in data.iter().enumerate() {
                plus[i] = model(&probe, x);
            }
            probe[j] = params[j] - h;
            for (i, &(x, _, sigma)) in data.iter().enumerate() {
                let minus = model(&probe, x);
                // ∂r/∂p = -∂f/∂p / σ
                jacobian[i * n_free + col] = -(plus[i] - minus) / (2.0 * h * sigma);
            }
            probe[j] = params[j];
        }
    };

    for iter in 0..config.max_iterations {
        iterations = iter + 1;
        fill(&params, &mut jacobian, &mut residuals);

        // normal equations: (JᵀJ + λ·diag(JᵀJ)) δ = -Jᵀr
        let mut jtj = vec![0.0; n_free * n_free];
        let mut jtr = vec![0.0; n_free];
        for i in 0..m {
            for a in 0..n_free {
                let ja = jacobian[i * n_free + a];
                jtr[a] += ja * residuals[i];
                for b in a..n_free {
                    jtj[a * n_free + b] += ja * jacobian[i * n_free + b];
                }
            }
        }
        for a in 0..n_free {
            for b in 0..a {
                jtj[a * n_free + b] = jtj[b * n_free + a];
            }
        }

        let grad_norm = jtr.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_norm < config.grad_tol {
            status = FitStatus::Converged;
            break;
        }

        let mut stepped = false;
        while lambda <= config.lambda_max {
            let mut damped = jtj.clone();
            for a in 0..n_free {
                let d = damped[a * n_free + a];
                damped[a * n_free + a] = d + lambda * d.max(1e-30);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(delta) = solve_real(&damped, &rhs, n_free) else {
                lambda *= config.lambda_factor;
                continue;
            };
            let mut trial = params.clone();
            for (col, &j) in free.iter().enumerate() {
                trial[j] += delta[col];
            }
            let trial_chi = chi_sq(&model, &trial, data);
            if trial_chi.is_finite() && trial_chi < chi {
                let small_step = free.iter().enumerate().all(|(col, &j)| {
                    delta[col].abs() <= config.param_tol * (params[j].abs() + config.param_tol)
                });
                params = trial;
                chi = trial_chi;
                lambda = (lambda / config.lambda_factor).max(1e-12);
                stepped = true;
                if small_step {
                    status = FitStatus::Converged;
                }
                break;
            }
            lambda *= config.lambda_factor;
        }
        if !stepped {
            status = FitStatus::Singular;
            break;
        }
        if status == FitStatus::Converged {
            break;
        }
    }

    // covariance from the Jacobian at the returned parameters
    fill(&params, &mut jacobian, &mut residuals);
    let mut jtj = vec![0.0; n_free * n_free];
    for i in 0..m {
        for a in 0..n_free {
            for b in 0..n_free {
                jtj[a * n_free + b] += jacobian[i * n_free + a] * jacobian[i * n_free + b];
            }
        }
    }
    let scale = if m > n_free { chi / (m - n_free) as f64 } else { 1.0 };
    let mut std_errors = vec![0.0; init.len()];
    if let Some(cov) = invert_real(&jtj, n_free) {
        for (col, &j) in free.iter().enumerate() {
            let var = cov[col * n_free + col] * scale;
            std_errors[j] = if var > 0.0 { var.sqrt() } else { 0.0 };
        }
    }

    Ok(LmResult {
        params,
        std_errors,
        residual_norm: chi.sqrt(),
        status,
        iterations,
    })
}

/// Offset handling for the scaling-law fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetMode {
    /// Pin `c` to an independently measured value and fit only `a` and `b`.
    Fixed(f64),
    Free,
}

/// Result of fitting `f(T_I) = a·T_I^(-b) + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub offset: f64,
    pub amplitude_err: f64,
    pub exponent_err: f64,
    pub offset_err: f64,
    pub offset_fixed: bool,
    pub residual_norm: f64,
    pub status: FitStatus,
}

impl ScalingFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// Evaluate the scaling model `a·T^(-b) + c`.
pub fn scaling_model(params: &[f64], t: f64) -> f64 {
    params[0] * t.powf(-params[1]) + params[2]
}

/// Fit the sensitivity scaling law to a `(T_I, δa)` table.
///
/// Needs 3 rows with the offset fixed, 4 with it free. Unweighted (σ = 1).
/// Initial guess: `b₀ = 2` (the expected square-law), `c₀` from the mode, and
/// `a₀` lifted from the first data point.
pub fn fit_scaling(table: &[(f64, f64)], offset: OffsetMode) -> Result<ScalingFit, FitError> {
    let needed = match offset {
        OffsetMode::Fixed(_) => 3,
        OffsetMode::Free => 4,
    };
    if table.len() < needed {
        return Err(FitError::InsufficientData {
            needed,
            free: needed - 1,
            got: table.len(),
        });
    }
    if table
        .iter()
        .any(|&(t, y)| !(t.is_finite() && t > 0.0 && y.is_finite()))
    {
        return Err(FitError::MalformedInput);
    }

    let (c0, fixed_c) = match offset {
        OffsetMode::Fixed(value) => (value, true),
        OffsetMode::Free => {
            let min_y = table.iter().map(|&(_, y)| y).fold(f64::INFINITY, f64::min);
            (0.5 * min_y.max(0.0), false)
        }
    };
    let b0 = 2.0;
    let (t0, y0) = table[0];
    let mut a0 = (y0 - c0) * t0.powf(b0);
    if !(a0.is_finite() && a0 > 0.0) {
        a0 = y0.abs().max(1e-12) * t0.powf(b0);
    }

    let data: Vec<DataPoint> = table.iter().map(|&(t, y)| (t, y, 1.0)).collect();
    let result = levenberg_marquardt(
        scaling_model,
        &data,
        &[a0, b0, c0],
        &[false, false, fixed_c],
        &LmConfig::default(),
    )?;

    Ok(ScalingFit {
        amplitude: result.params[0],
        exponent: result.params[1],
        offset: result.params[2],
        amplitude_err: result.std_errors[0],
        exponent_err: result.std_errors[1],
        offset_err: result.std_errors[2],
        offset_fixed: fixed_c,
        residual_norm: result.residual_norm,
        status: result.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn recovers_exact_linear_data() {
        let data: Vec<DataPoint> =
            (0..8).map(|i| (i as f64, 2.0 * i as f64 + 1.0, 1.0)).collect();
        let model = |p: &[f64], x: f64| p[0] * x + p[1];
        let out = levenberg_marquardt(
            model,
            &data,
            &[0.5, -0.5],
            &[false, false],
            &LmConfig::default(),
        )
        .unwrap();
        assert!(out.converged());
        assert_abs_diff_eq!(out.params[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.params[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn recovers_power_law_with_fixed_offset() {
        // δa = 2.0·T⁻² + 0.014 on the T = 0.4..2.0 grid, offset pinned
        let table: Vec<(f64, f64)> = (1..=5)
            .map(|n| {
                let t = 0.4 * n as f64;
                (t, 2.0 * t.powf(-2.0) + 0.014)
            })
            .collect();
        let fit = fit_scaling(&table, OffsetMode::Fixed(0.014)).unwrap();
        assert!(fit.converged());
        assert_abs_diff_eq!(fit.amplitude, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.exponent, 2.0, epsilon = 1e-6);
        assert_eq!(fit.offset, 0.014);
        assert_eq!(fit.offset_err, 0.0);
    }

    #[test]
    fn recovers_power_law_with_free_offset_from_clean_data() {
        let table: Vec<(f64, f64)> = (1..=6)
            .map(|n| {
                let t = 0.4 * n as f64;
                (t, 1.3 * t.powf(-2.0))
            })
            .collect();
        let fit = fit_scaling(&table, OffsetMode::Free).unwrap();
        assert!(fit.converged());
        assert_abs_diff_eq!(fit.amplitude, 1.3, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.exponent, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.offset, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn exponential_decay_matches_grid_search_oracle() {
        let truth = 1.37;
        let data: Vec<DataPoint> = (0..12)
            .map(|i| {
                let x = 0.25 * i as f64;
                (x, (-truth * x).exp(), 1.0)
            })
            .collect();
        let model = |p: &[f64], x: f64| (-p[0] * x).exp();

        // brute-force oracle: three rounds of grid refinement
        let objective = |k: f64| -> f64 {
            data.iter()
                .map(|&(x, y, _)| {
                    let r = y - (-k * x).exp();
                    r * r
                })
                .sum()
        };
        let mut lo = 0.0;
        let mut hi = 5.0;
        let mut best_k = 0.0;
        for _ in 0..8 {
            let mut best = f64::INFINITY;
            for j in 0..=400 {
                let k = lo + (hi - lo) * j as f64 / 400.0;
                let v = objective(k);
                if v < best {
                    best = v;
                    best_k = k;
                }
            }
            let span = (hi - lo) / 100.0;
            lo = best_k - span;
            hi = best_k + span;
        }

        let out =
            levenberg_marquardt(model, &data, &[0.3], &[false], &LmConfig::default()).unwrap();
        assert!(out.converged());
        assert_abs_diff_eq!(out.params[0], best_k, epsilon = 1e-6);
        assert_abs_diff_eq!(out.params[0], truth, epsilon = 1e-8);
    }

    #[test]
    fn fixed_parameters_come_back_bit_identical() {
        let table: Vec<DataPoint> = (1..=5)
            .map(|n| {
                let t = 0.4 * n as f64;
                (t, 2.0 * t.powf(-1.8) + 0.02, 1.0)
            })
            .collect();
        let c_pin = 0.02f64;
        let out = levenberg_marquardt(
            scaling_model,
            &table,
            &[1.0, 2.0, c_pin],
            &[false, false, true],
            &LmConfig::default(),
        )
        .unwrap();
        assert_eq!(out.params[2].to_bits(), c_pin.to_bits());
        assert_relative_eq!(out.params[1], 1.8, max_relative = 1e-6);
    }

    #[test]
    fn residual_never_exceeds_initial_guess() {
        let table: Vec<(f64, f64)> = vec![
            (0.4, 13.1),
            (0.8, 3.4),
            (1.2, 1.38),
            (1.6, 0.81),
            (2.0, 0.52),
        ];
        let data: Vec<DataPoint> = table.iter().map(|&(t, y)| (t, y, 1.0)).collect();
        let init = [2.0, 2.0, 0.0];
        let init_chi = chi_sq(&scaling_model, &init, &data);
        let out = levenberg_marquardt(
            scaling_model,
            &data,
            &init,
            &[false, false, true],
            &LmConfig::default(),
        )
        .unwrap();
        assert!(out.residual_norm * out.residual_norm <= init_chi + 1e-12);
    }

    #[test]
    fn exponent_is_invariant_under_time_unit_rescaling() {
        // same table in milliseconds and in seconds; b must agree
        let table_ms: Vec<(f64, f64)> = vec![
            (0.4, 12.9),
            (0.8, 3.52),
            (1.2, 1.41),
            (1.6, 0.86),
            (2.0, 0.55),
        ];
        let table_s: Vec<(f64, f64)> =
            table_ms.iter().map(|&(t, y)| (t * 1e-3, y)).collect();
        let fit_ms = fit_scaling(&table_ms, OffsetMode::Fixed(0.0)).unwrap();
        let fit_s = fit_scaling(&table_s, OffsetMode::Fixed(0.0)).unwrap();
        assert!(fit_ms.converged() && fit_s.converged());
        assert!(
            (fit_ms.exponent - fit_s.exponent).abs() < 1e-9,
            "b(ms) = {}, b(s) = {}",
            fit_ms.exponent,
            fit_s.exponent
        );
        // amplitude rescales by (1000)^b, the exponent does not
        assert_relative_eq!(
            fit_s.amplitude,
            fit_ms.amplitude * 1e-3f64.powf(fit_ms.exponent),
            max_relative = 1e-6
        );
    }

    #[test]
    fn insufficient_rows_are_rejected() {
        let rows = vec![(0.4, 1.0), (0.8, 0.5)];
        assert!(matches!(
            fit_scaling(&rows, OffsetMode::Fixed(0.0)),
            Err(FitError::InsufficientData { .. })
        ));
        let rows3 = vec![(0.4, 1.0), (0.8, 0.5), (1.2, 0.3)];
        assert!(fit_scaling(&rows3, OffsetMode::Fixed(0.0)).is_ok());
        assert!(matches!(
            fit_scaling(&rows3, OffsetMode::Free),
            Err(FitError::InsufficientData { .. })
        ));
    }
}
