// temporary experiment: interferometer pipeline behavior (deleted before release)
use sli_core::lattice::*;
use sli_core::optimizer::*;
use sli_core::sensing::*;
use std::time::Instant;

#[test]
#[ignore]
fn interferometer_pipeline_study() {
    let lattice = LatticeConfig::rb87();
    let base = OptimizerConfig {
        seed: 424242,
        max_super_iterations: 10,
        max_evals_per_super: 400,
        target_error: 2.0,
        ..OptimizerConfig::default()
    };
    let mut rows = Vec::new();
    for n in 1..=5usize {
        let t0 = Instant::now();
        let result = optimize_interferometer(&lattice, &base, n).unwrap();
        let elapsed = t0.elapsed().as_secs_f64();
        let sens =
            classical_fisher_information(&lattice, &result.protocol, 0.0, 0.01, 1e4).unwrap();
        println!(
            "n={n}: T_I={:.1}ms stages={} converged={} half-split E={:.2}% recomb E={:.2}% | F={:.3e} δa={:.4} m/s² | {:.0}s",
            result.protocol.total_duration() * 1e3,
            result.stages.len(),
            result.converged,
            result.half_time_split_error,
            result.recombination_error,
            sens.fisher_information,
            sens.min_detectable,
            elapsed
        );
        for (i, s) in result.stages.iter().enumerate() {
            print!("  s{}:{:.2}%", i, s.best_error);
        }
        println!();
        rows.push((result.protocol.total_duration() * 1e3, sens.min_detectable));
        if n == 5 {
            // response scale: scan ±0.5
            let grid: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.1).collect();
            let scan = acceleration_scan(&lattice, &result.protocol, &grid).unwrap();
            for row in &scan {
                let p = row.result.as_ref().unwrap();
                println!(
                    "  a={:+.2}: P = [{:.3} {:.3} {:.3} {:.3} {:.3}]",
                    row.accel,
                    p.population(-2),
                    p.population(-1),
                    p.population(0),
                    p.population(1),
                    p.population(2)
                );
            }
        }
    }
    println!("\n(T_I ms, δa) table: {rows:?}");
    match sli_core::fitting::fit_scaling(&rows, sli_core::fitting::OffsetMode::Fixed(0.0)) {
        Ok(fit) => println!(
            "fixed-c fit: a={:.4} b={:.4}±{:.4} (converged {})",
            fit.amplitude,
            fit.exponent,
            fit.exponent_err,
            fit.converged()
        ),
        Err(e) => println!("fit failed: {e}"),
    }
}
