// temporary experiment: wider bias-seed scan (deleted before release)
use sli_core::lattice::*;
use sli_core::optimizer::*;
use sli_core::sensing::*;

fn bias_check(seeds: &[u64]) {
    let lattice = LatticeConfig::rb87();
    for &seed in seeds {
        let cfg = OptimizerConfig {
            seed,
            bias_accel: -0.71,
            max_super_iterations: 14,
            max_evals_per_super: 400,
            target_error: 1.0,
            ..OptimizerConfig::default()
        };
        let biased = optimize_interferometer(&lattice, &cfg, 5).unwrap();
        let grid: Vec<f64> = (-4..=4).map(|k| -0.71 + k as f64 * 0.1).collect();
        let scan = acceleration_scan(&lattice, &biased.protocol, &grid).unwrap();
        let ground_target = TargetState::ground(2);
        let errors: Vec<f64> = scan
            .iter()
            .map(|row| percent_error(row.result.as_ref().unwrap(), &ground_target).unwrap())
            .collect();
        let min_idx = errors
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        println!(
            "bias seed {seed}: center={:.2}% min_idx={min_idx} ok={} errors={:?}",
            errors[4],
            min_idx == 4,
            errors.iter().map(|e| (e * 100.0).round() / 100.0).collect::<Vec<_>>(),
        );
    }
}

#[test]
#[ignore]
fn bias_scan_c() {
    bias_check(&[101, 103, 107, 109, 113, 127, 131, 137]);
}

#[test]
#[ignore]
fn bias_scan_d() {
    bias_check(&[139, 149, 151, 157, 163, 167, 173, 179]);
}
