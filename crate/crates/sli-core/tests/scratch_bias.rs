// temporary experiment: bias-seed scan + spread curve + criterion-9 recheck
// (deleted before release)
use sli_core::lattice::*;
use sli_core::optimizer::*;
use sli_core::protocol::*;
use sli_core::sensing::*;

fn bias_check(seeds: &[u64]) {
    let lattice = LatticeConfig::rb87();
    for &seed in seeds {
        let cfg = OptimizerConfig {
            seed,
            bias_accel: -0.71,
            max_super_iterations: 10,
            max_evals_per_super: 400,
            target_error: 2.0,
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
fn bias_seed_scan_a() {
    bias_check(&[2, 3, 5, 13]);
}

#[test]
#[ignore]
fn bias_seed_scan_b() {
    bias_check(&[42, 55, 77, 99]);
}

#[test]
#[ignore]
fn spread_curve_and_zero_noise() {
    let lattice = LatticeConfig::rb87();
    let base = OptimizerConfig {
        seed: 9,
        max_super_iterations: 10,
        max_evals_per_super: 400,
        target_error: 2.0,
        ..OptimizerConfig::default()
    };
    let split_result = optimize_interferometer(&lattice, &base, 1).unwrap();
    let split_only = ShakingProtocol::from_segments(vec![(
        SegmentLabel::Split,
        split_result.protocol.segments()[0].1.clone(),
    )])
    .unwrap();
    let split_target = TargetState::split(2);
    for q_spread in [0.0, 0.05, 0.1, 0.15, 0.2, 0.25] {
        let p = ensemble_populations(&lattice, &split_only, 0.0, q_spread, 256, 4242).unwrap();
        println!(
            "q_spread {q_spread}: split error {:.3}%",
            percent_error(&p, &split_target).unwrap()
        );
    }

    // criterion 9 at the calibrated noise config, seed-9 zero protocol
    let zero_protocol = ShakingProtocol::from_segments(vec![(
        SegmentLabel::Propagate,
        WaveformSegment::zero(2e-3),
    )])
    .unwrap();
    let delta = 0.1;
    let n_at = 1e4;
    let z0 = run_with_signal(&lattice, &zero_protocol, 0.0).unwrap();
    let z1 = run_with_signal(&lattice, &zero_protocol, delta).unwrap();
    for (offset, sigma) in [(0.002, 0.015), (0.002, 0.02), (0.01, 0.02)] {
        let noise = NoiseModel { atom_number: n_at, offset, read_sigma: sigma, seed: 0 };
        let zero_est =
            noisy_cfi_estimate(&z0, &z1, delta, n_at, &noise, 100, 41 << 32).unwrap();
        let floor_est =
            noisy_cfi_estimate(&z0, &z0, delta, n_at, &noise, 100, 43 << 32).unwrap();
        let gap = zero_est.fisher_information - floor_est.fisher_information;
        let band = 2.0 * (zero_est.fisher_std_error + floor_est.fisher_std_error);
        println!(
            "off={offset} σ={sigma}: zero F={:.0}±{:.0} floor F={:.0}±{:.0} gap={gap:.0} band={band:.0} ok={}",
            zero_est.fisher_information,
            zero_est.fisher_std_error,
            floor_est.fisher_information,
            floor_est.fisher_std_error,
            gap <= band,
        );
    }
}
