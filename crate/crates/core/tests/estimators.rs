use irand_core::inference::{irand_estimate, IrandConfig};
use irand_core::mediation::{mediation_report, MediationSpec};
use irand_core::simulation::{simulate_mediation_panel, simulate_panel, DgpConfig, MediationDgp};
use proptest::prelude::*;

fn config(m: usize, seed: u64) -> IrandConfig {
    IrandConfig { m, s: 0, seed, ..IrandConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outcome_shift_leaves_estimate_unchanged(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let panel = simulate_panel(&DgpConfig::lcd_like(60, 0.5, seed)).unwrap();
        let spec = panel.schema().analysis_spec();
        let y = panel.column_index("Y").unwrap();
        let shifted = panel
            .with_column("Y2", irand_core::panel::VariableKind::Continuous, |row| row[y].map(|v| v + shift))
            .unwrap();
        let mut spec2 = spec.clone();
        spec2.outcome = "Y2".into();
        let a = irand_estimate(&panel, &spec, &config(4, seed)).unwrap().mean_ate;
        let b = irand_estimate(&shifted, &spec2, &config(4, seed)).unwrap().mean_ate;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn outcome_scale_scales_estimate(seed in 0u64..1000, c in 0.1f64..10.0) {
        let panel = simulate_panel(&DgpConfig::bmi_like(60, 0.5, seed)).unwrap();
        let spec = panel.schema().analysis_spec();
        let y = panel.column_index("Y").unwrap();
        let scaled = panel
            .with_column("Y2", irand_core::panel::VariableKind::Continuous, |row| row[y].map(|v| v * c))
            .unwrap();
        let mut spec2 = spec.clone();
        spec2.outcome = "Y2".into();
        let a = irand_estimate(&panel, &spec, &config(4, seed)).unwrap().mean_ate;
        let b = irand_estimate(&scaled, &spec2, &config(4, seed)).unwrap().mean_ate;
        prop_assert!((a * c - b).abs() < 1e-9 * (1.0 + b.abs()));
    }
}

#[test]
fn noise_mediator_carries_no_effect() {
    let seeds = 30;
    let mut indirect = 0.0;
    let mut direct = 0.0;
    for seed in 0..seeds {
        let dgp = MediationDgp {
            n: 300,
            delta: 1.0,
            gamma: 0.0,
            eta: 0.0,
            beta: -1.0,
            zeta: 0.0,
            sigma: 0.5,
            mediator_sigma: 1.0,
            seed,
        };
        let panel = simulate_mediation_panel(&dgp).unwrap();
        let mut spec = MediationSpec::new("T", &["X1"], "M", "Y");
        spec.config.m = 10;
        spec.config.s = 0;
        spec.config.seed = seed;
        let r = mediation_report(&panel, &spec).unwrap();
        indirect += r.indirect.ate;
        direct += r.direct.ate;
    }
    let (indirect, direct) = (indirect / seeds as f64, direct / seeds as f64);
    assert!(indirect.abs() < 0.05, "indirect {indirect}");
    assert!((direct - 1.0).abs() < 0.05, "direct {direct}");
}

#[test]
fn more_subsamples_do_not_move_the_estimate_much() {
    let panel = simulate_panel(&DgpConfig::lcd_like(200, 0.5, 4)).unwrap();
    let spec = panel.schema().analysis_spec();
    let a = irand_estimate(&panel, &spec, &config(20, 1)).unwrap().mean_ate;
    let b = irand_estimate(&panel, &spec, &config(80, 2)).unwrap().mean_ate;
    assert!((a - b).abs() < 0.1, "{a} vs {b}");
}
