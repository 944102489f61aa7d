use irand_core::panel::{load_panel, save_panel};
use irand_core::synth::{bundled_summary, synthesize_panel, SynthOptions};

#[test]
fn synthesized_panel_survives_save_and_load() {
    let mut options = SynthOptions::new(256, 11);
    options.missingness = true;
    let panel = synthesize_panel(&bundled_summary(), &options).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    save_panel(&panel, &path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 512);

    let back = load_panel(&path, panel.schema().clone()).unwrap();
    assert_eq!(back.variables(), panel.variables());
    assert_eq!(back.n_individuals(), panel.n_individuals());
    for (a, b) in panel.individuals().iter().zip(back.individuals()) {
        assert_eq!(a.id, b.id);
        for t in 0..2 {
            for (x, y) in a.values[t].iter().zip(&b.values[t]) {
                assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
            }
        }
    }
}

#[test]
fn saving_twice_gives_identical_bytes() {
    let panel = synthesize_panel(&bundled_summary(), &SynthOptions::new(50, 3)).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    irand_core::panel::write_panel(&panel, &mut a).unwrap();
    irand_core::panel::write_panel(&panel, &mut b).unwrap();
    assert_eq!(a, b);
}
