//! Direct Monte-Carlo cross-check of the semi-analytic WWI at an operating
//! point where wrong identifications are frequent enough to count.

use fiberid::experiments::{reliability_curve, PigtailSpec, ReliabilitySpec};

#[test]
fn monte_carlo_agrees_with_analytic_wwi() {
    let spec = ReliabilitySpec {
        snr_db_grid: vec![-3.0],
        delta_f_hz_grid: vec![10e9],
        pigtail: PigtailSpec {
            length_m: 0.5,
            n_scatterers: 1000,
            r_rb: 8e-7,
        },
        t_sw_s: 1e-5,
        group_velocity_m_per_s: 2e8,
        r_weight: 0.5,
        trials: 2000,
        master_seed: 606,
    };
    let rows = reliability_curve(&spec).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    let mc = row.mc_wwi.expect("WWI large enough for direct counting");
    assert!(mc > 0.0, "no wrong identifications observed");
    let gap = (mc.log10() - row.log10_wwi).abs();
    assert!(
        gap <= 0.5,
        "mc log10 {} vs analytic {}",
        mc.log10(),
        row.log10_wwi
    );
}
