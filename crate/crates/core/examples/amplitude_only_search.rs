//! Search the polarizer pairs for the one whose transmitted phase stays
//! flat while the transmission is modulated.
//!
//! cargo run --release --example amplitude_only_search

use qudit_slm::calibration::{
    find_amplitude_only_config, inverse_lookup, predict_transmission, GreyLevelLut,
};
use qudit_slm::jones::PolarizerSpec;

fn main() -> qudit_slm::Result<()> {
    // A twisted-nematic-like path: rotation plus a grey-dependent retardance.
    let path: Vec<(u8, [f64; 4])> = (0..=255u8)
        .map(|g| {
            let s = g as f64 / 255.0;
            let rot = 1.2 * s;
            let ret = 0.35 * (1.0 - s);
            let (c, r) = (ret.cos(), ret.sin());
            (
                g,
                [
                    c * rot.cos(),
                    r * (2.0 * rot).cos(),
                    c * rot.sin(),
                    r * (2.0 * rot).sin(),
                ],
            )
        })
        .map(|(g, v): (u8, [f64; 4])| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (g, v.map(|x| x / n))
        })
        .collect();
    let lut = GreyLevelLut::from_params(&path)?;

    let naive = predict_transmission(&lut, PolarizerSpec::H, PolarizerSpec::V);
    println!(
        "H/V:       contrast {:>10.1}  phase spread {:.4} rad",
        naive.contrast, naive.phase_spread
    );

    let cfg = find_amplitude_only_config(&lut, 20.0)?;
    println!(
        "best pair: P1 = {}, P2 = {}, contrast {:.1}, phase spread {:.4} rad",
        cfg.p1.label(),
        cfg.p2.label(),
        cfg.contrast,
        cfg.phase_spread
    );
    println!(
        "T range [{:.4}, {:.4}]",
        cfg.min_transmission(),
        cfg.max_transmission()
    );

    for rel in [1.0, 0.75, 0.5, 0.25] {
        let target = rel * cfg.max_transmission();
        let g = inverse_lookup(&cfg, target)?;
        println!(
            "T = {target:.4} -> grey {g:>3} (achieves {:.4})",
            cfg.transmission_at(g)
        );
    }
    Ok(())
}
