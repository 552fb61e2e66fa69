//! Fit per-grey-level Jones parameters from seven synthetic irradiance
//! curves, with and without 2% multiplicative noise.
//!
//! cargo run --release --example synthetic_calibration

use qudit_slm::calibration::{fit_lut, JonesParams, MeasurementSet};

fn main() -> qudit_slm::Result<()> {
    let path: Vec<(u8, JonesParams)> = (0..=255u8)
        .map(|g| {
            let t = g as f64 / 255.0;
            let (a, b, c) = (0.45 + 0.6 * t, 0.3 + 0.9 * t, 0.8 - 1.1 * t);
            let p = JonesParams::new(
                a.cos() * b.cos(),
                a.cos() * b.sin(),
                a.sin() * c.cos(),
                a.sin() * c.sin(),
            );
            (g, p)
        })
        .collect();
    let clean = MeasurementSet::synthesize(&path)?;

    for (label, ms) in [
        ("noiseless", clean.clone()),
        ("2% noise", clean.with_multiplicative_noise(0.02, 1)),
    ] {
        let lut = fit_lut(&ms)?;
        let mut errs: Vec<f64> = lut
            .entries()
            .iter()
            .zip(&path)
            .map(|(e, (_, p))| e.params().distance(p))
            .collect();
        errs.sort_by(f64::total_cmp);
        println!(
            "{label:>9}: median error {:.2e}, max error {:.2e}, max RMS residual {:.2e}",
            errs[errs.len() / 2],
            errs[errs.len() - 1],
            lut.entries().iter().map(|e| e.residual).fold(0.0, f64::max)
        );
    }

    let lut = fit_lut(&clean)?;
    println!("\ngrey      X        Y        Z        W");
    for e in lut.entries().iter().step_by(51) {
        let [x, y, z, w] = e.params().0;
        println!("{:>4} {x:>8.4} {y:>8.4} {z:>8.4} {w:>8.4}", e.grey);
    }
    Ok(())
}
