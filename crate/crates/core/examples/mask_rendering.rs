//! Render the standard four-slit onto the 1024×768 LCD and write the PGM
//! mask plus its JSON sidecar.
//!
//! cargo run --example mask_rendering -- [output-dir]

use std::path::PathBuf;

use qudit_slm::calibration::{predict_transmission, GreyLevelLut};
use qudit_slm::jones::PolarizerSpec;
use qudit_slm::qudit::{render_mask, LcdGeometry, MultiSlitAperture};

fn main() -> qudit_slm::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));

    // Rotation from 0 to 90°: between crossed polarizers T = sin²θ.
    let path: Vec<(u8, [f64; 4])> = (0..=255u8)
        .map(|g| {
            let th = std::f64::consts::FRAC_PI_2 * g as f64 / 255.0;
            (g, [th.cos(), 0.0, th.sin(), 0.0])
        })
        .collect();
    let lut = GreyLevelLut::from_params(&path)?;
    let cfg = predict_transmission(&lut, PolarizerSpec::H, PolarizerSpec::V);

    let ap = MultiSlitAperture::standard_four_slit([100.0, 75.0, 50.0, 25.0])?;
    let lcd = LcdGeometry::default();
    let mask = render_mask(&ap, &lcd, &cfg)?;

    println!(
        "pitch {} µm, fill factor {:.3}",
        lcd.pitch_h_um(),
        lcd.fill_factor()
    );
    for s in &mask.meta.slits {
        println!(
            "slit {:>5}: target T {:.3}  grey {:>3}  achieved {:.4}  columns {:?}",
            s.index, s.target_t, s.grey, s.achieved_t, s.columns
        );
    }

    let pgm = out.join("four_slit.pgm");
    let side = out.join("four_slit.json");
    std::fs::write(&pgm, mask.to_pgm()).map_err(|e| qudit_slm::Error::Io {
        path: pgm.clone(),
        source: e,
    })?;
    std::fs::write(&side, mask.sidecar_json()).map_err(|e| qudit_slm::Error::Io {
        path: side.clone(),
        source: e,
    })?;
    println!("wrote {} and {}", pgm.display(), side.display());
    Ok(())
}
