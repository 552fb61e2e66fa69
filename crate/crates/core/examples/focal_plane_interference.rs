//! Focal-plane interference of the uniform four-slit for several coherence
//! widths, and the peak shift caused by a phase ramp.
//!
//! cargo run --release --example focal_plane_interference

use qudit_slm::propagation::{
    focal_plane_pattern, fringe_visibility, linear_grid, OpticalGeometry,
};
use qudit_slm::qudit::{state_from_aperture, MultiSlitAperture, Slit};

fn main() -> qudit_slm::Result<()> {
    let ap = MultiSlitAperture::standard_four_slit([100.0; 4])?;
    let state = state_from_aperture(&ap)?;
    let d = ap.period_um();
    let geo = OpticalGeometry::standard(None);
    let period = geo.wavelength_um() * geo.focal_um() / d;
    println!("fringe period λf/d = {period:.2} µm");
    println!(
        "envelope zero λf/2a = {:.2} µm",
        geo.wavelength_um() * geo.focal_um() / (2.0 * ap.half_width_um())
    );

    let grid = linear_grid(-1200.0, 1200.0, 1.0)?;
    for coh in [Some(0.25 * d), Some(d), Some(2.0 * d), Some(8.0 * d), None] {
        let g = OpticalGeometry::standard(coh);
        let v = fringe_visibility(&state, &ap, &g, &grid, -period, period)?;
        match coh {
            Some(c) => println!("σ_c = {c:>6.0} µm: visibility {v:.4}"),
            None => println!("σ_c =      ∞: visibility {v:.4}"),
        }
    }

    let ramp = (0..4)
        .map(|k| Slit {
            transmission: 1.0,
            phase_rad: 0.6 * k as f64,
        })
        .collect();
    let shifted = MultiSlitAperture::new(50.5, 208.0, ramp)?;
    let p = focal_plane_pattern(&state_from_aperture(&shifted)?, &shifted, &geo, &grid)?;
    let (i, _) = p
        .expected_rate()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    println!(
        "0.6 rad/slit phase ramp moves the maximum to {:+.0} µm",
        p.positions()[i]
    );
    Ok(())
}
