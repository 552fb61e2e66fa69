//! Image-plane coincidence scans of the three four-slits and their peak
//! heights.
//!
//! cargo run --example image_plane_scan

use qudit_slm::propagation::{image_plane_profile, linear_grid, local_maxima, OpticalGeometry};
use qudit_slm::qudit::MultiSlitAperture;

fn main() -> qudit_slm::Result<()> {
    let geo = OpticalGeometry::standard(None);
    let grid = linear_grid(-500.0, 500.0, 1.0)?;
    println!("magnification {}", geo.magnification());
    for t in [
        [100.0; 4],
        [100.0, 75.0, 50.0, 25.0],
        [50.0, 100.0, 25.0, 100.0],
    ] {
        let ap = MultiSlitAperture::standard_four_slit(t)?;
        let profile = image_plane_profile(&ap, &geo, &grid)?;
        let peaks = local_maxima(profile.positions(), profile.expected_rate(), 1e-9, 0.05);
        let shown: Vec<String> = peaks
            .iter()
            .map(|p| format!("{:+.0} µm: {:.2}", p.position, p.height))
            .collect();
        println!("t = {t:?}\n  {}", shown.join("   "));
    }

    let blurred = OpticalGeometry {
        image_blur_um: Some(15.0),
        ..geo
    };
    let ap = MultiSlitAperture::standard_four_slit([100.0; 4])?;
    let p = image_plane_profile(&ap, &blurred, &grid)?;
    let edge = p
        .positions()
        .iter()
        .zip(p.expected_rate())
        .find(|(_, r)| **r > 0.5)
        .map(|(x, _)| *x);
    println!("with 15 µm blur, half-maximum first reached at {edge:?} µm");
    Ok(())
}
