//! Poisson-sampled coincidence counts for a focal-plane scan, written as
//! the `x_um,expected_rate,counts` CSV.
//!
//! cargo run --example coincidence_noise -- [seed]

use qudit_slm::propagation::{focal_plane_pattern, linear_grid, sample_counts, OpticalGeometry};
use qudit_slm::qudit::{state_from_aperture, MultiSlitAperture};

fn main() -> qudit_slm::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);
    let ap = MultiSlitAperture::standard_four_slit([50.0, 100.0, 25.0, 100.0])?;
    let state = state_from_aperture(&ap)?;
    let geo = OpticalGeometry::standard(Some(2.0 * ap.period_um()));
    let grid = linear_grid(-1500.0, 1500.0, 50.0)?;

    let expected = focal_plane_pattern(&state, &ap, &geo, &grid)?;
    // 100 coincidences/s at the peak, 5 s per point.
    let sampled = sample_counts(&expected, 100.0, 5.0, seed)?;
    let counts = sampled.counts().unwrap();
    let total: u64 = counts.iter().sum();
    let mean: f64 = expected.expected_rate().iter().map(|r| r * 500.0).sum();
    println!("seed {seed}: {total} coincidences (expected {mean:.0})");
    print!("{}", sampled.to_csv());
    Ok(())
}
