//! The three four-slit states, the transmission-to-amplitude rule and the
//! orthonormality of the slit basis.
//!
//! cargo run --example qudit_states

use qudit_slm::qudit::{
    amplitudes_from_transmissions, overlap_matrix, slit_wavefunction_momentum, state_from_aperture,
    MultiSlitAperture, Slit, SlitIndex,
};

fn main() -> qudit_slm::Result<()> {
    for t in [
        [100.0; 4],
        [100.0, 75.0, 50.0, 25.0],
        [50.0, 100.0, 25.0, 100.0],
    ] {
        let alpha = amplitudes_from_transmissions(&t)?;
        let shown: Vec<String> = alpha.iter().map(|a| format!("{a:.3}")).collect();
        println!("t = {t:?} -> α = [{}]", shown.join(", "));
    }

    // Per-slit phases give complex amplitudes.
    let slits = [0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|&phi| Slit {
            transmission: 1.0,
            phase_rad: phi,
        })
        .collect();
    let ap = MultiSlitAperture::new(50.5, 208.0, slits)?;
    let state = state_from_aperture(&ap)?;
    for (l, c) in ap.indices().iter().zip(state.amplitudes()) {
        println!("c[{l:>4}] = {:+.4}{:+.4}i", c.re, c.im);
    }

    let psi = slit_wavefunction_momentum(SlitIndex::from_twice(3), 0.0, &ap)?;
    println!(
        "ψ_3/2(q = 0) = {:.6} (√(a/π) = {:.6})",
        psi.re,
        (50.5 / std::f64::consts::PI).sqrt()
    );

    println!("Gram matrix |⟨l|l′⟩|:");
    for row in overlap_matrix(&ap)? {
        let cells: Vec<String> = row.iter().map(|g| format!("{:.1e}", g.norm())).collect();
        println!("  {}", cells.join("  "));
    }
    Ok(())
}
