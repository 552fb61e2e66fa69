//! Jones matrices of one LCD pixel and the transmittance through a
//! polarizer sandwich.
//!
//! cargo run --example jones_basics

use qudit_slm::jones::{
    complex_transmittance, irradiance, polarizer_projector, JonesMatrix, PolarizerSpec,
};

fn main() -> qudit_slm::Result<()> {
    let m = JonesMatrix::from_params(0.6, 0.0, 0.8, 0.0, 0.0)?;
    for row in m.entries() {
        println!(
            "  [{:+.3}{:+.3}i  {:+.3}{:+.3}i]",
            row[0].re, row[0].im, row[1].re, row[1].im
        );
    }
    println!("unitarity defect = {:.1e}", m.unitarity_defect());
    println!("|det M| = {:.12}", m.determinant().norm());

    let pairs = [
        (PolarizerSpec::H, PolarizerSpec::H),
        (PolarizerSpec::H, PolarizerSpec::V),
        (PolarizerSpec::R, PolarizerSpec::V),
        (PolarizerSpec::D45, PolarizerSpec::H),
    ];
    for (p1, p2) in pairs {
        let t = complex_transmittance(p1, &m, p2);
        println!(
            "P1 = {:>2}  P2 = {:>2}  t = {:+.4}{:+.4}i  T = {:.4}",
            p1.label(),
            p2.label(),
            t.re,
            t.im,
            irradiance(p1, &m, p2)
        );
    }

    let p = polarizer_projector(PolarizerSpec::linear_degrees(30.0));
    println!(
        "projector at 30°: [[{:.4}, {:.4}], [{:.4}, {:.4}]]",
        p[0][0].re, p[0][1].re, p[1][0].re, p[1][1].re
    );

    match JonesMatrix::from_params(0.5, 0.0, 0.0, 0.0, 0.0) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
