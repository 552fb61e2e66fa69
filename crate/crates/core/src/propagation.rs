//! Coincidence-rate predictions at the image plane and the lens focal plane.
//!
//! Focal plane: the detector at transverse position `x` samples transverse
//! momentum `q = kx/f`, so
//!
//! ```text
//! C(x) ∝ sinc²(qa) · Σ_{l,l′} c_l c*_{l′} µ(|l−l′|d) e^{−iq(l−l′)d}
//! ```
//!
//! with a Gaussian degree of coherence `µ(Δ) = exp(−Δ²/2σ_c²)` between slit
//! pairs. Image plane: the geometric image of the aperture transmission,
//! magnified by `−s′/s`, averaged over the detector slit.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::{sinc, MultiSlitAperture, PixelMask, QuditState};

/// Relative tolerance on the thin-lens relation for image-plane scans.
pub const THIN_LENS_TOL: f64 = 1e-3;
pub const DEFAULT_DETECTOR_SLIT_UM: f64 = 50.0;

/// Lengths of the detection arm. `coherence_um = None` means fully coherent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalGeometry {
    pub wavelength_nm: f64,
    pub focal_mm: f64,
    /// Aperture → lens.
    pub object_mm: f64,
    /// Lens → detector in the imaging configuration.
    pub image_mm: f64,
    pub detector_slit_um: f64,
    pub coherence_um: Option<f64>,
    /// Optional Gaussian blur (standard deviation) of the image.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_blur_um: Option<f64>,
}

impl OpticalGeometry {
    /// 702 nm, f = 150 mm, s = s′ = 300 mm, 50 µm detector slit.
    pub fn standard(coherence_um: Option<f64>) -> Self {
        Self {
            wavelength_nm: 702.0,
            focal_mm: 150.0,
            object_mm: 300.0,
            image_mm: 300.0,
            detector_slit_um: DEFAULT_DETECTOR_SLIT_UM,
            coherence_um,
            image_blur_um: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("wavelength_nm", self.wavelength_nm),
            ("focal_mm", self.focal_mm),
            ("object_mm", self.object_mm),
            ("image_mm", self.image_mm),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.detector_slit_um >= 0.0 && self.detector_slit_um.is_finite()) {
            return Err(Error::Geometry(format!(
                "detector_slit_um = {} must be non-negative",
                self.detector_slit_um
            )));
        }
        if let Some(c) = self.coherence_um {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Geometry(format!(
                    "coherence_um = {c} must be positive"
                )));
            }
        }
        if let Some(b) = self.image_blur_um {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Geometry(format!(
                    "image_blur_um = {b} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Fails unless 1/s + 1/s′ = 1/f within [`THIN_LENS_TOL`].
    pub fn check_thin_lens(&self) -> Result<()> {
        self.validate()?;
        let lhs = 1.0 / self.object_mm + 1.0 / self.image_mm;
        let rhs = 1.0 / self.focal_mm;
        if ((lhs - rhs) / rhs).abs() > THIN_LENS_TOL {
            return Err(Error::Geometry(format!(
                "s = {} mm, s′ = {} mm do not image through f = {} mm",
                self.object_mm, self.image_mm, self.focal_mm
            )));
        }
        Ok(())
    }

    pub fn wavelength_um(&self) -> f64 {
        self.wavelength_nm * 1e-3
    }

    pub fn focal_um(&self) -> f64 {
        self.focal_mm * 1e3
    }

    pub fn wavenumber_per_um(&self) -> f64 {
        2.0 * PI / self.wavelength_um()
    }

    /// Lateral magnification −s′/s (negative: inverted image).
    pub fn magnification(&self) -> f64 {
        -self.image_mm / self.object_mm
    }

    pub fn coherence_width_um(&self) -> f64 {
        self.coherence_um.unwrap_or(f64::INFINITY)
    }

    /// Transverse momentum sampled at focal-plane position `x_um`.
    pub fn momentum_at(&self, x_um: f64) -> f64 {
        self.wavenumber_per_um() * x_um / self.focal_um()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let g: Self =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        g.validate()?;
        Ok(g)
    }
}

/// Detector positions with normalized expected rates and optional counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanProfile {
    positions: Vec<f64>,
    expected_rate: Vec<f64>,
    counts: Option<Vec<u64>>,
    integration_time_s: Option<f64>,
}

impl ScanProfile {
    /// Validates ordering and non-negativity; does not rescale.
    pub fn new(positions: Vec<f64>, expected_rate: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != expected_rate.len() {
            return Err(Error::Config(format!(
                "profile needs matching non-empty position/rate vectors ({} vs {})",
                positions.len(),
                expected_rate.len()
            )));
        }
        check_grid(&positions)?;
        if let Some(v) = expected_rate
            .iter()
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Config(format!(
                "expected rate {v} must be non-negative"
            )));
        }
        Ok(Self {
            positions,
            expected_rate,
            counts: None,
            integration_time_s: None,
        })
    }

    /// Scales `raw` so its maximum is 1.
    pub fn normalized(positions: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        let peak = raw.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::DegenerateProfile(
                "expected rate vanishes on every grid point".into(),
            ));
        }
        Self::new(positions, raw.into_iter().map(|v| v / peak).collect())
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn expected_rate(&self) -> &[f64] {
        &self.expected_rate
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn integration_time_s(&self) -> Option<f64> {
        self.integration_time_s
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `x_um,expected_rate,counts` with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_um,expected_rate,counts\n");
        for (i, (x, r)) in self.positions.iter().zip(&self.expected_rate).enumerate() {
            let c = self
                .counts
                .as_ref()
                .map(|c| c[i].to_string())
                .unwrap_or_default();
            out.push_str(&format!("{x},{r},{c}\n"));
        }
        out
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(source, e.to_string()))?
            .clone();
        let expected = ["x_um", "expected_rate", "counts"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::parse(
                source,
                "header must be `x_um,expected_rate,counts`",
            ));
        }
        let mut xs = Vec::new();
        let mut rates = Vec::new();
        let mut counts: Vec<Option<u64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(source, format!("row {line}: {e}")))?;
            let num = |col: usize, name: &str| -> Result<f64> {
                rec.get(col).unwrap_or("").parse::<f64>().map_err(|_| {
                    Error::parse(source, format!("row {line}, column `{name}`: not a number"))
                })
            };
            xs.push(num(0, "x_um")?);
            rates.push(num(1, "expected_rate")?);
            let c = rec.get(2).unwrap_or("");
            counts.push(if c.is_empty() {
                None
            } else {
                Some(c.parse::<u64>().map_err(|_| {
                    Error::parse(source, format!("row {line}, column `counts`: not a count"))
                })?)
            });
        }
        let mut p = Self::new(xs, rates)?;
        if counts.iter().all(Option::is_some) {
            p.counts = Some(counts.into_iter().flatten().collect());
        } else if counts.iter().any(Option::is_some) {
            return Err(Error::parse(
                source,
                "counts column is only partially filled",
            ));
        }
        Ok(p)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty position grid".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("grid positions must be finite".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "grid positions must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Evenly spaced grid `start, start+step, …` up to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) || start >= stop {
        return Err(Error::Config(format!(
            "grid needs start < stop and step > 0 (got {start}, {stop}, {step})"
        )));
    }
    if step > stop - start {
        return Err(Error::Config(format!(
            "grid step {step} exceeds the range {}",
            stop - start
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// µ(Δ) = exp(−Δ²/2σ_c²); `sigma_um = ∞` gives 1.
pub fn coherence_factor(separation_um: f64, sigma_um: f64) -> f64 {
    if sigma_um.is_infinite() {
        return 1.0;
    }
    (-separation_um * separation_um / (2.0 * sigma_um * sigma_um)).exp()
}

fn check_dims(state: &QuditState, ap: &MultiSlitAperture) -> Result<()> {
    if state.dim() != ap.n_slits() {
        return Err(Error::DimensionMismatch {
            state: state.dim(),
            slits: ap.n_slits(),
        });
    }
    Ok(())
}

/// Interference factor Σ c_l c*_{l′} µ e^{−iq(l−l′)d} at one position,
/// before taking the real part.
fn interference_sum(
    state: &QuditState,
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    x_um: f64,
) -> Complex64 {
    let q = geo.momentum_at(x_um);
    let d = ap.period_um();
    let sigma = geo.coherence_width_um();
    let c = state.amplitudes();
    let labels: Vec<f64> = ap.indices().iter().map(|l| l.value()).collect();
    let mut sum = Complex64::new(0.0, 0.0);
    for (i, ci) in c.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            let dl = labels[i] - labels[j];
            let mu = coherence_factor((dl * d).abs(), sigma);
            sum += ci * cj.conj() * mu * Complex64::from_polar(1.0, -q * dl * d);
        }
    }
    sum
}

/// Unnormalized focal-plane coincidence rate at `x_um`.
pub fn focal_plane_intensity(
    state: &QuditState,
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    x_um: f64,
) -> Result<f64> {
    check_dims(state, ap)?;
    let sum = interference_sum(state, ap, geo, x_um);
    let scale: f64 = state
        .amplitudes()
        .iter()
        .map(|c| c.norm())
        .sum::<f64>()
        .powi(2);
    if sum.im.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::DegenerateProfile(format!(
            "interference sum has imaginary part {:e} at x = {x_um}",
            sum.im
        )));
    }
    let envelope = sinc(geo.momentum_at(x_um) * ap.half_width_um()).powi(2);
    Ok((envelope * sum.re).max(0.0))
}

/// Focal-plane pattern normalized to peak 1 on `grid`.
pub fn focal_plane_pattern(
    state: &QuditState,
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    grid: &[f64],
) -> Result<ScanProfile> {
    check_dims(state, ap)?;
    geo.validate()?;
    check_grid(grid)?;
    let raw = grid
        .iter()
        .map(|&x| focal_plane_intensity(state, ap, geo, x))
        .collect::<Result<Vec<_>>>()?;
    ScanProfile::normalized(grid.to_vec(), raw)
}

/// The interference factor alone (single-slit envelope divided out),
/// normalized to peak 1. Its visibility is the fringe visibility.
pub fn interference_profile(
    state: &QuditState,
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    grid: &[f64],
) -> Result<ScanProfile> {
    check_dims(state, ap)?;
    geo.validate()?;
    check_grid(grid)?;
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| interference_sum(state, ap, geo, x).re.max(0.0))
        .collect();
    ScanProfile::normalized(grid.to_vec(), raw)
}

/// Fringe visibility over `[lo, hi]`: visibility of [`interference_profile`].
pub fn fringe_visibility(
    state: &QuditState,
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    grid: &[f64],
    lo: f64,
    hi: f64,
) -> Result<f64> {
    visibility(&interference_profile(state, ap, geo, grid)?, lo, hi)
}

/// Focal-plane pattern computed from the rendered mask columns of `row`
/// instead of ideal slits; each lit column radiates with amplitude √T over
/// its active width.
pub fn focal_plane_pattern_pixelated(
    mask: &PixelMask,
    row: usize,
    geo: &OpticalGeometry,
    grid: &[f64],
) -> Result<ScanProfile> {
    geo.validate()?;
    check_grid(grid)?;
    if row >= mask.rows() {
        return Err(Error::Geometry(format!("row {row} outside the mask")));
    }
    let lit: Vec<(f64, f64)> = (0..mask.columns())
        .map(|c| (mask.lcd.column_center_um(c), mask.transmission(row, c)))
        .filter(|(_, t)| *t > 0.0)
        .map(|(x, t)| (x, t.sqrt()))
        .collect();
    let sigma = geo.coherence_width_um();
    let half_px = 0.5 * mask.lcd.pixel_width_um;
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let q = geo.momentum_at(x);
            let mut sum = 0.0;
            for &(xi, ai) in &lit {
                for &(xj, aj) in &lit {
                    let sep = xi - xj;
                    sum += ai * aj * coherence_factor(sep.abs(), sigma) * (q * sep).cos();
                }
            }
            (sinc(q * half_px).powi(2) * sum).max(0.0)
        })
        .collect();
    ScanProfile::normalized(grid.to_vec(), raw)
}

/// ∫ erf(z / (σ√2)) dz.
fn erf_antiderivative(z: f64, sigma: f64) -> f64 {
    let s2 = sigma * std::f64::consts::SQRT_2;
    z * libm::erf(z / s2) + sigma * (2.0 / PI).sqrt() * (-(z * z) / (2.0 * sigma * sigma)).exp()
}

/// Detector-averaged intensity of one image box `[lo, hi]` of value `t`.
fn box_response(lo: f64, hi: f64, t: f64, x: f64, width: f64, blur: Option<f64>) -> f64 {
    match blur.filter(|b| *b > 0.0) {
        None => {
            if width == 0.0 {
                if x >= lo && x <= hi {
                    t
                } else {
                    0.0
                }
            } else {
                let a = (x - 0.5 * width).max(lo);
                let b = (x + 0.5 * width).min(hi);
                t * (b - a).max(0.0) / width
            }
        }
        Some(sigma) => {
            let s2 = sigma * std::f64::consts::SQRT_2;
            if width == 0.0 {
                0.5 * t * (libm::erf((x - lo) / s2) - libm::erf((x - hi) / s2))
            } else {
                let (a, b) = (x - 0.5 * width, x + 0.5 * width);
                let integral = (erf_antiderivative(b - lo, sigma)
                    - erf_antiderivative(a - lo, sigma))
                    - (erf_antiderivative(b - hi, sigma) - erf_antiderivative(a - hi, sigma));
                0.5 * t * integral / width
            }
        }
    }
}

/// Image-plane scan: each slit maps to a box of height `t_l` centered at
/// `M·l·d` with half-width `|M|·a`, averaged over the detector slit.
pub fn image_plane_profile(
    ap: &MultiSlitAperture,
    geo: &OpticalGeometry,
    grid: &[f64],
) -> Result<ScanProfile> {
    geo.check_thin_lens()?;
    check_grid(grid)?;
    let m = geo.magnification();
    let half = m.abs() * ap.half_width_um();
    let boxes: Vec<(f64, f64, f64)> = ap
        .slits()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.transmission > 0.0)
        .map(|(k, s)| {
            let c = m * ap.slit_center_um(k);
            (c - half, c + half, s.transmission)
        })
        .collect();
    let raw: Vec<f64> = grid
        .iter()
        .map(|&x| {
            boxes
                .iter()
                .map(|&(lo, hi, t)| {
                    box_response(lo, hi, t, x, geo.detector_slit_um, geo.image_blur_um)
                })
                .sum()
        })
        .collect();
    ScanProfile::normalized(grid.to_vec(), raw)
}

/// (max − min)/(max + min) of the expected rate over `[lo, hi]`.
pub fn visibility(profile: &ScanProfile, lo: f64, hi: f64) -> Result<f64> {
    let vals: Vec<f64> = profile
        .positions()
        .iter()
        .zip(profile.expected_rate())
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(_, v)| *v)
        .collect();
    if vals.len() < 2 {
        return Err(Error::EmptyWindow { lo, hi });
    }
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min == 0.0 {
        return Ok(0.0);
    }
    Ok((max - min) / (max + min))
}

/// Poisson counts with mean `expected_rate·peak_rate·integration_time`,
/// drawn from a ChaCha20 stream seeded with `seed`.
pub fn sample_counts(
    profile: &ScanProfile,
    peak_rate_cps: f64,
    integration_time_s: f64,
    seed: u64,
) -> Result<ScanProfile> {
    if !(peak_rate_cps > 0.0 && peak_rate_cps.is_finite()) {
        return Err(Error::Config(format!(
            "peak rate {peak_rate_cps} must be positive"
        )));
    }
    if !(integration_time_s > 0.0 && integration_time_s.is_finite()) {
        return Err(Error::Config(format!(
            "integration time {integration_time_s} must be positive"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let counts = profile
        .expected_rate()
        .iter()
        .map(|&r| {
            let mean = r * peak_rate_cps * integration_time_s;
            if mean <= 0.0 {
                0
            } else {
                let draw: f64 = Poisson::new(mean)
                    .expect("positive finite mean")
                    .sample(&mut rng);
                draw as u64
            }
        })
        .collect();
    Ok(ScanProfile {
        counts: Some(counts),
        integration_time_s: Some(integration_time_s),
        ..profile.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

/// Interior local maxima, treating runs of values equal within `tol` as one
/// plateau centered on the run. Peaks below `min_height` are dropped.
pub fn local_maxima(positions: &[f64], values: &[f64], tol: f64, min_height: f64) -> Vec<Peak> {
    let n = values.len().min(positions.len());
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && (values[j + 1] - values[i]).abs() <= tol {
            j += 1;
        }
        let left_lower = i > 0 && values[i - 1] < values[i] - tol;
        let right_lower = j + 1 < n && values[j + 1] < values[i] - tol;
        if left_lower && right_lower && values[i] >= min_height {
            peaks.push(Peak {
                position: 0.5 * (positions[i] + positions[j]),
                height: values[i..=j]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
            });
        }
        i = j + 1;
    }
    peaks
}
