//! Slit-basis qudit states and their realization on the LCD pixel grid.
//!
//! Slit `l` of an `n`-slit array sits at `l·d` with
//! `l ∈ {−(n−1)/2, …, (n−1)/2}`: half-integers for even `n`. Its
//! momentum-space wavefunction is `√(a/π)·e^{−iqld}·sinc(qa)` with
//! `sinc(u) = sin(u)/u`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibration::{inverse_lookup, OperatingConfig};
use crate::error::{Error, Result};
use crate::quadrature::{cosine_tail_over_u2, integrate};

/// Momentum cutoff of the overlap quadrature, in units of 1/a.
pub const QUADRATURE_CUTOFF: f64 = 200.0;
pub const QUADRATURE_ABS_TOL: f64 = 1e-8;

/// Unnormalized sinc, `sin(u)/u`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Slit label `l`, stored as `2l` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlitIndex {
    twice: i32,
}

impl SlitIndex {
    pub fn from_twice(twice: i32) -> Self {
        Self { twice }
    }

    /// Parses a value such as `-1.5`; `None` unless it is a multiple of ½.
    pub fn from_value(l: f64) -> Option<Self> {
        let twice = (2.0 * l).round();
        ((2.0 * l - twice).abs() < 1e-9 && twice.abs() < i32::MAX as f64).then_some(Self {
            twice: twice as i32,
        })
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub fn twice(self) -> i32 {
        self.twice
    }
}

impl fmt::Display for SlitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slit {
    /// Relative intensity transmission in [0, 1].
    #[serde(rename = "t")]
    pub transmission: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Slit {
    pub fn open(transmission: f64) -> Self {
        Self {
            transmission,
            phase_rad: 0.0,
        }
    }
}

/// Equally spaced array of slits with half-width `a` and period `d`
/// (micrometers).
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSlitAperture {
    half_width_um: f64,
    period_um: f64,
    slits: Vec<Slit>,
}

#[derive(Serialize, Deserialize)]
struct ApertureFile {
    n_slits: usize,
    half_width_um: f64,
    period_um: f64,
    slits: Vec<Slit>,
}

/// Slit half-width of the four-slit used in the experiment (2a = 101 µm).
pub const STANDARD_HALF_WIDTH_UM: f64 = 50.5;
pub const STANDARD_PERIOD_UM: f64 = 208.0;

impl MultiSlitAperture {
    pub fn new(half_width_um: f64, period_um: f64, slits: Vec<Slit>) -> Result<Self> {
        if slits.is_empty() {
            return Err(Error::InvalidAperture("no slits".into()));
        }
        if !(half_width_um > 0.0 && half_width_um.is_finite()) {
            return Err(Error::InvalidAperture(format!(
                "half-width {half_width_um} µm must be positive"
            )));
        }
        if !(period_um.is_finite() && period_um >= 2.0 * half_width_um) {
            return Err(Error::InvalidAperture(format!(
                "period {period_um} µm is smaller than slit width {} µm (slits overlap)",
                2.0 * half_width_um
            )));
        }
        for (k, s) in slits.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.transmission) {
                return Err(Error::InvalidAperture(format!(
                    "slit {k}: transmission {} outside [0, 1]",
                    s.transmission
                )));
            }
            if !s.phase_rad.is_finite() {
                return Err(Error::InvalidAperture(format!(
                    "slit {k}: phase is not finite"
                )));
            }
        }
        if slits.iter().all(|s| s.transmission == 0.0) {
            return Err(Error::DegenerateAperture);
        }
        Ok(Self {
            half_width_um,
            period_um,
            slits,
        })
    }

    pub fn from_transmissions(half_width_um: f64, period_um: f64, t: &[f64]) -> Result<Self> {
        Self::new(
            half_width_um,
            period_um,
            t.iter().map(|&t| Slit::open(t)).collect(),
        )
    }

    /// Four-slit with the experimental geometry; transmissions in percent.
    pub fn standard_four_slit(percent: [f64; 4]) -> Result<Self> {
        let t = percent.map(|p| p / 100.0);
        Self::from_transmissions(STANDARD_HALF_WIDTH_UM, STANDARD_PERIOD_UM, &t)
    }

    pub fn n_slits(&self) -> usize {
        self.slits.len()
    }

    pub fn half_width_um(&self) -> f64 {
        self.half_width_um
    }

    pub fn period_um(&self) -> f64 {
        self.period_um
    }

    pub fn slits(&self) -> &[Slit] {
        &self.slits
    }

    pub fn transmissions(&self) -> Vec<f64> {
        self.slits.iter().map(|s| s.transmission).collect()
    }

    /// Label of the `k`-th slit (0-based, left to right).
    pub fn index_at(&self, k: usize) -> SlitIndex {
        SlitIndex::from_twice(2 * k as i32 - (self.slits.len() as i32 - 1))
    }

    pub fn indices(&self) -> Vec<SlitIndex> {
        (0..self.slits.len()).map(|k| self.index_at(k)).collect()
    }

    /// Position in the slit list of label `l`.
    pub fn position_of(&self, l: SlitIndex) -> Result<usize> {
        let k2 = l.twice() + self.slits.len() as i32 - 1;
        if k2 < 0 || k2 % 2 != 0 || (k2 / 2) as usize >= self.slits.len() {
            return Err(Error::SlitIndexOutOfRange {
                index: l.value(),
                n_slits: self.slits.len(),
            });
        }
        Ok((k2 / 2) as usize)
    }

    /// Center `l·d` of the `k`-th slit.
    pub fn slit_center_um(&self, k: usize) -> f64 {
        self.index_at(k).value() * self.period_um
    }

    /// Intensity transmission at transverse position `x` (µm).
    pub fn transmission_at(&self, x_um: f64) -> f64 {
        let a = self.half_width_um;
        self.slits
            .iter()
            .enumerate()
            .filter(|(k, _)| (x_um - self.slit_center_um(*k)).abs() <= a)
            .map(|(_, s)| s.transmission)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ApertureFile {
            n_slits: self.slits.len(),
            half_width_um: self.half_width_um,
            period_um: self.period_um,
            slits: self.slits.clone(),
        })
        .expect("aperture serializes")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let file: ApertureFile =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        if file.n_slits != file.slits.len() {
            return Err(Error::parse(
                source,
                format!(
                    "n_slits = {} but {} slits listed",
                    file.n_slits,
                    file.slits.len()
                ),
            ));
        }
        Self::new(file.half_width_um, file.period_um, file.slits)
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

impl Serialize for MultiSlitAperture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ApertureFile {
            n_slits: self.slits.len(),
            half_width_um: self.half_width_um,
            period_um: self.period_um,
            slits: self.slits.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiSlitAperture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ApertureFile::deserialize(d)?;
        if file.n_slits != file.slits.len() {
            return Err(serde::de::Error::custom(format!(
                "n_slits = {} but {} slits listed",
                file.n_slits,
                file.slits.len()
            )));
        }
        Self::new(file.half_width_um, file.period_um, file.slits).map_err(serde::de::Error::custom)
    }
}

/// Unit-norm amplitude vector over the slit basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditState {
    amplitudes: Vec<Complex64>,
}

impl QuditState {
    /// Accepts amplitudes whose squared norm is 1 within 1e-12.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if amplitudes.is_empty() || !n.is_finite() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("squared norm {n} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|c| c / n).collect(),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let g = Complex64::from_polar(1.0, theta);
        Self {
            amplitudes: self.amplitudes.iter().map(|c| c * g).collect(),
        }
    }
}

/// α_l = √(t_l / Σt). Any non-negative scale works (fractions or percent).
pub fn amplitudes_from_transmissions(t: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = t.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidAperture(format!(
            "transmission {bad} must be finite and non-negative"
        )));
    }
    let total: f64 = t.iter().sum();
    if t.is_empty() || total <= 0.0 {
        return Err(Error::DegenerateAperture);
    }
    Ok(t.iter().map(|v| (v / total).sqrt()).collect())
}

/// c_l = α_l·exp(iφ_l).
pub fn state_from_aperture(ap: &MultiSlitAperture) -> Result<QuditState> {
    let alpha = amplitudes_from_transmissions(&ap.transmissions())?;
    let amps: Vec<Complex64> = alpha
        .iter()
        .zip(ap.slits())
        .map(|(a, s)| Complex64::from_polar(*a, s.phase_rad))
        .collect();
    // Re-normalize to remove the last ulp of drift from the square roots.
    QuditState::normalized(amps)
}

/// ψ_l(q) = √(a/π)·e^{−iqld}·sinc(qa); `q` in rad/µm.
pub fn slit_wavefunction_momentum(
    l: SlitIndex,
    q: f64,
    ap: &MultiSlitAperture,
) -> Result<Complex64> {
    ap.position_of(l)?;
    let a = ap.half_width_um();
    let amp = (a / PI).sqrt() * sinc(q * a);
    Ok(Complex64::from_polar(amp, -q * l.value() * ap.period_um()))
}

/// ⟨l|l′⟩ = ∫ (a/π)·sinc²(qa)·e^{iq(l−l′)d} dq.
///
/// The integral over |qa| ≤ 200 is evaluated by adaptive quadrature; the
/// remainder out to infinity is added in closed form through the sine
/// integral, since the truncated part alone misses ≈ 1/(200π) of the norm.
pub fn slit_overlap(l: SlitIndex, lp: SlitIndex, ap: &MultiSlitAperture) -> Result<Complex64> {
    ap.position_of(l)?;
    ap.position_of(lp)?;
    let kappa = (l.value() - lp.value()) * ap.period_um() / ap.half_width_um();
    Ok(overlap_integral(kappa))
}

/// (1/π)∫ sinc²(u)·e^{iκu} du over the whole line.
fn overlap_integral(kappa: f64) -> Complex64 {
    let cutoff = QUADRATURE_CUTOFF;
    // One panel per ~π of the fastest oscillation.
    let panels = ((cutoff * (2.0 + kappa.abs()) / PI).ceil() as usize).max(16);

    let re = integrate(
        |u| sinc(u).powi(2) * (kappa * u).cos() / PI,
        -cutoff,
        cutoff,
        panels,
        QUADRATURE_ABS_TOL,
    )
    .value;
    let im = integrate(
        |u| sinc(u).powi(2) * (kappa * u).sin() / PI,
        -cutoff,
        cutoff,
        panels,
        QUADRATURE_ABS_TOL,
    )
    .value;
    // sin²u·cos κu = ½cos κu − ¼cos (2+κ)u − ¼cos (2−κ)u; both tails equal,
    // the odd imaginary tails cancel.
    let tail = 2.0 / PI
        * (0.5 * cosine_tail_over_u2(kappa, cutoff)
            - 0.25 * cosine_tail_over_u2(2.0 + kappa, cutoff)
            - 0.25 * cosine_tail_over_u2(2.0 - kappa, cutoff));
    Complex64::new(re + tail, im)
}

/// Closed form of [`slit_overlap`]: the triangle Λ((l−l′)d / 2a).
pub fn triangle_overlap(l: SlitIndex, lp: SlitIndex, ap: &MultiSlitAperture) -> f64 {
    let x = (l.value() - lp.value()) * ap.period_um() / (2.0 * ap.half_width_um());
    (1.0 - x.abs()).max(0.0)
}

/// Full Gram matrix ⟨l|l′⟩ in slit order.
pub fn overlap_matrix(ap: &MultiSlitAperture) -> Result<Vec<Vec<Complex64>>> {
    let idx = ap.indices();
    idx.iter()
        .map(|&l| idx.iter().map(|&lp| slit_overlap(l, lp, ap)).collect())
        .collect()
}

/// ∫|ψ_l(q)|² dq over the whole line.
pub fn slit_normalization(ap: &MultiSlitAperture) -> f64 {
    let l = ap.index_at(0);
    slit_overlap(l, l, ap).map(|c| c.re).unwrap_or(f64::NAN)
}

/// Pixel layout of the modulator panel (micrometers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcdGeometry {
    pub columns: usize,
    pub rows: usize,
    pub pixel_width_um: f64,
    pub pixel_height_um: f64,
    pub gap_h_um: f64,
    pub gap_v_um: f64,
}

impl Default for LcdGeometry {
    fn default() -> Self {
        Self {
            columns: 1024,
            rows: 768,
            pixel_width_um: 23.0,
            pixel_height_um: 16.0,
            gap_h_um: 3.0,
            gap_v_um: 10.0,
        }
    }
}

impl LcdGeometry {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.pixel_width_um,
            self.pixel_height_um,
            self.gap_h_um,
            self.gap_v_um,
        ];
        if self.columns == 0 || self.rows == 0 || dims.iter().any(|d| !(*d > 0.0 && d.is_finite()))
        {
            return Err(Error::Geometry(format!(
                "LCD dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn pitch_h_um(&self) -> f64 {
        self.pixel_width_um + self.gap_h_um
    }

    pub fn pitch_v_um(&self) -> f64 {
        self.pixel_height_um + self.gap_v_um
    }

    /// Fraction of the panel area that is active pixel.
    pub fn fill_factor(&self) -> f64 {
        self.pixel_width_um * self.pixel_height_um / (self.pitch_h_um() * self.pitch_v_um())
    }

    /// Center of the active area of column `c`, panel center at 0.
    pub fn column_center_um(&self, c: usize) -> f64 {
        (c as f64 - (self.columns as f64 - 1.0) / 2.0) * self.pitch_h_um()
    }

    pub fn row_center_um(&self, r: usize) -> f64 {
        (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.pitch_v_um()
    }
}

/// Grey-level image addressed on the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    pub lcd: LcdGeometry,
    /// Row-major, `rows × columns`.
    greys: Vec<u8>,
    /// Achieved intensity transmission per pixel, same layout.
    transmission: Vec<f64>,
    pub meta: MaskMetadata,
}

/// Geometry and slit assignment written next to the PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskMetadata {
    pub columns: usize,
    pub rows: usize,
    pub pitch_h_um: f64,
    pub pitch_v_um: f64,
    pub pixel_width_um: f64,
    pub pixel_height_um: f64,
    pub fill_factor: f64,
    /// Active-area center of column 0 / row 0.
    pub origin_x_um: f64,
    pub origin_y_um: f64,
    pub aperture_center_um: f64,
    pub background_grey: u8,
    pub background_transmission: f64,
    pub p1: String,
    pub p2: String,
    pub slits: Vec<MaskSlit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSlit {
    pub index: f64,
    pub target_t: f64,
    pub grey: u8,
    /// Achieved T divided by the configuration's maximum T.
    pub achieved_t: f64,
    pub phase_rad: f64,
    pub columns: Vec<usize>,
}

impl PixelMask {
    pub fn columns(&self) -> usize {
        self.lcd.columns
    }

    pub fn rows(&self) -> usize {
        self.lcd.rows
    }

    pub fn grey(&self, row: usize, col: usize) -> u8 {
        self.greys[row * self.lcd.columns + col]
    }

    pub fn transmission(&self, row: usize, col: usize) -> f64 {
        self.transmission[row * self.lcd.columns + col]
    }

    pub fn greys(&self) -> &[u8] {
        &self.greys
    }

    pub fn column_greys(&self, row: usize) -> &[u8] {
        &self.greys[row * self.lcd.columns..(row + 1) * self.lcd.columns]
    }

    /// Binary (P5) PGM encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.lcd.columns, self.lcd.rows).into_bytes();
        out.extend_from_slice(&self.greys);
        out
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("mask metadata serializes")
    }
}

/// Decodes a binary 8-bit PGM into `(columns, rows, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let err = |m: &str| Error::parse("pgm", m.to_string());
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("bad header"))?);
    }
    if fields[0] != "P5" {
        return Err(err("not a binary PGM"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| err("bad header number"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(err("only 8-bit PGM is supported"));
    }
    // Exactly one whitespace byte separates header and raster.
    pos += 1;
    let data = bytes.get(pos..).ok_or_else(|| err("missing raster"))?;
    if data.len() != w * h {
        return Err(err("raster size does not match header"));
    }
    Ok((w, h, data.to_vec()))
}

/// Renders the aperture centered on the panel.
pub fn render_mask(
    ap: &MultiSlitAperture,
    lcd: &LcdGeometry,
    cfg: &OperatingConfig,
) -> Result<PixelMask> {
    render_mask_at(ap, lcd, cfg, 0.0)
}

/// Renders the aperture with its center at `center_um` from the panel center.
///
/// A column belongs to slit `l` when its active-area center lies within
/// `[center + l·d − a, center + l·d + a]`. Slit pixels get the grey whose
/// predicted T is closest to `t_l·max T`; a closed slit (t = 0) and the
/// background get the darkest grey.
pub fn render_mask_at(
    ap: &MultiSlitAperture,
    lcd: &LcdGeometry,
    cfg: &OperatingConfig,
    center_um: f64,
) -> Result<PixelMask> {
    lcd.validate()?;
    let a = ap.half_width_um();
    let pitch = lcd.pitch_h_um();
    if 2.0 * a < pitch {
        return Err(Error::Geometry(format!(
            "slit width {} µm is narrower than one pixel pitch ({pitch} µm)",
            2.0 * a
        )));
    }
    let tmax = cfg.max_transmission();
    let background = cfg.darkest_grey();
    let background_t = cfg.transmission_at(background);

    let mut column_grey = vec![background; lcd.columns];
    let mut slits = Vec::with_capacity(ap.n_slits());
    for (k, slit) in ap.slits().iter().enumerate() {
        let center = center_um + ap.slit_center_um(k);
        let columns: Vec<usize> = (0..lcd.columns)
            .filter(|&c| (lcd.column_center_um(c) - center).abs() <= a + 1e-9)
            .collect();
        if columns.is_empty() {
            return Err(Error::Geometry(format!(
                "slit {k} at {center} µm falls outside the panel"
            )));
        }
        let grey = if slit.transmission == 0.0 {
            background
        } else {
            inverse_lookup(cfg, slit.transmission * tmax).map_err(|e| match e {
                Error::TransmissionOutOfRange {
                    target, min, max, ..
                } => Error::TransmissionOutOfRange {
                    target,
                    min,
                    max,
                    slit: Some(k),
                },
                other => other,
            })?
        };
        for &c in &columns {
            column_grey[c] = grey;
        }
        slits.push(MaskSlit {
            index: ap.index_at(k).value(),
            target_t: slit.transmission,
            grey,
            achieved_t: if tmax > 0.0 {
                cfg.transmission_at(grey) / tmax
            } else {
                0.0
            },
            phase_rad: cfg.phase_at(grey),
            columns,
        });
    }

    let column_t: Vec<f64> = column_grey
        .iter()
        .map(|&g| cfg.transmission_at(g))
        .collect();
    let mut greys = Vec::with_capacity(lcd.columns * lcd.rows);
    let mut transmission = Vec::with_capacity(lcd.columns * lcd.rows);
    for _ in 0..lcd.rows {
        greys.extend_from_slice(&column_grey);
        transmission.extend_from_slice(&column_t);
    }

    let meta = MaskMetadata {
        columns: lcd.columns,
        rows: lcd.rows,
        pitch_h_um: pitch,
        pitch_v_um: lcd.pitch_v_um(),
        pixel_width_um: lcd.pixel_width_um,
        pixel_height_um: lcd.pixel_height_um,
        fill_factor: lcd.fill_factor(),
        origin_x_um: lcd.column_center_um(0),
        origin_y_um: lcd.row_center_um(0),
        aperture_center_um: center_um,
        background_grey: background,
        background_transmission: background_t,
        p1: cfg.p1.label(),
        p2: cfg.p2.label(),
        slits,
    };
    Ok(PixelMask {
        lcd: *lcd,
        greys,
        transmission,
        meta,
    })
}
