//! Black-box Jones-matrix calibration of the modulator.
//!
//! Seven irradiance curves recorded between fixed polarizer pairs are
//! inverted, grey level by grey level, for the unit 4-vector (X, Y, Z, W)
//! of the lossless modulator matrix. The fit is a least-squares problem
//! on the unit 3-sphere solved by Levenberg–Marquardt in the tangent
//! space with re-projection after each step.
//!
//! Irradiance data cannot distinguish p from −p. The LUT resolves this by
//! continuity across grey levels, anchored so that the first entry has
//! X ≥ 0 (or, when X ≈ 0, its first non-zero coordinate positive).
//!
//! Some parameter families are not observable from the seven curves: with
//! Z = W = 0 the split between X and Y leaves every curve unchanged (and
//! likewise Z/W when X = Y = 0). Fits near those manifolds are
//! ill-conditioned and the residual stays small while the parameters drift.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jones::{complex_transmittance, parameter_basis, JonesMatrix, PolarizerSpec};

/// Readings may exceed 1 by this much before they are rejected.
pub const READING_SLACK: f64 = 0.05;
pub const MAX_ITERATIONS: usize = 500;
pub const STEP_TOLERANCE: f64 = 1e-10;
/// Norm tolerance enforced on stored LUT entries.
pub const LUT_NORM_TOL: f64 = 1e-9;
/// Floor applied to min T when computing contrast.
pub const CONTRAST_FLOOR: f64 = 1e-6;

/// Identifier of one of the seven canonical measurement configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfigId {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
}

impl ConfigId {
    pub const ALL: [ConfigId; 7] = [
        ConfigId::I1,
        ConfigId::I2,
        ConfigId::I3,
        ConfigId::I4,
        ConfigId::I5,
        ConfigId::I6,
        ConfigId::I7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfigId::I1 => "i1",
            ConfigId::I2 => "i2",
            ConfigId::I3 => "i3",
            ConfigId::I4 => "i4",
            ConfigId::I5 => "i5",
            ConfigId::I6 => "i6",
            ConfigId::I7 => "i7",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementConfig {
    pub id: ConfigId,
    pub p1: PolarizerSpec,
    pub p2: PolarizerSpec,
}

/// The seven polarizer pairs, in i1..i7 order.
pub fn canonical_configs() -> [MeasurementConfig; 7] {
    use PolarizerSpec as P;
    let mk = |id, p1, p2| MeasurementConfig { id, p1, p2 };
    [
        mk(ConfigId::I1, P::H, P::H),
        mk(ConfigId::I2, P::H, P::V),
        mk(ConfigId::I3, P::H, P::L),
        mk(ConfigId::I4, P::R, P::V),
        mk(ConfigId::I5, P::D45, P::H),
        mk(ConfigId::I6, P::D45, P::V),
        mk(ConfigId::I7, P::H, P::D45),
    ]
}

/// Unit 4-vector (X, Y, Z, W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JonesParams(pub [f64; 4]);

impl JonesParams {
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        JonesParams([x, y, z, w])
    }

    /// Normalizes an arbitrary non-zero 4-vector.
    pub fn normalized(v: [f64; 4]) -> Option<Self> {
        let n = norm4(&v);
        (n > 0.0 && n.is_finite()).then(|| JonesParams(v.map(|c| c / n)))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn dot(&self, other: &JonesParams) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn neg(&self) -> Self {
        JonesParams(self.0.map(|c| -c))
    }

    pub fn distance(&self, other: &JonesParams) -> f64 {
        norm4(&sub4(&self.0, &other.0))
    }

    /// Distance modulo the global sign.
    pub fn distance_up_to_sign(&self, other: &JonesParams) -> f64 {
        self.distance(other).min(self.distance(&other.neg()))
    }

    pub fn matrix(&self) -> Result<JonesMatrix> {
        let [x, y, z, w] = self.0;
        JonesMatrix::from_params(x, y, z, w, 0.0)
    }

    /// Representative with X ≥ 0, or the first non-negligible coordinate
    /// positive when X ≈ 0.
    pub fn canonical_sign(&self) -> Self {
        let lead = self
            .0
            .iter()
            .copied()
            .find(|c| c.abs() > 1e-9)
            .unwrap_or(0.0);
        if lead < 0.0 {
            self.neg()
        } else {
            *self
        }
    }

    fn aligned_with(&self, reference: &JonesParams) -> Self {
        if self.dot(reference) < 0.0 {
            self.neg()
        } else {
            *self
        }
    }
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn sub4(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Complex transmittance of each canonical configuration through each basis
/// matrix; `t_k(p) = Σ_j p_j · coeff[k][j]`.
fn transmittance_coefficients() -> [[Complex64; 4]; 7] {
    let basis = parameter_basis();
    let configs = canonical_configs();
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 7];
    for (row, cfg) in out.iter_mut().zip(configs.iter()) {
        for (cell, m) in row.iter_mut().zip(basis.iter()) {
            *cell = complex_transmittance(cfg.p1, m, cfg.p2);
        }
    }
    out
}

/// Irradiance of the modulator (zero global phase) under i1..i7.
pub fn forward_irradiances(x: f64, y: f64, z: f64, w: f64) -> Result<[f64; 7]> {
    let m = JonesMatrix::from_params(x, y, z, w, 0.0)?;
    let configs = canonical_configs();
    Ok(configs.map(|c| crate::jones::irradiance(c.p1, &m, c.p2)))
}

/// Model evaluation used inside the optimizer: irradiances and their
/// gradient with respect to (X, Y, Z, W).
struct ForwardModel {
    coeff: [[Complex64; 4]; 7],
}

impl ForwardModel {
    fn new() -> Self {
        Self {
            coeff: transmittance_coefficients(),
        }
    }

    fn eval(&self, p: &[f64; 4]) -> ([f64; 7], [[f64; 4]; 7]) {
        let mut values = [0.0; 7];
        let mut jac = [[0.0; 4]; 7];
        for k in 0..7 {
            let c = &self.coeff[k];
            let t: Complex64 = (0..4).map(|j| c[j] * p[j]).sum();
            values[k] = t.norm_sqr();
            for j in 0..4 {
                jac[k][j] = 2.0 * (t.conj() * c[j]).re;
            }
        }
        (values, jac)
    }

    fn cost(&self, p: &[f64; 4], measured: &[f64; 7]) -> f64 {
        let (v, _) = self.eval(p);
        v.iter().zip(measured).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Outcome of a single-grey-level fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreyFit {
    pub params: JonesParams,
    /// RMS irradiance misfit over the seven readings.
    pub residual: f64,
    pub iterations: usize,
}

/// Three orthonormal vectors spanning the tangent space of S³ at `p`.
fn tangent_basis(p: &[f64; 4]) -> [[f64; 4]; 3] {
    let mut basis: Vec<[f64; 4]> = Vec::with_capacity(3);
    // Start from the coordinate axes least aligned with p.
    let mut axes = [0usize, 1, 2, 3];
    axes.sort_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()));
    for &axis in &axes {
        if basis.len() == 3 {
            break;
        }
        let mut u = [0.0; 4];
        u[axis] = 1.0;
        let proj: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
        for (ui, pi) in u.iter_mut().zip(p) {
            *ui -= proj * pi;
        }
        for b in &basis {
            let d: f64 = u.iter().zip(b).map(|(a, c)| a * c).sum();
            for (ui, bi) in u.iter_mut().zip(b) {
                *ui -= d * bi;
            }
        }
        let n = norm4(&u);
        if n > 1e-6 {
            basis.push(u.map(|c| c / n));
        }
    }
    [basis[0], basis[1], basis[2]]
}

fn levenberg_marquardt(
    model: &ForwardModel,
    measured: &[f64; 7],
    start: &[f64; 4],
) -> (JonesParams, f64, usize, bool) {
    let mut p = JonesParams::normalized(*start)
        .map(|v| v.0)
        .unwrap_or([1.0, 0.0, 0.0, 0.0]);
    let (mut values, mut jac) = model.eval(&p);
    let mut cost: f64 = values
        .iter()
        .zip(measured)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let basis = tangent_basis(&p);
        // Jacobian restricted to the tangent space: 7×3.
        let mut jt = [[0.0; 3]; 7];
        for k in 0..7 {
            for (a, b) in basis.iter().enumerate() {
                jt[k][a] = (0..4).map(|j| jac[k][j] * b[j]).sum();
            }
        }
        let mut jtj = Matrix3::<f64>::zeros();
        let mut grad = Vector3::<f64>::zeros();
        for k in 0..7 {
            let r = values[k] - measured[k];
            for a in 0..3 {
                grad[a] += jt[k][a] * r;
                for b in 0..3 {
                    jtj[(a, b)] += jt[k][a] * jt[k][b];
                }
            }
        }

        let mut accepted = false;
        while !accepted {
            let damped = jtj + Matrix3::identity() * lambda;
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-grad));
            let mut step = [0.0; 4];
            for (a, b) in basis.iter().enumerate() {
                for j in 0..4 {
                    step[j] += delta[a] * b[j];
                }
            }
            let candidate = JonesParams::normalized([
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ])
            .map(|v| v.0)
            .unwrap_or(p);
            let moved = norm4(&sub4(&candidate, &p));
            if moved < STEP_TOLERANCE {
                converged = true;
                break;
            }
            let new_cost = model.cost(&candidate, measured);
            if new_cost < cost {
                p = candidate;
                (values, jac) = model.eval(&p);
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
            } else {
                lambda *= 4.0;
                if lambda > 1e20 {
                    converged = true;
                    break;
                }
            }
        }
        if converged {
            break;
        }
    }

    let rms = (cost / 7.0).sqrt();
    (JonesParams(p), rms, iterations, converged)
}

fn check_readings(measured: &[f64; 7]) -> Result<()> {
    for (id, v) in ConfigId::ALL.iter().zip(measured) {
        if !v.is_finite() || *v < 0.0 || *v > 1.0 + READING_SLACK {
            return Err(Error::InvalidMeasurements(format!(
                "{} reading {v} outside [0, {}]",
                id.name(),
                1.0 + READING_SLACK
            )));
        }
    }
    Ok(())
}

/// Least-squares inversion of seven readings, starting from `warm_start`.
///
/// The returned sign has a non-negative dot product with `warm_start`.
pub fn fit_grey_level(measured: &[f64; 7], warm_start: &[f64; 4]) -> Result<GreyFit> {
    check_readings(measured)?;
    let model = ForwardModel::new();
    let (params, residual, iterations, converged) =
        levenberg_marquardt(&model, measured, warm_start);
    if !converged {
        return Err(Error::FitFailure {
            grey: None,
            best: params.0,
            residual,
            iterations,
        });
    }
    Ok(GreyFit {
        params: params.aligned_with(&JonesParams(*warm_start)),
        residual,
        iterations,
    })
}

/// Starting points on a coarse hyperspherical grid over the X ≥ 0 half of S³.
fn multistart_grid() -> Vec<[f64; 4]> {
    use std::f64::consts::PI;
    let mut starts = Vec::new();
    for i in 0..4 {
        let alpha = (i as f64 + 0.5) * PI / 8.0;
        for j in 0..6 {
            let beta = (j as f64 + 0.5) * PI / 6.0;
            for k in 0..12 {
                let gamma = (k as f64 + 0.5) * PI / 6.0;
                starts.push([
                    alpha.cos(),
                    alpha.sin() * beta.cos(),
                    alpha.sin() * beta.sin() * gamma.cos(),
                    alpha.sin() * beta.sin() * gamma.sin(),
                ]);
            }
        }
    }
    starts
}

/// Best fit over the multi-start grid, returned with the canonical sign.
pub fn fit_grey_level_multistart(measured: &[f64; 7]) -> Result<GreyFit> {
    check_readings(measured)?;
    let model = ForwardModel::new();
    let mut best: Option<(JonesParams, f64, usize)> = None;
    let mut failure: Option<(JonesParams, f64, usize)> = None;
    for start in multistart_grid() {
        let (params, residual, iterations, converged) =
            levenberg_marquardt(&model, measured, &start);
        let slot = if converged { &mut best } else { &mut failure };
        if slot.is_none_or(|(_, r, _)| residual < r) {
            *slot = Some((params, residual, iterations));
        }
        if converged && residual < 1e-14 {
            break;
        }
    }
    match best {
        Some((params, residual, iterations)) => Ok(GreyFit {
            params: params.canonical_sign(),
            residual,
            iterations,
        }),
        None => {
            let (params, residual, iterations) = failure.expect("grid is non-empty");
            Err(Error::FitFailure {
                grey: None,
                best: params.0,
                residual,
                iterations,
            })
        }
    }
}

/// Seven normalized irradiance curves over a grey-level sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    grey_levels: Vec<u8>,
    /// Indexed `[config][grey]`.
    readings: [Vec<f64>; 7],
    integration_time_s: Option<f64>,
}

impl MeasurementSet {
    pub fn new(
        grey_levels: Vec<u8>,
        readings: [Vec<f64>; 7],
        integration_time_s: Option<f64>,
    ) -> Result<Self> {
        if grey_levels.is_empty() {
            return Err(Error::InvalidMeasurements("no grey levels".into()));
        }
        if let Some(w) = grey_levels.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMeasurements(format!(
                "grey levels must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        for (id, curve) in ConfigId::ALL.iter().zip(readings.iter()) {
            if curve.len() != grey_levels.len() {
                return Err(Error::InvalidMeasurements(format!(
                    "{} has {} readings for {} grey levels",
                    id.name(),
                    curve.len(),
                    grey_levels.len()
                )));
            }
            if let Some((g, v)) = grey_levels
                .iter()
                .zip(curve)
                .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0 + READING_SLACK)
            {
                return Err(Error::InvalidMeasurements(format!(
                    "{} reading {v} at grey {g} outside [0, {}]",
                    id.name(),
                    1.0 + READING_SLACK
                )));
            }
        }
        if let Some(t) = integration_time_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidMeasurements(format!(
                    "integration time {t} must be positive"
                )));
            }
        }
        Ok(Self {
            grey_levels,
            readings,
            integration_time_s,
        })
    }

    /// Builds a set from raw counts, dividing each curve by its own maximum.
    pub fn from_raw_counts(
        grey_levels: Vec<u8>,
        counts: [Vec<f64>; 7],
        integration_time_s: Option<f64>,
    ) -> Result<Self> {
        let readings = counts.map(|curve| {
            let max = curve.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                curve.iter().map(|v| v / max).collect()
            } else {
                curve
            }
        });
        Self::new(grey_levels, readings, integration_time_s)
    }

    pub fn grey_levels(&self) -> &[u8] {
        &self.grey_levels
    }

    pub fn curve(&self, id: ConfigId) -> &[f64] {
        &self.readings[id.index()]
    }

    pub fn integration_time_s(&self) -> Option<f64> {
        self.integration_time_s
    }

    pub fn len(&self) -> usize {
        self.grey_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grey_levels.is_empty()
    }

    /// The seven readings at the `i`-th grey level.
    pub fn readings_at(&self, i: usize) -> [f64; 7] {
        std::array::from_fn(|k| self.readings[k][i])
    }

    /// Noiseless readings generated from a parameter path.
    pub fn synthesize(path: &[(u8, JonesParams)]) -> Result<Self> {
        let mut readings: [Vec<f64>; 7] = Default::default();
        for (_, p) in path {
            let [x, y, z, w] = p.0;
            let values = forward_irradiances(x, y, z, w)?;
            for (curve, v) in readings.iter_mut().zip(values) {
                curve.push(v);
            }
        }
        Self::new(path.iter().map(|(g, _)| *g).collect(), readings, None)
    }

    /// Multiplies every reading by `1 + rel_sigma·N(0, 1)` (seeded), clamped
    /// to the accepted reading range.
    pub fn with_multiplicative_noise(&self, rel_sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let readings = self.readings.clone().map(|curve| {
            curve
                .into_iter()
                .map(|v| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    (v * (1.0 + rel_sigma * n)).clamp(0.0, 1.0 + READING_SLACK)
                })
                .collect()
        });
        Self {
            grey_levels: self.grey_levels.clone(),
            readings,
            integration_time_s: self.integration_time_s,
        }
    }

    /// Parses the `grey,i1,...,i7` CSV format.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(source, format!("cannot read header: {e}")))?
            .clone();
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(Error::parse(
                source,
                "empty file: missing header `grey,i1,...,i7`",
            ));
        }
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(source, format!("missing column `{name}`")))
        };
        let grey_col = column("grey")?;
        let mut cols = [0usize; 7];
        for (slot, id) in cols.iter_mut().zip(ConfigId::ALL) {
            *slot = column(id.name())?;
        }

        let mut greys = Vec::new();
        let mut readings: [Vec<f64>; 7] = Default::default();
        for (row_idx, record) in rdr.records().enumerate() {
            // Header is line 1.
            let line = row_idx + 2;
            let record = record.map_err(|e| Error::parse(source, format!("row {line}: {e}")))?;
            let field = |col: usize, name: &str| {
                record.get(col).ok_or_else(|| {
                    Error::parse(
                        source,
                        format!("row {line}, column `{name}`: missing value"),
                    )
                })
            };
            let g_raw = field(grey_col, "grey")?;
            let g: u8 = g_raw.parse().map_err(|_| {
                Error::parse(
                    source,
                    format!("row {line}, column `grey`: `{g_raw}` is not a grey level in 0..=255"),
                )
            })?;
            greys.push(g);
            for (k, id) in ConfigId::ALL.iter().enumerate() {
                let raw = field(cols[k], id.name())?;
                let v: f64 = raw.parse().map_err(|_| {
                    Error::parse(
                        source,
                        format!(
                            "row {line}, column `{}`: `{raw}` is not a number",
                            id.name()
                        ),
                    )
                })?;
                readings[k].push(v);
            }
        }
        if greys.is_empty() {
            return Err(Error::parse(source, "no data rows"));
        }
        Self::new(greys, readings, None)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("grey,i1,i2,i3,i4,i5,i6,i7\n");
        for (i, g) in self.grey_levels.iter().enumerate() {
            out.push_str(&g.to_string());
            for curve in &self.readings {
                out.push(',');
                out.push_str(&curve[i].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// One calibrated grey level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub grey: u8,
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "Y")]
    pub y: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub residual: f64,
}

impl LutEntry {
    pub fn params(&self) -> JonesParams {
        JonesParams([self.x, self.y, self.z, self.w])
    }

    pub fn matrix(&self) -> JonesMatrix {
        JonesMatrix::from_params_unchecked(self.x, self.y, self.z, self.w, 0.0)
    }
}

/// Grey level → (X, Y, Z, W) calibration table.
#[derive(Debug, Clone, PartialEq)]
pub struct GreyLevelLut {
    entries: Vec<LutEntry>,
}

impl GreyLevelLut {
    /// Validates unit norm, ascending grey levels and sign continuity.
    pub fn new(entries: Vec<LutEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidLut("no entries".into()));
        }
        for e in &entries {
            let n = e.params().norm_sq();
            if !n.is_finite() || (n - 1.0).abs() > LUT_NORM_TOL {
                return Err(Error::InvalidLut(format!(
                    "grey {}: X²+Y²+Z²+W² = {n}",
                    e.grey
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].grey <= w[0].grey {
                return Err(Error::InvalidLut(format!(
                    "grey levels must be strictly increasing ({} followed by {})",
                    w[0].grey, w[1].grey
                )));
            }
            if w[1].params().dot(&w[0].params()) < 0.0 {
                return Err(Error::InvalidLut(format!(
                    "sign discontinuity between grey {} and {}",
                    w[0].grey, w[1].grey
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a LUT from exact parameters, normalizing each vector and
    /// aligning signs for continuity.
    pub fn from_params(path: &[(u8, [f64; 4])]) -> Result<Self> {
        let mut entries = Vec::with_capacity(path.len());
        let mut prev: Option<JonesParams> = None;
        for (g, v) in path {
            let p = JonesParams::normalized(*v)
                .ok_or_else(|| Error::InvalidLut(format!("grey {g}: zero parameter vector")))?;
            let p = match prev {
                Some(r) => p.aligned_with(&r),
                None => p.canonical_sign(),
            };
            prev = Some(p);
            let [x, y, z, w] = p.0;
            entries.push(LutEntry {
                grey: *g,
                x,
                y,
                z,
                w,
                residual: 0.0,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[LutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grey_levels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.grey).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("LUT entries serialize")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let entries: Vec<LutEntry> =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        Self::new(entries)
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Noiseless measurement set this LUT would produce.
    pub fn synthesize_measurements(&self) -> Result<MeasurementSet> {
        let path: Vec<_> = self.entries.iter().map(|e| (e.grey, e.params())).collect();
        MeasurementSet::synthesize(&path)
    }
}

/// Fits every grey level in ascending order, warm-starting from the
/// previous solution. The first level uses the multi-start grid.
pub fn fit_lut(ms: &MeasurementSet) -> Result<GreyLevelLut> {
    let with_grey = |g: u8| {
        move |e: Error| match e {
            Error::FitFailure {
                best,
                residual,
                iterations,
                ..
            } => Error::FitFailure {
                grey: Some(g),
                best,
                residual,
                iterations,
            },
            other => other,
        }
    };

    let mut entries = Vec::with_capacity(ms.len());
    let mut prev: Option<JonesParams> = None;
    for (i, &g) in ms.grey_levels().iter().enumerate() {
        let measured = ms.readings_at(i);
        let fit = match prev {
            None => fit_grey_level_multistart(&measured).map_err(with_grey(g))?,
            Some(p) => fit_grey_level(&measured, &p.0).map_err(with_grey(g))?,
        };
        // Re-normalize to the stored tolerance and keep continuity.
        let params = JonesParams::normalized(fit.params.0).unwrap_or(fit.params);
        prev = Some(params);
        let [x, y, z, w] = params.0;
        entries.push(LutEntry {
            grey: g,
            x,
            y,
            z,
            w,
            residual: fit.residual,
        });
    }
    GreyLevelLut::new(entries)
}

/// Standard ±π unwrapping.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &v) in phase.iter().enumerate() {
        if i > 0 {
            let d = v - phase[i - 1];
            if d > PI {
                offset -= TAU;
            } else if d < -PI {
                offset += TAU;
            }
        }
        out.push(v + offset);
    }
    out
}

/// Predicted transmission and phase of the modulator between two polarizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingConfig {
    pub p1: PolarizerSpec,
    pub p2: PolarizerSpec,
    pub grey_levels: Vec<u8>,
    pub transmission: Vec<f64>,
    /// Unwrapped phase of the complex transmittance, radians.
    pub phase: Vec<f64>,
    pub phase_spread: f64,
    pub contrast: f64,
}

impl OperatingConfig {
    fn from_transmittances(
        p1: PolarizerSpec,
        p2: PolarizerSpec,
        grey_levels: Vec<u8>,
        t: &[Complex64],
    ) -> Self {
        let transmission: Vec<f64> = t.iter().map(|c| c.norm_sqr()).collect();
        let raw_phase: Vec<f64> = t.iter().map(|c| c.arg()).collect();
        let phase = unwrap_phase(&raw_phase);
        let (pmin, pmax) = min_max(&phase);
        let (tmin, tmax) = min_max(&transmission);
        Self {
            p1,
            p2,
            grey_levels,
            transmission,
            phase,
            phase_spread: pmax - pmin,
            contrast: tmax / tmin.max(CONTRAST_FLOOR),
        }
    }

    pub fn min_transmission(&self) -> f64 {
        min_max(&self.transmission).0
    }

    pub fn max_transmission(&self) -> f64 {
        min_max(&self.transmission).1
    }

    /// Lowest tabulated grey with minimal transmission.
    pub fn darkest_grey(&self) -> u8 {
        let min = self.min_transmission();
        let i = self
            .transmission
            .iter()
            .position(|&t| t == min)
            .unwrap_or(0);
        self.grey_levels[i]
    }

    /// Lowest tabulated grey with maximal transmission.
    pub fn brightest_grey(&self) -> u8 {
        let max = self.max_transmission();
        let i = self
            .transmission
            .iter()
            .position(|&t| t == max)
            .unwrap_or(0);
        self.grey_levels[i]
    }

    /// T at any grey, linearly interpolated between tabulated levels and
    /// clamped outside them.
    pub fn transmission_at(&self, grey: u8) -> f64 {
        interpolate(&self.grey_levels, &self.transmission, grey)
    }

    pub fn phase_at(&self, grey: u8) -> f64 {
        interpolate(&self.grey_levels, &self.phase, grey)
    }

    /// Largest |T(g) − recomputed T(g)| against `lut`.
    pub fn max_deviation_from(&self, lut: &GreyLevelLut) -> f64 {
        let fresh = predict_transmission(lut, self.p1, self.p2);
        self.transmission
            .iter()
            .zip(&fresh.transmission)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn interpolate(greys: &[u8], values: &[f64], grey: u8) -> f64 {
    match greys.binary_search(&grey) {
        Ok(i) => values[i],
        Err(0) => values[0],
        Err(i) if i >= greys.len() => values[greys.len() - 1],
        Err(i) => {
            let (g0, g1) = (f64::from(greys[i - 1]), f64::from(greys[i]));
            let f = (f64::from(grey) - g0) / (g1 - g0);
            values[i - 1] + f * (values[i] - values[i - 1])
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn predict_transmission(
    lut: &GreyLevelLut,
    p1: PolarizerSpec,
    p2: PolarizerSpec,
) -> OperatingConfig {
    let t: Vec<Complex64> = lut
        .entries()
        .iter()
        .map(|e| complex_transmittance(p1, &e.matrix(), p2))
        .collect();
    OperatingConfig::from_transmittances(p1, p2, lut.grey_levels(), &t)
}

/// Candidate polarizers of the configuration search, in tie-break order:
/// linear 0°..179° in 1° steps, then R, then L.
pub fn search_polarizers() -> Vec<PolarizerSpec> {
    let mut out: Vec<_> = (0..180)
        .map(|d| PolarizerSpec::linear_degrees(d as f64))
        .collect();
    out.push(PolarizerSpec::R);
    out.push(PolarizerSpec::L);
    out
}

/// Grid search for the polarizer pair with the flattest phase among those
/// reaching `min_contrast`.
pub fn find_amplitude_only_config(
    lut: &GreyLevelLut,
    min_contrast: f64,
) -> Result<OperatingConfig> {
    find_amplitude_only_config_over(lut, min_contrast, &search_polarizers())
}

/// Same search over a caller-supplied candidate list; earlier candidates win
/// ties.
pub fn find_amplitude_only_config_over(
    lut: &GreyLevelLut,
    min_contrast: f64,
    candidates: &[PolarizerSpec],
) -> Result<OperatingConfig> {
    if min_contrast.is_nan() || min_contrast <= 1.0 {
        return Err(Error::Config(format!(
            "min_contrast must exceed 1 (got {min_contrast})"
        )));
    }
    let matrices: Vec<JonesMatrix> = lut.entries().iter().map(LutEntry::matrix).collect();
    let pass: Vec<[Complex64; 2]> = candidates
        .iter()
        .map(|p| p.pass_state().components())
        .collect();

    let mut best: Option<(f64, usize, usize)> = None;
    let mut best_contrast: f64 = 0.0;
    let mut t = vec![Complex64::new(0.0, 0.0); matrices.len()];
    let mut raw_phase = vec![0.0; matrices.len()];
    for (i1, v1) in pass.iter().enumerate() {
        let out: Vec<[Complex64; 2]> = matrices.iter().map(|m| m.apply(*v1)).collect();
        for (i2, v2) in pass.iter().enumerate() {
            let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for (k, o) in out.iter().enumerate() {
                t[k] = v2[0].conj() * o[0] + v2[1].conj() * o[1];
                let tk = t[k].norm_sqr();
                tmin = tmin.min(tk);
                tmax = tmax.max(tk);
                raw_phase[k] = t[k].arg();
            }
            let contrast = tmax / tmin.max(CONTRAST_FLOOR);
            best_contrast = best_contrast.max(contrast);
            if contrast < min_contrast {
                continue;
            }
            let (pmin, pmax) = min_max(&unwrap_phase(&raw_phase));
            let spread = pmax - pmin;
            if best.is_none_or(|(s, _, _)| spread < s) {
                best = Some((spread, i1, i2));
            }
        }
    }
    match best {
        Some((_, i1, i2)) => Ok(predict_transmission(lut, candidates[i1], candidates[i2])),
        None => Err(Error::ConfigNotFound {
            required: min_contrast,
            best_contrast,
        }),
    }
}

/// Grey level whose predicted transmission is closest to `target_t`.
///
/// The curve is restricted to the stretch between its global minimum and
/// maximum and replaced by its monotone hull there (running max when
/// rising, running min when falling). The target is interpolated linearly
/// on that hull and the fractional grey rounded to the nearest integer,
/// halves going to the lower grey.
pub fn inverse_lookup(cfg: &OperatingConfig, target_t: f64) -> Result<u8> {
    const RANGE_EPS: f64 = 1e-12;
    let (tmin, tmax) = (cfg.min_transmission(), cfg.max_transmission());
    if !target_t.is_finite() || target_t < tmin - RANGE_EPS || target_t > tmax + RANGE_EPS {
        return Err(Error::TransmissionOutOfRange {
            target: target_t,
            min: tmin,
            max: tmax,
            slit: None,
        });
    }
    let target = target_t.clamp(tmin, tmax);
    let t = &cfg.transmission;
    let imin = t.iter().position(|&v| v == tmin).unwrap_or(0);
    let imax = t.iter().position(|&v| v == tmax).unwrap_or(0);
    if imin == imax {
        return Ok(cfg.grey_levels[imin]);
    }
    let rising = imin < imax;
    let (lo, hi) = if rising { (imin, imax) } else { (imax, imin) };

    let mut hull = Vec::with_capacity(hi - lo + 1);
    for &v in &t[lo..=hi] {
        let h = match hull.last() {
            None => v,
            Some(&prev) if rising => f64::max(prev, v),
            Some(&prev) => f64::min(prev, v),
        };
        hull.push(h);
    }
    let greys = &cfg.grey_levels[lo..=hi];

    for k in 0..hull.len() - 1 {
        let (h0, h1) = (hull[k], hull[k + 1]);
        let inside = if rising {
            h0 <= target && target <= h1
        } else {
            h1 <= target && target <= h0
        };
        if !inside {
            continue;
        }
        if h0 == target || h0 == h1 {
            return Ok(greys[k]);
        }
        let (g0, g1) = (f64::from(greys[k]), f64::from(greys[k + 1]));
        let frac = g0 + (target - h0) / (h1 - h0) * (g1 - g0);
        let floor = frac.floor();
        let rounded = if frac - floor <= 0.5 + 1e-9 {
            floor
        } else {
            floor + 1.0
        };
        return Ok(rounded.clamp(0.0, 255.0) as u8);
    }
    Ok(greys[greys.len() - 1])
}
