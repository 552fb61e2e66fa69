//! Experiment orchestration: spec files, presets, runners and artifacts.
//!
//! Every runner writes its outputs into a directory and finishes with a
//! provenance record holding the SHA-256 of each input and the resolved
//! experiment spec, so a run can be repeated byte for byte.

pub mod cli;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{
    find_amplitude_only_config, fit_lut, predict_transmission, GreyLevelLut, MeasurementSet,
    OperatingConfig,
};
use crate::error::{Error, Result};
use crate::jones::PolarizerSpec;
use crate::propagation::{
    focal_plane_pattern, focal_plane_pattern_pixelated, image_plane_profile, linear_grid,
    sample_counts, OpticalGeometry, ScanProfile,
};
use crate::qudit::{
    render_mask_at, state_from_aperture, LcdGeometry, MultiSlitAperture, PixelMask,
};
use svg::{line_plot, Series};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Contrast required when a spec asks for an automatic configuration search
/// without naming one.
pub const DEFAULT_MIN_CONTRAST: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Image,
    Focal,
}

impl std::str::FromStr for Plane {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "image" => Ok(Plane::Image),
            "focal" => Ok(Plane::Focal),
            _ => Err(format!("unknown plane `{s}` (expected image or focal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start_um: f64,
    pub stop_um: f64,
    pub step_um: f64,
}

impl GridSpec {
    pub fn positions(&self) -> Result<Vec<f64>> {
        linear_grid(self.start_um, self.stop_um, self.step_um)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub peak_rate_cps: f64,
    pub integration_s: f64,
    #[serde(default)]
    pub seed: u64,
}

/// How to pick the polarizer pair when a LUT is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigChoice {
    Polarizers {
        p1: PolarizerSpec,
        p2: PolarizerSpec,
    },
    Search {
        min_contrast: f64,
    },
}

impl ConfigChoice {
    pub fn resolve(&self, lut: &GreyLevelLut) -> Result<OperatingConfig> {
        match *self {
            ConfigChoice::Polarizers { p1, p2 } => Ok(predict_transmission(lut, p1, p2)),
            ConfigChoice::Search { min_contrast } => {
                if min_contrast.is_nan() || min_contrast <= 1.0 {
                    return Err(Error::Config(format!(
                        "min_contrast = {min_contrast} must exceed 1"
                    )));
                }
                find_amplitude_only_config(lut, min_contrast)
            }
        }
    }

    /// Reads either a saved `OperatingConfig` or a bare choice object.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        if let Ok(cfg) = serde_json::from_str::<OperatingConfig>(text) {
            return Ok(ConfigChoice::Polarizers {
                p1: cfg.p1,
                p2: cfg.p2,
            });
        }
        serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub aperture: MultiSlitAperture,
    pub geometry: OpticalGeometry,
    pub plane: Plane,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lut_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_config: Option<ConfigChoice>,
    /// Focal plane only: propagate the rendered pixel columns instead of
    /// ideal slits. Needs `lut_path`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pixelated: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.grid.positions()?;
        self.geometry.validate()?;
        if self.plane == Plane::Image {
            self.geometry.check_thin_lens()?;
        }
        if let Some(n) = &self.noise {
            if !(n.peak_rate_cps > 0.0 && n.peak_rate_cps.is_finite()) {
                return Err(Error::Config(format!(
                    "noise.peak_rate_cps = {} must be positive",
                    n.peak_rate_cps
                )));
            }
            if !(n.integration_s > 0.0 && n.integration_s.is_finite()) {
                return Err(Error::Config(format!(
                    "noise.integration_s = {} must be positive",
                    n.integration_s
                )));
            }
        }
        if self.pixelated {
            if self.plane != Plane::Focal {
                return Err(Error::Config(
                    "pixelated propagation is focal-plane only".into(),
                ));
            }
            if self.lut_path.is_none() {
                return Err(Error::Config("pixelated propagation needs lut_path".into()));
            }
        }
        if self.operating_config.is_some() && self.lut_path.is_none() {
            return Err(Error::Config(
                "operating_config given without lut_path".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        spec.geometry.validate()?;
        Ok(spec)
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Named scenarios: the three four-slits seen at the image and focal planes.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub transmissions_percent: [f64; 4],
    pub plane: Plane,
}

pub const UNIFORM: [f64; 4] = [100.0, 100.0, 100.0, 100.0];
pub const DECREASING: [f64; 4] = [100.0, 75.0, 50.0, 25.0];
pub const ALTERNATING: [f64; 4] = [50.0, 100.0, 25.0, 100.0];

pub const PRESETS: [Preset; 6] = [
    Preset {
        name: "paper-fig3a",
        description: "uniform four-slit, image plane",
        transmissions_percent: UNIFORM,
        plane: Plane::Image,
    },
    Preset {
        name: "paper-fig3b",
        description: "four-slit [100, 75, 50, 25], image plane",
        transmissions_percent: DECREASING,
        plane: Plane::Image,
    },
    Preset {
        name: "paper-fig3c",
        description: "four-slit [50, 100, 25, 100], image plane",
        transmissions_percent: ALTERNATING,
        plane: Plane::Image,
    },
    Preset {
        name: "paper-fig4a",
        description: "uniform four-slit, focal plane",
        transmissions_percent: UNIFORM,
        plane: Plane::Focal,
    },
    Preset {
        name: "paper-fig4b",
        description: "four-slit [100, 75, 50, 25], focal plane",
        transmissions_percent: DECREASING,
        plane: Plane::Focal,
    },
    Preset {
        name: "paper-fig4c",
        description: "four-slit [50, 100, 25, 100], focal plane",
        transmissions_percent: ALTERNATING,
        plane: Plane::Focal,
    },
];

/// Coincidence rate at the brightest point; sets the Poisson noise level.
pub const PRESET_PEAK_RATE_CPS: f64 = 100.0;
pub const PRESET_INTEGRATION_S: f64 = 5.0;

pub fn image_plane_grid() -> GridSpec {
    GridSpec {
        start_um: -600.0,
        stop_um: 600.0,
        step_um: 1.0,
    }
}

pub fn focal_plane_grid() -> GridSpec {
    GridSpec {
        start_um: -2000.0,
        stop_um: 2000.0,
        step_um: 1.0,
    }
}

pub fn find_preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .copied()
        .find(|p| p.name == name)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Error::Config(format!(
                "unknown preset `{name}` (available: {})",
                names.join(", ")
            ))
        })
}

impl Preset {
    /// Standard geometry; focal-plane presets use σ_c = 2d.
    pub fn spec(&self) -> Result<ExperimentSpec> {
        let aperture = MultiSlitAperture::standard_four_slit(self.transmissions_percent)?;
        let coherence = match self.plane {
            Plane::Image => None,
            Plane::Focal => Some(2.0 * aperture.period_um()),
        };
        Ok(ExperimentSpec {
            geometry: OpticalGeometry::standard(coherence),
            plane: self.plane,
            grid: match self.plane {
                Plane::Image => image_plane_grid(),
                Plane::Focal => focal_plane_grid(),
            },
            noise: Some(NoiseSpec {
                peak_rate_cps: PRESET_PEAK_RATE_CPS,
                integration_s: PRESET_INTEGRATION_S,
                seed: 0,
            }),
            aperture,
            lut_path: None,
            operating_config: None,
            pixelated: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub inputs: Vec<InputRecord>,
    #[serde(default)]
    pub spec: Option<serde_json::Value>,
    #[serde(default)]
    pub spec_sha256: Option<String>,
    pub outputs: Vec<String>,
}

impl Provenance {
    fn new(command: &str) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            seed: None,
            inputs: Vec::new(),
            spec: None,
            spec_sha256: None,
            outputs: Vec::new(),
        }
    }

    fn add_input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            role: role.into(),
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display(), e.to_string()))
    }
}

/// Files written by one run. Paths are absolute or relative to the
/// working directory, as given in the run options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunArtifacts {
    pub profile_csv: Option<PathBuf>,
    pub plot_svg: Option<PathBuf>,
    pub mask_pgm: Option<PathBuf>,
    pub mask_sidecar: Option<PathBuf>,
    pub lut_json: Option<PathBuf>,
    pub transmission_csv: Option<PathBuf>,
    pub extra_plots: Vec<PathBuf>,
    pub provenance: PathBuf,
}

impl RunArtifacts {
    pub fn files(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = [
            &self.profile_csv,
            &self.plot_svg,
            &self.mask_pgm,
            &self.mask_sidecar,
            &self.lut_json,
            &self.transmission_csv,
        ]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect();
        out.extend(self.extra_plots.iter().map(PathBuf::as_path));
        out.push(&self.provenance);
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// `dir/stem.suffix` where `stem` is the file stem of `base`.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// File stem for the outputs.
    pub name: String,
    /// Overrides the spec's noise seed.
    pub seed: Option<u64>,
}

/// Evaluates the spec's detection plane, optionally samples counts and
/// writes `<name>.csv`, `<name>.svg` and `<name>.provenance.json` (plus the
/// mask files when a LUT is given).
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunArtifacts> {
    spec.validate()?;
    let grid = spec.grid.positions()?;
    let mut prov = Provenance::new("scan");
    let mut artifacts = RunArtifacts::default();

    let mut mask: Option<PixelMask> = None;
    if let Some(lut_path) = &spec.lut_path {
        let bytes = read_bytes(lut_path)?;
        prov.add_input("lut", lut_path, &bytes);
        let text = String::from_utf8_lossy(&bytes);
        let lut = GreyLevelLut::from_json(&text, &lut_path.display().to_string())?;
        let choice = spec.operating_config.unwrap_or(ConfigChoice::Search {
            min_contrast: DEFAULT_MIN_CONTRAST,
        });
        let cfg = choice.resolve(&lut)?;
        let m = render_mask_at(&spec.aperture, &LcdGeometry::default(), &cfg, 0.0)?;
        let pgm = opts.out_dir.join(format!("{}.pgm", opts.name));
        let sidecar = opts.out_dir.join(format!("{}.mask.json", opts.name));
        write_file(&pgm, &m.to_pgm())?;
        write_file(&sidecar, m.sidecar_json().as_bytes())?;
        artifacts.mask_pgm = Some(pgm);
        artifacts.mask_sidecar = Some(sidecar);
        mask = Some(m);
    }

    let mut profile = match spec.plane {
        Plane::Image => image_plane_profile(&spec.aperture, &spec.geometry, &grid)?,
        Plane::Focal => match (&mask, spec.pixelated) {
            (Some(m), true) => focal_plane_pattern_pixelated(m, 0, &spec.geometry, &grid)?,
            _ => {
                let state = state_from_aperture(&spec.aperture)?;
                focal_plane_pattern(&state, &spec.aperture, &spec.geometry, &grid)?
            }
        },
    };
    if let Some(noise) = spec.noise {
        let seed = opts.seed.unwrap_or(noise.seed);
        prov.seed = Some(seed);
        profile = sample_counts(&profile, noise.peak_rate_cps, noise.integration_s, seed)?;
    }

    let csv_path = opts.out_dir.join(format!("{}.csv", opts.name));
    write_file(&csv_path, profile.to_csv().as_bytes())?;
    let svg_path = opts.out_dir.join(format!("{}.svg", opts.name));
    write_file(
        &svg_path,
        profile_svg(&opts.name, spec.plane, &profile).as_bytes(),
    )?;
    artifacts.profile_csv = Some(csv_path);
    artifacts.plot_svg = Some(svg_path);

    let mut resolved = spec.clone();
    if let (Some(n), Some(seed)) = (resolved.noise.as_mut(), opts.seed) {
        n.seed = seed;
    }
    let spec_json = resolved.to_json();
    prov.spec_sha256 = Some(sha256_hex(spec_json.as_bytes()));
    prov.spec = Some(serde_json::from_str(&spec_json).expect("valid json"));
    finish(
        prov,
        artifacts,
        &opts.out_dir.join(format!("{}.provenance.json", opts.name)),
    )
}

fn finish(mut prov: Provenance, mut artifacts: RunArtifacts, path: &Path) -> Result<RunArtifacts> {
    artifacts.provenance = path.to_path_buf();
    prov.outputs = artifacts.files().iter().map(|p| file_name(p)).collect();
    let mut json = serde_json::to_string_pretty(&prov).expect("provenance serializes");
    json.push('\n');
    write_file(path, json.as_bytes())?;
    Ok(artifacts)
}

fn profile_svg(name: &str, plane: Plane, profile: &ScanProfile) -> String {
    let xlabel = match plane {
        Plane::Image => "image-plane position x (µm)",
        Plane::Focal => "focal-plane position x (µm)",
    };
    let scaled: Option<Vec<f64>> = profile.counts().map(|c| {
        let max = c.iter().copied().max().unwrap_or(0).max(1) as f64;
        c.iter().map(|&v| v as f64 / max).collect()
    });
    let mut series = vec![Series {
        label: "expected",
        xs: profile.positions(),
        ys: profile.expected_rate(),
        points: false,
    }];
    if let Some(s) = &scaled {
        series.push(Series {
            label: "counts (scaled)",
            xs: profile.positions(),
            ys: s,
            points: true,
        });
    }
    line_plot(name, xlabel, "normalized coincidence rate", &series)
}

/// Fits a LUT from a seven-curve CSV. Writes the LUT to `output_json` and,
/// next to it, `<stem>.xyzw.svg`, `<stem>.transmission.csv` and
/// `<stem>.transmission.svg` for the polarizer pair `(p1, p2)`.
pub fn run_calibration(
    input_csv: &Path,
    output_json: &Path,
    p1: PolarizerSpec,
    p2: PolarizerSpec,
) -> Result<RunArtifacts> {
    let bytes = read_bytes(input_csv)?;
    let ms = MeasurementSet::from_csv_reader(bytes.as_slice(), &input_csv.display().to_string())?;
    let mut prov = Provenance::new("calibrate");
    prov.add_input("measurements", input_csv, &bytes);

    let lut = fit_lut(&ms)?;
    let mut artifacts = RunArtifacts::default();
    write_file(output_json, lut.to_json().as_bytes())?;
    artifacts.lut_json = Some(output_json.to_path_buf());

    let greys: Vec<f64> = lut.grey_levels().iter().map(|&g| g as f64).collect();
    let coeffs: Vec<Vec<f64>> = (0..4)
        .map(|j| lut.entries().iter().map(|e| e.params().0[j]).collect())
        .collect();
    let xyzw = line_plot(
        "Jones coefficients",
        "grey level",
        "coefficient",
        &["X", "Y", "Z", "W"]
            .iter()
            .zip(&coeffs)
            .map(|(label, ys)| Series {
                label,
                xs: &greys,
                ys,
                points: false,
            })
            .collect::<Vec<_>>(),
    );
    let xyzw_path = sibling(output_json, ".xyzw.svg");
    write_file(&xyzw_path, xyzw.as_bytes())?;

    let cfg = predict_transmission(&lut, p1, p2);
    let tcsv = sibling(output_json, ".transmission.csv");
    write_file(&tcsv, transmission_csv(&cfg).as_bytes())?;
    let tsvg = sibling(output_json, ".transmission.svg");
    let title = format!("P1 = {}, P2 = {}", p1.label(), p2.label());
    let t_plot = line_plot(
        &title,
        "grey level",
        "transmission / phase (rad)",
        &[
            Series {
                label: "T",
                xs: &greys,
                ys: &cfg.transmission,
                points: false,
            },
            Series {
                label: "phase",
                xs: &greys,
                ys: &cfg.phase,
                points: false,
            },
        ],
    );
    write_file(&tsvg, t_plot.as_bytes())?;
    artifacts.transmission_csv = Some(tcsv);
    artifacts.extra_plots = vec![xyzw_path, tsvg];
    finish(prov, artifacts, &sibling(output_json, ".provenance.json"))
}

/// `grey,transmission,phase_rad`, one row per calibrated grey level.
pub fn transmission_csv(cfg: &OperatingConfig) -> String {
    let mut out = String::from("grey,transmission,phase_rad\n");
    for ((g, t), p) in cfg
        .grey_levels
        .iter()
        .zip(&cfg.transmission)
        .zip(&cfg.phase)
    {
        out.push_str(&format!("{g},{t},{p}\n"));
    }
    out
}

/// Renders an aperture onto the default LCD. Writes the PGM to `output_pgm`,
/// the metadata sidecar to `<stem>.json` and the provenance record.
pub fn run_render(
    aperture_json: &Path,
    lut_json: &Path,
    choice: &ConfigChoice,
    output_pgm: &Path,
) -> Result<RunArtifacts> {
    let ap_bytes = read_bytes(aperture_json)?;
    let lut_bytes = read_bytes(lut_json)?;
    let ap = MultiSlitAperture::from_json(
        &String::from_utf8_lossy(&ap_bytes),
        &aperture_json.display().to_string(),
    )?;
    let lut = GreyLevelLut::from_json(
        &String::from_utf8_lossy(&lut_bytes),
        &lut_json.display().to_string(),
    )?;
    let cfg = choice.resolve(&lut)?;
    let mask = render_mask_at(&ap, &LcdGeometry::default(), &cfg, 0.0)?;

    let mut prov = Provenance::new("render");
    prov.add_input("aperture", aperture_json, &ap_bytes);
    prov.add_input("lut", lut_json, &lut_bytes);
    prov.spec = Some(serde_json::to_value(choice).expect("choice serializes"));

    let sidecar = output_pgm.with_extension("json");
    write_file(output_pgm, &mask.to_pgm())?;
    write_file(&sidecar, mask.sidecar_json().as_bytes())?;
    let artifacts = RunArtifacts {
        mask_pgm: Some(output_pgm.to_path_buf()),
        mask_sidecar: Some(sidecar),
        ..Default::default()
    };
    finish(prov, artifacts, &sibling(output_pgm, ".provenance.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::local_maxima;

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            let spec = p.spec().unwrap();
            spec.validate().unwrap();
            assert_eq!(find_preset(p.name).unwrap().name, p.name);
        }
        assert!(matches!(find_preset("fig5"), Err(Error::Config(_))));
    }

    #[test]
    fn focal_presets_default_to_twice_the_period() {
        let s = find_preset("paper-fig4a").unwrap().spec().unwrap();
        assert_eq!(s.geometry.coherence_um, Some(416.0));
        let s = find_preset("paper-fig3a").unwrap().spec().unwrap();
        assert_eq!(s.geometry.coherence_um, None);
    }

    #[test]
    fn spec_json_roundtrip() {
        let mut spec = find_preset("paper-fig4c").unwrap().spec().unwrap();
        spec.lut_path = Some("lut.json".into());
        spec.operating_config = Some(ConfigChoice::Polarizers {
            p1: PolarizerSpec::H,
            p2: PolarizerSpec::linear_degrees(30.0),
        });
        let back = ExperimentSpec::from_json(&spec.to_json(), "mem").unwrap();
        assert_eq!(back, spec);
        spec.operating_config = Some(ConfigChoice::Search { min_contrast: 20.0 });
        assert_eq!(
            ExperimentSpec::from_json(&spec.to_json(), "mem").unwrap(),
            spec
        );
    }

    #[test]
    fn spec_rejects_unknown_fields_and_bad_grids() {
        let spec = find_preset("paper-fig3a").unwrap().spec().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        v["colour"] = 3.into();
        assert!(matches!(
            ExperimentSpec::from_json(&v.to_string(), "mem"),
            Err(Error::Parse { .. })
        ));
        let mut bad = spec.clone();
        bad.grid.step_um = 5000.0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let mut bad = spec;
        bad.geometry.image_mm = 200.0;
        assert!(matches!(bad.validate(), Err(Error::Geometry(_))));
    }

    #[test]
    fn config_choice_reads_saved_operating_config() {
        let lut =
            GreyLevelLut::from_params(&[(0, [1.0, 0.0, 0.0, 0.0]), (1, [0.0, 0.0, 1.0, 0.0])])
                .unwrap();
        let cfg = predict_transmission(&lut, PolarizerSpec::R, PolarizerSpec::V);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            ConfigChoice::from_json(&text, "mem").unwrap(),
            ConfigChoice::Polarizers {
                p1: PolarizerSpec::R,
                p2: PolarizerSpec::V
            }
        );
        assert_eq!(
            ConfigChoice::from_json(r#"{"min_contrast": 4}"#, "mem").unwrap(),
            ConfigChoice::Search { min_contrast: 4.0 }
        );
        assert!(ConfigChoice::from_json("{}", "mem").is_err());
        assert!(ConfigChoice::Search { min_contrast: 0.5 }
            .resolve(&lut)
            .is_err());
    }

    #[test]
    fn experiment_writes_parseable_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = find_preset("paper-fig3a").unwrap().spec().unwrap();
        let opts = RunOptions {
            out_dir: dir.path().into(),
            name: "a".into(),
            seed: Some(5),
        };
        let art = run_experiment(&spec, &opts).unwrap();
        let p = ScanProfile::from_csv_path(art.profile_csv.as_ref().unwrap()).unwrap();
        assert!(p.counts().is_some());
        let peaks = local_maxima(p.positions(), p.expected_rate(), 1e-9, 0.5);
        assert_eq!(peaks.len(), 4);
        let prov = Provenance::from_json_path(&art.provenance).unwrap();
        assert_eq!(prov.seed, Some(5));
        assert_eq!(prov.outputs, ["a.csv", "a.svg", "a.provenance.json"]);
        let replay: ExperimentSpec = serde_json::from_value(prov.spec.unwrap()).unwrap();
        assert_eq!(replay.noise.unwrap().seed, 5);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/lut.json"), ".xyzw.svg"),
            Path::new("out/lut.xyzw.svg")
        );
        assert_eq!(
            sibling(Path::new("m.pgm"), ".provenance.json"),
            Path::new("m.provenance.json")
        );
    }
}
