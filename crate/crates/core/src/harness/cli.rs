//! Command-line front end. `run` returns the process exit code:
//! 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
//!
//! Values from a spec file or preset are applied first; flags override them.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    find_preset, focal_plane_grid, image_plane_grid, run_calibration, run_experiment, run_render,
    ConfigChoice, ExperimentSpec, GridSpec, NoiseSpec, Plane, RunArtifacts, RunOptions, PRESETS,
};
use crate::calibration::GreyLevelLut;
use crate::error::{Error, Result};
use crate::jones::PolarizerSpec;
use crate::propagation::OpticalGeometry;
use crate::qudit::{amplitudes_from_transmissions, MultiSlitAperture};

#[derive(Debug, Parser)]
#[command(
    name = "qudit-slm",
    version,
    about = "Four-slit spatial qudit simulator with a calibrated LCD modulator"
)]
pub struct Cli {
    /// Seed for every random draw (overrides spec files and presets).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the slit amplitudes α_l = √(t_l/Σt) for a transmission list.
    Amplitudes {
        /// Transmissions, space- or comma-separated (any common scale).
        #[arg(required = true, num_args = 1.., allow_negative_numbers = true)]
        transmissions: Vec<String>,
        /// Print a JSON array instead of plain text.
        #[arg(long)]
        json: bool,
    },
    /// Fit a Jones-parameter LUT from seven normalized irradiance curves.
    Calibrate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// First polarizer for the predicted transmission curve.
        #[arg(long, default_value = "H", value_parser = parse_polarizer)]
        p1: PolarizerSpec,
        #[arg(long, default_value = "V", value_parser = parse_polarizer)]
        p2: PolarizerSpec,
    },
    /// Search polarizer pairs for amplitude-only modulation.
    FindConfig {
        #[arg(long)]
        lut: PathBuf,
        #[arg(long)]
        min_contrast: f64,
        /// Write the chosen operating configuration as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render an aperture onto the LCD as a PGM mask plus JSON sidecar.
    Render {
        #[arg(long)]
        aperture: PathBuf,
        #[arg(long)]
        lut: PathBuf,
        /// Operating configuration JSON (from `find-config --output`).
        #[arg(long, conflicts_with_all = ["p1", "p2", "min_contrast"])]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_polarizer, requires = "p2")]
        p1: Option<PolarizerSpec>,
        #[arg(long, value_parser = parse_polarizer, requires = "p1")]
        p2: Option<PolarizerSpec>,
        /// Search for an amplitude-only pair with at least this contrast.
        #[arg(long, conflicts_with = "p1")]
        min_contrast: Option<f64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate an image- or focal-plane scan.
    Scan {
        #[arg(long)]
        plane: Option<Plane>,
        /// Full experiment spec (JSON); other flags override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Aperture JSON (default: uniform standard four-slit).
        #[arg(long)]
        aperture: Option<PathBuf>,
        /// Geometry JSON (default: standard geometry, fully coherent).
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        start_um: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        stop_um: Option<f64>,
        #[arg(long)]
        step_um: Option<f64>,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long, value_parser = parse_polarizer, requires_all = ["p2", "lut"])]
        p1: Option<PolarizerSpec>,
        #[arg(long, value_parser = parse_polarizer, requires = "p1")]
        p2: Option<PolarizerSpec>,
        /// Propagate the rendered pixel columns instead of ideal slits.
        #[arg(long, requires = "lut")]
        pixelated: bool,
        #[arg(long, default_value = "scan")]
        name: String,
        #[command(flatten)]
        common: RunFlags,
    },
    /// Run one of the named scenarios (`--list` shows them).
    Preset {
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        /// List the available presets.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        common: RunFlags,
    },
}

#[derive(Debug, Args)]
pub struct RunFlags {
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Transverse coherence width in µm, or `inf` for full coherence.
    #[arg(long, value_parser = parse_coherence)]
    pub coherence_um: Option<Coherence>,
    #[arg(long)]
    pub detector_slit_um: Option<f64>,
    /// Poisson noise: coincidence rate at the profile peak.
    #[arg(long)]
    pub peak_rate_cps: Option<f64>,
    #[arg(long)]
    pub integration_s: Option<f64>,
    /// Skip Poisson sampling (the counts column stays empty).
    #[arg(long, conflicts_with_all = ["peak_rate_cps", "integration_s"])]
    pub noiseless: bool,
}

/// `None` inside means infinite coherence width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence(pub Option<f64>);

fn parse_polarizer(s: &str) -> std::result::Result<PolarizerSpec, String> {
    PolarizerSpec::parse(s)
        .ok_or_else(|| format!("unknown polarizer `{s}` (H, V, D, A, R, L or an angle in degrees)"))
}

fn parse_coherence(s: &str) -> std::result::Result<Coherence, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(Coherence(None)),
        t => match t.parse::<f64>() {
            Ok(v) if v.is_infinite() && v > 0.0 => Ok(Coherence(None)),
            Ok(v) if v > 0.0 => Ok(Coherence(Some(v))),
            _ => Err(format!("coherence width `{s}` must be positive or `inf`")),
        },
    }
}

fn parse_transmissions(items: &[String]) -> Result<Vec<f64>> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Config(format!("transmission `{s}` is not a number")))
        })
        .collect()
}

/// Plain-text amplitude line: values to six decimals, space separated.
pub fn format_amplitudes(alpha: &[f64]) -> String {
    alpha
        .iter()
        .map(|a| format!("{a:.6}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl RunFlags {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(Coherence(c)) = self.coherence_um {
            spec.geometry.coherence_um = c;
        }
        if let Some(w) = self.detector_slit_um {
            spec.geometry.detector_slit_um = w;
        }
        if self.noiseless {
            spec.noise = None;
        } else if self.peak_rate_cps.is_some() || self.integration_s.is_some() {
            let base = spec.noise.unwrap_or(NoiseSpec {
                peak_rate_cps: super::PRESET_PEAK_RATE_CPS,
                integration_s: super::PRESET_INTEGRATION_S,
                seed: 0,
            });
            spec.noise = Some(NoiseSpec {
                peak_rate_cps: self.peak_rate_cps.unwrap_or(base.peak_rate_cps),
                integration_s: self.integration_s.unwrap_or(base.integration_s),
                seed: base.seed,
            });
        }
    }
}

fn report(out: &mut dyn Write, art: &RunArtifacts) -> Result<()> {
    for f in art.files() {
        writeln!(out, "wrote {}", f.display()).map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::io("<stdout>", e);
    match cli.command {
        Command::Amplitudes {
            transmissions,
            json,
        } => {
            let t = parse_transmissions(&transmissions)?;
            let alpha = amplitudes_from_transmissions(&t)?;
            if json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&alpha).expect("floats serialize")
                )
                .map_err(io)?;
            } else {
                writeln!(out, "{}", format_amplitudes(&alpha)).map_err(io)?;
            }
        }
        Command::Calibrate {
            input,
            output,
            p1,
            p2,
        } => {
            let art = run_calibration(&input, &output, p1, p2)?;
            report(out, &art)?;
        }
        Command::FindConfig {
            lut,
            min_contrast,
            output,
        } => {
            let table = GreyLevelLut::from_json_path(&lut)?;
            let cfg = ConfigChoice::Search { min_contrast }.resolve(&table)?;
            writeln!(
                out,
                "p1={} p2={} phase_spread_rad={:.6e} contrast={:.4} t_min={:.6} t_max={:.6}",
                cfg.p1.label(),
                cfg.p2.label(),
                cfg.phase_spread,
                cfg.contrast,
                cfg.min_transmission(),
                cfg.max_transmission()
            )
            .map_err(io)?;
            if let Some(path) = output {
                let json = serde_json::to_string_pretty(&cfg).expect("config serializes");
                std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
                writeln!(out, "wrote {}", path.display()).map_err(io)?;
            }
        }
        Command::Render {
            aperture,
            lut,
            config,
            p1,
            p2,
            min_contrast,
            output,
        } => {
            let choice = match (config, p1.zip(p2), min_contrast) {
                (Some(path), _, _) => {
                    ConfigChoice::from_json(&read_text(&path)?, &path.display().to_string())?
                }
                (None, Some((p1, p2)), _) => ConfigChoice::Polarizers { p1, p2 },
                (None, None, Some(min_contrast)) => ConfigChoice::Search { min_contrast },
                (None, None, None) => ConfigChoice::Search {
                    min_contrast: super::DEFAULT_MIN_CONTRAST,
                },
            };
            let art = run_render(&aperture, &lut, &choice, &output)?;
            report(out, &art)?;
        }
        Command::Scan {
            plane,
            spec,
            aperture,
            geometry,
            start_um,
            stop_um,
            step_um,
            lut,
            p1,
            p2,
            pixelated,
            name,
            common,
        } => {
            let mut s = match &spec {
                Some(path) => ExperimentSpec::from_json_path(path)?,
                None => {
                    let plane = plane.unwrap_or(Plane::Focal);
                    ExperimentSpec {
                        aperture: MultiSlitAperture::standard_four_slit(super::UNIFORM)?,
                        geometry: OpticalGeometry::standard(None),
                        plane,
                        grid: match plane {
                            Plane::Image => image_plane_grid(),
                            Plane::Focal => focal_plane_grid(),
                        },
                        noise: None,
                        lut_path: None,
                        operating_config: None,
                        pixelated: false,
                    }
                }
            };
            if let Some(p) = plane {
                s.plane = p;
            }
            if let Some(path) = &aperture {
                s.aperture = MultiSlitAperture::from_json_path(path)?;
            }
            if let Some(path) = &geometry {
                s.geometry =
                    OpticalGeometry::from_json(&read_text(path)?, &path.display().to_string())?;
            }
            s.grid = GridSpec {
                start_um: start_um.unwrap_or(s.grid.start_um),
                stop_um: stop_um.unwrap_or(s.grid.stop_um),
                step_um: step_um.unwrap_or(s.grid.step_um),
            };
            if lut.is_some() {
                s.lut_path = lut;
            }
            if let Some((p1, p2)) = p1.zip(p2) {
                s.operating_config = Some(ConfigChoice::Polarizers { p1, p2 });
            }
            s.pixelated |= pixelated;
            common.apply(&mut s);
            let opts = RunOptions {
                out_dir: common.out_dir.clone(),
                name,
                seed: cli.seed,
            };
            report(out, &run_experiment(&s, &opts)?)?;
        }
        Command::Preset { name, list, common } => {
            if list {
                for p in PRESETS {
                    writeln!(out, "{:<12} {}", p.name, p.description).map_err(io)?;
                }
                return Ok(());
            }
            let name = name.expect("clap enforces a name without --list");
            let preset = find_preset(&name)?;
            let mut s = preset.spec()?;
            common.apply(&mut s);
            let opts = RunOptions {
                out_dir: common.out_dir.clone(),
                name,
                seed: cli.seed,
            };
            report(out, &run_experiment(&s, &opts)?)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// printing results to `out` and a one-line `error[CODE]: message` to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "error[E_USAGE]: {first}");
            return 2;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error[{}]: {msg}", e.code());
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("qudit-slm").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn amplitudes_plain_and_json() {
        let (code, out, _) = run_capture(&["amplitudes", "100", "75", "50", "25"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "0.632456 0.547723 0.447214 0.316228");
        let (code, out, _) = run_capture(&["amplitudes", "--json", "1,0,0,0"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "[1.0,0.0,0.0,0.0]");
    }

    #[test]
    fn amplitudes_errors() {
        let (code, _, err) = run_capture(&["amplitudes", "0", "0"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error[E_DEGENERATE_APERTURE]"), "{err}");
        assert_eq!(err.lines().count(), 1);
        let (code, _, err) = run_capture(&["amplitudes", "x"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error[E_CONFIG]"), "{err}");
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, _, err) = run_capture(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error[E_USAGE]"));
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("preset"));
    }

    #[test]
    fn preset_list_and_unknown() {
        let (code, out, _) = run_capture(&["preset", "--list"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 6);
        let (code, _, err) = run_capture(&["preset", "paper-fig9"]);
        assert_eq!(code, 2);
        assert!(err.contains("E_CONFIG"));
    }

    #[test]
    fn coherence_flag_values() {
        assert_eq!(parse_coherence("inf").unwrap(), Coherence(None));
        assert_eq!(parse_coherence("Infinity").unwrap(), Coherence(None));
        assert_eq!(parse_coherence("416").unwrap(), Coherence(Some(416.0)));
        assert!(parse_coherence("0").is_err());
        assert!(parse_coherence("-3").is_err());
    }

    #[test]
    fn flags_override_preset_values() {
        let mut s = find_preset("paper-fig4a").unwrap().spec().unwrap();
        let flags = RunFlags {
            out_dir: ".".into(),
            coherence_um: Some(Coherence(None)),
            detector_slit_um: Some(10.0),
            peak_rate_cps: Some(7.0),
            integration_s: None,
            noiseless: false,
        };
        flags.apply(&mut s);
        assert_eq!(s.geometry.coherence_um, None);
        assert_eq!(s.geometry.detector_slit_um, 10.0);
        assert_eq!(s.noise.unwrap().peak_rate_cps, 7.0);
        assert_eq!(
            s.noise.unwrap().integration_s,
            super::super::PRESET_INTEGRATION_S
        );
    }
}
