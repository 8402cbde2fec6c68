//! Flat key-value run configuration.
//!
//! Resolution order: registry defaults, then `--config` file, then
//! `--key value` overrides, then the dedicated flags. Every physical
//! parameter is validated before a command starts computing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use photodetection::detector::default_theta;
use photodetection::microdetector::SPEED_OF_LIGHT;
use photodetection::{
    DetectorParams, FieldMode, IdealizedDetector, PhotonDistribution, StateFamily, Variant,
};

use crate::{CliError, Format};

/// `(key, default, description)`; an empty default means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("lambda0", "500", "sensor resonance wavelength (nm)"),
    ("g", "1e11", "sensor-field coupling (Hz)"),
    ("b", "380", "bias ratio gamma/g"),
    ("nbar_det", "1e-11", "mean intrinsic reservoir excitations"),
    ("upsilon", "5e5", "averaging product gamma*T"),
    ("lambda", "500", "field wavelength (nm)"),
    ("n_max", "20", "largest photon number in coefficient tables"),
    ("b_min", "10", "first bias of the scan grid"),
    ("b_max", "2000", "last bias of the scan grid"),
    ("b_step", "10", "bias grid step"),
    ("drop", "1e-3", "relative fall below the plateau that marks breakdown"),
    ("lambda_min", "300", "first wavelength of the brightness grid (nm)"),
    ("lambda_max", "1000", "last wavelength of the brightness grid (nm)"),
    ("lambda_step", "5", "wavelength grid step (nm)"),
    ("b_values", "100,380", "comma-separated biases for the brightness curves"),
    ("state", "number", "field state family: number, coherent or thermal"),
    ("nbar", "100", "mean photon number of the field state"),
    ("tail_tol", "1e-12", "admissible truncated population mass"),
    ("eta", "0.6", "quantum efficiency"),
    ("d", "5e-3", "dark count ratio"),
    ("model", "e", "counting model for waiting times: sd or e"),
    ("rt_min", "0", "first point of the R*t grid"),
    ("rt_max", "120", "last point of the R*t grid"),
    ("rt_step", "5", "R*t grid step"),
    ("theta", "", "waiting-time window in R*t units (default 10/eta)"),
    ("tau_points", "2001", "delay grid points inside the window"),
    ("seed", "1", "Monte Carlo seed"),
    ("n_traj", "100000", "Monte Carlo trajectories"),
    ("out", "", "output path"),
    ("format", "csv", "output format"),
    ("threads", "", "worker threads"),
];

/// Metadata keys with this prefix are results, skipped when read back.
pub const RESULT_PREFIX: &str = "result.";

#[derive(Debug, Clone)]
pub struct RunConfig {
    raw: BTreeMap<String, String>,
    pub params: DetectorParams<f64>,
    pub mode: FieldMode<f64>,
    pub n_max: usize,
    pub b_grid: Vec<f64>,
    pub drop: f64,
    pub lambda_grid: Vec<f64>,
    pub b_values: Vec<f64>,
    pub state: StateFamily,
    pub nbar: f64,
    pub tail_tol: f64,
    pub eta: f64,
    pub d: f64,
    pub model: Variant,
    pub rt_grid: Vec<f64>,
    pub theta: f64,
    pub theta_defaulted: bool,
    pub tau_points: usize,
    pub seed: u64,
    pub n_traj: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

fn set(map: &mut BTreeMap<String, String>, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
    let key = key.trim().replace('-', "_");
    if !known(&key) {
        return Err(bad(format!("unknown parameter `{key}` in {origin}")));
    }
    map.insert(key, value.trim().to_string());
    Ok(())
}

fn read_file(path: &Path, map: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let origin = path.display().to_string();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("{origin}:{}: expected `key = value`", i + 1)))?;
        if k.trim().starts_with(RESULT_PREFIX) {
            continue;
        }
        set(map, k, v, &origin)?;
    }
    Ok(())
}

fn apply_overrides(tokens: &[String], map: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let flag = tok
            .strip_prefix("--")
            .ok_or_else(|| bad(format!("expected `--key value`, found `{tok}`")))?;
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| bad(format!("missing value for `--{flag}`")))?;
                (flag.to_string(), v.clone())
            }
        };
        if key == "config" {
            return Err(bad("--config must come before parameter overrides"));
        }
        set(map, &key, &value, "command line")?;
    }
    Ok(())
}

fn num(map: &BTreeMap<String, String>, key: &str) -> Result<f64, CliError> {
    let v = &map[key];
    let x: f64 = v.parse().map_err(|_| bad(format!("`{key}` must be a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(bad(format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn count<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let v = &map[key];
    v.parse()
        .map_err(|_| bad(format!("`{key}` must be a non-negative integer, got `{v}`")))
}

fn grid(map: &BTreeMap<String, String>, prefix: &str) -> Result<Vec<f64>, CliError> {
    let lo = num(map, &format!("{prefix}_min"))?;
    let hi = num(map, &format!("{prefix}_max"))?;
    let step = num(map, &format!("{prefix}_step"))?;
    if step <= 0.0 || hi < lo {
        return Err(bad(format!("{prefix} grid needs {prefix}_step > 0 and {prefix}_max >= {prefix}_min")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

impl RunConfig {
    pub fn resolve(
        file: Option<&Path>,
        overrides: &[String],
        out: Option<&Path>,
        format: Option<Format>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, String> =
            KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            read_file(path, &mut map)?;
        }
        apply_overrides(overrides, &mut map)?;
        if let Some(p) = out {
            map.insert("out".into(), p.display().to_string());
        }
        if format.is_some() {
            map.insert("format".into(), "csv".into());
        }
        if let Some(s) = seed {
            map.insert("seed".into(), s.to_string());
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<Self, CliError> {
        if map["format"] != "csv" {
            return Err(bad(format!("unsupported format `{}`", map["format"])));
        }
        let params = DetectorParams::new(
            num(&map, "lambda0")?,
            num(&map, "g")?,
            num(&map, "b")?,
            num(&map, "nbar_det")?,
            num(&map, "upsilon")?,
        )?;
        let mode = FieldMode::new(num(&map, "lambda")?)?;
        let n_max: usize = count(&map, "n_max")?;
        if n_max < 2 {
            return Err(bad("n_max must be at least 2: the photon-number range is empty"));
        }
        let b_grid = grid(&map, "b")?;
        let lambda_grid = grid(&map, "lambda")?;
        let b_values = map["b_values"]
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("bad bias `{s}` in b_values"))))
            .collect::<Result<Vec<_>, _>>()?;
        if b_values.is_empty() {
            return Err(bad("b_values is empty"));
        }
        for &b in &b_values {
            params.with_b(b)?;
        }
        let drop = num(&map, "drop")?;
        if !(drop > 0.0 && drop < 1.0) {
            return Err(bad("drop must lie in (0, 1)"));
        }
        let state: StateFamily = map["state"].parse()?;
        let nbar = num(&map, "nbar")?;
        let tail_tol = num(&map, "tail_tol")?;
        let eta = num(&map, "eta")?;
        let d = num(&map, "d")?;
        let model: Variant = map["model"].parse()?;
        IdealizedDetector::unit(model, eta, d)?;
        let rt_grid = grid(&map, "rt")?;
        if rt_grid[0] < 0.0 {
            return Err(bad("rt_min must be >= 0"));
        }
        let theta_defaulted = map["theta"].is_empty();
        let theta = if theta_defaulted { default_theta(eta)? } else { num(&map, "theta")? };
        if theta <= 0.0 {
            return Err(bad("theta must be positive"));
        }
        let tau_points: usize = count(&map, "tau_points")?;
        if tau_points < 3 {
            return Err(bad("tau_points must be at least 3"));
        }
        let seed = count(&map, "seed")?;
        let n_traj: u64 = count(&map, "n_traj")?;
        if n_traj == 0 {
            return Err(bad("n_traj must be at least 1"));
        }
        let out = (!map["out"].is_empty()).then(|| PathBuf::from(&map["out"]));
        let threads = if map["threads"].is_empty() { None } else { Some(count(&map, "threads")?) };
        let cfg = Self {
            raw: map,
            params,
            mode,
            n_max,
            b_grid,
            drop,
            lambda_grid,
            b_values,
            state,
            nbar,
            tail_tol,
            eta,
            d,
            model,
            rt_grid,
            theta,
            theta_defaulted,
            tau_points,
            seed,
            n_traj,
            out,
            threads,
        };
        cfg.dist()?;
        Ok(cfg)
    }

    pub fn dist(&self) -> Result<PhotonDistribution<f64>, CliError> {
        Ok(self.state.build(self.nbar, self.tail_tol)?)
    }

    pub fn detector(&self, v: Variant) -> Result<IdealizedDetector<f64>, CliError> {
        Ok(IdealizedDetector::unit(v, self.eta, self.d)?)
    }

    /// Resolved parameters in registry order; the window is written out
    /// even when defaulted so that a re-run reproduces it.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|(k, _, _)| {
                let v = match *k {
                    "theta" => crate::output::fmt_num(self.theta),
                    "threads" => self.threads.map(|n| n.to_string()).unwrap_or_default(),
                    _ => self.raw[*k].clone(),
                };
                (k.to_string(), v)
            })
            .collect()
    }
}

/// The `defaults` listing.
pub fn registry() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# constants");
    let _ = writeln!(s, "speed_of_light = {SPEED_OF_LIGHT:e}  # m/s");
    let _ = writeln!(s, "# parameters");
    for (k, v, doc) in KEYS {
        let _ = writeln!(s, "{k} = {v}  # {doc}");
    }
    s
}
