//! Run configuration, named presets and the three pipelines behind the
//! `dynkin` binary. Every command writes its artifact into the configured
//! output directory and maps its outcome onto the exit statuses 0–3.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{
    solve_game_with, ConditionReport, GameConstants, GameSolution, SmoothPasting, SolveOptions,
    DEFAULT_GRID_SIZE, U_TOLERANCE,
};
use crate::levy::{Family, GameSpec, LevyModel, ModelParams};
use crate::mc::{
    compare_with_value, default_dt, default_horizon, extrema_check, saddle_check, start_grid,
    ExtremaCheck, PayoffComparison, SaddleReport, SimConfig,
};
use crate::wiener_hopf::{check_wh_identity, standard_identity_grid, WienerHopfFactors};

pub const SOLUTION_FILE: &str = "solution.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const VALUE_TABLE_FILE: &str = "value_table.csv";
pub const VALUE_TABLE_HEADER: &str = "x,V,G1,G2,region";

/// Upper bound on the relative error of the factorisation identity.
pub const WH_IDENTITY_TOLERANCE: f64 = 1e-10;

pub const DEFAULT_X_MIN: f64 = -4.5;
pub const DEFAULT_X_MAX: f64 = 4.5;
pub const DEFAULT_POINTS: usize = 181;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialise config: {0}")]
    Serialise(#[from] toml::ser::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit statuses. Configuration and I/O failures map to `Config`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Config = 1,
    NotCertified = 2,
    VerificationFailed = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    BmSym,
    BmDrift,
    Cl,
    CpSym,
    CpAsym,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::BmSym,
        Preset::BmDrift,
        Preset::Cl,
        Preset::CpSym,
        Preset::CpAsym,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BmSym => "bm-sym",
            Preset::BmDrift => "bm-drift",
            Preset::Cl => "cl",
            Preset::CpSym => "cp-sym",
            Preset::CpAsym => "cp-asym",
        }
    }

    pub fn model(self) -> ModelParams {
        match self {
            Preset::BmSym => ModelParams::BrownianDrift { c: 0.0, sigma: 1.0 },
            Preset::BmDrift => ModelParams::BrownianDrift { c: 1.0, sigma: 1.0 },
            Preset::Cl => ModelParams::CramerLundberg {
                c: 1.0,
                lambda1: 1.0,
                alpha1: 1.0,
            },
            Preset::CpSym => ModelParams::CompoundPoisson {
                lambda1: 1.0,
                alpha1: 1.0,
                lambda2: 1.0,
                alpha2: 1.0,
            },
            Preset::CpAsym => ModelParams::CompoundPoisson {
                lambda1: 3.0,
                alpha1: 1.0,
                lambda2: 1.0,
                alpha2: 3.0,
            },
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown preset '{s}' (expected bm-sym, bm-drift, cl, cp-sym or cp-asym)")
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub r: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub tolerance: f64,
    pub grid_size: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            tolerance: U_TOLERANCE,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub paths: usize,
    pub seed: u64,
    /// Defaults to `10⁻⁴·min(1, 1/r)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to `30/r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_cap: Option<f64>,
    pub offsets: Vec<f64>,
    /// Start point of the saddle checks.
    pub x0: f64,
    /// Size of the start grid on `[x_I − 1, x_S + 1]`.
    pub start_points: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 42,
            dt: None,
            horizon_cap: None,
            offsets: vec![-0.5, -0.25, 0.25, 0.5],
            x0: 0.0,
            start_points: 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Artifacts written by `solve`: `json` is solution.json, `csv` adds a
    /// value table over the default range.
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("."),
            formats: vec![Format::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub game: GameSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            model: preset.model(),
            game: GameSection { r: 1.0, delta: 1.0 },
            solve: SolveSection::default(),
            mc: McSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn spec(&self) -> CliResult<GameSpec> {
        let model = LevyModel::try_from(self.model)?;
        Ok(GameSpec::new(model, self.game.r, self.game.delta)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tolerance: self.solve.tolerance,
            grid_size: self.solve.grid_size,
        }
    }

    pub fn sim_config(&self) -> CliResult<SimConfig> {
        let r = self.game.r;
        let cfg = SimConfig::new(
            self.mc.paths,
            self.mc.seed,
            self.mc.dt.unwrap_or_else(|| default_dt(r)),
            self.mc.horizon_cap.unwrap_or_else(|| default_horizon(r)),
        )?;
        if self.mc.start_points == 0 {
            return Err(CliError::Usage("mc.start_points must be >= 1".into()));
        }
        if let Some(bad) = self.mc.offsets.iter().find(|o| !o.is_finite()) {
            return Err(CliError::Usage(format!("mc.offsets contains {bad}")));
        }
        if !self.mc.x0.is_finite() {
            return Err(CliError::Usage(format!(
                "mc.x0 must be finite, got {}",
                self.mc.x0
            )));
        }
        Ok(cfg)
    }
}

/// Echo of the inputs that determine a result; the output directory is left
/// out so that runs into different directories compare equal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub model: ModelParams,
    pub game: GameSection,
    pub solve: SolveSection,
    pub mc: McSection,
}

impl From<&RunConfig> for ConfigEcho {
    fn from(cfg: &RunConfig) -> Self {
        Self {
            model: cfg.model,
            game: cfg.game,
            solve: cfg.solve,
            mc: cfg.mc.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionDocument {
    pub config: ConfigEcho,
    pub family: Family,
    pub factors: WienerHopfFactors,
    pub constants: GameConstants,
    pub u: f64,
    pub x_i: f64,
    pub x_s: f64,
    pub a_i: f64,
    pub a_s: f64,
    pub jumps: SmoothPasting,
    pub conditions: ConditionReport,
    pub certified: bool,
    pub warnings: Vec<String>,
}

impl SolutionDocument {
    fn new(cfg: &RunConfig, sol: &GameSolution) -> CliResult<Self> {
        let missing = || CliError::Model(Error::Consistency("solution carries no checks".into()));
        Ok(Self {
            config: cfg.into(),
            family: sol.spec().model().family(),
            factors: *sol.factors(),
            constants: *sol.constants(),
            u: sol.u(),
            x_i: sol.x_i(),
            x_s: sol.x_s(),
            a_i: sol.a_i(),
            a_s: sol.a_s(),
            jumps: *sol.pasting().ok_or_else(missing)?,
            conditions: *sol.checks().ok_or_else(missing)?,
            certified: sol.certified(),
            warnings: sol.warnings().to_vec(),
        })
    }
}

pub fn solve(cfg: &RunConfig) -> CliResult<GameSolution> {
    Ok(solve_game_with(&cfg.spec()?, &cfg.solve_options())?)
}

pub fn solution_document(cfg: &RunConfig) -> CliResult<SolutionDocument> {
    SolutionDocument::new(cfg, &solve(cfg)?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io(&path))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<ExitStatus> {
    let sol = solve(cfg)?;
    let doc = SolutionDocument::new(cfg, &sol)?;
    let dir = &cfg.output.directory;
    if cfg.output.formats.contains(&Format::Json) {
        write_file(dir, SOLUTION_FILE, &to_json(&doc)?)?;
    }
    if cfg.output.formats.contains(&Format::Csv) {
        let table = value_table(&sol, DEFAULT_X_MIN, DEFAULT_X_MAX, DEFAULT_POINTS)?;
        write_file(dir, VALUE_TABLE_FILE, &table)?;
    }
    Ok(if doc.certified {
        ExitStatus::Success
    } else {
        ExitStatus::NotCertified
    })
}

/// `points` equispaced rows on `[x_min, x_max]` plus one row at each threshold
/// inside the range, sorted by `x`. Numbers carry 17 significant digits.
pub fn value_table(sol: &GameSolution, x_min: f64, x_max: f64, points: usize) -> CliResult<String> {
    if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
        return Err(CliError::Usage(format!(
            "need x_min < x_max, got {x_min} and {x_max}"
        )));
    }
    if points < 2 {
        return Err(CliError::Usage(format!(
            "need at least 2 points, got {points}"
        )));
    }
    let step = (x_max - x_min) / (points - 1) as f64;
    let mut xs: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                x_max
            } else {
                x_min + step * k as f64
            }
        })
        .collect();
    for t in [sol.x_i(), sol.x_s()] {
        if t > x_min && t < x_max && !xs.contains(&t) {
            xs.push(t);
        }
    }
    xs.sort_by(f64::total_cmp);

    let spec = sol.spec();
    let mut out = String::with_capacity(96 * (xs.len() + 1));
    out.push_str(VALUE_TABLE_HEADER);
    out.push('\n');
    for x in xs {
        // `{:e}` ignores locale and never groups digits
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{}",
            x,
            sol.value(x),
            spec.g1(x),
            spec.g2(x),
            sol.region(x).as_str()
        );
    }
    Ok(out)
}

pub fn cmd_value_table(
    cfg: &RunConfig,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> CliResult<ExitStatus> {
    let sol = solve(cfg)?;
    let table = value_table(&sol, x_min, x_max, points)?;
    write_file(&cfg.output.directory, VALUE_TABLE_FILE, &table)?;
    Ok(ExitStatus::Success)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub grid_points: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremaSection {
    /// Only the exact simulators gate the verdict; Euler paths miss
    /// excursions between grid points and are reported for information.
    pub gated: bool,
    pub pass: bool,
    #[serde(flatten)]
    pub check: ExtremaCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PayoffSection {
    pub pass: bool,
    pub points: Vec<PayoffComparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaddleSection {
    pub pass: bool,
    #[serde(flatten)]
    pub report: SaddleReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyDocument {
    pub config: ConfigEcho,
    pub family: Family,
    pub simulation: SimConfig,
    pub certified: bool,
    pub wh_identity: IdentityCheck,
    pub extrema: ExtremaSection,
    pub payoff: PayoffSection,
    pub saddle: SaddleSection,
    pub pass: bool,
}

pub fn verify_document(cfg: &RunConfig) -> CliResult<VerifyDocument> {
    let sim = cfg.sim_config()?;
    let sol = solve(cfg)?;
    let spec = sol.spec();
    let model = spec.model();
    let factors = sol.factors();

    let grid = standard_identity_grid(factors);
    let err = check_wh_identity(model, spec.r(), factors, &grid)?;
    let wh_identity = IdentityCheck {
        grid_points: grid.len(),
        max_relative_error: err,
        tolerance: WH_IDENTITY_TOLERANCE,
        pass: err <= WH_IDENTITY_TOLERANCE,
    };

    let check = extrema_check(model, spec.r(), factors, &sim)?;
    let gated = model.family() != Family::BrownianDrift;
    let extrema = ExtremaSection {
        gated,
        pass: check.infimum.all_pass() && check.supremum.all_pass(),
        check,
    };

    let points = compare_with_value(&sol, &start_grid(&sol, cfg.mc.start_points), &sim)?;
    let payoff = PayoffSection {
        pass: points.iter().all(|p| p.pass),
        points,
    };

    let report = saddle_check(spec, cfg.mc.x0, &sol, &cfg.mc.offsets, &sim)?;
    let saddle = SaddleSection {
        pass: report.all_pass(),
        report,
    };

    let pass = sol.certified()
        && wh_identity.pass
        && (extrema.pass || !gated)
        && payoff.pass
        && saddle.pass;
    Ok(VerifyDocument {
        config: cfg.into(),
        family: model.family(),
        simulation: sim,
        certified: sol.certified(),
        wh_identity,
        extrema,
        payoff,
        saddle,
        pass,
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> CliResult<ExitStatus> {
    let doc = verify_document(cfg)?;
    write_file(&cfg.output.directory, VERIFY_FILE, &to_json(&doc)?)?;
    Ok(if doc.pass {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailed
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for p in Preset::ALL {
            let cfg = RunConfig::preset(p);
            let text = cfg.to_toml_string().unwrap();
            let back = RunConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, cfg, "{}", p.name());
            assert_eq!(back.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn optional_fields_round_trip() {
        let mut cfg = RunConfig::preset(Preset::Cl);
        cfg.mc.dt = Some(1e-3);
        cfg.mc.horizon_cap = Some(40.0);
        cfg.output.formats = vec![Format::Json, Format::Csv];
        let back = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[model]\nfamily = \"cramer_lundberg\"\nc = 1.0\nlambda1 = 1.0\nalpha1 = 1.0\n\n[game]\nr = 1.0\ndelta = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg, RunConfig::preset(Preset::Cl));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[model]\nfamily = \"brownian_drift\"\nc = 0.0\nsigma = 1.0\n[game]\nr = 1.0\ndelta = 1.0\nrate = 2.0\n");
        assert!(matches!(err, Err(CliError::Parse(_))));
    }

    #[test]
    fn zero_delta_names_the_parameter() {
        let mut cfg = RunConfig::preset(Preset::BmSym);
        cfg.game.delta = 0.0;
        let msg = cfg.spec().unwrap_err().to_string();
        assert!(msg.contains("delta must be > 0"), "{msg}");
    }

    #[test]
    fn preset_names_parse() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("bm".parse::<Preset>().is_err());
    }

    #[test]
    fn value_table_rows_bracket_value() {
        let sol = solve(&RunConfig::preset(Preset::CpSym)).unwrap();
        let table = value_table(&sol, -4.5, 4.5, 181).unwrap();
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some(VALUE_TABLE_HEADER));
        let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 183);
        for row in &rows {
            let f: Vec<f64> = row[..4].iter().map(|s| s.parse().unwrap()).collect();
            assert!(f[2] <= f[1] + 1e-9 && f[1] <= f[3] + 1e-9, "{row:?}");
        }
        let centre = rows
            .iter()
            .find(|r| r[0].parse::<f64>().unwrap() == 0.0)
            .unwrap();
        assert!(centre[1].parse::<f64>().unwrap().abs() < 1e-12);
        assert_eq!(centre[4], "continue");
    }

    #[test]
    fn value_table_has_seventeen_digits() {
        let sol = solve(&RunConfig::preset(Preset::BmSym)).unwrap();
        let table = value_table(&sol, -1.0, 1.0, 3).unwrap();
        let row = table.lines().nth(1).unwrap();
        let mantissa = row.split(',').next().unwrap().split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        assert!(!table.contains('\r'));
    }

    #[test]
    fn value_table_threshold_row() {
        let sol = solve(&RunConfig::preset(Preset::BmSym)).unwrap();
        let table = value_table(&sol, -4.5, 4.5, 181).unwrap();
        let rows: Vec<Vec<String>> = table
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        let k = rows
            .iter()
            .position(|r| r[0].parse::<f64>().unwrap() == sol.x_s())
            .unwrap();
        assert_eq!(rows[k][4], "continue");
        assert_eq!(rows[k + 1][4], "stop_max");
        let v: f64 = rows[k][1].parse().unwrap();
        assert!((v - 0.69551).abs() < 5e-5);
    }

    #[test]
    fn value_table_rejects_bad_ranges() {
        let sol = solve(&RunConfig::preset(Preset::BmSym)).unwrap();
        assert!(value_table(&sol, 1.0, 1.0, 10).is_err());
        assert!(value_table(&sol, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn sim_config_uses_discount_defaults() {
        let mut cfg = RunConfig::preset(Preset::Cl);
        cfg.game.r = 2.0;
        let sim = cfg.sim_config().unwrap();
        assert_eq!(sim.dt, 5e-5);
        assert_eq!(sim.horizon_cap, 15.0);
        cfg.mc.start_points = 0;
        assert!(cfg.sim_config().is_err());
    }
}
