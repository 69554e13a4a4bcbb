//! Configuration handling and the `report`, `run` and `sweep` commands.
//!
//! Configuration comes from an optional flat `key=value` file and from
//! command-line flags; flags win. Outputs are plain CSV with every number
//! printed to 17 significant digits so files round-trip exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::{DiagnosticsRecord, Sample};
use crate::error::{Error, Result};
use crate::profiles::{
    alpha_star, ModelParams, Regime, SelfSimilarProfile, Side, TargetProfile,
};
use crate::solver::{build_grid, run, Grid, Observer, Snapshot};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const META_FILE: &str = "run.meta";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const DIAGNOSTICS_HEADER: [&str; 6] = ["s", "sup_err", "v_alpha", "h", "gamma_tail", "extent_x"];
pub const PROFILE_HEADER: [&str; 3] = ["eta", "v", "target"];
pub const SWEEP_HEADER: [&str; 5] = ["ustar", "regime", "gamma", "final_sup_err", "final_h"];

const DEFAULT_ALPHA: f64 = 1.0;
const DEFAULT_BETA: f64 = 1.0;
const DEFAULT_N: usize = 200;
const DEFAULT_S_MAX: f64 = 40.0;
const DEFAULT_SAMPLES: usize = 400;

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n: usize,
    pub m: usize,
    pub s_max: f64,
    pub sample_stride: usize,
    pub out_dir: PathBuf,
    pub emit_profiles_at: Vec<f64>,
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        build_grid(&self.params, self.n, self.m, self.s_max)
    }
}

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub ustar: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub smax: Option<f64>,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
    pub profiles_at: Option<Vec<f64>>,
}

impl ConfigValues {
    /// Parses the flat `key=value` format. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = ConfigValues::default();
        let mut seen = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let location = format!("{source}:{}", lineno + 1);
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: location.clone(),
                message: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
                return Err(Error::Parse {
                    location,
                    message: format!("key {key:?} already set on line {prev}"),
                });
            }
            cfg.set(key, value.trim(), &location)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = Some(parse_value(value, location)?),
            "beta" => self.beta = Some(parse_value(value, location)?),
            "ustar" => self.ustar = Some(parse_value(value, location)?),
            "n" => self.n = Some(parse_value(value, location)?),
            "m" => self.m = Some(parse_value(value, location)?),
            "smax" => self.smax = Some(parse_value(value, location)?),
            "stride" => self.stride = Some(parse_value(value, location)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "profiles_at" => self.profiles_at = Some(parse_list(value, location)?),
            other => {
                return Err(Error::Parse {
                    location: location.to_string(),
                    message: format!("unknown key {other:?}"),
                })
            }
        }
        Ok(())
    }

    /// Values set in `other` replace the ones here.
    pub fn overridden_by(self, other: &ConfigValues) -> Self {
        ConfigValues {
            alpha: other.alpha.or(self.alpha),
            beta: other.beta.or(self.beta),
            ustar: other.ustar.or(self.ustar),
            n: other.n.or(self.n),
            m: other.m.or(self.m),
            smax: other.smax.or(self.smax),
            stride: other.stride.or(self.stride),
            out: other.out.clone().or(self.out),
            profiles_at: other.profiles_at.clone().or(self.profiles_at),
        }
    }

    /// Fills defaults and checks invariants.
    ///
    /// When `m` is not given it is chosen so that `d_s <= d_eta`; the
    /// default stride yields about 400 samples.
    pub fn resolve(&self) -> Result<RunConfig> {
        let u_star = self
            .ustar
            .ok_or_else(|| Error::Validation("ustar is required".into()))?;
        let params = ModelParams::new(
            self.alpha.unwrap_or(DEFAULT_ALPHA),
            self.beta.unwrap_or(DEFAULT_BETA),
            u_star,
        )
        .map_err(|e| Error::Validation(e.to_string()))?;
        let n = self.n.unwrap_or(DEFAULT_N);
        if n < 2 {
            return Err(Error::Validation(format!("n must be at least 2, got {n}")));
        }
        let s_max = self.smax.unwrap_or(DEFAULT_S_MAX);
        if !(s_max.is_finite() && s_max > 0.0) {
            return Err(Error::Validation(format!("smax must be positive, got {s_max}")));
        }
        let m = self
            .m
            .unwrap_or_else(|| (s_max * n as f64 / params.alpha).ceil() as usize);
        let sample_stride = self.stride.unwrap_or((m / DEFAULT_SAMPLES).max(1));
        if sample_stride == 0 {
            return Err(Error::Validation("stride must be at least 1".into()));
        }
        let emit_profiles_at = self.profiles_at.clone().unwrap_or_default();
        if let Some(bad) = emit_profiles_at.iter().find(|&&s| !(0.0..=s_max).contains(&s)) {
            return Err(Error::Validation(format!(
                "profile time {bad} outside [0, {s_max}]"
            )));
        }
        Ok(RunConfig {
            params,
            n,
            m,
            s_max,
            sample_stride,
            out_dir: self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            emit_profiles_at,
        })
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, location: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| Error::Parse {
        location: location.to_string(),
        message: format!("bad value {value:?}: {e}"),
    })
}

/// Comma-separated list of reals; empty input gives an empty list.
pub fn parse_list(value: &str, location: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(s, location))
        .collect()
}

/// Resolves a configuration from optional file contents and flag values.
pub fn parse_config(flags: &ConfigValues, file: Option<&Path>) -> Result<RunConfig> {
    let base = match file {
        Some(path) => ConfigValues::from_file(path)?,
        None => ConfigValues::default(),
    };
    base.overridden_by(flags).resolve()
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Human-readable summary of the profiles for a parameter set.
pub fn cmd_report(params: &ModelParams) -> Result<String> {
    let regime = params.regime();
    let mut out = String::new();
    let _ = writeln!(out, "alpha = {}", params.alpha);
    let _ = writeln!(out, "beta = {}", params.beta);
    let _ = writeln!(out, "ustar = {}", params.u_star);
    let _ = writeln!(out, "psi_alpha = {}", fmt_num(params.psi_alpha()));
    let _ = writeln!(out, "ustar_0 = {}", fmt_num(params.u_star_zero()));
    let _ = writeln!(out, "regime = {regime}");
    let target = TargetProfile::for_params(params)?;
    let _ = writeln!(out, "target = {}", target.name());
    if regime == Regime::Supercritical {
        let profile = SelfSimilarProfile::matched(params)?;
        let _ = writeln!(out, "gamma = {}", fmt_num(profile.gamma));
        let _ = writeln!(out, "kappa = {}", fmt_num(profile.kappa));
        let _ = writeln!(
            out,
            "ustar_gamma = {}",
            fmt_num(crate::profiles::ustar_of_gamma(params, profile.gamma)?)
        );
        let _ = writeln!(out, "jump_residual = {}", fmt_num(profile.jump_residual(params)?));
        let left = profile.derivative(params.alpha, Side::Left)?;
        let right = profile.derivative(params.alpha, Side::Right)?;
        let _ = writeln!(out, "dphi_left = {}", fmt_num(left));
        let _ = writeln!(out, "dphi_right = {}", fmt_num(right));
    }
    if params.u_star < params.psi_alpha() {
        let _ = writeln!(out, "alpha_star = {}", fmt_num(alpha_star(params)?));
    }
    Ok(out)
}

/// Collects `(eta, v, target)` tables at requested times.
struct ProfileDumper<'a> {
    requests: Vec<(f64, usize)>,
    target_vals: &'a [f64],
    tables: Vec<(f64, Vec<[f64; 3]>)>,
}

impl Observer for ProfileDumper<'_> {
    fn extra_steps(&self) -> Vec<usize> {
        self.requests.iter().map(|&(_, j)| j).collect()
    }

    fn observe(&mut self, snap: &Snapshot<'_>) {
        for &(s, j) in &self.requests {
            if j == snap.j {
                let rows = (0..snap.grid.n_full)
                    .map(|i| [snap.grid.eta(i), snap.w[i] + snap.psi[i], self.target_vals[i]])
                    .collect();
                self.tables.push((s, rows));
            }
        }
    }
}

/// Everything `cmd_run` produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub regime: Regime,
    pub record: DiagnosticsRecord,
    pub files: Vec<PathBuf>,
}

pub fn cmd_run(config: &RunConfig) -> Result<RunOutcome> {
    let params = config.params;
    let grid = config.grid()?;
    let target = TargetProfile::for_params(&params)?;
    let target_vals = (0..grid.n_full)
        .map(|i| target.eval(grid.eta(i)))
        .collect::<Result<Vec<_>>>()?;
    let mut dumper = ProfileDumper {
        requests: config
            .emit_profiles_at
            .iter()
            .map(|&s| (s, grid.step_index(s)))
            .collect(),
        target_vals: &target_vals,
        tables: Vec::new(),
    };
    let record = run(&params, &grid, target, config.sample_stride, &mut [&mut dumper])?;

    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();

    let diag_path = dir.join(DIAGNOSTICS_FILE);
    write_diagnostics(&diag_path, &record.samples)?;
    files.push(diag_path);

    for (s, rows) in &dumper.tables {
        let path = dir.join(format!("profile_s{s}.csv"));
        let mut wtr = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
        wtr.write_record(PROFILE_HEADER).map_err(|e| Error::csv(&path, e))?;
        for row in rows {
            wtr.write_record(row.iter().map(|&x| fmt_num(x)))
                .map_err(|e| Error::csv(&path, e))?;
        }
        wtr.flush().map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }

    let meta_path = dir.join(META_FILE);
    fs::write(&meta_path, render_meta(config, &record, params.regime()))
        .map_err(|e| Error::io(&meta_path, e))?;
    files.push(meta_path);

    Ok(RunOutcome {
        regime: params.regime(),
        record,
        files,
    })
}

fn render_meta(config: &RunConfig, record: &DiagnosticsRecord, regime: Regime) -> String {
    let p = &config.params;
    let profiles = config
        .emit_profiles_at
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let mut out = String::new();
    let _ = writeln!(out, "alpha={}", p.alpha);
    let _ = writeln!(out, "beta={}", p.beta);
    let _ = writeln!(out, "ustar={}", p.u_star);
    let _ = writeln!(out, "n={}", config.n);
    let _ = writeln!(out, "m={}", config.m);
    let _ = writeln!(out, "smax={}", config.s_max);
    let _ = writeln!(out, "stride={}", config.sample_stride);
    let _ = writeln!(out, "out={}", config.out_dir.display());
    let _ = writeln!(out, "profiles_at={profiles}");
    let _ = writeln!(out, "regime={regime}");
    let _ = writeln!(out, "target={}", record.target.name());
    let _ = writeln!(out, "gamma={}", record.matched_gamma);
    out
}

pub fn write_diagnostics(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    wtr.write_record(DIAGNOSTICS_HEADER).map_err(|e| Error::csv(path, e))?;
    for s in samples {
        wtr.write_record(
            [s.s, s.sup_err, s.v_alpha, s.h, s.gamma_tail, s.extent_x].map(fmt_num),
        )
        .map_err(|e| Error::csv(path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<Sample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(DIAGNOSTICS_HEADER) {
        return Err(Error::Parse {
            location: path.display().to_string(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let location = format!("{}:{}", path.display(), row + 2);
        let v: Vec<f64> = rec
            .iter()
            .map(|f| parse_value(f, &location))
            .collect::<Result<_>>()?;
        if v.len() != DIAGNOSTICS_HEADER.len() {
            return Err(Error::Parse {
                location,
                message: format!("expected {} fields, got {}", DIAGNOSTICS_HEADER.len(), v.len()),
            });
        }
        samples.push(Sample {
            s: v[0],
            sup_err: v[1],
            v_alpha: v[2],
            h: v[3],
            gamma_tail: v[4],
            extent_x: v[5],
        });
    }
    Ok(samples)
}

/// One line of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub u_star: f64,
    pub dir: PathBuf,
    pub outcome: std::result::Result<SweepResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub regime: Regime,
    pub gamma: f64,
    pub final_sup_err: f64,
    pub final_h: f64,
}

/// Directory names `ustar_<value>`, with `_<k>` appended to repeats.
pub fn sweep_dir_names(u_stars: &[f64]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    u_stars
        .iter()
        .map(|u| {
            let base = format!("ustar_{u}");
            let c = counts.entry(base.clone()).or_insert(0);
            let name = if *c == 0 { base } else { format!("{base}_{c}") };
            *c += 1;
            name
        })
        .collect()
}

/// Runs one simulation per threshold, concurrently, below `base.out`.
pub fn cmd_sweep(base: &ConfigValues, u_stars: &[f64]) -> Result<Vec<SweepRow>> {
    let root = base.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let names = sweep_dir_names(u_stars);

    let rows: Vec<SweepRow> = u_stars
        .par_iter()
        .zip(names.par_iter())
        .map(|(&u, name)| {
            let dir = root.join(name);
            let outcome = sweep_one(base, u, &dir).map_err(|e| e.to_string());
            SweepRow {
                u_star: u,
                dir,
                outcome,
            }
        })
        .collect();

    let path = root.join(SWEEP_SUMMARY_FILE);
    let mut wtr = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    wtr.write_record(SWEEP_HEADER).map_err(|e| Error::csv(&path, e))?;
    for row in &rows {
        let fields = match &row.outcome {
            Ok(r) => [
                fmt_num(row.u_star),
                r.regime.to_string(),
                fmt_num(r.gamma),
                fmt_num(r.final_sup_err),
                fmt_num(r.final_h),
            ],
            Err(msg) => [
                fmt_num(row.u_star),
                format!("error: {msg}"),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        wtr.write_record(&fields).map_err(|e| Error::csv(&path, e))?;
    }
    wtr.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

fn sweep_one(base: &ConfigValues, u_star: f64, dir: &Path) -> Result<SweepResult> {
    let mut values = base.clone();
    values.ustar = Some(u_star);
    values.out = Some(dir.to_path_buf());
    let config = values.resolve()?;
    let outcome = cmd_run(&config)?;
    let last = outcome
        .record
        .last()
        .copied()
        .ok_or_else(|| Error::Validation("run produced no samples".into()))?;
    Ok(SweepResult {
        regime: outcome.regime,
        gamma: outcome.record.matched_gamma,
        final_sup_err: last.sup_err,
        final_h: last.h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_flat_file() {
        let text = "# benchmark\nalpha = 1\nbeta=1  # source\n\nustar=0.15\nprofiles_at=10, 20\n";
        let cfg = ConfigValues::parse(text, "test").unwrap();
        assert_eq!(cfg.alpha, Some(1.0));
        assert_eq!(cfg.ustar, Some(0.15));
        assert_eq!(cfg.profiles_at, Some(vec![10.0, 20.0]));
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = ConfigValues::parse("alpha=1\nbogus=3\n", "cfg").unwrap_err();
        match err {
            Error::Parse { location, message } => {
                assert_eq!(location, "cfg:2");
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(ConfigValues::parse("n=two\n", "cfg").is_err());
        assert!(ConfigValues::parse("alpha\n", "cfg").is_err());
        assert!(ConfigValues::parse("n=2\nn=3\n", "cfg").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigValues::parse("ustar=0.15\nn=50\n", "cfg").unwrap();
        let flags = ConfigValues {
            ustar: Some(0.49),
            ..Default::default()
        };
        let cfg = file.overridden_by(&flags).resolve().unwrap();
        assert_eq!(cfg.params.u_star, 0.49);
        assert_eq!(cfg.n, 50);
    }

    #[test]
    fn resolve_defaults_and_validation() {
        let cfg = ConfigValues {
            ustar: Some(0.49),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(cfg.n, 200);
        assert_eq!(cfg.m, 8000);
        assert_eq!(cfg.sample_stride, 20);
        assert_eq!(cfg.params.regime(), Regime::Transitional);

        let bad = |v: ConfigValues| matches!(v.resolve(), Err(Error::Validation(_)));
        assert!(bad(ConfigValues { ustar: Some(0.49), n: Some(1), ..Default::default() }));
        assert!(bad(ConfigValues::default()));
        assert!(bad(ConfigValues { ustar: Some(0.49), stride: Some(0), ..Default::default() }));
        assert!(bad(ConfigValues {
            ustar: Some(0.49),
            smax: Some(5.0),
            profiles_at: Some(vec![6.0]),
            ..Default::default()
        }));
        assert!(bad(ConfigValues { ustar: Some(-0.1), ..Default::default() }));
    }

    #[test]
    fn number_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 4.242_628_003_974_378, 1e-300, 0.0, 123_456.789] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn duplicate_sweep_names() {
        let names = sweep_dir_names(&[0.49, 0.15, 0.49, 0.49]);
        assert_eq!(names, ["ustar_0.49", "ustar_0.15", "ustar_0.49_1", "ustar_0.49_2"]);
    }

    #[test]
    fn report_contents() {
        let sup = cmd_report(&ModelParams::new(1.0, 1.0, 0.15).unwrap()).unwrap();
        assert!(sup.contains("regime = Supercritical"));
        assert!(sup.contains("gamma = 4.24262800397"));
        let tr = cmd_report(&ModelParams::new(1.0, 1.0, 0.49).unwrap()).unwrap();
        assert!(tr.contains("regime = Transitional"));
        assert!(tr.contains("target = Phi_0"));
        let sub = cmd_report(&ModelParams::new(1.0, 1.0, 0.60).unwrap()).unwrap();
        assert!(sub.contains("regime = Subcritical"));
        assert!(sub.contains("target = Psi"));
        assert!(!sub.contains("alpha_star"));
    }
}
