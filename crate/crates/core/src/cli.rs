//! Configuration files and the command runner behind the `fracspde` binary.
//!
//! A configuration is plain text, one `key = value` per line, `#` starting a
//! comment:
//!
//! ```text
//! # temporal study
//! alpha = 0.3
//! s = 0.7
//! hurst = 0.8
//! m = -1
//! axis = time
//! levels = 32, 64, 128, 256
//! fixed_other = 100
//! ```
//!
//! Required keys: `alpha`, `s`, `hurst`, `m`, `axis`, `levels`,
//! `fixed_other`. Optional keys and defaults: `t_final = 0.01`,
//! `n_traj = 100`, `seed = 0`, `nonlinearity = sin`, `noise_scale = 1`,
//! `generator = circulant`, `threads` (all cores), `trajectory = 0` (index
//! dumped by the `trajectory` command).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{
    finest_trajectory, predict_rates, run_convergence_study, write_manifest, Axis, ExperimentConfig,
};
use crate::fbm::Generator;
use crate::selftest::{run_selftest, SelftestReport};
use crate::solver::{ModelParams, Nonlinearity};

/// Every accepted key, in serialization order.
pub const KEYS: [&str; 15] = [
    "alpha",
    "s",
    "hurst",
    "m",
    "t_final",
    "noise_scale",
    "nonlinearity",
    "axis",
    "levels",
    "fixed_other",
    "n_traj",
    "seed",
    "generator",
    "threads",
    "trajectory",
];

const REQUIRED: [&str; 7] = ["alpha", "s", "hurst", "m", "axis", "levels", "fixed_other"];

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Trajectory index for the `trajectory` command.
    pub trajectory: usize,
}

/// Splits `key = value` lines; rejects unknown and repeated keys.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let key = key.trim().to_string();
        check_key(&key)?;
        if seen.insert(key.clone(), ()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::config(key, "unknown key"))
    }
}

/// Parses `key=value` as given on the command line.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| Error::config(arg, "override must look like key=value"))?;
    let k = k.trim().to_string();
    check_key(&k)?;
    Ok((k, v.trim().to_string()))
}

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
        })
        .transpose()
}

fn required<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value(map, key)?.ok_or_else(|| Error::config(key, "missing required key"))
}

fn in_open_unit(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{v} outside (0, 1)")))
    }
}

/// Parses a configuration, applying `overrides` after the file and before
/// validation.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map: BTreeMap<String, String> = parse_pairs(text)?.into_iter().collect();
    for (k, v) in overrides {
        check_key(k)?;
        map.insert(k.clone(), v.clone());
    }
    for key in REQUIRED {
        if !map.contains_key(key) {
            return Err(Error::config(key, "missing required key"));
        }
    }
    let alpha = in_open_unit("alpha", required(&map, "alpha")?)?;
    let s = in_open_unit("s", required(&map, "s")?)?;
    let hurst = in_open_unit("hurst", required(&map, "hurst")?)?;
    let m: f64 = required(&map, "m")?;
    if !m.is_finite() {
        return Err(Error::config("m", "must be finite"));
    }
    let t_final: f64 = value(&map, "t_final")?.unwrap_or(0.01);
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::config(
            "t_final",
            format!("{t_final} is not a positive time"),
        ));
    }
    let noise_scale: f64 = value(&map, "noise_scale")?.unwrap_or(1.0);
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::config(
            "noise_scale",
            format!("{noise_scale} is negative"),
        ));
    }
    let nonlinearity: Nonlinearity = value(&map, "nonlinearity")?.unwrap_or_default();
    let axis: Axis = required(&map, "axis")?;
    let levels = map["levels"]
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| Error::config("levels", format!("cannot parse `{}`: {e}", x.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    let fixed_other: usize = required(&map, "fixed_other")?;
    let n_traj: usize = value(&map, "n_traj")?.unwrap_or(100);
    let seed: u64 = value(&map, "seed")?.unwrap_or(0);
    let generator: Generator = value(&map, "generator")?.unwrap_or_default();
    let threads: Option<usize> = value(&map, "threads")?;
    let trajectory: usize = value(&map, "trajectory")?.unwrap_or(0);

    let params = ModelParams {
        alpha,
        s,
        hurst,
        m,
        t_final,
        noise_scale,
        nonlinearity,
    };
    let experiment = ExperimentConfig {
        params,
        axis,
        levels,
        fixed_other,
        n_traj,
        master_seed: seed,
        threads,
        generator,
    };
    experiment.validate().map_err(|e| match e {
        Error::InvalidConfig(msg) => match msg.split_once(": ") {
            Some((key, rest)) if KEYS.contains(&key) => Error::config(key, rest),
            _ => Error::InvalidConfig(msg),
        },
        other => other,
    })?;
    if trajectory >= n_traj {
        return Err(Error::config(
            "trajectory",
            format!("index {trajectory} not below n_traj = {n_traj}"),
        ));
    }
    Ok(RunConfig {
        experiment,
        trajectory,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Path {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_with(&text, overrides)
}

/// Serializes a configuration so that [`parse_config`] gives it back.
pub fn to_config_text(cfg: &RunConfig) -> Result<String> {
    let e = &cfg.experiment;
    let p = &e.params;
    if matches!(p.nonlinearity, Nonlinearity::Custom(_)) {
        return Err(Error::config(
            "nonlinearity",
            "custom nonlinearities cannot be written to a config file",
        ));
    }
    let levels: Vec<String> = e.levels.iter().map(usize::to_string).collect();
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("alpha", p.alpha.to_string());
    line("s", p.s.to_string());
    line("hurst", p.hurst.to_string());
    line("m", p.m.to_string());
    line("t_final", p.t_final.to_string());
    line("noise_scale", p.noise_scale.to_string());
    line("nonlinearity", p.nonlinearity.name().to_string());
    line("axis", e.axis.to_string());
    line("levels", levels.join(", "));
    line("fixed_other", e.fixed_other.to_string());
    line("n_traj", e.n_traj.to_string());
    line("seed", e.master_seed.to_string());
    line("generator", e.generator.name().to_string());
    if let Some(t) = e.threads {
        line("threads", t.to_string());
    }
    line("trajectory", cfg.trajectory.to_string());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Study,
    Trajectory,
    Selftest,
}

/// One invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// Required by `study` and `trajectory`.
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub overrides: Vec<(String, String)>,
    /// Same as a `threads` override.
    pub threads: Option<usize>,
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Study {
        table: PathBuf,
        manifest: PathBuf,
        observed_rate: Option<f64>,
        theoretical_rate: f64,
    },
    Trajectory {
        dump: PathBuf,
        manifest: PathBuf,
    },
    Selftest(SelftestReport),
}

impl RunOutcome {
    /// 0 on success; a failed selftest gives 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunOutcome::Selftest(r) if !r.passed() => 1,
            _ => 0,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            RunOutcome::Study {
                table,
                observed_rate,
                theoretical_rate,
                ..
            } => format!(
                "wrote {}; observed rate {}, theoretical {theoretical_rate:.3}",
                table.display(),
                observed_rate.map_or("n/a".to_string(), |r| format!("{r:.3}")),
            ),
            RunOutcome::Trajectory { dump, .. } => format!("wrote {}", dump.display()),
            RunOutcome::Selftest(r) => r.to_string(),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Path {
            path: path.display().to_string(),
            source,
        })
}

fn spec_config(spec: &RunSpec) -> Result<RunConfig> {
    let path = spec
        .config_path
        .as_deref()
        .ok_or_else(|| Error::config("--config", "this command needs a configuration file"))?;
    let mut overrides = spec.overrides.clone();
    if let Some(t) = spec.threads {
        overrides.push(("threads".into(), t.to_string()));
    }
    load_config(path, &overrides)
}

/// Executes `spec`. Errors carry the module that raised them.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    if spec.command == Command::Selftest {
        return Ok(RunOutcome::Selftest(run_selftest()));
    }
    let cfg = spec_config(spec)?;
    fs::create_dir_all(&spec.output_dir).map_err(|source| Error::Path {
        path: spec.output_dir.display().to_string(),
        source,
    })?;
    let manifest = spec.output_dir.join("manifest.json");
    match spec.command {
        Command::Study => {
            let table = run_convergence_study(&cfg.experiment)?;
            let csv_path = spec.output_dir.join("table.csv");
            table.write_csv(create(&csv_path)?)?;
            write_manifest(
                &cfg.experiment,
                "study",
                Some(&table),
                &["table.csv"],
                create(&manifest)?,
            )?;
            Ok(RunOutcome::Study {
                table: csv_path,
                manifest,
                observed_rate: table.observed_rate(),
                theoretical_rate: predict_rates(&cfg.experiment.params)
                    .for_axis(cfg.experiment.axis),
            })
        }
        Command::Trajectory => {
            let traj = finest_trajectory(&cfg.experiment, cfg.trajectory)?;
            let dump = spec.output_dir.join("trajectory.bin");
            let mut w = create(&dump)?;
            traj.write_to(&mut w)?;
            std::io::Write::flush(&mut w)?;
            write_manifest(
                &cfg.experiment,
                "trajectory",
                None,
                &["trajectory.bin"],
                create(&manifest)?,
            )?;
            Ok(RunOutcome::Trajectory { dump, manifest })
        }
        Command::Selftest => unreachable!("handled above"),
    }
}

/// One-line description of a failure, prefixed with the module name.
pub fn error_line(e: &Error) -> String {
    format!("error [{}]: {e}", e.module())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE1_ROW1: &str = "\
# Table-1-shaped temporal study
alpha = 0.3
s = 0.7
hurst = 0.3
m = 0
axis = time
levels = 32,64,128,256
fixed_other = 100
";

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_and_defaults() {
        let c = parse_config(TABLE1_ROW1).unwrap();
        let e = &c.experiment;
        assert_eq!(e.params.alpha, 0.3);
        assert_eq!(e.params.t_final, 0.01);
        assert_eq!(e.params.nonlinearity, Nonlinearity::Sin);
        assert_eq!(e.axis, Axis::Time);
        assert_eq!(e.levels, vec![32, 64, 128, 256]);
        assert_eq!(e.fixed_other, 100);
        assert_eq!(e.n_traj, 100);
        assert_eq!(e.master_seed, 0);
        assert_eq!(e.threads, None);
        assert_eq!(c.trajectory, 0);
    }

    #[test]
    fn errors_name_the_key() {
        let with = |extra: &str| format!("{TABLE1_ROW1}{extra}\n");
        assert_eq!(
            key_of(parse_config(&TABLE1_ROW1.replace("0.3\ns", "0\ns")).unwrap_err()),
            "alpha"
        );
        assert_eq!(
            key_of(parse_config(&TABLE1_ROW1.replace("hurst = 0.3", "hurst = 0")).unwrap_err()),
            "hurst"
        );
        assert_eq!(
            key_of(parse_config(&TABLE1_ROW1.replace("hurst = 0.3", "hurst = 1.0")).unwrap_err()),
            "hurst"
        );
        assert_eq!(
            key_of(parse_config(&with("n_traj = many")).unwrap_err()),
            "n_traj"
        );
        assert_eq!(
            key_of(parse_config(&with("n_trajs = 4")).unwrap_err()),
            "n_trajs"
        );
        assert_eq!(
            key_of(parse_config(&with("n_traj = 1")).unwrap_err()),
            "n_traj"
        );
        assert_eq!(
            key_of(parse_config(&with("alpha = 0.4")).unwrap_err()),
            "alpha"
        );
        assert_eq!(
            key_of(parse_config(&TABLE1_ROW1.replace("fixed_other = 100\n", "")).unwrap_err()),
            "fixed_other"
        );
        assert_eq!(
            key_of(parse_config(&TABLE1_ROW1.replace("32,64", "32,48")).unwrap_err()),
            "levels"
        );
        assert_eq!(key_of(parse_config(&with("axis2")).unwrap_err()), "line 9");
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = vec![("n_traj".to_string(), "4".to_string())];
        let c = parse_config_with(&format!("{TABLE1_ROW1}n_traj = 50\n"), &ov).unwrap();
        assert_eq!(c.experiment.n_traj, 4);
        // Overrides are validated with the file.
        let bad = vec![("hurst".to_string(), "1.5".to_string())];
        assert!(parse_config_with(TABLE1_ROW1, &bad).is_err());
        assert_eq!(
            parse_override(" seed = 7").unwrap(),
            ("seed".into(), "7".into())
        );
        assert!(parse_override("seed").is_err());
        assert!(parse_override("sede=7").is_err());
    }

    #[test]
    fn round_trip_fixed() {
        let c = parse_config(&format!("{TABLE1_ROW1}threads = 3\nseed = 99\n")).unwrap();
        let text = to_config_text(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
        let mut custom = c.clone();
        custom.experiment.params.nonlinearity = Nonlinearity::custom(|x| x);
        assert!(to_config_text(&custom).is_err());
    }

    #[test]
    fn selftest_outcome() {
        let spec = RunSpec {
            command: Command::Selftest,
            config_path: None,
            output_dir: PathBuf::from("unused"),
            overrides: vec![],
            threads: None,
        };
        let out = run(&spec).unwrap();
        assert_eq!(out.exit_code(), 0);
        assert!(out.summary().contains("4/4 suites passed"));
    }

    #[test]
    fn missing_config_names_path() {
        let spec = RunSpec {
            command: Command::Study,
            config_path: Some(PathBuf::from("/nonexistent/study.cfg")),
            output_dir: std::env::temp_dir(),
            overrides: vec![],
            threads: None,
        };
        let err = run(&spec).unwrap_err();
        assert!(error_line(&err).contains("/nonexistent/study.cfg"));
        let spec = RunSpec {
            config_path: None,
            ..spec
        };
        assert!(run(&spec).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(
            alpha in 0.01f64..0.99, s in 0.01f64..0.99, h in 0.01f64..0.99,
            m in -2.0f64..2.0, t in 1e-4f64..10.0, scale in 0.0f64..3.0,
            space in any::<bool>(), first in 1usize..64, count in 1usize..5,
            fixed in 1usize..500, n_traj in 2usize..500, seed in any::<u64>(),
            zero in any::<bool>(), threads in proptest::option::of(1usize..16),
        ) {
            let levels: Vec<usize> = (0..count).map(|i| first << i).collect();
            let params = ModelParams {
                alpha, s, hurst: h, m, t_final: t, noise_scale: scale,
                nonlinearity: if zero { Nonlinearity::Zero } else { Nonlinearity::Sin },
            };
            let mut experiment = ExperimentConfig::new(
                params,
                if space { Axis::Space } else { Axis::Time },
                levels, fixed, n_traj, seed,
            ).unwrap();
            experiment.threads = threads;
            let cfg = RunConfig { experiment, trajectory: n_traj - 1 };
            let text = to_config_text(&cfg).unwrap();
            prop_assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
