//! Experiment configuration: a `key = value` file merged with command-line
//! flags, flags taking precedence.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use eamqc::kv;
use eamqc::potentials::{self, EamPotential};
use eamqc::solver::{KRule, MIN_CONTINUUM_GAP};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Spectrum,
    CriticalStrain,
    Converge,
    Consistency,
    Remark44,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Spectrum => "spectrum",
            Command::CriticalStrain => "critical-strain",
            Command::Converge => "converge",
            Command::Consistency => "consistency",
            Command::Remark44 => "remark44",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Command::from_str(s, false).ok()
    }
}

/// Atomistic half-width: one value, one per study point, or `K = ⌊N^θ⌋`.
#[derive(Debug, Clone, PartialEq)]
pub enum KSpec {
    List(Vec<usize>),
    Power(f64),
}

impl KSpec {
    fn parse(s: &str) -> Result<Self, String> {
        if let Some(theta) = s.strip_prefix("power:") {
            let theta: f64 = theta.trim().parse().map_err(|_| format!("bad exponent in `{s}`"))?;
            if !(theta > 0.0 && theta < 1.0) {
                return Err(format!("exponent {theta} outside (0, 1)"));
            }
            return Ok(KSpec::Power(theta));
        }
        parse_list(s).map(KSpec::List)
    }

    /// A single rule for every `N` of a study.
    pub fn rule(&self) -> Result<KRule, String> {
        match self {
            KSpec::List(v) if v.len() == 1 => Ok(KRule::Fixed(v[0])),
            KSpec::List(_) => Err("k must be a single value or `power:θ` for this command".into()),
            KSpec::Power(t) => Ok(KRule::Power(*t)),
        }
    }
}

/// Values as given on the command line; `None` means not set.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub potential: Option<String>,
    pub f: Option<String>,
    pub bracket: Option<String>,
    pub n: Option<String>,
    pub k: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub potential: EamPotential,
    pub potential_source: String,
    pub f: Vec<f64>,
    pub bracket: (f64, f64),
    pub n: Vec<usize>,
    pub k: KSpec,
    pub out: PathBuf,
    pub seed: u64,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, String> = s
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| format!("`{}` is not a valid value", t.trim())))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn default_n(command: Command) -> Vec<usize> {
    match command {
        Command::Validate => vec![64],
        Command::Spectrum => vec![8],
        Command::CriticalStrain => vec![32, 64, 128],
        Command::Converge | Command::Consistency => vec![64, 128, 256, 512, 1024],
        Command::Remark44 => vec![256],
    }
}

fn default_k(command: Command) -> KSpec {
    match command {
        Command::Remark44 => KSpec::List(vec![8, 16, 32, 64]),
        Command::Validate => KSpec::List(vec![10]),
        _ => KSpec::List(vec![8]),
    }
}

/// Where a raw value came from, for error messages.
enum Origin<'a> {
    File(&'a Path, usize),
    Flag(&'a str),
}

impl Origin<'_> {
    fn error(&self, message: impl std::fmt::Display) -> CliError {
        match self {
            Origin::File(path, line) => CliError::Config(format!("{}:{line}: {message}", path.display())),
            Origin::Flag(flag) => CliError::Config(format!("--{flag}: {message}")),
        }
    }
}

/// Resolves a built-in name or a file path (relative to `base`).
fn load_potential(spec: &str, base: &Path, origin: &Origin) -> Result<(EamPotential, String), CliError> {
    if let Some(p) = potentials::builtin(spec) {
        return Ok((p, spec.to_string()));
    }
    let path = base.join(spec);
    if !path.is_file() {
        return Err(origin.error(format!(
            "`{spec}` is neither a built-in potential ({}) nor an existing file",
            potentials::BUILTIN_NAMES.join(", ")
        )));
    }
    let p = EamPotential::load(&path).map_err(|e| origin.error(format!("{}: {e}", path.display())))?;
    Ok((p, path.display().to_string()))
}

impl ExperimentConfig {
    /// Merges an optional config file with flag overrides and validates.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self, CliError> {
        let mut raw: [(Option<String>, Option<usize>); 8] = Default::default();
        const KEYS: [&str; 8] = ["command", "potential", "f", "bracket", "n", "k", "out", "seed"];
        let mut base = PathBuf::from(".");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let entries = kv::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            for e in entries {
                let slot = KEYS.iter().position(|k| *k == e.key).ok_or_else(|| {
                    CliError::Config(format!("{}:{}: unknown key `{}`", path.display(), e.line, e.key))
                })?;
                raw[slot] = (Some(e.value), Some(e.line));
            }
            base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        let config_path = file.unwrap_or(Path::new(""));
        let flag_values = [
            flags.command.map(|c| c.name().to_string()),
            flags.potential,
            flags.f,
            flags.bracket,
            flags.n,
            flags.k,
            flags.out.map(|p| p.display().to_string()),
            flags.seed.map(|s| s.to_string()),
        ];
        let mut from_flag = [false; 8];
        for (i, v) in flag_values.into_iter().enumerate() {
            if v.is_some() {
                raw[i] = (v, None);
                from_flag[i] = true;
            }
        }
        let origin = |i: usize| match raw[i].1 {
            Some(line) => Origin::File(config_path, line),
            None => Origin::Flag(KEYS[i]),
        };
        // Paths from the file are relative to the file; flags to the working directory.
        let base_for = |i: usize| if from_flag[i] { PathBuf::from(".") } else { base.clone() };

        let command = match &raw[0].0 {
            Some(s) => Command::parse(s).ok_or_else(|| origin(0).error(format!("unknown command `{s}`")))?,
            None => return Err(CliError::Config("no command given".into())),
        };
        let (potential, potential_source) = match &raw[1].0 {
            Some(s) => load_potential(s, &base_for(1), &origin(1))?,
            // The oscillation experiment needs a potential whose zone-boundary mode is the softest.
            None if command == Command::Remark44 => {
                (potentials::embedding_dominated_potential(), "embedding-dominated".to_string())
            }
            None => (potentials::default_potential(), "default".to_string()),
        };
        let f = match &raw[2].0 {
            Some(s) => parse_list::<f64>(s).map_err(|m| origin(2).error(m))?,
            None => vec![1.05],
        };
        if let Some(bad) = f.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(origin(2).error(format!("strain {bad} must be positive")));
        }
        let bracket = match &raw[3].0 {
            Some(s) => match parse_list::<f64>(s).map_err(|m| origin(3).error(m))?.as_slice() {
                &[lo, hi] if lo > 0.0 && lo < hi => (lo, hi),
                _ => return Err(origin(3).error("expected `lo, hi` with 0 < lo < hi")),
            },
            None => (1.1, 1.4),
        };
        let n = match &raw[4].0 {
            Some(s) => parse_list::<usize>(s).map_err(|m| origin(4).error(m))?,
            None => default_n(command),
        };
        if n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(origin(4).error("N list must be strictly increasing"));
        }
        if let Some(bad) = n.iter().find(|&&v| v < eamqc::ChainGrid::MIN_N) {
            return Err(origin(4).error(format!("N = {bad} is below {}", eamqc::ChainGrid::MIN_N)));
        }
        let k = match &raw[5].0 {
            Some(s) => KSpec::parse(s).map_err(|m| origin(5).error(m))?,
            None => default_k(command),
        };
        let out = match &raw[6].0 {
            Some(s) => base_for(6).join(s),
            None => PathBuf::from("out"),
        };
        let seed = match &raw[7].0 {
            Some(s) => s.parse::<u64>().map_err(|_| origin(7).error(format!("`{s}` is not a seed")))?,
            None => 0,
        };
        let config = Self { command, potential, potential_source, f, bracket, n, k, out, seed };
        config.check_pairs().map_err(|m| origin(5).error(m))?;
        Ok(config)
    }

    /// `K < N - 5` for every `(N, K)` the command will pair up.
    fn check_pairs(&self) -> Result<(), String> {
        if matches!(self.command, Command::Validate | Command::Spectrum) {
            return Ok(());
        }
        let ks: Vec<(usize, usize)> = match (&self.k, self.command) {
            (KSpec::List(ks), Command::Remark44) => {
                let n = *self.n.last().expect("nonempty");
                ks.iter().map(|&k| (n, k)).collect()
            }
            (KSpec::List(ks), _) if ks.len() != 1 => {
                return Err(format!("{} takes a single K or `power:θ`", self.command.name()))
            }
            (spec, _) => {
                let rule = spec.rule()?;
                self.n.iter().map(|&n| (n, rule.k_for(n))).collect()
            }
        };
        if self.command == Command::Remark44 {
            if let Some((_, k)) = ks.iter().find(|(_, k)| *k < 2) {
                return Err(format!("K = {k} must be at least 2"));
            }
        }
        match ks.iter().find(|(n, k)| k + MIN_CONTINUUM_GAP > *n) {
            Some((n, k)) => Err(format!("K = {k} violates K < N - 5 for N = {n}")),
            None => Ok(()),
        }
    }
}
