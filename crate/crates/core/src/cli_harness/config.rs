use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hydro_pde::{stable_steps, FieldGrid, Grid};
use crate::profile::{Drift, Profile};
use crate::rates::{build_cylinder_rate, CylinderRate, RateSpec};
use crate::simulator::SimParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Hydro,
    RateEval,
    Contract,
    Oracle,
    Validate,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Simulate,
        Mode::Hydro,
        Mode::RateEval,
        Mode::Contract,
        Mode::Oracle,
        Mode::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Hydro => "hydro",
            Mode::RateEval => "rate-eval",
            Mode::Contract => "contract",
            Mode::Oracle => "oracle",
            Mode::Validate => "validate",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Mode::ALL.iter().map(|m| m.as_str()).collect();
                Error::Usage(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Keys accepted in a configuration file besides `mode`, `seed` and `replicas`.
pub const KNOWN_KEYS: &[&str] = &[
    "sim.n",
    "sim.t",
    "sim.beta_plus",
    "sim.beta_minus",
    "sim.initial",
    "sim.samples",
    "sim.substep",
    "sim.record_events",
    "sim.event_cap",
    "rate.name",
    "rate.range",
    "rate.table",
    "tilt.g",
    "tilt.h",
    "tilt.g_file",
    "tilt.h_file",
    "tilt.omega",
    "grid.nx",
    "grid.nt",
    "input.fields",
    "contract.tol",
    "contract.max_iters",
    "contract.audits",
    "oracle.paths",
    "compare.enabled",
];

/// A parsed experiment description. Everything except the mode, seed and
/// replica count is kept as text and interpreted on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub replicas: usize,
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            seed: 0,
            replicas: 1,
            entries: BTreeMap::new(),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut mode = None;
        let mut config = Self::new(Mode::Validate);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "mode" => mode = Some(value.parse::<Mode>().map_err(|e| Error::Config(e.to_string()))?),
                _ => config.set(key, value)?,
            }
        }
        config.mode = mode.ok_or_else(|| Error::Config("missing key: mode".into()))?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "seed" => self.seed = parse_value(key, value)?,
            "replicas" => {
                let r: usize = parse_value(key, value)?;
                if r == 0 {
                    return Err(Error::Config("replicas must be at least 1".into()));
                }
                self.replicas = r;
            }
            _ if KNOWN_KEYS.contains(&key) => {
                self.entries.insert(key.to_string(), value.to_string());
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// All settings in canonical order, including mode, seed and replicas.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("mode".to_string(), self.mode.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("replicas".to_string(), self.replicas.to_string()),
        ];
        out.extend(self.entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn typed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }

    fn profile(&self, key: &str) -> Result<Option<Profile>> {
        self.get(key)
            .map(|v| v.parse::<Profile>().map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn t_final(&self) -> Result<f64> {
        self.typed("sim.t", 1.0)
    }

    pub fn rate(&self) -> Result<CylinderRate> {
        let name = self.get("rate.name").unwrap_or("constant");
        let spec = if name == "custom" {
            let range: usize = self.typed("rate.range", 0)?;
            let table = self
                .get("rate.table")
                .ok_or_else(|| Error::Config("rate.name = custom needs rate.table".into()))?
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| parse_value::<f64>("rate.table", s))
                .collect::<Result<Vec<_>>>()?;
            RateSpec::Table { range, table }
        } else {
            RateSpec::Named(name.to_string())
        };
        build_cylinder_rate(&spec).map_err(|e| match e {
            Error::Validation(m) => Error::Config(m),
            other => other,
        })
    }

    pub fn initial_profile(&self) -> Result<Profile> {
        Ok(self.profile("sim.initial")?.unwrap_or(Profile::Constant(0.5)))
    }

    pub fn omega(&self) -> Result<Profile> {
        match self.profile("tilt.omega")? {
            Some(p) => Ok(p),
            None => self.initial_profile(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        let t = self.t_final()?;
        let nx: usize = self.typed("grid.nx", 64)?;
        let nt: usize = match self.get("grid.nt") {
            Some(v) => parse_value("grid.nt", v)?,
            None => stable_steps(nx, t, 0.5),
        };
        Grid::new(nx, nt, t).map_err(|e| Error::Config(e.to_string()))
    }

    /// Drift given by `tilt.<name>` (a profile) or `tilt.<name>_file` (a field CSV).
    pub fn drift(&self, name: &str, grid: Option<Grid>) -> Result<Drift> {
        let file_key = format!("tilt.{name}_file");
        if let Some(path) = self.get(&file_key) {
            let grid = match grid {
                Some(g) => g,
                None => self.grid()?,
            };
            let field = crate::cli_harness::output::read_field_csv(Path::new(path), grid)?;
            return Ok(Drift::from_grid(field));
        }
        Ok(match self.profile(&format!("tilt.{name}"))? {
            Some(p) => Drift::Static(p),
            None => Drift::Zero,
        })
    }

    /// Drift sampled on the solver grid.
    pub fn drift_field(&self, name: &str, grid: Grid) -> Result<FieldGrid> {
        let drift = self.drift(name, Some(grid))?;
        Ok(match drift {
            Drift::Zero => FieldGrid::zeros(grid),
            Drift::Grid(f) => (*f).clone(),
            d => FieldGrid::from_fn(grid, |t, x| d.eval(t, x)),
        })
    }

    pub fn sim_params(&self) -> Result<SimParams> {
        let n: usize = self.typed("sim.n", 32)?;
        let t = self.t_final()?;
        let mut p = SimParams::new(n, t, self.rate()?).uniform_samples(self.typed("sim.samples", 11)?);
        p.beta_plus = self.typed("sim.beta_plus", 1.0)?;
        p.beta_minus = self.typed("sim.beta_minus", 1.0)?;
        p.initial = self.initial_profile()?;
        p.seed = self.seed;
        p.substep = self.get("sim.substep").map(|v| parse_value("sim.substep", v)).transpose()?;
        p.record_events = self.typed("sim.record_events", false)?;
        p.event_cap = self.typed("sim.event_cap", crate::simulator::DEFAULT_EVENT_CAP)?;
        p.tilt_g = self.drift("g", None)?;
        p.tilt_h = self.drift("h", None)?;
        p.validate()?;
        Ok(p)
    }

    pub fn contract_settings(&self) -> Result<(f64, usize, usize)> {
        Ok((
            self.typed("contract.tol", crate::density_contraction::DEFAULT_TOLERANCE)?,
            self.typed("contract.max_iters", crate::density_contraction::DEFAULT_MAX_ITERS)?,
            self.typed("contract.audits", 0)?,
        ))
    }

    pub fn oracle_paths(&self) -> Result<usize> {
        self.typed("oracle.paths", 0)
    }

    pub fn compare_enabled(&self) -> Result<bool> {
        self.typed("compare.enabled", false)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# equilibrium run
mode = simulate
sim.n = 16
sim.t = 0.25
sim.initial = bump 0.5 0.25   # γ
rate.name = neighbor-sum
replicas = 4
seed = 17
";

    #[test]
    fn parse_and_round_trip() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.mode, Mode::Simulate);
        assert_eq!((c.seed, c.replicas), (17, 4));
        assert_eq!(c.get("sim.initial"), Some("bump 0.5 0.25"));
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), c.to_text());
        let p = c.sim_params().unwrap();
        assert_eq!(p.n, 16);
        assert_eq!(p.rate.name(), "neighbor-sum");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("sim.n = 3"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("mode = fly"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("mode = hydro\nsim.nn = 3"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("mode = hydro\nreplicas = 0"), Err(Error::Config(_))));
        let c = ExperimentConfig::parse("mode = hydro\nsim.n = many").unwrap();
        assert!(c.sim_params().is_err());
        assert!(matches!("fly".parse::<Mode>(), Err(Error::Usage(_))));
    }

    #[test]
    fn custom_rate_table() {
        let c = ExperimentConfig::parse("mode = hydro\nrate.name = custom\nrate.range = 0\nrate.table = 2, 0.5").unwrap();
        assert_eq!(c.rate().unwrap().table(), &[2.0, 0.5]);
        let bad = ExperimentConfig::parse("mode = hydro\nrate.name = custom\nrate.table = 1 -1").unwrap();
        assert!(matches!(bad.rate(), Err(Error::Config(_))));
    }

    #[test]
    fn default_grid_is_stable() {
        let c = ExperimentConfig::parse("mode = hydro\ngrid.nx = 32\nsim.t = 0.5").unwrap();
        let g = c.grid().unwrap();
        assert!(g.dt() <= 0.5 * g.dx() * g.dx() * (1.0 + 1e-12));
    }
}
