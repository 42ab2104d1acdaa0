//! `section.key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::elliptic::{Backend, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::evolution::{AdvectionMode, ModelParams};
use crate::grid::Grid;
use crate::ledger::fmt_f64;
use crate::monitor::{GuardConfig, MonitorConfig};
use crate::reaction::ReactionModel;

pub const REQUIRED_KEYS: [&str; 8] = [
    "grid.nx",
    "grid.ny",
    "params.delta",
    "params.epsilon",
    "params.r",
    "model.kind",
    "time.t_end",
    "init.kind",
];

const KNOWN_KEYS: [&str; 32] = [
    "grid.lx",
    "grid.ly",
    "grid.nx",
    "grid.ny",
    "params.delta",
    "params.epsilon",
    "params.r",
    "model.kind",
    "model.a",
    "time.dt_max",
    "time.safety",
    "time.t_end",
    "advection.mode",
    "elliptic.tol",
    "elliptic.backend",
    "init.kind",
    "init.value",
    "init.amplitude",
    "init.mode_x",
    "init.mode_y",
    "init.lo",
    "init.hi",
    "init.file",
    "guard.linf_cap",
    "guard.w1q_cap",
    "guard.q",
    "monitor.p_set",
    "monitor.tol_c",
    "output.ledger",
    "output.snapshot_period",
    "output.snapshot_dir",
    "seed",
];

/// Initial density.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Constant { value: f64 },
    /// `value + amplitude · cos(mode_x π x / lx) cos(mode_y π y / ly)`
    Cosine {
        value: f64,
        amplitude: f64,
        mode_x: u32,
        mode_y: u32,
    },
    /// Independent uniform samples in `[lo, hi)` drawn from the run seed.
    Noise { lo: f64, hi: f64 },
    File { path: PathBuf },
}

impl InitSpec {
    fn kind(&self) -> &'static str {
        match self {
            InitSpec::Constant { .. } => "constant",
            InitSpec::Cosine { .. } => "cosine",
            InitSpec::Noise { .. } => "noise",
            InitSpec::File { .. } => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub dt_max: f64,
    pub safety: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub ledger: PathBuf,
    /// Simulated-time spacing of snapshots; 0 writes none (except on abort).
    pub snapshot_period: f64,
    pub snapshot_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub params: ModelParams,
    pub time: TimeConfig,
    pub mode: AdvectionMode,
    pub backend: Backend,
    pub elliptic_tol: f64,
    pub init: InitSpec,
    pub guard: GuardConfig,
    pub monitor: MonitorConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn num(&self, key: &str, default: Option<f64>) -> Result<f64> {
        let v = self.parse::<f64>(key, "a number")?.or(default).ok_or_else(|| Error::config(key, "missing"))?;
        if !v.is_finite() {
            return Err(Error::config(key, "must be finite"));
        }
        Ok(v)
    }

    fn check(&self, key: &str, ok: bool, reason: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::config(key, reason))
        }
    }

    fn reject(&self, keys: &[&str], why: &str) -> Result<()> {
        match keys.iter().find(|k| self.map.contains_key(**k)) {
            Some(k) => Err(Error::config(*k, why)),
            None => Ok(()),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            return Err(Error::config(k, "unknown key"));
        }
        if v.is_empty() {
            return Err(Error::config(k, "empty value"));
        }
        if let Some((first, _)) = map.insert(k.to_string(), (n + 1, v.to_string())) {
            return Err(Error::config(k, format!("duplicate key (first set on line {first})")));
        }
    }
    Ok(Entries { map })
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let e = tokenize(text)?;
    let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| !e.map.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::config(
            missing.join(", "),
            format!("missing required key(s); required: {}", REQUIRED_KEYS.join(", ")),
        ));
    }

    let lx = e.num("grid.lx", Some(1.0))?;
    e.check("grid.lx", lx > 0.0, "must be > 0")?;
    let ly = e.num("grid.ly", Some(1.0))?;
    e.check("grid.ly", ly > 0.0, "must be > 0")?;
    let nx: usize = e.parse("grid.nx", "a positive integer")?.unwrap();
    e.check("grid.nx", nx >= 2, "must be >= 2")?;
    let ny: usize = e.parse("grid.ny", "a positive integer")?.unwrap();
    e.check("grid.ny", ny >= 2, "must be >= 2")?;
    let grid = Grid::new(lx, ly, nx, ny).map_err(|err| Error::config("grid", err.to_string()))?;

    let delta = e.num("params.delta", None)?;
    e.check("params.delta", delta > 0.0 && delta < 1.0, "must lie in (0, 1)")?;
    let epsilon = e.num("params.epsilon", None)?;
    e.check("params.epsilon", epsilon > 0.0, "must be > 0")?;
    let r = e.num("params.r", None)?;
    e.check("params.r", r >= 0.0, "must be >= 0")?;
    let model = match e.raw("model.kind").unwrap() {
        "bistable" => {
            let a = e.num("model.a", None).map_err(|_| Error::config("model.a", "required for the bistable law; must lie in (0, 1)"))?;
            e.check("model.a", a > 0.0 && a < 1.0, "threshold must lie in (0, 1)")?;
            ReactionModel::Bistable { a }
        }
        "monostable" => {
            e.reject(&["model.a"], "only used by the bistable law")?;
            ReactionModel::Monostable
        }
        other => return Err(Error::config("model.kind", format!("expected `bistable` or `monostable`, got `{other}`"))),
    };
    let params = ModelParams::new(delta, epsilon, r, model).map_err(|err| Error::config("params", err.to_string()))?;

    let t_end = e.num("time.t_end", None)?;
    e.check("time.t_end", t_end >= 0.0, "must be >= 0")?;
    let dt_max = e.num("time.dt_max", Some(1e-2))?;
    e.check("time.dt_max", dt_max > 0.0, "must be > 0")?;
    let safety = e.num("time.safety", Some(0.2))?;
    e.check("time.safety", safety > 0.0 && safety <= 1.0, "must lie in (0, 1]")?;

    let mode = match e.raw("advection.mode") {
        None => AdvectionMode::Upwind,
        Some(v) => v.parse().map_err(|m: String| Error::config("advection.mode", m))?,
    };
    let backend = match e.raw("elliptic.backend") {
        None => Backend::Direct,
        Some(v) => v.parse().map_err(|m: String| Error::config("elliptic.backend", m))?,
    };
    let elliptic_tol = e.num("elliptic.tol", Some(DEFAULT_TOL))?;
    e.check("elliptic.tol", elliptic_tol > 0.0 && elliptic_tol < 1.0, "must lie in (0, 1)")?;

    let init = parse_init(&e)?;

    let guard = GuardConfig {
        linf_cap: e.num("guard.linf_cap", Some(GuardConfig::default().linf_cap))?,
        w1q_cap: e.num("guard.w1q_cap", Some(GuardConfig::default().w1q_cap))?,
        nan_check: true,
    };
    e.check("guard.linf_cap", guard.linf_cap > 0.0, "must be > 0")?;
    e.check("guard.w1q_cap", guard.w1q_cap > 0.0, "must be > 0")?;
    let defaults = MonitorConfig::default();
    let q = e.num("guard.q", Some(defaults.q))?;
    e.check("guard.q", q >= 1.0, "must be >= 1")?;
    let p_set = match e.raw("monitor.p_set") {
        None => defaults.p_set,
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::config("monitor.p_set", format!("expected comma-separated numbers, got `{v}`")))?,
    };
    e.check(
        "monitor.p_set",
        p_set.iter().all(|p| p.is_finite() && *p >= 1.0),
        "exponents must be finite and >= 1",
    )?;
    let mut sorted = p_set.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    e.check("monitor.p_set", sorted.len() == p_set.len(), "exponents must be distinct")?;
    let tol_c = e.num("monitor.tol_c", Some(defaults.tol_c))?;
    e.check("monitor.tol_c", tol_c > 0.0, "must be > 0")?;

    let output = OutputConfig {
        ledger: e.raw("output.ledger").unwrap_or("ledger.csv").into(),
        snapshot_period: e.num("output.snapshot_period", Some(0.0))?,
        snapshot_dir: e.raw("output.snapshot_dir").unwrap_or("snapshots").into(),
    };
    e.check("output.snapshot_period", output.snapshot_period >= 0.0, "must be >= 0")?;
    let seed = e.parse("seed", "a nonnegative integer")?.unwrap_or(0);

    Ok(SimConfig {
        grid,
        params,
        time: TimeConfig { dt_max, safety, t_end },
        mode,
        backend,
        elliptic_tol,
        init,
        guard,
        monitor: MonitorConfig { p_set, tol_c, q },
        output,
        seed,
    })
}

fn parse_init(e: &Entries) -> Result<InitSpec> {
    const ALL: [&str; 7] = ["init.value", "init.amplitude", "init.mode_x", "init.mode_y", "init.lo", "init.hi", "init.file"];
    let kind = e.raw("init.kind").unwrap();
    let allowed: &[&str] = match kind {
        "constant" => &["init.value"],
        "cosine" => &["init.value", "init.amplitude", "init.mode_x", "init.mode_y"],
        "noise" => &["init.lo", "init.hi"],
        "file" => &["init.file"],
        other => {
            return Err(Error::config(
                "init.kind",
                format!("expected constant, cosine, noise or file, got `{other}`"),
            ))
        }
    };
    let unused: Vec<&str> = ALL.iter().copied().filter(|k| !allowed.contains(k)).collect();
    e.reject(&unused, &format!("not used by init.kind = {kind}"))?;
    let spec = match kind {
        "constant" => {
            let value = e.num("init.value", Some(1.0))?;
            e.check("init.value", value >= 0.0, "initial density must be >= 0")?;
            InitSpec::Constant { value }
        }
        "cosine" => {
            let value = e.num("init.value", Some(0.5))?;
            let amplitude = e.num("init.amplitude", Some(0.1))?;
            e.check("init.amplitude", value - amplitude.abs() >= 0.0, "init.value - |init.amplitude| must be >= 0")?;
            InitSpec::Cosine {
                value,
                amplitude,
                mode_x: e.parse("init.mode_x", "a nonnegative integer")?.unwrap_or(1),
                mode_y: e.parse("init.mode_y", "a nonnegative integer")?.unwrap_or(1),
            }
        }
        "noise" => {
            let lo = e.num("init.lo", Some(0.4))?;
            let hi = e.num("init.hi", Some(0.6))?;
            e.check("init.lo", lo >= 0.0, "initial density must be >= 0")?;
            e.check("init.hi", hi > lo, "must exceed init.lo")?;
            InitSpec::Noise { lo, hi }
        }
        _ => InitSpec::File {
            path: e.raw("init.file").ok_or_else(|| Error::config("init.file", "required for init.kind = file"))?.into(),
        },
    };
    Ok(spec)
}

impl SimConfig {
    /// Fully resolved configuration in the input syntax; parses back to `self`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.lx", fmt_f64(g.lx()));
        kv("grid.ly", fmt_f64(g.ly()));
        kv("grid.nx", g.nx().to_string());
        kv("grid.ny", g.ny().to_string());
        kv("params.delta", fmt_f64(self.params.delta));
        kv("params.epsilon", fmt_f64(self.params.epsilon));
        kv("params.r", fmt_f64(self.params.r));
        kv("model.kind", self.params.model.kind().to_string());
        if let Some(a) = self.params.model.threshold() {
            kv("model.a", fmt_f64(a));
        }
        kv("time.dt_max", fmt_f64(self.time.dt_max));
        kv("time.safety", fmt_f64(self.time.safety));
        kv("time.t_end", fmt_f64(self.time.t_end));
        kv("advection.mode", self.mode.to_string());
        kv("elliptic.tol", fmt_f64(self.elliptic_tol));
        kv("elliptic.backend", self.backend.to_string());
        kv("init.kind", self.init.kind().to_string());
        match &self.init {
            InitSpec::Constant { value } => kv("init.value", fmt_f64(*value)),
            InitSpec::Cosine {
                value,
                amplitude,
                mode_x,
                mode_y,
            } => {
                kv("init.value", fmt_f64(*value));
                kv("init.amplitude", fmt_f64(*amplitude));
                kv("init.mode_x", mode_x.to_string());
                kv("init.mode_y", mode_y.to_string());
            }
            InitSpec::Noise { lo, hi } => {
                kv("init.lo", fmt_f64(*lo));
                kv("init.hi", fmt_f64(*hi));
            }
            InitSpec::File { path } => kv("init.file", path.display().to_string()),
        }
        kv("guard.linf_cap", fmt_f64(self.guard.linf_cap));
        kv("guard.w1q_cap", fmt_f64(self.guard.w1q_cap));
        kv("guard.q", fmt_f64(self.monitor.q));
        let p: Vec<String> = self.monitor.p_set.iter().map(|&p| fmt_f64(p)).collect();
        kv("monitor.p_set", p.join(","));
        kv("monitor.tol_c", fmt_f64(self.monitor.tol_c));
        kv("output.ledger", self.output.ledger.display().to_string());
        kv("output.snapshot_period", fmt_f64(self.output.snapshot_period));
        kv("output.snapshot_dir", self.output.snapshot_dir.display().to_string());
        kv("seed", self.seed.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# minimal bistable run
grid.nx = 16
grid.ny = 16
params.delta = 0.1
params.epsilon = 0.1   # velocity smoothing
params.r = 1
model.kind = bistable
model.a = 0.25
time.t_end = 1
init.kind = constant
";

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn valid_bistable_with_defaults() {
        let c = parse_config(BASE).unwrap();
        assert_eq!(c.params.model, ReactionModel::Bistable { a: 0.25 });
        assert_eq!(c.grid.lx(), 1.0);
        assert_eq!(c.time.safety, 0.2);
        assert_eq!(c.mode, AdvectionMode::Upwind);
        assert_eq!(c.backend, Backend::Direct);
        assert_eq!(c.elliptic_tol, 1e-10);
        assert_eq!(c.monitor.p_set, vec![2.0, 4.0, 9.0]);
        assert_eq!(c.guard.linf_cap, 1e3);
        assert_eq!(c.init, InitSpec::Constant { value: 1.0 });
    }

    #[test]
    fn threshold_out_of_range_names_the_key() {
        let err = parse_config(&BASE.replace("model.a = 0.25", "model.a = 1.5")).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
        assert_eq!(key_of(err), "model.a");
        let err = parse_config(&BASE.replace("model.a = 0.25\n", "")).unwrap_err();
        assert_eq!(key_of(err), "model.a");
    }

    #[test]
    fn empty_input_lists_required_keys() {
        let err = parse_config("").unwrap_err();
        let msg = err.to_string();
        for k in REQUIRED_KEYS {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn errors_name_their_key() {
        let cases = [
            ("grid.nz = 3\n", "grid.nz"),
            ("seed = -1\n", "seed"),
            ("advection.mode = central\n", "advection.mode"),
            ("elliptic.backend = lu\n", "elliptic.backend"),
            ("time.safety = 0\n", "time.safety"),
            ("init.lo = 0.1\n", "init.lo"),
            ("monitor.p_set = 2,x\n", "monitor.p_set"),
            ("params.r = 2\n", "params.r"),
        ];
        for (extra, key) in cases {
            let err = parse_config(&format!("{BASE}{extra}")).unwrap_err();
            assert_eq!(key_of(err), key, "{extra}");
        }
        let err = parse_config(&BASE.replace("params.delta = 0.1", "params.delta = 1.2")).unwrap_err();
        assert_eq!(key_of(err), "params.delta");
        let err = parse_config(&BASE.replace("grid.nx = 16", "grid.nx = 1.5")).unwrap_err();
        assert_eq!(key_of(err), "grid.nx");
        let err = parse_config(&BASE.replace("model.kind = bistable", "model.kind = monostable")).unwrap_err();
        assert_eq!(key_of(err), "model.a");
    }

    #[test]
    fn echo_round_trips() {
        let texts = [
            BASE.to_string(),
            BASE.replace("init.kind = constant", "init.kind = noise\ninit.lo = 0.3\ninit.hi = 0.7\nseed = 99"),
            BASE.replace("init.kind = constant", "init.kind = cosine\ninit.amplitude = 0.05\ninit.mode_y = 0")
                + "advection.mode = energy\nelliptic.backend = iterative\nmonitor.p_set = 2,3.5\noutput.snapshot_period = 0.25\n",
            BASE.replace("init.kind = constant", "init.kind = file\ninit.file = u0.txt"),
        ];
        for t in texts {
            let c = parse_config(&t).unwrap();
            assert_eq!(parse_config(&c.echo()).unwrap(), c);
        }
    }
}
