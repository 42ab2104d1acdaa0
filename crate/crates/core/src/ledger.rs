//! CSV ledger: one row per step, preceded by a comment line carrying the run
//! parameters and a comment line naming the columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evolution::{AdvectionMode, ModelParams};
use crate::grid::Grid;
use crate::monitor::{LedgerRow, MonitorConfig};
use crate::reaction::ReactionModel;

const MAGIC: &str = "clusterflow-ledger v1";

/// Everything needed to re-evaluate the margins from the ledger alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerMeta {
    pub grid: Grid,
    pub params: ModelParams,
    pub mode: AdvectionMode,
    pub monitor: MonitorConfig,
}

/// Shortest text that parses back to the same `f64`, without long runs of
/// zeros for very large or very small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn p_label(p: f64) -> String {
    format!("{p}")
}

pub fn column_names(p_set: &[f64]) -> Vec<String> {
    let per_p = |prefix: &'static str| p_set.iter().map(move |&p| format!("{prefix}{}", p_label(p)));
    let mut cols: Vec<String> = ["step", "t", "dt", "mass", "l2_sq", "grad_sq"].map(String::from).to_vec();
    cols.extend(per_p("lp_"));
    cols.extend(per_p("grad_pow_sq_"));
    cols.extend(
        [
            "linf",
            "grad_lq",
            "w1q",
            "gn_ratio",
            "omega_sq",
            "div_omega_sq",
            "omega_grad_sq",
            "weak_gap",
            "omega_linf",
            "regularity_ratio",
            "entropy",
            "sqrt_grad_sq",
            "entropy_flag",
            "cancel_t1",
            "cancel_t2",
            "cancel_residual",
            "int_grad",
            "int_omega",
            "energy_margin",
            "entropy_margin",
            "tol_discr",
        ]
        .map(String::from),
    );
    cols.extend(per_p("lp_margin_"));
    cols.extend(per_p("lp_constant_"));
    cols
}

fn row_fields(row: &LedgerRow) -> Vec<String> {
    let f = |v: &f64| fmt_f64(*v);
    let mut out = vec![row.step.to_string()];
    out.extend([row.t, row.dt, row.mass, row.l2_sq, row.grad_sq].iter().map(f));
    out.extend(row.lp.iter().map(f));
    out.extend(row.grad_pow_sq.iter().map(f));
    out.extend(
        [
            row.linf,
            row.grad_lq,
            row.w1q,
            row.gn_ratio,
            row.omega_sq,
            row.div_omega_sq,
            row.omega_grad_sq,
            row.weak_gap,
            row.omega_linf,
            row.regularity_ratio,
            row.entropy,
            row.sqrt_grad_sq,
        ]
        .iter()
        .map(f),
    );
    out.push(u8::from(row.entropy_flag).to_string());
    out.extend(
        [
            row.cancel_t1,
            row.cancel_t2,
            row.cancel_residual,
            row.int_grad,
            row.int_omega,
            row.energy_margin,
            row.entropy_margin,
            row.tol_discr,
        ]
        .iter()
        .map(f),
    );
    out.extend(row.lp_margin.iter().map(f));
    out.extend(row.lp_constant.iter().map(f));
    out
}

pub fn meta_line(meta: &LedgerMeta) -> String {
    let g = &meta.grid;
    let p = &meta.params;
    let model = match p.model {
        ReactionModel::Bistable { a } => format!("model=bistable a={}", fmt_f64(a)),
        ReactionModel::Monostable => "model=monostable".to_string(),
    };
    let p_set: Vec<String> = meta.monitor.p_set.iter().map(|&p| p_label(p)).collect();
    format!(
        "# {MAGIC} {model} delta={} epsilon={} r={} lx={} ly={} nx={} ny={} mode={} tol_c={} q={} p_set={}",
        fmt_f64(p.delta),
        fmt_f64(p.epsilon),
        fmt_f64(p.r),
        fmt_f64(g.lx()),
        fmt_f64(g.ly()),
        g.nx(),
        g.ny(),
        meta.mode,
        fmt_f64(meta.monitor.tol_c),
        fmt_f64(meta.monitor.q),
        p_set.join(";"),
    )
}

pub fn parse_meta_line(line: &str, path: &Path) -> Result<LedgerMeta> {
    let bad = |reason: String| Error::format(path, reason);
    let body = line
        .strip_prefix("# ")
        .and_then(|s| s.strip_prefix(MAGIC))
        .ok_or_else(|| bad(format!("first line must start with `# {MAGIC}`")))?;
    let mut kv = std::collections::HashMap::new();
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("expected key=value, got `{tok}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(format!("missing `{k}` in header")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("`{k}` is not a number"))) };
    let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("`{k}` is not an integer"))) };
    let model = match get("model")? {
        "bistable" => ReactionModel::bistable(num("a")?)?,
        "monostable" => ReactionModel::Monostable,
        other => return Err(bad(format!("unknown model `{other}`"))),
    };
    let grid = Grid::new(num("lx")?, num("ly")?, int("nx")?, int("ny")?)?;
    let params = ModelParams::new(num("delta")?, num("epsilon")?, num("r")?, model)?;
    let mode = get("mode")?.parse().map_err(bad)?;
    let p_set = get("p_set")?
        .split(';')
        .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad exponent `{s}` in p_set"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(LedgerMeta {
        grid,
        params,
        mode,
        monitor: MonitorConfig {
            p_set,
            tol_c: num("tol_c")?,
            q: num("q")?,
        },
    })
}

/// Appends rows as they are produced and flushes after each one, so an
/// interrupted run leaves a readable prefix.
pub struct LedgerWriter {
    path: PathBuf,
    csv: csv::Writer<BufWriter<File>>,
    width: usize,
}

impl LedgerWriter {
    pub fn create(path: impl AsRef<Path>, meta: &LedgerMeta) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        let cols = column_names(&meta.monitor.p_set);
        writeln!(out, "{}", meta_line(meta)).map_err(|e| Error::io(&path, e))?;
        writeln!(out, "# columns: {}", cols.join(" ")).map_err(|e| Error::io(&path, e))?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(&cols).map_err(|e| csv_err(&path, e))?;
        Ok(LedgerWriter {
            path,
            csv,
            width: cols.len(),
        })
    }

    pub fn append(&mut self, row: &LedgerRow) -> Result<()> {
        let fields = row_fields(row);
        if fields.len() != self.width {
            return Err(Error::format(&self.path, "row width does not match the configured exponent set"));
        }
        self.csv.write_record(&fields).map_err(|e| csv_err(&self.path, e))?;
        self.csv.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

pub fn write_ledger(path: impl AsRef<Path>, meta: &LedgerMeta, rows: &[LedgerRow]) -> Result<()> {
    let mut w = LedgerWriter::create(path, meta)?;
    rows.iter().try_for_each(|r| w.append(r))
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<(LedgerMeta, Vec<LedgerRow>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().ok_or_else(|| Error::format(path, "empty ledger"))?;
    let meta = parse_meta_line(first, path)?;
    let np = meta.monitor.p_set.len();
    let expected = column_names(&meta.monitor.p_set);

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if header != expected {
        return Err(Error::format(path, "column header does not match the exponent set in the first line"));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let mut it = rec.iter();
        let mut next = |name: &str| -> Result<f64> {
            let s = it.next().ok_or_else(|| Error::format(path, format!("row {line}: missing `{name}`")))?;
            s.parse().map_err(|_| Error::format(path, format!("row {line}: `{name}` = `{s}` is not a number")))
        };
        let many = |prefix: &str, next: &mut dyn FnMut(&str) -> Result<f64>| -> Result<Vec<f64>> {
            (0..np).map(|_| next(prefix)).collect()
        };
        let step = next("step")?;
        let (t, dt, mass, l2_sq, grad_sq) = (next("t")?, next("dt")?, next("mass")?, next("l2_sq")?, next("grad_sq")?);
        let lp = many("lp", &mut next)?;
        let grad_pow_sq = many("grad_pow_sq", &mut next)?;
        let mut row = LedgerRow {
            step: step as usize,
            t,
            dt,
            mass,
            l2_sq,
            grad_sq,
            lp,
            grad_pow_sq,
            linf: next("linf")?,
            grad_lq: next("grad_lq")?,
            w1q: next("w1q")?,
            gn_ratio: next("gn_ratio")?,
            omega_sq: next("omega_sq")?,
            div_omega_sq: next("div_omega_sq")?,
            omega_grad_sq: next("omega_grad_sq")?,
            weak_gap: next("weak_gap")?,
            omega_linf: next("omega_linf")?,
            regularity_ratio: next("regularity_ratio")?,
            entropy: next("entropy")?,
            sqrt_grad_sq: next("sqrt_grad_sq")?,
            entropy_flag: next("entropy_flag")? != 0.0,
            cancel_t1: next("cancel_t1")?,
            cancel_t2: next("cancel_t2")?,
            cancel_residual: next("cancel_residual")?,
            int_grad: next("int_grad")?,
            int_omega: next("int_omega")?,
            energy_margin: next("energy_margin")?,
            entropy_margin: next("entropy_margin")?,
            tol_discr: next("tol_discr")?,
            lp_margin: Vec::new(),
            lp_constant: Vec::new(),
        };
        row.lp_margin = many("lp_margin", &mut next)?;
        row.lp_constant = many("lp_constant", &mut next)?;
        rows.push(row);
    }
    Ok((meta, rows))
}
