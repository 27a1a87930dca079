//! Study reports and the files written from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const CSV_HEADER: &str = "step,field,n_dof,h,err_L2,err_H1,rate_L2,rate_H1,seconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub field: String,
    pub n_dof: usize,
    /// Largest element edge over all fields of the step.
    pub h: f64,
    pub err_l2: f64,
    pub err_h1: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: String,
    pub rows: Vec<StepRecord>,
    /// Scalar results that do not fit the per-step table.
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

fn rate(e0: f64, e1: f64, h0: f64, h1: f64) -> Option<f64> {
    let r = (e0 / e1).ln() / (h0 / h1).ln();
    ((h0 / h1 - 1.0).abs() > 1e-12 && r.is_finite()).then_some(r)
}

impl StudyReport {
    pub fn new(study: &str) -> Self {
        StudyReport { study: study.to_string(), ..Default::default() }
    }

    pub fn push(&mut self, step: usize, field: &str, n_dof: usize, h: f64, err: (f64, Option<f64>), seconds: f64) {
        self.rows.push(StepRecord {
            step,
            field: field.to_string(),
            n_dof,
            h,
            err_l2: err.0,
            err_h1: err.1,
            rate_l2: None,
            rate_h1: None,
            seconds,
        });
    }

    /// Observed rates between successive steps of each field; the first
    /// step of a field has none.
    pub fn compute_rates(&mut self) {
        let mut last: BTreeMap<String, usize> = BTreeMap::new();
        for k in 0..self.rows.len() {
            if let Some(&j) = last.get(&self.rows[k].field) {
                let (a, b) = (&self.rows[j], &self.rows[k]);
                let r2 = rate(a.err_l2, b.err_l2, a.h, b.h);
                let r1 = match (a.err_h1, b.err_h1) {
                    (Some(x), Some(y)) => rate(x, y, a.h, b.h),
                    _ => None,
                };
                self.rows[k].rate_l2 = r2;
                self.rows[k].rate_h1 = r1;
            }
            last.insert(self.rows[k].field.clone(), k);
        }
    }

    pub fn field_rows(&self, field: &str) -> Vec<&StepRecord> {
        self.rows.iter().filter(|r| r.field == field).collect()
    }

    /// Field names in order of first appearance.
    pub fn fields(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.field) {
                out.push(r.field.clone());
            }
        }
        out
    }

    /// Rates of the last `n` steps of `field`.
    pub fn last_rates(&self, field: &str, n: usize) -> Vec<(Option<f64>, Option<f64>)> {
        let rows = self.field_rows(field);
        rows[rows.len().saturating_sub(n)..].iter().map(|r| (r.rate_l2, r.rate_h1)).collect()
    }

    pub fn to_csv(&self, record_timing: bool) -> String {
        let num = |v: f64| format!("{v:.6e}");
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let secs = if record_timing { format!("{:.3}", r.seconds) } else { "0".into() };
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.field,
                r.n_dof,
                num(r.h),
                num(r.err_l2),
                opt(r.err_h1),
                opt(r.rate_l2),
                opt(r.rate_h1),
                secs
            )
            .expect("write to string");
        }
        s
    }

    /// Wall times are zeroed unless `record_timing`, as in the CSV.
    pub fn summary_json(&self, config_toml: &str, record_timing: bool) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            study: &'a str,
            steps: usize,
            rows: &'a [StepRecord],
            metrics: &'a BTreeMap<String, f64>,
            notes: &'a [String],
            config: &'a str,
        }
        let steps = self.rows.iter().map(|r| r.step + 1).max().unwrap_or(0);
        let mut rows = self.rows.clone();
        if !record_timing {
            rows.iter_mut().for_each(|r| r.seconds = 0.0);
        }
        serde_json::to_string_pretty(&Summary {
            study: &self.study,
            steps,
            rows: &rows,
            metrics: &self.metrics,
            notes: &self.notes,
            config: config_toml,
        })
        .expect("summary serializes")
    }
}

/// Python script plotting log-log error curves from the CSV next to it.
pub fn plot_script(csv_name: &str, study: &str) -> String {
    format!(
        r#"# Log-log error plots for the {study} study.
# Usage: python3 plot.py   (reads {csv_name} from this directory)
import csv, os
from collections import defaultdict
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
data = defaultdict(lambda: {{"h": [], "dof": [], "L2": [], "H1": []}})
with open(os.path.join(here, "{csv_name}")) as f:
    for row in csv.DictReader(f):
        d = data[row["field"]]
        d["h"].append(float(row["h"]))
        d["dof"].append(int(row["n_dof"]))
        d["L2"].append(float(row["err_L2"]))
        d["H1"].append(float(row["err_H1"]) if row["err_H1"] else float("nan"))

fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for name, d in data.items():
    axes[0].loglog(d["h"], d["L2"], "o-", label=name + " L2")
    axes[0].loglog(d["h"], d["H1"], "s--", label=name + " H1")
    axes[1].loglog(d["dof"], d["L2"], "o-", label=name)
axes[0].set_xlabel("element edge length h")
axes[0].set_ylabel("error")
axes[1].set_xlabel("number of DOFs")
axes[1].set_ylabel("L2 error")
for a in axes:
    a.grid(True, which="both", alpha=0.3)
    a.legend()
fig.suptitle("{study}")
fig.tight_layout()
fig.savefig(os.path.join(here, "{study}_errors.png"), dpi=150)
"#
    )
}

/// Triangles with per-vertex field values, all in one material phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldExport {
    /// Value column names, e.g. `T`, `u_x`, `u_y`.
    pub columns: Vec<String>,
    pub triangles: Vec<ExportTriangle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportTriangle {
    pub phase: usize,
    pub vertices: [[f64; 2]; 3],
    /// `values[v][column]`.
    pub values: [Vec<f64>; 3],
}

impl FieldExport {
    /// Line format: a header of `#` lines, then one line per triangle
    /// vertex, `x y phase v1 v2 ...`, three consecutive lines per triangle.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# triangle soup: 3 consecutive vertex lines per triangle\n");
        writeln!(s, "# triangles {}", self.triangles.len()).expect("write to string");
        writeln!(s, "# columns x y phase {}", self.columns.join(" ")).expect("write to string");
        for t in &self.triangles {
            for v in 0..3 {
                write!(s, "{:.9e} {:.9e} {}", t.vertices[v][0], t.vertices[v][1], t.phase).expect("write to string");
                for x in &t.values[v] {
                    write!(s, " {x:.9e}").expect("write to string");
                }
                s.push('\n');
            }
        }
        s
    }

    /// Vertex lines of a text export.
    pub fn count_vertices(text: &str) -> usize {
        text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).count()
    }
}

/// Output files of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

pub struct EmitOptions<'a> {
    pub csv: bool,
    pub plot: bool,
    pub summary: bool,
    pub record_timing: bool,
    pub config_toml: &'a str,
}

/// Writes the selected artifacts into `dir`, creating it if needed.
pub fn emit_report(report: &StudyReport, export: Option<&FieldExport>, dir: &Path, opts: &EmitOptions) -> io::Result<Written> {
    fs::create_dir_all(dir)?;
    let mut w = Written::default();
    let stem = &report.study;
    let csv_name = format!("{stem}.csv");
    let mut put = |name: String, body: String| -> io::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body)?;
        w.files.push(p);
        Ok(())
    };
    if opts.csv {
        put(csv_name.clone(), report.to_csv(opts.record_timing))?;
    }
    if opts.plot {
        put(format!("{stem}_plot.py"), plot_script(&csv_name, stem))?;
    }
    if opts.summary {
        put(format!("{stem}_summary.json"), report.summary_json(opts.config_toml, opts.record_timing))?;
    }
    if let Some(e) = export {
        put(format!("{stem}_fields.txt"), e.to_text())?;
    }
    Ok(w)
}
