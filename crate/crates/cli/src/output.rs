use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use conewalk::stats::experiments::ExperimentOutput;
use conewalk::walk::PathSample;
use serde::Serialize;

use crate::svg;
use crate::CliError;

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))? + "\n")
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

pub fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes JSON to `path`, or to stdout without a path.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = json(value)?;
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `file.csv` → `file.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Shortest decimal that round-trips; stable across platforms.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

/// Long-format samples: `series,index,value`.
pub fn columns_csv(out: &ExperimentOutput) -> String {
    let mut s = String::from("series,index,value\n");
    for c in &out.columns {
        for (i, v) in c.values.iter().enumerate() {
            s.push_str(&format!("{},{i},{}\n", c.name, num(*v)));
        }
    }
    s
}

/// Report, sample CSV and plot of one experiment.
pub fn write_experiment(
    out: &ExperimentOutput,
    report: Option<&Path>,
    csv: Option<&Path>,
    plot: Option<&Path>,
) -> Result<(), CliError> {
    emit_json(&out.report, report)?;
    if let Some(p) = csv {
        write_text(p, &columns_csv(out))?;
    }
    if let Some(p) = plot {
        let text = if out.report.experiment == "survival-exponent" {
            let col = |name: &str| {
                out.columns
                    .iter()
                    .find(|c| c.name == name)
                    .map(|c| c.values.clone())
                    .unwrap_or_default()
            };
            let meta = |key: &str| {
                out.report
                    .metadata
                    .get(key)
                    .and_then(|v| v.as_f64())
                    .unwrap_or(f64::NAN)
            };
            svg::loglog(
                &col("n"),
                &col("survival"),
                meta("slope"),
                meta("intercept"),
            )
        } else {
            svg::overlay(&svg::panels(out))
        };
        write_text(p, &text)?;
    }
    Ok(())
}

/// Path dump `replica,k,coord_1..coord_d,exited`; a path that left the cone
/// stops at its exit step, which carries `exited = 1`.
pub fn write_paths<'a>(
    path: &Path,
    dim: usize,
    paths: impl Iterator<Item = (usize, &'a PathSample)>,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    let header: Vec<String> = (1..=dim).map(|i| format!("coord_{i}")).collect();
    let mut line = format!("replica,k,{},exited\n", header.join(","));
    w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
    for (r, p) in paths {
        for k in 0..=p.len() {
            line.clear();
            line.push_str(&format!("{r},{k}"));
            for c in p.position(k) {
                line.push(',');
                line.push_str(&num(*c));
            }
            let exited = p.exit_index == Some(k);
            line.push_str(if exited { ",1\n" } else { ",0\n" });
            w.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}
