//! SVG plots rebuilt from the CSV artifacts of a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::svg::{line_chart, Series};
use crate::error::{Error, Result};

/// A parsed CSV table; empty cells are `None`.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Schema(format!("{name}: empty file")))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Schema(format!(
                    "{name}: line {} has {} fields, expected {}",
                    i + 2,
                    cells.len(),
                    header.len()
                )));
            }
            let row = cells
                .iter()
                .enumerate()
                .map(|(j, c)| match *c {
                    "" => Ok(None),
                    "true" => Ok(Some(1.0)),
                    "false" => Ok(Some(0.0)),
                    _ => c.parse::<f64>().map(Some).map_err(|_| {
                        Error::Schema(format!("{name}: line {}, field '{}': '{c}' is not a number", i + 2, header[j]))
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
    }

    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    fn pairs(&self, x: &str, y: &str, f: impl Fn(f64, f64) -> Option<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
        let xs = self.column(x)?;
        let ys = self.column(y)?;
        Ok(xs
            .into_iter()
            .zip(ys)
            .filter_map(|(a, b)| f(a?, b?))
            .collect())
    }
}

fn numbered(dir: &Path, prefix: &str) -> Result<Vec<(usize, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(k) = name
            .strip_prefix(prefix)
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|k| k.parse::<usize>().ok())
        {
            out.push((k, path));
        }
    }
    out.sort();
    Ok(out)
}

/// `(file name, svg)` for every recognised CSV in `dir`, in a fixed order.
pub fn plots_for_dir(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();

    let family = numbered(dir, "family_")?;
    if !family.is_empty() {
        let h_values: BTreeMap<usize, f64> = fs::read_to_string(dir.join("family.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .and_then(|v| {
                v["entries"]
                    .as_array()
                    .map(|a| a.iter().enumerate().filter_map(|(i, e)| Some((i, e["h"].as_f64()?))).collect())
            })
            .unwrap_or_default();
        let mut series = Vec::new();
        for (k, path) in &family {
            let t = Table::read(path)?;
            let label = h_values.get(k).map(|h| format!("h = {h}")).unwrap_or_else(|| format!("entry {k}"));
            series.push(Series::line(label, t.pairs("x", "log_abs_v", |a, b| Some((a, b)))?));
        }
        out.push((
            "family.svg".to_string(),
            line_chart("Base profiles", "x", "log |v_h(x)|", &series),
        ));
    }

    let support = dir.join("support.csv");
    if support.exists() {
        let t = Table::read(&support)?;
        let pts = t.pairs("cell_center", "rate", |a, b| Some((a, b)))?;
        out.push((
            "support.svg".to_string(),
            line_chart("Local decay rates", "cell centre", "rate", &[Series::scatter("fitted rate", pts)]),
        ));
    }

    for (k, path) in numbered(dir, "restriction_")? {
        let t = Table::read(&path)?;
        let scaled = |a: f64, b: f64| Some((a, -a * b));
        let series = [
            Series::line("-h log |u|_H", t.pairs("h", "log_restriction", scaled)?),
            Series::line("-h log |u|_tube", t.pairs("h", "log_tube", scaled)?),
        ];
        out.push((
            format!("restriction_{k}.svg"),
            line_chart(&format!("Restriction decay, hypersurface {k}"), "h", "-h log norm", &series),
        ));
    }

    let tau = dir.join("tau_trace.csv");
    if tau.exists() {
        let t = Table::read(&tau)?;
        let pts = t.pairs("tau", "margin", |a, b| Some((a, b)))?;
        out.push((
            "tau.svg".to_string(),
            line_chart("Bracket margin along tau", "tau", "margin", &[Series::scatter("margin", pts)]),
        ));
    }

    let sigma = dir.join("sigma.csv");
    if sigma.exists() {
        let t = Table::read(&sigma)?;
        let pts = t.pairs("h", "sigma_min", |a, b| (a > 0.0 && b > 0.0).then(|| (a.log10(), b.log10())))?;
        out.push((
            "sigma.svg".to_string(),
            line_chart("Smallest singular value", "log10 h", "log10 sigma_min", &[Series::line("sigma_min", pts)]),
        ));
    }

    let residual = dir.join("residual.csv");
    if residual.exists() {
        let t = Table::read(&residual)?;
        let trunc = t.column("truncation")?;
        let hs = t.column("h")?;
        let rs = t.column("residual")?;
        let mut by: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
        for ((k, h), r) in trunc.iter().zip(&hs).zip(&rs) {
            if let (Some(k), Some(h), Some(r)) = (k, h, r) {
                if *h > 0.0 && *r > 0.0 {
                    by.entry(*k as i64).or_default().push((h.log10(), r.log10()));
                }
            }
        }
        let series: Vec<Series> = by.into_iter().map(|(k, p)| Series::line(format!("K = {k}"), p)).collect();
        out.push((
            "residual.svg".to_string(),
            line_chart("Factorization residual", "log10 h", "log10 residual", &series),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_reports_line_and_field() {
        let err = Table::parse("h,v\n0.1,2\n0.2,x\n", "t.csv").err().unwrap().to_string();
        assert!(err.contains("line 3") && err.contains("field 'v'"), "{err}");
        let t = Table::parse("a,b\n1,\n", "t.csv").unwrap();
        assert_eq!(t.column("b").unwrap(), vec![None]);
    }
}
