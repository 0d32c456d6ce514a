//! Plot-ready data and SVG charts from run artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bvqpco_core::bayes_opt::{posterior_grid_csv, BoRecord, BoState, Observation};

use crate::config::ExperimentConfig;
use crate::experiment::grid_optimum;
use crate::svg::{line_chart, Series};

fn parse_f64(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        Ok(Some(field.parse().with_context(|| format!("bad number `{field}`"))?))
    }
}

/// Rebuilds the search state from `trace.csv`.
pub fn read_trace(text: &str, bounds: Vec<(f64, f64)>) -> Result<BoState> {
    let dim = bounds.len();
    let mut records = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(f.len() == dim + 4, "trace row has {} fields", f.len());
        let iter = f[0].parse().context("bad iteration")?;
        let x = f[1..=dim]
            .iter()
            .map(|v| v.parse::<f64>().context("bad coordinate"))
            .collect::<Result<Vec<_>>>()?;
        let obs = match (parse_f64(f[dim + 1])?, parse_f64(f[dim + 2])?) {
            (Some(mean), Some(stderr)) => Some(Observation { mean, stderr }),
            _ => None,
        };
        records.push(BoRecord { iter, x, obs });
    }
    Ok(BoState { bounds, records })
}

type Histories = BTreeMap<Vec<String>, Vec<(f64, f64)>>;

/// Groups `key...,iter,cost` rows into one series per key.
fn histories(text: &str, key_fields: usize) -> Result<Histories> {
    let mut map = Histories::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(f.len() == key_fields + 2, "history row has {} fields", f.len());
        let key = f[..key_fields].iter().map(|s| s.to_string()).collect();
        let it: f64 = f[key_fields].parse().context("bad iteration")?;
        let c: f64 = f[key_fields + 1].parse().context("bad cost")?;
        map.entry(key).or_default().push((it, c));
    }
    Ok(map)
}

fn put(out: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(())
}

/// Writes the landscape grid plus every chart the artifacts in `out` allow.
pub fn emit_plots(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let problem = cfg.problem();
    let mut written = Vec::new();

    let (_, evals) = grid_optimum(&problem, cfg.baseline.grid)?;
    let mut land = String::from("l,alpha,cost\n");
    for e in &evals {
        land.push_str(&format!("{:.12},{:.12},{:.12e}\n", e.design.l, e.design.alpha, e.cost));
    }
    put(out, "landscape.csv", &land, &mut written)?;

    let trace_path = out.join("trace.csv");
    if trace_path.exists() {
        let b = problem.bounds;
        let state = read_trace(
            &fs::read_to_string(&trace_path)?,
            vec![(b.l_min, b.l_max), (b.alpha_min, b.alpha_max)],
        )?;
        let curve = state.best_so_far();
        let mut csv = String::from("iter,best_so_far\n");
        let mut pts = Vec::new();
        for (r, v) in state.records.iter().zip(&curve) {
            if v.is_finite() {
                csv.push_str(&format!("{},{v:.12e}\n", r.iter));
                pts.push((r.iter as f64, *v));
            } else {
                csv.push_str(&format!("{},\n", r.iter));
            }
        }
        put(out, "best_so_far.csv", &csv, &mut written)?;
        let svg = line_chart(
            "Best design cost so far",
            "iteration",
            "cost",
            &[Series {
                name: "best so far".into(),
                points: pts,
            }],
            false,
        );
        put(out, "best_so_far.svg", &svg, &mut written)?;
        if state.successes().count() >= 2 {
            let model = state.surrogate(&cfg.bo.search(cfg.seed).fit)?;
            let grid = posterior_grid_csv(&model, &state.bounds, cfg.baseline.grid, ["l", "alpha"]);
            put(out, "surrogate_grid.csv", &grid, &mut written)?;
        }
    }

    let hist_path = out.join("cost_histories.csv");
    if hist_path.exists() {
        let map = histories(&fs::read_to_string(&hist_path)?, 2)?;
        let series: Vec<Series> = map
            .into_iter()
            .map(|(k, points)| Series {
                name: format!("design {} seed {}", k[0], k[1]),
                points,
            })
            .collect();
        let svg = line_chart("VQLS global cost", "iteration", "C_g", &series, true);
        put(out, "cost_histories.svg", &svg, &mut written)?;
    }

    let inner = out.join("vqls");
    if inner.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&inner)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let mut series = Vec::new();
        for f in files {
            let text = fs::read_to_string(&f)?;
            let points = histories(&text, 0)?.into_values().next().unwrap_or_default();
            let name = f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            series.push(Series { name, points });
        }
        let svg = line_chart("Inner VQLS cost per design", "iteration", "C_g", &series, true);
        put(out, "inner_histories.svg", &svg, &mut written)?;
    }
    Ok(written)
}
