//! SVG plots of a run directory.

use anyhow::{bail, Context, Result};
use plotters::prelude::*;
use std::path::{Path, PathBuf};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(|v| v.parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name).with_context(|| format!("missing column {name}"))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn draw_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow::anyhow!("plotting failed: {e:?}")
}

fn heatmap(src: &Path, out: &Path) -> Result<()> {
    let t = Table::read(src)?;
    let weight = t.col("weight")?;
    let root = SVGBackend::new(out, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let wmax = weight.iter().copied().fold(0.0, f64::max).max(1e-300);
    if t.header.iter().any(|h| h == "x2") {
        // final time slice over the plane
        let ts = t.col("t")?;
        let tl = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (x1, x2) = (t.col("x1")?, t.col("x2")?);
        let idx: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] == tl).collect();
        let (lo, hi) = range(&x1);
        let h = (hi - lo) / ((idx.len() as f64).sqrt() - 1.0).max(1.0) / 2.0;
        let wl = idx.iter().map(|&i| weight[i]).fold(0.0, f64::max).max(1e-300);
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("density at t = {tl}"), ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(lo - h..hi + h, lo - h..hi + h)
            .map_err(draw_err)?;
        chart.configure_mesh().x_desc("x1").y_desc("x2").draw().map_err(draw_err)?;
        chart
            .draw_series(idx.iter().map(|&i| {
                let c = ViridisRGB::get_color(weight[i] / wl);
                Rectangle::new([(x1[i] - h, x2[i] - h), (x1[i] + h, x2[i] + h)], c.filled())
            }))
            .map_err(draw_err)?;
    } else {
        let (ts, xs) = (t.col("t")?, t.col("x1")?);
        let (t0, t1) = range(&ts);
        let (x0, x1) = range(&xs);
        let nodes = ts.iter().filter(|&&v| v == ts[0]).count().max(1);
        let steps = ts.len() / nodes;
        let dt = (t1 - t0) / (steps.max(2) - 1) as f64 / 2.0;
        let dx = (x1 - x0) / (nodes.max(2) - 1) as f64 / 2.0;
        let mut chart = ChartBuilder::on(&root)
            .caption("density over (x, t)", ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(x0 - dx..x1 + dx, t0 - dt..t1 + dt)
            .map_err(draw_err)?;
        chart.configure_mesh().x_desc("x").y_desc("t").draw().map_err(draw_err)?;
        chart
            .draw_series((0..ts.len()).map(|i| {
                let c = ViridisRGB::get_color(weight[i] / wmax);
                Rectangle::new([(xs[i] - dx, ts[i] - dt), (xs[i] + dx, ts[i] + dt)], c.filled())
            }))
            .map_err(draw_err)?;
    }
    root.present().map_err(draw_err)?;
    Ok(())
}

fn moments(src: &Path, out: &Path) -> Result<()> {
    let t = Table::read(src)?;
    let (ts, m, e) = (t.col("t")?, t.col("V_moment")?, t.col("envelope")?);
    let all: Vec<f64> = m.iter().chain(&e).copied().collect();
    let (lo, hi) = range(&all);
    let root = SVGBackend::new(out, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let (t0, t1) = range(&ts);
    let mut chart = ChartBuilder::on(&root)
        .caption("V-moment and envelope R e^{Mt}", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(t0..t1, 0.0f64.min(lo)..hi * 1.05)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("t").draw().map_err(draw_err)?;
    chart
        .draw_series(LineSeries::new(ts.iter().copied().zip(m.iter().copied()), &BLUE))
        .map_err(draw_err)?
        .label("moment")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    chart
        .draw_series(LineSeries::new(ts.iter().copied().zip(e.iter().copied()), &RED))
        .map_err(draw_err)?
        .label("envelope")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    chart.configure_series_labels().border_style(BLACK).draw().map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

fn gaps(t: &Table, out: &Path) -> Result<()> {
    let it = t.col("iter")?;
    let g: Vec<f64> = t.col("kr_gap")?.iter().map(|v| v.max(1e-16).log10()).collect();
    let root = SVGBackend::new(out, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let (i0, i1) = range(&it);
    let (lo, hi) = range(&g);
    let mut chart = ChartBuilder::on(&root)
        .caption("fixed-point gap", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(i0..i1, lo - 0.2..hi + 0.2)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("iteration").y_desc("log10 KR gap").draw().map_err(draw_err)?;
    chart.draw_series(LineSeries::new(it.iter().copied().zip(g.iter().copied()), &BLUE)).map_err(draw_err)?;
    chart.draw_series(it.iter().zip(&g).map(|(x, y)| Circle::new((*x, *y), 3, BLUE.filled()))).map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

fn histogram(t: &Table, out: &Path) -> Result<()> {
    let g = t.col("gap")?;
    let (lo, hi) = range(&g);
    let bins = 20usize;
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0u32; bins];
    for v in &g {
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    let root = SVGBackend::new(out, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let top = counts.iter().copied().max().unwrap_or(1);
    let mut chart = ChartBuilder::on(&root)
        .caption("certificate gaps J(v) - J(u*)", ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(lo..hi, 0u32..top + 1)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("gap").y_desc("count").draw().map_err(draw_err)?;
    chart
        .draw_series(counts.iter().enumerate().map(|(b, c)| {
            let x = lo + b as f64 * w;
            Rectangle::new([(x, 0), (x + w, *c)], BLUE.mix(0.6).filled())
        }))
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Writes every plot whose inputs exist in `dir` and returns the files.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("run directory {} does not exist", dir.display());
    }
    let mut written = Vec::new();
    let mut inputs = 0;
    if let Some(src) = ["mu_star.csv", "density.csv", "state.csv"].iter().map(|f| dir.join(f)).find(|p| p.exists()) {
        inputs += 1;
        let out = dir.join("density.svg");
        heatmap(&src, &out)?;
        written.push(out);
    }
    let m = dir.join("moments.csv");
    if m.exists() {
        inputs += 1;
        let out = dir.join("moments.svg");
        moments(&m, &out)?;
        written.push(out);
    }
    let h = dir.join("history.csv");
    if h.exists() {
        inputs += 1;
        let t = Table::read(&h)?;
        if t.rows.is_empty() {
            log::warn!("history.csv is empty; skipping the gap plot");
        } else {
            let out = dir.join("gaps.svg");
            gaps(&t, &out)?;
            written.push(out);
        }
    }
    let c = dir.join("certificate.csv");
    if c.exists() {
        inputs += 1;
        let t = Table::read(&c)?;
        if t.rows.is_empty() {
            log::warn!("certificate.csv is empty; skipping the histogram");
        } else {
            let out = dir.join("certificate.svg");
            histogram(&t, &out)?;
            written.push(out);
        }
    }
    if inputs == 0 {
        bail!("run directory {} holds no plottable CSV files", dir.display());
    }
    Ok(written)
}
