//! CSV and text writers for run directories.

use anyhow::{Context, Result};
use mfg_core::best_response::{ControlField, OccupationMeasure};
use mfg_core::coefficients::hypotheses::HypothesisReport;
use mfg_core::equilibrium::{CertificateReport, IterationRecord};
use mfg_core::fpk::SolveReport;
use mfg_core::measures::{MeasureCurve, StateGrid, TimeGrid, TransportPlan};
use mfg_core::particles::MomentRow;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Output directory of one run.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("cannot create run directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn writer(&self, name: &str) -> Result<csv::Writer<File>> {
        let p = self.path(name);
        csv::Writer::from_path(&p).with_context(|| format!("cannot write {}", p.display()))
    }

    pub fn text(&self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))
    }
}

fn coord_header(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["x1"]
    } else {
        vec!["x1", "x2"]
    }
}

fn coords(grid: &StateGrid, i: usize) -> Vec<String> {
    let p = grid.point(i);
    (0..grid.dim()).map(|a| p[a].to_string()).collect()
}

/// `t, x1[, x2], weight`, time-major.
pub fn write_curve(dir: &RunDir, name: &str, curve: &MeasureCurve) -> Result<()> {
    let mut w = dir.writer(name)?;
    let grid = curve.grid();
    let mut header = vec!["t"];
    header.extend(coord_header(grid.dim()));
    header.push("weight");
    w.write_record(&header)?;
    for k in 0..curve.time().nodes() {
        let t = curve.time().time(k).to_string();
        for (i, wt) in curve.slice(k).iter().enumerate() {
            let mut row = vec![t.clone()];
            row.extend(coords(grid, i));
            row.push(wt.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a curve written by [`write_curve`] back onto the given grids.
pub fn read_curve(path: &Path, grid: &StateGrid, time: &TimeGrid) -> Result<MeasureCurve> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut vals = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let w: f64 = rec.get(rec.len() - 1).context("empty row")?.parse()?;
        vals.push(w);
    }
    anyhow::ensure!(
        vals.len() == grid.len() * time.nodes(),
        "{} has {} rows, expected {}",
        path.display(),
        vals.len(),
        grid.len() * time.nodes()
    );
    let slices = vals.chunks(grid.len()).map(|c| c.to_vec()).collect();
    Ok(MeasureCurve::new(grid.clone(), time.clone(), slices)?)
}

/// `t, x1[, x2], u1[, u2]` for `k < K`.
pub fn write_control(dir: &RunDir, name: &str, u: &ControlField, grid: &StateGrid, time: &TimeGrid, udim: usize) -> Result<()> {
    let mut w = dir.writer(name)?;
    let mut header = vec!["t"];
    header.extend(coord_header(grid.dim()));
    header.extend(if udim == 1 { vec!["u1"] } else { vec!["u1", "u2"] });
    w.write_record(&header)?;
    for k in 0..u.steps() {
        for i in 0..u.nodes() {
            let mut row = vec![time.time(k).to_string()];
            row.extend(coords(grid, i));
            let v = u.get(k, i);
            row.extend((0..udim).map(|a| v[a].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_control(path: &Path, grid: &StateGrid, time: &TimeGrid, udim: usize) -> Result<ControlField> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut vals = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let n = rec.len();
        let mut p = mfg_core::Point::zeros();
        for a in 0..udim {
            p[a] = rec.get(n - udim + a).context("short row")?.parse()?;
        }
        vals.push(p);
    }
    Ok(ControlField::new(time.steps(), grid.len(), vals)?)
}

/// `t, mass_defect, leakage, V_moment`; the first two refer to the step ending at `t`.
pub fn write_solve_report(dir: &RunDir, name: &str, rep: &SolveReport) -> Result<()> {
    let mut w = dir.writer(name)?;
    w.write_record(["t", "mass_defect", "leakage", "V_moment"])?;
    let time = rep.curve.time();
    for k in 0..time.nodes() {
        let (d, l) = if k == 0 { (0.0, 0.0) } else { (rep.mass_defect[k - 1], rep.leakage[k - 1]) };
        w.write_record([time.time(k).to_string(), d.to_string(), l.to_string(), rep.v_moment[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, V_moment, envelope`.
pub fn write_envelope(dir: &RunDir, name: &str, time: &TimeGrid, moment: &[f64], envelope: &[f64]) -> Result<()> {
    let mut w = dir.writer(name)?;
    w.write_record(["t", "V_moment", "envelope"])?;
    for k in 0..time.nodes() {
        w.write_record([time.time(k).to_string(), moment[k].to_string(), envelope[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `k, j, i, weight`.
pub fn write_occupation(dir: &RunDir, name: &str, pi: &OccupationMeasure) -> Result<()> {
    let mut w = dir.writer(name)?;
    w.write_record(["k", "j", "i", "weight"])?;
    for k in 0..pi.steps() {
        for j in 0..pi.controls() {
            for i in 0..pi.nodes() {
                w.write_record([k.to_string(), j.to_string(), i.to_string(), pi.get(k, j, i).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `x, y, weight` with node indices.
pub fn write_plan(dir: &RunDir, name: &str, plan: &TransportPlan) -> Result<()> {
    let mut w = dir.writer(name)?;
    w.write_record(["x", "y", "weight"])?;
    for (i, j, m) in &plan.entries {
        w.write_record([i.to_string(), j.to_string(), m.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `iter, kr_gap, relaxed_cost, projected_cost`.
pub fn write_history(dir: &RunDir, history: &[IterationRecord]) -> Result<()> {
    let mut w = dir.writer("history.csv")?;
    w.write_record(["iter", "kr_gap", "relaxed_cost", "projected_cost"])?;
    for h in history {
        w.write_record([h.iter.to_string(), h.kr_gap.to_string(), h.relaxed_cost.to_string(), h.projected_cost.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `challenger_id, cost, gap`.
pub fn write_certificate(dir: &RunDir, cert: &CertificateReport) -> Result<()> {
    let mut w = dir.writer("certificate.csv")?;
    w.write_record(["challenger_id", "cost", "gap"])?;
    for c in &cert.challengers {
        w.write_record([c.id.to_string(), c.cost.to_string(), c.gap.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `t, mean[, mean2], var, w1_gap`.
pub fn write_ensemble(dir: &RunDir, rows: &[MomentRow], gaps: &[f64], dim: usize) -> Result<()> {
    let mut w = dir.writer("ensemble.csv")?;
    let mut header = vec!["t", "mean"];
    if dim == 2 {
        header.push("mean2");
    }
    header.extend(["var", "w1_gap"]);
    w.write_record(&header)?;
    for (r, g) in rows.iter().zip(gaps) {
        let mut row = vec![r.t.to_string(), r.mean[0].to_string()];
        if dim == 2 {
            row.push(r.mean[1].to_string());
        }
        row.push(r.var.to_string());
        row.push(g.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `report, check, samples, worst_violation, worst_lhs, worst_rhs, worst_at, pass`.
pub fn write_hypotheses(dir: &RunDir, reports: &[HypothesisReport]) -> Result<()> {
    let mut w = dir.writer("hypotheses.csv")?;
    w.write_record(["report", "check", "samples", "worst_violation", "worst_lhs", "worst_rhs", "worst_at", "pass"])?;
    for r in reports {
        for c in &r.checks {
            w.write_record([
                r.title.clone(),
                c.name.clone(),
                c.samples.to_string(),
                c.worst_violation.to_string(),
                c.worst_lhs.to_string(),
                c.worst_rhs.to_string(),
                c.worst_at.clone(),
                c.pass.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Flat `key = value` lines.
#[derive(Default)]
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }
    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Raw little-endian `f64` rows `particle, t, x1[, x2]`.
pub fn write_trajectories(path: &Path, ens: &mfg_core::particles::ParticleEnsemble) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    let dim = ens.grid().dim();
    for p in 0..ens.len() {
        for k in 0..ens.time().nodes() {
            let x = ens.position(p, k);
            let mut row = vec![p as f64, ens.time().time(k)];
            row.extend((0..dim).map(|a| x[a]));
            for v in row {
                f.write_all(&v.to_le_bytes())?;
            }
        }
    }
    f.flush()?;
    Ok(())
}
