use super::SolveReport;
use crate::best_response::ControlField;
use crate::coefficients::LyapunovData;
use crate::error::{dimension, Result};
use crate::measures::MeasureCurve;
use crate::tol;

#[derive(Clone, Debug)]
pub struct GronwallReport {
    pub moment: Vec<f64>,
    pub bound: Vec<f64>,
    pub first_violation: Option<usize>,
    pub pass: bool,
}

fn violates(lhs: f64, rhs: f64) -> bool {
    lhs - rhs > tol::MONITOR * rhs.abs().max(1.0)
}

/// Checks `∫V dσ_t ≤ (∫V dν + ∫₀^t ∫ e^{−Cs} 𝓦 dσ_s ds) e^{Ct}` at every time
/// node, with the inner time integral taken at left endpoints. `w` holds one
/// field per time node.
pub fn gronwall_monitor(report: &SolveReport, c: f64, w: &[Vec<f64>]) -> Result<GronwallReport> {
    let curve = &report.curve;
    let time = curve.time();
    if w.len() != time.nodes() {
        return Err(dimension(format!("weight field has {} slices, expected {}", w.len(), time.nodes())));
    }
    let dt = time.dt();
    let mut integral = 0.0;
    let mut bound = Vec::with_capacity(time.nodes());
    for k in 0..time.nodes() {
        bound.push((report.v_moment[0] + integral) * (c * time.time(k)).exp());
        integral += dt * (-c * time.time(k)).exp() * curve.moment(&w[k], k);
    }
    let first_violation = (0..time.nodes()).find(|&k| violates(report.v_moment[k], bound[k]));
    Ok(GronwallReport { moment: report.v_moment.clone(), bound, first_violation, pass: first_violation.is_none() })
}

#[derive(Clone, Debug)]
pub struct AprioriReport {
    pub moment: Vec<f64>,
    /// `R e^{M t_k}`.
    pub envelope: Vec<f64>,
    /// `envelope − moment` per time node.
    pub margins: Vec<f64>,
    /// `Δt Σ_k Σ_i h(|u_{k,i}|) μ_{k,i}`.
    pub control_integral: f64,
    /// `γ R`.
    pub control_budget: f64,
    pub pass_moment: bool,
    pub pass_control: bool,
    pub pass: bool,
}

/// Checks the moment envelope `∫V dμ_t ≤ R e^{Mt}` and the control budget
/// `∫∫ h(|u|) dμ_t dt ≤ γR` with `M = 5 C_L`, `γ = e^{−C_L T}/4`.
pub fn apriori_monitor(curve: &MeasureCurve, lyap: &LyapunovData, r: f64, u: &ControlField) -> Result<AprioriReport> {
    let grid = curve.grid();
    let time = curve.time();
    if u.nodes() != grid.len() || u.steps() != time.steps() {
        return Err(dimension("control field does not match the curve's grids"));
    }
    let v = grid.field(&*lyap.v);
    let m = lyap.m();
    let moment: Vec<f64> = (0..time.nodes()).map(|k| curve.moment(&v, k)).collect();
    let envelope: Vec<f64> = (0..time.nodes()).map(|k| r * (m * time.time(k)).exp()).collect();
    let margins = envelope.iter().zip(&moment).map(|(e, m)| e - m).collect();
    let mut control_integral = 0.0;
    for k in 0..time.steps() {
        let w = curve.slice(k);
        let s: f64 = (0..grid.len()).map(|i| (lyap.h)(u.get(k, i).norm()) * w[i]).sum();
        control_integral += time.dt() * s;
    }
    let control_budget = lyap.gamma(time.horizon()) * r;
    let pass_moment = moment.iter().zip(&envelope).all(|(a, b)| !violates(*a, *b));
    let pass_control = !violates(control_integral, control_budget);
    Ok(AprioriReport {
        moment,
        envelope,
        margins,
        control_integral,
        control_budget,
        pass_moment,
        pass_control,
        pass: pass_moment && pass_control,
    })
}
