//! Drives a scenario through its time program and collects per-step data.

use crate::assembly::InfluenceMatrices;
use crate::error::Result;
use crate::evolve::{run, EnergyResiduum, RunSummary, StepOutcome};
use crate::output::RunWriter;
use crate::scenario::Scenario;

/// Compact record of one accepted step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub residuum: EnergyResiduum,
    /// Cartesian gap on the master contact nodes.
    pub z: Vec<f64>,
    pub p_n: Vec<f64>,
    pub p_t: Vec<f64>,
    pub slipping: Vec<bool>,
    pub qp_iterations: usize,
    pub raw_tightness: f64,
    pub tightness: f64,
    /// Largest entry of the fictitious and physical gaps, the scale of the tightness.
    pub gap_scale: f64,
    /// `Σ_c m_c |p_c|` with the lumped contact mass.
    pub contact_force: f64,
}

impl StepRecord {
    fn new(out: &StepOutcome, lumped: &[f64]) -> Self {
        let contact_force = lumped
            .iter()
            .zip(out.tractions.normal.iter().zip(&out.tractions.tangential))
            .map(|(m, (n, t))| m * n.hypot(*t))
            .sum();
        StepRecord {
            step: out.state.step,
            t: out.state.t,
            tau: out.state.tau,
            residuum: out.residuum,
            z: out.state.gap.z.clone(),
            p_n: out.tractions.normal.clone(),
            p_t: out.tractions.tangential.clone(),
            slipping: out.slipping.clone(),
            qp_iterations: out.qp_iterations,
            raw_tightness: out.raw_tightness,
            tightness: out.tightness,
            gap_scale: out.awb.w.iter().chain(&out.state.gap.z).fold(0.0, |a: f64, v| a.max(v.abs())),
            contact_force,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub steps: Vec<StepRecord>,
}

/// Runs `scenario` on the prepared influence matrices, streaming to
/// `writer` when given.
pub fn simulate(scenario: &Scenario, im: &InfluenceMatrices, mut writer: Option<&mut RunWriter>) -> Result<RunReport> {
    let evo = scenario.evolution(im)?;
    let ctl = scenario.time_control();
    let mut steps = Vec::new();
    let summary = run(&evo, &ctl, |out| {
        if let Some(w) = writer.as_deref_mut() {
            w.record(out, im, &evo.geom)?;
        }
        log::info!(
            "step {:>5} t = {:.6e} τ = {:.3e} ΔE = {:.3e} qp = {}",
            out.state.step,
            out.state.t,
            out.state.tau,
            out.residuum.delta,
            out.qp_iterations
        );
        steps.push(StepRecord::new(out, &evo.geom.lumped));
        Ok(())
    })?;
    Ok(RunReport { summary, steps })
}
