//! Discrete check of the evolution equation satisfied by `G`:
//! `∂G/∂t = ΔG + nG − DF(X)·(G x + ∇G)`.

use crate::curvature::CurvatureSpec;
use crate::residual::{directional_derivative, embedding_of_jet, FD_EPSILON};

use super::{FlowError, FlowState};

/// Sup-norm discrepancy of the `G` equation over every interior window of
/// consecutive states: central time difference of `G` against the
/// right-hand side at the middle state.
pub fn g_evolution_residual(states: &[FlowState], spec: &CurvatureSpec) -> Result<f64, FlowError> {
    if states.len() < 3 {
        return Err(FlowError::InsufficientStates { got: states.len() });
    }
    let mut worst: f64 = 0.0;
    for w in states.windows(3) {
        worst = worst.max(window_residual(&w[0], &w[1], &w[2], spec)?);
    }
    Ok(worst)
}

fn window_residual(
    prev: &FlowState,
    mid: &FlowState,
    next: &FlowState,
    spec: &CurvatureSpec,
) -> Result<f64, FlowError> {
    // Times are running sums, so compare against the nominal step loosely.
    let dt = mid.dt;
    let close = |a: f64| (a - dt).abs() <= 1e-9 * dt;
    let consecutive = next.step_index == mid.step_index + 1 && mid.step_index == prev.step_index + 1;
    if !consecutive || !(dt > 0.0) || prev.dt != dt || !close(mid.t - prev.t) || !close(next.t - mid.t) {
        return Err(FlowError::IrregularWindow { step: mid.step_index });
    }
    let domain = mid.u.domain();
    let n = domain.dim() as f64;
    let g = &mid.forcing().g;
    let jet = domain.jet_of_values(g);
    let directions = embedding_of_jet(domain, &jet);
    let positions = &mid.forcing().geometry.surface.positions;
    let mut worst: f64 = 0.0;
    for i in 0..domain.node_count() {
        let dg_dt = (next.forcing().g[i] - prev.forcing().g[i]) / (2.0 * dt);
        let df = directional_derivative(spec, &positions[i], &directions[i], FD_EPSILON)
            .map_err(|e| FlowError::Residual(e.into()))?;
        let rhs = jet.laplacian[i] + n * g[i] - df;
        worst = worst.max((dg_dt - rhs).abs());
    }
    Ok(worst)
}
