//! A priori estimate quantities for remainder trajectories, the coercive
//! quadratic form of the linear operator, the Riccati comparison envelope,
//! and the epsilon-sweep convergence harness.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::front_solver::solve_front_with_table;
use crate::ks_solver::{solve_ks, SolverConfig, Trajectory};
use crate::spectral_grid::{ModeVector, RealField};
use crate::symbol_engine::{self, SymbolTable};

/// The four estimate quantities plus the sup of the remainder itself.
#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    /// sup over (tau, eta) of |rho_eta|.
    pub sup_rho_eta: f64,
    /// sup over tau of the L2 norm of rho_etaeta.
    pub sup_l2_rho_etaeta: f64,
    /// integral over [0, T] of the squared L2 norm of rho_tau.
    pub int_l2_rho_tau: f64,
    /// integral over [0, T] of the squared L2 norm of rho_taueta.
    pub int_l2_rho_taueta: f64,
    /// sup over (tau, eta) of |rho|.
    pub sup_rho: f64,
}

/// Derivative of the 3-point Lagrange interpolant through (t0,f0),(t1,f1),
/// (t2,f2), evaluated at `t`: returns the three weights on f0, f1, f2.
fn lagrange3_weights(t0: f64, t1: f64, t2: f64, t: f64) -> (f64, f64, f64) {
    let w0 = (2.0 * t - t1 - t2) / ((t0 - t1) * (t0 - t2));
    let w1 = (2.0 * t - t0 - t2) / ((t1 - t0) * (t1 - t2));
    let w2 = (2.0 * t - t0 - t1) / ((t2 - t0) * (t2 - t1));
    (w0, w1, w2)
}

/// Reconstructs the time derivative at every snapshot by second-order
/// differencing (centered in the interior, one-sided at the endpoints),
/// independent of any stored right-hand sides.
fn snapshot_time_derivatives(traj: &Trajectory) -> Result<Vec<ModeVector>> {
    let k = traj.times.len();
    if k < 3 {
        return Err(Error::TooFewSnapshots { needed: 3, got: k });
    }
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let (j, t) = if i == 0 {
            (0, traj.times[0])
        } else if i == k - 1 {
            (k - 3, traj.times[k - 1])
        } else {
            (i - 1, traj.times[i])
        };
        let (w0, w1, w2) = lagrange3_weights(traj.times[j], traj.times[j + 1], traj.times[j + 2], t);
        out.push(
            traj.states[j]
                .scale(w0)
                .add(&traj.states[j + 1].scale(w1))
                .add(&traj.states[j + 2].scale(w2)),
        );
    }
    Ok(out)
}

/// One row of the estimate quantities at a saved instant; the integral
/// columns are cumulative trapezoid sums from tau = 0.
#[derive(Clone, Copy, Debug)]
pub struct EnergyRow {
    pub tau: f64,
    pub sup_rho: f64,
    pub l2_rho_etaeta: f64,
    pub l2_rho_tau_cum: f64,
    pub l2_rho_taueta_cum: f64,
    pub sup_rho_eta: f64,
}

pub fn energy_series(rho_traj: &Trajectory) -> Result<Vec<EnergyRow>> {
    let grid = &rho_traj.config.grid;
    let rho_tau = snapshot_time_derivatives(rho_traj)?;
    let k = rho_tau.len();
    let mut tau_sq = Vec::with_capacity(k);
    let mut taueta_sq = Vec::with_capacity(k);
    for dstate in &rho_tau {
        let l2 = dstate.l2_norm();
        tau_sq.push(l2 * l2);
        let l2e = dstate.differentiate(1)?.l2_norm();
        taueta_sq.push(l2e * l2e);
    }
    let mut rows = Vec::with_capacity(k);
    let (mut cum_t, mut cum_te) = (0.0f64, 0.0f64);
    for (i, state) in rho_traj.states.iter().enumerate() {
        if i > 0 {
            let h = rho_traj.times[i] - rho_traj.times[i - 1];
            cum_t += 0.5 * h * (tau_sq[i - 1] + tau_sq[i]);
            cum_te += 0.5 * h * (taueta_sq[i - 1] + taueta_sq[i]);
        }
        rows.push(EnergyRow {
            tau: rho_traj.times[i],
            sup_rho: grid.inverse(state).sup_norm(),
            l2_rho_etaeta: state.differentiate(2)?.l2_norm(),
            l2_rho_tau_cum: cum_t,
            l2_rho_taueta_cum: cum_te,
            sup_rho_eta: grid.inverse(&state.differentiate(1)?).sup_norm(),
        });
    }
    Ok(rows)
}

pub fn energy_report(rho_traj: &Trajectory) -> Result<EnergyReport> {
    let rows = energy_series(rho_traj)?;
    let last = rows.last().unwrap();
    Ok(EnergyReport {
        sup_rho_eta: rows.iter().fold(0.0, |a, r| a.max(r.sup_rho_eta)),
        sup_l2_rho_etaeta: rows.iter().fold(0.0, |a, r| a.max(r.l2_rho_etaeta)),
        int_l2_rho_tau: last.l2_rho_tau_cum,
        int_l2_rho_taueta: last.l2_rho_taueta_cum,
        sup_rho: rows.iter().fold(0.0, |a, r| a.max(r.sup_rho)),
    })
}

/// The coercive quadratic form `ell0 * sum_m b_m |phi_hat_m|^2` (negative
/// modes folded in by doubling), bounded below by
/// `||phi||_2^2 + 3 eps ||phi_eta||_2^2`.
pub fn quadratic_form_b(phi: &RealField, symbols: &SymbolTable) -> Result<f64> {
    if phi.grid() != symbols.grid() {
        return Err(Error::GridMismatch);
    }
    let c = phi.grid().forward(phi);
    let mut total = symbols.b[0] * c.coeffs()[0].norm_sqr();
    for m in 1..c.coeffs().len() {
        total += 2.0 * symbols.b[m] * c.coeffs()[m].norm_sqr();
    }
    Ok(phi.grid().ell0() * total)
}

/// Comparison envelope for `A' = c0 + c1 A + c2 eps A^2`.
#[derive(Clone, Copy, Debug)]
pub struct RiccatiEnvelope {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub a0: f64,
    pub t_final: f64,
    /// Largest eps in (0, 1/2] with no numerical blow-up before t_final.
    pub eps0: f64,
    /// Sup of the comparison solution at eps0.
    pub k0: f64,
}

const RICCATI_STEPS: usize = 100_000;

/// Integrates the comparison ODE with classical RK4; returns the running
/// sup, or None on divergence (nonfinite or past the overflow guard).
fn riccati_sup(c0: f64, c1: f64, c2eps: f64, a0: f64, t_final: f64, guard: f64) -> Option<f64> {
    let dt = t_final / RICCATI_STEPS as f64;
    let f = |a: f64| c0 + c1 * a + c2eps * a * a;
    let mut a = a0;
    let mut sup = a0;
    for _ in 0..RICCATI_STEPS {
        let k1 = f(a);
        let k2 = f(a + 0.5 * dt * k1);
        let k3 = f(a + 0.5 * dt * k2);
        let k4 = f(a + dt * k3);
        a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !a.is_finite() || a.abs() > guard {
            return None;
        }
        sup = sup.max(a);
    }
    Some(sup)
}

pub fn riccati_envelope(c0: f64, c1: f64, c2: f64, a0: f64, t_final: f64) -> Result<RiccatiEnvelope> {
    if c0 < 0.0 || c1 < 0.0 || c2 < 0.0 || a0 < 0.0 {
        return Err(Error::InvalidParameter(
            "riccati constants must be nonnegative".into(),
        ));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter("t_final must be positive".into()));
    }
    if c1 == 0.0 && c2 == 0.0 {
        return Err(Error::InvalidParameter(
            "need c1 > 0 or c2 > 0 for a nontrivial comparison".into(),
        ));
    }
    let guard = 1e12 * a0.abs().max(c0.abs()).max(1.0);

    if c2 == 0.0 {
        // Linear Gronwall bound; every eps is blow-up free, capped at 1/2.
        let k0 = riccati_sup(c0, c1, 0.0, a0, t_final, guard)
            .ok_or(Error::ImmediateBlowUp)?;
        return Ok(RiccatiEnvelope { c0, c1, c2, a0, t_final, eps0: 0.5, k0 });
    }

    // Blow-up is eps-monotone, so bisect on the divergence boundary.
    let survives = |eps: f64| riccati_sup(c0, c1, c2 * eps, a0, t_final, guard);
    let mut lo = 0.0f64;
    let mut lo_sup = match survives(1e-12) {
        Some(s) => s,
        None => return Err(Error::ImmediateBlowUp),
    };
    let mut hi = 0.5f64;
    if let Some(s) = survives(hi) {
        return Ok(RiccatiEnvelope { c0, c1, c2, a0, t_final, eps0: 0.5, k0: s });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match survives(mid) {
            Some(s) => {
                lo = mid;
                lo_sup = s;
            }
            None => hi = mid,
        }
    }
    Ok(RiccatiEnvelope { c0, c1, c2, a0, t_final, eps0: lo, k0: lo_sup })
}

/// Convergence of the front solution toward the eps = 0 limit.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    /// Strictly decreasing eps values.
    pub eps_list: Vec<f64>,
    /// E(eps) = sup over matched snapshots and nodes of |psi_eps - Phi|;
    /// None marks a run that blew up.
    pub errors: Vec<Option<f64>>,
    /// E(eps_i) / E(eps_{i+1}).
    pub ratios: Vec<Option<f64>>,
    /// log2 of the ratios for exact eps halvings.
    pub orders: Vec<f64>,
    /// Mean of `orders` (None when no halving pair completed).
    pub fitted_order: Option<f64>,
    /// max over completed runs of E(eps)/eps.
    pub m_estimate: Option<f64>,
}

pub fn convergence_study(
    phi0: &RealField,
    eps_list: &[f64],
    config: &SolverConfig,
) -> Result<ConvergenceReport> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("empty eps list".into()));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "eps list must be strictly decreasing".into(),
            ));
        }
    }
    for &e in eps_list {
        if !(0.0..=0.5).contains(&e) {
            return Err(Error::EpsOutOfRange(e));
        }
    }
    let phi = solve_ks(phi0, config)?;
    let grid = &config.grid;

    // Independent runs in parallel; the reduction is ordered by eps.
    let tables: Vec<SymbolTable> = eps_list
        .iter()
        .map(|&e| symbol_engine::build(e, grid))
        .collect::<Result<_>>()?;
    let errors: Vec<Option<f64>> = tables
        .par_iter()
        .map(|table| {
            let psi = match solve_front_with_table(table, phi0, config) {
                Ok(t) => t,
                Err(_) => return None,
            };
            let mut sup = 0.0f64;
            for (sp, sf) in psi.states.iter().zip(&phi.states) {
                sup = sup.max(grid.inverse(&sp.sub(sf)).sup_norm());
            }
            Some(sup)
        })
        .collect();

    let ratios: Vec<Option<f64>> = errors
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        })
        .collect();
    let mut orders = Vec::new();
    for (i, r) in ratios.iter().enumerate() {
        let halving = (eps_list[i] - 2.0 * eps_list[i + 1]).abs() < 1e-12 * eps_list[i];
        if let (Some(r), true) = (r, halving) {
            orders.push(r.log2());
        }
    }
    let fitted_order = if orders.is_empty() {
        None
    } else {
        Some(orders.iter().sum::<f64>() / orders.len() as f64)
    };
    let m_estimate = eps_list
        .iter()
        .zip(&errors)
        .filter_map(|(&e, err)| err.map(|v| if e > 0.0 { v / e } else { 0.0 }))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(ConvergenceReport {
        eps_list: eps_list.to_vec(),
        errors,
        ratios,
        orders,
        fitted_order,
        m_estimate,
    })
}
