//! Closed-form evaluation of every Fourier-multiplier symbol of the front
//! equation, plus dispersion/stability bookkeeping and asymptotic checks.
//!
//! All symbols are rational in `X = sqrt(1 + 4 eps lambda)`:
//!
//! - `b  = (3/4)(X+1)(X^2+2X-1)/(X+2)`           (mass operator, always >= 1+3 eps lambda)
//! - `s  = (3/4) lambda X (X+1)^2/(X+2) - 3 lambda^2`   (stiffness; exact rearrangement of
//!   the printed form `3(X-1)(X+1)^2{(eps-1)(X^2+X)+2}/(16 eps^2 (X+2))` that is
//!   cancellation-free for eps*lambda -> 0 and reduces to `lambda - 3 lambda^2` at eps = 0)
//! - `g  = -lambda (3X^2 + 15X + c)/(2(X+1)(X+2))` with `c` one of two printed
//!   variants (4 or 14); the trace oracles select 14 (see `resolvent_lab`)
//! - `u1 = -(4/9)(4X+7)/((X+1)^2 (X+2))`, `u2 = (2/3)/((X+1)(X+2))` (trace symbols)
//! - derived: `r = s/b`, `q = (eps*g - 1/2)/b`, `z = g/b`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral_grid::PeriodicGrid;

/// The two printed variants of the additive constant in the `g` symbol's
/// numerator `3X^2 + 15X + c`.  Recomposing `g` from its definition through
/// the trace symbols yields 14; the literature prints 4 in one display.
/// Both are kept so the oracle arbitration stays auditable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GVariant {
    C4,
    C14,
}

impl GVariant {
    pub fn constant(self) -> f64 {
        match self {
            GVariant::C4 => 4.0,
            GVariant::C14 => 14.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GVariant::C4 => "4",
            GVariant::C14 => "14",
        }
    }
}

/// Oracle-validated default variant (see `resolvent_lab::trace_check`).
pub const DEFAULT_G_VARIANT: GVariant = GVariant::C14;

pub fn x_of(eps: f64, lambda: f64) -> f64 {
    (1.0 + 4.0 * eps * lambda).sqrt()
}

/// `X - 1` computed cancellation-free as `4 eps lambda / (X + 1)`.
pub fn x_minus_one(eps: f64, lambda: f64) -> f64 {
    4.0 * eps * lambda / (x_of(eps, lambda) + 1.0)
}

pub fn b_symbol(eps: f64, lambda: f64) -> f64 {
    let x = x_of(eps, lambda);
    0.75 * (x + 1.0) * (x * x + 2.0 * x - 1.0) / (x + 2.0)
}

/// Stiffness symbol.  Algebraically equal to the printed
/// `3(X-1)(X+1)^2 {(eps-1)(X^2+X)+2} / (16 eps^2 (X+2))` for eps > 0, but in
/// a form whose eps -> 0 limit `lambda - 3 lambda^2` is attained without any
/// removable-singularity branch.
pub fn s_symbol(eps: f64, lambda: f64) -> f64 {
    if eps == 0.0 {
        // Same floating-point expression the K-S solver uses, so the eps = 0
        // front equation is bit-for-bit K-S.
        return lambda - 3.0 * lambda * lambda;
    }
    let x = x_of(eps, lambda);
    0.75 * lambda * x * (x + 1.0) * (x + 1.0) / (x + 2.0) - 3.0 * lambda * lambda
}

/// The printed form of `s`; valid only for eps > 0 and used as a cross-check.
pub fn s_symbol_printed(eps: f64, lambda: f64) -> f64 {
    let x = x_of(eps, lambda);
    let xm1 = x_minus_one(eps, lambda);
    3.0 * xm1 * (x + 1.0) * (x + 1.0) * ((eps - 1.0) * (x * x + x) + 2.0)
        / (16.0 * eps * eps * (x + 2.0))
}

pub fn g_symbol(eps: f64, lambda: f64, variant: GVariant) -> f64 {
    let x = x_of(eps, lambda);
    -lambda * (3.0 * x * x + 15.0 * x + variant.constant())
        / (2.0 * (x + 1.0) * (x + 2.0))
}

pub fn u1_symbol(eps: f64, lambda: f64) -> f64 {
    let x = x_of(eps, lambda);
    -(4.0 / 9.0) * (4.0 * x + 7.0) / ((x + 1.0) * (x + 1.0) * (x + 2.0))
}

pub fn u2_symbol(eps: f64, lambda: f64) -> f64 {
    let x = x_of(eps, lambda);
    (2.0 / 3.0) / ((x + 1.0) * (x + 2.0))
}

pub fn r_symbol(eps: f64, lambda: f64) -> f64 {
    if eps == 0.0 {
        return lambda - 3.0 * lambda * lambda; // b = 1 exactly at eps = 0
    }
    s_symbol(eps, lambda) / b_symbol(eps, lambda)
}

pub fn q_symbol(eps: f64, lambda: f64, variant: GVariant) -> f64 {
    if eps == 0.0 {
        return -0.5;
    }
    (eps * g_symbol(eps, lambda, variant) - 0.5) / b_symbol(eps, lambda)
}

pub fn z_symbol(eps: f64, lambda: f64, variant: GVariant) -> f64 {
    g_symbol(eps, lambda, variant) / b_symbol(eps, lambda)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&eps) || !eps.is_finite() {
        return Err(Error::EpsOutOfRange(eps));
    }
    Ok(())
}

/// Per-mode multiplier table driving the front solver.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    pub eps: f64,
    pub variant: GVariant,
    grid: PeriodicGrid,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub b: Vec<f64>,
    pub s: Vec<f64>,
    pub g: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
}

impl SymbolTable {
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }
}

/// Build the symbol table for all retained modes `m = 0..=n/2` with the
/// oracle-validated `g` variant.
pub fn build(eps: f64, grid: &PeriodicGrid) -> Result<SymbolTable> {
    build_with_variant(eps, grid, DEFAULT_G_VARIANT)
}

pub fn build_with_variant(
    eps: f64,
    grid: &PeriodicGrid,
    variant: GVariant,
) -> Result<SymbolTable> {
    check_eps(eps)?;
    let half = grid.half_len();
    let mut t = SymbolTable {
        eps,
        variant,
        grid: grid.clone(),
        lambda: Vec::with_capacity(half),
        x: Vec::with_capacity(half),
        b: Vec::with_capacity(half),
        s: Vec::with_capacity(half),
        g: Vec::with_capacity(half),
        r: Vec::with_capacity(half),
        q: Vec::with_capacity(half),
        z: Vec::with_capacity(half),
        u1: Vec::with_capacity(half),
        u2: Vec::with_capacity(half),
    };
    for m in 0..half {
        let lambda = grid.lambda(m);
        t.lambda.push(lambda);
        t.x.push(x_of(eps, lambda));
        t.b.push(b_symbol(eps, lambda));
        t.s.push(s_symbol(eps, lambda));
        t.g.push(g_symbol(eps, lambda, variant));
        t.r.push(r_symbol(eps, lambda));
        t.q.push(q_symbol(eps, lambda, variant));
        t.z.push(z_symbol(eps, lambda, variant));
        t.u1.push(u1_symbol(eps, lambda));
        t.u2.push(u2_symbol(eps, lambda));
    }
    debug_assert!(t.b.iter().all(|&b| b > 0.0));
    Ok(t)
}

/// Leading dispersion relation and the critical strip width.
#[derive(Clone, Debug)]
pub struct DispersionReport {
    pub gamma: f64,
    pub gamma_c_leading: f64,
    pub ell_crit: f64,
}

/// Leading terms of the planar-front dispersion relation.
pub fn dispersion(gamma: f64, k: f64) -> f64 {
    (1.0 - gamma) * k * k + (gamma - 4.0) * k.powi(4)
}

pub fn dispersion_report(gamma: f64, ell: f64) -> DispersionReport {
    let lambda1 = (2.0 * PI / ell).powi(2);
    DispersionReport {
        gamma,
        gamma_c_leading: 1.0 - 3.0 * lambda1,
        ell_crit: 12.0f64.sqrt() * PI,
    }
}

/// Strip width at which the lowest nonzero mode changes stability, i.e. the
/// `ell0` where `r(eps, lambda_1)` with `lambda_1 = 4 pi^2 / ell0^2` crosses
/// zero.  At eps = 0 this is `2 pi sqrt(3)`.
pub fn stability_threshold(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let f = |ell: f64| r_symbol(eps, (2.0 * PI / ell).powi(2));
    let mut lo = 3.0; // lambda_1 large -> r < 0
    let mut hi = 30.0; // lambda_1 small -> r > 0
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::InvalidParameter(
            "stability threshold bracket [3, 30] does not enclose a sign change".into(),
        ));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Deviation of the eps-family multipliers from their K-S limit values on a
/// fixed grid, at a given small eps.
#[derive(Clone, Debug)]
pub struct KsLimitRow {
    pub eps: f64,
    pub max_r_dev: f64,
    pub max_q_dev: f64,
}

/// Evaluates `max_m |r - (lambda - 3 lambda^2)|` and `max_m |q + 1/2|` at
/// eps in {1e-4, 1e-6}; both shrink linearly in eps.
pub fn ks_limit_check(grid: &PeriodicGrid) -> Vec<KsLimitRow> {
    [1e-4, 1e-6]
        .iter()
        .map(|&eps| ks_limit_row(eps, grid))
        .collect()
}

pub fn ks_limit_row(eps: f64, grid: &PeriodicGrid) -> KsLimitRow {
    let mut max_r_dev = 0.0f64;
    let mut max_q_dev = 0.0f64;
    for m in 0..grid.half_len() {
        let lambda = grid.lambda(m);
        let r_dev = (r_symbol(eps, lambda) - (lambda - 3.0 * lambda * lambda)).abs();
        let q_dev = (q_symbol(eps, lambda, DEFAULT_G_VARIANT) + 0.5).abs();
        max_r_dev = max_r_dev.max(r_dev);
        max_q_dev = max_q_dev.max(q_dev);
    }
    KsLimitRow { eps, max_r_dev, max_q_dev }
}

#[derive(Clone, Debug)]
pub struct AsymptoticsRow {
    pub lambda: f64,
    /// b / (3 eps lambda) — tends to 1.
    pub b_ratio: f64,
    /// r / ((1 - 1/eps) lambda) — tends to 1.
    pub r_ratio: f64,
    /// (z + 1/(2 eps)) * (-4 sqrt(eps^3 lambda)) — tends to 1.
    pub z1_ratio: f64,
    /// s / (3 (eps-1) lambda^2) — the recomputed tail, tends to 1.
    pub s_ratio_recomputed: f64,
    /// s / (48 (eps-1) eps^2 lambda^2) — the printed tail, tends to 1/(16 eps^2).
    pub s_ratio_printed: f64,
}

#[derive(Clone, Debug)]
pub struct AsymptoticsReport {
    pub eps: f64,
    pub rows: Vec<AsymptoticsRow>,
    /// Which tail formula for `s` has ratio -> 1: "recomputed" or "printed".
    pub s_winner: &'static str,
}

/// Tail behavior of the symbols on a geometric lambda ladder.
pub fn asymptotics_report(eps: f64, lambda_max: f64) -> Result<AsymptoticsReport> {
    check_eps(eps)?;
    if eps == 0.0 {
        return Err(Error::EpsOutOfRange(eps));
    }
    let mut rows = Vec::new();
    let mut lambda = 1.0;
    while lambda <= lambda_max {
        let b = b_symbol(eps, lambda);
        let r = r_symbol(eps, lambda);
        let s = s_symbol(eps, lambda);
        let z = z_symbol(eps, lambda, DEFAULT_G_VARIANT);
        rows.push(AsymptoticsRow {
            lambda,
            b_ratio: b / (3.0 * eps * lambda),
            r_ratio: r / ((1.0 - 1.0 / eps) * lambda),
            z1_ratio: (z + 0.5 / eps) * (-4.0 * (eps.powi(3) * lambda).sqrt()),
            s_ratio_recomputed: s / (3.0 * (eps - 1.0) * lambda * lambda),
            s_ratio_printed: s / (48.0 * (eps - 1.0) * eps * eps * lambda * lambda),
        });
        lambda *= 10.0;
    }
    let last = rows.last().expect("lambda_max >= 1 yields at least one row");
    let s_winner = if (last.s_ratio_recomputed - 1.0).abs() < (last.s_ratio_printed - 1.0).abs()
    {
        "recomputed"
    } else {
        "printed"
    };
    Ok(AsymptoticsReport { eps, rows, s_winner })
}
