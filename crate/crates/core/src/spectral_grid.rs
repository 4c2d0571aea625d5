//! Periodic collocation grid on [-ell0/2, ell0/2] with FFT-based transforms,
//! spectral differentiation, 2/3-rule dealiasing, and discrete norms.
//!
//! Normalization: `forward` returns coefficients `c_m` such that
//! `f(eta_j) = sum_m c_m exp(i 2 pi m eta_j / ell0)` over `m = -n/2+1 .. n/2`,
//! so `c_0` is the mean.  Fields are real, so only `m = 0..=n/2` is stored;
//! negative modes are implied by Hermitian symmetry.  The Nyquist mode
//! `m = n/2` is kept zero at all times.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridInner {
    ell0: f64,
    n: usize,
    nodes: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Collocation grid: `n` equispaced nodes `eta_j = -ell0/2 + j*ell0/n`.
#[derive(Clone)]
pub struct PeriodicGrid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("ell0", &self.inner.ell0)
            .field("n", &self.inner.n)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.inner.ell0 == other.inner.ell0 && self.inner.n == other.inner.n
    }
}

impl PeriodicGrid {
    pub fn new(ell0: f64, n: usize) -> Result<Self> {
        if !(ell0 > 0.0) || !ell0.is_finite() {
            return Err(Error::InvalidGrid(format!("ell0 = {ell0} must be positive")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even and >= 8")));
        }
        let nodes = (0..n)
            .map(|j| -ell0 / 2.0 + (j as f64) * ell0 / (n as f64))
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner { ell0, n, nodes, fwd, inv }),
        })
    }

    pub fn ell0(&self) -> f64 {
        self.inner.ell0
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn nodes(&self) -> &[f64] {
        &self.inner.nodes
    }

    /// Number of retained nonnegative modes, `n/2 + 1` (Nyquist included).
    pub fn half_len(&self) -> usize {
        self.inner.n / 2 + 1
    }

    /// Wavenumber of integer mode `m`: `2 pi m / ell0`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        2.0 * PI * (m as f64) / self.inner.ell0
    }

    /// Eigenvalue of `-d^2/d_eta^2` on mode `m`: `lambda(m) = (2 pi m / ell0)^2`.
    pub fn lambda(&self, m: usize) -> f64 {
        let k = self.wavenumber(m);
        k * k
    }

    /// Largest mode surviving the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.inner.n / 3
    }

    /// Forward transform of a real nodal field into half-spectrum coefficients.
    pub fn forward(&self, f: &RealField) -> ModeVector {
        assert_eq!(f.grid, *self, "field built on a different grid");
        let n = self.inner.n;
        let mut buf: Vec<Complex64> =
            f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inner.fwd.process(&mut buf);
        let scale = 1.0 / n as f64;
        let mut coeffs = Vec::with_capacity(self.half_len());
        for m in 0..=n / 2 {
            // Nodes start at -ell0/2, which shifts the plain DFT output by
            // the phase (-1)^m relative to the modal expansion.
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            coeffs.push(buf[m] * (scale * sign));
        }
        coeffs[0].im = 0.0;
        let nyq = n / 2;
        coeffs[nyq] = Complex64::new(0.0, 0.0);
        ModeVector { grid: self.clone(), coeffs }
    }

    /// Inverse transform back to nodal values.
    pub fn inverse(&self, c: &ModeVector) -> RealField {
        assert_eq!(c.grid, *self, "mode vector built on a different grid");
        let n = self.inner.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(c.coeffs[0].re, 0.0);
        for m in 1..n / 2 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let v = c.coeffs[m] * sign;
            buf[m] = v;
            buf[n - m] = v.conj();
        }
        // Nyquist stays zero by invariant.
        self.inner.inv.process(&mut buf);
        let values = buf.iter().map(|z| z.re).collect();
        RealField { grid: self.clone(), values }
    }
}

/// Real nodal samples of a periodic field.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn from_values(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "field length {} does not match grid n = {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &PeriodicGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&eta| f(eta)).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.n()] }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, &v| acc.max(v.abs()))
    }

    /// Nodal mean, `(1/n) sum_j f(eta_j)`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pointwise product; both factors must live on the same grid.
    pub fn pointwise_mul(&self, other: &RealField) -> RealField {
        assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .collect();
        RealField { grid: self.grid.clone(), values }
    }
}

/// Half-spectrum complex coefficients `c_m`, `m = 0..=n/2`, of a real field.
#[derive(Clone, Debug)]
pub struct ModeVector {
    grid: PeriodicGrid,
    coeffs: Vec<Complex64>,
}

impl ModeVector {
    pub fn zeros(grid: &PeriodicGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.half_len()],
        }
    }

    pub fn from_coeffs(grid: &PeriodicGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.half_len() {
            return Err(Error::InvalidGrid(format!(
                "coefficient length {} does not match n/2+1 = {}",
                coeffs.len(),
                grid.half_len()
            )));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Mean of the underlying field (mode-0 coefficient).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Spectral derivative: multiply mode `m` by `(i 2 pi m / ell0)^order`.
    pub fn differentiate(&self, order: u32) -> Result<ModeVector> {
        if !(1..=4).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            let ik = Complex64::new(0.0, self.grid.wavenumber(m));
            *c *= ik.powi(order as i32);
        }
        out.coeffs[0] = Complex64::new(0.0, 0.0);
        Ok(out)
    }

    /// 2/3-rule projection: zero all modes with `m > n/3`.
    pub fn dealias(&self) -> ModeVector {
        let cutoff = self.grid.dealias_cutoff();
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut().enumerate() {
            if m > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// L2 norm over the strip: `sqrt(ell0 * sum_m |c_m|^2)`, the full-spectrum
    /// sum realized as `|c_0|^2 + 2 sum_{m>=1} |c_m|^2`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.ell0() * self.coeff_energy()).sqrt()
    }

    /// `sum_m |c_m|^2` over the full (two-sided) spectrum.
    pub fn coeff_energy(&self) -> f64 {
        let mut s = self.coeffs[0].norm_sqr();
        for c in &self.coeffs[1..] {
            s += 2.0 * c.norm_sqr();
        }
        s
    }

    pub fn scale(&self, a: f64) -> ModeVector {
        let coeffs = self.coeffs.iter().map(|&c| c * a).collect();
        ModeVector { grid: self.grid.clone(), coeffs }
    }

    pub fn sub(&self, other: &ModeVector) -> ModeVector {
        assert_eq!(self.grid, other.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a - b)
            .collect();
        ModeVector { grid: self.grid.clone(), coeffs }
    }

    pub fn add(&self, other: &ModeVector) -> ModeVector {
        assert_eq!(self.grid, other.grid);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a + b)
            .collect();
        ModeVector { grid: self.grid.clone(), coeffs }
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Discrete norms of a nodal field: `(l2, sup)` with `l2` by Parseval.
pub fn norms(f: &RealField) -> (f64, f64) {
    let c = f.grid().forward(f);
    (c.l2_norm(), f.sup_norm())
}
