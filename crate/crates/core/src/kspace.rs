//! Momentum-space plumbing: model parameters, dispersion relations, the
//! polar quadrature grid, complex field functions on it, the exponentially
//! damped path-memory process U^{N,±}, the time-dependent norm, and the
//! energy counter term.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::levy::{LevyPath, Vec2};
use crate::quad::{self, GaussRule};

/// Physical parameter tuple of the model.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    /// Particle count N ≥ 1.
    pub n_particles: usize,
    /// Particle mass m_p ≥ 0.
    pub m_p: f64,
    /// Field (boson) mass m_b > 0; the renormalized theory needs a massive field.
    pub m_b: f64,
    /// Coupling strength g.
    pub g: f64,
    /// Infrared cutoff σ ≥ 0.
    pub sigma: f64,
    /// Ultraviolet cutoff Λ ∈ (σ, ∞]; `f64::INFINITY` means no cutoff.
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(n_particles: usize, m_p: f64, m_b: f64, g: f64, sigma: f64, lambda: f64) -> Self {
        let p = Self {
            n_particles,
            m_p,
            m_b,
            g,
            sigma,
            lambda,
        };
        p.validate().expect("invalid model parameters");
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(invalid!("particle count must be ≥ 1"));
        }
        if !(self.m_p >= 0.0) {
            return Err(invalid!("particle mass must be ≥ 0, got {}", self.m_p));
        }
        if !(self.m_b > 0.0) {
            return Err(invalid!("field mass must be > 0, got {}", self.m_b));
        }
        if !(self.sigma >= 0.0 && self.sigma < self.lambda) {
            return Err(invalid!(
                "cutoffs must satisfy 0 ≤ σ < Λ, got σ={} Λ={}",
                self.sigma,
                self.lambda
            ));
        }
        Ok(())
    }

    /// Kinetic dispersion ψ(k) = √(|k|² + m_p²) − m_p as a function of r = |k|.
    pub fn psi(&self, r: f64) -> f64 {
        psi(r, self.m_p)
    }

    /// Field dispersion ω(k) = √(|k|² + m_b²) as a function of r = |k|.
    pub fn omega(&self, r: f64) -> f64 {
        omega(r, self.m_b)
    }

    /// Coupling function v(k) = g/√ω(k) (radial).
    pub fn coupling_v(&self, r: f64) -> f64 {
        self.g / self.omega(r).sqrt()
    }

    /// The second action kernel β(k) = v(k)/(ω(k) + ψ(k)) (radial).
    pub fn beta(&self, r: f64) -> f64 {
        self.coupling_v(r) / (self.omega(r) + self.psi(r))
    }
}

/// ψ(r) = √(r² + m_p²) − m_p, written to avoid cancellation for small r.
pub fn psi(r: f64, m_p: f64) -> f64 {
    if m_p == 0.0 {
        r.abs()
    } else {
        let h = r.hypot(m_p);
        // √(r²+m²) − m = r² / (√(r²+m²) + m).
        r * r / (h + m_p)
    }
}

/// ω(r) = √(r² + m_b²).
pub fn omega(r: f64, m_b: f64) -> f64 {
    r.hypot(m_b)
}

/// Both dispersion relations at radius r: (ψ, ω).
pub fn dispersion(r: f64, m_p: f64, m_b: f64) -> (f64, f64) {
    (psi(r, m_p), omega(r, m_b))
}

/// Construction knobs for the polar quadrature grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of radial Gauss–Legendre panels.
    pub radial_panels: usize,
    /// Gauss order within each radial panel.
    pub gauss_order: usize,
    /// Number of uniform angular nodes (even).
    pub n_theta: usize,
    /// Truncation radius substituted for Λ = ∞.
    pub r_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            radial_panels: 24,
            gauss_order: 6,
            n_theta: 64,
            r_max: 80.0,
        }
    }
}

/// Polar tensor quadrature grid: Gauss–Legendre panels in the radius,
/// uniform (trapezoid) nodes in the angle. Panel widths grow geometrically
/// away from the inner radius so the small-k region is resolved.
#[derive(Debug)]
pub struct RadialGrid {
    /// Inner and outer radius actually covered.
    pub r_lo: f64,
    pub r_hi: f64,
    /// Radial nodes.
    pub r: Vec<f64>,
    /// Radial weights (plain dr measure; the Jacobian r is applied by the
    /// integration helpers).
    pub wr: Vec<f64>,
    /// Angular node count; nodes at 2πj/n with equal weights 2π/n.
    pub n_theta: usize,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
}

impl RadialGrid {
    /// Grid over [r_lo, r_hi] with the given spec.
    pub fn new(spec: &GridSpec, r_lo: f64, r_hi: f64) -> Result<Arc<Self>> {
        if !(r_lo >= 0.0 && r_hi > r_lo && r_hi.is_finite()) {
            return Err(invalid!("invalid radial range [{r_lo}, {r_hi}]"));
        }
        if spec.n_theta < 4 || !spec.n_theta.is_multiple_of(2) {
            return Err(invalid!("angular node count must be even and ≥ 4"));
        }
        let span = r_hi - r_lo;
        let n = spec.radial_panels.max(1);
        // First-panel width: resolve the scale of the inner region without
        // wasting panels when the range is narrow.
        let w0 = (span / n as f64).min((r_lo.max(0.5)).min(span));
        let edges = geometric_edges(r_lo, r_hi, n, w0);
        let rule = GaussRule::new(spec.gauss_order.max(2));
        let mut r = Vec::with_capacity(n * rule.order());
        let mut wr = Vec::with_capacity(n * rule.order());
        for pair in edges.windows(2) {
            for (x, w) in rule.mapped(pair[0], pair[1]) {
                r.push(x);
                wr.push(w);
            }
        }
        let n_theta = spec.n_theta;
        let cos_theta = (0..n_theta)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n_theta as f64).cos())
            .collect();
        let sin_theta = (0..n_theta)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n_theta as f64).sin())
            .collect();
        Ok(Arc::new(Self {
            r_lo,
            r_hi,
            r,
            wr,
            n_theta,
            cos_theta,
            sin_theta,
        }))
    }

    /// Grid covering the momentum shell [σ, min(Λ, r_max)] of `params`.
    pub fn for_cutoffs(spec: &GridSpec, params: &ModelParams) -> Result<Arc<Self>> {
        let hi = params.lambda.min(spec.r_max);
        Self::new(spec, params.sigma, hi)
    }

    pub fn n_radial(&self) -> usize {
        self.r.len()
    }

    /// ∫ f(k) dk for radial f given by samples at the radial nodes.
    pub fn quad_radial(&self, vals: &[f64]) -> f64 {
        2.0 * std::f64::consts::PI
            * self
                .r
                .iter()
                .zip(&self.wr)
                .zip(vals)
                .map(|((&r, &w), &f)| w * r * f)
                .sum::<f64>()
    }

    /// Angular weight 2π/n_theta.
    pub fn w_theta(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_theta as f64
    }
}

/// Panel edges from `a` to `b` whose widths grow geometrically, first panel
/// width ≈ w0.
fn geometric_edges(a: f64, b: f64, n: usize, w0: f64) -> Vec<f64> {
    let span = b - a;
    let w0 = w0.clamp(span * 1e-6, span / n as f64);
    // Solve w0 (q^n - 1)/(q - 1) = span for the growth factor q ≥ 1.
    let total = |q: f64| -> f64 {
        if (q - 1.0).abs() < 1e-12 {
            w0 * n as f64
        } else {
            w0 * (q.powi(n as i32) - 1.0) / (q - 1.0)
        }
    };
    let (mut lo, mut hi) = (1.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < span {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let mut edges = Vec::with_capacity(n + 1);
    let mut x = a;
    let mut w = w0;
    edges.push(a);
    for _ in 0..n - 1 {
        x += w;
        edges.push(x);
        w *= q;
    }
    edges.push(b);
    edges
}

/// Complex function of k sampled on a grid; radial-only functions store one
/// value per radius.
#[derive(Debug, Clone)]
pub struct FieldFunction {
    pub grid: Arc<RadialGrid>,
    pub radial: bool,
    pub values: Vec<Complex64>,
}

impl FieldFunction {
    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.n_radial() * grid.n_theta;
        Self {
            grid,
            radial: false,
            values: vec![Complex64::default(); n],
        }
    }

    pub fn radial_from_fn<F: Fn(f64) -> Complex64>(grid: Arc<RadialGrid>, f: F) -> Self {
        let values = grid.r.iter().map(|&r| f(r)).collect();
        Self {
            grid,
            radial: true,
            values,
        }
    }

    pub fn full_from_fn<F: Fn(f64, f64, f64) -> Complex64>(grid: Arc<RadialGrid>, f: F) -> Self {
        // f(r, cosθ, sinθ)
        let mut values = Vec::with_capacity(grid.n_radial() * grid.n_theta);
        for &r in &grid.r {
            for j in 0..grid.n_theta {
                values.push(f(r, grid.cos_theta[j], grid.sin_theta[j]));
            }
        }
        Self {
            grid,
            radial: false,
            values,
        }
    }

    pub fn same_grid(&self, other: &FieldFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid)
    }

    pub fn value(&self, i_r: usize, i_theta: usize) -> Complex64 {
        if self.radial {
            self.values[i_r]
        } else {
            self.values[i_r * self.grid.n_theta + i_theta]
        }
    }

    /// Conjugate-linear-in-the-first-slot inner product ∫ conj(self) · other dk.
    pub fn inner(&self, other: &FieldFunction) -> Complex64 {
        assert!(self.same_grid(other), "field functions on different grids");
        let g = &self.grid;
        let mut acc = Complex64::default();
        if self.radial && other.radial {
            for i in 0..g.n_radial() {
                acc += g.wr[i] * g.r[i] * self.values[i].conj() * other.values[i];
            }
            acc * 2.0 * std::f64::consts::PI
        } else {
            let wth = g.w_theta();
            for i in 0..g.n_radial() {
                let mut row = Complex64::default();
                for j in 0..g.n_theta {
                    row += self.value(i, j).conj() * other.value(i, j);
                }
                acc += g.wr[i] * g.r[i] * row;
            }
            acc * wth
        }
    }

    /// Weighted inner product ∫ conj(self) · other · radial_weight(r) dk.
    pub fn inner_weighted<F: Fn(f64) -> f64>(&self, other: &FieldFunction, weight: F) -> Complex64 {
        assert!(self.same_grid(other), "field functions on different grids");
        let g = &self.grid;
        let wth = g.w_theta();
        let mut acc = Complex64::default();
        for i in 0..g.n_radial() {
            let mut row = Complex64::default();
            if self.radial && other.radial {
                row = self.values[i].conj() * other.values[i] * (g.n_theta as f64);
            } else {
                for j in 0..g.n_theta {
                    row += self.value(i, j).conj() * other.value(i, j);
                }
            }
            acc += g.wr[i] * g.r[i] * weight(g.r[i]) * row;
        }
        acc * wth
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).re
    }

    /// Pointwise multiply by a radial factor.
    pub fn scale_radial<F: Fn(f64) -> f64>(&mut self, f: F) {
        if self.radial {
            for (i, v) in self.values.iter_mut().enumerate() {
                *v *= f(self.grid.r[i]);
            }
        } else {
            let nth = self.grid.n_theta;
            for (i, v) in self.values.iter_mut().enumerate() {
                *v *= f(self.grid.r[i / nth]);
            }
        }
    }

    pub fn add_assign(&mut self, other: &FieldFunction) {
        assert!(self.same_grid(other), "field functions on different grids");
        if self.radial == other.radial {
            for (a, b) in self.values.iter_mut().zip(&other.values) {
                *a += b;
            }
        } else {
            assert!(!self.radial, "cannot add a full field into a radial one");
            let nth = self.grid.n_theta;
            for (i, a) in self.values.iter_mut().enumerate() {
                *a += other.values[i / nth];
            }
        }
    }

    pub fn scaled(&self, s: Complex64) -> FieldFunction {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Maximum deviation from the real-symmetric property conj(f)(k) = f(-k)
    /// over grid mirror pairs.
    pub fn mirror_asymmetry(&self) -> f64 {
        if self.radial {
            return self
                .values
                .iter()
                .map(|v| v.im.abs())
                .fold(0.0, f64::max);
        }
        let nth = self.grid.n_theta;
        let mut worst: f64 = 0.0;
        for i in 0..self.grid.n_radial() {
            for j in 0..nth {
                let a = self.value(i, j).conj();
                let b = self.value(i, (j + nth / 2) % nth);
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }
}

/// Sign selector for the path-memory process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemorySign {
    /// Damping e^{-(t-s)ω}: weight concentrated near the path's present.
    Plus,
    /// Damping e^{-sω}: weight concentrated near the path's start.
    Minus,
}

/// The field-memory process U^{N,±}_{σ,Λ,t}[x, path] on the grid:
/// Σ_j e^{-ik·x_j} ∫₀^t e^{-damping(s)ω - ik·γ_{j,s}} v(k) ds, with the
/// time integral over each constant path segment in closed form.
pub fn u_process(
    params: &ModelParams,
    grid: &Arc<RadialGrid>,
    sign: MemorySign,
    x: &[Vec2],
    path: &LevyPath,
    t: f64,
) -> Result<FieldFunction> {
    if !(0.0..=path.horizon + 1e-12).contains(&t) {
        return Err(invalid!("time {t} outside the path horizon {}", path.horizon));
    }
    assert_eq!(x.len(), params.n_particles);
    assert_eq!(path.n_particles, params.n_particles);
    let nr = grid.n_radial();
    let nth = grid.n_theta;
    let mut field = FieldFunction::zero(grid.clone());
    if t == 0.0 {
        return Ok(field);
    }
    // Per-radius prefactors.
    let om: Vec<f64> = grid.r.iter().map(|&r| params.omega(r)).collect();
    let v: Vec<f64> = grid.r.iter().map(|&r| params.coupling_v(r)).collect();
    let mut tau = vec![0.0; nr];
    for seg in path.segments_until(t) {
        let (a, b) = (seg.t0, seg.t1.min(t));
        if b <= a {
            continue;
        }
        for i in 0..nr {
            let w = om[i];
            tau[i] = match sign {
                MemorySign::Plus => ((-(t - b) * w).exp() - (-(t - a) * w).exp()) / w,
                MemorySign::Minus => ((-a * w).exp() - (-b * w).exp()) / w,
            } * v[i];
        }
        for (j, &xj) in x.iter().enumerate() {
            let p = xj + seg.pos[j];
            for i in 0..nr {
                let r = grid.r[i];
                let base = i * nth;
                for jt in 0..nth {
                    let phase = -r * (grid.cos_theta[jt] * p.x + grid.sin_theta[jt] * p.y);
                    field.values[base + jt] += Complex64::cis(phase) * tau[i];
                }
            }
        }
    }
    Ok(field)
}

/// Time-weighted norm ‖f‖_t = (∫ (1 + 1/(tω)) |f|² dk)^{1/2}.
pub fn t_norm(f: &FieldFunction, t: f64, m_b: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid!("the time-dependent norm needs t > 0, got {t}"));
    }
    let val = f
        .inner_weighted(f, |r| 1.0 + 1.0 / (t * omega(r, m_b)))
        .re;
    Ok(val.max(0.0).sqrt())
}

/// Energy counter term E^ren_{σ,Λ} = 2πg² ∫_σ^Λ r/(ω(ω+ψ)) dr by adaptive
/// quadrature. Diverges logarithmically as Λ → ∞, so an infinite cutoff is
/// rejected.
pub fn renorm_energy(params: &ModelParams, sigma: f64, lambda: f64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma <= lambda) {
        return Err(invalid!("need 0 ≤ σ ≤ Λ, got σ={sigma}, Λ={lambda}"));
    }
    if !lambda.is_finite() {
        return Err(crate::error::Error::Divergent(
            "the counter-term integral diverges for Λ = ∞".into(),
        ));
    }
    if sigma == lambda {
        return Ok(0.0);
    }
    let (m_p, m_b, g) = (params.m_p, params.m_b, params.g);
    let (val, _) = quad::integrate_adaptive(
        |r| {
            let (ps, om) = dispersion(r, m_p, m_b);
            r / (om * (om + ps))
        },
        sigma,
        lambda,
        1e-12,
    );
    Ok(2.0 * std::f64::consts::PI * g * g * val)
}
