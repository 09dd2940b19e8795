//! The complex action of the path-integral weight, in both guises: the
//! direct finite-cutoff time integral and the renormalized decomposition
//! u = w − c + m (interaction − boundary + martingale), plus the pair
//! potential mediating the effective interaction.
//!
//! Everything here reduces to one-dimensional radial integrals: for
//! piecewise-constant paths every inner product against the memory process
//! collapses, after the angular average, to ∫ r · J₀(r·distance) ·
//! (closed-form time factor) / kernel dr. Time integration is exact per
//! segment, so the only numerical error is the radial quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kspace::{dispersion, omega, psi, renorm_energy, ModelParams};
use crate::levy::{LevyPath, PathEvent, Segment, Vec2};
use crate::quad::{self, GaussRule};
use crate::special::{bessel_j0, jump_radial_measure, jump_tail_mass};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Decomposed complex action for one path at one time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActionParts {
    /// Effective-interaction integral over the high-frequency band.
    pub w: f64,
    /// Boundary term.
    pub c: f64,
    /// Martingale term (jump sum minus compensator).
    pub m: f64,
    /// Total action u = direct(low band) + w − c + m.
    pub u: f64,
    /// Counter term t·N·E^ren of the low band that the direct part subtracts.
    pub counter_term: f64,
    /// Splitting scale between the direct low band and the renormalized
    /// high band.
    pub kappa: f64,
}

/// Splitting scale used by default: max(g²N, 2 m_b).
pub fn default_kappa(params: &ModelParams) -> f64 {
    (params.g * params.g * params.n_particles as f64).max(2.0 * params.m_b)
}

// ---------------------------------------------------------------------------
// Pair potential
// ---------------------------------------------------------------------------

/// Approximate k-th positive zero of J₀ (McMahon expansion; plenty accurate
/// for use as quadrature panel edges).
fn j0_zero(k: usize) -> f64 {
    let b = (k as f64 - 0.25) * std::f64::consts::PI;
    b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b.powi(3))
}

/// Pair potential w_{σ,Λ}(y) = 2πg² ∫_σ^Λ r J₀(r|y|)/(ω(ω+ψ)) dr.
///
/// Oscillation-aware: the range is split at the zeros of J₀(r|y|) and, for
/// Λ = ∞, the alternating tail series is summed with repeated averaging.
/// For Λ = ∞ and y = 0 the integral diverges; the conventional value 0 is
/// returned.
pub fn pair_potential(y: Vec2, sigma: f64, lambda: f64, params: &ModelParams) -> Result<f64> {
    pair_potential_radial(y.norm(), sigma, lambda, params)
}

/// `pair_potential` as a function of the distance s = |y|.
pub fn pair_potential_radial(s: f64, sigma: f64, lambda: f64, params: &ModelParams) -> Result<f64> {
    if !(sigma >= 0.0 && sigma < lambda) {
        return Err(invalid!("cutoffs must satisfy 0 ≤ σ < Λ"));
    }
    let (m_p, m_b, g) = (params.m_p, params.m_b, params.g);
    let f = move |r: f64| {
        let (ps, om) = dispersion(r, m_p, m_b);
        TWO_PI * g * g * r * bessel_j0(r * s) / (om * (om + ps))
    };
    if lambda.is_finite() {
        // Split at J₀ zeros once the argument oscillates inside the range.
        let mut edges = vec![sigma];
        if s > 0.0 {
            let mut k = 1;
            loop {
                let r = j0_zero(k) / s;
                if r >= lambda {
                    break;
                }
                if r > sigma {
                    edges.push(r);
                }
                k += 1;
            }
        }
        edges.push(lambda);
        let mut total = 0.0;
        for pair in edges.windows(2) {
            let (v, _) = quad::integrate_adaptive(f, pair[0], pair[1], 1e-12);
            total += v;
        }
        Ok(total)
    } else {
        if s == 0.0 {
            return Ok(0.0); // conventional value; the integral diverges
        }
        // Head: up to the first zero beyond max(σ, a few mass scales).
        let mut k = 1;
        while j0_zero(k) / s < sigma.max(8.0 * m_b).max(8.0 * s.recip().min(1e6)) {
            k += 1;
        }
        let head_end = j0_zero(k) / s;
        let mut edges = vec![sigma];
        let mut kk = 1;
        while j0_zero(kk) / s < head_end {
            let r = j0_zero(kk) / s;
            if r > sigma {
                edges.push(r);
            }
            kk += 1;
        }
        edges.push(head_end);
        let mut head = 0.0;
        for pair in edges.windows(2) {
            let (v, _) = quad::integrate_adaptive(f, pair[0], pair[1], 1e-12);
            head += v;
        }
        // Tail: alternating zero-to-zero panel sums, accelerated by repeated
        // averaging of the partial sums.
        const PANELS: usize = 28;
        let mut partial = Vec::with_capacity(PANELS);
        let mut acc = 0.0;
        for i in 0..PANELS {
            let a = j0_zero(k + i) / s;
            let b = j0_zero(k + i + 1) / s;
            let (v, _) = quad::integrate_adaptive(f, a, b, 1e-13);
            acc += v;
            partial.push(acc);
        }
        let mut row = partial[PANELS - 12..].to_vec();
        while row.len() > 1 {
            row = row.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        }
        Ok(head + row[0])
    }
}

/// Interpolation table for the pair potential at fixed (σ, Λ, params):
/// log-spaced radii, piecewise-linear in ln r (the potential is
/// asymptotically logarithmic at short distance, so this is the natural
/// coordinate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairPotentialTable {
    pub sigma: f64,
    pub lambda: f64,
    pub g: f64,
    pub m_p: f64,
    pub m_b: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest midpoint interpolation error observed while building.
    pub max_interp_error: f64,
}

impl PairPotentialTable {
    pub fn build(
        params: &ModelParams,
        sigma: f64,
        lambda: f64,
        n_points: usize,
        r_min: f64,
        r_max: f64,
    ) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && n_points >= 8) {
            return Err(invalid!("invalid table range"));
        }
        let log_lo = r_min.ln();
        let step = (r_max.ln() - log_lo) / (n_points - 1) as f64;
        let radii: Vec<f64> = (0..n_points).map(|i| (log_lo + i as f64 * step).exp()).collect();
        let values: Vec<f64> = radii
            .iter()
            .map(|&r| pair_potential_radial(r, sigma, lambda, params))
            .collect::<Result<_>>()?;
        let mut table = Self {
            sigma,
            lambda,
            g: params.g,
            m_p: params.m_p,
            m_b: params.m_b,
            r_min,
            r_max,
            radii,
            values,
            max_interp_error: 0.0,
        };
        // Midpoint error bound, sampled on every interval.
        let mut worst: f64 = 0.0;
        for i in 0..n_points - 1 {
            let rm = (table.radii[i] * table.radii[i + 1]).sqrt();
            let exact = pair_potential_radial(rm, sigma, lambda, params)?;
            worst = worst.max((table.eval(rm) - exact).abs());
        }
        table.max_interp_error = worst;
        Ok(table)
    }

    /// Interpolated value; clamped to the end values outside the range
    /// (short end: logarithmic extrapolation along the first interval).
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        if r >= self.r_max {
            return self.values[n - 1];
        }
        let lr = r.max(self.r_min * 1e-6).ln();
        let lo = self.r_min.ln();
        let step = (self.r_max.ln() - lo) / (n - 1) as f64;
        let pos = (lr - lo) / step;
        let i = (pos.floor() as isize).clamp(0, n as isize - 2) as usize;
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Key identifying the parameter set, for disk caching.
    pub fn cache_key(&self) -> String {
        format!(
            "pairpot_s{:e}_l{:e}_g{:e}_mp{:e}_mb{:e}_n{}_r{:e}-{:e}",
            self.sigma,
            self.lambda,
            self.g,
            self.m_p,
            self.m_b,
            self.radii.len(),
            self.r_min,
            self.r_max
        )
        .replace(['+', '.'], "_")
    }

    pub fn save(&self, dir: &std::path::Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.cache_key()));
        std::fs::write(&path, serde_json::to_vec(self).expect("table serializes"))?;
        Ok(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::InvalidArgument(format!("corrupt table file: {e}")))
    }
}

// ---------------------------------------------------------------------------
// Radial action evaluator
// ---------------------------------------------------------------------------

/// Small-jump compensating kernel −ψ_ε(r) = ∫_ε^∞ (J₀(rρ) − 1) μ(ρ) dρ where
/// μ is the radial jump measure. Tends to −ψ(r) as ε ↓ 0; `eps = 0` returns
/// that limit in closed form.
pub fn compensator_kernel(r: f64, eps: f64, m_p: f64) -> f64 {
    if !eps.is_finite() {
        return 0.0;
    }
    if eps == 0.0 {
        return m_p - (r * r + m_p * m_p).sqrt();
    }
    let scale = eps.max(0.25 / (1.0 + r));
    let (v, _) = quad::integrate_to_infinity(
        |rho| (bessel_j0(r * rho) - 1.0) * jump_radial_measure(rho, m_p),
        eps,
        scale,
        1e-11,
    );
    v
}

/// Evaluation times and cumulative action pieces for one path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActionLadderPoint {
    pub t: f64,
    /// Interaction term Σ_{j<ℓ} ∫₀^t 2 w(X_j − X_ℓ) ds.
    pub w: f64,
    /// Boundary term at t.
    pub c: f64,
    /// Sum of jump increments h over jumps up to t.
    pub jump_sum: f64,
    /// Compensator ∫₀^t Σ_ℓ ∫_{|z|>ε} h dν ds.
    pub compensator: f64,
    /// Direct band integral minus t·N·E^ren (finite-Λ band only).
    pub direct: Option<f64>,
}

impl ActionLadderPoint {
    pub fn m(&self) -> f64 {
        self.jump_sum - self.compensator
    }

    pub fn u(&self) -> f64 {
        self.w - self.c + self.m()
    }
}

/// Radial quadrature engine for all scalar action pieces over one momentum
/// band [σ, Λ]. Immutable after construction; share freely across workers.
#[derive(Debug, Clone)]
pub struct ActionEvaluator {
    pub params: ModelParams,
    /// Small-jump threshold the compensator is truncated at.
    pub eps: f64,
    /// Band actually integrated; Λ = ∞ is truncated at `r_cap` with the
    /// slowly-decaying zero-distance part of the tail added in closed form.
    pub r_lo: f64,
    pub r_hi: f64,
    r: Vec<f64>,
    wr: Vec<f64>,
    om: Vec<f64>,
    /// 1/(ω(ω+ψ)).
    inv_d: Vec<f64>,
    /// −ψ_ε(r) at the nodes.
    comp_kernel: Vec<f64>,
    /// Counter-term energy of the band (adaptive, not grid).
    pub e_ren_band: f64,
    /// Tail integrals beyond r_hi for zero-distance rows (Λ = ∞ only):
    /// ∫ r/(ω·ω(ω+ψ)) dr and ∫ r/(ω²·ω(ω+ψ)) dr, times 2πg².
    tail_i1: f64,
    tail_i2: f64,
    tail_rate: f64,
}

impl ActionEvaluator {
    pub fn new(
        params: &ModelParams,
        eps: f64,
        radial_panels: usize,
        gauss_order: usize,
        r_cap: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(eps >= 0.0) {
            return Err(invalid!("small-jump threshold must be non-negative"));
        }
        if eps == 0.0 && !params.lambda.is_finite() {
            // The full-symbol compensator kernel grows linearly, so its
            // infinite-band tail beyond r_cap cannot be corrected in closed
            // form the way the truncated kernel's constant tail can.
            return Err(invalid!(
                "a zero small-jump threshold needs a finite ultraviolet cutoff"
            ));
        }
        let r_lo = params.sigma;
        let r_hi = params.lambda.min(r_cap);
        if !(r_hi > r_lo && r_hi.is_finite()) {
            return Err(invalid!("empty momentum band [{r_lo}, {r_hi}]"));
        }
        let rule = GaussRule::new(gauss_order.max(2));
        let n = radial_panels.max(1);
        let span = r_hi - r_lo;
        let w0 = (span / n as f64).min(r_lo.max(0.25 * params.m_b.max(0.1)).min(span));
        let edges = geometric_edges(r_lo, r_hi, n, w0);
        let mut r = Vec::with_capacity(n * rule.order());
        let mut wr = Vec::with_capacity(n * rule.order());
        for pair in edges.windows(2) {
            for (x, w) in rule.mapped(pair[0], pair[1]) {
                r.push(x);
                wr.push(w);
            }
        }
        let om: Vec<f64> = r.iter().map(|&x| omega(x, params.m_b)).collect();
        let inv_d: Vec<f64> = r
            .iter()
            .zip(&om)
            .map(|(&x, &o)| 1.0 / (o * (o + psi(x, params.m_p))))
            .collect();
        let comp_kernel: Vec<f64> = r
            .iter()
            .map(|&x| compensator_kernel(x, eps, params.m_p))
            .collect();
        let e_ren_band = renorm_energy(params, r_lo, r_hi)?;
        let (mut tail_i1, mut tail_i2) = (0.0, 0.0);
        if !params.lambda.is_finite() {
            let (m_p, m_b, g) = (params.m_p, params.m_b, params.g);
            let kern = move |x: f64, extra: i32| {
                let (ps, o) = dispersion(x, m_p, m_b);
                x / (o.powi(extra) * o * (o + ps))
            };
            let (i1, _) = quad::integrate_to_infinity(|x| kern(x, 1), r_hi, r_hi, 1e-12);
            let (i2, _) = quad::integrate_to_infinity(|x| kern(x, 2), r_hi, r_hi, 1e-12);
            tail_i1 = TWO_PI * g * g * i1;
            tail_i2 = TWO_PI * g * g * i2;
        }
        let tail_rate = if eps > 0.0 && eps.is_finite() {
            jump_tail_mass(eps, params.m_p)
        } else {
            0.0
        };
        Ok(Self {
            params: *params,
            eps,
            r_lo,
            r_hi,
            r,
            wr,
            om,
            inv_d,
            comp_kernel,
            e_ren_band,
            tail_i1,
            tail_i2,
            tail_rate,
        })
    }

    /// Evaluator with a resolution suitable for one-off verification calls.
    pub fn with_defaults(params: &ModelParams, eps: f64) -> Result<Self> {
        Self::new(params, eps, 48, 6, 600.0)
    }

    pub fn n_nodes(&self) -> usize {
        self.r.len()
    }

    /// Pair potential on this evaluator's band and grid (consistent with the
    /// boundary/martingale quadrature, unlike the adaptive `pair_potential`).
    pub fn pair_potential_grid(&self, d: f64) -> f64 {
        let g2 = self.params.g * self.params.g;
        let mut acc = 0.0;
        for i in 0..self.r.len() {
            acc += self.wr[i] * self.r[i] * bessel_j0(self.r[i] * d) * self.inv_d[i];
        }
        TWO_PI * g2 * acc
    }

    /// Closed-form damped time factor of a source segment q at time s:
    /// (e^{−(s−min(e_q,s))ω} − e^{−(s−c_q)ω})/ω.
    #[inline]
    fn tau(&self, i: usize, seg: &Segment, s: f64) -> f64 {
        let w = self.om[i];
        let a = (s - seg.t1).max(0.0);
        ((-a * w).exp() - (-(s - seg.t0) * w).exp()) / w
    }

    /// Number of leading nodes whose damping e^{−gap·ω} has not underflowed
    /// all tolerances; ω is ascending along the node row, so the remaining
    /// nodes contribute < e^{−45} each and are skipped.
    #[inline]
    fn live_nodes(&self, gap: f64) -> usize {
        if gap <= 0.0 {
            return self.r.len();
        }
        let cap = 45.0 / gap;
        self.om.partition_point(|&w| w <= cap)
    }

    /// ∫_a^b τ_q(s) ds for a window [a, b] inside a segment at or after q.
    /// Self-window (q is the window's own segment): a must be the segment
    /// start.
    #[inline]
    fn tau_window(&self, i: usize, seg: &Segment, a: f64, b: f64, self_window: bool) -> f64 {
        let w = self.om[i];
        if self_window {
            let d = b - a;
            d / w - (1.0 - (-d * w).exp()) / (w * w)
        } else {
            ((-(a - seg.t1) * w).exp() - (-(b - seg.t1) * w).exp()
                - (-(a - seg.t0) * w).exp()
                + (-(b - seg.t0) * w).exp())
                / (w * w)
        }
    }

    /// Cumulative action pieces at the given (ascending) evaluation times.
    /// `with_direct` additionally integrates the direct band action, which
    /// requires a finite Λ.
    pub fn ladder(
        &self,
        x: &[Vec2],
        path: &LevyPath,
        ts: &[f64],
        with_direct: bool,
    ) -> Result<Vec<ActionLadderPoint>> {
        let n = self.params.n_particles;
        if x.len() != n || path.n_particles != n {
            return Err(invalid!("particle count mismatch"));
        }
        if ts.is_empty() {
            return Ok(Vec::new());
        }
        if ts.windows(2).any(|p| p[1] < p[0]) || ts[0] < 0.0 {
            return Err(invalid!("evaluation times must be ascending and ≥ 0"));
        }
        let t_max = *ts.last().unwrap();
        if t_max > path.horizon + 1e-12 {
            return Err(invalid!("evaluation time beyond the path horizon"));
        }
        if with_direct && !self.params.lambda.is_finite() {
            return Err(invalid!("direct action needs a finite ultraviolet cutoff"));
        }
        let segs = path.segments_until(t_max);
        // Absolute particle positions per segment.
        let pos: Vec<Vec<Vec2>> = segs
            .iter()
            .map(|s| (0..n).map(|j| x[j] + s.pos[j]).collect())
            .collect();
        let jumps: Vec<&PathEvent> = path.jumps_until(t_max).collect();
        let nr = self.r.len();
        let mut j0_row = vec![0.0; nr];

        // Persistent accumulators over completed windows/jumps.
        let mut w_acc = 0.0;
        let mut comp_acc = 0.0;
        let mut dir_acc = 0.0;
        let mut jump_acc = 0.0;
        let mut q_done = 0usize;
        let mut jump_idx = 0usize;
        let mut out = Vec::with_capacity(ts.len());

        for &t in ts {
            while q_done < segs.len() && segs[q_done].t1 <= t {
                let end = segs[q_done].t1;
                let (dw, dc, dd) =
                    self.window_sums(&segs, &pos, q_done, end, with_direct, &mut j0_row);
                w_acc += dw;
                comp_acc += dc;
                dir_acc += dd;
                q_done += 1;
            }
            while jump_idx < jumps.len() && jumps[jump_idx].t <= t {
                jump_acc += self.jump_increment(x, path, &segs, &pos, jumps[jump_idx], &mut j0_row);
                jump_idx += 1;
            }
            let (mut w_t, mut comp_t, mut dir_t) = (w_acc, comp_acc, dir_acc);
            if q_done < segs.len() && t > segs[q_done].t0 {
                let (dw, dc, dd) =
                    self.window_sums(&segs, &pos, q_done, t, with_direct, &mut j0_row);
                w_t += dw;
                comp_t += dc;
                dir_t += dd;
            }
            let c_t = self.boundary_at(x, path, &segs, &pos, t, &mut j0_row);
            out.push(ActionLadderPoint {
                t,
                w: w_t,
                c: c_t,
                jump_sum: jump_acc,
                compensator: comp_t,
                direct: with_direct.then_some(dir_t - t * n as f64 * self.e_ren_band),
            });
        }
        Ok(out)
    }

    /// Contributions of the time window [c_{q'}, end] ⊆ segment q': returns
    /// (interaction, compensator, direct-integral) increments.
    fn window_sums(
        &self,
        segs: &[Segment],
        pos: &[Vec<Vec2>],
        qp: usize,
        end: f64,
        with_direct: bool,
        j0_row: &mut [f64],
    ) -> (f64, f64, f64) {
        let n = self.params.n_particles;
        let g2 = self.params.g * self.params.g;
        let a = segs[qp].t0;
        let dt = end - a;
        
        // Interaction term: constant on the window.
        let mut dw = 0.0;
        for j in 0..n {
            for l in j + 1..n {
                dw += 2.0 * self.pair_potential_grid((pos[qp][j] - pos[qp][l]).norm()) * dt;
            }
        }
        // Compensator / direct double-time sums over source segments q ≤ q'.
        let mut dc = 0.0;
        let mut dd = 0.0;
        for l in 0..n {
            let target = pos[qp][l];
            for q in 0..=qp {
                let self_window = q == qp;
                let live = self.live_nodes(if self_window {
                    0.0
                } else {
                    a - segs[q].t1
                });
                for j in 0..n {
                    let d = (pos[q][j] - target).norm();
                    for (row, &rr) in j0_row[..live].iter_mut().zip(&self.r) {
                        *row = bessel_j0(rr * d);
                    }
                    let (mut sc, mut sd) = (0.0, 0.0);
                    for i in 0..live {
                        let tw = self.tau_window(i, &segs[q], a, end, self_window);
                        let base = self.wr[i] * self.r[i] * j0_row[i] * tw;
                        sc += base * self.comp_kernel[i] * self.inv_d[i];
                        if with_direct {
                            sd += base / self.om[i];
                        }
                    }
                    dc += TWO_PI * g2 * sc;
                    dd += TWO_PI * g2 * sd;
                    // Analytic tail of the zero-distance self row (infinite
                    // band only; decays like 1/r² and is not negligible).
                    if self_window && j == l && d == 0.0 && self.tail_i1 > 0.0 {
                        let tail = dt * self.tail_i1 - self.tail_i2;
                        dc += -self.tail_rate * tail;
                    }
                }
            }
        }
        (dw, dc, dd)
    }

    /// Boundary term c(t) = Σ_ℓ ⟨U⁺_t | e^{−iK·X_ℓ(t)} β⟩ in radial form.
    fn boundary_at(
        &self,
        x: &[Vec2],
        path: &LevyPath,
        segs: &[Segment],
        pos: &[Vec<Vec2>],
        t: f64,
        j0_row: &mut [f64],
    ) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let n = self.params.n_particles;
        let g2 = self.params.g * self.params.g;
        
        // Post-jump positions at t (the memory side below uses segments,
        // which carry zero weight at the single point t).
        let now: Vec<Vec2> = path
            .positions(t)
            .into_iter()
            .enumerate()
            .map(|(j, p)| x[j] + p)
            .collect();
        let mut c = 0.0;
        for l in 0..n {
            for (q, seg) in segs.iter().enumerate() {
                if seg.t0 >= t {
                    break;
                }
                let live = self.live_nodes(t - seg.t1);
                for j in 0..n {
                    let d = (pos[q][j] - now[l]).norm();
                    for (row, &rr) in j0_row[..live].iter_mut().zip(&self.r) {
                        *row = bessel_j0(rr * d);
                    }
                    let mut s = 0.0;
                    for i in 0..live {
                        s += self.wr[i]
                            * self.r[i]
                            * j0_row[i]
                            * self.tau(i, seg, t)
                            * self.inv_d[i];
                    }
                    c += TWO_PI * g2 * s;
                    // Zero-distance tail of the segment containing t.
                    if j == l && d == 0.0 && seg.t1 >= t && self.tail_i1 > 0.0 {
                        c += self.tail_i1;
                    }
                }
            }
        }
        c
    }

    /// Jump increment h = ⟨U⁺_{s⁻} | e^{−iK·X_ℓ(s⁻)}(e^{−iK·z} − 1) β⟩.
    fn jump_increment(
        &self,
        x: &[Vec2],
        path: &LevyPath,
        segs: &[Segment],
        pos: &[Vec<Vec2>],
        ev: &PathEvent,
        j0_row: &mut [f64],
    ) -> f64 {
        let n = self.params.n_particles;
        let g2 = self.params.g * self.params.g;
        let s = ev.t;
        let pre = x[ev.particle] + path.position(ev.particle, s) - ev.jump;
        let post = pre + ev.jump;
        
        let mut h = 0.0;
        for (q, seg) in segs.iter().enumerate() {
            if seg.t0 >= s {
                break;
            }
            let live = self.live_nodes(s - seg.t1);
            for j in 0..n {
                let p = pos[q][j];
                let d1 = (p - pre).norm();
                let d2 = (p - post).norm();
                for (row, &rr) in j0_row[..live].iter_mut().zip(&self.r) {
                    *row = bessel_j0(rr * d2) - bessel_j0(rr * d1);
                }
                let mut acc = 0.0;
                for i in 0..live {
                    acc += self.wr[i] * self.r[i] * j0_row[i] * self.tau(i, seg, s) * self.inv_d[i];
                }
                h += TWO_PI * g2 * acc;
            }
        }
        h
    }
}

#[inline]
fn pos_of(x: &[Vec2], seg: &Segment, j: usize) -> Vec2 {
    x[j] + seg.pos[j]
}

/// Geometric panel edges (duplicated from the grid module to keep this
/// evaluator self-contained on plain slices).
fn geometric_edges(a: f64, b: f64, n: usize, w0: f64) -> Vec<f64> {
    let span = b - a;
    let w0 = w0.clamp(span * 1e-6, span / n as f64);
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

// ---------------------------------------------------------------------------
// Standalone operations
// ---------------------------------------------------------------------------

/// Total effective interaction Σ_{j<ℓ} ∫₀^t 2 w_{σ,Λ}(X_j − X_ℓ) ds, exact
/// per segment. Zero for a single particle.
pub fn interaction_term(
    x: &[Vec2],
    path: &LevyPath,
    t: f64,
    sigma: f64,
    lambda: f64,
    params: &ModelParams,
) -> Result<f64> {
    let n = params.n_particles;
    if n == 1 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for seg in path.segments_until(t) {
        let dt = seg.t1.min(t) - seg.t0;
        if dt <= 0.0 {
            continue;
        }
        for j in 0..n {
            for l in j + 1..n {
                let d = (pos_of(x, &seg, j) - pos_of(x, &seg, l)).norm();
                total += 2.0 * pair_potential_radial(d, sigma, lambda, params)? * dt;
            }
        }
    }
    Ok(total)
}

/// Boundary term c(t); the band is taken from `params` (σ, Λ).
pub fn boundary_term(x: &[Vec2], path: &LevyPath, t: f64, params: &ModelParams) -> Result<f64> {
    let eval = ActionEvaluator::with_defaults(params, path.eps.clamp(1e-6, 1e6))?;
    Ok(eval.ladder(x, path, &[t], false)?[0].c)
}

/// Martingale term m(t) = jump sum − compensator over the band of `params`,
/// compensated against the same ε-truncated measure the path was sampled
/// with.
pub fn martingale_term(x: &[Vec2], path: &LevyPath, t: f64, params: &ModelParams) -> Result<f64> {
    if !path.eps.is_finite() {
        return Ok(0.0);
    }
    let eval = ActionEvaluator::with_defaults(params, path.eps)?;
    Ok(eval.ladder(x, path, &[t], false)?[0].m())
}

/// Direct action ∫₀^t ⟨U⁺_s | v_s⟩ ds − t·N·E^ren over the finite band of
/// `params`.
pub fn direct_action(x: &[Vec2], path: &LevyPath, t: f64, params: &ModelParams) -> Result<f64> {
    if !params.lambda.is_finite() {
        return Err(invalid!("direct action needs a finite ultraviolet cutoff"));
    }
    let eval = ActionEvaluator::with_defaults(params, path.eps.clamp(1e-6, 1e6))?;
    Ok(eval.ladder(x, path, &[t], true)?[0].direct.unwrap())
}

/// Renormalized action: direct integral on the low band (σ, κ) plus the
/// w − c + m decomposition on the high band (κ, Λ).
pub fn renormalized_action(
    x: &[Vec2],
    path: &LevyPath,
    t: f64,
    kappa: f64,
    params: &ModelParams,
) -> Result<ActionParts> {
    if !(kappa.is_finite() && kappa > params.sigma && kappa < params.lambda) {
        return Err(invalid!("need a finite splitting scale σ < κ < Λ"));
    }
    let eps = if path.eps.is_finite() { path.eps } else { 1.0 };
    let low = ModelParams {
        lambda: kappa,
        ..*params
    };
    let high = ModelParams {
        sigma: kappa,
        ..*params
    };
    let low_eval = ActionEvaluator::with_defaults(&low, eps)?;
    let high_eval = ActionEvaluator::with_defaults(&high, eps)?;
    let u_low = low_eval.ladder(x, path, &[t], true)?[0].direct.unwrap();
    let p = &high_eval.ladder(x, path, &[t], false)?[0];
    Ok(ActionParts {
        w: p.w,
        c: p.c,
        m: p.m(),
        u: u_low + p.u(),
        counter_term: t * params.n_particles as f64 * low_eval.e_ren_band,
        kappa,
    })
}
